mod common;

use std::sync::OnceLock;

use proptest::prelude::*;

use nspm::dataset::{build_dataset, split, Dataset, DatasetConfig, SplitPolicy};
use nspm::kg::fetch_class_metadata;
use nspm::template::{generate_to_depth, label_lexicalizer};

use common::split_checks::{closed, frequency, holdout, partition, Check};

fn dataset() -> &'static Dataset {
    static DATA: OnceLock<Dataset> = OnceLock::new();
    DATA.get_or_init(|| {
        let graph = common::graph();
        let meta = fetch_class_metadata(&graph, &common::class()).unwrap();
        let templates = generate_to_depth(&meta, &graph, 2, &label_lexicalizer).unwrap();
        build_dataset(&templates, &graph, &DatasetConfig::default(), &common::prefixes()).unwrap()
    })
}

fn ok(c: Check) -> Result<(), TestCaseError> {
    c.map_err(TestCaseError::fail)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn random_split_partitions_the_dataset(seed in any::<u64>()) {
        let s = split(dataset(), &SplitPolicy::random(), seed).unwrap();
        ok(partition(dataset(), &s, true))?;
        let n = dataset().len();
        prop_assert_eq!(s.valid.len(), n / 10);
        prop_assert_eq!(s.test.len(), n / 10);
    }

    #[test]
    fn closed_vocabulary_split(seed in any::<u64>()) {
        let s = split(dataset(), &"b".parse().unwrap(), seed).unwrap();
        ok(partition(dataset(), &s, true))?;
        ok(closed(&s))?;
    }

    #[test]
    fn frequency_split(seed in any::<u64>()) {
        let s = split(dataset(), &"b,c".parse().unwrap(), seed).unwrap();
        ok(partition(dataset(), &s, false))?;
        ok(closed(&s))?;
        ok(frequency(&s, 3))?;
    }

    #[test]
    fn compositional_split(seed in any::<u64>()) {
        let s = split(dataset(), &"d".parse().unwrap(), seed).unwrap();
        ok(partition(dataset(), &s, true))?;
        ok(holdout(&s))?;
    }

    #[test]
    fn combined_split(seed in any::<u64>()) {
        let s = split(dataset(), &"b,c,d".parse().unwrap(), seed).unwrap();
        ok(partition(dataset(), &s, false))?;
        ok(closed(&s))?;
        ok(frequency(&s, 3))?;
        ok(holdout(&s))?;
    }

    #[test]
    fn split_is_deterministic(seed in any::<u64>()) {
        let policy: SplitPolicy = "b,c,d".parse().unwrap();
        prop_assert_eq!(split(dataset(), &policy, seed).unwrap(), split(dataset(), &policy, seed).unwrap());
    }
}
