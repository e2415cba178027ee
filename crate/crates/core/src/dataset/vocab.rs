use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetError};

pub const UNK: &str = "<unk>";
pub const SOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const PAD: &str = "<pad>";
pub const RESERVED: [&str; 4] = [UNK, SOS, EOS, PAD];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Nl,
    Ql,
}

impl Side {
    pub fn extension(self) -> &'static str {
        match self {
            Side::Nl => "nl",
            Side::Ql => "ql",
        }
    }
}

/// Dense token indexes with the reserved tokens at 0..4.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

impl Vocabulary {
    pub const UNK_ID: usize = 0;
    pub const SOS_ID: usize = 1;
    pub const EOS_ID: usize = 2;
    pub const PAD_ID: usize = 3;

    /// Reserved tokens followed by `tokens`, skipping repeats.
    pub fn from_tokens<I: IntoIterator<Item = String>>(tokens: I) -> Self {
        let mut all: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        for t in tokens {
            if !all.contains(&t) {
                all.push(t);
            }
        }
        all.into()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(Self::UNK_ID)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: usize) -> &str {
        self.tokens.get(id).map_or(UNK, String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn to_file_string(&self) -> String {
        self.tokens.iter().map(|t| format!("{t}\n")).collect()
    }

    /// Parses one token per line. The reserved tokens must come first.
    pub fn parse(text: &str) -> Result<Self, DatasetError> {
        let tokens: Vec<String> = text.lines().map(str::to_string).collect();
        if tokens.len() < RESERVED.len() || tokens[..RESERVED.len()] != RESERVED {
            return Err(DatasetError::InvalidArgument("vocabulary must start with the reserved tokens".into()));
        }
        Ok(tokens.into())
    }
}

/// Tokens of one side of `train` with count at least `min_count`, most
/// frequent first, ties broken lexicographically.
pub fn build_vocab(train: &Dataset, side: Side, min_count: usize) -> Result<Vocabulary, DatasetError> {
    if train.is_empty() {
        return Err(DatasetError::InvalidArgument("cannot build a vocabulary from an empty dataset".into()));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for p in &train.pairs {
        let toks: &[String] = match side {
            Side::Nl => &p.nl,
            Side::Ql => p.ql.tokens(),
        };
        for t in toks {
            *counts.entry(t).or_default() += 1;
        }
    }
    let mut entries: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|(t, c)| *c >= min_count && !RESERVED.contains(t))
        .collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    Ok(Vocabulary::from_tokens(entries.into_iter().map(|(t, _)| t.to_string())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::QAPair;
    use crate::sparql::TokenSeq;
    use crate::template::{CompositionKey, VariantKind};

    fn pair(nl: &str) -> QAPair {
        QAPair {
            nl: nl.split(' ').map(str::to_string).collect(),
            ql: TokenSeq::parse_line("ask"),
            template_id: "t".into(),
            key: CompositionKey { property_chain: vec![], variant: VariantKind::Plain },
            entities: vec![],
        }
    }

    #[test]
    fn frequency_then_lexicographic() {
        let d = Dataset::from_pairs([pair("a b"), pair("b c")]);
        let v = build_vocab(&d, Side::Nl, 1).unwrap();
        assert_eq!(v.tokens(), ["<unk>", "<s>", "</s>", "<pad>", "b", "a", "c"]);
        assert_eq!(v.id("zzz"), 0);
        assert_eq!(build_vocab(&d, Side::Nl, 2).unwrap().len(), 5);
        assert!(build_vocab(&Dataset::default(), Side::Nl, 1).is_err());
    }

    #[test]
    fn file_round_trip() {
        let v = Vocabulary::from_tokens(["x".to_string(), "y".to_string()]);
        assert_eq!(Vocabulary::parse(&v.to_file_string()).unwrap(), v);
        assert!(Vocabulary::parse("x\n").is_err());
    }
}
