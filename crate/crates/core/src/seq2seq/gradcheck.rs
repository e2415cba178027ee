use super::network::{run_batch, Batch, Config};
use super::params::Weights;
use super::tensor::Real;
use super::{Attention, Model};

fn loss(w: &Weights<f64>, cfg: &Config, batch: &Batch) -> f64 {
    run_batch(w, cfg, batch, None, None).loss
}

/// Mean teacher-forced cross-entropy per target token over `pairs`,
/// dropout off, at the precision of `weights`.
pub fn mean_loss<T: Real>(weights: &Weights<T>, attention: Attention, pairs: &[(&[usize], &[usize])]) -> T {
    run_batch(weights, &Config { attention, dropout: 0.0 }, &Batch::new(pairs), None, None).loss
}

/// Compares analytic gradients against central differences on every
/// parameter block, in double precision. Returns the largest per-block
/// relative error `‖g_a - g_n‖ / (‖g_a‖ + ‖g_n‖ + 1e-12)`.
pub fn grad_check_weights(
    weights: &Weights<f64>,
    attention: Attention,
    pairs: &[(&[usize], &[usize])],
    epsilon: f64,
) -> f64 {
    let batch = Batch::new(pairs);
    let cfg = Config { attention, dropout: 0.0 };
    let mut analytic = weights.zeros_like();
    run_batch(weights, &cfg, &batch, None, Some(&mut analytic));
    let analytic_blocks: Vec<Vec<f64>> = analytic.named().into_iter().map(|(_, t)| t.data.clone()).collect();

    let mut probe = weights.clone();
    let block_count = analytic_blocks.len();
    let mut worst: f64 = 0.0;
    for bi in 0..block_count {
        let len = analytic_blocks[bi].len();
        let mut numeric = vec![0.0; len];
        for (i, n) in numeric.iter_mut().enumerate() {
            let original = probe.blocks_mut()[bi].data[i];
            probe.blocks_mut()[bi].data[i] = original + epsilon;
            let plus = loss(&probe, &cfg, &batch);
            probe.blocks_mut()[bi].data[i] = original - epsilon;
            let minus = loss(&probe, &cfg, &batch);
            probe.blocks_mut()[bi].data[i] = original;
            *n = (plus - minus) / (2.0 * epsilon);
        }
        let a = &analytic_blocks[bi];
        let diff = a.iter().zip(&numeric).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nn = numeric.iter().map(|x| x * x).sum::<f64>().sqrt();
        worst = worst.max(diff / (na + nn + 1e-12));
    }
    worst
}

/// [`grad_check_weights`] on a model's parameters promoted to `f64`.
pub fn grad_check(model: &Model, pairs: &[(&[usize], &[usize])], epsilon: f64) -> f64 {
    grad_check_weights(&model.weights.cast::<f64>(), model.config.attention, pairs, epsilon)
}

