//! Batched forward and backward passes.
//!
//! Sequences are stored time-major: element `(t, b, k)` of a `T×B×K`
//! buffer lives at `(t * B + b) * K + k`. The decoder does not feed the
//! attentional state back as input, so the attention layer runs over all
//! decoder steps at once after the decoder LSTM stack.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::params::{LstmWeights, Weights};
use super::tensor::{gemm, gemm_strided, sigmoid, Real, View};
use super::Attention;
use crate::dataset::Vocabulary;

pub(crate) struct LstmCache<T> {
    steps: usize,
    batch: usize,
    x: Vec<T>,
    /// `(steps + 1) × B × H`, index 0 holds the initial state.
    h: Vec<T>,
    c: Vec<T>,
    /// Activated gates (i, f, g, o), `steps × B × 4H`.
    gates: Vec<T>,
    active: Vec<bool>,
}

impl<T: Real> LstmCache<T> {
    fn hidden(&self) -> usize {
        self.h.len() / ((self.steps + 1) * self.batch)
    }

    /// Outputs of steps `1..=steps`.
    pub(crate) fn outputs(&self) -> &[T] {
        &self.h[self.batch * self.hidden()..]
    }

    pub(crate) fn final_h(&self) -> &[T] {
        let n = self.batch * self.hidden();
        &self.h[self.steps * n..]
    }

    pub(crate) fn final_c(&self) -> &[T] {
        let n = self.batch * self.hidden();
        &self.c[self.steps * n..]
    }
}

/// Runs one layer over `steps` time steps. Inactive (padded) positions
/// carry the previous state through unchanged.
pub(crate) fn lstm_forward<T: Real>(
    w: &LstmWeights<T>,
    x: Vec<T>,
    steps: usize,
    batch: usize,
    active: Vec<bool>,
    h0: &[T],
    c0: &[T],
) -> LstmCache<T> {
    let hid = w.hidden();
    let input = w.input();
    let g4 = 4 * hid;
    let bh = batch * hid;
    let mut gates = Vec::with_capacity(steps * batch * g4);
    for _ in 0..steps * batch {
        gates.extend_from_slice(&w.b.data);
    }
    gemm(View::new(&x, steps * batch, input), w.w.rows_view(0, input), T::one(), &mut gates);

    let mut h = vec![T::zero(); (steps + 1) * bh];
    let mut c = vec![T::zero(); (steps + 1) * bh];
    h[..bh].copy_from_slice(h0);
    c[..bh].copy_from_slice(c0);
    for t in 0..steps {
        let (past, future) = h.split_at_mut((t + 1) * bh);
        let h_prev = &past[t * bh..];
        let h_next = &mut future[..bh];
        let g = &mut gates[t * batch * g4..(t + 1) * batch * g4];
        gemm(View::new(h_prev, batch, hid), w.w.rows_view(input, hid), T::one(), g);
        let (c_past, c_future) = c.split_at_mut((t + 1) * bh);
        let c_prev = &c_past[t * bh..];
        let c_next = &mut c_future[..bh];
        for b in 0..batch {
            let row = &mut g[b * g4..(b + 1) * g4];
            let r = b * hid;
            if !active[t * batch + b] {
                h_next[r..r + hid].copy_from_slice(&h_prev[r..r + hid]);
                c_next[r..r + hid].copy_from_slice(&c_prev[r..r + hid]);
                row.iter_mut().for_each(|x| *x = T::zero());
                continue;
            }
            for k in 0..hid {
                let i = sigmoid(row[k]);
                let f = sigmoid(row[hid + k]);
                let gg = row[2 * hid + k].tanh();
                let o = sigmoid(row[3 * hid + k]);
                row[k] = i;
                row[hid + k] = f;
                row[2 * hid + k] = gg;
                row[3 * hid + k] = o;
                let cn = f * c_prev[r + k] + i * gg;
                c_next[r + k] = cn;
                h_next[r + k] = o * cn.tanh();
            }
        }
    }
    LstmCache { steps, batch, x, h, c, gates, active }
}

/// Backpropagates through one layer. `dh_out` is the gradient on the
/// outputs of every step; `dh_last`/`dc_last` on the final state.
/// Returns gradients on the input and on the initial state.
pub(crate) fn lstm_backward<T: Real>(
    w: &LstmWeights<T>,
    cache: &LstmCache<T>,
    dh_out: &[T],
    mut dh: Vec<T>,
    mut dc: Vec<T>,
    grad: &mut LstmWeights<T>,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let (steps, batch) = (cache.steps, cache.batch);
    let hid = w.hidden();
    let input = w.input();
    let g4 = 4 * hid;
    let bh = batch * hid;
    let one = T::one();
    let mut da = vec![T::zero(); steps * batch * g4];
    for t in (0..steps).rev() {
        for (d, o) in dh.iter_mut().zip(&dh_out[t * bh..(t + 1) * bh]) {
            *d += *o;
        }
        let c_prev = &cache.c[t * bh..(t + 1) * bh];
        let c_cur = &cache.c[(t + 1) * bh..(t + 2) * bh];
        let gates = &cache.gates[t * batch * g4..(t + 1) * batch * g4];
        let da_t = &mut da[t * batch * g4..(t + 1) * batch * g4];
        let mut dh_prev = vec![T::zero(); bh];
        for b in 0..batch {
            let r = b * hid;
            if !cache.active[t * batch + b] {
                dh_prev[r..r + hid].copy_from_slice(&dh[r..r + hid]);
                continue;
            }
            let gr = &gates[b * g4..(b + 1) * g4];
            let dar = &mut da_t[b * g4..(b + 1) * g4];
            for k in 0..hid {
                let (i, f, g, o) = (gr[k], gr[hid + k], gr[2 * hid + k], gr[3 * hid + k]);
                let tc = c_cur[r + k].tanh();
                let dhk = dh[r + k];
                let dct = dc[r + k] + dhk * o * (one - tc * tc);
                dar[k] = dct * g * i * (one - i);
                dar[hid + k] = dct * c_prev[r + k] * f * (one - f);
                dar[2 * hid + k] = dct * i * (one - g * g);
                dar[3 * hid + k] = dhk * tc * o * (one - o);
                dc[r + k] = dct * f;
            }
        }
        gemm(View::new(da_t, batch, g4), w.w.rows_view(input, hid).t(), one, &mut dh_prev);
        dh = dh_prev;
    }
    let rows = steps * batch;
    let da_view = View::new(&da, rows, g4);
    gemm(View::new(&cache.x, rows, input).t(), da_view, one, &mut grad.w.data[..input * g4]);
    gemm(View::new(&cache.h[..rows * hid], rows, hid).t(), da_view, one, &mut grad.w.data[input * g4..]);
    for r in 0..rows {
        for (gb, d) in grad.b.data.iter_mut().zip(&da[r * g4..(r + 1) * g4]) {
            *gb += *d;
        }
    }
    let mut dx = vec![T::zero(); rows * input];
    gemm(da_view, w.w.rows_view(0, input).t(), T::zero(), &mut dx);
    (dx, dh, dc)
}

pub(crate) struct AttnCache<T> {
    /// `B × Lt × Ls` attention weights.
    pub alpha: Vec<T>,
    /// Unscaled bilinear scores (scaled luong).
    raw: Vec<T>,
    /// Projected encoder states: `S W_aᵀ` or `S W_1`, `Ls × B × H`.
    keys: Vec<T>,
    /// `Hd W_2` (bahdanau), `Lt × B × H`.
    query: Vec<T>,
    /// tanh activations (bahdanau), `B × Lt × Ls × H`.
    e: Vec<T>,
    ctx: Vec<T>,
    /// Attentional states `tanh([c; h] W_c)`, `Lt × B × H`.
    pub out: Vec<T>,
}

pub(crate) struct Dims {
    pub batch: usize,
    pub src_len: usize,
    pub tgt_len: usize,
    pub hidden: usize,
}

/// Attention over encoder outputs `s` for decoder outputs `hd`. Source
/// positions `j >= src_lens[b]` get zero weight.
pub(crate) fn attend<T: Real>(
    w: &Weights<T>,
    kind: Attention,
    s: &[T],
    src_lens: &[usize],
    hd: &[T],
    d: &Dims,
) -> AttnCache<T> {
    let (bsz, ls, lt, h) = (d.batch, d.src_len, d.tgt_len, d.hidden);
    let bh = bsz * h;
    let mut cache = AttnCache {
        alpha: Vec::new(),
        raw: Vec::new(),
        keys: Vec::new(),
        query: Vec::new(),
        e: Vec::new(),
        ctx: Vec::new(),
        out: Vec::new(),
    };
    if kind == Attention::None {
        cache.out = hd.to_vec();
        return cache;
    }
    let mut scores = vec![T::zero(); bsz * lt * ls];
    match kind {
        Attention::Luong | Attention::ScaledLuong => {
            let w_a = w.w_a.as_ref().expect("bilinear attention weights");
            cache.keys = vec![T::zero(); ls * bh];
            gemm(View::new(s, ls * bsz, h), w_a.view().t(), T::zero(), &mut cache.keys);
            for b in 0..bsz {
                let hd_b = View::strided(&hd[b * h..], lt, h, bh, 1);
                let k_b = View::strided(&cache.keys[b * h..], ls, h, bh, 1);
                gemm(hd_b, k_b.t(), T::zero(), &mut scores[b * lt * ls..(b + 1) * lt * ls]);
            }
            if kind == Attention::ScaledLuong {
                let g = w.scale.as_ref().expect("attention scale").data[0];
                cache.raw = scores.clone();
                scores.iter_mut().for_each(|x| *x = *x * g);
            }
        }
        Attention::Bahdanau => {
            let (w_1, w_2, v) = (w.w_1.as_ref().unwrap(), w.w_2.as_ref().unwrap(), w.v.as_ref().unwrap());
            cache.keys = vec![T::zero(); ls * bh];
            gemm(View::new(s, ls * bsz, h), w_1.view(), T::zero(), &mut cache.keys);
            cache.query = vec![T::zero(); lt * bh];
            gemm(View::new(hd, lt * bsz, h), w_2.view(), T::zero(), &mut cache.query);
            cache.e = vec![T::zero(); bsz * lt * ls * h];
            for b in 0..bsz {
                for t in 0..lt {
                    let q = &cache.query[(t * bsz + b) * h..][..h];
                    for j in 0..src_lens[b] {
                        let p = &cache.keys[(j * bsz + b) * h..][..h];
                        let e = &mut cache.e[((b * lt + t) * ls + j) * h..][..h];
                        let mut acc = T::zero();
                        for k in 0..h {
                            e[k] = (p[k] + q[k]).tanh();
                            acc += e[k] * v.data[k];
                        }
                        scores[(b * lt + t) * ls + j] = acc;
                    }
                }
            }
        }
        Attention::None => unreachable!(),
    }

    // Masked softmax over source positions.
    let mut alpha = scores;
    for b in 0..bsz {
        let len = src_lens[b];
        for t in 0..lt {
            let row = &mut alpha[(b * lt + t) * ls..][..ls];
            let max = row[..len].iter().copied().fold(T::neg_infinity(), T::max);
            let mut sum = T::zero();
            for x in &mut row[..len] {
                *x = (*x - max).exp();
                sum += *x;
            }
            for x in &mut row[..len] {
                *x = *x / sum;
            }
            row[len..].iter_mut().for_each(|x| *x = T::zero());
        }
    }

    let mut ctx = vec![T::zero(); lt * bh];
    for b in 0..bsz {
        let a_b = View::new(&alpha[b * lt * ls..(b + 1) * lt * ls], lt, ls);
        let s_b = View::strided(&s[b * h..], ls, h, bh, 1);
        gemm_strided(a_b, s_b, T::zero(), &mut ctx[b * h..], bh);
    }
    let wc = w.combine.as_ref().expect("combine weights");
    let mut out = vec![T::zero(); lt * bh];
    gemm(View::new(&ctx, lt * bsz, h), wc.rows_view(0, h), T::zero(), &mut out);
    gemm(View::new(hd, lt * bsz, h), wc.rows_view(h, h), T::one(), &mut out);
    out.iter_mut().for_each(|x| *x = x.tanh());
    cache.alpha = alpha;
    cache.ctx = ctx;
    cache.out = out;
    cache
}

/// Gradients of the attention layer given `d_out` on its outputs.
/// Returns gradients on the encoder outputs and the decoder outputs.
#[allow(clippy::too_many_arguments)]
pub(crate) fn attend_backward<T: Real>(
    w: &Weights<T>,
    kind: Attention,
    cache: &AttnCache<T>,
    s: &[T],
    src_lens: &[usize],
    hd: &[T],
    d: &Dims,
    d_out: Vec<T>,
    grad: &mut Weights<T>,
) -> (Vec<T>, Vec<T>) {
    let (bsz, ls, lt, h) = (d.batch, d.src_len, d.tgt_len, d.hidden);
    let bh = bsz * h;
    let one = T::one();
    let mut ds = vec![T::zero(); ls * bh];
    if kind == Attention::None {
        return (ds, d_out);
    }
    let mut dpre = d_out;
    for (g, y) in dpre.iter_mut().zip(&cache.out) {
        *g = *g * (one - *y * *y);
    }
    let wc = w.combine.as_ref().unwrap();
    let gwc = grad.combine.as_mut().unwrap();
    let dpre_v = View::new(&dpre, lt * bsz, h);
    gemm(View::new(&cache.ctx, lt * bsz, h).t(), dpre_v, one, &mut gwc.data[..h * h]);
    gemm(View::new(hd, lt * bsz, h).t(), dpre_v, one, &mut gwc.data[h * h..]);
    let mut dctx = vec![T::zero(); lt * bh];
    gemm(dpre_v, wc.rows_view(0, h).t(), T::zero(), &mut dctx);
    let mut dhd = vec![T::zero(); lt * bh];
    gemm(dpre_v, wc.rows_view(h, h).t(), T::zero(), &mut dhd);

    // Through the context vectors into alpha and the encoder states.
    let mut dscore = vec![T::zero(); bsz * lt * ls];
    for b in 0..bsz {
        let dctx_b = View::strided(&dctx[b * h..], lt, h, bh, 1);
        let s_b = View::strided(&s[b * h..], ls, h, bh, 1);
        gemm(dctx_b, s_b.t(), T::zero(), &mut dscore[b * lt * ls..(b + 1) * lt * ls]);
        let a_b = View::new(&cache.alpha[b * lt * ls..(b + 1) * lt * ls], lt, ls);
        gemm_strided(a_b.t(), dctx_b, one, &mut ds[b * h..], bh);
    }
    // Softmax: dscore = alpha * (dalpha - sum(alpha * dalpha)).
    for r in 0..bsz * lt {
        let a = &cache.alpha[r * ls..(r + 1) * ls];
        let g = &mut dscore[r * ls..(r + 1) * ls];
        let dot: T = a.iter().zip(g.iter()).map(|(x, y)| *x * *y).sum();
        for (gj, aj) in g.iter_mut().zip(a) {
            *gj = *aj * (*gj - dot);
        }
    }

    match kind {
        Attention::Luong | Attention::ScaledLuong => {
            if kind == Attention::ScaledLuong {
                let g = w.scale.as_ref().unwrap().data[0];
                let dg: T = dscore.iter().zip(&cache.raw).map(|(x, y)| *x * *y).sum();
                grad.scale.as_mut().unwrap().data[0] += dg;
                dscore.iter_mut().for_each(|x| *x = *x * g);
            }
            let mut dkeys = vec![T::zero(); ls * bh];
            for b in 0..bsz {
                let ds_b = View::new(&dscore[b * lt * ls..(b + 1) * lt * ls], lt, ls);
                let k_b = View::strided(&cache.keys[b * h..], ls, h, bh, 1);
                gemm_strided(ds_b, k_b, one, &mut dhd[b * h..], bh);
                let hd_b = View::strided(&hd[b * h..], lt, h, bh, 1);
                gemm_strided(ds_b.t(), hd_b, one, &mut dkeys[b * h..], bh);
            }
            // keys = S W_aᵀ
            let w_a = w.w_a.as_ref().unwrap();
            let dk = View::new(&dkeys, ls * bsz, h);
            gemm(dk.t(), View::new(s, ls * bsz, h), one, &mut grad.w_a.as_mut().unwrap().data);
            gemm(dk, w_a.view(), one, &mut ds);
        }
        Attention::Bahdanau => {
            let v = w.v.as_ref().unwrap();
            let mut dkeys = vec![T::zero(); ls * bh];
            let mut dquery = vec![T::zero(); lt * bh];
            let gv = &mut grad.v.as_mut().unwrap().data;
            for b in 0..bsz {
                for t in 0..lt {
                    let dq = &mut dquery[(t * bsz + b) * h..][..h];
                    for j in 0..src_lens[b] {
                        let dsc = dscore[(b * lt + t) * ls + j];
                        let e = &cache.e[((b * lt + t) * ls + j) * h..][..h];
                        let dp = &mut dkeys[(j * bsz + b) * h..][..h];
                        for k in 0..h {
                            gv[k] += dsc * e[k];
                            let de = dsc * v.data[k] * (one - e[k] * e[k]);
                            dp[k] += de;
                            dq[k] += de;
                        }
                    }
                }
            }
            let dk = View::new(&dkeys, ls * bsz, h);
            gemm(View::new(s, ls * bsz, h).t(), dk, one, &mut grad.w_1.as_mut().unwrap().data);
            gemm(dk, w.w_1.as_ref().unwrap().view().t(), one, &mut ds);
            let dq = View::new(&dquery, lt * bsz, h);
            gemm(View::new(hd, lt * bsz, h).t(), dq, one, &mut grad.w_2.as_mut().unwrap().data);
            gemm(dq, w.w_2.as_ref().unwrap().view().t(), one, &mut dhd);
        }
        Attention::None => unreachable!(),
    }
    (ds, dhd)
}

/// Inverted dropout mask with keep probability `1 - p`, or `None` when
/// dropout is inactive.
fn dropout_mask<T: Real>(n: usize, p: f64, rng: Option<&mut ChaCha8Rng>) -> Option<Vec<T>> {
    let rng = rng?;
    if p <= 0.0 {
        return None;
    }
    let keep = T::from_double(1.0 / (1.0 - p));
    Some((0..n).map(|_| if rng.gen::<f64>() < p { T::zero() } else { keep }).collect())
}

fn apply_mask<T: Real>(x: &mut [T], mask: &Option<Vec<T>>) {
    if let Some(m) = mask {
        for (a, b) in x.iter_mut().zip(m) {
            *a = *a * *b;
        }
    }
}

fn embed<T: Real>(table: &super::tensor::Tensor<T>, ids: &[usize]) -> Vec<T> {
    let mut out = Vec::with_capacity(ids.len() * table.cols);
    for &i in ids {
        out.extend_from_slice(table.row(i));
    }
    out
}

fn scatter_rows<T: Real>(table: &mut super::tensor::Tensor<T>, ids: &[usize], d: &[T]) {
    let e = table.cols;
    for (r, &i) in ids.iter().enumerate() {
        for (g, x) in table.row_mut(i).iter_mut().zip(&d[r * e..(r + 1) * e]) {
            *g += *x;
        }
    }
}

/// A padded batch of (source, target) id sequences.
pub(crate) struct Batch {
    pub batch: usize,
    pub src_len: usize,
    pub tgt_len: usize,
    pub src_ids: Vec<usize>,
    pub src_active: Vec<bool>,
    pub src_lens: Vec<usize>,
    pub dec_in: Vec<usize>,
    pub dec_out: Vec<usize>,
    pub dec_mask: Vec<bool>,
}

impl Batch {
    /// Appends `</s>` to sources, wraps targets in `<s>`/`</s>`.
    pub fn new(pairs: &[(&[usize], &[usize])]) -> Self {
        let batch = pairs.len();
        let src_len = pairs.iter().map(|p| p.0.len() + 1).max().unwrap_or(1);
        let tgt_len = pairs.iter().map(|p| p.1.len() + 1).max().unwrap_or(1);
        let mut b = Batch {
            batch,
            src_len,
            tgt_len,
            src_ids: vec![Vocabulary::PAD_ID; src_len * batch],
            src_active: vec![false; src_len * batch],
            src_lens: pairs.iter().map(|p| p.0.len() + 1).collect(),
            dec_in: vec![Vocabulary::PAD_ID; tgt_len * batch],
            dec_out: vec![Vocabulary::PAD_ID; tgt_len * batch],
            dec_mask: vec![false; tgt_len * batch],
        };
        for (i, (src, tgt)) in pairs.iter().enumerate() {
            for t in 0..=src.len() {
                b.src_ids[t * batch + i] = if t < src.len() { src[t] } else { Vocabulary::EOS_ID };
                b.src_active[t * batch + i] = true;
            }
            for t in 0..=tgt.len() {
                b.dec_in[t * batch + i] = if t == 0 { Vocabulary::SOS_ID } else { tgt[t - 1] };
                b.dec_out[t * batch + i] = if t < tgt.len() { tgt[t] } else { Vocabulary::EOS_ID };
                b.dec_mask[t * batch + i] = true;
            }
        }
        b
    }

    pub fn tokens(&self) -> usize {
        self.dec_mask.iter().filter(|m| **m).count()
    }
}

pub(crate) struct Encoded<T> {
    pub layers: Vec<LstmCache<T>>,
    masks: Vec<Option<Vec<T>>>,
}

impl<T: Real> Encoded<T> {
    pub fn top(&self) -> &[T] {
        self.layers.last().expect("at least one layer").outputs()
    }
}

/// Runs a stack of LSTM layers. Dropout masks the input of every layer
/// above the first.
fn stack_forward<T: Real>(
    layers: &[LstmWeights<T>],
    x0: Vec<T>,
    steps: usize,
    batch: usize,
    active: &[bool],
    init: Option<&[LstmCache<T>]>,
    dropout: f64,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Encoded<T> {
    let mut caches: Vec<LstmCache<T>> = Vec::with_capacity(layers.len());
    let mut masks = Vec::with_capacity(layers.len());
    let mut x = x0;
    for (l, w) in layers.iter().enumerate() {
        let hid = w.hidden();
        let mask = if l == 0 { None } else { dropout_mask(x.len(), dropout, rng.as_deref_mut()) };
        apply_mask(&mut x, &mask);
        masks.push(mask);
        let zeros = vec![T::zero(); batch * hid];
        let (h0, c0) = match init {
            Some(enc) => (enc[l].final_h(), enc[l].final_c()),
            None => (&zeros[..], &zeros[..]),
        };
        let cache = lstm_forward(w, x, steps, batch, active.to_vec(), h0, c0);
        x = cache.outputs().to_vec();
        caches.push(cache);
    }
    Encoded { layers: caches, masks }
}

/// Backward through a stack. Returns the gradient on the first layer's
/// input and on each layer's initial (h, c).
fn stack_backward<T: Real>(
    layers: &[LstmWeights<T>],
    enc: &Encoded<T>,
    mut d_top: Vec<T>,
    d_final: Option<Vec<(Vec<T>, Vec<T>)>>,
    grads: &mut [LstmWeights<T>],
) -> (Vec<T>, Vec<(Vec<T>, Vec<T>)>) {
    let mut d_init = Vec::with_capacity(layers.len());
    let mut finals = d_final;
    for l in (0..layers.len()).rev() {
        let cache = &enc.layers[l];
        let bh = cache.batch * layers[l].hidden();
        let (dh, dc) = match finals.as_mut() {
            Some(f) => std::mem::take(&mut f[l]),
            None => (vec![T::zero(); bh], vec![T::zero(); bh]),
        };
        let (mut dx, dh0, dc0) = lstm_backward(&layers[l], cache, &d_top, dh, dc, &mut grads[l]);
        apply_mask(&mut dx, &enc.masks[l]);
        d_init.push((dh0, dc0));
        d_top = dx;
    }
    d_init.reverse();
    (d_top, d_init)
}

pub(crate) struct Config {
    pub attention: Attention,
    pub dropout: f64,
}

pub(crate) struct BatchResult<T> {
    /// Mean cross-entropy per target token.
    pub loss: T,
    /// `B × Lt × Ls` attention weights (empty without attention).
    pub alpha: Vec<T>,
}

/// Teacher-forced loss on a batch. With `grad`, accumulates the gradient
/// of the mean loss; with `rng`, applies dropout.
pub(crate) fn run_batch<T: Real>(
    w: &Weights<T>,
    cfg: &Config,
    batch: &Batch,
    mut rng: Option<&mut ChaCha8Rng>,
    grad: Option<&mut Weights<T>>,
) -> BatchResult<T> {
    let bsz = batch.batch;
    let h = w.hidden();
    let vocab = w.output.cols;
    let enc = stack_forward(
        &w.encoder,
        embed(&w.src_embed, &batch.src_ids),
        batch.src_len,
        bsz,
        &batch.src_active,
        None,
        cfg.dropout,
        rng.as_deref_mut(),
    );
    let dec_active = vec![true; batch.tgt_len * bsz];
    let dec = stack_forward(
        &w.decoder,
        embed(&w.tgt_embed, &batch.dec_in),
        batch.tgt_len,
        bsz,
        &dec_active,
        Some(&enc.layers),
        cfg.dropout,
        rng.as_deref_mut(),
    );
    let dims = Dims { batch: bsz, src_len: batch.src_len, tgt_len: batch.tgt_len, hidden: h };
    let att = attend(w, cfg.attention, enc.top(), &batch.src_lens, dec.top(), &dims);
    let mut hidden_out = att.out.clone();
    let out_mask = dropout_mask(hidden_out.len(), cfg.dropout, rng.as_deref_mut());
    apply_mask(&mut hidden_out, &out_mask);

    let rows = batch.tgt_len * bsz;
    let mut logits = vec![T::zero(); rows * vocab];
    gemm(View::new(&hidden_out, rows, h), w.output.view(), T::zero(), &mut logits);
    let tokens = batch.tokens();
    let norm = T::from_double(tokens as f64);
    let mut loss = T::zero();
    // Softmax in place; logits become probabilities.
    for r in 0..rows {
        if !batch.dec_mask[r] {
            continue;
        }
        let row = &mut logits[r * vocab..(r + 1) * vocab];
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            sum += *x;
        }
        for x in row.iter_mut() {
            *x = *x / sum;
        }
        loss -= row[batch.dec_out[r]].ln();
    }
    let loss = loss / norm;

    if let Some(grad) = grad {
        let mut dlogits = logits;
        for r in 0..rows {
            let row = &mut dlogits[r * vocab..(r + 1) * vocab];
            if !batch.dec_mask[r] {
                row.iter_mut().for_each(|x| *x = T::zero());
                continue;
            }
            row[batch.dec_out[r]] -= T::one();
            row.iter_mut().for_each(|x| *x = *x / norm);
        }
        let dl = View::new(&dlogits, rows, vocab);
        gemm(View::new(&hidden_out, rows, h).t(), dl, T::one(), &mut grad.output.data);
        let mut d_att = vec![T::zero(); rows * h];
        gemm(dl, w.output.view().t(), T::zero(), &mut d_att);
        apply_mask(&mut d_att, &out_mask);
        let (ds, dhd) = attend_backward(w, cfg.attention, &att, enc.top(), &batch.src_lens, dec.top(), &dims, d_att, grad);
        let (dx_dec, d_init) = stack_backward(&w.decoder, &dec, dhd, None, &mut grad.decoder);
        scatter_rows(&mut grad.tgt_embed, &batch.dec_in, &dx_dec);
        let (dx_enc, _) = stack_backward(&w.encoder, &enc, ds, Some(d_init), &mut grad.encoder);
        scatter_rows(&mut grad.src_embed, &batch.src_ids, &dx_enc);
    }
    BatchResult { loss, alpha: att.alpha }
}

/// Greedy decoding of one source sequence. Returns target ids (without
/// `</s>`) and one attention row over the source (with `</s>`) per
/// emitted token.
pub(crate) fn greedy<T: Real>(w: &Weights<T>, attention: Attention, src: &[usize], max_len: usize) -> (Vec<usize>, Vec<Vec<T>>) {
    let batch = Batch::new(&[(src, &[][..])]);
    let h = w.hidden();
    let enc = stack_forward(&w.encoder, embed(&w.src_embed, &batch.src_ids), batch.src_len, 1, &batch.src_active, None, 0.0, None);
    let mut state: Vec<(Vec<T>, Vec<T>)> =
        enc.layers.iter().map(|c| (c.final_h().to_vec(), c.final_c().to_vec())).collect();
    let dims = Dims { batch: 1, src_len: batch.src_len, tgt_len: 1, hidden: h };
    let mut prev = Vocabulary::SOS_ID;
    let mut out = Vec::new();
    let mut rows = Vec::new();
    for _ in 0..max_len {
        let mut x = w.tgt_embed.row(prev).to_vec();
        for (l, layer) in w.decoder.iter().enumerate() {
            let cache = lstm_forward(layer, x, 1, 1, vec![true], &state[l].0, &state[l].1);
            state[l] = (cache.final_h().to_vec(), cache.final_c().to_vec());
            x = cache.outputs().to_vec();
        }
        let att = attend(w, attention, enc.top(), &batch.src_lens, &x, &dims);
        let mut logits = vec![T::zero(); w.output.cols];
        gemm(View::new(&att.out, 1, h), w.output.view(), T::zero(), &mut logits);
        let mut best = 0;
        for (i, v) in logits.iter().enumerate() {
            if *v > logits[best] {
                best = i;
            }
        }
        if best == Vocabulary::EOS_ID {
            break;
        }
        out.push(best);
        rows.push(att.alpha);
        prev = best;
    }
    (out, rows)
}
