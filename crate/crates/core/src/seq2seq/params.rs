use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{Real, Tensor};
use super::Attention;

/// One LSTM layer. `w` stacks the input weights (first `input` rows) over
/// the recurrent weights (last `hidden` rows); the four column groups are
/// the input, forget, cell and output gates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmWeights<T> {
    pub w: Tensor<T>,
    pub b: Tensor<T>,
}

impl<T: Real> LstmWeights<T> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self { w: Tensor::zeros(input + hidden, 4 * hidden), b: Tensor::zeros(1, 4 * hidden) }
    }

    pub fn hidden(&self) -> usize {
        self.w.cols / 4
    }

    pub fn input(&self) -> usize {
        self.w.rows - self.hidden()
    }
}

/// All trainable blocks of an encoder-decoder network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weights<T> {
    pub src_embed: Tensor<T>,
    pub tgt_embed: Tensor<T>,
    pub encoder: Vec<LstmWeights<T>>,
    pub decoder: Vec<LstmWeights<T>>,
    /// Bilinear score matrix (luong, scaled luong).
    pub w_a: Option<Tensor<T>>,
    /// Learned score scale (scaled luong), 1×1.
    pub scale: Option<Tensor<T>>,
    /// Additive score projections of encoder and decoder states (bahdanau).
    pub w_1: Option<Tensor<T>>,
    pub w_2: Option<Tensor<T>>,
    pub v: Option<Tensor<T>>,
    /// Maps `[context; state]` to the attentional state, 2H×H.
    pub combine: Option<Tensor<T>>,
    /// Output projection, H×|V_target|.
    pub output: Tensor<T>,
}

/// Shapes fixed by the architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub src_vocab: usize,
    pub tgt_vocab: usize,
    pub embed: usize,
    pub hidden: usize,
    pub layers: usize,
    pub attention: Attention,
}

impl<T: Real> Weights<T> {
    pub fn zeros(s: Shape) -> Self {
        let layer_in = |l: usize| if l == 0 { s.embed } else { s.hidden };
        let h = s.hidden;
        let opt = |on: bool, r: usize, c: usize| on.then(|| Tensor::zeros(r, c));
        let bilinear = matches!(s.attention, Attention::Luong | Attention::ScaledLuong);
        let additive = s.attention == Attention::Bahdanau;
        Self {
            src_embed: Tensor::zeros(s.src_vocab, s.embed),
            tgt_embed: Tensor::zeros(s.tgt_vocab, s.embed),
            encoder: (0..s.layers).map(|l| LstmWeights::zeros(layer_in(l), h)).collect(),
            decoder: (0..s.layers).map(|l| LstmWeights::zeros(layer_in(l), h)).collect(),
            w_a: opt(bilinear, h, h),
            scale: opt(s.attention == Attention::ScaledLuong, 1, 1),
            w_1: opt(additive, h, h),
            w_2: opt(additive, h, h),
            v: opt(additive, 1, h),
            combine: opt(s.attention != Attention::None, 2 * h, h),
            output: Tensor::zeros(h, s.tgt_vocab),
        }
    }

    pub fn hidden(&self) -> usize {
        self.output.rows
    }

    /// Blocks with their checkpoint names, in a fixed order.
    pub fn named(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = vec![("src_embed".to_string(), &self.src_embed), ("tgt_embed".to_string(), &self.tgt_embed)];
        for (side, layers) in [("encoder", &self.encoder), ("decoder", &self.decoder)] {
            for (i, l) in layers.iter().enumerate() {
                out.push((format!("{side}.{i}.w"), &l.w));
                out.push((format!("{side}.{i}.b"), &l.b));
            }
        }
        let optional = [
            ("attention.w_a", &self.w_a),
            ("attention.scale", &self.scale),
            ("attention.w_1", &self.w_1),
            ("attention.w_2", &self.w_2),
            ("attention.v", &self.v),
            ("combine", &self.combine),
        ];
        for (name, t) in optional {
            if let Some(t) = t {
                out.push((name.to_string(), t));
            }
        }
        out.push(("output".to_string(), &self.output));
        out
    }

    /// Mutable blocks in the same order as [`Weights::named`].
    pub fn blocks_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = vec![&mut self.src_embed, &mut self.tgt_embed];
        for layers in [&mut self.encoder, &mut self.decoder] {
            for l in layers.iter_mut() {
                out.push(&mut l.w);
                out.push(&mut l.b);
            }
        }
        for t in [&mut self.w_a, &mut self.scale, &mut self.w_1, &mut self.w_2, &mut self.v, &mut self.combine]
            .into_iter()
            .flatten()
        {
            out.push(t);
        }
        out.push(&mut self.output);
        out
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.blocks_mut().into_iter().for_each(Tensor::fill_zero);
        z
    }

    pub fn cast<U: Real>(&self) -> Weights<U> {
        let lstm = |ls: &Vec<LstmWeights<T>>| ls.iter().map(|l| LstmWeights { w: l.w.cast(), b: l.b.cast() }).collect();
        let opt = |t: &Option<Tensor<T>>| t.as_ref().map(Tensor::cast);
        Weights {
            src_embed: self.src_embed.cast(),
            tgt_embed: self.tgt_embed.cast(),
            encoder: lstm(&self.encoder),
            decoder: lstm(&self.decoder),
            w_a: opt(&self.w_a),
            scale: opt(&self.scale),
            w_1: opt(&self.w_1),
            w_2: opt(&self.w_2),
            v: opt(&self.v),
            combine: opt(&self.combine),
            output: self.output.cast(),
        }
    }

    /// Uniform(-r, r) everywhere except the attention scale, which starts
    /// at 1.
    pub fn init_uniform<R: Rng>(&mut self, rng: &mut R, r: f64) {
        for t in self.blocks_mut() {
            for x in &mut t.data {
                *x = T::from_double(rng.gen_range(-r..r));
            }
        }
        if let Some(s) = &mut self.scale {
            s.data[0] = T::one();
        }
    }

    pub fn all_finite(&self) -> bool {
        self.named().iter().all(|(_, t)| t.data.iter().all(|x| x.is_finite()))
    }

    pub fn param_count(&self) -> usize {
        self.named().iter().map(|(_, t)| t.data.len()).sum()
    }
}
