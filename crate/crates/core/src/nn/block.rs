//! Pre-norm transformer blocks and the stacked encoder used by both planners.
//!
//! ```text
//! h = x + Attn(LN₁(x))
//! y = h + W₂·gelu(W₁·LN₂(h) + b₁) + b₂
//! ```

use rand::Rng;

use super::attention::{attend, attend_backward, AttentionCache, AttentionParams, IntervalEmbeddings, IntervalMatrix, TimeInputs};
use super::params::{join, Parameters};
use super::tensor::Tensor2;
use crate::error::{Error, Result};

const LN_EPS: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct LayerNorm {
    pub gain: Tensor2,
    pub bias: Tensor2,
}

struct LayerNormCache {
    xhat: Tensor2,
    inv: Vec<f64>,
}

impl LayerNorm {
    pub fn new(d: usize) -> Self {
        LayerNorm {
            gain: Tensor2::filled(1, d, 1.0),
            bias: Tensor2::zeros(1, d),
        }
    }

    fn forward(&self, x: &Tensor2) -> (Tensor2, LayerNormCache) {
        let (n, d) = x.shape();
        let mut y = Tensor2::zeros(n, d);
        let mut xhat = Tensor2::zeros(n, d);
        let mut inv = Vec::with_capacity(n);
        for i in 0..n {
            let row = x.row(i);
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let s = 1.0 / (var + LN_EPS).sqrt();
            inv.push(s);
            for c in 0..d {
                let xh = (row[c] - mean) * s;
                xhat.set(i, c, xh);
                y.set(i, c, xh * self.gain.data()[c] + self.bias.data()[c]);
            }
        }
        (y, LayerNormCache { xhat, inv })
    }

    fn backward(&self, cache: &LayerNormCache, dy: &Tensor2, grads: &mut LayerNorm) -> Tensor2 {
        let (n, d) = dy.shape();
        let mut dx = Tensor2::zeros(n, d);
        let mut dxhat = vec![0.0; d];
        for i in 0..n {
            let g = dy.row(i);
            let xh = cache.xhat.row(i);
            for c in 0..d {
                grads.gain.data_mut()[c] += g[c] * xh[c];
                grads.bias.data_mut()[c] += g[c];
                dxhat[c] = g[c] * self.gain.data()[c];
            }
            let m1 = dxhat.iter().sum::<f64>() / d as f64;
            let m2 = dxhat.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / d as f64;
            let out = dx.row_mut(i);
            for c in 0..d {
                out[c] = cache.inv[i] * (dxhat[c] - m1 - xh[c] * m2);
            }
        }
        dx
    }
}

impl Parameters for LayerNorm {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor2)) {
        f(&join(prefix, "gain"), &self.gain);
        f(&join(prefix, "bias"), &self.bias);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor2)) {
        f(&join(prefix, "gain"), &mut self.gain);
        f(&join(prefix, "bias"), &mut self.bias);
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // √(2/π)

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + 0.044715 * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeedForward {
    pub w1: Tensor2,
    pub b1: Tensor2,
    pub w2: Tensor2,
    pub b2: Tensor2,
}

struct FeedForwardCache {
    input: Tensor2,
    pre: Tensor2,
    act: Tensor2,
}

impl FeedForward {
    pub fn new(d: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        FeedForward {
            w1: Tensor2::randn(d, hidden, (1.0 / d as f64).sqrt(), rng),
            b1: Tensor2::zeros(1, hidden),
            w2: Tensor2::randn(hidden, d, (1.0 / hidden as f64).sqrt(), rng),
            b2: Tensor2::zeros(1, d),
        }
    }

    fn forward(&self, x: &Tensor2) -> Result<(Tensor2, FeedForwardCache)> {
        let mut pre = x.matmul(&self.w1)?;
        for i in 0..pre.rows() {
            for (v, b) in pre.row_mut(i).iter_mut().zip(self.b1.data()) {
                *v += b;
            }
        }
        let mut act = pre.clone();
        act.data_mut().iter_mut().for_each(|v| *v = gelu(*v));
        let mut y = act.matmul(&self.w2)?;
        for i in 0..y.rows() {
            for (v, b) in y.row_mut(i).iter_mut().zip(self.b2.data()) {
                *v += b;
            }
        }
        Ok((
            y,
            FeedForwardCache {
                input: x.clone(),
                pre,
                act,
            },
        ))
    }

    fn backward(&self, cache: &FeedForwardCache, dy: &Tensor2, grads: &mut FeedForward) -> Result<Tensor2> {
        cache.act.t_matmul_acc(dy, &mut grads.w2)?;
        for i in 0..dy.rows() {
            for (g, v) in grads.b2.data_mut().iter_mut().zip(dy.row(i)) {
                *g += v;
            }
        }
        let mut dpre = dy.matmul_t(&self.w2)?;
        for (g, &p) in dpre.data_mut().iter_mut().zip(cache.pre.data()) {
            *g *= gelu_grad(p);
        }
        cache.input.t_matmul_acc(&dpre, &mut grads.w1)?;
        for i in 0..dpre.rows() {
            for (g, v) in grads.b1.data_mut().iter_mut().zip(dpre.row(i)) {
                *g += v;
            }
        }
        dpre.matmul_t(&self.w1)
    }
}

impl Parameters for FeedForward {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor2)) {
        f(&join(prefix, "w1"), &self.w1);
        f(&join(prefix, "b1"), &self.b1);
        f(&join(prefix, "w2"), &self.w2);
        f(&join(prefix, "b2"), &self.b2);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor2)) {
        f(&join(prefix, "w1"), &mut self.w1);
        f(&join(prefix, "b1"), &mut self.b1);
        f(&join(prefix, "w2"), &mut self.w2);
        f(&join(prefix, "b2"), &mut self.b2);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub ln1: LayerNorm,
    pub attn: AttentionParams,
    pub ln2: LayerNorm,
    pub ffn: FeedForward,
}

pub(crate) struct BlockCache {
    ln1: LayerNormCache,
    attn: AttentionCache,
    ln2: LayerNormCache,
    ffn: FeedForwardCache,
}

impl Block {
    pub fn new(d: usize, n_heads: usize, ffn_dim: usize, rng: &mut impl Rng) -> Result<Self> {
        Ok(Block {
            ln1: LayerNorm::new(d),
            attn: AttentionParams::new(d, n_heads, rng)?,
            ln2: LayerNorm::new(d),
            ffn: FeedForward::new(d, ffn_dim, rng),
        })
    }

    /// A block whose residual branches are zeroed, so it maps `x` to `x`.
    pub fn identity(d: usize, n_heads: usize, ffn_dim: usize, rng: &mut impl Rng) -> Result<Self> {
        let mut b = Block::new(d, n_heads, ffn_dim, rng)?;
        b.attn.wo.fill(0.0);
        b.ffn.w2.fill(0.0);
        b.ffn.b2.fill(0.0);
        Ok(b)
    }

    pub(crate) fn forward(&self, time: Option<TimeInputs<'_>>, x: &Tensor2) -> Result<(Tensor2, BlockCache)> {
        let (u, ln1) = self.ln1.forward(x);
        let (a, attn) = attend(&self.attn, time, &u)?;
        let mut h = x.clone();
        h.add_assign(&a)?;
        let (v, ln2) = self.ln2.forward(&h);
        let (f, ffn) = self.ffn.forward(&v)?;
        let mut y = h;
        y.add_assign(&f)?;
        Ok((y, BlockCache { ln1, attn, ln2, ffn }))
    }

    pub(crate) fn backward(
        &self,
        time: Option<TimeInputs<'_>>,
        cache: &BlockCache,
        dy: &Tensor2,
        grads: &mut Block,
        tgrads: Option<&mut IntervalEmbeddings>,
    ) -> Result<Tensor2> {
        let dv = self.ffn.backward(&cache.ffn, dy, &mut grads.ffn)?;
        let mut dh = self.ln2.backward(&cache.ln2, &dv, &mut grads.ln2);
        dh.add_assign(dy)?;
        let du = attend_backward(&self.attn, time, &cache.attn, &dh, &mut grads.attn, tgrads)?;
        let mut dx = self.ln1.backward(&cache.ln1, &du, &mut grads.ln1);
        dx.add_assign(&dh)?;
        Ok(dx)
    }
}

impl Parameters for Block {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor2)) {
        self.ln1.visit(&join(prefix, "ln1"), f);
        self.attn.visit(&join(prefix, "attn"), f);
        self.ln2.visit(&join(prefix, "ln2"), f);
        self.ffn.visit(&join(prefix, "ffn"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor2)) {
        self.ln1.visit_mut(&join(prefix, "ln1"), f);
        self.attn.visit_mut(&join(prefix, "attn"), f);
        self.ln2.visit_mut(&join(prefix, "ln2"), f);
        self.ffn.visit_mut(&join(prefix, "ffn"), f);
    }
}

/// A stack of blocks, optionally sharing one set of interval embeddings.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoder {
    pub blocks: Vec<Block>,
    pub time: Option<IntervalEmbeddings>,
}

pub struct EncoderTrace {
    active: Vec<usize>,
    n: usize,
    intervals: Vec<usize>,
    positions: Vec<usize>,
    caches: Vec<BlockCache>,
}

impl EncoderTrace {
    pub fn active(&self) -> &[usize] {
        &self.active
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EncoderShape {
    pub d: usize,
    pub n_heads: usize,
    pub ffn_dim: usize,
    pub depth: usize,
}

impl Encoder {
    pub fn new(shape: EncoderShape, time: Option<(usize, usize)>, rng: &mut impl Rng) -> Result<Self> {
        let blocks = (0..shape.depth)
            .map(|_| Block::new(shape.d, shape.n_heads, shape.ffn_dim, rng))
            .collect::<Result<Vec<_>>>()?;
        let time = match time {
            Some((k_max, max_len)) => Some(IntervalEmbeddings::new(shape.d, k_max, max_len, rng)?),
            None => None,
        };
        Ok(Encoder { blocks, time })
    }

    pub fn is_time_aware(&self) -> bool {
        self.time.is_some()
    }

    /// Runs the stack over the unmasked rows of `x`; masked output rows are zero.
    pub fn forward(&self, x: &Tensor2, mask: &[bool], intervals: Option<&IntervalMatrix>) -> Result<(Tensor2, EncoderTrace)> {
        let n = x.rows();
        if mask.len() != n {
            return Err(Error::shape("mask length differs from sequence length"));
        }
        let active: Vec<usize> = (0..n).filter(|&i| mask[i]).collect();
        let positions: Vec<usize> = active.iter().map(|&j| n - 1 - j).collect();
        let intervals = match (&self.time, intervals) {
            (Some(emb), Some(m)) => {
                if m.len() != n {
                    return Err(Error::shape("interval matrix size differs from sequence length"));
                }
                if positions.first().is_some_and(|&p| p >= emb.max_len()) {
                    return Err(Error::shape(format!("sequence of length {n} exceeds positional table of {}", emb.max_len())));
                }
                let mut sel = Vec::with_capacity(active.len() * active.len());
                for &i in &active {
                    for &j in &active {
                        let v = m.get(i, j);
                        if v > emb.k_max {
                            return Err(Error::domain(format!("interval bucket {v} exceeds k_max = {}", emb.k_max)));
                        }
                        sel.push(v);
                    }
                }
                sel
            }
            (Some(_), None) => return Err(Error::domain("time-aware encoder needs an interval matrix")),
            (None, _) => Vec::new(),
        };
        let mut h = x.gather_rows(&active);
        let mut caches = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let tin = self.time.as_ref().map(|emb| TimeInputs {
                emb,
                intervals: &intervals,
                positions: &positions,
            });
            let (y, c) = b.forward(tin, &h)?;
            caches.push(c);
            h = y;
        }
        Ok((
            h.scatter_rows(&active, n),
            EncoderTrace {
                active,
                n,
                intervals,
                positions,
                caches,
            },
        ))
    }

    /// Accumulates parameter gradients into `grads` and returns the input gradient.
    pub fn backward(&self, trace: &EncoderTrace, dy: &Tensor2, grads: &mut Encoder) -> Result<Tensor2> {
        if dy.rows() != trace.n {
            return Err(Error::shape("upstream gradient has wrong row count"));
        }
        let mut g = dy.gather_rows(&trace.active);
        for (i, b) in self.blocks.iter().enumerate().rev() {
            let tin = self.time.as_ref().map(|emb| TimeInputs {
                emb,
                intervals: &trace.intervals,
                positions: &trace.positions,
            });
            g = b.backward(tin, &trace.caches[i], &g, &mut grads.blocks[i], grads.time.as_mut())?;
        }
        Ok(g.scatter_rows(&trace.active, trace.n))
    }
}

impl Parameters for Encoder {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor2)) {
        self.blocks.visit(&join(prefix, "blocks"), f);
        self.time.visit(&join(prefix, "time"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor2)) {
        self.blocks.visit_mut(&join(prefix, "blocks"), f);
        self.time.visit_mut(&join(prefix, "time"), f);
    }
}
