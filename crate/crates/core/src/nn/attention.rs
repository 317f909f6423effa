//! Multi-head self-attention, optionally time-aware.
//!
//! The time-aware variant adds learned interval and positional embeddings to
//! every key and value:
//!
//! ```text
//! logit_ij = q_i · (k_j + rK[M_ij] + pK[pos_j]) / √d_h
//! out_i    = Σ_j α_ij (v_j + rV[M_ij] + pV[pos_j])
//! ```
//!
//! where `M` is the clipped, user-scaled interval matrix from
//! [`interval_matrix`] and `pos_j` counts positions back from the end of the
//! sequence, so left padding never shifts a real entry's position.
//!
//! Interval and positional tables are `d` wide; head `h` reads columns
//! `h·d_h .. (h+1)·d_h`.
//!
//! Masked positions are removed before any arithmetic and their output rows
//! are zero, so values stored at masked positions cannot leak into the result.

use rand::Rng;

use super::params::{join, Parameters};
use super::tensor::{dot, softmax, Tensor2};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct AttentionParams {
    pub n_heads: usize,
    pub wq: Tensor2,
    pub wk: Tensor2,
    pub wv: Tensor2,
    pub wo: Tensor2,
}

impl AttentionParams {
    pub fn new(d: usize, n_heads: usize, rng: &mut impl Rng) -> Result<Self> {
        if n_heads == 0 || d % n_heads != 0 {
            return Err(Error::shape(format!("d = {d} is not divisible by {n_heads} heads")));
        }
        let std = (1.0 / d as f64).sqrt();
        Ok(AttentionParams {
            n_heads,
            wq: Tensor2::randn(d, d, std, rng),
            wk: Tensor2::randn(d, d, std, rng),
            wv: Tensor2::randn(d, d, std, rng),
            wo: Tensor2::randn(d, d, std, rng),
        })
    }

    pub fn zeros(d: usize, n_heads: usize) -> Self {
        AttentionParams {
            n_heads,
            wq: Tensor2::zeros(d, d),
            wk: Tensor2::zeros(d, d),
            wv: Tensor2::zeros(d, d),
            wo: Tensor2::zeros(d, d),
        }
    }

    pub fn dim(&self) -> usize {
        self.wq.rows()
    }

    pub fn head_dim(&self) -> usize {
        self.dim() / self.n_heads
    }
}

impl Parameters for AttentionParams {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor2)) {
        f(&join(prefix, "wq"), &self.wq);
        f(&join(prefix, "wk"), &self.wk);
        f(&join(prefix, "wv"), &self.wv);
        f(&join(prefix, "wo"), &self.wo);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor2)) {
        f(&join(prefix, "wq"), &mut self.wq);
        f(&join(prefix, "wk"), &mut self.wk);
        f(&join(prefix, "wv"), &mut self.wv);
        f(&join(prefix, "wo"), &mut self.wo);
    }
}

/// Interval and positional embedding tables shared by a time-aware encoder.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalEmbeddings {
    pub k_max: usize,
    /// `(k_max + 1) × d`
    pub interval_key: Tensor2,
    pub interval_value: Tensor2,
    /// `max_len × d`, row 0 is the last sequence position.
    pub pos_key: Tensor2,
    pub pos_value: Tensor2,
}

impl IntervalEmbeddings {
    pub fn new(d: usize, k_max: usize, max_len: usize, rng: &mut impl Rng) -> Result<Self> {
        if k_max < 1 {
            return Err(Error::domain("k_max must be at least 1"));
        }
        let std = 0.1 / (d as f64).sqrt();
        Ok(IntervalEmbeddings {
            k_max,
            interval_key: Tensor2::randn(k_max + 1, d, std, rng),
            interval_value: Tensor2::randn(k_max + 1, d, std, rng),
            pos_key: Tensor2::randn(max_len, d, std, rng),
            pos_value: Tensor2::randn(max_len, d, std, rng),
        })
    }

    pub fn zeros(d: usize, k_max: usize, max_len: usize) -> Self {
        IntervalEmbeddings {
            k_max,
            interval_key: Tensor2::zeros(k_max + 1, d),
            interval_value: Tensor2::zeros(k_max + 1, d),
            pos_key: Tensor2::zeros(max_len, d),
            pos_value: Tensor2::zeros(max_len, d),
        }
    }

    pub fn max_len(&self) -> usize {
        self.pos_key.rows()
    }
}

impl Parameters for IntervalEmbeddings {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor2)) {
        f(&join(prefix, "interval_key"), &self.interval_key);
        f(&join(prefix, "interval_value"), &self.interval_value);
        f(&join(prefix, "pos_key"), &self.pos_key);
        f(&join(prefix, "pos_value"), &self.pos_value);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor2)) {
        f(&join(prefix, "interval_key"), &mut self.interval_key);
        f(&join(prefix, "interval_value"), &mut self.interval_value);
        f(&join(prefix, "pos_key"), &mut self.pos_key);
        f(&join(prefix, "pos_value"), &mut self.pos_value);
    }
}

/// Symmetric matrix of clipped interval buckets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntervalMatrix {
    n: usize,
    k_max: usize,
    data: Vec<usize>,
}

impl IntervalMatrix {
    pub fn from_rows(rows: &[Vec<usize>], k_max: usize) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::shape("interval matrix must be square"));
            }
            data.extend_from_slice(r);
        }
        Ok(IntervalMatrix { n, k_max, data })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn get(&self, i: usize, j: usize) -> usize {
        self.data[i * self.n + j]
    }

    pub fn to_rows(&self) -> Vec<Vec<usize>> {
        self.data.chunks(self.n.max(1)).map(<[usize]>::to_vec).take(self.n).collect()
    }

    /// Restriction to the given rows and columns.
    fn select(&self, idx: &[usize]) -> Vec<usize> {
        let mut out = Vec::with_capacity(idx.len() * idx.len());
        for &i in idx {
            for &j in idx {
                out.push(self.get(i, j));
            }
        }
        out
    }
}

/// Personalised interval buckets between every pair of real positions.
///
/// `t_min` is the smallest non-zero gap between unmasked timestamps (1 if all
/// coincide); entry `(i, j)` is `min(k_max, ⌊|t_i − t_j| / t_min⌋)`. Rows and
/// columns of masked positions are zero.
pub fn interval_matrix(timestamps: &[u64], mask: &[bool], k_max: usize) -> Result<IntervalMatrix> {
    if timestamps.len() != mask.len() {
        return Err(Error::shape("timestamps and mask differ in length"));
    }
    if k_max < 1 {
        return Err(Error::domain("k_max must be at least 1"));
    }
    let active: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    if active.is_empty() {
        return Err(Error::domain("interval matrix needs at least one unmasked position"));
    }
    let mut t_min = u64::MAX;
    for (a, &i) in active.iter().enumerate() {
        for &j in &active[a + 1..] {
            let gap = timestamps[i].abs_diff(timestamps[j]);
            if gap > 0 {
                t_min = t_min.min(gap);
            }
        }
    }
    if t_min == u64::MAX {
        t_min = 1;
    }
    let n = mask.len();
    let mut data = vec![0usize; n * n];
    for &i in &active {
        for &j in &active {
            let gap = timestamps[i].abs_diff(timestamps[j]) / t_min;
            data[i * n + j] = (gap.min(k_max as u64)) as usize;
        }
    }
    Ok(IntervalMatrix { n, k_max, data })
}

/// Time inputs for the compact (mask-free) kernel.
#[derive(Clone, Copy)]
pub(crate) struct TimeInputs<'a> {
    pub emb: &'a IntervalEmbeddings,
    /// `n × n` bucket indices.
    pub intervals: &'a [usize],
    /// Row index into the positional tables for each position.
    pub positions: &'a [usize],
}

/// Forward intermediates of the compact kernel.
#[derive(Clone, Debug)]
pub(crate) struct AttentionCache {
    x: Tensor2,
    q: Tensor2,
    k: Tensor2,
    v: Tensor2,
    /// heads × n × n
    alpha: Vec<f64>,
    /// concatenated head outputs before the output projection
    o: Tensor2,
}

pub(crate) fn attend(p: &AttentionParams, time: Option<TimeInputs<'_>>, x: &Tensor2) -> Result<(Tensor2, AttentionCache)> {
    let d = p.dim();
    if x.cols() != d {
        return Err(Error::shape(format!("attention input has {} columns, expected {d}", x.cols())));
    }
    let n = x.rows();
    let dh = p.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();
    let q = x.matmul(&p.wq)?;
    let k = x.matmul(&p.wk)?;
    let v = x.matmul(&p.wv)?;
    let mut alpha = vec![0.0; p.n_heads * n * n];
    let mut o = Tensor2::zeros(n, d);
    let mut logits = vec![0.0; n];
    let mut val = vec![0.0; dh];

    for h in 0..p.n_heads {
        let cols = h * dh..(h + 1) * dh;
        for i in 0..n {
            let qi = &q.row(i)[cols.clone()];
            for (j, l) in logits.iter_mut().enumerate() {
                let kj = &k.row(j)[cols.clone()];
                *l = match time {
                    None => dot(qi, kj),
                    Some(t) => {
                        let rk = &t.emb.interval_key.row(t.intervals[i * n + j])[cols.clone()];
                        let pk = &t.emb.pos_key.row(t.positions[j])[cols.clone()];
                        qi.iter()
                            .zip(kj)
                            .zip(rk)
                            .zip(pk)
                            .map(|(((a, b), c), e)| a * (b + c + e))
                            .sum()
                    }
                } * scale;
            }
            let a = softmax(&logits);
            let oi = &mut o.row_mut(i)[cols.clone()];
            for (j, &aij) in a.iter().enumerate() {
                let vj = &v.row(j)[cols.clone()];
                match time {
                    None => val.copy_from_slice(vj),
                    Some(t) => {
                        let rv = &t.emb.interval_value.row(t.intervals[i * n + j])[cols.clone()];
                        let pv = &t.emb.pos_value.row(t.positions[j])[cols.clone()];
                        for c in 0..dh {
                            val[c] = vj[c] + rv[c] + pv[c];
                        }
                    }
                }
                for c in 0..dh {
                    oi[c] += aij * val[c];
                }
            }
            alpha[(h * n + i) * n..(h * n + i + 1) * n].copy_from_slice(&a);
        }
    }
    let y = o.matmul(&p.wo)?;
    Ok((
        y,
        AttentionCache {
            x: x.clone(),
            q,
            k,
            v,
            alpha,
            o,
        },
    ))
}

/// Backward pass of [`attend`]; gradients are accumulated into `grads` / `tgrads`.
pub(crate) fn attend_backward(
    p: &AttentionParams,
    time: Option<TimeInputs<'_>>,
    cache: &AttentionCache,
    dy: &Tensor2,
    grads: &mut AttentionParams,
    mut tgrads: Option<&mut IntervalEmbeddings>,
) -> Result<Tensor2> {
    let n = cache.x.rows();
    let dh = p.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();

    cache.o.t_matmul_acc(dy, &mut grads.wo)?;
    let d_o = dy.matmul_t(&p.wo)?;
    let mut dq = Tensor2::zeros(n, p.dim());
    let mut dk = Tensor2::zeros(n, p.dim());
    let mut dv = Tensor2::zeros(n, p.dim());
    let mut dalpha = vec![0.0; n];
    let mut val = vec![0.0; dh];

    for h in 0..p.n_heads {
        let cols = h * dh..(h + 1) * dh;
        for i in 0..n {
            let a = &cache.alpha[(h * n + i) * n..(h * n + i + 1) * n];
            let doi: Vec<f64> = d_o.row(i)[cols.clone()].to_vec();
            for j in 0..n {
                let vj = &cache.v.row(j)[cols.clone()];
                match time {
                    None => val.copy_from_slice(vj),
                    Some(t) => {
                        let rv = &t.emb.interval_value.row(t.intervals[i * n + j])[cols.clone()];
                        let pv = &t.emb.pos_value.row(t.positions[j])[cols.clone()];
                        for c in 0..dh {
                            val[c] = vj[c] + rv[c] + pv[c];
                        }
                    }
                }
                dalpha[j] = dot(&doi, &val);
                let aij = a[j];
                for (c, g) in dv.row_mut(j)[cols.clone()].iter_mut().enumerate() {
                    *g += aij * doi[c];
                }
                if let (Some(t), Some(tg)) = (time, tgrads.as_deref_mut()) {
                    let m = t.intervals[i * n + j];
                    for (c, g) in tg.interval_value.row_mut(m)[cols.clone()].iter_mut().enumerate() {
                        *g += aij * doi[c];
                    }
                    for (c, g) in tg.pos_value.row_mut(t.positions[j])[cols.clone()].iter_mut().enumerate() {
                        *g += aij * doi[c];
                    }
                }
            }
            let weighted: f64 = a.iter().zip(&dalpha).map(|(x, y)| x * y).sum();
            let qi: Vec<f64> = cache.q.row(i)[cols.clone()].to_vec();
            for j in 0..n {
                let dl = a[j] * (dalpha[j] - weighted) * scale;
                if dl == 0.0 {
                    continue;
                }
                let kj = &cache.k.row(j)[cols.clone()];
                {
                    let dqi = &mut dq.row_mut(i)[cols.clone()];
                    match time {
                        None => {
                            for c in 0..dh {
                                dqi[c] += dl * kj[c];
                            }
                        }
                        Some(t) => {
                            let rk = &t.emb.interval_key.row(t.intervals[i * n + j])[cols.clone()];
                            let pk = &t.emb.pos_key.row(t.positions[j])[cols.clone()];
                            for c in 0..dh {
                                dqi[c] += dl * (kj[c] + rk[c] + pk[c]);
                            }
                        }
                    }
                }
                for (c, g) in dk.row_mut(j)[cols.clone()].iter_mut().enumerate() {
                    *g += dl * qi[c];
                }
                if let (Some(t), Some(tg)) = (time, tgrads.as_deref_mut()) {
                    let m = t.intervals[i * n + j];
                    for (c, g) in tg.interval_key.row_mut(m)[cols.clone()].iter_mut().enumerate() {
                        *g += dl * qi[c];
                    }
                    for (c, g) in tg.pos_key.row_mut(t.positions[j])[cols.clone()].iter_mut().enumerate() {
                        *g += dl * qi[c];
                    }
                }
            }
        }
    }

    cache.x.t_matmul_acc(&dq, &mut grads.wq)?;
    cache.x.t_matmul_acc(&dk, &mut grads.wk)?;
    cache.x.t_matmul_acc(&dv, &mut grads.wv)?;
    let mut dx = dq.matmul_t(&p.wq)?;
    dx.add_assign(&dk.matmul_t(&p.wk)?)?;
    dx.add_assign(&dv.matmul_t(&p.wv)?)?;
    Ok(dx)
}

/// Everything a masked attention call needs to run its backward pass.
#[derive(Clone, Debug)]
pub struct AttentionTrace {
    active: Vec<usize>,
    n: usize,
    intervals: Vec<usize>,
    positions: Vec<usize>,
    cache: AttentionCache,
}

fn active_rows(mask: &[bool], n: usize) -> Result<Vec<usize>> {
    if mask.len() != n {
        return Err(Error::shape(format!("mask has length {}, input has {n} rows", mask.len())));
    }
    Ok((0..n).filter(|&i| mask[i]).collect())
}

/// Masked attention forward pass returning the trace used by [`attention_backward`].
pub fn attention_forward(
    params: &AttentionParams,
    time: Option<(&IntervalEmbeddings, &IntervalMatrix)>,
    x: &Tensor2,
    mask: &[bool],
) -> Result<(Tensor2, AttentionTrace)> {
    let n = x.rows();
    let active = active_rows(mask, n)?;
    let compact = x.gather_rows(&active);
    let positions: Vec<usize> = active.iter().map(|&j| n - 1 - j).collect();
    let intervals = match time {
        Some((emb, m)) => {
            if m.len() != n {
                return Err(Error::shape(format!("interval matrix is {}x{0}, input has {n} rows", m.len())));
            }
            if m.k_max() > emb.k_max || m.data.iter().any(|&v| v > emb.k_max) {
                return Err(Error::domain(format!("interval bucket exceeds k_max = {}", emb.k_max)));
            }
            if positions.first().is_some_and(|&p| p >= emb.max_len()) {
                return Err(Error::shape(format!("sequence of length {n} exceeds positional table of {}", emb.max_len())));
            }
            if emb.interval_key.cols() != params.dim() {
                return Err(Error::shape("interval embedding width differs from model width"));
            }
            m.select(&active)
        }
        None => Vec::new(),
    };
    let tin = time.map(|(emb, _)| TimeInputs {
        emb,
        intervals: &intervals,
        positions: &positions,
    });
    let (y, cache) = attend(params, tin, &compact)?;
    Ok((
        y.scatter_rows(&active, n),
        AttentionTrace {
            active,
            n,
            intervals,
            positions,
            cache,
        },
    ))
}

/// Gradients of a masked attention call with respect to its input and parameters.
pub fn attention_backward(
    params: &AttentionParams,
    ivals: Option<&IntervalEmbeddings>,
    trace: &AttentionTrace,
    dy: &Tensor2,
    grads: &mut AttentionParams,
    igrads: Option<&mut IntervalEmbeddings>,
) -> Result<Tensor2> {
    if dy.rows() != trace.n {
        return Err(Error::shape("upstream gradient has wrong row count"));
    }
    let tin = ivals.map(|emb| TimeInputs {
        emb,
        intervals: &trace.intervals,
        positions: &trace.positions,
    });
    let dyc = dy.gather_rows(&trace.active);
    let dx = attend_backward(params, tin, &trace.cache, &dyc, grads, igrads)?;
    Ok(dx.scatter_rows(&trace.active, trace.n))
}

/// Standard multi-head self-attention over the unmasked rows of `x`.
pub fn self_attention(params: &AttentionParams, x: &Tensor2, mask: &[bool]) -> Result<Tensor2> {
    attention_forward(params, None, x, mask).map(|(y, _)| y)
}

/// Time-aware multi-head self-attention over the unmasked rows of `x`.
pub fn time_aware_attention(
    params: &AttentionParams,
    ivals: &IntervalEmbeddings,
    x: &Tensor2,
    intervals: &IntervalMatrix,
    mask: &[bool],
) -> Result<Tensor2> {
    attention_forward(params, Some((ivals, intervals)), x, mask).map(|(y, _)| y)
}

impl AttentionTrace {
    /// Attention weights, `heads × n × n` over the active rows.
    pub fn weights(&self) -> &[f64] {
        &self.cache.alpha
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }
}
