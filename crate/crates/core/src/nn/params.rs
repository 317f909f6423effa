//! Named parameter traversal and the optimizers built on it.
//!
//! Gradients are stored in a value of the same type as the parameters, so a
//! model's gradient buffer is simply a zeroed clone of the model.

use serde::{Deserialize, Serialize};

use super::tensor::Tensor2;

/// A collection of named trainable tensors.
pub trait Parameters {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor2));
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor2));
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

impl Parameters for Tensor2 {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor2)) {
        f(prefix, self)
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor2)) {
        f(prefix, self)
    }
}

impl<P: Parameters> Parameters for Vec<P> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor2)) {
        for (i, p) in self.iter().enumerate() {
            p.visit(&join(prefix, &i.to_string()), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor2)) {
        for (i, p) in self.iter_mut().enumerate() {
            p.visit_mut(&join(prefix, &i.to_string()), f);
        }
    }
}

impl<P: Parameters> Parameters for Option<P> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor2)) {
        if let Some(p) = self {
            p.visit(prefix, f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor2)) {
        if let Some(p) = self {
            p.visit_mut(prefix, f);
        }
    }
}

pub fn num_params<P: Parameters + ?Sized>(p: &P) -> usize {
    let mut n = 0;
    p.visit("", &mut |_, t| n += t.data().len());
    n
}

pub fn flatten<P: Parameters + ?Sized>(p: &P) -> Vec<f64> {
    let mut out = Vec::with_capacity(num_params(p));
    p.visit("", &mut |_, t| out.extend_from_slice(t.data()));
    out
}

/// Overwrites every parameter from a flat vector laid out as by [`flatten`].
pub fn load_flat<P: Parameters + ?Sized>(p: &mut P, flat: &[f64]) {
    let mut off = 0;
    p.visit_mut("", &mut |_, t| {
        let n = t.data().len();
        t.data_mut().copy_from_slice(&flat[off..off + n]);
        off += n;
    });
    assert_eq!(off, flat.len(), "flat parameter vector has wrong length");
}

pub fn zeroed<P: Parameters + Clone>(p: &P) -> P {
    let mut g = p.clone();
    g.visit_mut("", &mut |_, t| t.fill(0.0));
    g
}

pub fn named_tensors<P: Parameters + ?Sized>(p: &P) -> Vec<(String, Tensor2)> {
    let mut out = Vec::new();
    p.visit("", &mut |name, t| out.push((name.to_string(), t.clone())));
    out
}

pub fn all_finite<P: Parameters + ?Sized>(p: &P) -> bool {
    let mut ok = true;
    p.visit("", &mut |_, t| ok &= t.is_finite());
    ok
}

/// Adds `scale * src` into `dst` parameter-wise.
pub fn accumulate<P: Parameters>(dst: &mut P, src: &P, scale: f64) {
    let flat = flatten(src);
    let mut off = 0;
    dst.visit_mut("", &mut |_, t| {
        for v in t.data_mut() {
            *v += scale * flat[off];
            off += 1;
        }
    });
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Adam with optional global-norm gradient clipping.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub clip_norm: Option<f64>,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: Some(5.0),
            m: Vec::new(),
            v: Vec::new(),
            t: 0,
        }
    }

    pub fn step<P: Parameters>(&mut self, params: &mut P, grads: &P) {
        let mut g = flatten(grads);
        if self.m.is_empty() {
            self.m = vec![0.0; g.len()];
            self.v = vec![0.0; g.len()];
        }
        if let Some(c) = self.clip_norm {
            let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > c {
                let s = c / norm;
                g.iter_mut().for_each(|x| *x *= s);
            }
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        let (m, v) = (&mut self.m, &mut self.v);
        let (b1, b2, eps, lr) = (self.beta1, self.beta2, self.eps, self.lr);
        let mut off = 0;
        params.visit_mut("", &mut |_, t| {
            for p in t.data_mut() {
                let gi = g[off];
                m[off] = b1 * m[off] + (1.0 - b1) * gi;
                v[off] = b2 * v[off] + (1.0 - b2) * gi * gi;
                let mh = m[off] / bc1;
                let vh = v[off] / bc2;
                *p -= lr * mh / (vh.sqrt() + eps);
                off += 1;
            }
        });
    }
}

/// Either optimizer behind one interface.
#[derive(Clone, Debug)]
pub enum Optimizer {
    Sgd { lr: f64 },
    Adam(Adam),
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { lr },
            OptimizerKind::Adam => Optimizer::Adam(Adam::new(lr)),
        }
    }

    pub fn step<P: Parameters>(&mut self, params: &mut P, grads: &P) {
        match self {
            Optimizer::Sgd { lr } => accumulate(params, grads, -*lr),
            Optimizer::Adam(a) => a.step(params, grads),
        }
    }
}
