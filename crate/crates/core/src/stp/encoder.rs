use std::collections::{BTreeSet, HashMap};

use rand::Rng;

use crate::nn::{Parameters, Tensor2};
use crate::text::tokenize;

pub const UNK: &str = "<unk>";

/// Bag-of-tokens utterance encoder: the mean of token embeddings followed by
/// a linear projection into the entity embedding space.
#[derive(Clone, Debug, PartialEq)]
pub struct UtteranceEncoder {
    /// Token strings; index 0 is [`UNK`].
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    /// `|vocab| × d`
    pub tokens: Tensor2,
    /// `d × d`
    pub proj: Tensor2,
}

/// Token ids of one encoded utterance and their mean embedding.
pub(crate) struct EncodeCache {
    ids: Vec<usize>,
    mean: Vec<f64>,
}

impl UtteranceEncoder {
    /// A vocabulary of every token in `texts`, sorted, behind the UNK entry.
    pub fn build_vocab<'a>(texts: impl IntoIterator<Item = &'a str>) -> Vec<String> {
        let set: BTreeSet<String> = texts.into_iter().flat_map(tokenize).collect();
        std::iter::once(UNK.to_string()).chain(set.into_iter().filter(|t| t != UNK)).collect()
    }

    /// Small random token embeddings and an identity projection.
    pub fn new(vocab: Vec<String>, d: usize, rng: &mut impl Rng) -> Self {
        let tokens = Tensor2::randn(vocab.len(), d, 0.1, rng);
        let mut proj = Tensor2::zeros(d, d);
        for i in 0..d {
            proj.set(i, i, 1.0);
        }
        Self::from_parts(vocab, tokens, proj)
    }

    pub(crate) fn from_parts(vocab: Vec<String>, tokens: Tensor2, proj: Tensor2) -> Self {
        let index = vocab.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        UtteranceEncoder { vocab, index, tokens, proj }
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.proj.cols()
    }

    pub fn token_id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub(crate) fn forward(&self, text: &str) -> (Vec<f64>, EncodeCache) {
        let d = self.dim();
        let ids: Vec<usize> = tokenize(text).iter().map(|t| self.token_id(t)).collect();
        let mut mean = vec![0.0; d];
        for &i in &ids {
            for (m, v) in mean.iter_mut().zip(self.tokens.row(i)) {
                *m += v;
            }
        }
        if !ids.is_empty() {
            let n = ids.len() as f64;
            mean.iter_mut().for_each(|m| *m /= n);
        }
        let mut z = vec![0.0; d];
        for (i, &m) in mean.iter().enumerate() {
            if m != 0.0 {
                crate::nn::tensor::axpy(m, self.proj.row(i), &mut z);
            }
        }
        (z, EncodeCache { ids, mean })
    }

    /// The utterance vector; the empty text maps to the zero vector.
    pub fn encode(&self, text: &str) -> Vec<f64> {
        self.forward(text).0
    }

    pub(crate) fn backward(&self, cache: &EncodeCache, dz: &[f64], grads: &mut UtteranceEncoder) {
        let d = self.dim();
        for i in 0..d {
            if cache.mean[i] != 0.0 {
                crate::nn::tensor::axpy(cache.mean[i], dz, grads.proj.row_mut(i));
            }
        }
        if cache.ids.is_empty() {
            return;
        }
        let dmean: Vec<f64> = (0..d).map(|i| crate::nn::tensor::dot(self.proj.row(i), dz)).collect();
        let s = 1.0 / cache.ids.len() as f64;
        for &id in &cache.ids {
            crate::nn::tensor::axpy(s, &dmean, grads.tokens.row_mut(id));
        }
    }
}

impl Parameters for UtteranceEncoder {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor2)) {
        f(&crate::nn::params::join(prefix, "tokens"), &self.tokens);
        f(&crate::nn::params::join(prefix, "proj"), &self.proj);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor2)) {
        f(&crate::nn::params::join(prefix, "tokens"), &mut self.tokens);
        f(&crate::nn::params::join(prefix, "proj"), &mut self.proj);
    }
}
