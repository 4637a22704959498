//! Tabular softmax policy over short token sequences.
//!
//! A policy row holds unnormalized log-preferences for one (context,
//! position) pair; tokens are drawn independently per position. Small enough
//! that every gradient is dense and finite-difference checkable.

use rand_chacha::ChaCha8Rng;

use crate::num::Scalar;

use super::TrainError;

#[derive(Debug, Clone, PartialEq)]
pub struct ToyPolicy<S> {
    contexts: usize,
    max_len: usize,
    vocab: usize,
    /// Row-major `[context][position][token]` logits.
    logits: Vec<S>,
}

impl<S: Scalar> ToyPolicy<S> {
    /// Uniform policy: all logits zero.
    pub fn new(contexts: usize, max_len: usize, vocab: usize) -> Self {
        assert!(contexts > 0 && max_len > 0 && vocab > 1, "degenerate policy shape");
        ToyPolicy {
            contexts,
            max_len,
            vocab,
            logits: vec![S::zero(); contexts * max_len * vocab],
        }
    }

    pub fn contexts(&self) -> usize {
        self.contexts
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn params(&self) -> &[S] {
        &self.logits
    }

    pub fn params_mut(&mut self) -> &mut [S] {
        &mut self.logits
    }

    /// Flat index of the first logit of a (context, position) row.
    fn row_start(&self, context: usize, position: usize) -> usize {
        (context * self.max_len + position) * self.vocab
    }

    fn row(&self, context: usize, position: usize) -> &[S] {
        let start = self.row_start(context, position);
        &self.logits[start..start + self.vocab]
    }

    /// Numerically stable log-softmax of one row.
    pub fn log_softmax_row(&self, context: usize, position: usize) -> Vec<S> {
        let row = self.row(context, position);
        let max = row.iter().copied().fold(S::neg_infinity(), S::max);
        let log_sum = row
            .iter()
            .map(|&x| (x - max).exp())
            .fold(S::zero(), |acc, v| acc + v)
            .ln();
        row.iter().map(|&x| x - max - log_sum).collect()
    }

    pub fn softmax_row(&self, context: usize, position: usize) -> Vec<S> {
        self.log_softmax_row(context, position)
            .into_iter()
            .map(|lp| lp.exp())
            .collect()
    }

    fn check(&self, context: usize, tokens: &[usize]) -> Result<(), TrainError> {
        if context >= self.contexts {
            return Err(TrainError::UnknownContext {
                context,
                contexts: self.contexts,
            });
        }
        if tokens.len() > self.max_len {
            return Err(TrainError::SequenceTooLong {
                len: tokens.len(),
                max_len: self.max_len,
            });
        }
        for &token in tokens {
            if token >= self.vocab {
                return Err(TrainError::UnknownToken {
                    token,
                    vocab: self.vocab,
                });
            }
        }
        Ok(())
    }

    /// Log-probability of each token at its position.
    pub fn token_log_probs(&self, context: usize, tokens: &[usize]) -> Result<Vec<S>, TrainError> {
        self.check(context, tokens)?;
        Ok(tokens
            .iter()
            .enumerate()
            .map(|(position, &token)| self.log_softmax_row(context, position)[token])
            .collect())
    }

    pub fn sequence_log_prob(&self, context: usize, tokens: &[usize]) -> Result<S, TrainError> {
        Ok(self
            .token_log_probs(context, tokens)?
            .into_iter()
            .fold(S::zero(), |acc, lp| acc + lp))
    }

    /// Samples one token per position by inverse-CDF over `f64` probabilities,
    /// so draws consume exactly one RNG value per position regardless of `S`.
    pub fn sample(&self, context: usize, len: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        assert!(context < self.contexts && len <= self.max_len);
        (0..len)
            .map(|position| {
                let probs: Vec<f64> = self
                    .softmax_row(context, position)
                    .into_iter()
                    .map(|p| p.to_f64().unwrap_or(0.0))
                    .collect();
                let draw: f64 = rand::Rng::gen(rng);
                let mut acc = 0.0;
                for (token, p) in probs.iter().enumerate() {
                    acc += p;
                    if draw < acc {
                        return token;
                    }
                }
                self.vocab - 1 // rounding left the CDF fractionally short of 1
            })
            .collect()
    }

    /// Stable prompt-to-context hash: positional byte fold modulo the table
    /// size.
    pub fn context_for_prompt(&self, prompt: &str) -> usize {
        prompt
            .bytes()
            .fold(0usize, |acc, b| acc.wrapping_mul(31).wrapping_add(b as usize))
            % self.contexts
    }
}
