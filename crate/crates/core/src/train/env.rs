//! Miniature plan-filling environment for the policy-optimization demo.
//!
//! A response fills `slots` positions with symbols. Each context allows half
//! of the vocabulary per slot and additionally demands one exact
//! (slot, symbol) pair — a scaled-down shape of "mostly-valid plan plus one
//! hard constraint". Reward is the valid fraction plus an indicator for the
//! hard pair, so it lies in [0, 2].

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToyPlanEnv {
    contexts: usize,
    slots: usize,
    vocab: usize,
    /// `allowed[context * slots + slot]` is a bitmask over symbols.
    allowed: Vec<u32>,
    /// Per-context hard requirement; the symbol is always allowed in its slot.
    required: Vec<(usize, usize)>,
}

impl ToyPlanEnv {
    pub fn new(contexts: usize, slots: usize, vocab: usize, seed: u64) -> Self {
        assert!((2..=32).contains(&vocab) && slots > 0 && contexts > 0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let density = (vocab / 2).max(1);
        let mut allowed = Vec::with_capacity(contexts * slots);
        for _ in 0..contexts * slots {
            let mut symbols: Vec<usize> = (0..vocab).collect();
            symbols.shuffle(&mut rng);
            let mask = symbols[..density].iter().fold(0u32, |m, &s| m | (1 << s));
            allowed.push(mask);
        }
        let required = (0..contexts)
            .map(|context| {
                let slot = rng.gen_range(0..slots);
                let mask = allowed[context * slots + slot];
                let choices: Vec<usize> = (0..vocab).filter(|s| mask & (1 << s) != 0).collect();
                (slot, choices[rng.gen_range(0..choices.len())])
            })
            .collect();
        ToyPlanEnv {
            contexts,
            slots,
            vocab,
            allowed,
            required,
        }
    }

    pub fn contexts(&self) -> usize {
        self.contexts
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn is_allowed(&self, context: usize, slot: usize, symbol: usize) -> bool {
        symbol < self.vocab && self.allowed[context * self.slots + slot] & (1 << symbol) != 0
    }

    pub fn required(&self, context: usize) -> (usize, usize) {
        self.required[context]
    }

    /// Valid fraction over the slots plus one for hitting the required pair.
    /// Missing or surplus positions count as invalid.
    pub fn reward(&self, context: usize, tokens: &[usize]) -> f64 {
        assert!(context < self.contexts);
        let valid = (0..self.slots)
            .filter(|&slot| {
                tokens
                    .get(slot)
                    .is_some_and(|&s| self.is_allowed(context, slot, s))
            })
            .count();
        let (slot, symbol) = self.required[context];
        let hard = tokens.get(slot) == Some(&symbol);
        valid as f64 / self.slots as f64 + if hard { 1.0 } else { 0.0 }
    }

    /// One reward-maximal response, for tests and reporting.
    pub fn best_response(&self, context: usize) -> Vec<usize> {
        (0..self.slots)
            .map(|slot| {
                let (req_slot, req_symbol) = self.required[context];
                if slot == req_slot {
                    req_symbol
                } else {
                    (0..self.vocab)
                        .find(|&s| self.is_allowed(context, slot, s))
                        .expect("every slot allows at least one symbol")
                }
            })
            .collect()
    }
}
