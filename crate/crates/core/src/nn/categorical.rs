use alloc::vec::Vec;

use crate::rng::SplitMix64;

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = libm::exp(*v - max);
        sum += *v;
    }
    row.iter_mut().for_each(|v| *v /= sum);
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = logits.to_vec();
    softmax_in_place(&mut out);
    out
}

/// Discrete distribution over action indices, parameterized by logits.
#[derive(Clone, Debug, PartialEq)]
pub struct Categorical {
    probs: Vec<f64>,
    log_probs: Vec<f64>,
}

pub fn categorical(logits: &[f64]) -> Categorical {
    Categorical::from_logits(logits)
}

impl Categorical {
    pub fn from_logits(logits: &[f64]) -> Self {
        assert!(!logits.is_empty(), "categorical over zero actions");
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + libm::log(logits.iter().map(|&l| libm::exp(l - max)).sum::<f64>());
        let log_probs: Vec<f64> = logits.iter().map(|&l| l - lse).collect();
        let probs = log_probs.iter().map(|&lp| libm::exp(lp)).collect();
        Self { probs, log_probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn num_actions(&self) -> usize {
        self.probs.len()
    }

    pub fn log_prob(&self, action: usize) -> f64 {
        self.log_probs[action]
    }

    pub fn entropy(&self) -> f64 {
        -self
            .probs
            .iter()
            .zip(&self.log_probs)
            .filter(|(&p, _)| p > 0.0)
            .map(|(p, lp)| p * lp)
            .sum::<f64>()
    }

    /// Inverse CDF: the first action whose cumulative mass exceeds `u`.
    pub fn sample_with_uniform(&self, u: f64) -> usize {
        let mut cum = 0.0;
        for (i, &p) in self.probs.iter().enumerate() {
            cum += p;
            if u < cum {
                return i;
            }
        }
        // Rounding left `u` above the total mass; take the last live action.
        self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }

    pub fn sample(&self, rng: &mut SplitMix64) -> usize {
        self.sample_with_uniform(rng.next_f64())
    }

    /// Most likely action, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    /// d log p(action) / d logits = onehot(action) - p.
    pub fn log_prob_grad(&self, action: usize, scale: f64, out: &mut [f64]) {
        for (i, (o, &p)) in out.iter_mut().zip(&self.probs).enumerate() {
            let onehot = if i == action { 1.0 } else { 0.0 };
            *o += scale * (onehot - p);
        }
    }

    /// d H / d logits = -p * (log p + H).
    pub fn entropy_grad(&self, scale: f64, out: &mut [f64]) {
        let h = self.entropy();
        for (o, (&p, &lp)) in out.iter_mut().zip(self.probs.iter().zip(&self.log_probs)) {
            *o += scale * (-p * (lp + h));
        }
    }
}
