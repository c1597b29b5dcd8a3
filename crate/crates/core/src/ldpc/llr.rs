//! Channel and prior log-likelihood ratios for the decoder.
//!
//! Natural logarithms; positive means bit 0 is more likely.

use crate::channel::Pmf;

use super::LdpcError;

/// Saturation value standing in for a perfectly known bit.
pub const LLR_MAX: f64 = 40.0;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LlrVector(Vec<f64>);

impl LlrVector {
    /// Clamps every entry to `±LLR_MAX`; NaN becomes 0.
    pub fn new(values: Vec<f64>) -> Self {
        LlrVector(values.into_iter().map(clamp).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn extend(&mut self, other: &LlrVector) {
        self.0.extend_from_slice(&other.0);
    }

    pub fn concat(mut self, other: &LlrVector) -> LlrVector {
        self.extend(other);
        self
    }
}

pub(crate) fn clamp(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(-LLR_MAX, LLR_MAX)
    }
}

fn check_epsilon(epsilon: f64) -> Result<(), LdpcError> {
    if (0.0..0.5).contains(&epsilon) {
        Ok(())
    } else {
        Err(LdpcError::Crossover(epsilon))
    }
}

fn signed(received: &[u8], zero: f64, one: f64) -> LlrVector {
    LlrVector::new(received.iter().map(|b| if *b == 0 { zero } else { one }).collect())
}

/// `±ln((1−ε)/ε)` per received bit. `ε = 0` saturates.
pub fn bsc_llr_uniform(received: &[u8], epsilon: f64) -> Result<LlrVector, LdpcError> {
    check_epsilon(epsilon)?;
    let l = ((1.0 - epsilon) / epsilon).ln();
    Ok(signed(received, l, -l))
}

/// Channel LLR shifted by the prior `ln(π0/π1)`.
pub fn bsc_llr_matched(received: &[u8], epsilon: f64, prior: &Pmf) -> Result<LlrVector, LdpcError> {
    check_epsilon(epsilon)?;
    let pi = prior.probs();
    if pi.len() != 2 || pi[0] <= 0.0 || pi[1] <= 0.0 {
        let mut v = [0.0; 2];
        for (d, s) in v.iter_mut().zip(pi) {
            *d = *s;
        }
        return Err(LdpcError::DegeneratePrior(v));
    }
    let l = ((1.0 - epsilon) / epsilon).ln();
    let shift = (pi[0] / pi[1]).ln();
    Ok(signed(received, clamp(l) + shift, -clamp(l) + shift))
}

pub fn known_bit_llr(bits: &[u8]) -> LlrVector {
    signed(bits, LLR_MAX, -LLR_MAX)
}
