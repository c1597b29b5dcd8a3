//! Sparse-dense codes: a fraction `c` of symbols follows the shaped pmf `p`,
//! the rest (the check part) is uniform.

use thiserror::Error;

use crate::capacity::CapacityResult;
use crate::channel::{entropy, BinaryChannel, ChannelError, Pmf};

/// Below this the closed form for the ultimate rate is replaced by bisection.
pub const DEGENERATE_DENOMINATOR: f64 = 1e-14;

const BISECTION_STEPS: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SparseDenseError {
    #[error("sparse fraction {0} outside (0, 1]")]
    Fraction(f64),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseDenseReport {
    /// `I_sd(p, c(p))`, bits per unit cost.
    pub mi_per_weight: f64,
    /// `R_sd(p, c)` at the operating fraction.
    pub rate: f64,
    pub ultimate_rate: f64,
    pub shaping_gap: f64,
    pub coding_gap: f64,
}

fn check_fraction(c: f64) -> Result<(), SparseDenseError> {
    if c > 0.0 && c <= 1.0 {
        Ok(())
    } else {
        Err(SparseDenseError::Fraction(c))
    }
}

fn mixed_cost(ch: &BinaryChannel, p: &Pmf, c: f64) -> Result<f64, SparseDenseError> {
    Ok(c * ch.cost(p)? + (1.0 - c) * ch.cost(&Pmf::uniform(2))?)
}

/// Mutual information per average weight.
pub fn i_sd(ch: &BinaryChannel, p: &Pmf, c: f64) -> Result<f64, SparseDenseError> {
    check_fraction(c)?;
    let u = Pmf::uniform(2);
    let info = c * ch.mutual_information(p)? + (1.0 - c) * ch.mutual_information(&u)?;
    Ok(info / mixed_cost(ch, p, c)?)
}

/// Data bits per unit cost when the `1 − c` uniform part carries no data.
pub fn r_sd(ch: &BinaryChannel, p: &Pmf, c: f64) -> Result<f64, SparseDenseError> {
    check_fraction(c)?;
    if p.len() != 2 {
        return Err(ChannelError::DimensionMismatch { expected: 2, got: p.len() }.into());
    }
    Ok(c * entropy(p) / mixed_cost(ch, p, c)?)
}

/// The fraction `c` at which `i_sd` and `r_sd` coincide.
pub fn ultimate_code_rate(ch: &BinaryChannel, p: &Pmf) -> Result<f64, SparseDenseError> {
    let iu = ch.mutual_information(&Pmf::uniform(2))?;
    let ip = ch.mutual_information(p)?;
    let h = entropy(p);
    let denom = h - ip + iu;
    if denom >= DEGENERATE_DENOMINATOR {
        return Ok((iu / denom).clamp(f64::MIN_POSITIVE, 1.0));
    }
    // i_sd − r_sd shares its denominator with both rates; bisect its numerator.
    let f = |c: f64| c * ip + (1.0 - c) * iu - c * h;
    let (mut lo, mut hi) = (f64::MIN_POSITIVE, 1.0);
    if f(lo) <= 0.0 || f(hi) >= 0.0 {
        return Ok(1.0);
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Shaping and coding gaps of a sparse-dense code operated at fraction `c`.
pub fn sd_gaps(ch: &BinaryChannel, p: &Pmf, c: f64, cap: &CapacityResult) -> Result<SparseDenseReport, SparseDenseError> {
    let ultimate = ultimate_code_rate(ch, p)?;
    let mi = i_sd(ch, p, ultimate)?;
    let rate = r_sd(ch, p, c)?;
    let shaping_gap = if cap.capacity > 0.0 { mi / cap.capacity } else { 1.0 };
    let coding_gap = if mi > 0.0 { rate / mi } else { 0.0 };
    Ok(SparseDenseReport { mi_per_weight: mi, rate, ultimate_rate: ultimate, shaping_gap, coding_gap })
}
