//! Capacity per unit cost of a [`BinaryChannel`].
//!
//! `C = max_p I(p) / wᵀp` is found by bisection on a rate `λ`: for fixed `λ`
//! the concave problem `max_p I(p) − λ·wᵀp` is solved with Blahut–Arimoto
//! multiplicative updates `p_i ← p_i · 2^(D_i − λ w_i) / Z`, where
//! `D_i = Σ_j h_ji log2(h_ji / r_j)`. The optimum of that problem is positive
//! exactly when `λ < C`. The result is certified by [`kkt_check`]:
//! `D_i(r*) ≤ C·w_i` for every input, with equality on the support of `p*`.

use thiserror::Error;

use crate::channel::{kl_divergence, BinaryChannel, ChannelError, Pmf};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// Once the Lagrangian's upper and lower bounds are this close the rate
/// bracket cannot be narrowed further in double precision.
const BRACKET_RESOLUTION: f64 = 1e-15;

/// Iterations reserved for the exact refinement of an uncertified result.
const REFINE_STEPS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityResult {
    pub p_star: Pmf,
    /// Bits per unit time.
    pub capacity: f64,
    pub r_star: Pmf,
    pub kkt_residual: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CapacityError {
    #[error("capacity solver did not converge after {iterations} iterations (KKT residual {})", best.kkt_residual)]
    NotConverged { best: Box<CapacityResult>, iterations: usize },
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("pmf puts mass where the capacity-achieving pmf has none")]
    SupportViolation,
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// [`solve_capacity`] with the default tolerance and iteration budget.
pub fn capacity(ch: &BinaryChannel) -> Result<CapacityResult, CapacityError> {
    solve_capacity(ch, DEFAULT_TOL, DEFAULT_MAX_ITER)
}

pub fn solve_capacity(ch: &BinaryChannel, tol: f64, max_iter: usize) -> Result<CapacityResult, CapacityError> {
    if !(tol > 0.0) {
        return Err(CapacityError::InvalidTolerance(tol));
    }
    let w = ch.durations();
    if ch.is_useless() {
        let u = Pmf::uniform(2);
        let r_star = ch.output_pmf(&u)?;
        return Ok(CapacityResult { p_star: u, capacity: 0.0, r_star, kkt_residual: 0.0 });
    }

    // I(p) ≤ 1 bit, so C ≤ 1 / min(w).
    let mut lo = 0.0;
    let mut hi = 1.0 / w[0].min(w[1]);
    let mut p = [0.5, 0.5];
    let mut iterations = 0usize;
    let budget = max_iter.saturating_sub(REFINE_STEPS);

    'bisect: while hi - lo > f64::EPSILON * hi {
        let lambda = 0.5 * (lo + hi);
        loop {
            let g = lagrangian_gradient(ch, &p, lambda);
            let lower = p[0] * g[0] + p[1] * g[1];
            let upper = g[0].max(g[1]);
            if lower > 0.0 {
                lo = lambda;
                break;
            }
            if upper < 0.0 {
                hi = lambda;
                break;
            }
            if upper - lower < BRACKET_RESOLUTION {
                // λ agrees with C to working precision.
                break 'bisect;
            }
            if iterations >= budget {
                break 'bisect;
            }
            blahut_step(&mut p, &g);
            iterations += 1;
        }
    }

    // Polish p at the final rate so the KKT equalities hold tightly.
    let lambda = 0.5 * (lo + hi);
    while iterations < budget {
        let g = lagrangian_gradient(ch, &p, lambda);
        let lower = p[0] * g[0] + p[1] * g[1];
        if g[0].max(g[1]) - lower < BRACKET_RESOLUTION {
            break;
        }
        blahut_step(&mut p, &g);
        iterations += 1;
    }

    let mut result = certify(ch, p)?;
    if result.kkt_residual > tol && iterations + REFINE_STEPS <= max_iter {
        // Nearly useless channels make the multiplicative updates crawl.
        let refined = certify(ch, stationary_input(ch, &mut iterations))?;
        if refined.kkt_residual < result.kkt_residual {
            result = refined;
        }
    }
    if result.kkt_residual > tol {
        return Err(CapacityError::NotConverged { best: Box::new(result), iterations });
    }
    Ok(result)
}

fn certify(ch: &BinaryChannel, p: [f64; 2]) -> Result<CapacityResult, CapacityError> {
    let p_star = Pmf::new(p.to_vec())?;
    let r_star = ch.output_pmf(&p_star)?;
    let capacity = ch.rate_per_cost(&p_star)?;
    let mut result = CapacityResult { p_star, capacity, r_star, kkt_residual: 0.0 };
    result.kkt_residual = kkt_check(ch, &result);
    Ok(result)
}

/// Maximizer of `I(p) / wᵀp` over binary `p`, by bisection on the sign of
/// its derivative `D_0 − D_1 − R(p)(w_0 − w_1)`.
fn stationary_input(ch: &BinaryChannel, iterations: &mut usize) -> [f64; 2] {
    let w = ch.durations();
    let slope = |p0: f64| {
        let p = [p0, 1.0 - p0];
        let g = lagrangian_gradient(ch, &p, 0.0);
        let rate = (p[0] * g[0] + p[1] * g[1]) / (p[0] * w[0] + p[1] * w[1]);
        g[0] - g[1] - rate * (w[0] - w[1])
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..REFINE_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        *iterations += 1;
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p0 = 0.5 * (lo + hi);
    [p0, 1.0 - p0]
}

/// `D_i(r) − λ w_i` for the output pmf induced by `p`.
fn lagrangian_gradient(ch: &BinaryChannel, p: &[f64; 2], lambda: f64) -> [f64; 2] {
    let w = ch.durations();
    let r0 = ch.transition(0, 0) * p[0] + ch.transition(0, 1) * p[1];
    let r = [r0, 1.0 - r0];
    let mut g = [0.0; 2];
    for (i, gi) in g.iter_mut().enumerate() {
        for (j, rj) in r.iter().enumerate() {
            let h = ch.transition(j, i);
            if h > 0.0 {
                *gi += h * (h / rj).log2();
            }
        }
        *gi -= lambda * w[i];
    }
    g
}

fn blahut_step(p: &mut [f64; 2], g: &[f64; 2]) {
    // Shift exponents by their max so neither factor overflows.
    let m = g[0].max(g[1]);
    let a = p[0] * (g[0] - m).exp2();
    let b = p[1] * (g[1] - m).exp2();
    let z = a + b;
    p[0] = a / z;
    p[1] = b / z;
}

/// Largest violation of the optimality conditions for `result`.
///
/// For every input, `g_i = D_i(r*) − C·w_i` must be ≤ 0, and = 0 where
/// `p*_i > 0`. Channels with identical columns only check the inequality.
pub fn kkt_check(ch: &BinaryChannel, result: &CapacityResult) -> f64 {
    let d = ch.input_divergences(&result.r_star);
    let w = ch.durations();
    let mut residual: f64 = 0.0;
    for i in 0..2 {
        let g = d[i] - result.capacity * w[i];
        residual = residual.max(g);
        if result.p_star.get(i) > 0.0 && !ch.is_useless() {
            residual = residual.max(g.abs());
        }
    }
    residual
}

/// `C − D(r‖r*) / wᵀp`, which equals `I(p) / wᵀp` whenever `p` is supported
/// inside the support of `p*`.
pub fn wrong_pmf_rate(ch: &BinaryChannel, p: &Pmf, result: &CapacityResult) -> Result<f64, CapacityError> {
    if !p.support_within(&result.p_star) {
        return Err(CapacityError::SupportViolation);
    }
    let r = ch.output_pmf(p)?;
    Ok(result.capacity - kl_divergence(&r, &result.r_star) / ch.cost(p)?)
}

/// Upper bound `D(p‖p*) / cost` on the rate penalty of using `p` instead of `p*`.
pub fn penalty_bound(p: &Pmf, result: &CapacityResult, cost: f64) -> Result<f64, CapacityError> {
    if !p.support_within(&result.p_star) {
        return Err(CapacityError::SupportViolation);
    }
    Ok(kl_divergence(p, &result.p_star) / cost)
}

/// `[I(u) / wᵀu] / C`; reported as 1 for channels with zero capacity.
pub fn uniform_shaping_gain(ch: &BinaryChannel, result: &CapacityResult) -> f64 {
    if result.capacity == 0.0 {
        return 1.0;
    }
    let u = Pmf::uniform(2);
    ch.rate_per_cost(&u).expect("binary pmf") / result.capacity
}
