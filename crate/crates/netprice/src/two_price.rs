//! Two-level pricing: which agents get the discounted price.
//!
//! With exogenous prices `p_low < p_high` below every `a_i`, all agents stay
//! active and the profit of an assignment `y` (+1 = full price, -1 =
//! discounted) is `(delta y + c_hat 1)^T A (a_hat - delta y)` with
//! `A = (Lambda - G)^{-1}`, `p_mid = (p_high + p_low)/2`,
//! `delta = p_high - p_mid`, `a_hat = a - p_mid 1`, `c_hat = p_mid - c`.
//! Choosing the optimal assignment is NP-hard, so beyond exact enumeration at
//! small `n` this module ships the relax-and-round pipeline: rewrite the
//! profit as a quadratic in `y` over {-1, 1}^n, homogenize the linear term
//! into one extra coordinate, relax to a unit-diagonal PSD matrix, solve the
//! relaxation with a first-order splitting scheme, and round by random
//! hyperplanes. The rounded solution carries a 0.878-style guarantee after
//! shifting the objective by the offset `m`.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{MarketInstance, PriceVector};

/// Guarantee constant for the rounding certificate.
pub const GW_ALPHA: f64 = 0.878;
/// Instances up to this size take the exact enumeration fast path.
pub const BRUTE_FORCE_LIMIT: usize = 20;
/// Default stopping tolerance of the relaxation solver.
pub const DEFAULT_SDP_TOL: f64 = 1e-7;
/// Default iteration budget of the relaxation solver.
pub const DEFAULT_SDP_MAX_ITER: usize = 20_000;

/// A market instance together with the two exogenous price levels.
#[derive(Debug, Clone)]
pub struct TwoPriceInstance {
    base: MarketInstance,
    p_low: f64,
    p_high: f64,
}

impl TwoPriceInstance {
    /// Requires `p_low < p_high` and both prices below `min_i a_i`, so every
    /// agent buys a positive amount regardless of the assignment.
    pub fn new(base: MarketInstance, p_low: f64, p_high: f64) -> Result<Self> {
        if !(p_low.is_finite() && p_high.is_finite()) {
            return Err(Error::InvalidParameter("non-finite price level".into()));
        }
        if p_low >= p_high {
            return Err(Error::InvalidParameter(format!(
                "p_low = {p_low} must be below p_high = {p_high}"
            )));
        }
        let a_min = base.a().min();
        if p_low >= a_min || p_high >= a_min {
            return Err(Error::InvalidParameter(format!(
                "price levels must stay below min a_i = {a_min}"
            )));
        }
        Ok(Self {
            base,
            p_low,
            p_high,
        })
    }

    /// Degenerate gaps allowed; used by internal algebra checks only.
    #[cfg(test)]
    pub(crate) fn new_unchecked(base: MarketInstance, p_low: f64, p_high: f64) -> Self {
        Self {
            base,
            p_low,
            p_high,
        }
    }

    pub fn base(&self) -> &MarketInstance {
        &self.base
    }

    pub fn p_low(&self) -> f64 {
        self.p_low
    }

    pub fn p_high(&self) -> f64 {
        self.p_high
    }

    /// Midpoint price `(p_high + p_low) / 2`.
    pub fn p_mid(&self) -> f64 {
        (self.p_high + self.p_low) * 0.5
    }

    /// Half gap `p_high - p_mid`.
    pub fn delta(&self) -> f64 {
        self.p_high - self.p_mid()
    }

    fn parts(&self) -> Result<QuboParts> {
        let a = linalg::inverse(&self.base.lambda_minus_g(), "two-price inverse")?;
        let n = self.base.n();
        let p_mid = self.p_mid();
        let a_hat = self.base.a().map(|ai| ai - p_mid);
        let c_hat = p_mid - self.base.c();
        Ok(QuboParts {
            inv: a,
            a_hat,
            c_hat,
            delta: self.delta(),
            n,
        })
    }
}

struct QuboParts {
    inv: DMatrix<f64>,
    a_hat: DVector<f64>,
    c_hat: f64,
    delta: f64,
    n: usize,
}

/// The profit objective in homogenizable quadratic form.
///
/// For every assignment `y` in {-1, 1}^n the profit equals
/// `y^T Q y + 2 d^T y + z`, with `Q` symmetric and zero-diagonal (the
/// diagonal is folded into `z`). `q_hat` is the homogenized
/// `(n+1) x (n+1)` block matrix `[[Q, d], [d^T, 0]]`.
#[derive(Debug, Clone)]
pub struct QuboProblem {
    pub q: DMatrix<f64>,
    pub d: DVector<f64>,
    pub z: f64,
    pub q_hat: DMatrix<f64>,
}

impl QuboProblem {
    pub fn n(&self) -> usize {
        self.d.len()
    }

    /// Objective value of an assignment.
    pub fn objective(&self, y: &[i8]) -> f64 {
        let n = self.n();
        debug_assert_eq!(y.len(), n);
        let mut quad = 0.0;
        for i in 0..n {
            let yi = f64::from(y[i]);
            let row: f64 = y
                .iter()
                .enumerate()
                .map(|(j, &yj)| self.q[(i, j)] * f64::from(yj))
                .sum();
            quad += yi * row;
        }
        let lin: f64 = (0..n).map(|i| self.d[i] * f64::from(y[i])).sum();
        quad + 2.0 * lin + self.z
    }

    /// Sum of absolute entries of the homogenized matrix.
    pub fn abs_sum(&self) -> f64 {
        self.q_hat.iter().map(|v| v.abs()).sum()
    }
}

fn build_qubo(parts: &QuboParts) -> QuboProblem {
    let QuboParts {
        inv,
        a_hat,
        c_hat,
        delta,
        n,
    } = parts;
    let (n, delta, c_hat) = (*n, *delta, *c_hat);
    let ones = DVector::from_element(n, 1.0);
    let inv_a = inv * a_hat;
    let inv_t_1 = inv.transpose() * &ones;
    // -delta^2 y^T A y with the diagonal folded into the constant.
    let q = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            -delta * delta * 0.5 * (inv[(i, j)] + inv[(j, i)])
        }
    });
    let z = c_hat * ones.dot(&inv_a) - delta * delta * inv.trace();
    let d = DVector::from_fn(n, |i, _| 0.5 * delta * (inv_a[i] - c_hat * inv_t_1[i]));
    let mut q_hat = DMatrix::zeros(n + 1, n + 1);
    q_hat.view_mut((0, 0), (n, n)).copy_from(&q);
    for i in 0..n {
        q_hat[(i, n)] = d[i];
        q_hat[(n, i)] = d[i];
    }
    QuboProblem { q, d, z, q_hat }
}

/// Rewrite the profit objective as a zero-diagonal QUBO plus a constant.
pub fn to_qubo(tp: &TwoPriceInstance) -> Result<QuboProblem> {
    Ok(build_qubo(&tp.parts()?))
}

/// Additive offset making the shifted objective nonnegative, so the
/// multiplicative rounding guarantee applies to `W + m`.
pub fn m_offset(tp: &TwoPriceInstance) -> Result<f64> {
    let parts = tp.parts()?;
    let QuboParts {
        inv,
        a_hat,
        c_hat,
        delta,
        n,
    } = &parts;
    let ones = DVector::from_element(*n, 1.0);
    let inv_a = inv * a_hat;
    let inv_t_1 = inv.transpose() * &ones;
    let one_a_one = ones.dot(&(inv * &ones));
    let abs_term: f64 = (0..*n).map(|i| (inv_a[i] - c_hat * inv_t_1[i]).abs()).sum();
    Ok(delta * delta * one_a_one + delta * abs_term - c_hat * ones.dot(&inv_a)
        - 2.0 * delta * delta * inv.trace())
}

/// How a two-price result was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    BruteForce,
    SdpRounding,
}

impl SolveMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveMethod::BruteForce => "brute_force",
            SolveMethod::SdpRounding => "sdp_rounding",
        }
    }
}

/// Statistics over rounding trials.
#[derive(Debug, Clone, Copy)]
pub struct RoundingStats {
    pub trials: usize,
    pub mean: f64,
    pub best: f64,
}

/// A price assignment together with its profit and certificate data.
#[derive(Debug, Clone)]
pub struct TwoPriceResult {
    /// +1 for full price, -1 for discounted.
    pub assignment: Vec<i8>,
    pub prices: PriceVector,
    pub profit: f64,
    pub m_offset: f64,
    /// Certified upper bound from the relaxation (None on the exact path).
    pub sdp_upper_bound: Option<f64>,
    /// Whether `mean + m > 0.878 (bound + m)` held (None on the exact path).
    pub guarantee_holds: Option<bool>,
    pub rounding: Option<RoundingStats>,
    pub method: SolveMethod,
}

fn result_from_assignment(
    tp: &TwoPriceInstance,
    q: &QuboProblem,
    y: Vec<i8>,
    method: SolveMethod,
) -> Result<TwoPriceResult> {
    let profit = q.objective(&y);
    let prices: Vec<f64> = y
        .iter()
        .map(|&s| if s > 0 { tp.p_high } else { tp.p_low })
        .collect();
    Ok(TwoPriceResult {
        assignment: y,
        prices: PriceVector::new(prices)?,
        profit,
        m_offset: m_offset(tp)?,
        sdp_upper_bound: None,
        guarantee_holds: None,
        rounding: None,
        method,
    })
}

/// Exact optimum by enumerating all `2^n` assignments.
///
/// Ties break toward the assignment whose earliest differing agent takes the
/// full price, so reruns are deterministic.
pub fn brute_force(tp: &TwoPriceInstance) -> Result<TwoPriceResult> {
    let n = tp.base.n();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let q = to_qubo(tp)?;
    let mut best_y: Vec<i8> = Vec::new();
    let mut best = f64::NEG_INFINITY;
    // Bit k of the mask drives agent k, with agent 0 most significant and a
    // zero bit meaning +1; ascending masks then enumerate assignments in the
    // tie-break order, so strict improvement keeps the canonical winner.
    for mask in 0u32..(1u32 << n) {
        let y: Vec<i8> = (0..n)
            .map(|i| if mask >> (n - 1 - i) & 1 == 0 { 1 } else { -1 })
            .collect();
        let w = q.objective(&y);
        if w > best {
            best = w;
            best_y = y;
        }
    }
    result_from_assignment(tp, &q, best_y, SolveMethod::BruteForce)
}

/// Solution of the unit-diagonal PSD relaxation of a homogenized QUBO.
#[derive(Debug, Clone)]
pub struct SdpSolution {
    /// Feasible matrix: exactly unit diagonal, PSD to solver precision.
    pub y_matrix: DMatrix<f64>,
    /// Objective `<Q_hat, Y> + z` at `y_matrix`.
    pub objective: f64,
    /// Certified upper bound on the relaxation optimum (and hence on the
    /// exact optimum), from a shifted dual-feasible point.
    pub upper_bound: f64,
    /// Factor with `y_matrix = factor^T factor`; column `i` is the unit
    /// vector assigned to coordinate `i`.
    pub factor: DMatrix<f64>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub converged: bool,
}

/// Maximize `<Q_hat, Y> + z` over unit-diagonal PSD matrices by an
/// alternating splitting scheme.
///
/// Each sweep takes an affine step on the linear objective with the unit
/// diagonal re-imposed, projects onto the PSD cone by eigendecomposition
/// with negative eigenvalues clamped to zero, and updates the running dual;
/// the penalty weight is rebalanced from the residuals. Hitting the
/// iteration budget returns the best iterate with diagnostics rather than
/// failing.
pub fn solve_sdp(q: &QuboProblem, tol: f64, max_iter: usize) -> Result<SdpSolution> {
    let n1 = q.n() + 1;
    let scale = q.q_hat.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
    if scale == 0.0 {
        // Degenerate objective: the identity is optimal.
        let eye = DMatrix::identity(n1, n1);
        return Ok(SdpSolution {
            y_matrix: eye.clone(),
            objective: q.z,
            upper_bound: q.z,
            factor: eye,
            iterations: 0,
            primal_residual: 0.0,
            converged: true,
        });
    }
    let c = &q.q_hat / scale;
    let mut rho = 1.0;
    let mut z_psd = DMatrix::<f64>::identity(n1, n1);
    let mut dual = DMatrix::<f64>::zeros(n1, n1);
    let mut iterations = 0;
    let mut primal_residual = f64::INFINITY;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let mut y = &z_psd - &dual + &c / rho;
        for i in 0..n1 {
            y[(i, i)] = 1.0;
        }
        let w = &y + &dual;
        let (vals, vecs) = linalg::symmetric_eigen(&w);
        let clamped = DMatrix::from_diagonal(&vals.map(|v| v.max(0.0)));
        let z_next = &vecs * clamped * vecs.transpose();
        primal_residual = (&y - &z_next).norm() / n1 as f64;
        let dual_residual = rho * (&z_next - &z_psd).norm() / n1 as f64;
        dual += &y - &z_next;
        z_psd = z_next;
        if primal_residual < tol && dual_residual < tol {
            converged = true;
            break;
        }
        if iterations % 10 == 0 {
            if primal_residual > 10.0 * dual_residual {
                rho *= 2.0;
                dual /= 2.0;
            } else if dual_residual > 10.0 * primal_residual {
                rho /= 2.0;
                dual *= 2.0;
            }
        }
    }

    // Feasible point: scale the PSD iterate back to an exact unit diagonal.
    let d_scale = DVector::from_fn(n1, |i, _| z_psd[(i, i)].max(1e-300).sqrt());
    let mut y_feas = DMatrix::from_fn(n1, n1, |i, j| z_psd[(i, j)] / (d_scale[i] * d_scale[j]));
    for i in 0..n1 {
        y_feas[(i, i)] = 1.0;
    }
    let objective = q.q_hat.dot(&y_feas) + q.z;

    // Dual-feasible bound: mu_i = (Q_hat Y)_ii at the optimum; shift by the
    // most negative eigenvalue of Diag(mu) - Q_hat to restore feasibility.
    let qy = &q.q_hat * &y_feas;
    let mut mu = DVector::from_fn(n1, |i, _| qy[(i, i)]);
    let mut slack = -&q.q_hat;
    for i in 0..n1 {
        slack[(i, i)] += mu[i];
    }
    let (slack_vals, _) = linalg::symmetric_eigen(&slack);
    if slack_vals[0] < 0.0 {
        mu.add_scalar_mut(-slack_vals[0]);
    }
    let upper_bound = mu.sum() + q.z;

    let (vals, vecs) = linalg::symmetric_eigen(&y_feas);
    let sqrt_vals = vals.map(|v| v.max(0.0).sqrt());
    let factor = DMatrix::from_fn(n1, n1, |r, c2| sqrt_vals[r] * vecs[(c2, r)]);

    Ok(SdpSolution {
        y_matrix: y_feas,
        objective,
        upper_bound,
        factor,
        iterations,
        primal_residual,
        converged,
    })
}

/// Round a relaxation solution by random hyperplanes.
///
/// Each trial draws a uniform direction on the unit sphere, gives every
/// coordinate the sign of its factor column's inner product with the
/// direction, and orients the result so the homogenizing coordinate reads
/// +1. Per-trial generators are derived from the seed by stream index, so
/// sequential and parallel runs agree; the best assignment (first trial on
/// ties) and the trial mean are returned.
pub fn round_hyperplane(
    q: &QuboProblem,
    sol: &SdpSolution,
    trials: usize,
    seed: u64,
) -> (Vec<i8>, RoundingStats) {
    assert!(trials > 0, "trials must be positive");
    let n = q.n();
    let n1 = n + 1;
    let evaluate = |trial: usize| -> (f64, Vec<i8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial as u64);
        let mut r = DVector::from_fn(n1, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = r.norm();
        if norm > 0.0 {
            r /= norm;
        }
        let side = |i: usize| -> bool {
            let mut dot = 0.0;
            for k in 0..n1 {
                dot += sol.factor[(k, i)] * r[k];
            }
            dot >= 0.0
        };
        let anchor = side(n);
        let y: Vec<i8> = (0..n).map(|i| if side(i) == anchor { 1 } else { -1 }).collect();
        (q.objective(&y), y)
    };
    let outcomes: Vec<(f64, Vec<i8>)> = (0..trials).into_par_iter().map(evaluate).collect();
    let mut best_idx = 0;
    let mut sum = 0.0;
    for (t, (w, _)) in outcomes.iter().enumerate() {
        sum += w;
        if *w > outcomes[best_idx].0 {
            best_idx = t;
        }
    }
    let (best, y) = outcomes.into_iter().nth(best_idx).expect("at least one trial");
    (
        y,
        RoundingStats {
            trials,
            mean: if trials > 0 { sum / trials as f64 } else { f64::NAN },
            best,
        },
    )
}

/// Relax-and-round pipeline with the exact fast path at small `n`.
pub fn approximate(tp: &TwoPriceInstance, trials: usize, seed: u64) -> Result<TwoPriceResult> {
    if tp.base.n() <= BRUTE_FORCE_LIMIT {
        brute_force(tp)
    } else {
        approximate_sdp(tp, trials, seed)
    }
}

/// Relax-and-round pipeline, regardless of instance size.
pub fn approximate_sdp(tp: &TwoPriceInstance, trials: usize, seed: u64) -> Result<TwoPriceResult> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    let q = to_qubo(tp)?;
    let sol = solve_sdp(&q, DEFAULT_SDP_TOL, DEFAULT_SDP_MAX_ITER)?;
    let (y, stats) = round_hyperplane(&q, &sol, trials, seed);
    let m = m_offset(tp)?;
    let mut result = result_from_assignment(tp, &q, y, SolveMethod::SdpRounding)?;
    result.profit = stats.best;
    result.sdp_upper_bound = Some(sol.upper_bound);
    result.guarantee_holds = Some(stats.mean + m > GW_ALPHA * (sol.upper_bound + m));
    result.rounding = Some(stats);
    Ok(result)
}
