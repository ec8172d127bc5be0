//! Consumption equilibria at fixed prices.
//!
//! At a price vector `p` each agent best-responds with
//! `max((a_i - p_i + sum_j g_ij x_j) / (2 b_i), 0)`. Under the concavity
//! condition the simultaneous best-response map is a contraction with factor
//! below 1/2 in the infinity norm, so the equilibrium exists, is unique, and
//! the plain fixed-point iteration finds it. The active support is then
//! re-solved exactly to polish the positive entries.
//!
//! [`solve_equilibrium_exact`] enumerates all `2^n` candidate supports and is
//! the test oracle for the iterative path.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{ConsumptionVector, MarketInstance, PriceVector};

/// Default fixed-point tolerance (infinity norm of the best-response gap).
pub const DEFAULT_TOL: f64 = 1e-10;
/// Default iteration budget; the contraction factor below 1/2 makes ~40
/// iterations typical, so this is a wide margin.
pub const DEFAULT_MAX_ITER: usize = 10_000;
/// Polished consumptions above this are active; values in `[0, threshold]`
/// resolve toward inactive.
pub const SUPPORT_THRESHOLD: f64 = 1e-9;
/// Enumeration guard for the exact solver.
pub const MAX_EXACT_AGENTS: usize = 20;

/// The unique consumption equilibrium at some price vector.
#[derive(Debug, Clone)]
pub struct ConsumptionEquilibrium {
    pub x: ConsumptionVector,
    /// Agents with strictly positive consumption, ascending.
    pub support: Vec<usize>,
    /// Infinity norm of the best-response gap at `x`.
    pub residual: f64,
    /// Fixed-point sweeps used (0 for the enumeration path).
    pub iterations: usize,
}

/// Best response of agent `i` against the profile `x` at unit price `p_i`.
pub fn best_response(
    instance: &MarketInstance,
    i: usize,
    x: &ConsumptionVector,
    p_i: f64,
) -> Result<f64> {
    let n = instance.n();
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, n });
    }
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x.len(),
        });
    }
    Ok(best_response_raw(instance, i, x.values(), p_i))
}

fn best_response_raw(instance: &MarketInstance, i: usize, x: &DVector<f64>, p_i: f64) -> f64 {
    let peer: f64 = instance
        .influence()
        .row(i)
        .iter()
        .zip(x.iter())
        .map(|(g, xj)| g * xj)
        .sum();
    ((instance.a()[i] - p_i + peer) / (2.0 * instance.b()[i])).max(0.0)
}

fn residual_inf(instance: &MarketInstance, p: &PriceVector, x: &DVector<f64>) -> f64 {
    let mut r = 0.0_f64;
    for i in 0..instance.n() {
        let br = best_response_raw(instance, i, x, p.values()[i]);
        r = r.max((br - x[i]).abs());
    }
    r
}

/// Solve the consumption game by simultaneous best-response iteration from
/// the zero profile.
pub fn solve_equilibrium(
    instance: &MarketInstance,
    p: &PriceVector,
    tol: f64,
    max_iter: usize,
) -> Result<ConsumptionEquilibrium> {
    let start = DVector::zeros(instance.n());
    solve_equilibrium_from(instance, p, &start, tol, max_iter)
}

/// Same as [`solve_equilibrium`] but starting from `x0` (useful to warm-start
/// price sweeps; the fixed point does not depend on the start).
pub fn solve_equilibrium_from(
    instance: &MarketInstance,
    p: &PriceVector,
    x0: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<ConsumptionEquilibrium> {
    let n = instance.n();
    if p.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: p.len(),
        });
    }
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x0.len(),
        });
    }
    let mut x = x0.map(|v| v.max(0.0));
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let mut delta = 0.0_f64;
        let next = DVector::from_fn(n, |i, _| best_response_raw(instance, i, &x, p.values()[i]));
        for i in 0..n {
            delta = delta.max((next[i] - x[i]).abs());
        }
        x = next;
        if delta < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        let residual = residual_inf(instance, p, &x);
        if residual > tol {
            return Err(Error::NoConvergence {
                iterations,
                residual,
            });
        }
    }

    let (x, support) = polish_support(instance, p, &x)?;
    let residual = residual_inf(instance, p, &x);
    if residual > tol.max(1e-12) {
        return Err(Error::NoConvergence {
            iterations,
            residual,
        });
    }
    Ok(ConsumptionEquilibrium {
        x: ConsumptionVector::from_vector_unchecked(x),
        support,
        residual,
        iterations,
    })
}

/// Extract the active set from an iterate and re-solve the support system
/// exactly. Agents whose polished consumption falls to the threshold are
/// dropped and the solve repeated; excluded agents whose best response turns
/// positive are added back.
fn polish_support(
    instance: &MarketInstance,
    p: &PriceVector,
    iterate: &DVector<f64>,
) -> Result<(DVector<f64>, Vec<usize>)> {
    let n = instance.n();
    let mut active: Vec<usize> = (0..n).filter(|&i| iterate[i] > SUPPORT_THRESHOLD).collect();
    for _round in 0..=n {
        let x = solve_on_support(instance, p, &active)?;
        let keep: Vec<usize> = active
            .iter()
            .copied()
            .filter(|&i| x[i] > SUPPORT_THRESHOLD)
            .collect();
        if keep.len() != active.len() {
            active = keep;
            continue;
        }
        // Re-check the excluded agents' inactivity condition.
        let joiners: Vec<usize> = (0..n)
            .filter(|&i| !active.contains(&i))
            .filter(|&i| best_response_raw(instance, i, &x, p.values()[i]) > SUPPORT_THRESHOLD)
            .collect();
        if joiners.is_empty() {
            return Ok((x, active));
        }
        active.extend(joiners);
        active.sort_unstable();
    }
    Err(Error::Inconsistent(
        "support polishing did not stabilize".into(),
    ))
}

/// Solve the interior system on `support` and embed into the full profile
/// (zeros elsewhere). Entries are clamped at zero only by support choice.
fn solve_on_support(
    instance: &MarketInstance,
    p: &PriceVector,
    support: &[usize],
) -> Result<DVector<f64>> {
    let n = instance.n();
    let mut x = DVector::zeros(n);
    if support.is_empty() {
        return Ok(x);
    }
    let k = support.len();
    let g = instance.influence();
    let m = DMatrix::from_fn(k, k, |r, c| {
        let (i, j) = (support[r], support[c]);
        let diag = if i == j { 2.0 * instance.b()[i] } else { 0.0 };
        diag - g[(i, j)]
    });
    let rhs = DVector::from_fn(k, |r, _| instance.a()[support[r]] - p.values()[support[r]]);
    let xs = linalg::solve(&m, &rhs, "equilibrium support system")?;
    for (r, &i) in support.iter().enumerate() {
        x[i] = xs[r];
    }
    Ok(x)
}

/// Exact equilibrium by enumerating all `2^n` supports; the oracle for tests.
///
/// Returns the unique support whose candidate satisfies positivity on the
/// support and the inactivity condition off it. Zero or multiple passing
/// supports signal a bug and surface as `Inconsistent`.
pub fn solve_equilibrium_exact(
    instance: &MarketInstance,
    p: &PriceVector,
) -> Result<ConsumptionEquilibrium> {
    let n = instance.n();
    if n > MAX_EXACT_AGENTS {
        return Err(Error::TooLarge {
            n,
            limit: MAX_EXACT_AGENTS,
        });
    }
    if p.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: p.len(),
        });
    }
    let mut found: Option<(DVector<f64>, Vec<usize>)> = None;
    for mask in 0u32..(1u32 << n) {
        let support: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let x = match solve_on_support(instance, p, &support) {
            Ok(x) => x,
            Err(_) => continue,
        };
        if support.iter().any(|&i| x[i] <= 0.0) {
            continue;
        }
        let inactive_ok = (0..n)
            .filter(|i| mask >> i & 1 == 0)
            .all(|i| {
                let peer: f64 = instance
                    .influence()
                    .row(i)
                    .iter()
                    .zip(x.iter())
                    .map(|(g, xj)| g * xj)
                    .sum();
                instance.a()[i] - p.values()[i] + peer <= 0.0
            });
        if !inactive_ok {
            continue;
        }
        if let Some((_, ref prev)) = found {
            return Err(Error::Inconsistent(format!(
                "supports {prev:?} and {support:?} both pass"
            )));
        }
        found = Some((x, support));
    }
    match found {
        Some((x, support)) => {
            let residual = residual_inf(instance, p, &x);
            Ok(ConsumptionEquilibrium {
                x: ConsumptionVector::from_vector_unchecked(x),
                support,
                residual,
                iterations: 0,
            })
        }
        None => Err(Error::Inconsistent("no support passes".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_instance(rng: &mut ChaCha8Rng, n: usize) -> MarketInstance {
        let mut g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(0.0..1.0));
        for i in 0..n {
            g[(i, i)] = 0.0;
        }
        let b: Vec<f64> = (0..n)
            .map(|i| g.row(i).sum() * rng.gen_range(1.05..2.0) + rng.gen_range(0.2..1.0))
            .collect();
        let c = rng.gen_range(0.0..1.0);
        let a: Vec<f64> = (0..n).map(|_| c + rng.gen_range(0.5..3.0)).collect();
        MarketInstance::new(g, a, b, c).unwrap()
    }

    fn random_prices(rng: &mut ChaCha8Rng, inst: &MarketInstance) -> PriceVector {
        // Straddle the participation threshold so supports vary.
        let p: Vec<f64> = (0..inst.n())
            .map(|i| rng.gen_range(0.0..inst.a()[i] * 1.3))
            .collect();
        PriceVector::new(p).unwrap()
    }

    #[test]
    fn best_response_clamps_and_decouples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inst = random_instance(&mut rng, 3);
        let x = ConsumptionVector::zeros(3);
        let high = inst.a()[0] + 1.0;
        assert_eq!(best_response(&inst, 0, &x, high).unwrap(), 0.0);

        let g0 = MarketInstance::new(DMatrix::zeros(2, 2), vec![4.0, 2.0], vec![1.0, 1.0], 0.0).unwrap();
        let br = best_response(&g0, 0, &ConsumptionVector::zeros(2), 1.0).unwrap();
        assert!((br - 1.5).abs() < 1e-15);
    }

    #[test]
    fn best_response_hand_case() {
        let g = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.0, 0.0]);
        let inst = MarketInstance::new(g, vec![4.0, 4.0], vec![2.0, 2.0], 0.0).unwrap();
        let x = ConsumptionVector::new(vec![0.0, 2.0]).unwrap();
        let br = best_response(&inst, 0, &x, 1.0).unwrap();
        assert!((br - 1.0).abs() < 1e-15);
    }

    #[test]
    fn decoupled_instance_solves_componentwise() {
        let inst =
            MarketInstance::new(DMatrix::zeros(3, 3), vec![4.0, 2.0, 1.0], vec![1.0, 1.0, 1.0], 0.0)
                .unwrap();
        let p = PriceVector::new(vec![1.0, 3.0, 0.5]).unwrap();
        let eq = solve_equilibrium(&inst, &p, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let expect = [1.5, 0.0, 0.25];
        for i in 0..3 {
            assert!((eq.x.values()[i] - expect[i]).abs() < 1e-12);
        }
        assert_eq!(eq.support, vec![0, 2]);
    }

    #[test]
    fn prices_above_value_empty_support() {
        let inst =
            MarketInstance::new(DMatrix::zeros(2, 2), vec![2.0, 3.0], vec![1.0, 1.0], 0.0).unwrap();
        let p = PriceVector::new(vec![2.5, 3.5]).unwrap();
        let eq = solve_equilibrium(&inst, &p, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(eq.support.is_empty());
        assert_eq!(eq.x.values().amax(), 0.0);
    }

    #[test]
    fn exact_scalar_case() {
        let inst = MarketInstance::new(DMatrix::zeros(1, 1), vec![4.0], vec![1.0], 0.0).unwrap();
        let p = PriceVector::new(vec![2.0]).unwrap();
        let eq = solve_equilibrium_exact(&inst, &p).unwrap();
        assert_eq!(eq.support, vec![0]);
        assert!((eq.x.values()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exact_symmetric_instance_symmetric_profile() {
        let g = DMatrix::from_row_slice(2, 2, &[0.0, 0.4, 0.4, 0.0]);
        let inst = MarketInstance::new(g, vec![3.0, 3.0], vec![1.0, 1.0], 0.0).unwrap();
        let p = PriceVector::uniform(2, 1.0);
        let eq = solve_equilibrium_exact(&inst, &p).unwrap();
        assert!((eq.x.values()[0] - eq.x.values()[1]).abs() < 1e-14);
    }

    #[test]
    fn exact_guard_rejects_large_instances() {
        let n = MAX_EXACT_AGENTS + 1;
        let inst = MarketInstance::new(DMatrix::zeros(n, n), vec![2.0; n], vec![1.0; n], 0.0).unwrap();
        let p = PriceVector::uniform(n, 1.0);
        assert!(matches!(
            solve_equilibrium_exact(&inst, &p),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn expansive_instance_reports_no_convergence() {
        // Curvature below the incoming influence: the best-response map
        // expands and the residual stays above tolerance.
        let g = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let inst = MarketInstance::new(g, vec![4.0, 4.0], vec![0.4, 0.4], 0.0).unwrap();
        let p = PriceVector::uniform(2, 0.5);
        let res = solve_equilibrium(&inst, &p, 1e-10, 200);
        assert!(matches!(res, Err(Error::NoConvergence { .. })));
    }

    #[test]
    fn iterative_matches_enumeration_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..60 {
            let n = rng.gen_range(1..=8);
            let inst = random_instance(&mut rng, n);
            let p = random_prices(&mut rng, &inst);
            let fixed = solve_equilibrium(&inst, &p, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
            let exact = solve_equilibrium_exact(&inst, &p).unwrap();
            assert!(
                (fixed.x.values() - exact.x.values()).amax() <= 1e-8,
                "profiles diverge"
            );
            assert_eq!(fixed.support, exact.support);
            assert!(fixed.residual <= DEFAULT_TOL.max(1e-12));
        }
    }

    #[test]
    fn unique_fixed_point_from_many_starts() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let n = rng.gen_range(2..=6);
            let inst = random_instance(&mut rng, n);
            let p = random_prices(&mut rng, &inst);
            let reference = solve_equilibrium(&inst, &p, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
            let xbar = (0..n)
                .map(|i| (inst.a()[i] - p.values()[i]).abs() / inst.b()[i])
                .fold(0.0_f64, f64::max);
            for _ in 0..20 {
                let x0 = DVector::from_fn(n, |_, _| rng.gen_range(0.0..xbar.max(0.1)));
                let eq = solve_equilibrium_from(&inst, &p, &x0, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
                assert!((eq.x.values() - reference.x.values()).amax() <= 1e-8);
            }
        }
    }

    #[test]
    fn consumption_weakly_decreasing_in_prices() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..40 {
            let n = rng.gen_range(1..=7);
            let inst = random_instance(&mut rng, n);
            let p = random_prices(&mut rng, &inst);
            let bump: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..0.5)).collect();
            let p_hi = PriceVector::new(
                p.values().iter().zip(&bump).map(|(pi, d)| pi + d).collect(),
            )
            .unwrap();
            let x_lo = solve_equilibrium(&inst, &p, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
            let x_hi = solve_equilibrium(&inst, &p_hi, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
            for i in 0..n {
                assert!(x_hi.x.values()[i] <= x_lo.x.values()[i] + 1e-10);
            }
        }
    }

    #[test]
    fn active_consumption_strictly_decreasing_in_uniform_price() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..30 {
            let n = rng.gen_range(2..=7);
            let inst = random_instance(&mut rng, n);
            let p0 = rng.gen_range(inst.c()..inst.a().min());
            let p1 = p0 + rng.gen_range(1e-4..0.3);
            let lo = solve_equilibrium(&inst, &PriceVector::uniform(n, p0), DEFAULT_TOL, DEFAULT_MAX_ITER)
                .unwrap();
            let hi = solve_equilibrium(&inst, &PriceVector::uniform(n, p1), DEFAULT_TOL, DEFAULT_MAX_ITER)
                .unwrap();
            for &i in &lo.support {
                assert!(hi.x.values()[i] < lo.x.values()[i]);
            }
        }
    }

    #[test]
    fn kkt_residual_within_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.gen_range(1..=8);
            let inst = random_instance(&mut rng, n);
            let p = random_prices(&mut rng, &inst);
            let eq = solve_equilibrium(&inst, &p, 1e-12, DEFAULT_MAX_ITER).unwrap();
            assert!(eq.residual <= 1e-12);
            for &i in &eq.support {
                assert!(eq.x.values()[i] > SUPPORT_THRESHOLD);
            }
        }
    }
}
