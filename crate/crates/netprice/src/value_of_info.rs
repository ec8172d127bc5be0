//! How much is knowing the network worth to the seller?
//!
//! Compares the profit of a seller who prices as if no externalities existed
//! (consumers still respond to them) against one who discriminates optimally
//! with full knowledge of the network. With `v = (a - c 1)/2` and
//! `M = Lambda - G`,
//!
//! ```text
//! pi_0 = v^T M^{-1} v        (network-blind pricing)
//! pi_n = v^T ((M + M^T)/2)^{-1} v   (full discrimination)
//! ```
//!
//! The ratio `pi_0 / pi_n` is sandwiched by spectral bounds built from
//! `M M^{-T} + M^T M^{-1}`, which measure how far the network is from
//! symmetric: on symmetric networks both bounds collapse to 1 and knowing
//! the network is worthless.


use crate::error::{Error, Result};
use crate::linalg;
use crate::model::MarketInstance;

/// Blind vs informed profit together with the spectral sandwich.
#[derive(Debug, Clone, Copy)]
pub struct ProfitComparison {
    /// Profit when pricing ignores the network.
    pub pi0: f64,
    /// Profit under fully informed discrimination.
    pub pi_n: f64,
    /// `pi0 / pi_n`.
    pub ratio: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
}

/// The two profits `(pi0, pi_n)`.
pub fn profits(instance: &MarketInstance) -> Result<(f64, f64)> {
    let v = instance.half_margin();
    let m = instance.lambda_minus_g();
    let blind = linalg::solve(&m, &v, "blind-pricing profit")?;
    let sym = (&m + m.transpose()) * 0.5;
    let informed = linalg::solve(&sym, &v, "informed-pricing profit")?;
    Ok((v.dot(&blind), v.dot(&informed)))
}

/// Spectral bounds `(lower, upper)` on the profit ratio `pi0 / pi_n`.
///
/// Requires `M = Lambda - G` positive definite (in the quadratic-form sense).
/// The bounds are the extreme eigenvalues of
/// `(2 I + M M^{-T} + M^T M^{-1}) / 4`, computed on the congruent symmetric
/// matrix `R ((M^{-1} + M^{-T})/2) R` with `R` the symmetric square root of
/// `(M + M^T)/2`, so a symmetric eigensolver suffices.
pub fn ratio_bounds(instance: &MarketInstance) -> Result<(f64, f64)> {
    let m = instance.lambda_minus_g();
    let sym = (&m + m.transpose()) * 0.5;
    let (sym_vals, _) = linalg::symmetric_eigen(&sym);
    if sym_vals[0] <= 0.0 {
        return Err(Error::NotPositiveDefinite);
    }
    let root = linalg::symmetric_sqrt(&sym)?;
    let inv = linalg::inverse(&m, "ratio bounds")?;
    let inv_sym = (&inv + inv.transpose()) * 0.5;
    let congruent = &root * inv_sym * &root;
    let (vals, _) = linalg::symmetric_eigen(&congruent);
    Ok((vals[0], vals[vals.len() - 1]))
}

/// Profits, ratio, and bounds in one call.
pub fn compare(instance: &MarketInstance) -> Result<ProfitComparison> {
    let (pi0, pi_n) = profits(instance)?;
    let (lower_bound, upper_bound) = ratio_bounds(instance)?;
    Ok(ProfitComparison {
        pi0,
        pi_n,
        ratio: pi0 / pi_n,
        lower_bound,
        upper_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discriminatory;
    use crate::equilibrium::{self, DEFAULT_MAX_ITER, DEFAULT_TOL};
    use crate::generators;
    use crate::model::PriceVector;
    use nalgebra::DMatrix;
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

    #[test]
    fn decoupled_profits_coincide() {
        let inst = MarketInstance::new(
            DMatrix::zeros(3, 3),
            vec![4.0, 3.0, 2.5],
            vec![1.0, 2.0, 0.5],
            1.0,
        )
        .unwrap();
        let (pi0, pi_n) = profits(&inst).unwrap();
        let want: f64 = (0..3)
            .map(|i| (inst.a()[i] - 1.0).powi(2) / (8.0 * inst.b()[i]))
            .sum();
        assert!((pi0 - want).abs() < 1e-12);
        assert!((pi_n - want).abs() < 1e-12);
        let (lo, hi) = ratio_bounds(&inst).unwrap();
        assert!((lo - 1.0).abs() < 1e-10 && (hi - 1.0).abs() < 1e-10);
    }

    #[test]
    fn symmetric_network_ratio_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..10 {
            let n = rng.gen_range(2..=8);
            let base = random_instance(&mut rng, n);
            let inst = MarketInstance::new(
                base.average_interaction(),
                base.a().iter().copied().collect(),
                base.b().iter().map(|b| 2.0 * b).collect(),
                base.c(),
            )
            .unwrap();
            let cmp = compare(&inst).unwrap();
            assert!((cmp.ratio - 1.0).abs() < 1e-10);
            assert!((cmp.lower_bound - 1.0).abs() < 1e-10);
            assert!((cmp.upper_bound - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn star_center_influenced_informed_beats_blind() {
        // Five agents, the center influenced by every leaf; both profits are
        // cross-checked against independent evaluation paths.
        let (g1, _) = generators::star_pair(5).unwrap();
        let inst = MarketInstance::new(g1, vec![3.0; 5], vec![5.0; 5], 1.0).unwrap();
        let (pi0, pi_n) = profits(&inst).unwrap();
        assert!(pi_n > pi0);

        // Informed profit equals the discriminatory optimum.
        let disc = discriminatory::optimal_prices(&inst).unwrap();
        assert!((disc.profit - pi_n).abs() < 1e-10);

        // Blind profit equals the equilibrium response to the naive prices.
        let naive = PriceVector::new(
            (0..5).map(|i| (inst.a()[i] + inst.c()) / 2.0).collect(),
        )
        .unwrap();
        let eq = equilibrium::solve_equilibrium(&inst, &naive, DEFAULT_TOL, DEFAULT_MAX_ITER)
            .unwrap();
        let blind_profit = inst.profit(&naive, &eq.x).unwrap();
        assert!((blind_profit - pi0).abs() < 1e-9);
    }

    #[test]
    fn sandwich_holds_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let n = rng.gen_range(2..=10);
            let inst = random_instance(&mut rng, n);
            let cmp = compare(&inst).unwrap();
            assert!(cmp.lower_bound >= 0.0);
            assert!(cmp.lower_bound <= cmp.ratio + 1e-8);
            assert!(cmp.ratio <= cmp.upper_bound + 1e-8);
            assert!(cmp.upper_bound <= 1.0 + 1e-8);
        }
    }

    #[test]
    fn diagonal_dominance_both_ways_implies_positive_definite() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..50 {
            let n = rng.gen_range(2..=8);
            let mut g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(0.0..1.0));
            for i in 0..n {
                g[(i, i)] = 0.0;
            }
            // b above both the row and column sums.
            let b: Vec<f64> = (0..n)
                .map(|i| {
                    let row: f64 = g.row(i).sum();
                    let col: f64 = g.column(i).sum();
                    row.max(col) * rng.gen_range(1.01..1.5) + 0.05
                })
                .collect();
            let inst = MarketInstance::new(g, vec![2.0; n], b, 1.0).unwrap();
            assert!(ratio_bounds(&inst).is_ok());
        }
    }

    #[test]
    fn indefinite_m_is_rejected() {
        // One agent overwhelmingly influenced: b far below incoming weight
        // after symmetrization.
        let mut g = DMatrix::zeros(2, 2);
        g[(0, 1)] = 1.0;
        g[(1, 0)] = 1.0;
        let inst = MarketInstance::new(g, vec![2.0, 2.0], vec![0.3, 0.3], 1.0).unwrap();
        assert!(matches!(
            ratio_bounds(&inst),
            Err(Error::NotPositiveDefinite)
        ));
    }

    /// Complex magnitude of all eigenvalues of M M^{-T} is 1 when M is
    /// positive definite; checked with a dense complex eigensolver.
    #[test]
    fn rotation_spectrum_has_unit_modulus() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for _ in 0..60 {
            let n = rng.gen_range(2..=8);
            let inst = random_instance(&mut rng, n);
            let m = inst.lambda_minus_g();
            let inv_t = linalg::inverse(&m.transpose(), "test").unwrap();
            let rot = &m * inv_t;
            let eigs = rot.complex_eigenvalues();
            for lambda in eigs.iter() {
                assert!((lambda.norm() - 1.0).abs() <= 1e-8);
            }
            // Spectral radius of the symmetrized rotation stays within 2.
            let sym_rot = &rot + linalg::inverse(&rot, "test").unwrap();
            let radius = sym_rot
                .complex_eigenvalues()
                .iter()
                .fold(0.0_f64, |acc, l| acc.max(l.norm()));
            assert!(radius <= 2.0 + 1e-8);
        }
    }
}
