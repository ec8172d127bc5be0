//! Walk-counting centrality measures on the influence network.
//!
//! The plain measure of parameter `alpha` solves `(I - alpha G) k = 1`: the
//! discounted count of all walks arriving at each node. The weighted variant
//! solves `(I - G D) k = v` for a diagonal weight matrix `D` and seed vector
//! `v`, and the gain of an agent is the ratio of its weighted centrality
//! under seed `v` to the one under seed `1`. The gain ordering is what drives
//! uniform-price dropouts.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, SPECTRAL_RADIUS_ITERS, SPECTRAL_RADIUS_TOL};

/// Entries this far below zero flag a non-nonnegative inverse.
const NEGATIVITY_TOL: f64 = 1e-12;

/// Nonnegative centrality scores, one per agent.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralityVector(DVector<f64>);

impl CentralityVector {
    pub fn values(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.len() == 0
    }
}

impl std::ops::Index<usize> for CentralityVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

fn check_square(g: &DMatrix<f64>) -> Result<usize> {
    if g.nrows() != g.ncols() {
        return Err(Error::InvalidData(format!(
            "adjacency matrix is {}x{}",
            g.nrows(),
            g.ncols()
        )));
    }
    Ok(g.nrows())
}

/// Centrality of parameter `alpha`: the solution of `(I - alpha G) k = 1`.
///
/// Requires the spectral radius of `alpha G` to be strictly below 1; the
/// radius is estimated by power iteration and a failed precondition degrades
/// to `IllDefined` rather than silently returning garbage.
pub fn bonacich(g: &DMatrix<f64>, alpha: f64) -> Result<CentralityVector> {
    let n = check_square(g)?;
    let radius = alpha.abs() * linalg::spectral_radius(g, SPECTRAL_RADIUS_ITERS, SPECTRAL_RADIUS_TOL);
    if radius >= 1.0 {
        return Err(Error::IllDefined(format!(
            "spectral radius of alpha*G is {radius:.6}, must be below 1"
        )));
    }
    let system = DMatrix::identity(n, n) - g * alpha;
    solve_and_screen(&system, &DVector::from_element(n, 1.0), true)
}

/// Weighted centrality: the solution of `(I - G D) k = v`.
///
/// `d` holds the diagonal of `D`. Well defined whenever `(I - G D)` has a
/// nonnegative inverse; with nonnegative `G` and `D` that is equivalent to
/// the spectral radius of `G D` being below 1.
pub fn weighted_bonacich(
    g: &DMatrix<f64>,
    d: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<CentralityVector> {
    let n = check_square(g)?;
    if d.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: d.len(),
        });
    }
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: v.len(),
        });
    }
    // (G D)_{ij} = g_ij d_j: scale columns.
    let mut gd = g.clone();
    for j in 0..n {
        gd.column_mut(j).scale_mut(d[j]);
    }
    let radius = linalg::spectral_radius(&gd, SPECTRAL_RADIUS_ITERS, SPECTRAL_RADIUS_TOL);
    if radius >= 1.0 {
        return Err(Error::IllDefined(format!(
            "spectral radius of G*D is {radius:.6}, must be below 1"
        )));
    }
    let system = DMatrix::identity(n, n) - gd;
    // A negative score under a nonnegative seed witnesses a non-nonnegative
    // inverse; mixed-sign seeds legitimately produce mixed-sign scores.
    let screen = v.iter().all(|&vi| vi >= 0.0);
    solve_and_screen(&system, v, screen)
}

fn solve_and_screen(
    system: &DMatrix<f64>,
    rhs: &DVector<f64>,
    screen_negative: bool,
) -> Result<CentralityVector> {
    let k = linalg::solve(system, rhs, "centrality")
        .map_err(|_| Error::IllDefined("singular centrality system".into()))?;
    if screen_negative {
        if let Some((i, &v)) = k.iter().enumerate().find(|(_, &v)| v < -NEGATIVITY_TOL) {
            return Err(Error::IllDefined(format!(
                "negative centrality {v:.3e} at agent {i}"
            )));
        }
    }
    Ok(CentralityVector(k))
}

/// Centrality gain of each agent: weighted centrality under seed `v` divided
/// by weighted centrality under seed `1`.
pub fn centrality_gain(
    g: &DMatrix<f64>,
    d: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = check_square(g)?;
    let numerator = weighted_bonacich(g, d, v)?;
    let denominator = weighted_bonacich(g, d, &DVector::from_element(n, 1.0))?;
    let mut gain = DVector::zeros(n);
    for i in 0..n {
        if denominator[i] <= NEGATIVITY_TOL {
            return Err(Error::IllDefined(format!(
                "zero unit-seed centrality at agent {i}"
            )));
        }
        gain[i] = numerator[i] / denominator[i];
    }
    Ok(gain)
}
