//! Optimal single uniform price.
//!
//! As a uniform price rises, agents stop buying in order of their centrality
//! gain on the surviving subnetwork: the next dropout price is the minimum
//! gain `H_i` over the survivors, and the agents attaining it leave together.
//! Between consecutive dropout prices the active set is fixed, consumption is
//! affine in the price, and profit is a concave quadratic, so each segment is
//! maximized in closed form and the best segment wins.
//!
//! Prices below marginal cost are never optimal (aggregate consumption only
//! shrinks as the price rises), so the first segment is searched on
//! `[c, p_1]` rather than `[0, p_1]`; a test pins the sign of profit below
//! cost.

use nalgebra::{DMatrix, DVector};

use crate::centrality;
use crate::error::Result;
use crate::linalg;
use crate::model::MarketInstance;

/// Centrality gains within this tolerance of the minimum drop out together.
pub const GAIN_TIE_TOL: f64 = 1e-9;

/// Outcome of the uniform-price search.
#[derive(Debug, Clone)]
pub struct UniformPriceResult {
    pub p_opt: f64,
    pub profit: f64,
    /// Strictly increasing dropout prices `p_1 < p_2 < ...`.
    pub breakpoints: Vec<f64>,
    /// Agents leaving at each breakpoint; disjoint, in dropout order.
    pub dropout_sets: Vec<Vec<usize>>,
    /// Active agents on the segment where the optimum is attained.
    pub active_profile: Vec<usize>,
}

fn submatrix(g: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |r, c| g[(idx[r], idx[c])])
}

fn subvector(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_fn(idx.len(), |r, _| v[idx[r]])
}

/// Dropout prices and dropout sets over the whole price range.
///
/// Iteratively computes the minimum centrality gain of the surviving agents
/// (weights `1/(2 b_i)`, seed `a`) on the induced subnetwork; the argmin set
/// drops and the process repeats until nobody is left.
pub fn breakpoints(instance: &MarketInstance) -> Result<(Vec<f64>, Vec<Vec<usize>>)> {
    let mut alive: Vec<usize> = (0..instance.n()).collect();
    let mut prices = Vec::new();
    let mut dropouts = Vec::new();
    while !alive.is_empty() {
        let g_s = submatrix(instance.influence(), &alive);
        let a_s = subvector(instance.a(), &alive);
        let d_s = DVector::from_fn(alive.len(), |r, _| 1.0 / (2.0 * instance.b()[alive[r]]));
        let gain = centrality::centrality_gain(&g_s, &d_s, &a_s)?;
        let p_k = gain.min();
        let mut dropped = Vec::new();
        let mut kept = Vec::new();
        for (r, &i) in alive.iter().enumerate() {
            if gain[r] <= p_k + GAIN_TIE_TOL {
                dropped.push(i);
            } else {
                kept.push(i);
            }
        }
        prices.push(p_k);
        dropouts.push(dropped);
        alive = kept;
    }
    Ok((prices, dropouts))
}

/// Optimal single uniform price by segment-wise closed-form maximization.
pub fn optimal_uniform_price(instance: &MarketInstance) -> Result<UniformPriceResult> {
    let c = instance.c();
    let (prices, dropouts) = breakpoints(instance)?;
    let mut alive: Vec<usize> = (0..instance.n()).collect();
    let mut best_profit = f64::NEG_INFINITY;
    let mut best_price = c;
    let mut best_active = Vec::new();
    let mut lower = c;
    for (k, &p_k) in prices.iter().enumerate() {
        let m_s = {
            let mut m = -submatrix(instance.influence(), &alive);
            for (r, &i) in alive.iter().enumerate() {
                m[(r, r)] += 2.0 * instance.b()[i];
            }
            m
        };
        let ones = DVector::from_element(alive.len(), 1.0);
        let a_s = subvector(instance.a(), &alive);
        let sum_inv_a = linalg::solve(&m_s, &a_s, "uniform segment")?.sum();
        let sum_inv_1 = linalg::solve(&m_s, &ones, "uniform segment")?.sum();
        // Interior stationary point of (p - c) * 1^T x_S(p) on this segment.
        let p_hat = (sum_inv_a + c * sum_inv_1) / (2.0 * sum_inv_1);
        let p = p_hat.clamp(lower.min(p_k), p_k);
        let revenue = (p - c) * (sum_inv_a - p * sum_inv_1);
        if revenue > best_profit {
            best_profit = revenue;
            best_price = p;
            best_active = alive.clone();
            // Exactly at the right endpoint the dropping agents consume 0,
            // so the strictly positive set is the next segment's.
            if p == p_k {
                best_active.retain(|i| !dropouts[k].contains(i));
            }
        }
        alive.retain(|i| !dropouts[k].contains(i));
        lower = p_k;
    }
    Ok(UniformPriceResult {
        p_opt: best_price,
        profit: best_profit,
        breakpoints: prices,
        dropout_sets: dropouts,
        active_profile: best_active,
    })
}
