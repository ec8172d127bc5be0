//! Individualized (perfectly discriminating) optimal prices.
//!
//! With unrestricted per-agent prices the optimum is available in closed
//! form: consumption solves `(Lambda - (G + G^T)/2) x = (a - c 1)/2` and the
//! prices follow from the interior first-order conditions,
//! `p = a - (Lambda - G) x`. Every agent buys a positive amount at the
//! optimum.
//!
//! The price of each agent decomposes into a network-independent nominal
//! part `(a_i + c)/2`, a markup collected from agents who draw utility from
//! central peers, and a discount granted to agents whose consumption lifts
//! central peers.

use nalgebra::DVector;

use crate::centrality;
use crate::error::Result;
use crate::linalg;
use crate::model::{ConsumptionVector, MarketInstance, PriceVector};

/// Closed-form optimum of the individualized pricing stage.
#[derive(Debug, Clone)]
pub struct DiscriminatoryPricingResult {
    pub prices: PriceVector,
    pub consumption: ConsumptionVector,
    pub profit: f64,
    /// Network-independent component `(a + c 1)/2`.
    pub nominal: DVector<f64>,
    /// Amount added on top of nominal for utility drawn from central peers.
    pub markup: DVector<f64>,
    /// Amount subtracted for influence exerted on central peers.
    pub discount: DVector<f64>,
}

/// Optimal individualized prices, consumptions, profit, and decomposition.
pub fn optimal_prices(instance: &MarketInstance) -> Result<DiscriminatoryPricingResult> {
    let v = instance.half_margin();
    let sym = {
        let mut m = -instance.average_interaction();
        for i in 0..instance.n() {
            m[(i, i)] += 2.0 * instance.b()[i];
        }
        m
    };
    let x = linalg::solve(&sym, &v, "discriminatory consumption")?;
    let p = instance.a() - instance.lambda_minus_g() * &x;
    let profit = (0..instance.n())
        .map(|i| (p[i] - instance.c()) * x[i])
        .sum();
    let (nominal, markup, discount) = decompose_prices(instance)?;
    Ok(DiscriminatoryPricingResult {
        prices: PriceVector::from_vector(p)?,
        consumption: ConsumptionVector::from_vector_unchecked(x),
        profit,
        nominal,
        markup,
        discount,
    })
}

/// Split the optimal prices into `(nominal, markup, discount)` with
/// `p = nominal + markup - discount`.
///
/// Both adjustment terms are read off the weighted centrality of the average
/// interaction network `(G + G^T)/2` with weights `1/(2 b_i)` and seed
/// `(a - c 1)/2`; the markup applies the forward influence `G`, the discount
/// the reverse influence `G^T`, each at half strength so their difference
/// reproduces the closed-form prices.
pub fn decompose_prices(
    instance: &MarketInstance,
) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    let n = instance.n();
    let v = instance.half_margin();
    let g_avg = instance.average_interaction();
    let inv_lambda = DVector::from_fn(n, |i, _| 1.0 / (2.0 * instance.b()[i]));
    let k = centrality::weighted_bonacich(&g_avg, &inv_lambda, &v)?;
    let scaled = DVector::from_fn(n, |i, _| 0.5 * inv_lambda[i] * k[i]);
    let markup = instance.influence() * &scaled;
    let discount = instance.influence().transpose() * &scaled;
    let nominal = DVector::from_fn(n, |i, _| (instance.a()[i] + instance.c()) * 0.5);
    Ok((nominal, markup, discount))
}
