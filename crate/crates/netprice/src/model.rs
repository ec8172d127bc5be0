//! Market model: agents with linear-quadratic utility on an influence
//! network, plus the validation and utility/profit primitives every solver
//! shares.
//!
//! An instance holds the influence matrix `G` (entry `(i, j)` is the strength
//! with which agent `j`'s consumption raises agent `i`'s marginal utility),
//! the utility coefficients `a` and `b`, and the scalar marginal cost `c`.
//! Agent `i` consuming `x_i` at unit price `p_i` receives
//!
//! ```text
//! u_i = a_i x_i - b_i x_i^2 + x_i * sum_j g_ij x_j - p_i x_i
//! ```
//!
//! Admissibility asks for two conditions beyond the structural ones:
//! every `b_i` must exceed the total influence `sum_j g_ij` arriving at `i`
//! (so best responses stay bounded), and every `a_i` must exceed `c` (so each
//! agent is worth serving in isolation).

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A market instance: influence matrix, utility coefficients, marginal cost.
///
/// Immutable after construction; cheap to clone and safe to share across
/// threads.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketInstance {
    g: DMatrix<f64>,
    a: DVector<f64>,
    b: DVector<f64>,
    c: f64,
}

impl MarketInstance {
    /// Build an instance from raw parts.
    ///
    /// Rejects shape mismatches and non-finite entries. Admissibility of the
    /// economic assumptions is reported separately by [`validate`].
    ///
    /// [`validate`]: MarketInstance::validate
    pub fn new(g: DMatrix<f64>, a: Vec<f64>, b: Vec<f64>, c: f64) -> Result<Self> {
        let n = a.len();
        if g.nrows() != n || g.ncols() != n {
            return Err(Error::InvalidData(format!(
                "influence matrix is {}x{}, expected {n}x{n}",
                g.nrows(),
                g.ncols()
            )));
        }
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: b.len(),
            });
        }
        let finite =
            g.iter().all(|v| v.is_finite()) && a.iter().all(|v| v.is_finite()) && b.iter().all(|v| v.is_finite()) && c.is_finite();
        if !finite {
            return Err(Error::InvalidData("non-finite entry".into()));
        }
        Ok(Self {
            g,
            a: DVector::from_vec(a),
            b: DVector::from_vec(b),
            c,
        })
    }

    /// Build an instance from a row-major influence buffer of length `n*n`.
    pub fn from_row_major(n: usize, g: &[f64], a: Vec<f64>, b: Vec<f64>, c: f64) -> Result<Self> {
        if g.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: g.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(n, n, g), a, b, c)
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    /// Influence matrix `G`.
    pub fn influence(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn a(&self) -> &DVector<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Diagonal of the curvature matrix, `2 b_i`.
    pub fn lambda(&self) -> DVector<f64> {
        &self.b * 2.0
    }

    /// The matrix `Lambda - G` driving interior equilibria.
    pub fn lambda_minus_g(&self) -> DMatrix<f64> {
        let mut m = -self.g.clone();
        for i in 0..self.n() {
            m[(i, i)] += 2.0 * self.b[i];
        }
        m
    }

    /// Symmetric part of the influence matrix, `(G + G^T) / 2`.
    pub fn average_interaction(&self) -> DMatrix<f64> {
        (&self.g + self.g.transpose()) * 0.5
    }

    /// Half-margin vector `(a - c 1) / 2`.
    pub fn half_margin(&self) -> DVector<f64> {
        self.a.map(|ai| (ai - self.c) * 0.5)
    }

    /// Check every instance invariant, returning all violations found.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let n = self.n();
        for i in 0..n {
            if self.g[(i, i)] != 0.0 {
                violations.push(Violation::SelfInfluence {
                    agent: i,
                    value: self.g[(i, i)],
                });
            }
            for j in 0..n {
                let v = self.g[(i, j)];
                if !(0.0..=1.0).contains(&v) {
                    violations.push(Violation::InfluenceOutOfRange {
                        agent: i,
                        peer: j,
                        value: v,
                    });
                }
            }
            let row_sum = self.g.row(i).sum();
            if self.b[i] <= row_sum {
                violations.push(Violation::CurvatureTooSmall {
                    agent: i,
                    b: self.b[i],
                    influence_sum: row_sum,
                });
            }
            if self.a[i] <= self.c {
                violations.push(Violation::ValueBelowCost {
                    agent: i,
                    a: self.a[i],
                    cost: self.c,
                });
            }
        }
        ValidationReport { violations }
    }

    /// Utility of agent `i` at consumption profile `x` and unit price `p_i`.
    pub fn utility(&self, i: usize, x: &ConsumptionVector, p_i: f64) -> Result<f64> {
        let n = self.n();
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, n });
        }
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: x.len(),
            });
        }
        let xi = x.values()[i];
        let peer: f64 = self.g.row(i).iter().zip(x.values().iter()).map(|(g, xj)| g * xj).sum();
        Ok(self.a[i] * xi - self.b[i] * xi * xi + xi * peer - p_i * xi)
    }

    /// Monopolist profit `sum_i (p_i - c) x_i`.
    pub fn profit(&self, p: &PriceVector, x: &ConsumptionVector) -> Result<f64> {
        let n = self.n();
        if p.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: p.len(),
            });
        }
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: x.len(),
            });
        }
        Ok(p.values()
            .iter()
            .zip(x.values().iter())
            .map(|(pi, xi)| (pi - self.c) * xi)
            .sum())
    }

    /// Parse an instance from the JSON schema
    /// `{ "n": int, "G": [[float]], "a": [float], "b": [float], "c": float }`.
    pub fn from_json_str(json: &str) -> Result<Self> {
        let file: InstanceJson =
            serde_json::from_str(json).map_err(|e| Error::InvalidData(e.to_string()))?;
        file.into_instance()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&InstanceJson::from_instance(self)).expect("serialization")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidData(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }
}

/// On-disk representation of an instance.
#[derive(Serialize, Deserialize)]
struct InstanceJson {
    n: usize,
    #[serde(rename = "G")]
    g: Vec<Vec<f64>>,
    a: Vec<f64>,
    b: Vec<f64>,
    c: f64,
}

impl InstanceJson {
    fn into_instance(self) -> Result<MarketInstance> {
        let n = self.n;
        if self.g.len() != n || self.g.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidData(format!(
                "field G must be an {n}x{n} matrix"
            )));
        }
        if self.a.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.a.len(),
            });
        }
        let g = DMatrix::from_fn(n, n, |i, j| self.g[i][j]);
        MarketInstance::new(g, self.a, self.b, self.c)
    }

    fn from_instance(inst: &MarketInstance) -> Self {
        let n = inst.n();
        Self {
            n,
            g: (0..n)
                .map(|i| (0..n).map(|j| inst.g[(i, j)]).collect())
                .collect(),
            a: inst.a.iter().copied().collect(),
            b: inst.b.iter().copied().collect(),
            c: inst.c,
        }
    }
}

/// A single violated instance invariant.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// `g_ii` must be zero.
    SelfInfluence { agent: usize, value: f64 },
    /// Influence weights live in `[0, 1]`.
    InfluenceOutOfRange { agent: usize, peer: usize, value: f64 },
    /// `b_i` must exceed the total influence arriving at agent `i`
    /// (concavity condition keeping best responses bounded).
    CurvatureTooSmall { agent: usize, b: f64, influence_sum: f64 },
    /// `a_i` must exceed the marginal cost `c`.
    ValueBelowCost { agent: usize, a: f64, cost: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::SelfInfluence { agent, value } => {
                write!(f, "agent {agent}: self-influence g[{agent},{agent}] = {value} must be 0")
            }
            Violation::InfluenceOutOfRange { agent, peer, value } => {
                write!(f, "agent {agent}: influence g[{agent},{peer}] = {value} outside [0, 1]")
            }
            Violation::CurvatureTooSmall { agent, b, influence_sum } => write!(
                f,
                "agent {agent}: b = {b} must exceed total incoming influence {influence_sum}"
            ),
            Violation::ValueBelowCost { agent, a, cost } => {
                write!(f, "agent {agent}: a = {a} must exceed marginal cost {cost}")
            }
        }
    }
}

/// Outcome of [`MarketInstance::validate`]: empty iff the instance satisfies
/// every invariant.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_admissible(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            write!(f, "instance admissible")
        } else {
            for v in &self.violations {
                writeln!(f, "{v}")?;
            }
            Ok(())
        }
    }
}

/// Per-agent unit prices.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceVector(DVector<f64>);

impl PriceVector {
    /// Wrap a price vector, rejecting non-finite entries.
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite price".into()));
        }
        Ok(Self(DVector::from_vec(p)))
    }

    /// The same price for every agent.
    pub fn uniform(n: usize, p: f64) -> Self {
        Self(DVector::from_element(n, p))
    }

    pub fn from_vector(p: DVector<f64>) -> Result<Self> {
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite price".into()));
        }
        Ok(Self(p))
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.len() == 0
    }
}

/// Per-agent consumption levels; entries are nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsumptionVector(DVector<f64>);

impl ConsumptionVector {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidData(
                "consumption entries must be finite and nonnegative".into(),
            ));
        }
        Ok(Self(DVector::from_vec(x)))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DVector::zeros(n))
    }

    pub(crate) fn from_vector_unchecked(x: DVector<f64>) -> Self {
        Self(x)
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_agent(g01: f64, g10: f64, a: [f64; 2], b: [f64; 2], c: f64) -> MarketInstance {
        let g = DMatrix::from_row_slice(2, 2, &[0.0, g01, g10, 0.0]);
        MarketInstance::new(g, a.to_vec(), b.to_vec(), c).unwrap()
    }

    #[test]
    fn validate_flags_concavity_violations() {
        let inst = two_agent(1.0, 1.0, [2.0, 2.0], [0.9, 0.9], 0.5);
        let report = inst.validate();
        let agents: Vec<usize> = report
            .violations
            .iter()
            .filter_map(|v| match v {
                Violation::CurvatureTooSmall { agent, .. } => Some(*agent),
                _ => None,
            })
            .collect();
        assert_eq!(agents, vec![0, 1]);
    }

    #[test]
    fn validate_accepts_single_agent() {
        let inst =
            MarketInstance::new(DMatrix::zeros(1, 1), vec![2.0], vec![1.0], 1.0).unwrap();
        assert!(inst.validate().is_admissible());
    }

    #[test]
    fn validate_flags_value_below_cost() {
        let inst = two_agent(0.1, 0.1, [1.0, 3.0], [1.0, 1.0], 2.0);
        let report = inst.validate();
        assert!(report.violations.iter().any(|v| matches!(
            v,
            Violation::ValueBelowCost { agent: 0, .. }
        )));
        assert!(!report.violations.iter().any(|v| matches!(
            v,
            Violation::ValueBelowCost { agent: 1, .. }
        )));
    }

    #[test]
    fn utility_at_zero_consumption_is_zero() {
        let inst = two_agent(0.5, 0.5, [4.0, 4.0], [2.0, 2.0], 1.0);
        let x = ConsumptionVector::zeros(2);
        assert_eq!(inst.utility(0, &x, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn utility_single_agent_direct_substitution() {
        let inst =
            MarketInstance::new(DMatrix::zeros(1, 1), vec![4.0], vec![1.0], 0.0).unwrap();
        let x = ConsumptionVector::new(vec![1.0]).unwrap();
        // 4*1 - 1*1 - 2*1 = 1
        assert_eq!(inst.utility(0, &x, 2.0).unwrap(), 1.0);
    }

    #[test]
    fn utility_with_peer_effect() {
        let inst = two_agent(0.5, 0.5, [4.0, 4.0], [2.0, 2.0], 0.0);
        let x = ConsumptionVector::new(vec![1.0, 2.0]).unwrap();
        // 4 - 2 + 1*0.5*2 - 1 = 2
        assert!((inst.utility(0, &x, 1.0).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn utility_rejects_bad_index() {
        let inst = two_agent(0.0, 0.0, [4.0, 4.0], [2.0, 2.0], 0.0);
        let x = ConsumptionVector::zeros(2);
        assert!(matches!(
            inst.utility(5, &x, 0.0),
            Err(Error::IndexOutOfRange { index: 5, n: 2 })
        ));
    }

    #[test]
    fn profit_zero_margin_and_arithmetic() {
        let inst = two_agent(0.2, 0.3, [4.0, 4.0], [2.0, 2.0], 1.0);
        let x = ConsumptionVector::new(vec![1.0, 2.0]).unwrap();
        let at_cost = PriceVector::uniform(2, 1.0);
        assert_eq!(inst.profit(&at_cost, &x).unwrap(), 0.0);
        let p = PriceVector::new(vec![3.0, 3.0]).unwrap();
        assert_eq!(inst.profit(&p, &x).unwrap(), 6.0);
        let zero = ConsumptionVector::zeros(2);
        assert_eq!(inst.profit(&p, &zero).unwrap(), 0.0);
    }

    #[test]
    fn profit_rejects_dimension_mismatch() {
        let inst = two_agent(0.2, 0.3, [4.0, 4.0], [2.0, 2.0], 1.0);
        let x = ConsumptionVector::zeros(3);
        let p = PriceVector::uniform(2, 1.0);
        assert!(matches!(
            inst.profit(&p, &x),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn json_round_trip_preserves_instance() {
        let inst = two_agent(0.25, 0.75, [4.0, 3.0], [2.0, 1.5], 0.5);
        let json = inst.to_json_string();
        let back = MarketInstance::from_json_str(&json).unwrap();
        assert_eq!(inst, back);
    }

    #[test]
    fn json_rejects_shape_mismatch_and_nonfinite() {
        let bad_shape = r#"{"n": 2, "G": [[0.0, 1.0]], "a": [1.0, 2.0], "b": [1.0, 1.0], "c": 0.0}"#;
        assert!(MarketInstance::from_json_str(bad_shape).is_err());
        // serde_json has no representation for NaN/Inf; they arrive as nulls
        // or parse errors either way.
        let bad_value = r#"{"n": 1, "G": [[0.0]], "a": [NaN], "b": [1.0], "c": 0.0}"#;
        assert!(MarketInstance::from_json_str(bad_value).is_err());
    }

    /// Independent utility evaluation with a different accumulation order.
    fn utility_oracle(inst: &MarketInstance, i: usize, x: &[f64], p_i: f64) -> f64 {
        let mut total = 0.0;
        total += x[i] * (inst.a()[i] - p_i);
        total -= inst.b()[i] * x[i].powi(2);
        let mut peer = 0.0;
        for j in (0..x.len()).rev() {
            peer += inst.influence()[(i, j)] * x[j];
        }
        total + x[i] * peer
    }

    #[test]
    fn utility_and_profit_match_independent_evaluator() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let n = rng.gen_range(1..=8);
            let mut g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(0.0..1.0));
            for i in 0..n {
                g[(i, i)] = 0.0;
            }
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..5.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..6.0) + n as f64).collect();
            let c = rng.gen_range(0.0..0.4);
            let inst = MarketInstance::new(g, a, b, c).unwrap();
            let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..3.0)).collect();
            let ps: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..5.0)).collect();
            let x = ConsumptionVector::new(xs.clone()).unwrap();
            let p = PriceVector::new(ps.clone()).unwrap();
            for i in 0..n {
                let got = inst.utility(i, &x, ps[i]).unwrap();
                let want = utility_oracle(&inst, i, &xs, ps[i]);
                assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0));
            }
            let got = inst.profit(&p, &x).unwrap();
            let want: f64 = (0..n).rev().map(|i| (ps[i] - inst.c()) * xs[i]).sum();
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
    }

    #[test]
    fn validate_accepts_iff_invariants_hold() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..300 {
            let n = rng.gen_range(1..=6);
            let mut g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-0.2..1.2));
            for i in 0..n {
                if rng.gen_bool(0.8) {
                    g[(i, i)] = 0.0;
                }
            }
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..(n as f64 + 1.0))).collect();
            let c = rng.gen_range(0.0..1.0);
            let a: Vec<f64> = (0..n).map(|_| c + rng.gen_range(-0.5..2.0)).collect();
            let inst = MarketInstance::new(g.clone(), a.clone(), b.clone(), c).unwrap();
            let mut expect_ok = true;
            for i in 0..n {
                if g[(i, i)] != 0.0 {
                    expect_ok = false;
                }
                for j in 0..n {
                    if !(0.0..=1.0).contains(&g[(i, j)]) {
                        expect_ok = false;
                    }
                }
                if b[i] <= g.row(i).sum() {
                    expect_ok = false;
                }
                if a[i] <= c {
                    expect_ok = false;
                }
            }
            assert_eq!(inst.validate().is_admissible(), expect_ok);
        }
    }
}
