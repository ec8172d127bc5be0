//! Influence-network families for the simulation studies, each as a pair of
//! opposite orientations `(G1, G2)` meant to be blended.
//!
//! Star: the center is influenced by every leaf (`G1`) or influences every
//! leaf (`G2 = G1^T`). Triangular: a random strictly-upper-triangular matrix
//! and its transpose. Preferential attachment: a seeded degree-proportional
//! growth process, oriented so either only newer agents influence older ones
//! (`G1`) or only older influence newer (`G2`), with each nonzero row
//! normalized to sum 1. Rows without any qualifying neighbor stay zero.

use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::MarketInstance;

/// Two orientations of a network plus the mixing weight for `G1`.
#[derive(Debug, Clone)]
pub struct BlendSpec {
    pub g1: DMatrix<f64>,
    pub g2: DMatrix<f64>,
    pub alpha: f64,
}

/// Star on `n` agents: `G1` has ones on row 0 off the diagonal (center
/// influenced by all leaves), `G2` is its transpose.
pub fn star_pair(n: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "star needs at least 2 agents, got {n}"
        )));
    }
    let mut g1 = DMatrix::zeros(n, n);
    for j in 1..n {
        g1[(0, j)] = 1.0;
    }
    let g2 = g1.transpose();
    Ok((g1, g2))
}

/// Strictly upper-triangular matrix with i.i.d. uniform `[0, 1]` entries and
/// its transpose; identical seeds give identical matrices.
pub fn triangular_pair(n: usize, seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g1 = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            g1[(i, j)] = rng.gen_range(0.0..1.0);
        }
    }
    let g2 = g1.transpose();
    (g1, g2)
}

/// Degree-proportional attachment graph on `n` agents, oriented both ways.
///
/// The process starts from two agents joined by one edge (the growth rule
/// needs a nonzero degree somewhere); every newcomer links to two distinct
/// predecessors drawn proportionally to their degrees, the second draw after
/// removing the first winner. `G1` keeps only newer-to-older influence,
/// `G2` only older-to-newer; the two are normalized separately.
pub fn preferential_attachment_pair(n: usize, seed: u64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "attachment process needs at least 3 agents, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut degree = vec![0usize; n];
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(2 * n);
    degree[0] = 1;
    degree[1] = 1;
    edges.push((1, 0));
    for newborn in 2..n {
        let mut weights: Vec<f64> = degree[..newborn].iter().map(|&d| d as f64).collect();
        let first = sample_weighted(&mut rng, &weights);
        weights[first] = 0.0;
        let second = sample_weighted(&mut rng, &weights);
        for target in [first, second] {
            edges.push((newborn, target));
            degree[target] += 1;
        }
        degree[newborn] += 2;
    }

    let mut g1 = DMatrix::zeros(n, n);
    let mut g2 = DMatrix::zeros(n, n);
    for &(newer, older) in &edges {
        g1[(older, newer)] = 1.0;
        g2[(newer, older)] = 1.0;
    }
    normalize_rows(&mut g1);
    normalize_rows(&mut g2);
    Ok((g1, g2))
}

fn sample_weighted(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    debug_assert!(total > 0.0);
    let mut draw = rng.gen_range(0.0..total);
    for (i, &w) in weights.iter().enumerate() {
        if draw < w {
            return i;
        }
        draw -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

fn normalize_rows(g: &mut DMatrix<f64>) {
    for i in 0..g.nrows() {
        let sum: f64 = g.row(i).sum();
        if sum > 0.0 {
            for j in 0..g.ncols() {
                g[(i, j)] /= sum;
            }
        }
    }
}

/// Convex combination `alpha G1 + (1 - alpha) G2`.
pub fn blend(spec: &BlendSpec) -> Result<DMatrix<f64>> {
    if !(0.0..=1.0).contains(&spec.alpha) {
        return Err(Error::InvalidParameter(format!(
            "blend weight {} outside [0, 1]",
            spec.alpha
        )));
    }
    if spec.g1.shape() != spec.g2.shape() {
        return Err(Error::InvalidData("blend shapes differ".into()));
    }
    Ok(&spec.g1 * spec.alpha + &spec.g2 * (1.0 - spec.alpha))
}

/// Instance with homogeneous agents and unit margin: `a = 1`, `c = 0`, the
/// given `b` for everyone. The profit-ratio studies use these settings.
pub fn unit_margin_instance(g: DMatrix<f64>, b: f64) -> Result<MarketInstance> {
    let n = g.nrows();
    if b <= 0.0 || !b.is_finite() {
        return Err(Error::InvalidParameter(format!("b must be positive, got {b}")));
    }
    MarketInstance::new(g, vec![1.0; n], vec![b; n], 0.0)
}
