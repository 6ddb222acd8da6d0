//! Multivariate Gaussian CAR prior over a 3×S matrix of phase-by-location
//! spatial effects. The joint precision is `(D - rho W) ⊗ Sigma^{-1}`; it is
//! never materialised, the quadratic form is assembled from per-row products
//! with the sparse `D - rho W`.

use nalgebra::{Cholesky, Matrix3};

use crate::error::{Error, Result};
use crate::graph::SpatialGraph;

/// Phase-by-location effects, one row per ENSO phase.
pub type EffectRows = [Vec<f64>; 3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum McarVariant {
    /// Singular `D - W`; identified by zero-sum rows.
    Intrinsic,
    /// `D - rho W` with `rho` strictly inside the propriety interval.
    Proper(f64),
}

impl McarVariant {
    pub fn rho(self) -> f64 {
        match self {
            McarVariant::Intrinsic => 1.0,
            McarVariant::Proper(rho) => rho,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct McarSpec<'g> {
    pub graph: &'g SpatialGraph,
    /// Conditional (unscaled) covariance across phases.
    pub sigma: Matrix3<f64>,
    pub variant: McarVariant,
}

impl<'g> McarSpec<'g> {
    pub fn intrinsic(graph: &'g SpatialGraph, sigma: Matrix3<f64>) -> Self {
        Self {
            graph,
            sigma,
            variant: McarVariant::Intrinsic,
        }
    }

    pub fn proper(graph: &'g SpatialGraph, sigma: Matrix3<f64>, rho: f64) -> Self {
        Self {
            graph,
            sigma,
            variant: McarVariant::Proper(rho),
        }
    }
}

/// Checks `rho` against `(1/lambda_min, 1/lambda_max)` of `D^{-1/2} W D^{-1/2}`.
pub fn check_rho(graph: &SpatialGraph, rho: f64) -> Result<()> {
    let (lower, upper) = graph.propriety_interval()?;
    if rho > lower && rho < upper {
        Ok(())
    } else {
        Err(Error::RhoOutOfRange { rho, lower, upper })
    }
}

/// Cholesky factor of a 3×3 covariance, rejecting asymmetric or indefinite input.
pub fn cholesky3(sigma: &Matrix3<f64>) -> Result<Cholesky<f64, nalgebra::U3>> {
    let scale = sigma.abs().max().max(1e-300);
    if (sigma - sigma.transpose()).abs().max() > 1e-10 * scale {
        return Err(Error::NotPositiveDefinite);
    }
    Cholesky::new(*sigma).ok_or(Error::NotPositiveDefinite)
}

/// `((D - rho W) x)_s` for one row of effects.
pub fn precision_times(graph: &SpatialGraph, rho: f64, row: &[f64], s: usize) -> f64 {
    let neighbour_sum: f64 = graph.neighbours(s).iter().map(|&r| row[r]).sum();
    graph.degree(s) as f64 * row[s] - rho * neighbour_sum
}

/// `G (D - rho W) G^T`, the 3×3 matrix of row cross-products.
pub fn row_cross_products(effects: &EffectRows, graph: &SpatialGraph, rho: f64) -> Matrix3<f64> {
    let n = graph.len();
    let applied: Vec<Vec<f64>> = effects
        .iter()
        .map(|row| (0..n).map(|s| precision_times(graph, rho, row, s)).collect())
        .collect();
    Matrix3::from_fn(|k, l| {
        effects[k]
            .iter()
            .zip(&applied[l])
            .map(|(a, b)| a * b)
            .sum()
    })
}

/// Log-density of the effects up to an additive constant, including the
/// covariance determinant terms so that it can be compared across `Sigma`.
pub fn mcar_log_density(effects: &EffectRows, spec: &McarSpec<'_>) -> Result<f64> {
    let graph = spec.graph;
    let n = graph.len();
    if effects.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidArgument(format!(
            "effect rows must have {n} entries"
        )));
    }
    let chol = cholesky3(&spec.sigma)?;
    let rho = spec.variant.rho();
    if let McarVariant::Proper(rho) = spec.variant {
        check_rho(graph, rho)?;
    }
    let precision = chol.inverse();
    let cross = row_cross_products(effects, graph, rho);
    let quadratic = precision.component_mul(&cross).sum();
    let log_det_sigma = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let determinant_term = match spec.variant {
        McarVariant::Intrinsic => -0.5 * graph.laplacian_rank() as f64 * log_det_sigma,
        McarVariant::Proper(rho) => {
            let q = graph.precision_matrix(rho);
            let chol_q = q.cholesky().ok_or(Error::NotPositiveDefinite)?;
            let log_det_q = 2.0 * chol_q.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
            1.5 * log_det_q - 0.5 * n as f64 * log_det_sigma
        }
    };
    Ok(-0.5 * quadratic + determinant_term)
}

/// Change in `-1/2` times the quadratic form when entry `(k, s)` moves by `delta`,
/// given the precision `Sigma^{-1}`.
pub fn quadratic_delta(
    effects: &EffectRows,
    precision: &Matrix3<f64>,
    graph: &SpatialGraph,
    k: usize,
    s: usize,
    delta: f64,
) -> f64 {
    let linear: f64 = (0..3)
        .map(|l| precision[(k, l)] * precision_times(graph, 1.0, &effects[l], s))
        .sum();
    let change = 2.0 * delta * linear + delta * delta * precision[(k, k)] * graph.degree(s) as f64;
    -0.5 * change
}
