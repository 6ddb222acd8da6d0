//! Inverse-gamma and inverse-Wishart draws and the closed-form full
//! conditionals of the covariance, variance and severity parameters.

use nalgebra::{DMatrix, Matrix3};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};

use crate::count::Phase;
use crate::damage::{DamageParams, StormLatents};
use crate::data::StormRecord;
use crate::error::{Error, Result};
use crate::graph::SpatialGraph;
use crate::mcar::{row_cross_products, EffectRows};
use crate::mcmc::{CovarianceDf, SamplerConfig};

/// Draw with density proportional to `x^(-shape-1) exp(-rate/x)`.
pub fn sample_inverse_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    let gamma = Gamma::new(shape, 1.0 / rate)
        .map_err(|e| Error::InvalidArgument(format!("inverse gamma ({shape}, {rate}): {e}")))?;
    Ok(1.0 / gamma.sample(rng))
}

/// Wishart draw by the Bartlett decomposition.
pub fn sample_wishart<R: Rng + ?Sized>(df: f64, scale: &DMatrix<f64>, rng: &mut R) -> Result<DMatrix<f64>> {
    let p = scale.nrows();
    if !(df > p as f64 - 1.0) {
        return Err(Error::InvalidArgument(format!("Wishart needs df > {}, got {df}", p - 1)));
    }
    let l = scale.clone().cholesky().ok_or(Error::NotPositiveDefinite)?.l();
    let mut a = DMatrix::zeros(p, p);
    for i in 0..p {
        let chi = ChiSquared::new(df - i as f64)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let la = l * a;
    Ok(&la * la.transpose())
}

/// Inverse-Wishart draw with mean `scale / (df - p - 1)`.
pub fn sample_inverse_wishart<R: Rng + ?Sized>(df: f64, scale: &DMatrix<f64>, rng: &mut R) -> Result<DMatrix<f64>> {
    let inv_scale = scale
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite)?
        .inverse();
    let w = sample_wishart(df, &inv_scale, rng)?;
    let inv = w.cholesky().ok_or(Error::NotPositiveDefinite)?.inverse();
    Ok((&inv + inv.transpose()) * 0.5)
}

pub fn sample_inverse_wishart3<R: Rng + ?Sized>(df: f64, scale: &Matrix3<f64>, rng: &mut R) -> Result<Matrix3<f64>> {
    let d = DMatrix::from_column_slice(3, 3, scale.as_slice());
    let draw = sample_inverse_wishart(df, &d, rng)?;
    Ok(Matrix3::from_column_slice(draw.as_slice()))
}

fn covariance_conditional(rows: &EffectRows, graph: &SpatialGraph, df: f64, config: &SamplerConfig) -> (f64, Matrix3<f64>) {
    let scale = row_cross_products(rows, graph, 1.0) + Matrix3::identity() * config.iw_scale;
    (df, (scale + scale.transpose()) * 0.5)
}

/// Inverse-Wishart parameters for the path covariance.
pub fn full_conditional_sigma_gamma(rows: &EffectRows, graph: &SpatialGraph, config: &SamplerConfig) -> (f64, Matrix3<f64>) {
    let rank = graph.laplacian_rank() as f64;
    let df = match config.covariance_df {
        CovarianceDf::Printed => config.iw_df - 1.0 + rank,
        CovarianceDf::Conjugate => config.iw_df + rank,
    };
    covariance_conditional(rows, graph, df, config)
}

/// Inverse-Wishart parameters for the damage covariance.
pub fn full_conditional_sigma_xi(rows: &EffectRows, graph: &SpatialGraph, config: &SamplerConfig) -> (f64, Matrix3<f64>) {
    let rank = graph.laplacian_rank() as f64;
    covariance_conditional(rows, graph, config.iw_df + rank, config)
}

/// Inverse-gamma parameters for the log-damage variance.
pub fn full_conditional_sigma2(
    storms: &[StormRecord],
    phases: &[Phase],
    latents: &[StormLatents],
    params: &DamageParams,
    config: &SamplerConfig,
) -> (f64, f64) {
    let mut hits = 0usize;
    let mut sumsq = 0.0;
    for ((storm, &phase), latent) in storms.iter().zip(phases).zip(latents) {
        for (s, &y) in storm.path.members().into_iter().zip(&latent.location_damages) {
            let r = y.ln() - params.location_mu(phase, s) - latent.severity;
            sumsq += r * r;
            hits += 1;
        }
    }
    (hits as f64 / 2.0 + config.ig_shape, sumsq / 2.0 + config.ig_rate)
}

/// Inverse-gamma parameters for the severity variance.
pub fn full_conditional_sigma2_zeta(severities: &[f64], config: &SamplerConfig) -> (f64, f64) {
    let sumsq: f64 = severities.iter().map(|z| z * z).sum();
    (severities.len() as f64 / 2.0 + config.ig_shape, sumsq / 2.0 + config.ig_rate)
}

/// Normal mean and variance for one storm's severity given `M` hit
/// locations whose log-residuals (before severity) sum to `residual_sum`.
pub fn zeta_conditional(residual_sum: f64, hits: usize, sigma2: f64, severity_var: f64) -> (f64, f64) {
    let denom = severity_var * hits as f64 + sigma2;
    (severity_var / denom * residual_sum, sigma2 * severity_var / denom)
}

pub fn full_conditional_zeta(
    storm: &StormRecord,
    phase: Phase,
    location_damages: &[f64],
    params: &DamageParams,
) -> (f64, f64) {
    let residual_sum: f64 = storm
        .path
        .members()
        .into_iter()
        .zip(location_damages)
        .map(|(s, &y)| y.ln() - params.location_mu(phase, s))
        .sum();
    zeta_conditional(residual_sum, storm.hit_count(), params.sigma2, params.severity_var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcmc::chain_rng;

    #[test]
    fn inverse_gamma_mean() {
        let mut rng = chain_rng(1, 0);
        let n = 200_000;
        let draws: Vec<f64> = (0..n).map(|_| sample_inverse_gamma(3.0, 2.0, &mut rng).unwrap()).collect();
        assert!(draws.iter().all(|&x| x > 0.0));
        let mean = draws.iter().sum::<f64>() / n as f64;
        // Var of IG(3, 2) is 4 / (4 * 1) = 1.
        assert!((mean - 1.0).abs() < 3.0 / (n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn inverse_gamma_mode() {
        let mut rng = chain_rng(2, 0);
        let n = 400_000;
        let width = 0.05;
        let mut bins = vec![0usize; 80];
        for _ in 0..n {
            let x = sample_inverse_gamma(5.0, 6.0, &mut rng).unwrap();
            let b = (x / width) as usize;
            if b < bins.len() {
                bins[b] += 1;
            }
        }
        let peak = (0..bins.len()).max_by_key(|&b| bins[b]).unwrap();
        let mode = (peak as f64 + 0.5) * width;
        assert!((mode - 1.0).abs() <= 2.0 * width, "{mode}");
    }

    #[test]
    fn inverse_wishart_mean_and_spd() {
        let mut rng = chain_rng(3, 0);
        let n = 100_000;
        let mut sum = Matrix3::zeros();
        let mut sumsq = Matrix3::zeros();
        for _ in 0..n {
            let d = sample_inverse_wishart3(10.0, &Matrix3::identity(), &mut rng).unwrap();
            assert!(d.cholesky().is_some());
            assert!((d - d.transpose()).abs().max() < 1e-12);
            sum += d;
            sumsq += d.component_mul(&d);
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean.component_mul(&mean);
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 / 6.0 } else { 0.0 };
                let se = (var[(i, j)] / n as f64).sqrt();
                assert!((mean[(i, j)] - target).abs() < 3.0 * se, "({i},{j})");
            }
        }
    }

    #[test]
    fn conditional_arithmetic() {
        let cfg = SamplerConfig::default();
        let (shape, rate) = full_conditional_sigma2_zeta(&[2.0, 0.0, 0.0, -2.0], &cfg);
        assert!((shape - 2.01).abs() < 1e-15 && (rate - 4.01).abs() < 1e-15);
        let (shape, rate) = full_conditional_sigma2_zeta(&[0.0; 6], &cfg);
        assert!((shape - 3.01).abs() < 1e-15 && (rate - 0.01).abs() < 1e-15);
        let (mean, var) = zeta_conditional(7.0, 3, 4.0, 1.0);
        assert!((mean - 1.0).abs() < 1e-15 && (var - 4.0 / 7.0).abs() < 1e-15);
        let (mean, var) = zeta_conditional(7.0, 3, 4.0, 1e-12);
        assert!(mean.abs() < 1e-10 && var < 1e-10);
    }

    #[test]
    fn covariance_conditionals_at_zero() {
        let g = SpatialGraph::new(["a", "b", "c", "d"], [("a", "b"), ("b", "c"), ("c", "d")]).unwrap();
        let zero: EffectRows = [vec![0.0; 4], vec![0.0; 4], vec![0.0; 4]];
        let cfg = SamplerConfig::default();
        let (df, scale) = full_conditional_sigma_gamma(&zero, &g, &cfg);
        assert_eq!(df, 6.0);
        assert_eq!(scale, Matrix3::identity());
        assert_eq!(full_conditional_sigma_xi(&zero, &g, &cfg).0, 7.0);
        let conj = SamplerConfig {
            covariance_df: CovarianceDf::Conjugate,
            ..cfg
        };
        assert_eq!(full_conditional_sigma_gamma(&zero, &g, &conj).0, 7.0);
    }
}
