//! Synthetic data generation and the parameter-recovery study.
//!
//! Spatial effects are drawn from a proper MCAR prior, storms are simulated
//! year by year through the three submodels, and each replicate is refitted
//! to check that posterior means and 95% HPD intervals recover the truth.

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::{DVector, Matrix3};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::count::{CountParams, EnsoCalendar, Phase};
use crate::damage::{DamageParams, StormLatents};
use crate::data::{Dataset, StormRecord};
use crate::diagnostics::hpd_interval;
use crate::error::{Error, Result};
use crate::graph::{ConnectedSubsetTable, SpatialGraph};
use crate::mcar::{check_rho, cholesky3, EffectRows};
use crate::mcmc::{chain_rng, run_chains, Chain, SamplerConfig, Submodel};
use crate::path::{sigma_from_values, PathParams};
use crate::predict::{simulate_year, PosteriorDraw};

/// Zero-mean draw with precision `(D - rho W) ⊗ Sigma^{-1}`.
pub fn sample_proper_mcar<R: Rng + ?Sized>(
    sigma: &Matrix3<f64>,
    rho: f64,
    graph: &SpatialGraph,
    rng: &mut R,
) -> Result<EffectRows> {
    check_rho(graph, rho)?;
    let sigma_factor = cholesky3(sigma)?.l();
    let spatial = graph
        .precision_matrix(rho)
        .cholesky()
        .ok_or(Error::RhoOutOfRange {
            rho,
            lower: f64::NAN,
            upper: f64::NAN,
        })?;
    let upper = spatial.l().transpose();
    let n = graph.len();
    // Each row solves L^T y = z, so it has covariance (D - rho W)^{-1}.
    let rows: Vec<DVector<f64>> = (0..3)
        .map(|_| {
            let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            upper
                .solve_upper_triangular(&z)
                .expect("Cholesky factor has a positive diagonal")
        })
        .collect();
    Ok(std::array::from_fn(|k| {
        (0..n)
            .map(|s| (0..3).map(|j| sigma_factor[(k, j)] * rows[j][s]).sum())
            .collect()
    }))
}

/// Generating parameters and study settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimStudyConfig {
    pub count_intercepts: [f64; 3],
    /// Sine amplitudes, `[phase][frequency]`.
    pub count_sine: [Vec<f64>; 3],
    pub count_cosine: [Vec<f64>; 3],
    pub path_intercepts: [f64; 3],
    pub clustering: f64,
    /// Upper triangle `11, 12, 13, 22, 23, 33`.
    pub sigma_gamma: [f64; 6],
    pub damage_intercepts: [f64; 3],
    pub sigma2: f64,
    pub severity_var: f64,
    pub sigma_xi: [f64; 6],
    pub rho: f64,
    pub replicates: usize,
    /// Seed for the generated data; chains use `sampler.seed`.
    pub seed: u64,
    pub sampler: SamplerConfig,
}

impl Default for SimStudyConfig {
    fn default() -> Self {
        Self {
            count_intercepts: [1.75, 2.0, 2.25],
            count_sine: [vec![0.0], vec![0.5], vec![-0.5]],
            count_cosine: [vec![0.0], vec![0.5], vec![-0.5]],
            path_intercepts: [-4.25, -4.0, -3.75],
            clustering: 1.0,
            sigma_gamma: [1.0, 0.8, 0.8, 1.0, 0.8, 1.0],
            damage_intercepts: [18.0, 20.0, 22.0],
            sigma2: 5.0,
            severity_var: 1.0,
            sigma_xi: [1.0, 0.2, 0.2, 1.0, 0.2, 1.0],
            rho: 0.99,
            replicates: 10,
            seed: 2024,
            sampler: SamplerConfig {
                n_iterations: 10_000,
                burn_in: 2_000,
                thin: 10,
                n_chains: 1,
                ..SamplerConfig::default()
            },
        }
    }
}

impl SimStudyConfig {
    pub fn n_frequencies(&self) -> usize {
        self.count_sine[0].len()
    }

    pub fn count_params(&self) -> Result<CountParams> {
        CountParams::new(self.count_intercepts, self.count_sine.clone(), self.count_cosine.clone())
    }

    pub fn validate(&self, graph: &SpatialGraph) -> Result<()> {
        self.count_params()?;
        check_rho(graph, self.rho)?;
        cholesky3(&sigma_from_values(&self.sigma_gamma))?;
        cholesky3(&sigma_from_values(&self.sigma_xi))?;
        if !(self.clustering > 0.0 && self.sigma2 > 0.0 && self.severity_var > 0.0) {
            return Err(Error::InvalidArgument(
                "clustering and variances must be positive".into(),
            ));
        }
        self.sampler.validate()
    }

    /// Draws spatial effects for one replicate and assembles the truth.
    pub fn draw_truth<R: Rng + ?Sized>(&self, graph: &SpatialGraph, rng: &mut R) -> Result<PosteriorDraw> {
        let n = graph.len();
        let mut path = PathParams::new(n, self.path_intercepts, self.clustering);
        path.sigma = sigma_from_values(&self.sigma_gamma);
        path.effects = sample_proper_mcar(&path.sigma, self.rho, graph, rng)?;
        let mut damage = DamageParams::new(n, self.damage_intercepts, self.sigma2, self.severity_var);
        damage.sigma = sigma_from_values(&self.sigma_xi);
        damage.effects = sample_proper_mcar(&damage.sigma, self.rho, graph, rng)?;
        Ok(PosteriorDraw {
            count: self.count_params()?,
            path,
            damage,
        })
    }
}

/// Generating parameters with the latent quantities of every storm, in
/// dataset order.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub params: PosteriorDraw,
    pub latents: Vec<StormLatents>,
}

impl GroundTruth {
    /// The truth under the zero-sum identification used when fitting: each
    /// effect row's mean moves into its intercept.
    pub fn identified(&self) -> PosteriorDraw {
        let mut p = self.params.clone();
        for k in 0..3 {
            let n = p.path.effects[k].len() as f64;
            let g = p.path.effects[k].iter().sum::<f64>() / n;
            p.path.intercepts[k] += g;
            p.path.effects[k].iter_mut().for_each(|v| *v -= g);
            let x = p.damage.effects[k].iter().sum::<f64>() / n;
            p.damage.intercepts[k] += x;
            p.damage.effects[k].iter_mut().for_each(|v| *v -= x);
        }
        p
    }

    /// Named values of every parameter block.
    pub fn named_values(draw: &PosteriorDraw, locations: &[String]) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = CountParams::parameter_names(draw.count.n_frequencies())
            .into_iter()
            .zip(draw.count.to_vec())
            .collect();
        out.extend(PathParams::parameter_names(locations).into_iter().zip(draw.path.to_vec()));
        out.extend(DamageParams::parameter_names(locations).into_iter().zip(draw.damage.to_vec()));
        out
    }

    pub fn to_json(&self, dataset: &Dataset) -> String {
        let params: serde_json::Map<String, serde_json::Value> =
            Self::named_values(&self.params, dataset.graph.locations())
                .into_iter()
                .map(|(k, v)| (k, serde_json::json!(v)))
                .collect();
        let storms: Vec<serde_json::Value> = dataset
            .storms
            .iter()
            .zip(&self.latents)
            .map(|(s, l)| {
                serde_json::json!({
                    "storm_id": s.id,
                    "severity": l.severity,
                    "location_damages": l.location_damages,
                })
            })
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({ "parameters": params, "storms": storms }))
            .expect("plain JSON values serialise")
    }
}

/// Simulates every calendar year under `truth`. Multi-location storms keep
/// only their total damage; the split is kept in the ground truth.
pub fn generate_synthetic_dataset<R: Rng + ?Sized>(
    truth: &PosteriorDraw,
    calendar: &EnsoCalendar,
    graph: &SpatialGraph,
    table: &ConnectedSubsetTable,
    rng: &mut R,
) -> Result<(Dataset, GroundTruth)> {
    let mut storms = Vec::new();
    let mut latents = Vec::new();
    for (year, phase) in calendar.entries() {
        let simulated = simulate_year(truth, phase, table, rng);
        for (i, storm) in simulated.storms.into_iter().enumerate() {
            storms.push(StormRecord {
                id: format!("{year}-{:02}", i + 1),
                time: year as f64 + storm.time,
                path: storm.path,
                total_damage: storm.damages.iter().sum(),
                location_damages: None,
            });
            latents.push(StormLatents {
                severity: storm.severity,
                location_damages: storm.damages,
            });
        }
    }
    let dataset = Dataset::new(storms, calendar.clone(), graph.clone())?;
    Ok((
        dataset,
        GroundTruth {
            params: truth.clone(),
            latents,
        },
    ))
}

/// Illustrative posterior-mean-like parameters for the 14 east-coast
/// locations, used to build the shipped synthetic dataset. Location effects
/// are looked up by identifier; unknown identifiers get zero.
pub fn lookalike_truth(graph: &SpatialGraph) -> Result<PosteriorDraw> {
    let count = CountParams::new(
        [0.05, 1.03, 0.82],
        [vec![-0.40, 0.40], vec![-0.03, 0.35], vec![-1.65, 0.27]],
        [vec![-2.60, -1.07], vec![-1.29, -0.59], vec![-1.12, 0.45]],
    )?;
    let n = graph.len();
    let mut path = PathParams::new(n, [-4.83, -5.68, -5.91], 1.49);
    path.sigma = sigma_from_values(&[2.85, 3.63, 4.00, 5.97, 6.13, 7.30]);
    let mut damage = DamageParams::new(n, [18.60, 19.86, 19.56], 4.75, 1.66);
    damage.sigma = sigma_from_values(&[1.78, -0.14, -0.47, 0.75, 0.13, 1.70]);

    let hits: HashMap<&str, f64> = [
        ("ME", -1.6),
        ("MA", -0.9),
        ("RI", -1.4),
        ("CT", -1.2),
        ("NY", -0.9),
        ("VA", -1.0),
        ("NC", 1.4),
        ("SC", 0.5),
        ("GA", -1.0),
        ("FL", 2.6),
        ("AL", 0.4),
        ("MS", 0.1),
        ("LA", 1.7),
        ("TX", 2.2),
    ]
    .into_iter()
    .collect();
    let north = ["MA", "RI", "CT", "NY"];
    let severity: HashMap<&str, f64> = [
        ("ME", -1.5),
        ("MA", 0.2),
        ("RI", 0.0),
        ("CT", 0.1),
        ("NY", 0.6),
        ("VA", -0.3),
        ("NC", 0.8),
        ("SC", -0.3),
        ("GA", -0.6),
        ("FL", 0.1),
        ("AL", 0.3),
        ("MS", -0.5),
        ("LA", 0.1),
        ("TX", 0.2),
    ]
    .into_iter()
    .collect();
    for phase in Phase::ALL {
        let k = phase.index();
        let shift = if phase == Phase::Neutral { -0.4 } else { 0.4 };
        for (s, id) in graph.locations().iter().enumerate() {
            let base = hits.get(id.as_str()).copied().unwrap_or(0.0);
            path.effects[k][s] = base + if north.contains(&id.as_str()) { shift } else { 0.0 };
            damage.effects[k][s] = severity.get(id.as_str()).copied().unwrap_or(0.0);
        }
        crate::mcmc::center_zero_sum(&mut path.effects[k]);
        crate::mcmc::center_zero_sum(&mut damage.effects[k]);
    }
    Ok(PosteriorDraw { count, path, damage })
}

/// Searches generator seeds from `first_seed` until the simulated phase
/// counts equal `target`; returns the dataset and the seed used.
pub fn generate_lookalike_dataset(
    calendar: &EnsoCalendar,
    graph: &SpatialGraph,
    table: &ConnectedSubsetTable,
    target: [usize; 3],
    first_seed: u64,
    max_tries: u64,
) -> Result<(Dataset, GroundTruth, u64)> {
    let truth = lookalike_truth(graph)?;
    for seed in first_seed..first_seed + max_tries {
        let mut rng = chain_rng(seed, 0);
        let (data, gt) = generate_synthetic_dataset(&truth, calendar, graph, table, &mut rng)?;
        if data.summary().phase_counts == target {
            return Ok((data, gt, seed));
        }
    }
    Err(Error::InvalidArgument(format!(
        "no seed in {max_tries} tries produced phase counts {target:?}"
    )))
}

/// Recovery of one parameter averaged over replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterRecovery {
    pub name: String,
    /// Generating value before zero-sum identification.
    pub nominal: f64,
    /// Identified truth averaged over replicates.
    pub mean_truth: f64,
    pub mean_posterior_mean: f64,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateFailure {
    pub replicate: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStudyReport {
    pub replicates: usize,
    pub completed: usize,
    pub failures: Vec<ReplicateFailure>,
    pub parameters: Vec<ParameterRecovery>,
    pub average_coverage: f64,
}

impl SimStudyReport {
    pub fn parameter(&self, name: &str) -> Option<&ParameterRecovery> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{} of {} replicates completed; average 95% HPD coverage {:.3}\n",
            self.completed, self.replicates, self.average_coverage
        );
        let _ = writeln!(
            out,
            "{:<18} {:>10} {:>12} {:>14} {:>9}",
            "parameter", "truth", "mean truth", "mean estimate", "coverage"
        );
        for p in &self.parameters {
            let _ = writeln!(
                out,
                "{:<18} {:>10.3} {:>12.3} {:>14.3} {:>9.2}",
                p.name, p.nominal, p.mean_truth, p.mean_posterior_mean, p.coverage
            );
        }
        for f in &self.failures {
            let _ = writeln!(out, "replicate {} failed: {}", f.replicate, f.message);
        }
        out
    }
}

/// Posterior means and HPD coverage of one replicate, by parameter name.
type ReplicateResult = Vec<(String, f64, f64, bool)>;

/// Names of the non-spatial parameters whose recovery is reported.
pub fn recovery_names(n_frequencies: usize) -> Vec<String> {
    let locations: Vec<String> = Vec::new();
    let mut names = CountParams::parameter_names(n_frequencies);
    names.extend(PathParams::parameter_names(&locations));
    names.extend(DamageParams::parameter_names(&locations));
    names
}

fn run_replicate(
    config: &SimStudyConfig,
    graph: &SpatialGraph,
    table: &ConnectedSubsetTable,
    calendar: &EnsoCalendar,
    replicate: usize,
) -> Result<ReplicateResult> {
    let mut rng = chain_rng(config.seed, replicate);
    let truth = config.draw_truth(graph, &mut rng)?;
    let (dataset, ground) = generate_synthetic_dataset(&truth, calendar, graph, table, &mut rng)?;
    let identified: HashMap<String, f64> = GroundTruth::named_values(&ground.identified(), graph.locations())
        .into_iter()
        .collect();
    let sampler = SamplerConfig {
        seed: config.sampler.seed.wrapping_add(replicate as u64),
        ..config.sampler.clone()
    };
    let mut out = Vec::new();
    for submodel in Submodel::ALL {
        let chains = run_chains(submodel, &dataset, table, config.n_frequencies(), &sampler)?;
        let pooled = Chain::pooled(&chains)?;
        for name in recovery_names(config.n_frequencies()) {
            let Some(i) = pooled.column_index(&name) else { continue };
            let column = pooled.column(i);
            let mean = column.iter().sum::<f64>() / column.len() as f64;
            let truth = identified[&name];
            let covered = hpd_interval(&column, 0.95)?.contains(truth);
            out.push((name, truth, mean, covered));
        }
    }
    Ok(out)
}

/// Generates and refits `config.replicates` datasets over the calendar's
/// years, in parallel with disjoint random streams.
pub fn run_simulation_study(
    config: &SimStudyConfig,
    graph: &SpatialGraph,
    calendar: &EnsoCalendar,
) -> Result<SimStudyReport> {
    config.validate(graph)?;
    let table = ConnectedSubsetTable::build(graph)?;
    let results: Vec<(usize, Result<ReplicateResult>)> = (0..config.replicates)
        .into_par_iter()
        .map(|r| (r, run_replicate(config, graph, &table, calendar, r)))
        .collect();

    let nominal_draw = PosteriorDraw {
        count: config.count_params()?,
        path: {
            let mut p = PathParams::new(0, config.path_intercepts, config.clustering);
            p.sigma = sigma_from_values(&config.sigma_gamma);
            p
        },
        damage: {
            let mut d = DamageParams::new(0, config.damage_intercepts, config.sigma2, config.severity_var);
            d.sigma = sigma_from_values(&config.sigma_xi);
            d
        },
    };
    let nominal: HashMap<String, f64> = GroundTruth::named_values(&nominal_draw, &[]).into_iter().collect();

    let mut failures = Vec::new();
    let mut completed = Vec::new();
    for (r, res) in results {
        match res {
            Ok(v) => completed.push(v),
            Err(e) => failures.push(ReplicateFailure {
                replicate: r,
                message: e.to_string(),
            }),
        }
    }
    let mut parameters = Vec::new();
    if let Some(first) = completed.first() {
        let m = completed.len() as f64;
        for (i, (name, _, _, _)) in first.iter().enumerate() {
            let (mut truth, mut mean, mut cover) = (0.0, 0.0, 0.0);
            for rep in &completed {
                truth += rep[i].1 / m;
                mean += rep[i].2 / m;
                cover += f64::from(u8::from(rep[i].3)) / m;
            }
            parameters.push(ParameterRecovery {
                name: name.clone(),
                nominal: nominal[name],
                mean_truth: truth,
                mean_posterior_mean: mean,
                coverage: cover,
            });
        }
    }
    let average_coverage = if parameters.is_empty() {
        f64::NAN
    } else {
        parameters.iter().map(|p| p.coverage).sum::<f64>() / parameters.len() as f64
    };
    Ok(SimStudyReport {
        replicates: config.replicates,
        completed: completed.len(),
        failures,
        parameters,
        average_coverage,
    })
}
