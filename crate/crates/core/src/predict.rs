//! Posterior-predictive simulation of annual regional losses.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::count::{CountParams, Phase};
use crate::damage::DamageParams;
use crate::error::{Error, Result};
use crate::graph::ConnectedSubsetTable;
use crate::mcmc::{chain_rng, Chain, Submodel};
use crate::path::{PathDistribution, PathParams, StormPath};

/// One parameter draw for each of the three submodels.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraw {
    pub count: CountParams,
    pub path: PathParams,
    pub damage: DamageParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedStorm {
    /// Fraction of the year at which the storm occurs.
    pub time: f64,
    pub path: StormPath,
    /// Damage at each hit location, in ascending location order.
    pub damages: Vec<f64>,
    pub severity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedYear {
    pub phase: Phase,
    pub storms: Vec<SimulatedStorm>,
    /// Annual loss per location.
    pub regional_totals: Vec<f64>,
}

/// Simulates one season: storm times, exact path draws, a severity per
/// storm and lognormal damages at each hit location.
pub fn simulate_year<R: Rng + ?Sized>(
    draw: &PosteriorDraw,
    phase: Phase,
    table: &ConnectedSubsetTable,
    rng: &mut R,
) -> SimulatedYear {
    let n = table.n_locations();
    let times = draw.count.simulate_season(phase, rng);
    let mut regional_totals = vec![0.0; n];
    if times.is_empty() {
        return SimulatedYear {
            phase,
            storms: Vec::new(),
            regional_totals,
        };
    }
    let paths = PathDistribution::new(&draw.path, phase, table);
    let severity_sd = draw.damage.severity_var.sqrt();
    let noise_sd = draw.damage.sigma2.sqrt();
    let storms = times
        .into_iter()
        .map(|time| {
            let path = paths.sample(rng);
            let severity = severity_sd * rng.sample::<f64, _>(StandardNormal);
            let damages = path
                .members()
                .into_iter()
                .map(|s| {
                    let mu = draw.damage.location_mu(phase, s) + severity;
                    let y = (mu + noise_sd * rng.sample::<f64, _>(StandardNormal)).exp();
                    regional_totals[s] += y;
                    y
                })
                .collect();
            SimulatedStorm {
                time,
                path,
                damages,
                severity,
            }
        })
        .collect();
    SimulatedYear {
        phase,
        storms,
        regional_totals,
    }
}

/// Typed posterior draws of the three submodels, each pooled over chains.
#[derive(Debug, Clone)]
pub struct Posterior {
    pub count: Vec<CountParams>,
    pub path: Vec<PathParams>,
    pub damage: Vec<DamageParams>,
}

impl Posterior {
    pub fn from_chains(count: &[Chain], path: &[Chain], damage: &[Chain]) -> Result<Self> {
        let expect = |chains: &[Chain], submodel: Submodel| -> Result<Chain> {
            let pooled = Chain::pooled(chains)?;
            if pooled.submodel != submodel {
                return Err(Error::InvalidArgument(format!(
                    "expected a {} chain, found {}",
                    submodel.name(),
                    pooled.submodel.name()
                )));
            }
            if pooled.is_empty() {
                return Err(Error::Insufficient(format!("empty {} chain", submodel.name())));
            }
            Ok(pooled)
        };
        let count = expect(count, Submodel::Count)?;
        let path = expect(path, Submodel::Path)?;
        let damage = expect(damage, Submodel::Damage)?;
        Ok(Self {
            count: count.draws.iter().map(|d| count.count_params(d)).collect::<Result<_>>()?,
            path: path.draws.iter().map(|d| path.path_params(d)).collect::<Result<_>>()?,
            damage: damage.draws.iter().map(|d| damage.damage_params(d)).collect::<Result<_>>()?,
        })
    }

    /// A posterior concentrated on one point.
    pub fn point(draw: PosteriorDraw) -> Self {
        Self {
            count: vec![draw.count],
            path: vec![draw.path],
            damage: vec![draw.damage],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.count.is_empty() || self.path.is_empty() || self.damage.is_empty()
    }

    /// Independent uniform resampling of one draw from each submodel.
    pub fn resample<R: Rng + ?Sized>(&self, rng: &mut R) -> PosteriorDraw {
        PosteriorDraw {
            count: self.count[rng.random_range(0..self.count.len())].clone(),
            path: self.path[rng.random_range(0..self.path.len())].clone(),
            damage: self.damage[rng.random_range(0..self.damage.len())].clone(),
        }
    }
}

/// `n_years` simulated seasons of a known phase, each under its own
/// resampled posterior draw and its own random stream.
pub fn posterior_predictive<R: Rng + ?Sized>(
    posterior: &Posterior,
    phase: Phase,
    n_years: usize,
    table: &ConnectedSubsetTable,
    rng: &mut R,
) -> Result<Vec<SimulatedYear>> {
    if posterior.is_empty() {
        return Err(Error::Insufficient("posterior has no draws".into()));
    }
    let seed: u64 = rng.random();
    Ok((0..n_years)
        .into_par_iter()
        .map(|year| {
            let mut year_rng = chain_rng(seed, year);
            let draw = posterior.resample(&mut year_rng);
            simulate_year(&draw, phase, table, &mut year_rng)
        })
        .collect())
}

/// Per-location hit rates and mean log-damage on hit. `None` marks a
/// location with no data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryMaps {
    pub locations: Vec<String>,
    pub n_storms: usize,
    pub hit_rates: Vec<Option<f64>>,
    pub mean_log_damage: Vec<Option<f64>>,
}

impl SummaryMaps {
    /// `location,hit_rate,mean_log_damage` rows with `NA` for missing values.
    pub fn to_text(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x:.6}"));
        let mut out = String::from("location,hit_rate,mean_log_damage\n");
        for (i, loc) in self.locations.iter().enumerate() {
            out.push_str(&format!(
                "{loc},{},{}\n",
                fmt(self.hit_rates[i]),
                fmt(self.mean_log_damage[i])
            ));
        }
        out
    }
}

pub fn summary_maps(years: &[SimulatedYear], locations: &[String]) -> SummaryMaps {
    let n = locations.len();
    let mut hits = vec![0usize; n];
    let mut log_sums = vec![0.0; n];
    let mut n_storms = 0;
    for storm in years.iter().flat_map(|y| &y.storms) {
        n_storms += 1;
        for (s, y) in storm.path.members().into_iter().zip(&storm.damages) {
            hits[s] += 1;
            log_sums[s] += y.ln();
        }
    }
    let hit_rates = hits
        .iter()
        .map(|&h| (n_storms > 0).then(|| h as f64 / n_storms as f64))
        .collect();
    let mean_log_damage = hits
        .iter()
        .zip(&log_sums)
        .map(|(&h, &sum)| (h > 0).then(|| sum / h as f64))
        .collect();
    SummaryMaps {
        locations: locations.to_vec(),
        n_storms,
        hit_rates,
        mean_log_damage,
    }
}
