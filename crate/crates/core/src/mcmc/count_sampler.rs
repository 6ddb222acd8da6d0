//! Random-walk Metropolis for the seasonal Poisson-process intensity.
//!
//! The likelihood separates by phase. For phase `k` it is
//! `n_k beta_k + sum_p (u_kp A_kp + v_kp B_kp) - Y_k Lambda_k`, where `A`, `B`
//! are sums of the seasonal sines and cosines over that phase's storms, `Y_k`
//! is the number of calendar years in phase `k` and `Lambda_k` the season
//! integral, evaluated on a fixed Simpson grid.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::count::{season_angle, split_time, CountParams, SEASON_END, SEASON_START};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::mcmc::{accept, Acceptance, Chain, SamplerConfig, StepTuner, Submodel};
use crate::quadrature::simpson_rule;

/// Per-phase sufficient statistics and the quadrature grid.
#[derive(Debug, Clone)]
pub struct CountStats {
    pub n_frequencies: usize,
    pub storms: [f64; 3],
    pub years: [f64; 3],
    pub sin_sums: [Vec<f64>; 3],
    pub cos_sums: [Vec<f64>; 3],
    weights: Vec<f64>,
    /// `features[p][j]` = (sin, cos) of frequency `p + 1` at node `j`.
    features: Vec<Vec<(f64, f64)>>,
}

impl CountStats {
    pub fn new(dataset: &Dataset, n_frequencies: usize, intervals: usize) -> Result<Self> {
        if n_frequencies == 0 {
            return Err(Error::InvalidArgument("at least one frequency is required".into()));
        }
        let mut storms = [0.0; 3];
        let mut sin_sums: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; n_frequencies]);
        let mut cos_sums = sin_sums.clone();
        for storm in &dataset.storms {
            let k = dataset.phase_of(storm).index();
            let tau = split_time(storm.time).1;
            storms[k] += 1.0;
            for p in 0..n_frequencies {
                let a = season_angle(tau, p + 1);
                sin_sums[k][p] += a.sin();
                cos_sums[k][p] += a.cos();
            }
        }
        let counts = dataset.calendar.phase_year_counts();
        let years = counts.map(|c| c as f64);
        let (nodes, weights) = simpson_rule(SEASON_START, SEASON_END, intervals);
        let features = (1..=n_frequencies)
            .map(|p| {
                nodes
                    .iter()
                    .map(|&t| {
                        let a = season_angle(t, p);
                        (a.sin(), a.cos())
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            n_frequencies,
            storms,
            years,
            sin_sums,
            cos_sums,
            weights,
            features,
        })
    }

    /// `Lambda_k / exp(beta_k)` for the given seasonal amplitudes.
    pub fn shape_integral(&self, sine: &[f64], cosine: &[f64]) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(j, w)| {
                let g: f64 = (0..self.n_frequencies)
                    .map(|p| {
                        let (s, c) = self.features[p][j];
                        sine[p] * s + cosine[p] * c
                    })
                    .sum();
                w * g.exp()
            })
            .sum()
    }

    /// Phase-`k` log-likelihood given the shape integral.
    pub fn phase_log_likelihood(&self, k: usize, beta: f64, sine: &[f64], cosine: &[f64], shape: f64) -> f64 {
        let mut ll = self.storms[k] * beta;
        for p in 0..self.n_frequencies {
            ll += sine[p] * self.sin_sums[k][p] + cosine[p] * self.cos_sums[k][p];
        }
        ll - self.years[k] * beta.exp() * shape
    }

    pub fn log_likelihood(&self, params: &CountParams) -> f64 {
        (0..3)
            .map(|k| {
                let shape = self.shape_integral(&params.sine[k], &params.cosine[k]);
                self.phase_log_likelihood(k, params.intercepts[k], &params.sine[k], &params.cosine[k], shape)
            })
            .sum()
    }
}

/// Method-of-moments start: log storms per season-year, flat seasonality.
pub fn initial_params(stats: &CountStats) -> CountParams {
    let intercepts = std::array::from_fn(|k| {
        let years = stats.years[k].max(1.0);
        (stats.storms[k].max(0.5) / (years * (SEASON_END - SEASON_START))).ln()
    });
    CountParams::flat(intercepts, stats.n_frequencies)
}

pub fn run<R: Rng + ?Sized>(dataset: &Dataset, n_frequencies: usize, config: &SamplerConfig, rng: &mut R) -> Result<Chain> {
    let stats = CountStats::new(dataset, n_frequencies, config.simpson_intervals)?;
    let mut params = initial_params(&stats);
    for beta in &mut params.intercepts {
        *beta += config.init_jitter * rng.sample::<f64, _>(StandardNormal);
    }
    let names = CountParams::parameter_names(n_frequencies);
    let n_params = names.len();
    let mut tuners = vec![StepTuner::new(config.initial_step, 10.0); n_params];

    let mut shape: [f64; 3] = std::array::from_fn(|k| stats.shape_integral(&params.sine[k], &params.cosine[k]));
    let mut phase_ll: [f64; 3] = std::array::from_fn(|k| {
        stats.phase_log_likelihood(k, params.intercepts[k], &params.sine[k], &params.cosine[k], shape[k])
    });
    if !phase_ll.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("count log-likelihood at initialisation".into()));
    }

    let mut draws = Vec::with_capacity(config.n_draws());
    for iteration in 0..config.n_iterations {
        let adapting = iteration < config.burn_in;
        for (index, tuner) in tuners.iter_mut().enumerate() {
            let (k, slot) = locate(index);
            let delta = tuner.step * rng.sample::<f64, _>(StandardNormal);
            let mut beta = params.intercepts[k];
            let mut sine = params.sine[k].clone();
            let mut cosine = params.cosine[k].clone();
            let new_shape = match slot {
                Slot::Intercept => {
                    beta += delta;
                    shape[k]
                }
                Slot::Sine(p) => {
                    sine[p] += delta;
                    stats.shape_integral(&sine, &cosine)
                }
                Slot::Cosine(p) => {
                    cosine[p] += delta;
                    stats.shape_integral(&sine, &cosine)
                }
            };
            let proposed = stats.phase_log_likelihood(k, beta, &sine, &cosine, new_shape);
            let ok = accept(proposed - phase_ll[k], rng);
            if ok {
                params.intercepts[k] = beta;
                params.sine[k] = sine;
                params.cosine[k] = cosine;
                shape[k] = new_shape;
                phase_ll[k] = proposed;
            }
            tuner.record(ok, adapting, config);
        }
        if config.keeps(iteration) {
            draws.push(params.to_vec());
        }
    }

    let acceptance = names
        .iter()
        .zip(&tuners)
        .map(|(n, t)| Acceptance::from_tuner(n.clone(), t))
        .collect();
    Ok(Chain {
        submodel: Submodel::Count,
        chain_index: 0,
        seed: config.seed,
        names,
        draws,
        acceptance,
        latents: Vec::new(),
        n_locations: dataset.graph.len(),
    })
}

enum Slot {
    Intercept,
    Sine(usize),
    Cosine(usize),
}

/// Maps a flat parameter index to its phase and slot.
fn locate(index: usize) -> (usize, Slot) {
    if index < 3 {
        return (index, Slot::Intercept);
    }
    let rest = index - 3;
    let p = rest / 6;
    let within = rest % 6;
    if within < 3 {
        (within, Slot::Sine(p))
    } else {
        (within - 3, Slot::Cosine(p))
    }
}

/// Count log-likelihood over every calendar year, as used for deviance.
pub fn dataset_log_likelihood(dataset: &Dataset, params: &CountParams, intervals: usize) -> Result<f64> {
    let stats = CountStats::new(dataset, params.n_frequencies(), intervals)?;
    Ok(stats.log_likelihood(params))
}
