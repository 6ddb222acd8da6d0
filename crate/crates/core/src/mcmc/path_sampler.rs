//! Metropolis-within-Gibbs for the autologistic path model.
//!
//! Each phase keeps the subset weights `exp(log-weight - shift)` and their
//! sum. Moving `gamma_{k,s}` by `d` multiplies only the weights of subsets
//! containing `s` by `exp(d)`, so the normaliser updates from a partial sum.
//! Intercept and clustering moves regroup the weights by subset size and by
//! internal edge count.

use nalgebra::Matrix3;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::count::Phase;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::{ConnectedSubsetTable, SpatialGraph};
use crate::mcar::{cholesky3, quadratic_delta};
use crate::mcmc::conjugate::{full_conditional_sigma_gamma, sample_inverse_wishart3};
use crate::mcmc::{accept, center_zero_sum, Acceptance, Chain, SamplerConfig, StepTuner, Submodel};
use crate::path::{PathParams, StormPath};

/// Per-phase sufficient statistics of the observed paths.
#[derive(Debug, Clone, PartialEq)]
pub struct PathStats {
    pub storms: [f64; 3],
    pub total_size: [f64; 3],
    pub total_edges: [f64; 3],
    pub hits: [Vec<f64>; 3],
}

impl PathStats {
    pub fn new(paths: &[(Phase, StormPath)], table: &ConnectedSubsetTable) -> Result<Self> {
        let n = table.n_locations();
        let mut stats = Self {
            storms: [0.0; 3],
            total_size: [0.0; 3],
            total_edges: [0.0; 3],
            hits: std::array::from_fn(|_| vec![0.0; n]),
        };
        for (phase, path) in paths {
            let j = table.position(path.mask()).ok_or(Error::InvalidPath)?;
            let k = phase.index();
            stats.storms[k] += 1.0;
            stats.total_size[k] += table.size(j) as f64;
            stats.total_edges[k] += table.internal_edges(j) as f64;
            for s in path.members() {
                stats.hits[k][s] += 1.0;
            }
        }
        Ok(stats)
    }

    pub fn from_dataset(dataset: &Dataset, table: &ConnectedSubsetTable) -> Result<Self> {
        let paths: Vec<(Phase, StormPath)> = dataset
            .storms
            .iter()
            .map(|s| (dataset.phase_of(s), s.path))
            .collect();
        Self::new(&paths, table)
    }

    /// Phase-`k` log-likelihood given that phase's log normaliser.
    fn phase_log_likelihood(&self, k: usize, params: &PathParams, log_z: f64) -> f64 {
        if self.storms[k] == 0.0 {
            return 0.0;
        }
        let linear: f64 = self.hits[k].iter().zip(&params.effects[k]).map(|(h, g)| h * g).sum();
        params.intercepts[k] * self.total_size[k] + linear + params.clustering * self.total_edges[k]
            - self.storms[k] * log_z
    }

    pub fn log_likelihood(&self, params: &PathParams, table: &ConnectedSubsetTable) -> f64 {
        Phase::ALL
            .iter()
            .map(|&phase| {
                let cache = PhaseCache::build(params, phase, table);
                self.phase_log_likelihood(phase.index(), params, cache.log_z())
            })
            .sum()
    }
}

/// Path log-likelihood of a dataset.
pub fn dataset_log_likelihood(dataset: &Dataset, table: &ConnectedSubsetTable, params: &PathParams) -> Result<f64> {
    Ok(PathStats::from_dataset(dataset, table)?.log_likelihood(params, table))
}

#[derive(Debug, Clone)]
struct PhaseCache {
    shift: f64,
    weights: Vec<f64>,
    total: f64,
}

impl PhaseCache {
    fn build(params: &PathParams, phase: Phase, table: &ConnectedSubsetTable) -> Self {
        let log_w: Vec<f64> = (0..table.len())
            .map(|j| params.subset_log_weight(table.mask(j), table.internal_edges(j), phase))
            .collect();
        let shift = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = log_w.iter().map(|lw| (lw - shift).exp()).collect();
        let total = weights.iter().sum();
        Self { shift, weights, total }
    }

    fn log_z(&self) -> f64 {
        self.shift + self.total.ln()
    }

    fn containing_sum(&self, table: &ConnectedSubsetTable, s: usize) -> f64 {
        table.containing(s).iter().map(|&j| self.weights[j as usize]).sum()
    }

    fn scale_containing(&mut self, table: &ConnectedSubsetTable, s: usize, factor: f64, new_total: f64) {
        for &j in table.containing(s) {
            self.weights[j as usize] *= factor;
        }
        self.total = new_total;
    }

    /// Weight sums grouped by a per-subset integer key.
    fn grouped(&self, keys: &[u32]) -> Vec<f64> {
        let max = keys.iter().copied().max().unwrap_or(0) as usize;
        let mut out = vec![0.0; max + 1];
        for (w, &key) in self.weights.iter().zip(keys) {
            out[key as usize] += w;
        }
        out
    }
}

fn regrouped_total(groups: &[f64], delta: f64) -> f64 {
    groups
        .iter()
        .enumerate()
        .map(|(m, b)| b * (delta * m as f64).exp())
        .sum()
}

/// Method-of-moments start: logit of the mean per-location hit rate, `phi = 1`.
pub fn initial_params(stats: &PathStats, n_locations: usize) -> PathParams {
    let all_storms: f64 = stats.storms.iter().sum();
    let all_size: f64 = stats.total_size.iter().sum();
    let intercepts = std::array::from_fn(|k| {
        let (size, storms) = if stats.storms[k] > 0.0 {
            (stats.total_size[k], stats.storms[k])
        } else {
            (all_size.max(1.0), all_storms.max(1.0))
        };
        let rate = (size / (storms * n_locations as f64)).clamp(0.01, 0.99);
        (rate / (1.0 - rate)).ln()
    });
    PathParams::new(n_locations, intercepts, 1.0)
}

struct State<'a> {
    params: PathParams,
    precision: Matrix3<f64>,
    caches: [PhaseCache; 3],
    stats: &'a PathStats,
    table: &'a ConnectedSubsetTable,
    graph: &'a SpatialGraph,
}

impl State<'_> {
    fn rebuild(&mut self) {
        for phase in Phase::ALL {
            self.caches[phase.index()] = PhaseCache::build(&self.params, phase, self.table);
        }
    }

    fn update_effect<R: Rng + ?Sized>(&mut self, k: usize, s: usize, tuner: &mut StepTuner, adapting: bool, config: &SamplerConfig, rng: &mut R) {
        let delta = tuner.step * rng.sample::<f64, _>(StandardNormal);
        let factor = delta.exp();
        let cache = &self.caches[k];
        let partial = cache.containing_sum(self.table, s);
        let new_total = cache.total + (factor - 1.0) * partial;
        let mut log_ratio = self.stats.hits[k][s] * delta
            + quadratic_delta(&self.params.effects, &self.precision, self.graph, k, s, delta);
        if self.stats.storms[k] > 0.0 {
            log_ratio -= self.stats.storms[k] * (new_total / cache.total).ln();
        }
        let ok = new_total > 0.0 && accept(log_ratio, rng);
        if ok {
            self.params.effects[k][s] += delta;
            self.caches[k].scale_containing(self.table, s, factor, new_total);
        }
        tuner.record(ok, adapting, config);
    }

    fn update_intercept<R: Rng + ?Sized>(&mut self, k: usize, tuner: &mut StepTuner, adapting: bool, config: &SamplerConfig, rng: &mut R) {
        let delta = tuner.step * rng.sample::<f64, _>(StandardNormal);
        let cache = &self.caches[k];
        let new_total = regrouped_total(&cache.grouped(self.table.sizes()), delta);
        let mut log_ratio = self.stats.total_size[k] * delta;
        if self.stats.storms[k] > 0.0 {
            log_ratio -= self.stats.storms[k] * (new_total / cache.total).ln();
        }
        let ok = accept(log_ratio, rng);
        if ok {
            self.params.intercepts[k] += delta;
            self.caches[k] = PhaseCache::build(&self.params, Phase::ALL[k], self.table);
        }
        tuner.record(ok, adapting, config);
    }

    fn update_clustering<R: Rng + ?Sized>(&mut self, tuner: &mut StepTuner, adapting: bool, config: &SamplerConfig, rng: &mut R) {
        let delta = tuner.step * rng.sample::<f64, _>(StandardNormal);
        let phi = self.params.clustering;
        let proposal = phi + delta;
        let ok = if proposal <= 0.0 {
            false
        } else {
            let log_prior = |x: f64| -(config.ig_shape + 1.0) * x.ln() - config.ig_rate / x;
            let mut log_ratio = log_prior(proposal) - log_prior(phi);
            for k in 0..3 {
                if self.stats.storms[k] == 0.0 {
                    continue;
                }
                let cache = &self.caches[k];
                let new_total = regrouped_total(&cache.grouped(self.table.internal_edge_counts()), delta);
                log_ratio += delta * self.stats.total_edges[k]
                    - self.stats.storms[k] * (new_total / cache.total).ln();
            }
            accept(log_ratio, rng)
        };
        if ok {
            self.params.clustering = proposal;
            self.rebuild();
        }
        tuner.record(ok, adapting, config);
    }
}

pub fn run<R: Rng + ?Sized>(dataset: &Dataset, table: &ConnectedSubsetTable, config: &SamplerConfig, rng: &mut R) -> Result<Chain> {
    let graph = &dataset.graph;
    let n = graph.len();
    let stats = PathStats::from_dataset(dataset, table)?;
    let mut params = initial_params(&stats, n);
    for g0 in &mut params.intercepts {
        *g0 += config.init_jitter * rng.sample::<f64, _>(StandardNormal);
    }
    let precision = cholesky3(&params.sigma)?.inverse();
    let caches = Phase::ALL.map(|phase| PhaseCache::build(&params, phase, table));
    let mut state = State {
        params,
        precision,
        caches,
        stats: &stats,
        table,
        graph,
    };
    if !stats.log_likelihood(&state.params, table).is_finite() {
        return Err(Error::NonFinite("path log-likelihood at initialisation".into()));
    }

    let names = PathParams::parameter_names(graph.locations());
    let mut intercept_tuners = vec![StepTuner::new(config.initial_step, 10.0); 3];
    let mut clustering_tuner = StepTuner::new(config.initial_step, 10.0);
    let mut effect_tuners = vec![vec![StepTuner::new(config.initial_step, 10.0); n]; 3];

    let mut draws = Vec::with_capacity(config.n_draws());
    for iteration in 0..config.n_iterations {
        let adapting = iteration < config.burn_in;
        state.rebuild();
        for (k, tuner) in intercept_tuners.iter_mut().enumerate() {
            state.update_intercept(k, tuner, adapting, config, rng);
        }
        for (k, row) in effect_tuners.iter_mut().enumerate() {
            for (s, tuner) in row.iter_mut().enumerate() {
                state.update_effect(k, s, tuner, adapting, config, rng);
            }
        }
        state.update_clustering(&mut clustering_tuner, adapting, config, rng);

        for k in 0..3 {
            let mean = center_zero_sum(&mut state.params.effects[k]);
            state.params.intercepts[k] += mean;
        }
        let (df, scale) = full_conditional_sigma_gamma(&state.params.effects, graph, config);
        state.params.sigma = sample_inverse_wishart3(df, &scale, rng)?;
        state.precision = cholesky3(&state.params.sigma)?.inverse();

        if config.keeps(iteration) {
            draws.push(state.params.to_vec());
        }
    }

    let mut acceptance: Vec<Acceptance> = Phase::ALL
        .iter()
        .zip(&intercept_tuners)
        .map(|(p, t)| Acceptance::from_tuner(format!("gamma0_{p}"), t))
        .collect();
    acceptance.push(Acceptance::from_tuner("phi", &clustering_tuner));
    for (phase, row) in Phase::ALL.iter().zip(&effect_tuners) {
        for (loc, t) in graph.locations().iter().zip(row) {
            acceptance.push(Acceptance::from_tuner(format!("gamma_{phase}_{loc}"), t));
        }
    }
    Ok(Chain {
        submodel: Submodel::Path,
        chain_index: 0,
        seed: config.seed,
        names,
        draws,
        acceptance,
        latents: Vec::new(),
        n_locations: n,
    })
}
