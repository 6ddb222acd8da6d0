//! Metropolis-within-Gibbs for the damage model with latent severities and
//! latent per-location damages for storms observed only through their total.

use nalgebra::Matrix3;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::count::Phase;
use crate::damage::{latent_decomposition_log_density_with, tail_approximations, DamageParams, StormLatents};
use crate::data::{Dataset, StormRecord};
use crate::error::{Error, Result};
use crate::graph::SpatialGraph;
use crate::lognormal::MatchOptions;
use crate::mcar::{cholesky3, quadratic_delta};
use crate::mcmc::conjugate::{
    full_conditional_sigma2, full_conditional_sigma2_zeta, full_conditional_sigma_xi, full_conditional_zeta,
    sample_inverse_gamma, sample_inverse_wishart3,
};
use crate::mcmc::{accept, center_zero_sum, Acceptance, Chain, SamplerConfig, StepTuner, Submodel};

/// Largest uniform-walk width on the unit simplex.
const MAX_SIMPLEX_STEP: f64 = 4.0;

/// Storms whose per-location damages are unobserved.
pub fn has_free_latents(storm: &StormRecord) -> bool {
    storm.hit_count() > 1 && storm.location_damages.is_none()
}

/// Initial latents: zero severity and the total split in proportion to
/// `exp(xi0_k + xi_{k,s})`.
pub fn initial_latents(storm: &StormRecord, phase: Phase, params: &DamageParams) -> StormLatents {
    let location_damages = match storm.known_damages() {
        Some(d) => d,
        None => {
            let members = storm.path.members();
            let logs: Vec<f64> = members.iter().map(|&s| params.location_mu(phase, s)).collect();
            let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = logs.iter().map(|l| (l - peak).exp()).collect();
            let sum: f64 = weights.iter().sum();
            weights.iter().map(|w| storm.total_damage * w / sum).collect()
        }
    };
    StormLatents {
        severity: 0.0,
        location_damages,
    }
}

/// Method-of-moments start from mean and variance of per-location log damage,
/// using an even split for storms known only by their total.
pub fn initial_params(dataset: &Dataset) -> DamageParams {
    let mut sums = [0.0; 3];
    let mut counts = [0.0; 3];
    let mut all = Vec::new();
    for storm in &dataset.storms {
        let k = dataset.phase_of(storm).index();
        let logs: Vec<f64> = match storm.known_damages() {
            Some(d) => d.iter().map(|v| v.ln()).collect(),
            None => vec![(storm.total_damage / storm.hit_count() as f64).ln(); storm.hit_count()],
        };
        for l in logs {
            sums[k] += l;
            counts[k] += 1.0;
            all.push(l);
        }
    }
    let overall = all.iter().sum::<f64>() / all.len().max(1) as f64;
    let var = if all.len() > 1 {
        all.iter().map(|l| (l - overall).powi(2)).sum::<f64>() / (all.len() - 1) as f64
    } else {
        1.0
    }
    .max(0.1);
    let intercepts = std::array::from_fn(|k| if counts[k] > 0.0 { sums[k] / counts[k] } else { overall });
    DamageParams::new(dataset.graph.len(), intercepts, var, var)
}

/// Log-damage residual sums per phase and location, before the intercepts.
struct ResidualStats {
    counts: [Vec<f64>; 3],
    sums: [Vec<f64>; 3],
}

impl ResidualStats {
    fn new(storms: &[StormRecord], phases: &[Phase], latents: &[StormLatents], n: usize) -> Self {
        let mut counts: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; n]);
        let mut sums = counts.clone();
        for ((storm, phase), latent) in storms.iter().zip(phases).zip(latents) {
            let k = phase.index();
            for (s, &y) in storm.path.members().into_iter().zip(&latent.location_damages) {
                counts[k][s] += 1.0;
                sums[k][s] += y.ln() - latent.severity;
            }
        }
        Self { counts, sums }
    }

    /// Change in the Gaussian log-likelihood when `mean` moves by `delta` at `(k, s)`.
    fn delta(&self, k: usize, s: usize, mean: f64, delta: f64, sigma2: f64) -> f64 {
        let n = self.counts[k][s];
        (2.0 * delta * self.sums[k][s] - n * (2.0 * mean * delta + delta * delta)) / (2.0 * sigma2)
    }
}

/// Log-posterior of `(sigma^2, sigma_zeta^2)` on the log scale with the
/// severities integrated out. Each storm contributes through its hit count,
/// residual sum and residual sum of squares.
fn collapsed_variance_log_target(residuals: &[(f64, f64, f64)], sigma2: f64, severity_var: f64, config: &SamplerConfig) -> f64 {
    let mut ll = 0.0;
    for &(m, sum, sumsq) in residuals {
        let total = sigma2 + m * severity_var;
        ll -= 0.5 * ((m - 1.0) * sigma2.ln() + total.ln());
        ll -= 0.5 * (sumsq - severity_var * sum * sum / total) / sigma2;
    }
    let log_prior = |v: f64| -config.ig_shape * v.ln() - config.ig_rate / v;
    ll + log_prior(sigma2) + log_prior(severity_var)
}

struct Sweep<'a> {
    storms: &'a [StormRecord],
    phases: Vec<Phase>,
    graph: &'a SpatialGraph,
    params: DamageParams,
    precision: Matrix3<f64>,
    latents: Vec<StormLatents>,
    match_options: MatchOptions,
}

impl Sweep<'_> {
    fn storm_residuals(&self) -> Vec<(f64, f64, f64)> {
        self.storms
            .iter()
            .zip(&self.phases)
            .zip(&self.latents)
            .map(|((storm, &phase), latent)| {
                let (mut sum, mut sumsq) = (0.0, 0.0);
                for (s, &y) in storm.path.members().into_iter().zip(&latent.location_damages) {
                    let r = y.ln() - self.params.location_mu(phase, s);
                    sum += r;
                    sumsq += r * r;
                }
                (storm.hit_count() as f64, sum, sumsq)
            })
            .collect()
    }

    /// Random-walk moves on `ln sigma^2` and `ln sigma_zeta^2` with the
    /// severities integrated out; the severities must be redrawn afterwards.
    fn update_variances<R: Rng + ?Sized>(
        &mut self,
        tuners: &mut [StepTuner; 2],
        adapting: bool,
        config: &SamplerConfig,
        rng: &mut R,
    ) {
        let residuals = self.storm_residuals();
        let mut current = collapsed_variance_log_target(&residuals, self.params.sigma2, self.params.severity_var, config);
        for (which, tuner) in tuners.iter_mut().enumerate() {
            let factor = (tuner.step * rng.sample::<f64, _>(StandardNormal)).exp();
            let (sigma2, severity_var) = if which == 0 {
                (self.params.sigma2 * factor, self.params.severity_var)
            } else {
                (self.params.sigma2, self.params.severity_var * factor)
            };
            let proposed = collapsed_variance_log_target(&residuals, sigma2, severity_var, config);
            let ok = proposed.is_finite() && accept(proposed - current, rng);
            if ok {
                self.params.sigma2 = sigma2;
                self.params.severity_var = severity_var;
                current = proposed;
            }
            tuner.record(ok, adapting, config);
        }
    }

    fn update_effects<R: Rng + ?Sized>(
        &mut self,
        intercept_tuners: &mut [StepTuner],
        effect_tuners: &mut [Vec<StepTuner>],
        adapting: bool,
        config: &SamplerConfig,
        rng: &mut R,
    ) {
        let n = self.graph.len();
        let stats = ResidualStats::new(self.storms, &self.phases, &self.latents, n);
        for (k, tuner) in intercept_tuners.iter_mut().enumerate() {
            let delta = tuner.step * rng.sample::<f64, _>(StandardNormal);
            let log_ratio: f64 = (0..n)
                .map(|s| stats.delta(k, s, self.params.location_mu(Phase::ALL[k], s), delta, self.params.sigma2))
                .sum();
            let ok = accept(log_ratio, rng);
            if ok {
                self.params.intercepts[k] += delta;
            }
            tuner.record(ok, adapting, config);
        }
        for (k, row) in effect_tuners.iter_mut().enumerate() {
            for (s, tuner) in row.iter_mut().enumerate() {
                let delta = tuner.step * rng.sample::<f64, _>(StandardNormal);
                let mean = self.params.location_mu(Phase::ALL[k], s);
                let log_ratio = stats.delta(k, s, mean, delta, self.params.sigma2)
                    + quadratic_delta(&self.params.effects, &self.precision, self.graph, k, s, delta);
                let ok = accept(log_ratio, rng);
                if ok {
                    self.params.effects[k][s] += delta;
                }
                tuner.record(ok, adapting, config);
            }
        }
    }

    fn update_latent<R: Rng + ?Sized>(
        &mut self,
        i: usize,
        tuner: &mut StepTuner,
        adapting: bool,
        config: &SamplerConfig,
        rng: &mut R,
    ) -> Result<()> {
        let storm = &self.storms[i];
        let phase = self.phases[i];
        let latent = &self.latents[i];
        let components: Vec<_> = storm
            .path
            .members()
            .into_iter()
            .map(|s| self.params.component(phase, s, latent.severity))
            .collect();
        let tails = tail_approximations(&components, &self.match_options)?;
        let total = storm.total_damage;
        let m = components.len();
        for _ in 0..config.latent_updates {
            let current = &self.latents[i].location_damages;
            let here = latent_decomposition_log_density_with(&current[..m - 1], total, &components, &tails)?;
            let proposal: Vec<f64> = current[..m - 1]
                .iter()
                .map(|y| (y / total + tuner.step * (rng.random::<f64>() - 0.5)) * total)
                .collect();
            let ok = match latent_decomposition_log_density_with(&proposal, total, &components, &tails) {
                Ok(there) => accept(there - here, rng),
                Err(Error::SimplexViolation) => false,
                Err(e) => return Err(e),
            };
            if ok {
                let last = total - proposal.iter().sum::<f64>();
                let mut damages = proposal;
                damages.push(last);
                self.latents[i].location_damages = damages;
            }
            tuner.record(ok, adapting, config);
        }
        Ok(())
    }
}

pub fn run<R: Rng + ?Sized>(dataset: &Dataset, config: &SamplerConfig, rng: &mut R) -> Result<Chain> {
    let graph = &dataset.graph;
    let n = graph.len();
    let storms = &dataset.storms;
    if storms.is_empty() {
        return Err(Error::Insufficient("the damage model needs at least one storm".into()));
    }
    let phases = dataset.phases();
    let mut params = initial_params(dataset);
    for x in &mut params.intercepts {
        *x += config.init_jitter * rng.sample::<f64, _>(StandardNormal);
    }
    let latents: Vec<StormLatents> = storms
        .iter()
        .zip(&phases)
        .map(|(s, &p)| initial_latents(s, p, &params))
        .collect();
    let precision = cholesky3(&params.sigma)?.inverse();
    let mut sweep = Sweep {
        storms,
        phases,
        graph,
        params,
        precision,
        latents,
        match_options: config.match_options(),
    };
    let free: Vec<usize> = (0..storms.len()).filter(|&i| has_free_latents(&storms[i])).collect();

    let names = DamageParams::parameter_names(graph.locations());
    let mut intercept_tuners = vec![StepTuner::new(config.initial_step, 10.0); 3];
    let mut effect_tuners = vec![vec![StepTuner::new(config.initial_step, 10.0); n]; 3];
    let mut latent_tuners = vec![StepTuner::new(config.initial_step, MAX_SIMPLEX_STEP); free.len()];
    let mut variance_tuners = [StepTuner::new(config.initial_step, 10.0), StepTuner::new(config.initial_step, 10.0)];

    let mut draws = Vec::with_capacity(config.n_draws());
    let mut latent_draws = Vec::with_capacity(config.n_draws());
    for iteration in 0..config.n_iterations {
        let adapting = iteration < config.burn_in;
        sweep.update_effects(&mut intercept_tuners, &mut effect_tuners, adapting, config, rng);
        for k in 0..3 {
            let mean = center_zero_sum(&mut sweep.params.effects[k]);
            sweep.params.intercepts[k] += mean;
        }

        let (df, scale) = full_conditional_sigma_xi(&sweep.params.effects, graph, config);
        sweep.params.sigma = sample_inverse_wishart3(df, &scale, rng)?;
        sweep.precision = cholesky3(&sweep.params.sigma)?.inverse();

        let severities: Vec<f64> = sweep.latents.iter().map(|l| l.severity).collect();
        let (shape, rate) = full_conditional_sigma2_zeta(&severities, config);
        sweep.params.severity_var = sample_inverse_gamma(shape, rate, rng)?;
        let (shape, rate) = full_conditional_sigma2(storms, &sweep.phases, &sweep.latents, &sweep.params, config);
        sweep.params.sigma2 = sample_inverse_gamma(shape, rate, rng)?;
        sweep.update_variances(&mut variance_tuners, adapting, config, rng);

        for (i, storm) in storms.iter().enumerate() {
            let (mean, var) =
                full_conditional_zeta(storm, sweep.phases[i], &sweep.latents[i].location_damages, &sweep.params);
            let normal = Normal::new(mean, var.sqrt()).map_err(|e| Error::NonFinite(e.to_string()))?;
            sweep.latents[i].severity = normal.sample(rng);
        }

        for (tuner, &i) in latent_tuners.iter_mut().zip(&free) {
            sweep.update_latent(i, tuner, adapting, config, rng)?;
        }

        if config.keeps(iteration) {
            let draw = sweep.params.to_vec();
            if !draw.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite(format!("damage draw at iteration {iteration}")));
            }
            draws.push(draw);
            latent_draws.push(sweep.latents.clone());
        }
    }

    let mut acceptance: Vec<Acceptance> = Phase::ALL
        .iter()
        .zip(&intercept_tuners)
        .map(|(p, t)| Acceptance::from_tuner(format!("xi0_{p}"), t))
        .collect();
    for (phase, row) in Phase::ALL.iter().zip(&effect_tuners) {
        for (loc, t) in graph.locations().iter().zip(row) {
            acceptance.push(Acceptance::from_tuner(format!("xi_{phase}_{loc}"), t));
        }
    }
    acceptance.push(Acceptance::from_tuner("sigma2", &variance_tuners[0]));
    acceptance.push(Acceptance::from_tuner("sigma2_zeta", &variance_tuners[1]));
    for (t, &i) in latent_tuners.iter().zip(&free) {
        acceptance.push(Acceptance::from_tuner(format!("latent_{}", storms[i].id), t));
    }
    Ok(Chain {
        submodel: Submodel::Damage,
        chain_index: 0,
        seed: config.seed,
        names,
        draws,
        acceptance,
        latents: latent_draws,
        n_locations: n,
    })
}

/// Runs only the latent-damage block for one storm with parameters held
/// fixed, returning every post-burn-in draw of the location damages.
pub fn sample_latent_damages<R: Rng + ?Sized>(
    storm: &StormRecord,
    phase: Phase,
    params: &DamageParams,
    severity: f64,
    graph: &SpatialGraph,
    config: &SamplerConfig,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    if storm.hit_count() < 2 {
        return Err(Error::InvalidArgument("latent damages need a multi-location storm".into()));
    }
    let mut latent = initial_latents(storm, phase, params);
    latent.severity = severity;
    let storms = std::slice::from_ref(storm);
    let mut sweep = Sweep {
        storms,
        phases: vec![phase],
        graph,
        params: params.clone(),
        precision: Matrix3::identity(),
        latents: vec![latent],
        match_options: config.match_options(),
    };
    let mut tuner = StepTuner::new(config.initial_step, MAX_SIMPLEX_STEP);
    let mut out = Vec::with_capacity(config.n_draws());
    for iteration in 0..config.n_iterations {
        sweep.update_latent(0, &mut tuner, iteration < config.burn_in, config, rng)?;
        if config.keeps(iteration) {
            out.push(sweep.latents[0].location_damages.clone());
        }
    }
    Ok(out)
}
