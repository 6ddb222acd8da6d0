//! Metropolis-within-Gibbs samplers for the three submodels.
//!
//! Scalar parameters move by Gaussian random walks whose step sizes are tuned
//! towards a target acceptance rate during burn-in and frozen afterwards.
//! Spatial-effect rows are re-centred after each Metropolis pass and the
//! covariance blocks are drawn from their conjugate full conditionals.

pub mod conjugate;
pub mod count_sampler;
pub mod damage_sampler;
pub mod path_sampler;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::count::CountParams;
use crate::damage::{DamageParams, StormLatents};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::ConnectedSubsetTable;
use crate::lognormal::MatchOptions;
use crate::path::PathParams;

/// Degrees-of-freedom rule for the covariance full conditionals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceDf {
    /// `iw_df - 1 + rank` for the path block and `iw_df + rank` for damage.
    #[default]
    Printed,
    /// `iw_df + rank` for both blocks.
    Conjugate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub n_iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub n_chains: usize,
    pub seed: u64,
    pub target_acceptance: f64,
    /// Proposals per adaptation window.
    pub adaptation_window: usize,
    /// Robbins-Monro gain; window `t` uses `gain / sqrt(t + 1)`.
    pub adaptation_gain: f64,
    pub initial_step: f64,
    /// Standard deviation of the per-chain intercept jitter at initialisation.
    pub init_jitter: f64,
    pub ig_shape: f64,
    pub ig_rate: f64,
    pub iw_df: f64,
    /// Multiple of the identity used as the inverse-Wishart scale.
    pub iw_scale: f64,
    pub covariance_df: CovarianceDf,
    pub simpson_intervals: usize,
    pub match_points: [f64; 2],
    pub match_tolerance: f64,
    pub match_max_iterations: usize,
    /// Latent-damage block proposals per storm in each sweep.
    pub latent_updates: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_iterations: 20_000,
            burn_in: 5_000,
            thin: 10,
            n_chains: 2,
            seed: 1,
            target_acceptance: 0.44,
            adaptation_window: 50,
            adaptation_gain: 1.0,
            initial_step: 0.1,
            init_jitter: 0.5,
            ig_shape: 0.01,
            ig_rate: 0.01,
            iw_df: 4.0,
            iw_scale: 1.0,
            covariance_df: CovarianceDf::Printed,
            simpson_intervals: crate::count::DEFAULT_SIMPSON_INTERVALS,
            match_points: crate::lognormal::DEFAULT_MATCH_POINTS,
            match_tolerance: 1e-10,
            match_max_iterations: 100,
            latent_updates: 10,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.burn_in >= self.n_iterations {
            return fail("burn_in must be below n_iterations");
        }
        if self.thin == 0 {
            return fail("thin must be at least 1");
        }
        if self.n_chains == 0 {
            return fail("n_chains must be at least 1");
        }
        if self.latent_updates == 0 {
            return fail("latent_updates must be at least 1");
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return fail("target_acceptance must lie in (0, 1)");
        }
        if self.adaptation_window == 0 || !(self.adaptation_gain >= 0.0) || !(self.initial_step > 0.0) {
            return fail("adaptation settings must be positive");
        }
        if !(self.ig_shape > 0.0 && self.ig_rate > 0.0 && self.iw_df > 2.0 && self.iw_scale > 0.0) {
            return fail("prior hyperparameters must be positive (iw_df > 2)");
        }
        if self.match_points.iter().any(|&s| s >= 0.0) {
            return fail("match points must be negative");
        }
        Ok(())
    }

    /// Number of retained draws per chain.
    pub fn n_draws(&self) -> usize {
        (self.n_iterations - self.burn_in) / self.thin
    }

    pub fn keeps(&self, iteration: usize) -> bool {
        iteration >= self.burn_in && (iteration - self.burn_in + 1).is_multiple_of(self.thin)
    }

    pub fn match_options(&self) -> MatchOptions {
        MatchOptions {
            points: self.match_points,
            tolerance: self.match_tolerance,
            max_iterations: self.match_max_iterations,
        }
    }
}

/// Subtracts the mean from every entry; returns the mean.
pub fn center_zero_sum(row: &mut [f64]) -> f64 {
    if row.is_empty() {
        return 0.0;
    }
    let mean = row.iter().sum::<f64>() / row.len() as f64;
    row.iter_mut().for_each(|v| *v -= mean);
    mean
}

/// Metropolis acceptance for a log target ratio.
pub fn accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    if log_ratio >= 0.0 {
        return true;
    }
    log_ratio.is_finite() && rng.random::<f64>().ln() < log_ratio
}

/// One Gaussian random-walk step on a scalar.
pub fn metropolis_scalar_step<F, R>(
    current: f64,
    mut log_target: F,
    step_size: f64,
    rng: &mut R,
) -> Result<(f64, bool)>
where
    F: FnMut(f64) -> f64,
    R: Rng + ?Sized,
{
    let here = log_target(current);
    if !here.is_finite() {
        return Err(Error::NonFinite(format!("log target at {current}")));
    }
    let z: f64 = rng.sample(StandardNormal);
    let proposal = current + step_size * z;
    let there = log_target(proposal);
    if accept(there - here, rng) {
        Ok((proposal, true))
    } else {
        Ok((current, false))
    }
}

/// Robbins-Monro update of a step size on the log scale.
pub fn adapt_step_size(window_rate: f64, current_step: f64, window_index: usize, config: &SamplerConfig) -> f64 {
    let gain = config.adaptation_gain / ((window_index + 1) as f64).sqrt();
    current_step * (gain * (window_rate - config.target_acceptance)).exp()
}

/// Step size and acceptance bookkeeping for one Metropolis update.
///
/// When burn-in ends the step is fixed at the geometric mean of the steps
/// used over the last quarter of the adaptation windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTuner {
    pub step: f64,
    max_step: f64,
    window_accepted: usize,
    window_proposed: usize,
    log_steps: Vec<f64>,
    frozen: bool,
    /// Post-burn-in counts.
    pub accepted: usize,
    pub proposed: usize,
}

impl StepTuner {
    pub fn new(step: f64, max_step: f64) -> Self {
        Self {
            step,
            max_step,
            window_accepted: 0,
            window_proposed: 0,
            log_steps: Vec::new(),
            frozen: false,
            accepted: 0,
            proposed: 0,
        }
    }

    pub fn record(&mut self, accepted: bool, adapting: bool, config: &SamplerConfig) {
        if adapting {
            self.window_proposed += 1;
            self.window_accepted += accepted as usize;
            if self.window_proposed == config.adaptation_window {
                let rate = self.window_accepted as f64 / self.window_proposed as f64;
                let windows = self.log_steps.len();
                self.step = adapt_step_size(rate, self.step, windows, config).clamp(1e-8, self.max_step);
                self.log_steps.push(self.step.ln());
                self.window_accepted = 0;
                self.window_proposed = 0;
            }
        } else {
            if !self.frozen {
                self.freeze();
            }
            self.proposed += 1;
            self.accepted += accepted as usize;
        }
    }

    fn freeze(&mut self) {
        self.frozen = true;
        let tail = &self.log_steps[3 * self.log_steps.len() / 4..];
        if !tail.is_empty() {
            self.step = (tail.iter().sum::<f64>() / tail.len() as f64).exp();
        }
        self.log_steps = Vec::new();
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Submodel {
    Count,
    Path,
    Damage,
}

impl Submodel {
    pub const ALL: [Submodel; 3] = [Submodel::Count, Submodel::Path, Submodel::Damage];

    pub fn name(self) -> &'static str {
        match self {
            Submodel::Count => "count",
            Submodel::Path => "path",
            Submodel::Damage => "damage",
        }
    }
}

impl std::str::FromStr for Submodel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "count" => Ok(Submodel::Count),
            "path" => Ok(Submodel::Path),
            "damage" => Ok(Submodel::Damage),
            other => Err(Error::InvalidArgument(format!("unknown submodel `{other}`"))),
        }
    }
}

/// Acceptance summary for one Metropolis update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Acceptance {
    pub name: String,
    pub accepted: usize,
    pub proposed: usize,
    pub step: f64,
}

impl Acceptance {
    pub fn from_tuner(name: impl Into<String>, tuner: &StepTuner) -> Self {
        Self {
            name: name.into(),
            accepted: tuner.accepted,
            proposed: tuner.proposed,
            step: tuner.step,
        }
    }

    pub fn rate(&self) -> f64 {
        self.accepted as f64 / self.proposed.max(1) as f64
    }
}

/// Retained draws of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub submodel: Submodel,
    pub chain_index: usize,
    pub seed: u64,
    pub names: Vec<String>,
    pub draws: Vec<Vec<f64>>,
    pub acceptance: Vec<Acceptance>,
    /// Damage chains only: severities and location damages per retained draw.
    pub latents: Vec<Vec<StormLatents>>,
    /// Number of locations, needed to rebuild typed parameters.
    pub n_locations: usize,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, index: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d[index]).collect()
    }

    pub fn posterior_mean(&self) -> Vec<f64> {
        let n = self.draws.len().max(1) as f64;
        let mut mean = vec![0.0; self.names.len()];
        for draw in &self.draws {
            for (m, v) in mean.iter_mut().zip(draw) {
                *m += v / n;
            }
        }
        mean
    }

    pub fn count_params(&self, draw: &[f64]) -> Result<CountParams> {
        CountParams::from_slice(draw)
    }

    pub fn path_params(&self, draw: &[f64]) -> Result<PathParams> {
        PathParams::from_slice(draw, self.n_locations)
    }

    pub fn damage_params(&self, draw: &[f64]) -> Result<DamageParams> {
        DamageParams::from_slice(draw, self.n_locations)
    }

    /// Concatenates draws of chains from the same submodel.
    pub fn pooled(chains: &[Chain]) -> Result<Chain> {
        let first = chains
            .first()
            .ok_or_else(|| Error::Insufficient("no chains to pool".into()))?;
        let mut out = first.clone();
        for c in &chains[1..] {
            if c.names != first.names || c.submodel != first.submodel {
                return Err(Error::InvalidArgument("chains do not share a layout".into()));
            }
            out.draws.extend(c.draws.iter().cloned());
            out.latents.extend(c.latents.iter().cloned());
        }
        Ok(out)
    }
}

#[derive(Serialize, Deserialize)]
struct ChainHeader {
    submodel: Submodel,
    chain_index: usize,
    seed: u64,
    n_locations: usize,
    acceptance: Vec<Acceptance>,
}

impl Chain {
    /// A `# {json}` metadata line, a row of parameter names, then one
    /// comma-separated row per retained draw. Latent damages are not written.
    pub fn to_text(&self) -> String {
        let header = ChainHeader {
            submodel: self.submodel,
            chain_index: self.chain_index,
            seed: self.seed,
            n_locations: self.n_locations,
            acceptance: self.acceptance.clone(),
        };
        let mut out = format!(
            "# {}\n{}\n",
            serde_json::to_string(&header).expect("chain header serialises"),
            self.names.join(",")
        );
        for draw in &self.draws {
            let row: Vec<String> = draw.iter().map(|v| v.to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str, source: &str) -> Result<Chain> {
        let parse_err = |line: usize, message: String| Error::Parse {
            file: source.to_string(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or_else(|| parse_err(1, "empty chain file".into()))?;
        let json = first
            .strip_prefix('#')
            .ok_or_else(|| parse_err(1, "missing `# {...}` metadata line".into()))?;
        let header: ChainHeader =
            serde_json::from_str(json.trim()).map_err(|e| parse_err(1, format!("bad metadata: {e}")))?;
        let (_, names_line) = lines.next().ok_or_else(|| parse_err(2, "missing column names".into()))?;
        let names: Vec<String> = names_line.split(',').map(|s| s.trim().to_string()).collect();
        let mut draws = Vec::new();
        for (i, line) in lines {
            let row = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| parse_err(i + 1, e.to_string()))?;
            if row.len() != names.len() {
                return Err(parse_err(i + 1, format!("expected {} values, found {}", names.len(), row.len())));
            }
            draws.push(row);
        }
        Ok(Chain {
            submodel: header.submodel,
            chain_index: header.chain_index,
            seed: header.seed,
            names,
            draws,
            acceptance: header.acceptance,
            latents: Vec::new(),
            n_locations: header.n_locations,
        })
    }
}

/// Random stream for one chain: a common seed with a per-chain stream id.
pub fn chain_rng(seed: u64, chain_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain_index as u64);
    rng
}

/// Runs one chain of the given submodel.
pub fn run_chain(
    submodel: Submodel,
    dataset: &Dataset,
    table: &ConnectedSubsetTable,
    n_frequencies: usize,
    config: &SamplerConfig,
    chain_index: usize,
) -> Result<Chain> {
    config.validate()?;
    let mut rng = chain_rng(config.seed, chain_index);
    let mut chain = match submodel {
        Submodel::Count => count_sampler::run(dataset, n_frequencies, config, &mut rng)?,
        Submodel::Path => path_sampler::run(dataset, table, config, &mut rng)?,
        Submodel::Damage => damage_sampler::run(dataset, config, &mut rng)?,
    };
    chain.chain_index = chain_index;
    chain.seed = config.seed;
    Ok(chain)
}

/// Runs `config.n_chains` chains in parallel on independent streams.
pub fn run_chains(
    submodel: Submodel,
    dataset: &Dataset,
    table: &ConnectedSubsetTable,
    n_frequencies: usize,
    config: &SamplerConfig,
) -> Result<Vec<Chain>> {
    (0..config.n_chains)
        .into_par_iter()
        .map(|c| run_chain(submodel, dataset, table, n_frequencies, config, c))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centering() {
        let mut v = [1.0, 2.0, 3.0];
        assert_eq!(center_zero_sum(&mut v), 2.0);
        assert_eq!(v, [-1.0, 0.0, 1.0]);
        center_zero_sum(&mut v);
        assert_eq!(v, [-1.0, 0.0, 1.0]);
    }

    #[test]
    fn adaptation_direction() {
        let cfg = SamplerConfig::default();
        assert_eq!(adapt_step_size(0.44, 0.3, 0, &cfg), 0.3);
        assert!(adapt_step_size(1.0, 0.3, 5, &cfg) > 0.3);
        assert!(adapt_step_size(0.0, 0.3, 5, &cfg) < 0.3);
    }

    #[test]
    fn normal_target_random_walk() {
        let cfg = SamplerConfig {
            initial_step: 50.0,
            ..SamplerConfig::default()
        };
        let mut rng = chain_rng(3, 0);
        let mut tuner = StepTuner::new(cfg.initial_step, 100.0);
        let mut x = 0.0;
        let (burn, n) = (5_000, 200_000);
        let (mut sum, mut sumsq) = (0.0, 0.0);
        for i in 0..burn + n {
            let (next, ok) = metropolis_scalar_step(x, |v| -0.5 * v * v, tuner.step, &mut rng).unwrap();
            x = next;
            tuner.record(ok, i < burn, &cfg);
            if i >= burn {
                sum += x;
                sumsq += x * x;
            }
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        let rate = tuner.acceptance_rate();
        assert!((0.30..=0.55).contains(&rate), "rate {rate}");
        // Autocorrelated draws: allow an inflated standard error.
        assert!(mean.abs() < 3.0 * (10.0 / n as f64).sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn tiny_steps_almost_always_accept() {
        let mut rng = chain_rng(4, 0);
        let mut accepted = 0;
        let mut x = 0.3;
        for _ in 0..10_000 {
            let (next, ok) = metropolis_scalar_step(x, |v| -0.5 * v * v, 1e-6, &mut rng).unwrap();
            x = next;
            accepted += ok as usize;
        }
        assert!(accepted > 9_990);
    }

    #[test]
    fn rejects_non_finite_start() {
        let mut rng = chain_rng(5, 0);
        assert!(metropolis_scalar_step(0.0, |_| f64::NEG_INFINITY, 1.0, &mut rng).is_err());
    }

    #[test]
    fn chain_text_round_trip() {
        let chain = Chain {
            submodel: Submodel::Path,
            chain_index: 1,
            seed: 9,
            names: vec!["a".into(), "b".into()],
            draws: vec![vec![0.1, -3.0e-12], vec![1.0 / 3.0, 7.5]],
            acceptance: vec![Acceptance {
                name: "a".into(),
                accepted: 3,
                proposed: 10,
                step: 0.25,
            }],
            latents: Vec::new(),
            n_locations: 2,
        };
        assert_eq!(Chain::parse(&chain.to_text(), "c").unwrap(), chain);
        let broken = chain.to_text().replace("7.5", "x");
        assert!(matches!(Chain::parse(&broken, "c"), Err(Error::Parse { line: 4, .. })));
        assert!(Chain::parse("a,b\n1,2\n", "c").is_err());
    }

    #[test]
    fn retained_draw_count() {
        let cfg = SamplerConfig {
            n_iterations: 10_000,
            burn_in: 2_000,
            thin: 10,
            ..SamplerConfig::default()
        };
        assert_eq!((0..cfg.n_iterations).filter(|&i| cfg.keeps(i)).count(), cfg.n_draws());
        assert_eq!(cfg.n_draws(), 800);
    }
}
