//! Convergence and model-selection diagnostics.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::count::CountParams;
use crate::data::Dataset;
use crate::mcmc::count_sampler::CountStats;
use crate::mcmc::{Chain, Submodel};

/// Potential scale reduction of two or more equal-length chains.
pub fn bgr_statistic(chains: &[&[f64]]) -> Result<f64> {
    if chains.len() < 2 {
        return Err(Error::Insufficient("BGR needs at least two chains".into()));
    }
    let n = chains[0].len();
    if n < 10 || chains.iter().any(|c| c.len() != n) {
        return Err(Error::Insufficient("BGR needs equal-length chains of at least 10 draws".into()));
    }
    let m = chains.len() as f64;
    let nf = n as f64;
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / nf).collect();
    let within = chains
        .iter()
        .zip(&means)
        .map(|(c, mean)| c.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0))
        .sum::<f64>()
        / m;
    let grand = means.iter().sum::<f64>() / m;
    let between = nf * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>() / (m - 1.0);
    if within == 0.0 {
        return Ok(if between == 0.0 { 1.0 } else { f64::INFINITY });
    }
    Ok((((nf - 1.0) / nf * within + between / nf) / within).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HpdInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

impl HpdInterval {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Shortest window over the order statistics holding `ceil(level * n)`
/// samples; the earliest window wins ties.
pub fn hpd_interval(samples: &[f64], level: f64) -> Result<HpdInterval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("HPD level {level} outside (0, 1)")));
    }
    let n = samples.len();
    let needed = (1.0 / (1.0 - level) - 1e-9).ceil() as usize;
    if n < needed.max(1) {
        return Err(Error::Insufficient(format!(
            "{n} samples, need at least {needed} for a {level} HPD interval"
        )));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::NonFinite("HPD sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = ((level * n as f64) - 1e-9).ceil().max(1.0) as usize;
    let mut best = 0;
    let mut best_width = f64::INFINITY;
    for j in 0..=n - m {
        let width = sorted[j + m - 1] - sorted[j];
        if width < best_width {
            best_width = width;
            best = j;
        }
    }
    Ok(HpdInterval {
        lower: sorted[best],
        upper: sorted[best + m - 1],
        level,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dic {
    /// Posterior mean deviance.
    pub mean_deviance: f64,
    /// Deviance at the posterior mean.
    pub deviance_at_mean: f64,
    pub effective_parameters: f64,
    pub dic: f64,
}

/// `DIC = Dbar + pD` with `D = -2 log L` and `pD = Dbar - D(mean)`.
pub fn dic<F>(draws: &[Vec<f64>], mut log_likelihood: F) -> Result<Dic>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if draws.is_empty() {
        return Err(Error::Insufficient("DIC needs at least one draw".into()));
    }
    let p = draws[0].len();
    let mut mean = vec![0.0; p];
    let mut total = 0.0;
    for d in draws {
        let ll = log_likelihood(d)?;
        if !ll.is_finite() {
            return Err(Error::NonFinite("deviance of a posterior draw".into()));
        }
        total += -2.0 * ll;
        for (m, v) in mean.iter_mut().zip(d) {
            *m += v / draws.len() as f64;
        }
    }
    let mean_deviance = total / draws.len() as f64;
    let at_mean = -2.0 * log_likelihood(&mean)?;
    if !at_mean.is_finite() {
        return Err(Error::NonFinite("deviance at the posterior mean".into()));
    }
    let effective_parameters = mean_deviance - at_mean;
    Ok(Dic {
        mean_deviance,
        deviance_at_mean: at_mean,
        effective_parameters,
        dic: mean_deviance + effective_parameters,
    })
}

/// DIC of pooled count chains against the dataset they were fitted to.
pub fn count_dic(dataset: &Dataset, chains: &[Chain], intervals: usize) -> Result<Dic> {
    let pooled = Chain::pooled(chains)?;
    if pooled.submodel != Submodel::Count {
        return Err(Error::InvalidArgument(format!(
            "DIC needs count chains, found {}",
            pooled.submodel.name()
        )));
    }
    let n_frequencies = CountParams::from_slice(
        pooled
            .draws
            .first()
            .ok_or_else(|| Error::Insufficient("DIC needs at least one draw".into()))?,
    )?
    .n_frequencies();
    let stats = CountStats::new(dataset, n_frequencies, intervals)?;
    dic(&pooled.draws, |d| Ok(stats.log_likelihood(&CountParams::from_slice(d)?)))
}

/// One row of the diagnostics report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub name: String,
    pub mean: f64,
    pub hpd: HpdInterval,
    pub bgr: Option<f64>,
    pub acceptance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub submodel: String,
    pub n_chains: usize,
    pub draws_per_chain: usize,
    pub parameters: Vec<ParameterSummary>,
    /// Acceptance of every Metropolis update, pooled across chains.
    pub acceptance: Vec<(String, f64)>,
}

impl DiagnosticsReport {
    pub fn max_bgr(&self) -> Option<f64> {
        self.parameters
            .iter()
            .filter_map(|p| p.bgr)
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
    }

    pub fn acceptance_range(&self) -> Option<(f64, f64)> {
        self.acceptance.iter().fold(None, |acc, (_, r)| match acc {
            None => Some((*r, *r)),
            Some((lo, hi)) => Some((lo.min(*r), hi.max(*r))),
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{} submodel: {} chain(s), {} draws each\n",
            self.submodel, self.n_chains, self.draws_per_chain
        );
        let _ = writeln!(
            out,
            "{:<24} {:>12} {:>26} {:>8} {:>8}",
            "parameter", "mean", "95% HPD", "BGR", "accept"
        );
        for p in &self.parameters {
            let bgr = p.bgr.map_or("-".to_string(), |b| format!("{b:.4}"));
            let acc = p.acceptance.map_or("-".to_string(), |a| format!("{a:.3}"));
            let _ = writeln!(
                out,
                "{:<24} {:>12.4} {:>26} {:>8} {:>8}",
                p.name,
                p.mean,
                format!("[{:.4}, {:.4}]", p.hpd.lower, p.hpd.upper),
                bgr,
                acc
            );
        }
        if let Some((lo, hi)) = self.acceptance_range() {
            let _ = writeln!(out, "acceptance rates range over [{lo:.3}, {hi:.3}]");
        }
        out
    }
}

/// Posterior mean, 95% HPD, BGR and acceptance for every parameter.
pub fn diagnostics_report(chains: &[Chain]) -> Result<DiagnosticsReport> {
    let pooled = Chain::pooled(chains)?;
    let mut parameters = Vec::with_capacity(pooled.names.len());
    let columns: Vec<Vec<Vec<f64>>> = chains
        .iter()
        .map(|c| (0..c.names.len()).map(|i| c.column(i)).collect())
        .collect();
    let acceptance: Vec<(String, f64)> = pooled
        .acceptance
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let (acc, prop) = chains.iter().fold((0, 0), |(x, y), c| {
                (x + c.acceptance[i].accepted, y + c.acceptance[i].proposed)
            });
            (a.name.clone(), acc as f64 / prop.max(1) as f64)
        })
        .collect();
    for (i, name) in pooled.names.iter().enumerate() {
        let all = pooled.column(i);
        let mean = all.iter().sum::<f64>() / all.len().max(1) as f64;
        let hpd = hpd_interval(&all, 0.95)?;
        let bgr = if chains.len() >= 2 {
            let per: Vec<&[f64]> = columns.iter().map(|c| c[i].as_slice()).collect();
            bgr_statistic(&per).ok()
        } else {
            None
        };
        let acc = acceptance.iter().find(|(n, _)| n == name).map(|(_, r)| *r);
        parameters.push(ParameterSummary {
            name: name.clone(),
            mean,
            hpd,
            bgr,
            acceptance: acc,
        });
    }
    Ok(DiagnosticsReport {
        submodel: pooled.submodel.name().to_string(),
        n_chains: chains.len(),
        draws_per_chain: chains[0].len(),
        parameters,
        acceptance,
    })
}
