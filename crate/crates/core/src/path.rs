//! Autologistic storm-path model on LOS-connected location sets.
//!
//! Each location's hit log-odds are a phase intercept plus a phase-specific
//! spatial effect plus `phi` times the number of hit neighbours. The joint
//! distribution is normalised over nonempty connected subsets only, so the
//! null path and disconnected paths have probability zero.

use nalgebra::Matrix3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::count::Phase;
use crate::error::{Error, Result};
use crate::graph::{ConnectedSubsetTable, SpatialGraph};
use crate::mcar::EffectRows;

#[derive(Debug, Clone, PartialEq)]
pub struct PathParams {
    pub intercepts: [f64; 3],
    pub effects: EffectRows,
    /// Clustering strength `phi > 0`.
    pub clustering: f64,
    pub sigma: Matrix3<f64>,
}

impl PathParams {
    pub fn new(n_locations: usize, intercepts: [f64; 3], clustering: f64) -> Self {
        Self {
            intercepts,
            effects: std::array::from_fn(|_| vec![0.0; n_locations]),
            clustering,
            sigma: Matrix3::identity(),
        }
    }

    pub fn n_locations(&self) -> usize {
        self.effects[0].len()
    }

    /// Names matching [`PathParams::to_vec`].
    pub fn parameter_names(locations: &[String]) -> Vec<String> {
        let mut names: Vec<String> = Phase::ALL.iter().map(|p| format!("gamma0_{p}")).collect();
        names.push("phi".into());
        names.extend(sigma_names("sigma_gamma"));
        for phase in Phase::ALL {
            names.extend(locations.iter().map(|l| format!("gamma_{phase}_{l}")));
        }
        names
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = self.intercepts.to_vec();
        out.push(self.clustering);
        out.extend(sigma_values(&self.sigma));
        for row in &self.effects {
            out.extend_from_slice(row);
        }
        out
    }

    pub fn from_slice(values: &[f64], n_locations: usize) -> Result<Self> {
        if values.len() != 10 + 3 * n_locations {
            return Err(Error::InvalidArgument(format!(
                "{} values do not form a path parameter vector for {n_locations} locations",
                values.len()
            )));
        }
        let mut params = Self::new(n_locations, [values[0], values[1], values[2]], values[3]);
        params.sigma = sigma_from_values(&values[4..10]);
        for k in 0..3 {
            let start = 10 + k * n_locations;
            params.effects[k].copy_from_slice(&values[start..start + n_locations]);
        }
        Ok(params)
    }

    /// Unnormalised log-weight of a connected subset in the given phase.
    pub fn subset_log_weight(&self, mask: u32, internal_edges: u32, phase: Phase) -> f64 {
        let k = phase.index();
        let mut w = self.clustering * internal_edges as f64;
        let mut m = mask;
        while m != 0 {
            let s = m.trailing_zeros() as usize;
            w += self.intercepts[k] + self.effects[k][s];
            m &= m - 1;
        }
        w
    }
}

/// Names for the six free entries of a symmetric 3×3 matrix.
pub(crate) fn sigma_names(prefix: &str) -> Vec<String> {
    let mut names = Vec::with_capacity(6);
    for i in 0..3 {
        for j in i..3 {
            names.push(format!("{prefix}_{}{}", i + 1, j + 1));
        }
    }
    names
}

pub(crate) fn sigma_values(sigma: &Matrix3<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(6);
    for i in 0..3 {
        for j in i..3 {
            out.push(sigma[(i, j)]);
        }
    }
    out
}

pub(crate) fn sigma_from_values(values: &[f64]) -> Matrix3<f64> {
    let mut sigma = Matrix3::zeros();
    let mut it = values.iter();
    for i in 0..3 {
        for j in i..3 {
            let v = *it.next().expect("six entries");
            sigma[(i, j)] = v;
            sigma[(j, i)] = v;
        }
    }
    sigma
}

/// Set of locations hit by one storm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StormPath {
    mask: u32,
}

impl StormPath {
    pub fn from_mask(mask: u32) -> Self {
        Self { mask }
    }

    pub fn from_members(members: &[usize]) -> Result<Self> {
        let mut mask = 0u32;
        for &s in members {
            if s >= 32 {
                return Err(Error::IndexOutOfRange { index: s, len: 32 });
            }
            mask |= 1 << s;
        }
        Ok(Self { mask })
    }

    pub fn from_indicators(indicators: &[bool]) -> Result<Self> {
        let members: Vec<usize> = indicators
            .iter()
            .enumerate()
            .filter_map(|(s, &hit)| hit.then_some(s))
            .collect();
        Self::from_members(&members)
    }

    pub fn mask(&self) -> u32 {
        self.mask
    }

    pub fn contains(&self, s: usize) -> bool {
        s < 32 && self.mask & (1 << s) != 0
    }

    pub fn len(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.mask == 0
    }

    /// Hit locations in ascending index order.
    pub fn members(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len());
        let mut m = self.mask;
        while m != 0 {
            out.push(m.trailing_zeros() as usize);
            m &= m - 1;
        }
        out
    }

    pub fn indicators(&self, n_locations: usize) -> Vec<bool> {
        (0..n_locations).map(|s| self.contains(s)).collect()
    }

    pub fn is_connected(&self, graph: &SpatialGraph) -> bool {
        self.mask >> graph.len().min(31) == 0 && graph.is_connected_set(&self.members())
    }

    /// Location identifiers joined by `;`.
    pub fn label(&self, graph: &SpatialGraph) -> String {
        self.members()
            .into_iter()
            .map(|s| graph.location(s))
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// Hit log-odds of location `s` given every other location's indicator.
pub fn conditional_hit_logit(
    s: usize,
    others: &[bool],
    phase: Phase,
    params: &PathParams,
    graph: &SpatialGraph,
) -> Result<f64> {
    let n = graph.len();
    if s >= n {
        return Err(Error::IndexOutOfRange { index: s, len: n });
    }
    if others.len() != n {
        return Err(Error::InvalidArgument(format!(
            "indicator vector has {} entries, expected {n}",
            others.len()
        )));
    }
    let hit_neighbours = graph.neighbours(s).iter().filter(|&&r| others[r]).count();
    let k = phase.index();
    Ok(params.intercepts[k] + params.effects[k][s] + params.clustering * hit_neighbours as f64)
}

pub(crate) fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let peak = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if !peak.is_finite() {
        return peak;
    }
    peak + values.map(|v| (v - peak).exp()).sum::<f64>().ln()
}

/// Log of the normalising sum over all connected subsets.
pub fn path_log_normalizer(params: &PathParams, phase: Phase, table: &ConnectedSubsetTable) -> f64 {
    log_sum_exp(
        (0..table.len()).map(|j| params.subset_log_weight(table.mask(j), table.internal_edges(j), phase)),
    )
}

/// Log-probability of a path; `Error::InvalidPath` when it lies outside the support.
pub fn path_log_pmf(
    path: &StormPath,
    phase: Phase,
    params: &PathParams,
    table: &ConnectedSubsetTable,
) -> Result<f64> {
    let j = table.position(path.mask()).ok_or(Error::InvalidPath)?;
    Ok(params.subset_log_weight(path.mask(), table.internal_edges(j), phase)
        - path_log_normalizer(params, phase, table))
}

/// Path distribution for one phase, ready for repeated exact sampling.
#[derive(Debug, Clone)]
pub struct PathDistribution<'t> {
    table: &'t ConnectedSubsetTable,
    cumulative: Vec<f64>,
    log_normalizer: f64,
    log_weights: Vec<f64>,
}

impl<'t> PathDistribution<'t> {
    pub fn new(params: &PathParams, phase: Phase, table: &'t ConnectedSubsetTable) -> Self {
        let log_weights: Vec<f64> = (0..table.len())
            .map(|j| params.subset_log_weight(table.mask(j), table.internal_edges(j), phase))
            .collect();
        let log_normalizer = log_sum_exp(log_weights.iter().copied());
        let mut acc = 0.0;
        let cumulative = log_weights
            .iter()
            .map(|lw| {
                acc += (lw - log_normalizer).exp();
                acc
            })
            .collect();
        Self {
            table,
            cumulative,
            log_normalizer,
            log_weights,
        }
    }

    pub fn log_normalizer(&self) -> f64 {
        self.log_normalizer
    }

    pub fn probability(&self, j: usize) -> f64 {
        (self.log_weights[j] - self.log_normalizer).exp()
    }

    /// Inverse-CDF draw over the table.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> StormPath {
        let total = *self.cumulative.last().expect("nonempty table");
        let u = rng.random::<f64>() * total;
        let j = self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1);
        StormPath::from_mask(self.table.mask(j))
    }

    /// Marginal probability that each location is hit.
    pub fn marginal_hit_rates(&self) -> Vec<f64> {
        let mut rates = vec![0.0; self.table.n_locations()];
        for (s, rate) in rates.iter_mut().enumerate() {
            *rate = self
                .table
                .containing(s)
                .iter()
                .map(|&j| self.probability(j as usize))
                .sum();
        }
        rates
    }
}

/// One exact draw from the path distribution.
pub fn sample_path<R: Rng + ?Sized>(
    phase: Phase,
    params: &PathParams,
    table: &ConnectedSubsetTable,
    rng: &mut R,
) -> StormPath {
    PathDistribution::new(params, phase, table).sample(rng)
}
