//! Areal locations joined by line-of-sight (LOS) adjacency.
//!
//! Two locations are neighbours when an unobstructed sight line joins them;
//! a storm path is admissible only when it is connected on this graph. The
//! graph also carries the exhaustive table of connected vertex subsets that
//! the path model normalises over.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Largest graph for which connected subsets are enumerated by default.
pub const DEFAULT_ENUMERATION_CAP: usize = 24;

/// Location set with symmetric 0/1 adjacency and its degree vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGraph {
    locations: Vec<String>,
    index: HashMap<String, usize>,
    edges: Vec<(usize, usize)>,
    neighbours: Vec<Vec<usize>>,
}

impl SpatialGraph {
    /// Builds a graph from ordered location identifiers and unordered edges.
    /// Location order is preserved; repeated edges collapse to one.
    pub fn new<L, E, A>(locations: L, edges: E) -> Result<Self>
    where
        L: IntoIterator,
        L::Item: Into<String>,
        E: IntoIterator<Item = (A, A)>,
        A: AsRef<str>,
    {
        let locations: Vec<String> = locations.into_iter().map(Into::into).collect();
        if locations.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let mut index = HashMap::with_capacity(locations.len());
        for (i, id) in locations.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::DuplicateLocation(id.clone()));
            }
        }
        let mut neighbours = vec![Vec::new(); locations.len()];
        let mut pairs = Vec::new();
        for (a, b) in edges {
            let (a, b) = (a.as_ref(), b.as_ref());
            let ia = *index
                .get(a)
                .ok_or_else(|| Error::UnknownLocation(a.to_string()))?;
            let ib = *index
                .get(b)
                .ok_or_else(|| Error::UnknownLocation(b.to_string()))?;
            if ia == ib {
                return Err(Error::SelfLoop(a.to_string()));
            }
            let key = (ia.min(ib), ia.max(ib));
            if !pairs.contains(&key) {
                pairs.push(key);
                neighbours[ia].push(ib);
                neighbours[ib].push(ia);
            }
        }
        for list in &mut neighbours {
            list.sort_unstable();
        }
        Ok(Self {
            locations,
            index,
            edges: pairs,
            neighbours,
        })
    }

    /// Parses the plain-text graph format: one location identifier per line,
    /// then one edge per line as `A B`. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut locations = Vec::new();
        let mut edges = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields.as_slice() {
                [id] => {
                    if !edges.is_empty() {
                        return Err(Error::Parse {
                            file: source.to_string(),
                            line: lineno + 1,
                            message: "location listed after the first edge".into(),
                        });
                    }
                    locations.push(id.to_string());
                }
                [a, b] => edges.push((a.to_string(), b.to_string())),
                _ => {
                    return Err(Error::Parse {
                        file: source.to_string(),
                        line: lineno + 1,
                        message: format!("expected `ID` or `A B`, got `{line}`"),
                    })
                }
            }
        }
        Self::new(locations, edges)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Serialises back to the plain-text format accepted by [`SpatialGraph::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for id in &self.locations {
            out.push_str(id);
            out.push('\n');
        }
        for &(a, b) in &self.edges {
            out.push_str(&format!("{} {}\n", self.locations[a], self.locations[b]));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn locations(&self) -> &[String] {
        &self.locations
    }

    pub fn location(&self, index: usize) -> &str {
        &self.locations[index]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbours(&self, s: usize) -> &[usize] {
        &self.neighbours[s]
    }

    pub fn degree(&self, s: usize) -> usize {
        self.neighbours[s].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbours.iter().map(Vec::len).collect()
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.neighbours[a].binary_search(&b).is_ok()
    }

    /// Dense adjacency matrix `W`.
    pub fn adjacency_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut w = DMatrix::zeros(n, n);
        for &(a, b) in &self.edges {
            w[(a, b)] = 1.0;
            w[(b, a)] = 1.0;
        }
        w
    }

    /// Dense `D - rho W`; `rho = 1` gives the graph Laplacian.
    pub fn precision_matrix(&self, rho: f64) -> DMatrix<f64> {
        let mut q = self.adjacency_matrix() * (-rho);
        for s in 0..self.len() {
            q[(s, s)] = self.degree(s) as f64;
        }
        q
    }

    /// Component label per location.
    pub fn components(&self) -> Vec<usize> {
        let n = self.len();
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            label[start] = next;
            while let Some(v) = stack.pop() {
                for &u in &self.neighbours[v] {
                    if label[u] == usize::MAX {
                        label[u] = next;
                        stack.push(u);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn n_components(&self) -> usize {
        self.components().into_iter().max().map_or(0, |m| m + 1)
    }

    /// `rank(D - W)`, which is `S` minus the number of connected components.
    pub fn laplacian_rank(&self) -> usize {
        self.len() - self.n_components()
    }

    /// Whether the given location set is nonempty and connected on the graph.
    pub fn is_connected_set(&self, members: &[usize]) -> bool {
        if members.is_empty() {
            return false;
        }
        let n = self.len();
        let mut inside = vec![false; n];
        for &m in members {
            if m >= n {
                return false;
            }
            inside[m] = true;
        }
        let target = inside.iter().filter(|&&b| b).count();
        let mut seen = vec![false; n];
        let mut stack = vec![members[0]];
        seen[members[0]] = true;
        let mut reached = 1;
        while let Some(v) = stack.pop() {
            for &u in &self.neighbours[v] {
                if inside[u] && !seen[u] {
                    seen[u] = true;
                    reached += 1;
                    stack.push(u);
                }
            }
        }
        reached == target
    }

    /// Extreme eigenvalues `(min, max)` of `D^{-1/2} W D^{-1/2}`.
    pub fn scaled_adjacency_spectrum(&self) -> Result<(f64, f64)> {
        let degrees = self.degrees();
        if let Some(s) = degrees.iter().position(|&d| d == 0) {
            return Err(Error::InvalidArgument(format!(
                "location `{}` has no neighbours; D^(-1/2) is undefined",
                self.locations[s]
            )));
        }
        let n = self.len();
        let mut m = self.adjacency_matrix();
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] /= (degrees[i] as f64 * degrees[j] as f64).sqrt();
            }
        }
        let eig = m.symmetric_eigenvalues();
        let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok((lo, hi))
    }

    /// Open interval `(1/lambda_min, 1/lambda_max)` of admissible propriety parameters.
    pub fn propriety_interval(&self) -> Result<(f64, f64)> {
        let (lo, hi) = self.scaled_adjacency_spectrum()?;
        Ok((1.0 / lo, 1.0 / hi))
    }

    fn neighbour_masks(&self) -> Vec<u32> {
        self.neighbours
            .iter()
            .map(|list| list.iter().fold(0u32, |m, &u| m | (1 << u)))
            .collect()
    }
}

/// Every nonempty connected vertex subset of a graph, in ascending bitmask order.
#[derive(Debug, Clone)]
pub struct ConnectedSubsetTable {
    n_locations: usize,
    masks: Vec<u32>,
    sizes: Vec<u32>,
    internal_edges: Vec<u32>,
    lookup: HashMap<u32, usize>,
    containing: Vec<Vec<u32>>,
}

impl ConnectedSubsetTable {
    pub fn build(graph: &SpatialGraph) -> Result<Self> {
        Self::build_with_cap(graph, DEFAULT_ENUMERATION_CAP)
    }

    pub fn build_with_cap(graph: &SpatialGraph, cap: usize) -> Result<Self> {
        let n = graph.len();
        if n > cap.min(31) {
            return Err(Error::EnumerationCap { size: n, cap });
        }
        let nb = graph.neighbour_masks();
        let mut masks = Vec::new();
        let mut internal_edges = Vec::new();
        for mask in 1u32..(1u32 << n) {
            if let Some(e) = connected_internal_edges(mask, &nb) {
                masks.push(mask);
                internal_edges.push(e);
            }
        }
        let sizes = masks.iter().map(|m| m.count_ones()).collect();
        let lookup = masks.iter().enumerate().map(|(j, &m)| (m, j)).collect();
        let mut containing = vec![Vec::new(); n];
        for (j, &m) in masks.iter().enumerate() {
            for (s, list) in containing.iter_mut().enumerate() {
                if m & (1 << s) != 0 {
                    list.push(j as u32);
                }
            }
        }
        Ok(Self {
            n_locations: n,
            masks,
            sizes,
            internal_edges,
            lookup,
            containing,
        })
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn n_locations(&self) -> usize {
        self.n_locations
    }

    pub fn masks(&self) -> &[u32] {
        &self.masks
    }

    pub fn mask(&self, j: usize) -> u32 {
        self.masks[j]
    }

    pub fn size(&self, j: usize) -> u32 {
        self.sizes[j]
    }

    pub fn sizes(&self) -> &[u32] {
        &self.sizes
    }

    pub fn internal_edges(&self, j: usize) -> u32 {
        self.internal_edges[j]
    }

    pub fn internal_edge_counts(&self) -> &[u32] {
        &self.internal_edges
    }

    /// Indicator vector of subset `j`.
    pub fn indicators(&self, j: usize) -> Vec<bool> {
        (0..self.n_locations)
            .map(|s| self.masks[j] & (1 << s) != 0)
            .collect()
    }

    /// Position of a bitmask in the table, if it is a connected subset.
    pub fn position(&self, mask: u32) -> Option<usize> {
        self.lookup.get(&mask).copied()
    }

    /// Indices of subsets containing location `s`.
    pub fn containing(&self, s: usize) -> &[u32] {
        &self.containing[s]
    }
}

fn connected_internal_edges(mask: u32, nb: &[u32]) -> Option<u32> {
    let start = mask & mask.wrapping_neg();
    let mut seen = start;
    let mut frontier = start;
    while frontier != 0 {
        let mut next = 0;
        let mut f = frontier;
        while f != 0 {
            let v = f.trailing_zeros() as usize;
            next |= nb[v];
            f &= f - 1;
        }
        next &= mask & !seen;
        seen |= next;
        frontier = next;
    }
    if seen != mask {
        return None;
    }
    let mut twice = 0;
    let mut m = mask;
    while m != 0 {
        let v = m.trailing_zeros() as usize;
        twice += (nb[v] & mask).count_ones();
        m &= m - 1;
    }
    Some(twice / 2)
}

/// Moran's I with binary weights and its permutation p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoransI {
    pub statistic: f64,
    pub p_value: f64,
}

/// Moran's I of `values` on the graph, with a two-sided permutation p-value
/// measured as distance from the null expectation `-1/(S-1)`. The observed
/// arrangement counts as one of the `n_permutations + 1` arrangements.
pub fn morans_i(
    values: &[f64],
    graph: &SpatialGraph,
    n_permutations: usize,
    rng_seed: u64,
) -> Result<MoransI> {
    let n = graph.len();
    if values.len() != n {
        return Err(Error::InvalidArgument(format!(
            "expected {n} values, got {}",
            values.len()
        )));
    }
    if n < 2 {
        return Err(Error::Insufficient("Moran's I needs at least two locations".into()));
    }
    if graph.edges().is_empty() {
        return Err(Error::InvalidArgument("Moran's I needs at least one edge".into()));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut z: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let ss: f64 = z.iter().map(|v| v * v).sum();
    if ss <= f64::EPSILON * values.iter().map(|v| v * v).sum::<f64>().max(1.0) {
        return Err(Error::InvalidArgument("Moran's I is undefined for constant values".into()));
    }
    let s0 = 2.0 * graph.edges().len() as f64;
    let stat = |z: &[f64]| {
        let cross: f64 = graph.edges().iter().map(|&(a, b)| 2.0 * z[a] * z[b]).sum();
        n as f64 / s0 * cross / ss
    };
    let observed = stat(&z);
    let expected = -1.0 / (n as f64 - 1.0);
    let distance = (observed - expected).abs();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let tolerance = 1e-12 * distance.max(1.0);
    let mut extreme = 1usize;
    for _ in 0..n_permutations {
        z.shuffle(&mut rng);
        if (stat(&z) - expected).abs() >= distance - tolerance {
            extreme += 1;
        }
    }
    Ok(MoransI {
        statistic: observed,
        p_value: extreme as f64 / (n_permutations + 1) as f64,
    })
}
