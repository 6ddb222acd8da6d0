//! Storm records, dataset loading and validation.
//!
//! Storm file layout, one storm per line after a header:
//!
//! ```text
//! storm_id,decimal_year_time,path,total_damage_usd,location_damages
//! 1954-03,1954.712,NY;CT;MA,1.2e9,
//! ```
//!
//! `path` and the optional `location_damages` are `;`-joined and aligned.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::count::{in_season, split_time, EnsoCalendar, Phase};
use crate::error::{Error, Result};
use crate::graph::SpatialGraph;
use crate::path::StormPath;

pub const STORM_HEADER: &str = "storm_id,decimal_year_time,path,total_damage_usd,location_damages";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StormRecord {
    pub id: String,
    /// Decimal year; the fractional part is the time within the year.
    pub time: f64,
    pub path: StormPath,
    pub total_damage: f64,
    /// Per-location damages in ascending location order, when observed.
    pub location_damages: Option<Vec<f64>>,
}

impl StormRecord {
    pub fn year(&self) -> i32 {
        split_time(self.time).0
    }

    pub fn season_time(&self) -> f64 {
        split_time(self.time).1
    }

    pub fn hit_count(&self) -> usize {
        self.path.len()
    }

    /// Per-location damages when known, including the single-location case.
    pub fn known_damages(&self) -> Option<Vec<f64>> {
        match &self.location_damages {
            Some(d) => Some(d.clone()),
            None if self.hit_count() == 1 => Some(vec![self.total_damage]),
            None => None,
        }
    }

    fn invalid(&self, message: impl Into<String>) -> Error {
        Error::InvalidStorm {
            storm: self.id.clone(),
            message: message.into(),
        }
    }

    /// Checks the record against the graph and calendar.
    pub fn validate(&self, graph: &SpatialGraph, calendar: &EnsoCalendar) -> Result<()> {
        if self.path.is_empty() {
            return Err(self.invalid("path is empty"));
        }
        if !self.path.is_connected(graph) {
            return Err(self.invalid(format!(
                "path {} is not connected on the location graph",
                self.path.label(graph)
            )));
        }
        if calendar.phase(self.year()).is_err() {
            return Err(self.invalid(format!("year {} is not in the ENSO calendar", self.year())));
        }
        if !in_season(self.season_time()) {
            return Err(self.invalid(format!("time {} is outside the storm season", self.time)));
        }
        if !(self.total_damage > 0.0 && self.total_damage.is_finite()) {
            return Err(self.invalid(format!("total damage {} is not positive", self.total_damage)));
        }
        if let Some(d) = &self.location_damages {
            if d.len() != self.hit_count() {
                return Err(self.invalid(format!(
                    "{} location damages for {} hit locations",
                    d.len(),
                    self.hit_count()
                )));
            }
            if d.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(self.invalid("location damages must be positive"));
            }
            let sum: f64 = d.iter().sum();
            if (sum - self.total_damage).abs() > 1e-9 * self.total_damage {
                return Err(self.invalid(format!(
                    "location damages sum to {sum}, total is {}",
                    self.total_damage
                )));
            }
        }
        Ok(())
    }
}

/// Validated storms with their calendar and location graph.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub storms: Vec<StormRecord>,
    pub calendar: EnsoCalendar,
    pub graph: SpatialGraph,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub n_storms: usize,
    pub phase_counts: [usize; 3],
    pub phase_years: [usize; 3],
    pub hit_tallies: Vec<(String, usize)>,
    pub multi_location_storms: usize,
}

impl std::fmt::Display for DatasetSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "storms: {}", self.n_storms)?;
        for phase in Phase::ALL {
            let k = phase.index();
            writeln!(
                f,
                "  {phase}: {} storms in {} years",
                self.phase_counts[k], self.phase_years[k]
            )?;
        }
        writeln!(f, "multi-location storms: {}", self.multi_location_storms)?;
        write!(f, "hits:")?;
        for (id, n) in &self.hit_tallies {
            write!(f, " {id}={n}")?;
        }
        Ok(())
    }
}

impl Dataset {
    pub fn new(storms: Vec<StormRecord>, calendar: EnsoCalendar, graph: SpatialGraph) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for storm in &storms {
            if !seen.insert(storm.id.as_str()) {
                return Err(storm.invalid("duplicate storm identifier"));
            }
            storm.validate(&graph, &calendar)?;
        }
        Ok(Self {
            storms,
            calendar,
            graph,
        })
    }

    pub fn phase_of(&self, storm: &StormRecord) -> Phase {
        self.calendar
            .phase(storm.year())
            .expect("validated storms lie in the calendar")
    }

    pub fn phases(&self) -> Vec<Phase> {
        self.storms.iter().map(|s| self.phase_of(s)).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        self.storms.iter().map(|s| s.time).collect()
    }

    pub fn summary(&self) -> DatasetSummary {
        let mut phase_counts = [0; 3];
        let mut hits = vec![0; self.graph.len()];
        for storm in &self.storms {
            phase_counts[self.phase_of(storm).index()] += 1;
            for s in storm.path.members() {
                hits[s] += 1;
            }
        }
        DatasetSummary {
            n_storms: self.storms.len(),
            phase_counts,
            phase_years: self.calendar.phase_year_counts(),
            hit_tallies: self
                .graph
                .locations()
                .iter()
                .cloned()
                .zip(hits)
                .collect(),
            multi_location_storms: self.storms.iter().filter(|s| s.hit_count() > 1).count(),
        }
    }

    pub fn storms_to_text(&self) -> String {
        storms_to_text(&self.storms, &self.graph)
    }
}

/// Parses a storm file against a graph. Each malformed row is reported with its line.
pub fn parse_storms(text: &str, source: &str, graph: &SpatialGraph) -> Result<Vec<StormRecord>> {
    let mut storms = Vec::new();
    let mut header_seen = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            file: source.to_string(),
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if !header_seen {
            header_seen = true;
            if fields.first().is_some_and(|f| f.eq_ignore_ascii_case("storm_id")) {
                continue;
            }
        }
        if fields.len() < 4 || fields.len() > 5 {
            return Err(parse_err(format!("expected 4 or 5 columns, found {}", fields.len())));
        }
        let id = fields[0].to_string();
        if id.is_empty() {
            return Err(parse_err("empty storm id".into()));
        }
        let time: f64 = fields[1]
            .parse()
            .map_err(|_| parse_err(format!("bad time `{}`", fields[1])))?;
        let mut listed = Vec::new();
        for loc in fields[2].split(';').map(str::trim).filter(|l| !l.is_empty()) {
            let s = graph
                .index_of(loc)
                .ok_or_else(|| parse_err(format!("storm `{id}`: unknown location `{loc}`")))?;
            if listed.contains(&s) {
                return Err(parse_err(format!("storm `{id}`: location `{loc}` listed twice")));
            }
            listed.push(s);
        }
        let path = StormPath::from_members(&listed)?;
        let total_damage: f64 = fields[3]
            .parse()
            .map_err(|_| parse_err(format!("bad total damage `{}`", fields[3])))?;
        let location_damages = match fields.get(4).filter(|f| !f.is_empty()) {
            None => None,
            Some(f) => {
                let values: Vec<f64> = f
                    .split(';')
                    .map(|v| v.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| parse_err(format!("bad location damages `{f}`")))?;
                if values.len() != listed.len() {
                    return Err(parse_err(format!(
                        "storm `{id}`: {} location damages for {} path locations",
                        values.len(),
                        listed.len()
                    )));
                }
                let mut pairs: Vec<(usize, f64)> = listed.iter().copied().zip(values).collect();
                pairs.sort_by_key(|p| p.0);
                Some(pairs.into_iter().map(|p| p.1).collect())
            }
        };
        storms.push(StormRecord {
            id,
            time,
            path,
            total_damage,
            location_damages,
        });
    }
    Ok(storms)
}

pub fn storms_to_text(storms: &[StormRecord], graph: &SpatialGraph) -> String {
    let mut out = String::from(STORM_HEADER);
    out.push('\n');
    for storm in storms {
        let damages = storm
            .location_damages
            .as_ref()
            .map(|d| d.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(";"))
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{:e},{}",
            storm.id,
            storm.time,
            storm.path.label(graph),
            storm.total_damage,
            damages
        );
    }
    out
}

pub fn load_dataset(
    storm_file: impl AsRef<Path>,
    calendar_file: impl AsRef<Path>,
    graph_file: impl AsRef<Path>,
) -> Result<Dataset> {
    let graph = SpatialGraph::load(graph_file)?;
    let calendar = EnsoCalendar::load(calendar_file)?;
    let storm_path = storm_file.as_ref();
    let text = std::fs::read_to_string(storm_path)?;
    let storms = parse_storms(&text, &storm_path.display().to_string(), &graph)?;
    Dataset::new(storms, calendar, graph)
}
