//! Storm counts as a non-homogeneous Poisson process whose log-intensity is a
//! phase-specific intercept plus a truncated Fourier series over the season.
//!
//! Time is measured in decimal years. Only the fractional part `tau` enters the
//! intensity, which is zero outside the season window `(4/12, 11/12]`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::simpson;

pub const SEASON_START: f64 = 4.0 / 12.0;
pub const SEASON_END: f64 = 11.0 / 12.0;
pub const SEASON_LENGTH: f64 = 7.0 / 12.0;
/// Composite Simpson subintervals used for the season integral.
pub const DEFAULT_SIMPSON_INTERVALS: usize = 512;

/// ENSO phase of a year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    ElNino,
    Neutral,
    LaNina,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::ElNino, Phase::Neutral, Phase::LaNina];

    /// Row index used by every phase-indexed parameter block.
    pub fn index(self) -> usize {
        match self {
            Phase::ElNino => 0,
            Phase::Neutral => 1,
            Phase::LaNina => 2,
        }
    }

    pub fn from_index(k: usize) -> Option<Phase> {
        Phase::ALL.get(k).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            Phase::ElNino => "EN",
            Phase::Neutral => "NE",
            Phase::LaNina => "LN",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "EN" | "1" => Ok(Phase::ElNino),
            "NE" | "2" => Ok(Phase::Neutral),
            "LN" | "3" => Ok(Phase::LaNina),
            other => Err(Error::InvalidArgument(format!("unknown ENSO phase `{other}`"))),
        }
    }
}

/// Year to ENSO phase mapping.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsoCalendar {
    phases: BTreeMap<i32, Phase>,
}

impl EnsoCalendar {
    pub fn new(entries: impl IntoIterator<Item = (i32, Phase)>) -> Self {
        Self {
            phases: entries.into_iter().collect(),
        }
    }

    /// Calendar in which every year of `years` has the same phase.
    pub fn constant(years: std::ops::RangeInclusive<i32>, phase: Phase) -> Self {
        Self::new(years.map(|y| (y, phase)))
    }

    /// Parses `year phase` rows separated by whitespace or commas.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut phases = BTreeMap::new();
        let mut first = true;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|f| !f.is_empty())
                .collect();
            let header = std::mem::replace(&mut first, false);
            let err = |message: String| Error::Parse {
                file: source.to_string(),
                line: lineno + 1,
                message,
            };
            if fields.len() != 2 {
                if header && fields.first().is_some_and(|f| f.parse::<i32>().is_err()) {
                    continue;
                }
                return Err(err(format!("expected `year phase`, got `{line}`")));
            }
            let year: i32 = match fields[0].parse() {
                Ok(y) => y,
                Err(_) if header => continue,
                Err(_) => return Err(err(format!("bad year `{}`", fields[0]))),
            };
            let phase: Phase = fields[1].parse().map_err(|e: Error| err(e.to_string()))?;
            if phases.insert(year, phase).is_some() {
                return Err(err(format!("year {year} listed twice")));
            }
        }
        Ok(Self { phases })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&std::fs::read_to_string(path)?, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("year phase\n");
        for (year, phase) in &self.phases {
            out.push_str(&format!("{year} {phase}\n"));
        }
        out
    }

    pub fn phase(&self, year: i32) -> Result<Phase> {
        self.phases.get(&year).copied().ok_or(Error::UncoveredYear(year))
    }

    pub fn years(&self) -> impl Iterator<Item = i32> + '_ {
        self.phases.keys().copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (i32, Phase)> + '_ {
        self.phases.iter().map(|(&y, &p)| (y, p))
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    /// Number of calendar years in each phase.
    pub fn phase_year_counts(&self) -> [usize; 3] {
        let mut counts = [0; 3];
        for phase in self.phases.values() {
            counts[phase.index()] += 1;
        }
        counts
    }
}

/// Calendar year and within-year fraction of a decimal-year time.
pub fn split_time(t: f64) -> (i32, f64) {
    let year = t.floor();
    (year as i32, t - year)
}

/// Whether a within-year fraction lies inside `(4/12, 11/12]`.
pub fn in_season(tau: f64) -> bool {
    tau > SEASON_START && tau <= SEASON_END
}

/// Phase of the seasonal waves at within-year fraction `tau` for frequency `p`.
pub fn season_angle(tau: f64, p: usize) -> f64 {
    2.0 * PI * p as f64 * (tau - SEASON_START) / SEASON_LENGTH
}

/// Intercepts plus sine/cosine amplitudes, one row per phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountParams {
    pub intercepts: [f64; 3],
    /// `sine[k][p]` multiplies `sin(season_angle(tau, p + 1))` in phase `k`.
    pub sine: [Vec<f64>; 3],
    pub cosine: [Vec<f64>; 3],
}

impl CountParams {
    pub fn new(intercepts: [f64; 3], sine: [Vec<f64>; 3], cosine: [Vec<f64>; 3]) -> Result<Self> {
        let p = sine[0].len();
        if p == 0 {
            return Err(Error::InvalidArgument("at least one frequency is required".into()));
        }
        if sine.iter().chain(cosine.iter()).any(|row| row.len() != p) {
            return Err(Error::InvalidArgument(
                "sine and cosine rows must all have P entries".into(),
            ));
        }
        let params = Self {
            intercepts,
            sine,
            cosine,
        };
        if !params.to_vec().iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("count parameters".into()));
        }
        Ok(params)
    }

    /// Constant intensity `exp(intercept)` in every phase.
    pub fn flat(intercepts: [f64; 3], n_frequencies: usize) -> Self {
        let zeros = || vec![0.0; n_frequencies];
        Self {
            intercepts,
            sine: [zeros(), zeros(), zeros()],
            cosine: [zeros(), zeros(), zeros()],
        }
    }

    pub fn n_frequencies(&self) -> usize {
        self.sine[0].len()
    }

    /// Log-intensity in phase `k` at within-year fraction `tau`, or `None`
    /// outside the season.
    pub fn log_intensity_in_phase(&self, tau: f64, phase: Phase) -> Option<f64> {
        in_season(tau).then(|| self.log_intensity_formula(tau, phase))
    }

    /// The season formula without the window restriction.
    pub fn log_intensity_formula(&self, tau: f64, phase: Phase) -> f64 {
        let k = phase.index();
        let mut value = self.intercepts[k];
        for p in 0..self.n_frequencies() {
            let angle = season_angle(tau, p + 1);
            value += self.sine[k][p] * angle.sin() + self.cosine[k][p] * angle.cos();
        }
        value
    }

    pub fn intensity_in_phase(&self, tau: f64, phase: Phase) -> f64 {
        self.log_intensity_in_phase(tau, phase).map_or(0.0, f64::exp)
    }

    /// Expected number of storms in one season of the given phase.
    pub fn season_integral(&self, phase: Phase, intervals: usize) -> f64 {
        simpson(
            |tau| self.log_intensity_formula(tau, phase).exp(),
            SEASON_START,
            SEASON_END,
            intervals,
        )
    }

    /// Upper bound on the intensity over the season, used as the thinning envelope.
    pub fn envelope(&self, phase: Phase) -> f64 {
        let k = phase.index();
        let amplitude: f64 = self.sine[k]
            .iter()
            .chain(self.cosine[k].iter())
            .map(|c| c.abs())
            .sum();
        (self.intercepts[k] + amplitude).exp()
    }

    /// Samples within-year storm fractions for one season of `phase` by
    /// Lewis-Shedler thinning. Returned values are sorted.
    pub fn simulate_season<R: Rng + ?Sized>(&self, phase: Phase, rng: &mut R) -> Vec<f64> {
        let lambda_max = self.envelope(phase);
        let mean = lambda_max * SEASON_LENGTH;
        if !(mean.is_finite() && mean > 0.0) {
            return Vec::new();
        }
        let n = Poisson::new(mean).map_or(0.0, |d| d.sample(rng)) as usize;
        let mut out = Vec::new();
        for _ in 0..n {
            // (0, 1] keeps the draw inside the half-open window.
            let tau = SEASON_END - rng.random::<f64>() * SEASON_LENGTH;
            let accept = self.intensity_in_phase(tau, phase) / lambda_max;
            if rng.random::<f64>() < accept {
                out.push(tau);
            }
        }
        out.sort_by(f64::total_cmp);
        out
    }

    pub fn parameter_names(n_frequencies: usize) -> Vec<String> {
        let mut names: Vec<String> = Phase::ALL.iter().map(|p| format!("beta0_{p}")).collect();
        for p in 1..=n_frequencies {
            for phase in Phase::ALL {
                names.push(format!("u{p}_{phase}"));
            }
            for phase in Phase::ALL {
                names.push(format!("v{p}_{phase}"));
            }
        }
        names
    }

    /// Flat layout matching [`CountParams::parameter_names`].
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = self.intercepts.to_vec();
        for p in 0..self.n_frequencies() {
            out.extend((0..3).map(|k| self.sine[k][p]));
            out.extend((0..3).map(|k| self.cosine[k][p]));
        }
        out
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        if values.len() < 9 || !(values.len() - 3).is_multiple_of(6) {
            return Err(Error::InvalidArgument(format!(
                "{} values do not form a count parameter vector",
                values.len()
            )));
        }
        let p = (values.len() - 3) / 6;
        let mut params = Self::flat([values[0], values[1], values[2]], p);
        for f in 0..p {
            let base = 3 + 6 * f;
            for k in 0..3 {
                params.sine[k][f] = values[base + k];
                params.cosine[k][f] = values[base + 3 + k];
            }
        }
        Ok(params)
    }
}

/// Intensity at decimal-year time `t`, with the phase read from the calendar.
pub fn intensity(t: f64, params: &CountParams, calendar: &EnsoCalendar) -> Result<f64> {
    let (year, tau) = split_time(t);
    let phase = calendar.phase(year)?;
    Ok(params.intensity_in_phase(tau, phase))
}

/// Expected storm count in `year` by composite Simpson on the season window.
pub fn integrated_intensity(year: i32, params: &CountParams, calendar: &EnsoCalendar) -> Result<f64> {
    integrated_intensity_with(year, params, calendar, DEFAULT_SIMPSON_INTERVALS)
}

pub fn integrated_intensity_with(
    year: i32,
    params: &CountParams,
    calendar: &EnsoCalendar,
    intervals: usize,
) -> Result<f64> {
    let phase = calendar.phase(year)?;
    Ok(params.season_integral(phase, intervals))
}

/// Poisson-process log-likelihood of the storm times observed over `years`.
/// Returns `-inf` when a storm falls where the intensity is zero.
pub fn count_log_likelihood(
    storm_times: &[f64],
    years: &[i32],
    params: &CountParams,
    calendar: &EnsoCalendar,
) -> Result<f64> {
    let mut ll = 0.0;
    for &t in storm_times {
        let (year, tau) = split_time(t);
        let phase = calendar.phase(year)?;
        match params.log_intensity_in_phase(tau, phase) {
            Some(v) => ll += v,
            None => return Ok(f64::NEG_INFINITY),
        }
    }
    let mut season = [None; 3];
    for &year in years {
        let phase = calendar.phase(year)?;
        let integral =
            *season[phase.index()].get_or_insert_with(|| params.season_integral(phase, DEFAULT_SIMPSON_INTERVALS));
        ll -= integral;
    }
    Ok(ll)
}

/// Storm times for one calendar year, as decimal years.
pub fn simulate_storm_times<R: Rng + ?Sized>(
    year: i32,
    params: &CountParams,
    calendar: &EnsoCalendar,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let phase = calendar.phase(year)?;
    Ok(params
        .simulate_season(phase, rng)
        .into_iter()
        .map(|tau| year as f64 + tau)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn calendar() -> EnsoCalendar {
        EnsoCalendar::new([(2000, Phase::ElNino), (2001, Phase::Neutral), (2002, Phase::LaNina)])
    }

    #[test]
    fn zero_before_may() {
        let params = CountParams::flat([0.0; 3], 1);
        assert_eq!(intensity(2000.2, &params, &calendar()).unwrap(), 0.0);
        assert_eq!(intensity(2000.95, &params, &calendar()).unwrap(), 0.0);
    }

    #[test]
    fn constant_intensity() {
        let params = CountParams::flat([2f64.ln(); 3], 2);
        let v = intensity(2001.0 + 7.0 / 12.0, &params, &calendar()).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn uncovered_year() {
        let params = CountParams::flat([0.0; 3], 1);
        assert!(matches!(
            intensity(1990.5, &params, &calendar()),
            Err(Error::UncoveredYear(1990))
        ));
    }

    #[test]
    fn closed_form_integrals() {
        let params = CountParams::flat([(24.0f64 / 7.0).ln(); 3], 1);
        let v = integrated_intensity(2000, &params, &calendar()).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        let params = CountParams::flat([0.0; 3], 1);
        let v = integrated_intensity(2000, &params, &calendar()).unwrap();
        assert!((v - 7.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn likelihood_trivial_cases() {
        let params = CountParams::flat([0.0; 3], 1);
        let cal = calendar();
        let ll = count_log_likelihood(&[], &[2000], &params, &cal).unwrap();
        assert!((ll + 7.0 / 12.0).abs() < 1e-12);
        let ll = count_log_likelihood(&[2000.0 + 7.0 / 12.0], &[2000], &params, &cal).unwrap();
        assert!((ll + 7.0 / 12.0).abs() < 1e-12);
        let ll = count_log_likelihood(&[2000.1], &[2000], &params, &cal).unwrap();
        assert_eq!(ll, f64::NEG_INFINITY);
    }

    #[test]
    fn periodic_under_constant_calendar() {
        let params = CountParams::new(
            [0.3, -0.2, 0.1],
            [vec![0.4, -0.3], vec![0.1, 0.2], vec![-0.5, 0.0]],
            [vec![-1.0, 0.5], vec![0.7, -0.2], vec![0.3, 0.3]],
        )
        .unwrap();
        let cal = EnsoCalendar::constant(1990..=2010, Phase::Neutral);
        for tau in [0.35, 0.5, 0.77, 0.9] {
            let a = intensity(1995.0 + tau, &params, &cal).unwrap();
            let b = intensity(2003.0 + tau, &params, &cal).unwrap();
            assert!((a - b).abs() <= 1e-9 * a.abs());
        }
    }

    #[test]
    fn vector_layout_round_trips() {
        let params = CountParams::new(
            [1.0, 2.0, 3.0],
            [vec![4.0, 5.0], vec![6.0, 7.0], vec![8.0, 9.0]],
            [vec![10.0, 11.0], vec![12.0, 13.0], vec![14.0, 15.0]],
        )
        .unwrap();
        let v = params.to_vec();
        assert_eq!(v.len(), CountParams::parameter_names(2).len());
        assert_eq!(CountParams::from_slice(&v).unwrap(), params);
    }

    #[test]
    fn simulated_fractions_stay_in_window() {
        let params = CountParams::new(
            [1.0; 3],
            [vec![0.5], vec![-0.5], vec![0.0]],
            [vec![0.5], vec![0.5], vec![-0.5]],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let times = simulate_storm_times(2001, &params, &calendar(), &mut rng).unwrap();
            assert!(times.windows(2).all(|w| w[0] <= w[1]));
            assert!(times.iter().all(|&t| in_season(t - 2001.0)));
        }
        let silent = CountParams::flat([-20.0; 3], 1);
        assert!(simulate_storm_times(2001, &silent, &calendar(), &mut rng)
            .unwrap()
            .is_empty());
        let none = CountParams::flat([f64::NEG_INFINITY; 3], 1);
        assert!(none.simulate_season(Phase::ElNino, &mut rng).is_empty());
    }

    #[test]
    fn calendar_parsing() {
        let cal = EnsoCalendar::parse("year,phase\n1950,LN\n1951 EN\n1952 NE\n", "x").unwrap();
        assert_eq!(cal.len(), 3);
        assert_eq!(cal.phase(1951).unwrap(), Phase::ElNino);
        assert_eq!(cal.phase_year_counts(), [1, 1, 1]);
        assert!(EnsoCalendar::parse("1950 XX\n", "x").is_err());
        assert_eq!(EnsoCalendar::parse(&cal.to_text(), "y").unwrap(), cal);
    }
}
