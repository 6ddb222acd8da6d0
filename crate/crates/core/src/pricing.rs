//! Empirical risk measures and regional premium allocation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predict::SimulatedYear;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "parameter")]
pub enum RiskMeasure {
    /// `mean + eta * sqrt(E[(X - mean)_+^2])`.
    SemiVariance(f64),
    /// Order statistic at `ceil(alpha * n)`.
    ValueAtRisk(f64),
    /// Mean of losses strictly above the value at risk.
    TailValueAtRisk(f64),
}

impl RiskMeasure {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RiskMeasure::SemiVariance(eta) if !(eta >= 0.0 && eta.is_finite()) => {
                Err(Error::InvalidArgument(format!("SV loading {eta} must be nonnegative")))
            }
            RiskMeasure::ValueAtRisk(a) | RiskMeasure::TailValueAtRisk(a) if !(a > 0.0 && a < 1.0) => {
                Err(Error::InvalidArgument(format!("risk level {a} outside (0, 1)")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for RiskMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RiskMeasure::SemiVariance(v) => write!(f, "SV({v})"),
            RiskMeasure::ValueAtRisk(v) => write!(f, "VaR({v})"),
            RiskMeasure::TailValueAtRisk(v) => write!(f, "TVaR({v})"),
        }
    }
}

impl FromStr for RiskMeasure {
    type Err = Error;

    /// Parses `SV(0.25)`, `VaR(0.95)`, `TVaR(0.95)` or the `kind:value` form.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("cannot parse risk measure {s:?}"));
        let t = s.trim();
        let (kind, value) = if let Some(open) = t.find('(') {
            let inner = t[open + 1..].strip_suffix(')').ok_or_else(bad)?;
            (&t[..open], inner)
        } else {
            t.split_once(':').ok_or_else(bad)?
        };
        let v: f64 = value.trim().parse().map_err(|_| bad())?;
        let m = match kind.trim().to_ascii_lowercase().as_str() {
            "sv" => RiskMeasure::SemiVariance(v),
            "var" => RiskMeasure::ValueAtRisk(v),
            "tvar" => RiskMeasure::TailValueAtRisk(v),
            _ => return Err(bad()),
        };
        m.validate()?;
        Ok(m)
    }
}

fn sorted(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::Insufficient("risk measure of an empty sample".into()));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("loss sample".into()));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

fn order_statistic(sorted: &[f64], level: f64) -> f64 {
    let n = sorted.len();
    let rank = ((level * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    sorted[rank - 1]
}

pub fn risk_measure(samples: &[f64], measure: RiskMeasure) -> Result<f64> {
    measure.validate()?;
    let s = sorted(samples)?;
    let n = s.len() as f64;
    Ok(match measure {
        RiskMeasure::SemiVariance(eta) => {
            let mean = s.iter().sum::<f64>() / n;
            let upper = s.iter().map(|x| (x - mean).max(0.0).powi(2)).sum::<f64>() / n;
            mean + eta * upper.sqrt()
        }
        RiskMeasure::ValueAtRisk(alpha) => order_statistic(&s, alpha),
        RiskMeasure::TailValueAtRisk(q) => {
            let var = order_statistic(&s, q);
            let tail: Vec<f64> = s.iter().copied().filter(|&x| x > var).collect();
            if tail.is_empty() {
                s[s.len() - 1]
            } else {
                tail.iter().sum::<f64>() / tail.len() as f64
            }
        }
    })
}

/// Premiums per location and measure with their column allocation shares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PremiumTable {
    pub locations: Vec<String>,
    pub measures: Vec<RiskMeasure>,
    /// `premiums[s][m]`.
    pub premiums: Vec<Vec<f64>>,
    /// `proportions[s][m]`; each column sums to one unless all premiums are zero.
    pub proportions: Vec<Vec<f64>>,
}

impl PremiumTable {
    /// Comma-separated rows: location, then premium and allocation percent
    /// per measure. Premiums are scaled by `unit` (e.g. 1e9 for billions).
    pub fn to_text(&self, unit: f64) -> String {
        let mut out = String::from("location");
        for m in &self.measures {
            out.push_str(&format!(",{m},{m}_pct"));
        }
        out.push('\n');
        for (s, loc) in self.locations.iter().enumerate() {
            out.push_str(loc);
            for m in 0..self.measures.len() {
                out.push_str(&format!(
                    ",{:.4},{:.1}",
                    self.premiums[s][m] / unit,
                    100.0 * self.proportions[s][m]
                ));
            }
            out.push('\n');
        }
        out
    }
}

pub fn premium_table(years: &[SimulatedYear], measures: &[RiskMeasure], locations: &[String]) -> Result<PremiumTable> {
    premium_table_with(years, measures, locations, |x| x)
}

/// As [`premium_table`], applying `transform` to each annual location loss
/// first (deductibles, limits and the like).
pub fn premium_table_with<F>(
    years: &[SimulatedYear],
    measures: &[RiskMeasure],
    locations: &[String],
    transform: F,
) -> Result<PremiumTable>
where
    F: Fn(f64) -> f64,
{
    if years.is_empty() {
        return Err(Error::Insufficient("premium table needs at least one simulated year".into()));
    }
    let n = locations.len();
    if years.iter().any(|y| y.regional_totals.len() != n) {
        return Err(Error::InvalidArgument("simulated years do not match the location list".into()));
    }
    let mut premiums = vec![vec![0.0; measures.len()]; n];
    for (s, row) in premiums.iter_mut().enumerate() {
        let losses: Vec<f64> = years.iter().map(|y| transform(y.regional_totals[s])).collect();
        for (m, &measure) in measures.iter().enumerate() {
            row[m] = risk_measure(&losses, measure)?;
        }
    }
    let totals: Vec<f64> = (0..measures.len()).map(|m| premiums.iter().map(|r| r[m]).sum()).collect();
    let proportions = premiums
        .iter()
        .map(|row| {
            row.iter()
                .zip(&totals)
                .map(|(p, t)| if *t > 0.0 { p / t } else { 0.0 })
                .collect()
        })
        .collect();
    Ok(PremiumTable {
        locations: locations.to_vec(),
        measures: measures.to_vec(),
        premiums,
        proportions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::count::Phase;
    use proptest::prelude::*;

    fn one_to_hundred() -> Vec<f64> {
        (1..=100).map(f64::from).collect()
    }

    #[test]
    fn order_statistic_arithmetic() {
        let x = one_to_hundred();
        assert_eq!(risk_measure(&x, RiskMeasure::ValueAtRisk(0.95)).unwrap(), 95.0);
        assert_eq!(risk_measure(&x, RiskMeasure::TailValueAtRisk(0.95)).unwrap(), 98.0);
        let sv = risk_measure(&x, RiskMeasure::SemiVariance(0.25)).unwrap();
        assert!((sv - (50.5 + 0.25 * 416.625f64.sqrt())).abs() < 1e-12);
        assert!((sv - 55.60).abs() < 0.01);
        assert_eq!(risk_measure(&x, RiskMeasure::SemiVariance(0.0)).unwrap(), 50.5);
    }

    #[test]
    fn degenerate_samples() {
        let zeros = vec![0.0; 20];
        let constant = vec![7.0; 20];
        for m in [
            RiskMeasure::SemiVariance(0.5),
            RiskMeasure::ValueAtRisk(0.9),
            RiskMeasure::TailValueAtRisk(0.9),
        ] {
            assert_eq!(risk_measure(&zeros, m).unwrap(), 0.0);
            assert_eq!(risk_measure(&constant, m).unwrap(), 7.0);
        }
        assert!(risk_measure(&[], RiskMeasure::ValueAtRisk(0.5)).is_err());
        assert!(risk_measure(&[1.0], RiskMeasure::ValueAtRisk(1.0)).is_err());
    }

    #[test]
    fn parse_measures() {
        assert_eq!("SV(0.25)".parse::<RiskMeasure>().unwrap(), RiskMeasure::SemiVariance(0.25));
        assert_eq!("var:0.95".parse::<RiskMeasure>().unwrap(), RiskMeasure::ValueAtRisk(0.95));
        assert_eq!("TVaR(0.9)".parse::<RiskMeasure>().unwrap(), RiskMeasure::TailValueAtRisk(0.9));
        assert!("VaR(2)".parse::<RiskMeasure>().is_err());
        assert!("mean".parse::<RiskMeasure>().is_err());
    }

    #[test]
    fn allocation_columns_sum_to_one() {
        let years: Vec<SimulatedYear> = (0..50)
            .map(|i| SimulatedYear {
                phase: Phase::Neutral,
                storms: Vec::new(),
                regional_totals: vec![i as f64, (i % 7) as f64 * 3.0, 1.0],
            })
            .collect();
        let locs: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let measures = [
            RiskMeasure::SemiVariance(0.25),
            RiskMeasure::ValueAtRisk(0.95),
            RiskMeasure::TailValueAtRisk(0.95),
        ];
        let t = premium_table(&years, &measures, &locs).unwrap();
        for m in 0..3 {
            let sum: f64 = t.proportions.iter().map(|r| r[m]).sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert_eq!(t.premiums[2][m], 1.0);
        }
        let capped = premium_table_with(&years, &measures, &locs, |x| x.min(10.0)).unwrap();
        assert_eq!(capped.premiums[0][1], 10.0);
        assert!(t.to_text(1.0).starts_with("location,SV(0.25),SV(0.25)_pct,"));
    }

    proptest! {
        #[test]
        fn tail_dominates_quantile(x in prop::collection::vec(0.0f64..1e6, 1..300), q in 0.01f64..0.99) {
            let var = risk_measure(&x, RiskMeasure::ValueAtRisk(q)).unwrap();
            let tvar = risk_measure(&x, RiskMeasure::TailValueAtRisk(q)).unwrap();
            prop_assert!(tvar >= var && var >= 0.0);
        }
    }
}
