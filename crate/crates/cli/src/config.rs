use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stormrisk::mcmc::SamplerConfig;
use stormrisk::simstudy::SimStudyConfig;

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataFiles {
    pub storms: PathBuf,
    pub calendar: PathBuf,
    pub graph: PathBuf,
}

impl Default for DataFiles {
    fn default() -> Self {
        Self {
            storms: "data/storms_synthetic.csv".into(),
            calendar: "data/enso_calendar.txt".into(),
            graph: "data/los_graph.txt".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictSettings {
    pub years: usize,
    /// Phase labels (`EN`, `NE`, `LN`).
    pub phases: Vec<String>,
    pub seed: u64,
}

impl Default for PredictSettings {
    fn default() -> Self {
        Self {
            years: 1500,
            phases: vec!["EN".into(), "NE".into(), "LN".into()],
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriceSettings {
    pub measures: Vec<String>,
    /// Divisor applied to premiums in the written table.
    pub unit: f64,
}

impl Default for PriceSettings {
    fn default() -> Self {
        Self {
            measures: vec!["SV(0.25)".into(), "VaR(0.95)".into(), "TVaR(0.95)".into()],
            unit: 1e9,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSettings {
    pub target: [usize; 3],
    pub first_seed: u64,
    pub max_tries: u64,
}

impl Default for SynthSettings {
    fn default() -> Self {
        Self {
            target: [33, 66, 43],
            first_seed: 1,
            max_tries: 5000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub output_dir: PathBuf,
    pub n_frequencies: usize,
    pub data: DataFiles,
    pub sampler: SamplerConfig,
    pub predict: PredictSettings,
    pub price: PriceSettings,
    pub simstudy: SimStudyConfig,
    pub synth: SynthSettings,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            output_dir: "out".into(),
            n_frequencies: 2,
            data: DataFiles::default(),
            sampler: SamplerConfig::default(),
            predict: PredictSettings::default(),
            price: PriceSettings::default(),
            simstudy: SimStudyConfig::default(),
            synth: SynthSettings::default(),
        }
    }
}

impl Config {
    /// Reads the optional config file, applies `key.path=value` overrides and
    /// resolves relative paths against the config file's directory.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let (mut table, base) = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
                let table: toml::Table = toml::from_str(&text)
                    .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
                (table, path.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (toml::Table::new(), PathBuf::new()),
        };
        for item in overrides {
            apply_override(&mut table, item)?;
        }
        let mut config: Config = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Input(format!("config: {e}")))?;
        for path in [
            &mut config.output_dir,
            &mut config.data.storms,
            &mut config.data.calendar,
            &mut config.data.graph,
        ] {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}

fn apply_override(table: &mut toml::Table, item: &str) -> Result<(), CliError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::Input(format!("override `{item}` is not key=value")))?;
    let value = parse_value(raw.trim());
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, parents) = parts.split_last().expect("split yields one part");
    let mut current = table;
    for part in parents {
        let entry = current
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        current = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Input(format!("override `{item}`: `{part}` is not a table")))?;
    }
    current.insert(last.to_string(), value);
    Ok(())
}

/// A TOML literal if it parses as one, otherwise a bare string.
fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}
