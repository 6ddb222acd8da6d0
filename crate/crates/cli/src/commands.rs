use std::path::{Path, PathBuf};

use stormrisk::count::{EnsoCalendar, Phase};
use stormrisk::data::{load_dataset, Dataset};
use stormrisk::diagnostics::{count_dic, diagnostics_report};
use stormrisk::graph::{ConnectedSubsetTable, SpatialGraph};
use stormrisk::mcmc::{chain_rng, run_chains, Chain, Submodel};
use stormrisk::predict::{posterior_predictive, summary_maps, Posterior, SimulatedYear};
use stormrisk::pricing::{premium_table, RiskMeasure};
use stormrisk::simstudy::{generate_lookalike_dataset, run_simulation_study};

use crate::config::Config;
use crate::{manifest, CliError};

fn data_inputs(config: &Config) -> Vec<PathBuf> {
    vec![
        config.data.storms.clone(),
        config.data.calendar.clone(),
        config.data.graph.clone(),
    ]
}

fn load(config: &Config) -> Result<Dataset, CliError> {
    Ok(load_dataset(&config.data.storms, &config.data.calendar, &config.data.graph)?)
}

fn write_file(path: &Path, text: &str) -> Result<PathBuf, CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(path.to_path_buf())
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn chain_dir(config: &Config) -> PathBuf {
    config.output_dir.join("chains")
}

fn chain_path(config: &Config, submodel: Submodel, index: usize) -> PathBuf {
    chain_dir(config).join(format!("{}_chain{index}.csv", submodel.name()))
}

/// Chain files of one submodel in chain order, with their paths.
fn read_chains(config: &Config, submodel: Submodel) -> Result<(Vec<Chain>, Vec<PathBuf>), CliError> {
    let prefix = format!("{}_chain", submodel.name());
    let mut paths: Vec<PathBuf> = match std::fs::read_dir(chain_dir(config)) {
        Ok(entries) => entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with(&prefix) && n.ends_with(".csv"))
            })
            .collect(),
        Err(_) => Vec::new(),
    };
    paths.sort();
    let mut chains = Vec::with_capacity(paths.len());
    for p in &paths {
        let chain = Chain::parse(&read_file(p)?, &p.display().to_string())?;
        if chain.submodel != submodel {
            return Err(CliError::Input(format!("{} holds a {} chain", p.display(), chain.submodel.name())));
        }
        chains.push(chain);
    }
    chains.sort_by_key(|c| c.chain_index);
    Ok((chains, paths))
}

fn require_chains(config: &Config, submodel: Submodel) -> Result<(Vec<Chain>, Vec<PathBuf>), CliError> {
    let found = read_chains(config, submodel)?;
    if found.0.is_empty() {
        return Err(CliError::Input(format!(
            "no {} chains under {}; run `fit` first",
            submodel.name(),
            chain_dir(config).display()
        )));
    }
    Ok(found)
}

fn phases(config: &Config) -> Result<Vec<Phase>, CliError> {
    config
        .predict
        .phases
        .iter()
        .map(|p| p.parse::<Phase>().map_err(CliError::from))
        .collect()
}

fn submodels(name: &str) -> Result<Vec<Submodel>, CliError> {
    if name == "all" {
        Ok(Submodel::ALL.to_vec())
    } else {
        Ok(vec![name.parse()?])
    }
}

pub fn validate(config: &Config) -> Result<(), CliError> {
    let dataset = load(config)?;
    println!("{}", dataset.summary());
    Ok(())
}

pub fn fit(config: &Config, submodel: &str, args: &[String]) -> Result<(), CliError> {
    let dataset = load(config)?;
    let table = ConnectedSubsetTable::build(&dataset.graph)?;
    let mut outputs = Vec::new();
    for sub in submodels(submodel)? {
        let chains = run_chains(sub, &dataset, &table, config.n_frequencies, &config.sampler)?;
        for chain in &chains {
            outputs.push(write_file(&chain_path(config, sub, chain.chain_index), &chain.to_text())?);
        }
        let report = diagnostics_report(&chains)?;
        let bgr = report.max_bgr().map_or("NA".into(), |b| format!("{b:.4}"));
        let acc = report
            .acceptance_range()
            .map_or("NA".into(), |(lo, hi)| format!("[{lo:.3}, {hi:.3}]"));
        println!(
            "{}: {} chains x {} draws; max BGR {bgr}; acceptance {acc}",
            sub.name(),
            chains.len(),
            report.draws_per_chain
        );
    }
    manifest::write(config, "fit", args, config.sampler.seed, &data_inputs(config), &outputs)?;
    Ok(())
}

pub fn diagnose(config: &Config, args: &[String]) -> Result<(), CliError> {
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    for sub in Submodel::ALL {
        let (chains, paths) = read_chains(config, sub)?;
        if chains.is_empty() {
            continue;
        }
        inputs.extend(paths);
        let report = diagnostics_report(&chains)?;
        let mut text = report.to_text();
        if sub == Submodel::Count {
            let dataset = load(config)?;
            let d = count_dic(&dataset, &chains, config.sampler.simpson_intervals)?;
            text.push_str(&format!(
                "DIC {:.3} (mean deviance {:.3}, pD {:.3})\n",
                d.dic, d.mean_deviance, d.effective_parameters
            ));
            inputs.extend(data_inputs(config));
        }
        print!("{text}");
        outputs.push(write_file(
            &config.output_dir.join(format!("diagnostics_{}.txt", sub.name())),
            &text,
        )?);
    }
    if outputs.is_empty() {
        return Err(CliError::Input(format!(
            "no chains under {}; run `fit` first",
            chain_dir(config).display()
        )));
    }
    manifest::write(config, "diagnose", args, config.sampler.seed, &inputs, &outputs)?;
    Ok(())
}

pub fn dic(config: &Config, frequencies: &[usize], args: &[String]) -> Result<(), CliError> {
    let dataset = load(config)?;
    let table = ConnectedSubsetTable::build(&dataset.graph)?;
    let mut text = String::from("n_frequencies,dic,mean_deviance,effective_parameters\n");
    for &p in frequencies {
        let chains = run_chains(Submodel::Count, &dataset, &table, p, &config.sampler)?;
        let d = count_dic(&dataset, &chains, config.sampler.simpson_intervals)?;
        text.push_str(&format!(
            "{p},{:.4},{:.4},{:.4}\n",
            d.dic, d.mean_deviance, d.effective_parameters
        ));
    }
    print!("{text}");
    let out = write_file(&config.output_dir.join("dic.csv"), &text)?;
    manifest::write(config, "dic", args, config.sampler.seed, &data_inputs(config), &[out])?;
    Ok(())
}

fn annual_path(config: &Config, phase: Phase) -> PathBuf {
    config.output_dir.join("predict").join(format!("annual_{phase}.csv"))
}

fn annual_to_text(years: &[SimulatedYear], locations: &[String]) -> String {
    let mut out = format!("year,{}\n", locations.join(","));
    for (i, y) in years.iter().enumerate() {
        let row: Vec<String> = y.regional_totals.iter().map(|v| v.to_string()).collect();
        out.push_str(&format!("{},{}\n", i + 1, row.join(",")));
    }
    out
}

fn annual_from_text(text: &str, source: &Path, phase: Phase) -> Result<(Vec<String>, Vec<SimulatedYear>), CliError> {
    let bad = |line: usize, m: String| CliError::Input(format!("{}:{line}: {m}", source.display()));
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| bad(1, "empty file".into()))?;
    let locations: Vec<String> = header.split(',').skip(1).map(|s| s.trim().to_string()).collect();
    let mut years = Vec::new();
    for (i, line) in lines.enumerate() {
        let totals = line
            .split(',')
            .skip(1)
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| bad(i + 2, e.to_string()))?;
        if totals.len() != locations.len() {
            return Err(bad(i + 2, format!("expected {} losses", locations.len())));
        }
        years.push(SimulatedYear {
            phase,
            storms: Vec::new(),
            regional_totals: totals,
        });
    }
    Ok((locations, years))
}

pub fn predict(config: &Config, args: &[String]) -> Result<(), CliError> {
    let graph = SpatialGraph::load(&config.data.graph)?;
    let table = ConnectedSubsetTable::build(&graph)?;
    let mut inputs = vec![config.data.graph.clone()];
    let mut loaded = Vec::new();
    for sub in Submodel::ALL {
        let (chains, paths) = require_chains(config, sub)?;
        inputs.extend(paths);
        loaded.push(chains);
    }
    let posterior = Posterior::from_chains(&loaded[0], &loaded[1], &loaded[2])?;
    if posterior.path[0].n_locations() != graph.len() {
        return Err(CliError::Input("chains were fitted on a different graph".into()));
    }
    let mut rng = chain_rng(config.predict.seed, 0);
    let mut outputs = Vec::new();
    for phase in phases(config)? {
        let years = posterior_predictive(&posterior, phase, config.predict.years, &table, &mut rng)?;
        let maps = summary_maps(&years, graph.locations());
        let mean_storms = maps.n_storms as f64 / years.len().max(1) as f64;
        println!("{phase}: {} years, {mean_storms:.3} storms per year", years.len());
        outputs.push(write_file(&annual_path(config, phase), &annual_to_text(&years, graph.locations()))?);
        outputs.push(write_file(
            &config.output_dir.join("predict").join(format!("maps_{phase}.csv")),
            &maps.to_text(),
        )?);
    }
    manifest::write(config, "predict", args, config.predict.seed, &inputs, &outputs)?;
    Ok(())
}

pub fn price(config: &Config, args: &[String]) -> Result<(), CliError> {
    let measures = config
        .price
        .measures
        .iter()
        .map(|m| m.parse::<RiskMeasure>().map_err(CliError::from))
        .collect::<Result<Vec<_>, _>>()?;
    if !(config.price.unit > 0.0) {
        return Err(CliError::Input("price.unit must be positive".into()));
    }
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    for phase in phases(config)? {
        let path = annual_path(config, phase);
        let (locations, years) = annual_from_text(&read_file(&path)?, &path, phase)?;
        let table = premium_table(&years, &measures, &locations)?;
        let text = table.to_text(config.price.unit);
        inputs.push(path);
        outputs.push(write_file(&config.output_dir.join(format!("premiums_{phase}.csv")), &text)?);
        println!("{phase}\n{text}");
    }
    manifest::write(config, "price", args, config.predict.seed, &inputs, &outputs)?;
    Ok(())
}

pub fn simstudy(config: &Config, args: &[String]) -> Result<(), CliError> {
    let graph = SpatialGraph::load(&config.data.graph)?;
    let calendar = EnsoCalendar::load(&config.data.calendar)?;
    let report = run_simulation_study(&config.simstudy, &graph, &calendar)?;
    let text = report.to_text();
    print!("{text}");
    let outputs = vec![
        write_file(&config.output_dir.join("simstudy_report.txt"), &text)?,
        write_file(
            &config.output_dir.join("simstudy_report.json"),
            &serde_json::to_string_pretty(&report).expect("report serialises"),
        )?,
    ];
    let inputs = vec![config.data.graph.clone(), config.data.calendar.clone()];
    manifest::write(config, "simstudy", args, config.simstudy.seed, &inputs, &outputs)?;
    Ok(())
}

pub fn synth(config: &Config, args: &[String]) -> Result<(), CliError> {
    let graph = SpatialGraph::load(&config.data.graph)?;
    let calendar = EnsoCalendar::load(&config.data.calendar)?;
    let table = ConnectedSubsetTable::build(&graph)?;
    let s = &config.synth;
    let (dataset, truth, seed) =
        generate_lookalike_dataset(&calendar, &graph, &table, s.target, s.first_seed, s.max_tries)?;
    println!("generator seed {seed}\n{}", dataset.summary());
    let dir = config.output_dir.join("synth");
    let outputs = vec![
        write_file(&dir.join("storms.csv"), &dataset.storms_to_text())?,
        write_file(&dir.join("truth.json"), &truth.to_json(&dataset))?,
    ];
    let inputs = vec![config.data.graph.clone(), config.data.calendar.clone()];
    manifest::write(config, "synth", args, seed, &inputs, &outputs)?;
    Ok(())
}
