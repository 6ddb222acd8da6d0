use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stormrisk"))
        .args(args)
        .current_dir(Path::new(env!("CARGO_MANIFEST_DIR")).join("../.."))
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn validate_shipped_dataset() {
    let o = run(&["validate"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("storms: 142"));
    assert!(text.contains("EN: 33 storms"));
    assert!(text.contains("NE: 66 storms"));
    assert!(text.contains("LN: 43 storms"));
}

#[test]
fn physical_adjacency_rejects_gloria_path() {
    let dir = tempfile::tempdir().unwrap();
    let storms = dir.path().join("storms.csv");
    std::fs::write(
        &storms,
        "storm_id,decimal_year_time,path,total_damage_usd,location_damages\n\
         ok-1,1985.70,NC;SC,2e9,\n\
         gloria,1985.74,NC;NY;CT;MA,9e9,\n",
    )
    .unwrap();
    let storm_arg = format!("data.storms={:?}", storms.display().to_string());
    let graph_arg = format!("data.graph={:?}", data("physical_graph.txt").display().to_string());
    let o = run(&["validate", "--set", &storm_arg, "--set", &graph_arg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("gloria"), "{}", stderr(&o));

    let los_arg = format!("data.graph={:?}", data("los_graph.txt").display().to_string());
    let o = run(&["validate", "--set", &storm_arg, "--set", &los_arg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn malformed_rows_and_config_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let storms = dir.path().join("storms.csv");
    std::fs::write(&storms, "a,1985.7,FL,not-a-number\n").unwrap();
    let storm_arg = format!("data.storms={:?}", storms.display().to_string());
    let o = run(&["validate", "--set", &storm_arg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains(":1:"), "{}", stderr(&o));

    let o = run(&["validate", "--set", "sampler.no_such_key=1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn non_finite_losses_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let predict = dir.path().join("predict");
    std::fs::create_dir_all(&predict).unwrap();
    std::fs::write(predict.join("annual_EN.csv"), "year,FL,LA\n1,1e9,inf\n2,0,0\n").unwrap();
    let out = dir.path().display().to_string();
    let o = run(&["price", "-o", &out, "--set", "predict.phases=[\"EN\"]"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn fit_diagnose_predict_price_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        format!(
            "output_dir = \"out\"\n\
             [data]\nstorms = {:?}\ncalendar = {:?}\ngraph = {:?}\n\
             [sampler]\nn_iterations = 600\nburn_in = 200\nthin = 4\n\
             [predict]\nyears = 60\nphases = [\"EN\", \"LN\"]\n",
            data("storms_synthetic.csv").display().to_string(),
            data("enso_calendar.txt").display().to_string(),
            data("los_graph.txt").display().to_string(),
        ),
    )
    .unwrap();
    let cfg = config.display().to_string();
    for cmd in ["fit", "diagnose", "predict", "price"] {
        let o = run(&[cmd, "-c", &cfg]);
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", stderr(&o));
    }
    let out = dir.path().join("out");
    for sub in ["count", "path", "damage"] {
        for c in 0..2 {
            let text = std::fs::read_to_string(out.join(format!("chains/{sub}_chain{c}.csv"))).unwrap();
            assert!(text.starts_with("# {"));
            assert_eq!(text.lines().count(), 2 + 100);
        }
        assert!(out.join(format!("diagnostics_{sub}.txt")).exists());
    }
    assert!(std::fs::read_to_string(out.join("diagnostics_count.txt")).unwrap().contains("DIC "));

    let annual = std::fs::read_to_string(out.join("predict/annual_LN.csv")).unwrap();
    assert_eq!(annual.lines().count(), 61);
    assert!(!out.join("predict/annual_NE.csv").exists());

    let premiums = std::fs::read_to_string(out.join("premiums_EN.csv")).unwrap();
    let rows: Vec<Vec<&str>> = premiums.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 14);
    for col in [2, 4, 6] {
        let total: f64 = rows.iter().map(|r| r[col].parse::<f64>().unwrap()).sum();
        assert!(total == 0.0 || (total - 100.0).abs() <= 0.05 * 14.0, "column {col} sums to {total}");
    }

    for cmd in ["fit", "diagnose", "predict", "price"] {
        let m: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join(format!("manifest_{cmd}.json"))).unwrap())
                .unwrap();
        assert_eq!(m["command"], cmd);
        assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
        assert!(!m["outputs"].as_array().unwrap().is_empty());
    }
}

#[test]
fn predict_without_chains_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["predict", "-o", &dir.path().display().to_string()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("run `fit` first"));
}

#[test]
fn synth_reproduces_shipped_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["synth", "-o", &dir.path().display().to_string()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let generated = std::fs::read_to_string(dir.path().join("synth/storms.csv")).unwrap();
    let shipped = std::fs::read_to_string(data("storms_synthetic.csv")).unwrap();
    assert_eq!(generated, shipped);
    let truth: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("synth/truth.json")).unwrap()).unwrap();
    assert_eq!(truth["storms"].as_array().unwrap().len(), 142);
}
