use std::path::Path;
use std::process::{Command, Output};

use bandit_sim::cli::{self, ExperimentConfig, Metric, Preset};

const SMALL: &str = r#"
horizon = 250
replications = 3
rolling_window = 40
[environment]
n_actions = 4
dim_context = 3
[[policies]]
name = "random"
[[policies]]
name = "egreedy"
epsilon = 0.2
[[policies]]
name = "linucb"
"#;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bandit-sim")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("experiment.toml");
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn read_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(Result::unwrap).collect()
}

#[test]
fn run_writes_long_format_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let status = bin(&["run", &cfg, "--out", out.to_str().unwrap(), "--quiet"]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));

    let text = std::fs::read_to_string(out.join("per_round.csv")).unwrap();
    assert!(text.starts_with("round,policy,metric,mean,ci_low,ci_high\n"));
    assert!(!text.contains('\r'));
    let rows = read_rows(&out.join("per_round.csv"));
    assert_eq!(rows.len(), 250 * 3 * Metric::ALL.len());
    for row in &rows {
        let [lo, mean, hi] = [4, 3, 5].map(|i| row[i].parse::<f64>().unwrap());
        assert!(lo <= mean && mean <= hi, "{row:?}");
    }
    let summary = read_rows(&out.join("summary.csv"));
    assert_eq!(summary.len(), 3 * 4);
    assert!(summary.iter().all(|r| &r[0] == "249"));
    assert!(!out.join("onoff.csv").exists());
}

#[test]
fn reruns_are_byte_identical_for_any_job_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let mut contents = Vec::new();
    for (name, jobs) in [("a", "1"), ("b", "1"), ("c", "3")] {
        let out = dir.path().join(name);
        let o = bin(&["run", &cfg, "--out", out.to_str().unwrap(), "--jobs", jobs, "--quiet"]);
        assert!(o.status.success());
        contents.push(["per_round.csv", "summary.csv"].map(|f| std::fs::read(out.join(f)).unwrap()));
    }
    assert_eq!(contents[0], contents[1]);
    assert_eq!(contents[0], contents[2]);
}

#[test]
fn master_seed_changes_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let mut sums = Vec::new();
    for seed in ["0", "1"] {
        let out = dir.path().join(seed);
        assert!(bin(&["run", &cfg, "--out", out.to_str().unwrap(), "--master-seed", seed, "--quiet"]).status.success());
        sums.push(std::fs::read(out.join("summary.csv")).unwrap());
    }
    assert_ne!(sums[0], sums[1]);
}

#[test]
fn single_replication_reproduces_the_run_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = ExperimentConfig::from_toml_str(SMALL).unwrap();
    config.replications = 1;
    config.output_dir = dir.path().to_path_buf();
    cli::run_experiment(&config, true).unwrap();
    let single = cli::run_replication(&config, 0).unwrap();

    let rows = read_rows(&dir.path().join("per_round.csv"));
    let mut i = 0;
    for run in &single.runs {
        for metric in Metric::ALL {
            for (t, &value) in run.series(metric).iter().enumerate() {
                let row = &rows[i];
                assert_eq!((&row[0], &row[1], &row[2]), (t.to_string().as_str(), run.label.as_str(), metric.name()));
                let [mean, lo, hi] = [3, 4, 5].map(|k| row[k].parse::<f64>().unwrap());
                assert_eq!(mean, value);
                assert_eq!((lo, hi), (mean, mean));
                i += 1;
            }
        }
    }
    assert_eq!(i, rows.len());
}

#[test]
fn onoff_output_and_logs() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("write_logs = true\n{SMALL}[onoff]\nlogging_policy = \"egreedy\"\ntraining_sizes = [100, 250]\n");
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("out");
    assert!(bin(&["run", &cfg, "--out", out.to_str().unwrap(), "--quiet"]).status.success());

    let onoff = read_rows(&out.join("onoff.csv"));
    assert_eq!(onoff.len(), 2 * 4);
    assert!(onoff.iter().any(|r| &r[0] == "250" && &r[1] == "ipw[egreedy]" && &r[2] == "policy_value"));
    assert_eq!(read_rows(&out.join("per_round.csv")).len(), 500 * 3 * 4);

    let log_path = out.join("logs").join("egreedy_rep0.csv");
    let log = cli::read_logged_feedback_file(&log_path).unwrap();
    assert_eq!(log.len(), 500);
    let mut again = Vec::new();
    cli::write_logged_feedback(&mut again, &log).unwrap();
    assert_eq!(again, std::fs::read(&log_path).unwrap());

    let fit = bin(&["fit-ipw", log_path.to_str().unwrap(), "--n-actions", "4"]);
    assert!(fit.status.success(), "{}", String::from_utf8_lossy(&fit.stderr));
    let stdout = String::from_utf8(fit.stdout).unwrap();
    assert!(stdout.starts_with("action,bias,w_0,w_1,w_2\n"));
    assert_eq!(stdout.lines().count(), 5);
}

#[test]
fn config_errors_exit_with_two_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("[drifter]\ninterval = 100\ntransition_periodd = 5\n", "transition_periodd"),
        ("[drifter]\ninterval = 100\ntransition_period = 500\n", "transition_period"),
        ("[[policies]]\nname = \"greedy\"\n", "policies[0].name"),
        ("[[policies]]\nname = \"bts\"\nepsilon = 0.2\n", "policies[0].epsilon"),
        ("horizon = \"long\"\n", "horizon"),
    ];
    for (text, key) in cases {
        let full = if text.contains("[[policies]]") { text.to_string() } else { format!("{text}[[policies]]\nname = \"random\"\n") };
        let cfg = write_config(dir.path(), &full);
        let o = bin(&["run", &cfg, "--quiet"]);
        assert_eq!(o.status.code(), Some(2), "{text}");
        assert!(String::from_utf8_lossy(&o.stderr).contains(key), "{text}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = bin(&["run", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = bin(&["run", "--preset", "nope"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = bin(&["run", &cfg, "--out", blocker.join("sub").to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn preset_fidelity_through_the_binary() {
    let o = bin(&["show-config", "--preset", "sudden-drift"]);
    assert!(o.status.success());
    let table: toml::Table = String::from_utf8(o.stdout).unwrap().parse().unwrap();
    assert_eq!(table["horizon"].as_integer(), Some(50_000));
    assert_eq!(table["drifter"]["interval"].as_integer(), Some(25_000));
    assert_eq!(table["drifter"]["transition_period"].as_integer(), Some(5_000));
    assert_eq!(table["drifter"]["base_coefficient_weight"].as_float(), Some(0.3));

    let seasonal = ExperimentConfig::preset(Preset::SeasonalDrift);
    let d = seasonal.drifter.unwrap();
    assert!(d.seasonal && d.interval == 5_000 && seasonal.horizon == 50_000);

    for preset in [Preset::DelayStationary, Preset::DelaySeasonal] {
        let c = ExperimentConfig::preset(preset);
        let d = c.delay.unwrap();
        assert_eq!((d.scale, d.min_scale, d.max_scale), (Some(1000.0), Some(900.0), Some(1000.0)));
        assert_eq!(c.replications, 100);
    }
    let onoff = ExperimentConfig::preset(Preset::Onoff);
    assert_eq!(onoff.horizon, 5_000);
    assert_eq!(onoff.onoff.unwrap().logging_policies[0], "egreedy");
}

#[test]
fn cli_overrides_beat_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("preset = \"onoff\"\n{SMALL}"));
    let o = bin(&["show-config", &cfg, "--replications", "7", "--master-seed", "42", "--preset", "delay-stationary"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table: toml::Table = String::from_utf8(o.stdout).unwrap().parse().unwrap();
    assert_eq!(table["replications"].as_integer(), Some(7));
    assert_eq!(table["master_seed"].as_integer(), Some(42));
    assert_eq!(table["preset"].as_str(), Some("delay-stationary"));
    assert_eq!(table["horizon"].as_integer(), Some(250));
}

#[test]
fn policies_share_rounds_within_a_replication() {
    let config = ExperimentConfig::from_toml_str(&format!("write_logs = true\n{SMALL}")).unwrap();
    let result = cli::run_replication(&config, 2).unwrap();
    let contexts: Vec<Vec<Vec<f64>>> =
        result.logs.iter().map(|(_, rows)| rows.iter().map(|r| r.context.clone()).collect()).collect();
    assert_eq!(contexts.len(), 3);
    assert!(contexts.windows(2).all(|w| w[0] == w[1]));
}
