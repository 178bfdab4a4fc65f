use std::fs;
use std::process::Command;

use kpzlab::exceptional::{run_replica, ExceptionalConfig};
use kpzlab_cli::config::{validate, AlphaRule, ConfigError, Experiment, ExperimentConfig};
use kpzlab_cli::experiments::{collect_manifests, read_records, write_records};
use kpzlab_cli::run::run_to_dir;
use proptest::prelude::*;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kpzlab"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_text_round_trips(
        e in 0usize..8,
        n in 8.0..4096.0f64,
        replicas in 1usize..10_000,
        seed in any::<u64>(),
        eps in prop::collection::vec(0.001..2.0f64, 1..8),
        q in 0.5..0.999f64,
        fixed in any::<bool>(),
        coupling in 0usize..3,
    ) {
        let exp = Experiment::ALL[e];
        let mut c = ExperimentConfig::defaults(exp, exp.modes()[0], Some(n), None).unwrap();
        c.replicas = replicas;
        c.seed = seed;
        c.epsilons = eps;
        c.alpha_rule = if fixed { AlphaRule::Fixed(q * 100.0) } else { AlphaRule::Quantile(q) };
        c.set("coupling", ["independent", "shared-strip", "identical"][coupling]).unwrap();
        let back = ExperimentConfig::parse(exp, &c.to_text()).unwrap();
        prop_assert_eq!(back, c);
    }
}

#[test]
fn comments_blank_lines_and_errors() {
    let c = ExperimentConfig::parse(Experiment::Exceptional, "# pilot\n\nk = 2 # two wedges\nreplicas=10\n").unwrap();
    assert_eq!((c.k, c.replicas), (2, 10));
    assert!(matches!(ExperimentConfig::parse(Experiment::Exceptional, "k 2"), Err(ConfigError::Syntax { line: 1 })));
    assert!(matches!(
        ExperimentConfig::parse(Experiment::TwTable, "experiment = max-cdf"),
        Err(ConfigError::WrongExperiment { .. })
    ));
    assert!(matches!(ExperimentConfig::parse(Experiment::TwTable, "levels = 1:2"), Err(ConfigError::Value { .. })));
}

#[test]
fn records_file_round_trips() {
    let cfg = ExceptionalConfig::new(3, 16.0).unwrap();
    let recs: Vec<_> = (0..3).map(|s| run_replica(&cfg, s).unwrap()).collect();
    let bytes = write_records(&recs);
    assert_eq!(read_records(&bytes).unwrap(), recs);
    assert!(read_records(&bytes[..bytes.len() - 1]).is_err());
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(read_records(&extra).is_err());
    assert!(read_records(b"not a records file").is_err());
    assert_eq!(read_records(&write_records(&[])).unwrap(), vec![]);
}

#[test]
fn artifacts_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cantor = ExperimentConfig::parse(Experiment::DimEstimate, "mode = cantor\ndepth = 8").unwrap();
    let out = run_to_dir(&cantor, 1, &dir.path().join("cantor")).unwrap();
    assert!(out.passed());
    for f in ["config.echo", "seeds.csv", "summary.csv", "summary.json", "manifest.json", "plotdata/cantor.csv"] {
        assert!(dir.path().join("cantor").join(f).is_file(), "{f}");
    }
    let echo = fs::read_to_string(dir.path().join("cantor/config.echo")).unwrap();
    assert_eq!(ExperimentConfig::parse(Experiment::DimEstimate, &echo).unwrap(), cantor);

    let tw = ExperimentConfig::parse(Experiment::TwTable, "levels = -3:1:1").unwrap();
    run_to_dir(&tw, 1, &dir.path().join("tw")).unwrap();
    let manifests = collect_manifests(&[dir.path().join("cantor"), dir.path().join("tw")]).unwrap();
    assert_eq!(manifests.len(), 2);
    for (_, m) in &manifests {
        assert!(!m["anchor"].as_str().unwrap().is_empty());
        assert_eq!(m["pass"], true);
    }
    let inputs = format!("inputs = {},{}", dir.path().join("cantor").display(), dir.path().join("tw").display());
    let report = ExperimentConfig::parse(Experiment::Report, &inputs).unwrap();
    run_to_dir(&report, 1, &dir.path().join("report")).unwrap();
    let csv = fs::read_to_string(dir.path().join("report/report.csv")).unwrap();
    assert!(csv.lines().count() >= 1 + 1 + 4);
    assert!(fs::read_to_string(dir.path().join("report/report.md")).unwrap().contains("Cantor box-count exponent"));
}

#[test]
fn validation_catches_bad_ladders() {
    let mut c = ExperimentConfig::defaults(Experiment::Exceptional, "default", Some(512.0), None).unwrap();
    assert!(validate(&c).is_empty());
    c.epsilons = vec![0.2, 0.1];
    c.gammas = vec![1.5];
    let keys: Vec<&str> = validate(&c).iter().map(|d| d.key).collect();
    assert!(keys.contains(&"epsilons") && keys.contains(&"gammas"), "{keys:?}");
}

#[test]
fn binary_exit_codes_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["tw-table", "--print-config", "--seed", "7"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("seed = 7"));

    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "gammas = 1.5\n").unwrap();
    let st = bin().args(["exceptional", "--validate-only", "--config"]).arg(&bad).status().unwrap();
    assert_eq!(st.code(), Some(1));

    fs::write(&bad, "no_such_key = 1\n").unwrap();
    let st = bin().args(["exceptional", "--config"]).arg(&bad).status().unwrap();
    assert_eq!(st.code(), Some(2));

    let st = bin()
        .args(["dim-estimate", "--set", "mode=cantor", "--threads", "1", "--out"])
        .arg(dir.path().join("c"))
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    assert!(dir.path().join("c/manifest.json").is_file());

    let st = bin().env("KPZLAB_SEED", "11").args(["tw-table", "--print-config"]).output().unwrap();
    assert!(String::from_utf8(st.stdout).unwrap().contains("seed = 11"));
}
