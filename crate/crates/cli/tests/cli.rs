use std::path::Path;
use std::process::Command;

use clap::Parser;
use coalhc_cli::commands::eval::AggregateReport;
use coalhc_cli::commands::fit::FitResult;
use coalhc_cli::{io, Cli, CliResult};
use coalhc_core::metrics::MetricsReport;
use coalhc_core::Dataset;

fn run(args: &[&str]) -> CliResult<()> {
    let cli = Cli::try_parse_from(std::iter::once("coalhc").chain(args.iter().copied())).expect("arguments parse");
    coalhc_cli::run(cli)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn generate_small(out: &Path, seed: u64) {
    run(&["generate", "--n", "12", "--d", "6", "--seed", &seed.to_string(), "--out", p(out)]).unwrap();
}

#[test]
fn csv_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    let mut values: Vec<f64> = (0..9).map(|i| (i as f64 * 0.7).sin() / 3.0).collect();
    values.extend([f64::MIN_POSITIVE, -1e300, 0.1 + 0.2]);
    let data = Dataset::new(4, 3, values).unwrap();
    io::write_dataset(&path, &data).unwrap();
    assert_eq!(io::read_dataset(&path).unwrap(), data);
}

#[test]
fn ragged_csv_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    std::fs::write(&path, "1,2,3\n4,5\n").unwrap();
    let err = io::read_dataset(&path).unwrap_err();
    assert_eq!(err.code, coalhc_cli::error::EXIT_DATA);
}

#[test]
fn generate_writes_expected_layout_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run(&["generate", "--n", "10", "--d", "4", "--replicates", "3", "--seed", "5", "--out", p(&a)]).unwrap();
    run(&["generate", "--n", "10", "--d", "4", "--replicates", "3", "--seed", "5", "--out", p(&b)]).unwrap();
    for i in 0..3 {
        let rel = format!("seed_5/rep_{i:03}");
        for f in ["data.csv", "truth.newick", "truth.json", "theta.json"] {
            let x = std::fs::read(a.join(&rel).join(f)).unwrap();
            let y = std::fs::read(b.join(&rel).join(f)).unwrap();
            assert_eq!(x, y, "{rel}/{f}");
        }
    }
    assert!(!a.join("seed_5/rep_003").exists());
}

#[test]
fn preset_fills_in_sizes_and_replicate_count() {
    let dir = tempfile::tempdir().unwrap();
    run(&["generate", "--preset", "d1", "--seed", "2", "--out", p(dir.path())]).unwrap();
    let reps = std::fs::read_dir(dir.path().join("seed_2")).unwrap().count();
    assert_eq!(reps, 50);
    let data = io::read_dataset(&dir.path().join("seed_2/rep_049/data.csv")).unwrap();
    assert_eq!((data.n(), data.d()), (32, 32));
}

#[test]
fn mgreedy_emits_one_tree() {
    let dir = tempfile::tempdir().unwrap();
    generate_small(&dir.path().join("gen"), 1);
    let rep = dir.path().join("gen/seed_1/rep_000");
    let fit = dir.path().join("fit");
    run(&["fit", "--data", p(&rep), "--algorithm", "mgreedy", "--seed", "1", "--out", p(&fit)]).unwrap();
    let result: FitResult = io::read_json(&fit.join("result.json")).unwrap();
    assert_eq!(result.trees.len(), 1);
    assert_eq!(std::fs::read_dir(fit.join("trees")).unwrap().count(), 1);
}

#[test]
fn mpost2_weights_are_normalized() {
    let dir = tempfile::tempdir().unwrap();
    generate_small(&dir.path().join("gen"), 2);
    let rep = dir.path().join("gen/seed_2/rep_000");
    let fit = dir.path().join("fit");
    run(&[
        "fit", "--data", p(&rep), "--theta", p(&rep.join("theta.json")), "--algorithm", "mpost2",
        "--particles", "100", "--seed", "4", "--out", p(&fit),
    ])
    .unwrap();
    let result: FitResult = io::read_json(&fit.join("result.json")).unwrap();
    assert_eq!(result.trees.len(), 100);
    assert!((result.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(result.runtime_seconds > 0.0);
    assert_eq!(std::fs::read_dir(fit.join("trees")).unwrap().count(), 100);
    let dist = std::fs::read_to_string(fit.join("distance.csv")).unwrap();
    assert_eq!(dist.lines().count(), 12);
}

#[test]
fn truth_scored_against_itself_has_zero_errors() {
    let dir = tempfile::tempdir().unwrap();
    generate_small(&dir.path().join("gen"), 3);
    let rep = dir.path().join("gen/seed_3/rep_000");
    let truth = io::read_json(&rep.join("truth.json")).unwrap();
    let fit = dir.path().join("fit");
    // a hand-made result holding only the true tree
    let mut result: FitResult = {
        run(&["fit", "--data", p(&rep), "--algorithm", "greedy", "--seed", "1", "--out", p(&fit)]).unwrap();
        io::read_json(&fit.join("result.json")).unwrap()
    };
    result.trees = vec![truth];
    io::write_json(&fit.join("result.json"), &result).unwrap();
    run(&["eval", "--fit", p(&fit), "--truth", p(&rep), "--out", p(&fit)]).unwrap();
    let report: MetricsReport = io::read_json(&fit.join("metrics.json")).unwrap();
    let e = report.errors.unwrap();
    for v in [e.mse_t, e.mae_t, e.mab_t, e.mse_pi, e.mae_pi, e.mab_pi] {
        assert_eq!(v, 0.0);
    }
}

#[test]
fn label_only_evaluation_omits_tree_errors() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    run(&["generate", "--n", "20", "--d", "8", "--classes", "4", "--seed", "9", "--out", p(&gen)]).unwrap();
    let rep = gen.join("seed_9/rep_000");
    assert!(!rep.join("truth.json").exists());
    let fit = dir.path().join("fit");
    run(&[
        "fit", "--data", p(&rep), "--labels", p(&rep.join("labels.csv")), "--algorithm", "hc",
        "--seed", "1", "--out", p(&fit),
    ])
    .unwrap();
    run(&["eval", "--fit", p(&fit), "--out", p(&fit)]).unwrap();
    let report: MetricsReport = io::read_json(&fit.join("metrics.json")).unwrap();
    assert!(report.errors.is_none());
    assert!(report.subtree_score.is_some());
    assert!(report.auc.is_some());
    let curve = std::fs::read_to_string(fit.join("ari_curve.csv")).unwrap();
    assert!(curve.starts_with("n_clusters,ari\n"));
    assert_eq!(curve.lines().count(), 21);
}

#[test]
fn pipeline_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for tag in ["x", "y"] {
        let root = dir.path().join(tag);
        generate_small(&root.join("gen"), 11);
        let rep = root.join("gen/seed_11/rep_000");
        let fit = root.join("fit");
        run(&["fit", "--data", p(&rep), "--particles", "30", "--seed", "8", "--out", p(&fit)]).unwrap();
        run(&["eval", "--fit", p(&fit), "--truth", p(&rep), "--out", p(&fit)]).unwrap();
        outputs.push(std::fs::read(fit.join("metrics.json")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn alternating_fit_records_theta_trace() {
    let dir = tempfile::tempdir().unwrap();
    generate_small(&dir.path().join("gen"), 4);
    let rep = dir.path().join("gen/seed_4/rep_000");
    let fit = dir.path().join("fit");
    run(&[
        "fit", "--data", p(&rep), "--particles", "10", "--iterations", "5", "--burn-in", "2",
        "--fix-sigma2", "1e-6", "--seed", "3", "--out", p(&fit),
    ])
    .unwrap();
    let result: FitResult = io::read_json(&fit.join("result.json")).unwrap();
    assert_eq!(result.theta_trace.len(), 3);
    assert_eq!(result.log_evidence_trace.len(), 5);
    for t in &result.theta_trace {
        assert_eq!(t.get(t.names().iter().position(|n| n == "sigma2").unwrap()), 1e-6);
    }
}

#[test]
fn aggregate_reports_mean_and_sd() {
    let dir = tempfile::tempdir().unwrap();
    for (i, v) in [0.1, 0.3].iter().enumerate() {
        let f = dir.path().join(format!("rep_{i}/metrics.json"));
        io::write_string(&f, &format!("{{\"mse_t\": {v}, \"auc\": 0.5, \"ari_curve\": [[1, 0.0]]}}")).unwrap();
    }
    let out = dir.path().join("summary");
    run(&["eval", "--aggregate", p(dir.path()), "--out", p(&out)]).unwrap();
    let report: AggregateReport = io::read_json(&out.join("summary.json")).unwrap();
    assert_eq!(report.files, 2);
    let m = &report.metrics["mse_t"];
    assert!((m.mean - 0.2).abs() < 1e-15);
    assert!((m.sd - 0.02f64.sqrt()).abs() < 1e-15);
    assert_eq!(report.metrics["auc"].sd, 0.0);
    assert!(!report.metrics.contains_key("ari_curve"));
}

#[test]
fn bench_reports_machine_and_skips_capped_sizes() {
    let dir = tempfile::tempdir().unwrap();
    run(&[
        "bench", "--sizes", "8,16", "--dim", "4", "--algorithms", "mpost2,postpost", "--particles", "5",
        "--repeats", "1", "--postpost-cap", "8", "--seed", "1", "--out", p(dir.path()),
    ])
    .unwrap();
    let report: serde_json::Value = io::read_json(&dir.path().join("bench.json")).unwrap();
    assert_eq!(report["seed"], 1);
    assert!(report["machine"]["logical_cpus"].as_u64().unwrap() >= 1);
    assert_eq!(report["skipped"][0][0], "postpost");
    assert_eq!(report["skipped"][0][1], 16);
    assert_eq!(report["timings"].as_array().unwrap().len(), 3);
    assert!(std::fs::read_to_string(dir.path().join("bench.csv")).unwrap().lines().count() == 4);
}

fn exit_code(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_coalhc")).args(args).output().unwrap().status.code().unwrap()
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();
    generate_small(&dir.path().join("gen"), 6);
    let rep = dir.path().join("gen/seed_6/rep_000");
    let out = dir.path().join("out");
    assert_eq!(exit_code(&["fit", "--data", p(&rep), "--algorithm", "greedy", "--seed", "1", "--out", p(&out)]), 0);
    // unknown algorithm and missing seed are rejected by the parser
    assert_eq!(exit_code(&["fit", "--data", p(&rep), "--algorithm", "nope", "--seed", "1", "--out", p(&out)]), 2);
    assert_eq!(exit_code(&["fit", "--data", p(&rep), "--out", p(&out)]), 2);
    assert_eq!(exit_code(&["fit", "--data", p(&rep), "--particles", "0", "--seed", "1", "--out", p(&out)]), 2);
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "1,2\n3\n").unwrap();
    assert_eq!(exit_code(&["fit", "--data", p(&bad), "--seed", "1", "--out", p(&out)]), 3);
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, "{\"unknown\": 1}").unwrap();
    assert_eq!(exit_code(&["fit", "--data", p(&rep), "--config", p(&cfg), "--seed", "1", "--out", p(&out)]), 2);
    let cmd = Command::new(env!("CARGO_BIN_EXE_coalhc"))
        .args(["fit", "--data", p(&rep), "--algorithm", "greedy", "--seed", "1", "--out", p(&out)])
        .env(coalhc_cli::THREADS_ENV, "zero")
        .output()
        .unwrap();
    assert_eq!(cmd.status.code(), Some(2));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    generate_small(&dir.path().join("gen"), 7);
    let rep = dir.path().join("gen/seed_7/rep_000");
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"algorithm": "mpost1", "sampler": {"particles": 7}}"#).unwrap();
    let out = dir.path().join("a");
    run(&["fit", "--data", p(&rep), "--config", p(&cfg), "--seed", "1", "--out", p(&out)]).unwrap();
    let r: FitResult = io::read_json(&out.join("result.json")).unwrap();
    assert_eq!((r.settings.algorithm.as_str(), r.trees.len()), ("mpost1", 7));
    let out = dir.path().join("b");
    run(&["fit", "--data", p(&rep), "--config", p(&cfg), "--particles", "3", "--algorithm", "mpost2", "--seed", "1", "--out", p(&out)])
        .unwrap();
    let r: FitResult = io::read_json(&out.join("result.json")).unwrap();
    assert_eq!((r.settings.algorithm.as_str(), r.trees.len()), ("mpost2", 3));
}
