use std::fs;
use std::path::Path;
use std::process::Command;

use labelsmear::csvio;

fn labelsmear(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_labelsmear")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, json: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_string()
}

fn table(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut rd = csv::Reader::from_reader(csvio::body(&text).as_bytes());
    let header = rd.headers().unwrap().iter().map(String::from).collect();
    let rows = rd.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn run_ok(verb: &str, config: &str, out: &Path, extra: &[&str]) -> String {
    let mut args = vec![verb, "--config", config, "--out", out.to_str().unwrap()];
    args.extend(extra);
    let o = labelsmear(&args);
    assert!(o.status.success(), "{verb}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

const GRID: &str = r#"{
  "noise": {"rho": 0.2},
  "methods": [{"kind": "standard"}, {"kind": "smoothing", "alpha": 0.1}, {"kind": "smoothing", "alpha": 0.2}],
  "seeds": [0, 1, 2, 3, 4],
  "train": {"epochs": 10, "lr_drop_epochs": [5]}
}"#;

#[test]
fn run_writes_runs_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), GRID);
    let out = dir.path().join("out");
    run_ok("run", &cfg, &out, &["--jobs", "2"]);

    let runs_text = fs::read_to_string(out.join("runs.csv")).unwrap();
    assert!(runs_text.starts_with("# labelsmear schema_version=1 "));
    let (header, runs) = table(&out.join("runs.csv"));
    assert_eq!(&header[..4], ["method", "alpha", "seed", "status"]);
    assert_eq!(runs.len(), 15);
    let (sheader, summary) = table(&out.join("summary.csv"));
    assert_eq!(summary.len(), 3);

    let acc = header.iter().position(|h| h == "test_acc").unwrap();
    let acc_mean = sheader.iter().position(|h| h == "test_acc_mean").unwrap();
    for row in &summary {
        let mine: Vec<f64> = runs
            .iter()
            .filter(|r| r[0] == row[0] && r[1] == row[1])
            .map(|r| r[acc].parse().unwrap())
            .collect();
        assert_eq!(mine.len(), 5);
        let mean = mine.iter().sum::<f64>() / 5.0;
        let reported: f64 = row[acc_mean].parse().unwrap();
        assert!((mean - reported).abs() < 1e-12);
    }
}

#[test]
fn single_clean_run_has_zero_spread() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"noise": {"rho": 0.0}, "methods": [{"kind": "standard"}], "seeds": [3], "train": {"epochs": 3}}"#,
    );
    let out = dir.path().join("out");
    run_ok("run", &cfg, &out, &[]);
    let (header, summary) = table(&out.join("summary.csv"));
    assert_eq!(summary.len(), 1);
    for (h, v) in header.iter().zip(&summary[0]) {
        if h.ends_with("_std") {
            assert_eq!(v.parse::<f64>().unwrap(), 0.0, "{h}");
        }
    }
}

#[test]
fn seed_override_runs_one_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), GRID);
    let out = dir.path().join("out");
    run_ok("run", &cfg, &out, &["--seed-override", "9"]);
    let (_, runs) = table(&out.join("runs.csv"));
    assert_eq!(runs.len(), 3);
    assert!(runs.iter().all(|r| r[2] == "9"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), GRID);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_ok("run", &cfg, &a, &["--jobs", "1"]);
    run_ok("run", &cfg, &b, &["--jobs", "3"]);
    for name in ["runs.csv", "summary.csv"] {
        let x = fs::read_to_string(a.join(name)).unwrap();
        let y = fs::read_to_string(b.join(name)).unwrap();
        assert_eq!(csvio::body(&x), csvio::body(&y), "{name}");
    }
}

#[test]
fn figures_emit_documented_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"methods": [{"kind": "standard"}, {"kind": "forward", "alpha": 0.2}], "seeds": [0, 1],
            "train": {"epochs": 5},
            "distill": {"sweep_alphas": [0.0, 0.3]},
            "figures": {"figure5": {"seeds": [0], "samples_per_class": 100, "train": {"epochs": 10, "weight_decay": 0.0}}}}"#,
    );
    let out = dir.path().join("out");
    run_ok("figures", &cfg, &out, &[]);

    let (header, rows) = table(&out.join("loss_curves.csv"));
    assert_eq!(header, ["margin", "smoothing", "backward", "forward"]);
    assert_eq!(rows.len(), 401);

    let gaps: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("gaps_"))
        .collect();
    assert_eq!(gaps.len(), 4 * 2 * 2);
    for split in ["clean", "noisy"] {
        for source in ["observed", "clean"] {
            assert!(out.join(format!("gaps_forward_0.2_seed1_{split}_{source}.csv")).exists());
        }
    }

    let (header, rows) = table(&out.join("figure5.csv"));
    assert_eq!(header, ["setting", "alpha_or_l2", "offset_mean", "offset_std"]);
    assert_eq!(rows.len(), 1 + 4 + 4);
    let (header, _) = table(&out.join("alpha_sweep.csv"));
    assert_eq!(header, ["alpha", "mean", "stddev"]);
}

#[test]
fn distill_and_estimate_t() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"seeds": [0, 1], "train": {"epochs": 8}}"#);
    let out = dir.path().join("out");
    run_ok("distill", &cfg, &out, &[]);
    let (header, rows) = table(&out.join("distill.csv"));
    assert_eq!(header, ["method", "mean", "stddev"]);
    let names: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(names, ["vanilla", "ls_teacher", "ls_student", "fc_teacher", "fc_student"]);

    let stdout = run_ok("estimate-t", &cfg, &out, &[]);
    assert!(stdout.contains("max |T_hat - T_emp|"));
    let est = csvio::read_matrix(fs::File::open(out.join("estimated_t.csv")).unwrap()).unwrap();
    assert_eq!(est.shape(), (5, 5));
    for row in est.row_iter() {
        assert!((row.sum() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    for doc in [r#"{"bogus": true}"#, r#"{"methods": []}"#, r#"{"train": {"epochs": 0}}"#, "{"] {
        let cfg = write_config(dir.path(), doc);
        let o = labelsmear(&["run", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{doc}");
    }
    let o = labelsmear(&["run", "--config", "/nonexistent/config.json"]);
    assert_eq!(o.status.code(), Some(2));
}
