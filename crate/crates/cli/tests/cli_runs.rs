//! End-to-end CLI checks: artifact layout, exit codes, config-file
//! overrides, rerun determinism, and the sweep driver.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_fairrep")
}

struct TempDir(PathBuf);

impl TempDir {
    fn new(name: &str) -> Self {
        let mut p = std::env::temp_dir();
        p.push(format!("fairrep-cli-{}-{name}", std::process::id()));
        std::fs::remove_dir_all(&p).ok();
        std::fs::create_dir_all(&p).unwrap();
        TempDir(p)
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.0.join(rel)
    }
}

impl Drop for TempDir {
    fn drop(&mut self) {
        std::fs::remove_dir_all(&self.0).ok();
    }
}

fn run(args: &[&str]) -> std::process::Output {
    Command::new(bin()).args(args).output().expect("spawn fairrep")
}

fn synth(dir: &TempDir, name: &str, n: usize) -> PathBuf {
    let out = dir.path(name);
    let status = run(&[
        "synth",
        "--out",
        out.to_str().unwrap(),
        "--n",
        &n.to_string(),
        "--d",
        "8",
        "--g_classes",
        "2",
        "--y_classes",
        "2",
        "--correlation",
        "0.5",
        "--noise",
        "0.5",
        "--seed",
        "7",
    ]);
    assert!(status.status.success(), "synth failed: {status:?}");
    out
}

#[test]
fn debias_writes_all_artifacts_and_audit_reports() {
    let dir = TempDir::new("pipeline");
    let ds = synth(&dir, "ds.frds", 1500);
    let run_dir = dir.path("run");
    let out = run(&[
        "debias",
        "--input",
        ds.to_str().unwrap(),
        "--output_dir",
        run_dir.to_str().unwrap(),
        "--objective",
        "unconstrained",
        "--epochs",
        "40",
        "--learning_rate",
        "0.02",
        "--epsilon_sq",
        "0.1",
        "--seed",
        "3",
    ]);
    assert!(out.status.success(), "debias failed: {out:?}");
    for artifact in ["config.resolved", "checkpoint.txt", "debiased.frds", "trace.csv", "run_meta.json"] {
        assert!(run_dir.join(artifact).exists(), "missing {artifact}");
    }
    let trace = std::fs::read_to_string(run_dir.join("trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,R,R_c,CE,objective,wallclock_ms"));

    let audit_dir = dir.path("audit");
    let out = run(&[
        "audit",
        "--input",
        run_dir.join("debiased.frds").to_str().unwrap(),
        "--output_dir",
        audit_dir.to_str().unwrap(),
        "--probe_epochs",
        "15",
        "--mdl_fractions",
        "0.05,0.1,0.25,0.5,1.0",
    ]);
    assert!(out.status.success(), "audit failed: {out:?}");
    let json = std::fs::read_to_string(audit_dir.join("report.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert!(parsed["numerical_rank"].is_number());
    assert!(parsed["attributes"][0]["accuracy"].is_number());
    assert!(audit_dir.join("report.txt").exists());
}

#[test]
fn missing_input_exits_with_io_code_and_no_partial_outputs() {
    let dir = TempDir::new("missing");
    let run_dir = dir.path("run");
    let out = run(&[
        "debias",
        "--input",
        dir.path("nope.frds").to_str().unwrap(),
        "--output_dir",
        run_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(!run_dir.exists(), "partial outputs were written");
}

#[test]
fn invalid_objective_exits_with_config_code() {
    let dir = TempDir::new("badobjective");
    let ds = synth(&dir, "ds.frds", 300);
    let out = run(&[
        "debias",
        "--input",
        ds.to_str().unwrap(),
        "--output_dir",
        dir.path("run").to_str().unwrap(),
        "--objective",
        "sideways",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_is_used_and_flags_override_it() {
    let dir = TempDir::new("config");
    let ds = synth(&dir, "ds.frds", 600);
    let cfg = dir.path("run.cfg");
    std::fs::write(
        &cfg,
        format!(
            "# experiment config\ninput = {}\nobjective = unconstrained\nepochs = 5\nseed = 9\n",
            ds.display()
        ),
    )
    .unwrap();
    let run_dir = dir.path("run");
    // Override epochs on the command line; the echo must show the override.
    let out = run(&[
        "debias",
        "--config",
        cfg.to_str().unwrap(),
        "--output_dir",
        run_dir.to_str().unwrap(),
        "--epochs",
        "3",
    ]);
    assert!(out.status.success(), "debias failed: {out:?}");
    let echoed = std::fs::read_to_string(run_dir.join("config.resolved")).unwrap();
    assert!(echoed.contains("epochs = 3"));
    assert!(echoed.contains("objective = unconstrained"));
}

#[test]
fn rerun_with_same_seed_is_byte_identical() {
    let dir = TempDir::new("determinism");
    let ds = synth(&dir, "ds.frds", 800);
    let mut artifacts = Vec::new();
    for name in ["a", "b"] {
        let run_dir = dir.path(name);
        let out = run(&[
            "debias",
            "--input",
            ds.to_str().unwrap(),
            "--output_dir",
            run_dir.to_str().unwrap(),
            "--objective",
            "constrained",
            "--lambda",
            "0.01",
            "--epochs",
            "6",
            "--learning_rate",
            "0.003",
            "--seed",
            "11",
        ]);
        assert!(out.status.success());
        let audit_dir = dir.path(&format!("{name}-audit"));
        let out = run(&[
            "audit",
            "--input",
            run_dir.join("debiased.frds").to_str().unwrap(),
            "--output_dir",
            audit_dir.to_str().unwrap(),
            "--probe_epochs",
            "10",
            "--run_mdl",
            "false",
        ]);
        assert!(out.status.success());
        artifacts.push((
            std::fs::read(run_dir.join("checkpoint.txt")).unwrap(),
            std::fs::read(run_dir.join("debiased.frds")).unwrap(),
            std::fs::read(audit_dir.join("report.json")).unwrap(),
        ));
    }
    assert_eq!(artifacts[0].0, artifacts[1].0, "checkpoints differ");
    assert_eq!(artifacts[0].1, artifacts[1].1, "debiased vectors differ");
    assert_eq!(artifacts[0].2, artifacts[1].2, "audit reports differ");
}

#[test]
fn sweep_writes_consolidated_csv_and_run_directories() {
    let dir = TempDir::new("sweep");
    let ds = synth(&dir, "ds.frds", 600);
    let sweep_dir = dir.path("sweep");
    let out = run(&[
        "sweep",
        "--axis",
        "corruption",
        "--values",
        "0,0.5",
        "--input",
        ds.to_str().unwrap(),
        "--output_dir",
        sweep_dir.to_str().unwrap(),
        "--objective",
        "unconstrained",
        "--epochs",
        "10",
        "--learning_rate",
        "0.02",
        "--seed",
        "5",
        "--probe_epochs",
        "8",
        "--run_mdl",
        "false",
    ]);
    assert!(out.status.success(), "sweep failed: {out:?}");
    let csv = std::fs::read_to_string(sweep_dir.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("axis,value,status"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.contains(",ok,")));
    assert!(sweep_dir.join("runs/corruption=0/debias/checkpoint.txt").exists());
    assert!(sweep_dir.join("runs/corruption=0.5/audit/report.json").exists());

    // The corruption=0 run is exactly the baseline: a standalone run with
    // the same configuration on the sweep's own input copy is byte-equal.
    let baseline_dir = dir.path("baseline");
    let out = run(&[
        "debias",
        "--input",
        sweep_dir.join("runs/corruption=0/input.frds").to_str().unwrap(),
        "--output_dir",
        baseline_dir.to_str().unwrap(),
        "--objective",
        "unconstrained",
        "--epochs",
        "10",
        "--learning_rate",
        "0.02",
        "--seed",
        "5",
    ]);
    assert!(out.status.success());
    let baseline_audit = dir.path("baseline-audit");
    let out = run(&[
        "audit",
        "--input",
        baseline_dir.join("debiased.frds").to_str().unwrap(),
        "--output_dir",
        baseline_audit.to_str().unwrap(),
        "--probe_epochs",
        "8",
        "--run_mdl",
        "false",
    ]);
    assert!(out.status.success());
    let sweep_report =
        std::fs::read(sweep_dir.join("runs/corruption=0/audit/report.json")).unwrap();
    let baseline_report = std::fs::read(baseline_audit.join("report.json")).unwrap();
    assert_eq!(
        sweep_report, baseline_report,
        "corruption=0 differs from the baseline run"
    );
}

#[test]
fn ratio_sweep_lowers_dp_at_every_ratio() {
    let dir = TempDir::new("ratiosweep");
    let ds = dir.path("ds.frds");
    let out = run(&[
        "synth",
        "--out",
        ds.to_str().unwrap(),
        "--n",
        "6000",
        "--d",
        "8",
        "--g_classes",
        "2",
        "--y_classes",
        "2",
        "--correlation",
        "0.5",
        "--noise",
        "2.0",
        "--seed",
        "42",
    ]);
    assert!(out.status.success());
    let sweep_dir = dir.path("sweep");
    let out = run(&[
        "sweep",
        "--axis",
        "ratio",
        "--values",
        "0.5,0.8",
        "--input",
        ds.to_str().unwrap(),
        "--output_dir",
        sweep_dir.to_str().unwrap(),
        "--objective",
        "unconstrained",
        "--epochs",
        "100",
        "--learning_rate",
        "0.005",
        "--epsilon_sq",
        "0.1",
        "--seed",
        "7",
        "--probe_epochs",
        "40",
        "--probe_seed",
        "3",
        "--run_mdl",
        "false",
    ]);
    assert!(out.status.success(), "sweep failed: {out:?}");
    let csv = std::fs::read_to_string(sweep_dir.join("sweep.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let dp_col = header.iter().position(|&c| c == "dp").unwrap();
    let dp_orig_col = header.iter().position(|&c| c == "dp_orig").unwrap();
    for row in csv.lines().skip(1) {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields[2], "ok", "row failed: {row}");
        let dp: f64 = fields[dp_col].parse().unwrap();
        let dp_orig: f64 = fields[dp_orig_col].parse().unwrap();
        assert!(
            dp < dp_orig,
            "ratio {} did not reduce DP: {dp} vs {dp_orig}",
            fields[1]
        );
    }
}

#[test]
fn lambda_sweep_requires_constrained_objective() {
    let dir = TempDir::new("sweepbad");
    let ds = synth(&dir, "ds.frds", 300);
    let out = run(&[
        "sweep",
        "--axis",
        "lambda",
        "--values",
        "0.01,0.1",
        "--input",
        ds.to_str().unwrap(),
        "--output_dir",
        dir.path("sweep").to_str().unwrap(),
        "--objective",
        "unconstrained",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rank_and_similarity_commands_print_results() {
    let dir = TempDir::new("tools");
    let ds = synth(&dir, "ds.frds", 300);
    let out = run(&["rank", "--input", ds.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("rank 8"), "unexpected rank output: {text}");

    let emb = dir.path("emb.txt");
    std::fs::write(&emb, "a 1.0 0.0\nb 0.9 0.1\nc 0.0 1.0\nd 0.5 0.5\n").unwrap();
    let pairs = dir.path("pairs.txt");
    std::fs::write(&pairs, "a b 0.95\na c 0.05\na d 0.5\nb c 0.1\n").unwrap();
    let out = run(&[
        "similarity",
        "--embeddings",
        emb.to_str().unwrap(),
        "--pairs",
        pairs.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("spearman"), "unexpected output: {text}");
    assert!(text.contains("pairs used 4"));
}

#[test]
fn embeddings_route_builds_direction_split_dataset() {
    let dir = TempDir::new("embroute");
    // Dimension 0 encodes the attribute.
    let emb = dir.path("emb.txt");
    let mut text = String::new();
    for i in 0..40 {
        text.push_str(&format!("f{i} -1.0 {} 0.0\n", 0.01 * i as f64));
        text.push_str(&format!("m{i} 1.0 {} 0.0\n", -0.01 * i as f64));
        text.push_str(&format!("n{i} 0.0 {} 0.5\n", 0.02 * i as f64));
    }
    std::fs::write(&emb, text).unwrap();
    let pairs = dir.path("pairs.txt");
    std::fs::write(&pairs, "f0 m0\nf1 m1\nf2 m2\nf3 m3\n").unwrap();
    let run_dir = dir.path("run");
    let out = run(&[
        "debias",
        "--embeddings",
        emb.to_str().unwrap(),
        "--pairs",
        pairs.to_str().unwrap(),
        "--top_n",
        "20",
        "--output_dir",
        run_dir.to_str().unwrap(),
        "--objective",
        "unconstrained",
        "--epochs",
        "5",
        "--seed",
        "2",
    ]);
    assert!(out.status.success(), "debias failed: {out:?}");
    assert!(run_dir.join("debiased.frds").exists());

    let missing = Path::new("/definitely/not/here.txt");
    let out = run(&[
        "debias",
        "--embeddings",
        missing.to_str().unwrap(),
        "--pairs",
        pairs.to_str().unwrap(),
        "--output_dir",
        dir.path("run2").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
}
