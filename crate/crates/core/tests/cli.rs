use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use intersect_core::harness::run::{rates_from_pairs, read_predictions};
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_intersect"));
    c.env_remove("INTERSECT_OUTPUT_ROOT");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn metrics(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("metrics.json")).unwrap()).unwrap()
}

#[test]
fn gen_is_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let out = run(&["gen", "--seed", "7", "--samples", "50", "-o", d.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["data.csv", "target.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = tmp.path().join("c");
    run(&["gen", "--seed", "8", "--samples", "50", "-o", c.to_str().unwrap()]);
    assert_ne!(fs::read(a.join("data.csv")).unwrap(), fs::read(c.join("data.csv")).unwrap());
}

#[test]
fn gen_csv_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["gen", "--samples", "20", "-o", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let text = fs::read_to_string(tmp.path().join("data.csv")).unwrap();
    let mut lines = text.lines().skip_while(|l| l.starts_with('#'));
    assert_eq!(lines.next().unwrap(), "x0,x1,x2,label");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 20);
    for r in rows {
        let f: Vec<&str> = r.split(',').collect();
        assert_eq!(f.len(), 4);
        // 17 significant digits: d.dddddddddddddddde±x
        for v in &f[..3] {
            let mant = v.trim_start_matches('-').split('e').next().unwrap();
            assert_eq!(mant.len(), 18, "{v}");
        }
        assert!(f[3] == "1" || f[3] == "-1", "{}", f[3]);
    }
    // the resolved config is echoed
    assert!(text.contains("# [source]"));
    assert!(fs::read_to_string(tmp.path().join("target.txt")).unwrap().contains("kind target"));
}

#[test]
fn output_root_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("from-env");
    let out = bin().args(["gen", "--samples", "5"]).env("INTERSECT_OUTPUT_ROOT", &root).output().unwrap();
    assert_eq!(code(&out), 0);
    assert!(root.join("data.csv").exists());
}

#[test]
fn config_errors_exit_with_code_1() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "[learner]\nepsilom = 0.1\n").unwrap();
    let out = run(&["gen", "-c", cfg.to_str().unwrap(), "-o", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilom"));

    let out = run(&["gen", "--set", "source.rho=2", "-o", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let out = run(&["gen", "--set", "learner.typo=2", "-o", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let out = run(&["eval", "-o", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&out), 1, "eval without a hypothesis");
}

#[test]
fn thin_body_exits_with_code_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "sample-diag",
        "--set",
        "learner.slack_target=0.9",
        "--set",
        "learner.m_plus=100",
        "-o",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn boost_stall_exits_with_code_4() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("stall.toml");
    // no region can carry all the mass, and a balanced source gets no
    // constant fallback
    fs::write(
        &cfg,
        "[source]\nkind = \"sphere\"\nn = 2\nk = 1\nrho = 0.2\nbalance = 0.5\n\n\
         [learner]\nm_plus = 200\n\n\
         [boost]\nregion_gamma = 1.0\nregion_attempt_budget = 1\nattempts_per_round = 1\npool_size = 500\nmultiset_size = 500\nholdout_size = 500\n",
    )
    .unwrap();
    let out = run(&["learn-boost", "-c", cfg.to_str().unwrap(), "-o", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("round 0"));
}

#[test]
fn sample_diag_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "sample-diag",
        "--set",
        "diag.samples=30",
        "--set",
        "learner.m_plus=300",
        "--set",
        "learner.steps_per_sample=20",
        "-o",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(tmp.path().join("walk.csv")).unwrap();
    let mut lines = text.lines().skip_while(|l| l.starts_with('#'));
    assert_eq!(lines.next().unwrap(), "index,w0,w1,w2,w3,w4,min_slack");
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 30);
    assert!(rows.iter().all(|r| r[6] >= 0.0));
}

fn quick_cover_config(dir: &Path) -> std::path::PathBuf {
    let cfg = dir.join("cover.toml");
    fs::write(
        &cfg,
        "[run]\nseed = 3\n\n[source]\nkind = \"sphere\"\nn = 2\nk = 2\nrho = 0.2\nbalance = 0.3\n\n\
         [learner]\nepsilon = 0.05\ngamma = 0.05\nm_plus = 500\nattempt_budget = 50\n\n[eval]\nholdout = 3000\n",
    )
    .unwrap();
    cfg
}

#[test]
fn learn_cover_artifacts_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_cover_config(tmp.path());
    let out_dir = tmp.path().join("cover");
    let out = run(&["learn-cover", "-c", cfg.to_str().unwrap(), "-o", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let m = metrics(&out_dir);
    assert_eq!(m["config"]["run"]["seed"], 3);
    assert_eq!(m["evaluation_samples"], 3000);
    assert_eq!(m["termination_tag"], "ret-good");
    assert!(m["region_count"].as_u64().unwrap() >= 1);

    // rates recomputed from the prediction file match exactly
    let pairs = read_predictions(&out_dir.join("predictions.csv")).unwrap();
    let r = rates_from_pairs(&pairs).unwrap();
    assert_eq!(r.total, m["total_error"].as_f64().unwrap());
    assert_eq!(r.false_neg, m["false_neg"].as_f64().unwrap());
    assert_eq!(r.false_pos, m["false_pos"].as_f64().unwrap());

    // every artifact carries the resolved config
    let rounds = fs::read_to_string(out_dir.join("rounds.jsonl")).unwrap();
    let header: Value = serde_json::from_str(rounds.lines().next().unwrap()).unwrap();
    assert_eq!(header["config"]["learner"]["epsilon"], 0.05);
    for f in ["hypothesis.txt", "predictions.csv", "target.txt"] {
        assert!(fs::read_to_string(out_dir.join(f)).unwrap().contains("# resolved config"), "{f}");
    }

    // eval reloads the cover record and reproduces the rates on the same points
    let eval_dir = tmp.path().join("eval");
    let out = run(&[
        "eval",
        "--hypothesis",
        out_dir.join("hypothesis.txt").to_str().unwrap(),
        "--data",
        out_dir.join("predictions.csv").to_str().unwrap(),
        "-o",
        eval_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let e = metrics(&eval_dir);
    assert_eq!(e["total_error"], m["total_error"]);
    assert_eq!(fs::read(eval_dir.join("predictions.csv")).unwrap().len() > 0, true);

    // the target record evaluates to zero error on its own labels
    let out = run(&[
        "eval",
        "--hypothesis",
        out_dir.join("target.txt").to_str().unwrap(),
        "--data",
        out_dir.join("predictions.csv").to_str().unwrap(),
        "-o",
        eval_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(metrics(&eval_dir)["total_error"], 0.0);
}

#[test]
fn learn_cover_is_deterministic_apart_from_wall_time() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_cover_config(tmp.path());
    let mut seen = Vec::new();
    for name in ["a", "b"] {
        let d = tmp.path().join(name);
        let out = run(&["learn-cover", "-c", cfg.to_str().unwrap(), "-o", d.to_str().unwrap()]);
        assert_eq!(code(&out), 0);
        let mut m = metrics(&d);
        m.as_object_mut().unwrap().remove("wall_time_s");
        seen.push((m, fs::read(d.join("hypothesis.txt")).unwrap(), fs::read(d.join("predictions.csv")).unwrap()));
    }
    assert_eq!(seen[0], seen[1]);
}

#[test]
fn learn_boost_artifacts_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("boost.toml");
    fs::write(
        &cfg,
        "[source]\nkind = \"sphere\"\nn = 2\nk = 2\nrho = 0.2\nbalance = 0.3\n\n[learner]\nm_plus = 500\n\n\
         [boost]\npool_size = 2000\nmultiset_size = 2000\nholdout_size = 2000\n\n[eval]\nholdout = 2000\n",
    )
    .unwrap();
    let out = run(&["learn-boost", "-c", cfg.to_str().unwrap(), "-o", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let m = metrics(tmp.path());
    let r = rates_from_pairs(&read_predictions(&tmp.path().join("predictions.csv")).unwrap()).unwrap();
    assert_eq!(r.total, m["total_error"].as_f64().unwrap());
    assert!(m["converged"].is_boolean());
    let h: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("hypothesis.json")).unwrap()).unwrap();
    assert!(h["hypothesis"]["rounds"].as_array().is_some_and(|r| !r.is_empty()));
    assert_eq!(h["config"]["boost"]["pool_size"], 2000);
}
