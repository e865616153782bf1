use std::path::Path;
use std::process::{Command, Output};

fn rsimle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rsimle"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("exp.txt");
    let text = format!(
        "[dataset]\nshape = two_clusters\nn_points = 12\n\n[model]\nhidden = 8, 8\n\n\
         [trainer]\nepochs = 5\n\n[metrics]\neval_samples = 50\n{extra}"
    );
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn train_then_plot_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = dir.path().join("run");
    let out_s = out.display().to_string();
    let o = rsimle(&["train", "--config", &cfg, "--seed", "0,1", "--out", &out_s]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["config.txt", "data.csv", "metrics.csv", "epochs_seed1.csv", "scatter_seed0.svg"] {
        assert!(out.join(f).exists(), "missing {f}");
    }

    let before = std::fs::read(out.join("scatter_seed0.svg")).unwrap();
    let o = rsimle(&["plot", "--out", &out_s]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(out.join("scatter_seed0.svg")).unwrap(), before);

    let o = rsimle(&["eval", "--out", &out_s]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("eval.csv").exists());
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = dir.path().join("run");
    let out_s = out.display().to_string();
    let o = rsimle(&[
        "train", "--config", &cfg, "--out", &out_s, "--objective", "rs_imle", "--epsilon", "0.1",
        "--set", "trainer.epsilon_units=diameter",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let echoed = std::fs::read_to_string(out.join("config.txt")).unwrap();
    assert!(echoed.contains("objective = rs-imle"), "{echoed}");
    assert!(echoed.contains("epsilon_units = diameter"), "{echoed}");
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bogus = 1\n");
    let o = rsimle(&["train", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));

    let o = rsimle(&["train", "--objective", "rs_imle", "--epsilon", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn degenerate_epsilon_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = dir.path().join("run").display().to_string();
    let o = rsimle(&["train", "--config", &cfg, "--out", &out, "--objective", "rs_imle", "--epsilon", "100"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("degenerate"));
}

#[test]
fn theory_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    let o = rsimle(&["theory", "--out", &out, "--trials", "500"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ks = std::fs::read_to_string(dir.path().join("ks.csv")).unwrap();
    assert_eq!(ks.lines().count(), 6);
    assert!(dir.path().join("min_cdf.svg").exists());
}
