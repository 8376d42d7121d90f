use std::process::Command;

fn corridor() -> Command {
    Command::new(env!("CARGO_BIN_EXE_corridor"))
}

#[test]
fn train_eval_compare_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("p.ckpt");
    let cfg = dir.path().join("train.toml");
    std::fs::write(&cfg, "seed = 3\n[ppo]\nhidden = [16, 8]\nupdate_every = 64\n").unwrap();
    let st = corridor()
        .args(["train", "--mini", "--steps", "500", "--actors", "2", "--sequential", "--config"])
        .arg(&cfg)
        .arg("--checkpoint-out")
        .arg(&ck)
        .arg("--curve")
        .arg(dir.path().join("curve.csv"))
        .output()
        .unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    assert!(ck.exists());

    let out = dir.path().join("eval");
    let st = corridor()
        .args(["eval", "--controller", "fixed,unsignalized,rl", "--scales", "1,2", "--runs", "2", "--checkpoint"])
        .arg(&ck)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    for f in ["runs.csv", "summary.csv", "summary.txt", "comparison.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let runs = std::fs::read_to_string(out.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 3 * 2 * 2);

    let cmp = dir.path().join("cmp.csv");
    let st = corridor().args(["compare", "--in"]).arg(&out).arg("--out").arg(&cmp).output().unwrap();
    assert!(st.status.success());
    assert_eq!(std::fs::read(&cmp).unwrap(), std::fs::read(out.join("comparison.csv")).unwrap());
}

#[test]
fn bad_input_fails() {
    let st = corridor().args(["eval", "--controller", "rl", "--mini", "--runs", "1", "--scales", "1"]).output().unwrap();
    assert!(!st.status.success());
    let st = corridor().args(["eval", "--controller", "bogus", "--mini"]).output().unwrap();
    assert!(!st.status.success());
    let dir = tempfile::tempdir().unwrap();
    let st = corridor().args(["compare", "--in"]).arg(dir.path()).arg("--out").arg(dir.path().join("x.csv")).output().unwrap();
    assert!(!st.status.success());
}
