//! End-to-end runs of the command-line tool.

use std::path::Path;
use std::process::{Command, Output};

fn uwmac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uwmac")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

const TINY: &str = r#"
[learning]
hidden_sizes = [8, 8, 8]
batch_size = 8
replay_capacity = 200
episodes = 2
max_steps = 20
window_m = 2
"#;

#[test]
fn validate_reports_and_exits_with_code_two() {
    let ok = uwmac(&["validate"]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stderr));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[network]\nslot_length_s = 1.0\n[learning]\nr_p = 0.5\n").unwrap();
    let o = uwmac(&["validate", "--config", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("slot_length_s") && err.contains("r_p"), "{err}");

    let unknown = dir.path().join("unknown.toml");
    std::fs::write(&unknown, "[network]\nslots = 3\n").unwrap();
    assert_eq!(code(&uwmac(&["validate", "--config", unknown.to_str().unwrap()])), 2);

    assert_eq!(code(&uwmac(&["validate", "--loss", "0.2,1.5"])), 2);
    assert_eq!(code(&uwmac(&["validate", "--protocol", "csma"])), 2);
}

#[test]
fn zero_episodes_train_writes_empty_curves_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = uwmac(&["train", "--episodes", "0", "--seed", "7", "--out", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read(dir.path().join("reward_seed7.csv")), "series,episode,reward\n");
    assert!(read(dir.path().join("reward_seed7.svg")).contains("<svg"));
    assert!(!dir.path().join("checkpoints").exists());
}

#[test]
fn train_then_eval_then_plot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, TINY).unwrap();
    let out = dir.path().join("run");
    let (cfg_s, out_s) = (cfg.to_str().unwrap(), out.to_str().unwrap());

    let t = uwmac(&["train", "--config", cfg_s, "--seed", "3", "--topology", "nonequidistant", "--out", out_s]);
    assert_eq!(code(&t), 0, "{}", String::from_utf8_lossy(&t.stderr));
    assert!(out.join("checkpoints/node3.ckpt").exists());
    assert!(read(out.join("checkpoints/manifest.json")).contains("\"seed\": 3"));
    assert_eq!(read(out.join("reward_seed3.csv")).lines().count(), 3);

    let e = uwmac(&[
        "eval", "--config", cfg_s, "--seed", "3", "--topology", "nonequidistant", "--steps", "30", "--loss", "0.2,0.3",
        "--completion", "on", "--out", out_s,
    ]);
    assert_eq!(code(&e), 0, "{}", String::from_utf8_lossy(&e.stderr));
    let eval_seed = 3 + 1_000_003;
    let metrics = read(out.join(format!("metrics_eamac_seed{eval_seed}.csv")));
    let lines: Vec<&str> = metrics.lines().collect();
    assert_eq!(lines[0], "# train_seed=3");
    assert!(lines[1].starts_with(&format!("# protocol=eamac seed={eval_seed}")));
    assert_eq!(lines[2], "node,tc,rac,slot_count,silence,energy");
    assert_eq!(lines.len(), 3 + 4);
    let events = read(out.join(format!("events_eamac_seed{eval_seed}.jsonl")));
    let header: serde_json::Value = serde_json::from_str(events.lines().next().unwrap()).unwrap();
    assert_eq!(header["seed"], eval_seed);
    for line in events.lines() {
        serde_json::from_str::<serde_json::Value>(line).unwrap();
    }
    assert_eq!(read(out.join(format!("agents_seed{eval_seed}.jsonl"))).lines().count(), 4 * 30);

    // Checkpoints for another sender count are refused.
    let six = dir.path().join("six.toml");
    std::fs::write(&six, format!("{TINY}\n[network]\nn_senders = 6\n")).unwrap();
    let o = uwmac(&["eval", "--config", six.to_str().unwrap(), "--out", out_s, "--checkpoints", out.join("checkpoints").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("arity"));

    std::fs::remove_file(out.join(format!("raster_eamac_seed{eval_seed}.svg"))).unwrap();
    let p = uwmac(&["plot", "--out", out_s]);
    assert_eq!(code(&p), 0, "{}", String::from_utf8_lossy(&p.stderr));
    assert!(read(out.join(format!("raster_eamac_seed{eval_seed}.svg"))).contains("<svg"));
}

#[test]
fn compare_writes_table_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = uwmac(&["compare", "--protocol", "tdma,aloha,sfama", "--seeds", "2", "--seed", "10", "--out", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(dir.path().join("compare_seed10.csv"));
    assert!(csv.starts_with("# seeds=10..12"));
    assert!(csv.contains("tdma,rdc,,150,0"));
    let table = read(dir.path().join("compare_seed10.txt"));
    assert!(table.contains("sfama"));
}

#[test]
fn diverging_training_exits_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("diverge.toml");
    std::fs::write(&cfg, format!("{TINY}learning_rate = 1e300\noptimizer = \"sgd\"\n")).unwrap();
    let o = uwmac(&["train", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("non-finite"));
}
