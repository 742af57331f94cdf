//! End-to-end tests of the `gossip-sim` binary.

use std::path::Path;
use std::process::{Command, Output};

use gossip_harness::read_csv;
use gossip_harness::record::read_records;
use gossip_harness::sweep::{AggregateRow, RunRow};
use tempfile::TempDir;

fn gossip_sim(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gossip-sim"))
        .args(args)
        .current_dir(cwd)
        .env_remove("GOSSIP_SIM_OUT")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const TWO_USERS: &str = r#"
schema_version = 1
[run]
n = 2
k = 1
protocol = "random-push"
seed = 1
"#;

#[test]
fn simulate_two_users() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "run.toml", TWO_USERS);
    let out = gossip_sim(&["simulate", "--config", &cfg, "--out", "res"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let records = read_records(&dir.path().join("res/run.jsonl")).unwrap();
    assert_eq!(records.len(), 1);
    assert!(records[0].completed);
    assert_eq!(records[0].completion_slot, Some(1));
}

#[test]
fn malformed_config_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "bad.toml",
        "schema_version = 1\n[run]\nn = 1\nk = 1\nprotocol = \"random-pull\"\n",
    );
    let out = gossip_sim(&["simulate", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("run.n"), "{}", stderr(&out));

    let cfg = write(dir.path(), "syntax.toml", "schema_version = 1\n[run\n");
    let out = gossip_sim(&["simulate", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_is_deterministic_and_seed_overridable() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "run.toml",
        "schema_version = 1\n[run]\nn = 40\nk = 12\nprotocol = \"interleave\"\ncontacts = 4\nseed = 3\ntrace = true\n",
    );
    let read = |sub: &str| std::fs::read(dir.path().join(sub).join("run.jsonl")).unwrap();
    for sub in ["a", "b"] {
        let out = gossip_sim(&["simulate", "--config", &cfg, "--out", sub], dir.path());
        assert!(out.status.success(), "{}", stderr(&out));
    }
    assert_eq!(read("a"), read("b"));
    let trace = std::fs::read_to_string(dir.path().join("a/trace.csv")).unwrap();
    assert!(trace.starts_with("#schema gossip-trace/1\nslot,from,to,piece,kind\n"));

    let out = gossip_sim(
        &["simulate", "--config", &cfg, "--out", "c", "--seed", "4"],
        dir.path(),
    );
    assert!(out.status.success());
    assert_ne!(read("a"), read("c"));
}

#[test]
fn output_directory_from_environment() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "run.toml", TWO_USERS);
    let out = Command::new(env!("CARGO_BIN_EXE_gossip-sim"))
        .args(["simulate", "--config", &cfg])
        .current_dir(dir.path())
        .env("GOSSIP_SIM_OUT", "from-env")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("from-env/run.jsonl").exists());
}

const SWEEP: &str = r#"
schema_version = 1
[run]
protocol = "random-pull"
[sweep]
seeds = 3
master_seed = 9
[sweep.axes]
n = [64, 256]
k = [8]
"#;

#[test]
fn sweep_rows_and_aggregates() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "sweep.toml", SWEEP);
    let out = gossip_sim(
        &["sweep", "--config", &cfg, "--out", "s1", "--jobs", "2"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));

    let (schema, rows): (String, Vec<RunRow>) = read_csv(&dir.path().join("s1/runs.csv")).unwrap();
    assert_eq!(schema, "gossip-sweep-runs/1");
    assert_eq!(rows.len(), 6);
    let (_, agg): (String, Vec<AggregateRow>) =
        read_csv(&dir.path().join("s1/aggregate.csv")).unwrap();
    assert_eq!(agg.len(), 2);
    for cell in &agg {
        let members: Vec<f64> = rows
            .iter()
            .filter(|r| r.cell == cell.cell)
            .map(|r| r.completion_slot.unwrap() as f64)
            .collect();
        assert_eq!(members.len(), 3);
        let mean = members.iter().sum::<f64>() / 3.0;
        assert!((cell.mean_completion.unwrap() - mean).abs() < 1e-9);
    }

    // Same grid on one thread: every reproducible column matches.
    let out = gossip_sim(
        &["sweep", "--config", &cfg, "--out", "s2", "--jobs", "1"],
        dir.path(),
    );
    assert!(out.status.success());
    let (_, again): (String, Vec<RunRow>) = read_csv(&dir.path().join("s2/runs.csv")).unwrap();
    for (a, b) in rows.iter().zip(&again) {
        let mut b = b.clone();
        b.wall_ms = a.wall_ms;
        assert_eq!(*a, b);
    }
    let records = read_records(&dir.path().join("s1/records.jsonl")).unwrap();
    assert_eq!(records.len(), 6);
    assert_eq!(records[4].config.seed, rows[4].seed);
}

#[test]
fn sweep_validates_the_whole_grid_first() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "sweep.toml",
        &SWEEP.replace("n = [64, 256]", "n = [64, 1]"),
    );
    let out = gossip_sim(&["sweep", "--config", &cfg, "--out", "s"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("s/runs.csv").exists());
}

#[test]
fn pull_completion_grows_with_n() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "sweep.toml",
        &SWEEP
            .replace("n = [64, 256]", "n = [64, 256, 1024]")
            .replace("seeds = 3", "seeds = 5"),
    );
    let out = gossip_sim(&["sweep", "--config", &cfg, "--out", "s"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let (_, agg): (String, Vec<AggregateRow>) =
        read_csv(&dir.path().join("s/aggregate.csv")).unwrap();
    let means: Vec<f64> = agg.iter().map(|a| a.mean_completion.unwrap()).collect();
    assert!(means.windows(2).all(|w| w[0] < w[1]), "{means:?}");
}

#[test]
fn verify_interleave_and_refusal() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "sweep.toml",
        "schema_version = 1\n[run]\nn = 100\nk = 50\nprotocol = \"interleave\"\n[sweep]\nseeds = 4\n",
    );
    assert!(
        gossip_sim(&["sweep", "--config", &cfg, "--out", "il"], dir.path())
            .status
            .success()
    );
    let out = gossip_sim(
        &["verify", "--results", "il", "--theorem", "6", "--out", "il"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("il/report.json")).unwrap())
            .unwrap();
    assert_eq!(report["verdict"], "pass");
    assert_eq!(report["samples"], 4);

    let out = gossip_sim(
        &["verify", "--results", "il", "--theorem", "5", "--out", "il"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2), "theorem 5 needs priority-push");

    let pull = write(
        dir.path(),
        "pull.toml",
        "schema_version = 1\n[run]\nn = 64\nk = 4\nprotocol = \"random-pull\"\n[sweep]\nseeds = 2\n",
    );
    assert!(
        gossip_sim(&["sweep", "--config", &pull, "--out", "pl"], dir.path())
            .status
            .success()
    );
    let out = gossip_sim(&["verify", "--results", "pl", "--theorem", "7"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("refused"), "{}", stderr(&out));

    let out = gossip_sim(
        &[
            "verify",
            "--results",
            "pl",
            "--theorem",
            "3",
            "--param",
            "delta=0.1",
            "--param",
            "c=1",
            "--out",
            "pl",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));

    // One run pushed past the bound makes verify exit 1.
    let path = dir.path().join("pl/records.jsonl");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    lines[0]["completion_slot"] = serde_json::json!(1_000_000);
    let edited: String = lines.iter().map(|v| format!("{v}\n")).collect();
    std::fs::write(dir.path().join("late.jsonl"), edited).unwrap();
    let out = gossip_sim(
        &[
            "verify",
            "--results",
            "late.jsonl",
            "--theorem",
            "3",
            "--out",
            "late",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
}

#[test]
fn verify_seeded_pull() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "sweep.toml",
        "schema_version = 1\n[run]\nn = 200\nk = 20\nprotocol = \"sequential-pull\"\ninitial_state = \"eta-seeded\"\neta = 0.5\n[sweep]\nseeds = 10\n",
    );
    assert!(
        gossip_sim(&["sweep", "--config", &cfg, "--out", "s"], dir.path())
            .status
            .success()
    );
    let out = gossip_sim(
        &[
            "verify",
            "--results",
            "s/records.jsonl",
            "--theorem",
            "2",
            "--out",
            "s",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn reproduce_small_figures() {
    let dir = TempDir::new().unwrap();
    for fig in ["fig1", "fig2", "fig3"] {
        let out = gossip_sim(
            &[
                "reproduce",
                "--figure",
                fig,
                "--scale",
                "0.05",
                "--seeds",
                "2",
                "--out",
                "f",
            ],
            dir.path(),
        );
        assert!(out.status.success(), "{fig}: {}", stderr(&out));
    }
    let fig1 = std::fs::read_to_string(dir.path().join("f/fig1.csv")).unwrap();
    let lines: Vec<&str> = fig1.lines().collect();
    assert!(lines[0].starts_with("#schema gossip-fig1/1 n=25 k=50"));
    assert_eq!(lines.len(), 2 + 8);
    assert!(lines[9].starts_with("full,2,2,"));

    let fig3 = std::fs::read_to_string(dir.path().join("f/fig3.csv")).unwrap();
    assert!(fig3.lines().nth(1).unwrap() == "cell,d,mean,min,max");
    for l in 1..=4 {
        assert!(fig3.contains(&format!("\nl={l},0,")));
    }

    let out = gossip_sim(&["reproduce", "--figure", "fig7"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
