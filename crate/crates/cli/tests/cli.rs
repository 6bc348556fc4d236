use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn asnets(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_asnets")).current_dir(dir).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn gen(dir: &Path, domain: &str, size: &str, out: &str) {
    let o = asnets(dir, &["gen-domain", domain, "--size", size, "-o", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn generate_then_ground() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "ttw", "2", "ttw2.ppddl");
    assert!(dir.path().join("ttw.pddl").exists());
    let o = asnets(dir.path(), &["ground", "ttw.pddl", "ttw2.ppddl", "--emit-topology"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["propositions"], 51);
    assert_eq!(v["actions"], 35);
    assert_eq!(v["deterministic"], false);
    assert_eq!(v["topology"]["layers"], 2);
    assert_eq!(v["topology"]["schemas"], 2);
}

#[test]
fn usage_and_help_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&asnets(dir.path(), &["train", "--help"])), 0);
    assert_eq!(code(&asnets(dir.path(), &["train"])), 2);
    assert_eq!(code(&asnets(dir.path(), &["no-such-command"])), 2);
    assert_eq!(code(&asnets(dir.path(), &[])), 2);
    assert_eq!(code(&asnets(dir.path(), &["ground", "missing.pddl", "missing.ppddl"])), 2);
    assert_eq!(code(&asnets(dir.path(), &["gen-domain", "gold-miner", "--size", "2", "-o", "x"])), 2);
}

#[test]
fn effective_config_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let o = asnets(dir.path(), &["--seed", "9", "--time-budget", "60", "--dump-effective-config"]);
    assert_eq!(code(&o), 0);
    let first = stdout(&o);
    let v: serde_json::Value = serde_json::from_str(&first).unwrap();
    assert_eq!(v["train"]["seed"], 9);
    assert_eq!(v["eval"]["seed"], 9);
    assert_eq!(v["train"]["max_wall_time"], 60.0);
    std::fs::write(dir.path().join("cfg.json"), &first).unwrap();
    let again = asnets(dir.path(), &["--config", "cfg.json", "--dump-effective-config"]);
    assert_eq!(stdout(&again), first);

    std::fs::write(dir.path().join("bad.json"), r#"{"train": {"layerz": 3}}"#).unwrap();
    assert_eq!(code(&asnets(dir.path(), &["--config", "bad.json", "--dump-effective-config"])), 2);
}

#[test]
fn verify_sparse_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let cn = fixture("cn-sparse.json");
    let o = asnets(dir.path(), &["verify-sparse", "--domain", "cosanostra", "--weights", cn.to_str().unwrap(), "--K", "5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("b3:"));

    let ttw = fixture("ttw-sparse.json");
    let o = asnets(dir.path(), &["verify-sparse", "--domain", "ttw", "--weights", ttw.to_str().unwrap(), "--K", "2", "--rollouts", "4"]);
    assert_eq!(code(&o), 0);

    // Pruning every weight leaves a network that cannot tell the booths apart.
    let o = asnets(dir.path(), &["sparsify", "--weights", cn.to_str().unwrap(), "--threshold", "1000", "-o", "zero.json"]);
    assert_eq!(code(&o), 0);
    let o = asnets(dir.path(), &["verify-sparse", "--domain", "cosanostra", "--weights", "zero.json", "--K", "5"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn eval_is_seeded_and_checks_coverage() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "ttw", "1", "p1.ppddl");
    gen(dir.path(), "ttw", "2", "p2.ppddl");
    let w = fixture("ttw-sparse.json");
    let args = ["--seed", "4", "--single-thread", "eval", "ttw.pddl", "p1.ppddl", "p2.ppddl", "--weights", w.to_str().unwrap(), "--mode", "stochastic", "--rollouts", "6", "--json"];
    let a = asnets(dir.path(), &args);
    let b = asnets(dir.path(), &args);
    assert_eq!(code(&a), 0);
    assert_eq!(stdout(&a), stdout(&b));
    let v: serde_json::Value = serde_json::from_str(&stdout(&a)).unwrap();
    assert_eq!(v["problems"].as_array().unwrap().len(), 2);

    let o = asnets(dir.path(), &["eval", "ttw.pddl", "p1.ppddl", "--weights", w.to_str().unwrap(), "--require-coverage", "1.0"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("30/30"));
    let o = asnets(dir.path(), &["eval", "ttw.pddl", "p1.ppddl", "--weights", w.to_str().unwrap(), "--require-coverage", "2.0"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn train_then_inspect() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "ttw", "1", "p1.ppddl");
    let cfg = r#"{"train": {"d_h": 3, "train_iters": 5, "batch_size": 8, "trajectories_per_epoch": 2, "max_epochs": 2}}"#;
    std::fs::write(dir.path().join("small.json"), cfg).unwrap();
    let o = asnets(dir.path(), &["--config", "small.json", "train", "ttw.pddl", "p1.ppddl", "-o", "net.json", "--log", "log.jsonl", "--layers", "1", "--no-landmarks"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(summary["epochs"], 2);
    assert_eq!(std::fs::read_to_string(dir.path().join("log.jsonl")).unwrap().lines().count(), 2);

    let o = asnets(dir.path(), &["rollout", "ttw.pddl", "p1.ppddl", "--weights", "net.json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["outcome"].is_string());

    let o = asnets(dir.path(), &["export-activations", "ttw.pddl", "p1.ppddl", "--weights", "net.json", "--csv", "acts.csv"]);
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(dir.path().join("acts.csv")).unwrap();
    assert!(csv.starts_with("step,kind,layer,unit,channel,value,enabled,chosen"));
}

#[test]
fn equations_of_the_tireworld_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let w = fixture("ttw-sparse.json");
    let o = asnets(dir.path(), &["export-equations", "--weights", w.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("act3[move-car] = 1.12 * prop2[vehicle-at(?to)]"));
}

#[test]
fn heuristic_and_teacher_dumps() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "ttw", "1", "p1.ppddl");
    let o = asnets(dir.path(), &["inspect-heuristic", "ttw.pddl", "p1.ppddl"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["hadd"].as_f64().unwrap() >= v["hmax"].as_f64().unwrap());
    let o = asnets(dir.path(), &["teach", "ttw.pddl", "p1.ppddl", "--search", "lrtdp"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["actions"].as_array().unwrap().iter().any(|a| a["optimal"] == true));
    let o = asnets(dir.path(), &["teach", "ttw.pddl", "p1.ppddl", "--fact", "no-such-atom()"]);
    assert_eq!(code(&o), 2);
}
