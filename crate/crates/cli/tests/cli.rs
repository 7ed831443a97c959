use std::path::PathBuf;
use std::process::{Command, Output};

struct Env {
    dir: tempfile::TempDir,
}

impl Env {
    fn new(q: usize) -> Self {
        let env = Self { dir: tempfile::tempdir().unwrap() };
        let out = env.run(&["setup", "--q", &q.to_string(), "--seed", "1", "--params", env.params().to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        env
    }

    fn params(&self) -> PathBuf {
        self.dir.path().join("params.bin")
    }

    fn store(&self) -> PathBuf {
        self.dir.path().join("store")
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_kbpt")).args(args).current_dir(self.dir.path()).output().unwrap()
    }

    /// Runs a store subcommand with --store and --params filled in.
    fn with_store(&self, cmd: &str, rest: &[&str]) -> Output {
        let store = self.store();
        let params = self.params();
        let mut args = vec![cmd, "--store", store.to_str().unwrap(), "--params", params.to_str().unwrap()];
        args.extend_from_slice(rest);
        self.run(&args)
    }

    fn ok(&self, cmd: &str, rest: &[&str]) -> String {
        let out = self.with_store(cmd, rest);
        assert_eq!(out.status.code(), Some(0), "{cmd} {rest:?}: {}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap().trim().to_string()
    }

    fn verify(&self, root: &str, proof: &str, query: &[&str]) -> Option<i32> {
        let params = self.params();
        let mut args = vec!["verify", "--params", params.to_str().unwrap(), "--root", root, "--proof", proof];
        args.extend_from_slice(query);
        self.run(&args).status.code()
    }
}

fn populate(env: &Env) {
    for (k, v) in [("apple", "red"), ("banana", "yellow"), ("cherry", "dark red"), ("date", "brown"), ("fig", "purple"), ("grape", "green"), ("kiwi", "brown"), ("lemon", "yellow")] {
        env.ok("insert", &[k, v]);
    }
}

fn flip_hex(hex: &str, at: usize) -> String {
    let mut chars: Vec<char> = hex.chars().collect();
    chars[at] = if chars[at] == '0' { '1' } else { '0' };
    chars.into_iter().collect()
}

#[test]
fn setup_is_deterministic() {
    let a = Env::new(4);
    let b = Env::new(4);
    assert_eq!(std::fs::read(a.params()).unwrap(), std::fs::read(b.params()).unwrap());
    let out = a.run(&["setup", "--q", "4", "--seed", "1", "--params", "other.bin"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
}

#[test]
fn setup_rejects_small_q() {
    let env = Env::new(4);
    let out = env.run(&["setup", "--q", "2", "--seed", "1", "--params", "x.bin"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!env.dir.path().join("x.bin").exists());
}

#[test]
fn usage_errors_exit_2() {
    let env = Env::new(4);
    assert_eq!(env.run(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(env.run(&["insert"]).status.code(), Some(2));
    assert_eq!(env.with_store("get", &["--hex", "zz"]).status.code(), Some(2));
}

#[test]
fn io_errors_exit_3() {
    let env = Env::new(4);
    let out = env.run(&["get", "--params", "missing.bin", "--store", "s", "k"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn data_commands() {
    let env = Env::new(4);
    populate(&env);
    assert_eq!(env.ok("get", &["cherry"]), "dark red");
    assert_eq!(env.with_store("get", &["mango"]).status.code(), Some(1));
    assert_eq!(env.ok("range", &["c", "fz"]), "cherry\tdark red\ndate\tbrown\nfig\tpurple");

    env.ok("delete", &["date"]);
    assert_eq!(env.with_store("get", &["date"]).status.code(), Some(1));
    assert_eq!(env.with_store("delete", &["date"]).status.code(), Some(1));

    env.ok("insert", &["--hex", "00ff", "0102"]);
    assert_eq!(env.ok("get", &["--hex", "00ff"]), "0102");

    let history = env.ok("history", &[]);
    assert_eq!(history.lines().count(), 1 + 8 + 1 + 1);
    let last = history.lines().last().unwrap();
    assert!(last.ends_with("\t8"));
}

#[test]
fn proofs_verify_without_the_store() {
    let env = Env::new(4);
    populate(&env);
    let root = env.ok("root", &[]);
    let member = env.ok("prove", &["fig"]);
    let absent = env.ok("prove-absent", &["elder"]);
    let range = env.ok("prove-range", &["b", "g"]);

    // the verifier only sees params, root, proof and query
    std::fs::remove_dir_all(env.store()).unwrap();
    assert_eq!(env.verify(&root, &member, &["fig", "purple"]), Some(0));
    assert_eq!(env.verify(&root, &member, &["fig", "violet"]), Some(1));
    assert_eq!(env.verify(&root, &member, &["fog", "purple"]), Some(1));
    assert_eq!(env.verify(&root, &absent, &["elder"]), Some(0));
    assert_eq!(env.verify(&root, &absent, &["fig"]), Some(1));
    assert_eq!(env.verify(&root, &range, &["b", "g"]), Some(0));
    assert_eq!(env.verify(&root, &range, &["b", "z"]), Some(1));
    assert_eq!(env.verify(&root, &member, &["fig"]), Some(2));
}

#[test]
fn tampered_blobs_are_rejected() {
    let env = Env::new(4);
    populate(&env);
    let root = env.ok("root", &[]);
    let cases = [
        (env.ok("prove", &["banana"]), vec!["banana", "yellow"]),
        (env.ok("prove-absent", &["coconut"]), vec!["coconut"]),
        (env.ok("prove-absent", &["zucchini"]), vec!["zucchini"]),
        (env.ok("prove-range", &["c", "h"]), vec!["c", "h"]),
    ];
    for (proof, query) in &cases {
        assert_eq!(env.verify(&root, proof, query), Some(0));
        // flip one hex digit at a spread of positions past the header
        for at in (4..proof.len()).step_by(proof.len() / 23 + 1) {
            let bad = flip_hex(proof, at);
            assert_eq!(env.verify(&root, &bad, query), Some(1), "flip at {at} accepted");
        }
        assert_eq!(env.verify(&root, &proof[..proof.len() - 2], query), Some(1));
        assert_eq!(env.verify(&root, &format!("{proof}00"), query), Some(1));
    }
    let other_root = flip_hex(&root, 3);
    assert_eq!(env.verify(&other_root, &cases[0].0, &cases[0].1), Some(1));
}

#[test]
fn blobs_round_trip_through_files() {
    let env = Env::new(4);
    populate(&env);
    let root_file = env.dir.path().join("root.hex");
    let proof_file = env.dir.path().join("proof.hex");
    env.ok("root", &["--output", root_file.to_str().unwrap()]);
    env.ok("prove", &["--output", proof_file.to_str().unwrap(), "kiwi"]);
    let root = format!("@{}", root_file.display());
    let proof = format!("@{}", proof_file.display());
    assert_eq!(env.verify(&root, &proof, &["kiwi", "brown"]), Some(0));
}

#[test]
fn store_survives_restart_with_history() {
    let env = Env::new(4);
    populate(&env);
    let before = env.ok("root", &[]);
    env.ok("insert", &["mango", "orange"]);
    assert_ne!(env.ok("root", &[]), before);
    assert_eq!(env.ok("get", &["mango"]), "orange");
    assert!(env.ok("history", &[]).contains(&before[..64]));
}

#[test]
fn bench_emits_csv() {
    let env = Env::new(4);
    let out = env.run(&["bench", "--q", "16", "--sizes", "100,500", "--extrapolate", "100000", "--samples", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("n,levels,bplus_membership_bytes"));
    assert!(lines[1].starts_with("100,"));
    assert!(lines[3].starts_with("100000,") && lines[3].ends_with(",1"));
    assert_eq!(env.run(&["bench", "--q", "2"]).status.code(), Some(2));
}
