#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub fn privdist(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_privdist"))
        .args(args)
        .env_remove("PRIVDIST_STATE_CAP")
        .output()
        .expect("binary runs")
}

pub fn shipped_priors() -> Vec<PathBuf> {
    let mut priors: Vec<PathBuf> = std::fs::read_dir(workspace_root().join("data/priors"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    priors.sort();
    priors
}

fn stdout_of(args: &[&str], problems: &mut Vec<String>) -> Vec<u8> {
    let out = privdist(args);
    if !out.status.success() {
        problems.push(format!(
            "`privdist {}` exited with {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    out.stdout
}

/// Runs build -> analyze -> sweep -> verify on every shipped prior and
/// compares each artifact with the golden copy. With `bless` the golden
/// files are rewritten instead. Returns the list of problems.
pub fn golden_round_trip(bless: bool) -> (usize, Vec<String>) {
    let scratch = tempfile::tempdir().unwrap();
    let mut problems = Vec::new();
    let mut compared = 0;
    for prior in shipped_priors() {
        let stem = prior.file_stem().unwrap().to_string_lossy().to_string();
        let p = prior.to_str().unwrap();
        let n: usize = {
            let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&prior).unwrap()).unwrap();
            v["n"].as_u64().unwrap() as usize
        };
        let mut artifacts: Vec<(String, Vec<u8>)> = Vec::new();
        for (kind, eps) in [("exp_dp", "1"), ("exp_id", "2.5")] {
            let mech = scratch.path().join(format!("{stem}_{kind}.json"));
            let m = mech.to_str().unwrap();
            stdout_of(&["build", "--kind", kind, "--eps", eps, "--prior", p, "-o", m], &mut problems);
            artifacts.push((format!("{kind}.json"), std::fs::read(&mech).unwrap_or_default()));
            let report = stdout_of(&["analyze", "--prior", p, "--mech", m, "--json"], &mut problems);
            artifacts.push((format!("analyze_{kind}.json"), report));
        }
        let csv = scratch.path().join(format!("{stem}.csv"));
        let grid = format!("0.1:{n}:0.1");
        stdout_of(&["sweep", "--prior", p, "--grid", &grid, "-o", csv.to_str().unwrap()], &mut problems);
        artifacts.push(("sweep.csv".into(), std::fs::read(&csv).unwrap_or_default()));
        artifacts.push(("verify.txt".into(), stdout_of(&["verify", "--prior", p], &mut problems)));

        let dir = golden_dir().join(&stem);
        for (name, bytes) in artifacts {
            let path = dir.join(&name);
            if bless {
                std::fs::create_dir_all(&dir).unwrap();
                std::fs::write(&path, &bytes).unwrap();
                continue;
            }
            compared += 1;
            match std::fs::read(&path) {
                Ok(expected) if expected == bytes => {}
                Ok(_) => problems.push(format!("{stem}/{name} differs from golden")),
                Err(e) => problems.push(format!("{stem}/{name}: {e}")),
            }
        }
    }
    (compared, problems)
}
