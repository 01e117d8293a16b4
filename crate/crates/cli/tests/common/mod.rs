#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn demo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/demo")
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Every file under `root`, keyed by relative path.
pub fn dir_bytes(root: &Path) -> BTreeMap<String, Vec<u8>> {
    walkdir::WalkDir::new(root)
        .into_iter()
        .map(|e| e.expect("readable directory"))
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            let rel = e.path().strip_prefix(root).unwrap().to_string_lossy().into_owned();
            (rel, std::fs::read(e.path()).expect("readable file"))
        })
        .collect()
}

/// Runs the `pact` binary against `root/chain` and `root/store`.
pub fn pact(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pact"))
        .arg("--chain-dir")
        .arg(root.join("chain"))
        .arg("--store-dir")
        .arg(root.join("store"))
        .args(args)
        .output()
        .expect("pact binary runs")
}

/// Like [`pact`], but fails with the command's stderr unless it exits 0.
pub fn pact_ok(root: &Path, args: &[&str]) -> Result<String, String> {
    let out = pact(root, args);
    if out.status.success() {
        Ok(String::from_utf8(out.stdout).expect("utf-8 output"))
    } else {
        Err(format!(
            "pact {} exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

pub fn evaluate_demo(root: &Path, out_dir: &str) -> Result<String, String> {
    let demo = demo_dir();
    let out = root.join(out_dir);
    pact_ok(
        root,
        &[
            "evaluate",
            "--config",
            demo.join("project.toml").to_str().unwrap(),
            "--world",
            demo.join("world.csv").to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
    )
}

/// evaluate, mint, pool deposit, custodial attribution, internal
/// transfer and retirements through every path.
pub fn end_to_end(root: &Path) -> Result<(), String> {
    evaluate_demo(root, "eval")?;
    let eval = root.join("eval");
    let eval = eval.to_str().unwrap();
    let steps: &[&[&str]] = &[
        &["chain", "init"],
        &[
            "chain",
            "create-token",
            "--source",
            "oracle",
            "--token-id",
            "1",
            "--project-name",
            "demo-forest",
            "--jurisdiction",
            "SL",
            "--start-year",
            "2012",
            "--end-year",
            "2021",
            "--biodiversity",
            "A",
            "--livelihood",
            "A",
            "--justice",
            "B",
            "--evaluation",
            eval,
        ],
        &[
            "chain",
            "mint",
            "--source",
            "oracle",
            "--token-id",
            "1",
            "--owner",
            "alice",
            "--evaluation",
            eval,
        ],
        &[
            "chain",
            "pool-create",
            "--source",
            "pool-admin",
            "--min-biodiversity",
            "B",
            "--jurisdiction",
            "SL",
        ],
        &[
            "chain",
            "update-operators",
            "--source",
            "alice",
            "--add",
            "alice:@pool-0:1",
        ],
        &[
            "chain",
            "pool-deposit",
            "--source",
            "alice",
            "--pool",
            "pool-0",
            "--token-id",
            "1",
            "--amount",
            "5000",
        ],
        &[
            "chain",
            "transfer",
            "--source",
            "alice",
            "--to",
            "@custodian",
            "--token-id",
            "1",
            "--amount",
            "20000",
        ],
        &[
            "chain",
            "custodian-register",
            "--source",
            "custodian-manager",
            "--entity",
            "ent-acme",
            "--kyc",
            "country=SL",
        ],
        &[
            "chain",
            "custodian-register",
            "--source",
            "custodian-manager",
            "--entity",
            "ent-birch",
        ],
        &[
            "chain",
            "custodian-attribute",
            "--source",
            "custodian-manager",
            "--entity",
            "ent-acme",
            "--token-id",
            "1",
            "--amount",
            "20000",
        ],
        &[
            "chain",
            "custodian-transfer",
            "--source",
            "custodian-manager",
            "--from-entity",
            "ent-acme",
            "--to-entity",
            "ent-birch",
            "--token-id",
            "1",
            "--amount",
            "8000",
        ],
        &[
            "chain",
            "custodian-retire",
            "--source",
            "custodian-manager",
            "--entity",
            "ent-birch",
            "--token-id",
            "1",
            "--amount",
            "3000",
            "--beneficiary",
            "Birch Foods",
            "--claim",
            "2024 scope 1",
        ],
        &[
            "chain",
            "retire",
            "--source",
            "alice",
            "--token-id",
            "1",
            "--amount",
            "1000",
            "--beneficiary",
            "Alice",
        ],
        &[
            "chain",
            "pool-retire",
            "--source",
            "alice",
            "--pool",
            "pool-0",
            "--amount",
            "700",
            "--beneficiary",
            "Alice",
        ],
        &[
            "chain",
            "pool-redeem",
            "--source",
            "alice",
            "--pool",
            "pool-0",
            "--token-id",
            "1",
            "--amount",
            "300",
        ],
    ];
    for args in steps {
        pact_ok(root, args)?;
    }
    Ok(())
}
