#![allow(dead_code)]

pub mod oracles;
pub mod stub;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn mini_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mini")
}

pub fn qrelcmp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrelcmp"))
        .args(args)
        .env_remove("QRELCMP_API_KEY")
        .output()
        .expect("binary runs")
}

pub fn stdout_of(out: &Output) -> String {
    assert!(
        out.status.success(),
        "command failed: {}\n{}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}
