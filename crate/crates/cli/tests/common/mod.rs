#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn ofapi<I, S>(args: I) -> Run
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let out = Command::new(env!("CARGO_BIN_EXE_ofapi"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("running ofapi");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

pub fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

/// File contents without the leading `# ofapi ...` provenance line.
pub fn body(path: &Path) -> String {
    let text = std::fs::read_to_string(path).unwrap();
    match text.strip_prefix("# ofapi ") {
        Some(rest) => rest.split_once('\n').map(|(_, b)| b.to_string()).unwrap_or_default(),
        None => text,
    }
}
