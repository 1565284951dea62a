#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::PathBuf;
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

use serde_json::Value;

pub const BIN: &str = env!("CARGO_BIN_EXE_bertscore-viz");

const ENV_VARS: &[&str] = &[
    "BERTSCORE_BIND",
    "BERTSCORE_PROVIDER",
    "BERTSCORE_MODEL",
    "BERTSCORE_LAYER",
    "BERTSCORE_VOCAB",
    "BERTSCORE_CORS_ORIGIN",
    "BERTSCORE_SEED",
    "BERTSCORE_DIM",
    "BERTSCORE_CONTEXTUAL",
];

pub fn core_fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

pub fn golden(name: &str) -> String {
    std::fs::read_to_string(core_fixtures().join("golden").join(name)).unwrap()
}

/// The binary with a clean `BERTSCORE_*` environment.
pub fn command() -> Command {
    let mut cmd = Command::new(BIN);
    for var in ENV_VARS {
        cmd.env_remove(var);
    }
    cmd
}

pub fn run(args: &[&str]) -> Output {
    command().args(args).output().unwrap()
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

/// Validates `body` against the published response schema.
pub fn schema_errors(body: &str) -> Vec<String> {
    let schema: Value = serde_json::from_str(bertscore_viz_service::RESPONSE_SCHEMA).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let instance: Value = serde_json::from_str(body).unwrap();
    validator.iter_errors(&instance).map(|e| e.to_string()).collect()
}

/// A `--serve` child process on an ephemeral port. Killed on drop.
pub struct Server {
    child: Child,
    pub base: String,
    client: reqwest::blocking::Client,
}

impl Server {
    pub fn start(extra: &[&str]) -> Server {
        let mut child = command()
            .args(["--serve", "127.0.0.1:0"])
            .args(extra)
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .unwrap();
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap())
            .read_line(&mut line)
            .unwrap();
        let base = line
            .trim()
            .strip_prefix("listening on ")
            .unwrap_or_else(|| panic!("unexpected banner {line:?}"))
            .to_string();
        Server {
            child,
            base,
            client: reqwest::blocking::Client::new(),
        }
    }

    pub fn get(&self, path: &str) -> (u16, String) {
        let resp = self.client.get(format!("{}{path}", self.base)).send().unwrap();
        (resp.status().as_u16(), resp.text().unwrap())
    }

    pub fn post_score(&self, body: &str) -> (u16, String) {
        let resp = self
            .client
            .post(format!("{}/score", self.base))
            .header("content-type", "application/json")
            .body(body.to_string())
            .send()
            .unwrap();
        (resp.status().as_u16(), resp.text().unwrap())
    }

    pub fn pid(&self) -> u32 {
        self.child.id()
    }

    /// Sends SIGINT and waits for the exit code.
    pub fn interrupt(mut self) -> Option<i32> {
        let status = Command::new("kill")
            .args(["-INT", &self.child.id().to_string()])
            .status()
            .unwrap();
        assert!(status.success());
        let deadline = Instant::now() + Duration::from_secs(10);
        loop {
            if let Some(status) = self.child.try_wait().unwrap() {
                return status.code();
            }
            assert!(Instant::now() < deadline, "server ignored SIGINT");
            std::thread::sleep(Duration::from_millis(20));
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
