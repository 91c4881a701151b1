//! Runs the built binary and speaks plain HTTP/1.1 to `healthcam serve`.
#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::Duration;

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_healthcam")
}

pub fn service_fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../service/tests/fixtures")
        .join(name)
}

pub fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(dir)
        .env_remove("HEALTHCAM_CHECKPOINT")
        .env_remove("HEALTHCAM_RULES")
        .env_remove("HEALTHCAM_ADDR")
        .env_remove("HEALTHCAM_CORS_ORIGINS")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

pub fn code(output: &Output) -> i32 {
    output.status.code().expect("exited normally")
}

pub fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

pub fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

pub fn assert_ok(output: &Output) {
    assert_eq!(
        code(output),
        0,
        "stdout:\n{}\nstderr:\n{}",
        stdout(output),
        stderr(output)
    );
}

/// A running `healthcam serve`, killed on drop.
pub struct Server {
    pub child: Child,
    pub addr: SocketAddr,
}

impl Server {
    // The child is waited on in `Drop` or on the early-exit path.
    #[allow(clippy::zombie_processes)]
    pub fn start(args: &[&str], envs: &[(&str, &str)]) -> Result<Self, Output> {
        let mut cmd = Command::new(bin());
        cmd.arg("serve")
            .args(args)
            .env_remove("HEALTHCAM_CHECKPOINT")
            .env_remove("HEALTHCAM_RULES")
            .env_remove("HEALTHCAM_ADDR")
            .env_remove("HEALTHCAM_CORS_ORIGINS")
            .env("RUST_LOG", "info")
            .stdout(Stdio::null())
            .stderr(Stdio::piped());
        if !envs.iter().any(|(k, _)| *k == "HEALTHCAM_ADDR") && !args.contains(&"--addr") {
            cmd.args(["--addr", "127.0.0.1:0"]);
        }
        for (k, v) in envs {
            cmd.env(k, v);
        }
        let mut child = cmd.spawn().expect("serve spawns");
        let mut reader = BufReader::new(child.stderr.take().unwrap());
        let mut seen = String::new();
        loop {
            let mut line = String::new();
            if reader.read_line(&mut line).unwrap_or(0) == 0 {
                let output = child.wait_with_output().unwrap();
                return Err(Output {
                    stderr: seen.into_bytes(),
                    ..output
                });
            }
            seen.push_str(&line);
            if let Some(rest) = line.trim().strip_prefix("listening on http://") {
                let addr = rest.parse().expect("listen address");
                // Keep draining stderr so the server never blocks on a full pipe.
                std::thread::spawn(move || {
                    let mut sink = String::new();
                    let _ = reader.read_to_string(&mut sink);
                });
                return Ok(Self { child, addr });
            }
        }
    }

    pub fn get(&self, path: &str) -> (u16, serde_json::Value) {
        let request = format!("GET {path} HTTP/1.1\r\nHost: test\r\nConnection: close\r\n\r\n");
        self.exchange(request.as_bytes())
    }

    /// Multipart POST; `parts` are (name, filename, bytes), filename empty for text.
    pub fn post(&self, path: &str, parts: &[(&str, &str, &[u8])]) -> (u16, serde_json::Value) {
        let boundary = "cli-test-boundary";
        let mut body = Vec::new();
        for (name, filename, bytes) in parts {
            body.extend_from_slice(format!("--{boundary}\r\n").as_bytes());
            if filename.is_empty() {
                body.extend_from_slice(
                    format!("Content-Disposition: form-data; name=\"{name}\"\r\n\r\n").as_bytes(),
                );
            } else {
                body.extend_from_slice(
                    format!("Content-Disposition: form-data; name=\"{name}\"; filename=\"{filename}\"\r\n\r\n")
                        .as_bytes(),
                );
            }
            body.extend_from_slice(bytes);
            body.extend_from_slice(b"\r\n");
        }
        body.extend_from_slice(format!("--{boundary}--\r\n").as_bytes());
        let mut request = format!(
            "POST {path} HTTP/1.1\r\nHost: test\r\nConnection: close\r\nContent-Type: multipart/form-data; boundary={boundary}\r\nContent-Length: {}\r\n\r\n",
            body.len()
        )
        .into_bytes();
        request.extend_from_slice(&body);
        self.exchange(&request)
    }

    fn exchange(&self, request: &[u8]) -> (u16, serde_json::Value) {
        let mut stream = TcpStream::connect(self.addr).expect("connect");
        stream
            .set_read_timeout(Some(Duration::from_secs(60)))
            .unwrap();
        stream.write_all(request).unwrap();
        let mut raw = Vec::new();
        stream.read_to_end(&mut raw).unwrap();
        let text = String::from_utf8(raw).expect("utf-8 response");
        let (head, body) = text.split_once("\r\n\r\n").expect("header terminator");
        assert!(
            !head
                .to_ascii_lowercase()
                .contains("transfer-encoding: chunked"),
            "unexpected chunked response"
        );
        let status = head.split_whitespace().nth(1).unwrap().parse().unwrap();
        (status, serde_json::from_str(body).expect("JSON body"))
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub fn without_latency(mut v: serde_json::Value) -> serde_json::Value {
    if let Some(o) = v.as_object_mut() {
        o.remove("latency_ms");
    }
    v
}
