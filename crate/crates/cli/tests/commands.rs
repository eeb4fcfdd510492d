// Copyright 2026 The ESAFL Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::Duration;

use esafl_cli::exit;
use esafl_cli::keygen::load_key_file;
use esafl_core::fedsim::verify_issues;

fn esafl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_esafl")).args(args).env_remove("ESAFL_PROFILE").output().expect("spawn esafl")
}

fn code(o: &Output) -> u8 {
    o.status.code().expect("exited normally") as u8
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn listing(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

#[test]
fn keygen_is_deterministic_and_consistent() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    for (dir, seed) in [(&a, "11"), (&b, "11"), (&c, "12")] {
        let o = esafl(&["keygen", "--profile", "desk", "--seed", seed, "--out", dir.to_str().unwrap()]);
        assert_eq!(code(&o), exit::OK, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let files = listing(&a);
    assert_eq!(files.len(), 11);
    let names: Vec<String> = files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert!(names.contains(&"aggregator.profile".to_string()));
    assert!(names.contains(&"params.profile".to_string()));
    assert!(!names.iter().any(|n| n.starts_with('.')));
    for name in &names {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    assert_ne!(fs::read(a.join("client-0.key")).unwrap(), fs::read(c.join("client-0.key")).unwrap());

    let issues: Vec<_> = (0..9).map(|i| load_key_file(&a.join(format!("client-{i}.key"))).unwrap()).collect();
    verify_issues(&issues).unwrap();
}

#[test]
fn keygen_into_unwritable_location_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    let target = blocker.join("keys");
    let o = esafl(&["keygen", "--profile", "desk", "--out", target.to_str().unwrap()]);
    assert_eq!(code(&o), exit::CONFIG);
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    assert!(!String::from_utf8_lossy(&o.stderr).contains("panicked"));
    assert_eq!(listing(tmp.path()), vec![blocker]);
}

#[test]
fn selftest_reports_corrupted_goldens() {
    let tmp = tempfile::tempdir().unwrap();
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden");
    for f in listing(&src) {
        fs::copy(&f, tmp.path().join(f.file_name().unwrap())).unwrap();
    }
    let victim = tmp.path().join("prg_n16.bin");
    let mut bytes = fs::read(&victim).unwrap();
    bytes[100] ^= 0x01;
    fs::write(&victim, bytes).unwrap();

    let dir = tmp.path().to_str().unwrap();
    let o = esafl(&["selftest", "--trials", "2", "--golden-dir", dir]);
    assert_eq!(code(&o), exit::TEST_FAILURE);
    let out = stdout(&o);
    assert!(out.lines().any(|l| l.starts_with("FAIL golden") && l.contains("prg_n16.bin")), "{out}");
    assert!(out.lines().any(|l| l.starts_with("PASS ring")));
    assert!(String::from_utf8_lossy(&o.stderr).contains("golden"));
}

#[test]
fn selftest_with_zero_trials_warns_but_passes() {
    let o = esafl(&["selftest", "--trials", "0"]);
    assert_eq!(code(&o), exit::OK);
    let out = stdout(&o);
    assert!(out.contains("trials = 0"), "{out}");
    assert!(out.lines().any(|l| l.starts_with("PASS golden")));
}

#[test]
fn estimate_prints_counts() {
    let o = esafl(&["estimate", "--shape", "alexnet"]);
    assert_eq!(code(&o), exit::OK);
    let out = stdout(&o);
    assert!(out.contains("4 packed, 77 unpacked"), "{out}");
}

#[test]
fn configuration_errors_exit_with_code_two() {
    for args in [
        &["estimate", "--profile", "/nonexistent/profile"][..],
        &["estimate", "--shape", "resnet"],
        &["estimate", "--clients", "1"],
        &["demo", "--mode", "carrier-pigeon", "--rounds", "1"],
        &["public-poly", "--secret", "zz", "--round", "1"],
        &["no-such-command"],
    ] {
        let o = esafl(args);
        assert_eq!(code(&o), exit::CONFIG, "{args:?}");
    }
}

#[test]
fn public_poly_hex_and_decimal_secret_agree() {
    let hex = esafl(&["public-poly", "--secret", "0x10", "--round", "4", "--index", "2"]);
    let dec = esafl(&["public-poly", "--secret", "16", "--round", "4", "--index", "2"]);
    assert_eq!(code(&hex), exit::OK);
    assert_eq!(hex.stdout, dec.stdout);
    let other = esafl(&["public-poly", "--secret", "16", "--round", "4", "--index", "3"]);
    assert_ne!(hex.stdout, other.stdout);
}

#[test]
fn demo_writes_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = esafl(&["demo", "--rounds", "3", "--svg", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), exit::OK, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("trace.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0].split(',').count(), 9);
    assert!(fs::read_to_string(out.join("loss.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn serve_aborts_when_cohort_is_incomplete() {
    let tmp = tempfile::tempdir().unwrap();
    let keys = tmp.path().join("k");
    assert_eq!(code(&esafl(&["keygen", "--profile", "desk", "--out", keys.to_str().unwrap()])), exit::OK);
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let addr = format!("127.0.0.1:{port}");
    let agg = keys.join("aggregator.profile");
    let server = Command::new(env!("CARGO_BIN_EXE_esafl"))
        .args(["serve", "--profile", agg.to_str().unwrap(), "--listen", &addr, "--rounds", "2", "--timeout-secs", "2"])
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let key = keys.join("client-0.key");
    let mut client = None;
    for _ in 0..50 {
        std::thread::sleep(Duration::from_millis(100));
        let o = esafl(&[
            "client",
            "--connect",
            &addr,
            "--key",
            key.to_str().unwrap(),
            "--rounds",
            "2",
            "--timeout-secs",
            "10",
        ]);
        if !String::from_utf8_lossy(&o.stderr).contains("refused") {
            client = Some(o);
            break;
        }
    }
    let client = client.expect("server never accepted");
    let server = server.wait_with_output().unwrap();
    assert_eq!(code(&server), exit::PROTOCOL_ABORT, "{}", String::from_utf8_lossy(&server.stderr));
    assert_eq!(code(&client), exit::PROTOCOL_ABORT, "{}", String::from_utf8_lossy(&client.stderr));
    assert!(stdout(&client).contains("completed 0 rounds"));
}
