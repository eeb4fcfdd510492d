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

//! Command implementations behind the `esafl` binary.

pub mod bench;
pub mod demo;
pub mod keygen;
pub mod report;
pub mod selftest;
pub mod svg;

use std::path::Path;

use esafl_core::fedsim::FedError;
use esafl_core::wire::WireError;
use esafl_core::{ParamsError, SchemeParams};

/// Process exit statuses.
pub mod exit {
    pub const OK: u8 = 0;
    pub const TEST_FAILURE: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const PROTOCOL_ABORT: u8 = 3;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    TestFailure(String),
    #[error("{0}")]
    Abort(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::TestFailure(_) => exit::TEST_FAILURE,
            CliError::Abort(_) => exit::PROTOCOL_ABORT,
        }
    }
}

impl From<ParamsError> for CliError {
    fn from(e: ParamsError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("io: {e}"))
    }
}

impl From<WireError> for CliError {
    fn from(e: WireError) -> Self {
        CliError::Abort(e.to_string())
    }
}

impl From<FedError> for CliError {
    fn from(e: FedError) -> Self {
        if e.is_protocol_abort() {
            CliError::Abort(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

/// Resolves `desk`, `full` or a path to a key=value profile, then applies
/// client-count and precision overrides.
pub fn load_profile(
    spec: &str,
    clients: Option<usize>,
    log_q0: Option<u32>,
) -> Result<(String, SchemeParams), CliError> {
    let base = match spec {
        "desk" => SchemeParams::desk(),
        "full" => SchemeParams::full(),
        path => {
            let text = std::fs::read_to_string(Path::new(path))
                .map_err(|e| CliError::Config(format!("cannot read profile {path}: {e}")))?;
            SchemeParams::from_profile(&text)?
        }
    };
    let params = if clients.is_some() || log_q0.is_some() {
        base.with_precision(log_q0.unwrap_or(base.log_q0()), clients.unwrap_or(base.num_clients()))?
    } else {
        base
    };
    Ok((spec.to_string(), params))
}

/// Named gradient-vector lengths used by `estimate` and `bench`.
pub fn shape_len(name: &str) -> Result<usize, CliError> {
    match name {
        "fcn" => Ok(101_770),
        "alexnet" => Ok(1_250_000),
        "lstm" => Ok(4_020_000),
        other => other
            .parse()
            .map_err(|_| CliError::Config(format!("unknown shape {other:?}; use fcn, alexnet, lstm or a length"))),
    }
}

/// Writes `contents` to `path` via a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })
}
