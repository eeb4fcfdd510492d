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

//! Trusted-dealer key files.
//!
//! Layout of the output directory:
//!
//! - `params.profile`: the parameter profile shared by every party.
//! - `aggregator.profile`: the aggregator's copy; parameters only.
//! - `client-<i>.key`: one framed `KeyIssue` message per client.
//!
//! Key files are the confidential delivery path and should be moved to the
//! clients out of band.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use esafl_core::fedsim::{keydeal, verify_issues};
use esafl_core::wire::{read_frame, KeyIssue, Message, MsgType};
use esafl_core::SchemeParams;

use crate::CliError;

pub fn client_key_name(id: u32) -> String {
    format!("client-{id}.key")
}

/// Deals keys and writes every file, or none of them.
pub fn cmd_keygen(params: &SchemeParams, out_dir: &Path, seed: u64) -> Result<Vec<PathBuf>, CliError> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let issues = keydeal(params, &mut rng)?;
    verify_issues(&issues)?;
    let profile = params.to_profile();
    let mut files: Vec<(String, Vec<u8>)> = vec![
        ("params.profile".into(), profile.clone().into_bytes()),
        ("aggregator.profile".into(), profile.into_bytes()),
    ];
    for issue in issues {
        let name = client_key_name(issue.client_id);
        files.push((name, esafl_core::fixtures::frame_bytes(&Message::KeyIssue(issue))));
    }
    fs::create_dir_all(out_dir).map_err(|e| CliError::Config(format!("cannot create {}: {e}", out_dir.display())))?;

    let mut staged = Vec::with_capacity(files.len());
    for (name, bytes) in &files {
        let tmp = out_dir.join(format!(".{name}.tmp"));
        if let Err(e) = fs::write(&tmp, bytes) {
            let _ = fs::remove_file(&tmp);
            for t in &staged {
                let _ = fs::remove_file(t);
            }
            return Err(CliError::Config(format!("cannot write {}: {e}", tmp.display())));
        }
        staged.push(tmp);
    }
    let mut written = Vec::with_capacity(files.len());
    for ((name, _), tmp) in files.iter().zip(&staged) {
        let dest = out_dir.join(name);
        fs::rename(tmp, &dest).map_err(|e| CliError::Config(format!("cannot move {}: {e}", dest.display())))?;
        written.push(dest);
    }
    Ok(written)
}

pub fn load_key_file(path: &Path) -> Result<KeyIssue, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let frame = read_frame(&mut bytes.as_slice(), u32::MAX)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if frame.msg_type != MsgType::KeyIssue {
        return Err(CliError::Config(format!("{} is not a key file", path.display())));
    }
    KeyIssue::from_payload(&frame.payload).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
