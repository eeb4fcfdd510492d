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

//! Byte-level fixtures for the round polynomial, the codec and every wire
//! message. Set `ESAFL_BLESS=1` to rewrite them after an intentional format
//! change.

use std::path::PathBuf;

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use esafl_core::fixtures::{self, tiny_params, SEED_SECRET};
use esafl_core::prg::{derive_seed, prpg_indexed, RoundSeed};
use esafl_core::ring::Wide;
use esafl_core::wire::{read_frame, Message};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

#[test]
fn artifacts_match_fixtures() {
    let bless = std::env::var_os("ESAFL_BLESS").is_some();
    for (name, bytes) in fixtures::all() {
        let path = fixture(name);
        if bless {
            std::fs::write(&path, &bytes).unwrap();
            continue;
        }
        let want = std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(want.len(), bytes.len(), "{name}: length");
        assert!(want == bytes, "{name}: bytes differ");
    }
}

#[test]
fn fixture_sizes() {
    let sizes: Vec<(&str, usize)> = fixtures::all().iter().map(|(n, b)| (*n, b.len())).collect();
    let expect = [
        ("prg_n16.bin", 2 * 16 * 60),
        ("prg_desk_t7.bin", 1024 * 60),
        ("codec_n16.bin", 16 * 58),
        ("wire_abort.bin", 5 + 2),
        ("wire_submit_n16.bin", 5 + 8 + 4 + 8 + 2 + 8 + 2 + 16 * 60),
        ("wire_result_n16.bin", 5 + 8 + 2 + 8 + 2 + 8 + 2 + 16 * 60),
    ];
    for (name, size) in expect {
        assert!(sizes.contains(&(name, size)), "{name}");
    }
}

#[test]
fn keystream_matches_rfc8439_zero_key_block() {
    // All-zero key, all-zero nonce, counter 0.
    let block0 = hex::decode(
        "76b8e0ada0f13d90405d6ae55386bd28bdd219b8a08ded1aa836efcc8b770dc7\
         da41597c5157488d7724e03fb8d84a376a43b8f41518a11cc387b669b2ee6586",
    )
    .unwrap();
    let p = tiny_params();
    let seed = RoundSeed::new(42, 64).unwrap();
    let a = prpg_indexed(42, 0, &seed, &p).unwrap();
    assert_eq!(a.coeffs()[0], Wide::from_le(&block0[..60]).masked(478));
}

#[test]
fn keystream_matches_independent_chacha() {
    let p = tiny_params();
    let seed = RoundSeed::new(SEED_SECRET, 64).unwrap();
    let mut rng = ChaCha20Rng::from_seed(derive_seed(9, SEED_SECRET, 64).unwrap());
    let mut stream = vec![0u8; 3 * 16 * 60];
    rng.fill_bytes(&mut stream);
    for index in 0..3u64 {
        let a = prpg_indexed(9, index, &seed, &p).unwrap();
        let off = index as usize * 16 * 60;
        for (k, c) in a.coeffs().iter().enumerate() {
            let start = off + k * 60;
            assert_eq!(*c, Wide::from_le(&stream[start..start + 60]).masked(478));
        }
    }
}

#[test]
fn fixtures_parse_back() {
    let p = tiny_params();
    for name in ["wire_abort.bin", "wire_submit_n16.bin", "wire_result_n16.bin", "wire_keyissue_n16.bin"] {
        let bytes = std::fs::read(fixture(name)).unwrap();
        let frame = read_frame(&mut bytes.as_slice(), 1 << 20).unwrap();
        let msg = Message::deserialize(&frame, &p).unwrap();
        assert_eq!(fixtures::frame_bytes(&msg), bytes, "{name}");
    }
}
