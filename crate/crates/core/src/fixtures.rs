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

//! Deterministic reference artifacts pinned by byte-level golden files.
//!
//! Each entry is a file name and the bytes the current implementation
//! produces for it. The files themselves live next to the integration tests
//! and are also checked by the operator self-test.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::codec::{Codec, RealVector};
use crate::eshe::{encrypt_with_error, eval_add, keygen};
use crate::params::{Overrides, SchemeParams};
use crate::prg::{prpg_indexed, RoundSeed};
use crate::ring::{RingElem, SmallPoly, SparseTernaryKey};
use crate::wire::{write_frame, write_ring, AbortCode, KeyIssue, Message, RoundResult, RoundSubmit};

pub const SEED_SECRET: u64 = 0x0123_4567_89ab_cdef;
pub const DESK_SEED_SECRET: u64 = 0x5eed_0000_0000_0001;
pub const DESK_ROUND: u64 = 7;

/// `n = 16` parameters with the default moduli and `h = 4`.
pub fn tiny_params() -> SchemeParams {
    let o = Overrides { ternary_weight: Some(4), ..Default::default() };
    SchemeParams::setup(16, 478, 460, 16, 9, &o).expect("valid parameters")
}

pub fn ring_bytes(e: &RingElem) -> Vec<u8> {
    let mut out = Vec::new();
    write_ring(&mut out, e);
    out
}

pub fn frame_bytes(m: &Message) -> Vec<u8> {
    let mut out = Vec::new();
    write_frame(&mut out, &m.to_frame()).expect("writing to memory");
    out
}

fn sample_vector() -> RealVector {
    RealVector::new((0..8).map(|k| k as f64 / 7.0).collect()).expect("values in [0, 1]")
}

fn seed(secret: u64) -> RoundSeed {
    RoundSeed::new(secret, 64).expect("64-bit seed")
}

pub fn desk_round_polynomial() -> Vec<u8> {
    let p = SchemeParams::desk();
    ring_bytes(&prpg_indexed(DESK_ROUND, 0, &seed(DESK_SEED_SECRET), &p).expect("matching geometry"))
}

pub fn fixed_submit(p: &SchemeParams, client: u32) -> RoundSubmit {
    let codec = Codec::new(p);
    let a = prpg_indexed(3, 0, &seed(SEED_SECRET), p).expect("matching geometry");
    let n = p.n() as i64;
    let key = SparseTernaryKey::new(p.n(), vec![client], vec![client + 7]).expect("distinct positions");
    let e = SmallPoly::new((0..n).map(|i| (i % 5) - 2).collect(), 7).expect("bounded");
    let m = &codec.ecd_pack(&sample_vector()).expect("fits one plaintext")[0];
    let mut ct = encrypt_with_error(p, 3, &a, &key, m, &e).expect("valid plaintext");
    ct.client_tag = Some(client);
    RoundSubmit { round: 3, client_id: client, original_len: 8, ciphertexts: vec![ct] }
}

/// Every golden artifact, in a fixed order.
pub fn all() -> Vec<(&'static str, Vec<u8>)> {
    let p = tiny_params();
    let s = seed(SEED_SECRET);
    let mut prg = ring_bytes(&prpg_indexed(5, 0, &s, &p).expect("matching geometry"));
    prg.extend(ring_bytes(&prpg_indexed(5, 1, &s, &p).expect("matching geometry")));

    let codec = Codec::new(&p);
    let packed = codec.ecd_pack(&sample_vector()).expect("fits one plaintext");

    let cts: Vec<_> = (0..9).map(|c| fixed_submit(&p, c).ciphertexts.remove(0)).collect();
    let result = RoundResult {
        round: 3,
        agg_count: 9,
        original_len: 8,
        ciphertexts: vec![eval_add(&p, &cts).expect("same round")],
    };

    let km = keygen(&p, &mut ChaCha20Rng::seed_from_u64(5)).expect("valid parameters");
    let issue = KeyIssue {
        client_id: 1,
        profile: p.to_profile(),
        enc_key: km.enc_keys[1].clone(),
        dec_key: km.dec_key.clone(),
        a0: km.a0.clone(),
        seed: km.seed,
    };

    vec![
        ("prg_n16.bin", prg),
        ("prg_desk_t7.bin", desk_round_polynomial()),
        ("codec_n16.bin", ring_bytes(&packed[0].to_ring())),
        ("wire_abort.bin", frame_bytes(&Message::Abort(AbortCode::Timeout))),
        ("wire_submit_n16.bin", frame_bytes(&Message::RoundSubmit(fixed_submit(&p, 2)))),
        ("wire_result_n16.bin", frame_bytes(&Message::RoundResult(result))),
        ("wire_keyissue_n16.bin", frame_bytes(&Message::KeyIssue(issue))),
    ]
}
