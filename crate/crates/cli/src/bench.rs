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

//! Timing of the full round pipeline on synthetic
//! vectors of a given length.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::{ChaCha20Rng, ChaCha8Rng};

use esafl_core::codec::{Codec, RealVector};
use esafl_core::eshe::{decrypt, encrypt, keygen, Ciphertext, EsheError};
use esafl_core::prg::round_public;
use esafl_core::wire::{Message, RoundResult, RoundSubmit, HEADER_LEN};
use esafl_core::SchemeParams;

use crate::report::{estimate, BenchReport, ErrorStats, Timing};
use crate::CliError;

fn client_vector(seed: u64, client: usize, len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((client as u64 + 1) << 32));
    (0..len).map(|_| rng.random()).collect()
}

fn core_err(e: impl std::fmt::Display) -> CliError {
    CliError::TestFailure(e.to_string())
}

/// Runs `reps` full rounds with `N` clients holding uniform vectors in
/// `[0, 1]` and reports timings, measured traffic and decode error against
/// the exact sum.
pub fn cmd_bench(
    profile: &str,
    params: &SchemeParams,
    len: usize,
    reps: usize,
    seed: u64,
) -> Result<BenchReport, CliError> {
    let mut report = estimate(profile, params, len);
    let codec = Codec::new(params);
    let clients = params.num_clients();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let km = keygen(params, &mut rng).map_err(core_err)?;
    let count = report.ciphertexts;

    let mut truth = vec![0.0f64; len];
    for i in 0..clients {
        for (t, v) in truth.iter_mut().zip(client_vector(seed, i, len)) {
            *t += v;
        }
    }

    for rep in 0..reps {
        let round = 2 + rep as u64;
        let masks = (0..count)
            .map(|j| round_public(round, j as u64, &km.a0, &km.seed, params))
            .collect::<Result<Vec<_>, _>>()
            .map_err(core_err)?;
        let mut acc: Vec<Ciphertext> = Vec::new();
        let (mut enc, mut agg) = (Duration::ZERO, Duration::ZERO);
        let mut uplink = 0u64;
        for (i, key) in km.enc_keys.iter().enumerate() {
            let v = RealVector::new(client_vector(seed, i, len)).map_err(core_err)?;
            let started = Instant::now();
            let plains = codec.ecd_pack(&v).map_err(core_err)?;
            let cts = plains
                .iter()
                .zip(&masks)
                .map(|(m, a)| encrypt(params, round, a, key, m, &mut rng))
                .collect::<Result<Vec<_>, EsheError>>()
                .map_err(core_err)?;
            enc += started.elapsed();

            let msg = Message::RoundSubmit(RoundSubmit {
                round,
                client_id: i as u32,
                original_len: len as u64,
                ciphertexts: cts,
            });
            uplink += (HEADER_LEN + msg.serialize().len()) as u64;
            let Message::RoundSubmit(sub) = msg else { unreachable!() };

            let started = Instant::now();
            if acc.is_empty() {
                acc = sub.ciphertexts;
            } else {
                for (a, c) in acc.iter_mut().zip(&sub.ciphertexts) {
                    a.body.add_assign(&c.body).map_err(core_err)?;
                    a.agg_count += c.agg_count;
                }
            }
            agg += started.elapsed();
        }
        let result = Message::RoundResult(RoundResult {
            round,
            agg_count: clients as u16,
            original_len: len as u64,
            ciphertexts: acc,
        });
        let downlink = (clients * (HEADER_LEN + result.serialize().len())) as u64;
        let Message::RoundResult(result) = result else { unreachable!() };

        let started = Instant::now();
        let plains = result
            .ciphertexts
            .iter()
            .zip(&masks)
            .map(|(ct, a)| decrypt(params, a, &km.dec_key, ct))
            .collect::<Result<Vec<_>, _>>()
            .map_err(core_err)?;
        let decoded = codec.dcd_unpk(&plains, clients, len).map_err(core_err)?;
        let dec = started.elapsed();

        let (mut sum, mut max) = (0.0f64, 0.0f64);
        for (d, t) in decoded.iter().zip(&truth) {
            let e = (d - t).abs();
            sum += e;
            max = max.max(e);
        }
        report.error = Some(ErrorStats { mean: if len == 0 { 0.0 } else { sum / len as f64 }, max });
        report.measured_uplink = Some(uplink);
        report.measured_downlink = Some(downlink);
        report.timings.push(Timing { encrypt: enc / clients as u32, aggregate: agg, decrypt: dec });
    }
    Ok(report)
}
