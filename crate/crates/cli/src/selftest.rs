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

//! Self-test suites runnable against any parameter profile.

use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use esafl_core::codec::{Codec, PackedPlain, RealVector};
use esafl_core::eshe::{decrypt, decrypt_unchecked, encrypt, eval_add, eval_add_spanning, keygen, EsheError};
use esafl_core::fixtures;
use esafl_core::prg::round_public;
use esafl_core::ring::{RingElem, SmallPoly, SparseTernaryKey, Wide};
use esafl_core::SchemeParams;

macro_rules! builtin {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_bytes!(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/golden/", $name)) as &[u8])),*]
    };
}

const BUILTIN_GOLDEN: &[(&str, &[u8])] = builtin!(
    "prg_n16.bin",
    "prg_desk_t7.bin",
    "codec_n16.bin",
    "wire_abort.bin",
    "wire_submit_n16.bin",
    "wire_result_n16.bin",
    "wire_keyissue_n16.bin",
);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub checks: usize,
    pub failure: Option<String>,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Summary {
    pub suites: Vec<SuiteResult>,
    pub vacuous: bool,
}

impl Summary {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteResult::passed)
    }

    pub fn failed_suites(&self) -> Vec<&'static str> {
        self.suites.iter().filter(|s| !s.passed()).map(|s| s.name).collect()
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.vacuous {
            writeln!(f, "warning: trials = 0, randomized suites checked nothing")?;
        }
        for s in &self.suites {
            match &s.failure {
                None => writeln!(f, "PASS {:<10} {} checks", s.name, s.checks)?,
                Some(why) => writeln!(f, "FAIL {:<10} {why}", s.name)?,
            }
        }
        Ok(())
    }
}

type Check = Result<usize, String>;

fn ensure(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

fn to_u128(w: &Wide) -> u128 {
    let l = w.limbs();
    l[0] as u128 | (l[1] as u128) << 64
}

fn mask128(v: u128, bits: u32) -> u128 {
    if bits >= 128 {
        v
    } else {
        v & ((1u128 << bits) - 1)
    }
}

fn schoolbook(a: &[u128], b: &[i64], bits: u32) -> Vec<u128> {
    let n = a.len();
    let mut out = vec![0u128; n];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            let term = ai.wrapping_mul(bj.unsigned_abs() as u128);
            let negate = (bj < 0) ^ (i + j >= n);
            let k = (i + j) % n;
            out[k] = if negate { out[k].wrapping_sub(term) } else { out[k].wrapping_add(term) };
        }
    }
    out.into_iter().map(|v| mask128(v, bits)).collect()
}

fn ring_suite(trials: usize, rng: &mut ChaCha20Rng) -> Check {
    let e = |x: esafl_core::ring::RingError| x.to_string();
    for _ in 0..trials {
        let n = 1usize << rng.random_range(1..=4);
        let bits = [13u32, 64, 100, 128][rng.random_range(0..4)];
        let a: Vec<u128> = (0..n).map(|_| mask128(rng.random(), bits)).collect();
        let b: Vec<u128> = (0..n).map(|_| mask128(rng.random(), bits)).collect();
        let wide =
            |v: &[u128]| v.iter().map(|&x| Wide::from_limbs([x as u64, (x >> 64) as u64, 0, 0, 0, 0, 0, 0])).collect();
        let ea = RingElem::from_coeffs(bits, wide(&a)).map_err(e)?;
        let eb = RingElem::from_coeffs(bits, wide(&b)).map_err(e)?;
        let got = |x: &RingElem| x.coeffs().iter().map(to_u128).collect::<Vec<_>>();

        let sum: Vec<u128> = a.iter().zip(&b).map(|(x, y)| mask128(x.wrapping_add(*y), bits)).collect();
        ensure(got(&ea.add(&eb).map_err(e)?) == sum, || format!("add mismatch at n={n}, log_q={bits}"))?;
        let diff: Vec<u128> = a.iter().zip(&b).map(|(x, y)| mask128(x.wrapping_sub(*y), bits)).collect();
        ensure(got(&ea.sub(&eb).map_err(e)?) == diff, || format!("sub mismatch at n={n}, log_q={bits}"))?;

        let tern: Vec<i64> = (0..n).map(|_| rng.random_range(-1..=1)).collect();
        let plus = (0..n as u32).filter(|&i| tern[i as usize] == 1).collect();
        let minus = (0..n as u32).filter(|&i| tern[i as usize] == -1).collect();
        let key = SparseTernaryKey::new(n, plus, minus).map_err(e)?;
        ensure(got(&ea.mul_sparse(&key).map_err(e)?) == schoolbook(&a, &tern, bits), || {
            format!("sparse product mismatch at n={n}, log_q={bits}")
        })?;

        let small: Vec<i64> = (0..n).map(|_| rng.random_range(-9..=9)).collect();
        let s = SmallPoly::new(small.clone(), 9).map_err(e)?;
        ensure(got(&ea.mul_small(&s).map_err(e)?) == schoolbook(&a, &small, bits), || {
            format!("small product mismatch at n={n}, log_q={bits}")
        })?;
    }
    Ok(4 * trials)
}

fn packing_suite(params: &SchemeParams, trials: usize, rng: &mut ChaCha20Rng) -> Check {
    let codec = Codec::new(params);
    let g = codec.geometry();
    let slots = g.slots as usize;
    let fmax = (1u64 << g.log_q0) - 1;
    for _ in 0..trials {
        let fields: Vec<u64> = (0..slots).map(|_| rng.random_range(0..=fmax)).collect();
        ensure(g.unpack_coeff(&g.pack_coeff(&fields)) == fields, || "unpack(pack(x)) != x".into())?;
    }
    let top = g.pack_coeff(&vec![fmax; slots]);
    let mut acc = Wide::ZERO;
    for k in 1..=(1u64 << g.pad) {
        acc.add_assign(&top);
        ensure(g.unpack_coeff(&acc) == vec![k * fmax; slots], || format!("carry leaked after {k} additions"))?;
    }
    Ok(trials + (1 << g.pad))
}

fn codec_suite(params: &SchemeParams, trials: usize, rng: &mut ChaCha20Rng) -> Check {
    let codec = Codec::new(params);
    let bound = codec.roundtrip_bound();
    for _ in 0..trials {
        let v: Vec<f64> = (0..params.reals_per_poly()).map(|_| rng.random()).collect();
        let enc = codec.encode(&v).map_err(|e| e.to_string())?;
        let dec = codec.decode(&enc, 1).map_err(|e| e.to_string())?;
        let worst = dec.iter().zip(&v).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        ensure(worst <= bound, || format!("roundtrip error {worst:e} exceeds {bound:e}"))?;
    }
    Ok(trials)
}

struct Round {
    inputs: Vec<(Vec<f64>, PackedPlain)>,
    cts: Vec<esafl_core::eshe::Ciphertext>,
}

fn encrypt_round(
    params: &SchemeParams,
    codec: &Codec,
    km: &esafl_core::eshe::KeyMaterial,
    rounds: &[u64],
    rng: &mut ChaCha20Rng,
) -> Result<Round, String> {
    let len = params.capacity();
    let mut inputs = Vec::new();
    let mut cts = Vec::new();
    for (key, &t) in km.enc_keys.iter().zip(rounds) {
        let v: Vec<f64> = (0..len).map(|_| rng.random()).collect();
        let m = codec
            .ecd_pack(&RealVector::new(v.clone()).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?
            .remove(0);
        let a = round_public(t, 0, &km.a0, &km.seed, params).map_err(|e| e.to_string())?;
        cts.push(encrypt(params, t, &a, key, &m, rng).map_err(|e| e.to_string())?);
        inputs.push((v, m));
    }
    Ok(Round { inputs, cts })
}

fn scheme_suite(params: &SchemeParams, trials: usize, rng: &mut ChaCha20Rng) -> Check {
    let codec = Codec::new(params);
    let n = params.num_clients();
    let s = |e: EsheError| e.to_string();
    for trial in 0..trials {
        let km = keygen(params, rng).map_err(s)?;
        let t = 2 + trial as u64;
        let r = encrypt_round(params, &codec, &km, &vec![t; n], rng)?;
        let a = round_public(t, 0, &km.a0, &km.seed, params).map_err(|e| e.to_string())?;
        let agg = eval_add(params, &r.cts).map_err(s)?;
        let plain = decrypt(params, &a, &km.dec_key, &agg).map_err(s)?;
        let seqs: Vec<Vec<PackedPlain>> = r.inputs.iter().map(|(_, m)| vec![m.clone()]).collect();
        let expect = codec.ep_eval(&seqs).map_err(|e| e.to_string())?;
        ensure(plain == expect[0], || format!("trial {trial}: aggregate differs from plaintext sum"))?;
    }
    Ok(trials)
}

/// Fraction of data slots in `leak` that differ from the exact slot sums in
/// `truth`.
pub fn slot_mismatch(leak: &PackedPlain, truth: &PackedPlain) -> f64 {
    let g = leak.geometry();
    let data = g.slots as usize - 1;
    let mut bad = 0usize;
    for (x, y) in leak.coeffs().iter().zip(truth.coeffs()) {
        let (fx, fy) = (g.unpack_coeff(x), g.unpack_coeff(y));
        bad += fx[..data].iter().zip(&fy[..data]).filter(|(a, b)| a != b).count();
    }
    bad as f64 / (data * leak.n()).max(1) as f64
}

fn negatives_suite(params: &SchemeParams, trials: usize, rng: &mut ChaCha20Rng) -> Check {
    let codec = Codec::new(params);
    let n = params.num_clients();
    let s = |e: EsheError| e.to_string();
    let sum_of = |inputs: &[(Vec<f64>, PackedPlain)]| -> Result<PackedPlain, String> {
        let seqs: Vec<Vec<PackedPlain>> = inputs.iter().map(|(_, m)| vec![m.clone()]).collect();
        Ok(codec.ep_eval(&seqs).map_err(|e| e.to_string())?.remove(0))
    };
    for trial in 0..trials {
        let km = keygen(params, rng).map_err(s)?;
        let t = 3 + trial as u64;
        let a = round_public(t, 0, &km.a0, &km.seed, params).map_err(|e| e.to_string())?;

        let r = encrypt_round(params, &codec, &km, &vec![t; n], rng)?;
        let partial = eval_add(params, &r.cts[..n - 1]).map_err(s)?;
        ensure(matches!(decrypt(params, &a, &km.dec_key, &partial), Err(EsheError::PartialAggregate { .. })), || {
            "partial aggregate was accepted".into()
        })?;
        let leak = decrypt_unchecked(params, &a, &km.dec_key, &partial).map_err(s)?;
        let frac = slot_mismatch(&leak, &sum_of(&r.inputs[..n - 1])?);
        ensure(frac >= 0.999, || format!("partial aggregate matched in {:.3}% of slots", 100.0 * (1.0 - frac)))?;

        let mut rounds = vec![t; n];
        rounds[n - 1] = t + 1;
        let r = encrypt_round(params, &codec, &km, &rounds, rng)?;
        let mixed = eval_add_spanning(params, &r.cts).map_err(s)?;
        ensure(decrypt(params, &a, &km.dec_key, &mixed).is_err(), || "spanning aggregate was accepted".into())?;
        let leak = decrypt_unchecked(params, &a, &km.dec_key, &mixed).map_err(s)?;
        let frac = slot_mismatch(&leak, &sum_of(&r.inputs)?);
        ensure(frac >= 0.999, || format!("spanning aggregate matched in {:.3}% of slots", 100.0 * (1.0 - frac)))?;
    }
    Ok(2 * trials)
}

fn golden_suite(dir: Option<&Path>) -> Check {
    let produced = fixtures::all();
    for (name, bytes) in &produced {
        let want: Vec<u8> = match dir {
            Some(d) => std::fs::read(d.join(name)).map_err(|e| format!("{name}: {e}"))?,
            None => BUILTIN_GOLDEN
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, b)| b.to_vec())
                .ok_or_else(|| format!("{name}: no built-in fixture"))?,
        };
        ensure(&want == bytes, || format!("{name}: bytes differ from fixture"))?;
    }
    Ok(produced.len())
}

/// Runs every suite with `trials` random instances each.
pub fn cmd_selftest(params: &SchemeParams, trials: usize, seed: u64, golden_dir: Option<&Path>) -> Summary {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut suites = Vec::new();
    let mut run = |name: &'static str, r: Check| {
        suites.push(match r {
            Ok(checks) => SuiteResult { name, checks, failure: None },
            Err(why) => SuiteResult { name, checks: 0, failure: Some(why) },
        })
    };
    run("ring", ring_suite(trials, &mut rng));
    run("packing", packing_suite(params, trials, &mut rng));
    run("codec", codec_suite(params, trials, &mut rng));
    run("scheme", scheme_suite(params, trials, &mut rng));
    run("negatives", negatives_suite(params, trials, &mut rng));
    run("golden", golden_suite(golden_dir));
    Summary { suites, vacuous: trials == 0 }
}
