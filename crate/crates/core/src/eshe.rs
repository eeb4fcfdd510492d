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

//! The additively homomorphic scheme.
//!
//! Client `i` encrypts `m` as `c = [a * s_i + p * e + m]_q`. Summing all `N`
//! ciphertexts of a round gives `[a * s + p * e' + M]_q` with `s = sum(s_i)`,
//! and `[[C - a * s]_q]_p = M` recovers the plaintext sum in one step.
//!
//! The decryptor learns nothing useful from an incomplete or mixed-round sum:
//! the residual `a * s_k` (or `(a^t - a^tau) * s_k`) masks it. Ciphertexts
//! therefore carry the number of contributions they aggregate.

use rand::Rng;
use thiserror::Error;

use crate::codec::{PackedPlain, SlotGeometry};
use crate::params::{ceil_log2, SchemeParams};
use crate::prg::{PrgError, RoundSeed};
use crate::ring::{
    lift_and_scale_error, sample_gaussian, sample_ternary, RingElem, RingError, SmallPoly, SparseTernaryKey, Wide,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EsheError {
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Prg(#[from] PrgError),
    #[error("plaintext coefficient {index} is not below p = 2^{log_p}")]
    PlaintextOverflow { index: usize, log_p: u32 },
    #[error("cannot aggregate an empty ciphertext list")]
    Empty,
    #[error("ciphertexts from rounds {0} and {1} cannot be aggregated")]
    RoundMismatch(u64, u64),
    #[error("aggregate of {count} contributions exceeds {max} clients")]
    CountOverflow { count: usize, max: usize },
    #[error("aggregate holds {count} of {expected} contributions")]
    PartialAggregate { count: usize, expected: usize },
    #[error("decryption noise {value:?} outside the +/-{bound} band at coefficient {index}")]
    NoiseOverflow { index: usize, value: Option<i64>, bound: u64 },
    #[error("key material is inconsistent: {0}")]
    InconsistentKeys(String),
}

/// Output of the trusted dealer.
#[derive(Clone, PartialEq, Eq)]
pub struct KeyMaterial {
    pub enc_keys: Vec<SparseTernaryKey>,
    pub dec_key: SmallPoly,
    pub a0: RingElem,
    pub seed: RoundSeed,
}

impl std::fmt::Debug for KeyMaterial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyMaterial").field("clients", &self.enc_keys.len()).finish_non_exhaustive()
    }
}

impl KeyMaterial {
    /// Checks `dec_key == sum(enc_keys)` exactly.
    pub fn verify(&self) -> Result<(), EsheError> {
        let sum = SmallPoly::sum_of_keys(&self.enc_keys)?;
        if sum.coeffs() != self.dec_key.coeffs() {
            return Err(EsheError::InconsistentKeys("decryption key differs from the sum of encryption keys".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ciphertext {
    pub body: RingElem,
    pub round: u64,
    pub client_tag: Option<u32>,
    pub agg_count: u16,
}

pub fn keygen<R: Rng + ?Sized>(params: &SchemeParams, rng: &mut R) -> Result<KeyMaterial, EsheError> {
    let n = params.n();
    let enc_keys = (0..params.num_clients())
        .map(|_| sample_ternary(rng, n, params.ternary_weight()))
        .collect::<Result<Vec<_>, _>>()?;
    let dec_key = SmallPoly::sum_of_keys(&enc_keys)?;
    let log_q = params.log_q();
    let a0 =
        RingElem::from_coeffs_reduced(log_q, (0..n).map(|_| Wide::from_limbs(rng.random::<[u64; 8]>())).collect())?;
    let k = params.seed_bits_k();
    let raw: u64 = rng.random();
    let secret = if k == 64 { raw } else { raw & ((1u64 << k) - 1) };
    Ok(KeyMaterial { enc_keys, dec_key, a0, seed: RoundSeed::new(secret, k)? })
}

fn check_plaintext(params: &SchemeParams, m: &PackedPlain) -> Result<(), EsheError> {
    if m.n() != params.n() {
        return Err(RingError::DimensionMismatch(params.n(), m.n()).into());
    }
    if let Some(index) = m.coeffs().iter().position(|c| !c.fits(params.log_p())) {
        return Err(EsheError::PlaintextOverflow { index, log_p: params.log_p() });
    }
    Ok(())
}

/// Encrypts `m` for round `round` under the public polynomial `a_t` and the
/// client key.
pub fn encrypt<R: Rng + ?Sized>(
    params: &SchemeParams,
    round: u64,
    a_t: &RingElem,
    key: &SparseTernaryKey,
    m: &PackedPlain,
    rng: &mut R,
) -> Result<Ciphertext, EsheError> {
    let e = sample_gaussian(rng, params.n(), params.gaussian_sigma())?;
    encrypt_with_error(params, round, a_t, key, m, &e)
}

/// Deterministic encryption with a caller-supplied error polynomial. Test
/// surface; [`encrypt`] always draws fresh noise.
pub fn encrypt_with_error(
    params: &SchemeParams,
    round: u64,
    a_t: &RingElem,
    key: &SparseTernaryKey,
    m: &PackedPlain,
    e: &SmallPoly,
) -> Result<Ciphertext, EsheError> {
    check_plaintext(params, m)?;
    let mut body = a_t.mul_sparse(key)?;
    body.add_assign(&lift_and_scale_error(e, params.log_p(), params.log_q())?)?;
    body.add_assign(&m.to_ring().lift(params.log_q())?)?;
    Ok(Ciphertext { body, round, client_tag: None, agg_count: 1 })
}

fn fold(params: &SchemeParams, cts: &[Ciphertext], same_round: bool) -> Result<Ciphertext, EsheError> {
    let first = cts.first().ok_or(EsheError::Empty)?;
    let mut count = 0usize;
    let mut body = RingElem::zero(first.body.n(), first.body.log_q())?;
    for ct in cts {
        if same_round && ct.round != first.round {
            return Err(EsheError::RoundMismatch(first.round, ct.round));
        }
        count += ct.agg_count as usize;
        body.add_assign(&ct.body)?;
    }
    if count > params.num_clients() {
        return Err(EsheError::CountOverflow { count, max: params.num_clients() });
    }
    Ok(Ciphertext { body, round: first.round, client_tag: None, agg_count: count as u16 })
}

/// Homomorphic sum of same-round ciphertexts.
pub fn eval_add(params: &SchemeParams, cts: &[Ciphertext]) -> Result<Ciphertext, EsheError> {
    fold(params, cts, true)
}

/// Sums ciphertexts regardless of round. The result decrypts to noise; it
/// exists only to exercise that property.
pub fn eval_add_spanning(params: &SchemeParams, cts: &[Ciphertext]) -> Result<Ciphertext, EsheError> {
    fold(params, cts, false)
}

fn strip_mask(params: &SchemeParams, a_t: &RingElem, s: &SmallPoly, ct: &Ciphertext) -> Result<RingElem, EsheError> {
    let mask = a_t.mul_small(s)?;
    let mut diff = ct.body.clone();
    diff.sub_assign(&mask)?;
    if diff.log_q() != params.log_q() {
        return Err(RingError::Geometry("ciphertext modulus differs from parameters".into()).into());
    }
    Ok(diff)
}

fn geometry(params: &SchemeParams) -> SlotGeometry {
    SlotGeometry { slots: params.slots(), pad: params.pad(), log_q0: params.log_q0() }
}

/// One-step decryption of a complete aggregate. Fails if the ciphertext
/// does not hold exactly `N` contributions or if the recovered noise leaves
/// the band a genuine aggregate can produce.
pub fn decrypt(
    params: &SchemeParams,
    a_t: &RingElem,
    s: &SmallPoly,
    ct: &Ciphertext,
) -> Result<PackedPlain, EsheError> {
    let expected = params.num_clients();
    if ct.agg_count as usize != expected {
        return Err(EsheError::PartialAggregate { count: ct.agg_count as usize, expected });
    }
    let diff = strip_mask(params, a_t, s, ct)?;
    let headroom = params.log_q() - params.log_p();
    let bound = expected as u64 * params.error_bound();
    for (index, c) in diff.coeffs().iter().enumerate() {
        let noise = c.shr(params.log_p()).to_signed(headroom);
        if noise.is_none_or(|v| v.unsigned_abs() > bound) {
            return Err(EsheError::NoiseOverflow { index, value: noise, bound });
        }
    }
    Ok(PackedPlain::from_ring(diff.mod_p(params.log_p())?, geometry(params)))
}

/// `[[C - a * s]_q]_p` with no completeness or noise checks. Test surface for
/// partial and mixed-round aggregates.
pub fn decrypt_unchecked(
    params: &SchemeParams,
    a_t: &RingElem,
    s: &SmallPoly,
    ct: &Ciphertext,
) -> Result<PackedPlain, EsheError> {
    let diff = strip_mask(params, a_t, s, ct)?;
    Ok(PackedPlain::from_ring(diff.mod_p(params.log_p())?, geometry(params)))
}

/// Bits of headroom between the largest aggregate noise and `q / p`.
pub fn noise_margin(params: &SchemeParams) -> i64 {
    let headroom = (params.log_q() - params.log_p()) as i64;
    let noise = params.num_clients() as u64 * params.error_bound();
    headroom - ceil_log2(noise.max(1)) as i64
}
