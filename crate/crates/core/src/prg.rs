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

//! Public polynomial expansion.
//!
//! Every party derives the round polynomial locally: the round counter is
//! XORed with the secret seed `B`, the `k`-bit result becomes a ChaCha20 key
//! (little-endian, zero-padded to 32 bytes), and the keystream (all-zero
//! 96-bit nonce, block counter 0) is cut into `ceil(log_q / 8)`-byte
//! little-endian coefficients masked to `log_q` bits.
//!
//! A round that needs several ciphertexts uses one polynomial per ciphertext
//! index: index `j` reads the `j`-th run of `n` coefficients from that same
//! keystream, so index 0 is the round polynomial `a^t` itself.

use chacha20::cipher::{KeyIvInit, StreamCipher, StreamCipherSeek};
use chacha20::ChaCha20;
use thiserror::Error;

use crate::params::SchemeParams;
use crate::ring::{RingElem, Wide};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PrgError {
    #[error("{what} = {value} does not fit in {bits} bits")]
    OutOfRange { what: &'static str, value: u64, bits: u32 },
    #[error("public polynomial geometry does not match parameters")]
    Geometry,
}

/// Secret seed `B` shared by the clients, together with its bit length.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct RoundSeed {
    secret: u64,
    bits: u32,
}

impl std::fmt::Debug for RoundSeed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RoundSeed").field("bits", &self.bits).finish_non_exhaustive()
    }
}

fn check_range(what: &'static str, value: u64, bits: u32) -> Result<(), PrgError> {
    if bits == 0 || bits > 64 || (bits < 64 && value >> bits != 0) {
        return Err(PrgError::OutOfRange { what, value, bits });
    }
    Ok(())
}

impl RoundSeed {
    pub fn new(secret: u64, bits: u32) -> Result<Self, PrgError> {
        check_range("B", secret, bits)?;
        Ok(RoundSeed { secret, bits })
    }

    pub fn secret(&self) -> u64 {
        self.secret
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }
}

/// ChaCha20 key for round `t`: `t XOR B` as `k` bits, little-endian in
/// `ceil(k/8)` bytes, zero-padded to 32 bytes.
pub fn derive_seed(t: u64, b: u64, k: u32) -> Result<[u8; 32], PrgError> {
    check_range("t", t, k)?;
    check_range("B", b, k)?;
    let x = (t ^ b).to_le_bytes();
    let mut key = [0u8; 32];
    let used = k.div_ceil(8) as usize;
    key[..used].copy_from_slice(&x[..used]);
    Ok(key)
}

/// Fills `n` coefficients from the keystream starting at byte
/// `index * n * ceil(log_q/8)`.
fn expand(key: &[u8; 32], index: u64, n: usize, log_q: u32) -> RingElem {
    let width = log_q.div_ceil(8) as usize;
    let mut stream = vec![0u8; n * width];
    let mut cipher = ChaCha20::new(key.into(), &[0u8; 12].into());
    cipher.seek(index * (n * width) as u64);
    cipher.apply_keystream(&mut stream);
    let coeffs = stream.chunks_exact(width).map(|c| Wide::from_le(c).masked(log_q)).collect();
    RingElem::from_coeffs(log_q, coeffs).expect("masked coefficients fit")
}

/// `a^t`: the round polynomial for ciphertext index 0.
pub fn prpg(t: u64, seed: &RoundSeed, params: &SchemeParams) -> Result<RingElem, PrgError> {
    prpg_indexed(t, 0, seed, params)
}

/// Public polynomial for ciphertext `index` of round `t`.
pub fn prpg_indexed(t: u64, index: u64, seed: &RoundSeed, params: &SchemeParams) -> Result<RingElem, PrgError> {
    let key = derive_seed(t, seed.secret, seed.bits)?;
    Ok(expand(&key, index, params.n(), params.log_q()))
}

/// The public polynomial every party uses for ciphertext `index` of round
/// `t`. Rounds 0 and 1 reuse the dealer's `a^0` for index 0; everything else
/// comes from [`prpg_indexed`].
pub fn round_public(
    t: u64,
    index: u64,
    a0: &RingElem,
    seed: &RoundSeed,
    params: &SchemeParams,
) -> Result<RingElem, PrgError> {
    if a0.n() != params.n() || a0.log_q() != params.log_q() {
        return Err(PrgError::Geometry);
    }
    if t <= 1 && index == 0 {
        return Ok(a0.clone());
    }
    prpg_indexed(t, index, seed, params)
}
