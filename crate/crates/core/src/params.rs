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

//! Scheme parameters and the packing geometry derived from them.

use std::fmt::Write as _;

use thiserror::Error;

use crate::ring::wide::MAX_BITS;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamsError {
    #[error("parameter constraint violated ({invariant}): {detail}")]
    Constraint { invariant: &'static str, detail: String },
    #[error("profile line {line}: {message}")]
    Profile { line: usize, message: String },
}

fn violation(invariant: &'static str, detail: impl Into<String>) -> ParamsError {
    ParamsError::Constraint { invariant, detail: detail.into() }
}

/// Optional knobs for [`SchemeParams::setup`]. Unset fields take their
/// defaults; `pad` and `slots` default to the values derived from the other
/// parameters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub pad: Option<u32>,
    pub slots: Option<u32>,
    pub ternary_weight: Option<usize>,
    pub gaussian_sigma: Option<f64>,
    pub seed_bits_k: Option<u32>,
    pub reals_per_slot: Option<u32>,
}

/// Validated, immutable scheme parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeParams {
    n: usize,
    log_q: u32,
    log_p: u32,
    log_q0: u32,
    num_clients: usize,
    ternary_weight: usize,
    gaussian_sigma: f64,
    pad: u32,
    slots: u32,
    seed_bits_k: u32,
    reals_per_slot: u32,
}

pub const DEFAULT_TERNARY_WEIGHT: usize = 64;
pub const DEFAULT_SEED_BITS: u32 = 64;

pub fn default_sigma() -> f64 {
    1.22f64.sqrt()
}

/// `ceil(log2(x))` for `x >= 1`.
pub fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

impl SchemeParams {
    pub fn setup(
        n: usize,
        log_q: u32,
        log_p: u32,
        log_q0: u32,
        num_clients: usize,
        overrides: &Overrides,
    ) -> Result<Self, ParamsError> {
        if n < 2 || !n.is_power_of_two() {
            return Err(violation("n is a power of two", format!("n = {n}")));
        }
        if n > u32::MAX as usize {
            return Err(violation("n fits 32-bit indices", format!("n = {n}")));
        }
        if log_q == 0 || log_q > MAX_BITS {
            return Err(violation("0 < log_q <= 512", format!("log_q = {log_q}")));
        }
        if log_p == 0 || log_p >= log_q {
            return Err(violation("0 < log_p < log_q", format!("log_p = {log_p}, log_q = {log_q}")));
        }
        if log_q0 < 3 {
            return Err(violation("log_q0 >= 3", format!("log_q0 = {log_q0}")));
        }
        if num_clients < 2 || num_clients > u16::MAX as usize {
            return Err(violation("2 <= num_clients <= 65535", format!("num_clients = {num_clients}")));
        }
        let carry_bits = ceil_log2(num_clients as u64);
        let pad = overrides.pad.unwrap_or(carry_bits);
        if pad < carry_bits {
            return Err(violation(
                "pad >= ceil(log2(num_clients))",
                format!("pad = {pad}, need at least {carry_bits}"),
            ));
        }
        let width = pad as u64 + log_q0 as u64;
        if width > 64 {
            return Err(violation("pad + log_q0 <= 64", format!("slot width {width}")));
        }
        let slots = overrides.slots.unwrap_or((log_p as u64 / width) as u32);
        if slots < 2 {
            return Err(violation(
                "slots_T >= 2",
                format!("slots_T = {slots} (log_p = {log_p}, slot width = {width})"),
            ));
        }
        if slots as u64 * width > log_p as u64 {
            return Err(violation("slots_T * (pad + log_q0) <= log_p", format!("{slots} * {width} > {log_p}")));
        }
        let ternary_weight = overrides.ternary_weight.unwrap_or(DEFAULT_TERNARY_WEIGHT);
        if ternary_weight > n {
            return Err(violation("ternary_weight <= n", format!("h = {ternary_weight}, n = {n}")));
        }
        let gaussian_sigma = overrides.gaussian_sigma.unwrap_or_else(default_sigma);
        if !(gaussian_sigma.is_finite() && gaussian_sigma > 0.0) {
            return Err(violation("gaussian_sigma > 0", format!("sigma = {gaussian_sigma}")));
        }
        let seed_bits_k = overrides.seed_bits_k.unwrap_or(DEFAULT_SEED_BITS);
        if seed_bits_k == 0 || seed_bits_k > 64 {
            return Err(violation("1 <= seed_bits_k <= 64", format!("k = {seed_bits_k}")));
        }
        let reals_per_slot = overrides.reals_per_slot.unwrap_or(1);
        if reals_per_slot != 1 && reals_per_slot != 2 {
            return Err(violation("reals_per_slot in {1, 2}", format!("reals_per_slot = {reals_per_slot}")));
        }
        let params = SchemeParams {
            n,
            log_q,
            log_p,
            log_q0,
            num_clients,
            ternary_weight,
            gaussian_sigma,
            pad,
            slots,
            seed_bits_k,
            reals_per_slot,
        };
        let headroom = log_q - log_p;
        let noise = num_clients as u64 * params.error_bound();
        if headroom < 64 && noise >= 1u64 << headroom {
            return Err(violation(
                "num_clients * ceil(6 sigma) < 2^(log_q - log_p)",
                format!("{noise} >= 2^{headroom}"),
            ));
        }
        if params.noise_margin_bits() <= 0 {
            return Err(violation("noise margin > 0", format!("margin = {} bits", params.noise_margin_bits())));
        }
        Ok(params)
    }

    /// `n = 2^15, log q = 478, log p = 460, log q0 = 16, N = 9`.
    pub fn full() -> Self {
        Self::setup(1 << 15, 478, 460, 16, 9, &Overrides::default()).expect("full profile is valid")
    }

    /// Same moduli as [`SchemeParams::full`] at `n = 2^10`.
    pub fn desk() -> Self {
        Self::setup(1 << 10, 478, 460, 16, 9, &Overrides::default()).expect("desk profile is valid")
    }

    /// Rebuilds with a different `log_q0` and/or client count, re-deriving
    /// `pad` and `slots_T`.
    pub fn with_precision(&self, log_q0: u32, num_clients: usize) -> Result<Self, ParamsError> {
        Self::setup(
            self.n,
            self.log_q,
            self.log_p,
            log_q0,
            num_clients,
            &Overrides {
                ternary_weight: Some(self.ternary_weight),
                gaussian_sigma: Some(self.gaussian_sigma),
                seed_bits_k: Some(self.seed_bits_k),
                reals_per_slot: Some(self.reals_per_slot),
                ..Overrides::default()
            },
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn log_q(&self) -> u32 {
        self.log_q
    }
    pub fn log_p(&self) -> u32 {
        self.log_p
    }
    pub fn log_q0(&self) -> u32 {
        self.log_q0
    }
    pub fn num_clients(&self) -> usize {
        self.num_clients
    }
    pub fn ternary_weight(&self) -> usize {
        self.ternary_weight
    }
    pub fn gaussian_sigma(&self) -> f64 {
        self.gaussian_sigma
    }
    pub fn pad(&self) -> u32 {
        self.pad
    }
    pub fn slots(&self) -> u32 {
        self.slots
    }
    pub fn seed_bits_k(&self) -> u32 {
        self.seed_bits_k
    }
    pub fn reals_per_slot(&self) -> u32 {
        self.reals_per_slot
    }

    /// Bits per packed slot field.
    pub fn slot_width(&self) -> u32 {
        self.pad + self.log_q0
    }

    /// Maximum absolute value produced by the error sampler.
    pub fn error_bound(&self) -> u64 {
        (6.0 * self.gaussian_sigma).ceil() as u64
    }

    pub fn noise_margin_bits(&self) -> i64 {
        let headroom = (self.log_q - self.log_p) as i64;
        let noise = self.num_clients as u64 * self.error_bound();
        headroom - ceil_log2(noise.max(1)) as i64
    }

    /// Reals carried by one encoded polynomial.
    pub fn reals_per_poly(&self) -> usize {
        self.n / 2 * self.reals_per_slot as usize
    }

    /// Reals carried by one packed plaintext (and so one ciphertext).
    pub fn capacity(&self) -> usize {
        (self.slots as usize - 1) * self.reals_per_poly()
    }

    pub fn ciphertexts_for(&self, len: usize) -> usize {
        len.div_ceil(self.capacity())
    }

    /// Encoded polynomials needed without packing (one per ciphertext).
    pub fn unpacked_ciphertexts_for(&self, len: usize) -> usize {
        len.div_ceil(self.reals_per_poly())
    }

    pub fn bytes_per_coeff(&self) -> usize {
        self.log_q.div_ceil(8) as usize
    }

    pub fn ring_bytes(&self) -> usize {
        self.n * self.bytes_per_coeff()
    }

    /// Serializes to the flat `key=value` profile format.
    pub fn to_profile(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "n={}", self.n);
        let _ = writeln!(out, "log_q={}", self.log_q);
        let _ = writeln!(out, "log_p={}", self.log_p);
        let _ = writeln!(out, "log_q0={}", self.log_q0);
        let _ = writeln!(out, "num_clients={}", self.num_clients);
        let _ = writeln!(out, "ternary_weight={}", self.ternary_weight);
        let _ = writeln!(out, "gaussian_sigma={}", self.gaussian_sigma);
        let _ = writeln!(out, "pad={}", self.pad);
        let _ = writeln!(out, "slots_T={}", self.slots);
        let _ = writeln!(out, "seed_bits_k={}", self.seed_bits_k);
        let _ = writeln!(out, "reals_per_slot={}", self.reals_per_slot);
        out
    }

    /// Parses a profile. Blank lines and `#` comments are ignored; `n`,
    /// `log_q`, `log_p`, `log_q0` and `num_clients` are required.
    pub fn from_profile(text: &str) -> Result<Self, ParamsError> {
        let mut n = None;
        let mut log_q = None;
        let mut log_p = None;
        let mut log_q0 = None;
        let mut clients = None;
        let mut ov = Overrides::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| ParamsError::Profile { line: line_no, message };
            let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected key=value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let int = || -> Result<u64, ParamsError> { value.parse::<u64>().map_err(|e| err(format!("{key}: {e}"))) };
            match key {
                "n" => n = Some(int()? as usize),
                "log_q" => log_q = Some(int()? as u32),
                "log_p" => log_p = Some(int()? as u32),
                "log_q0" => log_q0 = Some(int()? as u32),
                "num_clients" => clients = Some(int()? as usize),
                "ternary_weight" => ov.ternary_weight = Some(int()? as usize),
                "gaussian_sigma" => {
                    ov.gaussian_sigma = Some(value.parse::<f64>().map_err(|e| err(format!("{key}: {e}")))?)
                }
                "pad" => ov.pad = Some(int()? as u32),
                "slots_T" => ov.slots = Some(int()? as u32),
                "seed_bits_k" => ov.seed_bits_k = Some(int()? as u32),
                "reals_per_slot" => ov.reals_per_slot = Some(int()? as u32),
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        let missing = |k: &str| ParamsError::Profile { line: 0, message: format!("missing required key {k:?}") };
        Self::setup(
            n.ok_or_else(|| missing("n"))?,
            log_q.ok_or_else(|| missing("log_q"))?,
            log_p.ok_or_else(|| missing("log_p"))?,
            log_q0.ok_or_else(|| missing("log_q0"))?,
            clients.ok_or_else(|| missing("num_clients"))?,
            &ov,
        )
    }
}
