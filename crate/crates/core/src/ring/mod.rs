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

//! Arithmetic in `Z_q[X]/(X^n + 1)` for power-of-two `q`.
//!
//! Only products of a dense element with a sparse or small-coefficient
//! polynomial are supported; they are computed as signed sums of negacyclic
//! rotations, `O(nnz * n)` wide additions. No operation here is constant-time.

pub mod sample;
pub mod wide;

use std::collections::BTreeMap;

use thiserror::Error;

pub use sample::{sample_gaussian, sample_ternary};
pub use wide::Wide;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RingError {
    #[error("modulus mismatch: (n={0}, log_q={1}) vs (n={2}, log_q={3})")]
    ModulusMismatch(usize, u32, usize, u32),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("coefficient {index} does not fit in {bits} bits")]
    CoefficientOverflow { index: usize, bits: u32 },
    #[error("invalid ring geometry: {0}")]
    Geometry(String),
    #[error("invalid key: {0}")]
    InvalidKey(String),
    #[error("|coefficient| {value} exceeds declared bound {bound}")]
    BoundExceeded { value: i64, bound: u64 },
    #[error("sampler precondition failed: {0}")]
    Sampler(String),
}

/// Polynomial with coefficients in `[0, 2^log_q)`, length `n`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RingElem {
    log_q: u32,
    coeffs: Vec<Wide>,
}

impl std::fmt::Debug for RingElem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RingElem").field("n", &self.n()).field("log_q", &self.log_q).finish_non_exhaustive()
    }
}

fn check_geometry(n: usize, log_q: u32) -> Result<(), RingError> {
    if n == 0 || !n.is_power_of_two() {
        return Err(RingError::Geometry(format!("n = {n} is not a power of two")));
    }
    if log_q == 0 || log_q > wide::MAX_BITS {
        return Err(RingError::Geometry(format!("log_q = {log_q} out of range")));
    }
    Ok(())
}

impl RingElem {
    pub fn zero(n: usize, log_q: u32) -> Result<Self, RingError> {
        check_geometry(n, log_q)?;
        Ok(RingElem { log_q, coeffs: vec![Wide::ZERO; n] })
    }

    /// Takes coefficients that must already be below `2^log_q`.
    pub fn from_coeffs(log_q: u32, coeffs: Vec<Wide>) -> Result<Self, RingError> {
        check_geometry(coeffs.len(), log_q)?;
        if let Some(index) = coeffs.iter().position(|c| !c.fits(log_q)) {
            return Err(RingError::CoefficientOverflow { index, bits: log_q });
        }
        Ok(RingElem { log_q, coeffs })
    }

    /// Reduces arbitrary wide values modulo `2^log_q`.
    pub fn from_coeffs_reduced(log_q: u32, mut coeffs: Vec<Wide>) -> Result<Self, RingError> {
        check_geometry(coeffs.len(), log_q)?;
        for c in &mut coeffs {
            c.mask_in_place(log_q);
        }
        Ok(RingElem { log_q, coeffs })
    }

    pub fn from_u64s(log_q: u32, values: &[u64]) -> Result<Self, RingError> {
        Self::from_coeffs(log_q, values.iter().map(|&v| Wide::from_u64(v)).collect())
    }

    pub fn n(&self) -> usize {
        self.coeffs.len()
    }

    pub fn log_q(&self) -> u32 {
        self.log_q
    }

    pub fn coeffs(&self) -> &[Wide] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Wide> {
        self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Wide::is_zero)
    }

    fn same_modulus(&self, other: &RingElem) -> Result<(), RingError> {
        if self.n() != other.n() || self.log_q != other.log_q {
            return Err(RingError::ModulusMismatch(self.n(), self.log_q, other.n(), other.log_q));
        }
        Ok(())
    }

    pub fn add(&self, other: &RingElem) -> Result<RingElem, RingError> {
        let mut out = self.clone();
        out.add_assign(other)?;
        Ok(out)
    }

    pub fn add_assign(&mut self, other: &RingElem) -> Result<(), RingError> {
        self.same_modulus(other)?;
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            a.add_assign(b);
            a.mask_in_place(self.log_q);
        }
        Ok(())
    }

    pub fn sub(&self, other: &RingElem) -> Result<RingElem, RingError> {
        let mut out = self.clone();
        out.sub_assign(other)?;
        Ok(out)
    }

    pub fn sub_assign(&mut self, other: &RingElem) -> Result<(), RingError> {
        self.same_modulus(other)?;
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            a.sub_assign(b);
            a.mask_in_place(self.log_q);
        }
        Ok(())
    }

    pub fn neg(&self) -> RingElem {
        let mut out = self.clone();
        for c in &mut out.coeffs {
            *c = c.wrapping_neg().masked(self.log_q);
        }
        out
    }

    /// Product with a sparse ternary key.
    pub fn mul_sparse(&self, key: &SparseTernaryKey) -> Result<RingElem, RingError> {
        if key.n() != self.n() {
            return Err(RingError::DimensionMismatch(self.n(), key.n()));
        }
        let mut acc = vec![Wide::ZERO; self.n()];
        for &j in &key.plus {
            add_rotation(&mut acc, &self.coeffs, j as usize, false);
        }
        for &j in &key.minus {
            add_rotation(&mut acc, &self.coeffs, j as usize, true);
        }
        Ok(self.finish(acc))
    }

    /// Product with a dense polynomial of small signed coefficients.
    ///
    /// Positions sharing a coefficient value are first summed as plain
    /// rotations, then scaled once per distinct magnitude.
    pub fn mul_small(&self, s: &SmallPoly) -> Result<RingElem, RingError> {
        if s.n() != self.n() {
            return Err(RingError::DimensionMismatch(self.n(), s.n()));
        }
        let mut by_magnitude: BTreeMap<u64, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
        for (j, &c) in s.coeffs.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let entry = by_magnitude.entry(c.unsigned_abs()).or_default();
            if c > 0 {
                entry.0.push(j);
            } else {
                entry.1.push(j);
            }
        }
        let n = self.n();
        let mut acc = vec![Wide::ZERO; n];
        let mut scratch = vec![Wide::ZERO; n];
        for (&mag, (plus, minus)) in &by_magnitude {
            let target: &mut Vec<Wide> = if mag == 1 { &mut acc } else { &mut scratch };
            if mag != 1 {
                target.iter_mut().for_each(|c| *c = Wide::ZERO);
            }
            for &j in plus {
                add_rotation(target, &self.coeffs, j, false);
            }
            for &j in minus {
                add_rotation(target, &self.coeffs, j, true);
            }
            if mag != 1 {
                for (a, t) in acc.iter_mut().zip(scratch.iter()) {
                    a.add_assign(&t.wrapping_mul_u64(mag));
                }
            }
        }
        Ok(self.finish(acc))
    }

    fn finish(&self, mut acc: Vec<Wide>) -> RingElem {
        for c in &mut acc {
            c.mask_in_place(self.log_q);
        }
        RingElem { log_q: self.log_q, coeffs: acc }
    }

    /// Coefficient-wise low `log_p` bits, as an element of `R_p`.
    pub fn mod_p(&self, log_p: u32) -> Result<RingElem, RingError> {
        if log_p == 0 || log_p > self.log_q {
            return Err(RingError::Geometry(format!("log_p = {log_p} must be in 1..={}", self.log_q)));
        }
        Ok(RingElem { log_q: log_p, coeffs: self.coeffs.iter().map(|c| c.masked(log_p)).collect() })
    }

    /// Reinterprets an `R_p` element as an element of `R_q` with the same
    /// representative coefficients (`log_q >= self.log_q`).
    pub fn lift(&self, log_q: u32) -> Result<RingElem, RingError> {
        check_geometry(self.n(), log_q)?;
        if log_q < self.log_q {
            return Err(RingError::Geometry(format!("cannot lift from 2^{} into 2^{log_q}", self.log_q)));
        }
        Ok(RingElem { log_q, coeffs: self.coeffs.clone() })
    }
}

/// `acc += sign * X^shift * a` (mod 2^512), with the sign flipped for terms
/// that wrap past `X^n`.
#[inline]
fn add_rotation(acc: &mut [Wide], a: &[Wide], shift: usize, negate: bool) {
    let n = a.len();
    let split = n - shift;
    let (head, tail) = a.split_at(split);
    // a[i] lands at i + shift for i < n - shift
    let (acc_low, acc_high) = acc.split_at_mut(shift);
    if negate {
        for (o, x) in acc_high.iter_mut().zip(head) {
            o.sub_assign(x);
        }
        for (o, x) in acc_low.iter_mut().zip(tail) {
            o.add_assign(x);
        }
    } else {
        for (o, x) in acc_high.iter_mut().zip(head) {
            o.add_assign(x);
        }
        for (o, x) in acc_low.iter_mut().zip(tail) {
            o.sub_assign(x);
        }
    }
}

/// `p * e mod q`: each signed error coefficient shifted left by `log_p` bits.
pub fn lift_and_scale_error(e: &SmallPoly, log_p: u32, log_q: u32) -> Result<RingElem, RingError> {
    check_geometry(e.n(), log_q)?;
    if log_p >= log_q {
        return Err(RingError::Geometry(format!("log_p = {log_p} >= log_q = {log_q}")));
    }
    let coeffs = e.coeffs.iter().map(|&v| Wide::from_i64(v).shl(log_p).masked(log_q)).collect();
    Ok(RingElem { log_q, coeffs })
}

/// Ternary polynomial stored as the index sets of its `+1` and `-1`
/// coefficients.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SparseTernaryKey {
    n: usize,
    plus: Vec<u32>,
    minus: Vec<u32>,
}

impl std::fmt::Debug for SparseTernaryKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseTernaryKey").field("n", &self.n).field("weight", &self.weight()).finish_non_exhaustive()
    }
}

impl SparseTernaryKey {
    pub fn new(n: usize, mut plus: Vec<u32>, mut minus: Vec<u32>) -> Result<Self, RingError> {
        check_geometry(n, 1)?;
        plus.sort_unstable();
        minus.sort_unstable();
        let dup = |v: &[u32]| v.windows(2).any(|w| w[0] == w[1]);
        if dup(&plus) || dup(&minus) {
            return Err(RingError::InvalidKey("repeated position".into()));
        }
        if plus.iter().chain(&minus).any(|&j| j as usize >= n) {
            return Err(RingError::InvalidKey(format!("position outside [0, {n})")));
        }
        if plus.iter().any(|j| minus.binary_search(j).is_ok()) {
            return Err(RingError::InvalidKey("position is both +1 and -1".into()));
        }
        Ok(SparseTernaryKey { n, plus, minus })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weight(&self) -> usize {
        self.plus.len() + self.minus.len()
    }

    pub fn plus_positions(&self) -> &[u32] {
        &self.plus
    }

    pub fn minus_positions(&self) -> &[u32] {
        &self.minus
    }

    pub fn to_small_poly(&self) -> SmallPoly {
        let mut coeffs = vec![0i64; self.n];
        for &j in &self.plus {
            coeffs[j as usize] = 1;
        }
        for &j in &self.minus {
            coeffs[j as usize] = -1;
        }
        SmallPoly { coeffs, bound: 1 }
    }
}

/// Dense polynomial with small signed coefficients and a declared bound.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SmallPoly {
    coeffs: Vec<i64>,
    bound: u64,
}

impl std::fmt::Debug for SmallPoly {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SmallPoly").field("n", &self.n()).field("bound", &self.bound).finish_non_exhaustive()
    }
}

impl SmallPoly {
    pub fn new(coeffs: Vec<i64>, bound: u64) -> Result<Self, RingError> {
        check_geometry(coeffs.len(), 1)?;
        if let Some(&value) = coeffs.iter().find(|c| c.unsigned_abs() > bound) {
            return Err(RingError::BoundExceeded { value, bound });
        }
        Ok(SmallPoly { coeffs, bound })
    }

    pub fn zero(n: usize) -> Self {
        SmallPoly { coeffs: vec![0; n], bound: 0 }
    }

    /// Exact coefficient-wise sum of ternary keys; the bound is the key count.
    pub fn sum_of_keys(keys: &[SparseTernaryKey]) -> Result<Self, RingError> {
        let n = keys.first().map(SparseTernaryKey::n).ok_or_else(|| RingError::InvalidKey("no keys to sum".into()))?;
        let mut coeffs = vec![0i64; n];
        for k in keys {
            if k.n() != n {
                return Err(RingError::DimensionMismatch(n, k.n()));
            }
            for &j in &k.plus {
                coeffs[j as usize] += 1;
            }
            for &j in &k.minus {
                coeffs[j as usize] -= 1;
            }
        }
        Ok(SmallPoly { coeffs, bound: keys.len() as u64 })
    }

    pub fn n(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[i64] {
        &self.coeffs
    }

    pub fn bound(&self) -> u64 {
        self.bound
    }

    pub fn nonzeros(&self) -> usize {
        self.coeffs.iter().filter(|&&c| c != 0).count()
    }
}
