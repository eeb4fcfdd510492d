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

//! Real vectors to packed plaintexts and back.
//!
//! Encoding places reals in the canonical-embedding slots, maps them to a
//! coefficient polynomial, scales by `delta = 2^(log_q0 - 2)`, rounds half to
//! even and adds the offset `2^(log_q0 - 1)`, so every coefficient is a
//! non-negative `log_q0`-bit integer. `T - 1` encoded polynomials share one
//! plaintext through [`packing`]. Decoding subtracts `count * offset` for an
//! aggregate of `count` encodings.

pub mod embedding;
pub mod packing;

use num_complex::Complex64;
use thiserror::Error;

use crate::params::SchemeParams;
use crate::ring::{RingElem, Wide};

pub use embedding::CanonicalEmbedding;
pub use packing::SlotGeometry;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodecError {
    #[error("chunk of {len} reals exceeds the {max} slots of one polynomial")]
    ChunkTooLong { len: usize, max: usize },
    #[error("value at index {index} is not finite")]
    NonFinite { index: usize },
    #[error("value {value} at index {index} is outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("coefficient {index} = {value} exceeds the {bits}-bit slot width")]
    SlotOverflow { index: usize, value: u64, bits: u32 },
    #[error("expected {expected} polynomials, got {got}")]
    WrongPolyCount { expected: usize, got: usize },
    #[error("{what}: expected {expected}, got {got}")]
    LengthMismatch { what: &'static str, expected: usize, got: usize },
    #[error("plaintext geometry does not match the codec")]
    GeometryMismatch,
    #[error("{count} summands exceed the carry capacity {max}")]
    TooManySummands { count: usize, max: usize },
    #[error("summand count must be at least 1")]
    ZeroCount,
}

/// A real vector with every entry in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealVector(Vec<f64>);

impl RealVector {
    pub fn new(values: Vec<f64>) -> Result<Self, CodecError> {
        for (index, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(CodecError::NonFinite { index });
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(CodecError::OutOfRange { index, value: v });
            }
        }
        Ok(RealVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Integer coefficient polynomial. Freshly encoded coefficients are
/// offset-coded `log_q0`-bit values; unpacked aggregates may use the full
/// slot width.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedPoly {
    coeffs: Vec<u64>,
}

impl EncodedPoly {
    pub fn new(coeffs: Vec<u64>) -> Self {
        EncodedPoly { coeffs }
    }

    pub fn zero(n: usize) -> Self {
        EncodedPoly { coeffs: vec![0; n] }
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    /// Coefficient-wise integer sum (no reduction).
    pub fn add(&self, other: &EncodedPoly) -> EncodedPoly {
        EncodedPoly { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect() }
    }
}

/// Plaintext in `R_p` whose coefficients are packed slot fields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedPlain {
    coeffs: Vec<Wide>,
    geometry: SlotGeometry,
    log_p: u32,
}

impl PackedPlain {
    /// Wraps an element of `R_p` (for instance a decryption result).
    pub fn from_ring(elem: RingElem, geometry: SlotGeometry) -> Self {
        PackedPlain { log_p: elem.log_q(), coeffs: elem.into_coeffs(), geometry }
    }

    pub fn to_ring(&self) -> RingElem {
        RingElem::from_coeffs(self.log_p, self.coeffs.clone()).expect("coefficients below p")
    }

    pub fn coeffs(&self) -> &[Wide] {
        &self.coeffs
    }

    pub fn geometry(&self) -> SlotGeometry {
        self.geometry
    }

    pub fn log_p(&self) -> u32 {
        self.log_p
    }

    pub fn n(&self) -> usize {
        self.coeffs.len()
    }
}

/// Encoder/decoder bound to one parameter set.
#[derive(Debug, Clone)]
pub struct Codec {
    params: SchemeParams,
    embedding: CanonicalEmbedding,
    geometry: SlotGeometry,
    delta: f64,
    offset: u64,
}

impl Codec {
    pub fn new(params: &SchemeParams) -> Self {
        Codec {
            params: params.clone(),
            embedding: CanonicalEmbedding::new(params.n()),
            geometry: SlotGeometry { slots: params.slots(), pad: params.pad(), log_q0: params.log_q0() },
            delta: (1u64 << (params.log_q0() - 2)) as f64,
            offset: 1u64 << (params.log_q0() - 1),
        }
    }

    pub fn params(&self) -> &SchemeParams {
        &self.params
    }

    pub fn geometry(&self) -> SlotGeometry {
        self.geometry
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn offset(&self) -> u64 {
        self.offset
    }

    pub fn embedding(&self) -> &CanonicalEmbedding {
        &self.embedding
    }

    /// Worst-case per-slot error of one encode/decode roundtrip:
    /// `n` rounding errors of at most `1/2` each, divided by `delta`.
    pub fn roundtrip_bound(&self) -> f64 {
        self.params.n() as f64 / (2.0 * self.delta)
    }

    fn to_slots(&self, chunk: &[f64]) -> Vec<Complex64> {
        let half = self.params.n() / 2;
        let at = |i: usize| chunk.get(i).copied().unwrap_or(0.0);
        if self.params.reals_per_slot() == 2 {
            (0..half).map(|j| Complex64::new(at(j), at(j + half))).collect()
        } else {
            (0..half).map(|j| Complex64::new(at(j), 0.0)).collect()
        }
    }

    /// Encodes up to [`SchemeParams::reals_per_poly`] values in `[0, 1]`;
    /// shorter chunks are zero-padded.
    pub fn encode(&self, chunk: &[f64]) -> Result<EncodedPoly, CodecError> {
        let max = self.params.reals_per_poly();
        if chunk.len() > max {
            return Err(CodecError::ChunkTooLong { len: chunk.len(), max });
        }
        for (index, &v) in chunk.iter().enumerate() {
            if !v.is_finite() {
                return Err(CodecError::NonFinite { index });
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(CodecError::OutOfRange { index, value: v });
            }
        }
        let real = self.embedding.inverse(&self.to_slots(chunk));
        let offset = self.offset as i64;
        let coeffs = real
            .iter()
            .map(|&c| {
                let r = (c * self.delta).round_ties_even() as i64;
                debug_assert!(r.abs() < offset);
                (r + offset) as u64
            })
            .collect();
        Ok(EncodedPoly { coeffs })
    }

    /// Decodes a sum of `count` encodings into
    /// [`SchemeParams::reals_per_poly`] reals.
    pub fn decode(&self, poly: &EncodedPoly, count: usize) -> Result<Vec<f64>, CodecError> {
        if count == 0 {
            return Err(CodecError::ZeroCount);
        }
        let n = self.params.n();
        if poly.coeffs.len() != n {
            return Err(CodecError::LengthMismatch { what: "polynomial length", expected: n, got: poly.coeffs.len() });
        }
        let bits = self.geometry.width();
        let bias = (count as u64 * self.offset) as i64;
        let mut signed = Vec::with_capacity(n);
        for (index, &value) in poly.coeffs.iter().enumerate() {
            if bits < 64 && value >> bits != 0 {
                return Err(CodecError::SlotOverflow { index, value, bits });
            }
            signed.push((value as i64 - bias) as f64);
        }
        let slots = self.embedding.forward(&signed);
        let half = n / 2;
        let mut out = Vec::with_capacity(self.params.reals_per_poly());
        out.extend(slots.iter().map(|z| z.re / self.delta));
        if self.params.reals_per_slot() == 2 {
            out.extend(slots.iter().map(|z| z.im / self.delta));
        }
        debug_assert_eq!(out.len(), half * self.params.reals_per_slot() as usize);
        Ok(out)
    }

    /// Packs exactly `T - 1` freshly encoded polynomials.
    pub fn pack(&self, polys: &[EncodedPoly]) -> Result<PackedPlain, CodecError> {
        let expected = self.geometry.slots as usize - 1;
        if polys.len() != expected {
            return Err(CodecError::WrongPolyCount { expected, got: polys.len() });
        }
        let n = self.params.n();
        let bits = self.params.log_q0();
        for p in polys {
            if p.coeffs.len() != n {
                return Err(CodecError::LengthMismatch { what: "polynomial length", expected: n, got: p.coeffs.len() });
            }
            if let Some((index, &value)) = p.coeffs.iter().enumerate().find(|(_, &v)| v >> bits != 0) {
                return Err(CodecError::SlotOverflow { index, value, bits });
            }
        }
        let mut fields = vec![0u64; expected];
        let coeffs = (0..n)
            .map(|j| {
                for (f, p) in fields.iter_mut().zip(polys) {
                    *f = p.coeffs[j];
                }
                self.geometry.pack_coeff(&fields)
            })
            .collect();
        Ok(PackedPlain { coeffs, geometry: self.geometry, log_p: self.params.log_p() })
    }

    /// Splits a plaintext into all `T` slot polynomials; the last one is the
    /// zero slot.
    pub fn unpack(&self, packed: &PackedPlain) -> Result<Vec<EncodedPoly>, CodecError> {
        self.check_plain(packed)?;
        let t = self.geometry.slots as usize;
        let mut out: Vec<Vec<u64>> = vec![Vec::with_capacity(packed.n()); t];
        for beta in &packed.coeffs {
            for (i, f) in self.geometry.unpack_coeff(beta).into_iter().enumerate() {
                out[i].push(f);
            }
        }
        Ok(out.into_iter().map(EncodedPoly::new).collect())
    }

    fn check_plain(&self, packed: &PackedPlain) -> Result<(), CodecError> {
        if packed.geometry != self.geometry || packed.log_p != self.params.log_p() || packed.n() != self.params.n() {
            return Err(CodecError::GeometryMismatch);
        }
        Ok(())
    }

    /// Full client-side pipeline: chunk, encode, batch into `T - 1`, pack.
    /// Produces `ceil(L / capacity)` plaintexts.
    pub fn ecd_pack(&self, g: &RealVector) -> Result<Vec<PackedPlain>, CodecError> {
        let per_poly = self.params.reals_per_poly();
        let batch = self.geometry.slots as usize - 1;
        g.values()
            .chunks(per_poly * batch)
            .map(|chunk| {
                let mut group = chunk.chunks(per_poly).map(|c| self.encode(c)).collect::<Result<Vec<_>, _>>()?;
                group.resize(batch, EncodedPoly::zero(self.params.n()));
                self.pack(&group)
            })
            .collect()
    }

    /// Inverse of [`Codec::ecd_pack`] for an aggregate of `count`
    /// contributions; returns exactly `len` reals.
    pub fn dcd_unpk(&self, plains: &[PackedPlain], count: usize, len: usize) -> Result<Vec<f64>, CodecError> {
        let expected = self.params.ciphertexts_for(len);
        if plains.len() != expected {
            return Err(CodecError::LengthMismatch {
                what: "plaintexts for declared length",
                expected,
                got: plains.len(),
            });
        }
        if count == 0 {
            return Err(CodecError::ZeroCount);
        }
        let per_poly = self.params.reals_per_poly();
        let mut out = Vec::with_capacity(len);
        'outer: for plain in plains {
            let slots = self.unpack(plain)?;
            for poly in &slots[..slots.len() - 1] {
                if out.len() >= len {
                    break 'outer;
                }
                let values = self.decode(poly, count)?;
                let take = per_poly.min(len - out.len());
                out.extend_from_slice(&values[..take]);
            }
        }
        Ok(out)
    }

    /// Position-wise sum of `N` plaintext sequences in `R_p`.
    pub fn ep_eval(&self, inputs: &[Vec<PackedPlain>]) -> Result<Vec<PackedPlain>, CodecError> {
        let max = 1usize << self.geometry.pad;
        if inputs.is_empty() {
            return Err(CodecError::ZeroCount);
        }
        if inputs.len() > max {
            return Err(CodecError::TooManySummands { count: inputs.len(), max });
        }
        let len = inputs[0].len();
        let log_p = self.params.log_p();
        let mut acc: Vec<PackedPlain> = Vec::with_capacity(len);
        for seq in inputs {
            if seq.len() != len {
                return Err(CodecError::LengthMismatch {
                    what: "plaintext sequence length",
                    expected: len,
                    got: seq.len(),
                });
            }
            for p in seq {
                self.check_plain(p)?;
            }
        }
        for idx in 0..len {
            let mut coeffs = inputs[0][idx].coeffs.clone();
            for seq in &inputs[1..] {
                for (a, b) in coeffs.iter_mut().zip(&seq[idx].coeffs) {
                    a.add_assign(b);
                    a.mask_in_place(log_p);
                }
            }
            acc.push(PackedPlain { coeffs, geometry: self.geometry, log_p });
        }
        Ok(acc)
    }
}
