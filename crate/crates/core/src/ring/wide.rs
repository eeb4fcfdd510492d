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

//! Fixed-width 512-bit unsigned integers with wrapping arithmetic.
//!
//! Every modulus in this crate is a power of two no larger than 2^512, so all
//! ring arithmetic runs modulo 2^512 and is reduced to the working width by a
//! single mask at the end.

use std::fmt;

pub const LIMBS: usize = 8;
pub const MAX_BITS: u32 = (LIMBS as u32) * 64;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Wide(pub(crate) [u64; LIMBS]);

impl Wide {
    pub const ZERO: Wide = Wide([0; LIMBS]);

    pub const fn from_u64(v: u64) -> Self {
        let mut limbs = [0; LIMBS];
        limbs[0] = v;
        Wide(limbs)
    }

    /// Two's-complement image of `v` modulo 2^512.
    pub fn from_i64(v: i64) -> Self {
        if v >= 0 {
            Self::from_u64(v as u64)
        } else {
            Self::from_u64(v.unsigned_abs()).wrapping_neg()
        }
    }

    pub const fn from_limbs(limbs: [u64; LIMBS]) -> Self {
        Wide(limbs)
    }

    pub fn limbs(&self) -> &[u64; LIMBS] {
        &self.0
    }

    /// `2^bits` modulo 2^512.
    pub fn pow2(bits: u32) -> Self {
        let mut out = Self::ZERO;
        if bits < MAX_BITS {
            out.0[(bits / 64) as usize] = 1 << (bits % 64);
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&l| l == 0)
    }

    #[inline]
    pub fn add_assign(&mut self, rhs: &Wide) {
        let mut carry = false;
        for (a, b) in self.0.iter_mut().zip(rhs.0.iter()) {
            let (s1, c1) = a.overflowing_add(*b);
            let (s2, c2) = s1.overflowing_add(carry as u64);
            *a = s2;
            carry = c1 | c2;
        }
    }

    #[inline]
    pub fn sub_assign(&mut self, rhs: &Wide) {
        let mut borrow = false;
        for (a, b) in self.0.iter_mut().zip(rhs.0.iter()) {
            let (d1, b1) = a.overflowing_sub(*b);
            let (d2, b2) = d1.overflowing_sub(borrow as u64);
            *a = d2;
            borrow = b1 | b2;
        }
    }

    #[inline]
    pub fn wrapping_add(mut self, rhs: &Wide) -> Self {
        self.add_assign(rhs);
        self
    }

    #[inline]
    pub fn wrapping_sub(mut self, rhs: &Wide) -> Self {
        self.sub_assign(rhs);
        self
    }

    pub fn wrapping_neg(self) -> Self {
        Self::ZERO.wrapping_sub(&self)
    }

    /// Wrapping product with a machine word.
    pub fn wrapping_mul_u64(self, k: u64) -> Self {
        let mut out = [0u64; LIMBS];
        let mut carry = 0u128;
        for (o, &a) in out.iter_mut().zip(self.0.iter()) {
            let t = (a as u128) * (k as u128) + carry;
            *o = t as u64;
            carry = t >> 64;
        }
        Wide(out)
    }

    /// Keeps the low `bits` bits.
    #[inline]
    pub fn masked(mut self, bits: u32) -> Self {
        self.mask_in_place(bits);
        self
    }

    #[inline]
    pub fn mask_in_place(&mut self, bits: u32) {
        if bits >= MAX_BITS {
            return;
        }
        let full = (bits / 64) as usize;
        let rem = bits % 64;
        let mut start = full;
        if rem != 0 {
            self.0[full] &= (1u64 << rem) - 1;
            start += 1;
        }
        for l in &mut self.0[start..] {
            *l = 0;
        }
    }

    /// True when the value is strictly below 2^bits.
    pub fn fits(&self, bits: u32) -> bool {
        self.bit_len() <= bits
    }

    pub fn bit_len(&self) -> u32 {
        for i in (0..LIMBS).rev() {
            if self.0[i] != 0 {
                return i as u32 * 64 + (64 - self.0[i].leading_zeros());
            }
        }
        0
    }

    pub fn shl(&self, bits: u32) -> Self {
        if bits >= MAX_BITS {
            return Self::ZERO;
        }
        let words = (bits / 64) as usize;
        let rem = bits % 64;
        let mut out = [0u64; LIMBS];
        for i in (words..LIMBS).rev() {
            let src = i - words;
            let mut v = self.0[src] << rem;
            if rem != 0 && src > 0 {
                v |= self.0[src - 1] >> (64 - rem);
            }
            out[i] = v;
        }
        Wide(out)
    }

    pub fn shr(&self, bits: u32) -> Self {
        if bits >= MAX_BITS {
            return Self::ZERO;
        }
        let words = (bits / 64) as usize;
        let rem = bits % 64;
        let mut out = [0u64; LIMBS];
        for (i, o) in out.iter_mut().enumerate().take(LIMBS - words) {
            let src = i + words;
            let mut v = self.0[src] >> rem;
            if rem != 0 && src + 1 < LIMBS {
                v |= self.0[src + 1] << (64 - rem);
            }
            *o = v;
        }
        Wide(out)
    }

    /// Reads the `width`-bit field starting at bit `offset` (`width <= 64`).
    pub fn field(&self, offset: u32, width: u32) -> u64 {
        debug_assert!(width <= 64);
        if width == 0 || offset >= MAX_BITS {
            return 0;
        }
        let word = (offset / 64) as usize;
        let rem = offset % 64;
        let mut v = self.0[word] >> rem;
        if rem != 0 && word + 1 < LIMBS {
            v |= self.0[word + 1] << (64 - rem);
        }
        if width < 64 {
            v &= (1u64 << width) - 1;
        }
        v
    }

    /// ORs `value` into the bits starting at `offset`. Bits of `value` above
    /// 2^512 are dropped.
    pub fn or_field(&mut self, offset: u32, value: u64) {
        if offset >= MAX_BITS {
            return;
        }
        let word = (offset / 64) as usize;
        let rem = offset % 64;
        self.0[word] |= value << rem;
        if rem != 0 && word + 1 < LIMBS {
            self.0[word + 1] |= value >> (64 - rem);
        }
    }

    /// Writes the low `out.len()` bytes little-endian.
    pub fn write_le(&self, out: &mut [u8]) {
        debug_assert!(out.len() <= LIMBS * 8);
        for (i, b) in out.iter_mut().enumerate() {
            *b = (self.0[i / 8] >> (8 * (i % 8))) as u8;
        }
    }

    pub fn from_le(bytes: &[u8]) -> Self {
        debug_assert!(bytes.len() <= LIMBS * 8);
        let mut out = [0u64; LIMBS];
        for (i, &b) in bytes.iter().enumerate() {
            out[i / 8] |= (b as u64) << (8 * (i % 8));
        }
        Wide(out)
    }

    pub fn count_ones(&self) -> u32 {
        self.0.iter().map(|l| l.count_ones()).sum()
    }

    /// Interprets the low `bits` bits as a two's-complement integer; returns
    /// `None` when it does not fit an `i64`.
    pub fn to_signed(&self, bits: u32) -> Option<i64> {
        let v = self.masked(bits);
        if bits == 0 {
            return Some(0);
        }
        let negative = v.field(bits - 1, 1) == 1;
        let magnitude = if negative { Wide::pow2(bits).wrapping_sub(&v) } else { v };
        if magnitude.bit_len() > 63 {
            return None;
        }
        let m = magnitude.0[0] as i64;
        Some(if negative { -m } else { m })
    }
}

impl fmt::Debug for Wide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x")?;
        let mut started = false;
        for l in self.0.iter().rev() {
            if started {
                write!(f, "{l:016x}")?;
            } else if *l != 0 {
                write!(f, "{l:x}")?;
                started = true;
            }
        }
        if !started {
            write!(f, "0")?;
        }
        Ok(())
    }
}

impl From<u64> for Wide {
    fn from(v: u64) -> Self {
        Wide::from_u64(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_carries_across_limbs() {
        let a = Wide::from_limbs([u64::MAX, u64::MAX, 0, 0, 0, 0, 0, 0]);
        let s = a.wrapping_add(&Wide::from_u64(1));
        assert_eq!(s.limbs(), &[0, 0, 1, 0, 0, 0, 0, 0]);
        assert_eq!(s.wrapping_sub(&Wide::from_u64(1)), a);
    }

    #[test]
    fn neg_then_mask_is_modular_complement() {
        let v = Wide::from_i64(-1).masked(478);
        assert_eq!(v.bit_len(), 478);
        assert_eq!(v.count_ones(), 478);
        assert_eq!(v.to_signed(478), Some(-1));
        assert_eq!(Wide::from_u64(5).to_signed(3), Some(-3));
    }

    #[test]
    fn shifts_and_fields() {
        let v = Wide::from_u64(0b1011).shl(126);
        assert_eq!(v.field(126, 4), 0b1011);
        assert_eq!(v.shr(126), Wide::from_u64(0b1011));
        let mut w = Wide::ZERO;
        w.or_field(60, 0xABCD);
        assert_eq!(w.field(60, 16), 0xABCD);
        assert_eq!(w.field(62, 8), 0xABCD >> 2 & 0xFF);
    }

    #[test]
    fn byte_roundtrip() {
        let v = Wide::from_limbs([1, 2, 3, 4, 5, 6, 7, 0x3fff]).masked(478);
        let mut buf = [0u8; 60];
        v.write_le(&mut buf);
        assert_eq!(Wide::from_le(&buf), v);
        assert_eq!(buf[59] >> 6, 0);
    }
}
