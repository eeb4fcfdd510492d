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

//! Bit-slot packing of encoded polynomials into plaintext coefficients.
//!
//! A packed coefficient holds `T` fields of `pad + log_q0` bits. Field 1 is
//! the most significant; field `T` (the lowest) is zero at pack time. Each
//! field's top `pad` bits start at zero and absorb carries when up to
//! `2^pad` packed values are added.

use crate::ring::Wide;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SlotGeometry {
    pub slots: u32,
    pub pad: u32,
    pub log_q0: u32,
}

impl SlotGeometry {
    pub fn width(&self) -> u32 {
        self.pad + self.log_q0
    }

    /// Bit offset of field `i` (0-based from the most significant field).
    pub fn shift(&self, i: u32) -> u32 {
        self.width() * (self.slots - 1 - i)
    }

    pub fn total_bits(&self) -> u32 {
        self.width() * self.slots
    }

    /// Assembles one packed coefficient from `fields` (at most `T` of them,
    /// most significant first). Each field must fit in [`Self::width`] bits.
    pub fn pack_coeff(&self, fields: &[u64]) -> Wide {
        debug_assert!(fields.len() <= self.slots as usize);
        let mut out = Wide::ZERO;
        for (i, &f) in fields.iter().enumerate() {
            debug_assert!(self.width() == 64 || f >> self.width() == 0);
            out.or_field(self.shift(i as u32), f);
        }
        out
    }

    /// Splits a packed coefficient into all `T` fields.
    pub fn unpack_coeff(&self, beta: &Wide) -> Vec<u64> {
        (0..self.slots).map(|i| beta.field(self.shift(i), self.width())).collect()
    }
}
