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

//! Canonical embedding of `R[X]/(X^n + 1)` into `C^{n/2}`.
//!
//! Slot `j` is the evaluation at `zeta^{5^j}`, `zeta = exp(i*pi/n)`. Writing
//! `m(X) = A(X) + X^{n/2} B(X)` and `u = A + iB`, every slot exponent is
//! `1 mod 4`, so `m(zeta^e) = u(zeta^e)`, and the slot exponents are exactly
//! `zeta * omega^k` for `omega = exp(2*pi*i/(n/2))`. Both directions are thus
//! a twisted length-`n/2` FFT followed by the `5^j` permutation.

use std::f64::consts::PI;

use num_complex::Complex64;

#[derive(Debug, Clone)]
pub struct CanonicalEmbedding {
    n: usize,
    /// `zeta^i` for `i < n/2`.
    twist: Vec<Complex64>,
    /// `omega^k` for `k < n/4`, forward direction.
    twiddles: Vec<Complex64>,
    /// FFT output position holding slot `j`.
    slot_pos: Vec<usize>,
    bit_rev: Vec<usize>,
}

fn unit(num: usize, den: usize) -> Complex64 {
    let angle = 2.0 * PI * num as f64 / den as f64;
    Complex64::new(angle.cos(), angle.sin())
}

impl CanonicalEmbedding {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2 && n.is_power_of_two(), "n must be a power of two");
        let half = n / 2;
        let m = 2 * n;
        let twist = (0..half).map(|i| unit(i, m)).collect();
        let twiddles = (0..(half / 2).max(1)).map(|k| unit(k, half)).collect();
        let mut slot_pos = Vec::with_capacity(half);
        let mut e = 1usize;
        for _ in 0..half {
            slot_pos.push((e - 1) / 4);
            e = e * 5 % m;
        }
        let bits = half.trailing_zeros();
        let bit_rev = (0..half).map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) }).collect();
        CanonicalEmbedding { n, twist, twiddles, slot_pos, bit_rev }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn slots(&self) -> usize {
        self.n / 2
    }

    /// In-place radix-2 DFT, `X_k = sum_i x_i omega^{sign * i k}`.
    fn fft(&self, data: &mut [Complex64], inverse: bool) {
        let len = data.len();
        for i in 0..len {
            let j = self.bit_rev[i];
            if i < j {
                data.swap(i, j);
            }
        }
        let mut size = 2;
        while size <= len {
            let halfsize = size / 2;
            let stride = len / size;
            for start in (0..len).step_by(size) {
                for k in 0..halfsize {
                    let mut w = self.twiddles[k * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let t = data[start + k + halfsize] * w;
                    let u = data[start + k];
                    data[start + k] = u + t;
                    data[start + k + halfsize] = u - t;
                }
            }
            size *= 2;
        }
    }

    /// `phi`: real coefficients (length `n`) to slot values (length `n/2`).
    pub fn forward(&self, coeffs: &[f64]) -> Vec<Complex64> {
        assert_eq!(coeffs.len(), self.n);
        let half = self.n / 2;
        let mut u: Vec<Complex64> =
            (0..half).map(|i| Complex64::new(coeffs[i], coeffs[i + half]) * self.twist[i]).collect();
        self.fft(&mut u, false);
        self.slot_pos.iter().map(|&k| u[k]).collect()
    }

    /// `phi^{-1}`: slot values (length `n/2`) to real coefficients
    /// (length `n`).
    pub fn inverse(&self, slots: &[Complex64]) -> Vec<f64> {
        let half = self.n / 2;
        assert_eq!(slots.len(), half);
        let mut v = vec![Complex64::new(0.0, 0.0); half];
        for (z, &k) in slots.iter().zip(&self.slot_pos) {
            v[k] = *z;
        }
        self.fft(&mut v, true);
        let scale = 1.0 / half as f64;
        let mut out = vec![0.0; self.n];
        for i in 0..half {
            let u = v[i] * self.twist[i].conj() * scale;
            out[i] = u.re;
            out[i + half] = u.im;
        }
        out
    }
}
