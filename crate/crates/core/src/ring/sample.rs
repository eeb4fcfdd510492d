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

//! Key and error samplers. Every sampler takes the caller's generator; there
//! is no global randomness.

use rand::seq::index;
use rand::Rng;

use super::{RingError, SmallPoly, SparseTernaryKey};

/// Ternary key of exact Hamming weight `h`: positions uniform without
/// replacement, each sign uniform.
pub fn sample_ternary<R: Rng + ?Sized>(rng: &mut R, n: usize, h: usize) -> Result<SparseTernaryKey, RingError> {
    if h > n {
        return Err(RingError::Sampler(format!("weight {h} exceeds dimension {n}")));
    }
    let mut plus = Vec::with_capacity(h);
    let mut minus = Vec::with_capacity(h);
    for j in index::sample(rng, n, h).into_iter() {
        if rng.random::<bool>() {
            plus.push(j as u32);
        } else {
            minus.push(j as u32);
        }
    }
    SparseTernaryKey::new(n, plus, minus)
}

/// Cumulative table of the discrete Gaussian `D_{Z,sigma}` truncated to
/// `[-bound, bound]`.
#[derive(Debug, Clone)]
pub struct GaussianTable {
    bound: i64,
    cdf: Vec<f64>,
}

impl GaussianTable {
    pub fn new(sigma: f64) -> Result<Self, RingError> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(RingError::Sampler(format!("sigma = {sigma}")));
        }
        let bound = (6.0 * sigma).ceil() as i64;
        if sigma == 0.0 {
            return Ok(GaussianTable { bound: 0, cdf: vec![1.0] });
        }
        let weights: Vec<f64> = (-bound..=bound).map(|x| (-((x * x) as f64) / (2.0 * sigma * sigma)).exp()).collect();
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        *cdf.last_mut().expect("non-empty") = 1.0;
        Ok(GaussianTable { bound, cdf })
    }

    pub fn bound(&self) -> u64 {
        self.bound as u64
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        let u: f64 = rng.random();
        let idx = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
        idx as i64 - self.bound
    }
}

/// `n` independent discrete-Gaussian integers with standard deviation
/// `sigma`, tail-truncated at `ceil(6 sigma)`.
pub fn sample_gaussian<R: Rng + ?Sized>(rng: &mut R, n: usize, sigma: f64) -> Result<SmallPoly, RingError> {
    let table = GaussianTable::new(sigma)?;
    let coeffs = (0..n).map(|_| table.sample(rng)).collect();
    SmallPoly::new(coeffs, table.bound())
}
