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

//! Synthetic linear-regression workload and the gradient transforms around
//! the encrypted pipeline.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Shape of the synthetic regression task.
#[derive(Debug, Clone, PartialEq)]
pub struct LinRegSpec {
    pub dim: usize,
    /// Samples held by each client.
    pub samples_per_client: Vec<usize>,
    /// Minibatch size; `None` uses the full local dataset every round.
    pub batch: Option<usize>,
    pub data_seed: u64,
    /// Standard deviation of the label noise.
    pub label_noise: f64,
}

impl LinRegSpec {
    pub fn uniform(dim: usize, clients: usize, samples: usize, data_seed: u64) -> Self {
        LinRegSpec { dim, samples_per_client: vec![samples; clients], batch: None, data_seed, label_noise: 0.0 }
    }
}

/// One client's local data, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dim: usize,
    pub features: Vec<f64>,
    pub labels: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    /// Sum of squared residuals.
    pub fn sse(&self, w: &[f64]) -> f64 {
        (0..self.len())
            .map(|i| {
                let r = dot(self.row(i), w) - self.labels[i];
                r * r
            })
            .sum()
    }
}

/// The ground-truth model plus every client's dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Federation {
    pub truth: Vec<f64>,
    pub clients: Vec<Dataset>,
}

impl Federation {
    pub fn generate(spec: &LinRegSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.data_seed);
        let truth: Vec<f64> = (0..spec.dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let clients = spec
            .samples_per_client
            .iter()
            .map(|&count| {
                let mut features = Vec::with_capacity(count * spec.dim);
                let mut labels = Vec::with_capacity(count);
                for _ in 0..count {
                    let x: Vec<f64> = (0..spec.dim).map(|_| rng.sample(StandardNormal)).collect();
                    let noise: f64 = rng.sample(StandardNormal);
                    labels.push(dot(&x, &truth) + spec.label_noise * noise);
                    features.extend_from_slice(&x);
                }
                Dataset { dim: spec.dim, features, labels }
            })
            .collect();
        Federation { truth, clients }
    }

    /// Mean squared error over the union of all clients' data.
    pub fn loss(&self, w: &[f64]) -> f64 {
        let total: usize = self.clients.iter().map(Dataset::len).sum();
        if total == 0 {
            return 0.0;
        }
        self.clients.iter().map(|d| d.sse(w)).sum::<f64>() / total as f64
    }
}

/// Row indices a client trains on in `round`. Depends only on the seed,
/// the client and the round, so a plaintext rerun sees the same batches.
pub fn minibatch(spec: &LinRegSpec, client: usize, round: u64, len: usize) -> Vec<usize> {
    match spec.batch {
        Some(b) if b < len => {
            let mix = spec.data_seed ^ ((client as u64) << 40) ^ round.wrapping_mul(0x9e37_79b9_7f4a_7c15);
            let mut rng = ChaCha8Rng::seed_from_u64(mix);
            let mut idx = sample(&mut rng, len, b).into_vec();
            idx.sort_unstable();
            idx
        }
        _ => (0..len).collect(),
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// MSE gradient `2/|b| * sum x (w.x - y)` over the selected rows, scaled by
/// `alpha`.
pub fn local_gradient(w: &[f64], data: &Dataset, rows: &[usize], alpha: f64) -> Vec<f64> {
    assert_eq!(w.len(), data.dim, "model and data dimensions differ");
    let mut g = vec![0.0; data.dim];
    if rows.is_empty() {
        return g;
    }
    for &i in rows {
        let x = data.row(i);
        let r = dot(x, w) - data.labels[i];
        for (gj, xj) in g.iter_mut().zip(x) {
            *gj += xj * r;
        }
    }
    let scale = 2.0 * alpha / rows.len() as f64;
    g.iter_mut().for_each(|v| *v *= scale);
    g
}

pub fn clip(g: &[f64], c: f64) -> Vec<f64> {
    g.iter().map(|v| v.clamp(-c, c)).collect()
}

/// Clips to `[-c, c]` then maps affinely onto `[0, 1]`.
pub fn normalize(g: &[f64], c: f64) -> Vec<f64> {
    g.iter().map(|v| ((v.clamp(-c, c) + c) / (2.0 * c)).clamp(0.0, 1.0)).collect()
}

/// Inverse of the affine map for a sum of `count` normalized vectors.
pub fn denormalize(v: &[f64], count: usize, c: f64) -> Vec<f64> {
    v.iter().map(|x| 2.0 * c * x - count as f64 * c).collect()
}
