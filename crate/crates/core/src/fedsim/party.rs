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

//! Key dealing plus the client and aggregator state machines.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::data::{denormalize, local_gradient, minibatch, normalize, Dataset, LinRegSpec};
use super::FedError;
use crate::codec::{Codec, RealVector};
use crate::eshe::{decrypt, encrypt, eval_add, keygen, Ciphertext, KeyMaterial};
use crate::params::SchemeParams;
use crate::prg::{round_public, RoundSeed};
use crate::ring::{RingElem, SmallPoly, SparseTernaryKey};
use crate::wire::{KeyIssue, RoundResult, RoundSubmit};

/// Runs keygen once and prepares one confidential `KeyIssue` per client.
/// The aggregator gets nothing from this step beyond the public parameters.
pub fn keydeal<R: Rng + ?Sized>(params: &SchemeParams, rng: &mut R) -> Result<Vec<KeyIssue>, FedError> {
    let km = keygen(params, rng)?;
    issue_keys(params, km)
}

pub fn issue_keys(params: &SchemeParams, km: KeyMaterial) -> Result<Vec<KeyIssue>, FedError> {
    km.verify()?;
    let profile = params.to_profile();
    Ok(km
        .enc_keys
        .into_iter()
        .enumerate()
        .map(|(i, enc_key)| KeyIssue {
            client_id: i as u32,
            profile: profile.clone(),
            enc_key,
            dec_key: km.dec_key.clone(),
            a0: km.a0.clone(),
            seed: km.seed,
        })
        .collect())
}

/// Checks a cohort's issued keys for consistency: one issue per client id,
/// a shared profile, `a0`, `s` and `B`, and `sum s_i == s`.
pub fn verify_issues(issues: &[KeyIssue]) -> Result<(), FedError> {
    let first = issues.first().ok_or_else(|| FedError::Config("no key issues".into()))?;
    for (i, k) in issues.iter().enumerate() {
        if k.client_id as usize != i {
            return Err(FedError::Config(format!("key issue {i} carries client id {}", k.client_id)));
        }
        if k.profile != first.profile || k.a0 != first.a0 || k.seed != first.seed || k.dec_key != first.dec_key {
            return Err(FedError::Config(format!("key issue {i} disagrees with client 0")));
        }
    }
    let keys: Vec<SparseTernaryKey> = issues.iter().map(|k| k.enc_key.clone()).collect();
    let sum = SmallPoly::sum_of_keys(&keys)?;
    if sum.coeffs() != first.dec_key.coeffs() {
        return Err(FedError::Config("decryption key is not the sum of the client keys".into()));
    }
    Ok(())
}

/// Timings of the client-side work in one round.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClientTiming {
    pub encrypt: Duration,
    pub decrypt: Duration,
}

/// What a client records per round.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientRoundLog {
    pub round: u64,
    pub aggregate: Vec<f64>,
    pub model: Vec<f64>,
    pub timing: ClientTiming,
    pub uplink_bytes: u64,
    pub downlink_bytes: u64,
}

pub struct ClientState {
    pub id: u32,
    pub model: Vec<f64>,
    pub data: Dataset,
    pub alpha: f64,
    pub round: u64,
    enc_key: SparseTernaryKey,
    dec_key: SmallPoly,
    a0: RingElem,
    seed: RoundSeed,
    params: SchemeParams,
    codec: Arc<Codec>,
    rng: ChaCha20Rng,
    pending: Option<Duration>,
}

impl std::fmt::Debug for ClientState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ClientState").field("id", &self.id).field("round", &self.round).finish_non_exhaustive()
    }
}

impl ClientState {
    pub fn new(
        issue: KeyIssue,
        codec: Arc<Codec>,
        data: Dataset,
        alpha: f64,
        model: Vec<f64>,
        rng_seed: u64,
    ) -> Result<Self, FedError> {
        let params = codec.params().clone();
        if issue.params()? != params {
            return Err(FedError::Config(format!("client {} was issued keys for other parameters", issue.client_id)));
        }
        if data.dim != model.len() {
            return Err(FedError::Config("model and data dimensions differ".into()));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(FedError::Config(format!("weight {alpha} must be positive")));
        }
        let mut seed = [0u8; 32];
        seed[..8].copy_from_slice(&rng_seed.to_le_bytes());
        seed[8..12].copy_from_slice(&issue.client_id.to_le_bytes());
        Ok(ClientState {
            id: issue.client_id,
            model,
            data,
            alpha,
            round: 1,
            enc_key: issue.enc_key,
            dec_key: issue.dec_key,
            a0: issue.a0,
            seed: issue.seed,
            params,
            codec,
            rng: ChaCha20Rng::from_seed(seed),
            pending: None,
        })
    }

    pub fn params(&self) -> &SchemeParams {
        &self.params
    }

    /// The weighted, unclipped local gradient for the current round.
    pub fn gradient(&self, spec: &LinRegSpec) -> Vec<f64> {
        let rows = minibatch(spec, self.id as usize, self.round, self.data.len());
        local_gradient(&self.model, &self.data, &rows, self.alpha)
    }

    /// Builds this round's encrypted submission from a fresh local gradient.
    pub fn prepare(&mut self, spec: &LinRegSpec, clip: f64) -> Result<RoundSubmit, FedError> {
        let started = Instant::now();
        let g = self.gradient(spec);
        let v = RealVector::new(normalize(&g, clip))?;
        let plains = self.codec.ecd_pack(&v)?;
        let t = self.round;
        let mut ciphertexts = Vec::with_capacity(plains.len());
        for (j, m) in plains.iter().enumerate() {
            let a = round_public(t, j as u64, &self.a0, &self.seed, &self.params)?;
            let mut ct = encrypt(&self.params, t, &a, &self.enc_key, m, &mut self.rng)?;
            ct.client_tag = Some(self.id);
            ciphertexts.push(ct);
        }
        self.pending = Some(started.elapsed());
        Ok(RoundSubmit { round: t, client_id: self.id, original_len: v.len() as u64, ciphertexts })
    }

    /// Decrypts the aggregate and applies `w -= lr * G / N`. Returns the
    /// decoded aggregate `G`.
    pub fn apply(&mut self, result: &RoundResult, clip: f64, lr: f64) -> Result<(Vec<f64>, ClientTiming), FedError> {
        if result.round != self.round {
            return Err(FedError::Protocol(format!(
                "client {} expected round {} but got {}",
                self.id, self.round, result.round
            )));
        }
        let len = result.original_len as usize;
        if len != self.model.len() {
            return Err(FedError::Protocol(format!("aggregate length {len} differs from model")));
        }
        let started = Instant::now();
        let mut plains = Vec::with_capacity(result.ciphertexts.len());
        for (j, ct) in result.ciphertexts.iter().enumerate() {
            let a = round_public(result.round, j as u64, &self.a0, &self.seed, &self.params)?;
            plains.push(decrypt(&self.params, &a, &self.dec_key, ct)?);
        }
        let count = result.agg_count as usize;
        let sum = self.codec.dcd_unpk(&plains, count, len)?;
        let g = denormalize(&sum, count, clip);
        let n = self.params.num_clients() as f64;
        for (w, gi) in self.model.iter_mut().zip(&g) {
            *w -= lr * gi / n;
        }
        self.round += 1;
        let timing = ClientTiming { encrypt: self.pending.take().unwrap_or_default(), decrypt: started.elapsed() };
        Ok((g, timing))
    }
}

/// Reasons the aggregator turns a submission away.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Rejection {
    #[error("client {0} is not part of the cohort")]
    UnknownClient(u32),
    #[error("client {client} submitted for round {got} during round {current}")]
    StaleRound { client: u32, got: u64, current: u64 },
    #[error("client {0} already submitted this round")]
    Duplicate(u32),
    #[error("client {client} declared length {got}, cohort uses {expected}")]
    LengthMismatch { client: u32, got: u64, expected: u64 },
    #[error("client {client} sent {got} ciphertexts, expected {expected}")]
    CountMismatch { client: u32, got: usize, expected: usize },
}

/// The untrusted aggregator: public parameters, the expected client set and
/// the current round's buffer. It never sees key material.
#[derive(Debug, Clone)]
pub struct Aggregator {
    params: SchemeParams,
    expected: BTreeSet<u32>,
    round: u64,
    received: BTreeMap<u32, RoundSubmit>,
}

impl Aggregator {
    pub fn new(params: SchemeParams, first_round: u64) -> Self {
        let expected = (0..params.num_clients() as u32).collect();
        Aggregator { params, expected, round: first_round, received: BTreeMap::new() }
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn pending(&self) -> usize {
        self.received.len()
    }

    /// Every ciphertext body received so far in the open round.
    pub fn observed_bodies(&self) -> impl Iterator<Item = &RingElem> {
        self.received.values().flat_map(|s| s.ciphertexts.iter().map(|c| &c.body))
    }

    pub fn check(&self, msg: &RoundSubmit) -> Result<(), Rejection> {
        let client = msg.client_id;
        if !self.expected.contains(&client) {
            return Err(Rejection::UnknownClient(client));
        }
        if msg.round != self.round {
            return Err(Rejection::StaleRound { client, got: msg.round, current: self.round });
        }
        if self.received.contains_key(&client) {
            return Err(Rejection::Duplicate(client));
        }
        if let Some(other) = self.received.values().next() {
            if other.original_len != msg.original_len {
                return Err(Rejection::LengthMismatch { client, got: msg.original_len, expected: other.original_len });
            }
        }
        let expected = self.params.ciphertexts_for(msg.original_len as usize);
        if msg.ciphertexts.len() != expected || msg.ciphertexts.iter().any(|c| c.round != msg.round) {
            return Err(Rejection::CountMismatch { client, got: msg.ciphertexts.len(), expected });
        }
        Ok(())
    }

    /// Buffers a submission. Once all `N` clients are in, sums their
    /// ciphertexts position-wise, advances the round and returns the result.
    pub fn submit(&mut self, msg: RoundSubmit) -> Result<Option<RoundResult>, FedError> {
        self.check(&msg)?;
        self.received.insert(msg.client_id, msg);
        if self.received.len() < self.expected.len() {
            return Ok(None);
        }
        let subs: Vec<RoundSubmit> = std::mem::take(&mut self.received).into_values().collect();
        let count = subs[0].ciphertexts.len();
        let mut ciphertexts = Vec::with_capacity(count);
        for j in 0..count {
            let column: Vec<Ciphertext> = subs.iter().map(|s| s.ciphertexts[j].clone()).collect();
            ciphertexts.push(eval_add(&self.params, &column)?);
        }
        let agg_count = ciphertexts.first().map_or(self.expected.len() as u16, |c| c.agg_count);
        let result = RoundResult { round: self.round, agg_count, original_len: subs[0].original_len, ciphertexts };
        self.round += 1;
        Ok(Some(result))
    }
}
