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

//! End-to-end federated training over the encrypted aggregation pipeline.
//!
//! A trusted dealer runs keygen once and hands each client its keys over a
//! confidential path. Every round each client computes a weighted gradient,
//! clips and normalizes it into `[0, 1]`, packs and encrypts it under the
//! round's public polynomial and submits. The aggregator waits for all `N`
//! submissions, sums them and broadcasts the aggregate; each client decrypts
//! with the joint key and applies `w -= lr * G / N`.
//!
//! [`run_training`] drives this either in-process or over loopback TCP and
//! replays the same rounds in plaintext for comparison.

pub mod data;
pub mod net;
pub mod party;

use std::net::TcpListener;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

pub use data::{clip, denormalize, local_gradient, minibatch, normalize, Dataset, Federation, LinRegSpec};
pub use party::{keydeal, verify_issues, Aggregator, ClientRoundLog, ClientState, ClientTiming, Rejection};

use crate::codec::{Codec, CodecError};
use crate::eshe::EsheError;
use crate::params::{ParamsError, SchemeParams};
use crate::prg::PrgError;
use crate::ring::RingError;
use crate::wire::{AbortCode, Message, WireError};

#[derive(Debug, Error)]
pub enum FedError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Eshe(#[from] EsheError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Prg(#[from] PrgError),
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("submission rejected: {0}")]
    Rejected(#[from] Rejection),
    #[error("round aborted by peer: {0:?}")]
    Aborted(AbortCode),
    #[error("timed out waiting for the round barrier")]
    Timeout,
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("client models diverged in round {0}")]
    Divergence(u64),
    #[error("io: {0}")]
    Io(String),
}

impl FedError {
    /// True for failures caused by the other side of a session rather than
    /// by local configuration.
    pub fn is_protocol_abort(&self) -> bool {
        matches!(
            self,
            FedError::Aborted(_)
                | FedError::Timeout
                | FedError::Protocol(_)
                | FedError::Wire(_)
                | FedError::Rejected(_)
                | FedError::Io(_)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    InProcess,
    Tcp,
    /// Reserved for distributed key generation; not implemented.
    DealerFree,
}

impl std::str::FromStr for Mode {
    type Err = FedError;

    fn from_str(s: &str) -> Result<Self, FedError> {
        match s {
            "in_process" | "in-process" => Ok(Mode::InProcess),
            "tcp" => Ok(Mode::Tcp),
            "dealer_free" | "dealer-free" => Ok(Mode::DealerFree),
            other => Err(FedError::Config(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub rounds: u64,
    pub learning_rate: f64,
    pub clip_bound: f64,
    /// Per-client gradient weights; empty means all ones.
    pub weights: Vec<f64>,
    pub model: LinRegSpec,
    pub mode: Mode,
    /// Seeds key generation and every client's encryption noise.
    pub seed: u64,
    pub timeout: Duration,
}

impl TrainConfig {
    pub fn linreg(num_clients: usize) -> Self {
        TrainConfig {
            rounds: 200,
            learning_rate: 0.05,
            clip_bound: 4.0,
            weights: Vec::new(),
            model: LinRegSpec::uniform(16, num_clients, 64, 7),
            mode: Mode::InProcess,
            seed: 1,
            timeout: Duration::from_secs(60),
        }
    }

    pub fn weight(&self, client: usize) -> f64 {
        self.weights.get(client).copied().unwrap_or(1.0)
    }

    pub fn validate(&self, params: &SchemeParams) -> Result<(), FedError> {
        let n = params.num_clients();
        let bad = |m: String| Err(FedError::Config(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.learning_rate));
        }
        if !(self.clip_bound > 0.0 && self.clip_bound.is_finite()) {
            return bad(format!("clip bound {} must be positive", self.clip_bound));
        }
        if !self.weights.is_empty() && self.weights.len() != n {
            return bad(format!("{} weights for {n} clients", self.weights.len()));
        }
        if self.weights.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return bad("weights must be positive".into());
        }
        if self.model.samples_per_client.len() != n {
            return bad(format!("{} datasets for {n} clients", self.model.samples_per_client.len()));
        }
        if self.model.dim == 0 {
            return bad("model dimension must be positive".into());
        }
        if self.mode == Mode::DealerFree {
            return bad("dealer-free key generation is not implemented".into());
        }
        Ok(())
    }
}

/// One completed round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRow {
    pub round: u64,
    pub loss_plain: f64,
    pub loss_enc: f64,
    /// `max |w_enc - w_plain|` after the round.
    pub max_model_diff: f64,
    /// `max |G_enc - G_plain|` where `G_plain` is the plaintext sum of the
    /// clipped gradients at the encrypted run's model.
    pub aggregate_deviation: f64,
    pub uplink_bytes: u64,
    pub downlink_bytes: u64,
    pub wall_ms_encrypt: f64,
    pub wall_ms_decrypt: f64,
    pub wall_ms_aggregate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub rows: Vec<RoundRow>,
    pub initial_model: Vec<f64>,
    pub final_model: Vec<f64>,
    pub reference_model: Vec<f64>,
    pub truth: Vec<f64>,
    /// Worst-case per-component gap between encrypted and plaintext
    /// aggregates.
    pub aggregate_bound: f64,
}

pub const TRACE_HEADER: &str = "round,loss_plain,loss_enc,max_model_diff,uplink_bytes,downlink_bytes,wall_ms_encrypt,wall_ms_decrypt,wall_ms_aggregate";

impl Trace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:e},{:e},{:e},{},{},{:.3},{:.3},{:.3}\n",
                r.round,
                r.loss_plain,
                r.loss_enc,
                r.max_model_diff,
                r.uplink_bytes,
                r.downlink_bytes,
                r.wall_ms_encrypt,
                r.wall_ms_decrypt,
                r.wall_ms_aggregate
            ));
        }
        out
    }

    /// `max_j |w_j - w*_j|` of the encrypted run's final model.
    pub fn distance_to_truth(&self) -> f64 {
        max_abs_diff(&self.final_model, &self.truth)
    }
}

/// A failed run with everything recorded before the failure.
#[derive(Debug, Error)]
#[error("training stopped after {} rounds: {source}", trace.rows.len())]
pub struct TrainingError {
    pub trace: Box<Trace>,
    #[source]
    pub source: FedError,
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Plaintext sum of every client's clipped, weighted gradient at `w`.
pub fn plaintext_aggregate(config: &TrainConfig, fed: &Federation, w: &[f64], round: u64) -> Vec<f64> {
    let mut sum = vec![0.0; w.len()];
    for (i, d) in fed.clients.iter().enumerate() {
        let rows = minibatch(&config.model, i, round, d.len());
        let g = clip(&local_gradient(w, d, &rows, config.weight(i)), config.clip_bound);
        sum.iter_mut().zip(&g).for_each(|(s, x)| *s += x);
    }
    sum
}

fn step(w: &mut [f64], g: &[f64], lr: f64, n: usize) {
    for (wi, gi) in w.iter_mut().zip(g) {
        *wi -= lr * gi / n as f64;
    }
}

/// Builds the cohort: deals keys and attaches each client's dataset.
pub fn build_cohort(
    params: &SchemeParams,
    config: &TrainConfig,
    fed: &Federation,
) -> Result<Vec<ClientState>, FedError> {
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let issues = keydeal(params, &mut rng)?;
    verify_issues(&issues)?;
    let codec = Arc::new(Codec::new(params));
    let init = vec![0.0; config.model.dim];
    issues
        .into_iter()
        .zip(&fed.clients)
        .enumerate()
        .map(|(i, (issue, data))| {
            ClientState::new(issue, codec.clone(), data.clone(), config.weight(i), init.clone(), config.seed)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    /// One entry per client, in cohort order.
    pub logs: Vec<ClientRoundLog>,
    pub aggregate_time: Duration,
}

/// Runs one round entirely in memory. Messages still go through the wire
/// encoding so byte counts match the networked mode.
pub fn run_round(
    cohort: &mut [ClientState],
    aggregator: &mut Aggregator,
    config: &TrainConfig,
) -> Result<RoundOutcome, FedError> {
    let params = aggregator_params(cohort)?;
    let mut uplink = Vec::with_capacity(cohort.len());
    let mut result = None;
    let mut agg_time = Duration::ZERO;
    for client in cohort.iter_mut() {
        let frame = Message::RoundSubmit(client.prepare(&config.model, config.clip_bound)?).to_frame();
        uplink.push(frame.encoded_len() as u64);
        let Message::RoundSubmit(sub) = Message::deserialize(&frame, &params)? else {
            return Err(FedError::Protocol("submission changed type in transit".into()));
        };
        let started = Instant::now();
        let out = aggregator.submit(sub)?;
        agg_time += started.elapsed();
        if out.is_some() {
            result = out;
        }
    }
    let result = result.ok_or_else(|| FedError::Protocol("barrier did not fire".into()))?;
    let frame = Message::RoundResult(result).to_frame();
    let down = frame.encoded_len() as u64;
    let Message::RoundResult(result) = Message::deserialize(&frame, &params)? else {
        return Err(FedError::Protocol("result changed type in transit".into()));
    };
    let mut logs = Vec::with_capacity(cohort.len());
    for (client, up) in cohort.iter_mut().zip(uplink) {
        let (aggregate, timing) = client.apply(&result, config.clip_bound, config.learning_rate)?;
        logs.push(ClientRoundLog {
            round: result.round,
            aggregate,
            model: client.model.clone(),
            timing,
            uplink_bytes: up,
            downlink_bytes: down,
        });
    }
    if let Some(first) = logs.first() {
        let bits = |m: &[f64]| m.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        if logs.iter().any(|l| bits(&l.model) != bits(&first.model)) {
            return Err(FedError::Divergence(result.round));
        }
    }
    Ok(RoundOutcome { logs, aggregate_time: agg_time })
}

fn aggregator_params(cohort: &[ClientState]) -> Result<SchemeParams, FedError> {
    cohort.first().map(|c| c.params().clone()).ok_or_else(|| FedError::Config("empty cohort".into()))
}

/// Per-round client logs, indexed `[round][client]`, plus per-round
/// aggregation time.
type EncryptedRun = (Vec<Vec<ClientRoundLog>>, Vec<Duration>);

fn run_in_process(
    params: &SchemeParams,
    config: &TrainConfig,
    mut cohort: Vec<ClientState>,
) -> Result<EncryptedRun, (EncryptedRun, FedError)> {
    let mut aggregator = Aggregator::new(params.clone(), 1);
    let mut run: EncryptedRun = (Vec::new(), Vec::new());
    for _ in 0..config.rounds {
        match run_round(&mut cohort, &mut aggregator, config) {
            Ok(out) => {
                run.0.push(out.logs);
                run.1.push(out.aggregate_time);
            }
            Err(e) => return Err((run, e)),
        }
    }
    Ok(run)
}

fn run_tcp(
    params: &SchemeParams,
    config: &TrainConfig,
    cohort: Vec<ClientState>,
) -> Result<EncryptedRun, (EncryptedRun, FedError)> {
    let empty = || (Vec::new(), Vec::new());
    let listener = match TcpListener::bind("127.0.0.1:0") {
        Ok(l) => l,
        Err(e) => return Err((empty(), FedError::Io(e.to_string()))),
    };
    let addr = match listener.local_addr() {
        Ok(a) => a,
        Err(e) => return Err((empty(), FedError::Io(e.to_string()))),
    };
    let (rounds, timeout) = (config.rounds, config.timeout);
    let server_params = params.clone();
    let server = thread::spawn(move || net::serve(listener, server_params, rounds, timeout));
    let workers: Vec<_> = cohort
        .into_iter()
        .map(|mut client| {
            let cfg = config.clone();
            thread::spawn(move || {
                net::run_client(
                    addr,
                    &mut client,
                    &cfg.model,
                    cfg.clip_bound,
                    cfg.learning_rate,
                    cfg.rounds,
                    cfg.timeout,
                )
            })
        })
        .collect();
    let mut per_client = Vec::new();
    let mut failure = None;
    for w in workers {
        match w.join() {
            Ok(Ok(logs)) => per_client.push(logs),
            Ok(Err((logs, e))) => {
                per_client.push(logs);
                failure.get_or_insert(e);
            }
            Err(_) => {
                failure.get_or_insert(FedError::Protocol("client worker panicked".into()));
            }
        }
    }
    let report = match server.join() {
        Ok(Ok(r)) => r,
        Ok(Err(failed)) => {
            let (r, e) = *failed;
            failure.get_or_insert(e);
            r
        }
        Err(_) => {
            failure.get_or_insert(FedError::Protocol("server panicked".into()));
            Default::default()
        }
    };
    let done = per_client.iter().map(Vec::len).min().unwrap_or(0);
    let mut by_round = Vec::with_capacity(done);
    for t in 0..done {
        let logs: Vec<ClientRoundLog> = per_client.iter().map(|c| c[t].clone()).collect();
        let bits = |m: &[f64]| m.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        if logs.iter().any(|l| bits(&l.model) != bits(&logs[0].model)) {
            return Err(((by_round, report.aggregate_time), FedError::Divergence(logs[0].round)));
        }
        by_round.push(logs);
    }
    let run = (by_round, report.aggregate_time);
    match failure {
        Some(e) => Err((run, e)),
        None => Ok(run),
    }
}

/// Runs `config.rounds` rounds and a plaintext reference side by side.
pub fn run_training(params: &SchemeParams, config: &TrainConfig) -> Result<Trace, TrainingError> {
    let fed = Federation::generate(&config.model);
    let init = vec![0.0; config.model.dim];
    let codec_bound = Codec::new(params).roundtrip_bound();
    let n = params.num_clients();
    let mut trace = Trace {
        rows: Vec::new(),
        initial_model: init.clone(),
        final_model: init.clone(),
        reference_model: init.clone(),
        truth: fed.truth.clone(),
        aggregate_bound: n as f64 * 2.0 * config.clip_bound * codec_bound,
    };
    let fail = |trace: Trace, source| TrainingError { trace: Box::new(trace), source };
    if let Err(e) = config.validate(params) {
        return Err(fail(trace, e));
    }
    let cohort = match build_cohort(params, config, &fed) {
        Ok(c) => c,
        Err(e) => return Err(fail(trace, e)),
    };
    let outcome = match config.mode {
        Mode::InProcess => run_in_process(params, config, cohort),
        Mode::Tcp => run_tcp(params, config, cohort),
        Mode::DealerFree => unreachable!("rejected by validate"),
    };
    let ((rounds, agg_times), err) = match outcome {
        Ok(run) => (run, None),
        Err((run, e)) => (run, Some(e)),
    };

    let mut w_enc = init.clone();
    let mut w_plain = init;
    for (t, logs) in rounds.iter().enumerate() {
        let round = t as u64 + 1;
        let g_check = plaintext_aggregate(config, &fed, &w_enc, round);
        let g_ref = plaintext_aggregate(config, &fed, &w_plain, round);
        step(&mut w_plain, &g_ref, config.learning_rate, n);
        let lead = &logs[0];
        w_enc.clone_from(&lead.model);
        let ms = |d: Duration| d.as_secs_f64() * 1e3;
        trace.rows.push(RoundRow {
            round,
            loss_plain: fed.loss(&w_plain),
            loss_enc: fed.loss(&w_enc),
            max_model_diff: max_abs_diff(&w_enc, &w_plain),
            aggregate_deviation: max_abs_diff(&lead.aggregate, &g_check),
            uplink_bytes: logs.iter().map(|l| l.uplink_bytes).sum(),
            downlink_bytes: logs.iter().map(|l| l.downlink_bytes).sum(),
            wall_ms_encrypt: logs.iter().map(|l| ms(l.timing.encrypt)).sum(),
            wall_ms_decrypt: logs.iter().map(|l| ms(l.timing.decrypt)).sum(),
            wall_ms_aggregate: agg_times.get(t).map_or(0.0, |d| ms(*d)),
        });
    }
    trace.final_model = w_enc;
    trace.reference_model = w_plain;
    match err {
        Some(e) => Err(fail(trace, e)),
        None => Ok(trace),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Overrides;

    fn small_params(clients: usize) -> SchemeParams {
        SchemeParams::setup(64, 478, 460, 16, clients, &Overrides::default()).unwrap()
    }

    #[test]
    fn zero_rounds_returns_initial_model() {
        let p = small_params(3);
        let mut cfg = TrainConfig::linreg(3);
        cfg.rounds = 0;
        let trace = run_training(&p, &cfg).unwrap();
        assert!(trace.rows.is_empty());
        assert_eq!(trace.final_model, vec![0.0; 16]);
        assert_eq!(trace.to_csv().lines().count(), 1);
    }

    #[test]
    fn identical_gradients_give_plain_step() {
        let p = small_params(3);
        let mut cfg = TrainConfig::linreg(3);
        cfg.rounds = 1;
        cfg.model = LinRegSpec::uniform(4, 3, 10, 5);
        let fed = Federation::generate(&cfg.model);
        let mut cohort = build_cohort(&p, &cfg, &fed).unwrap();
        for c in cohort.iter_mut() {
            c.data = fed.clients[0].clone();
        }
        let g = cohort[0].gradient(&cfg.model);
        let mut agg = Aggregator::new(p.clone(), 1);
        let logs = run_round(&mut cohort, &mut agg, &cfg).unwrap().logs;
        let bound = 3.0 * 2.0 * cfg.clip_bound * Codec::new(&p).roundtrip_bound() * cfg.learning_rate;
        for (w, gi) in logs[0].model.iter().zip(&g) {
            assert!((w - (0.0 - cfg.learning_rate * gi)).abs() <= bound);
        }
        assert_eq!(agg.round(), 2);
    }

    #[test]
    fn aggregator_rejects_duplicates_stale_and_unknown() {
        let p = small_params(2);
        let cfg = {
            let mut c = TrainConfig::linreg(2);
            c.model = LinRegSpec::uniform(3, 2, 5, 1);
            c
        };
        let fed = Federation::generate(&cfg.model);
        let mut cohort = build_cohort(&p, &cfg, &fed).unwrap();
        let mut agg = Aggregator::new(p.clone(), 1);
        let sub = cohort[0].prepare(&cfg.model, cfg.clip_bound).unwrap();
        assert!(agg.submit(sub.clone()).unwrap().is_none());
        assert!(matches!(agg.submit(sub.clone()), Err(FedError::Rejected(Rejection::Duplicate(0)))));
        let mut stranger = sub.clone();
        stranger.client_id = 7;
        assert!(matches!(agg.submit(stranger), Err(FedError::Rejected(Rejection::UnknownClient(7)))));
        let mut stale = cohort[1].prepare(&cfg.model, cfg.clip_bound).unwrap();
        stale.round = 0;
        assert!(matches!(agg.submit(stale), Err(FedError::Rejected(Rejection::StaleRound { .. }))));
        assert_eq!(agg.pending(), 1);
    }

    #[test]
    fn deal_issues_consistent_keys() {
        let p = small_params(4);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let issues = keydeal(&p, &mut rng).unwrap();
        assert_eq!(issues.len(), 4);
        verify_issues(&issues).unwrap();
        let mut broken = issues.clone();
        broken[2].dec_key = broken[0].enc_key.to_small_poly();
        assert!(verify_issues(&broken).is_err());
    }

    #[test]
    fn dealer_free_mode_is_reserved() {
        let p = small_params(2);
        let mut cfg = TrainConfig::linreg(2);
        cfg.mode = Mode::DealerFree;
        assert!(matches!(run_training(&p, &cfg), Err(TrainingError { source: FedError::Config(_), .. })));
    }
}
