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

//! Traffic and timing reports.

use std::fmt;
use std::time::Duration;

use esafl_core::wire::{round_result_payload_len, round_submit_payload_len, HEADER_LEN};
use esafl_core::SchemeParams;

pub const MIB: f64 = 1024.0 * 1024.0;

/// One repetition of the encrypt/aggregate/decrypt pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    /// Mean per-client encode + encrypt time.
    pub encrypt: Duration,
    /// Summing all `N` submissions.
    pub aggregate: Duration,
    /// One client's decrypt + decode.
    pub decrypt: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    pub mean: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub profile: String,
    pub n: usize,
    pub log_q: u32,
    pub log_q0: u32,
    pub clients: usize,
    pub gradients: usize,
    pub capacity: usize,
    pub ciphertexts: usize,
    pub unpacked_ciphertexts: usize,
    pub bytes_per_ciphertext: usize,
    pub submit_frame_bytes: usize,
    pub result_frame_bytes: usize,
    pub uplink_bytes: u64,
    pub downlink_bytes: u64,
    pub plain_bytes: u64,
    pub timings: Vec<Timing>,
    pub error: Option<ErrorStats>,
    /// Bytes counted from serialized messages, when the pipeline ran.
    pub measured_uplink: Option<u64>,
    pub measured_downlink: Option<u64>,
}

/// Closed-form counts and sizes for a length-`len` gradient.
pub fn estimate(profile: &str, params: &SchemeParams, len: usize) -> BenchReport {
    let count = params.ciphertexts_for(len);
    let clients = params.num_clients();
    let submit = HEADER_LEN + round_submit_payload_len(params, count);
    let result = HEADER_LEN + round_result_payload_len(params, count);
    BenchReport {
        profile: profile.to_string(),
        n: params.n(),
        log_q: params.log_q(),
        log_q0: params.log_q0(),
        clients,
        gradients: len,
        capacity: params.capacity(),
        ciphertexts: count,
        unpacked_ciphertexts: params.unpacked_ciphertexts_for(len),
        bytes_per_ciphertext: params.ring_bytes(),
        submit_frame_bytes: submit,
        result_frame_bytes: result,
        uplink_bytes: (clients * submit) as u64,
        downlink_bytes: (clients * result) as u64,
        plain_bytes: 8 * len as u64,
        timings: Vec::new(),
        error: None,
        measured_uplink: None,
        measured_downlink: None,
    }
}

fn quantiles(mut v: Vec<f64>) -> (f64, f64, f64) {
    v.sort_by(f64::total_cmp);
    match v.len() {
        0 => (f64::NAN, f64::NAN, f64::NAN),
        k => (v[0], v[k / 2], v[k - 1]),
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

impl BenchReport {
    pub fn timing_quantiles(&self, pick: fn(&Timing) -> Duration) -> (f64, f64, f64) {
        quantiles(self.timings.iter().map(|t| ms(pick(t))).collect())
    }

    /// True when measured byte counts exist and equal the closed form.
    pub fn bytes_match(&self) -> Option<bool> {
        Some(self.measured_uplink? == self.uplink_bytes && self.measured_downlink? == self.downlink_bytes)
    }

    pub fn timings_csv(&self) -> String {
        let mut out = String::from("rep,encrypt_ms,aggregate_ms,decrypt_ms\n");
        for (i, t) in self.timings.iter().enumerate() {
            out.push_str(&format!("{},{:.3},{:.3},{:.3}\n", i, ms(t.encrypt), ms(t.aggregate), ms(t.decrypt)));
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let (err_mean, err_max) = self.error.map_or((f64::NAN, f64::NAN), |e| (e.mean, e.max));
        format!(
            "profile,n,log_q0,clients,gradients,ciphertexts,unpacked_ciphertexts,bytes_per_ciphertext,uplink_bytes,downlink_bytes,plain_bytes,error_mean,error_max\n\
             {},{},{},{},{},{},{},{},{},{},{},{:e},{:e}\n",
            self.profile,
            self.n,
            self.log_q0,
            self.clients,
            self.gradients,
            self.ciphertexts,
            self.unpacked_ciphertexts,
            self.bytes_per_ciphertext,
            self.uplink_bytes,
            self.downlink_bytes,
            self.plain_bytes,
            err_mean,
            err_max
        )
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "profile            {} (n={}, log_q={}, log_q0={}, N={})",
            self.profile, self.n, self.log_q, self.log_q0, self.clients
        )?;
        writeln!(f, "gradients          {}", self.gradients)?;
        writeln!(f, "slots per cipher   {}", self.capacity)?;
        writeln!(f, "ciphertexts        {} packed, {} unpacked", self.ciphertexts, self.unpacked_ciphertexts)?;
        writeln!(
            f,
            "ciphertext body    {} B ({:.3} MiB)",
            self.bytes_per_ciphertext,
            self.bytes_per_ciphertext as f64 / MIB
        )?;
        writeln!(
            f,
            "cipher traffic     {:.3} MiB per client per direction",
            (self.ciphertexts * self.bytes_per_ciphertext) as f64 / MIB
        )?;
        writeln!(f, "plain traffic      {:.2} MiB per client per direction", self.plain_bytes as f64 / MIB)?;
        writeln!(f, "uplink per round   {} B", self.uplink_bytes)?;
        writeln!(f, "downlink per round {} B", self.downlink_bytes)?;
        if let Some(ok) = self.bytes_match() {
            writeln!(f, "measured bytes     {}", if ok { "match estimate" } else { "DIFFER from estimate" })?;
        }
        if !self.timings.is_empty() {
            for (label, pick) in [
                ("encrypt", (|t: &Timing| t.encrypt) as fn(&Timing) -> Duration),
                ("aggregate", |t: &Timing| t.aggregate),
                ("decrypt", |t: &Timing| t.decrypt),
            ] {
                let (lo, mid, hi) = self.timing_quantiles(pick);
                writeln!(f, "{label:<18} min {lo:.1} ms, median {mid:.1} ms, max {hi:.1} ms")?;
            }
        }
        if let Some(e) = self.error {
            writeln!(f, "error |dec - sum|  mean {:.3e}, max {:.3e}", e.mean, e.max)?;
        }
        Ok(())
    }
}
