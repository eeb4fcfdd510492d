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

//! Training demo with trace and plot output.

use std::fmt::Write;
use std::path::{Path, PathBuf};

use esafl_core::fedsim::{run_training, Trace, TrainConfig};
use esafl_core::SchemeParams;

use crate::svg::{line_plot, Series};
use crate::{write_atomic, CliError};

pub struct DemoOutput {
    pub trace: Trace,
    pub files: Vec<PathBuf>,
}

pub fn loss_curve(trace: &Trace) -> String {
    let mut out = String::from("# round loss_plain loss_enc\n");
    for r in &trace.rows {
        let _ = writeln!(out, "{} {:e} {:e}", r.round, r.loss_plain, r.loss_enc);
    }
    out
}

pub fn summary(trace: &Trace) -> String {
    let mut out = String::new();
    let last = trace.rows.last();
    let _ = writeln!(out, "rounds             {}", trace.rows.len());
    if let Some(r) = last {
        let _ = writeln!(out, "final loss         plain {:.3e}, encrypted {:.3e}", r.loss_plain, r.loss_enc);
        let _ = writeln!(out, "model gap          {:.3e}", r.max_model_diff);
    }
    let worst = trace.rows.iter().map(|r| r.aggregate_deviation).fold(0.0, f64::max);
    let _ = writeln!(out, "aggregate error    max {:.3e} (bound {:.3e})", worst, trace.aggregate_bound);
    let _ = writeln!(out, "distance to truth  {:.3e}", trace.distance_to_truth());
    let up: u64 = trace.rows.iter().map(|r| r.uplink_bytes).sum();
    let down: u64 = trace.rows.iter().map(|r| r.downlink_bytes).sum();
    let _ = writeln!(out, "traffic            {up} B up, {down} B down");
    out
}

fn write_outputs(trace: &Trace, out_dir: &Path, svg: bool) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", out_dir.display())))?;
    let mut files = vec![(out_dir.join("trace.csv"), trace.to_csv()), (out_dir.join("loss.dat"), loss_curve(trace))];
    if svg {
        let pts =
            |f: fn(&esafl_core::fedsim::RoundRow) -> f64| trace.rows.iter().map(|r| (r.round as f64, f(r))).collect();
        let plot = line_plot(
            "training loss",
            "round",
            "mse",
            &[
                Series { label: "plaintext", color: "#1f77b4", points: pts(|r| r.loss_plain) },
                Series { label: "encrypted", color: "#d62728", points: pts(|r| r.loss_enc) },
            ],
            true,
        );
        files.push((out_dir.join("loss.svg"), plot));
    }
    for (path, text) in &files {
        write_atomic(path, text.as_bytes())?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

/// Runs training, writes `trace.csv`, `loss.dat` and optionally `loss.svg`.
/// A failed run still writes the partial trace before reporting the error.
pub fn cmd_demo(
    params: &SchemeParams,
    config: &TrainConfig,
    out_dir: &Path,
    svg: bool,
) -> Result<DemoOutput, CliError> {
    match run_training(params, config) {
        Ok(trace) => {
            let files = write_outputs(&trace, out_dir, svg)?;
            Ok(DemoOutput { trace, files })
        }
        Err(e) => {
            write_outputs(&e.trace, out_dir, svg)?;
            Err(CliError::from(e.source))
        }
    }
}
