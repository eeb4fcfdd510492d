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

/// `print!` and `println!` that tolerate a closed stdout, such as a pipe into `head`.
macro_rules! out_raw {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = write!(std::io::stdout(), $($t)*);
    }};
}

macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

use std::net::{SocketAddr, TcpListener};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use esafl_cli::{bench, demo, exit, keygen, load_profile, report, selftest, shape_len, write_atomic, CliError};
use esafl_core::codec::Codec;
use esafl_core::fedsim::{net, ClientState, Federation, Mode, TrainConfig};
use esafl_core::prg::{prpg_indexed, RoundSeed};
use esafl_core::wire::write_ring;

#[derive(Parser)]
#[command(name = "esafl", version, about = "Encrypted federated aggregation tool")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ProfileArgs {
    /// `desk`, `full` or a path to a key=value profile.
    #[arg(long, env = "ESAFL_PROFILE")]
    profile: Option<String>,
    /// Override the number of clients.
    #[arg(long)]
    clients: Option<usize>,
    /// Override the per-slot precision in bits.
    #[arg(long)]
    logq0: Option<u32>,
}

impl ProfileArgs {
    fn load(&self, default: &str) -> Result<(String, esafl_core::SchemeParams), CliError> {
        load_profile(self.profile.as_deref().unwrap_or(default), self.clients, self.logq0)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Deal keys and write the profile, aggregator file and client key files.
    Keygen {
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long, default_value_t = 1, value_parser = parse_u64)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ciphertext counts and traffic for a gradient length, without running crypto.
    Estimate {
        #[command(flatten)]
        profile: ProfileArgs,
        /// `fcn`, `alexnet`, `lstm` or an explicit length.
        #[arg(long, default_value = "fcn")]
        shape: String,
    },
    /// Run the randomized and golden self-test suites.
    Selftest {
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 1, value_parser = parse_u64)]
        seed: u64,
        /// Directory holding golden fixtures to check instead of the built-in copies.
        #[arg(long)]
        golden_dir: Option<PathBuf>,
    },
    /// Federated linear regression with a plaintext reference run.
    Demo {
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long, default_value_t = 200)]
        rounds: u64,
        #[arg(long, default_value = "in_process")]
        mode: String,
        #[arg(long, default_value_t = 1, value_parser = parse_u64)]
        seed: u64,
        #[arg(long, default_value = "esafl-demo")]
        out: PathBuf,
        /// Also render loss.svg.
        #[arg(long)]
        svg: bool,
        #[arg(long, default_value_t = 60)]
        timeout_secs: u64,
    },
    /// Time one full round at a named gradient length.
    Bench {
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long, default_value = "fcn")]
        shape: String,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[arg(long, default_value_t = 1, value_parser = parse_u64)]
        seed: u64,
        /// Directory for summary and timing CSV files.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the public polynomial for (seed, round, index) as hex or write raw bytes.
    PublicPoly {
        #[command(flatten)]
        profile: ProfileArgs,
        /// Shared seed B, decimal or 0x-prefixed hex.
        #[arg(long, value_parser = parse_u64)]
        secret: u64,
        #[arg(long)]
        round: u64,
        #[arg(long, default_value_t = 0)]
        index: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the aggregator over TCP.
    Serve {
        /// Aggregator profile, as written by `keygen`.
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long)]
        listen: SocketAddr,
        #[arg(long, default_value_t = 200)]
        rounds: u64,
        #[arg(long, default_value_t = 60)]
        timeout_secs: u64,
    },
    /// Run one client over TCP with its key file and the synthetic dataset.
    Client {
        #[arg(long)]
        connect: SocketAddr,
        #[arg(long)]
        key: PathBuf,
        #[arg(long, default_value_t = 200)]
        rounds: u64,
        /// Seed shared by all clients for the synthetic data.
        #[arg(long, default_value_t = 1, value_parser = parse_u64)]
        seed: u64,
        #[arg(long, default_value_t = 60)]
        timeout_secs: u64,
    },
}

fn parse_u64(s: &str) -> Result<u64, String> {
    let r = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(&hex.replace('_', ""), 16),
        None => s.replace('_', "").parse(),
    };
    r.map_err(|e| format!("{s:?} is not a decimal or 0x-prefixed hex u64: {e}"))
}

fn train_config(clients: usize, rounds: u64, seed: u64, timeout: u64) -> TrainConfig {
    let mut cfg = TrainConfig::linreg(clients);
    cfg.rounds = rounds;
    cfg.seed = seed;
    cfg.model.data_seed = seed.wrapping_add(6);
    cfg.timeout = Duration::from_secs(timeout);
    cfg
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Keygen { profile, seed, out } => {
            let (_, params) = profile.load("full")?;
            for path in keygen::cmd_keygen(&params, &out, seed)? {
                out!("{}", path.display());
            }
        }
        Command::Estimate { profile, shape } => {
            let (name, params) = profile.load("full")?;
            out_raw!("{}", report::estimate(&name, &params, shape_len(&shape)?));
        }
        Command::Selftest { profile, trials, seed, golden_dir } => {
            let (_, params) = profile.load("desk")?;
            let summary = selftest::cmd_selftest(&params, trials, seed, golden_dir.as_deref());
            out_raw!("{summary}");
            if !summary.passed() {
                return Err(CliError::TestFailure(format!("failed suites: {}", summary.failed_suites().join(", "))));
            }
        }
        Command::Demo { profile, rounds, mode, seed, out, svg, timeout_secs } => {
            let (_, params) = profile.load("desk")?;
            let mut cfg = train_config(params.num_clients(), rounds, seed, timeout_secs);
            cfg.mode = mode.parse::<Mode>()?;
            let res = demo::cmd_demo(&params, &cfg, &out, svg)?;
            out_raw!("{}", demo::summary(&res.trace));
            for f in res.files {
                out!("wrote {}", f.display());
            }
        }
        Command::Bench { profile, shape, reps, seed, out } => {
            let (name, params) = profile.load("full")?;
            let r = bench::cmd_bench(&name, &params, shape_len(&shape)?, reps, seed)?;
            out_raw!("{r}");
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                write_atomic(&dir.join(format!("bench-{shape}.csv")), r.summary_csv().as_bytes())?;
                write_atomic(&dir.join(format!("bench-{shape}-timings.csv")), r.timings_csv().as_bytes())?;
            }
            if r.bytes_match() == Some(false) {
                return Err(CliError::TestFailure("measured traffic differs from the estimate".into()));
            }
        }
        Command::PublicPoly { profile, secret, round, index, out } => {
            let (_, params) = profile.load("desk")?;
            let seed = RoundSeed::new(secret, params.seed_bits_k()).map_err(|e| CliError::Config(e.to_string()))?;
            let a = prpg_indexed(round, index, &seed, &params).map_err(|e| CliError::Config(e.to_string()))?;
            let mut bytes = Vec::new();
            write_ring(&mut bytes, &a);
            match out {
                Some(path) => write_atomic(&path, &bytes)?,
                None => {
                    let hex: String = bytes.iter().map(|b| format!("{b:02x}")).collect();
                    out!("{hex}");
                }
            }
        }
        Command::Serve { profile, listen, rounds, timeout_secs } => {
            let (_, params) = profile.load("desk")?;
            let listener = TcpListener::bind(listen)?;
            eprintln!("listening on {}", listener.local_addr()?);
            match net::serve(listener, params, rounds, Duration::from_secs(timeout_secs)) {
                Ok(r) => out!("completed {} rounds, {} rejected submissions", r.rounds_completed, r.rejections.len()),
                Err(failed) => {
                    let (r, e) = *failed;
                    out!("completed {} rounds before failure", r.rounds_completed);
                    return Err(e.into());
                }
            }
        }
        Command::Client { connect, key, rounds, seed, timeout_secs } => {
            let issue = keygen::load_key_file(&key)?;
            let params = issue.params()?;
            let cfg = train_config(params.num_clients(), rounds, seed, timeout_secs);
            let fed = Federation::generate(&cfg.model);
            let id = issue.client_id as usize;
            let data = fed
                .clients
                .get(id)
                .cloned()
                .ok_or_else(|| CliError::Config(format!("client id {id} outside the cohort")))?;
            let codec = Arc::new(Codec::new(&params));
            let mut client = ClientState::new(issue, codec, data, cfg.weight(id), vec![0.0; cfg.model.dim], cfg.seed)?;
            match net::run_client(
                connect,
                &mut client,
                &cfg.model,
                cfg.clip_bound,
                cfg.learning_rate,
                rounds,
                cfg.timeout,
            ) {
                Ok(logs) => {
                    out!("completed {} rounds, loss {:.3e}", logs.len(), fed.loss(&client.model));
                }
                Err((logs, e)) => {
                    out!("completed {} rounds before failure", logs.len());
                    return Err(e.into());
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::CONFIG } else { exit::OK });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::from(exit::OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
