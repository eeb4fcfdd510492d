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

//! The aggregator server and client worker over TCP.

use std::collections::HashMap;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use super::data::LinRegSpec;
use super::party::{Aggregator, ClientRoundLog, ClientState, Rejection};
use super::FedError;
use crate::params::SchemeParams;
use crate::wire::{AbortCode, Channel, Message, WireError};

const POLL: Duration = Duration::from_millis(5);

/// Per-round accounting kept by the server.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ServeReport {
    pub rounds_completed: u64,
    pub uplink_bytes: Vec<u64>,
    pub downlink_bytes: Vec<u64>,
    pub aggregate_time: Vec<Duration>,
    pub rejections: Vec<Rejection>,
}

enum Event {
    Connected(usize, Channel<TcpStream>),
    Received(usize, Result<Message, WireError>, u64),
}

fn spawn_reader(idx: usize, stream: TcpStream, params: SchemeParams, tx: Sender<Event>) {
    thread::spawn(move || {
        let mut ch = Channel::open(stream);
        loop {
            let before = ch.bytes_received();
            let msg = ch.recv(&params);
            let done = msg.is_err();
            if tx.send(Event::Received(idx, msg, ch.bytes_received() - before)).is_err() || done {
                return;
            }
        }
    });
}

fn spawn_acceptor(
    listener: TcpListener,
    params: SchemeParams,
    tx: Sender<Event>,
    stop: Arc<AtomicBool>,
) -> std::io::Result<()> {
    listener.set_nonblocking(true)?;
    thread::spawn(move || {
        let mut idx = 0;
        while !stop.load(Ordering::Relaxed) {
            match listener.accept() {
                Ok((stream, _)) => {
                    let ok = stream.set_nonblocking(false).is_ok() && stream.set_nodelay(true).is_ok();
                    let Ok(reader) = stream.try_clone() else { continue };
                    if !ok {
                        continue;
                    }
                    spawn_reader(idx, reader, params.clone(), tx.clone());
                    if tx.send(Event::Connected(idx, Channel::open(stream))).is_err() {
                        return;
                    }
                    idx += 1;
                }
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => thread::sleep(POLL),
                Err(_) => thread::sleep(POLL),
            }
        }
    });
    Ok(())
}

fn broadcast(writers: &mut HashMap<usize, Channel<TcpStream>>, msg: &Message) -> u64 {
    writers.values_mut().filter_map(|w| w.send(msg).ok()).map(|b| b as u64).sum()
}

/// Serves `rounds` rounds to `N` clients. Each round waits at most
/// `timeout` for the barrier to fill; on expiry every connected client is
/// sent `Abort` and the partial report is returned with the error.
pub fn serve(
    listener: TcpListener,
    params: SchemeParams,
    rounds: u64,
    timeout: Duration,
) -> Result<ServeReport, Box<(ServeReport, FedError)>> {
    let (tx, rx) = mpsc::channel();
    let stop = Arc::new(AtomicBool::new(false));
    let mut report = ServeReport::default();
    if let Err(e) = spawn_acceptor(listener, params.clone(), tx, stop.clone()) {
        return Err(Box::new((report, FedError::Io(e.to_string()))));
    }
    let mut agg = Aggregator::new(params.clone(), 1);
    let mut writers: HashMap<usize, Channel<TcpStream>> = HashMap::new();
    let mut owners: HashMap<u32, usize> = HashMap::new();
    let mut deadline = Instant::now() + timeout;
    let mut uplink = 0u64;
    let mut agg_time = Duration::ZERO;

    let outcome = loop {
        if report.rounds_completed >= rounds {
            break Ok(());
        }
        let wait = deadline.saturating_duration_since(Instant::now());
        let event = match rx.recv_timeout(wait) {
            Ok(ev) => ev,
            Err(RecvTimeoutError::Timeout) => break Err(FedError::Timeout),
            Err(RecvTimeoutError::Disconnected) => break Err(FedError::Protocol("acceptor stopped".into())),
        };
        match event {
            Event::Connected(idx, ch) => {
                writers.insert(idx, ch);
            }
            Event::Received(idx, Ok(Message::RoundSubmit(sub)), bytes) => {
                uplink += bytes;
                let client = sub.client_id;
                if owners.get(&client).is_some_and(|&o| o != idx) {
                    report.rejections.push(Rejection::Duplicate(client));
                    continue;
                }
                let started = Instant::now();
                match agg.submit(sub) {
                    Ok(None) => {
                        owners.insert(client, idx);
                        agg_time += started.elapsed();
                    }
                    Ok(Some(result)) => {
                        owners.insert(client, idx);
                        agg_time += started.elapsed();
                        let down = broadcast(&mut writers, &Message::RoundResult(result));
                        report.rounds_completed += 1;
                        report.uplink_bytes.push(std::mem::take(&mut uplink));
                        report.downlink_bytes.push(down);
                        report.aggregate_time.push(std::mem::take(&mut agg_time));
                        deadline = Instant::now() + timeout;
                    }
                    Err(FedError::Rejected(r)) => report.rejections.push(r),
                    Err(e) => break Err(e),
                }
            }
            Event::Received(_, Ok(other), _) => {
                break Err(FedError::Protocol(format!("unexpected {:?} from a client", other.msg_type())))
            }
            Event::Received(idx, Err(e), _) => {
                writers.remove(&idx);
                break Err(match e {
                    WireError::Closed => FedError::Protocol("a client disconnected mid-session".into()),
                    other => FedError::Wire(other),
                });
            }
        }
    };
    stop.store(true, Ordering::Relaxed);
    match outcome {
        Ok(()) => Ok(report),
        Err(e) => {
            let code = match e {
                FedError::Timeout => AbortCode::Timeout,
                _ => AbortCode::Protocol,
            };
            broadcast(&mut writers, &Message::Abort(code));
            Err(Box::new((report, e)))
        }
    }
}

fn connect(addr: SocketAddr, timeout: Duration) -> Result<TcpStream, FedError> {
    let deadline = Instant::now() + timeout;
    loop {
        match TcpStream::connect_timeout(&addr, timeout.max(POLL)) {
            Ok(s) => return Ok(s),
            Err(e) if Instant::now() >= deadline => return Err(FedError::Io(e.to_string())),
            Err(_) => thread::sleep(POLL * 4),
        }
    }
}

/// Runs `rounds` rounds for one client against the server at `addr`.
pub fn run_client(
    addr: SocketAddr,
    client: &mut ClientState,
    spec: &LinRegSpec,
    clip: f64,
    lr: f64,
    rounds: u64,
    timeout: Duration,
) -> Result<Vec<ClientRoundLog>, (Vec<ClientRoundLog>, FedError)> {
    let mut logs = Vec::new();
    let stream = match connect(addr, timeout) {
        Ok(s) => s,
        Err(e) => return Err((logs, e)),
    };
    let slack = timeout + Duration::from_secs(5);
    if let Err(e) = stream.set_read_timeout(Some(slack)).and(stream.set_nodelay(true)) {
        return Err((logs, FedError::Io(e.to_string())));
    }
    let params = client.params().clone();
    let mut ch = Channel::open(stream);
    for _ in 0..rounds {
        let step = (|| {
            let sub = client.prepare(spec, clip)?;
            let round = sub.round;
            let up = ch.send(&Message::RoundSubmit(sub))? as u64;
            let before = ch.bytes_received();
            match ch.recv(&params)? {
                Message::RoundResult(res) => {
                    let down = ch.bytes_received() - before;
                    let (aggregate, timing) = client.apply(&res, clip, lr)?;
                    Ok(ClientRoundLog {
                        round,
                        aggregate,
                        model: client.model.clone(),
                        timing,
                        uplink_bytes: up,
                        downlink_bytes: down,
                    })
                }
                Message::Abort(code) => Err(FedError::Aborted(code)),
                other => Err(FedError::Protocol(format!("unexpected {:?} from the server", other.msg_type()))),
            }
        })();
        match step {
            Ok(log) => logs.push(log),
            Err(e) => return Err((logs, e)),
        }
    }
    Ok(logs)
}
