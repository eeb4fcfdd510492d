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

//! Byte-exact message encoding and length-prefixed framing.
//!
//! Frame: `u32` payload length (little-endian), `u8` message type, payload.
//! All integers are little-endian. A ring element is `n` coefficients of
//! `ceil(log_q / 8)` bytes each with unused high bits zero; a ciphertext is
//! `round: u64, agg_count: u16, body`.
//!
//! | type | message     | payload                                                        |
//! |------|-------------|----------------------------------------------------------------|
//! | 0x01 | KeyIssue    | client u32, profile (u32 len + ASCII), s_i, s, a0, B u64       |
//! | 0x02 | RoundSubmit | round u64, client u32, L u64, count u16, ciphertexts           |
//! | 0x03 | RoundResult | round u64, agg_count u16, L u64, count u16, ciphertexts        |
//! | 0x7F | Abort       | reason u16                                                     |
//!
//! `s_i` is `u32` weight followed by `(position u32, sign i8)` in increasing
//! position order; `s` is `u32` bound followed by `n` `i32` coefficients.

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::eshe::Ciphertext;
use crate::params::{ParamsError, SchemeParams};
use crate::prg::RoundSeed;
use crate::ring::{RingElem, SmallPoly, SparseTernaryKey, Wide};

pub const DEFAULT_MAX_FRAME: u32 = 256 << 20;
pub const HEADER_LEN: usize = 5;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("stream ended inside a frame")]
    Truncated,
    #[error("peer closed the connection")]
    Closed,
    #[error("frame of {len} bytes exceeds the {cap}-byte cap")]
    SizeCap { len: u32, cap: u32 },
    #[error("unknown message type 0x{0:02x}")]
    MalformedHeader(u8),
    #[error("malformed payload: {0}")]
    Malformed(String),
    #[error("key material may only travel over a confidential channel")]
    ConfidentialityRequired,
    #[error("timed out waiting for the peer")]
    Timeout,
    #[error("invalid parameter profile: {0}")]
    Profile(#[from] ParamsError),
    #[error("io error: {0}")]
    Io(io::Error),
}

impl WireError {
    /// Stable numeric code for the protocol layer.
    pub fn code(&self) -> u16 {
        match self {
            WireError::Truncated => 1,
            WireError::Closed => 2,
            WireError::SizeCap { .. } => 3,
            WireError::MalformedHeader(_) => 4,
            WireError::Malformed(_) => 5,
            WireError::ConfidentialityRequired => 6,
            WireError::Timeout => 7,
            WireError::Profile(_) => 8,
            WireError::Io(_) => 9,
        }
    }
}

impl From<io::Error> for WireError {
    fn from(e: io::Error) -> Self {
        match e.kind() {
            io::ErrorKind::UnexpectedEof => WireError::Truncated,
            io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut => WireError::Timeout,
            _ => WireError::Io(e),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MsgType {
    KeyIssue = 0x01,
    RoundSubmit = 0x02,
    RoundResult = 0x03,
    Abort = 0x7F,
}

impl TryFrom<u8> for MsgType {
    type Error = WireError;

    fn try_from(b: u8) -> Result<Self, WireError> {
        match b {
            0x01 => Ok(MsgType::KeyIssue),
            0x02 => Ok(MsgType::RoundSubmit),
            0x03 => Ok(MsgType::RoundResult),
            0x7F => Ok(MsgType::Abort),
            other => Err(WireError::MalformedHeader(other)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub msg_type: MsgType,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }
}

pub fn write_frame<W: Write>(w: &mut W, frame: &Frame) -> Result<usize, WireError> {
    let len =
        u32::try_from(frame.payload.len()).map_err(|_| WireError::Malformed("payload longer than 4 GiB".into()))?;
    let mut header = [0u8; HEADER_LEN];
    header[..4].copy_from_slice(&len.to_le_bytes());
    header[4] = frame.msg_type as u8;
    w.write_all(&header)?;
    w.write_all(&frame.payload)?;
    w.flush()?;
    Ok(frame.encoded_len())
}

/// Reads one frame. A clean end of stream before the first header byte is
/// [`WireError::Closed`]; anywhere later it is [`WireError::Truncated`].
pub fn read_frame<R: Read>(r: &mut R, max_len: u32) -> Result<Frame, WireError> {
    let mut header = [0u8; HEADER_LEN];
    let mut filled = 0;
    while filled < HEADER_LEN {
        match r.read(&mut header[filled..]) {
            Ok(0) if filled == 0 => return Err(WireError::Closed),
            Ok(0) => return Err(WireError::Truncated),
            Ok(k) => filled += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let len = u32::from_le_bytes(header[..4].try_into().expect("4 bytes"));
    if len > max_len {
        return Err(WireError::SizeCap { len, cap: max_len });
    }
    let msg_type = MsgType::try_from(header[4])?;
    let mut payload = vec![0u8; len as usize];
    r.read_exact(&mut payload)?;
    Ok(Frame { msg_type, payload })
}

/// Dealer-to-client key delivery. Confidential by definition.
#[derive(Clone, PartialEq, Eq)]
pub struct KeyIssue {
    pub client_id: u32,
    pub profile: String,
    pub enc_key: SparseTernaryKey,
    pub dec_key: SmallPoly,
    pub a0: RingElem,
    pub seed: RoundSeed,
}

impl std::fmt::Debug for KeyIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyIssue").field("client_id", &self.client_id).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundSubmit {
    pub round: u64,
    pub client_id: u32,
    pub original_len: u64,
    pub ciphertexts: Vec<Ciphertext>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundResult {
    pub round: u64,
    pub agg_count: u16,
    pub original_len: u64,
    pub ciphertexts: Vec<Ciphertext>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AbortCode {
    Timeout,
    DuplicateSubmission,
    StaleRound,
    UnknownClient,
    Protocol,
    Other(u16),
}

impl AbortCode {
    pub fn to_u16(self) -> u16 {
        match self {
            AbortCode::Timeout => 1,
            AbortCode::DuplicateSubmission => 2,
            AbortCode::StaleRound => 3,
            AbortCode::UnknownClient => 4,
            AbortCode::Protocol => 5,
            AbortCode::Other(c) => c,
        }
    }

    pub fn from_u16(c: u16) -> Self {
        match c {
            1 => AbortCode::Timeout,
            2 => AbortCode::DuplicateSubmission,
            3 => AbortCode::StaleRound,
            4 => AbortCode::UnknownClient,
            5 => AbortCode::Protocol,
            other => AbortCode::Other(other),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    KeyIssue(KeyIssue),
    RoundSubmit(RoundSubmit),
    RoundResult(RoundResult),
    Abort(AbortCode),
}

impl Message {
    pub fn msg_type(&self) -> MsgType {
        match self {
            Message::KeyIssue(_) => MsgType::KeyIssue,
            Message::RoundSubmit(_) => MsgType::RoundSubmit,
            Message::RoundResult(_) => MsgType::RoundResult,
            Message::Abort(_) => MsgType::Abort,
        }
    }

    /// Canonical payload bytes.
    pub fn serialize(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            Message::KeyIssue(k) => {
                out.extend_from_slice(&k.client_id.to_le_bytes());
                out.extend_from_slice(&(k.profile.len() as u32).to_le_bytes());
                out.extend_from_slice(k.profile.as_bytes());
                write_key(&mut out, &k.enc_key);
                out.extend_from_slice(&(k.dec_key.bound() as u32).to_le_bytes());
                for &c in k.dec_key.coeffs() {
                    out.extend_from_slice(&(c as i32).to_le_bytes());
                }
                write_ring(&mut out, &k.a0);
                out.extend_from_slice(&k.seed.secret().to_le_bytes());
            }
            Message::RoundSubmit(m) => {
                out.extend_from_slice(&m.round.to_le_bytes());
                out.extend_from_slice(&m.client_id.to_le_bytes());
                out.extend_from_slice(&m.original_len.to_le_bytes());
                write_ciphertexts(&mut out, &m.ciphertexts);
            }
            Message::RoundResult(m) => {
                out.extend_from_slice(&m.round.to_le_bytes());
                out.extend_from_slice(&m.agg_count.to_le_bytes());
                out.extend_from_slice(&m.original_len.to_le_bytes());
                write_ciphertexts(&mut out, &m.ciphertexts);
            }
            Message::Abort(code) => out.extend_from_slice(&code.to_u16().to_le_bytes()),
        }
        out
    }

    pub fn to_frame(&self) -> Frame {
        Frame { msg_type: self.msg_type(), payload: self.serialize() }
    }

    /// Parses a frame. Ring sizes come from `params`; a `KeyIssue` carries
    /// its own profile and ignores `params`.
    pub fn deserialize(frame: &Frame, params: &SchemeParams) -> Result<Message, WireError> {
        let mut r = Reader::new(&frame.payload);
        let msg = match frame.msg_type {
            MsgType::KeyIssue => return KeyIssue::from_payload(&frame.payload).map(Message::KeyIssue),
            MsgType::RoundSubmit => {
                let round = r.u64()?;
                let client_id = r.u32()?;
                let original_len = r.u64()?;
                let ciphertexts = read_ciphertexts(&mut r, params, round, original_len)?;
                Message::RoundSubmit(RoundSubmit {
                    round,
                    client_id,
                    original_len,
                    ciphertexts: ciphertexts
                        .into_iter()
                        .map(|mut c| {
                            c.client_tag = Some(client_id);
                            c
                        })
                        .collect(),
                })
            }
            MsgType::RoundResult => {
                let round = r.u64()?;
                let agg_count = r.u16()?;
                let original_len = r.u64()?;
                let ciphertexts = read_ciphertexts(&mut r, params, round, original_len)?;
                if ciphertexts.iter().any(|c| c.agg_count != agg_count) {
                    return Err(WireError::Malformed("ciphertext agg_count differs from header".into()));
                }
                Message::RoundResult(RoundResult { round, agg_count, original_len, ciphertexts })
            }
            MsgType::Abort => Message::Abort(AbortCode::from_u16(r.u16()?)),
        };
        r.finish()?;
        Ok(msg)
    }
}

impl KeyIssue {
    pub fn params(&self) -> Result<SchemeParams, WireError> {
        Ok(SchemeParams::from_profile(&self.profile)?)
    }

    pub fn from_payload(payload: &[u8]) -> Result<KeyIssue, WireError> {
        let mut r = Reader::new(payload);
        let client_id = r.u32()?;
        let plen = r.u32()? as usize;
        let profile = std::str::from_utf8(r.take(plen)?)
            .ok()
            .filter(|s| s.is_ascii())
            .ok_or_else(|| WireError::Malformed("profile is not ASCII".into()))?
            .to_owned();
        let params = SchemeParams::from_profile(&profile)?;
        let n = params.n();
        let weight = r.u32()? as usize;
        if weight > n {
            return Err(WireError::Malformed("key weight exceeds n".into()));
        }
        let (mut plus, mut minus) = (Vec::new(), Vec::new());
        let mut last: Option<u32> = None;
        for _ in 0..weight {
            let pos = r.u32()?;
            if last.is_some_and(|l| pos <= l) {
                return Err(WireError::Malformed("key positions not strictly increasing".into()));
            }
            last = Some(pos);
            match r.u8()? as i8 {
                1 => plus.push(pos),
                -1 => minus.push(pos),
                s => return Err(WireError::Malformed(format!("key sign {s}"))),
            }
        }
        let enc_key = SparseTernaryKey::new(n, plus, minus).map_err(|e| WireError::Malformed(e.to_string()))?;
        let bound = r.u32()? as u64;
        let raw = r.take(n.checked_mul(4).ok_or_else(|| WireError::Malformed("n overflow".into()))?)?;
        let coeffs = raw.chunks_exact(4).map(|c| i32::from_le_bytes(c.try_into().expect("4 bytes")) as i64).collect();
        let dec_key = SmallPoly::new(coeffs, bound).map_err(|e| WireError::Malformed(e.to_string()))?;
        let a0 = read_ring(&mut r, n, params.log_q())?;
        let secret = r.u64()?;
        let seed = RoundSeed::new(secret, params.seed_bits_k()).map_err(|e| WireError::Malformed(e.to_string()))?;
        r.finish()?;
        Ok(KeyIssue { client_id, profile, enc_key, dec_key, a0, seed })
    }
}

fn write_key(out: &mut Vec<u8>, key: &SparseTernaryKey) {
    let mut entries: Vec<(u32, i8)> = key
        .plus_positions()
        .iter()
        .map(|&p| (p, 1i8))
        .chain(key.minus_positions().iter().map(|&p| (p, -1i8)))
        .collect();
    entries.sort_unstable();
    out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for (p, s) in entries {
        out.extend_from_slice(&p.to_le_bytes());
        out.push(s as u8);
    }
}

pub fn write_ring(out: &mut Vec<u8>, elem: &RingElem) {
    let width = elem.log_q().div_ceil(8) as usize;
    let start = out.len();
    out.resize(start + width * elem.n(), 0);
    for (c, chunk) in elem.coeffs().iter().zip(out[start..].chunks_exact_mut(width)) {
        c.write_le(chunk);
    }
}

pub fn read_ring(r: &mut Reader<'_>, n: usize, log_q: u32) -> Result<RingElem, WireError> {
    let width = log_q.div_ceil(8) as usize;
    let bytes = r.take(n * width)?;
    let coeffs: Vec<Wide> = bytes.chunks_exact(width).map(Wide::from_le).collect();
    RingElem::from_coeffs(log_q, coeffs).map_err(|e| WireError::Malformed(format!("non-canonical ring element: {e}")))
}

fn write_ciphertexts(out: &mut Vec<u8>, cts: &[Ciphertext]) {
    out.extend_from_slice(&(cts.len() as u16).to_le_bytes());
    for ct in cts {
        out.extend_from_slice(&ct.round.to_le_bytes());
        out.extend_from_slice(&ct.agg_count.to_le_bytes());
        write_ring(out, &ct.body);
    }
}

fn read_ciphertexts(
    r: &mut Reader<'_>,
    params: &SchemeParams,
    round: u64,
    original_len: u64,
) -> Result<Vec<Ciphertext>, WireError> {
    let count = r.u16()? as usize;
    let expected = u64::try_from(params.capacity()).ok().map(|cap| original_len.div_ceil(cap));
    if expected != Some(count as u64) {
        return Err(WireError::Malformed(format!("{count} ciphertexts for length {original_len}")));
    }
    let each = 10 + params.ring_bytes();
    if r.remaining() < count.saturating_mul(each) {
        return Err(WireError::Truncated);
    }
    let mut cts = Vec::with_capacity(count);
    for _ in 0..count {
        let ct_round = r.u64()?;
        if ct_round != round {
            return Err(WireError::Malformed("ciphertext round differs from header".into()));
        }
        let agg_count = r.u16()?;
        if agg_count == 0 || agg_count as usize > params.num_clients() {
            return Err(WireError::Malformed(format!("agg_count {agg_count}")));
        }
        let body = read_ring(r, params.n(), params.log_q())?;
        cts.push(Ciphertext { body, round, client_tag: None, agg_count });
    }
    Ok(cts)
}

/// Bounds-checked cursor over a payload.
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn take(&mut self, k: usize) -> Result<&'a [u8], WireError> {
        if self.remaining() < k {
            return Err(WireError::Truncated);
        }
        let s = &self.buf[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }

    fn array<const K: usize>(&mut self) -> Result<[u8; K], WireError> {
        Ok(self.take(K)?.try_into().expect("length checked"))
    }

    pub fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.array::<1>()?[0])
    }

    pub fn u16(&mut self) -> Result<u16, WireError> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    pub fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    pub fn finish(&self) -> Result<(), WireError> {
        if self.remaining() != 0 {
            return Err(WireError::Malformed(format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }
}

/// Payload bytes of a `RoundSubmit` carrying `count` ciphertexts.
pub fn round_submit_payload_len(params: &SchemeParams, count: usize) -> usize {
    8 + 4 + 8 + 2 + count * (8 + 2 + params.ring_bytes())
}

/// Payload bytes of a `RoundResult` carrying `count` ciphertexts.
pub fn round_result_payload_len(params: &SchemeParams, count: usize) -> usize {
    8 + 2 + 8 + 2 + count * (8 + 2 + params.ring_bytes())
}

/// A framed, bidirectional message stream.
///
/// Channels built with [`Channel::open`] model the public network and refuse
/// to carry [`Message::KeyIssue`]. [`Channel::confidential`] is the hook for
/// transports that already provide confidentiality (TLS, in-process pipes).
pub struct Channel<S> {
    stream: S,
    confidential: bool,
    max_frame: u32,
    bytes_sent: u64,
    bytes_received: u64,
}

impl<S: Read + Write> Channel<S> {
    pub fn open(stream: S) -> Self {
        Self::with_confidentiality(stream, false)
    }

    pub fn confidential(stream: S) -> Self {
        Self::with_confidentiality(stream, true)
    }

    fn with_confidentiality(stream: S, confidential: bool) -> Self {
        Channel { stream, confidential, max_frame: DEFAULT_MAX_FRAME, bytes_sent: 0, bytes_received: 0 }
    }

    pub fn with_max_frame(mut self, max_frame: u32) -> Self {
        self.max_frame = max_frame;
        self
    }

    pub fn send(&mut self, msg: &Message) -> Result<usize, WireError> {
        if matches!(msg, Message::KeyIssue(_)) && !self.confidential {
            return Err(WireError::ConfidentialityRequired);
        }
        let written = write_frame(&mut self.stream, &msg.to_frame())?;
        self.bytes_sent += written as u64;
        Ok(written)
    }

    pub fn recv(&mut self, params: &SchemeParams) -> Result<Message, WireError> {
        let frame = read_frame(&mut self.stream, self.max_frame)?;
        self.bytes_received += frame.encoded_len() as u64;
        if frame.msg_type == MsgType::KeyIssue && !self.confidential {
            return Err(WireError::ConfidentialityRequired);
        }
        Message::deserialize(&frame, params)
    }

    pub fn bytes_sent(&self) -> u64 {
        self.bytes_sent
    }

    pub fn bytes_received(&self) -> u64 {
        self.bytes_received
    }

    pub fn get_ref(&self) -> &S {
        &self.stream
    }

    pub fn into_inner(self) -> S {
        self.stream
    }
}
