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

//! Additively homomorphic aggregation of real-valued vectors for cross-silo
//! federated learning.
//!
//! Clients encrypt under distinct sparse ternary keys and a public polynomial
//! that every party derives from a shared round seed. An untrusted aggregator
//! adds ciphertexts; only the complete sum decrypts, in one step, under the
//! joint key `s = sum(s_i)`.
//!
//! - [`params`]: scheme parameters and packing geometry.
//! - [`ring`]: exact arithmetic in `Z_q[X]/(X^n + 1)` plus samplers.
//! - [`prg`]: per-round public polynomial expansion.
//! - [`codec`]: canonical-embedding encoding and bit-slot packing.
//! - [`eshe`]: the additively homomorphic scheme itself.
//! - [`wire`]: message serialization and framing.
//! - [`fedsim`]: federated training over the scheme, in memory or over TCP.
//! - [`fixtures`]: reference artifacts behind the golden files.

pub mod codec;
pub mod eshe;
pub mod fedsim;
pub mod fixtures;
pub mod params;
pub mod prg;
pub mod ring;
pub mod wire;

pub use params::{Overrides, ParamsError, SchemeParams};
