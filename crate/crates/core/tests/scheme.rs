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

//! Homomorphic sum identity and the real-valued pipeline around it.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use esafl_core::codec::{Codec, EncodedPoly, RealVector, SlotGeometry};
use esafl_core::eshe::{decrypt, encrypt, eval_add, keygen};
use esafl_core::prg::round_public;
use esafl_core::{Overrides, SchemeParams};

fn params(log_n: u32, clients: usize, log_q0: u32) -> SchemeParams {
    let o = Overrides { ternary_weight: Some((1usize << log_n).min(64) / 2), ..Default::default() };
    SchemeParams::setup(1 << log_n, 478, 460, log_q0, clients, &o).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn aggregate_decrypts_to_plaintext_sum(log_n in 3u32..=7, clients in 2usize..=9, seed in any::<u64>(), t in 0u64..50) {
        let p = params(log_n, clients, 16);
        let codec = Codec::new(&p);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let km = keygen(&p, &mut rng).unwrap();
        let len = rng.random_range(0..=2 * p.capacity());
        let count = p.ciphertexts_for(len);
        let inputs: Vec<_> = (0..clients)
            .map(|_| codec.ecd_pack(&RealVector::new((0..len).map(|_| rng.random()).collect()).unwrap()).unwrap())
            .collect();
        let expected = codec.ep_eval(&inputs).unwrap();
        for j in 0..count {
            let a = round_public(t, j as u64, &km.a0, &km.seed, &p).unwrap();
            let cts: Vec<_> = inputs
                .iter()
                .zip(&km.enc_keys)
                .map(|(m, key)| encrypt(&p, t, &a, key, &m[j], &mut rng).unwrap())
                .collect();
            let sum = eval_add(&p, &cts).unwrap();
            prop_assert_eq!(&decrypt(&p, &a, &km.dec_key, &sum).unwrap(), &expected[j]);
        }
    }

    #[test]
    fn decoded_aggregate_is_within_codec_bound(log_n in 3u32..=9, clients in 2usize..=9, seed in any::<u64>()) {
        let p = params(log_n, clients, 16);
        let codec = Codec::new(&p);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let len = p.reals_per_poly() * 3 + 1;
        let vs: Vec<Vec<f64>> = (0..clients).map(|_| (0..len).map(|_| rng.random()).collect()).collect();
        let packed: Vec<_> = vs.iter().map(|v| codec.ecd_pack(&RealVector::new(v.clone()).unwrap()).unwrap()).collect();
        let sum = codec.ep_eval(&packed).unwrap();
        let out = codec.dcd_unpk(&sum, clients, len).unwrap();
        let bound = clients as f64 * codec.roundtrip_bound();
        for (j, got) in out.iter().enumerate() {
            let want: f64 = vs.iter().map(|v| v[j]).sum();
            prop_assert!((got - want).abs() <= bound);
        }
    }

    #[test]
    fn pack_unpack_identity(fields in proptest::collection::vec(0u64..(1 << 16), 22 * 16)) {
        let p = params(4, 9, 16);
        let codec = Codec::new(&p);
        let polys: Vec<EncodedPoly> = fields.chunks(16).map(|c| EncodedPoly::new(c.to_vec())).collect();
        let packed = codec.pack(&polys).unwrap();
        let back = codec.unpack(&packed).unwrap();
        prop_assert_eq!(&back[..22], &polys[..]);
        prop_assert!(back[22].coeffs().iter().all(|&c| c == 0));
    }
}

#[test]
fn carries_stay_inside_their_field() {
    for (pad, log_q0, slots) in [(1u32, 3u32, 4u32), (2, 4, 3), (4, 16, 23), (3, 8, 5)] {
        let g = SlotGeometry { slots, pad, log_q0 };
        let max = (1u64 << log_q0) - 1;
        for count in 1..=(1u64 << pad) {
            let one = g.pack_coeff(&vec![max; slots as usize]);
            let mut acc = esafl_core::ring::Wide::ZERO;
            for _ in 0..count {
                acc.add_assign(&one);
            }
            assert_eq!(g.unpack_coeff(&acc), vec![count * max; slots as usize], "pad {pad} count {count}");
        }
    }
}
