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

//! Ring arithmetic against an arbitrary-precision schoolbook oracle.

use num_bigint::{BigInt, BigUint, Sign};
use proptest::prelude::*;

use esafl_core::ring::{RingElem, SmallPoly, SparseTernaryKey, Wide};

fn to_big(w: &Wide) -> BigUint {
    let mut bytes = [0u8; 64];
    w.write_le(&mut bytes);
    BigUint::from_bytes_le(&bytes)
}

fn from_big(v: &BigUint) -> Wide {
    Wide::from_le(&v.to_bytes_le())
}

fn reduce(v: &BigInt, log_q: u32) -> BigUint {
    let q = BigInt::from(1u8) << log_q;
    let r = ((v % &q) + &q) % &q;
    r.to_biguint().expect("non-negative")
}

/// `a * b mod (X^n + 1, 2^log_q)` by the O(n^2) definition.
fn schoolbook(a: &[BigUint], b: &[i64], log_q: u32) -> Vec<BigUint> {
    let n = a.len();
    let mut acc = vec![BigInt::from(0); n];
    for (i, ai) in a.iter().enumerate() {
        let ai = BigInt::from_biguint(Sign::Plus, ai.clone());
        for (j, &bj) in b.iter().enumerate() {
            let term = &ai * bj;
            if i + j < n {
                acc[i + j] += term;
            } else {
                acc[i + j - n] -= term;
            }
        }
    }
    acc.iter().map(|v| reduce(v, log_q)).collect()
}

fn big_coeffs(e: &RingElem) -> Vec<BigUint> {
    e.coeffs().iter().map(to_big).collect()
}

fn elem_strategy() -> impl Strategy<Value = (u32, Vec<[u64; 8]>)> {
    (1u32..=4, prop_oneof![Just(1u32), Just(8), Just(63), Just(64), Just(65), Just(200), Just(478), Just(512)])
        .prop_flat_map(|(log_n, log_q)| (Just(log_q), proptest::collection::vec(any::<[u64; 8]>(), 1 << log_n)))
}

fn make(log_q: u32, raw: &[[u64; 8]]) -> RingElem {
    RingElem::from_coeffs_reduced(log_q, raw.iter().map(|l| Wide::from_limbs(*l)).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn add_sub_neg_match_bigint((log_q, raw) in elem_strategy(), seed in any::<[u64; 8]>()) {
        let n = raw.len();
        let a = make(log_q, &raw);
        let other: Vec<[u64; 8]> = (0..n).map(|i| seed.map(|s| s.rotate_left(i as u32 * 7) ^ i as u64)).collect();
        let b = make(log_q, &other);
        let q = BigUint::from(1u8) << log_q;
        let (ba, bb) = (big_coeffs(&a), big_coeffs(&b));
        let sum = a.add(&b).unwrap();
        let diff = a.sub(&b).unwrap();
        let neg = a.neg();
        for i in 0..n {
            prop_assert_eq!(to_big(&sum.coeffs()[i]), (&ba[i] + &bb[i]) % &q);
            prop_assert_eq!(to_big(&diff.coeffs()[i]), (&ba[i] + &q - &bb[i]) % &q);
            prop_assert_eq!(to_big(&neg.coeffs()[i]), (&q - &ba[i]) % &q);
        }
    }

    #[test]
    fn sparse_product_matches_schoolbook((log_q, raw) in elem_strategy(), signs in proptest::collection::vec(-1i64..=1, 16)) {
        let n = raw.len();
        let a = make(log_q, &raw);
        let b: Vec<i64> = signs[..n].to_vec();
        let plus = (0..n as u32).filter(|&i| b[i as usize] == 1).collect();
        let minus = (0..n as u32).filter(|&i| b[i as usize] == -1).collect();
        let key = SparseTernaryKey::new(n, plus, minus).unwrap();
        let got = a.mul_sparse(&key).unwrap();
        prop_assert_eq!(big_coeffs(&got), schoolbook(&big_coeffs(&a), &b, log_q));
    }

    #[test]
    fn small_product_matches_schoolbook((log_q, raw) in elem_strategy(), small in proptest::collection::vec(-40i64..=40, 16)) {
        let n = raw.len();
        let a = make(log_q, &raw);
        let b = small[..n].to_vec();
        let s = SmallPoly::new(b.clone(), 40).unwrap();
        let got = a.mul_small(&s).unwrap();
        prop_assert_eq!(big_coeffs(&got), schoolbook(&big_coeffs(&a), &b, log_q));
    }

    #[test]
    fn reduction_and_lift((log_q, raw) in elem_strategy(), cut in 1u32..512u32) {
        let a = make(log_q, &raw);
        let log_p = cut.min(log_q);
        let p = BigUint::from(1u8) << log_p;
        let low = a.mod_p(log_p).unwrap();
        prop_assert_eq!(low.log_q(), log_p);
        for (x, y) in a.coeffs().iter().zip(low.coeffs()) {
            prop_assert_eq!(to_big(y), to_big(x) % &p);
        }
        let back = low.lift(log_q).unwrap();
        prop_assert_eq!(big_coeffs(&back), big_coeffs(&low));
    }

    #[test]
    fn conversion_helpers_roundtrip(raw in any::<[u64; 8]>()) {
        let w = Wide::from_limbs(raw);
        prop_assert_eq!(from_big(&to_big(&w)), w);
    }
}

#[test]
fn rotation_by_x_is_negacyclic() {
    let log_q = 478;
    let a = RingElem::from_u64s(log_q, &[1, 2, 3, 4]).unwrap();
    let x = SparseTernaryKey::new(4, vec![1], vec![]).unwrap();
    let got = a.mul_sparse(&x).unwrap();
    let minus_four = Wide::from_u64(4).wrapping_neg().masked(log_q);
    assert_eq!(got.coeffs()[0], minus_four);
    assert_eq!(&got.coeffs()[1..], &[Wide::from_u64(1), Wide::from_u64(2), Wide::from_u64(3)]);
}
