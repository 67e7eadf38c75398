//! Alignment against exhaustive enumeration: cost, validity, and the
//! documented tie rule on random short pairs.

mod common;

use corrkit::align::{align, edit_distance};
use corrkit::corpus::TokenSeq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_pair(rng: &mut ChaCha8Rng, max_len: usize, alphabet: u32) -> (TokenSeq, TokenSeq) {
    let la = rng.gen_range(0..=max_len);
    let lb = rng.gen_range(0..=max_len);
    let a: TokenSeq = (0..la).map(|_| 4 + rng.gen_range(0..alphabet)).collect();
    let b: TokenSeq = (0..lb).map(|_| 4 + rng.gen_range(0..alphabet)).collect();
    (a, b)
}

#[test]
fn distance_matches_enumeration_on_short_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..300 {
        let (a, b) = random_pair(&mut rng, 6, 3);
        assert_eq!(
            edit_distance(&a, &b),
            common::brute_distance(&a, &b),
            "a {a:?} b {b:?}"
        );
    }
}

#[test]
fn script_cost_validity_and_tie_rule_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for _ in 0..300 {
        let (a, b) = random_pair(&mut rng, 6, 3);
        let pair = align(&a, &b).unwrap();
        common::assert_script_valid(&a, &b, &pair.script);
        assert_eq!(pair.cost(), common::brute_distance(&a, &b));
        assert_eq!(
            pair.script,
            common::brute_canonical_script(&a, &b),
            "a {a:?} b {b:?}"
        );
    }
}

#[test]
fn distance_symmetry_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for _ in 0..100 {
        let (a, b) = random_pair(&mut rng, 12, 5);
        assert_eq!(edit_distance(&a, &b), edit_distance(&b, &a));
    }
}
