//! Randomized oracle tests for the gestalt matcher and the pruned top-1
//! search. The oracles are independent brute-force implementations: the
//! block finder enumerates every (length, a_start, b_start) candidate, and
//! the recursion is re-derived on top of it.

mod common;

use common::{dn, oracle_longest, oracle_total, random_string, ALPHABET8};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regrisk::similarity::{
    longest_match, paper_ratio, symmetric_ratio, total_matches, RatioMode, RegistrantIndex,
};
use regrisk::train::synthetic::random_registrants;

#[test]
fn longest_match_agrees_with_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..2_000 {
        let a = random_string(&mut rng, 12, &ALPHABET8);
        let b = random_string(&mut rng, 12, &ALPHABET8);
        let ac: Vec<char> = a.chars().collect();
        let bc: Vec<char> = b.chars().collect();
        let blk = longest_match(&a, &b);
        let (ea, eb, el) = oracle_longest(&ac, &bc);
        assert_eq!(
            (blk.a_start, blk.b_start, blk.len),
            (ea, eb, el),
            "inputs {a:?} {b:?}"
        );
    }
}

#[test]
fn total_matches_agrees_with_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    for _ in 0..2_000 {
        let a = random_string(&mut rng, 12, &ALPHABET8);
        let b = random_string(&mut rng, 12, &ALPHABET8);
        let ac: Vec<char> = a.chars().collect();
        let bc: Vec<char> = b.chars().collect();
        assert_eq!(total_matches(&a, &b), oracle_total(&ac, &bc), "{a:?} {b:?}");
    }
}

#[test]
fn matcher_symmetry_and_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    for _ in 0..2_000 {
        let a = random_string(&mut rng, 14, &ALPHABET8);
        let b = random_string(&mut rng, 14, &ALPHABET8);
        let m_ab = total_matches(&a, &b);
        let m_ba = total_matches(&b, &a);
        assert_eq!(m_ab, m_ba, "symmetry {a:?} {b:?}");
        assert!(m_ab <= a.chars().count().min(b.chars().count()));
        let pr = paper_ratio(&a, &b);
        let sr = symmetric_ratio(&a, &b);
        assert!((0.0..=1.0).contains(&pr));
        assert!((0.0..=1.0).contains(&sr));
        assert!((pr - paper_ratio(&b, &a)).abs() < 1e-15);
        assert!((sr - symmetric_ratio(&b, &a)).abs() < 1e-15);
        if !a.is_empty() && !b.is_empty() {
            assert_eq!(pr == 1.0, a == b, "paper ratio 1 iff equal: {a:?} {b:?}");
            assert_eq!(
                sr == 1.0,
                a == b,
                "symmetric ratio 1 iff equal: {a:?} {b:?}"
            );
        }
    }
}

#[test]
fn frequency_bound_is_valid() {
    // total matched chars can never exceed the per-slot frequency overlap
    fn freq(s: &str) -> [u32; 38] {
        let mut f = [0u32; 38];
        for c in s.chars() {
            let slot = match c {
                'a'..='z' => c as usize - 'a' as usize,
                '0'..='9' => 26 + c as usize - '0' as usize,
                '-' => 36,
                _ => 37,
            };
            f[slot] += 1;
        }
        f
    }
    let alphabet: Vec<char> = "abc129-@".chars().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    for _ in 0..2_000 {
        let a = random_string(&mut rng, 14, &alphabet);
        let b = random_string(&mut rng, 14, &alphabet);
        let bound: u32 = freq(&a)
            .iter()
            .zip(freq(&b).iter())
            .map(|(x, y)| x.min(y))
            .sum();
        assert!(
            total_matches(&a, &b) as u32 <= bound,
            "bound violated for {a:?} {b:?}"
        );
    }
}

#[test]
fn pruned_best_match_equals_exhaustive_scan() {
    let registrants = random_registrants(2_000, 131);
    let index = RegistrantIndex::build(registrants);
    let queries = random_registrants(60, 137);
    for mode in [RatioMode::Paper, RatioMode::Symmetric] {
        for q in &queries {
            let (fast, _) = index.best_match_with_stats(q, mode);
            let slow = index.exhaustive_best_match(q, mode);
            assert_eq!(fast.score, slow.score, "query {q} mode {mode}");
            assert_eq!(
                fast.matched_registrant, slow.matched_registrant,
                "query {q} mode {mode}"
            );
            assert_eq!(fast.total_matched, slow.total_matched);
        }
    }
}

#[test]
fn pruned_search_skips_most_candidates() {
    let registrants = random_registrants(2_000, 139);
    let index = RegistrantIndex::build(registrants);
    let queries = random_registrants(60, 149);
    let mut scored = 0usize;
    let mut candidates = 0usize;
    for q in &queries {
        let (_, stats) = index.best_match_with_stats(q, RatioMode::Paper);
        scored += stats.scored;
        candidates += stats.candidates;
    }
    let frac = scored as f64 / candidates as f64;
    assert!(
        frac <= 0.5,
        "pruning too weak: scored {frac:.3} of candidates"
    );
}

#[test]
fn ties_resolve_identically_on_both_paths() {
    // Dense tie territory: many short names over a tiny alphabet.
    let mut names = Vec::new();
    for a in ['a', 'b', 'c'] {
        for b in ['a', 'b', 'c'] {
            names.push(dn(&format!("{a}{b}")));
            for c in ['a', 'b', 'c'] {
                names.push(dn(&format!("{a}{b}{c}")));
            }
        }
    }
    let index = RegistrantIndex::build(names);
    let mut rng = ChaCha8Rng::seed_from_u64(151);
    let alphabet: Vec<char> = "abcd".chars().collect();
    for _ in 0..300 {
        let len = rng.random_range(1..=5);
        let q: String = (0..len)
            .map(|_| alphabet[rng.random_range(0..alphabet.len())])
            .collect();
        let q = dn(&q);
        for mode in [RatioMode::Paper, RatioMode::Symmetric] {
            let fast = index.best_match(&q, mode);
            let slow = index.exhaustive_best_match(&q, mode);
            assert_eq!(
                fast.matched_registrant, slow.matched_registrant,
                "query {q} mode {mode}"
            );
            assert_eq!(fast.score, slow.score);
        }
    }
}

#[test]
fn index_build_count_matches_dedup() {
    let mut names = random_registrants(5_000, 157);
    // duplicate a slice of them
    let dupes: Vec<_> = names[..500].to_vec();
    names.extend(dupes);
    let index = RegistrantIndex::build(names);
    assert_eq!(index.len(), 5_000);
}
