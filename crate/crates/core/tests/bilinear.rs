use divforms::bilinear::{count_n, count_n0, count_n_with, reduction_check};
use proptest::prelude::*;

/// `N₀(X)` solving for `u₀`; `sign` restricts `v₁, v₂` to positive values.
fn n0_oracle(x: i64, positive_v: bool) -> u128 {
    let mut n = 0;
    let mut v0 = 1;
    while v0 * v0 <= x {
        let u = x / v0;
        let lo = if positive_v { 1 } else { -v0 };
        for v1 in (lo..=v0).filter(|&v| v != 0) {
            for v2 in (lo..=v0).filter(|&v| v != 0) {
                for u1 in (-u..=u).filter(|&v| v != 0) {
                    for u2 in (-u..=u).filter(|&v| v != 0) {
                        let s = u1 * v1 + u2 * v2;
                        if s != 0 && s % v0 == 0 && (s / v0).abs() <= u {
                            n += 1;
                        }
                    }
                }
            }
        }
        v0 += 1;
    }
    n
}

#[test]
fn n0_matches_oracle() {
    for x in 1..=50u64 {
        assert_eq!(count_n0(x).unwrap().n0, n0_oracle(x as i64, false), "X = {x}");
    }
}

#[test]
fn n0_sign_symmetry() {
    for x in [5i64, 16, 31, 50] {
        let full = n0_oracle(x, false);
        assert_eq!(full, 4 * n0_oracle(x, true), "X = {x}");
        assert_eq!(full % 8, 0);
    }
}

#[test]
fn reduction_is_exact() {
    for x in (1..=200).chain([257, 500, 999, 1000]) {
        let c = reduction_check(x).unwrap();
        assert_eq!(c.n0, 8 * c.n1 + c.boundary_terms, "X = {x}");
    }
}

#[test]
fn primitivity_removes_pairs() {
    for b in [64.0, 1e3, 1e4, 1e5] {
        let prim = count_n(b).unwrap().n_of_b;
        let all = count_n_with(b, false).unwrap().n_of_b;
        assert!(prim > 0 && all > prim, "B = {b}: {prim} vs {all}");
    }
}

#[test]
fn n_of_b_is_nondecreasing_on_a_sweep() {
    let mut last = 0;
    for b in 1..=3000u32 {
        let n = count_n(f64::from(b)).unwrap().n_of_b;
        assert!(n >= last, "B = {b}");
        last = n;
    }
}

#[test]
fn oversized_inputs_are_rejected() {
    assert!(count_n0(0).is_err());
    assert!(count_n0(1_000_000).is_err());
    assert!(count_n(1e12).is_err());
}

proptest! {
    #[test]
    fn n_of_b_monotone(a in 0.0f64..5e4, extra in 0.0f64..5e3) {
        prop_assert!(count_n(a).unwrap().n_of_b <= count_n(a + extra).unwrap().n_of_b);
    }
}
