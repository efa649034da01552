use divforms::arith::build_tables;
use divforms::forms::FormTriple;
use divforms::lattice::{lattice_of, rho, rho_bruteforce, rho_lifting_count, rho_prime_power_exponent, rho_upper_bound_exponent, KAPPA};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn test_triples() -> Vec<FormTriple> {
    vec![
        FormTriple::progression(),
        FormTriple::from_coefficients([[2, 1], [1, -1], [1, 3]]).unwrap(),
    ]
}

fn moduli_up_to(n: u64) -> Vec<[u64; 3]> {
    let mut out = Vec::new();
    for a in 1..=n {
        for b in 1..=n / a {
            for c in 1..=n / (a * b) {
                out.push([a, b, c]);
            }
        }
    }
    out
}

#[test]
fn rho_matches_bruteforce() {
    let t = build_tables(1000).unwrap();
    for forms in test_triples() {
        for h in moduli_up_to(200) {
            assert_eq!(
                rho(h, &forms, &t).unwrap(),
                rho_bruteforce(h, &forms).unwrap() as u128,
                "{h:?} {forms:?}"
            );
        }
    }
}

#[test]
fn determinant_times_density() {
    for forms in test_triples() {
        for d in moduli_up_to(200) {
            let lat = lattice_of(d, &forms).unwrap();
            let h = (d[0] * d[1] * d[2]) as u128;
            assert_eq!(lat.determinant * lat.rho.unwrap(), h * h, "{d:?}");
        }
    }
}

#[test]
fn reduced_basis_shape() {
    for forms in test_triples() {
        for d in moduli_up_to(200) {
            let lat = lattice_of(d, &forms).unwrap();
            let n = lat.basis.map(|e| ((e[0] * e[0] + e[1] * e[1]) as f64).sqrt());
            assert!(1.0 <= n[0] && n[0] <= n[1], "{d:?}");
            assert!(n[0] * n[1] <= KAPPA * lat.determinant as f64 + 1e-9, "{d:?}");
        }
    }
}

#[test]
fn random_lattice_vectors_satisfy_congruences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for forms in test_triples() {
        for d in [[2, 3, 5], [4, 4, 4], [12, 1, 9], [7, 11, 2], [8, 6, 3]] {
            let lat = lattice_of(d, &forms).unwrap();
            for _ in 0..100 {
                let (s, t): (i64, i64) = (rng.gen_range(-50..=50), rng.gen_range(-50..=50));
                let v = [s * lat.basis[0][0] + t * lat.basis[1][0], s * lat.basis[0][1] + t * lat.basis[1][1]];
                let vals = forms.eval(v);
                for i in 0..3 {
                    assert_eq!(vals[i] % d[i] as i64, 0, "{d:?} {v:?}");
                }
                assert!(lat.contains(v));
            }
        }
    }
}

#[test]
fn delta_is_maximal() {
    for forms in test_triples() {
        for d in moduli_up_to(60) {
            let lat = lattice_of(d, &forms).unwrap();
            let delta = lat.delta_div as i64;
            let coords = lat.basis.iter().flat_map(|e| e.iter().copied()).collect::<Vec<_>>();
            assert!(coords.iter().all(|c| c % delta == 0));
            for bigger in delta + 1..=2 * delta {
                assert!(coords.iter().any(|c| c % bigger != 0), "{d:?}: δ = {delta} but {bigger} works");
            }
        }
    }
}

#[test]
fn upper_bound_holds_at_bad_primes() {
    for forms in test_triples() {
        for p in [2u64, 3, 5, 7, 11, 13] {
            for e1 in 0..=3 {
                for e2 in 0..=3 {
                    for e3 in 0..=3 {
                        let e = [e1, e2, e3];
                        let r = rho_prime_power_exponent(p, e, &forms).unwrap();
                        let counted = rho_lifting_count(p, e, &forms, 10_000_000).unwrap();
                        assert_eq!(counted, (p as u128).pow(r), "p = {p}, e = {e:?}");
                        if forms.delta() % p == 0 {
                            assert!(r <= rho_upper_bound_exponent(p, e, &forms), "p = {p}, e = {e:?}");
                        }
                    }
                }
            }
        }
    }
}
