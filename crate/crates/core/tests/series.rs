use divforms::arith::{factor_trial, Rational};
use divforms::forms::FormTriple;
use divforms::series::{
    c1_constant, c1_prime_closed_local, c1_prime_constant, c1_prime_local, eq_c_constant, f_mu_closed_form, f_mu_convolution, f_of,
    m_of_nu, rational_to_f64, s_of_z, s_of_z_truncated, sigma_p, sigma_p_general, sigma_progression, tau_product_local, DEFAULT_NU_CAP,
};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

const SMALL_PRIMES: [u64; 15] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47];

fn to_f64(q: Rational) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

#[test]
fn progression_factors_match_truncated_sum() {
    let forms = FormTriple::progression();
    assert_eq!(sigma_progression(2), Rational::new(4, 3));
    for p in SMALL_PRIMES {
        let t = sigma_p_general(p, [1, 1, 1], [1, 1, 1], &forms, DEFAULT_NU_CAP).unwrap();
        let closed = to_f64(sigma_progression(p));
        assert!((t.value - closed).abs() < 1e-10, "p = {p}: {} vs {closed}", t.value);
        assert!(t.truncation_error < 1e-12);
    }
}

#[test]
fn correlation_constants_multiply() {
    let c1 = c1_constant(100_000).unwrap();
    let c1p = c1_prime_constant(100_000).unwrap();
    let c = eq_c_constant(100_000).unwrap();
    let (v, lo, hi) = c1.times(&c1p);
    assert!(lo <= c.hi && c.lo <= hi, "[{lo}, {hi}] vs [{}, {}]", c.lo, c.hi);
    assert!((v - c.value).abs() <= (hi - lo) + c.width());
}

#[test]
fn c1_prime_local_matches_product_form() {
    for p in SMALL_PRIMES {
        let lf = c1_prime_local(p);
        assert!((lf.value - to_f64(c1_prime_closed_local(p))).abs() < 1e-12, "p = {p}");
    }
}

#[test]
fn f_mu_roundtrip() {
    for h in 1..=10_000u64 {
        let fac = factor_trial(h).unwrap();
        let mut s = BigRational::zero();
        for d in fac.divisors() {
            let g = factor_trial(d)
                .unwrap()
                .factors
                .iter()
                .fold(BigRational::one(), |acc, &(p, k)| acc * f_mu_convolution(p, k).unwrap());
            s += g;
        }
        assert_eq!(s, f_of(h).unwrap(), "h = {h}");
    }
    assert_eq!(f_of(1).unwrap(), BigRational::one());
}

#[test]
fn f_mu_closed_forms_and_decay() {
    let mut worst: f64 = 0.0;
    for p in [2u64, 3, 5, 7, 11, 13] {
        for k in 1..=10 {
            let conv = f_mu_convolution(p, k).unwrap();
            if k <= 6 {
                assert_eq!(conv, f_mu_closed_form(p, k).unwrap(), "p = {p}, k = {k}");
            }
            let pk = BigRational::from_integer(BigInt::from(p).pow(k));
            worst = worst.max(rational_to_f64(&(conv * pk)).abs() / k as f64);
        }
    }
    assert!(worst <= 6.0, "fitted constant {worst}");
}

#[test]
fn generating_series_from_below() {
    for z in [0.5, 1.0 / 3.0, 0.2, 0.9] {
        let closed = s_of_z(z).unwrap();
        let mut last = 0.0;
        for n in 0..=30 {
            let partial = s_of_z_truncated(z, n);
            assert!(partial >= last && partial <= closed * (1.0 + 1e-15), "z = {z}, n = {n}");
            last = partial;
        }
        if z < 0.6 {
            assert!((closed - s_of_z_truncated(z, 40)).abs() < 1e-9, "z = {z}");
        }
    }
    assert_eq!(m_of_nu([0, 0, 0]), 0);
}

/// Local factor of the main term for `∑ τ(L₁L₂L₃)` rebuilt from the
/// inclusion-exclusion over `e ∈ {0,1}³` used to reduce `τ(n₁n₂n₃)` to sums
/// of the shape `S(X; d, D)`.
fn reduction_local(p: u64, forms: &FormTriple) -> f64 {
    let mut s = 0.0;
    for e1 in 0..=1u32 {
        for e2 in 0..=1u32 {
            if e1 + e2 == 2 {
                continue;
            }
            for e3 in 0..=1u32 {
                let ks: &[u32] = if e1 + e2 == 0 { &[0] } else { &[0, 1] };
                for &k in ks {
                    let d = [e2 + e3, e1 + e3, e1 + e2].map(|v| p.pow(v));
                    let dd = [(e2 + e3).max(k), (e1 + e3).max(k), e1 + e2].map(|v| p.pow(v));
                    let sign = if (e1 + e2 + e3 + k) % 2 == 0 { 1.0 } else { -1.0 };
                    let v = sigma_p_general(p, d, dd, forms, DEFAULT_NU_CAP).unwrap().value;
                    s += sign * v / 2f64.powi(k as i32);
                }
            }
        }
    }
    s
}

#[test]
fn tau_product_local_matches_reduction() {
    let triples = [
        FormTriple::coordinate_sum(),
        FormTriple::from_coefficients([[2, 1], [1, -1], [1, 3]]).unwrap(),
        FormTriple::progression(),
    ];
    for forms in &triples {
        for p in [2u64, 3, 5, 7, 11] {
            let want = to_f64(tau_product_local(p, forms));
            let got = reduction_local(p, forms);
            assert!((got - want).abs() < 1e-10, "p = {p}: {got} vs {want}");
        }
    }
}

#[test]
fn sigma_p_positive_with_small_error() {
    let forms = FormTriple::from_coefficients([[2, 1], [1, -1], [1, 3]]).unwrap();
    for p in [2u64, 3, 5, 7, 11, 13] {
        let lf = sigma_p(p, &forms).unwrap();
        assert!(lf.value > 0.0 && lf.truncation_error < 1e-12, "p = {p}");
    }
}
