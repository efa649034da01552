//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero only when a criterion's status differs from the expected one.
//!
//! Run with `cargo test --release -p divforms-core --test acceptance`.

use std::io::Write;
use std::time::{Duration, Instant};

use divforms::arith::{build_tables, factor_trial, Rational};
use divforms::bilinear::{count_n, count_n0};
use divforms::experiment::{run_experiment, ComparisonReport, ExperimentContext, ExperimentName, GridSpec};
use divforms::forms::{FormTriple, Region};
use divforms::lattice::{rho, rho_bruteforce, rho_lifting_count, rho_upper_bound_exponent};
use divforms::report::to_json;
use divforms::series::{
    c0_constant, c1_constant, c1_prime_constant, eq_c_constant, f_mu_closed_form, f_mu_convolution, s_of_z, s_of_z_truncated, sigma_p,
    sigma_p_general, sigma_progression, tau_product_constant, theorem4_constant,
};
use divforms::sums::tau_product_identity;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

const PRIME_CUT: u64 = 100_000;

/// Criteria that cannot hold as stated; the reason is printed with the result.
const EXPECTED_FAILURES: [(u32, &str); 2] = [
    (
        4,
        "the [0,30]³ truncation at z = 1/2 leaves a tail of 1.68e-8; the tolerance is first met at ν ≤ 35",
    ),
    (
        7,
        "∏σ_p is the constant of ∑τ(L₁)τ(L₂)τ(L₃); T(X) = ∑τ(L₁L₂L₃) has local factors (1−1/p)³(1+3/(p−1)+Σλᵢ)",
    ),
];

#[derive(Clone, Copy, PartialEq)]
enum Scale {
    Full,
    /// Criterion 7 stops at X = 2¹⁴; everything else is unchanged.
    Reduced,
}

struct Outcome {
    pass: bool,
    detail: String,
    /// Everything the criterion computed, for the determinism check.
    artifact: Value,
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

fn test_triples() -> [FormTriple; 2] {
    [
        FormTriple::progression(),
        FormTriple::from_coefficients([[2, 1], [1, -1], [1, 3]]).unwrap(),
    ]
}

fn to_f64(q: Rational) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

fn c1_rho() -> Outcome {
    let t = build_tables(1000).unwrap();
    let mut mismatches = 0;
    let mut values = Vec::new();
    for forms in test_triples() {
        for h in moduli_up_to(200) {
            let a = rho(h, &forms, &t).unwrap();
            let b = rho_bruteforce(h, &forms).unwrap() as u128;
            mismatches += usize::from(a != b);
            values.push(a.to_string());
        }
    }
    Outcome {
        pass: mismatches == 0,
        detail: format!("{} moduli triples, {mismatches} mismatches", values.len()),
        artifact: json!(values.join(",")),
    }
}

fn c2_prime_power_density() -> Outcome {
    let triples = [test_triples()[0].clone(), test_triples()[1].clone(), FormTriple::coordinate_sum()];
    let (mut exact_checked, mut bound_checked, mut bad) = (0, 0, Vec::new());
    let mut values = Vec::new();
    for forms in &triples {
        let l = forms.content();
        for p in [2u64, 3, 5, 7, 11, 13] {
            let good = forms.delta() % p != 0 && l.iter().all(|&x| x % p != 0);
            for e1 in 0..=3u32 {
                for e2 in 0..=3u32 {
                    for e3 in 0..=3u32 {
                        let e = [e1, e2, e3];
                        let count = rho_lifting_count(p, e, forms, 50_000_000).unwrap();
                        values.push(count.to_string());
                        if good {
                            let mut s = e;
                            s.sort_unstable();
                            exact_checked += 1;
                            if count != (p as u128).pow(2 * s[0] + s[1] + s[2]) {
                                bad.push(format!("p = {p}, e = {e:?}"));
                            }
                        } else if forms.delta() % p == 0 {
                            bound_checked += 1;
                            if count > (p as u128).pow(rho_upper_bound_exponent(p, e, forms)) {
                                bad.push(format!("bound at p = {p}, e = {e:?}"));
                            }
                        }
                    }
                }
            }
        }
    }
    Outcome {
        pass: bad.is_empty(),
        detail: format!("{exact_checked} closed-form cases, {bound_checked} bound cases, failures {bad:?}"),
        artifact: json!(values.join(",")),
    }
}

fn c3_local_factors() -> Outcome {
    let forms = FormTriple::progression();
    let two = sigma_p(2, &forms).unwrap();
    let exact_two = two.exact_value() == Some(Rational::new(4, 3)) && sigma_progression(2) == Rational::new(4, 3);
    let mut worst: f64 = 0.0;
    let mut values = Vec::new();
    for p in (2..=50u64).filter(|&p| factor_trial(p).unwrap().factors.len() == 1 && factor_trial(p).unwrap().factors[0].1 == 1) {
        let pi = p as i128;
        let closed = if p == 2 {
            Rational::new(4, 3)
        } else {
            // (1+1/p)⁻¹(1+1/p+1/p²)
            Rational::new(pi * pi + pi + 1, pi * (pi + 1))
        };
        assert_eq!(closed, sigma_progression(p));
        let t = sigma_p_general(p, [1, 1, 1], [1, 1, 1], &forms, 25).unwrap();
        worst = worst.max((t.value - to_f64(closed)).abs());
        values.push(json!([p, t.value]));
    }
    Outcome {
        pass: exact_two && worst < 1e-10,
        detail: format!("σ₂ = 4/3 exactly: {exact_two}; max |truncated − closed| = {worst:.3e} over p ≤ 50"),
        artifact: json!(values),
    }
}

fn c4_generating_identity() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, z) in [("1/2", 0.5), ("1/3", 1.0 / 3.0), ("1/5", 0.2)] {
        let gap = (s_of_z_truncated(z, 30) - s_of_z(z).unwrap()).abs();
        pass &= gap <= 1e-9;
        parts.push(format!("z = {name}: {gap:.3e}"));
    }
    let at_40 = (s_of_z_truncated(0.5, 40) - s_of_z(0.5).unwrap()).abs();
    Outcome {
        pass,
        detail: format!("{}; z = 1/2 with ν ≤ 40: {at_40:.3e}", parts.join(", ")),
        artifact: json!(parts),
    }
}

fn c5_correlation_closed_forms() -> Outcome {
    let mut mismatches = Vec::new();
    for p in [2u64, 3, 5, 7, 11, 13] {
        for k in 1..=6 {
            if f_mu_convolution(p, k).unwrap() != f_mu_closed_form(p, k).unwrap() {
                mismatches.push((p, k));
            }
        }
    }
    let c1 = c1_constant(PRIME_CUT).unwrap();
    let c1p = c1_prime_constant(PRIME_CUT).unwrap();
    let c = eq_c_constant(PRIME_CUT).unwrap();
    let (v, lo, hi) = c1.times(&c1p);
    let gap = (v - c.value).abs();
    let allowed = (hi - lo) + c.width();
    Outcome {
        pass: mismatches.is_empty() && gap <= allowed,
        detail: format!(
            "closed-form mismatches {mismatches:?}; c₁c₁′ = {v:.12}, c = {:.12}, |diff| = {gap:.2e} ≤ width {allowed:.2e}",
            c.value
        ),
        artifact: json!([v, c.value, lo, hi, c.lo, c.hi]),
    }
}

fn c6_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut bad = 0;
    let mut values = Vec::new();
    for _ in 0..1000 {
        let n: [u64; 3] = [rng.gen_range(1..=1000), rng.gen_range(1..=1000), rng.gen_range(1..=1000)];
        let got = tau_product_identity(n).unwrap();
        bad += usize::from(got != factor_trial(n[0] * n[1] * n[2]).unwrap().tau());
        values.push(got);
    }
    Outcome {
        pass: bad == 0,
        detail: format!("1000 random triples, {bad} mismatches"),
        artifact: json!(values),
    }
}

fn c7_leading_coefficient(scale: Scale) -> Outcome {
    let stop = if scale == Scale::Full { 131072.0 } else { 16384.0 };
    let grid = GridSpec::geometric(1024.0, stop, 2.0).unwrap();
    let ctx = ExperimentContext::default();
    let r = run_experiment(ExperimentName::Theorem1, &grid, &ctx, None).unwrap();
    let ratio = r.ratio.unwrap();
    let pass = (ratio - 1.0).abs() <= 0.25 && r.trend_improving == Some(true);
    let tau_c = tau_product_constant(&ctx.forms, PRIME_CUT).unwrap().value;
    let fitted = r.fitted_leading.unwrap();
    let against_tau: Vec<f64> = r.trend.iter().map(|p| p.value / (tau_c * p.x * p.x * p.x.ln().powi(3))).collect();
    let improving = divforms::experiment::monotone_trend(&against_tau);
    Outcome {
        pass,
        detail: format!(
            "fitted β₀ = {fitted:.4}, ∏σ_p = {:.4}, ratio {ratio:.4}, trend {:?}; against the divisor-product constant {tau_c:.4}: ratio {:.4}, point ratios {} → {}, trend {:?}",
            r.predicted.as_ref().unwrap().value,
            r.trend_improving,
            fitted / tau_c,
            fmt4(against_tau[0]),
            fmt4(*against_tau.last().unwrap()),
            improving
        ),
        artifact: report_value(&r),
    }
}

fn fmt4(x: f64) -> String {
    format!("{x:.4}")
}

fn report_value(r: &ComparisonReport) -> Value {
    serde_json::from_str(&to_json(r).unwrap()).unwrap()
}

fn c8_shifted_correlation() -> Outcome {
    let grid = GridSpec::new(vec![1e4, 1e5]).unwrap();
    let r = run_experiment(ExperimentName::Theorem2, &grid, &ExperimentContext::default(), None).unwrap();
    let q = r.ratios();
    let pass = (0.6..=1.4).contains(&q[1]) && (q[1] - 1.0).abs() < (q[0] - 1.0).abs();
    Outcome {
        pass,
        detail: format!(
            "H = {}: Σ₁/(cXH log³X) = {:.4} at X = 10⁴, {:.4} at X = 10⁵",
            r.trend[1].param.unwrap(),
            q[0],
            q[1]
        ),
        artifact: report_value(&r),
    }
}

fn toward_one(r: &[f64]) -> bool {
    r.windows(2).all(|w| (w[1] - 1.0).abs() < (w[0] - 1.0).abs())
}

fn c9_bilinear() -> Outcome {
    let mut reduction_failures = Vec::new();
    for x in 1..=1000 {
        let c = count_n0(x).unwrap();
        if c.n0 != 8 * c.n1 + c.boundary_terms {
            reduction_failures.push(x);
        }
    }
    let c0 = c0_constant(PRIME_CUT).unwrap().value;
    let n0: Vec<(u64, u128, f64)> = [100u64, 1000, 10000]
        .iter()
        .map(|&x| {
            let n = count_n0(x).unwrap().n0;
            let xf = x as f64;
            (x, n, n as f64 / (8.0 * c0 * xf * xf * xf.ln()))
        })
        .collect();
    let c = theorem4_constant(PRIME_CUT).unwrap().value;
    let nb: Vec<(f64, u128, f64)> = [1e4, 1e5, 1e6]
        .iter()
        .map(|&b| {
            let n = count_n(b).unwrap().n_of_b;
            (b, n, n as f64 / (c * b * b.ln()))
        })
        .collect();
    let r0: Vec<f64> = n0.iter().map(|v| v.2).collect();
    let rb: Vec<f64> = nb.iter().map(|v| v.2).collect();
    let pass =
        reduction_failures.is_empty() && (0.5..=1.5).contains(&r0[2]) && toward_one(&r0) && (0.5..=1.5).contains(&rb[2]) && toward_one(&rb);
    Outcome {
        pass,
        detail: format!(
            "reduction failures {reduction_failures:?}; N₀/(8c₀X²log X) = {}; N(B)/(cB log B) = {}",
            r0.iter().map(|&v| fmt4(v)).collect::<Vec<_>>().join(", "),
            rb.iter().map(|&v| fmt4(v)).collect::<Vec<_>>().join(", ")
        ),
        artifact: json!({
            "n0": n0.iter().map(|v| json!([v.0, v.1.to_string(), v.2])).collect::<Vec<_>>(),
            "n_of_b": nb.iter().map(|v| json!([v.0, v.1.to_string(), v.2])).collect::<Vec<_>>(),
        }),
    }
}

fn c10_lod() -> Outcome {
    let grid = GridSpec::new(vec![256.0, 1024.0, 4096.0]).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    let mut artifacts = Vec::new();
    for forms in [FormTriple::coordinate_sum(), FormTriple::progression()] {
        let ctx = ExperimentContext {
            forms: forms.clone(),
            region: Region::unit_square(),
            ..Default::default()
        };
        let r = run_experiment(ExperimentName::Lod, &grid, &ctx, None).unwrap();
        pass &= r.trend_improving == Some(true);
        parts.push(format!(
            "{:?}: {}",
            forms.coefficients(),
            r.ratios().iter().map(|&v| format!("{v:.3e}")).collect::<Vec<_>>().join(" > ")
        ));
        artifacts.push(report_value(&r));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
        artifact: json!(artifacts),
    }
}

fn run_criterion(n: u32, scale: Scale) -> Outcome {
    match n {
        1 => c1_rho(),
        2 => c2_prime_power_density(),
        3 => c3_local_factors(),
        4 => c4_generating_identity(),
        5 => c5_correlation_closed_forms(),
        6 => c6_identity(),
        7 => c7_leading_coefficient(scale),
        8 => c8_shifted_correlation(),
        9 => c9_bilinear(),
        10 => c10_lod(),
        _ => unreachable!(),
    }
}

fn time_limit(n: u32) -> Duration {
    Duration::from_secs(match n {
        1 => 30,
        2 => 60,
        3 | 5 => 10,
        4 => 1,
        6 => 30,
        7 | 9 => 900,
        8 | 10 => 600,
        _ => 3600,
    })
}

fn c11_determinism(full: &[Value]) -> Outcome {
    let mut runs = Vec::new();
    for threads in [1, 2, 8] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let texts: Vec<String> = pool.install(|| {
            (1..=10)
                .map(|n| to_json(&run_criterion(n, Scale::Reduced).artifact).unwrap())
                .collect()
        });
        runs.push(texts);
    }
    let mut differing = Vec::new();
    for n in 0..10 {
        if runs[1][n] != runs[0][n] || runs[2][n] != runs[0][n] {
            differing.push(n + 1);
        }
    }
    // full-scale outputs from the default pool, except criterion 7 which is only rerun reduced
    let mut default_pool = Vec::new();
    for n in (0..10).filter(|&n| n != 6) {
        if to_json(&full[n]).unwrap() != runs[0][n] {
            default_pool.push(n + 1);
        }
    }
    Outcome {
        pass: differing.is_empty() && default_pool.is_empty(),
        detail: format!(
            "criteria 1–10 (7 at X ≤ 2¹⁴) rerun with 1, 2, 8 workers; differing: {differing:?}; differing from the default-pool run: {default_pool:?}"
        ),
        artifact: Value::Null,
    }
}

fn main() {
    let mut out = std::io::stdout().lock();
    let mut unexpected = Vec::new();
    let mut artifacts = Vec::new();
    let mut report = |n: u32, o: &Outcome, elapsed: Option<Duration>, unexpected: &mut Vec<u32>| {
        let expected_failure = EXPECTED_FAILURES.iter().find(|(k, _)| *k == n);
        let status = if o.pass { "PASS" } else { "FAIL" };
        let timing = elapsed.map_or(String::new(), |e| format!(" [{:.1}s]", e.as_secs_f64()));
        writeln!(out, "criterion {n:>2} {status}{timing}: {}", o.detail).unwrap();
        if let Some((_, why)) = expected_failure {
            writeln!(out, "             expected to fail as stated: {why}").unwrap();
        }
        if o.pass == expected_failure.is_some() {
            unexpected.push(n);
        }
    };
    for n in 1..=10 {
        let start = Instant::now();
        let mut o = run_criterion(n, Scale::Full);
        let elapsed = start.elapsed();
        if elapsed > time_limit(n) {
            o.pass = false;
            o.detail += &format!("; over the {}s budget", time_limit(n).as_secs());
        }
        report(n, &o, Some(elapsed), &mut unexpected);
        artifacts.push(o.artifact);
    }
    let o = c11_determinism(&artifacts);
    report(11, &o, None, &mut unexpected);
    if !unexpected.is_empty() {
        writeln!(out, "unexpected status for criteria {unexpected:?}").unwrap();
        std::process::exit(1);
    }
}
