//! Direct evaluation of the divisor sums: `T(X)`, `S(X; d, D)`, the
//! eight-way `τ±` split, `T_h(X)` and `Σ₁`, `M(T)` and the discrepancy
//! experiment behind the level of distribution.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{divisors, factor_trial, ArithTables, Rational, Triple};
use crate::error::{Error, Result};
use crate::forms::{r_prime, FormTriple, HalfPlane, Region};
use crate::lattice::{lattice_of, rho};
use crate::series::Neumaier;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SumResult {
    pub value: u128,
    pub points_visited: u64,
    #[serde(skip)]
    pub elapsed: Duration,
}

/// Treatment of lattice points where some `Lᵢ(x) ≤ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValuePolicy {
    /// Every value must be positive.
    #[default]
    Positive,
    /// `τ(−n) = τ(n)`; points with a zero value are skipped.
    AbsSkipZero,
}

#[derive(Debug, Clone)]
pub struct SumSpec {
    pub forms: FormTriple,
    pub region: Region,
    pub x: f64,
    pub d: Triple,
    pub dd: Triple,
    pub policy: ValuePolicy,
}

impl SumSpec {
    pub fn new(forms: FormTriple, region: Region, x: f64) -> Self {
        Self {
            forms,
            region,
            x,
            d: [1, 1, 1],
            dd: [1, 1, 1],
            policy: ValuePolicy::Positive,
        }
    }

    pub fn with_moduli(mut self, d: Triple, dd: Triple) -> Self {
        self.d = d;
        self.dd = dd;
        self
    }

    pub fn with_policy(mut self, policy: ValuePolicy) -> Self {
        self.policy = policy;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.x > 0.0) || !self.x.is_finite() {
            return Err(Error::Domain(format!("scale X must be positive, got {}", self.x)));
        }
        for i in 0..3 {
            if self.d[i] == 0 || !self.dd[i].is_multiple_of(self.d[i]) {
                return Err(Error::Domain(format!("need dᵢ | Dᵢ, got d = {:?}, D = {:?}", self.d, self.dd)));
            }
        }
        Ok(())
    }
}

/// `τ(|n|)` from the table, by factorization beyond it.
#[inline]
fn tau_abs(tables: &ArithTables, n: i64) -> Result<u64> {
    tables.tau(n.unsigned_abs())
}

/// The three values at `x` under the policy; `None` when the point is skipped.
fn checked_values(forms: &FormTriple, x: [i64; 2], policy: ValuePolicy) -> Result<Option<[i64; 3]>> {
    let v = forms.eval(x);
    if v.iter().all(|&n| n > 0) {
        return Ok(Some(v));
    }
    match policy {
        ValuePolicy::Positive => Err(Error::Domain(format!(
            "form value {v:?} at {x:?} is not positive; pass the abs/skip-zero policy to allow it"
        ))),
        ValuePolicy::AbsSkipZero => Ok(if v.contains(&0) { None } else { Some(v) }),
    }
}

/// `T(X) = ∑_{1≤x₁,x₂≤X} τ(L₁(x)L₂(x)L₃(x))` for forms positive on the box.
///
/// Rows are filled with `τ(L₁)τ(L₂)τ(L₃)` from the table and then corrected
/// at the points where some prime divides two of the values; such a prime
/// divides `Δ` or both coordinates.
pub fn t_of_x(x: u64, forms: &FormTriple, tables: &ArithTables) -> Result<SumResult> {
    let start = Instant::now();
    if x == 0 {
        return Err(Error::Domain("T(X) needs X ≥ 1".into()));
    }
    if x > i32::MAX as u64 {
        return Err(Error::size("T(X) box side", x as u128, i32::MAX as u128));
    }
    let fs = forms.forms();
    let xi = x as i64;
    let corners = [[1, 1], [xi, 1], [1, xi], [xi, xi]];
    let mut max_value = 0i64;
    for c in corners {
        for f in fs {
            let v = f.eval(c);
            if v <= 0 {
                return Err(Error::Domain(format!(
                    "form ({}, {}) is not positive on [1, X]²; use s_of with the abs/skip-zero policy",
                    f.a, f.b
                )));
            }
            max_value = max_value.max(v);
        }
    }
    if max_value as u64 > tables.limit() {
        return Err(Error::size("τ table for T(X)", max_value as u128, tables.limit() as u128));
    }
    // row products τ(L₁)τ(L₂)τ(L₃) and the values themselves stay in u32
    if max_value > u32::MAX as i64 / 2 || x > 1 << 24 {
        return Err(Error::size("T(X) value range", max_value as u128, (u32::MAX / 2) as u128));
    }
    let tau = tables.tau_table();
    let delta_primes: Vec<u64> = factor_trial(forms.delta())?.primes().collect();
    let coef: [(i64, i64); 3] = [(fs[0].a, fs[0].b), (fs[1].a, fs[1].b), (fs[2].a, fs[2].b)];
    let n = x as usize;

    let total: u128 = (1..=xi)
        .into_par_iter()
        .map_init(
            || vec![0u32; n + 1],
            |buf, x1| -> Result<u128> {
                let mut v = [coef[0].0 * x1 + coef[0].1, coef[1].0 * x1 + coef[1].1, coef[2].0 * x1 + coef[2].1];
                for x2 in 1..=n {
                    buf[x2] = tau[v[0] as usize] * tau[v[1] as usize] * tau[v[2] as usize];
                    v[0] += coef[0].1;
                    v[1] += coef[1].1;
                    v[2] += coef[2].1;
                }
                let correct = |buf: &mut [u32], x2: i64, p: &PrimeDivisor| {
                    let mut e = [0u32; 3];
                    let mut nz = 0;
                    for i in 0..3 {
                        e[i] = p.valuation((coef[i].0 * x1 + coef[i].1 * x2) as u32);
                        nz += (e[i] > 0) as u32;
                    }
                    if nz >= 2 {
                        let sep = (e[0] + 1) * (e[1] + 1) * (e[2] + 1);
                        let b = &mut buf[x2 as usize];
                        *b = *b / sep * (e[0] + e[1] + e[2] + 1);
                    }
                };
                for p in tables.factorize(x1 as u64)?.primes() {
                    if delta_primes.contains(&p) {
                        continue;
                    }
                    // p ∤ Δ and p | x₁: on x₂ = jp every value is p·Lᵢ(x₁/p, j) and
                    // at most one of the cofactors is again divisible by p
                    let div = PrimeDivisor::new(p as u32);
                    let p = p as i64;
                    let xr = x1 / p;
                    let mut w = [coef[0].0 * xr, coef[1].0 * xr, coef[2].0 * xr];
                    let mut x2 = p;
                    while x2 <= xi {
                        w[0] += coef[0].1;
                        w[1] += coef[1].1;
                        w[2] += coef[2].1;
                        if !(div.divides(w[0] as u32) || div.divides(w[1] as u32) || div.divides(w[2] as u32)) {
                            buf[x2 as usize] /= 2;
                        } else {
                            correct(buf, x2, &div);
                        }
                        x2 += p;
                    }
                }
                for &p in &delta_primes {
                    let div = PrimeDivisor::new(p as u32);
                    let p = p as i64;
                    for r in 0..p {
                        let zeros = coef.iter().filter(|c| (c.0 * x1 + c.1 * r).rem_euclid(p) == 0).count();
                        if zeros < 2 {
                            continue;
                        }
                        let mut x2 = if r == 0 { p } else { r };
                        while x2 <= xi {
                            correct(buf, x2, &div);
                            x2 += p;
                        }
                    }
                }
                Ok(buf[1..=n].iter().map(|&t| t as u128).sum())
            },
        )
        .try_reduce(|| 0, |a, b| a.checked_add(b).ok_or_else(|| Error::overflow("T(X)")))?;
    Ok(SumResult {
        value: total,
        points_visited: x * x,
        elapsed: start.elapsed(),
    })
}

/// Exact division by a fixed prime through its inverse modulo `2³²`.
struct PrimeDivisor {
    p: u32,
    inv: u32,
    limit: u32,
}

impl PrimeDivisor {
    fn new(p: u32) -> Self {
        let mut inv = 1u32;
        if p % 2 == 1 {
            // Newton iteration doubles the correct low bits each round
            inv = p;
            for _ in 0..4 {
                inv = inv.wrapping_mul(2u32.wrapping_sub(p.wrapping_mul(inv)));
            }
        }
        Self {
            p,
            inv,
            limit: u32::MAX / p,
        }
    }

    #[inline]
    fn divides(&self, n: u32) -> bool {
        if self.p == 2 {
            n & 1 == 0
        } else {
            n.wrapping_mul(self.inv) <= self.limit
        }
    }

    #[inline]
    fn valuation(&self, mut n: u32) -> u32 {
        if self.p == 2 {
            return n.trailing_zeros();
        }
        let mut e = 0;
        loop {
            let q = n.wrapping_mul(self.inv);
            if q > self.limit {
                return e;
            }
            n = q;
            e += 1;
        }
    }
}

/// `S(X; d, D) = ∑_{x ∈ Λ(D) ∩ XR} ∏ τ(Lᵢ(x)/dᵢ)`.
pub fn s_of(spec: &SumSpec, tables: &ArithTables) -> Result<SumResult> {
    spec.validate()?;
    let start = Instant::now();
    let lat = lattice_of(spec.dd, &spec.forms)?;
    let region = spec.region.dilate(spec.x);
    let mut total: u128 = 0;
    let mut visited = 0u64;
    let mut err: Option<Error> = None;
    region.for_each_lattice_point(lat.basis, |x| {
        if err.is_some() {
            return;
        }
        visited += 1;
        let step = || -> Result<u128> {
            let Some(v) = checked_values(&spec.forms, x, spec.policy)? else {
                return Ok(0);
            };
            let mut t = 1u128;
            for i in 0..3 {
                let di = spec.d[i] as i64;
                if v[i] % di != 0 {
                    return Err(Error::Invariant(format!(
                        "d{} = {di} does not divide L{}({x:?}) = {}",
                        i + 1,
                        i + 1,
                        v[i]
                    )));
                }
                t *= tau_abs(tables, v[i] / di)? as u128;
            }
            Ok(t)
        };
        match step() {
            Ok(t) => total += t,
            Err(e) => err = Some(e),
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok(SumResult {
        value: total,
        points_visited: visited,
        elapsed: start.elapsed(),
    })
}

/// `(τ₊(n), τ₋(n))`: divisors `d ≤ θ`, and divisors `e` with `eθ < n`.
pub fn tau_pm_split(n: u64, threshold: f64) -> Result<(u64, u64)> {
    if n == 0 {
        return Err(Error::Domain("τ± needs n ≥ 1".into()));
    }
    let mut plus = 0;
    let mut minus = 0;
    for d in divisors(n) {
        if d as f64 <= threshold {
            plus += 1;
        }
        // e·θ < n exactly when the complementary divisor n/e exceeds θ
        let e = n / d;
        if !((n / e) as f64 <= threshold) {
            minus += 1;
        }
    }
    Ok((plus, minus))
}

/// `S_{±,±,±}(X)` keyed by sign pattern (`"+-+"` etc.), with threshold `√(r′X)`.
pub fn eight_way_sum(x: f64, forms: &FormTriple, region: &Region) -> Result<BTreeMap<String, SumResult>> {
    let start = Instant::now();
    let xprime = r_prime(forms, region)? * x;
    let theta = xprime.sqrt();
    let lat = [[1i64, 0], [0, 1]];
    let mut acc = [0u128; 8];
    let mut visited = 0u64;
    let mut err = None;
    region.dilate(x).for_each_lattice_point(lat, |p| {
        if err.is_some() {
            return;
        }
        visited += 1;
        let split = || -> Result<[(u64, u64); 3]> {
            let v = checked_values(forms, p, ValuePolicy::Positive)?.expect("positive policy never skips");
            Ok([
                tau_pm_split(v[0] as u64, theta)?,
                tau_pm_split(v[1] as u64, theta)?,
                tau_pm_split(v[2] as u64, theta)?,
            ])
        };
        match split() {
            Ok(split) => {
                for (mask, slot) in acc.iter_mut().enumerate() {
                    let mut t = 1u128;
                    for (i, s) in split.iter().enumerate() {
                        t *= if mask >> (2 - i) & 1 == 0 { s.0 } else { s.1 } as u128;
                    }
                    *slot += t;
                }
            }
            Err(e) => err = Some(e),
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    let elapsed = start.elapsed();
    Ok((0..8)
        .map(|mask| {
            let key: String = (0..3).map(|i| if mask >> (2 - i) & 1 == 0 { '+' } else { '-' }).collect();
            (
                key,
                SumResult {
                    value: acc[mask],
                    points_visited: visited,
                    elapsed,
                },
            )
        })
        .collect())
}

fn omega_trial(n: u64) -> u32 {
    factor_trial(n).map(|f| f.omega()).unwrap_or(0)
}

fn tau_trial(n: u64) -> u64 {
    factor_trial(n).map(|f| f.tau()).unwrap_or(0)
}

/// Right side of the identity
/// `τ(n₁n₂n₃) = ∑_{eᵢeⱼ | n_k} μ(e₁e₂)μ(e₃) 2^{−ω((e₁,n₁))−ω((e₂,n₂))} τ(n₁/e₂e₃)τ(n₂/e₁e₃)τ(n₃/e₁e₂)`.
pub fn tau_product_identity(n: Triple) -> Result<u64> {
    if n.contains(&0) {
        return Err(Error::Domain(format!("identity needs positive entries, got {n:?}")));
    }
    let mut total = Rational::zero();
    for e3 in divisors(n[0].gcd(&n[1])) {
        let m3 = crate::arith::mobius_trial(e3);
        if m3 == 0 {
            continue;
        }
        for e1 in divisors((n[1] / e3).gcd(&n[2])) {
            for e2 in divisors((n[0] / e3).gcd(&(n[2] / e1))) {
                let m12 = crate::arith::mobius_trial(e1 * e2);
                if m12 == 0 {
                    continue;
                }
                let w = omega_trial(e1.gcd(&n[0])) + omega_trial(e2.gcd(&n[1]));
                let t = tau_trial(n[0] / (e2 * e3)) * tau_trial(n[1] / (e1 * e3)) * tau_trial(n[2] / (e1 * e2));
                let term = Rational::new((m12 * m3) as i128 * t as i128, 1i128 << w);
                total = crate::arith::checked_add(&total, &term, "τ identity")?;
            }
        }
    }
    if !total.is_integer() || *total.numer() < 0 {
        return Err(Error::Invariant(format!("τ identity produced non-integer {total}")));
    }
    Ok(*total.numer() as u64)
}

/// `T_h(X) = ∑_{n≤X, n≠h} τ(|n−h|)τ(n)τ(n+h)`.
pub fn t_h_direct(x: u64, h: u64, tables: &ArithTables) -> Result<SumResult> {
    let start = Instant::now();
    if h == 0 {
        return Err(Error::Domain("T_h needs h ≥ 1".into()));
    }
    if x + h > tables.limit() {
        return Err(Error::size("τ table for T_h(X)", (x + h) as u128, tables.limit() as u128));
    }
    Ok(SumResult {
        value: t_h_inner(x, h, tables.tau_table()) as u128,
        points_visited: x,
        elapsed: start.elapsed(),
    })
}

fn t_h_inner(x: u64, h: u64, tau: &[u32]) -> u64 {
    let (x, h) = (x as usize, h as usize);
    let mut s = 0u64;
    for n in 1..=x {
        if n == h {
            continue;
        }
        let a = n.abs_diff(h);
        s += tau[a] as u64 * tau[n] as u64 * tau[n + h] as u64;
    }
    s
}

/// `Σ₁ = ∑_{h≤H} T_h(X)`, exact.
pub fn sigma1(x: u64, h_max: u64, tables: &ArithTables) -> Result<SumResult> {
    let start = Instant::now();
    if h_max == 0 || x == 0 {
        return Err(Error::Domain("Σ₁ needs X, H ≥ 1".into()));
    }
    if x + h_max > tables.limit() {
        return Err(Error::size("τ table for Σ₁", (x + h_max) as u128, tables.limit() as u128));
    }
    let tau = tables.tau_table();
    let value: u128 = (1..=h_max).into_par_iter().map(|h| t_h_inner(x, h, tau) as u128).sum();
    Ok(SumResult {
        value,
        points_visited: x * h_max,
        elapsed: start.elapsed(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaPair {
    pub x: u64,
    pub h: u64,
    pub sigma1: u128,
    /// `c₁X(log X)³S(H)`.
    pub sigma2_predicted: f64,
    /// `c·X·H·(log X)³` with `c` the progression constant.
    pub main_term: f64,
    pub ratio: f64,
}

/// `Σ₁` together with the predictions `Σ₂ = c₁X(log X)³S(H)` and `cXH(log X)³`.
pub fn sigma1_sigma2(x: u64, h_max: u64, tables: &ArithTables, c1: f64, s_h: f64, c: f64) -> Result<SigmaPair> {
    let s1 = sigma1(x, h_max, tables)?;
    let l3 = (x as f64).ln().powi(3);
    let main_term = c * x as f64 * h_max as f64 * l3;
    Ok(SigmaPair {
        x,
        h: h_max,
        sigma1: s1.value,
        sigma2_predicted: c1 * x as f64 * l3 * s_h,
        main_term,
        ratio: s1.value as f64 / main_term,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MResult {
    pub t: [f64; 3],
    pub value: f64,
    /// Exact value `"n/d"` for boxes with at most [`M_EXACT_CAP`] terms.
    pub exact: Option<String>,
    pub terms: u64,
}

/// Boxes up to this many terms are summed exactly.
pub const M_EXACT_CAP: u64 = 4_096;
/// Largest box accepted by [`m_of_t`].
pub const M_BUDGET: u64 = 200_000_000;

/// `M(T) = ∑_{dᵢ ≤ Tᵢ} ρ(d)/(d₁d₂d₃)²`.
pub fn m_of_t(t: [f64; 3], forms: &FormTriple, tables: &ArithTables) -> Result<MResult> {
    if t.iter().any(|&v| !(v >= 1.0) || !v.is_finite()) {
        return Err(Error::Domain(format!("M(T) needs Tᵢ ≥ 1, got {t:?}")));
    }
    let n = t.map(|v| v.floor() as u64);
    let terms = n[0] as u128 * n[1] as u128 * n[2] as u128;
    if terms > M_BUDGET as u128 {
        return Err(Error::size("M(T) box", terms, M_BUDGET as u128));
    }
    if terms <= M_EXACT_CAP as u128 {
        let mut s = BigRational::zero();
        for d1 in 1..=n[0] {
            for d2 in 1..=n[1] {
                for d3 in 1..=n[2] {
                    let r = rho([d1, d2, d3], forms, tables)?;
                    let den = BigInt::from(d1 * d2 * d3).pow(2);
                    s += BigRational::new(BigInt::from(r), den);
                }
            }
        }
        let value = crate::series::rational_to_f64(&s);
        return Ok(MResult {
            t,
            value,
            exact: Some(format!("{}/{}", s.numer(), s.denom())),
            terms: terms as u64,
        });
    }
    let rows: Vec<f64> = (1..=n[0])
        .into_par_iter()
        .map(|d1| -> Result<f64> {
            let mut s = Neumaier::new();
            for d2 in 1..=n[1] {
                for d3 in 1..=n[2] {
                    let r = rho([d1, d2, d3], forms, tables)? as f64;
                    let q = (d1 * d2 * d3) as f64;
                    s.add(r / (q * q));
                }
            }
            Ok(s.value())
        })
        .collect::<Result<_>>()?;
    let value = rows.into_iter().collect::<Neumaier>().value();
    Ok(MResult {
        t,
        value,
        exact: None,
        terms: terms as u64,
    })
}

/// Sub-regions `R_d ⊆ R` used in the discrepancy sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum RegionFamily {
    /// `R_d = R` for every `d`.
    Constant,
    /// `R_d = {x ∈ R : d₃√X′ < L₃(Xx)}`, the family behind `S_{+,+,−}`.
    PlusPlusMinus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyReport {
    pub x: f64,
    pub q: [f64; 3],
    pub moduli: u64,
    pub total_discrepancy: f64,
    /// `X^{7/4}`.
    pub main_scale: f64,
    /// `total_discrepancy / (X² (log X)³)`.
    pub ratio_to_main: f64,
}

/// `∑_{dᵢ≤Qᵢ} |#(Λ(d) ∩ XR_d) − vol(XR_d)ρ(d)/(d₁d₂d₃)²|`.
pub fn lod_discrepancy(x: f64, q: [f64; 3], forms: &FormTriple, region: &Region, family: RegionFamily) -> Result<DiscrepancyReport> {
    if q.iter().any(|&v| !(v >= 1.0)) || !(x >= 1.0) {
        return Err(Error::Domain(format!("need X ≥ 1 and Qᵢ ≥ 1, got X = {x}, Q = {q:?}")));
    }
    let n = q.map(|v| v.floor() as u64);
    let xr = region.dilate(x);
    let sqrt_xprime = (r_prime(forms, region)? * x).sqrt();
    let l3 = forms.forms()[2];
    let slices: Vec<Option<Region>> = (1..=n[2])
        .map(|d3| match family {
            RegionFamily::Constant => Some(xr.clone()),
            RegionFamily::PlusPlusMinus => xr.clipped(HalfPlane::new(l3.a as f64, l3.b as f64, -(d3 as f64) * sqrt_xprime, true)),
        })
        .collect();
    let rows: Vec<f64> = (1..=n[0])
        .into_par_iter()
        .map(|d1| -> Result<f64> {
            let mut s = Neumaier::new();
            for d2 in 1..=n[1] {
                for d3 in 1..=n[2] {
                    let Some(r) = &slices[(d3 - 1) as usize] else {
                        continue;
                    };
                    let lat = lattice_of([d1, d2, d3], forms)?;
                    let count = r.count_lattice_points(lat.basis) as f64;
                    let expected = r.volume() / lat.determinant as f64;
                    s.add((count - expected).abs());
                }
            }
            Ok(s.value())
        })
        .collect::<Result<_>>()?;
    let total = rows.into_iter().collect::<Neumaier>().value();
    Ok(DiscrepancyReport {
        x,
        q,
        moduli: n[0] * n[1] * n[2],
        total_discrepancy: total,
        main_scale: x.powf(1.75),
        ratio_to_main: total / (x * x * x.ln().powi(3)),
    })
}

/// `T(X)` rebuilt from the expansion
/// `∑_e μ(e₁e₂)μ(e₃) ∑_{k | e₁e₂} μ(k)2^{−ω(k)} S(X; d, D)` with
/// `d = (e₂e₃, e₁e₃, e₁e₂)` and `D = ([e₂e₃,k], [e₁e₃,k], e₁e₂)`.
/// Meant as a consistency check at small `X`.
pub fn t_of_x_by_reduction(x: u64, forms: &FormTriple, tables: &ArithTables) -> Result<u128> {
    let xi = x as i64;
    let region = Region::halfplanes(vec![
        HalfPlane::new(1.0, 0.0, 0.0, true),
        HalfPlane::new(0.0, 1.0, 0.0, true),
        HalfPlane::new(-1.0, 0.0, 1.0, false),
        HalfPlane::new(0.0, -1.0, 1.0, false),
    ])?;
    let mut maxv = [0i64; 3];
    for c in [[1, 1], [xi, 1], [1, xi], [xi, xi]] {
        let v = forms.eval(c);
        for i in 0..3 {
            maxv[i] = maxv[i].max(v[i].abs());
        }
    }
    let mut total = BigRational::zero();
    for e3 in 1..=maxv[0].min(maxv[1]) as u64 {
        let m3 = crate::arith::mobius_trial(e3);
        if m3 == 0 {
            continue;
        }
        for e1 in 1..=(maxv[1] as u64 / e3).min(maxv[2] as u64) {
            for e2 in 1..=(maxv[0] as u64 / e3).min(maxv[2] as u64 / e1) {
                let m12 = crate::arith::mobius_trial(e1 * e2);
                if m12 == 0 {
                    continue;
                }
                let d = [e2 * e3, e1 * e3, e1 * e2];
                for k in divisors(e1 * e2) {
                    let mk = crate::arith::mobius_trial(k);
                    if mk == 0 {
                        continue;
                    }
                    let dd = [d[0].lcm(&k), d[1].lcm(&k), d[2]];
                    let spec = SumSpec::new(forms.clone(), region.clone(), x as f64).with_moduli(d, dd);
                    let s = s_of(&spec, tables)?.value;
                    if s == 0 {
                        continue;
                    }
                    let w = omega_trial(k);
                    total += BigRational::new(BigInt::from(m12 * m3 * mk) * BigInt::from(s), BigInt::one() << w);
                }
            }
        }
    }
    if !total.is_integer() {
        return Err(Error::Invariant(format!("reduction produced non-integer {total}")));
    }
    total
        .numer()
        .try_into()
        .map_err(|_| Error::Invariant(format!("reduction produced {total}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::build_tables;

    #[test]
    fn prime_divisor_valuations() {
        for p in [2u32, 3, 5, 7, 97, 65_521] {
            let d = PrimeDivisor::new(p);
            for n in (1..5000u32).chain([p * p, (u32::MAX / 2) / p * p, u32::MAX / 2]) {
                assert_eq!(d.valuation(n), crate::arith::valuation(n as i128, p as u64), "{n} at {p}");
            }
        }
    }

    #[test]
    fn t_of_x_small() {
        let t = build_tables(1000).unwrap();
        let f = FormTriple::coordinate_sum();
        assert_eq!(t_of_x(1, &f, &t).unwrap().value, 2);
        assert_eq!(t_of_x(2, &f, &t).unwrap().value, 15);
    }

    #[test]
    fn t_of_x_matches_pointwise() {
        let t = build_tables(5000).unwrap();
        for c in [[[1, 0], [0, 1], [1, 1]], [[2, 1], [1, 3], [3, 5]], [[4, 2], [1, 1], [1, 9]]] {
            let f = FormTriple::from_coefficients(c).unwrap();
            for x in [1u64, 7, 40] {
                let mut brute = 0u128;
                for x1 in 1..=x as i64 {
                    for x2 in 1..=x as i64 {
                        let v = f.eval([x1, x2]);
                        brute += factor_trial((v[0] * v[1] * v[2]) as u64).unwrap().tau() as u128;
                    }
                }
                assert_eq!(t_of_x(x, &f, &t).unwrap().value, brute, "{c:?} X = {x}");
            }
        }
    }

    #[test]
    fn tau_pm_examples() {
        assert_eq!(tau_pm_split(12, 12f64.sqrt()).unwrap(), (3, 3));
        assert_eq!(tau_pm_split(16, 4.0).unwrap(), (3, 2));
        assert_eq!(tau_pm_split(1, 1.0).unwrap(), (1, 0));
    }

    #[test]
    fn identity_examples() {
        assert_eq!(tau_product_identity([1, 1, 1]).unwrap(), 1);
        assert_eq!(tau_product_identity([2, 3, 5]).unwrap(), 8);
        assert_eq!(tau_product_identity([4, 6, 9]).unwrap(), 16);
    }

    #[test]
    fn t_h_examples() {
        let t = build_tables(100).unwrap();
        assert_eq!(t_h_direct(3, 1, &t).unwrap().value, 16);
        assert!(t_h_direct(3, 0, &t).is_err());
    }

    #[test]
    fn m_of_t_examples() {
        let t = build_tables(100).unwrap();
        let f = FormTriple::progression();
        let m = m_of_t([1.0, 1.0, 1.0], &f, &t).unwrap();
        assert_eq!(m.exact.as_deref(), Some("1/1"));
        // d ∈ {1,2}³: ρ/(d₁d₂d₃)² from the 2-adic closed form
        let m2 = m_of_t([2.0, 2.0, 2.0], &f, &t).unwrap();
        let mut brute = Rational::zero();
        for a in 0..2u32 {
            for b in 0..2u32 {
                for c in 0..2u32 {
                    let h = [2u64.pow(a), 2u64.pow(b), 2u64.pow(c)];
                    let r = crate::lattice::rho_bruteforce(h, &f).unwrap() as i128;
                    brute += Rational::new(r, ((h[0] * h[1] * h[2]) as i128).pow(2));
                }
            }
        }
        assert_eq!(m2.exact.unwrap(), format!("{}/{}", brute.numer(), brute.denom()));
    }

    #[test]
    fn reduction_matches_t() {
        let t = build_tables(1000).unwrap();
        let f = FormTriple::coordinate_sum();
        for x in [1u64, 2, 3, 5] {
            assert_eq!(t_of_x_by_reduction(x, &f, &t).unwrap(), t_of_x(x, &f, &t).unwrap().value, "X = {x}");
        }
    }
}
