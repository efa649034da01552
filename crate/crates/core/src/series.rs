//! Local densities and Euler products: `σ_p`, the generating function
//! `S(z)`, the correlation constants `c_h` with the multiplicative `f`,
//! and interval-bounded evaluation of infinite products over primes.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{build_tables, factor_trial, valuation, Rational, Triple};
use crate::error::{Error, Result};
use crate::forms::FormTriple;
use crate::lattice::{rho_prime_power_exponent, MAX_LATTICE_MODULUS};

/// Requested truncation for bad-prime sums.
pub const DEFAULT_NU_CAP: u32 = 25;
/// Target bound on the truncation error of a local factor.
pub const TRUNCATION_TARGET: f64 = 1e-12;
/// Default prime cut for Euler products.
pub const DEFAULT_PRIME_CUT: u64 = 100_000;
/// Largest truncation the adaptive σ_p sum will use.
pub const MAX_NU: u32 = 120;

const U: f64 = f64::EPSILON;

/// Compensated (Neumaier) summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for Neumaier {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Neumaier::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedForm,
    TruncatedSum,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::ClosedForm => "closed-form",
            Method::TruncatedSum => "truncated-sum",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalFactor {
    pub prime: u64,
    pub value: f64,
    /// Exact value as `(numerator, denominator)` when known.
    pub exact: Option<(i128, i128)>,
    pub method: Method,
    /// Bound on `|value − σ_p|` excluding floating-point rounding of `value`.
    pub truncation_error: f64,
    /// Truncation level actually used (0 for closed forms).
    pub nu_used: u32,
}

impl LocalFactor {
    pub fn exact(prime: u64, q: Rational) -> Self {
        Self {
            prime,
            value: *q.numer() as f64 / *q.denom() as f64,
            exact: Some((*q.numer(), *q.denom())),
            method: Method::ClosedForm,
            truncation_error: 0.0,
            nu_used: 0,
        }
    }

    pub fn approximate(prime: u64, value: f64, truncation_error: f64) -> Self {
        Self {
            prime,
            value,
            exact: None,
            method: Method::ClosedForm,
            truncation_error,
            nu_used: 0,
        }
    }

    pub fn exact_value(&self) -> Option<Rational> {
        self.exact.map(|(n, d)| Rational::new(n, d))
    }

    /// Relative error bound including rounding of the stored value.
    fn relative_error(&self) -> f64 {
        self.truncation_error / self.value.abs() + 4.0 * U
    }
}

/// `S(z) = (1+z+z²)/((1−z)²(1−z²))`, exactly.
pub fn s_of_z_exact(z: Rational) -> Result<Rational> {
    let one = Rational::one();
    if z.abs() >= one {
        return Err(Error::Domain(format!("S(z) needs |z| < 1, got {z}")));
    }
    let num = one + z + z * z;
    let den = (one - z) * (one - z) * (one - z * z);
    Ok(num / den)
}

pub fn s_of_z(z: f64) -> Result<f64> {
    if !(z.abs() < 1.0) {
        return Err(Error::Domain(format!("S(z) needs |z| < 1, got {z}")));
    }
    Ok((1.0 + z + z * z) / ((1.0 - z) * (1.0 - z) * (1.0 - z * z)))
}

/// `m(ν)`: sum of the two largest entries.
pub fn m_of_nu(nu: [u32; 3]) -> u32 {
    nu[0] + nu[1] + nu[2] - nu.iter().min().copied().unwrap_or(0)
}

/// `∑_{ν∈[0,n]³} z^{m(ν)}`.
pub fn s_of_z_truncated(z: f64, n: u32) -> f64 {
    let mut s = Neumaier::new();
    for a in 0..=n {
        for b in 0..=n {
            for c in 0..=n {
                s.add(z.powi(m_of_nu([a, b, c]) as i32));
            }
        }
    }
    s.value()
}

/// `σ_p` for `p ∤ Δℓ₁ℓ₂ℓ₃` (and `d = D = 1`): `(1−z)³S(z) = (1+z+z²)/(1+z)`.
pub fn sigma_good_prime(p: u64) -> Rational {
    let p = p as i128;
    Rational::new(p * p + p + 1, p * (p + 1))
}

/// `σ_p` for the progression triple `(x₁−x₂, x₁, x₁+x₂)`.
pub fn sigma_progression(p: u64) -> Rational {
    if p == 2 {
        Rational::new(4, 3)
    } else {
        sigma_good_prime(p)
    }
}

/// Tail bound for the truncated σ_p sum at level `n`: every omitted term
/// has some `νᵢ > n` and is at most `p^{v_p(Δ)+max λ}·z^{m(ν)}` by the
/// upper bound on `ρ` at prime powers.
fn sigma_tail_bound(p: u64, n: u32, forms: &FormTriple) -> f64 {
    let z = 1.0 / p as f64;
    let vdelta = valuation(forms.delta() as i128, p);
    let lam = forms.content().iter().map(|&l| valuation(l as i128, p)).max().unwrap_or(0);
    let c = (p as f64).powi((vdelta + lam) as i32);
    let geometric = 3.0 * (1.0 + z) / ((1.0 - z) * (1.0 - z)) * z.powi(n as i32 + 1) / (1.0 - z);
    (1.0 - z).powi(3) * c * geometric
}

/// `σ_p(d, D)` as a truncated sum over `ν ∈ [0, n]³`.
///
/// The truncation starts at `nu_cap` and is raised until the tail bound is
/// below [`TRUNCATION_TARGET`], as long as the moduli stay within the lattice
/// range for primes where `ρ` has no closed form.
pub fn sigma_p_general(p: u64, d: Triple, dd: Triple, forms: &FormTriple, nu_cap: u32) -> Result<LocalFactor> {
    if nu_cap == 0 {
        return Err(Error::Domain("nu_cap must be at least 1".into()));
    }
    for i in 0..3 {
        if d[i] == 0 || dd[i] == 0 || !dd[i].is_multiple_of(d[i]) {
            return Err(Error::Domain(format!("need dᵢ | Dᵢ, got d = {d:?}, D = {dd:?}")));
        }
    }
    let vd = d.map(|x| valuation(x as i128, p));
    let vdd = dd.map(|x| valuation(x as i128, p));
    let closed = !forms.delta().is_multiple_of(p) || (p == 2 && forms.is_progression());
    let mut n = nu_cap;
    while n < MAX_NU && sigma_tail_bound(p, n, forms) >= TRUNCATION_TARGET {
        n += 1;
    }
    if !closed {
        // keep p^{max N} inside the exact lattice range
        let top_v = (0..3).map(|i| vdd[i].max(vd[i])).max().unwrap_or(0);
        let limit = ((MAX_LATTICE_MODULUS as f64).ln() / (p as f64).ln()).floor() as u32;
        if top_v >= limit {
            return Err(Error::size("σ_p modulus exponent", top_v as u128, limit as u128));
        }
        n = n.min(limit - top_v);
    }
    let z = 1.0 / p as f64;
    let mut sum = Neumaier::new();
    for a in 0..=n {
        for b in 0..=n {
            for c in 0..=n {
                let nu = [a, b, c];
                let big_n = [0, 1, 2].map(|i| vdd[i].max(nu[i] + vd[i]));
                let r = rho_prime_power_exponent(p, big_n, forms)?;
                let k = 2 * (big_n[0] + big_n[1] + big_n[2]) as i64 - r as i64;
                sum.add(z.powi(k as i32));
            }
        }
    }
    let value = (1.0 - z).powi(3) * sum.value();
    Ok(LocalFactor {
        prime: p,
        value,
        exact: None,
        method: Method::TruncatedSum,
        truncation_error: sigma_tail_bound(p, n, forms),
        nu_used: n,
    })
}

/// `σ_p` for the triple, with `d = D = (1,1,1)`: closed form at good primes
/// and for the progression triple, truncated sum otherwise.
pub fn sigma_p(p: u64, forms: &FormTriple) -> Result<LocalFactor> {
    let l = forms.content();
    let bad = forms.delta().is_multiple_of(p) || l.iter().any(|&x| x % p == 0);
    if !bad {
        return Ok(LocalFactor::exact(p, sigma_good_prime(p)));
    }
    if forms.is_progression() {
        return Ok(LocalFactor::exact(p, sigma_progression(p)));
    }
    sigma_p_general(p, [1, 1, 1], [1, 1, 1], forms, DEFAULT_NU_CAP)
}

/// Exponential integral `E₁(x)` for `x > 1`, by the continued fraction.
pub fn exp_integral_e1(x: f64) -> f64 {
    assert!(x > 1.0, "continued fraction used for x > 1");
    let tiny = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * (-x).exp()
}

/// Bounds on `∑_{p>x} p⁻²` given `π(x)`, from
/// `t/ln t·(1+1/ln t) ≤ π(t) ≤ t/ln t·(1+1.2762/ln t)` for `t ≥ 599`.
pub fn prime_square_tail(x: u64, pi_x: u64) -> Result<(f64, f64)> {
    if x < 599 {
        return Err(Error::Domain(format!("prime tail bounds need x ≥ 599, got {x}")));
    }
    let xf = x as f64;
    let y = xf.ln();
    let e1 = exp_integral_e1(y);
    let head = -(pi_x as f64) / (xf * xf);
    let lo = head + 2.0 / (xf * y);
    let hi = head + 2.0 * (1.2762 / (xf * y) - 0.2762 * e1);
    // a few ulps of slack for the evaluation itself
    Ok((lo * (1.0 - 1e-12), hi * (1.0 + 1e-12)))
}

/// How the factors beyond the prime cut are bounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum TailModel {
    /// `k_lo/p² ≤ σ_p − 1 ≤ k_hi/p²` for every `p` above the cut.
    Explicit { k_lo: f64, k_hi: f64 },
    /// `K` estimated from `(σ_p − 1)p²` on primes just below the cut,
    /// widened by half its range plus one.
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EulerProduct {
    pub prime_cut: u64,
    #[serde(skip)]
    pub factors: Vec<LocalFactor>,
    /// Product over `p ≤ P₀` (plus bad primes above the cut).
    pub partial: f64,
    pub partial_relative_error: f64,
    pub tail_model: TailModel,
    pub k_range: [f64; 2],
    /// Multiplicative interval for `∏_{p>P₀}`.
    pub tail: [f64; 2],
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

impl EulerProduct {
    pub fn error_bound(&self) -> f64 {
        (self.hi - self.value).max(self.value - self.lo)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Multiply by a positive constant known to relative accuracy `rel`.
    pub fn scaled(&self, k: f64, rel: f64) -> Self {
        let mut out = self.clone();
        out.partial *= k;
        out.value *= k;
        out.lo = self.lo * k * (1.0 - rel - 2.0 * U);
        out.hi = self.hi * k * (1.0 + rel + 2.0 * U);
        out
    }

    /// Interval product of two Euler products with positive values.
    pub fn times(&self, other: &EulerProduct) -> (f64, f64, f64) {
        (
            self.value * other.value,
            self.lo * other.lo * (1.0 - 2.0 * U),
            self.hi * other.hi * (1.0 + 2.0 * U),
        )
    }
}

fn primes_up_to(n: u64) -> Result<Vec<u64>> {
    let t = build_tables(n.max(2))?;
    Ok(t.primes().iter().map(|&p| p as u64).collect())
}

/// `∏_{p ≤ P₀} σ_p` times an interval for the tail.
pub fn euler_product<F>(local: F, prime_cut: u64, tail: TailModel) -> Result<EulerProduct>
where
    F: Fn(u64) -> Result<LocalFactor>,
{
    euler_product_with_extra(local, prime_cut, tail, &[])
}

/// As [`euler_product`], also multiplying in the listed primes above the cut.
pub fn euler_product_with_extra<F>(local: F, prime_cut: u64, tail: TailModel, extra_primes: &[u64]) -> Result<EulerProduct>
where
    F: Fn(u64) -> Result<LocalFactor>,
{
    if prime_cut < 599 {
        return Err(Error::Domain(format!("prime cut must be at least 599, got {prime_cut}")));
    }
    let primes = primes_up_to(prime_cut)?;
    let pi_x = primes.len() as u64;
    let mut factors = Vec::with_capacity(primes.len() + extra_primes.len());
    for &p in primes.iter().chain(extra_primes.iter().filter(|&&p| p > prime_cut)) {
        let f = local(p)?;
        if !(f.value > 0.0) || !f.value.is_finite() {
            return Err(Error::NonConvergent(format!("local factor at p = {p} is {}", f.value)));
        }
        factors.push(f);
    }
    let mut partial = 1.0f64;
    let mut rel = 0.0f64;
    for f in &factors {
        partial *= f.value;
        rel += f.relative_error() + U;
    }
    let k_range = match tail {
        TailModel::Explicit { k_lo, k_hi } => [k_lo, k_hi],
        TailModel::Sampled => sampled_k(&factors, prime_cut)?,
    };
    let (t_lo, t_hi) = prime_square_tail(prime_cut, pi_x)?;
    let t4 = 1.0 / (3.0 * (prime_cut as f64).powi(3));
    let [k_lo, k_hi] = k_range;
    // log(1+x) ≥ x − x² for |x| ≤ 1/2, and ≤ x
    let log_lo = (k_lo * t_lo).min(k_lo * t_hi) - k_lo * k_lo * t4;
    let log_hi = (k_hi * t_lo).max(k_hi * t_hi);
    let mut tail_iv = [log_lo.exp() * (1.0 - 4.0 * U), log_hi.exp() * (1.0 + 4.0 * U)];
    if extra_primes.iter().any(|&p| p > prime_cut) && k_lo >= 0.0 {
        // the tail then runs over a subset of primes; every factor is ≥ 1
        tail_iv[0] = tail_iv[0].min(1.0);
    }
    let lo = partial * (1.0 - rel) * tail_iv[0];
    let hi = partial * (1.0 + rel) * tail_iv[1];
    let mid = partial * (0.5 * (log_lo + log_hi)).exp();
    Ok(EulerProduct {
        prime_cut,
        factors,
        partial,
        partial_relative_error: rel,
        tail_model: tail,
        k_range,
        tail: tail_iv,
        value: mid.clamp(lo, hi),
        lo,
        hi,
    })
}

fn sampled_k(factors: &[LocalFactor], prime_cut: u64) -> Result<[f64; 2]> {
    let k = |f: &LocalFactor| (f.value - 1.0) * (f.prime as f64).powi(2);
    let upper: Vec<f64> = factors
        .iter()
        .filter(|f| f.prime > prime_cut / 2 && f.prime <= prime_cut)
        .map(k)
        .collect();
    let lower: Vec<f64> = factors
        .iter()
        .filter(|f| f.prime > prime_cut / 100 && f.prime <= prime_cut / 50)
        .map(k)
        .collect();
    if upper.is_empty() || lower.is_empty() {
        return Err(Error::NonConvergent("too few primes to sample the tail".into()));
    }
    let amax = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if amax(&upper) > 10.0 * amax(&lower) + 1e-9 {
        return Err(Error::NonConvergent(format!(
            "(σ_p − 1)p² grows from {:.3e} to {:.3e}; factors are not 1 + O(p⁻²)",
            amax(&lower),
            amax(&upper)
        )));
    }
    let lo = upper.iter().chain(lower.iter()).copied().fold(f64::INFINITY, f64::min);
    let hi = upper.iter().chain(lower.iter()).copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = 0.5 * (hi - lo) + 1.0;
    Ok([lo - pad, hi + pad])
}

/// Interval `[1 − 1/P₀, 1]` for factors `1 + 1/(p(p+1))` and similar.
fn unit_tail(prime_cut: u64) -> TailModel {
    TailModel::Explicit {
        k_lo: 1.0 - 1.0 / prime_cut as f64,
        k_hi: 1.0,
    }
}

/// `c₀ = ∏_p (1+1/p)⁻¹(1+1/p+1/p²)`.
pub fn c0_constant(prime_cut: u64) -> Result<EulerProduct> {
    euler_product(|p| Ok(LocalFactor::exact(p, sigma_good_prime(p))), prime_cut, unit_tail(prime_cut))
}

/// `(12/ζ(2)²)·c₀` with `ζ(2)² = π⁴/36`.
pub fn theorem4_constant(prime_cut: u64) -> Result<EulerProduct> {
    let k = 432.0 / std::f64::consts::PI.powi(4);
    Ok(c0_constant(prime_cut)?.scaled(k, 8.0 * U))
}

/// `(4/3)·∏_{p>2}(1+1/p)⁻¹(1+1/p+1/p²)`.
pub fn eq_c_constant(prime_cut: u64) -> Result<EulerProduct> {
    euler_product(|p| Ok(LocalFactor::exact(p, sigma_progression(p))), prime_cut, unit_tail(prime_cut))
}

/// `∏_p σ_p` for an arbitrary triple (`d = D = 1`).
pub fn leading_constant(forms: &FormTriple, prime_cut: u64) -> Result<EulerProduct> {
    let bad = forms.bad_primes();
    euler_product_with_extra(|p| sigma_p(p, forms), prime_cut, unit_tail(prime_cut), &bad)
}

/// Local factor of the main-term constant for `∑ τ(L₁L₂L₃(x))`:
/// `(1−1/p)³(1 + 3/(p−1) + λ₁ + λ₂ + λ₃)` with `λᵢ = v_p(ℓᵢ)`.
pub fn tau_product_local(p: u64, forms: &FormTriple) -> Rational {
    let lam: i128 = forms.content().iter().map(|&l| valuation(l as i128, p) as i128).sum();
    let pi = p as i128;
    let one_minus = Rational::new(pi - 1, pi);
    one_minus * one_minus * one_minus * (Rational::one() + Rational::new(3, pi - 1) + Rational::from(lam))
}

/// Euler product of [`tau_product_local`].
pub fn tau_product_constant(forms: &FormTriple, prime_cut: u64) -> Result<EulerProduct> {
    let z = 1.0 / prime_cut as f64;
    let bad: Vec<u64> = forms.bad_primes();
    euler_product_with_extra(
        |p| Ok(LocalFactor::exact(p, tau_product_local(p, forms))),
        prime_cut,
        TailModel::Explicit {
            k_lo: -3.0,
            k_hi: -3.0 + 2.0 * z,
        },
        &bad,
    )
}

/// `∏_p (1−1/p)²(1+2/p)`.
pub fn correlation_product(prime_cut: u64) -> Result<EulerProduct> {
    let z = 1.0 / prime_cut as f64;
    euler_product(
        |p| {
            let pi = p as i128;
            let q = Rational::new((pi - 1) * (pi - 1) * (pi + 2), pi * pi * pi);
            Ok(LocalFactor::exact(p, q))
        },
        prime_cut,
        TailModel::Explicit {
            k_lo: -3.0,
            k_hi: -3.0 + 2.0 * z,
        },
    )
}

fn big(n: i128) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn big_ratio(n: i128, d: i128) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// `f(p^ν)` from its closed forms.
pub fn f_prime_power(p: u64, nu: u32) -> BigRational {
    if nu == 0 {
        return BigRational::one();
    }
    if p == 2 {
        let pow = BigInt::from(11) * BigInt::from(2).pow(nu);
        return big_ratio(52, 11) - BigRational::new(BigInt::from(41 + 15 * nu as i128), pow);
    }
    let z = big_ratio(1, p as i128);
    let zpow = |k: u32| {
        let mut r = BigRational::one();
        for _ in 0..k {
            r *= &z;
        }
        r
    };
    let nu_r = big(nu as i128);
    let num = big(1) + big(4) * &z + &z * &z - (big(3) * &nu_r + big(4)) * zpow(nu + 1) - big(4) * zpow(nu + 2)
        + (big(3) * &nu_r + big(2)) * zpow(nu + 3);
    let one_minus = big(1) - &z;
    let den = (big(1) + big(2) * &z) * &one_minus * &one_minus;
    num / den
}

/// `f(p^ν)` in floating point.
pub fn f_prime_power_f64(p: u64, nu: u32) -> f64 {
    if nu == 0 {
        return 1.0;
    }
    if p == 2 {
        return 52.0 / 11.0 - (41.0 + 15.0 * nu as f64) / (11.0 * 2f64.powi(nu as i32));
    }
    let z = 1.0 / p as f64;
    let n = nu as f64;
    let zn = z.powi(nu as i32 + 1);
    let num = 1.0 + 4.0 * z + z * z - (3.0 * n + 4.0) * zn - 4.0 * zn * z + (3.0 * n + 2.0) * zn * z * z;
    num / ((1.0 + 2.0 * z) * (1.0 - z) * (1.0 - z))
}

/// `f(h)` for `h ≥ 1`, multiplicatively.
pub fn f_of(h: u64) -> Result<BigRational> {
    if h == 0 {
        return Err(Error::Domain("f(h) needs h ≥ 1".into()));
    }
    let fac = factor_trial(h)?;
    Ok(fac
        .factors
        .iter()
        .fold(BigRational::one(), |acc, &(p, e)| acc * f_prime_power(p, e)))
}

/// `(f*μ)(p^k) = f(p^k) − f(p^{k−1})`.
pub fn f_mu_convolution(p: u64, k: u32) -> Result<BigRational> {
    if k == 0 {
        return Err(Error::Domain("(f*μ)(p^k) evaluated for k ≥ 1".into()));
    }
    Ok(f_prime_power(p, k) - f_prime_power(p, k - 1))
}

/// Closed forms for `(f*μ)(p^k)`, kept separate from
/// [`f_mu_convolution`] so the two can be compared.
pub fn f_mu_closed_form(p: u64, k: u32) -> Result<BigRational> {
    if k == 0 {
        return Err(Error::Domain("(f*μ)(p^k) evaluated for k ≥ 1".into()));
    }
    let pk = BigRational::from_integer(BigInt::from(p).pow(k));
    if p == 2 {
        if k == 1 {
            return Ok(big_ratio(13, 11));
        }
        return Ok((big(1) + big_ratio(15 * k as i128, 11)) / pk);
    }
    let z = big_ratio(1, p as i128);
    if k == 1 {
        return Ok(&z * (big(4) + big(5) * &z) / (big(1) + big(2) * &z));
    }
    let kk = big(k as i128);
    let num = big(1) + big(3) * &kk - big(3) * &kk * &z - (big(3) + big(3) * &kk) * &z * &z + (big(3) * &kk + big(2)) * &z * &z * &z;
    let one_minus = big(1) - &z;
    Ok(num / ((big(1) + big(2) * &z) * &one_minus * &one_minus) / pk)
}

/// `c₁ = (11/8)∏_p(1−1/p)²(1+2/p)`.
pub fn c1_constant(prime_cut: u64) -> Result<EulerProduct> {
    Ok(correlation_product(prime_cut)?.scaled(11.0 / 8.0, 0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationConstant {
    pub h: u64,
    /// `f(h)` as a reduced fraction `"n/d"`.
    pub f_of_h: String,
    pub f_of_h_value: f64,
    pub c_h: f64,
    pub lo: f64,
    pub hi: f64,
    pub prime_cut: u64,
}

impl CorrelationConstant {
    pub fn error_bound(&self) -> f64 {
        (self.hi - self.c_h).max(self.c_h - self.lo)
    }
}

fn big_to_f64(q: &BigRational) -> f64 {
    // ratio of two wide integers; scale so both fit in f64 range
    let n = q.numer();
    let d = q.denom();
    let shift = (n.bits().max(d.bits()) as i64 - 1000).max(0) as u64;
    let nf = (n >> shift).to_f64().unwrap_or(f64::NAN);
    let df = (d >> shift).to_f64().unwrap_or(f64::NAN);
    nf / df
}

pub fn rational_to_f64(q: &BigRational) -> f64 {
    big_to_f64(q)
}

/// `c_h = (11/8) f(h) ∏_p (1−1/p)²(1+2/p)`.
pub fn c_h(h: u64, prime_cut: u64) -> Result<CorrelationConstant> {
    c_h_with(h, &c1_constant(prime_cut)?)
}

/// `c_h` from a precomputed `c₁`.
pub fn c_h_with(h: u64, c1: &EulerProduct) -> Result<CorrelationConstant> {
    let f = f_of(h)?;
    let fv = big_to_f64(&f);
    let scaled = c1.scaled(fv, 2.0 * U);
    Ok(CorrelationConstant {
        h,
        f_of_h: format!("{}/{}", f.numer(), f.denom()),
        f_of_h_value: fv,
        c_h: scaled.value,
        lo: scaled.lo,
        hi: scaled.hi,
        prime_cut: c1.prime_cut,
    })
}

/// `∑_{k≥0} (f*μ)(p^k)/p^k`, summed numerically from `f`.
pub fn c1_prime_local(p: u64) -> LocalFactor {
    let z = 1.0 / p as f64;
    let mut s = Neumaier::new();
    s.add(1.0);
    let mut zk = 1.0;
    let mut k = 1;
    let mut last = f64::INFINITY;
    while k < 400 {
        zk *= z;
        let term = (f_prime_power_f64(p, k) - f_prime_power_f64(p, k - 1)) * zk;
        s.add(term);
        last = term.abs();
        if last < 1e-20 * s.value().abs() && k >= 2 {
            break;
        }
        k += 1;
    }
    // |(f*μ)(p^k)| ≤ 6k p^{-k}, so the remainder after k is below twice the last term
    let mut lf = LocalFactor::approximate(p, s.value(), 2.0 * last + 1e-16 * (k as f64));
    lf.method = Method::TruncatedSum;
    lf.nu_used = k;
    lf
}

/// `c₁′ = ∏_p ∑_{k≥0} (f*μ)(p^k)/p^k`.
pub fn c1_prime_constant(prime_cut: u64) -> Result<EulerProduct> {
    let z = 1.0 / prime_cut as f64;
    euler_product(
        |p| Ok(c1_prime_local(p)),
        prime_cut,
        TailModel::Explicit {
            k_lo: 4.0 - 4.0 * z,
            k_hi: 4.0 + 2.0 * z,
        },
    )
}

/// Product form of the `c₁′` local factor at `p`: `64/33` at 2 and
/// `(1+2/p)⁻¹(1−1/p)⁻²(1+1/p)⁻¹(1+1/p+1/p²)` otherwise.
pub fn c1_prime_closed_local(p: u64) -> Rational {
    if p == 2 {
        return Rational::new(64, 33);
    }
    let pi = p as i128;
    // p²(p²+p+1) / ((p+2)(p−1)²(p+1))
    Rational::new(pi * pi * (pi * pi + pi + 1), (pi + 2) * (pi - 1) * (pi - 1) * (pi + 1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShResult {
    pub h: u64,
    /// Exact `S(H)` as `"n/d"` when `H ≤` [`SH_EXACT_CAP`].
    pub exact: Option<String>,
    pub value: f64,
    pub c1_prime: f64,
    pub predicted: f64,
    /// `(S(H) − c₁′H)/√H`.
    pub normalized_deviation: f64,
}

/// Largest `H` for which `S(H)` is accumulated exactly.
pub const SH_EXACT_CAP: u64 = 2_000;

/// `S(H) = ∑_{h≤H} f(h)` and its comparison with `c₁′H`.
pub fn s_h(h_max: u64, c1p: &EulerProduct) -> Result<ShResult> {
    if h_max == 0 {
        return Err(Error::Domain("S(H) needs H ≥ 1".into()));
    }
    let exact = if h_max <= SH_EXACT_CAP {
        let mut s = BigRational::zero();
        for h in 1..=h_max {
            s += f_of(h)?;
        }
        Some(s)
    } else {
        None
    };
    let value = match &exact {
        Some(s) => big_to_f64(s),
        None => {
            let t = build_tables(h_max)?;
            let mut acc = Neumaier::new();
            for h in 1..=h_max {
                let fac = t.factorize(h)?;
                acc.add(fac.factors.iter().map(|&(p, e)| f_prime_power_f64(p, e)).product());
            }
            acc.value()
        }
    };
    let predicted = c1p.value * h_max as f64;
    Ok(ShResult {
        h: h_max,
        exact: exact.map(|s| format!("{}/{}", s.numer(), s.denom())),
        value,
        c1_prime: c1p.value,
        predicted,
        normalized_deviation: (value - predicted) / (h_max as f64).sqrt(),
    })
}
