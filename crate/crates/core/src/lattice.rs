//! Congruence lattices `Λ(h) = {x ∈ ℤ² : hᵢ | Lᵢ(x)}` and their densities.

use num_integer::Integer;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{ArithTables, Triple};
use crate::error::{Error, Result};
use crate::forms::FormTriple;

/// Default cap on `h₁h₂h₃` for [`rho_bruteforce`].
pub const DEFAULT_BRUTEFORCE_CAP: u64 = 10_000;

/// Largest `lcm(h₁,h₂,h₃)` handled by [`lattice_of`]; keeps every product
/// in the reduction below `2¹²⁶`.
pub const MAX_LATTICE_MODULUS: u64 = 1 << 62;

/// `2/√3`: the constant in `|e₁||e₂| ≤ κ·det` for a Gauss-reduced basis.
pub const KAPPA: f64 = 1.154_700_538_379_251_5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CongruenceLattice {
    pub moduli: Triple,
    /// Gauss-reduced basis with `|e₁| ≤ |e₂|` (Euclidean norm).
    pub basis: [[i64; 2]; 2],
    pub determinant: u128,
    /// `ρ = (h₁h₂h₃)²/det`; `None` when it does not fit in 128 bits.
    pub rho: Option<u128>,
    pub delta_div: u64,
}

impl CongruenceLattice {
    pub fn contains(&self, x: [i64; 2]) -> bool {
        let [e1, e2] = self.basis;
        let det = e1[0] as i128 * e2[1] as i128 - e2[0] as i128 * e1[1] as i128;
        let v1 = x[0] as i128 * e2[1] as i128 - e2[0] as i128 * x[1] as i128;
        let v2 = e1[0] as i128 * x[1] as i128 - x[0] as i128 * e1[1] as i128;
        v1 % det == 0 && v2 % det == 0
    }
}

fn modulus_of(h: Triple) -> Result<u64> {
    if h.contains(&0) {
        return Err(Error::Domain(format!("moduli must be positive, got {h:?}")));
    }
    let n = h[0].lcm(&h[1]).lcm(&h[2]);
    if n > MAX_LATTICE_MODULUS {
        return Err(Error::size("lattice modulus lcm(h)", n as u128, MAX_LATTICE_MODULUS as u128));
    }
    Ok(n)
}

fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    let e = a.extended_gcd(&b);
    (e.gcd, e.x, e.y)
}

/// Hermite form `(a, b), (0, d)` of a lattice containing `Nℤ²`, with
/// `a, d | N` and `0 ≤ b < d`.
#[derive(Debug, Clone, Copy)]
struct Hermite {
    a: i128,
    b: i128,
    d: i128,
    n: i128,
}

impl Hermite {
    fn full(n: i128) -> Self {
        Self { a: 1, b: 0, d: 1, n }
    }

    /// Lattice generated by `(N,0), (0,N)` and the given vectors.
    fn generated(n: i128, gens: &[[i128; 2]]) -> Self {
        let (mut a, mut b, mut d) = (n, 0i128, n);
        for g in gens {
            let x = g[0].rem_euclid(n);
            let y = g[1].rem_euclid(n);
            if x == 0 {
                d = d.gcd(&y);
                continue;
            }
            let (gg, s, t) = ext_gcd(a, x);
            let nb = (s * b % n + t * y % n).rem_euclid(n);
            // (x/g)(a,b) − (a/g)(x,y) has first coordinate zero
            let z = ((x / gg) % n * b % n - (a / gg) % n * y % n).rem_euclid(n);
            d = d.gcd(&z);
            a = gg;
            b = nb;
        }
        // (N/a)·(a,b) = (N, N b / a) so N b / a lies in the second column
        let z = ((n / a) * b).rem_euclid(n);
        d = d.gcd(&z);
        Self {
            a,
            b: b.rem_euclid(d),
            d,
            n,
        }
    }

    fn det(&self) -> i128 {
        self.a * self.d
    }

    fn basis(&self) -> [[i128; 2]; 2] {
        [[self.a, self.b], [0, self.d]]
    }

    /// Intersect with `{x : h | a·x₁ + b·x₂}`, where `h | N`.
    fn restrict(&self, form: (i128, i128), h: i128) -> Self {
        if h == 1 {
            return *self;
        }
        let [v1, v2] = self.basis();
        let val = |v: [i128; 2]| (form.0 * v[0] + form.1 * v[1]).rem_euclid(h);
        let (alpha, beta) = (val(v1), val(v2));
        let g = alpha.gcd(&beta).gcd(&h);
        let hp = h / g;
        if hp == 1 {
            return *self;
        }
        let (ap, bp) = (alpha / g, beta / g);
        // some ap + k·bp is a unit mod hp because gcd(ap, bp, hp) = 1
        let mut k = 0i128;
        while (ap + k * bp).gcd(&hp) != 1 {
            k += 1;
        }
        let u = (ap + k * bp).rem_euclid(hp);
        let w1 = [v1[0] % self.n, (v1[1] + k * v2[1]) % self.n];
        let w2 = v2;
        let uinv = ext_gcd(u, hp).1.rem_euclid(hp);
        let c = (-(bp % hp) * uinv).rem_euclid(hp);
        let g1 = [hp * w1[0], hp * w1[1]];
        let g2 = [c * w1[0] + w2[0], c * w1[1] + w2[1]];
        Hermite::generated(self.n, &[g1, g2])
    }
}

fn hermite_of(h: Triple, forms: &FormTriple) -> Result<Hermite> {
    let n = modulus_of(h)? as i128;
    let mut lat = Hermite::full(n);
    for (f, &hi) in forms.forms().iter().zip(h.iter()) {
        lat = lat.restrict((f.a as i128, f.b as i128), hi as i128);
    }
    Ok(lat)
}

fn norm2(v: [i128; 2]) -> i128 {
    v[0] * v[0] + v[1] * v[1]
}

fn normalize_sign(v: [i128; 2]) -> [i128; 2] {
    if v[0] < 0 || (v[0] == 0 && v[1] < 0) {
        [-v[0], -v[1]]
    } else {
        v
    }
}

/// Two-dimensional Gauss (Lagrange) reduction. Equal norms are ordered
/// lexicographically after making the leading nonzero coordinate positive.
pub fn gauss_reduce(basis: [[i128; 2]; 2]) -> [[i128; 2]; 2] {
    let [mut u, mut v] = basis;
    if norm2(u) > norm2(v) {
        std::mem::swap(&mut u, &mut v);
    }
    loop {
        let nu = norm2(u);
        let dot = u[0] * v[0] + u[1] * v[1];
        // nearest integer to dot/nu
        let q = (2 * dot + nu).div_euclid(2 * nu);
        v = [v[0] - q * u[0], v[1] - q * u[1]];
        if norm2(v) >= nu {
            break;
        }
        std::mem::swap(&mut u, &mut v);
    }
    let (mut u, mut v) = (normalize_sign(u), normalize_sign(v));
    if norm2(u) == norm2(v) && v > u {
        std::mem::swap(&mut u, &mut v);
    }
    // with |u| = |v| and u·v < 0, u + v is as short; prefer acute pairs
    if u[0] * v[0] + u[1] * v[1] < 0 && norm2([u[0] + v[0], u[1] + v[1]]) == norm2(v) {
        v = normalize_sign([u[0] + v[0], u[1] + v[1]]);
    }
    [u, v]
}

fn pow_u128(p: u64, e: u32) -> Result<u128> {
    (p as u128).checked_pow(e).ok_or_else(|| Error::overflow(format!("{p}^{e}")))
}

/// `Λ(D)` with a reduced basis, determinant, density and `δ(D)`.
pub fn lattice_of(d: Triple, forms: &FormTriple) -> Result<CongruenceLattice> {
    let herm = hermite_of(d, forms)?;
    let det = herm.det() as u128;
    let [e1, e2] = gauss_reduce(herm.basis());
    let basis = [[e1[0] as i64, e1[1] as i64], [e2[0] as i64, e2[1] as i64]];
    let delta_div = (basis[0][0].unsigned_abs())
        .gcd(&basis[0][1].unsigned_abs())
        .gcd(&basis[1][0].unsigned_abs())
        .gcd(&basis[1][1].unsigned_abs());
    let h = (d[0] as u128).checked_mul(d[1] as u128).and_then(|x| x.checked_mul(d[2] as u128));
    let rho = h.and_then(|h| h.checked_mul(h)).map(|h2| h2 / det);
    Ok(CongruenceLattice {
        moduli: d,
        basis,
        determinant: det,
        rho,
        delta_div,
    })
}

/// `ρ(h)` by scanning every residue pair in `[0, h₁h₂h₃)²`.
pub fn rho_bruteforce(h: Triple, forms: &FormTriple) -> Result<u64> {
    rho_bruteforce_with_cap(h, forms, DEFAULT_BRUTEFORCE_CAP)
}

pub fn rho_bruteforce_with_cap(h: Triple, forms: &FormTriple, cap: u64) -> Result<u64> {
    if h.contains(&0) {
        return Err(Error::Domain(format!("moduli must be positive, got {h:?}")));
    }
    let big = h[0] as u128 * h[1] as u128 * h[2] as u128;
    if big > cap as u128 {
        return Err(Error::size("brute-force ρ modulus h₁h₂h₃", big, cap as u128));
    }
    let m = big as i64;
    let fs = forms.forms();
    let hs = h.map(|x| x as i64);
    let count = (0..m)
        .into_par_iter()
        .map(|x1| {
            let mut c = 0u64;
            for x2 in 0..m {
                if (0..3).all(|i| (fs[i].a * x1 + fs[i].b * x2) % hs[i] == 0) {
                    c += 1;
                }
            }
            c
        })
        .sum();
    Ok(count)
}

/// `ρ(p^{e₁}, p^{e₂}, p^{e₃})` by digit-by-digit lifting: solutions modulo
/// `p^j` are extended to `p^{j+1}` and pruned as soon as a congruence fails.
pub fn rho_lifting_count(p: u64, e: [u32; 3], forms: &FormTriple, max_nodes: u64) -> Result<u128> {
    let top = *e.iter().max().unwrap_or(&0);
    if top == 0 {
        return Ok(1);
    }
    let pm = pow_u128(p, top)?;
    if pm > i64::MAX as u128 / 64 {
        return Err(Error::overflow(format!("{p}^{top} in lifting count")));
    }
    let fs = forms.forms();
    let mut level: Vec<[i128; 2]> = vec![[0, 0]];
    let mut pj: i128 = 1;
    let mut nodes = 0u64;
    for j in 1..=top {
        let next_pj = pj * p as i128;
        let mut next = Vec::new();
        for x in &level {
            for d1 in 0..p as i128 {
                for d2 in 0..p as i128 {
                    let y = [x[0] + d1 * pj, x[1] + d2 * pj];
                    let ok = (0..3).all(|i| {
                        let need = e[i].min(j);
                        let m = (p as i128).pow(need);
                        (fs[i].a as i128 * y[0] + fs[i].b as i128 * y[1]) % m == 0
                    });
                    if ok {
                        next.push(y);
                    }
                }
            }
            nodes += p * p;
            if nodes > max_nodes {
                return Err(Error::size("lifting search nodes", nodes as u128, max_nodes as u128));
            }
        }
        level = next;
        pj = next_pj;
    }
    // residues mod p^E with E = e₁+e₂+e₃ that reduce to the solutions mod p^top
    let extra = pow_u128(p, e[0] + e[1] + e[2] - top)?;
    (level.len() as u128)
        .checked_mul(extra)
        .and_then(|x| x.checked_mul(extra))
        .ok_or_else(|| Error::overflow("lifting count"))
}

/// Exponent of the upper bound
/// `2eᵢ + eⱼ + e_k + min{eⱼ, v_p(Δ)} + min{e_k, v_p(ℓ_k)}` for sorted `eᵢ ≤ eⱼ ≤ e_k`.
pub fn rho_upper_bound_exponent(p: u64, e: [u32; 3], forms: &FormTriple) -> u32 {
    let mut idx = [0usize, 1, 2];
    idx.sort_by_key(|&k| (e[k], k));
    let [i, j, k] = idx;
    let vd = crate::arith::valuation(forms.delta() as i128, p);
    let vl = crate::arith::valuation(forms.content()[k] as i128, p);
    2 * e[i] + e[j] + e[k] + e[j].min(vd) + e[k].min(vl)
}

/// Closed-form exponent for the progression triple at `p = 2`.
fn progression_exponent_at_two(nu: [u32; 3]) -> u32 {
    let s = nu[0] + nu[1] + nu[2];
    if nu[0].min(nu[2]) <= nu[1] {
        s + nu.iter().min().copied().unwrap_or(0)
    } else {
        s + nu[1] + 1
    }
}

/// Exponent `r` with `ρ(p^{e₁}, p^{e₂}, p^{e₃}) = p^r`.
pub fn rho_prime_power_exponent(p: u64, e: [u32; 3], forms: &FormTriple) -> Result<u32> {
    let nonzero = e.iter().filter(|&&x| x > 0).count();
    if nonzero == 0 {
        return Ok(0);
    }
    if nonzero == 1 {
        let i = e.iter().position(|&x| x > 0).expect("one nonzero exponent");
        let lam = crate::arith::valuation(forms.content()[i] as i128, p);
        return Ok(e[i] + e[i].min(lam));
    }
    if !forms.delta().is_multiple_of(p) {
        let mut s = e;
        s.sort_unstable();
        return Ok(2 * s[0] + s[1] + s[2]);
    }
    if p == 2 && forms.is_progression() {
        return Ok(progression_exponent_at_two(e));
    }
    let r = lattice_exponent(p, e, forms)?;
    let bound = rho_upper_bound_exponent(p, e, forms);
    if r > bound {
        return Err(Error::Invariant(format!(
            "ρ({p}^{e:?}) = {p}^{r} exceeds the upper bound {p}^{bound}"
        )));
    }
    Ok(r)
}

/// `2(e₁+e₂+e₃) − v_p(det Λ)`, from the Hermite form of the lattice.
pub fn lattice_exponent(p: u64, e: [u32; 3], forms: &FormTriple) -> Result<u32> {
    let top = *e.iter().max().unwrap_or(&0);
    let pm = (p as u128).checked_pow(top).filter(|&x| x <= MAX_LATTICE_MODULUS as u128);
    let Some(_) = pm else {
        return Err(Error::size(
            "prime-power lattice modulus",
            (p as f64).powi(top as i32).min(u128::MAX as f64) as u128,
            MAX_LATTICE_MODULUS as u128,
        ));
    };
    let h = e.map(|x| p.pow(x));
    let herm = hermite_of(h, forms)?;
    let v = crate::arith::valuation(herm.det(), p);
    Ok(2 * (e[0] + e[1] + e[2]) - v)
}

/// `ρ` at a prime power; see [`rho_prime_power_exponent`].
pub fn rho_prime_power(p: u64, e: [u32; 3], forms: &FormTriple) -> Result<u128> {
    pow_u128(p, rho_prime_power_exponent(p, e, forms)?)
}

/// `ρ(h)` as the product of its prime-power parts.
pub fn rho(h: Triple, forms: &FormTriple, tables: &ArithTables) -> Result<u128> {
    if h.contains(&0) {
        return Err(Error::Domain(format!("moduli must be positive, got {h:?}")));
    }
    let fact = [tables.factorize(h[0])?, tables.factorize(h[1])?, tables.factorize(h[2])?];
    let mut primes: Vec<u64> = fact.iter().flat_map(|f| f.primes()).collect();
    primes.sort_unstable();
    primes.dedup();
    let mut out: u128 = 1;
    for p in primes {
        let e = [fact[0].valuation(p), fact[1].valuation(p), fact[2].valuation(p)];
        out = out
            .checked_mul(rho_prime_power(p, e, forms)?)
            .ok_or_else(|| Error::overflow(format!("ρ({h:?})")))?;
    }
    Ok(out)
}

/// `δ(D)`: largest `δ` with `Λ(D) ⊆ δℤ²`.
pub fn delta_div(d: Triple, forms: &FormTriple) -> Result<u64> {
    Ok(lattice_of(d, forms)?.delta_div)
}
