//! Point counting on the bilinear hypersurface `x·y = 0` in `P² × P²`.
//!
//! `N₀(X)` counts `(u, v) ∈ (ℤ∖{0})⁶` with `|v| ≤ v₀ ≤ √X`, `|u| ≤ X/v₀`
//! and `u·v = 0`; `N(B)` counts primitive pairs under the anticanonical
//! height `max |xᵢyⱼ|² ≤ B`.

use num_integer::Integer;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{isqrt, mobius_trial};
use crate::error::{Error, Result};

/// Largest `X` accepted by [`count_n0`].
pub const MAX_N0_X: u64 = 100_000;
/// Largest `B` accepted by [`count_n`].
pub const MAX_N_B: f64 = 1e9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BilinearCount {
    pub x: u64,
    pub n0: u128,
    /// Contribution of `|v₁| = v₀` or `|v₂| = v₀`.
    pub boundary_terms: u128,
    pub n1: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightCount {
    pub b: f64,
    pub n_of_b: u128,
}

/// `⌊a/b⌋` and `⌈a/b⌉`.
fn floor_div(a: i64, b: i64) -> i64 {
    Integer::div_floor(&a, &b)
}

fn ceil_div(a: i64, b: i64) -> i64 {
    -Integer::div_floor(&-a, &b)
}

/// Multiples-of-`m` shifted by `r` inside `[lo, hi]`.
fn count_progression(lo: i64, hi: i64, r: i64, m: i64) -> i64 {
    if lo > hi {
        return 0;
    }
    floor_div(hi - r, m) - ceil_div(lo - r, m) + 1
}

fn mod_inverse(a: i64, m: i64) -> i64 {
    if m == 1 {
        return 0;
    }
    let e = a.extended_gcd(&m);
    debug_assert_eq!(e.gcd, 1);
    e.x.rem_euclid(m)
}

/// `#{(u₀,u₁,u₂) nonzero : |uᵢ| ≤ U, u₂ ∈ [lo₂,hi₂], v₀u₀ = a·u₁ + b·u₂}`
/// with `b > 0`.
fn count_u(v0: i64, a: i64, b: i64, big_u: i64, lo2: i64, hi2: i64) -> u128 {
    let g = b.gcd(&v0);
    let m = v0 / g;
    let inv = mod_inverse((b / g).rem_euclid(m), m);
    let bound = v0 * big_u;
    let mut total = 0i64;
    for u1 in -big_u..=big_u {
        if u1 == 0 {
            continue;
        }
        let au = a * u1;
        if au % g != 0 {
            continue;
        }
        // b·u₂ ≡ −a·u₁ (mod v₀)
        let r = if m == 1 { 0 } else { ((-au / g).rem_euclid(m) * inv).rem_euclid(m) };
        let lo = ceil_div(-bound - au, b).max(lo2);
        let hi = floor_div(bound - au, b).min(hi2);
        let mut c = count_progression(lo, hi, r, m);
        if c == 0 {
            continue;
        }
        if lo <= 0 && 0 <= hi && r == 0 {
            c -= 1;
        }
        // u₀ = 0
        if au % b == 0 {
            let u2 = -au / b;
            if lo <= u2 && u2 <= hi && (u2 - r) % m == 0 {
                c -= 1;
            }
        }
        total += c;
    }
    total as u128
}

/// `N₀(X)`, the boundary contribution and `N₁(X)`, each counted exactly.
pub fn count_n0(x: u64) -> Result<BilinearCount> {
    if x == 0 {
        return Err(Error::Domain("N₀(X) needs X ≥ 1".into()));
    }
    if x > MAX_N0_X {
        return Err(Error::size("N₀ scale X", x as u128, MAX_N0_X as u128));
    }
    let v0_max = isqrt(x) as i64;
    let xi = x as i64;
    // Flipping the sign of (uᵢ, vᵢ) for i = 1, 2 is a bijection, so only
    // v₁, v₂ > 0 are enumerated and weighted by 4.
    let per_v0: Vec<(u128, u128, u128)> = (1..=v0_max)
        .into_par_iter()
        .map(|v0| {
            let big_u = xi / v0;
            let (mut all, mut boundary, mut n1) = (0u128, 0u128, 0u128);
            for v1 in 1..=v0 {
                for v2 in 1..=v0 {
                    let c = count_u(v0, -v1, v2, big_u, -big_u, big_u);
                    all += 4 * c;
                    if v1 == v0 || v2 == v0 {
                        boundary += 4 * c;
                    } else {
                        // u₀v₀ + u₁v₁ = u₂v₂ with u₂ > 0
                        n1 += count_u(v0, -v1, v2, big_u, 1, big_u);
                    }
                }
            }
            (all, boundary, n1)
        })
        .collect();
    let (n0, boundary_terms, n1) = per_v0.into_iter().fold((0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    Ok(BilinearCount { x, n0, boundary_terms, n1 })
}

/// Counts `N₀(X)` and confirms `N₀ = 8N₁ + boundary`.
pub fn reduction_check(x: u64) -> Result<BilinearCount> {
    let c = count_n0(x)?;
    if c.n0 != 8 * c.n1 + c.boundary_terms {
        return Err(Error::Invariant(format!(
            "N₀({x}) = {} but 8·N₁ + boundary = 8·{} + {}",
            c.n0, c.n1, c.boundary_terms
        )));
    }
    Ok(c)
}

/// `⌊√B⌋` for the height bound; `max|xᵢyⱼ|² ≤ B` iff `max|xᵢyⱼ| ≤ ⌊√⌊B⌋⌋`.
fn height_bound(b: f64) -> u64 {
    if b < 1.0 {
        return 0;
    }
    isqrt(b.floor() as u64)
}

type V3 = [i64; 3];

fn dot(a: V3, b: V3) -> i128 {
    (0..3).map(|i| a[i] as i128 * b[i] as i128).sum()
}

fn cross(a: V3, b: V3) -> V3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// A Lagrange-reduced basis of `{y ∈ ℤ³ : x·y = 0}` for primitive `x`.
fn orthogonal_basis(x: V3) -> [V3; 2] {
    let [a, b, c] = x;
    let e = a.extended_gcd(&b);
    let g = e.gcd;
    let mut v1 = [b / g, -a / g, 0];
    let mut v2 = [-c * e.x, -c * e.y, g];
    loop {
        if dot(v1, v1) > dot(v2, v2) {
            std::mem::swap(&mut v1, &mut v2);
        }
        let n = dot(v1, v1);
        let q = Integer::div_floor(&(2 * dot(v1, v2) + n), &(2 * n)) as i64;
        if q == 0 {
            break;
        }
        for i in 0..3 {
            v2[i] -= q * v1[i];
        }
        if dot(v2, v2) >= n {
            break;
        }
    }
    [v1, v2]
}

/// Counts `y` in the plane `x⊥` with nonzero components and `|y| ≤ T`.
struct PlaneCounter {
    g: [V3; 2],
    /// `s = y·w / det` recovers the first coordinate.
    w: V3,
    det: i128,
    /// Primitive lattice vectors spanning `yᵢ = 0`.
    axis_norms: [i64; 3],
}

impl PlaneCounter {
    fn new(x: V3) -> Self {
        let g = orthogonal_basis(x);
        let w = cross(g[1], x);
        let det = dot(g[0], w);
        let mut axis_norms = [0; 3];
        for (i, slot) in axis_norms.iter_mut().enumerate() {
            let (p, q) = (g[1][i], -g[0][i]);
            let h = p.gcd(&q);
            let z: Vec<i64> = (0..3).map(|j| (p / h) * g[0][j] + (q / h) * g[1][j]).collect();
            *slot = z.iter().map(|v| v.abs()).max().unwrap();
        }
        Self { g, w, det, axis_norms }
    }

    fn count(&self, t: i64) -> i64 {
        if t <= 0 {
            return 0;
        }
        let l1: i128 = self.w.iter().map(|v| v.unsigned_abs() as i128).sum();
        let s_max = (t as i128 * l1 / self.det.abs()) as i64;
        let mut points = 0i64;
        for s in -s_max..=s_max {
            let (mut lo, mut hi) = (i64::MIN, i64::MAX);
            for i in 0..3 {
                let (a, b) = (self.g[0][i], self.g[1][i]);
                let base = s * a;
                if b == 0 {
                    if base.abs() > t {
                        lo = 1;
                        hi = 0;
                    }
                    continue;
                }
                let (l, h) = if b > 0 {
                    (ceil_div(-t - base, b), floor_div(t - base, b))
                } else {
                    (ceil_div(t - base, b), floor_div(-t - base, b))
                };
                lo = lo.max(l);
                hi = hi.min(h);
            }
            if hi >= lo {
                points += hi - lo + 1;
            }
        }
        let on_axes: i64 = self.axis_norms.iter().map(|&n| 2 * (t / n)).sum();
        points - 1 - on_axes
    }

    /// Primitive vectors among [`Self::count`].
    fn primitive(&self, t: i64) -> i64 {
        (1..=t).map(|d| mobius_trial(d as u64) * self.count(t / d)).sum()
    }
}

fn count_pairs(m: u64, primitive: bool) -> u128 {
    let m = m as i64;
    let k_max = isqrt(m as u64) as i64;
    // x with positive components, weighted by 8 (flip xᵢ and yᵢ together)
    let per_x0: Vec<i128> = (1..=k_max)
        .into_par_iter()
        .map(|x0| {
            let mut total = 0i128;
            for x1 in 1..=k_max {
                for x2 in 1..=k_max {
                    let g = x0.gcd(&x1).gcd(&x2);
                    if primitive && g != 1 {
                        continue;
                    }
                    let k = x0.max(x1).max(x2);
                    let pc = PlaneCounter::new([x0 / g, x1 / g, x2 / g]);
                    let f = |t: i64| if primitive { pc.primitive(t) } else { pc.count(t) } as i128;
                    let below = f(k - 1);
                    // pairs with |x| ≤ |y| twice, minus the diagonal |x| = |y|
                    total += 2 * (f(m / k) - below) - (f(k) - below);
                }
            }
            8 * total
        })
        .collect();
    per_x0.into_iter().sum::<i128>() as u128
}

/// `N(B) = ¼ #{(x, y) ∈ ℤ*³ × ℤ*³ : max|xᵢyⱼ|² ≤ B, x·y = 0}`.
pub fn count_n(b: f64) -> Result<HeightCount> {
    count_n_with(b, true)
}

/// As [`count_n`]; `primitive = false` drops the primitivity filter.
pub fn count_n_with(b: f64, primitive: bool) -> Result<HeightCount> {
    if b.is_nan() {
        return Err(Error::Domain("height bound is NaN".into()));
    }
    if b > MAX_N_B {
        return Err(Error::size("height bound B", b as u128, MAX_N_B as u128));
    }
    let m = height_bound(b);
    if m == 0 {
        return Ok(HeightCount { b, n_of_b: 0 });
    }
    let pairs = count_pairs(m, primitive);
    if !pairs.is_multiple_of(4) {
        return Err(Error::Invariant(format!("pair count {pairs} at B = {b} is not divisible by 4")));
    }
    Ok(HeightCount { b, n_of_b: pairs / 4 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n0_brute(x: i64) -> u128 {
        let mut n = 0;
        let v0_max = isqrt(x as u64) as i64;
        for v0 in 1..=v0_max {
            let u = x / v0;
            for v1 in -v0..=v0 {
                for v2 in -v0..=v0 {
                    for u0 in -u..=u {
                        for u1 in -u..=u {
                            for u2 in -u..=u {
                                if v1 * v2 * u0 * u1 * u2 != 0 && u0 * v0 + u1 * v1 + u2 * v2 == 0 {
                                    n += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
        n
    }

    #[test]
    fn n0_matches_brute_force() {
        assert_eq!(count_n0(1).unwrap().n0, 0);
        for x in [2, 4, 9, 17, 30] {
            assert_eq!(count_n0(x).unwrap().n0, n0_brute(x as i64), "X = {x}");
        }
    }

    #[test]
    fn reduction_holds() {
        for x in [1, 10, 100, 333] {
            reduction_check(x).unwrap();
        }
    }

    fn n_brute(b: f64, primitive: bool) -> u128 {
        let m = height_bound(b) as i64;
        let mut n = 0;
        let r = m;
        for x0 in -r..=r {
            for x1 in -r..=r {
                for x2 in -r..=r {
                    let x = [x0, x1, x2];
                    if x.contains(&0) || (primitive && x0.gcd(&x1).gcd(&x2) != 1) {
                        continue;
                    }
                    let kx = x.iter().map(|v| v.abs()).max().unwrap();
                    let ty = m / kx;
                    for y0 in -ty..=ty {
                        for y1 in -ty..=ty {
                            let s = x0 * y0 + x1 * y1;
                            if s % x2 != 0 {
                                continue;
                            }
                            let y2 = -s / x2;
                            let y = [y0, y1, y2];
                            if y.contains(&0) || y2.abs() > ty || (primitive && y0.gcd(&y1).gcd(&y2) != 1) {
                                continue;
                            }
                            n += 1;
                        }
                    }
                }
            }
        }
        n / 4
    }

    #[test]
    fn n_matches_brute_force() {
        assert_eq!(count_n(0.5).unwrap().n_of_b, 0);
        for b in [1.0, 4.0, 16.0, 50.0, 144.0, 400.5] {
            assert_eq!(count_n(b).unwrap().n_of_b, n_brute(b, true), "B = {b}");
            assert_eq!(count_n_with(b, false).unwrap().n_of_b, n_brute(b, false), "B = {b}");
        }
    }

    #[test]
    fn orthogonal_basis_spans_plane() {
        for x in [[1, 1, 1], [2, 3, 5], [6, 10, 15], [7, 1, 100]] {
            let [g1, g2] = orthogonal_basis(x);
            assert_eq!(dot(g1, x), 0);
            assert_eq!(dot(g2, x), 0);
            let c = cross(g1, g2);
            assert!(c == x || c == [-x[0], -x[1], -x[2]], "{x:?}: {c:?}");
        }
    }
}
