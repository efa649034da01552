//! Binary linear forms, form triples and planar regions.

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `L(x) = a·x₁ + b·x₂`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LinearForm {
    pub a: i64,
    pub b: i64,
}

impl LinearForm {
    pub fn new(a: i64, b: i64) -> Result<Self> {
        if a == 0 && b == 0 {
            return Err(Error::Domain("linear form must be nonzero".into()));
        }
        Ok(Self { a, b })
    }

    #[inline]
    pub fn eval(&self, x: [i64; 2]) -> i64 {
        self.a * x[0] + self.b * x[1]
    }

    #[inline]
    pub fn eval_f64(&self, x: [f64; 2]) -> f64 {
        self.a as f64 * x[0] + self.b as f64 * x[1]
    }

    /// Content: gcd of the coefficients.
    pub fn content(&self) -> u64 {
        self.a.unsigned_abs().gcd(&self.b.unsigned_abs())
    }

    /// Largest coefficient modulus ‖L‖.
    pub fn norm(&self) -> u64 {
        self.a.unsigned_abs().max(self.b.unsigned_abs())
    }

    pub fn primitive_part(&self) -> LinearForm {
        let c = self.content() as i64;
        LinearForm {
            a: self.a / c,
            b: self.b / c,
        }
    }

    pub fn scaled(&self, k: i64) -> LinearForm {
        LinearForm {
            a: self.a * k,
            b: self.b * k,
        }
    }
}

/// Resultant `aᵢbⱼ − aⱼbᵢ`.
pub fn resultant(li: &LinearForm, lj: &LinearForm) -> i64 {
    li.a * lj.b - lj.a * li.b
}

/// Three pairwise linearly independent integer binary linear forms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "[[i64; 2]; 3]", into = "[[i64; 2]; 3]")]
pub struct FormTriple {
    forms: [LinearForm; 3],
    resultants: [i64; 3],
    delta: u64,
    content: [u64; 3],
    primitive: [LinearForm; 3],
    l_star: u64,
    l_inf: u64,
}

impl FormTriple {
    pub fn new(forms: [LinearForm; 3]) -> Result<Self> {
        for f in &forms {
            if f.a == 0 && f.b == 0 {
                return Err(Error::Domain("linear form must be nonzero".into()));
            }
        }
        let resultants = [
            resultant(&forms[0], &forms[1]),
            resultant(&forms[0], &forms[2]),
            resultant(&forms[1], &forms[2]),
        ];
        if let Some(k) = resultants.iter().position(|&r| r == 0) {
            let (i, j) = [(1, 2), (1, 3), (2, 3)][k];
            return Err(Error::Domain(format!("forms L{i} and L{j} are linearly dependent")));
        }
        let delta = resultants
            .iter()
            .try_fold(1u64, |acc, r| acc.checked_mul(r.unsigned_abs()))
            .ok_or_else(|| Error::overflow("Δ = |Δ₁₂Δ₁₃Δ₂₃|"))?;
        let content = [forms[0].content(), forms[1].content(), forms[2].content()];
        let primitive = [forms[0].primitive_part(), forms[1].primitive_part(), forms[2].primitive_part()];
        let l_star = content[0].lcm(&content[1]).lcm(&content[2]);
        let l_inf = forms.iter().map(LinearForm::norm).max().unwrap_or(0);
        Ok(Self {
            forms,
            resultants,
            delta,
            content,
            primitive,
            l_star,
            l_inf,
        })
    }

    pub fn from_coefficients(c: [[i64; 2]; 3]) -> Result<Self> {
        Self::new([
            LinearForm::new(c[0][0], c[0][1])?,
            LinearForm::new(c[1][0], c[1][1])?,
            LinearForm::new(c[2][0], c[2][1])?,
        ])
    }

    /// `(x₁ − x₂, x₁, x₁ + x₂)`: the values `n − h, n, n + h`.
    pub fn progression() -> Self {
        Self::from_coefficients([[1, -1], [1, 0], [1, 1]]).expect("independent forms")
    }

    /// `(x₁, x₂, x₁ + x₂)`.
    pub fn coordinate_sum() -> Self {
        Self::from_coefficients([[1, 0], [0, 1], [1, 1]]).expect("independent forms")
    }

    pub fn is_progression(&self) -> bool {
        self.coefficients() == [[1, -1], [1, 0], [1, 1]]
    }

    pub fn forms(&self) -> &[LinearForm; 3] {
        &self.forms
    }

    pub fn coefficients(&self) -> [[i64; 2]; 3] {
        self.forms.map(|f| [f.a, f.b])
    }

    /// `[Δ₁₂, Δ₁₃, Δ₂₃]`.
    pub fn resultants(&self) -> [i64; 3] {
        self.resultants
    }

    /// `Δ = |Δ₁₂Δ₁₃Δ₂₃|`.
    pub fn delta(&self) -> u64 {
        self.delta
    }

    /// Contents `ℓᵢ` with `Lᵢ = ℓᵢ Lᵢ*`.
    pub fn content(&self) -> [u64; 3] {
        self.content
    }

    pub fn primitive_parts(&self) -> &[LinearForm; 3] {
        &self.primitive
    }

    /// `L_* = lcm(ℓ₁, ℓ₂, ℓ₃)`.
    pub fn l_star(&self) -> u64 {
        self.l_star
    }

    /// `L_∞`, the largest coefficient modulus over the three forms.
    pub fn l_inf(&self) -> u64 {
        self.l_inf
    }

    #[inline]
    pub fn eval(&self, x: [i64; 2]) -> [i64; 3] {
        [self.forms[0].eval(x), self.forms[1].eval(x), self.forms[2].eval(x)]
    }

    /// Primes dividing `Δ·ℓ₁ℓ₂ℓ₃`, in increasing order.
    pub fn bad_primes(&self) -> Vec<u64> {
        let mut out = Vec::new();
        let mut ns = vec![self.delta];
        ns.extend(self.content);
        for n in ns {
            let mut m = n;
            let mut p = 2;
            while p * p <= m {
                if m % p == 0 {
                    out.push(p);
                    while m % p == 0 {
                        m /= p;
                    }
                }
                p += 1;
            }
            if m > 1 {
                out.push(m);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// The same triple with every form multiplied by `k`.
    pub fn scaled(&self, k: i64) -> Result<Self> {
        Self::new(self.forms.map(|f| f.scaled(k)))
    }
}

impl TryFrom<[[i64; 2]; 3]> for FormTriple {
    type Error = Error;

    fn try_from(c: [[i64; 2]; 3]) -> Result<Self> {
        Self::from_coefficients(c)
    }
}

impl From<FormTriple> for [[i64; 2]; 3] {
    fn from(t: FormTriple) -> Self {
        t.coefficients()
    }
}

/// Relative slack used when testing lattice points against region
/// boundaries computed in floating point.
const BOUNDARY_EPS: f64 = 1e-9;

/// Ratio bound `∂(R) ≤ BOUNDARY_RATIO · r_∞` checked by [`Region`]
/// constructors; 8 is the perimeter-to-radius ratio of the sup-norm ball.
pub const BOUNDARY_RATIO: f64 = 8.0;

/// Half-plane `a·x₁ + b·x₂ + c ≥ 0`, or `> 0` when `strict`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfPlane {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    #[serde(default)]
    pub strict: bool,
}

impl HalfPlane {
    pub fn new(a: f64, b: f64, c: f64, strict: bool) -> Self {
        Self { a, b, c, strict }
    }

    #[inline]
    fn value(&self, x: [f64; 2]) -> f64 {
        self.a * x[0] + self.b * x[1] + self.c
    }

    fn slack(&self, x: [f64; 2]) -> f64 {
        BOUNDARY_EPS * (1.0 + self.a.abs() * x[0].abs() + self.b.abs() * x[1].abs() + self.c.abs())
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        let v = self.value(x);
        let s = self.slack(x);
        if self.strict {
            v > s
        } else {
            v >= -s
        }
    }

    fn scaled(&self, k: f64) -> Self {
        Self { c: self.c * k, ..*self }
    }

    /// Re-express in coordinates `v` with `x = v₁e₁ + v₂e₂`.
    fn pulled_back(&self, e1: [f64; 2], e2: [f64; 2]) -> Self {
        Self {
            a: self.a * e1[0] + self.b * e1[1],
            b: self.a * e2[0] + self.b * e2[1],
            c: self.c,
            strict: self.strict,
        }
    }
}

/// A bounded convex polygon given as an intersection of half-planes,
/// together with its vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexPiece {
    constraints: Vec<HalfPlane>,
    vertices: Vec<[f64; 2]>,
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn polygon_area(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    if n < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        s += v[i][0] * v[j][1] - v[j][0] * v[i][1];
    }
    0.5 * s.abs()
}

fn polygon_perimeter(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    (0..n)
        .map(|i| {
            let j = (i + 1) % n;
            ((v[j][0] - v[i][0]).powi(2) + (v[j][1] - v[i][1]).powi(2)).sqrt()
        })
        .sum()
}

/// Convex hull (counter-clockwise, no collinear points).
fn convex_hull(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    pts.dedup_by(|a, b| (a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 1e-12 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 1e-12 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

impl ConvexPiece {
    /// Intersection of half-planes; rejects empty or unbounded results.
    pub fn from_halfplanes(constraints: Vec<HalfPlane>) -> Result<Self> {
        if constraints.len() < 3 {
            return Err(Error::Domain("a bounded polygon needs at least 3 half-planes".into()));
        }
        let mut candidates = Vec::new();
        for i in 0..constraints.len() {
            for j in i + 1..constraints.len() {
                let (h1, h2) = (constraints[i], constraints[j]);
                let det = h1.a * h2.b - h2.a * h1.b;
                if det.abs() < 1e-14 {
                    continue;
                }
                let x = (-h1.c * h2.b + h2.c * h1.b) / det;
                let y = (-h1.a * h2.c + h2.a * h1.c) / det;
                let p = [x, y];
                if constraints.iter().all(|h| h.value(p) >= -h.slack(p)) {
                    candidates.push(p);
                }
            }
        }
        let vertices = convex_hull(candidates);
        if vertices.len() < 3 || polygon_area(&vertices) <= 0.0 {
            return Err(Error::Domain("half-planes do not bound a nonempty polygon".into()));
        }
        // unbounded intersections have a recession direction; probe far away
        let far = 1e6 * (1.0 + vertices.iter().map(|v| v[0].abs().max(v[1].abs())).fold(0.0, f64::max));
        for k in 0..16 {
            let t = std::f64::consts::PI * k as f64 / 8.0;
            let p = [vertices[0][0] + far * t.cos(), vertices[0][1] + far * t.sin()];
            if constraints.iter().all(|h| h.value(p) >= 0.0) {
                return Err(Error::Domain("half-planes describe an unbounded region".into()));
            }
        }
        Ok(Self { constraints, vertices })
    }

    /// Closed convex polygon with the given vertices (any orientation).
    pub fn from_vertices(vertices: &[[f64; 2]]) -> Result<Self> {
        let hull = convex_hull(vertices.to_vec());
        if hull.len() < 3 {
            return Err(Error::Domain("polygon needs three non-collinear vertices".into()));
        }
        if hull.len() != vertices.len() {
            let mut sorted_in = vertices.to_vec();
            sorted_in.dedup();
            if convex_hull(sorted_in).len() != vertices.len() {
                return Err(Error::Domain("polygon vertices are not in convex position".into()));
            }
        }
        let n = hull.len();
        let constraints = (0..n)
            .map(|i| {
                let p = hull[i];
                let q = hull[(i + 1) % n];
                // interior on the left of p→q for counter-clockwise order
                let a = -(q[1] - p[1]);
                let b = q[0] - p[0];
                let c = -(a * p[0] + b * p[1]);
                HalfPlane::new(a, b, c, false)
            })
            .collect();
        Ok(Self {
            constraints,
            vertices: hull,
        })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn constraints(&self) -> &[HalfPlane] {
        &self.constraints
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.vertices)
    }

    pub fn perimeter(&self) -> f64 {
        polygon_perimeter(&self.vertices)
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        self.constraints.iter().all(|h| h.contains(x))
    }

    fn scaled(&self, k: f64) -> Self {
        Self {
            constraints: self.constraints.iter().map(|h| h.scaled(k)).collect(),
            vertices: self.vertices.iter().map(|v| [v[0] * k, v[1] * k]).collect(),
        }
    }

    /// Clip by one more half-plane; `None` if the result has empty interior.
    pub fn clipped(&self, h: HalfPlane) -> Option<Self> {
        let n = self.vertices.len();
        let mut out = Vec::with_capacity(n + 1);
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            let vp = h.value(p);
            let vq = h.value(q);
            if vp >= 0.0 {
                out.push(p);
            }
            if (vp >= 0.0) != (vq >= 0.0) {
                let t = vp / (vp - vq);
                out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
            }
        }
        let hull = convex_hull(out);
        if hull.len() < 3 || polygon_area(&hull) <= 0.0 {
            return None;
        }
        let mut constraints = self.constraints.clone();
        constraints.push(h);
        Some(Self {
            constraints,
            vertices: hull,
        })
    }

    /// Integer `x₁` range on the horizontal line `x₂ = row`, if any.
    fn row_range(&self, row: f64) -> Option<(i64, i64)> {
        let mut lo = f64::NEG_INFINITY;
        let mut lo_strict = false;
        let mut hi = f64::INFINITY;
        let mut hi_strict = false;
        for h in &self.constraints {
            let rest = h.b * row + h.c;
            let scale = 1.0 + h.b.abs() * row.abs() + h.c.abs();
            if h.a.abs() <= 1e-300 {
                let tol = BOUNDARY_EPS * scale;
                let ok = if h.strict { rest > tol } else { rest >= -tol };
                if !ok {
                    return None;
                }
                continue;
            }
            let bound = -rest / h.a;
            if h.a > 0.0 {
                if bound > lo || (bound == lo && h.strict) {
                    lo = bound;
                    lo_strict = h.strict;
                }
            } else if bound < hi || (bound == hi && h.strict) {
                hi = bound;
                hi_strict = h.strict;
            }
        }
        if !lo.is_finite() || !hi.is_finite() {
            return None;
        }
        let tol_lo = BOUNDARY_EPS * (1.0 + lo.abs());
        let tol_hi = BOUNDARY_EPS * (1.0 + hi.abs());
        let ilo = if lo_strict {
            (lo + tol_lo).floor() as i64 + 1
        } else {
            (lo - tol_lo).ceil() as i64
        };
        let ihi = if hi_strict {
            (hi - tol_hi).ceil() as i64 - 1
        } else {
            (hi + tol_hi).floor() as i64
        };
        (ilo <= ihi).then_some((ilo, ihi))
    }

    fn pulled_back(&self, e1: [i64; 2], e2: [i64; 2]) -> Self {
        let f1 = [e1[0] as f64, e1[1] as f64];
        let f2 = [e2[0] as f64, e2[1] as f64];
        let det = f1[0] * f2[1] - f2[0] * f1[1];
        let vertices = self
            .vertices
            .iter()
            .map(|x| [(x[0] * f2[1] - f2[0] * x[1]) / det, (f1[0] * x[1] - x[0] * f1[1]) / det])
            .collect();
        Self {
            constraints: self.constraints.iter().map(|h| h.pulled_back(f1, f2)).collect(),
            vertices,
        }
    }
}

/// Compact planar region: a union of at most four convex polygons with
/// disjoint interiors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RegionSpec", into = "RegionSpec")]
pub struct Region {
    pieces: Vec<ConvexPiece>,
    volume: f64,
    r_inf: f64,
    boundary_length: f64,
    spec: RegionSpec,
}

/// JSON description of a region.
///
/// ```json
/// {"kind":"rect","x":[0,1],"y":[0,1]}
/// {"kind":"polygon","vertices":[[0,0],[1,0],[1,1]]}
/// {"kind":"halfplanes","constraints":[{"a":1,"b":0,"c":0,"strict":true}, ...]}
/// {"kind":"union","pieces":[{...}, {...}]}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RegionSpec {
    Rect { x: [f64; 2], y: [f64; 2] },
    Triangle { vertices: [[f64; 2]; 3] },
    Polygon { vertices: Vec<[f64; 2]> },
    Halfplanes { constraints: Vec<HalfPlane> },
    Union { pieces: Vec<RegionSpec> },
}

impl RegionSpec {
    fn pieces(&self) -> Result<Vec<ConvexPiece>> {
        match self {
            RegionSpec::Rect { x, y } => {
                if !(x[0] < x[1] && y[0] < y[1]) {
                    return Err(Error::Domain("rectangle must have positive width and height".into()));
                }
                Ok(vec![ConvexPiece::from_vertices(&[
                    [x[0], y[0]],
                    [x[1], y[0]],
                    [x[1], y[1]],
                    [x[0], y[1]],
                ])?])
            }
            RegionSpec::Triangle { vertices } => Ok(vec![ConvexPiece::from_vertices(vertices)?]),
            RegionSpec::Polygon { vertices } => Ok(vec![ConvexPiece::from_vertices(vertices)?]),
            RegionSpec::Halfplanes { constraints } => Ok(vec![ConvexPiece::from_halfplanes(constraints.clone())?]),
            RegionSpec::Union { pieces } => {
                let mut out = Vec::new();
                for p in pieces {
                    if matches!(p, RegionSpec::Union { .. }) {
                        return Err(Error::Domain("nested unions are not supported".into()));
                    }
                    out.extend(p.pieces()?);
                }
                Ok(out)
            }
        }
    }
}

impl TryFrom<RegionSpec> for Region {
    type Error = Error;

    fn try_from(spec: RegionSpec) -> Result<Self> {
        Region::from_spec(spec)
    }
}

impl From<Region> for RegionSpec {
    fn from(r: Region) -> Self {
        r.spec
    }
}

/// Length of the part of segment `p→q` lying on segment `r→s` when the two
/// are collinear and oppositely oriented.
fn shared_length(p: [f64; 2], q: [f64; 2], r: [f64; 2], s: [f64; 2]) -> f64 {
    let d = [q[0] - p[0], q[1] - p[1]];
    let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
    if len == 0.0 {
        return 0.0;
    }
    let tol = 1e-9 * (1.0 + len);
    let off = |x: [f64; 2]| (d[0] * (x[1] - p[1]) - d[1] * (x[0] - p[0])) / len;
    if off(r).abs() > tol || off(s).abs() > tol {
        return 0.0;
    }
    let e = [s[0] - r[0], s[1] - r[1]];
    if d[0] * e[0] + d[1] * e[1] >= 0.0 {
        return 0.0;
    }
    let t = |x: [f64; 2]| (d[0] * (x[0] - p[0]) + d[1] * (x[1] - p[1])) / len;
    let (a, b) = (t(r).min(t(s)), t(r).max(t(s)));
    (b.min(len) - a.max(0.0)).max(0.0)
}

impl Region {
    pub fn from_spec(spec: RegionSpec) -> Result<Self> {
        let pieces = spec.pieces()?;
        Self::from_pieces(pieces, spec)
    }

    fn from_pieces(pieces: Vec<ConvexPiece>, spec: RegionSpec) -> Result<Self> {
        if pieces.is_empty() || pieces.len() > 4 {
            return Err(Error::Domain(format!(
                "region must consist of 1 to 4 convex pieces, got {}",
                pieces.len()
            )));
        }
        for i in 0..pieces.len() {
            for j in i + 1..pieces.len() {
                let mut clip = Some(pieces[i].clone());
                for h in &pieces[j].constraints {
                    clip = clip.and_then(|c| c.clipped(HalfPlane { strict: false, ..*h }));
                }
                if let Some(c) = clip {
                    if c.area() > 1e-9 * (pieces[i].area() + pieces[j].area()) {
                        return Err(Error::Domain(format!("region pieces {i} and {j} overlap")));
                    }
                }
            }
        }
        let volume = pieces.iter().map(ConvexPiece::area).sum();
        let r_inf = pieces
            .iter()
            .flat_map(|p| p.vertices.iter())
            .map(|v| v[0].abs().max(v[1].abs()))
            .fold(0.0, f64::max);
        let mut boundary_length: f64 = pieces.iter().map(ConvexPiece::perimeter).sum();
        for i in 0..pieces.len() {
            for j in i + 1..pieces.len() {
                let (vi, vj) = (&pieces[i].vertices, &pieces[j].vertices);
                for a in 0..vi.len() {
                    for b in 0..vj.len() {
                        boundary_length -= 2.0 * shared_length(vi[a], vi[(a + 1) % vi.len()], vj[b], vj[(b + 1) % vj.len()]);
                    }
                }
            }
        }
        if boundary_length > BOUNDARY_RATIO * r_inf * (1.0 + 1e-12) {
            return Err(Error::Domain(format!(
                "boundary length {boundary_length} exceeds {BOUNDARY_RATIO}·r_∞ = {}",
                BOUNDARY_RATIO * r_inf
            )));
        }
        Ok(Self {
            pieces,
            volume,
            r_inf,
            boundary_length,
            spec,
        })
    }

    pub fn rect(x: [f64; 2], y: [f64; 2]) -> Result<Self> {
        Self::from_spec(RegionSpec::Rect { x, y })
    }

    pub fn unit_square() -> Self {
        Self::rect([0.0, 1.0], [0.0, 1.0]).expect("valid rectangle")
    }

    pub fn polygon(vertices: Vec<[f64; 2]>) -> Result<Self> {
        Self::from_spec(RegionSpec::Polygon { vertices })
    }

    pub fn halfplanes(constraints: Vec<HalfPlane>) -> Result<Self> {
        Self::from_spec(RegionSpec::Halfplanes { constraints })
    }

    pub fn spec(&self) -> &RegionSpec {
        &self.spec
    }

    pub fn pieces(&self) -> &[ConvexPiece] {
        &self.pieces
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// `r_∞ = sup max{|x₁|, |x₂|}` over the region.
    pub fn r_inf(&self) -> f64 {
        self.r_inf
    }

    pub fn boundary_length(&self) -> f64 {
        self.boundary_length
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        self.pieces.iter().any(|p| p.contains(x))
    }

    /// The dilate `X·R`. Pieces are scaled without re-validation.
    pub fn dilate(&self, x: f64) -> Region {
        let pieces: Vec<ConvexPiece> = self.pieces.iter().map(|p| p.scaled(x)).collect();
        Region {
            volume: self.volume * x * x,
            r_inf: self.r_inf * x,
            boundary_length: self.boundary_length * x,
            pieces,
            spec: self.spec.clone(),
        }
    }

    /// Intersect every piece with a further half-plane.
    pub fn clipped(&self, h: HalfPlane) -> Option<Region> {
        let pieces: Vec<ConvexPiece> = self.pieces.iter().filter_map(|p| p.clipped(h)).collect();
        if pieces.is_empty() {
            return None;
        }
        let volume = pieces.iter().map(ConvexPiece::area).sum();
        let r_inf = pieces
            .iter()
            .flat_map(|p| p.vertices.iter())
            .map(|v| v[0].abs().max(v[1].abs()))
            .fold(0.0, f64::max);
        Some(Region {
            boundary_length: pieces.iter().map(ConvexPiece::perimeter).sum(),
            volume,
            r_inf,
            pieces,
            spec: self.spec.clone(),
        })
    }

    /// Bounding box `[x_min, x_max, y_min, y_max]`.
    pub fn bounding_box(&self) -> [f64; 4] {
        let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
        for v in self.pieces.iter().flat_map(|p| p.vertices.iter()) {
            b[0] = b[0].min(v[0]);
            b[1] = b[1].max(v[0]);
            b[2] = b[2].min(v[1]);
            b[3] = b[3].max(v[1]);
        }
        b
    }

    /// Visit every point `v₁e₁ + v₂e₂` of the lattice with basis `e₁, e₂`
    /// inside the region. Rows run along whichever lattice coordinate gives
    /// fewer of them, so the cost is proportional to the number of points
    /// plus the number of rows.
    pub fn for_each_lattice_point<F>(&self, basis: [[i64; 2]; 2], mut visit: F)
    where
        F: FnMut([i64; 2]),
    {
        let [e1, e2] = basis;
        let pulled: Vec<ConvexPiece> = self.pieces.iter().map(|p| p.pulled_back(e1, e2)).collect();
        let (mut w1, mut w2) = (0.0f64, 0.0f64);
        for p in &pulled {
            let (lo0, hi0, lo1, hi1) = extent(&p.vertices);
            w1 = w1.max(hi0 - lo0);
            w2 = w2.max(hi1 - lo1);
        }
        // iterate rows over v₂ unless v₁ has fewer rows
        let swap = w1 < w2;
        let pieces: Vec<ConvexPiece> = if swap {
            pulled.iter().map(|p| p.pulled_back([0, 1], [1, 0])).collect()
        } else {
            pulled
        };
        let (mut ylo, mut yhi) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in &pieces {
            let (_, _, lo1, hi1) = extent(&p.vertices);
            ylo = ylo.min(lo1);
            yhi = yhi.max(hi1);
        }
        let rlo = (ylo - 1e-9 * (1.0 + ylo.abs())).ceil() as i64;
        let rhi = (yhi + 1e-9 * (1.0 + yhi.abs())).floor() as i64;
        let mut ranges: Vec<(i64, i64)> = Vec::with_capacity(4);
        for row in rlo..=rhi {
            ranges.clear();
            ranges.extend(pieces.iter().filter_map(|p| p.row_range(row as f64)));
            merge_ranges(&mut ranges);
            for &(lo, hi) in &ranges {
                for col in lo..=hi {
                    let (v1, v2) = if swap { (row, col) } else { (col, row) };
                    visit([v1 * e1[0] + v2 * e2[0], v1 * e1[1] + v2 * e2[1]]);
                }
            }
        }
    }

    /// Number of lattice points in the region, counted row by row.
    pub fn count_lattice_points(&self, basis: [[i64; 2]; 2]) -> u64 {
        let [e1, e2] = basis;
        let pulled: Vec<ConvexPiece> = self.pieces.iter().map(|p| p.pulled_back(e1, e2)).collect();
        let (mut w1, mut w2) = (0.0f64, 0.0f64);
        for p in &pulled {
            let (lo0, hi0, lo1, hi1) = extent(&p.vertices);
            w1 = w1.max(hi0 - lo0);
            w2 = w2.max(hi1 - lo1);
        }
        let pieces: Vec<ConvexPiece> = if w1 < w2 {
            pulled.iter().map(|p| p.pulled_back([0, 1], [1, 0])).collect()
        } else {
            pulled
        };
        let (mut ylo, mut yhi) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in &pieces {
            let (_, _, lo1, hi1) = extent(&p.vertices);
            ylo = ylo.min(lo1);
            yhi = yhi.max(hi1);
        }
        let rlo = (ylo - 1e-9 * (1.0 + ylo.abs())).ceil() as i64;
        let rhi = (yhi + 1e-9 * (1.0 + yhi.abs())).floor() as i64;
        let mut total = 0u64;
        let mut ranges: Vec<(i64, i64)> = Vec::with_capacity(4);
        for row in rlo..=rhi {
            ranges.clear();
            ranges.extend(pieces.iter().filter_map(|p| p.row_range(row as f64)));
            merge_ranges(&mut ranges);
            total += ranges.iter().map(|&(lo, hi)| (hi - lo + 1) as u64).sum::<u64>();
        }
        total
    }
}

fn extent(v: &[[f64; 2]]) -> (f64, f64, f64, f64) {
    let mut e = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in v {
        e.0 = e.0.min(p[0]);
        e.1 = e.1.max(p[0]);
        e.2 = e.2.min(p[1]);
        e.3 = e.3.max(p[1]);
    }
    e
}

fn merge_ranges(r: &mut Vec<(i64, i64)>) {
    if r.len() < 2 {
        return;
    }
    r.sort_unstable();
    let mut w = 0;
    for i in 1..r.len() {
        if r[i].0 <= r[w].1 + 1 {
            r[w].1 = r[w].1.max(r[i].1);
        } else {
            w += 1;
            r[w] = r[i];
        }
    }
    r.truncate(w + 1);
}

/// `r′ = max_i sup_{x∈R} Lᵢ(x)`, attained at a vertex.
pub fn r_prime(forms: &FormTriple, region: &Region) -> Result<f64> {
    let r = region
        .pieces
        .iter()
        .flat_map(|p| p.vertices.iter())
        .flat_map(|&v| forms.forms().iter().map(move |f| f.eval_f64(v)))
        .fold(f64::NEG_INFINITY, f64::max);
    if !r.is_finite() {
        return Err(Error::Domain("empty region".into()));
    }
    if r <= 0.0 {
        return Err(Error::Domain(format!(
            "r′ = {r} is not positive; every form is nonpositive on the region"
        )));
    }
    let l_inf = forms.l_inf() as f64;
    let r_inf = region.r_inf();
    let tol = 1e-9 * (1.0 + r_inf);
    if r / (2.0 * l_inf) > r_inf + tol || r_inf > 2.0 * r * l_inf + tol {
        return Err(Error::Invariant(format!(
            "r′ = {r}, r_∞ = {r_inf}, L_∞ = {l_inf} violate r′/2L_∞ ≤ r_∞ ≤ 2r′L_∞"
        )));
    }
    Ok(r)
}
