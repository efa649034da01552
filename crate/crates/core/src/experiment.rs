//! Grid sweeps that compare direct sums with their predicted asymptotics.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::build_tables;
use crate::bilinear::count_n;
use crate::error::{Error, Result};
use crate::fit::{fit_log_poly, AsymptoticFit};
use crate::forms::{FormTriple, Region};
use crate::report::{to_json, write_output, Cell, Table};
use crate::series::{
    c1_constant, c1_prime_constant, eq_c_constant, leading_constant, s_h, tau_product_constant, theorem4_constant, EulerProduct,
};
use crate::sums::{lod_discrepancy, m_of_t, s_of, sigma1_sigma2, t_of_x, RegionFamily, SumSpec, ValuePolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentName {
    /// `T(X)` against `∏σ_p X²(log X)³`.
    Theorem1,
    /// `Σ₁ = ∑_{h≤H} T_h(X)` against `c·X·H·(log X)³` with `H = ⌈X^α⌉`.
    Theorem2,
    /// `S(X)` with `d = D = 1` against `vol(R)∏σ_p X²(log X)³`.
    Theorem3Special,
    /// `N(B)` against `cB log B`.
    Theorem4,
    /// Summed lattice discrepancy at `Qᵢ = √(2X)` relative to `X²(log X)³`.
    Lod,
    /// `M(T,T,T)` against `∏σ_p (log T)³`.
    MtLeading,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 6] = [
        ExperimentName::Theorem1,
        ExperimentName::Theorem2,
        ExperimentName::Theorem3Special,
        ExperimentName::Theorem4,
        ExperimentName::Lod,
        ExperimentName::MtLeading,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentName::Theorem1 => "theorem1",
            ExperimentName::Theorem2 => "theorem2",
            ExperimentName::Theorem3Special => "theorem3-special",
            ExperimentName::Theorem4 => "theorem4",
            ExperimentName::Lod => "lod",
            ExperimentName::MtLeading => "mt-leading",
        }
    }
}

impl std::str::FromStr for ExperimentName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment {s:?}")))
    }
}

/// Ordered scales; `alpha` sets derived parameters such as `H = ⌈X^α⌉`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl GridSpec {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("grid is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::Domain(format!("grid values must be positive and finite: {values:?}")));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain(format!("grid must be strictly increasing: {values:?}")));
        }
        Ok(Self { values, alpha: None })
    }

    /// `start, start·factor, …` up to `stop` (with a relative slack of 1e-9).
    pub fn geometric(start: f64, stop: f64, factor: f64) -> Result<Self> {
        if !(start > 0.0 && factor > 1.0 && stop >= start) {
            return Err(Error::Domain(format!("bad geometric grid {start}:{stop}:{factor}")));
        }
        let mut values = Vec::new();
        let mut v = start;
        while v <= stop * (1.0 + 1e-9) {
            values.push(v);
            v *= factor;
            if values.len() > 10_000 {
                return Err(Error::size("grid length", values.len() as u128, 10_000));
            }
        }
        Self::new(values)
    }

    pub fn with_alpha(mut self, alpha: Option<f64>) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendPoint {
    pub x: f64,
    /// Derived parameter (`H` for theorem2, `Q` for lod).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param: Option<f64>,
    /// Exact count when the quantity is an integer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<u128>,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction: Option<f64>,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub name: String,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Reference {
    fn from_product(name: &str, e: &EulerProduct) -> Self {
        Self {
            name: name.into(),
            value: e.value,
            lo: e.lo,
            hi: e.hi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub experiment: ExperimentName,
    pub completed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fitted_leading: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted: Option<Reference>,
    /// `fitted_leading / predicted`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    /// [`monotone_trend`] for the comparison experiments, strict decrease for lod.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trend_improving: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<AsymptoticFit>,
    /// Further constants the data can be compared against.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub references: Vec<Reference>,
    pub trend: Vec<TrendPoint>,
}

impl ComparisonReport {
    pub fn ratios(&self) -> Vec<f64> {
        self.trend.iter().map(|p| p.ratio).collect()
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["x", "param", "count", "value", "prediction", "ratio_to_prediction"]);
        for p in &self.trend {
            t.push(vec![
                p.x.into(),
                p.param.into(),
                p.count.map_or(Cell::Empty, Cell::from),
                p.value.into(),
                p.prediction.into(),
                p.ratio.into(),
            ]);
        }
        t
    }
}

/// Whether `|ratio − 1|` is nonincreasing over the last three points.
pub fn monotone_trend(ratios: &[f64]) -> Option<bool> {
    if ratios.len() < 3 {
        return None;
    }
    let d: Vec<f64> = ratios[ratios.len() - 3..].iter().map(|r| (r - 1.0).abs()).collect();
    Some(d[0] >= d[1] && d[1] >= d[2])
}

/// Whether the values decrease strictly.
pub fn strictly_decreasing(values: &[f64]) -> Option<bool> {
    if values.len() < 2 {
        return None;
    }
    Some(values.windows(2).all(|w| w[1] < w[0]))
}

#[derive(Debug, Clone)]
pub struct ExperimentContext {
    pub forms: FormTriple,
    pub region: Region,
    pub prime_cut: u64,
    /// Run grid points concurrently instead of one after another.
    pub parallel_points: bool,
}

impl Default for ExperimentContext {
    fn default() -> Self {
        Self {
            forms: FormTriple::coordinate_sum(),
            region: Region::unit_square(),
            prime_cut: crate::series::DEFAULT_PRIME_CUT,
            parallel_points: false,
        }
    }
}

pub const DEFAULT_ALPHA: f64 = 0.8;

/// `max |Lᵢ| + 1` over `X·R`, attained at a vertex; sizes the τ table.
pub fn max_form_value(forms: &FormTriple, region: &Region, x: f64) -> u64 {
    let mut m = 0f64;
    for piece in region.pieces() {
        for v in piece.vertices() {
            for f in forms.forms() {
                m = m.max(f.eval_f64([v[0] * x, v[1] * x]).abs());
            }
        }
    }
    m.ceil() as u64 + 1
}

fn integer_scale(x: f64) -> Result<u64> {
    if x < 1.0 || x.fract() != 0.0 || x > 1e15 {
        return Err(Error::Domain(format!("scale {x} must be a positive integer")));
    }
    Ok(x as u64)
}

struct Plan {
    predicted: Option<Reference>,
    references: Vec<Reference>,
    /// `(a, k)` of the fitted model, if any.
    model: Option<(f64, usize)>,
}

fn plan(name: ExperimentName, ctx: &ExperimentContext) -> Result<Plan> {
    let cut = ctx.prime_cut;
    Ok(match name {
        ExperimentName::Theorem1 => Plan {
            predicted: Some(Reference::from_product("singular_series", &leading_constant(&ctx.forms, cut)?)),
            references: vec![Reference::from_product(
                "divisor_product_series",
                &tau_product_constant(&ctx.forms, cut)?,
            )],
            model: Some((2.0, 3)),
        },
        ExperimentName::Theorem3Special => {
            let c = leading_constant(&ctx.forms, cut)?;
            let vol = ctx.region.volume();
            let mut r = Reference::from_product("vol_times_singular_series", &c);
            r.value *= vol;
            r.lo *= vol;
            r.hi *= vol;
            Plan {
                predicted: Some(r),
                references: vec![],
                model: Some((2.0, 3)),
            }
        }
        ExperimentName::Theorem2 => Plan {
            predicted: Some(Reference::from_product("progression_constant", &eq_c_constant(cut)?)),
            references: vec![],
            model: Some((1.0, 3)),
        },
        ExperimentName::Theorem4 => Plan {
            predicted: Some(Reference::from_product("bilinear_constant", &theorem4_constant(cut)?)),
            references: vec![],
            model: Some((1.0, 1)),
        },
        ExperimentName::Lod => Plan {
            predicted: None,
            references: vec![],
            model: None,
        },
        ExperimentName::MtLeading => Plan {
            predicted: Some(Reference::from_product("singular_series", &leading_constant(&ctx.forms, cut)?)),
            references: vec![],
            model: Some((0.0, 3)),
        },
    })
}

/// Everything one grid point needs that is shared across the grid.
struct Shared {
    tables: Option<crate::arith::ArithTables>,
    c1: Option<EulerProduct>,
    c1_prime: Option<EulerProduct>,
}

fn shared(name: ExperimentName, grid: &GridSpec, ctx: &ExperimentContext) -> Result<Shared> {
    let x_max = *grid.values.last().expect("grid is nonempty");
    let alpha = grid.alpha.unwrap_or(DEFAULT_ALPHA);
    let limit = match name {
        ExperimentName::Theorem1 => Some(max_form_value(&ctx.forms, &Region::unit_square(), x_max)),
        ExperimentName::Theorem3Special => Some(max_form_value(&ctx.forms, &ctx.region, x_max)),
        ExperimentName::Theorem2 => Some(x_max as u64 + x_max.powf(alpha).ceil() as u64 + 1),
        ExperimentName::MtLeading => Some((x_max as u64).max(2)),
        _ => None,
    };
    let (c1, c1_prime) = if name == ExperimentName::Theorem2 {
        (Some(c1_constant(ctx.prime_cut)?), Some(c1_prime_constant(ctx.prime_cut)?))
    } else {
        (None, None)
    };
    Ok(Shared {
        tables: limit.map(build_tables).transpose()?,
        c1,
        c1_prime,
    })
}

fn point(name: ExperimentName, x: f64, grid: &GridSpec, ctx: &ExperimentContext, sh: &Shared, leading: Option<f64>) -> Result<TrendPoint> {
    let tables = || sh.tables.as_ref().expect("tables built for this experiment");
    let log = x.ln();
    let (param, count, value, prediction) = match name {
        ExperimentName::Theorem1 => {
            let r = t_of_x(integer_scale(x)?, &ctx.forms, tables())?;
            (None, Some(r.value), r.value as f64, leading.map(|c| c * x * x * log.powi(3)))
        }
        ExperimentName::Theorem3Special => {
            let spec = SumSpec::new(ctx.forms.clone(), ctx.region.clone(), x).with_policy(ValuePolicy::AbsSkipZero);
            let r = s_of(&spec, tables())?;
            (None, Some(r.value), r.value as f64, leading.map(|c| c * x * x * log.powi(3)))
        }
        ExperimentName::Theorem2 => {
            let xi = integer_scale(x)?;
            let h = x.powf(grid.alpha.unwrap_or(DEFAULT_ALPHA)).ceil() as u64;
            let c1 = sh.c1.as_ref().expect("c₁ computed");
            let sh_val = s_h(h, sh.c1_prime.as_ref().expect("c₁′ computed"))?;
            let pair = sigma1_sigma2(xi, h, tables(), c1.value, sh_val.value, leading.unwrap_or(f64::NAN))?;
            (Some(h as f64), Some(pair.sigma1), pair.sigma1 as f64, Some(pair.main_term))
        }
        ExperimentName::Theorem4 => {
            let r = count_n(x)?;
            (None, Some(r.n_of_b), r.n_of_b as f64, leading.map(|c| c * x * log))
        }
        ExperimentName::Lod => {
            let q = (2.0 * x).sqrt();
            let r = lod_discrepancy(x, [q; 3], &ctx.forms, &ctx.region, RegionFamily::PlusPlusMinus)?;
            return Ok(TrendPoint {
                x,
                param: Some(q),
                count: None,
                value: r.total_discrepancy,
                prediction: None,
                ratio: r.ratio_to_main,
            });
        }
        ExperimentName::MtLeading => {
            let r = m_of_t([x; 3], &ctx.forms, tables())?;
            (None, None, r.value, leading.map(|c| c * log.powi(3)))
        }
    };
    let ratio = prediction.map_or(f64::NAN, |p| value / p);
    Ok(TrendPoint {
        x,
        param,
        count,
        value,
        prediction,
        ratio,
    })
}

fn finish(name: ExperimentName, plan: &Plan, trend: Vec<TrendPoint>, completed: bool) -> Result<ComparisonReport> {
    let mut report = ComparisonReport {
        experiment: name,
        completed,
        fitted_leading: None,
        predicted: plan.predicted.clone(),
        ratio: None,
        trend_improving: None,
        fit: None,
        references: plan.references.clone(),
        trend,
    };
    let ratios = report.ratios();
    report.trend_improving = match name {
        ExperimentName::Lod => strictly_decreasing(&ratios),
        _ => monotone_trend(&ratios),
    };
    if let Some((a, k)) = plan.model {
        if completed && report.trend.len() >= k + 2 {
            let pts: Vec<(f64, f64)> = report
                .trend
                .iter()
                .map(|p| match name {
                    // Σ₁/H as a function of X
                    ExperimentName::Theorem2 => (p.x, p.value / p.param.unwrap_or(1.0)),
                    _ => (p.x, p.value),
                })
                .collect();
            let fit = fit_log_poly(&pts, a, k)?;
            report.fitted_leading = Some(fit.leading());
            report.ratio = plan.predicted.as_ref().map(|p| fit.leading() / p.value);
            report.fit = Some(fit);
        }
    }
    Ok(report)
}

/// Runs `name` over `grid`. With `persist`, the JSON report is rewritten
/// after every point so an interrupted sweep leaves `"completed": false`.
pub fn run_experiment(name: ExperimentName, grid: &GridSpec, ctx: &ExperimentContext, persist: Option<&Path>) -> Result<ComparisonReport> {
    let plan = plan(name, ctx)?;
    let sh = shared(name, grid, ctx)?;
    let leading = plan.predicted.as_ref().map(|p| p.value);
    let save = |report: &ComparisonReport| -> Result<()> {
        match persist {
            Some(path) => write_output(Some(path), &to_json(report)?),
            None => Ok(()),
        }
    };
    let mut trend = Vec::with_capacity(grid.len());
    if ctx.parallel_points {
        let points: Vec<Result<TrendPoint>> = grid.values.par_iter().map(|&x| point(name, x, grid, ctx, &sh, leading)).collect();
        for p in points {
            match p {
                Ok(p) => trend.push(p),
                Err(e) => {
                    save(&finish(name, &plan, trend, false)?)?;
                    return Err(e);
                }
            }
        }
    } else {
        for &x in &grid.values {
            match point(name, x, grid, ctx, &sh, leading) {
                Ok(p) => trend.push(p),
                Err(e) => {
                    save(&finish(name, &plan, trend, false)?)?;
                    return Err(e);
                }
            }
            save(&finish(name, &plan, trend.clone(), false)?)?;
        }
    }
    let report = finish(name, &plan, trend, true)?;
    save(&report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(vec![1.0, 1.0]).is_err());
        assert!(GridSpec::new(vec![]).is_err());
        assert_eq!(GridSpec::geometric(1024.0, 131072.0, 2.0).unwrap().len(), 8);
    }

    #[test]
    fn trend_detector() {
        assert_eq!(monotone_trend(&[0.5, 0.7, 0.8, 0.9]), Some(true));
        assert_eq!(monotone_trend(&[0.9, 0.8, 1.1]), Some(false));
        assert_eq!(monotone_trend(&[1.0, 1.0]), None);
        assert_eq!(strictly_decreasing(&[3.0, 2.0, 1.0]), Some(true));
    }

    #[test]
    fn small_height_count_sweep() {
        let grid = GridSpec::new(vec![100.0, 1000.0, 10000.0]).unwrap();
        let ctx = ExperimentContext {
            prime_cut: 1000,
            ..Default::default()
        };
        let r = run_experiment(ExperimentName::Theorem4, &grid, &ctx, None).unwrap();
        assert_eq!(r.trend.len(), 3);
        assert!(r.completed);
        assert!(r.fitted_leading.is_some());
        assert_eq!(r.ratio.unwrap(), r.fitted_leading.unwrap() / r.predicted.as_ref().unwrap().value);
    }
}
