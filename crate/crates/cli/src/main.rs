use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use divforms::arith::{build_tables, factor_trial, Triple};
use divforms::bilinear::{count_n, count_n0, reduction_check};
use divforms::config::Config;
use divforms::experiment::{max_form_value, run_experiment, ExperimentContext, GridSpec};
use divforms::forms::Region;
use divforms::report::{emit, Cell, Format, Table};
use divforms::series::{
    c0_constant, c1_constant, c1_prime_constant, c_h_with, eq_c_constant, leading_constant, sigma_p, tau_product_constant,
    theorem4_constant, EulerProduct,
};
use divforms::sums::{
    lod_discrepancy, m_of_t, s_of, sigma1_sigma2, t_h_direct, t_of_x, t_of_x_by_reduction, tau_product_identity, RegionFamily, SumSpec,
    ValuePolicy,
};
use divforms::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

#[derive(Parser)]
#[command(name = "divforms", version, about = "Divisor sums over binary linear form triples")]
struct Cli {
    /// JSON configuration (forms, region, grid, experiment, parameters).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Worker threads (default: all cores, or RAYON_NUM_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// T(X) = Σ τ(L₁L₂L₃) over [1, X]².
    TauSum(XArg),
    /// S(X; d, D) over X·R.
    SSum(SSumArgs),
    /// T_h(X), or Σ₁ = Σ_{h≤H} T_h(X) with --sum.
    ThSum(ThArgs),
    /// M(T) = Σ_{dᵢ≤Tᵢ} ρ(d)/(d₁d₂d₃)².
    Mt(MtArgs),
    /// Summed lattice discrepancy.
    Lod(LodArgs),
    /// Local factors σ_p of the configured forms.
    Sigma(SigmaArgs),
    /// Correlation constants c_h.
    Ch(ChArgs),
    /// Euler-product constants with error intervals.
    Constants,
    /// Point counts on the bilinear hypersurface.
    Bilinear(BilinearArgs),
    /// Grid sweep with fit and comparison.
    Experiment(ExperimentArgs),
    /// Checks the τ(n₁n₂n₃) identity and the T(X) expansion.
    IdentityCheck(IdentityArgs),
}

#[derive(Args)]
struct XArg {
    #[arg(long)]
    x: Option<f64>,
}

#[derive(Args)]
struct SSumArgs {
    #[arg(long)]
    x: Option<f64>,
    /// d as a,b,c
    #[arg(long)]
    d: Option<String>,
    /// D as a,b,c
    #[arg(long = "D")]
    dd: Option<String>,
    /// Allow non-positive values: τ(−n) = τ(n), zeros skipped.
    #[arg(long)]
    abs: bool,
}

#[derive(Args)]
struct ThArgs {
    #[arg(long)]
    x: Option<f64>,
    #[arg(long)]
    h: Option<u64>,
    #[arg(long)]
    sum: bool,
}

#[derive(Args)]
struct MtArgs {
    /// T as a,b,c
    #[arg(long)]
    t: Option<String>,
}

#[derive(Args)]
struct LodArgs {
    #[arg(long)]
    x: Option<f64>,
    /// Q as a,b,c (default √(2X) each)
    #[arg(long)]
    q: Option<String>,
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Constant,
    PlusPlusMinus,
}

#[derive(Args)]
struct SigmaArgs {
    /// Primes as a comma list (default: primes ≤ 50 plus the bad primes).
    #[arg(long)]
    primes: Option<String>,
}

#[derive(Args)]
struct ChArgs {
    /// h values as a comma list or a range a..b
    #[arg(long, default_value = "1..12")]
    h: String,
}

#[derive(Args)]
struct BilinearArgs {
    #[arg(long, value_enum, default_value = "n0")]
    mode: BilinearMode,
    #[arg(long)]
    x: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    /// start:stop:factor
    #[arg(long)]
    grid: Option<String>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum BilinearMode {
    N0,
    N,
    Reduction,
}

#[derive(Args)]
struct ExperimentArgs {
    name: Option<String>,
    /// start:stop:factor
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Evaluate grid points concurrently.
    #[arg(long)]
    parallel_points: bool,
}

#[derive(Args)]
struct IdentityArgs {
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 1000)]
    max: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Largest X for the T(X) expansion check.
    #[arg(long, default_value_t = 6)]
    reduction_x: u64,
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<T>()
                .map_err(|_| Error::Config(format!("bad {what} entry {p:?} in {s:?}")))
        })
        .collect()
}

fn parse_triple<T: std::str::FromStr + Copy>(s: &str, what: &str) -> Result<[T; 3]> {
    let v = parse_list::<T>(s, what)?;
    <[T; 3]>::try_from(v).map_err(|_| Error::Config(format!("{what} needs three entries, got {s:?}")))
}

fn parse_grid(s: &str) -> Result<GridSpec> {
    let parts = parse_list::<f64>(&s.replace(':', ","), "grid")?;
    match parts[..] {
        [a, b, f] => GridSpec::geometric(a, b, f),
        [a, b] => GridSpec::geometric(a, b, 2.0),
        _ => Err(Error::Config(format!("grid must be start:stop[:factor], got {s:?}"))),
    }
    .map_err(|e| Error::Config(e.to_string()))
}

fn require<T>(v: Option<T>, what: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("missing {what}; pass it as a flag or in the config")))
}

fn integer(x: f64, what: &str) -> Result<u64> {
    if x < 1.0 || x.fract() != 0.0 {
        return Err(Error::Config(format!("{what} must be a positive integer, got {x}")));
    }
    Ok(x as u64)
}

fn is_prime(n: u64) -> bool {
    factor_trial(n).is_ok_and(|f| f.factors == [(n, 1)])
}

fn product_row(t: &mut Table, name: &str, e: &EulerProduct) {
    t.push(vec![
        name.into(),
        e.value.into(),
        e.error_bound().into(),
        e.lo.into(),
        e.hi.into(),
        e.prime_cut.into(),
    ]);
}

struct Output<'a> {
    format: Format,
    out: Option<&'a Path>,
}

impl Output<'_> {
    fn emit<T: serde::Serialize>(&self, table: &Table, value: &T) -> Result<()> {
        emit(table, value, self.format, self.out)
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let out = Output {
        format: match cli.format {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        },
        out: cli.out.as_deref(),
    };
    let forms = cfg.forms();
    let region = cfg.region()?;
    let cut = cfg.prime_cut();

    match cli.command {
        Command::TauSum(a) => {
            let x = integer(require(a.x.or(cfg.x), "--x")?, "X")?;
            let tables = build_tables(max_form_value(&forms, &Region::unit_square(), x as f64))?;
            let r = t_of_x(x, &forms, &tables)?;
            let mut t = Table::new(["x", "count", "points"]);
            t.push(vec![x.into(), r.value.into(), r.points_visited.into()]);
            out.emit(&t, &json!({"x": x, "count": r.value, "points": r.points_visited}))
        }
        Command::SSum(a) => {
            let x = require(a.x.or(cfg.x), "--x")?;
            let d = match a.d {
                Some(s) => parse_triple(&s, "d")?,
                None => cfg.d.unwrap_or([1, 1, 1]),
            };
            let dd = match a.dd {
                Some(s) => parse_triple(&s, "D")?,
                None => cfg.dd.unwrap_or(d),
            };
            let policy = if a.abs {
                ValuePolicy::AbsSkipZero
            } else {
                cfg.policy.unwrap_or_default()
            };
            let tables = build_tables(max_form_value(&forms, &region, x))?;
            let spec = SumSpec::new(forms, region, x).with_moduli(d, dd).with_policy(policy);
            let r = s_of(&spec, &tables)?;
            let mut t = Table::new(["x", "d", "D", "count", "points"]);
            let fmt3 = |v: Triple| format!("{} {} {}", v[0], v[1], v[2]);
            t.push(vec![
                x.into(),
                fmt3(d).into(),
                fmt3(dd).into(),
                r.value.into(),
                r.points_visited.into(),
            ]);
            out.emit(&t, &json!({"x": x, "d": d, "D": dd, "count": r.value, "points": r.points_visited}))
        }
        Command::ThSum(a) => {
            let x = integer(require(a.x.or(cfg.x), "--x")?, "X")?;
            let h = require(a.h.or(cfg.h), "--h")?;
            let tables = build_tables(x + h + 1)?;
            if a.sum {
                let c1 = c1_constant(cut)?;
                let c1p = c1_prime_constant(cut)?;
                let c = eq_c_constant(cut)?;
                let sh = divforms::series::s_h(h, &c1p)?;
                let p = sigma1_sigma2(x, h, &tables, c1.value, sh.value, c.value)?;
                let mut t = Table::new(["x", "h", "sigma1", "sigma2_predicted", "main_term", "ratio"]);
                t.push(vec![
                    x.into(),
                    h.into(),
                    p.sigma1.into(),
                    p.sigma2_predicted.into(),
                    p.main_term.into(),
                    p.ratio.into(),
                ]);
                out.emit(&t, &p)
            } else {
                let r = t_h_direct(x, h, &tables)?;
                let mut t = Table::new(["x", "h", "count"]);
                t.push(vec![x.into(), h.into(), r.value.into()]);
                out.emit(&t, &json!({"x": x, "h": h, "count": r.value}))
            }
        }
        Command::Mt(a) => {
            let tt = match a.t {
                Some(s) => parse_triple(&s, "T")?,
                None => require(cfg.t, "--t")?,
            };
            let max = tt.iter().fold(1f64, |m, v| m.max(*v)) as u64 + 1;
            let tables = build_tables(max.max(2))?;
            let r = m_of_t(tt, &forms, &tables)?;
            let mut t = Table::new(["t1", "t2", "t3", "value", "exact", "terms"]);
            t.push(vec![
                tt[0].into(),
                tt[1].into(),
                tt[2].into(),
                r.value.into(),
                r.exact.clone().map_or(Cell::Empty, Cell::from),
                r.terms.into(),
            ]);
            out.emit(&t, &r)
        }
        Command::Lod(a) => {
            let x = require(a.x.or(cfg.x), "--x")?;
            let q = match a.q {
                Some(s) => parse_triple(&s, "Q")?,
                None => cfg.q.unwrap_or([(2.0 * x).sqrt(); 3]),
            };
            let family = match a.family {
                Some(FamilyArg::Constant) => RegionFamily::Constant,
                Some(FamilyArg::PlusPlusMinus) => RegionFamily::PlusPlusMinus,
                None => cfg.family.unwrap_or(RegionFamily::PlusPlusMinus),
            };
            let r = lod_discrepancy(x, q, &forms, &region, family)?;
            let mut t = Table::new(["x", "moduli", "total_discrepancy", "main_scale", "ratio_to_main"]);
            t.push(vec![
                x.into(),
                r.moduli.into(),
                r.total_discrepancy.into(),
                r.main_scale.into(),
                r.ratio_to_main.into(),
            ]);
            out.emit(&t, &r)
        }
        Command::Sigma(a) => {
            let primes: Vec<u64> = match a.primes {
                Some(s) => parse_list(&s, "prime")?,
                None => match cfg.primes.clone() {
                    Some(p) => p,
                    None => {
                        let mut p: Vec<u64> = (2..=50).filter(|&n| is_prime(n)).collect();
                        p.extend(forms.bad_primes().into_iter().filter(|&q| q > 50));
                        p
                    }
                },
            };
            let mut t = Table::new(["p", "sigma_p", "exact", "method", "truncation_error", "nu_used"]);
            let mut rows = Vec::new();
            for p in primes {
                if !is_prime(p) {
                    return Err(Error::Config(format!("{p} is not prime")));
                }
                let lf = sigma_p(p, &forms)?;
                t.push(vec![
                    p.into(),
                    lf.value.into(),
                    lf.exact.map_or(Cell::Empty, |(n, d)| Cell::from(format!("{n}/{d}"))),
                    lf.method.as_str().into(),
                    lf.truncation_error.into(),
                    (lf.nu_used as u64).into(),
                ]);
                rows.push(lf);
            }
            out.emit(&t, &rows)
        }
        Command::Ch(a) => {
            let hs: Vec<u64> = match a.h.split_once("..") {
                Some((lo, hi)) => {
                    let lo: u64 = lo.parse().map_err(|_| Error::Config(format!("bad range {:?}", a.h)))?;
                    let hi: u64 = hi.parse().map_err(|_| Error::Config(format!("bad range {:?}", a.h)))?;
                    (lo..=hi).collect()
                }
                None => parse_list(&a.h, "h")?,
            };
            let c1 = c1_constant(cut)?;
            let mut t = Table::new(["h", "f_of_h", "c_h", "error_bound", "lo", "hi", "prime_cut"]);
            let mut rows = Vec::new();
            for h in hs {
                let c = c_h_with(h, &c1)?;
                t.push(vec![
                    h.into(),
                    c.f_of_h.clone().into(),
                    c.c_h.into(),
                    c.error_bound().into(),
                    c.lo.into(),
                    c.hi.into(),
                    c.prime_cut.into(),
                ]);
                rows.push(json!({
                    "h": c.h,
                    "f_of_h": c.f_of_h,
                    "value": c.c_h,
                    "error_bound": c.error_bound(),
                    "lo": c.lo,
                    "hi": c.hi,
                    "prime_cut": c.prime_cut,
                }));
            }
            out.emit(&t, &rows)
        }
        Command::Constants => {
            let named = [
                ("c0", c0_constant(cut)?),
                ("theorem4", theorem4_constant(cut)?),
                ("progression", eq_c_constant(cut)?),
                ("c1", c1_constant(cut)?),
                ("c1_prime", c1_prime_constant(cut)?),
                ("forms_singular_series", leading_constant(&forms, cut)?),
                ("forms_divisor_product", tau_product_constant(&forms, cut)?),
            ];
            let mut t = Table::new(["name", "value", "error_bound", "lo", "hi", "prime_cut"]);
            for (n, e) in &named {
                product_row(&mut t, n, e);
            }
            let map: serde_json::Map<String, serde_json::Value> = named
                .iter()
                .map(|(n, e)| {
                    (
                        n.to_string(),
                        json!({"value": e.value, "error_bound": e.error_bound(), "lo": e.lo, "hi": e.hi, "prime_cut": e.prime_cut}),
                    )
                })
                .collect();
            out.emit(&t, &map)
        }
        Command::Bilinear(a) => {
            let grid = match a.grid {
                Some(g) => parse_grid(&g)?.values,
                None => vec![match a.mode {
                    BilinearMode::N => require(a.b.or(cfg.b), "--b")?,
                    _ => require(a.x.or(cfg.x), "--x")?,
                }],
            };
            let mut t = Table::new(["X", "count", "ratio_to_prediction"]);
            let mut rows = Vec::new();
            match a.mode {
                BilinearMode::N => {
                    let c = theorem4_constant(cut)?.value;
                    for b in grid {
                        let r = count_n(b)?;
                        let ratio = r.n_of_b as f64 / (c * b * b.ln());
                        t.push(vec![b.into(), r.n_of_b.into(), ratio.into()]);
                        rows.push(json!({"B": b, "count": r.n_of_b, "ratio_to_prediction": ratio}));
                    }
                }
                mode => {
                    let c0 = c0_constant(cut)?.value;
                    if mode == BilinearMode::Reduction {
                        t = Table::new(["X", "count", "ratio_to_prediction", "n1", "boundary_terms"]);
                    }
                    for x in grid {
                        let xi = integer(x, "X")?;
                        let r = if mode == BilinearMode::Reduction {
                            reduction_check(xi)?
                        } else {
                            count_n0(xi)?
                        };
                        let ratio = r.n0 as f64 / (8.0 * c0 * x * x * x.ln());
                        let mut row: Vec<Cell> = vec![x.into(), r.n0.into(), ratio.into()];
                        if mode == BilinearMode::Reduction {
                            row.extend([r.n1.into(), r.boundary_terms.into()]);
                        }
                        t.push(row);
                        rows.push(
                            json!({"X": x, "count": r.n0, "ratio_to_prediction": ratio, "n1": r.n1, "boundary_terms": r.boundary_terms}),
                        );
                    }
                }
            }
            out.emit(&t, &rows)
        }
        Command::Experiment(a) => {
            let name = match a.name {
                Some(n) => n.parse()?,
                None => require(cfg.experiment, "experiment name")?,
            };
            let grid = match a.grid {
                Some(g) => parse_grid(&g)?,
                None => require(cfg.grid()?, "--grid")?,
            };
            let grid = match a.alpha {
                Some(al) => grid.with_alpha(Some(al)),
                None => grid,
            };
            let ctx = ExperimentContext {
                forms,
                region,
                prime_cut: cut,
                parallel_points: a.parallel_points,
            };
            // with --out the JSON report is persisted after every point
            let persist = match (out.format, out.out) {
                (Format::Json, Some(p)) => Some(p),
                _ => None,
            };
            let report = run_experiment(name, &grid, &ctx, persist)?;
            out.emit(&report.to_table(), &report)
        }
        Command::IdentityCheck(a) => {
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            let mut t = Table::new(["check", "input", "lhs", "rhs", "ok"]);
            let mut rows = Vec::new();
            let mut failures = 0;
            let mut record = |check: &str, input: String, lhs: u128, rhs: u128| {
                failures += (lhs != rhs) as usize;
                t.push(vec![
                    check.into(),
                    input.clone().into(),
                    lhs.into(),
                    rhs.into(),
                    (lhs == rhs).to_string().into(),
                ]);
                rows.push(json!({"check": check, "input": input, "lhs": lhs as u64, "rhs": rhs as u64, "ok": lhs == rhs}));
            };
            for _ in 0..a.samples {
                let n: Triple = [rng.gen_range(1..=a.max), rng.gen_range(1..=a.max), rng.gen_range(1..=a.max)];
                let lhs = factor_trial(n[0] * n[1] * n[2])?.tau();
                let rhs = tau_product_identity(n)?;
                record("tau_product", format!("{} {} {}", n[0], n[1], n[2]), lhs as u128, rhs as u128);
            }
            let tables = build_tables(max_form_value(&forms, &Region::unit_square(), a.reduction_x as f64).max(2))?;
            for x in 1..=a.reduction_x {
                let lhs = t_of_x(x, &forms, &tables)?.value;
                let rhs = t_of_x_by_reduction(x, &forms, &tables)?;
                record("t_expansion", x.to_string(), lhs, rhs);
            }
            out.emit(&t, &json!({"failures": failures, "rows": rows}))?;
            if failures > 0 {
                return Err(Error::Invariant(format!("{failures} identity checks failed")));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("divforms: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
