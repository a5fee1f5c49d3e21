use std::fmt::Write as _;

use linni::branch::{trace_branch_with, BranchOptions, BranchTrace};
use linni::klt::{klt_with, write_klt_csv, KltResult};
use linni::rng::random_smooth_positive;
use linni::variational::{write_sweep_csv, SweepRow};
use linni::*;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{Format, Init, RunConfig};

pub enum Failure {
    Usage(String),
    Solver(Error),
}

impl From<String> for Failure {
    fn from(e: String) -> Self {
        Failure::Usage(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::ExponentRange { .. } => Failure::Usage(e.to_string()),
            other => Failure::Solver(other),
        }
    }
}

type Run = std::result::Result<Output, Failure>;

pub enum Output {
    Csv { notes: Vec<String>, body: String },
    Json(Value),
}

impl Output {
    pub fn render(self, command: &str, hash: &str) -> String {
        match self {
            Output::Csv { notes, body } => {
                let mut s = format!("# linni {command} config-sha256={hash}\n");
                for n in notes {
                    let _ = writeln!(s, "# {n}");
                }
                s + &body
            }
            Output::Json(mut v) => {
                if let Value::Object(map) = &mut v {
                    map.insert("command".into(), json!(command));
                    map.insert("config_sha256".into(), json!(hash));
                }
                serde_json::to_string_pretty(&v).expect("json serializes") + "\n"
            }
        }
    }
}

fn csv_with<F>(notes: Vec<String>, write: F) -> Run
where
    F: FnOnce(&mut Vec<u8>) -> linni::Result<()>,
{
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(Output::Csv {
        notes,
        body: String::from_utf8(buf).expect("utf-8 output"),
    })
}

fn grid(cfg: &RunConfig) -> std::result::Result<Grid, Failure> {
    Ok(build_grid(&cfg.domain()?, cfg.n)?)
}

fn descent(cfg: &RunConfig) -> DescentOptions {
    DescentOptions {
        seed: cfg.seed,
        ..DescentOptions::default()
    }
}

fn sorted_by<T, F: Fn(&T) -> f64>(mut v: Vec<T>, key: F) -> Vec<T> {
    v.sort_by(|a, b| key(a).total_cmp(&key(b)));
    v
}

pub fn bounds(cfg: &RunConfig) -> Run {
    let exponent = cfg.exponent()?;
    let lambda2 = match cfg.lambda2 {
        Some(l) => l,
        None => spectral_gap(&grid(cfg)?)?.eigenvalue,
    };
    let rep = rigidity_bounds(exponent, cfg.dimension(), lambda2, cfg.lsi)?;
    let star = rep.best_lower_lambda_star();
    match cfg.format {
        Format::Json => {
            let mut v = serde_json::to_value(&rep).expect("report serializes");
            v["best_lower_lambda_star"] = json!(star);
            Ok(Output::Json(v))
        }
        Format::Csv => {
            let mut body = String::from("quantity,value\n");
            let rows = [
                ("lambda2", Some(rep.lambda2)),
                ("upper", Some(rep.upper)),
                ("lower_nonlinear", rep.lower_nonlinear),
                ("lower_heat", rep.lower_heat),
                ("lower_heat_traceless", rep.lower_heat_traceless),
                ("lower_beckner", rep.lower_beckner),
                ("best_lower", rep.best_lower),
                ("best_lower_lambda_star", star),
            ];
            for (k, v) in rows {
                if let Some(v) = v {
                    let _ = writeln!(body, "{k},{v}");
                }
            }
            Ok(Output::Csv { notes: Vec::new(), body })
        }
    }
}

pub fn eigen(cfg: &RunConfig) -> Run {
    let g = grid(cfg)?;
    let gap = spectral_gap(&g)?;
    match cfg.format {
        Format::Json => Ok(Output::Json(json!({
            "lambda2": gap.eigenvalue,
            "residual": gap.residual,
            "iterations": gap.iterations,
        }))),
        Format::Csv => csv_with(vec![format!("lambda2={}", gap.eigenvalue)], |b| {
            gap.eigenfunction.write_csv(b, None)
        }),
    }
}

pub fn quotient(cfg: &RunConfig) -> Run {
    let p = cfg.power()?;
    if cfg.lambda.is_empty() {
        return Err(Failure::Usage("quotient needs --lambda (one value or a list)".into()));
    }
    let g = grid(cfg)?;
    let problem = Problem::new(&g, Exponent::Power(p))?;
    let opts = descent(cfg);
    let rows: linni::Result<Vec<(SweepRow, bool)>> = cfg
        .lambda
        .par_iter()
        .map(|&l| {
            let s = problem.threshold_quotient(l, &opts)?;
            Ok((SweepRow::from(&s), s.converged))
        })
        .collect();
    let rows = sorted_by(rows?, |r| r.0.parameter);
    match cfg.format {
        Format::Json => Ok(Output::Json(json!({
            "p": p,
            "lambda2": problem.lambda2(),
            "rows": rows.iter().map(|(r, c)| json!({
                "parameter": r.parameter,
                "value": r.value,
                "constant_deviation": r.constant_deviation,
                "iterations": r.iterations,
                "converged": c,
            })).collect::<Vec<_>>(),
        }))),
        Format::Csv => {
            let plain: Vec<SweepRow> = rows.into_iter().map(|r| r.0).collect();
            csv_with(vec![format!("p={p} lambda2={}", problem.lambda2())], |b| {
                write_sweep_csv(&plain, b, None)
            })
        }
    }
}

pub fn mu2(cfg: &RunConfig) -> Run {
    let p = cfg.power()?;
    let g = grid(cfg)?;
    let problem = Problem::new(&g, Exponent::Power(p))?;
    let b = problem.estimate_mu2(cfg.tol, &descent(cfg))?;
    let rep = rigidity_bounds(Exponent::Power(p), g.dimension(), problem.lambda2(), None)?;
    let row = json!({
        "lo": b.lo,
        "hi": b.hi,
        "open": b.open,
        "evaluations": b.evaluations,
        "lambda2": problem.lambda2(),
        "bifurcation": problem.bifurcation(),
        "best_lower": rep.best_lower,
    });
    match cfg.format {
        Format::Json => Ok(Output::Json(row)),
        Format::Csv => {
            let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
            Ok(Output::Csv {
                notes: Vec::new(),
                body: format!(
                    "lo,hi,open,evaluations,lambda2,bifurcation,best_lower\n{},{},{},{},{},{},{}\n",
                    b.lo,
                    b.hi,
                    b.open,
                    b.evaluations,
                    problem.lambda2(),
                    problem.bifurcation(),
                    opt(rep.best_lower)
                ),
            })
        }
    }
}

fn both_branches<'g>(g: &'g Grid, p: f64) -> linni::Result<Vec<BranchTrace<'g>>> {
    let gap = spectral_gap(g)?;
    let start = 0.5 * gap.eigenvalue / (p - 1.0).abs();
    [1.0, -1.0]
        .par_iter()
        .map(|&o| {
            let opts = BranchOptions {
                orientation: o,
                ..BranchOptions::default()
            };
            trace_branch_with(g, p, start, 1.0, &opts)
        })
        .collect()
}

pub fn mu1(cfg: &RunConfig) -> Run {
    let p = cfg.power()?;
    let g = grid(cfg)?;
    let traces = both_branches(&g, p)?;
    let mu1 = estimate_mu1(&traces);
    let bif = traces[0].bifurcation;
    let truncated = traces.iter().any(|t| t.truncated);
    match cfg.format {
        Format::Json => Ok(Output::Json(json!({
            "p": p,
            "bifurcation": bif,
            "mu1": mu1,
            "truncated": truncated,
            "points": traces.iter().map(|t| t.points.len()).collect::<Vec<_>>(),
        }))),
        Format::Csv => {
            let mut body = String::from("orientation,lambda,deviation,sup_norm,arclength\n");
            for (t, o) in traces.iter().zip([1, -1]) {
                for pt in &t.points {
                    let _ = writeln!(body, "{o},{},{},{},{}", pt.lambda, pt.deviation, pt.sup_norm(), pt.arclength);
                }
            }
            let note = format!(
                "mu1={} bifurcation={} truncated={truncated}",
                mu1.map_or("none".into(), |m| m.to_string()),
                bif.map_or("none".into(), |m| m.to_string())
            );
            Ok(Output::Csv { notes: vec![note], body })
        }
    }
}

pub fn flow(cfg: &RunConfig, nonlinear: bool) -> Run {
    let g = grid(cfg)?;
    let v0 = match cfg.init {
        Init::Mode => {
            let gap = spectral_gap(&g)?;
            gap.eigenfunction.map(|u| (1.0 + cfg.amplitude * u).max(1e-3))
        }
        Init::Random => Field::new(&g, random_smooth_positive(&g, cfg.seed, cfg.amplitude))?,
    };
    let p = cfg.power()?;
    let (trace, beta) = if nonlinear {
        let beta = match cfg.beta {
            Some(b) => b,
            None => beta_roots(cfg.theta, p, g.dimension())?.midpoint(),
        };
        (nonlinear_flow_run(&g, p, beta, cfg.theta, &v0, cfg.t_end)?, beta)
    } else {
        (heat_flow_run(&g, p, &v0, cfg.t_end)?, 1.0)
    };
    let last = trace.len() - 1;
    match cfg.format {
        Format::Json => Ok(Output::Json(json!({
            "p": p,
            "beta": beta,
            "big_lambda": trace.big_lambda,
            "lambda2": trace.lambda2,
            "steps": last,
            "mass_drift": trace.mass_drift(),
            "j_start": trace.j_lambda[0],
            "j_end": trace.j_lambda[last],
            "dissipation": trace.dissipation[last],
            "worst_j_increase": trace.worst_j_increase(1e-10, 1e-12),
            "production_decay_rate": trace.production_decay_rate(1e-12),
        }))),
        Format::Csv => csv_with(
            vec![format!("p={p} beta={beta} big_lambda={} lambda2={}", trace.big_lambda, trace.lambda2)],
            |b| trace.write_csv(b, None),
        ),
    }
}

fn klt_rows<'g>(problem: &Problem<'g>, mus: &[f64], opts: &DescentOptions) -> linni::Result<Vec<KltResult<'g>>> {
    let rows: linni::Result<Vec<KltResult<'g>>> = mus.par_iter().map(|&mu| klt_with(problem, mu, opts)).collect();
    Ok(sorted_by(rows?, |r| r.mu))
}

pub fn klt(cfg: &RunConfig) -> Run {
    let p = cfg.power()?;
    if cfg.mu.is_empty() {
        return Err(Failure::Usage("klt needs --mu (one value or a list)".into()));
    }
    let g = grid(cfg)?;
    let problem = Problem::new(&g, Exponent::Power(p))?;
    let rows = klt_rows(&problem, &cfg.mu, &descent(cfg))?;
    match cfg.format {
        Format::Json => Ok(Output::Json(json!({
            "p": p,
            "rows": rows.iter().map(|r| json!({
                "mu": r.mu,
                "nu": r.nu,
                "lambda_of_mu": r.lambda_of_mu,
                "relative_gap": r.relative_gap(),
                "holder_norm": r.holder_norm,
                "q": r.q,
            })).collect::<Vec<_>>(),
        }))),
        Format::Csv => csv_with(Vec::new(), |b| write_klt_csv(&rows, b, None)),
    }
}

pub fn report(cfg: &RunConfig) -> Run {
    let p = cfg.power()?;
    let g = grid(cfg)?;
    let problem = Problem::new(&g, Exponent::Power(p))?;
    let opts = descent(cfg);
    let lambda2 = problem.lambda2();
    let bounds = rigidity_bounds(Exponent::Power(p), g.dimension(), lambda2, None)?;
    let ((bracket, traces), klt) = rayon::join(
        || {
            rayon::join(
                || problem.estimate_mu2(cfg.tol, &opts),
                || both_branches(&g, p),
            )
        },
        || {
            let b = problem.bifurcation();
            klt_rows(&problem, &[0.5 * b, 2.0 * b, 3.0 * b], &opts)
        },
    );
    let bracket = bracket?;
    let traces = traces?;
    let klt = klt?;
    let mu1 = estimate_mu1(&traces);
    let lower = bounds.best_lower;
    Ok(Output::Json(json!({
        "p": p,
        "d": g.dimension(),
        "n": cfg.n,
        "lambda2": lambda2,
        "bounds": bounds,
        "mu2_bracket": bracket,
        "mu1": mu1,
        "branch_truncated": traces.iter().any(|t| t.truncated),
        "checks": {
            "mu2_above_lower_bound": lower.map(|l| bracket.hi >= l),
            "mu2_below_upper_bound": bracket.lo <= bounds.upper * (1.0 + cfg.tol),
            "mu1_not_above_mu2": mu1.map(|m| m <= bracket.hi * 1.02),
        },
        "klt": klt.iter().map(|r| json!({
            "mu": r.mu,
            "nu": r.nu,
            "lambda_of_mu": r.lambda_of_mu,
            "relative_gap": r.relative_gap(),
        })).collect::<Vec<_>>(),
    })))
}
