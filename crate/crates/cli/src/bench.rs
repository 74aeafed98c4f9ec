//! Reproduction harness: convergence tables, the basin map of the 3×3
//! example, MIMO min-max against the dichotomous search, and DTI against
//! the `sigma_min` scan.
//!
//! Runs are independent; run `i` uses seed `master + i`. Wall-clock
//! columns appear only with `--timings` so that outputs stay reproducible.

use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, Result};
use clap::{Args, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use twodevp::backward_error::eta2_dti;
use twodevp::dti::{dti_solve, DtiOptions};
use twodevp::generators::{build_example61, build_orr_sommerfeld, mimo_instance};
use twodevp::oracles::{dichotomous_evopt, eigencurve_scan, sigma_min_scan_dti};
use twodevp::rqminmax::{rqminmax_solve, MinmaxProblem, RqMinmaxOptions};
use twodevp::twodrqi::{
    initial_vector, two_drqi, SolverOptions, Status, TwoDRqiResult, TwoDTriplet,
};
use twodevp::{HermitianPair, Structure};

use crate::commands::{scan_triplet, spectral_range};
use crate::output::{bracket, envelope, g, g_opt};
use crate::Ctx;

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchCommand {
    /// Convergence to a simple 2D-eigenvalue of the 3×3 example.
    Table61(TableArgs),
    /// Convergence to the double 2D-eigenvalue (1, 1) of the 3×3 example.
    Table62(TableArgs),
    /// Convergence labels over a grid of initial points.
    BasinMap(BasinArgs),
    /// MIMO min-max against the dichotomous search.
    MimoEvopt(MimoArgs),
    /// Orr-Sommerfeld DTI against the `sigma_min` scan.
    DtiOrr(DtiOrrArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct TableArgs {
    /// Initial mu; defaults to the table's starting point.
    #[arg(long, allow_hyphen_values = true)]
    pub mu0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda0: Option<f64>,
    #[arg(long, default_value_t = 20)]
    pub maxit: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct BasinArgs {
    /// Grid points per axis.
    #[arg(long, default_value_t = 20)]
    pub grid: usize,
    #[arg(long, num_args = 2, allow_hyphen_values = true, default_values_t = [-1.5, 1.5])]
    pub mu_range: Vec<f64>,
    #[arg(long, num_args = 2, allow_hyphen_values = true, default_values_t = [-2.0, 2.0])]
    pub lambda_range: Vec<f64>,
    #[arg(long, default_value_t = 15)]
    pub maxit: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct MimoArgs {
    /// Antennas; the operators have dimension `m²`.
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    #[arg(long, default_value_t = 20)]
    pub runs: usize,
    /// Width tolerance of the dichotomous search.
    #[arg(long, default_value_t = 1e-8)]
    pub tol_width: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct DtiOrrArgs {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 1000.0)]
    pub reynolds: f64,
    #[arg(long, default_value_t = 2001)]
    pub points: usize,
}

pub fn bench(cmd: &BenchCommand, ctx: &Ctx) -> Result<bool> {
    match cmd {
        BenchCommand::Table61(a) => {
            table(a, ctx, "table61", (1.454189930602562, 0.145919219434291))
        }
        BenchCommand::Table62(a) => table(a, ctx, "table62", (2.0, 0.0)),
        BenchCommand::BasinMap(a) => basin_map(a, ctx),
        BenchCommand::MimoEvopt(a) => mimo(a, ctx),
        BenchCommand::DtiOrr(a) => dti_orr(a, ctx),
    }
}

fn run_from(
    pair: &HermitianPair,
    mu0: f64,
    lambda0: f64,
    maxit: usize,
    seed: u64,
) -> Result<TwoDRqiResult> {
    let x0 = initial_vector(pair, mu0, lambda0, seed)?;
    let init = TwoDTriplet::new(mu0, lambda0, x0)?;
    let opts = SolverOptions {
        maxit,
        rng_seed: seed,
        ..Default::default()
    };
    Ok(two_drqi(pair, init, &opts)?)
}

/// All 2D-eigenvalues of the 3×3 example, refined close to rounding level.
fn reference_triplets(pair: &HermitianPair) -> Result<Vec<TwoDTriplet>> {
    Ok(eigencurve_scan(pair, (-1.5, 1.5), 300, 1e-15)?)
}

fn nearest(refs: &[TwoDTriplet], mu: f64, lambda: f64) -> Option<(usize, f64)> {
    refs.iter()
        .enumerate()
        .map(|(i, t)| (i, (t.mu - mu).hypot(t.lambda - lambda)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

fn table(args: &TableArgs, ctx: &Ctx, name: &str, default: (f64, f64)) -> Result<bool> {
    let pair = build_example61();
    let refs = reference_triplets(&pair)?;
    let mu0 = args.mu0.unwrap_or(default.0);
    let lambda0 = args.lambda0.unwrap_or(default.1);
    let r = run_from(&pair, mu0, lambda0, args.maxit, ctx.seed)?;
    let t = &r.triplet;
    let (i, _) = nearest(&refs, t.mu, t.lambda).ok_or_else(|| anyhow!("no reference found"))?;
    let reference = &refs[i];
    let rows: Vec<Vec<String>> = r
        .history
        .records
        .iter()
        .map(|h| {
            vec![
                h.k.to_string(),
                g(h.mu),
                g(h.lambda),
                g((h.mu - reference.mu).abs()),
                g((h.lambda - reference.lambda).abs()),
                g(h.eta1),
                g_opt(h.abs_a12),
            ]
        })
        .collect();
    let sink = ctx.sink()?;
    sink.write_csv(
        &format!("{name}.csv"),
        &[
            "k",
            "mu",
            "lambda",
            "err_mu",
            "err_lambda",
            "eta1",
            "abs_a12",
        ],
        &rows,
    )?;
    let result = json!({
        "mu0": mu0,
        "lambda0": lambda0,
        "reference": {"mu": reference.mu, "lambda": reference.lambda},
        "mu": t.mu,
        "lambda": t.lambda,
        "status": r.status.as_str(),
        "iterations": r.iterations,
    });
    sink.finish(
        name,
        &envelope(
            &format!("bench {name}"),
            args,
            ctx.seed,
            bracket(&r.report),
            result,
        ),
    )?;
    Ok(r.status == Status::Converged)
}

fn grid(range: &[f64], k: usize, points: usize) -> Result<f64> {
    match range {
        [lo, hi] if lo < hi => Ok(if points == 1 {
            0.5 * (lo + hi)
        } else {
            lo + (hi - lo) * k as f64 / (points - 1) as f64
        }),
        _ => Err(anyhow!("ranges need LO < HI")),
    }
}

fn basin_map(args: &BasinArgs, ctx: &Ctx) -> Result<bool> {
    let pair = build_example61();
    let refs = reference_triplets(&pair)?;
    let n = args.grid;
    if n == 0 {
        return Err(anyhow!("--grid must be positive"));
    }
    let mut rows = Vec::with_capacity(n * n);
    let mut converged = 0;
    for i in 0..n {
        for j in 0..n {
            let mu0 = grid(&args.mu_range, i, n)?;
            let lambda0 = grid(&args.lambda_range, j, n)?;
            let seed = ctx.seed.wrapping_add((i * n + j) as u64);
            let run = run_from(&pair, mu0, lambda0, args.maxit, seed);
            let mut row = vec![i.to_string(), j.to_string(), g(mu0), g(lambda0)];
            match run {
                Ok(r) => {
                    let t = &r.triplet;
                    let target = if r.status == Status::Converged {
                        converged += 1;
                        nearest(&refs, t.mu, t.lambda)
                            .filter(|&(_, d)| d <= 1e-8)
                            .map(|(k, _)| k.to_string())
                            .unwrap_or_default()
                    } else {
                        String::new()
                    };
                    row.extend([
                        r.status.as_str().to_string(),
                        r.iterations.to_string(),
                        g(t.mu),
                        g(t.lambda),
                        target,
                    ]);
                }
                // the starting basis can degenerate at isolated grid points
                Err(_) => row.extend([
                    "failed".into(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ]),
            }
            rows.push(row);
        }
    }
    let sink = ctx.sink()?;
    sink.write_csv(
        "basin_map.csv",
        &[
            "i",
            "j",
            "mu0",
            "lambda0",
            "status",
            "iterations",
            "mu",
            "lambda",
            "target",
        ],
        &rows,
    )?;
    let targets: Vec<Value> = refs
        .iter()
        .map(|t| json!({"mu": t.mu, "lambda": t.lambda}))
        .collect();
    let result = json!({"runs": n * n, "converged": converged, "targets": targets});
    sink.finish(
        "basin_map",
        &envelope("bench basin-map", args, ctx.seed, Value::Null, result),
    )?;
    Ok(true)
}

fn mimo(args: &MimoArgs, ctx: &Ctx) -> Result<bool> {
    let mut header = vec![
        "run",
        "seed",
        "case",
        "mu_rqminmax",
        "mu_dichotomous",
        "rel_diff",
        "outer_iters",
        "dichotomous_iters",
    ];
    if ctx.timings {
        header.extend(["secs_rqminmax", "secs_dichotomous"]);
    }
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for run in 0..args.runs {
        let seed = ctx.seed.wrapping_add(run as u64);
        let inst = mimo_instance(args.m, seed)?;
        let p = MinmaxProblem::new(inst.a, inst.b, Structure::KroneckerRankOne)?;
        let t0 = Instant::now();
        let r = rqminmax_solve(
            &p,
            &RqMinmaxOptions {
                rng_seed: seed,
                ..Default::default()
            },
        )?;
        let t_rq = t0.elapsed().as_secs_f64();
        let t0 = Instant::now();
        let d = dichotomous_evopt(&p, (0.0, 1.0), args.tol_width, None)?;
        let t_d = t0.elapsed().as_secs_f64();
        let rel = r.mu_opt.map(|mu| (mu - d.mu).abs() / d.mu.abs());
        if let Some(rel) = rel {
            worst = worst.max(rel);
        }
        let mut row = vec![
            run.to_string(),
            seed.to_string(),
            r.case_taken.as_str().to_string(),
            g_opt(r.mu_opt),
            g(d.mu),
            g_opt(rel),
            r.outer_iters.to_string(),
            d.iterations.to_string(),
        ];
        if ctx.timings {
            row.extend([g(t_rq), g(t_d)]);
        }
        rows.push(row);
    }
    let sink = ctx.sink()?;
    sink.write_csv("mimo_evopt.csv", &header, &rows)?;
    let result = json!({"runs": args.runs, "max_rel_diff": worst});
    sink.finish(
        "mimo_evopt",
        &envelope("bench mimo-evopt", args, ctx.seed, Value::Null, result),
    )?;
    Ok(true)
}

fn dti_orr(args: &DtiOrrArgs, ctx: &Ctx) -> Result<bool> {
    let ahat = Arc::new(build_orr_sommerfeld(args.n, args.reynolds)?);
    let t0 = Instant::now();
    let r = dti_solve(ahat.clone(), &DtiOptions::default())?;
    let t_rq = t0.elapsed().as_secs_f64();
    let t0 = Instant::now();
    let range = spectral_range(&ahat)?;
    let s = sigma_min_scan_dti(&ahat, range, args.points)?;
    let t_scan = t0.elapsed().as_secs_f64();
    let (pair, st) = scan_triplet(&ahat, s.mu)?;
    let scan_eta2 = eta2_dti(&pair, &st)?.eta2;
    let rel = (r.beta_hat - s.beta).abs() / s.beta;
    let mut header = vec!["method", "beta", "mu", "count", "eta2"];
    let mut rows = vec![
        vec![
            "2drqi".to_string(),
            g(r.beta_hat),
            g(r.mu_hat),
            r.iterations.to_string(),
            g(r.eta2),
        ],
        vec![
            "scan".to_string(),
            g(s.beta),
            g(s.mu),
            s.evaluations.to_string(),
            g_opt(scan_eta2),
        ],
    ];
    if ctx.timings {
        header.push("secs");
        rows[0].push(g(t_rq));
        rows[1].push(g(t_scan));
    }
    let sink = ctx.sink()?;
    sink.write_csv("dti_orr.csv", &header, &rows)?;
    let rep = eta2_dti(
        &pair,
        &TwoDTriplet::new(r.mu_hat, r.lambda_hat, r.x_hat.clone())?,
    )?;
    let result = json!({
        "beta_2drqi": r.beta_hat,
        "beta_scan": s.beta,
        "rel_diff": rel,
        "agreeing_digits": if rel > 0.0 { (-rel.log10()).floor().max(0.0) } else { 16.0 },
        "status": r.status.as_str(),
        "scan_range": [range.0, range.1],
    });
    sink.finish(
        "dti_orr",
        &envelope("bench dti-orr", args, ctx.seed, bracket(&rep), result),
    )?;
    Ok(r.status == Status::Converged)
}
