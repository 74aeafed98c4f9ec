use std::sync::Arc;

use anyhow::{bail, Result};
use clap::{Args, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use twodevp::backward_error::{eta1, eta2_dti};
use twodevp::dti::{dti_solve, DtiOptions, Validation};
use twodevp::oracles::{
    dichotomous_evopt, eigencurve_samples, eigencurve_scan, sigma_min_scan_dti,
};
use twodevp::rqminmax::{rqminmax_solve, MinmaxStatus, RqMinmaxOptions};
use twodevp::twodrqi::{initial_vector, two_drqi, SolverOptions, Status, TwoDTriplet};
use twodevp::{HermitianPair, StateMatrix};

use crate::output::{bracket, envelope, g};
use crate::source::{MinmaxSource, PairSource, StateSource};
use crate::Ctx;

#[derive(Debug, Args, Serialize)]
pub struct SolveArgs {
    #[command(flatten)]
    pub source: PairSource,
    #[arg(long, allow_hyphen_values = true)]
    pub mu0: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda0: f64,
    /// Stop once eta1 drops to this value; defaults to n·eps.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, default_value_t = 20)]
    pub maxit: usize,
}

pub fn solve(args: &SolveArgs, ctx: &Ctx) -> Result<bool> {
    let pair = args.source.load(ctx.seed)?;
    let x0 = initial_vector(&pair, args.mu0, args.lambda0, ctx.seed)?;
    let init = TwoDTriplet::new(args.mu0, args.lambda0, x0)?;
    let opts = SolverOptions {
        tol: args.tol,
        maxit: args.maxit,
        rng_seed: ctx.seed,
        ..Default::default()
    };
    let r = two_drqi(&pair, init, &opts)?;
    let sink = ctx.sink()?;
    sink.write("solve_history.csv", &r.history.to_csv())?;
    let t = &r.triplet;
    let result = json!({
        "mu": t.mu,
        "lambda": t.lambda,
        "x": t.x,
        "status": r.status.as_str(),
        "iterations": r.iterations,
        "tolerance": opts.tolerance(pair.dim()),
        "history": r.history,
    });
    sink.finish(
        "solve",
        &envelope("solve", args, ctx.seed, bracket(&r.report), result),
    )?;
    Ok(r.status == Status::Converged)
}

#[derive(Debug, Args, Serialize)]
pub struct RqMinmaxArgs {
    #[command(flatten)]
    pub source: MinmaxSource,
    #[arg(long, default_value_t = 1e-8)]
    pub reltol: f64,
    /// Inner 2DRQI tolerance; defaults to n·eps.
    #[arg(long)]
    pub backtol: Option<f64>,
    #[arg(long, default_value_t = 1e-12)]
    pub abstol: f64,
    #[arg(long, default_value_t = 60)]
    pub max_outer: usize,
    #[arg(long, default_value_t = 20)]
    pub inner_maxit: usize,
}

pub fn rqminmax(args: &RqMinmaxArgs, ctx: &Ctx) -> Result<bool> {
    let p = args.source.load(ctx.seed)?;
    let opts = RqMinmaxOptions {
        reltol: args.reltol,
        backtol: args.backtol,
        abstol: args.abstol,
        max_outer: args.max_outer,
        inner_maxit: args.inner_maxit,
        rng_seed: ctx.seed,
    };
    let r = rqminmax_solve(&p, &opts)?;
    let sink = ctx.sink()?;
    if let Some(h) = &r.history {
        sink.write("rqminmax_history.csv", &h.to_csv())?;
    }
    let be = match r.mu_opt {
        Some(mu) => bracket(&eta1(
            p.pair(),
            &TwoDTriplet::new(mu, r.value, r.x_opt.clone())?,
        )?),
        None => Value::Null,
    };
    sink.finish(
        "rqminmax",
        &envelope("rqminmax", args, ctx.seed, be, serde_json::to_value(&r)?),
    )?;
    Ok(r.status == MinmaxStatus::Solved)
}

#[derive(Debug, Args, Serialize)]
pub struct DtiArgs {
    #[command(flatten)]
    pub source: StateSource,
    /// Threshold for eta2 and the half-vector relation; defaults to 2m·eps.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, default_value_t = 20)]
    pub maxit: usize,
    /// Certify the result with a Hamiltonian eigenvalue check.
    #[arg(long)]
    pub validate: bool,
    #[arg(long, default_value_t = 1e-9)]
    pub reltol: f64,
}

pub fn dti(args: &DtiArgs, ctx: &Ctx) -> Result<bool> {
    let ahat = args.source.load(ctx.seed)?;
    let opts = DtiOptions {
        tol: args.tol,
        maxit: args.maxit,
        validate: args.validate,
        reltol: args.reltol,
        ..Default::default()
    };
    let r = dti_solve(ahat.clone(), &opts)?;
    let pair = HermitianPair::dti(ahat)?;
    let rep = eta2_dti(
        &pair,
        &TwoDTriplet::new(r.mu_hat, r.lambda_hat, r.x_hat.clone())?,
    )?;
    let sink = ctx.sink()?;
    sink.write("dti_history.csv", &r.history.to_csv())?;
    let mut result = serde_json::to_value(&r)?;
    result["status"] = json!(r.status.as_str());
    sink.finish(
        "dti",
        &envelope("dti", args, ctx.seed, bracket(&rep), result),
    )?;
    Ok(r.status == Status::Converged && r.validated != Validation::Failed)
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleCommand {
    /// Sample the eigencurves of `A - mu C` and locate all 2D-eigenvalues.
    Eigencurves(EigencurvesArgs),
    /// Dichotomous search for `max_mu lambda_min(A - mu (A - B))`.
    EvoptDichotomous(DichotomousArgs),
    /// Distance to instability by scanning `sigma_min(Â - mu j I)`.
    DtiScan(DtiScanArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct EigencurvesArgs {
    #[command(flatten)]
    pub source: PairSource,
    #[arg(long, num_args = 2, allow_hyphen_values = true, value_names = ["LO", "HI"], default_values_t = [-1.5, 1.5])]
    pub range: Vec<f64>,
    #[arg(long, default_value_t = 300)]
    pub points: usize,
    /// Bisection stops once `|x^H C x| <= refine_tol ‖C‖`.
    #[arg(long, default_value_t = 1e-12)]
    pub refine_tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct DichotomousArgs {
    #[command(flatten)]
    pub source: MinmaxSource,
    #[arg(long, num_args = 2, allow_hyphen_values = true, value_names = ["LO", "HI"], default_values_t = [0.0, 1.0])]
    pub interval: Vec<f64>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol_width: f64,
    /// Probe offset; defaults to a quarter of the width tolerance.
    #[arg(long)]
    pub eps_r: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct DtiScanArgs {
    #[command(flatten)]
    pub source: StateSource,
    /// Defaults to the imaginary parts of the spectrum widened by one.
    #[arg(long, num_args = 2, allow_hyphen_values = true, value_names = ["LO", "HI"])]
    pub range: Option<Vec<f64>>,
    #[arg(long, default_value_t = 2001)]
    pub points: usize,
}

pub fn oracle(cmd: &OracleCommand, ctx: &Ctx) -> Result<bool> {
    match cmd {
        OracleCommand::Eigencurves(a) => eigencurves(a, ctx),
        OracleCommand::EvoptDichotomous(a) => dichotomous(a, ctx),
        OracleCommand::DtiScan(a) => dti_scan(a, ctx),
    }
}

fn range_of(v: &[f64]) -> Result<(f64, f64)> {
    match v {
        [lo, hi] if lo < hi => Ok((*lo, *hi)),
        _ => bail!("range needs LO < HI"),
    }
}

fn eigencurves(args: &EigencurvesArgs, ctx: &Ctx) -> Result<bool> {
    let pair = args.source.load(ctx.seed)?;
    let range = range_of(&args.range)?;
    let samples = eigencurve_samples(&pair, range, args.points)?;
    let found = eigencurve_scan(&pair, range, args.points, args.refine_tol)?;
    let n = pair.dim();
    let mut header = vec!["mu".to_string()];
    header.extend((1..=n).map(|i| format!("lambda_{i}")));
    header.extend((1..=n).map(|i| format!("xcx_{i}")));
    let rows: Vec<Vec<String>> = samples
        .iter()
        .map(|s| {
            std::iter::once(g(s.mu))
                .chain(s.lambdas.iter().map(|&v| g(v)))
                .chain(s.c_values.iter().map(|&v| g(v)))
                .collect()
        })
        .collect();
    let sink = ctx.sink()?;
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    sink.write_csv("eigencurves.csv", &header, &rows)?;
    let mut triplets = Vec::new();
    let mut rows = Vec::new();
    for t in &found {
        let rep = eta1(&pair, t)?;
        rows.push(vec![
            g(t.mu),
            g(t.lambda),
            g(rep.gamma_c.abs()),
            g(rep.eta1),
        ]);
        triplets.push(json!({"mu": t.mu, "lambda": t.lambda, "eta1": rep.eta1}));
    }
    sink.write_csv(
        "eigencurve_triplets.csv",
        &["mu", "lambda", "abs_xcx", "eta1"],
        &rows,
    )?;
    let result = json!({"samples": samples.len(), "triplets": triplets});
    sink.finish(
        "eigencurves",
        &envelope("oracle eigencurves", args, ctx.seed, Value::Null, result),
    )?;
    Ok(true)
}

fn dichotomous(args: &DichotomousArgs, ctx: &Ctx) -> Result<bool> {
    let p = args.source.load(ctx.seed)?;
    let r = dichotomous_evopt(&p, range_of(&args.interval)?, args.tol_width, args.eps_r)?;
    let sink = ctx.sink()?;
    let rows: Vec<Vec<String>> = r
        .brackets
        .iter()
        .enumerate()
        .map(|(k, (a, b))| vec![(k + 1).to_string(), g(*a), g(*b)])
        .collect();
    sink.write_csv("dichotomous_brackets.csv", &["k", "a", "b"], &rows)?;
    let result = json!({"mu": r.mu, "value": r.value, "iterations": r.iterations});
    sink.finish(
        "dichotomous",
        &envelope(
            "oracle evopt-dichotomous",
            args,
            ctx.seed,
            Value::Null,
            result,
        ),
    )?;
    Ok(true)
}

/// Imaginary parts of the spectrum widened by one on both sides.
pub fn spectral_range(ahat: &StateMatrix) -> Result<(f64, f64)> {
    let ev = ahat.eigenvalues()?;
    let lo = ev.iter().map(|z| z.im).fold(f64::INFINITY, f64::min);
    let hi = ev.iter().map(|z| z.im).fold(f64::NEG_INFINITY, f64::max);
    Ok((lo - 1.0, hi + 1.0))
}

/// The block-pair triplet `(mu, sigma, [u; v]/sqrt(2))` at a scan minimum.
pub fn scan_triplet(ahat: &Arc<StateMatrix>, mu: f64) -> Result<(HermitianPair, TwoDTriplet)> {
    let (sigma, u, v) = ahat.sigma_min_triplet(mu)?;
    let x = u.iter().chain(&v).copied().collect();
    Ok((
        HermitianPair::dti(ahat.clone())?,
        TwoDTriplet::new(mu, sigma, x)?,
    ))
}

fn dti_scan(args: &DtiScanArgs, ctx: &Ctx) -> Result<bool> {
    let ahat = args.source.load(ctx.seed)?;
    let range = match &args.range {
        Some(r) => range_of(r)?,
        None => spectral_range(&ahat)?,
    };
    let s = sigma_min_scan_dti(&ahat, range, args.points)?;
    let (pair, t) = scan_triplet(&ahat, s.mu)?;
    let rep = eta2_dti(&pair, &t)?;
    let result = json!({
        "beta": s.beta,
        "mu": s.mu,
        "grid_min": s.grid_min,
        "evaluations": s.evaluations,
        "range": [range.0, range.1],
    });
    ctx.sink()?.finish(
        "dti_scan",
        &envelope("oracle dti-scan", args, ctx.seed, bracket(&rep), result),
    )?;
    Ok(true)
}
