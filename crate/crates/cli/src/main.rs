mod model;
mod verify;

use std::fs::File;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use bdchain::contfrac::{evaluate_H, evaluate_H_tilde, Admissibility, ContinuedFractionEvaluation};
use bdchain::factorization::{
    darboux_lu, darboux_ul, lu_factorize, read_factors_csv, ul_factorize, write_factors_csv, FactorError, FactorOptions,
    LUFactors, Precision, ULFactors,
};
use bdchain::models::ModelSpec;
use bdchain::spectral::{
    christoffel, geronimus, invariance_residual, invariant_measure, moments, KmEvaluator, OrthoRecurrence,
    SpectralMeasure,
};
use bdchain::tridiag::{multiply_ul, truncate_dense, write_table_csv, BirthDeathChain};
use bdchain::urn::{compare_empirical, simulate_chain, simulate_composed, simulate_urn, target_chain, Order};
use clap::{Parser, Subcommand, ValueEnum};
use rug::Rational;
use serde_json::json;

use model::{parse_model, urn_spec};

#[derive(Parser)]
#[command(name = "bdchain", version, about = "Stochastic factorization and spectral tools for birth-death chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Ul,
    Lu,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimOrder {
    Plain,
    Ul,
    Lu,
}

#[derive(Clone, Copy, ValueEnum)]
enum Transform {
    None,
    Geronimus,
    Christoffel,
}

#[derive(Subcommand)]
enum Command {
    /// Admissible ranges H (UL, free y0) and H~ (LU, largest a0).
    Range {
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long, default_value_t = 10_000)]
        max_terms: usize,
        #[arg(long)]
        json: bool,
        /// Write the convergents of H as `n,A,B,h`.
        #[arg(long)]
        convergents: Option<PathBuf>,
    },
    /// Stochastic UL or LU factors as `n,x,y,s,r`.
    Factorize {
        #[arg(long)]
        model: String,
        #[arg(long, value_enum, default_value = "ul")]
        mode: Mode,
        /// Free parameter; defaults to the one the model selects, else 0.
        #[arg(long)]
        y0: Option<f64>,
        #[arg(long, default_value_t = 50)]
        depth: usize,
        /// `double`, `extended[:bits]` or `exact`.
        #[arg(long, default_value = "double", value_parser = parse_precision)]
        precision: Precision,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Skip the range check and run the recurrence regardless.
        #[arg(long)]
        force: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Darboux transform of a factor CSV, written as `n,a,b,c`.
    Darboux {
        #[arg(long)]
        factors: PathBuf,
        /// `ul` reverses `P_U P_L`, `lu` reverses `P_L P_U`.
        #[arg(long, value_enum, default_value = "ul")]
        mode: Mode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Density samples `x,density` and an atoms JSON block.
    Spectrum {
        #[arg(long)]
        model: String,
        #[arg(long, value_enum, default_value = "none")]
        transform: Transform,
        #[arg(long)]
        y0: Option<f64>,
        #[arg(long, default_value_t = 200)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        atoms: Option<PathBuf>,
    },
    /// Moments `mu_{-1}, ..., mu_kmax` as JSON.
    Moments {
        #[arg(long)]
        model: String,
        #[arg(long, value_enum, default_value = "none")]
        transform: Transform,
        #[arg(long)]
        y0: Option<f64>,
        #[arg(long, default_value_t = 10)]
        kmax: u32,
    },
    /// Karlin-McGregor integrals against powers of the truncated matrix.
    KmCheck {
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 60)]
        depth: usize,
        #[arg(long, default_value_t = 10)]
        steps: u32,
        #[arg(long, default_value_t = 5)]
        max_index: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Invariant measure and its residual.
    Invariant {
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 20)]
        depth: usize,
        /// Rational arithmetic; values are printed as fractions.
        #[arg(long)]
        exact: bool,
    },
    /// Seeded simulation with a chi-square comparison against the analytic rows.
    Simulate {
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 1000)]
        steps: u64,
        #[arg(long, default_value_t = 1000)]
        replicas: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value = "plain")]
        order: SimOrder,
        /// Draw balls from the urn model instead of sampling factor rows.
        #[arg(long)]
        urn: bool,
        #[arg(long)]
        y0: Option<f64>,
        #[arg(long, default_value_t = 0)]
        start: usize,
        #[arg(long, default_value_t = 0.001)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Transition frequencies as `from,to,count,frequency`.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Cross-checks every module; exits 1 on any failure.
    Verify {
        #[arg(long)]
        quick: bool,
    },
}

/// Failure with its exit code: 2 for configuration, 1 for verification.
struct Failure {
    code: u8,
    message: String,
}

fn config(e: impl std::fmt::Display) -> Failure {
    Failure { code: 2, message: e.to_string() }
}

fn parse_precision(s: &str) -> Result<Precision, String> {
    match s {
        "double" => Ok(Precision::Double),
        "exact" => Ok(Precision::Exact),
        "extended" => Ok(Precision::Extended(bdchain::scalar::extended_precision_bits())),
        _ => s
            .strip_prefix("extended:")
            .and_then(|b| b.parse::<u32>().ok())
            .filter(|&b| b >= 53)
            .map(Precision::Extended)
            .ok_or_else(|| format!("unknown precision {s:?}")),
    }
}

fn emit(out: &Option<PathBuf>, write: impl FnOnce(&mut dyn Write) -> Result<(), String>) -> Result<(), Failure> {
    match out {
        Some(path) => {
            let mut f = File::create(path).map_err(|e| config(format!("{}: {e}", path.display())))?;
            write(&mut f).map_err(config)
        }
        None => write(&mut std::io::stdout().lock()).map_err(config),
    }
}

fn print_json(v: &serde_json::Value) -> Result<(), Failure> {
    println!("{}", serde_json::to_string_pretty(v).map_err(config)?);
    Ok(())
}

fn bound_json(e: &ContinuedFractionEvaluation) -> serde_json::Value {
    match e.admissibility() {
        Admissibility::Bound(h) => json!({ "value": h, "method": format!("{:?}", e.method), "error_estimate": e.error_estimate }),
        Admissibility::NotFactorizable { index } => json!({ "not_factorizable": true, "dominance_fails_at": index }),
        Admissibility::Inconclusive => json!({ "inconclusive": true, "last": e.value }),
    }
}

fn bound_text(e: &ContinuedFractionEvaluation) -> String {
    match e.admissibility() {
        Admissibility::Bound(h) => format!("{h}"),
        Admissibility::NotFactorizable { index } => format!("not factorizable (dominance fails at convergent {index})"),
        Admissibility::Inconclusive => format!("inconclusive (last convergent {})", e.value),
    }
}

fn measure_of(spec: &ModelSpec, transform: Transform, y0: Option<f64>) -> Result<SpectralMeasure, Failure> {
    let base = match spec {
        ModelSpec::Constant(p) => bdchain::spectral::constant_chain_measure(p.a0, p.a, p.b, p.c),
        ModelSpec::Jacobi(p) => bdchain::spectral::jacobi_weight(p.alpha, p.beta),
    }
    .map_err(config)?;
    match transform {
        Transform::None => Ok(base),
        Transform::Geronimus => {
            let y0 = y0.or(spec.y0()).ok_or_else(|| config("geronimus needs --y0 or a model that selects one"))?;
            geronimus(&base, y0).map_err(config)
        }
        Transform::Christoffel => christoffel(&base).map_err(config),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Range { model, tol, max_terms, json, convergents } => {
            let chain = parse_model(&model)?.chain().map_err(config)?;
            let h = evaluate_H(&chain, tol, max_terms);
            let ht = evaluate_H_tilde(&chain, tol, max_terms);
            if json {
                print_json(&json!({ "H": bound_json(&h), "H_tilde": bound_json(&ht) }))?;
            } else {
                println!("H = {}", bound_text(&h));
                println!("H~ = {}", bound_text(&ht));
            }
            if convergents.is_some() {
                emit(&convergents, |w| {
                    writeln!(w, "n,A,B,h").map_err(|e| e.to_string())?;
                    for c in &h.convergents {
                        writeln!(w, "{},{},{},{}", c.n, c.a, c.b, c.h).map_err(|e| e.to_string())?;
                    }
                    Ok(())
                })?;
            }
            Ok(())
        }
        Command::Factorize { model, mode, y0, depth, precision, tol, force, out } => {
            let spec = parse_model(&model)?;
            let chain = spec.chain().map_err(config)?;
            let opts = FactorOptions { tol, force, precision, ..Default::default() };
            let (upper, lower, boundary) = match mode {
                Mode::Ul => {
                    let y0 = y0.or(spec.y0()).unwrap_or(0.0);
                    let f = ul_factorize(&chain, y0, 1.0, depth, &opts).map_err(factor_failure)?;
                    (f.upper, f.lower, f.boundary)
                }
                Mode::Lu => {
                    let f = lu_factorize(&chain, depth, &opts).map_err(factor_failure)?;
                    (f.upper, f.lower, f.boundary)
                }
            };
            if boundary {
                eprintln!("note: parameter sits at the admissibility bound");
            }
            emit(&out, |w| write_factors_csv(&upper, &lower, w).map_err(|e| e.to_string()))
        }
        Command::Darboux { factors, mode, out } => {
            let file = File::open(&factors).map_err(|e| config(format!("{}: {e}", factors.display())))?;
            let (upper, lower) = read_factors_csv(file).map_err(config)?;
            let len = upper.len().min(lower.len());
            let table = match mode {
                Mode::Ul => {
                    let depth = len.checked_sub(2).ok_or_else(|| config("factor table needs at least two rows"))?;
                    let (y0, s0) = (upper.y[0], lower.s[0]);
                    darboux_ul(&ULFactors { upper, lower, y0, s0, boundary: false }, depth)
                }
                Mode::Lu => {
                    let depth = len.checked_sub(2).ok_or_else(|| config("factor table needs at least two rows"))?;
                    darboux_lu(&LUFactors { lower, upper, boundary: false }, depth)
                }
            }
            .map_err(config)?;
            emit(&out, |w| write_table_csv(&table, w).map_err(|e| e.to_string()))
        }
        Command::Spectrum { model, transform, y0, points, out, atoms } => {
            let spec = parse_model(&model)?;
            let m = measure_of(&spec, transform, y0)?;
            emit(&out, |w| {
                writeln!(w, "x,density").map_err(|e| e.to_string())?;
                for (x, d) in m.density_samples(points) {
                    writeln!(w, "{x},{d}").map_err(|e| e.to_string())?;
                }
                Ok(())
            })?;
            let block = json!({ "atoms": m.atoms, "total_mass": m.total_mass(), "support": m.support() });
            match atoms {
                Some(_) => emit(&atoms, |w| writeln!(w, "{}", serde_json::to_string_pretty(&block).map_err(|e| e.to_string())?).map_err(|e| e.to_string())),
                None => {
                    eprintln!("{}", serde_json::to_string_pretty(&block).map_err(config)?);
                    Ok(())
                }
            }
        }
        Command::Moments { model, transform, y0, kmax } => {
            let spec = parse_model(&model)?;
            let m = measure_of(&spec, transform, y0)?;
            let t = moments(&m, kmax).map_err(config)?;
            let list: Vec<_> = t.moments.iter().map(|(k, v)| json!({ "k": k, "value": finite_or_string(*v) })).collect();
            print_json(&json!({ "moments": list }))
        }
        Command::KmCheck { model, depth, steps, max_index, tol } => {
            let spec = parse_model(&model)?;
            let chain = spec.chain().map_err(config)?;
            let m = measure_of(&spec, Transform::None, None)?;
            let rec = OrthoRecurrence::from_chain(&chain, max_index + 1).map_err(config)?;
            let ev = KmEvaluator::new(&rec, &m).map_err(config)?;
            let p = truncate_dense(&chain, depth).map_err(config)?;
            let mut power = nalgebra::DMatrix::<f64>::identity(p.nrows(), p.nrows());
            let mut worst = 0.0f64;
            for n in 0..=steps {
                for i in 0..=max_index {
                    for j in 0..=max_index {
                        let km = ev.transition(i, j, n).map_err(config)?;
                        worst = worst.max((km - power[(i, j)]).abs());
                    }
                }
                power = &power * &p;
            }
            let pass = worst <= tol;
            print_json(&json!({ "max_abs_error": worst, "tol": tol, "steps": steps, "max_index": max_index, "depth": depth, "pass": pass }))?;
            if pass {
                Ok(())
            } else {
                Err(Failure { code: 1, message: format!("KM mismatch {worst:e} exceeds {tol:e}") })
            }
        }
        Command::Invariant { model, depth, exact } => {
            let chain = parse_model(&model)?.chain().map_err(config)?;
            let pi64 = invariant_measure::<f64>(&chain, depth, ()).map_err(config)?;
            let residual = invariance_residual(&chain, &pi64);
            let values: Vec<serde_json::Value> = if exact {
                invariant_measure::<Rational>(&chain, depth, ()).map_err(config)?.iter().map(|q| json!(q.to_string())).collect()
            } else {
                pi64.iter().map(|v| json!(v)).collect()
            };
            print_json(&json!({ "pi": values, "residual": residual }))
        }
        Command::Simulate { model, steps, replicas, seed, order, urn, y0, start, alpha, out, csv } => {
            let spec = parse_model(&model)?;
            let chain = spec.chain().map_err(config)?;
            let depth = start + steps as usize + 2;
            let (report, target) = if urn {
                let order = match order {
                    SimOrder::Plain => return Err(config("--urn needs --order ul or lu")),
                    SimOrder::Ul => Order::Ul,
                    SimOrder::Lu => Order::Lu,
                };
                let us = urn_spec(&spec, order)?;
                let report = simulate_urn(&us, start, steps, replicas, seed).map_err(config)?;
                (report, target_chain(&us, depth).map_err(config)?)
            } else {
                match order {
                    SimOrder::Plain => (simulate_chain(&chain, start, steps, replicas, seed).map_err(config)?, chain),
                    SimOrder::Ul | SimOrder::Lu => {
                        let y0 = y0.or(spec.y0()).unwrap_or(0.0);
                        let f = ul_factorize(&chain, y0, 1.0, depth + 1, &FactorOptions::default()).map_err(factor_failure)?;
                        let (o, t) = match order {
                            SimOrder::Ul => (Order::Ul, multiply_ul(&f.upper, &f.lower, depth)),
                            _ => (Order::Lu, darboux_ul(&f, depth)),
                        };
                        let t = t.map_err(config)?;
                        let report = simulate_composed(&f.upper, &f.lower, o, start, steps, replicas, seed).map_err(config)?;
                        (report, BirthDeathChain::from(t))
                    }
                }
            };
            let comparison = compare_empirical(&report, &target, alpha);
            if csv.is_some() {
                emit(&csv, |w| report.write_csv(w).map_err(|e| e.to_string()))?;
            }
            let body = json!({ "report": report, "comparison": comparison });
            emit(&out, |w| writeln!(w, "{}", serde_json::to_string_pretty(&body).map_err(|e| e.to_string())?).map_err(|e| e.to_string()))
        }
        Command::Verify { quick } => {
            let results = verify::run(quick);
            let mut failed = 0;
            for c in &results {
                println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
                failed += usize::from(!c.pass);
            }
            if failed == 0 {
                println!("all {} checks passed", results.len());
                Ok(())
            } else {
                Err(Failure { code: 1, message: format!("{failed} of {} checks failed", results.len()) })
            }
        }
    }
}

fn finite_or_string(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(v.to_string())
    }
}

fn factor_failure(e: FactorError) -> Failure {
    match e {
        FactorError::NotFactorizable { .. } => config(format!("NotFactorizable: {e}")),
        other => config(other),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
