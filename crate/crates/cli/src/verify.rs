//! Cross-oracle suite behind `bdchain verify`.

use bdchain::contfrac::{evaluate_H, evaluate_H_tilde, Admissibility};
use bdchain::factorization::{darboux_lu, darboux_ul, lu_factorize, ul_factorize, FactorError, FactorOptions};
use bdchain::models::{
    constant_k_closed_form, constant_lu_closed_form, jacobi_lu_closed_form, jacobi_ul_closed_form, ConstantChainParams,
    JacobiParams,
};
use bdchain::spectral::{
    christoffel, constant_chain_measure, geronimus, invariance_residual, invariant_measure, jacobi_weight, recurrence_from_measure,
    KmEvaluator, OrthoRecurrence, SpectralMeasure, DEFAULT_PRECISION,
};
use bdchain::tridiag::{multiply_ul, truncate_dense, BirthDeathChain, ChainTable};
use bdchain::urn::{
    analytic_row_exact, compare_empirical, simulate_chain, simulate_composed, simulate_urn, target_chain, urn_row_exact, Order,
    UrnFamily, UrnStepSpec,
};
use rug::Rational;

pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

type Outcome = Result<(bool, String), String>;

fn within(err: f64, tol: f64) -> (bool, String) {
    (err <= tol, format!("max error {err:.3e} (tol {tol:e})"))
}

fn max_diff(a: &[f64], b: &[f64], upto: usize) -> f64 {
    (0..=upto).map(|n| (a[n] - b[n]).abs()).fold(0.0, f64::max)
}

fn table_diff(a: &ChainTable<f64>, b: &ChainTable<f64>, upto: usize) -> f64 {
    max_diff(&a.a, &b.a, upto).max(max_diff(&a.b, &b.b, upto)).max(max_diff(&a.c, &b.c, upto))
}

fn s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn closed_forms(depth: usize) -> Outcome {
    let mut err: f64 = 0.0;
    for h0 in [0.0, 0.5, 1.0] {
        let p = JacobiParams::new(1.0, 0.0).with_h0(h0);
        let chain = BirthDeathChain::jacobi(1.0, 0.0);
        let (cf, _) = jacobi_ul_closed_form::<f64>(&p, depth, ()).map_err(s)?;
        let f = ul_factorize(&chain, p.y0::<f64>(()), 1.0, depth, &FactorOptions::default()).map_err(s)?;
        err = err.max(max_diff(&f.upper.y, &cf.upper.y, depth)).max(max_diff(&f.lower.s, &cf.lower.s, depth));
    }
    let lu = lu_factorize(&BirthDeathChain::jacobi(1.0, 0.0), depth, &FactorOptions::default()).map_err(s)?;
    let lcf = jacobi_lu_closed_form::<f64>(&JacobiParams::new(1.0, 0.0), depth, ()).map_err(s)?;
    err = err.max(max_diff(&lu.upper.x, &lcf.upper.x, depth)).max(max_diff(&lu.lower.r, &lcf.lower.r, depth));
    let p = ConstantChainParams::quarter(0.25).with_k(3);
    let chain = BirthDeathChain::constant(0.25, 0.25, 0.5, 0.25);
    let cf = constant_k_closed_form::<f64>(&p, depth, ()).map_err(s)?;
    let f = ul_factorize(&chain, 0.25, 1.0, depth, &FactorOptions::default()).map_err(s)?;
    err = err.max(max_diff(&f.upper.y, &cf.upper.y, depth)).max(max_diff(&f.lower.s, &cf.lower.s, depth));
    let lu = lu_factorize(&chain, depth, &FactorOptions::default()).map_err(s)?;
    let lcf = constant_lu_closed_form::<f64>(&p, depth, ()).map_err(s)?;
    err = err.max(max_diff(&lu.upper.x, &lcf.upper.x, depth)).max(max_diff(&lu.lower.r, &lcf.lower.r, depth));
    Ok(within(err, 1e-10))
}

fn ranges() -> Outcome {
    let jac = BirthDeathChain::jacobi(1.0, 0.0);
    let h = match evaluate_H(&jac, 1e-12, 10_000).admissibility() {
        Admissibility::Bound(h) => h,
        other => return Ok((false, format!("Jacobi H: {other:?}"))),
    };
    let ht = match evaluate_H_tilde(&jac, 1e-12, 10_000).admissibility() {
        Admissibility::Bound(h) => h,
        other => return Ok((false, format!("Jacobi H~: {other:?}"))),
    };
    let q = match evaluate_H(&BirthDeathChain::constant(0.3, 0.25, 0.5, 0.25), 1e-12, 10_000).admissibility() {
        Admissibility::Bound(h) => h,
        other => return Ok((false, format!("constant H: {other:?}"))),
    };
    let symmetric = matches!(
        evaluate_H(&BirthDeathChain::constant(0.5, 0.4, 0.0, 0.6), 1e-12, 10_000).admissibility(),
        Admissibility::NotFactorizable { .. }
    );
    let err = (h - 0.5).abs().max((ht - 2.0 / 3.0).abs()).max((q - 0.4).abs());
    let (ok, detail) = within(err, 1e-8);
    Ok((ok && symmetric, format!("{detail}; symmetric chain not factorizable: {symmetric}")))
}

fn product_identity(depth: usize) -> Outcome {
    let chain = BirthDeathChain::jacobi(2.0, 1.0);
    let t = chain.realize::<f64>(depth, ()).map_err(s)?;
    let h = 0.5;
    let mut err: f64 = 0.0;
    for y0 in [0.0, h / 2.0, h] {
        let f = ul_factorize(&chain, y0, 1.0, depth, &FactorOptions::default()).map_err(s)?;
        err = err.max(table_diff(&multiply_ul(&f.upper, &f.lower, depth).map_err(s)?, &t, depth));
    }
    let beyond = ul_factorize(&chain, h + 1e-3, 1.0, 5000, &FactorOptions::forced());
    let violation = matches!(beyond, Err(FactorError::AdmissibilityViolation { .. }));
    let (ok, detail) = within(err, 1e-10);
    Ok((ok && violation, format!("{detail}; y0 = H + 1e-3 violates admissibility: {violation}")))
}

fn rec_diff(rec: &OrthoRecurrence, t: &ChainTable<f64>, upto: usize) -> f64 {
    max_diff(&rec.a, &t.a, upto).max(max_diff(&rec.b, &t.b, upto)).max(max_diff(&rec.c[1..], &t.c[1..], upto - 1))
}

fn darboux_measures() -> Outcome {
    let depth = 15;
    let cases: [(BirthDeathChain, SpectralMeasure, f64); 2] = [
        (BirthDeathChain::jacobi(1.0, 0.0), jacobi_weight(1.0, 0.0).map_err(s)?, 0.25),
        (BirthDeathChain::constant(0.3, 0.25, 0.5, 0.25), constant_chain_measure(0.3, 0.25, 0.5, 0.25).map_err(s)?, 0.2),
    ];
    let mut err: f64 = 0.0;
    for (chain, m, y0) in &cases {
        let f = ul_factorize(chain, *y0, 1.0, depth + 1, &FactorOptions::default()).map_err(s)?;
        let d = darboux_ul(&f, depth).map_err(s)?;
        let rec = recurrence_from_measure(&geronimus(m, *y0).map_err(s)?, depth, DEFAULT_PRECISION).map_err(s)?;
        err = err.max(rec_diff(&rec, &d, depth));
        let lu = lu_factorize(chain, depth + 1, &FactorOptions::default()).map_err(s)?;
        let d = darboux_lu(&lu, depth).map_err(s)?;
        let rec = recurrence_from_measure(&christoffel(m).map_err(s)?, depth, DEFAULT_PRECISION).map_err(s)?;
        err = err.max(rec_diff(&rec, &d, depth));
    }
    Ok(within(err, 1e-8))
}

fn karlin_mcgregor(steps: u32) -> Outcome {
    let cases = [
        (BirthDeathChain::jacobi(1.0, 0.0), jacobi_weight(1.0, 0.0).map_err(s)?),
        (BirthDeathChain::constant(0.3, 0.25, 0.5, 0.25), constant_chain_measure(0.3, 0.25, 0.5, 0.25).map_err(s)?),
    ];
    let mut err: f64 = 0.0;
    for (chain, m) in &cases {
        let rec = OrthoRecurrence::from_chain(chain, 6).map_err(s)?;
        let ev = KmEvaluator::new(&rec, m).map_err(s)?;
        let p = truncate_dense(chain, 60).map_err(s)?;
        let mut power = nalgebra::DMatrix::<f64>::identity(p.nrows(), p.nrows());
        for n in 0..=steps {
            for i in 0..=5 {
                for j in 0..=5 {
                    err = err.max((ev.transition(i, j, n).map_err(s)? - power[(i, j)]).abs());
                }
            }
            power = &power * &p;
        }
    }
    Ok(within(err, 1e-8))
}

fn invariant() -> Outcome {
    let chain = BirthDeathChain::constant(0.3, 0.25, 0.5, 0.25);
    let pi = invariant_measure::<Rational>(&chain, 50, ()).map_err(s)?;
    let want = Rational::from((6, 5));
    let exact = pi[0] == 1 && pi[1..].iter().all(|v| *v == want);
    let pi64 = invariant_measure::<f64>(&chain, 200, ()).map_err(s)?;
    let (ok, detail) = within(invariance_residual(&chain, &pi64), 1e-12);
    Ok((ok && exact, format!("{detail}; pi = (1, 4 a0, ...) exactly: {exact}")))
}

fn monte_carlo(steps: u64, replicas: u64) -> Outcome {
    let alpha = 0.001;
    let chain = BirthDeathChain::constant(0.3, 0.25, 0.5, 0.25);
    let plain = compare_empirical(&simulate_chain(&chain, 0, steps, replicas, 11).map_err(s)?, &chain, alpha);
    let depth = steps as usize + 2;
    let f = ul_factorize(&chain, 0.2, 1.0, depth + 1, &FactorOptions::default()).map_err(s)?;
    let ul_target = BirthDeathChain::from(multiply_ul(&f.upper, &f.lower, depth).map_err(s)?);
    let composed =
        compare_empirical(&simulate_composed(&f.upper, &f.lower, Order::Ul, 0, steps, replicas, 12).map_err(s)?, &ul_target, alpha);
    let spec = UrnStepSpec::new(UrnFamily::Jacobi { alpha: 1, beta: 0 }, Order::Lu).map_err(s)?;
    let target = target_chain(&spec, depth).map_err(s)?;
    let urn = compare_empirical(&simulate_urn(&spec, 0, steps, replicas, 13).map_err(s)?, &target, alpha);
    let perturbed = BirthDeathChain::constant(0.35, 0.25, 0.5, 0.25);
    let rep = simulate_chain(&chain, 0, steps, replicas, 14).map_err(s)?;
    let caught = !compare_empirical(&rep, &perturbed, alpha).pass;
    Ok((
        plain.pass && composed.pass && urn.pass && caught,
        format!(
            "pooled p: plain {:.3}, composed {:.3}, urn {:.3}; perturbed a0 rejected: {caught}",
            plain.pooled_p_value, composed.pooled_p_value, urn.pooled_p_value
        ),
    ))
}

fn urn_enumeration() -> Outcome {
    let mut rows = 0;
    for family in [UrnFamily::Jacobi { alpha: 1, beta: 0 }, UrnFamily::Jacobi { alpha: 2, beta: 1 }, UrnFamily::Constant { k: 3, a0_num: 1, a0_den: 4 }] {
        for order in [Order::Ul, Order::Lu] {
            let spec = UrnStepSpec::new(family, order).map_err(s)?;
            for n in 0..40 {
                if urn_row_exact(&spec, n).map_err(s)? != analytic_row_exact(&spec, n).map_err(s)? {
                    return Ok((false, format!("{family:?} {order:?} row {n} differs")));
                }
                rows += 1;
            }
        }
    }
    Ok((true, format!("{rows} rows equal exactly")))
}

pub fn run(quick: bool) -> Vec<Check> {
    let (depth, product_depth, km_steps, steps, replicas) = if quick { (50, 100, 5, 200, 200) } else { (200, 500, 10, 1000, 1000) };
    let checks: Vec<(&'static str, Box<dyn Fn() -> Outcome>)> = vec![
        ("closed forms vs recurrences", Box::new(move || closed_forms(depth))),
        ("admissible ranges", Box::new(ranges)),
        ("factor products", Box::new(move || product_identity(product_depth))),
        ("Darboux vs Geronimus/Christoffel", Box::new(darboux_measures)),
        ("Karlin-McGregor vs matrix powers", Box::new(move || karlin_mcgregor(km_steps))),
        ("invariant measure", Box::new(invariant)),
        ("Monte Carlo vs analytic rows", Box::new(move || monte_carlo(steps, replicas))),
        ("urn enumeration", Box::new(urn_enumeration)),
    ];
    checks
        .into_iter()
        .map(|(name, f)| match f() {
            Ok((pass, detail)) => Check { name, pass, detail },
            Err(e) => Check { name, pass: false, detail: format!("error: {e}") },
        })
        .collect()
}
