//! Acceptance criteria 1-8. Runs without the libtest harness so the PASS/FAIL
//! lines always print; exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use bdchain::contfrac::{evaluate_H, evaluate_H_tilde, periodic_F, Admissibility};
use bdchain::factorization::{
    darboux_lu, darboux_ul, lu_factorize, lu_factorize_exact, ul_factorize, ul_factorize_exact, FactorError, FactorOptions,
    LUFactors, ULFactors,
};
use bdchain::models::{
    constant_k_closed_form, constant_lu_closed_form, constant_ul_closed_form, jacobi_lu_closed_form, jacobi_ul_closed_form,
    ConstantChainParams, JacobiParams,
};
use bdchain::scalar::Scalar;
use bdchain::spectral::{
    christoffel, classify_recurrence, constant_chain_measure, constant_chain_stieltjes, constant_gamma, geronimus,
    invariance_residual, invariant_measure, jacobi_weight, moments, recurrence_from_measure, residue, KmEvaluator,
    OrthoRecurrence, RecurrenceClass, SpectralMeasure, DEFAULT_PRECISION,
};
use bdchain::tridiag::{multiply_ul, truncate_dense, BirthDeathChain, ChainTable};
use bdchain::urn::{
    analytic_row_exact, compare_empirical, simulate_chain, simulate_composed, simulate_urn, target_chain, urn_row_exact, Order,
    UrnFamily, UrnStepSpec, Verdict,
};
use num_complex::Complex64;
use rug::Rational;

type Outcome = Result<(bool, String), String>;

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn diff(a: &[f64], b: &[f64], upto: usize) -> f64 {
    (0..=upto).map(|n| (a[n] - b[n]).abs()).fold(0.0, f64::max)
}

fn ul_diff(a: &ULFactors<f64>, b: &ULFactors<f64>, upto: usize) -> f64 {
    diff(&a.upper.x, &b.upper.x, upto)
        .max(diff(&a.upper.y, &b.upper.y, upto))
        .max(diff(&a.lower.s, &b.lower.s, upto))
        .max(diff(&a.lower.r, &b.lower.r, upto))
}

fn lu_diff(a: &LUFactors<f64>, b: &LUFactors<f64>, upto: usize) -> f64 {
    diff(&a.upper.x, &b.upper.x, upto)
        .max(diff(&a.upper.y, &b.upper.y, upto))
        .max(diff(&a.lower.s, &b.lower.s, upto))
        .max(diff(&a.lower.r, &b.lower.r, upto))
}

fn ul_equal(a: &ULFactors<Rational>, b: &ULFactors<Rational>, upto: usize) -> bool {
    let r = 0..=upto;
    a.upper.x[r.clone()] == b.upper.x[r.clone()]
        && a.upper.y[r.clone()] == b.upper.y[r.clone()]
        && a.lower.s[r.clone()] == b.lower.s[r.clone()]
        && a.lower.r[r.clone()] == b.lower.r[r]
}

fn lu_equal(a: &LUFactors<Rational>, b: &LUFactors<Rational>, upto: usize) -> bool {
    let r = 0..=upto;
    a.upper.x[r.clone()] == b.upper.x[r.clone()]
        && a.upper.y[r.clone()] == b.upper.y[r.clone()]
        && a.lower.s[r.clone()] == b.lower.s[r.clone()]
        && a.lower.r[r.clone()] == b.lower.r[r]
}

fn table_diff(a: &ChainTable<f64>, b: &ChainTable<f64>, upto: usize) -> f64 {
    diff(&a.a, &b.a, upto).max(diff(&a.b, &b.b, upto)).max(diff(&a.c[1..], &b.c[1..], upto - 1))
}

const JACOBI_GRID: [(f64, f64); 4] = [(0.0, 0.0), (1.0, 0.0), (2.0, 1.0), (0.5, 0.5)];
const H0_GRID: [f64; 4] = [0.0, 0.25, 0.5, 1.0];
const A0_GRID: [f64; 3] = [0.1, 0.25, 0.3];
const K_GRID: [u32; 4] = [2, 3, 5, 10];

fn criterion_1() -> Outcome {
    let depth = 200;
    let opts = FactorOptions::default();
    let mut err: f64 = 0.0;
    let mut exact_ok = true;
    let (mut cases, mut skipped) = (0, 0);

    for a0 in A0_GRID {
        let chain = BirthDeathChain::constant(a0, 0.25, 0.5, 0.25);
        for k in K_GRID {
            let p = ConstantChainParams::quarter(a0).with_k(k);
            if p.validate().is_err() {
                // y0 = 1 - k a0 < 0: the closed form needs a0 <= 1/k.
                skipped += 1;
                continue;
            }
            let cf = constant_k_closed_form::<f64>(&p, depth, ()).map_err(e)?;
            let f = ul_factorize(&chain, p.y0_for_k::<f64>(()).unwrap(), 1.0, depth, &opts).map_err(e)?;
            err = err.max(ul_diff(&f, &cf, depth));
            let y0q = p.y0_for_k::<Rational>(()).unwrap();
            let cfq = constant_k_closed_form::<Rational>(&p, depth, ()).map_err(e)?;
            let fq = ul_factorize_exact(&chain, &y0q, &Rational::from(1), depth).map_err(e)?;
            exact_ok &= ul_equal(&fq, &cfq, depth);
            cases += 1;
        }
        let p = ConstantChainParams::quarter(a0);
        let h = 1.0 - 2.0 * a0;
        for y0 in [0.0, h / 2.0, h] {
            let cf = constant_ul_closed_form::<f64>(&p, &y0, depth).map_err(e)?;
            let f = ul_factorize(&chain, y0, 1.0, depth, &opts).map_err(e)?;
            err = err.max(ul_diff(&f, &cf, depth));
            cases += 1;
        }
        let cf = constant_lu_closed_form::<f64>(&p, depth, ()).map_err(e)?;
        err = err.max(lu_diff(&lu_factorize(&chain, depth, &opts).map_err(e)?, &cf, depth));
        let cfq = constant_lu_closed_form::<Rational>(&p, depth, ()).map_err(e)?;
        exact_ok &= lu_equal(&lu_factorize_exact(&chain, depth).map_err(e)?, &cfq, depth);
        cases += 1;
    }

    for (alpha, beta) in JACOBI_GRID {
        let chain = BirthDeathChain::jacobi(alpha, beta);
        for h0 in H0_GRID {
            let p = JacobiParams::new(alpha, beta).with_h0(h0);
            let (cf, _) = jacobi_ul_closed_form::<f64>(&p, depth, ()).map_err(e)?;
            let f = ul_factorize(&chain, p.y0::<f64>(()), 1.0, depth, &opts).map_err(e)?;
            err = err.max(ul_diff(&f, &cf, depth));
            let (cfq, _) = jacobi_ul_closed_form::<Rational>(&p, depth, ()).map_err(e)?;
            let fq = ul_factorize_exact(&chain, &p.y0::<Rational>(()), &Rational::from(1), depth).map_err(e)?;
            exact_ok &= ul_equal(&fq, &cfq, depth);
            cases += 1;
        }
        let p = JacobiParams::new(alpha, beta);
        let cf = jacobi_lu_closed_form::<f64>(&p, depth, ()).map_err(e)?;
        err = err.max(lu_diff(&lu_factorize(&chain, depth, &opts).map_err(e)?, &cf, depth));
        let cfq = jacobi_lu_closed_form::<Rational>(&p, depth, ()).map_err(e)?;
        exact_ok &= lu_equal(&lu_factorize_exact(&chain, depth).map_err(e)?, &cfq, depth);
        cases += 1;
    }
    Ok((
        err <= 1e-10 && exact_ok,
        format!("{cases} cases, n <= {depth}: max error {err:.2e} (tol 1e-10); exact mode zero error: {exact_ok}; {skipped} (a0, k) pairs skipped for k a0 > 1"),
    ))
}

fn bound_of(admissibility: Admissibility) -> Result<f64, String> {
    match admissibility {
        Admissibility::Bound(h) => Ok(h),
        other => Err(format!("{other:?}")),
    }
}

fn criterion_2() -> Outcome {
    let (tol, terms) = (1e-12, 10_000);
    let mut err_const: f64 = 0.0;
    for (a0, a, b, c) in [(0.1, 0.25, 0.5, 0.25), (0.25, 0.25, 0.5, 0.25), (0.3, 0.25, 0.5, 0.25), (0.2, 0.3, 0.5, 0.2), (0.4, 0.3, 0.5, 0.2)] {
        let f = periodic_F(a, c).map_err(e)?;
        let h = bound_of(evaluate_H(&BirthDeathChain::constant(a0, a, b, c), tol, terms).admissibility())?;
        err_const = err_const.max((h - (1.0 - a0 / f)).abs());
    }
    let mut err_jac: f64 = 0.0;
    for (alpha, beta) in [(1.0, 0.0), (2.0, 1.0), (0.5, 0.5), (3.0, 2.0)] {
        let chain = BirthDeathChain::jacobi(alpha, beta);
        let h = bound_of(evaluate_H(&chain, tol, terms).admissibility())?;
        let ht = bound_of(evaluate_H_tilde(&chain, tol, terms).admissibility())?;
        err_jac = err_jac.max((h - alpha / (alpha + beta + 1.0)).abs()).max((ht - (alpha + beta + 1.0) / (alpha + beta + 2.0)).abs());
    }
    let symmetric = evaluate_H(&BirthDeathChain::constant(0.5, 0.5, 0.0, 0.5), tol, terms).admissibility();
    let not_factorizable = matches!(symmetric, Admissibility::NotFactorizable { .. });
    // alpha = 0 converges logarithmically; the evaluator reports it unresolved.
    let zero = evaluate_H(&BirthDeathChain::jacobi(0.0, 0.0), tol, terms);
    Ok((
        err_const <= 1e-10 && err_jac <= 1e-8 && not_factorizable,
        format!(
            "constant max error {err_const:.2e} (tol 1e-10); Jacobi max error {err_jac:.2e} (tol 1e-8); symmetric chain: {symmetric:?}; Jacobi (0,0) H: {:?} after {} convergents (last {:.4})",
            zero.admissibility(),
            zero.iterations,
            zero.value
        ),
    ))
}

fn criterion_3() -> Outcome {
    let depth = 500;
    let mut err: f64 = 0.0;
    let chains = [
        BirthDeathChain::jacobi(1.0, 0.0),
        BirthDeathChain::jacobi(2.0, 1.0),
        BirthDeathChain::jacobi(0.5, 0.5),
        BirthDeathChain::constant(0.3, 0.25, 0.5, 0.25),
        BirthDeathChain::constant(0.2, 0.3, 0.5, 0.2),
    ];
    let mut violations = Vec::new();
    for chain in &chains {
        let h = bound_of(evaluate_H(chain, 1e-12, 10_000).admissibility())?;
        let t = chain.realize::<f64>(depth, ()).map_err(e)?;
        for y0 in [0.0, h / 2.0, h] {
            let f = ul_factorize(chain, y0, 1.0, depth, &FactorOptions::default()).map_err(e)?;
            err = err.max(table_diff(&multiply_ul(&f.upper, &f.lower, depth).map_err(e)?, &t, depth));
        }
        match ul_factorize(chain, h + 1e-3, 1.0, 100_000, &FactorOptions::forced()) {
            Err(FactorError::AdmissibilityViolation { index, .. }) => violations.push(index),
            other => return Ok((false, format!("{}: y0 = H + 1e-3 gave {:?}", chain.description, other.map(|_| ())))),
        }
    }
    Ok((
        err <= 1e-10,
        format!("max error {err:.2e} over n <= {depth} (tol 1e-10); y0 = H + 1e-3 violates admissibility at indices {violations:?}"),
    ))
}

fn rec_diff(rec: &OrthoRecurrence, t: &ChainTable<f64>, upto: usize) -> f64 {
    diff(&rec.a, &t.a, upto).max(diff(&rec.b, &t.b, upto)).max(diff(&rec.c[1..], &t.c[1..], upto - 1))
}

fn criterion_4() -> Outcome {
    let depth = 15;
    let mut cases: Vec<(BirthDeathChain, SpectralMeasure, f64)> =
        vec![(BirthDeathChain::jacobi(1.0, 0.0), jacobi_weight(1.0, 0.0).map_err(e)?, 0.5)];
    for a0 in A0_GRID {
        cases.push((BirthDeathChain::constant(a0, 0.25, 0.5, 0.25), constant_chain_measure(a0, 0.25, 0.5, 0.25).map_err(e)?, 1.0 - 2.0 * a0));
    }
    let (mut err_g, mut err_c, mut err_m): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for (chain, m, h) in &cases {
        for y0 in [0.25 * h, 0.5 * h, *h] {
            let f = ul_factorize(chain, y0, 1.0, depth + 1, &FactorOptions::default()).map_err(e)?;
            let g = geronimus(m, y0).map_err(e)?;
            let rec = recurrence_from_measure(&g, depth, DEFAULT_PRECISION).map_err(e)?;
            err_g = err_g.max(rec_diff(&rec, &darboux_ul(&f, depth).map_err(e)?, depth));
            let (mm, gm) = (moments(m, 9).map_err(e)?, moments(&g, 10).map_err(e)?);
            for n in 1..=10 {
                err_m = err_m.max((gm.get(n).unwrap() - y0 * mm.get(n - 1).unwrap()).abs());
            }
        }
        let lu = lu_factorize(chain, depth + 1, &FactorOptions::default()).map_err(e)?;
        let rec = recurrence_from_measure(&christoffel(m).map_err(e)?, depth, DEFAULT_PRECISION).map_err(e)?;
        err_c = err_c.max(rec_diff(&rec, &darboux_lu(&lu, depth).map_err(e)?, depth));
    }
    Ok((
        err_g <= 1e-8 && err_c <= 1e-8 && err_m <= 1e-8,
        format!("Geronimus vs UL Darboux {err_g:.2e}, Christoffel vs LU Darboux {err_c:.2e}, moment shift {err_m:.2e} (tol 1e-8)"),
    ))
}

fn criterion_5() -> Outcome {
    let mut err_inv: f64 = 0.0;
    let mut measures = Vec::new();
    for a0 in A0_GRID {
        let m = constant_chain_measure(a0, 0.25, 0.5, 0.25).map_err(e)?;
        err_inv = err_inv.max((moments(&m, 0).map_err(e)?.get(-1).unwrap() - 1.0 / (1.0 - 2.0 * a0)).abs());
        measures.push(m);
    }
    for (alpha, beta) in [(1.0, 0.0), (2.0, 1.0), (0.5, 0.5)] {
        let m = jacobi_weight(alpha, beta).map_err(e)?;
        err_inv = err_inv.max((moments(&m, 0).map_err(e)?.get(-1).unwrap() - (alpha + beta + 1.0) / alpha).abs());
        measures.push(m);
    }

    // Displayed masses: omega({1}) = (c-a)/(a0+c-a) for c > a and
    // omega({gamma}) = ((a0-a)^2 - ac)/((a0-a)^2 - ac + a0 c) for (a0-a)^2 > ac.
    let mut err_mass: f64 = 0.0;
    let mut err_res: f64 = 0.0;
    let mut atoms = 0;
    for (a0, a, b, c) in [(0.6, 0.25, 0.5, 0.25), (0.7, 0.25, 0.5, 0.25), (0.9, 0.25, 0.5, 0.25), (0.3, 0.2, 0.5, 0.3), (0.9, 0.2, 0.5, 0.3), (0.05, 0.4, 0.5, 0.1)] {
        let m = constant_chain_measure(a0, a, b, c).map_err(e)?;
        let mut want = Vec::new();
        if c > a {
            want.push((1.0, (c - a) / (a0 + c - a)));
        }
        let d = (a0 - a) * (a0 - a) - a * c;
        if d > 0.0 {
            want.push((constant_gamma(a0, a, c).ok_or("missing gamma")?, d / (d + a0 * c)));
        }
        if want.len() != m.atoms.len() {
            return Ok((false, format!("({a0}, {a}, {c}): {} atoms, display gives {}", m.atoms.len(), want.len())));
        }
        for (loc, mass) in want {
            let atom = m.atoms.iter().find(|at| (at.location - loc).abs() < 1e-12).ok_or(format!("no atom at {loc}"))?;
            err_mass = err_mass.max((atom.mass - mass).abs());
            // Contour inside the region where B is analytic apart from the pole.
            let (lo, hi) = m.support().ok_or("no density")?;
            let cut = if loc > hi { loc - hi } else { lo - loc };
            let others = m.atoms.iter().map(|at| (at.location - loc).abs()).filter(|&d| d > 0.0).fold(f64::INFINITY, f64::min);
            let radius = 0.5 * cut.min(others);
            let r = residue(|z| constant_chain_stieltjes(a0, a, c, z), Complex64::new(loc, 0.0), radius, 1024);
            err_res = err_res.max((-r.re - mass).abs());
            atoms += 1;
        }
        measures.push(m);
    }
    let base: Vec<SpectralMeasure> = measures.clone();
    for m in &base {
        // x m is a positive measure only on [0, 1].
        if m.support().is_some_and(|(lo, _)| lo >= 0.0) && m.atoms.iter().all(|at| at.location > 0.0) {
            measures.push(christoffel(m).map_err(e)?);
        }
    }
    measures.push(geronimus(&jacobi_weight(1.0, 0.0).map_err(e)?, 0.2).map_err(e)?);
    measures.push(geronimus(&constant_chain_measure(0.3, 0.25, 0.5, 0.25).map_err(e)?, 0.2).map_err(e)?);
    let err_total = measures.iter().map(|m| (m.total_mass() - 1.0).abs()).fold(0.0, f64::max);
    Ok((
        err_inv <= 1e-10 && err_mass <= 1e-6 && err_res <= 1e-6 && err_total <= 1e-8,
        format!(
            "mu_-1 error {err_inv:.2e} (tol 1e-10); {atoms} atoms: mass error {err_mass:.2e}, residue error {err_res:.2e} (tol 1e-6); total mass error {err_total:.2e} over {} measures (tol 1e-8)",
            measures.len()
        ),
    ))
}

fn criterion_6() -> Outcome {
    let mut cases = Vec::new();
    for (alpha, beta) in [(1.0, 0.0), (2.0, 1.0), (0.5, 0.5)] {
        cases.push((BirthDeathChain::jacobi(alpha, beta), jacobi_weight(alpha, beta).map_err(e)?));
    }
    for a0 in [0.1, 0.3, 0.7] {
        cases.push((BirthDeathChain::constant(a0, 0.25, 0.5, 0.25), constant_chain_measure(a0, 0.25, 0.5, 0.25).map_err(e)?));
    }
    let mut err: f64 = 0.0;
    for (chain, m) in &cases {
        let ev = KmEvaluator::new(&OrthoRecurrence::from_chain(chain, 6).map_err(e)?, m).map_err(e)?;
        let p = truncate_dense(chain, 60).map_err(e)?;
        let mut power = nalgebra::DMatrix::<f64>::identity(p.nrows(), p.nrows());
        for n in 0..=10 {
            for i in 0..=5 {
                for j in 0..=5 {
                    err = err.max((ev.transition(i, j, n).map_err(e)? - power[(i, j)]).abs());
                }
            }
            power = &power * &p;
        }
    }
    Ok((err <= 1e-8, format!("{} chains, n <= 10, i, j <= 5: max error {err:.2e} (tol 1e-8)", cases.len())))
}

fn criterion_7() -> Outcome {
    let mut wrong = Vec::new();
    for (alpha, beta, want) in [(1.0, 0.0, RecurrenceClass::Recurrent), (2.0, 0.0, RecurrenceClass::Recurrent), (0.0, 0.0, RecurrenceClass::Recurrent), (1.0, 1.0, RecurrenceClass::Transient), (2.0, 1.0, RecurrenceClass::Transient)] {
        let got = classify_recurrence(&jacobi_weight(alpha, beta).map_err(e)?, None);
        if got != want {
            wrong.push(format!("Jacobi ({alpha},{beta}) -> {got:?}"));
        }
    }
    for a0 in A0_GRID {
        let m = constant_chain_measure(a0, 0.25, 0.5, 0.25).map_err(e)?;
        let h = 1.0 - 2.0 * a0;
        for (name, mm) in [("chain", m.clone()), ("UL Darboux", geronimus(&m, h / 2.0).map_err(e)?), ("LU Darboux", christoffel(&m).map_err(e)?)] {
            let got = classify_recurrence(&mm, None);
            if got != RecurrenceClass::Recurrent {
                wrong.push(format!("a0 = {a0} {name} -> {got:?}"));
            }
        }
    }
    let mut exact = true;
    let mut residual: f64 = 0.0;
    for a0 in A0_GRID {
        let chain = BirthDeathChain::constant(a0, 0.25, 0.5, 0.25);
        let pi = invariant_measure::<Rational>(&chain, 100, ()).map_err(e)?;
        let four_a0 = Rational::from(4) * <Rational as Scalar>::from_f64(a0, ());
        exact &= pi[0] == 1 && pi[1..].iter().all(|v| *v == four_a0);
        residual = residual.max(invariance_residual(&chain, &invariant_measure::<f64>(&chain, 500, ()).map_err(e)?));
    }
    for (alpha, beta) in [(1.0, 0.0), (2.0, 1.0)] {
        let chain = BirthDeathChain::jacobi(alpha, beta);
        residual = residual.max(invariance_residual(&chain, &invariant_measure::<f64>(&chain, 200, ()).map_err(e)?));
    }
    Ok((
        wrong.is_empty() && exact && residual <= 1e-12,
        format!("misclassified: {wrong:?}; pi = (1, 4a0, 4a0, ...) exactly: {exact}; max |pi P - pi| {residual:.2e} (tol 1e-12)"),
    ))
}

fn criterion_8() -> Outcome {
    let (steps, replicas, alpha) = (1000, 1000, 0.001);
    let mut lines = Vec::new();
    let mut pass = true;
    let mut record = |name: &str, c: &bdchain::urn::Comparison| {
        pass &= c.pass;
        lines.push(format!("{name} p = {:.3} ({})", c.pooled_p_value, if c.pass { "ok" } else { "rejected" }));
    };
    let quarter = BirthDeathChain::constant(0.3, 0.25, 0.5, 0.25);
    let jac = BirthDeathChain::jacobi(1.0, 0.0);
    for (name, chain, seed) in [("plain quarter", &quarter, 101), ("plain Jacobi", &jac, 102)] {
        record(name, &compare_empirical(&simulate_chain(chain, 0, steps, replicas, seed).map_err(e)?, chain, alpha));
    }
    let depth = steps as usize + 2;
    for (name, chain, y0, seed) in [("UL-composed quarter", &quarter, 0.2, 103), ("UL-composed Jacobi", &jac, 0.25, 104)] {
        let f = ul_factorize(chain, y0, 1.0, depth + 1, &FactorOptions::default()).map_err(e)?;
        let rep = simulate_composed(&f.upper, &f.lower, Order::Ul, 0, steps, replicas, seed).map_err(e)?;
        record(name, &compare_empirical(&rep, chain, alpha));
    }
    let specs = [
        ("urn constant k=3", UrnStepSpec::new(UrnFamily::Constant { k: 3, a0_num: 1, a0_den: 4 }, Order::Ul).map_err(e)?, 105),
        ("urn Jacobi (1,0)", UrnStepSpec::new(UrnFamily::Jacobi { alpha: 1, beta: 0 }, Order::Ul).map_err(e)?, 106),
        ("urn Jacobi (1,0) reversed", UrnStepSpec::new(UrnFamily::Jacobi { alpha: 1, beta: 0 }, Order::Lu).map_err(e)?, 107),
    ];
    for (name, spec, seed) in &specs {
        let rep = simulate_urn(spec, 0, steps, replicas, *seed).map_err(e)?;
        record(name, &compare_empirical(&rep, &target_chain(spec, depth).map_err(e)?, alpha));
    }
    let rep = simulate_chain(&quarter, 0, steps, replicas, 108).map_err(e)?;
    let perturbed = compare_empirical(&rep, &BirthDeathChain::constant(0.35, 0.25, 0.5, 0.25), alpha);
    let caught = perturbed.verdict(0) == Some(Verdict::Fail);

    let mut rows = 0;
    let mut exact = true;
    for family in [
        UrnFamily::Constant { k: 3, a0_num: 1, a0_den: 4 },
        UrnFamily::Constant { k: 5, a0_num: 1, a0_den: 10 },
        UrnFamily::Constant { k: 10, a0_num: 1, a0_den: 10 },
        UrnFamily::Jacobi { alpha: 0, beta: 0 },
        UrnFamily::Jacobi { alpha: 1, beta: 0 },
        UrnFamily::Jacobi { alpha: 2, beta: 1 },
    ] {
        for order in [Order::Ul, Order::Lu] {
            let spec = UrnStepSpec::new(family, order).map_err(e)?;
            for n in 0..=100 {
                exact &= urn_row_exact(&spec, n).map_err(e)? == analytic_row_exact(&spec, n).map_err(e)?;
                rows += 1;
            }
        }
    }
    Ok((
        pass && caught && exact,
        format!(
            "{} steps each: {}; a0 + 0.05 rejected at state 0: {caught}; exact urn rows equal analytic rows: {exact} ({rows} rows)",
            steps * replicas,
            lines.join(", ")
        ),
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("closed forms vs recurrences", criterion_1),
        ("continued fractions", criterion_2),
        ("factor-product identity", criterion_3),
        ("Darboux vs measure transforms", criterion_4),
        ("measure identities", criterion_5),
        ("Karlin-McGregor", criterion_6),
        ("recurrence and invariant measure", criterion_7),
        ("Monte Carlo", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = run().unwrap_or_else(|err| (false, format!("error: {err}")));
        println!("{} {} {name}: {detail} [{:.1}s]", if pass { "PASS" } else { "FAIL" }, i + 1, start.elapsed().as_secs_f64());
        failed += usize::from(!pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
