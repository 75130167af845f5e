//! Continued fractions that bound the stochastic factorizations.
//!
//! `H = 1 - a_0/(1 - c_1/(1 - a_1/(1 - c_2/...)))` bounds the free parameter of the
//! UL factorization, `H~` (partials `c_1, a_1, c_2, ...`) bounds `a_0` for the LU one.
//! Convergents `h_n = A_n/B_n` follow `A_n = A_{n-1} - xi_n A_{n-2}` (same for `B`)
//! with `A_{-1} = A_0 = B_0 = 1`, `B_{-1} = 0`.
//!
//! Under dominance (`0 < A_n < B_n`) the convergents decrease monotonically, but
//! often only like a power of `n`. When that happens the limit is estimated with a
//! Levin u-transform on same-parity convergents computed in extended precision,
//! and the estimate is accepted only if several transform orders and both parities
//! agree within the tolerance.

use rug::ops::Pow;
use rug::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{extended_precision_bits, Scalar};
use crate::tridiag::BirthDeathChain;

/// `(window length, transform order)` pairs tried by the accelerator.
const LEVIN_VARIANTS: [(usize, usize); 4] = [(40, 12), (60, 12), (100, 12), (60, 8)];
/// Convergents computed in extended precision for acceleration.
const ACCEL_TERMS: usize = 2 * 100 + 4;
const RESCALE_EVERY: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContFracError {
    #[error("denominator B_{index} vanished")]
    ZeroDenominator { index: usize },
    #[error("{0}")]
    Domain(String),
    #[error("count must be at least 1")]
    EmptyRequest,
}

/// One convergent. The stored `a`, `b` are scaled by `2^-log2_scale`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Convergent {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub h: f64,
    pub log2_scale: i32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Successive convergents differed by less than the tolerance.
    Plain,
    /// Levin u-transform estimate; see the module docs.
    Accelerated,
    /// Neither criterion met; `value` is the last convergent.
    Unresolved,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuedFractionEvaluation {
    pub value: f64,
    /// Convergents `n = 0..=iterations`.
    pub convergents: Vec<Convergent>,
    pub dominance_ok: bool,
    pub first_dominance_failure: Option<usize>,
    pub converged: bool,
    pub iterations: usize,
    pub method: Method,
    /// Spread of the accelerated estimates, or the last convergent increment.
    pub error_estimate: f64,
    /// Every partial numerator lies in `[0, 1/4]`. Informational only.
    pub worpitzky: bool,
}

/// What a bound evaluation says about factorizability.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Admissibility {
    Bound(f64),
    NotFactorizable { index: usize },
    Inconclusive,
}

impl ContinuedFractionEvaluation {
    pub fn admissibility(&self) -> Admissibility {
        if let Some(index) = self.first_dominance_failure {
            Admissibility::NotFactorizable { index }
        } else if self.converged {
            Admissibility::Bound(self.value)
        } else {
            Admissibility::Inconclusive
        }
    }

    /// Convergent values `h_0, h_1, ...`.
    pub fn h(&self) -> Vec<f64> {
        self.convergents.iter().map(|c| c.h).collect()
    }
}

/// Plain convergents of `1 - xi_1/(1 - xi_2/(1 - ...))` for the first `count` partials.
///
/// `partials[0]` is `xi_1`. The result is the last convergent; `converged` reports
/// whether successive convergents came within `tol` before the input ran out.
pub fn convergents(partials: &[f64], count: usize, tol: f64) -> Result<ContinuedFractionEvaluation, ContFracError> {
    if count == 0 {
        return Err(ContFracError::EmptyRequest);
    }
    let n = count.min(partials.len());
    run_plain(partials[..n].iter().copied(), tol, false)
}

fn run_plain<I: Iterator<Item = f64>>(
    partials: I,
    tol: f64,
    stop_on_violation: bool,
) -> Result<ContinuedFractionEvaluation, ContFracError> {
    let (mut a2, mut a1, mut b2, mut b1) = (1.0f64, 1.0f64, 0.0f64, 1.0f64);
    let mut log2_scale = 0i32;
    let mut out = ContinuedFractionEvaluation {
        value: 1.0,
        convergents: vec![Convergent { n: 0, a: 1.0, b: 1.0, h: 1.0, log2_scale: 0 }],
        dominance_ok: true,
        first_dominance_failure: None,
        converged: false,
        iterations: 0,
        method: Method::Unresolved,
        error_estimate: f64::INFINITY,
        worpitzky: true,
    };
    for (i, xi) in partials.enumerate() {
        let n = i + 1;
        if !(0.0..=0.25).contains(&xi) {
            out.worpitzky = false;
        }
        let a = a1 - xi * a2;
        let b = b1 - xi * b2;
        if b == 0.0 {
            if out.dominance_ok {
                out.dominance_ok = false;
                out.first_dominance_failure = Some(n);
            }
            if stop_on_violation {
                break;
            }
            return Err(ContFracError::ZeroDenominator { index: n });
        }
        let h = a / b;
        if out.dominance_ok && !(0.0 < a && a < b) {
            out.dominance_ok = false;
            out.first_dominance_failure = Some(n);
        }
        let prev = out.value;
        out.value = h;
        out.iterations = n;
        out.convergents.push(Convergent { n, a, b, h, log2_scale });
        if !out.dominance_ok && stop_on_violation {
            break;
        }
        let step = (h - prev).abs();
        out.error_estimate = step;
        if step < tol {
            out.converged = true;
            out.method = Method::Plain;
            break;
        }
        (a2, a1, b2, b1) = (a1, a, b1, b);
        if n % RESCALE_EVERY == 0 {
            // Power-of-two rescaling is exact, so h_n is unchanged bit for bit.
            let e = b1.abs().log2().floor() as i32;
            if e != 0 {
                let f = 2f64.powi(-e);
                a2 *= f;
                a1 *= f;
                b2 *= f;
                b1 *= f;
                log2_scale += e;
            }
        }
    }
    Ok(out)
}

/// Which continued fraction to build from a chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fraction {
    /// Partials `a_0, c_1, a_1, c_2, ...`.
    H,
    /// Partials `c_1, a_1, c_2, a_2, ...`.
    HTilde,
}

/// Partial numerator `xi_k` (`k >= 1`).
fn partial<S: Scalar>(chain: &BirthDeathChain, which: Fraction, k: usize, ctx: S::Ctx) -> Option<S> {
    let j = k - 1;
    match which {
        Fraction::H if j % 2 == 0 => chain.coeffs_in::<S>(j / 2, ctx).map(|t| t.0),
        Fraction::H => chain.coeffs_in::<S>(j / 2 + 1, ctx).map(|t| t.2),
        Fraction::HTilde if j % 2 == 0 => chain.coeffs_in::<S>(j / 2 + 1, ctx).map(|t| t.2),
        Fraction::HTilde => chain.coeffs_in::<S>(j / 2 + 1, ctx).map(|t| t.0),
    }
}

/// The first `count` partials of `which` in the scalar type (fewer if the chain ends).
pub fn partials_in<S: Scalar>(chain: &BirthDeathChain, which: Fraction, count: usize, ctx: S::Ctx) -> Vec<S> {
    (1..=count).map_while(|k| partial::<S>(chain, which, k, ctx)).collect()
}

/// UL bound `H`: the free parameter must lie in `[0, H]`.
#[allow(non_snake_case)]
pub fn evaluate_H(chain: &BirthDeathChain, tol: f64, max_terms: usize) -> ContinuedFractionEvaluation {
    evaluate(chain, Fraction::H, tol, max_terms)
}

/// LU bound `H~`: the LU factorization is stochastic iff `a_0 <= H~`.
#[allow(non_snake_case)]
pub fn evaluate_H_tilde(chain: &BirthDeathChain, tol: f64, max_terms: usize) -> ContinuedFractionEvaluation {
    evaluate(chain, Fraction::HTilde, tol, max_terms)
}

fn evaluate(chain: &BirthDeathChain, which: Fraction, tol: f64, max_terms: usize) -> ContinuedFractionEvaluation {
    let partials = (1..=max_terms).map_while(|k| partial::<f64>(chain, which, k, ()));
    let mut eval = run_plain(partials, tol, true).expect("dominance stop precedes zero denominators");
    if !eval.dominance_ok || eval.iterations < 2 {
        return eval;
    }
    let prec = extended_precision_bits();
    let hp = partials_in::<Float>(chain, which, ACCEL_TERMS.min(max_terms), prec);
    let seq = float_convergents(&hp, prec);
    let floor = eval.h().into_iter().fold(f64::INFINITY, f64::min);
    if let Some((estimate, spread)) = accelerate(&seq, tol) {
        let v = estimate.to_f64();
        if v >= -tol && v <= floor + tol {
            eval.value = v.max(0.0);
            eval.converged = true;
            eval.method = Method::Accelerated;
            eval.error_estimate = spread;
        }
    }
    eval
}

/// Convergents `h_0..=h_n` in extended precision.
pub fn float_convergents(partials: &[Float], prec: u32) -> Vec<Float> {
    let mut a2 = Float::with_val(prec, 1);
    let mut a1 = Float::with_val(prec, 1);
    let mut b2 = Float::with_val(prec, 0);
    let mut b1 = Float::with_val(prec, 1);
    let mut out = vec![Float::with_val(prec, 1)];
    for xi in partials {
        let a = Float::with_val(prec, &a1 - &(Float::with_val(prec, xi * &a2)));
        let b = Float::with_val(prec, &b1 - &(Float::with_val(prec, xi * &b2)));
        if b.is_zero() {
            break;
        }
        out.push(Float::with_val(prec, &a / &b));
        a2 = a1;
        a1 = a;
        b2 = b1;
        b1 = b;
    }
    out
}

/// Levin u-transform (`beta = 1`) of the last `k + 1` entries of `s`.
fn levin_u(s: &[Float], k: usize) -> Option<Float> {
    let prec = s[0].prec();
    let n0 = s.len().checked_sub(k + 1)?;
    if n0 == 0 {
        return None;
    }
    let mut num = Float::with_val(prec, 0);
    let mut den = Float::with_val(prec, 0);
    let mut binom = Float::with_val(prec, 1);
    let base = Float::with_val(prec, n0 + k + 1);
    for j in 0..=k {
        let n = n0 + j;
        let diff = Float::with_val(prec, &s[n] - &s[n - 1]);
        if diff.is_zero() {
            return None;
        }
        let ratio = Float::with_val(prec, (n0 + j + 1) as u32) / &base;
        let pow = ratio.pow(k as i32 - 1);
        let mut w = Float::with_val(prec, &binom * &pow) / (diff * ((n + 1) as u32));
        if j % 2 == 1 {
            w = -w;
        }
        num += Float::with_val(prec, &w * &s[n]);
        den += &w;
        binom = binom * ((k - j) as u32) / ((j + 1) as u32);
    }
    if den.is_zero() {
        return None;
    }
    Some(num / den)
}

/// Levin estimates over both parities and all variants. Returns the estimate from the
/// longest window and the spread of all estimates, or `None` if they disagree by more than `tol`.
pub fn accelerate(seq: &[Float], tol: f64) -> Option<(Float, f64)> {
    let mut estimates = Vec::new();
    for parity in 0..2 {
        let sub: Vec<Float> = seq.iter().skip(parity).step_by(2).cloned().collect();
        for &(n, k) in &LEVIN_VARIANTS {
            if sub.len() < n {
                return None;
            }
            estimates.push(levin_u(&sub[1..n], k)?);
        }
    }
    let vals: Vec<f64> = estimates.iter().map(Float::to_f64).collect();
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = hi - lo;
    if !spread.is_finite() || spread > tol {
        return None;
    }
    // longest window of the first parity
    Some((estimates[2].clone(), spread))
}

/// `F = (1 + a - c + sqrt((1 + a - c)^2 - 4a)) / 2`, the limit of the period-two
/// fraction `1 - c/(1 - a/(1 - c/...))`.
pub fn periodic_F(a: f64, c: f64) -> Result<f64, ContFracError> {
    #![allow(non_snake_case)]
    if !(a > 0.0 && a < 1.0 && c > 0.0 && c < 1.0) {
        return Err(ContFracError::Domain(format!("a = {a}, c = {c} must lie in (0, 1)")));
    }
    let edge = (1.0 - a.sqrt()).powi(2);
    if c > edge + 1e-12 {
        return Err(ContFracError::Domain(format!(
            "c = {c} exceeds (1 - sqrt(a))^2 = {edge}; the fraction diverges"
        )));
    }
    let p = 1.0 + a - c;
    let disc = (p * p - 4.0 * a).max(0.0);
    Ok((p + disc.sqrt()) / 2.0)
}

/// Values of a chain sequence: `0 <= m_0 < 1` and `0 < m_n < 1` for `n >= 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSequence {
    pub m0: f64,
    pub source: ChainSequenceSource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ChainSequenceSource {
    /// `m_1, m_2, ...`; the sequence ends with the table.
    Table(Vec<f64>),
    /// The chain sequence of `H` for the Jacobi chain.
    JacobiUl { alpha: f64, beta: f64 },
    /// The chain sequence of `H~` for the Jacobi chain.
    JacobiLu { alpha: f64, beta: f64 },
}

impl ChainSequence {
    pub fn from_values(m0: f64, m: Vec<f64>) -> Self {
        ChainSequence { m0, source: ChainSequenceSource::Table(m) }
    }

    /// `m_{2n} = n/(2n+a+b+1)`, `m_{2n+1} = (n+b+1)/(2n+a+b+2)`.
    pub fn jacobi_ul(alpha: f64, beta: f64) -> Self {
        ChainSequence { m0: 0.0, source: ChainSequenceSource::JacobiUl { alpha, beta } }
    }

    /// `m_{2n} = (n+b+1)/(2n+a+b+2)`, `m_{2n+1} = (n+1)/(2n+a+b+3)`.
    pub fn jacobi_lu(alpha: f64, beta: f64) -> Self {
        ChainSequence { m0: (beta + 1.0) / (alpha + beta + 2.0), source: ChainSequenceSource::JacobiLu { alpha, beta } }
    }

    /// Recovers `m_n` from partial numerators `xi_n = (1 - m_{n-1}) m_n`.
    pub fn from_partials(m0: f64, partials: &[f64]) -> Self {
        let mut prev = m0;
        let m = partials
            .iter()
            .map(|xi| {
                prev = xi / (1.0 - prev);
                prev
            })
            .collect();
        ChainSequence::from_values(m0, m)
    }

    /// `m_n` for `n >= 1`.
    pub fn m_in<S: Scalar>(&self, n: usize, ctx: S::Ctx) -> Option<S> {
        let f = |v: f64| S::from_f64(v, ctx);
        let k = S::from_i64((n / 2) as i64, ctx);
        let nn = S::from_i64(n as i64, ctx);
        match self.source {
            ChainSequenceSource::Table(ref m) => m.get(n - 1).map(|&v| f(v)),
            ChainSequenceSource::JacobiUl { alpha, beta } => {
                let den = nn + f(alpha) + f(beta) + S::one(ctx);
                Some(if n % 2 == 0 { k / den } else { (k + f(beta) + S::one(ctx)) / den })
            }
            ChainSequenceSource::JacobiLu { alpha, beta } => {
                let den = nn + f(alpha) + f(beta) + S::from_i64(2, ctx);
                Some(if n % 2 == 0 { (k + f(beta) + S::one(ctx)) / den } else { (k + S::one(ctx)) / den })
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSequenceValue {
    pub c: f64,
    pub l: f64,
    pub terms: usize,
    pub method: Method,
}

/// `L = sum_{n>=1} prod_{k<=n} m_k/(1-m_k)` and `C = m_0 + (1 - m_0)/(1 + L)`.
///
/// If the terms do not fall below `tol` within `max_terms` and no accelerated
/// estimate is accepted, the series is reported divergent: `L = inf`, `C = m_0`.
pub fn chain_sequence_value(cs: &ChainSequence, tol: f64, max_terms: usize) -> Result<ChainSequenceValue, ContFracError> {
    if !(0.0..1.0).contains(&cs.m0) {
        return Err(ContFracError::Domain(format!("m_0 = {} is not in [0, 1)", cs.m0)));
    }
    let mut term = 1.0f64;
    let mut sum = 0.0f64;
    let mut terms = 0;
    let mut small = false;
    for n in 1..=max_terms {
        let Some(m) = cs.m_in::<f64>(n, ()) else { break };
        if !(0.0..1.0).contains(&m) {
            return Err(ContFracError::Domain(format!("m_{n} = {m} is not in [0, 1)")));
        }
        term *= m / (1.0 - m);
        sum += term;
        terms = n;
        if term < tol {
            small = true;
            break;
        }
    }
    let c_of = |l: f64| cs.m0 + (1.0 - cs.m0) / (1.0 + l);
    if small {
        return Ok(ChainSequenceValue { c: c_of(sum), l: sum, terms, method: Method::Plain });
    }
    let prec = extended_precision_bits();
    let mut sums = vec![Float::with_val(prec, 0)];
    let mut t = Float::with_val(prec, 1);
    for n in 1..=ACCEL_TERMS.min(max_terms) {
        let Some(m) = cs.m_in::<Float>(n, prec) else { break };
        let one_minus = Float::with_val(prec, 1) - &m;
        t = t * m / one_minus;
        let next = Float::with_val(prec, sums.last().unwrap() + &t);
        sums.push(next);
    }
    if let Some((est, _)) = accelerate(&sums, tol) {
        let l = est.to_f64();
        // Divergent positive series can have finite antilimits; they sit below the partial sums.
        if l + tol >= sum {
            return Ok(ChainSequenceValue { c: c_of(l), l, terms, method: Method::Accelerated });
        }
    }
    Ok(ChainSequenceValue { c: cs.m0, l: f64::INFINITY, terms, method: Method::Unresolved })
}
