//! Stochastic UL and LU factorizations and the two Darboux transformations.
//!
//! UL: `P = P_U P_L` with `s_{n+1} = a_n/(1-y_n)` and `y_{n+1} = c_{n+1}/(1-s_{n+1})`
//! seeded by the free parameter `y_0`. LU: `P = P~_L P~_U` with `x~_0 = a_0`,
//! `r~_{n+1} = c_{n+1}/(1-x~_n)` and `x~_{n+1} = a_{n+1}/(1-r~_{n+1})`.
//!
//! The recurrences are generic over [`Scalar`]; [`Precision`] picks `f64`, an
//! extended precision `Float` or exact rationals for the public entry points.

use rug::{Float, Rational};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contfrac::{evaluate_H, evaluate_H_tilde, Admissibility, ContinuedFractionEvaluation};
use crate::scalar::Scalar;
use crate::tridiag::{
    multiply_lu, multiply_ul, BirthDeathChain, ChainTable, LowerBidiagonal, TridiagError, UpperBidiagonal,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FactorError {
    #[error("no stochastic factorization: dominance fails at convergent {index}")]
    NotFactorizable { index: usize },
    #[error("admissibility bound did not converge (last estimate {estimate})")]
    Inconclusive { estimate: f64 },
    #[error("{parameter} = {value} is outside the admissible range [0, {bound}]")]
    OutsideRange { parameter: &'static str, value: f64, bound: f64 },
    #[error("{coefficient}_{index} = {value} left [0, 1]")]
    AdmissibilityViolation { index: usize, coefficient: &'static str, value: f64 },
    #[error("denominator 1 - {coefficient}_{index} vanished")]
    NumericBreakdown { index: usize, coefficient: &'static str },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Missing(#[from] TridiagError),
}

/// Arithmetic used by the public factorization entry points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Precision {
    Double,
    /// `Float` with the given significand bits.
    Extended(u32),
    /// Exact rationals; `f64` inputs are read as their shortest decimal.
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FactorOptions {
    /// Slack allowed when a coefficient leaves `[0, 1]`, and the guard band around the bound.
    pub tol: f64,
    /// Skip the admissibility pre-check and run the recurrence regardless.
    pub force: bool,
    pub precision: Precision,
    /// Convergent budget for the bound evaluation.
    pub bound_terms: usize,
}

impl Default for FactorOptions {
    fn default() -> Self {
        FactorOptions { tol: 1e-9, force: false, precision: Precision::Double, bound_terms: 10_000 }
    }
}

impl FactorOptions {
    pub fn forced() -> Self {
        FactorOptions { force: true, ..Default::default() }
    }
}

/// `P = P_U P_L` with the free parameters that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ULFactors<S = f64> {
    pub upper: UpperBidiagonal<S>,
    pub lower: LowerBidiagonal<S>,
    pub y0: S,
    pub s0: S,
    /// `y0` sits within the guard band of the numerically known bound.
    pub boundary: bool,
}

/// `P = P~_L P~_U`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LUFactors<S = f64> {
    pub lower: LowerBidiagonal<S>,
    pub upper: UpperBidiagonal<S>,
    pub boundary: bool,
}

impl<S: Scalar> ULFactors<S> {
    pub fn to_f64(&self) -> ULFactors<f64> {
        ULFactors {
            upper: self.upper.to_f64(),
            lower: self.lower.to_f64(),
            y0: self.y0.to_f64(),
            s0: self.s0.to_f64(),
            boundary: self.boundary,
        }
    }
}

impl<S: Scalar> LUFactors<S> {
    pub fn to_f64(&self) -> LUFactors<f64> {
        LUFactors { lower: self.lower.to_f64(), upper: self.upper.to_f64(), boundary: self.boundary }
    }
}

/// `[0, H]`, the values of `y_0` giving stochastic UL factors.
///
/// `Inconclusive` carries the last convergent, which bounds `H` from above.
pub fn y0_admissible_range(chain: &BirthDeathChain, tol: f64) -> Result<(f64, f64), FactorError> {
    bound(&evaluate_H(chain, tol, 10_000)).map(|h| (0.0, h))
}

/// `H~`, the largest `a_0` for which the LU factors are stochastic.
pub fn lu_bound(chain: &BirthDeathChain, tol: f64) -> Result<f64, FactorError> {
    bound(&evaluate_H_tilde(chain, tol, 10_000))
}

fn bound(e: &ContinuedFractionEvaluation) -> Result<f64, FactorError> {
    match e.admissibility() {
        Admissibility::Bound(h) => Ok(h),
        Admissibility::NotFactorizable { index } => Err(FactorError::NotFactorizable { index }),
        Admissibility::Inconclusive => Err(FactorError::Inconclusive { estimate: e.value }),
    }
}

/// Compares a parameter with its bound; returns whether it sits on the bound.
///
/// An unresolved bound still caps the parameter by the last convergent. Below that
/// cap the recurrence runs and its per-index checks decide admissibility.
fn precheck(parameter: &'static str, value: f64, bound: Result<f64, FactorError>, tol: f64) -> Result<bool, FactorError> {
    let (h, resolved) = match bound {
        Ok(h) => (h, true),
        Err(FactorError::Inconclusive { estimate }) => (estimate, false),
        Err(e) => return Err(e),
    };
    if value > h + 10.0 * tol {
        return Err(FactorError::OutsideRange { parameter, value, bound: h });
    }
    Ok(resolved && (value - h).abs() < 10.0 * tol)
}

/// UL factors with coefficients up to index `depth + 1`, enough for products and
/// Darboux transforms to `depth`.
///
/// Unless `opts.force` is set, `y0` is first checked against `H`. `s0` is only free
/// when `y0 = 0`; otherwise it must be 1.
pub fn ul_factorize(
    chain: &BirthDeathChain,
    y0: f64,
    s0: f64,
    depth: usize,
    opts: &FactorOptions,
) -> Result<ULFactors<f64>, FactorError> {
    let mut boundary = false;
    if !opts.force {
        if y0 < 0.0 {
            return Err(FactorError::OutsideRange { parameter: "y0", value: y0, bound: f64::NAN });
        }
        boundary = precheck("y0", y0, y0_admissible_range(chain, opts.tol.min(1e-12)).map(|r| r.1), opts.tol)?;
    }
    let mut f = match opts.precision {
        Precision::Double => {
            let t = chain.realize::<f64>(depth + 1, ())?;
            ul_factorize_table(&t, y0, s0, opts.tol)?
        }
        Precision::Extended(bits) => {
            let t = chain.realize::<Float>(depth + 1, bits)?;
            let f = ul_factorize_table(&t, Float::with_val(bits, y0), Float::with_val(bits, s0), Float::with_val(bits, opts.tol))?;
            f.to_f64()
        }
        Precision::Exact => ul_factorize_exact(chain, &<Rational as Scalar>::from_f64(y0, ()), &<Rational as Scalar>::from_f64(s0, ()), depth)?.to_f64(),
    };
    f.boundary = boundary;
    Ok(f)
}

/// Exact-rational UL factors to `depth + 1`. No admissibility pre-check.
pub fn ul_factorize_exact(
    chain: &BirthDeathChain,
    y0: &Rational,
    s0: &Rational,
    depth: usize,
) -> Result<ULFactors<Rational>, FactorError> {
    ul_factorize_in(chain, y0.clone(), s0.clone(), depth, Rational::new())
}

/// UL factors to `depth + 1` in the scalar type of `y0`. No admissibility pre-check.
///
/// Near `y0 = H` the recurrence amplifies any error in `y0` itself, so a boundary
/// value should be computed in the working precision rather than rounded from `f64`.
pub fn ul_factorize_in<S: Scalar>(
    chain: &BirthDeathChain,
    y0: S,
    s0: S,
    depth: usize,
    tol: S,
) -> Result<ULFactors<S>, FactorError> {
    let t = chain.realize::<S>(depth + 1, y0.ctx())?;
    ul_factorize_table(&t, y0, s0, tol)
}

/// The UL recurrence over a realized table; factors have the table's length.
pub fn ul_factorize_table<S: Scalar>(t: &ChainTable<S>, y0: S, s0: S, tol: S) -> Result<ULFactors<S>, FactorError> {
    let ctx = y0.ctx();
    let one = S::one(ctx);
    let zero = S::zero(ctx);
    if t.is_empty() {
        return Err(TridiagError::InvalidDepth.into());
    }
    if y0 > zero && s0 != one {
        return Err(FactorError::InvalidParameter("s0 must be 1 unless y0 = 0".into()));
    }
    if s0 < zero || s0 > one {
        return Err(FactorError::InvalidParameter("s0 must lie in [0, 1]".into()));
    }
    let len = t.len();
    let mut y = Vec::with_capacity(len);
    let mut s = Vec::with_capacity(len);
    check_unit(&y0, 0, "y", &tol)?;
    y.push(y0.clone());
    s.push(s0.clone());
    for n in 0..len - 1 {
        let den = one.clone() - y[n].clone();
        if den == zero {
            return Err(FactorError::NumericBreakdown { index: n, coefficient: "y" });
        }
        let sn = t.a[n].clone() / den;
        check_unit(&sn, n + 1, "s", &tol)?;
        let den = one.clone() - sn.clone();
        if den == zero {
            return Err(FactorError::NumericBreakdown { index: n + 1, coefficient: "s" });
        }
        let yn = t.c[n + 1].clone() / den;
        check_unit(&yn, n + 1, "y", &tol)?;
        s.push(sn);
        y.push(yn);
    }
    let x = y.iter().map(|v| one.clone() - v.clone()).collect();
    let mut r: Vec<S> = s.iter().map(|v| one.clone() - v.clone()).collect();
    r[0] = zero;
    Ok(ULFactors { upper: UpperBidiagonal { x, y }, lower: LowerBidiagonal { s, r }, y0, s0, boundary: false })
}

/// LU factors with coefficients up to index `depth + 1`.
///
/// Unless `opts.force` is set, `a_0` is first checked against `H~`.
pub fn lu_factorize(chain: &BirthDeathChain, depth: usize, opts: &FactorOptions) -> Result<LUFactors<f64>, FactorError> {
    let mut boundary = false;
    if !opts.force {
        boundary = precheck("a0", chain.a(0), lu_bound(chain, opts.tol.min(1e-12)), opts.tol)?;
    }
    let mut f = match opts.precision {
        Precision::Double => lu_factorize_table(&chain.realize::<f64>(depth + 1, ())?, opts.tol)?,
        Precision::Extended(bits) => {
            lu_factorize_table(&chain.realize::<Float>(depth + 1, bits)?, Float::with_val(bits, opts.tol))?.to_f64()
        }
        Precision::Exact => lu_factorize_exact(chain, depth)?.to_f64(),
    };
    f.boundary = boundary;
    Ok(f)
}

pub fn lu_factorize_exact(chain: &BirthDeathChain, depth: usize) -> Result<LUFactors<Rational>, FactorError> {
    lu_factorize_table(&chain.realize::<Rational>(depth + 1, ())?, Rational::new())
}

/// The LU recurrence over a realized table.
pub fn lu_factorize_table<S: Scalar>(t: &ChainTable<S>, tol: S) -> Result<LUFactors<S>, FactorError> {
    if t.is_empty() {
        return Err(TridiagError::InvalidDepth.into());
    }
    let ctx = t.a[0].ctx();
    let one = S::one(ctx);
    let zero = S::zero(ctx);
    let len = t.len();
    let mut x = Vec::with_capacity(len);
    let mut r = Vec::with_capacity(len);
    x.push(t.a[0].clone());
    r.push(zero.clone());
    for n in 0..len - 1 {
        let den = one.clone() - x[n].clone();
        if den == zero {
            return Err(FactorError::NumericBreakdown { index: n, coefficient: "x~" });
        }
        let rn = t.c[n + 1].clone() / den;
        check_unit(&rn, n + 1, "r~", &tol)?;
        let den = one.clone() - rn.clone();
        if den == zero {
            return Err(FactorError::NumericBreakdown { index: n + 1, coefficient: "r~" });
        }
        let xn = t.a[n + 1].clone() / den;
        check_unit(&xn, n + 1, "x~", &tol)?;
        r.push(rn);
        x.push(xn);
    }
    let y = x.iter().map(|v| one.clone() - v.clone()).collect();
    let mut s: Vec<S> = r.iter().map(|v| one.clone() - v.clone()).collect();
    s[0] = one;
    Ok(LUFactors { lower: LowerBidiagonal { s, r }, upper: UpperBidiagonal { x, y }, boundary: false })
}

fn check_unit<S: Scalar>(v: &S, index: usize, coefficient: &'static str, tol: &S) -> Result<(), FactorError> {
    let ctx = v.ctx();
    if *v < -tol.clone() || *v > S::one(ctx) + tol.clone() {
        return Err(FactorError::AdmissibilityViolation { index, coefficient, value: v.to_f64() });
    }
    Ok(())
}

/// `P~ = P_L P_U`: `a~_n = s_n x_n`, `b~_n = r_n x_{n-1} + s_n y_n`, `c~_n = r_n y_{n-1}`.
pub fn darboux_ul<S: Scalar>(f: &ULFactors<S>, depth: usize) -> Result<ChainTable<S>, TridiagError> {
    multiply_lu(&f.lower, &f.upper, depth)
}

/// `P^ = P~_U P~_L`: `a^_n = x~_n s~_{n+1}`, `b^_n = x~_n r~_{n+1} + y~_n s~_n`, `c^_n = y~_n r~_n`.
pub fn darboux_lu<S: Scalar>(f: &LUFactors<S>, depth: usize) -> Result<ChainTable<S>, TridiagError> {
    multiply_ul(&f.upper, &f.lower, depth)
}

#[derive(Serialize, Deserialize)]
struct FactorRow {
    n: usize,
    x: f64,
    y: f64,
    s: f64,
    r: f64,
}

/// `n,x,y,s,r` rows over the common length of both factors.
pub fn write_factors_csv<W: std::io::Write>(
    upper: &UpperBidiagonal<f64>,
    lower: &LowerBidiagonal<f64>,
    out: W,
) -> Result<(), TridiagError> {
    let mut w = csv::Writer::from_writer(out);
    for n in 0..upper.len().min(lower.len()) {
        w.serialize(FactorRow { n, x: upper.x[n], y: upper.y[n], s: lower.s[n], r: lower.r[n] })
            .map_err(|e| TridiagError::Format(e.to_string()))?;
    }
    w.flush().map_err(|e| TridiagError::Format(e.to_string()))
}

/// Reads `n,x,y,s,r` rows.
pub fn read_factors_csv<R: std::io::Read>(input: R) -> Result<(UpperBidiagonal<f64>, LowerBidiagonal<f64>), TridiagError> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut u = UpperBidiagonal { x: Vec::new(), y: Vec::new() };
    let mut l = LowerBidiagonal { s: Vec::new(), r: Vec::new() };
    for (i, row) in rdr.deserialize::<FactorRow>().enumerate() {
        let row = row.map_err(|e| TridiagError::Format(e.to_string()))?;
        if row.n != i {
            return Err(TridiagError::Format(format!("row {i} has index {}", row.n)));
        }
        u.x.push(row.x);
        u.y.push(row.y);
        l.s.push(row.s);
        l.r.push(row.r);
    }
    Ok((u, l))
}
