//! Birth-death chains and their bidiagonal factors as coefficient sequences.
//!
//! A chain on the nonnegative integers moves up with probability `a_n`, stays with
//! `b_n` and moves down with `c_n` (`c_0` does not exist). Chains are either backed
//! by a closed-form generator or by finite arrays; every operation takes an
//! explicit working depth.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TridiagError {
    #[error("coefficients needed up to index {needed} but only available up to {available}")]
    MissingCoefficients { needed: usize, available: usize },
    #[error("depth must be at least 1")]
    InvalidDepth,
    #[error("malformed chain data: {0}")]
    Format(String),
}

/// Closed-form coefficient families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "lowercase")]
pub enum Generator {
    /// `a_0, b_0 = 1 - a_0` at the origin and `a, b, c` everywhere else.
    Constant { a0: f64, a: f64, b: f64, c: f64 },
    /// The chain of the Jacobi polynomials on `[0, 1]` normalized by `Q_n(1) = 1`.
    Jacobi { alpha: f64, beta: f64 },
}

impl Generator {
    fn coeffs<S: Scalar>(&self, n: usize, ctx: S::Ctx) -> (S, S, S) {
        let f = |v: f64| S::from_f64(v, ctx);
        match *self {
            Generator::Constant { a0, a, b, c } => {
                if n == 0 {
                    let a0 = f(a0);
                    (a0.clone(), S::one(ctx) - a0, S::zero(ctx))
                } else {
                    (f(a), f(b), f(c))
                }
            }
            Generator::Jacobi { alpha, beta } => jacobi_coeffs(&f(alpha), &f(beta), n),
        }
    }
}

/// Jacobi chain coefficients at index `n`.
///
/// Row 0 is written in reduced form so that parameter pairs with `alpha + beta = -1`
/// or `alpha + beta = 0` do not hit a removable `0/0`.
pub fn jacobi_coeffs<S: Scalar>(alpha: &S, beta: &S, n: usize) -> (S, S, S) {
    let ctx = alpha.ctx();
    let one = S::one(ctx);
    let two = S::from_i64(2, ctx);
    let ab = alpha.clone() + beta.clone();
    if n == 0 {
        let den = ab.clone() + two;
        let a0 = (beta.clone() + one.clone()) / den.clone();
        let b0 = (alpha.clone() + one) / den;
        return (a0, b0, S::zero(ctx));
    }
    let nn = S::from_i64(n as i64, ctx);
    let d1 = two.clone() * nn.clone() + ab.clone() + one.clone();
    let d2 = two.clone() * nn.clone() + ab.clone() + two;
    let d0 = S::from_i64(2 * n as i64, ctx) + ab.clone();
    let nb1 = nn.clone() + beta.clone() + one.clone();
    let na = nn.clone() + alpha.clone();
    let a = nb1.clone() * (nn.clone() + one.clone() + ab.clone()) / (d1.clone() * d2.clone());
    let b = nb1 * (nn.clone() + one) / (d1.clone() * d2)
        + na.clone() * (nn.clone() + ab) / (d1.clone() * d0.clone());
    let c = nn * na / (d1 * d0);
    (a, b, c)
}

/// Where a chain's coefficients come from.
#[derive(Clone, Debug, PartialEq)]
pub enum ChainSource {
    Generator(Generator),
    /// Arrays indexed by `n`; `c[0]` is ignored.
    Table { a: Vec<f64>, b: Vec<f64>, c: Vec<f64> },
}

/// An irreducible tridiagonal stochastic matrix given by its coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChainRepr", into = "ChainRepr")]
pub struct BirthDeathChain {
    pub source: ChainSource,
    pub description: String,
}

impl BirthDeathChain {
    pub fn constant(a0: f64, a: f64, b: f64, c: f64) -> Self {
        BirthDeathChain {
            source: ChainSource::Generator(Generator::Constant { a0, a, b, c }),
            description: format!("constant chain a0={a0} a={a} b={b} c={c}"),
        }
    }

    pub fn jacobi(alpha: f64, beta: f64) -> Self {
        BirthDeathChain {
            source: ChainSource::Generator(Generator::Jacobi { alpha, beta }),
            description: format!("Jacobi chain alpha={alpha} beta={beta}"),
        }
    }

    /// Array-backed chain. `c[0]` is ignored.
    pub fn from_arrays(a: Vec<f64>, b: Vec<f64>, c: Vec<f64>) -> Result<Self, TridiagError> {
        if a.is_empty() || a.len() != b.len() || a.len() != c.len() {
            return Err(TridiagError::Format(format!(
                "coefficient arrays must be nonempty and of equal length (got {}, {}, {})",
                a.len(),
                b.len(),
                c.len()
            )));
        }
        Ok(BirthDeathChain {
            source: ChainSource::Table { a, b, c },
            description: "tabulated chain".to_string(),
        })
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }

    /// Largest index with coefficients, or `None` for generator-backed chains.
    pub fn max_index(&self) -> Option<usize> {
        match &self.source {
            ChainSource::Generator(_) => None,
            ChainSource::Table { a, .. } => Some(a.len() - 1),
        }
    }

    /// `(a_n, b_n, c_n)` in the requested scalar type, with `c_0 = 0`.
    pub fn coeffs_in<S: Scalar>(&self, n: usize, ctx: S::Ctx) -> Option<(S, S, S)> {
        match &self.source {
            ChainSource::Generator(g) => Some(g.coeffs(n, ctx)),
            ChainSource::Table { a, b, c } => {
                if n >= a.len() {
                    return None;
                }
                let cn = if n == 0 { S::zero(ctx) } else { S::from_f64(c[n], ctx) };
                Some((S::from_f64(a[n], ctx), S::from_f64(b[n], ctx), cn))
            }
        }
    }

    pub fn coeffs(&self, n: usize) -> Option<(f64, f64, f64)> {
        self.coeffs_in::<f64>(n, ())
    }

    pub fn a(&self, n: usize) -> f64 {
        self.coeffs(n).map_or(f64::NAN, |t| t.0)
    }

    pub fn b(&self, n: usize) -> f64 {
        self.coeffs(n).map_or(f64::NAN, |t| t.1)
    }

    pub fn c(&self, n: usize) -> f64 {
        self.coeffs(n).map_or(f64::NAN, |t| t.2)
    }

    /// Coefficients `0..=depth` in the requested scalar type.
    pub fn realize<S: Scalar>(&self, depth: usize, ctx: S::Ctx) -> Result<ChainTable<S>, TridiagError> {
        let mut t = ChainTable::with_capacity(depth + 1);
        for n in 0..=depth {
            let (a, b, c) = self.coeffs_in::<S>(n, ctx).ok_or(TridiagError::MissingCoefficients {
                needed: depth,
                available: self.max_index().unwrap_or(0),
            })?;
            t.a.push(a);
            t.b.push(b);
            t.c.push(c);
        }
        Ok(t)
    }
}

/// Finite coefficient table in any scalar type. `c[0]` is unused and kept at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainTable<S = f64> {
    pub a: Vec<S>,
    pub b: Vec<S>,
    pub c: Vec<S>,
}

impl<S: Scalar> ChainTable<S> {
    fn with_capacity(n: usize) -> Self {
        ChainTable { a: Vec::with_capacity(n), b: Vec::with_capacity(n), c: Vec::with_capacity(n) }
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn to_f64(&self) -> ChainTable<f64> {
        let conv = |v: &[S]| v.iter().map(Scalar::to_f64).collect();
        ChainTable { a: conv(&self.a), b: conv(&self.b), c: conv(&self.c) }
    }
}

impl ChainTable<f64> {
    pub fn into_chain(self, description: impl Into<String>) -> BirthDeathChain {
        BirthDeathChain {
            source: ChainSource::Table { a: self.a, b: self.b, c: self.c },
            description: description.into(),
        }
    }
}

impl From<ChainTable<f64>> for BirthDeathChain {
    fn from(t: ChainTable<f64>) -> Self {
        t.into_chain("tabulated chain")
    }
}

/// Pure-birth factor: `y_n` on the diagonal, `x_n` above it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpperBidiagonal<S = f64> {
    pub x: Vec<S>,
    pub y: Vec<S>,
}

/// Pure-death factor: `s_n` on the diagonal, `r_n` below it. `r[0]` is unused and zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBidiagonal<S = f64> {
    pub s: Vec<S>,
    pub r: Vec<S>,
}

impl<S: Scalar> UpperBidiagonal<S> {
    pub fn len(&self) -> usize {
        self.x.len()
    }
    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
    pub fn to_f64(&self) -> UpperBidiagonal<f64> {
        UpperBidiagonal { x: self.x.iter().map(Scalar::to_f64).collect(), y: self.y.iter().map(Scalar::to_f64).collect() }
    }
}

impl<S: Scalar> LowerBidiagonal<S> {
    pub fn len(&self) -> usize {
        self.s.len()
    }
    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }
    pub fn to_f64(&self) -> LowerBidiagonal<f64> {
        LowerBidiagonal { s: self.s.iter().map(Scalar::to_f64).collect(), r: self.r.iter().map(Scalar::to_f64).collect() }
    }
}

fn need(len: usize, needed: usize) -> Result<(), TridiagError> {
    if len <= needed {
        Err(TridiagError::MissingCoefficients { needed, available: len.saturating_sub(1) })
    } else {
        Ok(())
    }
}

/// Product `P_U P_L`: `a_n = x_n s_{n+1}`, `b_n = x_n r_{n+1} + y_n s_n`, `c_n = y_n r_n`.
///
/// Needs the upper factor to `depth` and the lower factor to `depth + 1`.
pub fn multiply_ul<S: Scalar>(
    upper: &UpperBidiagonal<S>,
    lower: &LowerBidiagonal<S>,
    depth: usize,
) -> Result<ChainTable<S>, TridiagError> {
    need(upper.len(), depth)?;
    need(lower.len(), depth + 1)?;
    let mut t = ChainTable::with_capacity(depth + 1);
    for n in 0..=depth {
        let (x, y) = (&upper.x[n], &upper.y[n]);
        t.a.push(x.clone() * lower.s[n + 1].clone());
        t.b.push(x.clone() * lower.r[n + 1].clone() + y.clone() * lower.s[n].clone());
        t.c.push(if n == 0 { S::zero(x.ctx()) } else { y.clone() * lower.r[n].clone() });
    }
    Ok(t)
}

/// Product `P_L P_U`: `a_n = s_n x_n`, `b_n = r_n x_{n-1} + s_n y_n`, `c_n = r_n y_{n-1}`.
pub fn multiply_lu<S: Scalar>(
    lower: &LowerBidiagonal<S>,
    upper: &UpperBidiagonal<S>,
    depth: usize,
) -> Result<ChainTable<S>, TridiagError> {
    need(upper.len(), depth)?;
    need(lower.len(), depth)?;
    let mut t = ChainTable::with_capacity(depth + 1);
    for n in 0..=depth {
        let (s, x, y) = (&lower.s[n], &upper.x[n], &upper.y[n]);
        t.a.push(s.clone() * x.clone());
        if n == 0 {
            t.b.push(s.clone() * y.clone());
            t.c.push(S::zero(s.ctx()));
        } else {
            let r = &lower.r[n];
            t.b.push(r.clone() * upper.x[n - 1].clone() + s.clone() * y.clone());
            t.c.push(r.clone() * upper.y[n - 1].clone());
        }
    }
    Ok(t)
}

/// Outcome of a stochasticity and irreducibility scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub first_violation_index: Option<usize>,
    pub max_row_sum_error: f64,
    pub messages: Vec<String>,
}

impl ValidationReport {
    fn new() -> Self {
        ValidationReport { ok: true, first_violation_index: None, max_row_sum_error: 0.0, messages: Vec::new() }
    }

    fn violation(&mut self, n: usize, msg: String) {
        if self.ok {
            self.ok = false;
            self.first_violation_index = Some(n);
        }
        if self.messages.len() < 32 {
            self.messages.push(msg);
        }
    }
}

/// Checks row sums and strict interior bounds for indices `0..=depth`.
///
/// A table that ends before `depth` is reported as a violation at the first missing index.
pub fn validate_chain(chain: &BirthDeathChain, depth: usize, tol: f64) -> ValidationReport {
    let mut rows = Vec::with_capacity(depth + 1);
    for n in 0..=depth {
        match chain.coeffs(n) {
            Some(row) => rows.push(row),
            None => break,
        }
    }
    let mut report = validate_rows(&rows, tol);
    if rows.len() <= depth {
        report.violation(rows.len(), format!("no coefficients at index {}", rows.len()));
    }
    report
}

/// Same checks on a realized table.
pub fn validate_table(table: &ChainTable<f64>, tol: f64) -> ValidationReport {
    let rows: Vec<_> = (0..table.len()).map(|n| (table.a[n], table.b[n], table.c[n])).collect();
    validate_rows(&rows, tol)
}

fn validate_rows(rows: &[(f64, f64, f64)], tol: f64) -> ValidationReport {
    let mut report = ValidationReport::new();
    for (n, &(a, b, c)) in rows.iter().enumerate() {
        let sum = if n == 0 { a + b } else { a + b + c };
        let err = (sum - 1.0).abs();
        report.max_row_sum_error = report.max_row_sum_error.max(err);
        if !(err <= tol) {
            report.violation(n, format!("row {n} sums to {sum}"));
        }
        if !(a > 0.0 && a < 1.0) {
            report.violation(n, format!("a_{n} = {a} is not in (0, 1)"));
        }
        if n >= 1 && !(c > 0.0 && c < 1.0) {
            report.violation(n, format!("c_{n} = {c} is not in (0, 1)"));
        }
        if !(b >= -tol) {
            report.violation(n, format!("b_{n} = {b} is negative"));
        }
    }
    report
}

/// Checks `x_n + y_n = 1`, `0 < x_n <= 1` and `0 <= y_n < 1`.
pub fn validate_upper(upper: &UpperBidiagonal<f64>, tol: f64) -> ValidationReport {
    let mut report = ValidationReport::new();
    for n in 0..upper.len() {
        let (x, y) = (upper.x[n], upper.y[n]);
        let err = (x + y - 1.0).abs();
        report.max_row_sum_error = report.max_row_sum_error.max(err);
        if !(err <= tol) {
            report.violation(n, format!("x_{n} + y_{n} = {}", x + y));
        }
        if !(x > 0.0 && x <= 1.0 + tol) || !(y >= -tol && y < 1.0) {
            report.violation(n, format!("(x_{n}, y_{n}) = ({x}, {y}) out of range"));
        }
    }
    report
}

/// Checks `r_n + s_n = 1` and `0 < s_n < 1` for `n >= 1`, and `0 <= s_0 <= 1`.
pub fn validate_lower(lower: &LowerBidiagonal<f64>, tol: f64) -> ValidationReport {
    let mut report = ValidationReport::new();
    for n in 0..lower.len() {
        let (s, r) = (lower.s[n], lower.r[n]);
        if n == 0 {
            if !(s >= -tol && s <= 1.0 + tol) {
                report.violation(0, format!("s_0 = {s} out of [0, 1]"));
            }
            continue;
        }
        let err = (s + r - 1.0).abs();
        report.max_row_sum_error = report.max_row_sum_error.max(err);
        if !(err <= tol) {
            report.violation(n, format!("s_{n} + r_{n} = {}", s + r));
        }
        if !(s > 0.0 && s < 1.0) {
            report.violation(n, format!("s_{n} = {s} is not in (0, 1)"));
        }
    }
    report
}

/// Leading `depth x depth` block of the transition matrix.
///
/// The last row is left sub-stochastic: mass that would leave the block is dropped.
pub fn truncate_dense(chain: &BirthDeathChain, depth: usize) -> Result<DMatrix<f64>, TridiagError> {
    if depth == 0 {
        return Err(TridiagError::InvalidDepth);
    }
    let t = chain.realize::<f64>(depth - 1, ())?;
    let mut m = DMatrix::zeros(depth, depth);
    for n in 0..depth {
        m[(n, n)] = t.b[n];
        if n + 1 < depth {
            m[(n, n + 1)] = t.a[n];
        }
        if n > 0 {
            m[(n, n - 1)] = t.c[n];
        }
    }
    Ok(m)
}

// JSON: {"kind": ..., "params": {...}} or {"a": [...], "b": [...], "c": [...]}.
#[derive(Serialize, Deserialize)]
struct ChainRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    params: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
}

impl TryFrom<ChainRepr> for BirthDeathChain {
    type Error = TridiagError;

    fn try_from(r: ChainRepr) -> Result<Self, TridiagError> {
        let chain = match (r.kind, r.params, r.a, r.b, r.c) {
            (Some(kind), Some(params), None, None, None) => {
                let g: Generator = serde_json::from_value(serde_json::json!({ "kind": kind, "params": params }))
                    .map_err(|e| TridiagError::Format(e.to_string()))?;
                match g {
                    Generator::Constant { a0, a, b, c } => BirthDeathChain::constant(a0, a, b, c),
                    Generator::Jacobi { alpha, beta } => BirthDeathChain::jacobi(alpha, beta),
                }
            }
            (None, None, Some(a), Some(b), Some(c)) => BirthDeathChain::from_arrays(a, b, c)?,
            _ => {
                return Err(TridiagError::Format(
                    "expected either kind/params or the three arrays a, b, c".to_string(),
                ))
            }
        };
        Ok(match r.description {
            Some(d) => chain.with_description(d),
            None => chain,
        })
    }
}

impl From<BirthDeathChain> for ChainRepr {
    fn from(chain: BirthDeathChain) -> Self {
        let description = Some(chain.description);
        match chain.source {
            ChainSource::Generator(g) => {
                let v = serde_json::to_value(&g).expect("generator serializes");
                ChainRepr {
                    kind: v.get("kind").and_then(|k| k.as_str()).map(str::to_string),
                    params: v.get("params").cloned(),
                    a: None,
                    b: None,
                    c: None,
                    description,
                }
            }
            ChainSource::Table { a, b, c } => {
                ChainRepr { kind: None, params: None, a: Some(a), b: Some(b), c: Some(c), description }
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ChainRow {
    n: usize,
    a: f64,
    b: f64,
    c: f64,
}

/// Writes `n,a,b,c` rows for indices `0..=depth`.
pub fn write_chain_csv<W: Write>(chain: &BirthDeathChain, depth: usize, out: W) -> Result<(), TridiagError> {
    let t = chain.realize::<f64>(depth, ())?;
    write_table_csv(&t, out)
}

pub fn write_table_csv<W: Write>(t: &ChainTable<f64>, out: W) -> Result<(), TridiagError> {
    let mut w = csv::Writer::from_writer(out);
    for n in 0..t.len() {
        w.serialize(ChainRow { n, a: t.a[n], b: t.b[n], c: t.c[n] }).map_err(fmt_err)?;
    }
    w.flush().map_err(|e| TridiagError::Format(e.to_string()))
}

/// Reads `n,a,b,c` rows into an array-backed chain. Rows must be in index order.
pub fn read_chain_csv<R: Read>(input: R) -> Result<BirthDeathChain, TridiagError> {
    let mut rdr = csv::Reader::from_reader(input);
    let (mut a, mut b, mut c) = (Vec::new(), Vec::new(), Vec::new());
    for (i, row) in rdr.deserialize::<ChainRow>().enumerate() {
        let row = row.map_err(fmt_err)?;
        if row.n != i {
            return Err(TridiagError::Format(format!("row {i} has index {}", row.n)));
        }
        a.push(row.a);
        b.push(row.b);
        c.push(row.c);
    }
    BirthDeathChain::from_arrays(a, b, c)
}

#[derive(Serialize, Deserialize)]
struct UpperRow {
    n: usize,
    x: f64,
    y: f64,
}

#[derive(Serialize, Deserialize)]
struct LowerRow {
    n: usize,
    s: f64,
    r: f64,
}

pub fn write_upper_csv<W: Write>(u: &UpperBidiagonal<f64>, out: W) -> Result<(), TridiagError> {
    let mut w = csv::Writer::from_writer(out);
    for n in 0..u.len() {
        w.serialize(UpperRow { n, x: u.x[n], y: u.y[n] }).map_err(fmt_err)?;
    }
    w.flush().map_err(|e| TridiagError::Format(e.to_string()))
}

pub fn write_lower_csv<W: Write>(l: &LowerBidiagonal<f64>, out: W) -> Result<(), TridiagError> {
    let mut w = csv::Writer::from_writer(out);
    for n in 0..l.len() {
        w.serialize(LowerRow { n, s: l.s[n], r: l.r[n] }).map_err(fmt_err)?;
    }
    w.flush().map_err(|e| TridiagError::Format(e.to_string()))
}

fn fmt_err(e: csv::Error) -> TridiagError {
    TridiagError::Format(e.to_string())
}
