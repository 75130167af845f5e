//! Spectral measures of birth-death chains and the transforms that mirror Darboux steps.
//!
//! A measure is an absolutely continuous part of the form
//! `scale (x-lo)^p (hi-x)^q prod (u + v x)^e` on `[lo, hi]` plus point masses.
//! All integrals use a Gauss-Jacobi rule matched to `(p, q)`, so endpoint
//! singularities never reach the integrand.

mod quadrature;
mod recurrence;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rug::ops::Pow;
use rug::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::tridiag::BirthDeathChain;

pub use quadrature::{beta_mass, gauss_jacobi01, GaussRule};
pub use recurrence::{km_transition, recurrence_from_measure, KmEvaluator, OrthoRecurrence};

/// Quadrature nodes used unless a caller asks otherwise.
pub const DEFAULT_NODES: usize = 256;
/// Working precision for measure computations feeding `f64` results.
pub const DEFAULT_PRECISION: u32 = 256;

/// Endpoints closer than this are treated as coincident.
const MERGE_TOL: f64 = 1e-13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("loss of precision at degree {degree}")]
    Precision { degree: usize },
    #[error("measure has {points} support points, {needed} needed")]
    Degenerate { points: usize, needed: usize },
    #[error("recurrence and measure disagree: {0}")]
    Inconsistent(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// `(u + v x)^e`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub u: f64,
    pub v: f64,
    pub e: f64,
}

/// `scale (x-lo)^p (hi-x)^q prod factors` on `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Density {
    pub lo: f64,
    pub hi: f64,
    pub p: f64,
    pub q: f64,
    pub scale: f64,
    pub factors: Vec<Factor>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralMeasure {
    pub density: Option<Density>,
    pub atoms: Vec<Atom>,
    /// Set for the point mass at 0 produced by a Geronimus step with `y0 = 0`.
    #[serde(default)]
    pub degenerate: bool,
}

/// Nodes and weights of a measure after discretizing its density.
#[derive(Clone, Debug)]
pub struct Discrete {
    pub x: Vec<Float>,
    pub w: Vec<Float>,
}

impl Discrete {
    pub fn to_f64(&self) -> (Vec<f64>, Vec<f64>) {
        (self.x.iter().map(Scalar::to_f64).collect(), self.w.iter().map(Scalar::to_f64).collect())
    }
}

impl Density {
    /// Folds factors that vanish at an endpoint into the endpoint exponents.
    fn merged(mut self) -> Self {
        let mut rest = Vec::new();
        for f in std::mem::take(&mut self.factors) {
            if f.v != 0.0 {
                let zero = -f.u / f.v;
                if (zero - self.lo).abs() < MERGE_TOL && f.v > 0.0 {
                    self.p += f.e;
                    self.scale *= f.v.powf(f.e);
                    continue;
                }
                if (zero - self.hi).abs() < MERGE_TOL && f.v < 0.0 {
                    self.q += f.e;
                    self.scale *= (-f.v).powf(f.e);
                    continue;
                }
            }
            rest.push(f);
        }
        self.factors = rest;
        self
    }

    fn smooth_f64(&self, x: f64) -> f64 {
        self.factors.iter().fold(self.scale, |acc, f| acc * (f.u + f.v * x).powf(f.e))
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.lo || x >= self.hi {
            return 0.0;
        }
        (x - self.lo).powf(self.p) * (self.hi - x).powf(self.q) * self.smooth_f64(x)
    }

    fn smooth(&self, x: &Float) -> Float {
        let prec = x.prec();
        let mut acc = Float::with_val(prec, self.scale);
        for f in &self.factors {
            let base = Float::with_val(prec, f.v) * x.clone() + f.u;
            acc *= base.pow(&Float::with_val(prec, f.e));
        }
        acc
    }

    /// Multiplies by `x^k`, absorbing the power into `p` when `lo = 0`.
    fn times_x_pow(&self, k: i32) -> Result<Density, SpectralError> {
        let mut d = self.clone();
        if d.lo.abs() < MERGE_TOL {
            d.lo = 0.0;
            d.p += k as f64;
            if d.p <= -1.0 {
                return Err(SpectralError::Domain(format!("x^{k} times the density is not integrable at 0")));
            }
        } else if d.lo > 0.0 {
            d.factors.push(Factor { u: 0.0, v: 1.0, e: k as f64 });
        } else {
            return Err(SpectralError::Domain(format!(
                "support [{}, {}] reaches below 0, x^{k} times the density is not a positive measure",
                d.lo, d.hi
            )));
        }
        Ok(d)
    }

    pub fn discretize(&self, nodes: usize, prec: u32) -> Discrete {
        let rule = gauss_jacobi01(self.p, self.q, nodes, prec);
        let lo = Float::with_val(prec, self.lo);
        let width = Float::with_val(prec, self.hi) - lo.clone();
        let jac = width.clone().pow(&Float::with_val(prec, self.p + self.q + 1.0));
        let mut x = Vec::with_capacity(nodes);
        let mut w = Vec::with_capacity(nodes);
        for (t, wt) in rule.nodes.iter().zip(&rule.weights) {
            let xi = lo.clone() + width.clone() * t.clone();
            w.push(wt.clone() * jac.clone() * self.smooth(&xi));
            x.push(xi);
        }
        Discrete { x, w }
    }
}

impl SpectralMeasure {
    pub fn point(location: f64) -> Self {
        SpectralMeasure { density: None, atoms: vec![Atom { location, mass: 1.0 }], degenerate: false }
    }

    pub fn support(&self) -> Option<(f64, f64)> {
        self.density.as_ref().map(|d| (d.lo, d.hi))
    }

    pub fn density_at(&self, x: f64) -> f64 {
        self.density.as_ref().map_or(0.0, |d| d.eval(x))
    }

    pub fn discretize(&self, nodes: usize, prec: u32) -> Discrete {
        let mut out = match &self.density {
            Some(d) => d.discretize(nodes, prec),
            None => Discrete { x: Vec::new(), w: Vec::new() },
        };
        for a in &self.atoms {
            out.x.push(Float::with_val(prec, a.location));
            out.w.push(Float::with_val(prec, a.mass));
        }
        out
    }

    pub fn support_points(&self, nodes: usize) -> usize {
        self.atoms.len() + if self.density.is_some() { nodes } else { 0 }
    }

    pub fn total_mass(&self) -> f64 {
        let d = self.discretize(DEFAULT_NODES, 128);
        d.w.iter().map(Scalar::to_f64).sum()
    }

    fn has_atom_at(&self, x: f64) -> bool {
        self.atoms.iter().any(|a| (a.location - x).abs() < MERGE_TOL && a.mass != 0.0)
    }

    /// `x, density(x)` on `points` interior grid points of the support.
    pub fn density_samples(&self, points: usize) -> Vec<(f64, f64)> {
        let Some(d) = &self.density else { return Vec::new() };
        (1..=points)
            .map(|i| {
                let x = d.lo + (d.hi - d.lo) * i as f64 / (points + 1) as f64;
                (x, d.eval(x))
            })
            .collect()
    }
}

fn sigma(a: f64, c: f64) -> (f64, f64) {
    let (sa, sc) = (a.sqrt(), c.sqrt());
    (1.0 - (sa + sc).powi(2), 1.0 - (sa - sc).powi(2))
}

/// `gamma`, the second real pole of the Stieltjes transform; `None` when `a0 = a`.
pub fn constant_gamma(a0: f64, a: f64, c: f64) -> Option<f64> {
    (a0 != a).then(|| (a0 - a + a * a0 - a0 * c - a0 * a0) / (a0 - a))
}

/// Spectral measure of the constant chain with row zero `(1-a0, a0)`.
pub fn constant_chain_measure(a0: f64, a: f64, b: f64, c: f64) -> Result<SpectralMeasure, SpectralError> {
    if !(a0 > 0.0 && a0 <= 1.0 && a > 0.0 && c > 0.0 && b >= 0.0 && (a + b + c - 1.0).abs() < 1e-12) {
        return Err(SpectralError::InvalidParameter(format!("a0={a0} a={a} b={b} c={c}")));
    }
    let (lo, hi) = sigma(a, c);
    let l0 = a - a * a0 + a0 * c + a0 * a0 - a0;
    let density = Density {
        lo,
        hi,
        p: 0.5,
        q: 0.5,
        scale: a0 / (2.0 * PI),
        factors: vec![Factor { u: 1.0, v: -1.0, e: -1.0 }, Factor { u: l0, v: a0 - a, e: -1.0 }],
    }
    .merged();
    for x in [lo, hi] {
        let l = l0 + (a0 - a) * x;
        if l < -1e-12 {
            return Err(SpectralError::Domain(format!("denominator changes sign on the support at x = {x}")));
        }
    }
    let mut atoms = Vec::new();
    if c > a {
        atoms.push(Atom { location: 1.0, mass: (c - a) / (a0 + c - a) });
    }
    let d2 = (a0 - a).powi(2) - a * c;
    if let Some(g) = constant_gamma(a0, a, c) {
        if d2 > 0.0 {
            atoms.push(Atom { location: g, mass: d2 / (d2 + a0 * c) });
        }
    }
    Ok(SpectralMeasure { density: Some(density), atoms, degenerate: false })
}

/// `psi`: the semicircle-type measure of the chain with row zero deleted.
pub fn constant_psi_measure(a: f64, c: f64) -> Result<SpectralMeasure, SpectralError> {
    if !(a > 0.0 && c > 0.0 && a + c <= 1.0) {
        return Err(SpectralError::InvalidParameter(format!("a={a} c={c}")));
    }
    let (lo, hi) = sigma(a, c);
    let density = Density { lo, hi, p: 0.5, q: 0.5, scale: 1.0 / (2.0 * PI * a * c), factors: vec![] };
    Ok(SpectralMeasure { density: Some(density), atoms: vec![], degenerate: false })
}

/// Normalized Jacobi weight `x^alpha (1-x)^beta / B(alpha+1, beta+1)` on `[0, 1]`.
pub fn jacobi_weight(alpha: f64, beta: f64) -> Result<SpectralMeasure, SpectralError> {
    if !(alpha > -1.0 && beta > -1.0) {
        return Err(SpectralError::InvalidParameter(format!("alpha={alpha} beta={beta}")));
    }
    let scale = 1.0 / beta_mass(alpha, beta, 128).to_f64();
    let density = Density { lo: 0.0, hi: 1.0, p: alpha, q: beta, scale, factors: vec![] };
    Ok(SpectralMeasure { density: Some(density), atoms: vec![], degenerate: false })
}

/// `mu_{-1} = int dm/x` at precision, or `None` when it diverges.
fn inverse_moment(m: &SpectralMeasure, prec: u32) -> Result<Option<Float>, SpectralError> {
    if m.has_atom_at(0.0) {
        return Ok(None);
    }
    let mut acc = Float::with_val(prec, 0);
    if let Some(d) = &m.density {
        match d.times_x_pow(-1) {
            Ok(dx) => {
                for w in dx.discretize(DEFAULT_NODES, prec).w {
                    acc += w;
                }
            }
            Err(_) if d.lo.abs() < MERGE_TOL => return Ok(None),
            Err(e) => return Err(e),
        }
    }
    for a in &m.atoms {
        acc += Float::with_val(prec, a.mass) / a.location;
    }
    Ok(Some(acc))
}

/// Geronimus transform `y0 m(x)/x + M delta_0` with `M = 1 - y0 mu_{-1}`.
///
/// `y0 = 0` gives the degenerate point mass at 0.
pub fn geronimus(m: &SpectralMeasure, y0: f64) -> Result<SpectralMeasure, SpectralError> {
    if y0 < 0.0 {
        return Err(SpectralError::InvalidParameter(format!("y0 = {y0}")));
    }
    if y0 == 0.0 {
        return Ok(SpectralMeasure { degenerate: true, ..SpectralMeasure::point(0.0) });
    }
    if m.has_atom_at(0.0) {
        return Err(SpectralError::Domain("input has an atom at 0".into()));
    }
    let mu = inverse_moment(m, DEFAULT_PRECISION)?
        .ok_or_else(|| SpectralError::Domain("mu_{-1} diverges".into()))?
        .to_f64();
    let big_m = 1.0 - y0 * mu;
    if big_m < -1e-12 {
        return Err(SpectralError::Domain(format!("mass at 0 would be {big_m}; y0 exceeds 1/mu_(-1) = {}", 1.0 / mu)));
    }
    let density = match &m.density {
        Some(d) => {
            let mut dx = d.times_x_pow(-1)?;
            dx.scale *= y0;
            Some(dx)
        }
        None => None,
    };
    let mut atoms: Vec<Atom> =
        m.atoms.iter().map(|a| Atom { location: a.location, mass: y0 * a.mass / a.location }).collect();
    if big_m > 1e-14 {
        atoms.push(Atom { location: 0.0, mass: big_m });
    }
    Ok(SpectralMeasure { density, atoms, degenerate: false })
}

/// Christoffel transform `x m(x) / mu_1`.
pub fn christoffel(m: &SpectralMeasure) -> Result<SpectralMeasure, SpectralError> {
    let mut density = match &m.density {
        Some(d) => Some(d.times_x_pow(1)?),
        None => None,
    };
    let mut atoms: Vec<Atom> = m
        .atoms
        .iter()
        .filter(|a| a.location.abs() >= MERGE_TOL)
        .map(|a| Atom { location: a.location, mass: a.location * a.mass })
        .collect();
    if atoms.iter().any(|a| a.mass < 0.0) {
        return Err(SpectralError::Domain("atom at negative location".into()));
    }
    let unnormalized = SpectralMeasure { density: density.clone(), atoms: atoms.clone(), degenerate: false };
    let mu1 = unnormalized.total_mass();
    if !(mu1 > 0.0) {
        return Err(SpectralError::Domain("measure is concentrated at 0".into()));
    }
    if let Some(d) = density.as_mut() {
        d.scale /= mu1;
    }
    for a in &mut atoms {
        a.mass /= mu1;
    }
    Ok(SpectralMeasure { density, atoms, degenerate: false })
}

/// `mu_k` for `k` in `-1..=kmax`. Divergent moments are `+inf`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentTable {
    pub moments: BTreeMap<i32, f64>,
}

impl MomentTable {
    pub fn get(&self, k: i32) -> Option<f64> {
        self.moments.get(&k).copied()
    }
}

pub fn moments(m: &SpectralMeasure, kmax: u32) -> Result<MomentTable, SpectralError> {
    let prec = DEFAULT_PRECISION;
    let mut moments = BTreeMap::new();
    let inv = match inverse_moment(m, prec) {
        Ok(Some(v)) => v.to_f64(),
        Ok(None) => f64::INFINITY,
        Err(SpectralError::Domain(_)) => f64::NAN,
        Err(e) => return Err(e),
    };
    moments.insert(-1, inv);
    let d = m.discretize(DEFAULT_NODES, prec);
    for k in 0..=kmax {
        let mut acc = Float::with_val(prec, 0);
        for (x, w) in d.x.iter().zip(&d.w) {
            acc += x.clone().pow(k) * w.clone();
        }
        moments.insert(k as i32, acc.to_f64());
    }
    Ok(MomentTable { moments })
}

pub fn moment(m: &SpectralMeasure, k: i32) -> Result<f64, SpectralError> {
    if k < -1 {
        return Err(SpectralError::InvalidParameter(format!("moment order {k}")));
    }
    Ok(moments(m, k.max(0) as u32)?.get(k).expect("computed"))
}

/// `B(z) = int dm(x)/(x - z)` for `z` off the support.
pub fn stieltjes_transform(m: &SpectralMeasure, z: Complex64) -> Result<Complex64, SpectralError> {
    if let Some((lo, hi)) = m.support() {
        if z.im == 0.0 && z.re >= lo && z.re <= hi {
            return Err(SpectralError::Domain(format!("z = {z} lies on the support")));
        }
    }
    if m.atoms.iter().any(|a| Complex64::new(a.location, 0.0) == z) {
        return Err(SpectralError::Domain(format!("z = {z} is an atom")));
    }
    let (x, w) = m.discretize(DEFAULT_NODES, 128).to_f64();
    Ok(x.iter().zip(&w).map(|(&x, &w)| w / (x - z)).sum())
}

fn physical_root(z: Complex64, lo: f64, hi: f64) -> Complex64 {
    (z - hi).sqrt() * (z - lo).sqrt()
}

/// Closed form of `B(z; psi)` on the physical sheet.
pub fn constant_psi_stieltjes(a: f64, c: f64, z: Complex64) -> Complex64 {
    let (lo, hi) = sigma(a, c);
    let b = 1.0 - a - c;
    (b - z + physical_root(z, lo, hi)) / (2.0 * a * c)
}

/// Closed form of `B(z; omega)` for the constant chain.
pub fn constant_chain_stieltjes(a0: f64, a: f64, c: f64, z: Complex64) -> Complex64 {
    let (lo, hi) = sigma(a, c);
    let num = 2.0 * a - a * a0 - a0 + a0 * c + (a0 - 2.0 * a) * z + a0 * physical_root(z, lo, hi);
    let den = 2.0 * (1.0 - z) * ((a0 - a) * z + a - a * a0 + a0 * c + a0 * a0 - a0);
    num / den
}

/// Residue of `f` at `z0` by the trapezoid rule on a circle of radius `r`.
pub fn residue<F: Fn(Complex64) -> Complex64>(f: F, z0: Complex64, r: f64, points: usize) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..points {
        let e = Complex64::from_polar(r, 2.0 * PI * k as f64 / points as f64);
        acc += f(z0 + e) * e;
    }
    acc / points as f64
}

/// Which of the two atom conditions agree for the constant chain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CondsDiagnostic {
    /// `(a0 - a)^2 > ac`, the condition the measure constructor uses.
    pub direct: bool,
    /// The rewritten form in terms of `a0`, including the `sqrt(a) + sqrt(c) < 1/sqrt(a)` clause.
    pub rewritten: bool,
    pub agree: bool,
}

pub fn conds_diagnostic(a0: f64, a: f64, c: f64) -> CondsDiagnostic {
    let direct = (a0 - a).powi(2) > a * c;
    let (sa, sc) = (a.sqrt(), c.sqrt());
    let r = (a * c).sqrt();
    let rewritten = (sa > sc && a0 < a - r) || (sa + sc < 1.0 / sa && a0 > a + r);
    CondsDiagnostic { direct, rewritten, agree: direct == rewritten }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecurrenceClass {
    Recurrent,
    Transient,
    Inconclusive,
}

/// Known-family shortcut for [`classify_recurrence`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FamilyHint {
    Jacobi { beta: f64 },
    /// Constant chain with `a = c`.
    SymmetricConstant,
}

/// Recurrent iff `int dm/(1-x)` diverges.
///
/// Decided from the exponent at `x = 1` and any atom there. A family hint that
/// disagrees with the exponent analysis yields `Inconclusive`.
pub fn classify_recurrence(m: &SpectralMeasure, hint: Option<FamilyHint>) -> RecurrenceClass {
    let by_measure = if m.has_atom_at(1.0) {
        RecurrenceClass::Recurrent
    } else {
        match &m.density {
            Some(d) if (d.hi - 1.0).abs() < MERGE_TOL => {
                if d.q <= 0.0 {
                    RecurrenceClass::Recurrent
                } else {
                    RecurrenceClass::Transient
                }
            }
            Some(d) if d.hi < 1.0 => RecurrenceClass::Transient,
            Some(_) => RecurrenceClass::Inconclusive,
            None => RecurrenceClass::Transient,
        }
    };
    let by_hint = hint.map(|h| match h {
        FamilyHint::Jacobi { beta } if beta <= 0.0 => RecurrenceClass::Recurrent,
        FamilyHint::Jacobi { .. } => RecurrenceClass::Transient,
        FamilyHint::SymmetricConstant => RecurrenceClass::Recurrent,
    });
    match by_hint {
        Some(h) if h != by_measure => RecurrenceClass::Inconclusive,
        _ => by_measure,
    }
}

/// `pi_0 = 1`, `pi_n = a_0 ... a_{n-1} / (c_1 ... c_n)` for `n <= depth`.
pub fn invariant_measure<S: Scalar>(chain: &BirthDeathChain, depth: usize, ctx: S::Ctx) -> Result<Vec<S>, SpectralError> {
    let t = chain.realize::<S>(depth, ctx).map_err(|e| SpectralError::InvalidParameter(e.to_string()))?;
    let mut pi = vec![S::one(ctx)];
    for n in 1..=depth {
        if t.c[n] == S::zero(ctx) {
            return Err(SpectralError::Domain(format!("c_{n} = 0")));
        }
        pi.push(pi[n - 1].clone() * t.a[n - 1].clone() / t.c[n].clone());
    }
    Ok(pi)
}

/// `max_n |(pi P)_n - pi_n| / pi_n` over `n < pi.len() - 1`; relative because `pi` grows polynomially for many chains.
pub fn invariance_residual(chain: &BirthDeathChain, pi: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for n in 0..pi.len().saturating_sub(1) {
        let (_, b, _) = chain.coeffs(n).unwrap_or((0.0, 0.0, 0.0));
        let from_left = if n > 0 { pi[n - 1] * chain.a(n - 1) } else { 0.0 };
        let from_right = pi[n + 1] * chain.c(n + 1);
        worst = worst.max((from_left + pi[n] * b + from_right - pi[n]).abs() / pi[n]);
    }
    worst
}

/// `||Q_n||^2` for the Jacobi weight normalized by `Q_n(1) = 1`.
pub fn jacobi_norm_sq<S: Scalar>(alpha: &S, beta: &S, n: usize) -> S {
    use crate::scalar::{factorial, pochhammer};
    let ctx = alpha.ctx();
    let one = S::one(ctx);
    let ab2 = alpha.clone() + beta.clone() + S::from_i64(2, ctx);
    // (x)_{-1} = 1/(x-1)
    let p_ab = if n == 0 { one.clone() / (ab2.clone() - one.clone()) } else { pochhammer(&ab2, n - 1) };
    let w = S::from_i64(2 * n as i64, ctx) + alpha.clone() + beta.clone() + one.clone();
    factorial::<S>(n, ctx) * pochhammer(&(alpha.clone() + one.clone()), n)
        / (pochhammer(&(beta.clone() + one), n) * p_ab * w)
}
