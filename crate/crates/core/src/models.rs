//! The constant-coefficient and Jacobi families with their closed-form factors.
//!
//! Closed forms are generic over [`Scalar`], so with `Rational` they serve as
//! zero-tolerance oracles for the recurrences in [`crate::factorization`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contfrac::periodic_F;
use crate::factorization::{ul_factorize, FactorOptions, LUFactors, ULFactors};
use crate::scalar::{factorial, pochhammer, Scalar};
use crate::tridiag::{BirthDeathChain, LowerBidiagonal, UpperBidiagonal};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("closed form only available for {0}")]
    WrongFamily(&'static str),
}

/// Constant chain: `a_n = a`, `b_n = b`, `c_n = c` for `n >= 1`, with row zero `(1 - a0, a0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantChainParams {
    pub a0: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Urn parameter for `a = c = 1/4`, selecting `y0 = 1 - k a0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
}

impl ConstantChainParams {
    pub fn new(a0: f64, a: f64, b: f64, c: f64) -> Self {
        ConstantChainParams { a0, a, b, c, k: None }
    }

    pub fn quarter(a0: f64) -> Self {
        Self::new(a0, 0.25, 0.5, 0.25)
    }

    pub fn with_k(mut self, k: u32) -> Self {
        self.k = Some(k);
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let ok = |v: f64| (0.0..=1.0).contains(&v);
        if !(self.a0 > 0.0 && self.a0 <= 1.0) || !(self.a > 0.0 && self.c > 0.0) || !ok(self.b) || !ok(self.a) || !ok(self.c) {
            return Err(ModelError::InvalidParameter(format!("probabilities out of range: {self:?}")));
        }
        if (self.a + self.b + self.c - 1.0).abs() > 1e-12 {
            return Err(ModelError::InvalidParameter(format!("a + b + c = {}", self.a + self.b + self.c)));
        }
        if let Some(k) = self.k {
            if k < 2 {
                return Err(ModelError::InvalidParameter("k must be at least 2".into()));
            }
            if self.a0 * k as f64 > 1.0 + 1e-15 {
                return Err(ModelError::InvalidParameter(format!("k a0 = {} exceeds 1", self.a0 * k as f64)));
            }
        }
        Ok(())
    }

    fn is_quarter(&self) -> bool {
        self.a == 0.25 && self.c == 0.25
    }

    /// `F`, the value of the periodic continued fraction, so that `H = 1 - a0/F`.
    pub fn f(&self) -> Result<f64, ModelError> {
        periodic_F(self.a, self.c).map_err(|e| ModelError::InvalidParameter(e.to_string()))
    }

    /// `y0 = 1 - k a0` in the scalar type, if `k` is set.
    pub fn y0_for_k<S: Scalar>(&self, ctx: S::Ctx) -> Option<S> {
        self.k.map(|k| S::one(ctx) - S::from_i64(k as i64, ctx) * S::from_f64(self.a0, ctx))
    }
}

/// Jacobi chain with weight `x^alpha (1-x)^beta` on `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobiParams {
    pub alpha: f64,
    pub beta: f64,
    /// Free parameter rescaled to `[0, 1]`: `y0 = h0 alpha/(alpha+beta+1)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h0: Option<f64>,
}

impl JacobiParams {
    pub fn new(alpha: f64, beta: f64) -> Self {
        JacobiParams { alpha, beta, h0: None }
    }

    pub fn with_h0(mut self, h0: f64) -> Self {
        self.h0 = Some(h0);
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.alpha > -1.0 && self.beta > -1.0) {
            return Err(ModelError::InvalidParameter(format!("alpha, beta must exceed -1: {self:?}")));
        }
        if let Some(h0) = self.h0 {
            if !(0.0..=1.0).contains(&h0) {
                return Err(ModelError::InvalidParameter(format!("h0 = {h0} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn is_integer(&self) -> bool {
        self.alpha.fract() == 0.0 && self.beta.fract() == 0.0
    }

    /// `y0 = h0 alpha/(alpha+beta+1)` computed in `S`; `h0` defaults to 1.
    pub fn y0<S: Scalar>(&self, ctx: S::Ctx) -> S {
        let al = S::from_f64(self.alpha, ctx);
        let ab1 = al.clone() + S::from_f64(self.beta, ctx) + S::one(ctx);
        S::from_f64(self.h0.unwrap_or(1.0), ctx) * al / ab1
    }

    /// Inverse of [`JacobiParams::y0`].
    pub fn h0_from_y0(&self, y0: f64) -> f64 {
        y0 * (self.alpha + self.beta + 1.0) / self.alpha
    }
}

/// A model description as read from JSON, tagged by `family`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ModelSpec {
    Constant(ConstantChainParams),
    Jacobi(JacobiParams),
}

impl ModelSpec {
    pub fn chain(&self) -> Result<BirthDeathChain, ModelError> {
        match self {
            ModelSpec::Constant(p) => constant_chain(p),
            ModelSpec::Jacobi(p) => jacobi_chain(p),
        }
    }

    /// The free parameter of the model, if any: `1 - k a0` or `h0 alpha/(alpha+beta+1)`.
    pub fn y0(&self) -> Option<f64> {
        match self {
            ModelSpec::Constant(p) => p.y0_for_k::<f64>(()),
            ModelSpec::Jacobi(p) => p.h0.map(|_| p.y0::<f64>(())),
        }
    }
}

pub fn constant_chain(p: &ConstantChainParams) -> Result<BirthDeathChain, ModelError> {
    p.validate()?;
    Ok(BirthDeathChain::constant(p.a0, p.a, p.b, p.c))
}

pub fn jacobi_chain(p: &JacobiParams) -> Result<BirthDeathChain, ModelError> {
    p.validate()?;
    Ok(BirthDeathChain::jacobi(p.alpha, p.beta))
}

fn ul_from<S: Scalar>(y: Vec<S>, s: Vec<S>, y0: S) -> ULFactors<S> {
    let ctx = y0.ctx();
    let x = y.iter().map(|v| S::one(ctx) - v.clone()).collect();
    let mut r: Vec<S> = s.iter().map(|v| S::one(ctx) - v.clone()).collect();
    r[0] = S::zero(ctx);
    ULFactors { upper: UpperBidiagonal { x, y }, lower: LowerBidiagonal { s, r }, s0: S::one(ctx), y0, boundary: false }
}

fn lu_from<S: Scalar>(x: Vec<S>, r: Vec<S>) -> LUFactors<S> {
    let ctx = x[0].ctx();
    let y = x.iter().map(|v| S::one(ctx) - v.clone()).collect();
    let mut s: Vec<S> = r.iter().map(|v| S::one(ctx) - v.clone()).collect();
    s[0] = S::one(ctx);
    LUFactors { lower: LowerBidiagonal { s, r }, upper: UpperBidiagonal { x, y }, boundary: false }
}

fn n_<S: Scalar>(n: usize, ctx: S::Ctx) -> S {
    S::from_i64(n as i64, ctx)
}

/// UL factors of the `a = c = 1/4` chain for any admissible `y0`, indices `0..=depth`.
///
/// With `D = 1 - y0 - 2a0`:
/// `y_n = (2a0 + (2n-1)D)/(4a0 + 4nD)` and `s_n = (a0 + (n-1)D)/(2a0 + (2n-1)D)`.
pub fn constant_ul_closed_form<S: Scalar>(p: &ConstantChainParams, y0: &S, depth: usize) -> Result<ULFactors<S>, ModelError> {
    p.validate()?;
    if !p.is_quarter() {
        return Err(ModelError::WrongFamily("a = c = 1/4"));
    }
    let ctx = y0.ctx();
    let a0 = S::from_f64(p.a0, ctx);
    let two = S::from_i64(2, ctx);
    let d = S::one(ctx) - y0.clone() - two.clone() * a0.clone();
    let mut y = vec![y0.clone()];
    let mut s = vec![S::one(ctx)];
    for n in 1..=depth {
        let nn = n_::<S>(n, ctx);
        let odd = two.clone() * nn.clone() - S::one(ctx);
        y.push(
            (two.clone() * a0.clone() + odd.clone() * d.clone())
                / (S::from_i64(4, ctx) * a0.clone() + S::from_i64(4, ctx) * nn.clone() * d.clone()),
        );
        s.push((a0.clone() + (nn - S::one(ctx)) * d.clone()) / (two.clone() * a0.clone() + odd * d.clone()));
    }
    Ok(ul_from(y, s, y0.clone()))
}

/// The `a0`-free factors for `y0 = 1 - k a0`:
/// `y_n = (2 + (2n-1)(k-2))/(4 + 4n(k-2))`, `s_n = (1 + (n-1)(k-2))/(2 + (2n-1)(k-2))`.
///
/// Index 0 carries `y_0 = 1 - k a0` and `s_0 = 1`.
pub fn constant_k_closed_form<S: Scalar>(p: &ConstantChainParams, depth: usize, ctx: S::Ctx) -> Result<ULFactors<S>, ModelError> {
    p.validate()?;
    if !p.is_quarter() {
        return Err(ModelError::WrongFamily("a = c = 1/4"));
    }
    let k = p.k.ok_or_else(|| ModelError::InvalidParameter("k is required".into()))? as i64;
    let y0 = p.y0_for_k::<S>(ctx).expect("k is set");
    let mut y = vec![y0.clone()];
    let mut s = vec![S::one(ctx)];
    for n in 1..=depth as i64 {
        let km = k - 2;
        y.push(S::ratio(2 + (2 * n - 1) * km, 4 + 4 * n * km, ctx));
        s.push(S::ratio(1 + (n - 1) * km, 2 + (2 * n - 1) * km, ctx));
    }
    Ok(ul_from(y, s, y0))
}

/// LU factors of the `a = c = 1/4` chain:
/// `x~_n = (a0 + n(1-2a0))/(1 + 2n(1-2a0))` and `r~_n = (2a0 + (2n-1)(1-2a0))/(4a0 + 4n(1-2a0))`.
pub fn constant_lu_closed_form<S: Scalar>(p: &ConstantChainParams, depth: usize, ctx: S::Ctx) -> Result<LUFactors<S>, ModelError> {
    p.validate()?;
    if !p.is_quarter() {
        return Err(ModelError::WrongFamily("a = c = 1/4"));
    }
    let a0 = S::from_f64(p.a0, ctx);
    let one = S::one(ctx);
    let two = S::from_i64(2, ctx);
    let four = S::from_i64(4, ctx);
    let e = one.clone() - two.clone() * a0.clone();
    let mut x = Vec::with_capacity(depth + 1);
    let mut r = vec![S::zero(ctx)];
    for n in 0..=depth {
        let nn = n_::<S>(n, ctx);
        x.push((a0.clone() + nn.clone() * e.clone()) / (one.clone() + two.clone() * nn.clone() * e.clone()));
        if n >= 1 {
            let odd = two.clone() * nn.clone() - one.clone();
            r.push((two.clone() * a0.clone() + odd * e.clone()) / (four.clone() * a0.clone() + four.clone() * nn * e.clone()));
        }
    }
    Ok(lu_from(x, r))
}

/// UL factors of the `a = 1/9`, `c = 4/9` chain, where `F = 1/3` and the
/// sequence alternates between an even and an odd branch. `E = 1 - y0 - 3a0`.
pub fn constant_case_b_ul<S: Scalar>(a0: &S, y0: &S, depth: usize) -> ULFactors<S> {
    let ctx = a0.ctx();
    let one = S::one(ctx);
    let i = |v: i64| S::from_i64(v, ctx);
    let e = one.clone() - y0.clone() - i(3) * a0.clone();
    let mut y = vec![y0.clone()];
    let mut s = vec![one.clone()];
    for m in 1..=depth {
        let yn = if m % 2 == 0 {
            let n = (m / 2) as i64;
            (i(6) * a0.clone() + i(6 * n - 1) * e.clone()) / (i(9) * a0.clone() + i(9 * n) * e.clone())
        } else {
            let n = m.div_ceil(2) as i64;
            (i(12) * a0.clone() + i(12 * n - 8) * e.clone()) / (i(18) * a0.clone() + i(9 * (2 * n - 1)) * e.clone())
        };
        let sn = if m == 1 {
            a0.clone() / (one.clone() - y0.clone())
        } else {
            one.clone() / (i(9) * (one.clone() - y[m - 1].clone()))
        };
        y.push(yn);
        s.push(sn);
    }
    ul_from(y, s, y0.clone())
}

/// `gamma_n`, `delta_n`, `epsilon_n`, `nu_n` for the Jacobi factors at a general `y0`.
///
/// Defined for `alpha != 0` and `alpha + beta + 1 != 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobiAuxSequences<S = f64> {
    pub gamma: Vec<S>,
    pub delta: Vec<S>,
    pub epsilon: Vec<S>,
    pub nu: Vec<S>,
}

impl<S: Scalar> JacobiAuxSequences<S> {
    pub fn new(p: &JacobiParams, depth: usize, ctx: S::Ctx) -> Result<Self, ModelError> {
        p.validate()?;
        if p.alpha == 0.0 || p.alpha + p.beta + 1.0 == 0.0 {
            return Err(ModelError::InvalidParameter("need alpha != 0 and alpha + beta + 1 != 0".into()));
        }
        let al = S::from_f64(p.alpha, ctx);
        let be = S::from_f64(p.beta, ctx);
        let one = S::one(ctx);
        let ab1 = al.clone() + be.clone() + one.clone();
        let ab2 = ab1.clone() + one.clone();
        let (mut gamma, mut delta, mut epsilon, mut nu) = (vec![], vec![], vec![], vec![]);
        for n in 0..=depth {
            let fact = factorial::<S>(n, ctx);
            let pa = pochhammer(&(al.clone() + one.clone()), n);
            let g = pa.clone() * pochhammer(&ab2, n);
            // (x)_{-1} = 1/(x-1)
            let eps = if n == 0 { one.clone() / ab1.clone() } else { pa * pochhammer(&ab2, n - 1) };
            let d = (fact.clone() * pochhammer(&(be.clone() + one.clone()), n + 1) - ab1.clone() * g.clone()) / al.clone();
            let v = (fact * pochhammer(&(be.clone() + one.clone()), n) - ab1.clone() * eps.clone()) / al.clone();
            gamma.push(g);
            delta.push(d);
            epsilon.push(eps);
            nu.push(v);
        }
        Ok(JacobiAuxSequences { gamma, delta, epsilon, nu })
    }

    /// `x_n = (gamma_n + delta_n y0)/((epsilon_n + nu_n y0)(2n+alpha+beta+1))`.
    pub fn x(&self, p: &JacobiParams, n: usize, y0: &S) -> S {
        let ctx = y0.ctx();
        let w = n_::<S>(2 * n, ctx) + S::from_f64(p.alpha + p.beta + 1.0, ctx);
        (self.gamma[n].clone() + self.delta[n].clone() * y0.clone())
            / ((self.epsilon[n].clone() + self.nu[n].clone() * y0.clone()) * w)
    }

    /// `r_n = (epsilon_n + nu_n y0)/((gamma_{n-1} + delta_{n-1} y0)(2n+alpha+beta))` for `n >= 1`.
    pub fn r(&self, p: &JacobiParams, n: usize, y0: &S) -> S {
        let ctx = y0.ctx();
        let w = n_::<S>(2 * n, ctx) + S::from_f64(p.alpha + p.beta, ctx);
        (self.epsilon[n].clone() + self.nu[n].clone() * y0.clone())
            / ((self.gamma[n - 1].clone() + self.delta[n - 1].clone() * y0.clone()) * w)
    }
}

/// Jacobi UL factors in the `h0` parameterization, indices `0..=depth`.
///
/// The auxiliary sequences are returned when they are defined (`alpha != 0`).
pub fn jacobi_ul_closed_form<S: Scalar>(
    p: &JacobiParams,
    depth: usize,
    ctx: S::Ctx,
) -> Result<(ULFactors<S>, Option<JacobiAuxSequences<S>>), ModelError> {
    p.validate()?;
    if p.alpha + p.beta + 1.0 <= 0.0 {
        return Err(ModelError::InvalidParameter("the h0 form needs alpha + beta + 1 > 0".into()));
    }
    let one = S::one(ctx);
    let al = S::from_f64(p.alpha, ctx);
    let be = S::from_f64(p.beta, ctx);
    let h0 = S::from_f64(p.h0.unwrap_or(1.0), ctx);
    let g0 = one.clone() - h0.clone();
    let ab = al.clone() + be.clone();
    let ab1 = ab.clone() + one.clone();
    let y0 = p.y0::<S>(ctx);

    // Running products: n!, (beta+1)_n, (alpha+1)_n, (alpha+beta+1)_n.
    let mut fact = one.clone();
    let mut pb = one.clone();
    let mut pa = one.clone();
    let mut pab = one.clone();
    let mut y = vec![y0.clone()];
    let mut s = vec![one.clone()];
    for n in 1..=depth {
        let nn = n_::<S>(n, ctx);
        let fact_prev = fact.clone();
        let pa_prev = pa.clone();
        fact = fact * nn.clone();
        pb = pb * (be.clone() + n_::<S>(n, ctx));
        pa = pa * (al.clone() + n_::<S>(n, ctx));
        pab = pab * (ab.clone() + n_::<S>(n, ctx));
        let na = nn.clone() + al.clone();
        let nab = nn.clone() + ab.clone();
        let two_n = n_::<S>(2 * n, ctx);

        // y_n
        let hf = h0.clone() * fact.clone() * pb.clone() * na.clone();
        let q = g0.clone() * pa.clone() * pab.clone();
        let yn = na.clone() / (two_n.clone() + ab1.clone()) * (hf.clone() + q.clone() * nn.clone())
            / (hf + q * na.clone());
        // s_n
        let hf = h0.clone() * fact_prev.clone() * pb.clone() * nab.clone();
        let q = g0.clone() * pa_prev.clone() * pab.clone();
        let sn = nab.clone() / (two_n + ab.clone()) * (hf.clone() + q.clone() * (nn.clone() + be.clone()))
            / (hf + q * nab);
        y.push(yn);
        s.push(sn);
    }
    let aux = if p.alpha != 0.0 { Some(JacobiAuxSequences::new(p, depth, ctx)?) } else { None };
    Ok((ul_from(y, s, y0), aux))
}

/// Jacobi LU factors: `x~_n = (n+beta+1)/(2n+alpha+beta+2)`, `r~_n = n/(2n+alpha+beta+1)`.
pub fn jacobi_lu_closed_form<S: Scalar>(p: &JacobiParams, depth: usize, ctx: S::Ctx) -> Result<LUFactors<S>, ModelError> {
    p.validate()?;
    let be = S::from_f64(p.beta, ctx);
    let ab = S::from_f64(p.alpha, ctx) + be.clone();
    let mut x = Vec::with_capacity(depth + 1);
    let mut r = vec![S::zero(ctx)];
    for n in 0..=depth {
        let nn = n_::<S>(n, ctx);
        x.push((nn.clone() + be.clone() + S::one(ctx)) / (n_::<S>(2 * n + 2, ctx) + ab.clone()));
        if n >= 1 {
            r.push(nn / (n_::<S>(2 * n + 1, ctx) + ab.clone()));
        }
    }
    Ok(lu_from(x, r))
}

/// One row of [`conjecture_fit_report`]: `y_n = (p + qD)/(1 + sD)` with `D = 1 - y0 - a0/F`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConjectureRow {
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub s: f64,
    /// `p = beta_1/beta_2` under this normalization; constant in `n` if the guessed shape holds.
    pub beta_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConjectureFit {
    pub f: f64,
    pub rows: Vec<ConjectureRow>,
    /// `max - min` of `beta_ratio` over the fitted rows.
    pub spread: f64,
}

/// Exploratory test of the guessed shape of `y_n` for general `(a, c)`.
///
/// For fixed `n`, `y_n` is a Moebius function of `y0` and hence of `D`. The guess
/// amounts to the `D`-free part `beta_1 a0 / (beta_2 a0)` being the same for every
/// `n`; the report fits the Moebius coefficients from three values of `y0` and
/// lists `p` so that can be inspected. Nothing here is asserted.
pub fn conjecture_fit_report(p: &ConstantChainParams, depth: usize) -> Result<ConjectureFit, ModelError> {
    p.validate()?;
    let f = p.f()?;
    let h = 1.0 - p.a0 / f;
    if h <= 0.0 {
        return Err(ModelError::InvalidParameter("need a0 < F".into()));
    }
    let chain = constant_chain(p)?;
    let opts = FactorOptions::forced();
    let samples: Vec<(f64, ULFactors)> = [0.0, 0.5 * h, 0.9 * h]
        .iter()
        .map(|&y0| {
            ul_factorize(&chain, y0, 1.0, depth, &opts)
                .map(|fac| (h - y0, fac))
                .map_err(|e| ModelError::InvalidParameter(e.to_string()))
        })
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    for n in 1..=depth {
        // y (1 + sD) = p + qD  <=>  p + qD - y D s = y
        let m = nalgebra::Matrix3::from_fn(|i, j| {
            let (d, fac) = &samples[i];
            [1.0, *d, -fac.upper.y[n] * d][j]
        });
        let rhs = nalgebra::Vector3::from_fn(|i, _| samples[i].1.upper.y[n]);
        if let Some(sol) = m.lu().solve(&rhs) {
            rows.push(ConjectureRow { n, p: sol[0], q: sol[1], s: sol[2], beta_ratio: sol[0] });
        }
    }
    let (lo, hi) = rows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.beta_ratio), hi.max(r.beta_ratio)));
    Ok(ConjectureFit { f, rows, spread: hi - lo })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorization::{lu_factorize_exact, ul_factorize_exact};
    use crate::tridiag::multiply_lu;
    use rug::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    #[test]
    fn chains() {
        assert!(constant_chain(&ConstantChainParams::new(0.3, 0.5, 0.0, 0.5)).is_ok());
        assert!(constant_chain(&ConstantChainParams::new(0.3, 0.5, 0.1, 0.5)).is_err());
        let c = jacobi_chain(&JacobiParams::new(0.0, 0.0)).unwrap();
        assert_eq!(c.a(0), 0.5);
        let c = jacobi_chain(&JacobiParams::new(1.0, 0.0)).unwrap();
        assert!((c.a(0) - 1.0 / 3.0).abs() < 1e-16);
        assert!(jacobi_chain(&JacobiParams::new(-1.0, 0.0)).is_err());
    }

    #[test]
    fn k_forms() {
        let p = ConstantChainParams::quarter(0.25).with_k(2);
        let f = constant_k_closed_form::<Rational>(&p, 10, ()).unwrap();
        assert!(f.upper.y[1..].iter().all(|v| *v == q(1, 2)));
        assert!(f.lower.s[1..].iter().all(|v| *v == q(1, 2)));
        let p = ConstantChainParams::quarter(0.2).with_k(3);
        let f = constant_k_closed_form::<Rational>(&p, 10, ()).unwrap();
        assert_eq!(f.upper.y[1], q(3, 8));
        assert_eq!(f.upper.x[1], q(5, 8));
        let g = constant_ul_closed_form(&p, &f.y0, 10).unwrap();
        assert_eq!(f, g);
        assert!(constant_k_closed_form::<f64>(&ConstantChainParams::quarter(0.3).with_k(5), 3, ()).is_err());
    }

    #[test]
    fn quarter_exact_against_recurrence() {
        let p = ConstantChainParams::quarter(0.3);
        let chain = constant_chain(&p).unwrap();
        for y0 in [q(0, 1), q(1, 5), q(2, 5)] {
            let closed = constant_ul_closed_form(&p, &y0, 60).unwrap();
            let rec = ul_factorize_exact(&chain, &y0, &q(1, 1), 60).unwrap();
            assert_eq!(closed.upper.y[..], rec.upper.y[..61]);
            assert_eq!(closed.lower.s[..], rec.lower.s[..61]);
        }
        let closed = constant_lu_closed_form::<Rational>(&p, 60, ()).unwrap();
        let rec = lu_factorize_exact(&chain, 60).unwrap();
        assert_eq!(closed.upper.x[..], rec.upper.x[..61]);
        assert_eq!(closed.lower.r[..], rec.lower.r[..61]);
        assert_eq!(closed.upper.x[0], q(3, 10));
        assert_eq!(closed.upper.x[1], q(7, 18));
        let half = constant_lu_closed_form::<f64>(&ConstantChainParams::quarter(0.5), 20, ()).unwrap();
        assert!(half.upper.x.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn case_b_exact() {
        let (a, c) = (1.0 / 9.0, 4.0 / 9.0);
        let a0 = q(1, 5);
        let t = crate::tridiag::ChainTable {
            a: std::iter::once(a0.clone()).chain((1..=61).map(|_| q(1, 9))).collect(),
            b: std::iter::once(q(4, 5)).chain((1..=61).map(|_| q(4, 9))).collect(),
            c: std::iter::once(q(0, 1)).chain((1..=61).map(|_| q(4, 9))).collect(),
        };
        for y0 in [q(0, 1), q(1, 5), q(2, 5)] {
            let closed = constant_case_b_ul(&a0, &y0, 60);
            let rec = crate::factorization::ul_factorize_table(&t, y0.clone(), q(1, 1), q(0, 1)).unwrap();
            assert_eq!(closed.upper.y[..], rec.upper.y[..61]);
            assert_eq!(closed.lower.s[..], rec.lower.s[..61]);
        }
        assert!((periodic_F(a, c).unwrap() - 1.0 / 3.0).abs() < 1e-7);
    }

    #[test]
    fn jacobi_exact() {
        for (al, be) in [(1.0, 0.0), (2.0, 1.0), (3.0, 2.0), (0.0, 0.0), (0.0, 2.0)] {
            let chain = BirthDeathChain::jacobi(al, be);
            for h0 in [0.0, 0.25, 0.5, 1.0] {
                let p = JacobiParams::new(al, be).with_h0(h0);
                let (closed, aux) = jacobi_ul_closed_form::<Rational>(&p, 30, ()).unwrap();
                let rec = ul_factorize_exact(&chain, &closed.y0, &q(1, 1), 30).unwrap();
                assert_eq!(closed.upper.x[..], rec.upper.x[..31], "{al} {be} {h0}");
                assert_eq!(closed.lower.r[..], rec.lower.r[..31], "{al} {be} {h0}");
                if let Some(aux) = aux {
                    for n in 0..=30 {
                        assert_eq!(aux.x(&p, n, &closed.y0), closed.upper.x[n]);
                        if n >= 1 {
                            assert_eq!(aux.r(&p, n, &closed.y0), closed.lower.r[n]);
                        }
                    }
                }
            }
            let lu = jacobi_lu_closed_form::<Rational>(&JacobiParams::new(al, be), 30, ()).unwrap();
            assert_eq!(lu, {
                let mut r = lu_factorize_exact(&chain, 30).unwrap();
                r.upper.x.truncate(31);
                r.upper.y.truncate(31);
                r.lower.s.truncate(31);
                r.lower.r.truncate(31);
                r
            });
            let prod = multiply_lu(&lu.lower, &lu.upper, 29).unwrap();
            assert_eq!(prod.len(), 30);
        }
    }

    #[test]
    fn aux_recurrences() {
        let p = JacobiParams::new(2.0, 1.0);
        let aux = JacobiAuxSequences::<Rational>::new(&p, 20, ()).unwrap();
        assert_eq!(aux.delta[0], q(-1, 1));
        assert_eq!(aux.nu[0], q(0, 1));
        for n in 1..=20i64 {
            let k = n as usize;
            let w = Rational::from(2 * n + 3);
            let m = Rational::from((n + 1) * (n + 3));
            assert_eq!(aux.epsilon[k], w.clone() * aux.gamma[k - 1].clone() - m.clone() * aux.epsilon[k - 1].clone());
            assert_eq!(aux.nu[k], w * aux.delta[k - 1].clone() - m * aux.nu[k - 1].clone());
        }
    }

    #[test]
    fn printed_examples() {
        let (f, _) = jacobi_ul_closed_form::<Rational>(&JacobiParams::new(0.0, 0.0).with_h0(1.0), 20, ()).unwrap();
        for n in 1..=20i64 {
            assert_eq!(f.upper.x[n as usize], q(n + 1, 2 * n + 1));
            assert_eq!(f.lower.s[n as usize], q(1, 2));
        }
        let (f, _) = jacobi_ul_closed_form::<Rational>(&JacobiParams::new(1.0, 0.0).with_h0(0.5), 20, ()).unwrap();
        for n in 0..=20i64 {
            let k = n as usize;
            assert_eq!(f.upper.x[k], q(1 + (n + 1) * (n + 2), 2 * (1 + (n + 1) * (n + 1))));
            if n >= 1 {
                assert_eq!(f.lower.s[k], q((n + 1) * (n * n + 1), (2 * n + 1) * (1 + n * (n + 1))));
            }
        }
    }

    #[test]
    fn spec_round_trip() {
        let m: ModelSpec = serde_json::from_str(r#"{"family":"jacobi","alpha":1,"beta":0,"h0":0.5}"#).unwrap();
        assert_eq!(m.y0(), Some(0.25));
        let m: ModelSpec = serde_json::from_str(r#"{"family":"constant","a0":0.2,"a":0.25,"b":0.5,"c":0.25,"k":3}"#).unwrap();
        assert!((m.y0().unwrap() - 0.4).abs() < 1e-15);
        let back: ModelSpec = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn conjecture_report_runs() {
        let fit = conjecture_fit_report(&ConstantChainParams::quarter(0.3), 12).unwrap();
        // On the quarter chain the shape is a theorem: p/r = 1/2 for every n.
        assert!(fit.rows.iter().all(|r| (r.p - 0.5).abs() < 1e-6), "{fit:?}");
        let fit = conjecture_fit_report(&ConstantChainParams::new(0.1, 0.3, 0.5, 0.2), 8).unwrap();
        assert_eq!(fit.rows.len(), 8);
    }
}
