//! Gauss-Jacobi rules on `[0, 1]` for the weight `t^p (1-t)^q`, at any precision.
//!
//! Nodes start from a double precision Golub-Welsch solve and are then
//! polished by Newton's method on the monic recurrence in `Float`.

use rug::Float;

use crate::tridiag::jacobi_coeffs;

#[derive(Clone, Debug)]
pub struct GaussRule {
    pub nodes: Vec<Float>,
    /// Includes the total mass `B(p+1, q+1)` of the weight.
    pub weights: Vec<Float>,
}

/// Monic recurrence `t pi_k = pi_{k+1} + alpha_k pi_k + beta_k pi_{k-1}` for `t^p (1-t)^q`.
fn monic_jacobi(p: f64, q: f64, n: usize, prec: u32) -> (Vec<Float>, Vec<Float>) {
    let fp = Float::with_val(prec, p);
    let fq = Float::with_val(prec, q);
    let mut alpha = Vec::with_capacity(n);
    let mut beta = Vec::with_capacity(n);
    let mut a_prev = Float::new(prec);
    for k in 0..n {
        let (a, b, c) = jacobi_coeffs(&fp, &fq, k);
        alpha.push(b);
        beta.push(if k == 0 { Float::new(prec) } else { a_prev.clone() * c });
        a_prev = a;
    }
    (alpha, beta)
}

/// `B(p+1, q+1)` at precision.
pub fn beta_mass(p: f64, q: f64, prec: u32) -> Float {
    let g = |v: f64| Float::with_val(prec, v).gamma();
    g(p + 1.0) * g(q + 1.0) / g(p + q + 2.0)
}

/// `n`-point rule exact for polynomials of degree `2n - 1` against `t^p (1-t)^q dt`.
///
/// Panics unless `p, q > -1` and `n >= 1`.
pub fn gauss_jacobi01(p: f64, q: f64, n: usize, prec: u32) -> GaussRule {
    assert!(p > -1.0 && q > -1.0 && n >= 1, "invalid Gauss-Jacobi request p={p} q={q} n={n}");
    let (alpha, beta) = monic_jacobi(p, q, n, prec);
    let diag = nalgebra::DVector::from_iterator(n, alpha.iter().map(|v| v.to_f64()));
    let mut jm = nalgebra::DMatrix::from_diagonal(&diag);
    for k in 1..n {
        let off = beta[k].to_f64().sqrt();
        jm[(k, k - 1)] = off;
        jm[(k - 1, k)] = off;
    }
    let mut guesses: Vec<f64> = jm.symmetric_eigenvalues().iter().copied().collect();
    guesses.sort_by(|a, b| a.total_cmp(b));

    let eval = |x: &Float| -> (Float, Float) {
        let mut p0 = Float::with_val(prec, 0);
        let mut p1 = Float::with_val(prec, 1);
        let mut d0 = Float::with_val(prec, 0);
        let mut d1 = Float::with_val(prec, 0);
        for k in 0..n {
            let xa = x.clone() - alpha[k].clone();
            let p2 = xa.clone() * p1.clone() - beta[k].clone() * p0.clone();
            let d2 = p1.clone() + xa * d1.clone() - beta[k].clone() * d0.clone();
            p0 = std::mem::replace(&mut p1, p2);
            d0 = std::mem::replace(&mut d1, d2);
        }
        (p1, d1)
    };

    let eps = Float::with_val(prec, Float::i_exp(1, -(prec as i32) + 4));
    let mu0 = beta_mass(p, q, prec);
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for g in guesses {
        let mut x = Float::with_val(prec, g);
        for _ in 0..12 {
            let (v, d) = eval(&x);
            let step = v / d;
            x -= &step;
            if step.abs() < eps {
                break;
            }
        }
        // 1/w = sum_k pi_k(x)^2 / (mu0 beta_1 ... beta_k)
        let mut p0 = Float::with_val(prec, 0);
        let mut p1 = Float::with_val(prec, 1);
        let mut h = Float::with_val(prec, 1);
        let mut sum = Float::with_val(prec, 1);
        for k in 0..n - 1 {
            let p2 = (x.clone() - alpha[k].clone()) * p1.clone() - beta[k].clone() * p0.clone();
            p0 = std::mem::replace(&mut p1, p2);
            h *= &beta[k + 1];
            sum += p1.clone() * p1.clone() / h.clone();
        }
        weights.push(mu0.clone() / sum);
        nodes.push(x);
    }
    GaussRule { nodes, weights }
}

impl GaussRule {
    pub fn integrate<F: Fn(&Float) -> Float>(&self, f: F) -> Float {
        let prec = self.weights[0].prec();
        let mut acc = Float::with_val(prec, 0);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += f(x) * w.clone();
        }
        acc
    }
}
