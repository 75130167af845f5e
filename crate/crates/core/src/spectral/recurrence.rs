//! Three-term recurrences recovered from measures, and Karlin-McGregor integrals.

use rug::Float;
use serde::{Deserialize, Serialize};

use super::{SpectralError, SpectralMeasure, DEFAULT_NODES};
use crate::tridiag::{BirthDeathChain, TridiagError};

/// `x Q_n = a_n Q_{n+1} + b_n Q_n + c_n Q_{n-1}` with `Q_n(1) = 1`, rows `0..=depth`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrthoRecurrence {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    /// `||Q_n||^2` in the measure; `1/pi_n` for a chain.
    pub norms: Vec<f64>,
}

impl OrthoRecurrence {
    /// Coefficients and inverse invariant measure of `chain`, rows `0..=depth`.
    pub fn from_chain(chain: &BirthDeathChain, depth: usize) -> Result<Self, TridiagError> {
        let t = chain.realize::<f64>(depth, ())?;
        let mut norms = vec![1.0];
        for n in 1..=depth {
            norms.push(norms[n - 1] * t.c[n] / t.a[n - 1]);
        }
        Ok(OrthoRecurrence { a: t.a, b: t.b, c: t.c, norms })
    }

    pub fn depth(&self) -> usize {
        self.a.len() - 1
    }

    /// `Q_0(x), ..., Q_upto(x)`; needs `upto <= depth + 1`.
    pub fn eval(&self, x: f64, upto: usize) -> Vec<f64> {
        let mut q = vec![1.0];
        for n in 0..upto {
            let prev = if n == 0 { 0.0 } else { q[n - 1] };
            q.push(((x - self.b[n]) * q[n] - self.c[n] * prev) / self.a[n]);
        }
        q
    }

    pub fn to_chain(&self) -> Result<BirthDeathChain, TridiagError> {
        BirthDeathChain::from_arrays(self.a.clone(), self.b.clone(), self.c.clone())
    }
}

/// Rows `0..=depth` of the recurrence orthogonal for `m`, by the Stieltjes
/// procedure on a Gauss discretization carried out at `precision_bits`.
pub fn recurrence_from_measure(
    m: &SpectralMeasure,
    depth: usize,
    precision_bits: u32,
) -> Result<OrthoRecurrence, SpectralError> {
    let nodes = DEFAULT_NODES.max(2 * depth + 8);
    let points = m.support_points(nodes);
    if points < depth + 1 {
        return Err(SpectralError::Degenerate { points, needed: depth + 1 });
    }
    let prec = precision_bits.max(64);
    let d = m.discretize(nodes, prec);
    let zero = Float::with_val(prec, 0);
    let mut pi_prev = vec![zero.clone(); d.x.len()];
    let mut pi_cur = vec![Float::with_val(prec, 1); d.x.len()];
    let (mut at1_prev, mut at1) = (zero.clone(), Float::with_val(prec, 1));
    let mut norm_prev = Float::with_val(prec, 1);
    let mut out = OrthoRecurrence { a: vec![], b: vec![], c: vec![], norms: vec![] };
    // Cancellation floor: a norm this small relative to the first is noise.
    let floor = Float::with_val(prec, Float::i_exp(1, -(prec as i32) + 16));
    let mut norm0 = None;
    for n in 0..=depth {
        let mut norm = zero.clone();
        let mut first = zero.clone();
        for ((x, w), p) in d.x.iter().zip(&d.w).zip(&pi_cur) {
            let wp2 = w.clone() * p.clone() * p.clone();
            first += x.clone() * wp2.clone();
            norm += wp2;
        }
        let n0 = norm0.get_or_insert_with(|| norm.clone()).clone();
        if !(norm > 0) || norm.clone() / n0 < floor {
            return Err(SpectralError::Precision { degree: n });
        }
        let alpha = first / norm.clone();
        let beta = if n == 0 { zero.clone() } else { norm.clone() / norm_prev.clone() };
        if !(at1 > 0) {
            return Err(SpectralError::Domain(format!("monic polynomial of degree {n} is not positive at 1")));
        }
        let at1_next = (Float::with_val(prec, 1) - alpha.clone()) * at1.clone() - beta.clone() * at1_prev.clone();
        out.a.push((at1_next.clone() / at1.clone()).to_f64());
        out.b.push(alpha.to_f64());
        out.c.push(if n == 0 { 0.0 } else { (beta.clone() * at1_prev.clone() / at1.clone()).to_f64() });
        out.norms.push((norm.clone() / (at1.clone() * at1.clone())).to_f64());

        let next: Vec<Float> = d
            .x
            .iter()
            .zip(&pi_cur)
            .zip(&pi_prev)
            .map(|((x, p), q)| (x.clone() - alpha.clone()) * p.clone() - beta.clone() * q.clone())
            .collect();
        pi_prev = std::mem::replace(&mut pi_cur, next);
        at1_prev = std::mem::replace(&mut at1, at1_next);
        norm_prev = norm;
    }
    Ok(out)
}

/// Evaluates `P^n_{ij} = int x^n Q_i Q_j dm / ||Q_j||^2` against a fixed discretization.
pub struct KmEvaluator {
    rec: OrthoRecurrence,
    w: Vec<f64>,
    x: Vec<f64>,
    /// `q[k][i] = Q_i(x_k)`.
    q: Vec<Vec<f64>>,
}

impl KmEvaluator {
    /// Fails with `Inconsistent` if the one-step entries `P_{00}` and `P_{01}` are off by more than `1e-6`.
    pub fn new(rec: &OrthoRecurrence, m: &SpectralMeasure) -> Result<Self, SpectralError> {
        let (x, w) = m.discretize(DEFAULT_NODES, 128).to_f64();
        let q = x.iter().map(|&xi| rec.eval(xi, rec.depth())).collect();
        let ev = KmEvaluator { rec: rec.clone(), w, x, q };
        if rec.depth() >= 1 {
            for (j, want) in [(0, rec.b[0]), (1, rec.a[0])] {
                let got = ev.transition(0, j, 1)?;
                if (got - want).abs() > 1e-6 {
                    return Err(SpectralError::Inconsistent(format!("P_0{j} = {got} from the measure, {want} from the recurrence")));
                }
            }
        }
        Ok(ev)
    }

    pub fn transition(&self, i: usize, j: usize, n: u32) -> Result<f64, SpectralError> {
        let depth = self.rec.depth();
        if i > depth || j > depth {
            return Err(SpectralError::InvalidParameter(format!("index beyond recurrence depth {depth}")));
        }
        let s: f64 = self
            .x
            .iter()
            .zip(&self.w)
            .zip(&self.q)
            .map(|((&x, &w), q)| w * x.powi(n as i32) * q[i] * q[j])
            .sum();
        Ok(s / self.rec.norms[j])
    }
}

/// One-off [`KmEvaluator::transition`].
pub fn km_transition(rec: &OrthoRecurrence, m: &SpectralMeasure, i: usize, j: usize, n: u32) -> Result<f64, SpectralError> {
    KmEvaluator::new(rec, m)?.transition(i, j, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{constant_chain_measure, geronimus, jacobi_weight, Atom};
    use crate::tridiag::truncate_dense;

    #[test]
    fn jacobi_recovered() {
        for (al, be) in [(1.0, 0.0), (2.5, 1.0), (0.0, 0.0), (-0.5, 0.5)] {
            let rec = recurrence_from_measure(&jacobi_weight(al, be).unwrap(), 20, 256).unwrap();
            let chain = BirthDeathChain::jacobi(al, be);
            for n in 0..=20 {
                let (a, b, c) = chain.coeffs(n).unwrap();
                assert!((rec.a[n] - a).abs() < 1e-12 && (rec.b[n] - b).abs() < 1e-12 && (rec.c[n] - c).abs() < 1e-12, "{al} {be} {n}");
            }
        }
    }

    #[test]
    fn two_points() {
        let s = 0.2;
        let m = SpectralMeasure {
            density: None,
            atoms: vec![Atom { location: 1.0, mass: 0.5 }, Atom { location: s, mass: 0.5 }],
            degenerate: false,
        };
        let rec = recurrence_from_measure(&m, 1, 256).unwrap();
        let h = (1.0 - s) / 2.0;
        assert_eq!(rec.a, vec![h, 0.0]);
        assert_eq!(rec.b, vec![(1.0 + s) / 2.0; 2]);
        assert_eq!(rec.c, vec![0.0, h]);
        assert!(matches!(recurrence_from_measure(&m, 2, 256), Err(SpectralError::Degenerate { .. })));
    }

    #[test]
    fn km_against_powers() {
        let chain = BirthDeathChain::jacobi(1.0, 0.0);
        let rec = OrthoRecurrence::from_chain(&chain, 20).unwrap();
        let ev = KmEvaluator::new(&rec, &jacobi_weight(1.0, 0.0).unwrap()).unwrap();
        let p = truncate_dense(&chain, 60).unwrap();
        let p5 = p.pow(5);
        assert!((ev.transition(0, 0, 5).unwrap() - p5[(0, 0)]).abs() < 1e-10);
        assert!((ev.transition(2, 3, 5).unwrap() - p5[(2, 3)]).abs() < 1e-10);
        assert!((ev.transition(1, 1, 0).unwrap() - 1.0).abs() < 1e-12);
        assert!((ev.transition(0, 1, 1).unwrap() - chain.a(0)).abs() < 1e-12);
        let wrong = jacobi_weight(2.0, 0.0).unwrap();
        assert!(matches!(KmEvaluator::new(&rec, &wrong), Err(SpectralError::Inconsistent(_))));
    }

    #[test]
    fn geronimus_with_atom_recovers() {
        let q = constant_chain_measure(0.3, 0.25, 0.5, 0.25).unwrap();
        let g = geronimus(&q, 0.2).unwrap();
        let rec = recurrence_from_measure(&g, 10, 256).unwrap();
        for n in 0..=10 {
            assert!((rec.a[n] + rec.b[n] + rec.c[n] - 1.0).abs() < 1e-12);
        }
    }
}
