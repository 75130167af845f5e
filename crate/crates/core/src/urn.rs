//! Seeded simulation of chains, of factor compositions, and of the two-experiment urn models.
//!
//! Randomness comes from ChaCha8 keyed by `(seed, replica, step)`: the seed
//! selects the key, the replica selects the stream, and every step starts at
//! word offset `64 * step` of that stream. Reports are therefore reproducible
//! bit for bit and independent of how replicas are scheduled on threads.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rug::Rational;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::factorization::{darboux_ul, ULFactors};
use crate::models::{constant_k_closed_form, jacobi_ul_closed_form, ConstantChainParams, JacobiParams};
use crate::tridiag::{jacobi_coeffs, BirthDeathChain, LowerBidiagonal, UpperBidiagonal};

/// Words of the ChaCha stream reserved for each step.
const WORDS_PER_STEP: u128 = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("experiment {experiment} at state {state} needs {count} balls")]
    NegativeBalls { experiment: u8, state: usize, count: i64 },
    #[error("invalid urn parameters: {0}")]
    Invalid(String),
    #[error("chain coefficients unavailable at state {0}")]
    OutOfRange(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    /// Experiment 1 then Experiment 2: the chain itself.
    Ul,
    /// Experiment 2 then Experiment 1: the Darboux transform.
    Lu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum UrnFamily {
    /// `a = c = 1/4`, `y0 = 1 - k a0` with `a0 = a0_num/a0_den`.
    Constant { k: u64, a0_num: u64, a0_den: u64 },
    /// Jacobi at `y0 = alpha/(alpha+beta+1)`, integer parameters.
    Jacobi { alpha: u64, beta: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UrnStepSpec {
    pub family: UrnFamily,
    pub order: Order,
}

/// One draw: the urn's contents and which colour came out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Draw {
    pub experiment: u8,
    pub state_before: usize,
    pub blue: u64,
    pub red: u64,
    pub drew_blue: bool,
    pub state_after: usize,
}

impl UrnStepSpec {
    pub fn new(family: UrnFamily, order: Order) -> Result<Self, SpecError> {
        match family {
            UrnFamily::Constant { k, a0_num, a0_den } => {
                if k < 3 {
                    return Err(SpecError::Invalid("the constant urn needs k >= 3".into()));
                }
                if a0_den == 0 || a0_num == 0 || k * a0_num > a0_den {
                    return Err(SpecError::Invalid(format!("need 0 < a0 <= 1/k, got {a0_num}/{a0_den} with k = {k}")));
                }
            }
            UrnFamily::Jacobi { .. } => {}
        }
        Ok(UrnStepSpec { family, order })
    }

    /// `(blue, red)` in the urn at the Experiment 1 draw. For the constant family at
    /// state 0 this is the coin: `k a0_num` heads against `a0_den - k a0_num` tails.
    pub fn exp1_counts(&self, n: usize) -> Result<(u64, u64), SpecError> {
        let ni = n as i64;
        let (blue, red) = match self.family {
            UrnFamily::Constant { k, a0_num, a0_den } => {
                let k = k as i64;
                if n == 0 {
                    let heads = k * a0_num as i64;
                    (heads, a0_den as i64 - heads)
                } else {
                    let added = k + ni * (2 * k - 5);
                    check(added, 1, n)?;
                    (ni + added, 2 + (2 * ni - 1) * (k - 2))
                }
            }
            UrnFamily::Jacobi { alpha, beta } => (ni + beta as i64 + 1, ni + alpha as i64),
        };
        Ok((check(blue, 1, n)?, check(red, 1, n)?))
    }

    /// `(blue, red)` at the Experiment 2 draw; `None` for an empty urn.
    pub fn exp2_counts(&self, n: usize) -> Result<Option<(u64, u64)>, SpecError> {
        let ni = n as i64;
        let (blue, red) = match self.family {
            UrnFamily::Constant { k, .. } => {
                if n == 0 {
                    return Ok(None);
                }
                let k = k as i64;
                let added = 1 + ni * (k - 3);
                check(added, 2, n)?;
                (ni + added, 1 + (ni - 1) * (k - 2))
            }
            UrnFamily::Jacobi { alpha, beta } => (ni, ni + (alpha + beta) as i64),
        };
        let (blue, red) = (check(blue, 2, n)?, check(red, 2, n)?);
        Ok((blue + red > 0).then_some((blue, red)))
    }

    fn experiment<R: Rng>(&self, which: u8, n: usize, rng: &mut R, trace: &mut Vec<Draw>) -> Result<usize, SpecError> {
        let counts = if which == 1 { Some(self.exp1_counts(n)?) } else { self.exp2_counts(n)? };
        let Some((blue, red)) = counts else { return Ok(n) };
        let drew_blue = rng.gen_range(0..blue + red) < blue;
        let after = match (which, drew_blue) {
            (1, true) => n + 1,
            (2, true) => n - 1,
            _ => n,
        };
        trace.push(Draw { experiment: which, state_before: n, blue, red, drew_blue, state_after: after });
        Ok(after)
    }
}

fn check(count: i64, experiment: u8, state: usize) -> Result<u64, SpecError> {
    u64::try_from(count).map_err(|_| SpecError::NegativeBalls { experiment, state, count })
}

/// One macro-step of the composed urn model by ball counting.
pub fn urn_step<R: Rng>(spec: &UrnStepSpec, state: usize, rng: &mut R) -> Result<(usize, Vec<Draw>), SpecError> {
    let mut trace = Vec::with_capacity(2);
    let order = match spec.order {
        Order::Ul => [1, 2],
        Order::Lu => [2, 1],
    };
    let mid = spec.experiment(order[0], state, rng, &mut trace)?;
    let end = spec.experiment(order[1], mid, rng, &mut trace)?;
    Ok((end, trace))
}

fn draw_prob(counts: Option<(u64, u64)>) -> Rational {
    match counts {
        Some((b, r)) => Rational::from((b, b + r)),
        None => Rational::new(),
    }
}

/// `(down, stay, up)` probabilities of one macro-step, by enumerating both draws.
pub fn urn_row_exact(spec: &UrnStepSpec, n: usize) -> Result<[Rational; 3], SpecError> {
    let one = Rational::from(1);
    let up1 = |m: usize| spec.exp1_counts(m).map(|c| draw_prob(Some(c)));
    let down2 = |m: usize| spec.exp2_counts(m).map(draw_prob);
    let mut row = [Rational::new(), Rational::new(), Rational::new()];
    match spec.order {
        Order::Ul => {
            let x = up1(n)?;
            let r_stay = down2(n)?;
            let r_up = down2(n + 1)?;
            row[2] = x.clone() * (one.clone() - r_up.clone());
            row[1] = x.clone() * r_up + (one.clone() - x.clone()) * (one.clone() - r_stay.clone());
            row[0] = (one - x) * r_stay;
        }
        Order::Lu => {
            let r = down2(n)?;
            let x_stay = up1(n)?;
            let x_down = if n > 0 { up1(n - 1)? } else { Rational::new() };
            row[2] = (one.clone() - r.clone()) * x_stay.clone();
            row[1] = (one.clone() - r.clone()) * (one.clone() - x_stay) + r.clone() * x_down.clone();
            row[0] = r * (one - x_down);
        }
    }
    Ok(row)
}

/// Closed-form UL factors the urn family realizes, exact, indices `0..=depth`.
pub fn urn_factors_exact(spec: &UrnStepSpec, depth: usize) -> Result<ULFactors<Rational>, SpecError> {
    match spec.family {
        UrnFamily::Constant { k, a0_num, a0_den } => {
            let p = ConstantChainParams::quarter(a0_num as f64 / a0_den as f64).with_k(k as u32);
            let mut f = constant_k_closed_form::<Rational>(&p, depth, ()).map_err(|e| SpecError::Invalid(e.to_string()))?;
            // Only index 0 depends on a0; set it from the exact fraction.
            let y0 = Rational::from(1) - Rational::from((k * a0_num, a0_den));
            f.upper.x[0] = Rational::from(1) - y0.clone();
            f.upper.y[0] = y0.clone();
            f.y0 = y0;
            Ok(f)
        }
        UrnFamily::Jacobi { alpha, beta } => {
            let p = JacobiParams::new(alpha as f64, beta as f64).with_h0(1.0);
            jacobi_ul_closed_form::<Rational>(&p, depth, ()).map(|(f, _)| f).map_err(|e| SpecError::Invalid(e.to_string()))
        }
    }
}

/// `(down, stay, up)` of the chain the urn targets: the original chain for `Ul`,
/// the Darboux transform of its closed-form factors for `Lu`.
pub fn analytic_row_exact(spec: &UrnStepSpec, n: usize) -> Result<[Rational; 3], SpecError> {
    match spec.order {
        Order::Ul => Ok(match spec.family {
            UrnFamily::Constant { a0_num, a0_den, .. } => {
                if n == 0 {
                    let a0 = Rational::from((a0_num, a0_den));
                    [Rational::new(), Rational::from(1) - a0.clone(), a0]
                } else {
                    [Rational::from((1, 4)), Rational::from((1, 2)), Rational::from((1, 4))]
                }
            }
            UrnFamily::Jacobi { alpha, beta } => {
                let (a, b, c) = jacobi_coeffs(&Rational::from(alpha), &Rational::from(beta), n);
                [if n == 0 { Rational::new() } else { c }, b, a]
            }
        }),
        Order::Lu => {
            let f = urn_factors_exact(spec, n + 1)?;
            let t = darboux_ul(&f, n).map_err(|e| SpecError::Invalid(e.to_string()))?;
            Ok([t.c[n].clone(), t.b[n].clone(), t.a[n].clone()])
        }
    }
}

/// `f64` chain the urn realizes on states `0..=depth`, for comparisons.
pub fn target_chain(spec: &UrnStepSpec, depth: usize) -> Result<BirthDeathChain, SpecError> {
    let f = urn_factors_exact(spec, depth + 1)?.to_f64();
    let t = match spec.order {
        Order::Ul => crate::tridiag::multiply_ul(&f.upper, &f.lower, depth),
        Order::Lu => darboux_ul(&f, depth),
    }
    .map_err(|e| SpecError::Invalid(e.to_string()))?;
    Ok(t.into_chain(format!("urn target {:?}", spec)))
}

/// Transition counts aggregated over replicas.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub seed: u64,
    pub steps: u64,
    pub replicas: u64,
    pub start: usize,
    /// `from -> to -> count`.
    pub counts: BTreeMap<usize, BTreeMap<usize, u64>>,
    /// Departures from each state; equals the row sums of `counts`.
    pub visits: BTreeMap<usize, u64>,
    pub empirical: BTreeMap<usize, BTreeMap<usize, f64>>,
}

impl SimulationReport {
    fn from_rows(seed: u64, steps: u64, replicas: u64, start: usize, rows: &[[u64; 3]]) -> Self {
        let mut counts = BTreeMap::new();
        let mut visits = BTreeMap::new();
        let mut empirical = BTreeMap::new();
        for (n, row) in rows.iter().enumerate() {
            let total: u64 = row.iter().sum();
            if total == 0 {
                continue;
            }
            let mut c = BTreeMap::new();
            let mut e = BTreeMap::new();
            for (d, &k) in row.iter().enumerate() {
                if k > 0 {
                    let to = n + d - 1;
                    c.insert(to, k);
                    e.insert(to, k as f64 / total as f64);
                }
            }
            counts.insert(n, c);
            visits.insert(n, total);
            empirical.insert(n, e);
        }
        SimulationReport { seed, steps, replicas, start, counts, visits, empirical }
    }

    pub fn empty(seed: u64, start: usize) -> Self {
        Self::from_rows(seed, 0, 0, start, &[])
    }

    /// `from,to,count,frequency` rows.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["from", "to", "count", "frequency"])?;
        for (from, row) in &self.counts {
            for (to, k) in row {
                let f = self.empirical[from][to];
                w.write_record([from.to_string(), to.to_string(), k.to_string(), f.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn stream(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

/// Runs `replicas` independent walks of `steps` steps from `start`, in parallel.
fn run_replicas<F>(start: usize, steps: u64, replicas: u64, seed: u64, step: F) -> Result<SimulationReport, SpecError>
where
    F: Fn(usize, &mut ChaCha8Rng) -> Result<usize, SpecError> + Sync,
{
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(replicas.max(1) as usize);
    let per_replica = |r: u64| -> Result<Vec<[u64; 3]>, SpecError> {
        let mut rng = stream(seed, r);
        let mut rows: Vec<[u64; 3]> = Vec::new();
        let mut state = start;
        for t in 0..steps {
            rng.set_word_pos(WORDS_PER_STEP * t as u128);
            let next = step(state, &mut rng)?;
            if rows.len() <= state {
                rows.resize(state + 1, [0; 3]);
            }
            let d = (next as i64 - state as i64 + 1) as usize;
            rows[state][d] += 1;
            state = next;
        }
        Ok(rows)
    };
    let partials: Vec<Result<Vec<[u64; 3]>, SpecError>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads as u64)
            .map(|th| {
                let per_replica = &per_replica;
                s.spawn(move || {
                    let mut acc: Result<Vec<[u64; 3]>, SpecError> = Ok(Vec::new());
                    for r in (th..replicas).step_by(threads) {
                        let rows = per_replica(r)?;
                        if let Ok(a) = acc.as_mut() {
                            merge(a, &rows);
                        }
                    }
                    acc
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
    });
    let mut total = Vec::new();
    for p in partials {
        merge(&mut total, &p?);
    }
    Ok(SimulationReport::from_rows(seed, steps, replicas, start, &total))
}

fn merge(acc: &mut Vec<[u64; 3]>, rows: &[[u64; 3]]) {
    if acc.len() < rows.len() {
        acc.resize(rows.len(), [0; 3]);
    }
    for (a, r) in acc.iter_mut().zip(rows) {
        for d in 0..3 {
            a[d] += r[d];
        }
    }
}

fn birth_death_move(u: f64, n: usize, down: f64, up: f64) -> usize {
    if u < up {
        n + 1
    } else if u < up + down && n > 0 {
        n - 1
    } else {
        n
    }
}

/// Simulates `chain` directly from its transition probabilities.
pub fn simulate_chain(chain: &BirthDeathChain, start: usize, steps: u64, replicas: u64, seed: u64) -> Result<SimulationReport, SpecError> {
    run_replicas(start, steps, replicas, seed, |n, rng| {
        let (a, _, c) = chain.coeffs(n).ok_or(SpecError::OutOfRange(n))?;
        Ok(birth_death_move(rng.gen::<f64>(), n, c, a))
    })
}

/// Simulates the product of two factors as two sub-steps per step.
///
/// `Ul` applies the pure-birth factor first (the chain `P_U P_L`), `Lu` the
/// pure-death factor first (the Darboux chain `P_L P_U`).
pub fn simulate_composed(
    upper: &UpperBidiagonal<f64>,
    lower: &LowerBidiagonal<f64>,
    order: Order,
    start: usize,
    steps: u64,
    replicas: u64,
    seed: u64,
) -> Result<SimulationReport, SpecError> {
    let birth = |n: usize, u: f64| -> Result<usize, SpecError> {
        let x = *upper.x.get(n).ok_or(SpecError::OutOfRange(n))?;
        Ok(if u < x { n + 1 } else { n })
    };
    let death = |n: usize, u: f64| -> Result<usize, SpecError> {
        if n == 0 {
            return Ok(0);
        }
        let r = *lower.r.get(n).ok_or(SpecError::OutOfRange(n))?;
        Ok(if u < r { n - 1 } else { n })
    };
    run_replicas(start, steps, replicas, seed, |n, rng| match order {
        Order::Ul => {
            let m = birth(n, rng.gen())?;
            death(m, rng.gen())
        }
        Order::Lu => {
            let m = death(n, rng.gen())?;
            birth(m, rng.gen())
        }
    })
}

/// Simulates the urn model by ball counting.
pub fn simulate_urn(spec: &UrnStepSpec, start: usize, steps: u64, replicas: u64, seed: u64) -> Result<SimulationReport, SpecError> {
    run_replicas(start, steps, replicas, seed, |n, rng| urn_step(spec, n, rng).map(|(m, _)| m))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StateTest {
    pub state: usize,
    pub visits: u64,
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub max_abs_deviation: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub alpha: f64,
    /// Per-state threshold `alpha / (number of tested states)`.
    pub threshold: f64,
    pub states: Vec<StateTest>,
    pub pooled_statistic: f64,
    pub pooled_dof: usize,
    pub pooled_p_value: f64,
    pub max_abs_deviation: f64,
    pub pass: bool,
}

impl Comparison {
    pub fn verdict(&self, state: usize) -> Option<Verdict> {
        self.states.iter().find(|s| s.state == state).map(|s| s.verdict)
    }
}

/// Smallest expected count per category for a state to be tested.
pub const MIN_EXPECTED: f64 = 5.0;

/// Pearson chi-square per from-state against the analytic rows of `chain`.
///
/// A state passes when its p-value exceeds `alpha / m`, `m` being the number of
/// states tested; the pooled statistic over all tested states is reported as well.
/// States whose smallest expected count is below [`MIN_EXPECTED`] are skipped.
pub fn compare_empirical(report: &SimulationReport, chain: &BirthDeathChain, alpha: f64) -> Comparison {
    let mut states: Vec<usize> = report.visits.keys().copied().collect();
    if !states.contains(&report.start) {
        states.push(report.start);
        states.sort_unstable();
    }
    let mut tests = Vec::new();
    for n in states {
        let visits = report.visits.get(&n).copied().unwrap_or(0);
        let Some((a, b, c)) = chain.coeffs(n) else {
            tests.push(StateTest { state: n, visits, statistic: f64::NAN, dof: 0, p_value: f64::NAN, max_abs_deviation: f64::NAN, verdict: Verdict::Skipped });
            continue;
        };
        let row = report.counts.get(&n);
        let observed = |to: usize| row.and_then(|r| r.get(&to)).copied().unwrap_or(0) as f64;
        let cats: Vec<(f64, f64)> = [(n.wrapping_sub(1), c), (n, b), (n + 1, a)]
            .into_iter()
            .filter(|&(to, _)| to != usize::MAX)
            .map(|(to, p)| (observed(to), p))
            .collect();
        let v = visits as f64;
        let mut dev: f64 = 0.0;
        let mut stat = 0.0;
        let mut impossible = false;
        let mut dof = 0usize;
        let mut min_expected = f64::INFINITY;
        for &(o, p) in &cats {
            if v > 0.0 {
                dev = dev.max((o / v - p).abs());
            }
            if p <= 0.0 {
                impossible |= o > 0.0;
                continue;
            }
            let e = v * p;
            min_expected = min_expected.min(e);
            stat += (o - e).powi(2) / e;
            dof += 1;
        }
        dof = dof.saturating_sub(1);
        let (verdict, p_value) = if impossible {
            (Verdict::Fail, 0.0)
        } else if visits == 0 || min_expected < MIN_EXPECTED {
            (Verdict::Skipped, f64::NAN)
        } else if dof == 0 {
            (Verdict::Pass, 1.0)
        } else {
            (Verdict::Pass, ChiSquared::new(dof as f64).expect("dof > 0").sf(stat))
        };
        tests.push(StateTest { state: n, visits, statistic: stat, dof, p_value, max_abs_deviation: dev, verdict });
    }
    let tested = tests.iter().filter(|t| t.verdict != Verdict::Skipped).count().max(1);
    let threshold = alpha / tested as f64;
    for t in &mut tests {
        if t.verdict == Verdict::Pass && t.p_value <= threshold {
            t.verdict = Verdict::Fail;
        }
    }
    let counted: Vec<&StateTest> = tests.iter().filter(|t| t.verdict != Verdict::Skipped && t.statistic.is_finite()).collect();
    let pooled_statistic: f64 = counted.iter().map(|t| t.statistic).sum();
    let pooled_dof: usize = counted.iter().map(|t| t.dof).sum();
    let pooled_p_value = if pooled_dof > 0 { ChiSquared::new(pooled_dof as f64).expect("dof > 0").sf(pooled_statistic) } else { 1.0 };
    let max_abs_deviation = tests.iter().map(|t| t.max_abs_deviation).filter(|d| d.is_finite()).fold(0.0, f64::max);
    let pass = tests.iter().all(|t| t.verdict != Verdict::Fail) && pooled_p_value > alpha;
    Comparison { alpha, threshold, states: tests, pooled_statistic, pooled_dof, pooled_p_value, max_abs_deviation, pass }
}
