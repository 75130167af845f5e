use bdchain::factorization::{darboux_lu, darboux_ul, lu_factorize, ul_factorize, ul_factorize_exact, FactorOptions};
use bdchain::scalar::decimal_rational;
use bdchain::spectral::{geronimus, jacobi_weight, moments};
use bdchain::tridiag::{multiply_ul, validate_table, BirthDeathChain, ChainTable};
use bdchain::urn::{analytic_row_exact, simulate_chain, urn_row_exact, Order, UrnFamily, UrnStepSpec};
use proptest::prelude::*;
use rug::Rational;

fn max_table_diff(a: &ChainTable<f64>, b: &ChainTable<f64>) -> f64 {
    let n = a.len().min(b.len());
    (0..n)
        .map(|i| (a.a[i] - b.a[i]).abs().max((a.b[i] - b.b[i]).abs()).max((a.c[i] - b.c[i]).abs()))
        .fold(0.0, f64::max)
}

fn stochastic(t: &ChainTable<f64>) -> bool {
    validate_table(t, 1e-12).ok
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jacobi_ul_product_reproduces_chain(alpha in -0.9f64..5.0, beta in -0.9f64..5.0, u in 0.0f64..0.999) {
        let chain = BirthDeathChain::jacobi(alpha, beta);
        let y0 = u * alpha.max(0.0) / (alpha + beta + 1.0);
        let depth = 120;
        let f = ul_factorize(&chain, y0, 1.0, depth, &FactorOptions::default()).unwrap();
        let t = chain.realize::<f64>(depth, ()).unwrap();
        prop_assert!(max_table_diff(&multiply_ul(&f.upper, &f.lower, depth).unwrap(), &t) < 1e-10);
        prop_assert!(f.upper.x.iter().chain(&f.upper.y).chain(&f.lower.s).chain(&f.lower.r).all(|v| (0.0..=1.0).contains(v)));
        if y0 > 0.0 {
            prop_assert!(stochastic(&darboux_ul(&f, depth).unwrap()));
        }
    }

    #[test]
    fn jacobi_lu_darboux_is_stochastic(alpha in -0.9f64..5.0, beta in -0.9f64..5.0) {
        let chain = BirthDeathChain::jacobi(alpha, beta);
        let f = lu_factorize(&chain, 80, &FactorOptions::default()).unwrap();
        prop_assert!(stochastic(&darboux_lu(&f, 79).unwrap()));
    }

    #[test]
    fn constant_factors_inside_range(a0 in 0.01f64..0.45, u in 0.0f64..0.99) {
        let chain = BirthDeathChain::constant(a0, 0.25, 0.5, 0.25);
        let y0 = u * (1.0 - 2.0 * a0);
        let f = ul_factorize(&chain, y0, 1.0, 200, &FactorOptions::default()).unwrap();
        let t = chain.realize::<f64>(200, ()).unwrap();
        prop_assert!(max_table_diff(&multiply_ul(&f.upper, &f.lower, 200).unwrap(), &t) < 1e-10);
        prop_assert!(stochastic(&darboux_ul(&f, 200).unwrap()));
    }

    #[test]
    fn exact_factors_multiply_back(a in 1u32..9, b in 1u32..9, p in 0u32..=10) {
        let chain = BirthDeathChain::jacobi(a as f64, b as f64);
        let y0 = Rational::from((p * a, 10 * (a + b + 1)));
        let f = ul_factorize_exact(&chain, &y0, &Rational::from(1), 30).unwrap();
        let t = chain.realize::<Rational>(30, ()).unwrap();
        let m = multiply_ul(&f.upper, &f.lower, 30).unwrap();
        prop_assert_eq!(m.a, t.a);
        prop_assert_eq!(m.b, t.b);
        prop_assert_eq!(&m.c[1..], &t.c[1..]);
    }

    #[test]
    fn geronimus_moment_shift(alpha in 0.2f64..4.0, beta in -0.5f64..3.0, u in 0.05f64..1.0) {
        let y0 = u * alpha / (alpha + beta + 1.0);
        let m = jacobi_weight(alpha, beta).unwrap();
        let g = geronimus(&m, y0).unwrap();
        let (mm, gm) = (moments(&m, 9).unwrap(), moments(&g, 10).unwrap());
        for n in 1..=10 {
            prop_assert!((gm.get(n).unwrap() - y0 * mm.get(n - 1).unwrap()).abs() < 1e-8);
        }
        prop_assert!((gm.get(0).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn urn_rows_match_chain(k in 3u64..12, den in 2u64..40, num_frac in 0.01f64..1.0, n in 0usize..60, lu in any::<bool>()) {
        let num = ((den as f64 / k as f64) * num_frac).floor().max(1.0) as u64;
        prop_assume!(k * num <= den);
        let order = if lu { Order::Lu } else { Order::Ul };
        let spec = UrnStepSpec::new(UrnFamily::Constant { k, a0_num: num, a0_den: den }, order).unwrap();
        prop_assert_eq!(urn_row_exact(&spec, n).unwrap(), analytic_row_exact(&spec, n).unwrap());
    }

    #[test]
    fn jacobi_urn_rows_match_chain(alpha in 0u64..8, beta in 0u64..8, n in 0usize..60, lu in any::<bool>()) {
        let order = if lu { Order::Lu } else { Order::Ul };
        let spec = UrnStepSpec::new(UrnFamily::Jacobi { alpha, beta }, order).unwrap();
        prop_assert_eq!(urn_row_exact(&spec, n).unwrap(), analytic_row_exact(&spec, n).unwrap());
    }

    #[test]
    fn simulation_is_reproducible(seed in any::<u64>(), a0 in 0.05f64..0.95) {
        let chain = BirthDeathChain::constant(a0, 0.25, 0.5, 0.25);
        let a = simulate_chain(&chain, 0, 50, 9, seed).unwrap();
        prop_assert_eq!(&a, &simulate_chain(&chain, 0, 50, 9, seed).unwrap());
        prop_assert_eq!(a.visits.values().sum::<u64>(), 50 * 9);
    }

    #[test]
    fn decimal_rational_round_trips(v in -1e6f64..1e6) {
        prop_assert_eq!(bdchain::scalar::Scalar::to_f64(&decimal_rational(v)), v);
    }
}
