use mar_core::lagpoly::LagPolynomial;
use mar_core::simulator::{simulate_mar, SimConfig};
use mar_core::tdist::{loglik, sample, TParams};
use mar_core::MarModel;
use proptest::prelude::*;

fn stationary_coeff() -> impl Strategy<Value = f64> {
    -0.95f64..0.95
}

fn series(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn causal_and_noncausal_filters_commute(a in stationary_coeff(), b in stationary_coeff(), y in series(40)) {
        let phi = LagPolynomial::new(vec![a]).unwrap();
        let vphi = LagPolynomial::new(vec![b]).unwrap();
        let one = phi.filter_causal(&vphi.filter_noncausal(&y).unwrap()).unwrap();
        let two = vphi.filter_noncausal(&phi.filter_causal(&y).unwrap()).unwrap();
        prop_assert_eq!(one.len(), two.len());
        for (u, v) in one.iter().zip(&two) {
            prop_assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn time_reversal_swaps_filters(c in prop::collection::vec(-0.4f64..0.4, 1..3), y in series(30)) {
        let poly = LagPolynomial::new(c).unwrap();
        let mut rev = y.clone();
        rev.reverse();
        let mut causal = poly.filter_causal(&y).unwrap();
        causal.reverse();
        let noncausal = poly.filter_noncausal(&rev).unwrap();
        prop_assert_eq!(causal.len(), noncausal.len());
        for (u, v) in causal.iter().zip(&noncausal) {
            prop_assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn ar1_ma_weights_are_powers(c in -0.9f64..0.9) {
        let w = LagPolynomial::new(vec![c]).unwrap().ma_weights(1e-12, 10_000).unwrap();
        for (j, psi) in w.weights.iter().enumerate() {
            prop_assert!((psi - c.powi(j as i32)).abs() < 1e-12);
        }
    }

    #[test]
    fn loglik_is_invariant_to_reversal(
        a in stationary_coeff(),
        b in stationary_coeff(),
        nu in 0.6f64..30.0,
        eta in 0.1f64..5.0,
        y in series(25),
    ) {
        let phi = LagPolynomial::new(vec![a]).unwrap();
        let vphi = LagPolynomial::new(vec![b]).unwrap();
        let p = TParams::new(nu, eta).unwrap();
        let mut rev = y.clone();
        rev.reverse();
        let l1 = loglik(&y, &phi, &vphi, &p).unwrap();
        let l2 = loglik(&rev, &vphi, &phi, &p).unwrap();
        prop_assert!((l1 - l2).abs() < 1e-8 * l1.abs().max(1.0));
    }
}

/// Autocovariance of a MAR(1,1) from its two-sided MA representation
/// `y_t = sum_{i,j >= 0} a^i b^j e_{t-i+j}`, by brute-force summation.
fn mar11_autocovariance(a: f64, b: f64, sigma2: f64, lag: i64) -> f64 {
    let m = 200i64;
    let weight = |k: i64| -> f64 {
        // Coefficient on e_{t-k}: pairs with i - j = k.
        (0..m).filter_map(|j| {
            let i = k + j;
            (0..m).contains(&i).then(|| a.powi(i as i32) * b.powi(j as i32))
        })
        .sum()
    };
    (-m..m).map(|k| weight(k) * weight(k + lag)).sum::<f64>() * sigma2
}

#[test]
fn simulated_autocovariances_match_the_ma_representation() {
    let (a, b, nu, eta) = (0.5, 0.3, 6.0, 1.0);
    let model = MarModel::new(vec![a], vec![b], nu, eta).unwrap();
    let y = simulate_mar(&SimConfig::new(100_000, model, 21)).unwrap();
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let sigma2 = eta * eta * nu / (nu - 2.0);
    for lag in 0..3usize {
        let sample: f64 = (lag..y.len()).map(|t| (y[t] - mean) * (y[t - lag] - mean)).sum::<f64>() / n;
        let theory = mar11_autocovariance(a, b, sigma2, lag as i64);
        assert!((sample - theory).abs() / theory < 0.05, "lag {lag}: {sample} vs {theory}");
    }
}

#[test]
fn student_t_tail_probability() {
    // Cauchy: P(|X| > 1) = 1/2 exactly.
    let x = sample(200_000, &TParams::new(1.0, 1.0).unwrap(), 4).unwrap();
    let frac = x.iter().filter(|v| v.abs() > 1.0).count() as f64 / x.len() as f64;
    assert!((frac - 0.5).abs() < 0.005, "{frac}");
}
