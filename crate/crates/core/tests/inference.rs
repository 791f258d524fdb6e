use mar_core::estimator::{fit_mar, select_p, FitOptions, InfoCriterion};
use mar_core::harness::{run_erf, DgpSpec, ErfConfig, KstarSource};
use mar_core::infer::{
    gamma_blocks, information, omega_standard_errors, richardson_discrepancy, sigma_classic, SeInputs, SeMethod,
    DEFAULT_GAMMA_TOL, DEFAULT_HESSIAN_STEP,
};
use mar_core::robustscale::{calibrate_kstar, kstar_reference};
use mar_core::simulator::{simulate_mar, SimConfig};
use mar_core::tdist::{loglik, TParams};
use mar_core::{LagPolynomial, MarModel};
use rayon::prelude::*;

fn simulate(phi: &[f64], vphi: &[f64], nu: f64, eta: f64, t: usize, seed: u64) -> Vec<f64> {
    let model = MarModel::new(phi.to_vec(), vphi.to_vec(), nu, eta).unwrap();
    simulate_mar(&SimConfig::new(t, model, seed)).unwrap()
}

#[test]
fn three_constructions_agree_for_nearly_gaussian_errors() {
    let y = simulate(&[0.6], &[], 50.0, 1.0, 5000, 31);
    let fit = fit_mar(&y, 1, 0, &FitOptions::default()).unwrap();
    let blocks = gamma_blocks(&fit.model.phi, &fit.model.vphi, DEFAULT_GAMMA_TOL).unwrap();
    let classic = sigma_classic(&fit.model, &blocks).unwrap()[(0, 0)];

    let inputs = SeInputs::new(&y, &fit);
    let block = information(&inputs, SeMethod::BlockHessian).unwrap()[(0, 0)];
    assert!((block - classic).abs() / classic < 0.05, "{block} vs {classic}");

    let kstar = calibrate_kstar(50.0, 5000, 2000, 32).unwrap().kstar;
    let robust = information(&inputs.with_kstar(kstar), SeMethod::Robust).unwrap()[(0, 0)];
    assert!((robust - classic).abs() / classic < 0.10, "{robust} vs {classic}");
}

#[test]
fn hessian_is_stable_under_step_halving() {
    let y = simulate(&[0.5], &[0.4], 2.5, 1.0, 1000, 33);
    let fit = fit_mar(&y, 1, 1, &FitOptions::default()).unwrap();
    let yc = fit.centered(&y);
    let f = |x: &[f64]| {
        let phi = LagPolynomial::new(vec![x[0]]).unwrap();
        let vphi = LagPolynomial::new(vec![x[1]]).unwrap();
        match TParams::new(x[2], x[3]) {
            Ok(p) => loglik(&yc, &phi, &vphi, &p).unwrap(),
            Err(_) => f64::NAN,
        }
    };
    let x = [fit.model.phi.coeffs()[0], fit.model.vphi.coeffs()[0], fit.model.dist.nu, fit.model.dist.eta];
    let d = richardson_discrepancy(f, &x, DEFAULT_HESSIAN_STEP);
    assert!(d < 0.01, "{d}");
}

#[test]
fn omega_intervals_cover() {
    let (nu, eta) = (3.0, 2.0);
    let hits: Vec<Option<(bool, bool)>> = (0..200u64)
        .into_par_iter()
        .map(|i| {
            let y = simulate(&[0.5], &[0.3], nu, eta, 1000, 5000 + i);
            let fit = fit_mar(&y, 1, 1, &FitOptions { seed: i, ..FitOptions::default() }).ok()?;
            let (se_nu, se_eta) = omega_standard_errors(&y, &fit, DEFAULT_HESSIAN_STEP).ok()?;
            Some((
                (fit.model.dist.nu - nu).abs() < 1.96 * se_nu,
                (fit.model.dist.eta - eta).abs() < 1.96 * se_eta,
            ))
        })
        .collect();
    let ok: Vec<_> = hits.into_iter().flatten().collect();
    let n = ok.len() as f64;
    let cover_nu = ok.iter().filter(|h| h.0).count() as f64 / n;
    let cover_eta = ok.iter().filter(|h| h.1).count() as f64 / n;
    // 200 replications: binomial sd of a 95% coverage is about 1.5 pp.
    assert!((0.89..=0.99).contains(&cover_nu), "nu coverage {cover_nu}");
    assert!((0.89..=0.99).contains(&cover_eta), "eta coverage {cover_eta}");
}

#[test]
fn bic_recovers_ar2_order() {
    let model = MarModel::new(vec![0.5, 0.3], vec![], 30.0, 1.0).unwrap();
    let hits = (0..100u64)
        .filter(|i| {
            let y = simulate_mar(&SimConfig::new(1000, model.clone(), 700 + i)).unwrap();
            select_p(&y, 6, InfoCriterion::Bic).unwrap() == 2
        })
        .count();
    assert!(hits >= 90, "{hits}/100");
}

#[test]
fn fresh_calibrations_follow_the_table_ordering() {
    let short = calibrate_kstar(1.5, 100, 20_000, 41).unwrap().kstar;
    let long = calibrate_kstar(1.5, 1000, 20_000, 42).unwrap().kstar;
    assert!(long > short, "{short} vs {long}");
    let heavy = calibrate_kstar(1.2, 500, 20_000, 43).unwrap().kstar;
    let light = calibrate_kstar(3.0, 500, 20_000, 44).unwrap().kstar;
    assert!(heavy > light, "{heavy} vs {light}");
    // Coarse agreement with the reference table at this small N.
    assert!((short / kstar_reference(1.5, 100).unwrap() - 1.0).abs() < 0.1);
}

fn small_erf(methods: Vec<SeMethod>) -> ErfConfig {
    let dgp = DgpSpec { phi: vec![0.5], vphi: vec![0.2], nu: 1.8, eta: 1.0, burn: 200 };
    let mut cfg = ErfConfig::new(dgp, 77);
    cfg.t_grid = vec![100];
    cfg.n = 100;
    cfg.methods = methods;
    cfg.kstar = KstarSource::Reference;
    cfg
}

#[test]
fn erf_table_does_not_depend_on_thread_count() {
    let cfg = small_erf(SeMethod::ALL.to_vec());
    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| run_erf(&cfg).unwrap())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn erf_at_level_one_rejects_everything() {
    let mut cfg = small_erf(vec![SeMethod::Robust, SeMethod::BlockHessian]);
    cfg.nominal_level = 1.0;
    let table = run_erf(&cfg).unwrap();
    for row in &table.rows {
        assert!(row.n_used > 0);
        assert!(row.erf_phi.iter().chain(&row.erf_vphi).all(|e| *e == 1.0), "{row:?}");
    }
}

#[test]
fn calibration_invariants() {
    let light = calibrate_kstar(3.0, 100, 100_000, 51).unwrap();
    assert!(light.trimmed_fraction < 0.05, "{}", light.trimmed_fraction);
    let heavy = calibrate_kstar(1.2, 100, 100_000, 52).unwrap();
    assert!(heavy.trimmed_fraction < 0.25, "{}", heavy.trimmed_fraction);

    let again = calibrate_kstar(1.5, 100, 100_000, 53).unwrap().kstar;
    let other = calibrate_kstar(1.5, 100, 100_000, 54).unwrap().kstar;
    assert!((again - other).abs() / again < 0.03, "{again} vs {other}");
}

#[test]
fn k_statistic_ignores_scale() {
    let x = mar_core::tdist::sample(500, &TParams::new(2.0, 1.0).unwrap(), 55).unwrap();
    let scaled: Vec<f64> = x.iter().map(|v| 7.5 * v).collect();
    let a = mar_core::robustscale::k_statistic(&x).unwrap();
    let b = mar_core::robustscale::k_statistic(&scaled).unwrap();
    assert!((a - b).abs() < 1e-12 * a);
}

#[test]
fn single_candidate_order() {
    let y = simulate(&[0.5], &[], 5.0, 1.0, 300, 56);
    assert_eq!(select_p(&y, 1, InfoCriterion::Aic).unwrap(), 1);
}
