//! Cross-checks against independent reference computations.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};

use resilience_rg::bath::Channel;
use resilience_rg::coulombgas::{self, exact_partition, ChargeConfig, LatticeSpec, RunOptions};
use resilience_rg::hypercube::ErrorRates;
use resilience_rg::probability::{ln_binomial, stochastic_pm};
use resilience_rg::rg::{kt_coordinates, kt_flow, KtPhase};
use resilience_rg::seed::stream_rng;
use resilience_rg::stabilizer::{self, sample_error, steane_code, Estimator, LogicalVerdict, PauliOp};

fn big_binomial(n: u64, k: u64) -> BigUint {
    (0..k).fold(BigUint::one(), |acc, i| acc * BigUint::from(n - i) / BigUint::from(i + 1))
}

#[test]
fn log_binomial_matches_big_integers() {
    for n in [1u64, 7, 20, 64, 200, 1000] {
        for k in [0, 1, n / 3, n / 2, n] {
            let exact = big_binomial(n, k).to_f64().unwrap().ln();
            assert!((ln_binomial(n, k) - exact).abs() <= 1e-12 * exact.abs().max(1.0), "n={n} k={k}");
        }
    }
}

#[test]
fn stochastic_probabilities_normalize_with_spectator_channels() {
    // with two channels present, P_m of one channel sums to (1 − ε_other)^{NR}
    let eps = ErrorRates::from_rates(&[(Channel::X, 0.05), (Channel::Z, 0.02)]).unwrap();
    let (n, r) = (4u64, 5u64);
    let total: f64 = (0..=n * r).map(|m| stochastic_pm(&eps, Channel::X, n, r, m).unwrap()).sum();
    let cells = (n * r) as i32;
    let expected = (1.0 - 0.02f64).powi(cells);
    assert!((total - expected).abs() < 1e-12);
}

#[test]
fn failing_weight_two_set() {
    let code = steane_code();
    let oracle = stabilizer::weight2_oracle(&code, &ErrorRates::depolarizing(1e-3).unwrap());
    assert_eq!(oracle.patterns, 189);
    // every pure-X and pure-Z pair fails, with the matching logical
    let mut pure_x = 0;
    let mut pure_z = 0;
    for (p, v) in &oracle.failing {
        if p.z == 0 {
            pure_x += 1;
            assert_eq!(*v, LogicalVerdict::LogicalX);
        }
        if p.x == 0 {
            pure_z += 1;
            assert_eq!(*v, LogicalVerdict::LogicalZ);
        }
    }
    assert_eq!((pure_x, pure_z), (21, 21));
    // Y pairs share the structure of both sectors
    let yy = PauliOp::parse("YYIIIII").unwrap();
    assert_eq!(code.decode_cycle(&yy).unwrap(), LogicalVerdict::LogicalY);
}

#[test]
fn stratified_rate_matches_full_enumeration() {
    let code = steane_code();
    for p in [3e-3, 3e-2] {
        let eps = ErrorRates::depolarizing(p).unwrap();
        let exact = stabilizer::exact_logical_error_rate(&code, &eps);
        let est = stabilizer::logical_error_rate(&code, &eps, 200_000, 5, Estimator::WeightStratified).unwrap();
        assert!((est.rate - exact).abs() < 3.0 * est.stderr + 1e-12, "p={p}: {} ± {} vs {exact}", est.rate, est.stderr);
    }
}

#[test]
fn direct_rate_matches_full_enumeration_at_high_noise() {
    let code = steane_code();
    let eps = ErrorRates::from_rates(&[(Channel::X, 0.05), (Channel::Z, 0.02)]).unwrap();
    let exact = stabilizer::exact_logical_error_rate(&code, &eps);
    let est = stabilizer::logical_error_rate(&code, &eps, 200_000, 6, Estimator::Direct).unwrap();
    assert!((est.rate - exact).abs() < 3.0 * est.stderr, "{} ± {} vs {exact}", est.rate, est.stderr);
}

#[test]
fn x_frequency_is_binomial() {
    let eps = ErrorRates::from_rates(&[(Channel::X, 0.5)]).unwrap();
    let mut rng = stream_rng(11, 0);
    let n = 1_000_000u64;
    let hits = (0..n).filter(|_| sample_error(&eps, 1, &mut rng).x == 1).count() as f64;
    let sigma = (n as f64 * 0.25).sqrt();
    assert!((hits - 0.5 * n as f64).abs() < 3.0 * sigma);
}

#[test]
fn threshold_sweep_is_monotone_and_quadratic() {
    let code = steane_code();
    let sweep = stabilizer::threshold_sweep(&code, &[1e-3, 3e-3, 1e-2], stabilizer::DEPOLARIZING, 100_000, 3, Estimator::WeightStratified).unwrap();
    for w in sweep.points.windows(2) {
        assert!(w[1].logical_rate > w[0].logical_rate);
    }
    assert!((sweep.fit.slope - 2.0).abs() < 0.15);
    assert!((sweep.fit.pseudo_threshold / sweep.oracle_pseudo_threshold - 1.0).abs() < 0.15);
}

#[test]
fn restricted_sampler_matches_enumeration_elsewhere() {
    let spec = LatticeSpec::new(3, 2.0, 0.4).unwrap();
    let exact = exact_partition(&spec, 2).unwrap();
    let opts = RunOptions { max_pairs: Some(2), ..Default::default() };
    let mc = coulombgas::metropolis_run(&spec, 40_000, 77, &opts).unwrap();
    assert!((mc.mean_pairs - exact.mean_pairs).abs() < 3.5 * mc.stderr_pairs, "{mc:?} vs {exact:?}");
    assert!((mc.mean_r2 - exact.mean_r2).abs() < 3.5 * mc.stderr_r2, "{mc:?} vs {exact:?}");
}

#[test]
fn enumeration_tightens_with_coupling() {
    let loose = exact_partition(&LatticeSpec::new(4, 5.0, 0.3).unwrap(), 2).unwrap();
    let tight = exact_partition(&LatticeSpec::new(4, 50.0, 0.3).unwrap(), 2).unwrap();
    assert!(tight.mean_r2 < loose.mean_r2);
    let single = exact_partition(&LatticeSpec::new(4, 50.0, 0.3).unwrap(), 1).unwrap();
    assert!((single.mean_r2 - 1.0).abs() < 1e-6);
}

#[test]
fn conjugated_start_gives_same_observables() {
    let spec = LatticeSpec::new(5, 3.0, 0.3).unwrap();
    let init = ChargeConfig::from_sites(&[0, 7], &[12, 3]).unwrap();
    let a = coulombgas::metropolis_run(&spec, 20_000, 21, &RunOptions { initial: init.clone(), ..Default::default() }).unwrap();
    let b = coulombgas::metropolis_run(&spec, 20_000, 21, &RunOptions { initial: init.conjugate(), ..Default::default() }).unwrap();
    assert!((a.mean_pairs - b.mean_pairs).abs() < 3.0 * a.stderr_pairs.hypot(b.stderr_pairs));
    assert!((a.mean_r2 - b.mean_r2).abs() < 3.0 * a.stderr_r2.hypot(b.stderr_r2));
}

#[test]
fn sampler_is_deterministic() {
    let spec = LatticeSpec::new(4, 3.0, 0.3).unwrap();
    let opts = RunOptions { keep_trace: true, ..Default::default() };
    let a = coulombgas::metropolis_run(&spec, 500, 9, &opts).unwrap();
    let b = coulombgas::metropolis_run(&spec, 500, 9, &opts).unwrap();
    assert_eq!(a, b);
}

#[test]
fn gas_binding_matches_kt_verdicts() {
    // K = 4δ: K = 6 sits on the irrelevant side (x = −1), K = 2 on the
    // relevant side (x = 1)
    // y kept small so the gas stays dilute instead of crystallizing
    let bound = LatticeSpec::new(8, 6.0, 0.03).unwrap();
    let free = LatticeSpec::new(8, 2.0, 0.03).unwrap();
    assert_eq!(bound.kt_coordinates(), kt_coordinates(1.5, 0.03));
    assert_eq!(bound.kt_phase(400.0), KtPhase::Bound);
    assert_eq!(free.kt_phase(400.0), KtPhase::Unbound);
    let a = coulombgas::metropolis_run(&bound, 20_000, 1, &RunOptions::default()).unwrap();
    let b = coulombgas::metropolis_run(&free, 20_000, 2, &RunOptions::default()).unwrap();
    assert!(b.mean_r2 - a.mean_r2 > 3.0 * a.stderr_r2.hypot(b.stderr_r2), "{a:?} {b:?}");
}

#[test]
fn kt_flow_separatrix_structure() {
    assert_eq!(kt_flow(-0.5, 0.1, 400.0, 1e-2).unwrap().phase, KtPhase::Bound);
    assert_eq!(kt_flow(-0.1, 0.3, 400.0, 1e-2).unwrap().phase, KtPhase::Unbound);
    assert_eq!(kt_flow(0.2, 0.05, 400.0, 1e-2).unwrap().phase, KtPhase::Unbound);
    // x = D + z − 2δ: irrelevant dimensions sit at x < 0
    assert_eq!(kt_coordinates(1.5, 0.1).0, -1.0);
}
