//! Steane code logical error rate, threshold fit and concatenation.

use resilience_rg::hypercube::ErrorRates;
use resilience_rg::stabilizer::{
    concatenation_map, exact_logical_error_rate, logical_error_rate, steane_code, threshold_sweep, weight2_oracle, Estimator, DEPOLARIZING,
};

fn main() {
    let code = steane_code();
    let eps = ErrorRates::depolarizing(1e-3).unwrap();
    let oracle = weight2_oracle(&code, &eps);
    println!("{} of {} weight-2 errors fail", oracle.failing.len(), oracle.patterns);

    for est in [Estimator::WeightStratified, Estimator::Direct] {
        let r = logical_error_rate(&code, &eps, 1_000_000, 1, est).unwrap();
        println!("{est:?}: {:.4e} ± {:.1e} ({} failures)", r.rate, r.stderr, r.failures);
    }
    println!("enumeration: {:.4e}", exact_logical_error_rate(&code, &eps));

    let sweep = threshold_sweep(&code, &[1e-3, 3e-3, 1e-2], DEPOLARIZING, 200_000, 2, Estimator::WeightStratified).unwrap();
    for p in &sweep.points {
        println!("p={:.0e}: {:.4e} ± {:.1e}", p.p, p.logical_rate, p.stderr);
    }
    println!(
        "slope {:.3} ± {:.3}, pseudo-threshold {:.4} (weight-2 oracle {:.4})",
        sweep.fit.slope, sweep.fit.slope_stderr, sweep.fit.pseudo_threshold, sweep.oracle_pseudo_threshold
    );

    for p in [1e-3, 0.1] {
        let cat = concatenation_map(p, sweep.fit.coefficient, 5).unwrap();
        let levels: Vec<String> = cat.rates.iter().map(|r| format!("{r:.2e}")).collect();
        println!("p={p}: {}, levels [{}]", cat.verdict, levels.join(", "));
    }
}
