//! Gaussian 2n-point functions from pair contractions.

use resilience_rg::bath::{pairing_count, two_point_between, wick_expand, Correlator, SpacetimePoint};

fn main() {
    let c = Correlator::power_law(0.75, 1.0);
    let pts: Vec<SpacetimePoint> = (0..6).map(|i| SpacetimePoint::new(vec![i as f64 * 0.7], (i % 3) as f64)).collect();
    for n in 1..=3 {
        let v = wick_expand(&pts[..2 * n], |a, b| two_point_between(&c, a, b).unwrap()).unwrap();
        println!("{}-point function: {v:.6} ({} contractions)", 2 * n, pairing_count(n));
    }
}
