//! Intra-hypercube error probability ε and its suppression by echo pulses.

use std::f64::consts::{FRAC_PI_2, LN_2};

use resilience_rg::bath::Correlator;
use resilience_rg::hypercube::{effective_dimension, epsilon_alpha, epsilon_with_pulses, PulseSequence};

fn main() {
    let c = Correlator::power_law(1.0, 1.0);
    let eps = epsilon_alpha(&c, 0.1, 1.0, 1e-12).unwrap();
    println!("ε(δ=1, z=1, λ*=0.1, Δ=1) = {eps:.10}, closed form {:.10}", 0.01 * (FRAC_PI_2 - LN_2));

    let (lambda, dt) = (0.01, 20.0);
    let c = Correlator::power_law(0.5, 1.0);
    for n in 0..=4 {
        let e = epsilon_with_pulses(&c, lambda, dt, &PulseSequence::equally_spaced(n, dt), 1e-12).unwrap();
        println!("n = {n}: ε = {e:.3e}, dim F = {:.1}", effective_dimension(0.5, n, 1.0));
    }

    // a constant bath is refocused exactly by a single echo
    let e = epsilon_with_pulses(&Correlator::constant(1.0), lambda, dt, &PulseSequence::equally_spaced(1, dt), 1e-14).unwrap();
    println!("constant bath, one echo: ε = {e:.1e}");
}
