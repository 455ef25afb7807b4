//! Relevance of the inter-hypercube correlations for a few baths, with and
//! without decoupling pulses.

use resilience_rg::bath::{BathSpec, Channel, NoiseModel};
use resilience_rg::rg::{classify, pulses_needed, MARGINAL_TOL};

fn main() {
    for (comp_dim, z, delta) in [(1, 1.0, 0.6), (1, 1.0, 1.0), (1, 1.0, 1.5), (2, 1.0, 1.2), (2, 0.0, 0.8), (3, 2.0, 0.5)] {
        let bath = BathSpec::with_dimensions(z, &[(Channel::Z, delta)]).unwrap();
        let model = NoiseModel::unrenormalized(bath, &[(Channel::Z, 0.01)]).unwrap();
        let c = &classify(&model, comp_dim, 0, MARGINAL_TOL)[0];
        println!(
            "D={comp_dim} z={z} δ={delta}: dim F = {:.2}, exponent = {:+.2}, {:?}, pulses needed = {}",
            c.dim_f,
            c.exponent,
            c.verdict,
            pulses_needed(comp_dim, z, delta)
        );
    }

    // each pulse lifts dim F by 2z
    let bath = BathSpec::with_dimensions(1.0, &[(Channel::Z, 0.6)]).unwrap();
    let model = NoiseModel::unrenormalized(bath, &[(Channel::Z, 0.01)]).unwrap();
    for n in 0..3 {
        let c = &classify(&model, 1, n, MARGINAL_TOL)[0];
        println!("n = {n} pulses: exponent {:+.2} -> {:?}", c.exponent, c.verdict);
    }
}
