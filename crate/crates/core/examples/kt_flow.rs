//! Reduced Kosterlitz-Thouless recursion for a D = 1, z = 1 computer.

use resilience_rg::rg::{kt_coordinates, kt_flow};

fn main() {
    for delta_eff in [0.6, 0.9, 1.0, 1.1, 1.5] {
        for y in [0.02, 0.2] {
            let (x, y) = kt_coordinates(delta_eff, y);
            let flow = kt_flow(x, y, 400.0, 1e-2).unwrap();
            let last = flow.samples.last().unwrap();
            println!(
                "δ_eff={delta_eff} y0={y}: x0={x:+.2} -> {} at ℓ={:.2} (x²−y² drift {:.1e})",
                flow.phase,
                last.ell,
                flow.invariant_drift()
            );
        }
    }
}
