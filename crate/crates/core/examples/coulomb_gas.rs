//! Lattice Coulomb gas: exact enumeration on a small box and Metropolis
//! estimates in the dilute window.

use resilience_rg::coulombgas::{exact_partition, metropolis_run, LatticeSpec, RunOptions};

fn main() {
    let small = LatticeSpec::new(4, 4.0, 0.2).unwrap();
    let exact = exact_partition(&small, 2).unwrap();
    let opts = RunOptions { max_pairs: Some(2), ..Default::default() };
    let mc = metropolis_run(&small, 40_000, 1, &opts).unwrap();
    println!("L=4 K=4 y=0.2, ≤ 2 pairs: exact <k>={:.4} <r²>={:.4}", exact.mean_pairs, exact.mean_r2);
    println!("                         MC    <k>={:.4}±{:.4} <r²>={:.4}±{:.4}", mc.mean_pairs, mc.stderr_pairs, mc.mean_r2, mc.stderr_r2);

    println!("K,y,kt_phase,mean_pairs,mean_r2,stderr_r2");
    for (k, y) in [(2.0, 0.03), (3.0, 0.03), (4.0, 0.03), (6.0, 0.03), (3.0, 0.01), (3.0, 0.06)] {
        let spec = LatticeSpec::new(8, k, y).unwrap();
        let e = metropolis_run(&spec, 20_000, 7, &RunOptions::default()).unwrap();
        println!("{k},{y},{},{:.3},{:.3},{:.3}", spec.kt_phase(400.0), e.mean_pairs, e.mean_r2, e.stderr_r2);
    }
}
