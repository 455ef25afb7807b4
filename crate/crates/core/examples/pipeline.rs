//! End-to-end run from a JSON experiment config: classification, ε, flow,
//! threshold sweep and the phase verdict.

use resilience_rg::cli::{apply_override, pipeline, ExperimentConfig};

fn config(delta: f64) -> ExperimentConfig {
    let mut v = serde_json::json!({});
    for o in [
        "noise.z=1".to_string(),
        format!("noise.delta.z={delta}"),
        "noise.lambda.z=0.02".into(),
        "grid.delta_t=2".into(),
        "grid.comp_dim=1".into(),
        "mc.samples=100000".into(),
    ] {
        apply_override(&mut v, &o).unwrap();
    }
    serde_json::from_value(v).unwrap()
}

fn main() {
    let report = pipeline(&config(1.5), 3).unwrap();
    println!("{}", report.phase_line());
    println!("{}", serde_json::to_string_pretty(&report).unwrap());

    match pipeline(&config(0.6), 3) {
        Ok(_) => println!("unexpected success"),
        Err(e) => println!("δ = 0.6: exit {} ({})", e.exit_code(), e.message()),
    }
}
