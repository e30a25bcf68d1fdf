use pattern_dp::datasets::{synthesize, SynthConfig};
use pattern_dp::eval::*;
use std::path::PathBuf;

fn main() -> pattern_dp::Result<()> {
    let ds = synthesize(&SynthConfig { seed: 42, ..SynthConfig::default() })?;
    let plan = ExperimentPlan {
        dataset: PathBuf::from("x"),
        mechanisms: vec![Mechanism::Uniform, Mechanism::Adaptive, Mechanism::Bd, Mechanism::Ba, Mechanism::Landmark],
        eps_grid: vec![10.0, 1000.0],
        trials: 100,
        alpha: 0.5,
        seed: 7,
        baseline_w: None,
        adaptive: AdaptiveSettings { trials: 100, max_iters: 25, delta_eps: None },
    };
    let out = run_experiment(&ds.stream, &ds.queries, &plan)?;
    for mech in &plan.mechanisms {
        for &eps in &plan.eps_grid {
            let vals: Vec<f64> = out.rows.iter().filter(|r| r.mechanism == mech.name() && r.eps == eps).map(|r| r.mre).collect();
            let (m, se) = mean_stderr(&vals);
            println!("{:<9} eps={:<6} mre = {:.5} +- {:.5}", mech.name(), eps, m, se);
        }
    }
    for f in &out.failures { println!("FAILED {} {}: {}", f.mechanism, f.eps, f.error); }
    Ok(())
}
