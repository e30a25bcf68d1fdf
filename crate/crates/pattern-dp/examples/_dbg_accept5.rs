use pattern_dp::datasets::{synthesize, SynthConfig};
use pattern_dp::eval::*;
use std::path::PathBuf;

fn main() -> pattern_dp::Result<()> {
    let ds = synthesize(&SynthConfig { seed: 42, ..SynthConfig::default() })?;
    let plan = ExperimentPlan {
        dataset: PathBuf::from("x"),
        mechanisms: vec![Mechanism::Uniform, Mechanism::Adaptive, Mechanism::Bd, Mechanism::Ba, Mechanism::Landmark],
        eps_grid: vec![0.1, 0.5, 1.0, 2.0, 5.0],
        trials: 100,
        alpha: 0.5,
        seed: 7,
        baseline_w: None,
        adaptive: AdaptiveSettings { trials: 100, max_iters: 25, delta_eps: None },
    };
    let out = run_experiment(&ds.stream, &ds.queries, &plan)?;
    let stat = |mech: &str, eps: f64| {
        let vals: Vec<f64> = out.rows.iter().filter(|r| r.mechanism == mech && r.eps == eps).map(|r| r.mre).collect();
        mean_stderr(&vals)
    };
    for &eps in &plan.eps_grid {
        let (u, use_) = stat("uniform", eps);
        let (a, ase) = stat("adaptive", eps);
        let (bd, _) = stat("bd", eps);
        let (ba, _) = stat("ba", eps);
        let (lm, _) = stat("landmark", eps);
        let se_diff = (use_ * use_ + ase * ase).sqrt();
        println!("eps={eps:<5} uniform={u:.4} adaptive={a:.4} (diff {:+.4}, 2se {:.4}) bd={bd:.4} ba={ba:.4} lm={lm:.4}  a<=u+2se: {}  u<min(base): {}",
            a - u, 2.0 * se_diff, a <= u + 2.0 * se_diff, u < bd.min(ba).min(lm));
    }
    for f in &out.failures { println!("FAILED {} {}: {}", f.mechanism, f.eps, f.error); }
    Ok(())
}
