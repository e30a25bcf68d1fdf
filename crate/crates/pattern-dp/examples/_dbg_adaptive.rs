use pattern_dp::datasets::{synthesize, SynthConfig};
use pattern_dp::adaptive::{optimize, OptimizerConfig};

fn main() -> pattern_dp::Result<()> {
    let ds = synthesize(&SynthConfig { seed: 42, ..SynthConfig::default() })?;
    let cfg = OptimizerConfig { trials: 20, max_iters: 3, seed: 1, ..OptimizerConfig::default() };
    for q in ds.queries.iter().filter(|q| q.privacy_role == pattern_dp::PrivacyRole::Private) {
        match optimize(&ds.stream, &ds.queries, &q.id, 1.0, &cfg) {
            Ok(o) => println!("{}: ok, eps = {:?}", q.id, o.allocation.per_element()),
            Err(e) => println!("{}: ERROR: {e}", q.id),
        }
    }
    Ok(())
}
