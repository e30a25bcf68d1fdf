//! Generate the synthetic workload and inspect its statistics.
//!
//! Each of the 1000 windows independently contains basic event kind `e_n`
//! with a per-kind occurrence probability; 20 random 3-element SET patterns
//! are drawn, 3 of them private and 5 target.
//!
//! Run with: cargo run --release --example synthesize

use pattern_dp::datasets::{kind_name, synthesize, SynthConfig};
use pattern_dp::matcher::detect;
use pattern_dp::PrivacyRole;

fn main() -> pattern_dp::Result<()> {
    let cfg = SynthConfig {
        seed: 42,
        ..SynthConfig::default()
    };
    let ds = synthesize(&cfg)?;
    println!(
        "{} events in {} windows of {} ticks",
        ds.stream.len(),
        cfg.n_windows,
        ds.window_ticks
    );

    println!("\nkind  occurrence  empirical");
    for (k, pr) in ds.occurrence.iter().enumerate() {
        let name = kind_name(k);
        let count = ds
            .stream
            .events()
            .iter()
            .filter(|e| e.kind.as_str() == name)
            .count();
        println!(
            "{:<5} {:>9.3}  {:>9.3}",
            name,
            pr,
            count as f64 / cfg.n_windows as f64
        );
    }

    let detected = detect(&ds.stream, &ds.queries)?;
    println!("\npattern  role     elements                 instances");
    for q in &ds.queries {
        let n = detected
            .instances()
            .iter()
            .filter(|i| i.query_id == q.id)
            .count();
        let role = match q.privacy_role {
            PrivacyRole::Private => "private",
            PrivacyRole::Target => "target",
            PrivacyRole::None => "-",
        };
        let elems: Vec<String> = q.elements.iter().map(|e| e.to_string()).collect();
        println!("{:<8} {:<8} {:<24} {:>6}", q.id, role, elems.join(" "), n);
    }
    Ok(())
}
