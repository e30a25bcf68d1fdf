//! Randomized response basics: budget-to-probability conversion, empirical
//! flip rates, and budget composition across pattern elements.
//!
//! Run with: cargo run --release --example randomized_response

use pattern_dp::ppm::{composed_epsilon, epsilon_to_p, randomize, uniform_allocate};
use pattern_dp::SeededRng;

fn main() -> pattern_dp::Result<()> {
    println!("eps      flip prob p   empirical (100k draws)");
    let mut rng = SeededRng::new(7);
    for eps in [0.0, 0.1, 0.5, 3.0f64.ln(), 2.0, 5.0] {
        let p = epsilon_to_p(eps)?;
        let n = 100_000;
        let flips = (0..n).filter(|_| !randomize(true, p, &mut rng)).count();
        println!("{eps:<8.4} {p:<13.6} {:.6}", flips as f64 / n as f64);
    }

    println!("\nbudget composition over a 4-element pattern, eps = 2:");
    let alloc = uniform_allocate("P", 2.0, 4)?;
    println!("  per-element budgets: {:?}", alloc.per_element());
    println!("  flip probabilities:  {:?}", alloc.probs());
    println!("  composed budget:     {:.9}", composed_epsilon(&alloc));
    Ok(())
}
