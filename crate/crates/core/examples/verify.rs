//! Run the built-in property and oracle suites.
//!
//! cargo run --release --example verify

fn main() {
    let results = social_learning::harness::verify_all();
    for r in &results {
        println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    if results.iter().any(|r| !r.passed) {
        std::process::exit(1);
    }
}
