//! Runs the default contamination study and prints per-method bias and
//! median standard error for each series.
//!
//! cargo run --release -p cofactor --example study [replications]

use cofactor::simulation::{run_replication_study, Method, ScenarioConfig};

fn main() -> cofactor::Result<()> {
    let mut cfg = ScenarioConfig::default();
    if let Some(r) = std::env::args().nth(1) {
        cfg.replications = r.parse().expect("replications must be an integer");
    }
    let summary = run_replication_study(&cfg)?;
    println!("{} replications ({} failed)", summary.replications(), summary.failures.len());
    println!("{:<16} {:>6} {:>10} {:>10}", "method", "series", "bias", "median se");
    for method in Method::ALL {
        for (i, s) in summary.method(method).series.iter().enumerate() {
            let se = s.median_sd_of_mean().map_or("-".to_string(), |v| format!("{v:.4}"));
            println!("{:<16} {:>6} {:>10.4} {:>10}", method.as_str(), i + 1, s.average_mean() - s.true_mean, se);
        }
    }
    Ok(())
}
