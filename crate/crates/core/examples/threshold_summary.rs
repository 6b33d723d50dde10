//! Threshold table (p_a, p_b, power-law exponent, mean wrapping point) from
//! a directory of curve CSVs, or from a fresh small ensemble.
//!
//! ```text
//! cargo run --release --example threshold_summary -- out/run1
//! ```

use std::collections::BTreeMap;

use perctrans::analysis::{analyze_dir, fit_diagnostics_csv, summarize, summary_csv};
use perctrans::ensemble::{run_ensemble, EnsembleConfig};

fn main() -> perctrans::Result<()> {
    let rows = match std::env::args().nth(1) {
        Some(dir) => analyze_dir(dir.as_ref())?.0,
        None => {
            let config = EnsembleConfig {
                realizations: 100,
                ..EnsembleConfig::default()
            };
            let result = run_ensemble(&config)?;
            let mu: BTreeMap<_, _> = result.strengths.iter().map(|s| (s.m, s.mu_c.clone())).collect();
            let pw: BTreeMap<_, _> = result.strengths.iter().map(|s| (s.m, s.p_w)).collect();
            summarize(&mu, &pw)?
        }
    };
    print!("{}", summary_csv(&rows));
    println!();
    print!("{}", fit_diagnostics_csv(&rows));
    Ok(())
}
