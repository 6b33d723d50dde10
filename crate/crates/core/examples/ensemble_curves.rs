//! A reduced Monte Carlo ensemble: efficiency curves for a few correlation
//! strengths, written as CSV.
//!
//! ```text
//! cargo run --release --example ensemble_curves -- 200 out/curves
//! ```

use std::path::PathBuf;

use perctrans::analysis::{coherent_incoherent_gap, curve_max, delta_efficiency};
use perctrans::ensemble::{run_ensemble, write_outputs, EnsembleConfig, Grid};

fn main() -> perctrans::Result<()> {
    let mut args = std::env::args().skip(1);
    let realizations = args.next().map_or(100, |r| r.parse().expect("realization count"));
    let out = args.next().map(PathBuf::from);

    let config = EnsembleConfig {
        ms: vec![1, 2, 84],
        realizations,
        grid: Grid::Stride(4),
        ..EnsembleConfig::default()
    };
    let result = run_ensemble(&config)?;

    println!("{:>6} {:>8} {:>8} {:>8}", "p", "mu_c m=1", "m=2", "m=84");
    let s = &result.strengths;
    for i in 0..s[0].p.len() {
        println!(
            "{:>6.3} {:>8.4} {:>8.4} {:>8.4}",
            s[0].p[i], s[0].mu_c[i].mean, s[1].mu_c[i].mean, s[2].mu_c[i].mean
        );
    }
    for st in s {
        println!("m={:<3} <p_w> = {:.4} ± {:.4}", st.m, st.p_w.mean, st.p_w.stderr);
    }
    let delta = delta_efficiency(&s[0].mu_c, &s[1].mu_c)?;
    let gap = coherent_incoherent_gap(&s[0].mu_c, &s[0].mu_i)?;
    if let (Some(d), Some(g)) = (delta.iter().copied().min_by(|a, b| a.mean.total_cmp(&b.mean)), curve_max(&gap)) {
        println!("largest m=2 gain {:.4} at p={:.3}; largest m=1 coherent deficit {:.4} at p={:.3}", -d.mean, d.p, g.mean, g.p);
    }

    if let Some(dir) = out {
        let files = write_outputs(&result, &dir)?;
        println!("wrote {} files to {}", files.len(), dir.display());
    }
    Ok(())
}
