//! Runs the consistency suite: dark-state vs complex-spectral vs
//! time-evolved survival, spectral vs union-find connectivity, and the
//! analytic fixtures. Pass `fault` to see it trip.

use perctrans::validate::{run_validation, Fault};

fn main() -> perctrans::Result<()> {
    let fault = std::env::args().nth(1).filter(|a| a == "fault").map(|_| Fault::PerturbEigenvector);
    let report = run_validation(2024, fault)?;
    print!("{}", report.render());
    if !report.passed() {
        std::process::exit(1);
    }
    Ok(())
}
