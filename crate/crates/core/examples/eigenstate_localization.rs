//! Participation ratios and edge-spanning flags of the Laplacian
//! eigenstates as the lattice fills in.

use perctrans::eigenstats::{contributing_count, eigenstate_profiles, mean_participation};
use perctrans::ensemble::StreamKey;
use perctrans::lattice::Lattice;
use perctrans::percolation::grow_trajectory;
use perctrans::spectral::BlockSpectrum;

fn main() -> perctrans::Result<()> {
    let lattice = Lattice::new(7)?;
    let traj = grow_trajectory(&lattice, 2, &mut StreamKey::new(3, 2, 0).rng())?;
    println!("{:>5} {:>6} {:>7} {:>5}  xi_1..xi_7", "n", "p", "<xi>", "gamma");
    for n in [0, 14, 28, 42, 50, 56, 63, 70, 84] {
        let state = traj.state_at(&lattice, n)?;
        let graph = lattice.graph(state.occupied_bonds().iter().copied());
        let profiles = eigenstate_profiles(&BlockSpectrum::new(&graph)?, lattice.sources(), lattice.sinks())?;
        let low: Vec<String> = profiles[..7].iter().map(|p| format!("{:5.1}", p.xi)).collect();
        println!(
            "{n:>5} {:>6.3} {:>7.3} {:>5}  {}",
            lattice.bond_fraction(n)?,
            mean_participation(&profiles),
            contributing_count(&profiles),
            low.join(" ")
        );
    }
    Ok(())
}
