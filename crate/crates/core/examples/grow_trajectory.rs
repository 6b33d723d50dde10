//! Grow one lattice under the best-of-m product rule and watch the giant
//! cluster form.
//!
//! ```text
//! cargo run --example grow_trajectory -- 7 8 42
//! ```

use perctrans::ensemble::StreamKey;
use perctrans::lattice::Lattice;
use perctrans::percolation::grow_trajectory;

fn main() -> perctrans::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<u64>().expect("numeric argument"));
    let side = args.next().unwrap_or(7) as usize;
    let m = args.next().unwrap_or(8);
    let seed = args.next().unwrap_or(42);

    let lattice = Lattice::new(side)?;
    let key = StreamKey::new(seed, m, 0);
    let traj = grow_trajectory(&lattice, m as usize, &mut key.rng())?;

    println!("L={side} m={m} seed={seed}: {} bonds", lattice.bond_count());
    let step = (lattice.bond_count() / 12).max(1);
    for n in (0..=lattice.bond_count()).step_by(step) {
        let bar = "#".repeat((traj.zeta()[n] * 40.0).round() as usize);
        let wrap = if traj.wrapping()[n] { " wraps" } else { "" };
        println!("p={:.3} zeta={:.3} {bar}{wrap}", lattice.bond_fraction(n)?, traj.zeta()[n]);
    }
    match traj.first_wrapping() {
        Some(n) => println!("first wrapping at n={n} (p_w = {:.4})", lattice.bond_fraction(n)?),
        None => println!("never wrapped"),
    }

    // compare with ordinary percolation on the same stream index
    let plain = grow_trajectory(&lattice, 1, &mut StreamKey::new(seed, 1, 0).rng())?;
    println!("m=1 wraps at n={:?}", plain.first_wrapping());
    Ok(())
}
