//! Coherent vs incoherent transport on small hand-checkable graphs, computed
//! by every available route.

use perctrans::lattice::{Graph, Lattice};
use perctrans::transport::{
    coherent_survival, coherent_survival_complex_check, coherent_survival_timeseries, incoherent_survival,
    settling_time, InitialState, TransportProblem,
};

fn report(name: &str, problem: &TransportProblem) -> perctrans::Result<()> {
    let dark = coherent_survival(problem)?;
    let complex = coherent_survival_complex_check(problem)?;
    let horizon = settling_time(problem, 200.0)?;
    let timed = coherent_survival_timeseries(problem, &[horizon])?[0].1;
    let classical = incoherent_survival(problem)?;
    println!(
        "{name:<24} Pi={:.6} (dark dim {}) complex={:.6} pi(t={horizon:.0})={:.6} | P={:.6}",
        dark.survival, dark.dark_dim, complex.survival, timed, classical.survival
    );
    Ok(())
}

fn main() -> perctrans::Result<()> {
    // two sites, source 0 bonded to sink 1: everything leaks out
    let chain = Graph::new(2, vec![(0, 1)])?;
    report("chain", &TransportProblem::new(chain, vec![0], vec![1], InitialState::Site(0))?)?;

    // Λ graph: two sources sharing one sink. The antisymmetric source
    // combination never sees the sink, so half of a single-site start is trapped.
    let lambda = Graph::new(3, vec![(0, 2), (1, 2)])?;
    let single = TransportProblem::new(lambda.clone(), vec![0, 1], vec![2], InitialState::Site(0))?;
    let uniform = TransportProblem::new(lambda, vec![0, 1], vec![2], InitialState::UniformSources)?;
    report("lambda, one source", &single)?;
    report("lambda, both sources", &uniform)?;

    for side in [3, 5] {
        let l = Lattice::new(side)?;
        report(&format!("empty L={side}"), &TransportProblem::on_lattice(&l, []))?;
        report(&format!("full L={side}"), &TransportProblem::on_lattice(&l, 0..l.bond_count()))?;
        let comb = (0..l.bond_count()).step_by(2);
        report(&format!("every other bond L={side}"), &TransportProblem::on_lattice(&l, comb))?;
    }
    Ok(())
}
