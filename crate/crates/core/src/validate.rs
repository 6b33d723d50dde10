//! Cross-method consistency suite behind `perctrans validate`.
//!
//! Each check compares independent routes to the same quantity and records
//! the largest deviation seen against its tolerance.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;

use crate::ensemble::derive_stream;
use crate::lattice::{Graph, Lattice};
use crate::percolation::ClusterState;
use crate::spectral::{self, classify_real_eigenvalues, eig_complex, BlockSpectrum};
use crate::transport::{
    coherent_survival, coherent_survival_complex_check, coherent_survival_timeseries,
    connectivity_oracle, incoherent_survival, settling_time, InitialState, TransportProblem,
};
use crate::Result;

/// Faults that can be injected to prove the suite detects them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Adds `1e-3` to one component of every `H0` eigenvector before the
    /// residual check.
    PerturbEigenvector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub cases: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    /// Informational checks are reported but do not decide the verdict.
    pub gating: bool,
}

impl Check {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Check {
            name,
            cases: 0,
            max_deviation: 0.0,
            tolerance,
            gating: true,
        }
    }

    fn informational(name: &'static str, tolerance: f64) -> Self {
        Check {
            gating: false,
            ..Check::new(name, tolerance)
        }
    }

    fn record(&mut self, deviation: f64) {
        self.cases += 1;
        // NaN counts as a failure
        if !(deviation <= self.max_deviation) {
            self.max_deviation = if deviation.is_nan() { f64::INFINITY } else { deviation };
        }
    }

    pub fn passed(&self) -> bool {
        self.max_deviation <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    /// True when every gating check passed.
    pub fn passed(&self) -> bool {
        self.checks.iter().filter(|c| c.gating).all(Check::passed)
    }

    /// Names of failed gating checks.
    pub fn failed(&self) -> Vec<&'static str> {
        self.checks
            .iter()
            .filter(|c| c.gating && !c.passed())
            .map(|c| c.name)
            .collect()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let verdict = match (c.passed(), c.gating) {
                (true, _) => "PASS",
                (false, true) => "FAIL",
                (false, false) => "INFO",
            };
            let _ = writeln!(
                out,
                "{verdict} {:<34} cases={:<4} max_dev={:.3e} tol={:.0e}{}",
                c.name,
                c.cases,
                c.max_deviation,
                c.tolerance,
                if c.gating { "" } else { " (not gating)" }
            );
        }
        let _ = writeln!(
            out,
            "{}",
            if self.passed() { "all checks passed" } else { "validation FAILED" }
        );
        out
    }
}

/// Fixed horizon for the `L = 2` and `L = 4` time-evolution comparison.
pub const LONG_TIME: f64 = 200.0;
/// Fixed horizon for the `L = 3` set.
pub const LONGER_TIME: f64 = 500.0;

// Decay rates on these lattices go down to ~1e-4, so a fixed horizon
// leaves slow modes undamped. The gating comparison runs to
// `settling_time`; the fixed-horizon one is still reported.

/// Random bond subset: each bond kept with a per-configuration probability
/// drawn uniformly from `[0, 1)`.
pub fn random_configuration<R: Rng>(lattice: &Lattice, rng: &mut R) -> Vec<usize> {
    let q: f64 = rng.random();
    (0..lattice.bond_count()).filter(|_| rng.random::<f64>() < q).collect()
}

/// All `2^B` bond subsets of the `L = 2` lattice.
pub fn exhaustive_l2() -> Vec<Vec<usize>> {
    (0u32..16)
        .map(|mask| (0..4).filter(|b| mask & (1 << b) != 0).collect())
        .collect()
}

struct CrossChecks {
    dark_vs_complex: Check,
    dark_vs_time: Check,
    dark_vs_fixed_time: Check,
    spectral_vs_oracle: Check,
    floor: Check,
    ordering: Check,
    dark_sink_amplitude: Check,
    residual: Check,
}

impl CrossChecks {
    fn new(names: &'static [&'static str; 8], time_tol: f64) -> Self {
        CrossChecks {
            dark_vs_complex: Check::new(names[0], 1e-8),
            dark_vs_time: Check::new(names[1], time_tol),
            dark_vs_fixed_time: Check::informational(names[2], time_tol),
            spectral_vs_oracle: Check::new(names[3], 1e-9),
            floor: Check::new(names[4], 1e-9),
            ordering: Check::new(names[5], 1e-9),
            dark_sink_amplitude: Check::new(names[6], 1e-8),
            residual: Check::new(names[7], spectral::RESIDUAL_TOL),
        }
    }

    fn into_checks(self) -> Vec<Check> {
        vec![
            self.dark_vs_complex,
            self.dark_vs_time,
            self.dark_vs_fixed_time,
            self.spectral_vs_oracle,
            self.floor,
            self.ordering,
            self.dark_sink_amplitude,
            self.residual,
        ]
    }

    fn run(
        &mut self,
        lattice: &Lattice,
        bonds: &[usize],
        horizon: f64,
        fault: Option<Fault>,
    ) -> Result<()> {
        let problem = TransportProblem::on_lattice(lattice, bonds.iter().copied());
        let dark = coherent_survival(&problem)?.survival;
        let complex = coherent_survival_complex_check(&problem)?;
        let settled = settling_time(&problem, horizon)?;
        let series = coherent_survival_timeseries(&problem, &[horizon, settled])?;
        let (fixed, timed) = (series[0].1, series[1].1);
        let incoherent = incoherent_survival(&problem)?.survival;
        let mut state = ClusterState::new(lattice);
        for &b in bonds {
            state.add_bond(lattice, b)?;
        }
        let oracle = connectivity_oracle(&state);

        self.dark_vs_complex.record(if complex.fallback.is_some() {
            f64::INFINITY
        } else {
            (dark - complex.survival).abs()
        });
        self.dark_vs_time.record((dark - timed).abs());
        self.dark_vs_fixed_time.record((dark - fixed).abs());
        self.spectral_vs_oracle.record((incoherent - oracle).abs());
        self.floor.record((oracle - dark).max(0.0));
        self.ordering.record((incoherent - dark).max(0.0));

        let h = spectral::coherent_hamiltonian(&spectral::laplacian(problem.graph()), lattice.sinks())?;
        let d = spectral::real_eigenpairs(&h.complex_matrix())?;
        for k in classify_real_eigenvalues(&d, d.default_real_tol()) {
            let v = d.vectors.column(k);
            let on_sinks = lattice.sinks().iter().map(|&s| v[s].norm_sqr()).sum::<f64>().sqrt();
            self.dark_sink_amplitude.record(on_sinks);
        }
        if d.is_empty() {
            self.dark_sink_amplitude.record(0.0);
        }

        let spectrum = BlockSpectrum::new(problem.graph())?;
        for (comp, block) in spectrum.components().iter().zip(spectrum.blocks()) {
            let sub = Graph::new(
                comp.len(),
                problem
                    .graph()
                    .edges()
                    .iter()
                    .filter(|(a, _)| comp.binary_search(a).is_ok())
                    .map(|&(a, b)| (comp.binary_search(&a).unwrap(), comp.binary_search(&b).unwrap()))
                    .collect(),
            )?;
            let h0 = spectral::laplacian(&sub).laplacian().clone();
            let scale = h0.norm().max(1.0);
            for k in 0..block.len() {
                let mut v = block.vectors.column(k).into_owned();
                if fault == Some(Fault::PerturbEigenvector) {
                    v[0] += 1e-3;
                }
                let res = (&h0 * &v - &v * block.values[k]).norm() / scale;
                self.residual.record(res);
            }
        }
        Ok(())
    }
}

fn analytic_checks() -> Result<Vec<Check>> {
    let mut eig = Check::new("chain-complex-eigenvalues", 1e-10);
    let mut chain = Check::new("chain-survival-zero", 1e-10);
    let mut lambda_single = Check::new("lambda-single-source-half", 1e-10);
    let mut lambda_sym = Check::new("lambda-symmetric-zero", 1e-10);

    let g = Graph::new(2, vec![(0, 1)])?;
    let h = spectral::coherent_hamiltonian(&spectral::laplacian(&g), &[1])?;
    let d = eig_complex(&h.complex_matrix())?;
    let s3 = 3f64.sqrt();
    let want = [
        Complex64::new((2.0 - s3) / 2.0, -0.5),
        Complex64::new((2.0 + s3) / 2.0, -0.5),
    ];
    for (got, w) in d.values.iter().zip(want) {
        eig.record((got - w).norm());
    }
    let p = TransportProblem::new(g, vec![0], vec![1], InitialState::Site(0))?;
    chain.record(coherent_survival(&p)?.survival.abs());
    chain.record(coherent_survival_complex_check(&p)?.survival.abs());

    let lam = Graph::new(3, vec![(0, 2), (1, 2)])?;
    let single = TransportProblem::new(lam.clone(), vec![0, 1], vec![2], InitialState::Site(0))?;
    let sym = TransportProblem::new(lam, vec![0, 1], vec![2], InitialState::UniformSources)?;
    for r in [coherent_survival(&single)?, coherent_survival_complex_check(&single)?] {
        lambda_single.record((r.survival - 0.5).abs());
    }
    for r in [coherent_survival(&sym)?, coherent_survival_complex_check(&sym)?] {
        lambda_sym.record(r.survival.abs());
    }
    Ok(vec![eig, chain, lambda_single, lambda_sym])
}

/// Runs the full suite. `seed` drives the random configuration samples.
pub fn run_validation(seed: u64, fault: Option<Fault>) -> Result<Report> {
    let mut checks = analytic_checks()?;

    let l2 = Lattice::new(2)?;
    let mut x2 = CrossChecks::new(
        &[
            "l2-dark-vs-complex",
            "l2-dark-vs-time-settled",
            "l2-dark-vs-time200",
            "l2-incoherent-vs-oracle",
            "l2-coherent-floor",
            "l2-coherent-ge-incoherent",
            "l2-real-eigvec-sink-amplitude",
            "l2-h0-eigenpair-residual",
        ],
        1e-6,
    );
    for bonds in exhaustive_l2() {
        x2.run(&l2, &bonds, LONG_TIME, fault)?;
    }
    checks.extend(x2.into_checks());

    let l3 = Lattice::new(3)?;
    let mut x3 = CrossChecks::new(
        &[
            "l3-dark-vs-complex",
            "l3-dark-vs-time-settled",
            "l3-dark-vs-time500",
            "l3-incoherent-vs-oracle",
            "l3-coherent-floor",
            "l3-coherent-ge-incoherent",
            "l3-real-eigvec-sink-amplitude",
            "l3-h0-eigenpair-residual",
        ],
        1e-6,
    );
    let mut rng = derive_stream(seed, 0, 3);
    for _ in 0..200 {
        let bonds = random_configuration(&l3, &mut rng);
        x3.run(&l3, &bonds, LONGER_TIME, fault)?;
    }
    checks.extend(x3.into_checks());

    let l4 = Lattice::new(4)?;
    let mut x4 = CrossChecks::new(
        &[
            "l4-dark-vs-complex",
            "l4-dark-vs-time-settled",
            "l4-dark-vs-time200",
            "l4-incoherent-vs-oracle",
            "l4-coherent-floor",
            "l4-coherent-ge-incoherent",
            "l4-real-eigvec-sink-amplitude",
            "l4-h0-eigenpair-residual",
        ],
        1e-6,
    );
    let mut rng = derive_stream(seed, 0, 4);
    for _ in 0..100 {
        let bonds = random_configuration(&l4, &mut rng);
        x4.run(&l4, &bonds, LONG_TIME, fault)?;
    }
    checks.extend(x4.into_checks());

    Ok(Report { checks })
}
