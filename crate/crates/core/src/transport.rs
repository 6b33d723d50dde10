//! Infinite-time survival probabilities for coherent and incoherent walkers.
//!
//! The coherent survival `Π` is the weight of the initial state on the
//! real-eigenvalue eigenspace of `H = H0 - iΓ`. A vector has a real
//! eigenvalue under `H` exactly when it is an eigenvector of `H0` vanishing
//! on every sink (a dark state), and the dark subspace is orthogonal to its
//! decaying complement. So
//!
//! ```text
//! Π = Σ_λ ‖P_{W_λ} ψ‖²,   W_λ = { v ∈ ker(H0 - λ) : v|sinks = 0 }
//! ```
//!
//! which is what [`coherent_survival`] evaluates, one degenerate `H0`
//! eigenspace at a time. [`coherent_survival_complex_check`] takes the
//! literal route through the non-Hermitian spectrum of `H`, and
//! [`coherent_survival_timeseries`] propagates `exp(-iHt) ψ` directly.
//!
//! The incoherent survival `P` sums the zero modes of `T = -H0 - Γ`, which
//! reduces to the fraction of sources sitting in sink-free clusters
//! ([`connectivity_oracle`]).

use nalgebra::{DMatrix, DVector, Schur, SVD};
use num_complex::Complex64;

use crate::lattice::{Graph, Lattice};
use crate::percolation::ClusterState;
use crate::spectral::{
    self, classify_real_eigenvalues, eig_symmetric, real_eigenpairs, BlockSpectrum,
};
use crate::{Error, Result};

/// Singular-value cut for a dark direction inside an `H0` eigenspace. The
/// restriction of an orthonormal basis to the sink rows has singular values
/// in `[0, 1]`, so the cut is absolute.
pub const DARK_TOL: f64 = 1e-8;
/// Relative cut `|λ| <= 1e-9 · max(1, ‖T‖_F)` for a zero mode of `T`.
pub const ZERO_MODE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// Equal weight on every source: amplitude `|S|^{-1/2}` (coherent) or
    /// probability `|S|^{-1}` (incoherent).
    UniformSources,
    /// Localized on one site.
    Site(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    DarkState,
    ComplexSpectral,
    Oracle,
    TimeEvolution,
    TransferSpectral,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportResult {
    pub survival: f64,
    pub efficiency: f64,
    /// Dimension of the non-decaying subspace (dark states of `H`, or zero
    /// modes of `T`).
    pub dark_dim: usize,
    pub method: Method,
    /// Set when the requested route failed and the dark-state value stands in.
    pub fallback: Option<String>,
}

impl TransportResult {
    fn new(survival: f64, dark_dim: usize, method: Method) -> Self {
        TransportResult {
            survival,
            efficiency: 1.0 - survival,
            dark_dim,
            method,
            fallback: None,
        }
    }
}

/// Graph, source/sink sets and initial state of one transport calculation.
#[derive(Debug, Clone)]
pub struct TransportProblem {
    graph: Graph,
    sources: Vec<usize>,
    sinks: Vec<usize>,
    initial: InitialState,
}

impl TransportProblem {
    pub fn new(
        graph: Graph,
        sources: Vec<usize>,
        sinks: Vec<usize>,
        initial: InitialState,
    ) -> Result<Self> {
        let n = graph.sites();
        if sources.is_empty() || sinks.is_empty() {
            return Err(Error::invalid("sources and sinks must be non-empty"));
        }
        if let Some(&s) = sources.iter().chain(&sinks).find(|&&s| s >= n) {
            return Err(Error::invalid(format!("site {s} outside 0..{n}")));
        }
        if sources.iter().any(|s| sinks.contains(s)) {
            return Err(Error::invalid("sources and sinks must be disjoint"));
        }
        if let InitialState::Site(j) = initial {
            if j >= n {
                return Err(Error::invalid(format!("initial site {j} outside 0..{n}")));
            }
        }
        Ok(TransportProblem {
            graph,
            sources,
            sinks,
            initial,
        })
    }

    /// Lattice with the given occupied bonds, left-edge sources, right-edge
    /// sinks and a uniform source state.
    pub fn on_lattice<I>(lattice: &Lattice, occupied: I) -> Self
    where
        I: IntoIterator<Item = usize>,
    {
        TransportProblem {
            graph: lattice.graph(occupied),
            sources: lattice.sources().to_vec(),
            sinks: lattice.sinks().to_vec(),
            initial: InitialState::UniformSources,
        }
    }

    pub fn with_initial(mut self, initial: InitialState) -> Result<Self> {
        if let InitialState::Site(j) = initial {
            if j >= self.graph.sites() {
                return Err(Error::invalid(format!("initial site {j} out of range")));
            }
        }
        self.initial = initial;
        Ok(self)
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn sources(&self) -> &[usize] {
        &self.sources
    }

    pub fn sinks(&self) -> &[usize] {
        &self.sinks
    }

    pub fn initial(&self) -> &InitialState {
        &self.initial
    }

    /// Unit 2-norm coherent initial state.
    pub fn coherent_state(&self) -> Vec<f64> {
        let mut psi = vec![0.0; self.graph.sites()];
        match self.initial {
            InitialState::UniformSources => {
                let amp = (self.sources.len() as f64).sqrt().recip();
                for &s in &self.sources {
                    psi[s] = amp;
                }
            }
            InitialState::Site(j) => psi[j] = 1.0,
        }
        psi
    }

    /// Unit 1-norm incoherent initial distribution.
    pub fn incoherent_state(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.graph.sites()];
        match self.initial {
            InitialState::UniformSources => {
                let w = (self.sources.len() as f64).recip();
                for &s in &self.sources {
                    p[s] = w;
                }
            }
            InitialState::Site(j) => p[j] = 1.0,
        }
        p
    }

    fn sink_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.graph.sites()];
        for &s in &self.sinks {
            mask[s] = true;
        }
        mask
    }

    fn h0(&self) -> spectral::LatticeOperator {
        spectral::laplacian(&self.graph)
    }
}

/// Dark-state survival of `psi` given a per-component spectrum of `H0`.
/// Returns `(survival, dark dimension)`.
pub fn dark_state_survival(
    spectrum: &BlockSpectrum,
    is_sink: &[bool],
    psi: &[f64],
) -> (f64, usize) {
    let mut survival = 0.0;
    let mut dark_dim = 0;
    for (comp, block) in spectrum.components().iter().zip(spectrum.blocks()) {
        let sink_rows: Vec<usize> = (0..comp.len()).filter(|&i| is_sink[comp[i]]).collect();
        let local_psi = DVector::from_iterator(comp.len(), comp.iter().map(|&s| psi[s]));
        if sink_rows.is_empty() {
            survival += local_psi.norm_squared();
            dark_dim += comp.len();
            continue;
        }
        for group in block.degenerate_groups() {
            let g = group.len();
            let basis = block.vectors.columns(group.start, g);
            // sink restriction, zero-padded to at least g x g so V is full
            let rows = sink_rows.len().max(g);
            let mut restricted = DMatrix::<f64>::zeros(rows, g);
            for (r, &i) in sink_rows.iter().enumerate() {
                restricted.row_mut(r).copy_from(&basis.row(i));
            }
            let svd = SVD::new(restricted, false, true);
            let v_t = svd.v_t.expect("requested V^T");
            let coeffs = basis.transpose() * &local_psi;
            for k in 0..g {
                if svd.singular_values[k] <= DARK_TOL {
                    dark_dim += 1;
                    survival += (v_t.row(k) * &coeffs)[(0, 0)].powi(2);
                }
            }
        }
    }
    (survival, dark_dim)
}

/// Coherent survival `Π` by the dark-state projector method.
pub fn coherent_survival(problem: &TransportProblem) -> Result<TransportResult> {
    let spectrum = BlockSpectrum::new(&problem.graph)?;
    let (survival, dark) =
        dark_state_survival(&spectrum, &problem.sink_mask(), &problem.coherent_state());
    Ok(TransportResult::new(survival, dark, Method::DarkState))
}

/// Incoherent survival `P = Σ_{λ=0} (1ᵀ φ)(φᵀ p₀)` over zero modes of `T`.
pub fn incoherent_survival(problem: &TransportProblem) -> Result<TransportResult> {
    let t = spectral::transfer_matrix(&problem.h0(), &problem.sinks)?
        .real_matrix()
        .expect("transfer matrix is real");
    let d = eig_symmetric(&t)?;
    let tol = ZERO_MODE_TOL * d.norm.max(1.0);
    let p0 = DVector::from_vec(problem.incoherent_state());
    let mut survival = 0.0;
    let mut zero_modes = 0;
    for (k, &lambda) in d.values.iter().enumerate() {
        if lambda.abs() <= tol {
            let phi = d.vectors.column(k);
            survival += phi.sum() * phi.dot(&p0);
            zero_modes += 1;
        }
    }
    Ok(TransportResult::new(survival, zero_modes, Method::TransferSpectral))
}

/// Fraction of sources in clusters that contain no sink. Needs no linear
/// algebra; valid for the uniform incoherent start on a lattice.
pub fn connectivity_oracle(state: &ClusterState) -> f64 {
    let side = (state.site_count() as f64).sqrt().round() as usize;
    state.sink_free_source_count() as f64 / side as f64
}

/// Coherent survival through the complex spectrum of `H`: the weight of
/// `ψ` on the eigenvectors with `|Im E| <= 1e-12 · max(1, ‖H‖_F)`. Real
/// eigenvalues of `H` carry mutually orthogonal eigenspaces, and within
/// one eigenvalue cluster the solver returns an orthonormal basis, so the
/// overlaps add directly. On a solver failure the dark-state value is
/// returned with `fallback` set.
pub fn coherent_survival_complex_check(problem: &TransportProblem) -> Result<TransportResult> {
    let h = spectral::coherent_hamiltonian(&problem.h0(), &problem.sinks)?;
    match real_eigenpairs(&h.complex_matrix()) {
        Ok(d) => {
            let psi = problem.coherent_state();
            let real = classify_real_eigenvalues(&d, d.default_real_tol());
            let survival = real
                .iter()
                .map(|&k| {
                    d.vectors
                        .column(k)
                        .iter()
                        .zip(&psi)
                        .map(|(v, &p)| v.conj() * p)
                        .sum::<Complex64>()
                        .norm_sqr()
                })
                .sum();
            Ok(TransportResult::new(survival, real.len(), Method::ComplexSpectral))
        }
        Err(Error::Numerical { message, .. }) => {
            let mut r = coherent_survival(problem)?;
            r.fallback = Some(message);
            Ok(r)
        }
        Err(e) => Err(e),
    }
}

/// Smallest decay rate `-Im E` among the non-real eigenvalues of `H`, or
/// `None` when every mode is dark. Sets the time scale on which
/// [`coherent_survival_timeseries`] approaches the dark-state limit.
pub fn slowest_decay_rate(problem: &TransportProblem) -> Result<Option<f64>> {
    let h = spectral::coherent_hamiltonian(&problem.h0(), &problem.sinks)?.complex_matrix();
    if h.nrows() == 0 {
        return Ok(None);
    }
    let tol = spectral::REAL_EIGENVALUE_TOL * h.norm().max(1.0);
    let (_, t) = Schur::try_new(h, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::numerical("complex Schur iteration did not converge"))?
        .unpack();
    Ok((0..t.nrows())
        .map(|i| -t[(i, i)].im)
        .filter(|&r| r > tol)
        .min_by(f64::total_cmp))
}

/// A horizon at which every decaying mode has shrunk by `exp(-15)` in
/// amplitude, and no earlier than `base`.
pub fn settling_time(problem: &TransportProblem, base: f64) -> Result<f64> {
    Ok(slowest_decay_rate(problem)?.map_or(base, |rate| base.max(15.0 / rate)))
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::invalid("times must be finite and non-negative"));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("time grid must be ascending"));
    }
    Ok(())
}

/// `π(t) = ‖exp(-iHt) ψ‖²` on an ascending time grid, by stepping with the
/// scaled-and-squared Padé exponential of `-iH Δt`.
pub fn coherent_survival_timeseries(
    problem: &TransportProblem,
    times: &[f64],
) -> Result<Vec<(f64, f64)>> {
    check_times(times)?;
    let h = spectral::coherent_hamiltonian(&problem.h0(), &problem.sinks)?.complex_matrix();
    let minus_i = Complex64::new(0.0, -1.0);
    let mut state =
        DVector::from_iterator(h.nrows(), problem.coherent_state().into_iter().map(Complex64::from));
    let mut out = Vec::with_capacity(times.len());
    let mut now = 0.0;
    let mut cached: Option<(f64, DMatrix<Complex64>)> = None;
    let mut last = f64::INFINITY;
    for &t in times {
        let dt = t - now;
        if dt > 0.0 {
            let reuse = matches!(&cached, Some((c, _)) if *c == dt);
            if !reuse {
                cached = Some((dt, (&h * (minus_i * dt)).exp()));
            }
            let step = &cached.as_ref().expect("cached propagator").1;
            state = step * state;
            now = t;
        }
        let pi = state.norm_squared();
        if !pi.is_finite() || pi > last + 1e-9 || pi > 1.0 + 1e-9 {
            return Err(Error::Numerical {
                message: format!("survival rose to {pi} at t = {t} (previous {last})"),
                dump: Some(spectral::dump_matrix(&h)),
            });
        }
        last = pi;
        out.push((t, pi));
    }
    Ok(out)
}

/// `p(t) = 1ᵀ exp(T t) p₀` via the symmetric eigendecomposition of `T`.
pub fn incoherent_survival_timeseries(
    problem: &TransportProblem,
    times: &[f64],
) -> Result<Vec<(f64, f64)>> {
    check_times(times)?;
    let t_mat = spectral::transfer_matrix(&problem.h0(), &problem.sinks)?
        .real_matrix()
        .expect("transfer matrix is real");
    let d = eig_symmetric(&t_mat)?;
    let p0 = DVector::from_vec(problem.incoherent_state());
    let weights: Vec<f64> = (0..d.len())
        .map(|k| {
            let phi = d.vectors.column(k);
            phi.sum() * phi.dot(&p0)
        })
        .collect();
    Ok(times
        .iter()
        .map(|&t| {
            let p = d
                .values
                .iter()
                .zip(&weights)
                .map(|(&lambda, &w)| (lambda * t).exp() * w)
                .sum();
            (t, p)
        })
        .collect())
}
