//! Localization measures of the sink-free Laplacian eigenstates.
//!
//! Eigenstates are indexed `l = 1..=N` by ascending eigenvalue. Inside a
//! degenerate group the order is fixed by sign-normalising each vector (the
//! first entry above the amplitude tolerance made positive) and sorting the
//! vectors lexicographically, largest first. With the per-component basis
//! of [`BlockSpectrum`] this puts singleton zero modes in site order.

use std::cmp::Ordering;

use crate::ensemble::{CurveEstimate, RunningStats};
use crate::spectral::{BlockSpectrum, SymmetricDecomposition, DEGENERACY_TOL};
use crate::{Error, Result};

/// Amplitude above which a site counts as occupied by an eigenstate.
pub const AMPLITUDE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenstateProfile {
    /// 1-based position in ascending-eigenvalue order.
    pub index: usize,
    pub eigenvalue: f64,
    /// Participation ratio, in `[1, N]`.
    pub xi: f64,
    /// True when the state has weight on at least one source and one sink.
    pub contributes: bool,
    /// Number of sites with amplitude above [`AMPLITUDE_TOL`].
    pub support: usize,
}

/// `ξ = (Σ |v_i|⁴)⁻¹` of a unit vector.
pub fn participation_ratio(v: &[f64]) -> Result<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::invalid(format!(
            "participation ratio needs a unit vector, got norm {norm}"
        )));
    }
    Ok(v.iter().map(|x| x.powi(4)).sum::<f64>().recip())
}

/// Edge-spanning indicator `ν`.
pub fn contributes(v: &[f64], sources: &[usize], sinks: &[usize], tol: f64) -> bool {
    let touches = |set: &[usize]| set.iter().any(|&i| v[i].abs() > tol);
    touches(sources) && touches(sinks)
}

fn sign_fixed(mut v: Vec<f64>) -> Vec<f64> {
    if let Some(first) = v.iter().find(|x| x.abs() > AMPLITUDE_TOL) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    v
}

fn lexicographic_desc(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match y.total_cmp(x) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

/// Profiles from eigenpairs already sorted by ascending eigenvalue.
fn profiles_from_pairs(
    mut pairs: Vec<(f64, Vec<f64>)>,
    norm: f64,
    sources: &[usize],
    sinks: &[usize],
) -> Result<Vec<EigenstateProfile>> {
    let tol = DEGENERACY_TOL * norm.max(1.0);
    for (_, v) in pairs.iter_mut() {
        *v = sign_fixed(std::mem::take(v));
    }
    let values: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    for group in crate::spectral::group_sorted(&values, tol) {
        pairs[group].sort_by(|a, b| lexicographic_desc(&a.1, &b.1));
    }
    pairs
        .into_iter()
        .enumerate()
        .map(|(k, (eigenvalue, v))| {
            Ok(EigenstateProfile {
                index: k + 1,
                eigenvalue,
                xi: participation_ratio(&v)?,
                contributes: contributes(&v, sources, sinks, AMPLITUDE_TOL),
                support: v.iter().filter(|x| x.abs() > AMPLITUDE_TOL).count(),
            })
        })
        .collect()
}

/// Profiles of every `H0` eigenstate from a per-component spectrum.
pub fn eigenstate_profiles(
    spectrum: &BlockSpectrum,
    sources: &[usize],
    sinks: &[usize],
) -> Result<Vec<EigenstateProfile>> {
    let pairs: Vec<(f64, Vec<f64>)> = spectrum
        .pairs()
        .iter()
        .map(|p| (p.value, spectrum.vector(p)))
        .collect();
    let norm = spectrum
        .blocks()
        .iter()
        .map(|b| b.norm)
        .fold(0.0, f64::max);
    profiles_from_pairs(pairs, norm, sources, sinks)
}

/// Profiles from a whole-matrix decomposition of `H0`. Degenerate
/// eigenspaces spanning several clusters come back in whatever basis the
/// solver chose, so prefer [`eigenstate_profiles`] for statistics.
pub fn profiles_from_decomposition(
    d: &SymmetricDecomposition,
    sources: &[usize],
    sinks: &[usize],
) -> Result<Vec<EigenstateProfile>> {
    let pairs = (0..d.len())
        .map(|k| (d.values[k], d.vectors.column(k).iter().copied().collect()))
        .collect();
    profiles_from_pairs(pairs, d.norm, sources, sinks)
}

/// `γ = Σ_l ν_l` of one configuration.
pub fn contributing_count(profiles: &[EigenstateProfile]) -> usize {
    profiles.iter().filter(|p| p.contributes).count()
}

/// `(1/N) Σ_l ξ_l` of one configuration.
pub fn mean_participation(profiles: &[EigenstateProfile]) -> f64 {
    profiles.iter().map(|p| p.xi).sum::<f64>() / profiles.len() as f64
}

/// Ensemble statistics of the eigenstate measures at one bond fraction.
#[derive(Debug, Clone)]
pub struct EigenstatSummary {
    pub xi: Vec<CurveEstimate>,
    pub nu: Vec<CurveEstimate>,
    pub gamma: CurveEstimate,
    pub xi_avg: CurveEstimate,
}

/// Accumulates profiles realization by realization.
#[derive(Debug, Clone)]
pub struct EigenstatAccumulator {
    xi: Vec<RunningStats>,
    nu: Vec<RunningStats>,
    gamma: RunningStats,
    xi_avg: RunningStats,
}

impl EigenstatAccumulator {
    pub fn new(states: usize) -> Self {
        EigenstatAccumulator {
            xi: vec![RunningStats::default(); states],
            nu: vec![RunningStats::default(); states],
            gamma: RunningStats::default(),
            xi_avg: RunningStats::default(),
        }
    }

    pub fn push(&mut self, profiles: &[EigenstateProfile]) {
        for (p, (xi, nu)) in profiles.iter().zip(self.xi.iter_mut().zip(&mut self.nu)) {
            xi.push(p.xi);
            nu.push(if p.contributes { 1.0 } else { 0.0 });
        }
        self.gamma.push(contributing_count(profiles) as f64);
        self.xi_avg.push(mean_participation(profiles));
    }

    pub fn finish(&self, p: f64) -> EigenstatSummary {
        EigenstatSummary {
            xi: self.xi.iter().map(|s| s.estimate(p)).collect(),
            nu: self.nu.iter().map(|s| s.estimate(p)).collect(),
            gamma: self.gamma.estimate(p),
            xi_avg: self.xi_avg.estimate(p),
        }
    }
}

/// Aggregates the profiles of several realizations taken at bond fraction `p`.
pub fn aggregate_eigenstats(p: f64, realizations: &[Vec<EigenstateProfile>]) -> Result<EigenstatSummary> {
    let first = realizations
        .first()
        .ok_or_else(|| Error::invalid("need at least one realization"))?;
    let mut acc = EigenstatAccumulator::new(first.len());
    for r in realizations {
        if r.len() != first.len() {
            return Err(Error::invalid("realizations disagree on eigenstate count"));
        }
        acc.push(r);
    }
    Ok(acc.finish(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Lattice;
    use crate::spectral::{eig_hermitian, laplacian};

    #[test]
    fn participation_examples() {
        let mut e = vec![0.0; 5];
        e[2] = 1.0;
        assert!((participation_ratio(&e).unwrap() - 1.0).abs() < 1e-15);
        let u = vec![(5f64).sqrt().recip(); 5];
        assert!((participation_ratio(&u).unwrap() - 5.0).abs() < 1e-12);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((participation_ratio(&[h, h, 0.0]).unwrap() - 2.0).abs() < 1e-12);
        assert!(participation_ratio(&[1.0, 1.0]).is_err());
    }

    #[test]
    fn contribution_examples() {
        let l = Lattice::new(3).unwrap();
        let u = vec![3f64.recip(); 9];
        assert!(contributes(&u, l.sources(), l.sinks(), AMPLITUDE_TOL));
        let mut centre = vec![0.0; 9];
        centre[4] = 1.0;
        assert!(!contributes(&centre, l.sources(), l.sinks(), AMPLITUDE_TOL));
    }

    #[test]
    fn empty_lattice_profiles() {
        let l = Lattice::new(7).unwrap();
        let spec = BlockSpectrum::new(&l.graph([])).unwrap();
        let prof = eigenstate_profiles(&spec, l.sources(), l.sinks()).unwrap();
        assert_eq!(prof.len(), 49);
        assert!(prof.iter().all(|p| (p.xi - 1.0).abs() < 1e-15 && !p.contributes));
        assert_eq!(contributing_count(&prof), 0);
        assert!((mean_participation(&prof) - 1.0).abs() < 1e-15);
        // site order inside the degenerate zero group
        assert!(prof.iter().all(|p| p.support == 1));
    }

    #[test]
    fn full_lattice_profiles() {
        let l = Lattice::new(7).unwrap();
        let g = l.graph(0..l.bond_count());
        let spec = BlockSpectrum::new(&g).unwrap();
        let prof = eigenstate_profiles(&spec, l.sources(), l.sinks()).unwrap();
        assert!((prof[0].xi - 49.0).abs() < 1e-8);
        assert!(contributing_count(&prof) >= 45);
        let whole = eig_hermitian(&laplacian(&g)).unwrap();
        let alt = profiles_from_decomposition(&whole, l.sources(), l.sinks()).unwrap();
        assert!((alt[0].xi - 49.0).abs() < 1e-8);
        for p in &prof {
            assert!(p.xi >= 1.0 - 1e-12 && p.xi <= 49.0 + 1e-9);
            if p.contributes {
                assert!(p.support >= 7);
            }
        }
    }

    #[test]
    fn aggregate_single_and_multiple() {
        let l = Lattice::new(3).unwrap();
        let a = eigenstate_profiles(&BlockSpectrum::new(&l.graph([])).unwrap(), l.sources(), l.sinks()).unwrap();
        let b = eigenstate_profiles(
            &BlockSpectrum::new(&l.graph(0..l.bond_count())).unwrap(),
            l.sources(),
            l.sinks(),
        )
        .unwrap();
        let s = aggregate_eigenstats(0.0, &[a.clone()]).unwrap();
        assert_eq!(s.gamma.mean, 0.0);
        assert_eq!(s.xi_avg.mean, 1.0);
        assert_eq!(s.gamma.count, 1);
        let s2 = aggregate_eigenstats(0.5, &[a, b.clone()]).unwrap();
        assert_eq!(s2.gamma.mean, contributing_count(&b) as f64 / 2.0);
        assert!(aggregate_eigenstats(0.0, &[]).is_err());
    }
}
