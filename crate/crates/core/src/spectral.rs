//! Lattice operators and dense eigensolvers.
//!
//! Three operators are built from a [`Graph`] and a sink set:
//!
//! - the Laplacian `H0` (degree on the diagonal, `-1` per bond),
//! - the coherent Hamiltonian `H = H0 - iΓ`,
//! - the classical transfer matrix `T = -H0 - Γ`,
//!
//! where `Γ` is the 0/1 diagonal projector on the sinks. Every
//! decomposition is checked against `‖A v - E v‖₂ <= 1e-10 · max(1, ‖A‖_F)`
//! before it is returned.

use std::fmt::Write as _;
use std::ops::Range;

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::lattice::Graph;
use crate::{Error, Result};

/// Relative residual bound enforced on every eigenpair.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Relative tolerance for treating Hermitian eigenvalues as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;
/// Relative tolerance on `|Im E|` for a real eigenvalue of `H`.
pub const REAL_EIGENVALUE_TOL: f64 = 1e-12;

const MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    /// `H0`
    Laplacian,
    /// `H0 - iΓ`
    Coherent,
    /// `-H0 - Γ`
    Transfer,
}

/// Dense operator on the sites of a graph.
#[derive(Debug, Clone)]
pub struct LatticeOperator {
    kind: OperatorKind,
    laplacian: DMatrix<f64>,
    sinks: Vec<usize>,
}

/// Laplacian `H0` of `graph`.
pub fn laplacian(graph: &Graph) -> LatticeOperator {
    let n = graph.sites();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for &(a, b) in graph.edges() {
        m[(a, b)] -= 1.0;
        m[(b, a)] -= 1.0;
        m[(a, a)] += 1.0;
        m[(b, b)] += 1.0;
    }
    LatticeOperator {
        kind: OperatorKind::Laplacian,
        laplacian: m,
        sinks: Vec::new(),
    }
}

/// `H = H0 - iΓ` with unit leak rate on every sink.
pub fn coherent_hamiltonian(h0: &LatticeOperator, sinks: &[usize]) -> Result<LatticeOperator> {
    h0.with_sinks(OperatorKind::Coherent, sinks)
}

/// `T = -H0 - Γ`.
pub fn transfer_matrix(h0: &LatticeOperator, sinks: &[usize]) -> Result<LatticeOperator> {
    h0.with_sinks(OperatorKind::Transfer, sinks)
}

impl LatticeOperator {
    fn with_sinks(&self, kind: OperatorKind, sinks: &[usize]) -> Result<Self> {
        if self.kind != OperatorKind::Laplacian {
            return Err(Error::invalid("sink operators are built from a bare Laplacian"));
        }
        let n = self.dim();
        let mut sorted = sinks.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if let Some(&s) = sorted.iter().find(|&&s| s >= n) {
            return Err(Error::invalid(format!("sink {s} outside 0..{n}")));
        }
        Ok(LatticeOperator {
            kind,
            laplacian: self.laplacian.clone(),
            sinks: sorted,
        })
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.laplacian.nrows()
    }

    pub fn sinks(&self) -> &[usize] {
        &self.sinks
    }

    /// The underlying Laplacian `H0`.
    pub fn laplacian(&self) -> &DMatrix<f64> {
        &self.laplacian
    }

    /// Real matrix for the symmetric variants (`H0` or `T`).
    pub fn real_matrix(&self) -> Option<DMatrix<f64>> {
        match self.kind {
            OperatorKind::Laplacian => Some(self.laplacian.clone()),
            OperatorKind::Transfer => {
                let mut t = -&self.laplacian;
                for &s in &self.sinks {
                    t[(s, s)] -= 1.0;
                }
                Some(t)
            }
            OperatorKind::Coherent => None,
        }
    }

    /// Complex matrix for any variant.
    pub fn complex_matrix(&self) -> DMatrix<Complex64> {
        match self.real_matrix() {
            Some(m) => m.map(|x| Complex64::new(x, 0.0)),
            None => {
                let mut h = self.laplacian.map(|x| Complex64::new(x, 0.0));
                for &s in &self.sinks {
                    h[(s, s)] -= Complex64::new(0.0, 1.0);
                }
                h
            }
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.complex_matrix().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Plain-text dump: one row per line, entries as `re,im` separated by spaces.
    pub fn dump(&self) -> String {
        dump_matrix(&self.complex_matrix())
    }
}

pub fn dump_matrix(m: &DMatrix<Complex64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|j| format!("{:e},{:e}", m[(i, j)].re, m[(i, j)].im))
            .collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

/// Eigendecomposition of a real symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymmetricDecomposition {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, aligned with `values`.
    pub vectors: DMatrix<f64>,
    pub residuals: Vec<f64>,
    pub norm: f64,
}

impl SymmetricDecomposition {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index ranges of degenerate eigenvalue groups.
    pub fn degenerate_groups(&self) -> Vec<Range<usize>> {
        group_sorted(&self.values, DEGENERACY_TOL * self.norm.max(1.0))
    }
}

/// Splits an ascending sequence into runs whose neighbours differ by `<= tol`.
pub fn group_sorted(values: &[f64], tol: f64) -> Vec<Range<usize>> {
    let mut groups = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || values[i] - values[i - 1] > tol {
            if i > start {
                groups.push(start..i);
            }
            start = i;
        }
    }
    groups
}

/// Symmetric eigensolve with ascending sort and residual verification.
pub fn eig_symmetric(matrix: &DMatrix<f64>) -> Result<SymmetricDecomposition> {
    let n = matrix.nrows();
    if n != matrix.ncols() {
        return Err(Error::invalid("eigensolve needs a square matrix"));
    }
    let norm = matrix.norm();
    if n == 0 {
        return Ok(SymmetricDecomposition {
            values: Vec::new(),
            vectors: DMatrix::zeros(0, 0),
            residuals: Vec::new(),
            norm,
        });
    }
    let eig = SymmetricEigen::try_new(matrix.clone(), f64::EPSILON, MAX_ITER).ok_or_else(|| {
        Error::Numerical {
            message: format!("symmetric eigensolver did not converge (n = {n})"),
            dump: Some(dump_matrix(&matrix.map(|x| Complex64::new(x, 0.0)))),
        }
    })?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, idx[c])]);
    let bound = RESIDUAL_TOL * norm.max(1.0);
    let mut residuals = Vec::with_capacity(n);
    for (k, &e) in values.iter().enumerate() {
        let v = vectors.column(k);
        let res = (matrix * v - v * e).norm();
        if !(res <= bound) {
            return Err(Error::Numerical {
                message: format!("eigenpair {k} residual {res:e} exceeds {bound:e}"),
                dump: Some(dump_matrix(&matrix.map(|x| Complex64::new(x, 0.0)))),
            });
        }
        residuals.push(res);
    }
    Ok(SymmetricDecomposition {
        values,
        vectors,
        residuals,
        norm,
    })
}

/// Decomposes a real symmetric operator (`H0` or `T`).
pub fn eig_hermitian(op: &LatticeOperator) -> Result<SymmetricDecomposition> {
    let m = op
        .real_matrix()
        .ok_or_else(|| Error::invalid("eig_hermitian needs a real symmetric operator"))?;
    eig_symmetric(&m)
}

/// Eigendecomposition of a general complex matrix.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub values: Vec<Complex64>,
    /// Unit-norm right eigenvectors as columns.
    pub vectors: DMatrix<Complex64>,
    pub residuals: Vec<f64>,
    pub norm: f64,
}

impl SpectralDecomposition {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Default real-eigenvalue tolerance `1e-12 · max(1, ‖A‖_F)`.
    pub fn default_real_tol(&self) -> f64 {
        REAL_EIGENVALUE_TOL * self.norm.max(1.0)
    }

    pub fn is_real(&self, k: usize, tol: f64) -> bool {
        self.values[k].im.abs() <= tol
    }

    pub fn is_zero(&self, k: usize, tol: f64) -> bool {
        self.values[k].norm() <= tol
    }
}

impl From<&SymmetricDecomposition> for SpectralDecomposition {
    fn from(d: &SymmetricDecomposition) -> Self {
        SpectralDecomposition {
            values: d.values.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            vectors: d.vectors.map(|x| Complex64::new(x, 0.0)),
            residuals: d.residuals.clone(),
            norm: d.norm,
        }
    }
}

/// Indices whose eigenvalue satisfies `|Im E| <= tol`.
pub fn classify_real_eigenvalues(d: &SpectralDecomposition, tol: f64) -> Vec<usize> {
    (0..d.len()).filter(|&k| d.is_real(k, tol)).collect()
}

/// Complex eigensolve: eigenvalues from a complex Schur form, eigenvectors
/// as the null space of `A - λ I` for each cluster of (numerically) equal
/// eigenvalues. Eigenvalues come back sorted by `(re, im)`.
///
/// Fails with [`Error::Numerical`] when the matrix is defective: the open
/// lattice Hamiltonian hits exceptional points for some bond sets, and no
/// eigenbasis exists there. [`real_eigenpairs`] still works in that case.
pub fn eig_complex(matrix: &DMatrix<Complex64>) -> Result<SpectralDecomposition> {
    eigenpairs(matrix, None)
}

/// Eigenpairs of the eigenvalues with `|Im E| <= 1e-12 · max(1, ‖A‖_F)` only.
///
/// For `H = H0 - iΓ` these span the dark subspace, which reduces `H`, so the
/// pairs are well defined even when decaying modes are defective.
pub fn real_eigenpairs(matrix: &DMatrix<Complex64>) -> Result<SpectralDecomposition> {
    let norm = matrix.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    eigenpairs(matrix, Some(REAL_EIGENVALUE_TOL * norm.max(1.0)))
}

fn eigenpairs(matrix: &DMatrix<Complex64>, real_only: Option<f64>) -> Result<SpectralDecomposition> {
    let n = matrix.nrows();
    if n != matrix.ncols() {
        return Err(Error::invalid("eigensolve needs a square matrix"));
    }
    let norm = matrix.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let fail = |message: String| Error::Numerical {
        message,
        dump: Some(dump_matrix(matrix)),
    };
    if n == 0 {
        return Ok(SpectralDecomposition {
            values: Vec::new(),
            vectors: DMatrix::zeros(0, 0),
            residuals: Vec::new(),
            norm,
        });
    }
    let schur = Schur::try_new(matrix.clone(), f64::EPSILON, MAX_ITER)
        .ok_or_else(|| fail(format!("complex Schur iteration did not converge (n = {n})")))?;
    let (_, t) = schur.unpack();
    let mut values: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();
    values.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));

    // cluster eigenvalues closer than `cluster_tol` (transitively)
    let cluster_tol = 1e-8 * norm.max(1.0);
    let mut cluster_of: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in 0..i {
            if (values[i] - values[j]).norm() <= cluster_tol {
                let (a, b) = (cluster_of[i], cluster_of[j]);
                let keep = a.min(b);
                for c in cluster_of.iter_mut() {
                    if *c == a || *c == b {
                        *c = keep;
                    }
                }
            }
        }
    }

    let bound = RESIDUAL_TOL * norm.max(1.0);
    let mut vectors = DMatrix::<Complex64>::zeros(n, n);
    let mut residuals = vec![0.0; n];
    let mut done = vec![false; n];
    let mut kept = vec![false; n];
    for i in 0..n {
        if done[i] {
            continue;
        }
        let members: Vec<usize> = (0..n).filter(|&j| cluster_of[j] == cluster_of[i]).collect();
        let g = members.len();
        let centre = members.iter().map(|&j| values[j]).sum::<Complex64>() / g as f64;
        if let Some(tol) = real_only {
            if members.iter().any(|&j| values[j].im.abs() > tol) {
                members.iter().for_each(|&j| done[j] = true);
                continue;
            }
        }
        let shifted = matrix - DMatrix::<Complex64>::identity(n, n) * centre;
        let svd = SVD::try_new(shifted, false, true, f64::EPSILON, MAX_ITER)
            .ok_or_else(|| fail("SVD of shifted matrix did not converge".into()))?;
        let v_t = svd.v_t.expect("requested V^T");
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
        // orthonormal null-space basis; diagonalise A on it so each column is
        // a genuine eigenvector even when the cluster holds distinct values
        let sigma = svd.singular_values[order[g - 1]];
        if g > 1 && !(sigma <= bound) {
            return Err(fail(format!(
                "defective eigenvalue {centre}: {g}-fold cluster but singular value {sigma:e} > {bound:e}"
            )));
        }
        let basis = DMatrix::from_fn(n, g, |r, c| v_t[(order[c], r)].conj());
        let (local_vals, local_vecs) = if g == 1 {
            let v = basis.column(0);
            let rq = (v.adjoint() * matrix * v)[(0, 0)];
            (vec![rq], DMatrix::identity(1, 1))
        } else {
            let reduced = basis.adjoint() * matrix * &basis;
            let sub = eig_complex_small(&reduced)?;
            (sub.0, sub.1)
        };
        for (k, &j) in members.iter().enumerate() {
            let mut v: DVector<Complex64> = &basis * local_vecs.column(k);
            let nv = v.norm();
            v /= Complex64::new(nv, 0.0);
            let e = local_vals[k];
            let res = (matrix * &v - &v * e).norm();
            if !(res <= bound) {
                return Err(fail(format!(
                    "eigenvector for eigenvalue {e} has residual {res:e} > {bound:e}"
                )));
            }
            values[j] = e;
            vectors.set_column(j, &v);
            residuals[j] = res;
            done[j] = true;
            kept[j] = true;
        }
    }
    let keep: Vec<usize> = (0..n).filter(|&j| kept[j]).collect();
    Ok(SpectralDecomposition {
        values: keep.iter().map(|&j| values[j]).collect(),
        vectors: vectors.select_columns(&keep),
        residuals: keep.iter().map(|&j| residuals[j]).collect(),
        norm,
    })
}

/// Diagonalises the small projected matrix of a near-degenerate cluster.
/// A cluster is numerically a scalar multiple of the identity plus a tiny
/// perturbation, so the projected matrix is close to normal and its Schur
/// vectors are (approximate) eigenvectors.
fn eig_complex_small(m: &DMatrix<Complex64>) -> Result<(Vec<Complex64>, DMatrix<Complex64>)> {
    let g = m.nrows();
    let schur = Schur::try_new(m.clone(), f64::EPSILON, MAX_ITER)
        .ok_or_else(|| Error::numerical("projected Schur iteration did not converge"))?;
    let (q, t) = schur.unpack();
    let vals = (0..g).map(|i| t[(i, i)]).collect();
    Ok((vals, q))
}

/// Eigendecomposition of a Laplacian carried out separately on each
/// connected component. Every eigenvector is supported on one component,
/// which pins down a canonical basis inside eigenspaces that are degenerate
/// across components (at `p = 0` every site is its own zero mode).
#[derive(Debug, Clone)]
pub struct BlockSpectrum {
    sites: usize,
    components: Vec<Vec<usize>>,
    blocks: Vec<SymmetricDecomposition>,
}

/// One eigenpair of a [`BlockSpectrum`], addressed by component and column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockPair {
    pub value: f64,
    pub component: usize,
    pub column: usize,
}

impl BlockSpectrum {
    pub fn new(graph: &Graph) -> Result<Self> {
        let components = graph.components();
        let mut slot = vec![(0usize, 0usize); graph.sites()];
        for (c, comp) in components.iter().enumerate() {
            for (local, &site) in comp.iter().enumerate() {
                slot[site] = (c, local);
            }
        }
        let mut mats: Vec<DMatrix<f64>> = components
            .iter()
            .map(|comp| DMatrix::zeros(comp.len(), comp.len()))
            .collect();
        for &(a, b) in graph.edges() {
            let (c, i) = slot[a];
            let (_, j) = slot[b];
            let m = &mut mats[c];
            m[(i, j)] -= 1.0;
            m[(j, i)] -= 1.0;
            m[(i, i)] += 1.0;
            m[(j, j)] += 1.0;
        }
        let blocks = mats.iter().map(eig_symmetric).collect::<Result<Vec<_>>>()?;
        Ok(BlockSpectrum {
            sites: graph.sites(),
            components,
            blocks,
        })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }

    pub fn blocks(&self) -> &[SymmetricDecomposition] {
        &self.blocks
    }

    /// All eigenpairs, ascending in eigenvalue (ties keep component order).
    pub fn pairs(&self) -> Vec<BlockPair> {
        let mut pairs: Vec<BlockPair> = self
            .blocks
            .iter()
            .enumerate()
            .flat_map(|(component, d)| {
                d.values.iter().enumerate().map(move |(column, &value)| BlockPair {
                    value,
                    component,
                    column,
                })
            })
            .collect();
        pairs.sort_by(|a, b| a.value.total_cmp(&b.value));
        pairs
    }

    /// Eigenvector of `pair` scattered onto all sites.
    pub fn vector(&self, pair: &BlockPair) -> Vec<f64> {
        let mut v = vec![0.0; self.sites];
        let col = self.blocks[pair.component].vectors.column(pair.column);
        for (local, &site) in self.components[pair.component].iter().enumerate() {
            v[site] = col[local];
        }
        v
    }
}
