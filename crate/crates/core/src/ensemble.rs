//! Deterministic parallel Monte Carlo over lattice realizations.
//!
//! Every realization `r` of correlation strength `m` draws from its own
//! ChaCha8 stream: the key is the master seed expanded to 32 bytes with
//! SplitMix64, and the 64-bit stream id is `(m << 32) | r`, with bit 63 set
//! for the single retry a failed realization gets. Streams never depend on
//! scheduling, and per-grid-point statistics are folded sequentially in
//! realization order, so the output is identical for any worker count.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::eigenstats::{eigenstate_profiles, AMPLITUDE_TOL, EigenstatAccumulator, EigenstatSummary, EigenstateProfile};
use crate::lattice::Lattice;
use crate::percolation::{grow_trajectory, ClusterState, GrowthTrajectory};
use crate::spectral::BlockSpectrum;
use crate::transport::{connectivity_oracle, dark_state_survival, incoherent_survival, TransportProblem};
use crate::{Error, Result};

/// Correlation strengths swept by default.
pub const DEFAULT_MS: [usize; 7] = [1, 2, 4, 8, 16, 32, 84];
pub const DEFAULT_SIDE: usize = 7;
pub const DEFAULT_REALIZATIONS: usize = 4000;
pub const DEFAULT_SEED: u64 = 42;
/// Largest tolerated fraction of realizations needing a retry.
pub const MAX_FAILURE_FRACTION: f64 = 1e-3;

const CHUNK: usize = 256;

/// Identifies the random stream of one realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub master: u64,
    pub m: u64,
    pub realization: u64,
    pub retry: bool,
}

impl StreamKey {
    pub fn new(master: u64, m: u64, realization: u64) -> Self {
        StreamKey {
            master,
            m,
            realization,
            retry: false,
        }
    }

    pub fn stream_id(&self) -> u64 {
        assert!(self.m < 1 << 31, "m must be below 2^31");
        assert!(self.realization < 1 << 32, "realization index must be below 2^32");
        (u64::from(self.retry) << 63) | (self.m << 32) | self.realization
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        let mut state = self.master;
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.stream_id());
        rng
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random stream for realization `r` of strength `m` under `master`.
pub fn derive_stream(master: u64, m: u64, r: u64) -> ChaCha8Rng {
    StreamKey::new(master, m, r).rng()
}

/// Welford running mean and variance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    count: usize,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample standard deviation over `√count`; zero below two samples.
    pub fn stderr(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let var = self.m2 / (self.count - 1) as f64;
        (var / self.count as f64).sqrt()
    }

    pub fn estimate(&self, p: f64) -> CurveEstimate {
        CurveEstimate {
            p,
            mean: self.mean,
            stderr: self.stderr(),
            count: self.count,
        }
    }
}

/// Ensemble mean of one observable at one bond fraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveEstimate {
    pub p: f64,
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

/// Bond counts at which observables are evaluated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Grid {
    /// `0, s, 2s, …` plus the full lattice.
    Stride(usize),
    Explicit(Vec<usize>),
}

impl Grid {
    pub fn points(&self, bonds: usize) -> Result<Vec<usize>> {
        match self {
            Grid::Stride(0) => Err(Error::Config("grid stride must be >= 1".into())),
            Grid::Stride(s) => {
                let mut pts: Vec<usize> = (0..=bonds).step_by(*s).collect();
                if pts.last() != Some(&bonds) {
                    pts.push(bonds);
                }
                Ok(pts)
            }
            Grid::Explicit(pts) => {
                if pts.is_empty() {
                    return Err(Error::Config("explicit grid is empty".into()));
                }
                if pts.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Config("explicit grid must be strictly ascending".into()));
                }
                if pts.iter().any(|&n| n > bonds) {
                    return Err(Error::Config(format!("grid point beyond {bonds} bonds")));
                }
                Ok(pts.clone())
            }
        }
    }
}

/// Which observable families to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observables {
    pub transport: bool,
    pub cluster: bool,
    pub eigenstats: bool,
}

impl Default for Observables {
    fn default() -> Self {
        Observables {
            transport: true,
            cluster: true,
            eigenstats: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub side: usize,
    pub ms: Vec<usize>,
    pub realizations: usize,
    pub grid: Grid,
    pub seed: u64,
    pub observables: Observables,
    /// Worker threads; `None` uses the rayon default.
    pub threads: Option<usize>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            side: DEFAULT_SIDE,
            ms: DEFAULT_MS.to_vec(),
            realizations: DEFAULT_REALIZATIONS,
            grid: Grid::Stride(1),
            seed: DEFAULT_SEED,
            observables: Observables::default(),
            threads: None,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.side < 2 {
            return Err(Error::Config("L must be >= 2".into()));
        }
        if self.side * self.side > 400 {
            return Err(Error::Config("L*L must not exceed 400".into()));
        }
        if self.realizations == 0 {
            return Err(Error::Config("realizations must be >= 1".into()));
        }
        if self.ms.is_empty() || self.ms.iter().any(|&m| m == 0 || m >= 1 << 31) {
            return Err(Error::Config("m values must lie in 1..2^31".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be >= 1".into()));
        }
        self.grid.points(2 * self.side * (self.side - 1))?;
        Ok(())
    }

    /// Applies `key=value` lines (INI style; `#`/`;` comments and `[section]`
    /// headers are ignored). Unknown keys are an error.
    pub fn apply_ini(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') || line.starts_with('[') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", lineno + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("bad value {v:?} for {key}")))
        }
        fn list(key: &str, v: &str) -> Result<Vec<usize>> {
            v.split(',').map(|x| num(key, x.trim())).collect()
        }
        match key.to_ascii_lowercase().as_str() {
            "l" | "side" => self.side = num(key, value)?,
            "m" | "ms" => self.ms = list(key, value)?,
            "realizations" | "r" => self.realizations = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "grid_stride" | "grid-stride" => self.grid = Grid::Stride(num(key, value)?),
            "grid" => self.grid = Grid::Explicit(list(key, value)?),
            "threads" => self.threads = Some(num(key, value)?),
            "observables" => {
                let mut obs = Observables {
                    transport: false,
                    cluster: false,
                    eigenstats: false,
                };
                for item in value.split(',').map(str::trim) {
                    match item {
                        "transport" => obs.transport = true,
                        "cluster" => obs.cluster = true,
                        "eigenstats" => obs.eigenstats = true,
                        "all" => obs = Observables::default(),
                        other => return Err(Error::Config(format!("unknown observable {other:?}"))),
                    }
                }
                self.observables = obs;
            }
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Snapshot in the same `key=value` format `apply_ini` reads.
    pub fn to_ini(&self) -> String {
        let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let mut out = String::new();
        let _ = writeln!(out, "L={}", self.side);
        let _ = writeln!(out, "m={}", join(&self.ms));
        let _ = writeln!(out, "realizations={}", self.realizations);
        let _ = writeln!(out, "seed={}", self.seed);
        match &self.grid {
            Grid::Stride(s) => {
                let _ = writeln!(out, "grid_stride={s}");
            }
            Grid::Explicit(pts) => {
                let _ = writeln!(out, "grid={}", join(pts));
            }
        }
        let mut obs = Vec::new();
        if self.observables.transport {
            obs.push("transport");
        }
        if self.observables.cluster {
            obs.push("cluster");
        }
        if self.observables.eigenstats {
            obs.push("eigenstats");
        }
        let _ = writeln!(out, "observables={}", obs.join(","));
        out
    }
}

/// Observables of one realization at one grid point.
#[derive(Debug, Clone)]
pub struct PointObservation {
    pub mu_c: f64,
    pub mu_i: f64,
    pub zeta: f64,
    pub profiles: Vec<EigenstateProfile>,
}

/// Per-realization checks against the independent routes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    /// Largest `|P_spectral - P_connectivity|`.
    pub max_oracle_deviation: f64,
    /// Smallest `Π - P` (coherent minus incoherent survival).
    pub min_survival_gap: f64,
    /// Smallest `Π - (sink-free sources)/L`.
    pub min_floor_margin: f64,
    pub min_xi: f64,
    pub max_xi: f64,
    /// Eigenstates with `ν = 1` but support below `L`.
    pub support_violations: usize,
    /// Eigenstates with `ν = 1` whose cluster does not wrap.
    pub cluster_flag_violations: usize,
}

impl Default for Diagnostics {
    fn default() -> Self {
        Diagnostics {
            max_oracle_deviation: 0.0,
            min_survival_gap: f64::INFINITY,
            min_floor_margin: f64::INFINITY,
            min_xi: f64::INFINITY,
            max_xi: f64::NEG_INFINITY,
            support_violations: 0,
            cluster_flag_violations: 0,
        }
    }
}

impl Diagnostics {
    pub fn merge(&mut self, other: &Diagnostics) {
        self.max_oracle_deviation = self.max_oracle_deviation.max(other.max_oracle_deviation);
        self.min_survival_gap = self.min_survival_gap.min(other.min_survival_gap);
        self.min_floor_margin = self.min_floor_margin.min(other.min_floor_margin);
        self.min_xi = self.min_xi.min(other.min_xi);
        self.max_xi = self.max_xi.max(other.max_xi);
        self.support_violations += other.support_violations;
        self.cluster_flag_violations += other.cluster_flag_violations;
    }
}

/// Everything computed for one realization.
#[derive(Debug, Clone)]
pub struct RealizationOutcome {
    pub key: StreamKey,
    pub first_wrapping: Option<usize>,
    pub points: Vec<PointObservation>,
    pub diagnostics: Diagnostics,
}

/// Observables of a cluster state, updating `diag` with the cross-checks.
pub fn observe_state(
    lattice: &Lattice,
    state: &ClusterState,
    observables: Observables,
    diag: &mut Diagnostics,
) -> Result<PointObservation> {
    let sites = lattice.site_count();
    let mut obs = PointObservation {
        mu_c: f64::NAN,
        mu_i: f64::NAN,
        zeta: state.largest_cluster() as f64 / sites as f64,
        profiles: Vec::new(),
    };
    if !(observables.transport || observables.eigenstats) {
        return Ok(obs);
    }
    let problem = TransportProblem::on_lattice(lattice, state.occupied_bonds().iter().copied());
    let spectrum = BlockSpectrum::new(problem.graph())?;
    if observables.transport {
        let mut is_sink = vec![false; sites];
        for &s in lattice.sinks() {
            is_sink[s] = true;
        }
        let (pi, _) = dark_state_survival(&spectrum, &is_sink, &problem.coherent_state());
        let p_spec = incoherent_survival(&problem)?.survival;
        let p_oracle = connectivity_oracle(state);
        diag.max_oracle_deviation = diag.max_oracle_deviation.max((p_spec - p_oracle).abs());
        diag.min_survival_gap = diag.min_survival_gap.min(pi - p_spec);
        diag.min_floor_margin = diag.min_floor_margin.min(pi - p_oracle);
        if !(-1e-9..=1.0 + 1e-9).contains(&pi) {
            return Err(Error::numerical(format!("coherent survival {pi} outside [0, 1]")));
        }
        obs.mu_c = 1.0 - pi;
        obs.mu_i = 1.0 - p_spec;
    }
    if observables.eigenstats {
        let profiles = eigenstate_profiles(&spectrum, lattice.sources(), lattice.sinks())?;
        for p in &profiles {
            diag.min_xi = diag.min_xi.min(p.xi);
            diag.max_xi = diag.max_xi.max(p.xi);
        }
        diag.support_violations += profiles
            .iter()
            .filter(|p| p.contributes && p.support < lattice.side())
            .count();
        // each eigenvector lives on one cluster; ν = 1 needs that cluster to wrap
        for (comp, block) in spectrum.components().iter().zip(spectrum.blocks()) {
            let wraps = state.touches_left(comp[0]) && state.touches_right(comp[0]);
            if wraps {
                continue;
            }
            for k in 0..block.len() {
                let col = block.vectors.column(k);
                let on = |edge: fn(&Lattice, usize) -> bool| {
                    comp.iter()
                        .zip(col.iter())
                        .any(|(&s, v)| edge(lattice, s) && v.abs() > AMPLITUDE_TOL)
                };
                let (left, right) = (on(Lattice::is_source), on(Lattice::is_sink));
                if left && right {
                    diag.cluster_flag_violations += 1;
                }
            }
        }
        obs.profiles = profiles;
    }
    Ok(obs)
}

/// Grows one realization and evaluates it on `grid`.
pub fn run_realization(
    lattice: &Lattice,
    m: usize,
    key: StreamKey,
    grid: &[usize],
    observables: Observables,
) -> Result<RealizationOutcome> {
    let mut rng = key.rng();
    let mut traj: GrowthTrajectory = grow_trajectory(lattice, m, &mut rng)?;
    traj.seed = Some(key);
    let mut state = ClusterState::new(lattice);
    let mut diagnostics = Diagnostics::default();
    let mut points = Vec::with_capacity(grid.len());
    let mut added = 0;
    for &n in grid {
        while added < n {
            state.add_bond(lattice, traj.order()[added])?;
            added += 1;
        }
        points.push(observe_state(lattice, &state, observables, &mut diagnostics)?);
    }
    Ok(RealizationOutcome {
        key,
        first_wrapping: traj.first_wrapping(),
        points,
        diagnostics,
    })
}

/// Aggregated curves for one correlation strength.
#[derive(Debug, Clone)]
pub struct StrengthResult {
    pub m: usize,
    pub grid: Vec<usize>,
    pub p: Vec<f64>,
    pub mu_c: Vec<CurveEstimate>,
    pub mu_i: Vec<CurveEstimate>,
    pub zeta: Vec<CurveEstimate>,
    pub eigenstats: Vec<EigenstatSummary>,
    /// Bond fraction of first wrapping, `p` field unused (NaN).
    pub p_w: CurveEstimate,
    pub diagnostics: Diagnostics,
    pub retried: Vec<StreamKey>,
}

#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub config: EnsembleConfig,
    pub strengths: Vec<StrengthResult>,
}

struct Accumulators {
    mu_c: Vec<RunningStats>,
    mu_i: Vec<RunningStats>,
    zeta: Vec<RunningStats>,
    eig: Vec<EigenstatAccumulator>,
    p_w: RunningStats,
    diagnostics: Diagnostics,
}

/// Runs the whole ensemble described by `config`.
pub fn run_ensemble(config: &EnsembleConfig) -> Result<EnsembleResult> {
    config.validate()?;
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(t) = config.threads {
            b = b.num_threads(t);
        }
        b.build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
    };
    pool.install(|| run_inner(config))
}

fn run_inner(config: &EnsembleConfig) -> Result<EnsembleResult> {
    let lattice = Lattice::new(config.side)?;
    let bonds = lattice.bond_count();
    let grid = config.grid.points(bonds)?;
    let p: Vec<f64> = grid.iter().map(|&n| n as f64 / bonds as f64).collect();
    let total = config.realizations * config.ms.len();
    let mut failures = 0usize;
    let mut strengths = Vec::with_capacity(config.ms.len());
    for &m in &config.ms {
        let mut acc = Accumulators {
            mu_c: vec![RunningStats::default(); grid.len()],
            mu_i: vec![RunningStats::default(); grid.len()],
            zeta: vec![RunningStats::default(); grid.len()],
            eig: vec![EigenstatAccumulator::new(lattice.site_count()); grid.len()],
            p_w: RunningStats::default(),
            diagnostics: Diagnostics::default(),
        };
        let mut retried = Vec::new();
        let mut start = 0;
        while start < config.realizations {
            let end = (start + CHUNK).min(config.realizations);
            let outcomes: Vec<(Result<RealizationOutcome>, bool)> = (start..end)
                .into_par_iter()
                .map(|r| {
                    let key = StreamKey::new(config.seed, m as u64, r as u64);
                    match run_realization(&lattice, m, key, &grid, config.observables) {
                        Ok(o) => (Ok(o), false),
                        Err(Error::Numerical { .. }) => {
                            let retry = StreamKey { retry: true, ..key };
                            (run_realization(&lattice, m, retry, &grid, config.observables), true)
                        }
                        Err(e) => (Err(e), false),
                    }
                })
                .collect();
            for (outcome, was_retried) in outcomes {
                let outcome = outcome?;
                if was_retried {
                    failures += 1;
                    retried.push(outcome.key);
                    if failures as f64 > MAX_FAILURE_FRACTION * total as f64 {
                        return Err(Error::numerical(format!(
                            "{failures} of {total} realizations failed numerically; aborting"
                        )));
                    }
                }
                fold(&mut acc, &outcome, config.observables, bonds);
            }
            start = end;
        }
        let nan_or = |flag: bool, stats: &[RunningStats]| -> Vec<CurveEstimate> {
            stats
                .iter()
                .zip(&p)
                .map(|(s, &pp)| {
                    if flag {
                        s.estimate(pp)
                    } else {
                        CurveEstimate { p: pp, mean: f64::NAN, stderr: f64::NAN, count: 0 }
                    }
                })
                .collect()
        };
        strengths.push(StrengthResult {
            m,
            grid: grid.clone(),
            p: p.clone(),
            mu_c: nan_or(config.observables.transport, &acc.mu_c),
            mu_i: nan_or(config.observables.transport, &acc.mu_i),
            zeta: nan_or(true, &acc.zeta),
            eigenstats: if config.observables.eigenstats {
                acc.eig.iter().zip(&p).map(|(e, &pp)| e.finish(pp)).collect()
            } else {
                Vec::new()
            },
            p_w: acc.p_w.estimate(f64::NAN),
            diagnostics: acc.diagnostics,
            retried,
        });
    }
    Ok(EnsembleResult {
        config: config.clone(),
        strengths,
    })
}

fn fold(acc: &mut Accumulators, o: &RealizationOutcome, obs: Observables, bonds: usize) {
    for (i, pt) in o.points.iter().enumerate() {
        if obs.transport {
            acc.mu_c[i].push(pt.mu_c);
            acc.mu_i[i].push(pt.mu_i);
        }
        acc.zeta[i].push(pt.zeta);
        if obs.eigenstats {
            acc.eig[i].push(&pt.profiles);
        }
    }
    if let Some(n) = o.first_wrapping {
        acc.p_w.push(n as f64 / bonds as f64);
    }
    acc.diagnostics.merge(&o.diagnostics);
}

/// Formats `x` rounded to 12 significant digits, shortest round-trip form.
pub fn fmt_sig(x: f64) -> String {
    if !x.is_finite() {
        return "nan".into();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    let s = format!("{rounded}");
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

/// Curve files written by [`write_outputs`], by file name.
pub const CURVE_FILES: [&str; 5] = ["mu_c.csv", "mu_i.csv", "zeta.csv", "gamma.csv", "xi_avg.csv"];

fn curve_csv(rows: impl Iterator<Item = (usize, CurveEstimate)>) -> String {
    let mut out = String::from("m,p,mean,stderr,count\n");
    for (m, c) in rows {
        let _ = writeln!(out, "{},{},{},{},{}", m, fmt_sig(c.p), fmt_sig(c.mean), fmt_sig(c.stderr), c.count);
    }
    out
}

/// Renders every output file as `(name, contents)`, in a fixed order.
pub fn render_outputs(result: &EnsembleResult) -> Vec<(String, String)> {
    let obs = result.config.observables;
    let s = &result.strengths;
    let mut files: Vec<(String, String)> = Vec::new();
    let family = |f: &dyn Fn(&StrengthResult) -> Vec<CurveEstimate>| {
        curve_csv(s.iter().flat_map(|r| f(r).into_iter().map(move |c| (r.m, c))))
    };
    if obs.transport {
        files.push(("mu_c.csv".into(), family(&|r| r.mu_c.clone())));
        files.push(("mu_i.csv".into(), family(&|r| r.mu_i.clone())));
    }
    files.push(("zeta.csv".into(), family(&|r| r.zeta.clone())));
    if obs.eigenstats {
        files.push(("gamma.csv".into(), family(&|r| r.eigenstats.iter().map(|e| e.gamma).collect())));
        files.push(("xi_avg.csv".into(), family(&|r| r.eigenstats.iter().map(|e| e.xi_avg).collect())));
        for (name, pick) in [
            ("xi_l", (|e: &EigenstatSummary| e.xi.clone()) as fn(&EigenstatSummary) -> Vec<CurveEstimate>),
            ("nu_l", |e: &EigenstatSummary| e.nu.clone()),
        ] {
            let mut long = String::from("m,p,l,mean,stderr,count\n");
            for r in s {
                for e in &r.eigenstats {
                    for (l, c) in pick(e).iter().enumerate() {
                        let _ = writeln!(long, "{},{},{},{},{},{}", r.m, fmt_sig(c.p), l + 1, fmt_sig(c.mean), fmt_sig(c.stderr), c.count);
                    }
                }
            }
            files.push((format!("{name}.csv"), long));
            for r in s {
                let mut heat = String::from("l");
                for p in &r.p {
                    let _ = write!(heat, ",{}", fmt_sig(*p));
                }
                heat.push('\n');
                let states = r.eigenstats.first().map_or(0, |e| pick(e).len());
                for l in 0..states {
                    let _ = write!(heat, "{}", l + 1);
                    for e in &r.eigenstats {
                        let _ = write!(heat, ",{}", fmt_sig(pick(e)[l].mean));
                    }
                    heat.push('\n');
                }
                files.push((format!("{name}_heatmap_m{}.csv", r.m), heat));
            }
        }
    }
    let mut pw = String::from("m,mean,stderr,count\n");
    for r in s {
        let _ = writeln!(pw, "{},{},{},{}", r.m, fmt_sig(r.p_w.mean), fmt_sig(r.p_w.stderr), r.p_w.count);
    }
    files.push(("p_w.csv".into(), pw));
    let mut diag = String::from(
        "m,max_oracle_deviation,min_survival_gap,min_floor_margin,min_xi,max_xi,support_violations,cluster_flag_violations,retried\n",
    );
    for r in s {
        let d = &r.diagnostics;
        let _ = writeln!(
            diag,
            "{},{},{},{},{},{},{},{},{}",
            r.m,
            fmt_sig(d.max_oracle_deviation),
            fmt_sig(d.min_survival_gap),
            fmt_sig(d.min_floor_margin),
            fmt_sig(d.min_xi),
            fmt_sig(d.max_xi),
            d.support_violations,
            d.cluster_flag_violations,
            r.retried.len()
        );
    }
    files.push(("diagnostics.csv".into(), diag));
    files
}

/// Writes all output files into `dir`, returning their paths.
pub fn write_outputs(result: &EnsembleResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for (name, body) in render_outputs(result) {
        let path = dir.join(name);
        fs::write(&path, body)?;
        paths.push(path);
    }
    Ok(paths)
}

/// One parsed row of a `m,p,mean,stderr,count` curve file.
pub type CurveTable = BTreeMap<usize, Vec<CurveEstimate>>;

/// Reads a curve CSV back into per-`m` series.
pub fn read_curve_csv(path: &Path) -> Result<CurveTable> {
    let text = fs::read_to_string(path)?;
    let perr = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| perr("empty file".into()))?;
    if header.trim() != "m,p,mean,stderr,count" {
        return Err(perr(format!("unexpected header {header:?}")));
    }
    let mut table = CurveTable::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(perr(format!("line {}: expected 5 columns", i + 2)));
        }
        let f = |s: &str| -> Result<f64> {
            if s == "nan" {
                return Ok(f64::NAN);
            }
            s.parse().map_err(|_| perr(format!("line {}: bad number {s:?}", i + 2)))
        };
        let m: usize = cols[0].parse().map_err(|_| perr(format!("line {}: bad m", i + 2)))?;
        let count: usize = cols[4].parse().map_err(|_| perr(format!("line {}: bad count", i + 2)))?;
        table.entry(m).or_default().push(CurveEstimate {
            p: f(cols[1])?,
            mean: f(cols[2])?,
            stderr: f(cols[3])?,
            count,
        });
    }
    Ok(table)
}

/// Reads `p_w.csv` into `m -> (mean, stderr, count)`.
pub fn read_p_w_csv(path: &Path) -> Result<BTreeMap<usize, CurveEstimate>> {
    let text = fs::read_to_string(path)?;
    let perr = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("m,mean,stderr,count") {
        return Err(perr("unexpected header".into()));
    }
    let mut out = BTreeMap::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(perr(format!("bad row {line:?}")));
        }
        let bad = || perr(format!("bad row {line:?}"));
        out.insert(
            cols[0].parse().map_err(|_| bad())?,
            CurveEstimate {
                p: f64::NAN,
                mean: cols[1].parse().map_err(|_| bad())?,
                stderr: cols[2].parse().map_err(|_| bad())?,
                count: cols[3].parse().map_err(|_| bad())?,
            },
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use rand::Rng;

    use super::*;

    #[test]
    fn streams_are_deterministic_and_distinct() {
        let mut a = derive_stream(9, 1, 1);
        let mut b = derive_stream(9, 1, 1);
        assert_eq!(a.random::<u64>(), b.random::<u64>());
        let mut seen = HashSet::new();
        for m in 1..=10u64 {
            for r in 0..1000u64 {
                assert!(seen.insert(derive_stream(123, m, r).random::<u64>()));
            }
        }
        let retry = StreamKey { retry: true, ..StreamKey::new(5, 2, 3) };
        assert_ne!(retry.stream_id(), StreamKey::new(5, 2, 3).stream_id());
    }

    #[test]
    fn welford_matches_two_pass() {
        let xs = [0.3, 1.7, -2.0, 5.5, 0.0, 0.25];
        let mut s = RunningStats::default();
        xs.iter().for_each(|&x| s.push(x));
        let mean = xs.iter().sum::<f64>() / 6.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 5.0;
        assert!((s.mean() - mean).abs() < 1e-14);
        assert!((s.stderr() - (var / 6.0).sqrt()).abs() < 1e-14);
        let mut one = RunningStats::default();
        one.push(3.0);
        assert_eq!(one.stderr(), 0.0);
    }

    #[test]
    fn grid_points() {
        assert_eq!(Grid::Stride(1).points(4).unwrap(), vec![0, 1, 2, 3, 4]);
        assert_eq!(Grid::Stride(3).points(7).unwrap(), vec![0, 3, 6, 7]);
        assert!(Grid::Stride(0).points(4).is_err());
        assert!(Grid::Explicit(vec![2, 1]).points(4).is_err());
        assert!(Grid::Explicit(vec![5]).points(4).is_err());
    }

    #[test]
    fn ini_round_trip_and_errors() {
        let mut c = EnsembleConfig::default();
        c.apply_ini("# comment\n[run]\nL = 5\nm = 1, 2\nrealizations=10\nseed=7\ngrid_stride=4\nobservables=transport,cluster\n")
            .unwrap();
        assert_eq!(c.side, 5);
        assert_eq!(c.ms, vec![1, 2]);
        assert!(!c.observables.eigenstats);
        let mut d = EnsembleConfig::default();
        d.apply_ini(&c.to_ini()).unwrap();
        assert_eq!(c.to_ini(), d.to_ini());
        assert!(EnsembleConfig::default().apply_ini("bogus=1").is_err());
        assert!(EnsembleConfig::default().apply_ini("L").is_err());
        assert!(EnsembleConfig::default().apply_ini("L=x").is_err());
        let mut bad = EnsembleConfig::default();
        bad.realizations = 0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn fmt_sig_rounds() {
        assert_eq!(fmt_sig(1.0), "1");
        assert_eq!(fmt_sig(0.5), "0.5");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_sig(-0.0), "0");
        assert_eq!(fmt_sig(f64::NAN), "nan");
    }

    #[test]
    fn single_realization_equals_trajectory() {
        let config = EnsembleConfig {
            side: 4,
            ms: vec![2],
            realizations: 1,
            grid: Grid::Stride(1),
            seed: 3,
            ..EnsembleConfig::default()
        };
        let res = run_ensemble(&config).unwrap();
        let l = Lattice::new(4).unwrap();
        let key = StreamKey::new(3, 2, 0);
        let traj = grow_trajectory(&l, 2, &mut key.rng()).unwrap();
        let s = &res.strengths[0];
        for (i, z) in s.zeta.iter().enumerate() {
            assert_eq!(z.mean, traj.zeta()[i]);
            assert_eq!(z.stderr, 0.0);
            assert_eq!(z.count, 1);
        }
        assert_eq!(s.p_w.mean, traj.first_wrapping().unwrap() as f64 / 24.0);
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let base = EnsembleConfig {
            side: 4,
            ms: vec![1, 3],
            realizations: 40,
            grid: Grid::Stride(2),
            seed: 11,
            ..EnsembleConfig::default()
        };
        let one = render_outputs(&run_ensemble(&EnsembleConfig { threads: Some(1), ..base.clone() }).unwrap());
        let four = render_outputs(&run_ensemble(&EnsembleConfig { threads: Some(4), ..base }).unwrap());
        assert_eq!(one, four);
    }

    #[test]
    fn curve_csv_round_trip() {
        let config = EnsembleConfig {
            side: 3,
            ms: vec![1, 2],
            realizations: 5,
            seed: 1,
            ..EnsembleConfig::default()
        };
        let res = run_ensemble(&config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_outputs(&res, dir.path()).unwrap();
        let table = read_curve_csv(&dir.path().join("mu_c.csv")).unwrap();
        assert_eq!(table.len(), 2);
        assert_eq!(table[&1].len(), 13);
        let pw = read_p_w_csv(&dir.path().join("p_w.csv")).unwrap();
        assert_eq!(pw[&2].count, 5);
    }
}
