use perctrans::ensemble::{run_ensemble, EnsembleConfig, Grid, Observables, StreamKey};
use perctrans::lattice::Lattice;
use perctrans::percolation::ClusterState;

/// Upper `1e-3` quantile of chi-square with `k` degrees of freedom
/// (Wilson–Hilferty).
fn chi2_critical_1e3(k: f64) -> f64 {
    let z = 3.090_232_306_167_813;
    let a = 2.0 / (9.0 * k);
    k * (1.0 - a + z * a.sqrt()).powi(3)
}

#[test]
fn first_bond_is_uniform_for_m1() {
    let l = Lattice::new(7).unwrap();
    let trials = 20_000;
    let mut counts = vec![0usize; l.bond_count()];
    for r in 0..trials {
        let mut state = ClusterState::new(&l);
        let b = state.select_bond(&l, 1, &mut StreamKey::new(7, 1, r).rng()).unwrap();
        counts[b] += 1;
    }
    let expected = trials as f64 / counts.len() as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let critical = chi2_critical_1e3((counts.len() - 1) as f64);
    assert!(chi2 < critical, "chi2 = {chi2} >= {critical}");
}

#[test]
fn best_of_two_avoids_a_dimer_at_the_predicted_rate() {
    // sanity check that the test above has power: with one bond placed the
    // best-of-2 rule avoids the two sites it joined
    let l = Lattice::new(3).unwrap();
    let trials = 20_000;
    let mut adjacent = 0;
    for r in 0..trials {
        let mut state = ClusterState::new(&l);
        state.add_bond(&l, 0).unwrap();
        let b = state.select_bond(&l, 2, &mut StreamKey::new(9, 2, r).rng()).unwrap();
        if state.candidate_weight(&l, b) > 1 {
            adjacent += 1;
        }
    }
    // 3 of 11 free bonds touch the dimer; both candidates must do so to pick one
    let expected = trials as f64 * (3.0 / 11.0) * (2.0 / 10.0);
    assert!((adjacent as f64 - expected).abs() < 5.0 * expected.sqrt(), "{adjacent} vs {expected}");
}

fn cluster_only(side: usize, ms: Vec<usize>, realizations: usize, grid: Grid) -> EnsembleConfig {
    EnsembleConfig {
        side,
        ms,
        realizations,
        grid,
        seed: 11,
        observables: Observables {
            transport: false,
            cluster: true,
            eigenstats: false,
        },
        threads: Some(1),
    }
}

#[test]
fn stderr_scales_as_inverse_sqrt_r() {
    let grid = Grid::Explicit(vec![30]);
    let small = run_ensemble(&cluster_only(7, vec![1], 400, grid.clone())).unwrap();
    let large = run_ensemble(&cluster_only(7, vec![1], 6400, grid)).unwrap();
    let a = &small.strengths[0].zeta[0];
    let b = &large.strengths[0].zeta[0];
    assert_eq!((a.count, b.count), (400, 6400));
    let ratio = a.stderr / b.stderr;
    // sqrt(16) = 4; the sample deviation itself fluctuates by a few percent
    assert!((ratio - 4.0).abs() < 0.6, "stderr ratio {ratio}");
    let pw = small.strengths[0].p_w.stderr / large.strengths[0].p_w.stderr;
    assert!((pw - 4.0).abs() < 0.6, "p_w stderr ratio {pw}");
}

#[test]
fn larger_m_suppresses_the_giant_cluster() {
    // p = 0.45 at L = 7 is bond count 38 of 84
    let run = run_ensemble(&cluster_only(7, vec![1, 2, 84], 1000, Grid::Explicit(vec![38]))).unwrap();
    let z: Vec<_> = run.strengths.iter().map(|s| s.zeta[0]).collect();
    assert!(z[2].mean + 2.0 * z[2].stderr < z[1].mean, "{z:?}");
    assert!(z[1].mean + 2.0 * z[1].stderr < z[0].mean, "{z:?}");
    let pw: Vec<f64> = run.strengths.iter().map(|s| s.p_w.mean).collect();
    assert!(pw[0] < pw[1] && pw[1] < pw[2], "{pw:?}");
}
