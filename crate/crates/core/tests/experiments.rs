mod common;

use brenier_ot::experiments::{quantile_coupling, run_coupling_rate, run_figure1, run_map_rate, ExperimentConfig, Scenario};
use brenier_ot::measures::{sample, DistributionSpec};
use brenier_ot::metrics::{coupling_w2, wasserstein, CouplingMeasure};
use brenier_ot::ot_lp::{build_cost, solve};
use brenier_ot::{BrenierPotential, PointCloudMeasure};

#[test]
fn line_plan_is_the_sorting_permutation() {
    let spec = DistributionSpec::interval(0.0, 1.0);
    for seed in 0..20 {
        let mu: PointCloudMeasure = sample(&spec, 40, 2 * seed).unwrap();
        let nu: PointCloudMeasure = sample(&DistributionSpec::interval(2.0, 3.0), 40, 2 * seed + 1).unwrap();
        let cost = build_cost(&mu, &nu).unwrap();
        let sol = solve(&mu, &nu).unwrap().with_strict_duals(&cost);
        let sigma = sol.plan.as_permutation().unwrap();
        let rank = |m: &PointCloudMeasure| {
            let mut idx: Vec<usize> = (0..m.len()).collect();
            idx.sort_by(|&a, &b| m.point(a)[0].total_cmp(&m.point(b)[0]));
            idx
        };
        let (rx, ry) = (rank(&mu), rank(&nu));
        for (a, b) in rx.iter().zip(&ry) {
            assert_eq!(sigma[*a], *b);
        }
        let phi = BrenierPotential::from_solution(&nu, &sol).unwrap();
        for (a, b) in rx.iter().zip(&ry) {
            let active = phi.active_set(mu.point(*a));
            assert!(active.contains(b));
            if active.len() == 1 {
                assert_eq!(phi.monge_map(mu.point(*a)), nu.point(*b).to_vec());
            }
        }
    }
}

#[test]
fn single_atom_target_coupling_reduces_to_source_distance() {
    let mu_spec = DistributionSpec::interval(-1.0, 1.0);
    let nu_spec = DistributionSpec::atoms(vec![vec![0.4]], vec![1.0]);
    let reference = quantile_coupling(&mu_spec, &nu_spec, 500).unwrap();
    let mu_hat: PointCloudMeasure = sample(&mu_spec, 30, 5).unwrap();
    let nu_hat = PointCloudMeasure::dirac(vec![0.4]).unwrap();
    let sol = solve(&mu_hat, &nu_hat).unwrap();
    let gamma = CouplingMeasure::from_plan(&mu_hat, &nu_hat, &sol.plan).unwrap();
    let mu_ref = PointCloudMeasure::uniform(1, (0..500).map(|k| vec![-1.0 + 2.0 * (k as f64 + 0.5) / 500.0]).collect()).unwrap();
    let direct = wasserstein(&mu_hat, &mu_ref, 2).unwrap();
    assert!((coupling_w2(&gamma, &reference).unwrap() - direct).abs() <= 1e-10);
}

#[test]
fn rates_row_count_and_csv() {
    let mut cfg = ExperimentConfig::preset(Scenario::MapRate1d);
    cfg.trials = 5;
    cfg.n_grid = vec![50, 100, 200];
    cfg.eval_samples = 5000;
    let run = run_map_rate(&cfg).unwrap();
    assert_eq!(run.records.len(), 15);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("records.csv");
    run.write_records_csv(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "n,m,trial,seed,error_value,oracle_kind,wall_time_ms");
    assert_eq!(lines.count(), 15);
}

#[test]
fn identical_measures_give_decreasing_coupling_error() {
    let mut cfg = ExperimentConfig::preset(Scenario::CouplingRate);
    cfg.target = cfg.source.clone();
    cfg.n_grid = vec![10, 40, 100];
    let run = run_coupling_rate(&cfg).unwrap();
    let medians: Vec<f64> = run.summary.levels.iter().map(|l| l.median).collect();
    assert!(medians.windows(2).all(|w| w[1] < w[0]), "{medians:?}");
    assert!(run.summary.envelope_holds);
}

#[test]
fn small_demo_writes_plot_data() {
    let mut cfg = ExperimentConfig::preset(Scenario::Figure1Demo);
    cfg.n_grid = vec![100, 1000];
    cfg.trials = 1;
    cfg.eval_samples = 2500;
    let out = run_figure1(&cfg).unwrap();
    assert!(out.summary.piecewise_constant, "{:?}", out.summary);
    let dir = tempfile::tempdir().unwrap();
    out.write(dir.path()).unwrap();
    let samples = std::fs::read_to_string(dir.path().join("samples.csv")).unwrap();
    assert_eq!(samples.lines().count(), 1 + 1100);
    let atoms = std::fs::read_to_string(dir.path().join("atoms.csv")).unwrap();
    assert_eq!(atoms.lines().count(), 5);
    let cells = std::fs::read_to_string(dir.path().join("cells.csv")).unwrap();
    assert_eq!(cells.lines().count(), 1 + 2 * out.grid.len());
}
