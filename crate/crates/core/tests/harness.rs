use fogfl_core::harness::{
    brute_force_tiny, parse_csv, run_baseline, run_experiment, sca_options, summary_path, sweep_rows, OracleGrid,
    ResultRow, SweepKey, SweepSpec,
};
use fogfl_core::sca::run_multistart;
use fogfl_core::scenario::{generate_scenario, parse_config, ExperimentConfig, Scheme};

fn base(text: &str) -> ExperimentConfig {
    parse_config(text).unwrap()
}

fn without_time(rows: &[ResultRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            let mut r = r.clone();
            r.wall_time = 0.0;
            r.fields()
        })
        .collect()
}

#[test]
fn sweep_has_one_row_per_seed_scheme_and_value() {
    let spec = SweepSpec::new(base("n_ids = 2\nn_aps = 2\nt_max = 5\n"), SweepKey::FronthaulBps, vec![1e8, 4e8], 2).unwrap();
    let rows = sweep_rows(&spec).unwrap();
    assert_eq!(rows.len(), 2 * 3 * 2);
    for seed in spec.seeds() {
        for scheme in Scheme::ALL {
            let n = rows.iter().filter(|r| r.seed == seed && r.scheme == scheme).count();
            assert_eq!(n, 2);
        }
    }
}

#[test]
fn sweeps_are_deterministic_apart_from_timing() {
    let mut spec = SweepSpec::new(base("n_ids = 2\nn_aps = 2\nt_max = 5\n"), SweepKey::SnrDb, vec![0.0, 10.0], 2).unwrap();
    spec.warm_start = true;
    let a = sweep_rows(&spec).unwrap();
    spec.jobs = 1;
    let b = sweep_rows(&spec).unwrap();
    assert_eq!(without_time(&a), without_time(&b));
}

#[test]
fn experiment_writes_rows_and_summary() {
    let dir = std::env::temp_dir().join(format!("fogfl-harness-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let out = dir.join("sweep.csv");
    let mut spec = SweepSpec::new(base("n_ids = 2\nt_max = 5\n"), SweepKey::NAps, vec![1.0, 2.0], 1).unwrap();
    spec.schemes = vec![Scheme::EdgeOnly, Scheme::CloudOnly];
    let summary = run_experiment(&spec, &out).unwrap();
    assert_eq!(summary.rows, 4);
    let rows = parse_csv(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(rows.len(), 4);
    let text = std::fs::read_to_string(summary_path(&out)).unwrap();
    assert!(text.starts_with("scheme,swept_value,count"));
    assert_eq!(text.lines().count(), 1 + 2 * 2);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn cloud_decoding_usually_wins_with_several_aps_and_fast_fronthaul() {
    let mut spec =
        SweepSpec::new(base("n_ids = 4\nn_aps = 3\nm_i = 1\nseed = 40\n"), SweepKey::FronthaulBps, vec![1e9], 20).unwrap();
    spec.schemes = vec![Scheme::EdgeOnly, Scheme::CloudOnly];
    let rows = sweep_rows(&spec).unwrap();
    let wins = spec
        .seeds()
        .filter(|&seed| {
            let tau = |k: Scheme| rows.iter().find(|r| r.seed == seed && r.scheme == k).unwrap().tau_total;
            tau(Scheme::CloudOnly) <= tau(Scheme::EdgeOnly)
        })
        .count();
    assert!(wins >= 14, "cloud-only faster on {wins} of 20 seeds");
}

fn scalar(scale: f64) -> ExperimentConfig {
    let mut cfg = base("n_ids = 1\nn_aps = 1\nm_i = 1\nm_a = 1\nseed = 5\n");
    cfg.fl.bits_per_model *= scale;
    cfg
}

// Twice the payload doubles every link time, so the optimum at most doubles,
// and strictly grows.
#[test]
fn oracle_payload_doubling() {
    let one = scalar(1.0);
    let two = scalar(2.0);
    let grid = OracleGrid::default();
    let a = brute_force_tiny(&generate_scenario(&one.system, &one.fl).unwrap(), &grid).unwrap();
    let b = brute_force_tiny(&generate_scenario(&two.system, &two.fl).unwrap(), &grid).unwrap();
    assert!(b.tau_total > a.tau_total);
    assert!(b.tau_total <= 2.0 * a.tau_total * (1.0 + 1e-6), "{} vs {}", b.tau_total, a.tau_total);
    let x_a = a.latency.tau_w + a.latency.tau_f;
    let x_b = b.latency.tau_w + b.latency.tau_f;
    assert!((x_b / x_a - 2.0).abs() < 0.05, "{x_a} {x_b}");
}

#[test]
fn algorithm_matches_the_grid_on_scalar_instances() {
    for seed in 0..10 {
        let mut cfg = scalar(1.0);
        cfg.system.seed = 60 + seed;
        let s = generate_scenario(&cfg.system, &cfg.fl).unwrap();
        let oracle = brute_force_tiny(&s, &OracleGrid::default()).unwrap();
        let opts = sca_options(&cfg, Scheme::RateSplit);
        let e = run_baseline(&s, Scheme::EdgeOnly, &opts).unwrap();
        let c = run_baseline(&s, Scheme::CloudOnly, &opts).unwrap();
        let sca = run_multistart(&s, &opts, Some(&e), Some(&c), None).unwrap().best;
        assert!(
            sca.latency.tau_total <= oracle.tau_total * 1.005,
            "seed {seed}: algorithm {} oracle {}",
            sca.latency.tau_total,
            oracle.tau_total
        );
    }
}
