use leakcast::config::{LeakageSource, ScenarioConfig};
use leakcast::nwp::{nature_run, GridSetup, ModelParams};
use leakcast::report::{csv_string, parse_csv};
use leakcast::scenario::run_scenario;
use leakcast::Error;

fn quick(levels: &[f64]) -> ScenarioConfig {
    ScenarioConfig {
        leakage_levels: levels.to_vec(),
        ensemble_size: 2,
        forecast_length: 2.0,
        ..ScenarioConfig::default()
    }
}

#[test]
fn nature_run_variance_is_in_the_chaotic_band() {
    let params = ModelParams::default();
    for seed in [1, 2, 3] {
        let run = nature_run(&params, seed, 1000, 2000, &GridSetup::default()).unwrap();
        let values: Vec<f64> = run
            .states
            .iter()
            .flat_map(|s| s.temperature.iter().copied())
            .collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
        assert!((2.0..=30.0).contains(&var), "seed {seed}: variance {var}");
    }
}

#[test]
fn rows_follow_config_order_with_increasing_perturbation() {
    let levels = [-50.0, -40.0, -30.0, -20.0];
    let report = run_scenario(&quick(&levels)).unwrap();
    assert_eq!(report.rows.len(), 5);
    assert_eq!(report.baseline().leakage_dbw, None);
    let got: Vec<f64> = report
        .levels()
        .iter()
        .map(|r| r.leakage_dbw.unwrap())
        .collect();
    assert_eq!(got, levels);
    assert!(report
        .levels()
        .windows(2)
        .all(|w| w[1].delta_tb_k > w[0].delta_tb_k));
    assert!(report.rows.iter().all(|r| r.converged));
}

#[test]
fn lossy_antenna_scales_the_perturbation() {
    // L = 2 gives eta = 0.5, so dTb = 0.26826 K / 0.5.
    let mut config = quick(&[-20.0]);
    config.antenna.loss_factor = 2.0;
    let report = run_scenario(&config).unwrap();
    let row = &report.levels()[0];
    assert!((row.noise_k - 0.268258).abs() < 1e-6);
    assert!((row.delta_tb_k - 0.536517).abs() < 1e-6);
}

#[test]
fn csv_round_trips_within_formatting_precision() {
    let report = run_scenario(&quick(&[-30.0, -15.0])).unwrap();
    let parsed = parse_csv(&csv_string(&report)).unwrap();
    assert_eq!(parsed.len(), report.rows.len());
    let close = |a: f64, b: f64| (a - b).abs() <= 5e-9 * a.abs().max(b.abs()) + 1e-300;
    for (p, r) in parsed.iter().zip(&report.rows) {
        assert_eq!(p.leakage_dbw, r.leakage_dbw);
        assert_eq!(p.converged, r.converged);
        for (a, b) in [
            (p.noise_k, r.noise_k),
            (p.delta_tb_k, r.delta_tb_k),
            (p.precip_diff_max_mm, r.precip_diff_max_mm),
            (p.precip_diff_rms_mm, r.precip_diff_rms_mm),
            (p.t2m_diff_max_c, r.t2m_diff_max_c),
            (p.t2m_diff_rms_c, r.t2m_diff_rms_c),
            (p.analysis_cost, r.analysis_cost),
        ] {
            assert!(close(a, b), "{a} vs {b}");
        }
    }
}

#[test]
fn identical_configs_give_identical_bytes() {
    let config = quick(&[-25.0]);
    let a = csv_string(&run_scenario(&config).unwrap());
    let b = csv_string(&run_scenario(&config).unwrap());
    assert_eq!(a, b);
    assert_eq!(config.hash(), config.clone().hash());
}

#[test]
fn field_source_runs_through_the_mask() {
    let mut config = quick(&[-20.0]);
    config.leakage_source = LeakageSource::Field;
    config.field.count = 250;
    let direct = run_scenario(&quick(&[-20.0])).unwrap();
    let field = run_scenario(&config).unwrap();
    let (d, f) = (direct.levels()[0].delta_tb_k, field.levels()[0].delta_tb_k);
    assert!(f > 0.0 && f < d * 250.0, "field {f}, direct {d}");
}

#[test]
fn member_failures_name_level_and_member() {
    // A background this far off sends the forecast to infinity.
    let mut config = quick(&[-20.0]);
    config.covariance.state_variance = 1e8;
    match run_scenario(&config).unwrap_err() {
        Error::Scenario {
            level,
            member,
            source,
        } => {
            assert_eq!(level, "baseline");
            assert_eq!(member, 0);
            assert!(!source.is_validation(), "{source}");
        }
        other => panic!("unexpected error {other}"),
    }
}
