//! Fast invariant checks behind the `check` subcommand.
//!
//! Each check is a closed-form or self-consistency test of one stage of the
//! pipeline; the full test suite covers the same ground more thoroughly.

use std::time::Instant;

use nalgebra::DMatrix;

use crate::assim::{AssimilationProblem, Control, LinearOperator};
use crate::config::ScenarioConfig;
use crate::covariance::CovarianceSpec;
use crate::leakage::{
    aci_leakage_fraction, antenna_temperature, brightness_perturbation, leakage_chain,
    AntennaModel, ChannelSpec, EmissionMask, LeakagePower, LinkBudget, NoiseTemperature, BOLTZMANN,
};
use crate::nwp::{integrate, nature_run, GridSetup, ModelParams};
use crate::radiance::RadianceObservation;
use crate::rng::SplitMix64;
use crate::scenario::run_scenario;

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

type Check = fn() -> Result<String, String>;

const CHECKS: &[(&str, Check)] = &[
    ("noise temperature at -20 and -15 dBW", noise_values),
    ("one decade of noise per 10 dB", noise_slope),
    ("antenna temperature bounds and round trip", antenna_bounds),
    (
        "mask fraction against fine-grid quadrature",
        mask_quadrature,
    ),
    ("scalar 3DVar closed form", scalar_analysis),
    ("3DVar gradient against finite differences", gradient_fd),
    ("RK4 fourth-order self-convergence", rk4_order),
    ("null experiment is exactly zero", null_experiment),
];

pub fn run_checks() -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .map(|&(name, check)| {
            let start = Instant::now();
            let result = check();
            let seconds = start.elapsed().as_secs_f64();
            let (passed, detail) = match result {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            CheckOutcome {
                name,
                passed,
                detail,
                seconds,
            }
        })
        .collect()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn noise_at(level: f64) -> Result<f64, String> {
    leakage_chain(
        LeakagePower::Dbw(level),
        &LinkBudget::default(),
        &ChannelSpec::amsu_channel1(),
        &AntennaModel::default(),
    )
    .map(|c| c.noise.value)
    .map_err(|e| e.to_string())
}

fn noise_values() -> Result<String, String> {
    let mut detail = Vec::new();
    for level in [-20.0, -15.0] {
        let t = noise_at(level)?;
        let expected = 10f64.powf((level - 130.0) / 10.0) / (BOLTZMANN * 270e6);
        ensure((t - expected).abs() <= 1e-12 * expected, || {
            format!("{level} dBW: {t} K vs {expected} K")
        })?;
        detail.push(format!("{level} dBW -> {t:.5} K"));
    }
    Ok(detail.join(", "))
}

fn noise_slope() -> Result<String, String> {
    let mut worst = 0.0f64;
    for i in 0..8 {
        let lo = -55.0 + 5.0 * i as f64;
        let slope = (noise_at(lo + 10.0)?.log10() - noise_at(lo)?.log10()) / 1.0;
        worst = worst.max((slope - 1.0).abs());
    }
    ensure(worst <= 1e-9, || format!("slope off by {worst:e}"))?;
    Ok(format!("max slope error {worst:.1e}"))
}

fn antenna_bounds() -> Result<String, String> {
    let mut rng = SplitMix64::new(7);
    for _ in 0..1000 {
        let tb = 400.0 * rng.next_unit();
        let tp = 400.0 * rng.next_unit();
        let eta = rng.next_unit();
        let model = AntennaModel::from_efficiency(eta, tp).map_err(|e| e.to_string())?;
        let ta = antenna_temperature(tb, &model);
        let tol = 1e-12 * tb.max(tp);
        ensure(ta >= tb.min(tp) - tol && ta <= tb.max(tp) + tol, || {
            format!("T_a={ta} outside [{tb}, {tp}] at eta={eta}")
        })?;
        if eta > 1e-3 {
            let delta = 5.0 * rng.next_unit();
            let shifted = antenna_temperature(tb + delta, &model) - ta;
            let noise = NoiseTemperature {
                value: shifted,
                source_power: 0.0,
                bandwidth: 270e6,
            };
            let back = brightness_perturbation(&noise, &model).map_err(|e| e.to_string())?;
            ensure((back - delta).abs() <= 1e-9 * (1.0 + delta) / eta, || {
                format!("round trip {delta} -> {back} at eta={eta}")
            })?;
        }
    }
    Ok("1000 random inputs".into())
}

fn mask_quadrature() -> Result<String, String> {
    // 0 dB across the aggressor band, falling linearly to -40 dB over a
    // 450 MHz guard, flat beyond.
    let aggressor = ChannelSpec::centered(24.5e9, 400e6).map_err(|e| e.to_string())?;
    let mask = EmissionMask::new(
        vec![
            (-2e9, -40.0),
            (-650e6, -40.0),
            (-200e6, 0.0),
            (200e6, 0.0),
            (650e6, -40.0),
            (2e9, -40.0),
        ],
        0.0,
    )
    .map_err(|e| e.to_string())?;
    let victim = ChannelSpec::centered(24.5e9 - 425e6, 270e6).map_err(|e| e.to_string())?;
    let exact = aci_leakage_fraction(&mask, &aggressor, &victim).map_err(|e| e.to_string())?;
    let trapezoid = |lo: f64, hi: f64, n: usize| {
        let h = (hi - lo) / n as f64;
        (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * mask
                    .psd_linear(&aggressor, lo + h * i as f64)
                    .unwrap_or(0.0)
            })
            .sum::<f64>()
            * h
    };
    let brute = trapezoid(victim.f_low, victim.f_high, 200_000)
        / trapezoid(24.5e9 - 2e9, 24.5e9 + 2e9, 800_000);
    ensure(
        (exact - brute).abs() <= 1e-6 * brute.max(1e-300) + 1e-12,
        || format!("exact {exact} vs quadrature {brute}"),
    )?;
    Ok(format!("fraction {exact:.6e}"))
}

fn obs(value: f64) -> RadianceObservation {
    RadianceObservation::new(value, 1.0, 0.0).expect("positive stddev")
}

fn scalar_analysis() -> Result<String, String> {
    // State pinned by a tiny variance: J(b) = b^2/2 + (1 - b)^2/2.
    let problem = AssimilationProblem {
        background_state: vec![0.0],
        background_bias: vec![0.0],
        state_covariance: CovarianceSpec::diagonal("B", vec![1e-8]).map_err(|e| e.to_string())?,
        bias_covariance: CovarianceSpec::diagonal("B_beta", vec![1.0])
            .map_err(|e| e.to_string())?,
        obs_covariance: CovarianceSpec::diagonal("R", vec![1.0]).map_err(|e| e.to_string())?,
        observations: vec![obs(1.0)],
        operator: LinearOperator {
            matrix: DMatrix::from_element(1, 1, 1.0),
            predictor_values: vec![vec![]],
        },
        hold_bias_fixed: false,
    };
    let a = problem
        .minimize(&problem.background())
        .map_err(|e| e.to_string())?;
    let beta = a.analysis_bias[0];
    ensure(
        (beta - 0.5).abs() <= 1e-6 && (a.final_cost - 0.25).abs() <= 1e-6,
        || format!("beta {beta}, J {}", a.final_cost),
    )?;
    Ok(format!("beta {beta:.9}, J {:.9}", a.final_cost))
}

fn gradient_fd() -> Result<String, String> {
    let mut rng = SplitMix64::new(99);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let (n, m, p) = (6, 4, 2);
        let matrix = DMatrix::from_fn(m, n, |_, _| rng.next_gaussian());
        let predictor_values = (0..m).map(|_| rng.gaussian_vec(p, 1.0)).collect();
        let problem = AssimilationProblem {
            background_state: rng.gaussian_vec(n, 1.0),
            background_bias: rng.gaussian_vec(p + 1, 1.0),
            state_covariance: CovarianceSpec::scaled_identity("B", n, 1.5)
                .map_err(|e| e.to_string())?,
            bias_covariance: CovarianceSpec::scaled_identity("B_beta", p + 1, 0.5)
                .map_err(|e| e.to_string())?,
            obs_covariance: CovarianceSpec::scaled_identity("R", m, 0.2)
                .map_err(|e| e.to_string())?,
            observations: (0..m).map(|_| obs(rng.next_gaussian())).collect(),
            operator: LinearOperator {
                matrix,
                predictor_values,
            },
            hold_bias_fixed: false,
        };
        let c = Control {
            state: rng.gaussian_vec(n, 1.0),
            bias: rng.gaussian_vec(p + 1, 1.0),
        };
        let (gx, gb) = problem.gradient(&c).map_err(|e| e.to_string())?;
        let analytic: Vec<f64> = gx.into_iter().chain(gb).collect();
        for (i, &g) in analytic.iter().enumerate() {
            let h = 1e-5;
            let at = |s: f64| {
                let mut c = c.clone();
                if i < n {
                    c.state[i] += s;
                } else {
                    c.bias[i - n] += s;
                }
                problem.cost(&c)
            };
            let fd = (at(h).map_err(|e| e.to_string())? - at(-h).map_err(|e| e.to_string())?)
                / (2.0 * h);
            worst = worst.max((g - fd).abs() / g.abs().max(1.0));
        }
    }
    ensure(worst <= 1e-6, || {
        format!("relative gradient error {worst:e}")
    })?;
    Ok(format!("max relative error {worst:.1e}"))
}

fn rk4_order() -> Result<String, String> {
    let params = ModelParams::default();
    let start = nature_run(&params, 5, 500, 0, &GridSetup::default())
        .map_err(|e| e.to_string())?
        .last()
        .clone();
    let at_one = |dt: f64| {
        let p = ModelParams { dt, ..params };
        integrate(&start, &p, (1.0 / dt).round() as usize).map(|t| t.last().temperature.clone())
    };
    let reference = at_one(0.00125).map_err(|e| e.to_string())?;
    let errors = [0.02, 0.01, 0.005]
        .iter()
        .map(|&dt| {
            at_one(dt).map(|t| {
                t.iter()
                    .zip(&reference)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
        })
        .collect::<crate::Result<Vec<f64>>>()
        .map_err(|e| e.to_string())?;
    let ratios = [errors[0] / errors[1], errors[1] / errors[2]];
    ensure(ratios.iter().all(|r| (12.0..=20.0).contains(r)), || {
        format!("ratios {ratios:?}")
    })?;
    Ok(format!("ratios {:.2}, {:.2}", ratios[0], ratios[1]))
}

fn null_experiment() -> Result<String, String> {
    let config = ScenarioConfig {
        leakage_levels: vec![-300.0],
        ensemble_size: 2,
        forecast_length: 2.0,
        ..ScenarioConfig::default()
    };
    let report = run_scenario(&config).map_err(|e| e.to_string())?;
    for row in &report.rows {
        let diffs = [
            row.precip_diff_max_mm,
            row.precip_diff_rms_mm,
            row.t2m_diff_max_c,
            row.t2m_diff_rms_c,
            row.lead_t_diff_rms_c,
        ];
        ensure(diffs.iter().all(|&d| d == 0.0), || {
            format!("{:?}: {diffs:?}", row.leakage_dbw)
        })?;
    }
    Ok("baseline and -300 dBW rows are zero".into())
}
