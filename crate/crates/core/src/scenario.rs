//! Observing-system experiment: nature run, baseline analysis and forecast,
//! then the same pipeline with leakage-perturbed radiances at each level.
//!
//! Member `m` draws its background error from `derive_seed(seeds.init, m)` and
//! its observation noise from `derive_seed(seeds.obs_noise, m)`. The noise
//! seed does not depend on the leakage level, so every level of a member
//! sees the same noise realization and differs only by the perturbation.

use crate::assim::{AnalysisResult, AssimilationProblem, ColumnOperator, ObservationOperator};
use crate::config::{LeakageSource, ScenarioConfig};
use crate::covariance::CovarianceSpec;
use crate::error::{Error, Result};
use crate::leakage::{self, aci_leakage_fraction, aggregate_leakage_power, LeakagePower};
use crate::nwp::{self, ModelState};
use crate::rng::{derive_seed, SplitMix64};

/// One report row; `leakage_dbw == None` marks the baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub leakage_dbw: Option<f64>,
    pub noise_k: f64,
    pub delta_tb_k: f64,
    pub precip_diff_max_mm: f64,
    pub precip_diff_rms_mm: f64,
    pub t2m_diff_max_c: f64,
    pub t2m_diff_rms_c: f64,
    /// RMS temperature divergence at the verification lead, ensemble mean.
    pub lead_t_diff_rms_c: f64,
    pub analysis_cost: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    /// Baseline first, then one row per leakage level in config order.
    pub rows: Vec<ReportRow>,
    pub config_hash: String,
    pub defaulted: Vec<String>,
    pub verification_lead: f64,
    pub ensemble_size: usize,
}

impl ScenarioReport {
    pub fn baseline(&self) -> &ReportRow {
        &self.rows[0]
    }

    pub fn levels(&self) -> &[ReportRow] {
        &self.rows[1..]
    }
}

/// Forecast products of one member kept for differencing.
#[derive(Debug, Clone, PartialEq)]
pub struct MemberForecast {
    pub analysis: AnalysisResult,
    pub precipitation: Vec<f64>,
    pub two_meter_temperature: Vec<f64>,
    pub lead_temperature: Vec<f64>,
}

/// Per-member differences against the baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Divergence {
    pub precip_max: f64,
    pub precip_rms: f64,
    pub t2m_max: f64,
    pub t2m_rms: f64,
    pub lead_rms: f64,
}

fn max_rms(a: &[f64], b: &[f64]) -> (f64, f64) {
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let max = diffs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let rms = (diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64).sqrt();
    (max, rms)
}

impl Divergence {
    pub fn between(run: &MemberForecast, baseline: &MemberForecast) -> Self {
        let (precip_max, precip_rms) = max_rms(&run.precipitation, &baseline.precipitation);
        // Kelvin differences equal Celsius differences.
        let (t2m_max, t2m_rms) =
            max_rms(&run.two_meter_temperature, &baseline.two_meter_temperature);
        let (_, lead_rms) = max_rms(&run.lead_temperature, &baseline.lead_temperature);
        Self {
            precip_max,
            precip_rms,
            t2m_max,
            t2m_rms,
            lead_rms,
        }
    }
}

/// Brightness perturbation and noise temperature for one sweep level.
pub fn level_perturbation(
    config: &ScenarioConfig,
    level_dbw: f64,
) -> Result<leakage::LeakageChain> {
    let leakage = match config.leakage_source {
        LeakageSource::Direct => LeakagePower::Dbw(level_dbw),
        LeakageSource::Field => {
            let fraction = aci_leakage_fraction(
                &config.emission_mask()?,
                &config.aggressor_channel(),
                &config.victim_channel(),
            )?;
            aggregate_leakage_power(&config.transmitter_field(level_dbw), fraction)?
        }
    };
    leakage::leakage_chain(
        leakage,
        &config.link_budget()?,
        &config.victim_channel(),
        &config.antenna_model()?,
    )
}

/// Fixed parts of an experiment shared by every level and member.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ScenarioConfig,
    pub truth: ModelState,
    pub operator: ColumnOperator,
}

impl Experiment {
    pub fn prepare(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let nature = nwp::nature_run(
            &config.model,
            config.seeds.nature,
            config.grid.spinup_steps,
            0,
            &config.grid_setup(),
        )?;
        let operator = ColumnOperator {
            params: config.forward,
            predictors: config.predictors()?,
            grid_size: config.grid.grid_size,
            locations: (0..config.grid.grid_size)
                .step_by(config.observations.stride)
                .collect(),
            surface_offset: config.observations.surface_offset,
            lapse: config.observations.lapse,
        };
        Ok(Self {
            config: config.clone(),
            truth: nature.states[0].clone(),
            operator,
        })
    }

    pub fn background_state(&self, member: usize) -> Vec<f64> {
        let sd = self.config.covariance.state_variance.sqrt();
        let mut rng = SplitMix64::new(derive_seed(self.config.seeds.init, member as u64));
        self.truth
            .to_control()
            .into_iter()
            .map(|x| x + sd * rng.next_gaussian())
            .collect()
    }

    pub fn problem(
        &self,
        member: usize,
        delta_tb: f64,
    ) -> Result<AssimilationProblem<ColumnOperator>> {
        let c = &self.config;
        let observations = nwp::synthesize_observations(
            &self.truth,
            &self.operator,
            &c.truth_bias()?,
            derive_seed(c.seeds.obs_noise, member as u64),
            c.observations.error_stddev,
            delta_tb,
        )?;
        let n = self.operator.state_len();
        let nb = 1 + self.operator.predictors.len();
        let r = observations
            .iter()
            .map(|o| o.error_stddev * o.error_stddev)
            .collect();
        Ok(AssimilationProblem {
            background_state: self.background_state(member),
            background_bias: c.background_bias()?.control(),
            state_covariance: CovarianceSpec::scaled_identity("B", n, c.covariance.state_variance)?,
            bias_covariance: CovarianceSpec::scaled_identity(
                "B_beta",
                nb,
                c.covariance.bias_variance,
            )?,
            obs_covariance: CovarianceSpec::diagonal("R", r)?,
            observations,
            operator: self.operator.clone(),
            hold_bias_fixed: c.bias.hold_fixed,
        })
    }

    /// Analysis from the background, then the forecast and its diagnostics.
    pub fn run_member(&self, member: usize, delta_tb: f64) -> Result<MemberForecast> {
        let c = &self.config;
        let problem = self.problem(member, delta_tb)?;
        let analysis = problem.minimize(&problem.background())?;
        log::debug!(
            "member {member} dTb {delta_tb:.6e}: J = {:.9e} after {} iterations (converged: {})",
            analysis.final_cost,
            analysis.iterations,
            analysis.converged
        );
        let start = ModelState::from_control(&analysis.analysis_state)?;
        let steps = (c.forecast_length / c.model.dt).round() as usize;
        let trajectory = nwp::integrate(&start, &c.model, steps)?;
        let diag = nwp::diagnostics(&trajectory, &c.model);
        Ok(MemberForecast {
            lead_temperature: trajectory
                .at_lead(c.verification_lead, c.model.dt)
                .temperature
                .clone(),
            analysis,
            precipitation: diag.accumulated_precipitation,
            two_meter_temperature: diag.two_meter_temperature,
        })
    }
}

fn annotate(level: Option<f64>, member: usize) -> impl Fn(Error) -> Error {
    move |e| Error::Scenario {
        level: level.map_or_else(|| "baseline".to_string(), |l| l.to_string()),
        member,
        source: Box::new(e),
    }
}

fn summarize(
    level: Option<f64>,
    noise_k: f64,
    delta_tb_k: f64,
    runs: &[MemberForecast],
    baselines: &[MemberForecast],
) -> ReportRow {
    let m = runs.len() as f64;
    let divs: Vec<Divergence> = runs
        .iter()
        .zip(baselines)
        .map(|(r, b)| Divergence::between(r, b))
        .collect();
    let mean = |f: fn(&Divergence) -> f64| divs.iter().map(f).sum::<f64>() / m;
    ReportRow {
        leakage_dbw: level,
        noise_k,
        delta_tb_k,
        precip_diff_max_mm: mean(|d| d.precip_max),
        precip_diff_rms_mm: mean(|d| d.precip_rms),
        t2m_diff_max_c: mean(|d| d.t2m_max),
        t2m_diff_rms_c: mean(|d| d.t2m_rms),
        lead_t_diff_rms_c: mean(|d| d.lead_rms),
        analysis_cost: runs.iter().map(|r| r.analysis.final_cost).sum::<f64>() / m,
        converged: runs.iter().all(|r| r.analysis.converged),
    }
}

/// Run the whole sweep. Levels and members are evaluated in config order,
/// so the report does not depend on scheduling.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioReport> {
    run_scenario_with_defaults(config, Vec::new())
}

pub fn run_scenario_with_defaults(
    config: &ScenarioConfig,
    defaulted: Vec<String>,
) -> Result<ScenarioReport> {
    let exp = Experiment::prepare(config)?;
    let members = config.ensemble_size;

    let baselines = (0..members)
        .map(|m| exp.run_member(m, 0.0).map_err(annotate(None, m)))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = vec![summarize(None, 0.0, 0.0, &baselines, &baselines)];

    for &level in &config.leakage_levels {
        let chain = level_perturbation(config, level).map_err(annotate(Some(level), 0))?;
        log::info!(
            "level {level} dBW: noise {:.6e} K, dTb {:.6e} K",
            chain.noise.value,
            chain.delta_tb
        );
        let runs = (0..members)
            .map(|m| {
                exp.run_member(m, chain.delta_tb)
                    .map_err(annotate(Some(level), m))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(summarize(
            Some(level),
            chain.noise.value,
            chain.delta_tb,
            &runs,
            &baselines,
        ));
    }

    Ok(ScenarioReport {
        rows,
        config_hash: config.hash(),
        defaulted,
        verification_lead: config.verification_lead,
        ensemble_size: members,
    })
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for k in i..=j {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}
