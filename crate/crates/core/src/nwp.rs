//! Moist Lorenz-96 forecast model and the synthetic-truth harness around it.
//!
//! ```text
//! dT_k/dt = (T_{k+1} - T_{k-2}) T_{k-1} - T_k + F + c_q q_k
//! dq_k/dt = -(G_{k+1/2} - G_{k-1/2}) - r max(0, q_k - q_c)
//! G_{k+1/2} = u (q_k + q_{k+1}) / 2 - s(u) (q_{k+1} - q_k) / 2
//! u = (T_k + T_{k+1}) / 2,   s(u) = sqrt(u^2 + 1)
//! ```
//!
//! Indices are cyclic. `G` is an upwind-biased flux of moisture carried by
//! the temperature field; `s(u) >= |u|` keeps it positivity preserving and
//! the smooth upwind weight keeps the right-hand side differentiable. Total
//! moisture changes only through condensation. Moisture is clipped at zero
//! after each step.
//! Reporting conventions: one moisture unit of condensate is 1 mm of
//! precipitation, and temperature reports add 273 K.

use serde::{Deserialize, Serialize};

use crate::assim::ColumnOperator;
use crate::error::{Error, Result};
use crate::radiance::{self, BiasModel, RadianceObservation};
use crate::rng::SplitMix64;

/// Offset from the temperature state variable to kelvin.
pub const KELVIN_OFFSET: f64 = 273.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub temperature: Vec<f64>,
    /// kg/m^2
    pub moisture: Vec<f64>,
}

impl ModelState {
    pub fn new(temperature: Vec<f64>, moisture: Vec<f64>) -> Result<Self> {
        let s = Self {
            temperature,
            moisture,
        };
        s.validate()?;
        Ok(s)
    }

    /// Split a `[temperature; moisture]` vector, clipping moisture at zero.
    pub fn from_control(state: &[f64]) -> Result<Self> {
        if !state.len().is_multiple_of(2) {
            return Err(Error::validation(
                "model state",
                "control length must be even",
            ));
        }
        let n = state.len() / 2;
        Self::new(
            state[..n].to_vec(),
            state[n..].iter().map(|q| q.max(0.0)).collect(),
        )
    }

    pub fn to_control(&self) -> Vec<f64> {
        self.temperature
            .iter()
            .chain(&self.moisture)
            .copied()
            .collect()
    }

    pub fn len(&self) -> usize {
        self.temperature.len()
    }

    pub fn is_empty(&self) -> bool {
        self.temperature.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.temperature.len() != self.moisture.len() {
            return Err(Error::Dimension {
                what: "moisture field",
                expected: self.temperature.len(),
                found: self.moisture.len(),
            });
        }
        if self.temperature.len() < 4 {
            return Err(Error::validation(
                "model state",
                "need at least 4 grid points",
            ));
        }
        if !self.is_finite() {
            return Err(Error::validation("model state", "fields must be finite"));
        }
        Ok(())
    }

    fn is_finite(&self) -> bool {
        self.temperature
            .iter()
            .chain(&self.moisture)
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    pub forcing: f64,
    pub moisture_coupling: f64,
    pub condensation_threshold: f64,
    pub condensation_rate: f64,
    pub dt: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            forcing: 8.0,
            moisture_coupling: 0.1,
            condensation_threshold: 25.0,
            condensation_rate: 0.2,
            dt: 0.01,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::validation("model dt", "must be positive"));
        }
        if !(self.moisture_coupling >= 0.0) || !(self.condensation_rate >= 0.0) {
            return Err(Error::validation("model rates", "must be non-negative"));
        }
        if !self.forcing.is_finite() || !self.condensation_threshold.is_finite() {
            return Err(Error::validation("model params", "must be finite"));
        }
        Ok(())
    }

    fn condensation(&self, q: f64) -> f64 {
        self.condensation_rate * (q - self.condensation_threshold).max(0.0)
    }
}

/// Right-hand side of the model equations.
pub fn tendency(
    temperature: &[f64],
    moisture: &[f64],
    params: &ModelParams,
) -> (Vec<f64>, Vec<f64>) {
    let n = temperature.len();
    let t = |i: isize| temperature[i.rem_euclid(n as isize) as usize];
    let q = |i: isize| moisture[i.rem_euclid(n as isize) as usize];
    let mut dt = Vec::with_capacity(n);
    let mut dq = Vec::with_capacity(n);
    for k in 0..n as isize {
        dt.push(
            (t(k + 1) - t(k - 2)) * t(k - 1) - t(k)
                + params.forcing
                + params.moisture_coupling * q(k),
        );
        let flux = |i: isize| {
            let u = 0.5 * (t(i) + t(i + 1));
            0.5 * u * (q(i) + q(i + 1)) - 0.5 * (u * u + 1.0).sqrt() * (q(i + 1) - q(i))
        };
        dq.push(-(flux(k) - flux(k - 1)) - params.condensation(q(k)));
    }
    (dt, dq)
}

fn shifted(base: &[f64], k: &[f64], h: f64) -> Vec<f64> {
    base.iter().zip(k).map(|(b, d)| b + h * d).collect()
}

/// One RK4 step.
pub fn step(state: &ModelState, params: &ModelParams) -> Result<ModelState> {
    let h = params.dt;
    let (t0, q0) = (&state.temperature, &state.moisture);
    let (k1t, k1q) = tendency(t0, q0, params);
    let (k2t, k2q) = tendency(
        &shifted(t0, &k1t, 0.5 * h),
        &shifted(q0, &k1q, 0.5 * h),
        params,
    );
    let (k3t, k3q) = tendency(
        &shifted(t0, &k2t, 0.5 * h),
        &shifted(q0, &k2q, 0.5 * h),
        params,
    );
    let (k4t, k4q) = tendency(&shifted(t0, &k3t, h), &shifted(q0, &k3q, h), params);
    let combine = |x: &[f64], a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
        (0..x.len())
            .map(|i| x[i] + h / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]))
            .collect()
    };
    let next = ModelState {
        temperature: combine(t0, &k1t, &k2t, &k3t, &k4t),
        moisture: combine(q0, &k1q, &k2q, &k3q, &k4q)
            .into_iter()
            .map(|q| q.max(0.0))
            .collect(),
    };
    if !next.is_finite() {
        return Err(Error::BlowUp { step: 0 });
    }
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<ModelState>,
    pub times: Vec<f64>,
}

impl Trajectory {
    pub fn last(&self) -> &ModelState {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// State nearest to `lead` time units after the first state.
    pub fn at_lead(&self, lead: f64, dt: f64) -> &ModelState {
        let idx = ((lead / dt).round() as usize).min(self.states.len() - 1);
        &self.states[idx]
    }
}

pub fn integrate(state: &ModelState, params: &ModelParams, n_steps: usize) -> Result<Trajectory> {
    state.validate()?;
    params.validate()?;
    let mut states = Vec::with_capacity(n_steps + 1);
    states.push(state.clone());
    for i in 0..n_steps {
        let next = step(&states[i], params).map_err(|e| match e {
            Error::BlowUp { .. } => Error::BlowUp { step: i },
            other => other,
        })?;
        states.push(next);
    }
    let times = (0..=n_steps).map(|i| i as f64 * params.dt).collect();
    Ok(Trajectory { states, times })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastDiagnostics {
    /// mm per grid point
    pub accumulated_precipitation: Vec<f64>,
    /// K per grid point, at the final state
    pub two_meter_temperature: Vec<f64>,
}

/// Precipitation is accumulated from the state at the start of each step.
pub fn diagnostics(trajectory: &Trajectory, params: &ModelParams) -> ForecastDiagnostics {
    let n = trajectory.states[0].len();
    let mut precip = vec![0.0; n];
    for s in &trajectory.states[..trajectory.states.len() - 1] {
        for (p, q) in precip.iter_mut().zip(&s.moisture) {
            *p += params.condensation(*q) * params.dt;
        }
    }
    ForecastDiagnostics {
        accumulated_precipitation: precip,
        two_meter_temperature: trajectory
            .last()
            .temperature
            .iter()
            .map(|t| t + KELVIN_OFFSET)
            .collect(),
    }
}

/// Grid and initial-moisture setup for a nature run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSetup {
    pub grid_size: usize,
    /// Mean initial moisture, kg/m^2.
    pub initial_moisture: f64,
}

impl Default for GridSetup {
    fn default() -> Self {
        Self {
            grid_size: 40,
            initial_moisture: 20.0,
        }
    }
}

/// Seeded truth: unit-variance perturbation about `T = F` (and about the
/// mean moisture, stddev 2), spun up and then recorded for `run_steps`.
pub fn nature_run(
    params: &ModelParams,
    seed: u64,
    spinup_steps: usize,
    run_steps: usize,
    grid: &GridSetup,
) -> Result<Trajectory> {
    let mut rng = SplitMix64::new(seed);
    let n = grid.grid_size;
    let temperature = (0..n)
        .map(|_| params.forcing + rng.next_gaussian())
        .collect();
    let moisture = (0..n)
        .map(|_| (grid.initial_moisture + 2.0 * rng.next_gaussian()).max(0.0))
        .collect();
    let init = ModelState::new(temperature, moisture)?;
    let spun = if spinup_steps == 0 {
        init
    } else {
        integrate(&init, params, spinup_steps)?.last().clone()
    };
    integrate(&spun, params, run_steps)
}

/// `y_i = H^(truth) + noise_i + delta_tb`, one observation per operator
/// location, scan position equal to the observation index.
pub fn synthesize_observations(
    truth: &ModelState,
    operator: &ColumnOperator,
    bias_truth: &BiasModel,
    obs_error_seed: u64,
    error_stddev: f64,
    delta_tb: f64,
) -> Result<Vec<RadianceObservation>> {
    truth.validate()?;
    if truth.len() != operator.grid_size {
        return Err(Error::Dimension {
            what: "truth grid",
            expected: operator.grid_size,
            found: truth.len(),
        });
    }
    if let Some(&k) = operator
        .locations
        .iter()
        .find(|&&k| k >= operator.grid_size)
    {
        return Err(Error::validation(
            "observation location",
            format!("{k} is outside the grid"),
        ));
    }
    let state = truth.to_control();
    let mut rng = SplitMix64::new(obs_error_seed);
    operator
        .locations
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let col = operator.column(&state, i);
            let mut obs = RadianceObservation::new(0.0, error_stddev, i as f64)?;
            let clean = radiance::bias_corrected_forward(&col, bias_truth, &obs, &operator.params);
            obs.value = clean + error_stddev * rng.next_gaussian() + delta_tb;
            obs.applied_perturbation = delta_tb;
            obs.validate()?;
            Ok(obs)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_state(seed: u64, n: usize) -> ModelState {
        let mut rng = SplitMix64::new(seed);
        ModelState::new(
            (0..n).map(|_| 8.0 + 3.0 * rng.next_gaussian()).collect(),
            (0..n).map(|_| 15.0 + 15.0 * rng.next_unit()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn lorenz_fixed_point() {
        let params = ModelParams {
            moisture_coupling: 0.0,
            ..ModelParams::default()
        };
        let s = ModelState::new(vec![8.0; 40], vec![0.0; 40]).unwrap();
        let next = step(&s, &params).unwrap();
        for (a, b) in next.temperature.iter().zip(&s.temperature) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(next.moisture, s.moisture);
    }

    #[test]
    fn step_is_deterministic() {
        let s = random_state(3, 40);
        let p = ModelParams::default();
        assert_eq!(step(&s, &p).unwrap(), step(&s.clone(), &p).unwrap());
    }

    #[test]
    fn tendency_matches_direct_formula() {
        let s = random_state(5, 12);
        let p = ModelParams::default();
        let (dt, dq) = tendency(&s.temperature, &s.moisture, &p);
        let n = 12;
        let (t, q) = (&s.temperature, &s.moisture);
        for k in 0..n {
            let kp1 = (k + 1) % n;
            let km1 = (k + n - 1) % n;
            let km2 = (k + n - 2) % n;
            let want_t = (t[kp1] - t[km2]) * t[km1] - t[k] + p.forcing + p.moisture_coupling * q[k];
            let cond = if q[k] > p.condensation_threshold {
                p.condensation_rate * (q[k] - p.condensation_threshold)
            } else {
                0.0
            };
            // Donor-cell form: outflow weighted by (s+u)/2, inflow by (s-u)/2.
            let face = |a: usize, b: usize| {
                let u = (t[a] + t[b]) / 2.0;
                let s = (u * u + 1.0).sqrt();
                (s + u) / 2.0 * q[a] - (s - u) / 2.0 * q[b]
            };
            let want_q = face(km1, k) - face(k, kp1) - cond;
            assert!((dt[k] - want_t).abs() < 1e-12);
            assert!((dq[k] - want_q).abs() < 1e-12);
        }
    }

    #[test]
    fn advection_conserves_moisture() {
        let s = random_state(4, 40);
        let p = ModelParams {
            condensation_rate: 0.0,
            ..ModelParams::default()
        };
        let (_, dq) = tendency(&s.temperature, &s.moisture, &p);
        assert!(dq.iter().sum::<f64>().abs() < 1e-10);
    }

    #[test]
    fn dry_point_is_not_drained() {
        let mut s = random_state(6, 40);
        s.moisture[10] = 0.0;
        let (_, dq) = tendency(&s.temperature, &s.moisture, &ModelParams::default());
        assert!(dq[10] >= 0.0);
    }

    #[test]
    fn blow_up_is_reported() {
        let p = ModelParams {
            dt: 5.0,
            ..ModelParams::default()
        };
        let s = random_state(1, 40);
        match integrate(&s, &p, 200) {
            Err(Error::BlowUp { .. }) => {}
            other => panic!("expected blow-up, got {:?}", other.map(|t| t.len())),
        }
    }

    #[test]
    fn integrate_composes() {
        let s = random_state(9, 40);
        let p = ModelParams::default();
        assert_eq!(integrate(&s, &p, 0).unwrap().states, vec![s.clone()]);
        let whole = integrate(&s, &p, 50).unwrap();
        let first = integrate(&s, &p, 20).unwrap();
        let second = integrate(first.last(), &p, 30).unwrap();
        let mut joined = first.states.clone();
        joined.extend(second.states[1..].iter().cloned());
        assert_eq!(joined, whole.states);
    }

    #[test]
    fn precipitation_hand_value() {
        let p = ModelParams::default();
        let mut q = vec![10.0; 8];
        q[3] = p.condensation_threshold + 5.0;
        let s = ModelState::new(vec![8.0; 8], q).unwrap();
        let traj = integrate(&s, &p, 1).unwrap();
        let d = diagnostics(&traj, &p);
        assert!((d.accumulated_precipitation[3] - 0.01).abs() < 1e-15);
        assert!(d
            .accumulated_precipitation
            .iter()
            .enumerate()
            .all(|(i, v)| i == 3 || *v == 0.0));
    }

    #[test]
    fn dry_run_has_no_precipitation() {
        let p = ModelParams {
            condensation_threshold: 1e9,
            ..ModelParams::default()
        };
        let traj = integrate(&random_state(2, 40), &p, 100).unwrap();
        assert!(diagnostics(&traj, &p)
            .accumulated_precipitation
            .iter()
            .all(|v| *v == 0.0));
    }

    #[test]
    fn nature_run_seeding() {
        let p = ModelParams::default();
        let g = GridSetup::default();
        let a = nature_run(&p, 7, 100, 10, &g).unwrap();
        assert_eq!(a, nature_run(&p, 7, 100, 10, &g).unwrap());
        let b = nature_run(&p, 8, 0, 0, &g).unwrap();
        let a0 = nature_run(&p, 7, 0, 0, &g).unwrap();
        assert_ne!(a0.states[0], b.states[0]);
    }
}
