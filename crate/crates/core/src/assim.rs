//! 3DVar analysis over an augmented control vector: model state plus
//! radiance bias coefficients.
//!
//! ```text
//! J(x, b) = 1/2 (x - xb)' B^-1 (x - xb)
//!         + 1/2 (b - bb)' Bb^-1 (b - bb)
//!         + 1/2 (y - H^(x, b))' R^-1 (y - H^(x, b))
//! ```
//!
//! `b = [b0, b1, .., bNp]` and `H^(x, b) = H(x) + b0 + sum bi pi(x)`.

use nalgebra::DMatrix;

use crate::covariance::CovarianceSpec;
use crate::error::{Error, Result};
use crate::ncg::{self, NcgOptions};
use crate::radiance::{self, ColumnState, ForwardOperatorParams, Predictor, RadianceObservation};

/// Model equivalent of one observation before bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsEquivalent {
    pub model: f64,
    pub predictors: Vec<f64>,
}

/// Binds the control state to observations.
pub trait ObservationOperator {
    fn state_len(&self) -> usize;
    fn predictor_count(&self) -> usize;
    fn evaluate(&self, state: &[f64], obs: &RadianceObservation, index: usize) -> ObsEquivalent;
    /// `grad += weight * d(H + sum bi pi)/dx` for observation `index`.
    fn add_adjoint(
        &self,
        state: &[f64],
        obs: &RadianceObservation,
        index: usize,
        coefficients: &[f64],
        weight: f64,
        grad: &mut [f64],
    );
}

/// Radiance operator over a `[temperature; moisture]` gridded state.
///
/// Observation `i` sees the column at grid point `locations[i]` with
/// `T_surf = surface_offset + T_k`, `T_atm = T_surf - lapse`, `q = q_k`.
#[derive(Debug, Clone)]
pub struct ColumnOperator {
    pub params: ForwardOperatorParams,
    pub predictors: Vec<Predictor>,
    pub grid_size: usize,
    pub locations: Vec<usize>,
    pub surface_offset: f64,
    pub lapse: f64,
}

impl ColumnOperator {
    /// Column state, unchecked: the minimizer may visit negative moisture.
    pub fn column(&self, state: &[f64], index: usize) -> ColumnState {
        let k = self.locations[index];
        let surface = self.surface_offset + state[k];
        ColumnState {
            water_vapor: state[self.grid_size + k],
            surface_temperature: surface,
            atmosphere_temperature: surface - self.lapse,
        }
    }
}

impl ObservationOperator for ColumnOperator {
    fn state_len(&self) -> usize {
        2 * self.grid_size
    }

    fn predictor_count(&self) -> usize {
        self.predictors.len()
    }

    fn evaluate(&self, state: &[f64], obs: &RadianceObservation, index: usize) -> ObsEquivalent {
        let col = self.column(state, index);
        ObsEquivalent {
            model: radiance::forward(&col, &self.params),
            predictors: self.predictors.iter().map(|p| p.value(&col, obs)).collect(),
        }
    }

    fn add_adjoint(
        &self,
        state: &[f64],
        _obs: &RadianceObservation,
        index: usize,
        coefficients: &[f64],
        weight: f64,
        grad: &mut [f64],
    ) {
        let k = self.locations[index];
        let col = self.column(state, index);
        let (d_surface, d_atm) = radiance::forward_temperature_partials(&col, &self.params);
        // Both column temperatures move one-for-one with T_k.
        let d_temperature = d_surface
            + d_atm
            + coefficients
                .iter()
                .zip(&self.predictors)
                .map(|(b, p)| b * p.surface_temperature_derivative())
                .sum::<f64>();
        grad[k] += weight * d_temperature;
        grad[self.grid_size + k] += weight * radiance::forward_tangent(&col, &self.params);
    }
}

/// `H(x) = M x` with fixed per-observation predictor values.
#[derive(Debug, Clone)]
pub struct LinearOperator {
    pub matrix: DMatrix<f64>,
    pub predictor_values: Vec<Vec<f64>>,
}

impl ObservationOperator for LinearOperator {
    fn state_len(&self) -> usize {
        self.matrix.ncols()
    }

    fn predictor_count(&self) -> usize {
        self.predictor_values.first().map_or(0, |p| p.len())
    }

    fn evaluate(&self, state: &[f64], _obs: &RadianceObservation, index: usize) -> ObsEquivalent {
        let row = self.matrix.row(index);
        ObsEquivalent {
            model: row.iter().zip(state).map(|(a, x)| a * x).sum(),
            predictors: self.predictor_values[index].clone(),
        }
    }

    fn add_adjoint(
        &self,
        _state: &[f64],
        _obs: &RadianceObservation,
        index: usize,
        _coefficients: &[f64],
        weight: f64,
        grad: &mut [f64],
    ) {
        for (g, a) in grad.iter_mut().zip(self.matrix.row(index).iter()) {
            *g += weight * a;
        }
    }
}

/// State and bias coefficients `[b0, b1, ..]` varied together.
#[derive(Debug, Clone, PartialEq)]
pub struct Control {
    pub state: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Control {
    fn flatten(&self) -> Vec<f64> {
        self.state.iter().chain(&self.bias).copied().collect()
    }

    fn split(flat: &[f64], state_len: usize) -> Self {
        Self {
            state: flat[..state_len].to_vec(),
            bias: flat[state_len..].to_vec(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AssimilationProblem<Op> {
    pub background_state: Vec<f64>,
    pub background_bias: Vec<f64>,
    pub state_covariance: CovarianceSpec,
    pub bias_covariance: CovarianceSpec,
    pub obs_covariance: CovarianceSpec,
    pub observations: Vec<RadianceObservation>,
    pub operator: Op,
    /// Keep the bias coefficients at their initial values.
    pub hold_bias_fixed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisResult {
    pub analysis_state: Vec<f64>,
    pub analysis_bias: Vec<f64>,
    pub final_cost: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn quad(residual: &[f64], cov: &CovarianceSpec) -> (f64, Vec<f64>) {
    let weighted = cov.solve(residual);
    let v = 0.5
        * residual
            .iter()
            .zip(&weighted)
            .map(|(a, b)| a * b)
            .sum::<f64>();
    (v, weighted)
}

impl<Op: ObservationOperator> AssimilationProblem<Op> {
    pub fn validate(&self) -> Result<()> {
        let n = self.operator.state_len();
        let nb = 1 + self.operator.predictor_count();
        let m = self.observations.len();
        let checks = [
            ("background state", n, self.background_state.len()),
            ("state covariance", n, self.state_covariance.dim()),
            ("background bias", nb, self.background_bias.len()),
            ("bias covariance", nb, self.bias_covariance.dim()),
            ("observation covariance", m, self.obs_covariance.dim()),
        ];
        for (what, expected, found) in checks {
            if expected != found {
                return Err(Error::Dimension {
                    what,
                    expected,
                    found,
                });
            }
        }
        for o in &self.observations {
            o.validate()?;
        }
        Ok(())
    }

    fn check_control(&self, control: &Control) -> Result<()> {
        if control.state.len() != self.background_state.len() {
            return Err(Error::Dimension {
                what: "control state",
                expected: self.background_state.len(),
                found: control.state.len(),
            });
        }
        if control.bias.len() != self.background_bias.len() {
            return Err(Error::Dimension {
                what: "control bias",
                expected: self.background_bias.len(),
                found: control.bias.len(),
            });
        }
        Ok(())
    }

    pub fn background(&self) -> Control {
        Control {
            state: self.background_state.clone(),
            bias: self.background_bias.clone(),
        }
    }

    /// `H^(x, b)` for every observation.
    pub fn model_equivalents(&self, control: &Control) -> Vec<f64> {
        self.observations
            .iter()
            .enumerate()
            .map(|(i, obs)| {
                let eq = self.operator.evaluate(&control.state, obs, i);
                let correction: f64 = control.bias[1..]
                    .iter()
                    .zip(&eq.predictors)
                    .map(|(b, p)| b * p)
                    .sum();
                eq.model + control.bias[0] + correction
            })
            .collect()
    }

    /// `y - H^(x, b)`.
    pub fn innovation(&self, control: &Control) -> Result<Vec<f64>> {
        self.validate()?;
        self.check_control(control)?;
        Ok(self.innovation_unchecked(control))
    }

    fn innovation_unchecked(&self, control: &Control) -> Vec<f64> {
        self.model_equivalents(control)
            .into_iter()
            .zip(&self.observations)
            .map(|(h, o)| o.value - h)
            .collect()
    }

    pub fn cost(&self, control: &Control) -> Result<f64> {
        self.validate()?;
        self.check_control(control)?;
        Ok(self.cost_unchecked(control))
    }

    fn cost_unchecked(&self, control: &Control) -> f64 {
        self.cost_terms(control).0
    }

    /// Cost plus the weighted residuals needed for the gradient.
    fn cost_terms(&self, control: &Control) -> (f64, Vec<f64>, Vec<f64>, Vec<f64>) {
        let dx: Vec<f64> = control
            .state
            .iter()
            .zip(&self.background_state)
            .map(|(a, b)| a - b)
            .collect();
        let db: Vec<f64> = control
            .bias
            .iter()
            .zip(&self.background_bias)
            .map(|(a, b)| a - b)
            .collect();
        let d = self.innovation_unchecked(control);
        let (jx, wx) = quad(&dx, &self.state_covariance);
        let (jb, wb) = quad(&db, &self.bias_covariance);
        let (jo, wo) = quad(&d, &self.obs_covariance);
        (jx + jb + jo, wx, wb, wo)
    }

    /// `(dJ/dx, dJ/db)`.
    pub fn gradient(&self, control: &Control) -> Result<(Vec<f64>, Vec<f64>)> {
        self.validate()?;
        self.check_control(control)?;
        let (_, gx, gb) = self.value_and_gradient(control);
        Ok((gx, gb))
    }

    fn value_and_gradient(&self, control: &Control) -> (f64, Vec<f64>, Vec<f64>) {
        let (j, mut gx, mut gb, w) = self.cost_terms(control);
        let coefficients = &control.bias[1..];
        for (i, obs) in self.observations.iter().enumerate() {
            // dJo/dH^ = -R^-1 d
            let weight = -w[i];
            self.operator
                .add_adjoint(&control.state, obs, i, coefficients, weight, &mut gx);
            let eq = self.operator.evaluate(&control.state, obs, i);
            gb[0] += weight;
            for (g, p) in gb[1..].iter_mut().zip(&eq.predictors) {
                *g += weight * p;
            }
        }
        (j, gx, gb)
    }

    pub fn minimize(&self, init: &Control) -> Result<AnalysisResult> {
        self.minimize_with(init, &NcgOptions::default())
    }

    pub fn minimize_with(&self, init: &Control, options: &NcgOptions) -> Result<AnalysisResult> {
        self.validate()?;
        self.check_control(init)?;
        let n = init.state.len();
        let fixed_bias = init.bias.clone();
        let hold = self.hold_bias_fixed;
        let start = if hold {
            init.state.clone()
        } else {
            init.flatten()
        };
        let unpack = |flat: &[f64]| {
            if hold {
                Control {
                    state: flat.to_vec(),
                    bias: fixed_bias.clone(),
                }
            } else {
                Control::split(flat, n)
            }
        };
        let objective = |flat: &[f64], grad: &mut [f64]| {
            let c = unpack(flat);
            let (j, gx, gb) = self.value_and_gradient(&c);
            grad[..n].copy_from_slice(&gx);
            if !hold {
                grad[n..].copy_from_slice(&gb);
            }
            j
        };
        let out = ncg::minimize(&start, objective, options, |_, _, _| {}).map_err(|e| match e {
            Error::NonFiniteCost {
                iterations,
                last_iterate,
            } => Error::NonFiniteCost {
                iterations,
                last_iterate: unpack(&last_iterate).flatten(),
            },
            other => other,
        })?;
        let c = unpack(&out.x);
        Ok(AnalysisResult {
            analysis_state: c.state,
            analysis_bias: c.bias,
            final_cost: out.value,
            gradient_norm: out.gradient_norm,
            iterations: out.iterations,
            converged: out.converged,
        })
    }
}
