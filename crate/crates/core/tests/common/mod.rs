//! Reference implementations used as test oracles. None of these call into
//! the library's numerics; they are deliberately naive.
#![allow(dead_code)]

use leakcast::assim::{AssimilationProblem, ColumnOperator, LinearOperator};
use leakcast::covariance::CovarianceSpec;
use leakcast::leakage::{ChannelSpec, EmissionMask};
use leakcast::radiance::{ForwardOperatorParams, Predictor, RadianceObservation};
use leakcast::rng::SplitMix64;
use nalgebra::DMatrix;

pub const K_B: f64 = 1.380649e-23;

/// Gaussian elimination with partial pivoting; `a` is row-major n x n.
#[allow(clippy::needless_range_loop)]
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

pub fn inverse_dense(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let e = (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect();
            solve_dense(a.to_vec(), e)
        })
        .collect();
    (0..n)
        .map(|i| (0..n).map(|j| cols[j][i]).collect())
        .collect()
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Minimizer of the linear-Gaussian augmented cost from the normal equations
/// `(P^-1 + G^T R^-1 G) z = P^-1 z_b + G^T R^-1 y`, with `z = [x; b0; b..]`
/// and `G_i = [M_i, 1, p_i]`.
pub fn linear_analysis_oracle(
    matrix: &DMatrix<f64>,
    predictors: &[Vec<f64>],
    background: &[f64],
    p: &[Vec<f64>],
    r_diag: &[f64],
    y: &[f64],
) -> Vec<f64> {
    let n = background.len();
    let m = y.len();
    let g: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut row: Vec<f64> = (0..matrix.ncols()).map(|j| matrix[(i, j)]).collect();
            row.push(1.0);
            row.extend(&predictors[i]);
            row
        })
        .collect();
    let p_inv = inverse_dense(p);
    let mut lhs = p_inv.clone();
    let mut rhs: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| p_inv[i][j] * background[j]).sum())
        .collect();
    for (i, gi) in g.iter().enumerate() {
        for a in 0..n {
            rhs[a] += gi[a] * y[i] / r_diag[i];
            for b in 0..n {
                lhs[a][b] += gi[a] * gi[b] / r_diag[i];
            }
        }
    }
    solve_dense(lhs, rhs)
}

pub fn block_diag(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len() + b.len();
    let mut out = vec![vec![0.0; n]; n];
    for (i, row) in a.iter().enumerate() {
        out[i][..a.len()].copy_from_slice(row);
    }
    for (i, row) in b.iter().enumerate() {
        out[a.len() + i][a.len()..].copy_from_slice(row);
    }
    out
}

fn diag_rows(v: &[f64]) -> Vec<Vec<f64>> {
    let n = v.len();
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { v[i] } else { 0.0 }).collect())
        .collect()
}

fn random_spd(rng: &mut SplitMix64, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.next_gaussian() / (n as f64).sqrt());
    &a * a.transpose() + DMatrix::identity(n, n) * 0.5
}

pub fn obs(value: f64, stddev: f64, scan: f64) -> RadianceObservation {
    RadianceObservation::new(value, stddev, scan).unwrap()
}

/// A random linear problem together with its direct-solve answer.
pub struct LinearCase {
    pub problem: AssimilationProblem<LinearOperator>,
    pub expected: Vec<f64>,
}

pub fn random_linear_case(rng: &mut SplitMix64, full_state_covariance: bool) -> LinearCase {
    let n = 1 + (rng.next_u64() % 12) as usize;
    let m = 1 + (rng.next_u64() % 15) as usize;
    let k = (rng.next_u64() % 3) as usize;
    let matrix = DMatrix::from_fn(m, n, |_, _| rng.next_gaussian());
    let predictors: Vec<Vec<f64>> = (0..m).map(|_| rng.gaussian_vec(k, 1.0)).collect();
    let xb = rng.gaussian_vec(n, 2.0);
    let bb = rng.gaussian_vec(k + 1, 0.5);
    let (state_cov, b_rows) = if full_state_covariance {
        let b = random_spd(rng, n);
        (CovarianceSpec::full("B", b.clone()).unwrap(), to_rows(&b))
    } else {
        let v: Vec<f64> = (0..n).map(|_| 0.2 + 2.0 * rng.next_unit()).collect();
        (
            CovarianceSpec::diagonal("B", v.clone()).unwrap(),
            diag_rows(&v),
        )
    };
    let bias_var: Vec<f64> = (0..k + 1).map(|_| 0.1 + rng.next_unit()).collect();
    let r: Vec<f64> = (0..m).map(|_| 0.05 + rng.next_unit()).collect();
    let y: Vec<f64> = (0..m).map(|_| 3.0 * rng.next_gaussian()).collect();
    let background: Vec<f64> = xb.iter().chain(&bb).copied().collect();
    let expected = linear_analysis_oracle(
        &matrix,
        &predictors,
        &background,
        &block_diag(&b_rows, &diag_rows(&bias_var)),
        &r,
        &y,
    );
    let problem = AssimilationProblem {
        background_state: xb,
        background_bias: bb,
        state_covariance: state_cov,
        bias_covariance: CovarianceSpec::diagonal("B_beta", bias_var).unwrap(),
        obs_covariance: CovarianceSpec::diagonal("R", r.clone()).unwrap(),
        observations: y
            .iter()
            .zip(&r)
            .enumerate()
            .map(|(i, (&v, &var))| obs(v, var.sqrt(), i as f64))
            .collect(),
        operator: LinearOperator {
            matrix,
            predictor_values: predictors,
        },
        hold_bias_fixed: false,
    };
    LinearCase { problem, expected }
}

/// Random column-operator problem: grid of 2..=20 points (state length up to
/// 40), up to 20 observations.
pub fn random_column_problem(rng: &mut SplitMix64) -> AssimilationProblem<ColumnOperator> {
    let grid = 2 + (rng.next_u64() % 19) as usize;
    let stride = 1 + (rng.next_u64() % 3) as usize;
    let locations: Vec<usize> = (0..grid).step_by(stride).collect();
    let all = [Predictor::SurfaceTemperature, Predictor::ScanPosition];
    let predictors: Vec<Predictor> = all
        .iter()
        .copied()
        .filter(|_| rng.next_unit() < 0.6)
        .collect();
    let operator = ColumnOperator {
        params: ForwardOperatorParams {
            opacity_coefficient: 0.02 + 0.06 * rng.next_unit(),
        },
        predictors: predictors.clone(),
        grid_size: grid,
        locations: locations.clone(),
        surface_offset: 273.0,
        lapse: 20.0 + 30.0 * rng.next_unit(),
    };
    let nb = predictors.len() + 1;
    let (background_state, _) = random_column_point(rng, grid, 0);
    let observations = locations
        .iter()
        .enumerate()
        .map(|(i, _)| {
            obs(
                240.0 + 40.0 * rng.next_unit(),
                0.2 + rng.next_unit(),
                i as f64,
            )
        })
        .collect::<Vec<_>>();
    let r = observations
        .iter()
        .map(|o| o.error_stddev.powi(2))
        .collect();
    AssimilationProblem {
        background_state,
        background_bias: rng.gaussian_vec(nb, 0.3),
        state_covariance: CovarianceSpec::scaled_identity("B", 2 * grid, 0.5 + rng.next_unit())
            .unwrap(),
        bias_covariance: CovarianceSpec::scaled_identity("B_beta", nb, 0.1 + rng.next_unit())
            .unwrap(),
        obs_covariance: CovarianceSpec::diagonal("R", r).unwrap(),
        observations,
        operator,
        hold_bias_fixed: false,
    }
}

/// Column-operator evaluation point scattered around the background.
pub fn random_column_point(rng: &mut SplitMix64, grid: usize, nb: usize) -> (Vec<f64>, Vec<f64>) {
    let t: Vec<f64> = (0..grid).map(|_| 8.0 + 3.0 * rng.next_gaussian()).collect();
    let q: Vec<f64> = (0..grid)
        .map(|_| (20.0 + 6.0 * rng.next_gaussian()).max(0.5))
        .collect();
    (t.into_iter().chain(q).collect(), rng.gaussian_vec(nb, 0.5))
}

/// Piecewise-linear-in-dB PSD at offset `x` from the aggressor center,
/// recomputed from the breakpoint list alone.
pub fn mask_psd(breakpoints: &[(f64, f64)], x: f64) -> f64 {
    for w in breakpoints.windows(2) {
        let ((x0, d0), (x1, d1)) = (w[0], w[1]);
        if x >= x0 && x <= x1 {
            let db = d0 + (d1 - d0) * (x - x0) / (x1 - x0);
            return 10f64.powf(db / 10.0);
        }
    }
    0.0
}

/// Composite trapezoid over `n` intervals.
pub fn trapezoid(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let inner: f64 = (1..n).map(|i| f(lo + h * i as f64)).sum();
    h * (inner + 0.5 * (f(lo) + f(hi)))
}

/// Composite Simpson over `n` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let inner: f64 = (1..n)
        .map(|i| if i % 2 == 1 { 4.0 } else { 2.0 } * f(lo + h * i as f64))
        .sum();
    h / 3.0 * (inner + f(lo) + f(hi))
}

/// Simpson over offsets `[lo, hi]` split at every breakpoint, so the kinks
/// of the PSD sit on nodes; `n` points are shared out by piece length.
/// Working in offsets keeps the breakpoints exact.
fn mask_power(breakpoints: &[(f64, f64)], lo: f64, hi: f64, n: usize) -> f64 {
    let mut cuts = vec![lo];
    cuts.extend(
        breakpoints
            .iter()
            .map(|&(o, _)| o)
            .filter(|&o| o > lo && o < hi),
    );
    cuts.push(hi);
    cuts.windows(2)
        .map(|w| {
            let share = (n as f64 * (w[1] - w[0]) / (hi - lo)) as usize;
            // The whole piece lies in one segment; find it once.
            let mid = 0.5 * (w[0] + w[1]);
            let Some(seg) = breakpoints
                .windows(2)
                .find(|s| mid >= s[0].0 && mid <= s[1].0)
            else {
                return 0.0; // sliver outside the mask from rounding of the edges
            };
            let ((x0, d0), (x1, d1)) = (seg[0], seg[1]);
            let psd = |x: f64| 10f64.powf((d0 + (d1 - d0) * (x - x0) / (x1 - x0)) / 10.0);
            simpson(psd, w[0], w[1], (share / 2 * 2).max(2))
        })
        .sum()
}

pub fn brute_force_fraction(
    mask: &EmissionMask,
    aggressor: &ChannelSpec,
    victim: &ChannelSpec,
    n: usize,
) -> f64 {
    let c = aggressor.center_frequency;
    let bps = &mask.breakpoints;
    let inside = mask_power(bps, victim.f_low - c, victim.f_high - c, n);
    inside / mask_power(bps, bps[0].0, bps[bps.len() - 1].0, n)
}

/// Random mask around a 25 GHz aggressor and a victim band inside it.
pub fn random_mask(rng: &mut SplitMix64) -> (EmissionMask, ChannelSpec, ChannelSpec) {
    let aggressor = ChannelSpec::centered(25e9, 400e6).unwrap();
    let count = 2 + (rng.next_u64() % 7) as usize;
    let mut offset = -3e9 + 1e9 * rng.next_unit();
    let mut bps = Vec::with_capacity(count);
    for _ in 0..count {
        bps.push((offset, -60.0 * rng.next_unit()));
        offset += 100e6 + 900e6 * rng.next_unit();
    }
    let mask = EmissionMask::new(bps.clone(), 0.0).unwrap();
    let (lo, hi) = (25e9 + bps[0].0, 25e9 + bps[count - 1].0);
    let width = (50e6 + 450e6 * rng.next_unit()).min(hi - lo);
    let start = lo + (hi - lo - width) * rng.next_unit();
    let victim = ChannelSpec::from_edges(start, start + width).unwrap();
    (mask, aggressor, victim)
}

/// Norm of the temperature error at t = 1 for each `dt`, against `reference_dt`.
/// Moisture is left out: the condensation threshold is a kink in its
/// tendency, which locally lowers the order of any Runge-Kutta scheme.
pub fn rk4_errors(
    start: &leakcast::nwp::ModelState,
    params: &leakcast::nwp::ModelParams,
    dts: &[f64],
    reference_dt: f64,
) -> Vec<f64> {
    let at_one = |dt: f64| {
        let p = leakcast::nwp::ModelParams { dt, ..*params };
        leakcast::nwp::integrate(start, &p, (1.0 / dt).round() as usize)
            .unwrap()
            .last()
            .clone()
    };
    let reference = at_one(reference_dt);
    dts.iter()
        .map(|&dt| {
            let s = at_one(dt);
            s.temperature
                .iter()
                .zip(&reference.temperature)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}
