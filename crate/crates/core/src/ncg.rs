//! Nonlinear conjugate gradient (Polak-Ribiere+, restarted) with a
//! backtracking Armijo line search.
//!
//! Near the minimum the achievable decrease in `f` drops below the rounding
//! noise of the cost itself, and Armijo alone stalls. A step is then also
//! accepted under the approximate Wolfe conditions of Hager and Zhang, which
//! test the directional derivative instead of the function difference.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct NcgOptions {
    /// Stop when `|g| <= rel_tolerance * max(1, |g0|)`.
    pub rel_tolerance: f64,
    pub max_iterations: usize,
    pub armijo: f64,
    pub shrink: f64,
    pub max_backtracks: usize,
}

impl Default for NcgOptions {
    fn default() -> Self {
        Self {
            rel_tolerance: 1e-8,
            max_iterations: 500,
            armijo: 1e-4,
            shrink: 0.5,
            max_backtracks: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NcgOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub initial_gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(x: &[f64], alpha: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(xi, di)| xi + alpha * di).collect()
}

struct Point {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

/// Minimize `objective`, which returns the value and writes the gradient.
/// `trace` sees `(iteration, value, gradient_norm)` after every accepted step.
pub fn minimize<F, T>(
    x0: &[f64],
    mut objective: F,
    options: &NcgOptions,
    mut trace: T,
) -> Result<NcgOutcome>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
    T: FnMut(usize, f64, f64),
{
    let n = x0.len();
    let mut eval = |x: Vec<f64>| -> Point {
        let mut g = vec![0.0; n];
        let f = objective(&x, &mut g);
        Point { x, f, g }
    };

    let mut cur = eval(x0.to_vec());
    if !cur.f.is_finite() || cur.g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteCost {
            iterations: 0,
            last_iterate: x0.to_vec(),
        });
    }
    let g0 = dot(&cur.g, &cur.g).sqrt();
    let tolerance = options.rel_tolerance * g0.max(1.0);
    let mut d: Vec<f64> = cur.g.iter().map(|v| -v).collect();
    let mut previous_step: Option<(f64, f64)> = None; // (alpha, g.d)
    let mut since_restart = 0usize;
    let mut iterations = 0usize;

    loop {
        let gnorm = dot(&cur.g, &cur.g).sqrt();
        if gnorm <= tolerance {
            return Ok(NcgOutcome {
                x: cur.x,
                value: cur.f,
                gradient_norm: gnorm,
                initial_gradient_norm: g0,
                iterations,
                converged: true,
            });
        }
        if iterations >= options.max_iterations {
            break;
        }

        let mut slope = dot(&cur.g, &d);
        let mut steepest = since_restart == 0;
        if slope >= 0.0 {
            d = cur.g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
            steepest = true;
            since_restart = 0;
        }

        let next = match line_search(
            &cur,
            &d,
            slope,
            previous_step,
            options,
            &mut eval,
            iterations,
        )? {
            Some(p) => p,
            None if !steepest => {
                // Direction was poor; retry from steepest descent.
                d = cur.g.iter().map(|v| -v).collect();
                since_restart = 0;
                previous_step = None;
                continue;
            }
            None => break,
        };

        let alpha = next.0;
        let next = next.1;
        iterations += 1;
        since_restart += 1;
        previous_step = Some((alpha, slope));

        let gg_old = dot(&cur.g, &cur.g);
        let g_new_dot_old = dot(&next.g, &cur.g);
        let gg_new = dot(&next.g, &next.g);
        let beta = ((gg_new - g_new_dot_old) / gg_old).max(0.0);
        let restart = since_restart >= n.max(1) || g_new_dot_old.abs() >= 0.2 * gg_new;
        if restart {
            since_restart = 0;
            d = next.g.iter().map(|v| -v).collect();
        } else {
            d = next
                .g
                .iter()
                .zip(&d)
                .map(|(g, di)| -g + beta * di)
                .collect();
        }
        trace(iterations, next.f, gg_new.sqrt());
        log::debug!(
            "ncg iter {iterations}: J = {:.12e}, |g| = {:.6e}, alpha = {alpha:.4e}",
            next.f,
            gg_new.sqrt()
        );
        cur = next;
    }

    let gnorm = dot(&cur.g, &cur.g).sqrt();
    Ok(NcgOutcome {
        x: cur.x,
        value: cur.f,
        gradient_norm: gnorm,
        initial_gradient_norm: g0,
        iterations,
        converged: gnorm <= tolerance,
    })
}

/// Relative cost increase tolerated by the approximate Wolfe test.
const APPROX_WOLFE_EPS: f64 = 1e-10;

/// Backtracking from an interpolated first trial. The trial step comes from
/// a secant fit of the directional derivative at one probe point; the Armijo
/// test then shrinks it by `options.shrink` until sufficient decrease.
fn line_search<E>(
    cur: &Point,
    d: &[f64],
    slope: f64,
    previous_step: Option<(f64, f64)>,
    options: &NcgOptions,
    eval: &mut E,
    iterations: usize,
) -> Result<Option<(f64, Point)>>
where
    E: FnMut(Vec<f64>) -> Point,
{
    let dnorm = dot(d, d).sqrt();
    let probe_alpha = match previous_step {
        Some((a, s)) => (a * s / slope).abs(),
        None => 1.0 / dnorm.max(1.0),
    };
    let slack = 8.0 * f64::EPSILON * cur.f.abs();
    let armijo = |p: &Point, alpha: f64| {
        p.f.is_finite() && p.f <= cur.f + options.armijo * alpha * slope + slack
    };
    let approx_wolfe = |p: &Point| {
        let s = dot(&p.g, d);
        p.f.is_finite()
            && p.f <= cur.f + APPROX_WOLFE_EPS * cur.f.abs()
            && s >= 0.9 * slope
            && s <= -0.8 * slope
    };
    let armijo_ok = |p: &Point, alpha: f64| armijo(p, alpha) || approx_wolfe(p);

    let probe = eval(axpy(&cur.x, probe_alpha, d));
    let mut alpha = probe_alpha;
    if probe.f.is_finite() && probe.g.iter().all(|v| v.is_finite()) {
        let probe_slope = dot(&probe.g, d);
        if probe_slope > slope {
            let secant = probe_alpha * slope / (slope - probe_slope);
            if (secant - probe_alpha).abs() <= 1e-12 * probe_alpha {
                if armijo_ok(&probe, probe_alpha) {
                    return Ok(Some((probe_alpha, probe)));
                }
            } else {
                let trial = eval(axpy(&cur.x, secant, d));
                if armijo_ok(&trial, secant) && trial.g.iter().all(|v| v.is_finite()) {
                    if armijo_ok(&probe, probe_alpha) && probe.f < trial.f {
                        return Ok(Some((probe_alpha, probe)));
                    }
                    return Ok(Some((secant, trial)));
                }
                alpha = secant.min(probe_alpha);
            }
        } else if armijo_ok(&probe, probe_alpha) {
            // Nonpositive curvature along d: accept the descent we have.
            return Ok(Some((probe_alpha, probe)));
        }
    }

    let mut last_finite = cur.x.clone();
    for _ in 0..options.max_backtracks {
        alpha *= options.shrink;
        let p = eval(axpy(&cur.x, alpha, d));
        if !p.f.is_finite() {
            continue;
        }
        if armijo_ok(&p, alpha) && p.g.iter().all(|v| v.is_finite()) {
            return Ok(Some((alpha, p)));
        }
        last_finite = p.x;
    }
    if !probe.f.is_finite() && last_finite == cur.x {
        return Err(Error::NonFiniteCost {
            iterations,
            last_iterate: cur.x.clone(),
        });
    }
    Ok(None)
}
