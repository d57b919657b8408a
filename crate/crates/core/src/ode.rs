//! Adaptive Dormand-Prince 5(4) integration for the flow and path modules.

use crate::{Error, Result};
use nalgebra::DVector;

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-11,
            atol: 1e-12,
            max_steps: 4_000_000,
        }
    }
}

const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
const B_ERR: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

/// Integrates y' = f(t, y) from (t0, y0) to t1, adapting the step size.
pub fn integrate<F>(f: &F, t0: f64, y0: &DVector<f64>, t1: f64, opts: &OdeOptions) -> Result<DVector<f64>>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(y0.clone());
    }
    assert!(span > 0.0, "integration must move forward in time");
    let mut t = t0;
    let mut y = y0.clone();
    let mut k1 = f(t, &y);
    let mut h = (span / 16.0).clamp(1e-8, 0.05);
    let mut steps = 0usize;
    loop {
        let remaining = t1 - t;
        if remaining <= f64::EPSILON * t1.abs().max(1.0) {
            return Ok(y);
        }
        if steps >= opts.max_steps {
            return Err(Error::IntegrationFailure { t });
        }
        steps += 1;
        let (hs, is_final) = if h >= remaining {
            (remaining, true)
        } else {
            (h, false)
        };
        let k2 = f(t + hs / 5.0, &(&y + &k1 * (A2[0] * hs)));
        let k3 = f(t + 0.3 * hs, &(&y + (&k1 * A3[0] + &k2 * A3[1]) * hs));
        let k4 = f(t + 0.8 * hs, &(&y + (&k1 * A4[0] + &k2 * A4[1] + &k3 * A4[2]) * hs));
        let k5 = f(
            t + 8.0 / 9.0 * hs,
            &(&y + (&k1 * A5[0] + &k2 * A5[1] + &k3 * A5[2] + &k4 * A5[3]) * hs),
        );
        let k6 = f(
            t + hs,
            &(&y + (&k1 * A6[0] + &k2 * A6[1] + &k3 * A6[2] + &k4 * A6[3] + &k5 * A6[4]) * hs),
        );
        let y_new = &y + (&k1 * B[0] + &k3 * B[2] + &k4 * B[3] + &k5 * B[4] + &k6 * B[5]) * hs;
        // first-same-as-last stage
        let k7 = f(t + hs, &y_new);
        let err_vec = (&k1 * B_ERR[0]
            + &k3 * B_ERR[2]
            + &k4 * B_ERR[3]
            + &k5 * B_ERR[4]
            + &k6 * B_ERR[5]
            + &k7 * B_ERR[6])
            * hs;
        let mut err = 0.0;
        for i in 0..y.len() {
            let scale = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            let e = err_vec[i] / scale;
            err += e * e;
        }
        err = (err / y.len() as f64).sqrt();
        let accepted = err <= 1.0;
        if accepted {
            y = y_new;
            k1 = k7;
            if is_final {
                return Ok(y);
            }
            t += hs;
        }
        let factor = if err > 0.0 {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h = hs * factor;
        if !accepted && h < 1e-14 * span.abs().max(1.0) {
            return Err(Error::IntegrationFailure { t });
        }
    }
}

/// Integrates through the sorted `times`, returning the state at each of them.
/// `times[0]` must equal `t0`; the initial state is returned first. An optional
/// `post_step` hook can adjust the state after each sample (e.g. level-set
/// projection) and may record diagnostics.
pub fn integrate_samples<F, P>(
    f: &F,
    t0: f64,
    y0: &DVector<f64>,
    times: &[f64],
    opts: &OdeOptions,
    mut post_step: P,
) -> Result<Vec<DVector<f64>>>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
    P: FnMut(f64, DVector<f64>) -> DVector<f64>,
{
    assert!(!times.is_empty() && (times[0] - t0).abs() < 1e-14);
    let mut out = Vec::with_capacity(times.len());
    let mut y = y0.clone();
    out.push(y.clone());
    let mut t_prev = t0;
    for &t in &times[1..] {
        y = integrate(f, t_prev, &y, t, opts)?;
        y = post_step(t, y);
        out.push(y.clone());
        t_prev = t;
    }
    Ok(out)
}

/// Uniform grid of `steps + 1` times covering [t0, t0 + span].
pub fn uniform_times(t0: f64, span: f64, steps: usize) -> Vec<f64> {
    (0..=steps)
        .map(|i| t0 + span * i as f64 / steps as f64)
        .collect()
}
