// SPDX-License-Identifier: Apache-2.0

//! Dormand–Prince 5(4) stepping with error control on a leading block of
//! the state. Trailing components (quadratures) ride along on the same stages.

use crate::error::{Error, Result};

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    /// Bound on the local error per unit time of the controlled block.
    pub tol: f64,
    pub max_step: f64,
    pub min_step: f64,
    /// Number of leading components under error control.
    pub controlled: usize,
}

#[derive(Debug, Clone, Default)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub max_error: f64,
}

/// Integrates `y' = f(y)` (autonomous) from `t0` through each time in `stops`
/// (increasing, all > `t0`), calling `at_stop` with the state at each one.
/// `on_accept` sees every accepted `(t, y, y')`; returning `true` stops the
/// integration there.
pub fn integrate<F, S, V>(
    f: F,
    y0: &[f64],
    t0: f64,
    stops: &[f64],
    ctl: &StepControl,
    mut at_stop: S,
    mut on_accept: V,
) -> Result<(Vec<f64>, StepStats)>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()>,
    S: FnMut(usize, &[f64]),
    V: FnMut(f64, &[f64], &[f64]) -> Result<bool>,
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut y5 = vec![0.0; n];
    let mut stats = StepStats::default();
    f(&y, &mut k[0])?;
    let mut h = ctl.max_step;
    for (si, &stop) in stops.iter().enumerate() {
        while t < stop {
            let remaining = stop - t;
            let last = h >= remaining;
            let hs = if last { remaining } else { h };
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = y[i];
                    for j in 0..s {
                        acc += hs * A[s][j] * k[j][i];
                    }
                    tmp[i] = acc;
                }
                f(&tmp, &mut k[s])?;
            }
            let mut err: f64 = 0.0;
            for i in 0..n {
                let mut s5 = 0.0;
                let mut d = 0.0;
                for s in 0..7 {
                    s5 += B5[s] * k[s][i];
                    d += (B5[s] - B4[s]) * k[s][i];
                }
                y5[i] = y[i] + hs * s5;
                if i < ctl.controlled {
                    err = err.max(d.abs());
                }
            }
            // err is already per unit time: |y5 - y4| / h
            if err <= ctl.tol {
                t = if last { stop } else { t + hs };
                std::mem::swap(&mut y, &mut y5);
                // FSAL: the last stage is the derivative at the new point
                let (first, rest) = k.split_at_mut(1);
                std::mem::swap(&mut first[0], &mut rest[5]);
                stats.accepted += 1;
                stats.max_error = stats.max_error.max(err);
                if on_accept(t, &y, &k[0])? {
                    return Ok((y, stats));
                }
            } else {
                stats.rejected += 1;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * (ctl.tol / err).powf(0.25)).clamp(0.2, 5.0) };
            if !(last && err <= ctl.tol) {
                h = (hs * factor).min(ctl.max_step);
            }
            if h < ctl.min_step {
                return Err(Error::StepUnderflow { t, step: h });
            }
        }
        at_stop(si, &y);
    }
    Ok((y, stats))
}
