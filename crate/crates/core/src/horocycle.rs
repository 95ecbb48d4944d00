// SPDX-License-Identifier: Apache-2.0

//! The unit-speed flow along the oriented stable line field, its ergodic
//! integrals, and the rotation number of its return map.

use nalgebra::Vector2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::bundles::{converged_depth, BundleSettings, Bundles, DEFAULT_HALFWIDTH};
use crate::error::{Error, Result};
use crate::maps::{LiftPoint, MapSpec, TorusPoint};
use crate::ode::{integrate, StepControl, StepStats};
pub use crate::observable::Observable;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowSettings {
    /// Local error per unit time of the position.
    pub tol: f64,
    pub max_step: f64,
    pub min_step: f64,
    /// Enclosure width demanded of every field evaluation.
    pub bundle_tol: f64,
}

impl Default for FlowSettings {
    fn default() -> Self {
        Self { tol: 1e-9, max_step: 0.05, min_step: 1e-12, bundle_tol: 1e-11 }
    }
}

impl FlowSettings {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// The vector field `X = v^s` and its flow.
#[derive(Debug, Clone)]
pub struct StableFlow<'a> {
    spec: &'a MapSpec,
    bundles: Bundles<'a>,
    constant: Option<Vector2<f64>>,
    settings: FlowSettings,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub point: [f64; 2],
    pub integrals: Vec<Complex64>,
    /// `H(1)`.
    pub unit: f64,
    pub arc_length: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub start: [f64; 2],
    pub records: Vec<TrajectoryRecord>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub max_error: f64,
    /// Largest `| ‖X‖ - 1 |` seen at an accepted step.
    pub max_unit_defect: f64,
}

const UNIT_REL_TOL: f64 = 1e-9;

impl<'a> StableFlow<'a> {
    pub fn new(spec: &'a MapSpec, settings: FlowSettings) -> Result<Self> {
        if spec.is_linear() {
            let bundles = Bundles::new(spec, BundleSettings::new(1, 1.0));
            return Ok(Self { spec, bundles, constant: Some(spec.matrix().stable_eigenvector()), settings });
        }
        let probe = Vector2::new(0.1234, 0.5678);
        let depth = converged_depth(spec, &probe, settings.bundle_tol * 0.1, DEFAULT_HALFWIDTH)?;
        let bs = BundleSettings { depth: depth + 2, tol: settings.bundle_tol, halfwidth: DEFAULT_HALFWIDTH };
        Ok(Self { spec, bundles: Bundles::new(spec, bs), constant: None, settings })
    }

    pub fn spec(&self) -> &MapSpec {
        self.spec
    }

    pub fn settings(&self) -> &FlowSettings {
        &self.settings
    }

    #[inline]
    pub fn field(&self, x: &LiftPoint) -> Result<Vector2<f64>> {
        match self.constant {
            Some(v) => Ok(v),
            None => self.bundles.stable_vector(x),
        }
    }

    fn control(&self) -> StepControl {
        StepControl { tol: self.settings.tol, max_step: self.settings.max_step, min_step: self.settings.min_step, controlled: 2 }
    }

    /// Integrates from `x0` for `|t|` in the direction `sign(t)` of `X`,
    /// recording at each `|t|` in `times` (increasing, positive).
    pub fn trajectory(&self, x0: &LiftPoint, direction: f64, times: &[f64], observables: &[Observable]) -> Result<Trajectory> {
        if times.is_empty() || times[0] <= 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("record times must be positive and increasing".into()));
        }
        let m = observables.len();
        // state: x1, x2, H(1), arc length, then (re, im) per observable
        let mut y0 = vec![0.0; 4 + 2 * m];
        y0[0] = x0[0];
        y0[1] = x0[1];
        let one = Observable::constant(1.0);
        let rhs = |y: &[f64], dy: &mut [f64]| -> Result<()> {
            let x = Vector2::new(y[0], y[1]);
            let v = self.field(&x)? * direction;
            dy[0] = v[0];
            dy[1] = v[1];
            dy[2] = one.eval(&x).re;
            dy[3] = v.norm();
            for (i, f) in observables.iter().enumerate() {
                let w = f.eval(&x);
                dy[4 + 2 * i] = w.re;
                dy[5 + 2 * i] = w.im;
            }
            Ok(())
        };
        let mut records = Vec::with_capacity(times.len());
        let mut max_defect: f64 = 0.0;
        let (_, stats): (Vec<f64>, StepStats) = integrate(
            rhs,
            &y0,
            0.0,
            times,
            &self.control(),
            |i, y| {
                records.push(TrajectoryRecord {
                    t: times[i],
                    point: [y[0], y[1]],
                    integrals: (0..m).map(|j| Complex64::new(y[4 + 2 * j], y[5 + 2 * j])).collect(),
                    unit: y[2],
                    arc_length: y[3],
                })
            },
            |_, _, dy| {
                max_defect = max_defect.max(((dy[0] * dy[0] + dy[1] * dy[1]).sqrt() - 1.0).abs());
                Ok(false)
            },
        )?;
        for r in &records {
            if ((r.unit - r.t) / r.t).abs() > UNIT_REL_TOL {
                return Err(Error::UnitIntegralMismatch { t: r.t, value: r.unit });
            }
        }
        Ok(Trajectory {
            start: [x0[0], x0[1]],
            records,
            accepted_steps: stats.accepted,
            rejected_steps: stats.rejected,
            max_error: stats.max_error,
            max_unit_defect: max_defect,
        })
    }

    /// Trajectories from every sample, in parallel, in sample order.
    pub fn trajectories(&self, samples: &[TorusPoint], times: &[f64], observables: &[Observable]) -> Result<Vec<Trajectory>> {
        samples.par_iter().map(|x| self.trajectory(&x.as_lift(), 1.0, times, observables)).collect()
    }
}

/// Deterministic, well-spread sample points (an additive recurrence with
/// the plastic number), offset by `seed`.
pub fn sample_points(count: usize, seed: u64) -> Vec<TorusPoint> {
    let g = 1.324_717_957_244_746_f64;
    let (a1, a2) = (1.0 / g, 1.0 / (g * g));
    let start = 1 + seed.wrapping_mul(7919) % 1_000_003;
    (0..count as u64)
        .map(|i| {
            let j = (start + i) as f64;
            TorusPoint::new((0.5 + a1 * j).fract(), (0.5 + a2 * j).fract())
        })
        .collect()
}

/// Log-spaced grid with `per_decade` points per decade, endpoints included.
pub fn log_grid(t_min: f64, t_max: f64, per_decade: usize) -> Vec<f64> {
    let decades = (t_max / t_min).log10();
    let n = ((decades * per_decade as f64).round() as usize).max(1);
    (0..=n).map(|i| t_min * (t_max / t_min).powf(i as f64 / n as f64)).collect()
}

pub fn flow_field(spec: &MapSpec, x: &TorusPoint) -> Result<Vector2<f64>> {
    StableFlow::new(spec, FlowSettings::default())?.field(&x.as_lift())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FlowEndpoint {
    pub point: [f64; 2],
    pub torus_point: TorusPoint,
    pub arc_length: f64,
    pub steps: usize,
}

/// `h^t(x0)` on the lift; negative `t` flows backwards.
pub fn integrate_flow(spec: &MapSpec, x0: &TorusPoint, t: f64, tol: f64) -> Result<FlowEndpoint> {
    if t == 0.0 {
        return Ok(FlowEndpoint { point: [x0.x1(), x0.x2()], torus_point: *x0, arc_length: 0.0, steps: 0 });
    }
    let flow = StableFlow::new(spec, FlowSettings::with_tol(tol))?;
    let tr = flow.trajectory(&x0.as_lift(), t.signum(), &[t.abs()], &[])?;
    let r = &tr.records[0];
    Ok(FlowEndpoint {
        point: r.point,
        torus_point: TorusPoint::new(r.point[0], r.point[1]),
        arc_length: r.arc_length,
        steps: tr.accepted_steps,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ErgodicIntegral {
    pub x: TorusPoint,
    pub t: f64,
    pub value: Complex64,
    pub unit_integral: f64,
    pub achieved_tol: f64,
}

/// `H_{x,T}(f) = ∫_0^T f(h^t x) dt`.
pub fn horocycle_integral(spec: &MapSpec, x: &TorusPoint, t: f64, f: &Observable, tol: f64) -> Result<ErgodicIntegral> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("T = {t} must be positive")));
    }
    let flow = StableFlow::new(spec, FlowSettings::with_tol(tol))?;
    let tr = flow.trajectory(&x.as_lift(), 1.0, &[t], std::slice::from_ref(f))?;
    let r = &tr.records[0];
    Ok(ErgodicIntegral { x: *x, t, value: r.integrals[0], unit_integral: r.unit, achieved_tol: tr.max_error })
}

#[derive(Debug, Clone, Serialize)]
pub struct MeanEstimate {
    /// Sample mean of `H_{x,T}/T`.
    pub value: Complex64,
    /// `2 μ(T) - μ(T/2)`.
    pub richardson: Complex64,
    pub stderr: f64,
    /// `max(stderr, |value - richardson|)`.
    pub error: f64,
    pub t_long: f64,
    pub samples: usize,
    /// True when the value is the exact Lebesgue mean of a linear map.
    pub exact: bool,
}

/// `μ^s(f)` by averaging ergodic integrals over the samples.
pub fn estimate_mu_s(spec: &MapSpec, f: &Observable, t_long: f64, samples: &[TorusPoint]) -> Result<MeanEstimate> {
    Ok(estimate_mu_s_many(spec, std::slice::from_ref(f), t_long, samples)?.remove(0))
}

/// [`estimate_mu_s`] for several observables along shared trajectories.
pub fn estimate_mu_s_many(spec: &MapSpec, fs: &[Observable], t_long: f64, samples: &[TorusPoint]) -> Result<Vec<MeanEstimate>> {
    if t_long < 1e3 {
        return Err(Error::InvalidArgument(format!("T_long = {t_long} < 1e3")));
    }
    if samples.len() < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let flow = StableFlow::new(spec, FlowSettings::default())?;
    let trs = flow.trajectories(samples, &[t_long / 2.0, t_long], fs)?;
    let m = samples.len() as f64;
    Ok((0..fs.len())
        .map(|i| {
            let plain: Vec<Complex64> = trs.iter().map(|t| t.records[1].integrals[i] / t_long).collect();
            let half: Vec<Complex64> = trs.iter().map(|t| t.records[0].integrals[i] / (t_long / 2.0)).collect();
            let value = plain.iter().sum::<Complex64>() / m;
            let richardson = plain.iter().zip(&half).map(|(p, h)| 2.0 * p - h).sum::<Complex64>() / m;
            let var = plain.iter().map(|p| (p - value).norm_sqr()).sum::<f64>() / (m - 1.0);
            let stderr = (var / m).sqrt();
            MeanEstimate {
                value,
                richardson,
                stderr,
                error: stderr.max((value - richardson).norm()),
                t_long,
                samples: samples.len(),
                exact: false,
            }
        })
        .collect())
}

/// The mean used for centering: exact for linear maps (`μ^s` is Lebesgue
/// there), estimated otherwise.
pub fn reference_mean(spec: &MapSpec, f: &Observable, t_long: f64, samples: &[TorusPoint]) -> Result<MeanEstimate> {
    Ok(reference_means(spec, std::slice::from_ref(f), t_long, samples)?.remove(0))
}

pub fn reference_means(spec: &MapSpec, fs: &[Observable], t_long: f64, samples: &[TorusPoint]) -> Result<Vec<MeanEstimate>> {
    if spec.is_linear() {
        return Ok(fs
            .iter()
            .map(|f| {
                let v = f.lebesgue_mean();
                MeanEstimate { value: v, richardson: v, stderr: 0.0, error: 0.0, t_long, samples: 0, exact: true }
            })
            .collect());
    }
    estimate_mu_s_many(spec, fs, t_long, samples)
}

/// Least-squares slope and its standard error.
pub fn loglog_slope(t: &[f64], v: &[f64]) -> (f64, f64) {
    let xs: Vec<f64> = t.iter().map(|x| x.ln()).collect();
    let ys: Vec<f64> = v.iter().map(|y| y.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let ssr: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    let stderr = if n > 2.0 { (ssr / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    (slope, stderr)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationVerdict {
    /// Deviation vanishes to rounding; no slope.
    Exact,
    NoDeviations,
    Deviations,
}

pub const THETA_CEILING: f64 = 0.1;

#[derive(Debug, Clone, Serialize)]
pub struct DeviationFit {
    pub t_grid: Vec<f64>,
    pub sup_deviation: Vec<f64>,
    /// `per_x[i][j]`: sample `i`, time `t_grid[j]`.
    pub per_x: Vec<Vec<f64>>,
    pub mean: Complex64,
    pub theta: Option<f64>,
    pub stderr: Option<f64>,
    pub verdict: DeviationVerdict,
}

impl DeviationFit {
    pub fn passes(&self) -> bool {
        self.verdict != DeviationVerdict::Deviations
    }
}

/// Fits `sup_x |H_{x,T}(f) - T μ| ~ T^θ` over the grid.
pub fn deviation_exponent(
    spec: &MapSpec,
    f: &Observable,
    samples: &[TorusPoint],
    t_grid: &[f64],
    mean: Complex64,
) -> Result<DeviationFit> {
    Ok(deviation_exponents(spec, std::slice::from_ref(f), samples, t_grid, &[mean])?.remove(0))
}

/// [`deviation_exponent`] for several observables along shared trajectories.
pub fn deviation_exponents(
    spec: &MapSpec,
    fs: &[Observable],
    samples: &[TorusPoint],
    t_grid: &[f64],
    means: &[Complex64],
) -> Result<Vec<DeviationFit>> {
    if t_grid.len() < 3 || t_grid[t_grid.len() - 1] / t_grid[0] < 100.0 - 1e-9 {
        return Err(Error::InvalidArgument("T grid must span at least two decades".into()));
    }
    if means.len() != fs.len() {
        return Err(Error::InvalidArgument("one mean per observable".into()));
    }
    let flow = StableFlow::new(spec, FlowSettings::default())?;
    let trs = flow.trajectories(samples, t_grid, fs)?;
    Ok((0..fs.len())
        .map(|i| {
            let mean = means[i];
            let per_x: Vec<Vec<f64>> = trs
                .iter()
                .map(|tr| tr.records.iter().map(|r| (r.integrals[i] - mean * r.t).norm()).collect())
                .collect();
            let sup: Vec<f64> =
                (0..t_grid.len()).map(|j| per_x.iter().map(|v| v[j]).fold(0.0, f64::max)).collect();
            let exact = sup.iter().zip(t_grid).all(|(d, t)| *d <= 1e-12 * t);
            let (theta, stderr, verdict) = if exact {
                (None, None, DeviationVerdict::Exact)
            } else {
                let (sl, e) = loglog_slope(t_grid, &sup);
                let v = if sl <= THETA_CEILING { DeviationVerdict::NoDeviations } else { DeviationVerdict::Deviations };
                (Some(sl), Some(e), v)
            };
            DeviationFit { t_grid: t_grid.to_vec(), sup_deviation: sup, per_x, mean, theta, stderr, verdict }
        })
        .collect())
}

pub const COBOUNDARY_SLOPE: f64 = 0.05;
pub const MEAN_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, Serialize)]
pub struct CoboundaryReport {
    pub t_grid: Vec<f64>,
    /// `max_{x, t <= T} |H_{x,t}(f - μ̂)|`.
    pub running_sup: Vec<f64>,
    pub slope: f64,
    pub mean: MeanEstimate,
    pub verdict: bool,
}

/// Gottschalk–Hedlund check: bounded ergodic integrals for a mean-zero `f`.
/// The mean is estimated on `mean_samples`, which should be disjoint from `samples`.
pub fn coboundary_boundedness(
    spec: &MapSpec,
    f: &Observable,
    t_max: f64,
    samples: &[TorusPoint],
    mean_samples: &[TorusPoint],
) -> Result<CoboundaryReport> {
    let mean = reference_mean(spec, f, t_max.max(1e3), mean_samples)?;
    if mean.value.norm() > MEAN_SIGMAS * mean.error {
        return Err(Error::MeanNotZero { mean: mean.value.norm(), error: mean.error });
    }
    let g = f.plus_constant(-mean.value);
    let t_grid = log_grid(1.0, t_max, 8);
    let flow = StableFlow::new(spec, FlowSettings::default())?;
    let trs = flow.trajectories(samples, &t_grid, std::slice::from_ref(&g))?;
    let mut running = Vec::with_capacity(t_grid.len());
    let mut best: f64 = 0.0;
    for j in 0..t_grid.len() {
        for tr in &trs {
            best = best.max(tr.records[j].integrals[0].norm());
        }
        running.push(best.max(1e-300));
    }
    // fit over the part of the grid past T = 10
    let start = t_grid.iter().position(|&t| t >= 10.0).unwrap_or(0);
    let (slope, _) = loglog_slope(&t_grid[start..], &running[start..]);
    Ok(CoboundaryReport { t_grid, running_sup: running, slope, mean, verdict: slope <= COBOUNDARY_SLOPE })
}

#[derive(Debug, Clone, Serialize)]
pub struct RotationReport {
    /// `frac(|ŝ|)`.
    pub omega: f64,
    /// Lifted slope `Δx₂ / Δx₁` over the returns.
    pub slope: f64,
    /// `|b ω² + (a - d) ω - c|`.
    pub residual: f64,
    /// `|b ŝ² + (a - d) ŝ - c|`.
    pub slope_residual: f64,
    pub returns: usize,
    pub transversal: f64,
    pub continued_fraction: Vec<u64>,
}

/// First `count` partial quotients of `x` in (0, 1).
pub fn continued_fraction(x: f64, count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut r = x;
    for _ in 0..count {
        if r <= 0.0 {
            break;
        }
        let inv = 1.0 / r;
        let a = inv.floor();
        out.push(a as u64);
        r = inv - a;
    }
    out
}

/// Rotation number of the return map to the circle `x₁ = transversal`.
pub fn rotation_number(spec: &MapSpec, transversal: f64, n_iterates: usize) -> Result<RotationReport> {
    if n_iterates == 0 {
        return Err(Error::InvalidArgument("n_iterates must be positive".into()));
    }
    let flow = StableFlow::new(spec, FlowSettings::default())?;
    let x0 = Vector2::new(transversal, 0.0);
    let v0 = flow.field(&x0)?;
    if v0[0].abs() < 1e-3 {
        return Err(Error::TransversalityFailure { x1: x0[0], x2: x0[1] });
    }
    let dir = v0[0].signum();
    let target = transversal + dir * n_iterates as f64;
    let mut prev: Option<(f64, [f64; 2], [f64; 2])> = None;
    let mut crossing: Option<f64> = None;
    let ctl = flow.control();
    let rhs = |y: &[f64], dy: &mut [f64]| -> Result<()> {
        let v = flow.field(&Vector2::new(y[0], y[1]))?;
        dy[0] = v[0];
        dy[1] = v[1];
        Ok(())
    };
    let horizon = n_iterates as f64 * 1e3 + 10.0;
    integrate(rhs, &[x0[0], x0[1]], 0.0, &[horizon], &ctl, |_, _| {}, |t, y, dy| {
        if dy[0] * dir < 1e-3 {
            return Err(Error::TransversalityFailure { x1: y[0].rem_euclid(1.0), x2: y[1].rem_euclid(1.0) });
        }
        if (y[0] - target) * dir >= 0.0 {
            let (t0, y0, d0) = prev.expect("the first step cannot reach the target");
            crossing = Some(hermite_crossing(t0, y0, d0, t, [y[0], y[1]], [dy[0], dy[1]], target));
            return Ok(true);
        }
        prev = Some((t, [y[0], y[1]], [dy[0], dy[1]]));
        Ok(false)
    })?;
    let x2_end = crossing.ok_or(Error::TransversalityFailure { x1: x0[0], x2: x0[1] })?;
    let slope = (x2_end - x0[1]) / (target - transversal);
    let m = spec.matrix();
    let (a, b, c, d) = (m.a as f64, m.b as f64, m.c as f64, m.d as f64);
    let omega = slope.abs().fract();
    Ok(RotationReport {
        omega,
        slope,
        residual: (b * omega * omega + (a - d) * omega - c).abs(),
        slope_residual: (b * slope * slope + (a - d) * slope - c).abs(),
        returns: n_iterates,
        transversal,
        continued_fraction: continued_fraction(omega, 10),
    })
}

/// `x₂` where the cubic Hermite interpolant of one step meets `x₁ = target`.
fn hermite_crossing(t0: f64, y0: [f64; 2], d0: [f64; 2], t1: f64, y1: [f64; 2], d1: [f64; 2], target: f64) -> f64 {
    let h = t1 - t0;
    let interp = |i: usize, s: f64| -> (f64, f64) {
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let v = h00 * y0[i] + h10 * h * d0[i] + h01 * y1[i] + h11 * h * d1[i];
        let dv = ((6.0 * s2 - 6.0 * s) * y0[i] + (3.0 * s2 - 4.0 * s + 1.0) * h * d0[i]
            + (-6.0 * s2 + 6.0 * s) * y1[i]
            + (3.0 * s2 - 2.0 * s) * h * d1[i])
            / h;
        (v, dv)
    };
    let mut s = ((target - y0[0]) / (y1[0] - y0[0])).clamp(0.0, 1.0);
    for _ in 0..20 {
        let (v, dv) = interp(0, s);
        let step = (v - target) / (dv * h);
        s = (s - step).clamp(0.0, 1.0);
        if step.abs() < 1e-15 {
            break;
        }
    }
    interp(1, s).0
}
