// SPDX-License-Identifier: Apache-2.0

//! Stable and unstable line fields by cone iteration.
//!
//! The stable direction at `x` is obtained by pulling back the two boundary
//! rays of the stable cone at `F^depth(x)` along the forward orbit. Both rays
//! stay inside the (nested) pulled-back cones, so the angle between them
//! is a rigorous bound on the error of their bisector; that width is the
//! residual reported with each sample. The unstable direction mirrors this
//! with push-forwards along the backward orbit.

use nalgebra::{Matrix2, Vector2};

use crate::cone::ConeReport;
use crate::error::{Error, Result};
use crate::maps::{LiftPoint, MapSpec, TorusPoint};
use crate::orbits::OrbitRecord;

/// Aperture of the constant cones around the linear eigendirections.
pub const DEFAULT_HALFWIDTH: f64 = 0.3;
pub const MAX_DEPTH: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionSample {
    pub point: TorusPoint,
    pub vector: Vector2<f64>,
    /// Angular width of the enclosing cone after `depth` iterations.
    pub residual: f64,
    pub depth: usize,
}

/// Signed stretch factors: `DF_x v^s(x) = ms v^s(F x)`, `DF_x v^u(x) = mu v^u(F x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StretchPair {
    pub ms: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BundleSettings {
    pub depth: usize,
    pub tol: f64,
    pub halfwidth: f64,
}

impl BundleSettings {
    pub fn new(depth: usize, tol: f64) -> Self {
        Self { depth, tol, halfwidth: DEFAULT_HALFWIDTH }
    }

    /// `ceil(log tol / log(ν_s / λ_u_min))`, plus a small allowance for the
    /// initial cone width, capped at [`MAX_DEPTH`].
    pub fn from_cone_report(report: &ConeReport, tol: f64) -> Self {
        Self { depth: default_depth(report, tol), tol, halfwidth: report.halfwidth }
    }
}

pub fn default_depth(report: &ConeReport, tol: f64) -> usize {
    let ratio = report.nu_s / report.lambda_u_min;
    if !(ratio > 0.0 && ratio < 1.0) {
        return MAX_DEPTH;
    }
    let d = (tol.ln() / ratio.ln()).ceil() as usize + 2;
    d.clamp(1, MAX_DEPTH)
}

/// Evaluator for the invariant line fields of one map.
#[derive(Debug, Clone)]
pub struct Bundles<'a> {
    spec: &'a MapSpec,
    settings: BundleSettings,
    s_ref: Vector2<f64>,
    u_ref: Vector2<f64>,
    s_seeds: [Vector2<f64>; 2],
    u_seeds: [Vector2<f64>; 2],
}

fn rotate(v: &Vector2<f64>, angle: f64) -> Vector2<f64> {
    let (s, c) = angle.sin_cos();
    Vector2::new(c * v[0] - s * v[1], s * v[0] + c * v[1])
}

#[inline]
fn cross(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
fn solve2(m: &Matrix2<f64>, v: &Vector2<f64>) -> Vector2<f64> {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    Vector2::new(
        (m[(1, 1)] * v[0] - m[(0, 1)] * v[1]) / det,
        (m[(0, 0)] * v[1] - m[(1, 0)] * v[0]) / det,
    )
}

impl<'a> Bundles<'a> {
    pub fn new(spec: &'a MapSpec, settings: BundleSettings) -> Self {
        let s_ref = spec.matrix().stable_eigenvector();
        let u_ref = spec.matrix().unstable_eigenvector();
        let w = settings.halfwidth;
        Self {
            spec,
            settings,
            s_ref,
            u_ref,
            s_seeds: [rotate(&s_ref, w), rotate(&s_ref, -w)],
            u_seeds: [rotate(&u_ref, w), rotate(&u_ref, -w)],
        }
    }

    pub fn settings(&self) -> &BundleSettings {
        &self.settings
    }

    pub fn spec(&self) -> &MapSpec {
        self.spec
    }

    /// Reference orientation of `E^s_+`.
    pub fn stable_reference(&self) -> Vector2<f64> {
        self.s_ref
    }

    pub fn unstable_reference(&self) -> Vector2<f64> {
        self.u_ref
    }

    fn finish(
        &self,
        x: &LiftPoint,
        r: [Vector2<f64>; 2],
        reference: &Vector2<f64>,
        depth: usize,
    ) -> Result<DirectionSample> {
        let width = cross(&r[0], &r[1]).abs();
        let mut v = (r[0] + r[1]).normalize();
        let align = v.dot(reference);
        if align.abs() < 1e-3 {
            return Err(Error::OrientationAmbiguous { x1: x[0], x2: x[1] });
        }
        if align < 0.0 {
            v = -v;
        }
        if !(width <= self.settings.tol) {
            return Err(Error::NoConvergence { x1: x[0], x2: x[1], depth, residual: width });
        }
        Ok(DirectionSample { point: TorusPoint::reduce(x), vector: v, residual: width, depth })
    }

    /// Pulls the stable cone boundary back from `F^depth(x)`. Returns the two
    /// rays at `x`, and the Jacobian at `x`.
    fn stable_rays(&self, x: &LiftPoint, depth: usize) -> ([Vector2<f64>; 2], Matrix2<f64>) {
        const STACK: usize = 48;
        let mut buf = [Matrix2::zeros(); STACK];
        let mut heap = Vec::new();
        let jacs: &mut [Matrix2<f64>] = if depth <= STACK {
            &mut buf[..depth]
        } else {
            heap.resize(depth, Matrix2::zeros());
            &mut heap
        };
        let mut p = TorusPoint::reduce(x).as_lift();
        for slot in jacs.iter_mut() {
            let (y, j) = self.spec.lift_and_jacobian(&p);
            *slot = j;
            p = TorusPoint::reduce(&y).as_lift();
        }
        let mut r = self.s_seeds;
        for (i, j) in jacs.iter().rev().enumerate() {
            for ray in r.iter_mut() {
                *ray = solve2(j, ray);
            }
            // rays grow by about lambda per step; renormalize now and then
            if i % 8 == 7 {
                for ray in r.iter_mut() {
                    *ray = ray.normalize();
                }
            }
        }
        for ray in r.iter_mut() {
            *ray = ray.normalize();
        }
        let j0 = if depth > 0 { jacs[0] } else { self.spec.jacobian(x) };
        (r, j0)
    }

    pub fn stable_direction(&self, x: &LiftPoint) -> Result<DirectionSample> {
        self.stable_direction_at_depth(x, self.settings.depth)
    }

    pub fn stable_direction_at_depth(&self, x: &LiftPoint, depth: usize) -> Result<DirectionSample> {
        let (r, _) = self.stable_rays(x, depth);
        self.finish(x, r, &self.s_ref, depth)
    }

    /// Unit stable vector without the convergence bookkeeping; used as the
    /// horocycle vector field.
    #[inline]
    pub fn stable_vector(&self, x: &LiftPoint) -> Result<Vector2<f64>> {
        self.stable_direction(x).map(|d| d.vector)
    }

    fn unstable_rays(&self, x: &LiftPoint, depth: usize) -> Result<[Vector2<f64>; 2]> {
        let mut back: Vec<LiftPoint> = Vec::with_capacity(depth);
        let mut p = TorusPoint::reduce(x).as_lift();
        for _ in 0..depth {
            p = TorusPoint::reduce(&self.spec.inverse_lift(&p)?).as_lift();
            back.push(p);
        }
        let mut r = self.u_seeds;
        for q in back.iter().rev() {
            let j = self.spec.jacobian(q);
            for ray in r.iter_mut() {
                *ray = (j * *ray).normalize();
            }
        }
        Ok(r)
    }

    pub fn unstable_direction(&self, x: &LiftPoint) -> Result<DirectionSample> {
        self.unstable_direction_at_depth(x, self.settings.depth)
    }

    pub fn unstable_direction_at_depth(&self, x: &LiftPoint, depth: usize) -> Result<DirectionSample> {
        let r = self.unstable_rays(x, depth)?;
        self.finish(x, r, &self.u_ref, depth)
    }

    /// `ms` and `mu` at `x`.
    pub fn stretch_factors(&self, x: &LiftPoint) -> Result<StretchPair> {
        let depth = self.settings.depth.max(1);
        let vs = self.stable_direction_at_depth(x, depth)?;
        let fx = self.spec.lift(x);
        let vs_next = self.stable_direction_at_depth(&fx, depth)?;
        let j = self.spec.jacobian(x);
        let ms = (j * vs.vector).dot(&vs_next.vector);

        let vu = self.unstable_direction_at_depth(x, depth)?;
        let w = j * vu.vector;
        let mu = if w.dot(&self.u_ref) >= 0.0 { w.norm() } else { -w.norm() };
        Ok(StretchPair { ms, mu })
    }
}

/// Stable direction at `x` using `depth` pullbacks and the default cone.
pub fn stable_direction(spec: &MapSpec, x: &TorusPoint, depth: usize, tol: f64) -> Result<DirectionSample> {
    Bundles::new(spec, BundleSettings::new(depth.max(1), tol)).stable_direction(&x.as_lift())
}

pub fn unstable_direction(spec: &MapSpec, x: &TorusPoint, depth: usize, tol: f64) -> Result<DirectionSample> {
    Bundles::new(spec, BundleSettings::new(depth.max(1), tol)).unstable_direction(&x.as_lift())
}

pub fn stretch_factors(spec: &MapSpec, x: &TorusPoint, depth: usize, tol: f64) -> Result<StretchPair> {
    Bundles::new(spec, BundleSettings::new(depth.max(1), tol)).stretch_factors(&x.as_lift())
}

/// Smallest depth in 8, 16, 32, ... (capped) whose enclosure meets `tol`.
pub fn converged_depth(spec: &MapSpec, x: &LiftPoint, tol: f64, halfwidth: f64) -> Result<usize> {
    let b = Bundles::new(spec, BundleSettings { depth: 8, tol, halfwidth });
    let mut depth = 8;
    loop {
        let s = b.stable_rays(x, depth).0;
        let u = b.unstable_rays(x, depth)?;
        if cross(&s[0], &s[1]).abs() <= tol && cross(&u[0], &u[1]).abs() <= tol {
            return Ok(depth);
        }
        if depth >= MAX_DEPTH {
            return Err(Error::NoConvergence { x1: x[0], x2: x[1], depth, residual: cross(&s[0], &s[1]).abs() });
        }
        depth = (depth * 2).min(MAX_DEPTH);
    }
}

/// `λ̃^n = mu_n / |ms_n|`, the transversal expansion of the extended map at a
/// periodic point.
pub fn extended_multiplier(orbit: &OrbitRecord) -> Result<f64> {
    if !(orbit.ms.is_finite() && orbit.mu.is_finite()) || orbit.ms == 0.0 {
        return Err(Error::MissingMultipliers);
    }
    Ok(orbit.mu / orbit.ms.abs())
}
