// SPDX-License-Identifier: Apache-2.0

//! Grid certification of hyperbolicity with constant cones.

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;
use serde::Serialize;

use crate::bundles::{converged_depth, BundleSettings, Bundles};
use crate::error::{Error, Result};
use crate::maps::{LiftPoint, MapSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConeReport {
    /// Weakest expansion along `E^u` over the grid.
    pub lambda_u_min: f64,
    /// Weakest contraction along `E^s` over the grid.
    pub nu_s: f64,
    /// Strongest expansion.
    pub big_lambda_u: f64,
    /// Strongest contraction.
    pub big_lambda_s: f64,
    pub orientation_preserved: bool,
    /// Max |Det DF - 1| over the grid; zero for area-preserving maps.
    pub area_defect: f64,
    pub grid_n: usize,
    pub halfwidth: f64,
}

impl ConeReport {
    pub fn passes(&self) -> bool {
        self.lambda_u_min > 1.0 && self.nu_s < 1.0
    }

    pub fn is_area_preserving(&self) -> bool {
        self.area_defect <= 1e-12
    }
}

fn angle_to(core: &Vector2<f64>, v: &Vector2<f64>) -> (f64, f64) {
    // signed angle of v relative to the core line, and which nappe v lies in
    let dot = core.dot(v);
    let cross = core[0] * v[1] - core[1] * v[0];
    let nappe = dot.signum();
    ((cross * nappe).atan2(dot * nappe), nappe)
}

/// Checks that `m` maps the cone of half-angle `w` about `core` strictly into
/// itself. Returns the nappe sign (orientation of the core) on success, or
/// the offending angle.
fn maps_cone_inside(m: &Matrix2<f64>, core: &Vector2<f64>, w: f64) -> std::result::Result<f64, f64> {
    let (s, c) = w.sin_cos();
    let rays = [
        Vector2::new(c * core[0] - s * core[1], s * core[0] + c * core[1]),
        Vector2::new(c * core[0] + s * core[1], -s * core[0] + c * core[1]),
    ];
    let mut sign = 0.0;
    for r in rays {
        let img = m * r;
        let (ang, nappe) = angle_to(core, &img);
        if !(ang.abs() < w) {
            return Err(ang);
        }
        if sign != 0.0 && nappe != sign {
            return Err(std::f64::consts::FRAC_PI_2);
        }
        sign = nappe;
    }
    Ok(sign)
}

/// Certifies on a `grid_n x grid_n` grid that `DF^{-1}` maps the stable cone
/// into itself and `DF` maps the unstable cone into itself, then measures
/// the pointwise stretch factors along the invariant bundles.
pub fn verify_cone_condition(spec: &MapSpec, cone_halfwidth: f64, grid_n: usize) -> Result<ConeReport> {
    if grid_n < 16 {
        return Err(Error::InvalidArgument(format!("grid_n = {grid_n} < 16")));
    }
    if !(cone_halfwidth > 0.0 && cone_halfwidth < std::f64::consts::FRAC_PI_4) {
        return Err(Error::InvalidArgument(format!("cone half-width {cone_halfwidth} outside (0, π/4)")));
    }
    let es = spec.matrix().stable_eigenvector();
    let eu = spec.matrix().unstable_eigenvector();
    let points: Vec<LiftPoint> = (0..grid_n * grid_n)
        .map(|k| Vector2::new((k / grid_n) as f64 / grid_n as f64, (k % grid_n) as f64 / grid_n as f64))
        .collect();

    let signs: Vec<f64> = points
        .par_iter()
        .map(|x| {
            let j = spec.jacobian(x);
            let inv = j.try_inverse().ok_or(Error::ConeViolation {
                x1: x[0],
                x2: x[1],
                cone: "stable",
                angle: f64::NAN,
            })?;
            let sign = maps_cone_inside(&inv, &es, cone_halfwidth).map_err(|angle| Error::ConeViolation {
                x1: x[0],
                x2: x[1],
                cone: "stable",
                angle,
            })?;
            maps_cone_inside(&j, &eu, cone_halfwidth).map_err(|angle| Error::ConeViolation {
                x1: x[0],
                x2: x[1],
                cone: "unstable",
                angle,
            })?;
            Ok(sign)
        })
        .collect::<Result<_>>()?;
    let first = signs[0];
    if signs.iter().any(|&s| s != first) {
        return Err(Error::NotOrientable);
    }

    let tol = 1e-13;
    let depth = converged_depth(spec, &points[0], tol, cone_halfwidth)?;
    let settings = BundleSettings { depth: (depth + 4).min(crate::bundles::MAX_DEPTH), tol: 1e-11, halfwidth: cone_halfwidth };
    let bundles = Bundles::new(spec, settings);
    let stretches: Vec<(f64, f64, f64)> = points
        .par_iter()
        .map(|x| {
            let st = bundles.stretch_factors(x)?;
            Ok((st.ms.abs(), st.mu.abs(), (spec.jacobian(x).determinant().abs() - 1.0).abs()))
        })
        .collect::<Result<_>>()?;

    let mut report = ConeReport {
        lambda_u_min: f64::INFINITY,
        nu_s: 0.0,
        big_lambda_u: 0.0,
        big_lambda_s: f64::INFINITY,
        orientation_preserved: first > 0.0,
        area_defect: 0.0,
        grid_n,
        halfwidth: cone_halfwidth,
    };
    for (ms, mu, defect) in stretches {
        report.lambda_u_min = report.lambda_u_min.min(mu);
        report.big_lambda_u = report.big_lambda_u.max(mu);
        report.nu_s = report.nu_s.max(ms);
        report.big_lambda_s = report.big_lambda_s.min(ms);
        report.area_defect = report.area_defect.max(defect);
    }
    if !report.passes() {
        return Err(Error::ConeViolation { x1: f64::NAN, x2: f64::NAN, cone: "stretch", angle: f64::NAN });
    }
    Ok(report)
}
