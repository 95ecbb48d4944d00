// SPDX-License-Identifier: Apache-2.0

//! Hyperbolic toral automorphisms with trigonometric perturbations.
//!
//! A [`MapSpec`] describes `F = A + p` on the two-torus, where `A` is an
//! integer matrix in GL2(Z) and `p` is a finite sum of trigonometric
//! monomials. All evaluation happens on the lift `R^2`, so that
//! `F(x + m) = F(x) + A m` for integer `m`.

use std::f64::consts::TAU;
use std::fmt;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type LiftPoint = Vector2<f64>;

/// A point of the torus with coordinates reduced to `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct TorusPoint(Vector2<f64>);

impl From<[f64; 2]> for TorusPoint {
    fn from(v: [f64; 2]) -> Self {
        TorusPoint::new(v[0], v[1])
    }
}

impl From<TorusPoint> for [f64; 2] {
    fn from(p: TorusPoint) -> Self {
        [p.0[0], p.0[1]]
    }
}

impl TorusPoint {
    pub fn new(x1: f64, x2: f64) -> Self {
        Self::reduce(&Vector2::new(x1, x2))
    }

    pub fn reduce(x: &LiftPoint) -> Self {
        TorusPoint(Vector2::new(wrap_unit(x[0]), wrap_unit(x[1])))
    }

    pub fn x1(&self) -> f64 {
        self.0[0]
    }

    pub fn x2(&self) -> f64 {
        self.0[1]
    }

    pub fn as_lift(&self) -> LiftPoint {
        self.0
    }

    /// Euclidean distance on the flat torus.
    pub fn distance(&self, other: &TorusPoint) -> f64 {
        let d = self.0 - other.0;
        let w = |t: f64| {
            let t = t.abs();
            t.min(1.0 - t)
        };
        w(d[0]).hypot(w(d[1]))
    }
}

fn wrap_unit(t: f64) -> f64 {
    let r = t - t.floor();
    // t slightly below an integer can round up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Element of GL2(Z), stored row-major as `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IntegerMatrix2 {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

/// Topological invariants shared by every map homotopic to `A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearModel {
    /// Modulus of the expanding eigenvalue, `e^{h_top}`.
    pub lambda: f64,
    pub h_top: f64,
    /// `det A`.
    pub sigma: i64,
}

impl IntegerMatrix2 {
    pub fn new(a: i64, b: i64, c: i64, d: i64) -> Result<Self> {
        let det = a * d - b * c;
        if det.abs() != 1 {
            return Err(Error::NotUnimodular { a, b, c, d, det });
        }
        Ok(Self { a, b, c, d })
    }

    pub fn cat() -> Self {
        Self { a: 2, b: 1, c: 1, d: 1 }
    }

    pub fn det(&self) -> i64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> i64 {
        self.a + self.d
    }

    pub fn to_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.a as f64, self.b as f64, self.c as f64, self.d as f64)
    }

    pub fn transpose(&self) -> Self {
        Self { a: self.a, b: self.c, c: self.b, d: self.d }
    }

    pub fn apply(&self, v: [i64; 2]) -> [i64; 2] {
        [self.a * v[0] + self.b * v[1], self.c * v[0] + self.d * v[1]]
    }

    /// Checked matrix product, `None` on i64 overflow.
    pub fn checked_mul(&self, o: &Self) -> Option<Self> {
        let e = |x: i64, y: i64, z: i64, w: i64| x.checked_mul(y)?.checked_add(z.checked_mul(w)?);
        Some(Self {
            a: e(self.a, o.a, self.b, o.c)?,
            b: e(self.a, o.b, self.b, o.d)?,
            c: e(self.c, o.a, self.d, o.c)?,
            d: e(self.c, o.b, self.d, o.d)?,
        })
    }

    pub fn checked_pow(&self, n: u32) -> Option<Self> {
        let mut acc = Self { a: 1, b: 0, c: 0, d: 1 };
        for _ in 0..n {
            acc = acc.checked_mul(self)?;
        }
        Some(acc)
    }

    /// Hyperbolic iff `tr^2 - 4 det > 0` and neither root lies on the unit circle.
    pub fn is_hyperbolic(&self) -> bool {
        let t = self.trace();
        let disc = t * t - 4 * self.det();
        if disc <= 0 {
            return false;
        }
        let (lu, ls) = self.eigenvalues();
        (lu.abs() - 1.0).abs() > 1e-12 && (ls.abs() - 1.0).abs() > 1e-12
    }

    /// Signed eigenvalues `(expanding, contracting)`. Only meaningful when hyperbolic.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let t = self.trace() as f64;
        let det = self.det() as f64;
        let disc = (t * t - 4.0 * det).max(0.0).sqrt();
        let sign = if t >= 0.0 { 1.0 } else { -1.0 };
        let lu = 0.5 * (t + sign * disc);
        (lu, det / lu)
    }

    pub fn linear_model(&self) -> Result<LinearModel> {
        if !self.is_hyperbolic() {
            return Err(Error::NotHyperbolic { trace: self.trace(), det: self.det() });
        }
        let (lu, _) = self.eigenvalues();
        let lambda = lu.abs();
        Ok(LinearModel { lambda, h_top: lambda.ln(), sigma: self.det() })
    }

    /// Unit eigenvector for `eigenvalue`, oriented with positive first
    /// coordinate (positive second coordinate if the first vanishes).
    pub fn eigenvector(&self, eigenvalue: f64) -> Vector2<f64> {
        let (a, b, c, d) = (self.a as f64, self.b as f64, self.c as f64, self.d as f64);
        let v = if b != 0.0 {
            Vector2::new(b, eigenvalue - a)
        } else if c != 0.0 {
            Vector2::new(eigenvalue - d, c)
        } else if (eigenvalue - a).abs() < (eigenvalue - d).abs() {
            Vector2::new(1.0, 0.0)
        } else {
            Vector2::new(0.0, 1.0)
        };
        orient(v.normalize())
    }

    pub fn stable_eigenvector(&self) -> Vector2<f64> {
        self.eigenvector(self.eigenvalues().1)
    }

    pub fn unstable_eigenvector(&self) -> Vector2<f64> {
        self.eigenvector(self.eigenvalues().0)
    }
}

fn orient(v: Vector2<f64>) -> Vector2<f64> {
    if v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0) {
        -v
    } else {
        v
    }
}

impl fmt::Display for IntegerMatrix2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{},{}],[{},{}]]", self.a, self.b, self.c, self.d)
    }
}

/// `amp * sin(2π k·x + phase)` added to coordinate `coord` of the lift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationTerm {
    pub coord: usize,
    pub mode: [i64; 2],
    pub amp: f64,
    pub phase: f64,
}

impl PerturbationTerm {
    pub fn new(coord: usize, mode: [i64; 2], amp: f64, phase: f64) -> Self {
        Self { coord, mode, amp, phase }
    }

    #[inline]
    fn argument(&self, x: &LiftPoint) -> f64 {
        TAU * (self.mode[0] as f64 * x[0] + self.mode[1] as f64 * x[1]) + self.phase
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RawSpec {
    matrix: [[i64; 2]; 2],
    #[serde(default)]
    terms: Vec<PerturbationTerm>,
    #[serde(default)]
    label: String,
}

/// `F = A + Σ terms` on the torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct MapSpec {
    matrix: IntegerMatrix2,
    terms: Vec<PerturbationTerm>,
    label: String,
}

impl TryFrom<RawSpec> for MapSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        let [[a, b], [c, d]] = raw.matrix;
        MapSpec::new(IntegerMatrix2::new(a, b, c, d)?, raw.terms, raw.label)
    }
}

impl From<MapSpec> for RawSpec {
    fn from(s: MapSpec) -> Self {
        let m = s.matrix;
        RawSpec { matrix: [[m.a, m.b], [m.c, m.d]], terms: s.terms, label: s.label }
    }
}

impl MapSpec {
    pub fn new(matrix: IntegerMatrix2, terms: Vec<PerturbationTerm>, label: impl Into<String>) -> Result<Self> {
        if !matrix.is_hyperbolic() {
            return Err(Error::NotHyperbolic { trace: matrix.trace(), det: matrix.det() });
        }
        for t in &terms {
            if t.coord > 1 {
                return Err(Error::InvalidSpec(format!("term coordinate {} not in {{0,1}}", t.coord)));
            }
            if !t.amp.is_finite() || !t.phase.is_finite() {
                return Err(Error::InvalidSpec("non-finite amplitude or phase".into()));
            }
        }
        Ok(Self { matrix, terms, label: label.into() })
    }

    pub fn linear(matrix: IntegerMatrix2, label: impl Into<String>) -> Result<Self> {
        Self::new(matrix, Vec::new(), label)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }

    pub fn matrix(&self) -> &IntegerMatrix2 {
        &self.matrix
    }

    pub fn terms(&self) -> &[PerturbationTerm] {
        &self.terms
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// True when every perturbation amplitude is zero.
    pub fn is_linear(&self) -> bool {
        self.terms.iter().all(|t| t.amp == 0.0)
    }

    pub fn linear_model(&self) -> LinearModel {
        self.matrix.linear_model().expect("MapSpec matrices are hyperbolic")
    }

    /// Same matrix, every amplitude multiplied by `s`.
    pub fn scaled(&self, s: f64) -> MapSpec {
        let terms = self.terms.iter().map(|t| PerturbationTerm { amp: t.amp * s, ..*t }).collect();
        MapSpec { matrix: self.matrix, terms, label: format!("{} (s={s})", self.label) }
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.to_json().as_bytes());
        hex::encode(h.finalize())
    }

    /// The lift `F̂(x) = A x + p(x)`.
    #[inline]
    pub fn lift(&self, x: &LiftPoint) -> LiftPoint {
        let m = &self.matrix;
        let mut y = Vector2::new(
            m.a as f64 * x[0] + m.b as f64 * x[1],
            m.c as f64 * x[0] + m.d as f64 * x[1],
        );
        for t in &self.terms {
            y[t.coord] += t.amp * t.argument(x).sin();
        }
        y
    }

    /// Exact derivative of the lift.
    #[inline]
    pub fn jacobian(&self, x: &LiftPoint) -> Matrix2<f64> {
        let mut j = self.matrix.to_matrix();
        for t in &self.terms {
            let g = t.amp * TAU * t.argument(x).cos();
            j[(t.coord, 0)] += g * t.mode[0] as f64;
            j[(t.coord, 1)] += g * t.mode[1] as f64;
        }
        j
    }

    /// Lift value and derivative in one pass.
    #[inline]
    pub fn lift_and_jacobian(&self, x: &LiftPoint) -> (LiftPoint, Matrix2<f64>) {
        let m = &self.matrix;
        let mut y = Vector2::new(
            m.a as f64 * x[0] + m.b as f64 * x[1],
            m.c as f64 * x[0] + m.d as f64 * x[1],
        );
        let mut j = m.to_matrix();
        for t in &self.terms {
            let (s, c) = t.argument(x).sin_cos();
            y[t.coord] += t.amp * s;
            let g = t.amp * TAU * c;
            j[(t.coord, 0)] += g * t.mode[0] as f64;
            j[(t.coord, 1)] += g * t.mode[1] as f64;
        }
        (y, j)
    }

    /// Torus map: lift then reduce.
    pub fn apply(&self, x: &TorusPoint) -> TorusPoint {
        TorusPoint::reduce(&self.lift(&x.as_lift()))
    }

    /// Solves `F̂(y) = x` by Newton seeded with `A^{-1} x`.
    pub fn inverse_lift(&self, x: &LiftPoint) -> Result<LiftPoint> {
        let a_inv = self.matrix.to_matrix().try_inverse().expect("unimodular");
        let mut y = a_inv * x;
        if self.is_linear() {
            return Ok(y);
        }
        for _ in 0..50 {
            let (fy, j) = self.lift_and_jacobian(&y);
            let r = fy - x;
            if r.amax() <= 1e-13 * (1.0 + x.amax()) {
                return Ok(y);
            }
            let step = j.try_inverse().ok_or(Error::InverseNewtonFailure { x1: x[0], x2: x[1] })? * r;
            y -= step;
        }
        let r = self.lift(&y) - x;
        if r.amax() <= 1e-12 * (1.0 + x.amax()) {
            Ok(y)
        } else {
            Err(Error::InverseNewtonFailure { x1: x[0], x2: x[1] })
        }
    }
}

/// Free-function form of [`MapSpec::lift`].
pub fn evaluate_lift(spec: &MapSpec, x: &LiftPoint) -> LiftPoint {
    spec.lift(x)
}

pub fn jacobian(spec: &MapSpec, x: &TorusPoint) -> Matrix2<f64> {
    spec.jacobian(&x.as_lift())
}
