// SPDX-License-Identifier: Apache-2.0

//! Trigonometric polynomials on the torus.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::maps::LiftPoint;

/// `f(x) = Σ a_k e^{2πi k·x}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observable {
    pub modes: Vec<([i64; 2], Complex64)>,
    #[serde(default)]
    pub label: String,
}

impl Observable {
    pub fn new(modes: Vec<([i64; 2], Complex64)>, label: impl Into<String>) -> Self {
        Self { modes, label: label.into() }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![([0, 0], Complex64::new(c, 0.0))], format!("{c}"))
    }

    pub fn character(k: [i64; 2]) -> Self {
        Self::new(vec![(k, Complex64::new(1.0, 0.0))], format!("e({},{})", k[0], k[1]))
    }

    /// `cos 2π k·x`.
    pub fn cos(k: [i64; 2]) -> Self {
        let h = Complex64::new(0.5, 0.0);
        Self::new(vec![(k, h), ([-k[0], -k[1]], h)], format!("cos({},{})", k[0], k[1]))
    }

    /// `sin 2π k·x`.
    pub fn sin(k: [i64; 2]) -> Self {
        let h = Complex64::new(0.0, -0.5);
        Self::new(vec![(k, h), ([-k[0], -k[1]], h.conj())], format!("sin({},{})", k[0], k[1]))
    }

    /// Adds the conjugate of every mode with `k != 0` and halves, giving the real part.
    pub fn real_part(&self) -> Self {
        let mut modes = Vec::with_capacity(2 * self.modes.len());
        for &(k, a) in &self.modes {
            if k == [0, 0] {
                modes.push((k, Complex64::new(a.re, 0.0)));
            } else {
                modes.push((k, a * 0.5));
                modes.push(([-k[0], -k[1]], a.conj() * 0.5));
            }
        }
        Self::new(modes, format!("Re {}", self.label))
    }

    fn collected(&self) -> std::collections::BTreeMap<[i64; 2], Complex64> {
        let mut m = std::collections::BTreeMap::new();
        for &(k, a) in &self.modes {
            *m.entry(k).or_insert(Complex64::default()) += a;
        }
        m
    }

    pub fn is_real(&self) -> bool {
        let m = self.collected();
        m.iter().all(|(k, a)| {
            let b = m.get(&[-k[0], -k[1]]).copied().unwrap_or_default();
            (a - b.conj()).norm() <= 1e-14 * (1.0 + a.norm())
        })
    }

    /// `∫ f dLeb`, the `(0,0)` amplitude.
    pub fn lebesgue_mean(&self) -> Complex64 {
        self.modes.iter().filter(|(k, _)| *k == [0, 0]).map(|(_, a)| a).sum()
    }

    pub fn plus_constant(&self, c: Complex64) -> Self {
        let mut modes = self.modes.clone();
        modes.push(([0, 0], c));
        Self::new(modes, format!("{} + ({c})", self.label))
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self::new(self.modes.iter().map(|&(k, a)| (k, a * s)).collect(), format!("({s}) {}", self.label))
    }

    pub fn sum(&self, other: &Self) -> Self {
        let mut modes = self.modes.clone();
        modes.extend_from_slice(&other.modes);
        Self::new(modes, format!("{} + {}", self.label, other.label))
    }

    pub fn max_abs_mode(&self) -> i64 {
        self.modes.iter().map(|(k, _)| k[0].abs().max(k[1].abs())).max().unwrap_or(0)
    }

    #[inline]
    pub fn eval(&self, x: &LiftPoint) -> Complex64 {
        let mut s = Complex64::default();
        for &(k, a) in &self.modes {
            let phase = TAU * (k[0] as f64 * x[0] + k[1] as f64 * x[1]);
            let (sn, cs) = phase.sin_cos();
            s += a * Complex64::new(cs, sn);
        }
        s
    }

    /// Pointwise product; modes add.
    pub fn product(&self, other: &Self) -> Self {
        let mut modes = Vec::with_capacity(self.modes.len() * other.modes.len());
        for &(k, a) in &self.modes {
            for &(l, b) in &other.modes {
                modes.push(([k[0] + l[0], k[1] + l[1]], a * b));
            }
        }
        Self::new(modes, format!("({})({})", self.label, other.label))
    }

    /// Largest Euclidean frequency norm.
    pub fn max_frequency(&self) -> f64 {
        self.modes.iter().map(|(k, _)| (k[0] as f64).hypot(k[1] as f64)).fold(0.0, f64::max)
    }
}
