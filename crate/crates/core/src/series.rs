// SPDX-License-Identifier: Apache-2.0

//! Truncated power series with complex coefficients and their zeros.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    c: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        // Neumaier's variant, also exact when |x| > |sum|
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.c
    }
}

pub fn kahan_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut k = KahanSum::default();
    for x in it {
        k.add(x);
    }
    k.value()
}

/// `c_0 + c_1 z + ... + c_N z^N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSeries {
    pub coefficients: Vec<Complex64>,
    pub label: String,
}

impl PowerSeries {
    pub fn new(coefficients: Vec<Complex64>, label: impl Into<String>) -> Self {
        assert!(!coefficients.is_empty(), "a power series needs c_0");
        Self { coefficients, label: label.into() }
    }

    pub fn from_real(coefficients: &[f64], label: impl Into<String>) -> Self {
        Self::new(coefficients.iter().map(|&c| Complex64::new(c, 0.0)).collect(), label)
    }

    /// The constant 1 truncated at order `n`.
    pub fn one(n: usize) -> Self {
        let mut c = vec![Complex64::new(0.0, 0.0); n + 1];
        c[0] = Complex64::new(1.0, 0.0);
        Self::new(c, "1")
    }

    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn coeff(&self, k: usize) -> Complex64 {
        self.coefficients.get(k).copied().unwrap_or_default()
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.re).collect()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn truncate(&self, n: usize) -> Self {
        let mut c = self.coefficients.clone();
        c.resize(n + 1, Complex64::default());
        Self::new(c, self.label.clone())
    }

    /// Product truncated at the smaller order.
    pub fn mul(&self, other: &Self) -> Self {
        let n = self.order().min(other.order());
        let c = (0..=n)
            .map(|k| (0..=k).map(|j| self.coefficients[j] * other.coefficients[k - j]).sum())
            .collect();
        Self::new(c, format!("({})*({})", self.label, other.label))
    }

    /// Quotient; the divisor must have `c_0 != 0`.
    pub fn div(&self, other: &Self) -> Self {
        let b0 = other.coefficients[0];
        assert!(b0.norm() > 0.0, "division by a series with zero constant term");
        let n = self.order().min(other.order());
        let mut q = vec![Complex64::default(); n + 1];
        for k in 0..=n {
            let mut s = self.coefficients[k];
            for j in 1..=k {
                s -= other.coefficients[j] * q[k - j];
            }
            q[k] = s / b0;
        }
        Self::new(q, format!("({})/({})", self.label, other.label))
    }

    pub fn scale(&self, a: Complex64) -> Self {
        Self::new(self.coefficients.iter().map(|c| c * a).collect(), self.label.clone())
    }

    /// `S(a z)`, e.g. the substitution `w = σ z`.
    pub fn substitute_scaled(&self, a: f64) -> Self {
        let mut p = 1.0;
        let c = self
            .coefficients
            .iter()
            .map(|c| {
                let v = c * p;
                p *= a;
                v
            })
            .collect();
        Self::new(c, self.label.clone())
    }

    /// `exp(S)` by `k b_k = Σ_{j=1}^k j a_j b_{k-j}`.
    pub fn exp(&self) -> Self {
        let a = &self.coefficients;
        let n = self.order();
        let mut b = vec![Complex64::default(); n + 1];
        b[0] = a[0].exp();
        for k in 1..=n {
            let mut s = Complex64::default();
            for j in 1..=k {
                s += a[j] * j as f64 * b[k - j];
            }
            b[k] = s / k as f64;
        }
        Self::new(b, format!("exp({})", self.label))
    }

    /// `log(S)`; requires `c_0 != 0` and uses the principal branch for it.
    pub fn log(&self) -> Self {
        let a = &self.coefficients;
        assert!(a[0].norm() > 0.0, "log of a series with zero constant term");
        let n = self.order();
        let mut c = vec![Complex64::default(); n + 1];
        c[0] = a[0].ln();
        for k in 1..=n {
            let mut s = a[k] * k as f64;
            for j in 1..k {
                s -= c[j] * j as f64 * a[k - j];
            }
            c[k] = s / (k as f64 * a[0]);
        }
        Self::new(c, format!("log({})", self.label))
    }

    pub fn derivative(&self) -> Self {
        let c: Vec<Complex64> = if self.order() == 0 {
            vec![Complex64::default()]
        } else {
            self.coefficients.iter().enumerate().skip(1).map(|(k, c)| c * k as f64).collect()
        };
        Self::new(c, format!("d({})", self.label))
    }

    /// Horner evaluation of the truncated polynomial.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coefficients.iter().rev().fold(Complex64::default(), |acc, c| acc * z + c)
    }

    /// Max coefficient-wise distance through the common order.
    pub fn max_residual(&self, other: &Self) -> f64 {
        let n = self.order().min(other.order());
        (0..=n).map(|k| (self.coefficients[k] - other.coefficients[k]).norm()).fold(0.0, f64::max)
    }

    /// Per-order distances through the common order.
    pub fn residuals(&self, other: &Self) -> Vec<f64> {
        let n = self.order().min(other.order());
        (0..=n).map(|k| (self.coefficients[k] - other.coefficients[k]).norm()).collect()
    }
}

/// A root of a truncated series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesZero {
    pub z: Complex64,
    pub multiplicity: usize,
    /// A root of the order `N - 2` truncation lies within `10 tol`.
    pub stable: bool,
    /// Distance to the nearest root of the order `N - 2` truncation.
    pub drift: f64,
    /// `|S'(z)|` at the truncated polynomial.
    pub derivative: f64,
}

pub const DEFAULT_ZERO_TOL: f64 = 1e-5;
const CLUSTER: f64 = 1e-4;

/// Trailing coefficients below this fraction of the largest one are treated
/// as rounding noise and dropped before root finding.
pub const NOISE_FLOOR_REL: f64 = 1e-12;

/// Roots of `Σ c_k z^k` via the eigenvalues of the companion matrix,
/// Newton-polished. Trailing coefficients at the noise floor are dropped.
pub fn polynomial_roots(coefficients: &[Complex64]) -> Vec<Complex64> {
    let peak = coefficients.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut m = coefficients.len();
    while m > 0 && coefficients[m - 1].norm() <= NOISE_FLOOR_REL * peak {
        m -= 1;
    }
    if m <= 1 {
        return Vec::new();
    }
    let deg = m - 1;
    let lead = coefficients[deg];
    let mut comp = DMatrix::<Complex64>::zeros(deg, deg);
    for i in 1..deg {
        comp[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    for i in 0..deg {
        comp[(i, deg - 1)] = -coefficients[i] / lead;
    }
    let eig = comp.schur().eigenvalues().expect("complex Schur form is triangular");
    let poly = PowerSeries::new(coefficients[..m].to_vec(), "p");
    let dpoly = poly.derivative();
    eig.iter()
        .map(|&z0| {
            let mut z = z0;
            let mut best = poly.eval(z).norm();
            for _ in 0..20 {
                let d = dpoly.eval(z);
                if d.norm() == 0.0 {
                    break;
                }
                let cand = z - poly.eval(z) / d;
                let r = poly.eval(cand).norm();
                // a polish step must not hop to a neighbouring root
                if !(r < best) || (cand - z0).norm() > 1e-6 * z0.norm().max(1.0) {
                    break;
                }
                best = r;
                z = cand;
            }
            z
        })
        .collect()
}

/// Roots with `|z| <= radius` of the degree-N truncation, clustered into
/// multiplicities and flagged for stability against the `N - 2` truncation.
pub fn find_zeros(series: &PowerSeries, radius: f64, tol: f64) -> Vec<SeriesZero> {
    let roots = polynomial_roots(&series.coefficients);
    let lower: Vec<Complex64> = if series.order() >= 2 {
        polynomial_roots(&series.coefficients[..series.order() - 1])
    } else {
        Vec::new()
    };
    let deriv = series.derivative();
    let mut sorted = roots;
    sorted.sort_by(|a, b| a.norm().total_cmp(&b.norm()).then(a.arg().total_cmp(&b.arg())));
    let mut used = vec![false; sorted.len()];
    let mut out = Vec::new();
    for i in 0..sorted.len() {
        if used[i] {
            continue;
        }
        let mut members = vec![sorted[i]];
        used[i] = true;
        for j in (i + 1)..sorted.len() {
            if !used[j] && (sorted[j] - sorted[i]).norm() <= CLUSTER * sorted[i].norm().max(1.0) {
                used[j] = true;
                members.push(sorted[j]);
            }
        }
        let z = members.iter().sum::<Complex64>() / members.len() as f64;
        if z.norm() > radius {
            continue;
        }
        let drift = lower.iter().map(|w| (w - z).norm()).fold(f64::INFINITY, f64::min);
        out.push(SeriesZero {
            z,
            multiplicity: members.len(),
            stable: drift <= 10.0 * tol,
            drift,
            derivative: deriv.eval(z).norm(),
        });
    }
    out
}
