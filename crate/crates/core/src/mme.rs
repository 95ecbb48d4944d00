// SPDX-License-Identifier: Apache-2.0

//! Periodic-point approximants of the measure of maximal entropy and
//! correlation decay under it.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::maps::{MapSpec, TorusPoint};
use crate::observable::Observable;
use crate::orbits::OrbitDatabase;
use crate::series::KahanSum;

/// Guard in the resolution rule `k_max + ceil(log|m|/h) <= (n/2)(1 - guard)`.
/// On `Fix F^n` the series is mirrored, `C_{n-k}(f1,f2) = C_k(f2,f1)`.
pub const RESOLUTION_GUARD: f64 = 0.1;
pub const DECAY_MARGIN: f64 = 0.2;
pub const MIN_FIT_POINTS: usize = 5;
const NORMALIZATION_TOL: f64 = 1e-12;

/// Uniform atoms on `Fix F^n`.
#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalMeasure {
    pub n: u32,
    pub points: Vec<TorusPoint>,
    pub weights: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn new(n: u32, points: Vec<TorusPoint>, weights: Vec<f64>) -> Result<Self> {
        let m = Self { n, points, weights };
        m.check()?;
        Ok(m)
    }

    pub fn total_weight(&self) -> f64 {
        let mut k = KahanSum::default();
        for w in &self.weights {
            k.add(*w);
        }
        k.value()
    }

    pub fn check(&self) -> Result<()> {
        if self.points.len() != self.weights.len() || self.points.is_empty() {
            return Err(Error::InvalidArgument("measure needs one weight per point".into()));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidArgument("negative weight".into()));
        }
        let t = self.total_weight();
        if (t - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidArgument(format!("weights sum to {t}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `∫ f dμ̂`, summed in point order.
    pub fn integrate(&self, f: &Observable) -> Complex64 {
        let vals: Vec<Complex64> =
            self.points.par_iter().zip(&self.weights).map(|(p, w)| f.eval(&p.as_lift()) * *w).collect();
        complex_sum(&vals)
    }
}

fn complex_sum(v: &[Complex64]) -> Complex64 {
    let (mut re, mut im) = (KahanSum::default(), KahanSum::default());
    for z in v {
        re.add(z.re);
        im.add(z.im);
    }
    Complex64::new(re.value(), im.value())
}

pub fn mme_approximation(db: &OrbitDatabase, n: u32) -> Result<EmpiricalMeasure> {
    let recs = db.level(n)?;
    if recs.is_empty() {
        return Err(Error::IncompleteDatabase(n));
    }
    let w = 1.0 / recs.len() as f64;
    EmpiricalMeasure::new(n, recs.iter().map(|r| r.point).collect(), vec![w; recs.len()])
}

/// Measure the correlations are taken against.
#[derive(Debug, Clone, Copy)]
pub enum CorrelationMeasure<'a> {
    /// Closed form for linear maps, where the measure of maximal entropy is Lebesgue.
    Lebesgue,
    /// `fine` carries the sums; `coarse` (period `n - 1`) sets the noise floor.
    Empirical { fine: &'a EmpiricalMeasure, coarse: Option<&'a EmpiricalMeasure> },
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrelationSeries {
    pub values: Vec<Complex64>,
    pub mean1: Complex64,
    pub mean2: Complex64,
    /// Per lag; `|C_k|` at or below `noise_floor[k]` is treated as noise.
    pub noise_floor: Vec<f64>,
    /// Period of the approximant; `None` for the exact branch.
    pub n: Option<u32>,
    pub exact: bool,
}

impl CorrelationSeries {
    pub fn k_max(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    pub fn moduli(&self) -> Vec<f64> {
        self.values.iter().map(|c| c.norm()).collect()
    }
}

/// Largest admissible `k_max` for observables with frequencies up to `freq`.
pub fn resolution_limit(n: u32, freq: f64, h_top: f64) -> usize {
    let budget = (0.5 * n as f64 * (1.0 - RESOLUTION_GUARD)).floor();
    let cost = if freq > 1.0 { (freq.ln() / h_top).ceil() } else { 0.0 };
    (budget - cost).max(0.0) as usize
}

pub fn correlation(
    spec: &MapSpec,
    f1: &Observable,
    f2: &Observable,
    k_max: usize,
    measure: CorrelationMeasure<'_>,
) -> Result<CorrelationSeries> {
    match measure {
        CorrelationMeasure::Lebesgue => lebesgue_correlation(spec, f1, f2, k_max),
        CorrelationMeasure::Empirical { fine, coarse } => empirical_correlation(spec, f1, f2, k_max, fine, coarse),
    }
}

/// `∫ (f1∘A^k) f2 dLeb = Σ a_j b_l [ (Aᵀ)^k k_j + l_l = 0 ]`, in integers.
fn lebesgue_correlation(spec: &MapSpec, f1: &Observable, f2: &Observable, k_max: usize) -> Result<CorrelationSeries> {
    if !spec.is_linear() {
        return Err(Error::NotLinear);
    }
    let at = spec.matrix().transpose();
    let mean1 = f1.lebesgue_mean();
    let mean2 = f2.lebesgue_mean();
    let mut freqs: Vec<[i64; 2]> = f1.modes.iter().map(|(k, _)| *k).collect();
    let mut values = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let mut acc = Complex64::default();
        for (j, &(_, a)) in f1.modes.iter().enumerate() {
            for &(l, b) in &f2.modes {
                if freqs[j][0] + l[0] == 0 && freqs[j][1] + l[1] == 0 {
                    acc += a * b;
                }
            }
        }
        values.push(acc - mean1 * mean2);
        if k < k_max {
            for v in freqs.iter_mut() {
                let e = |x: i64, y: i64, z: i64, w: i64| x.checked_mul(y)?.checked_add(z.checked_mul(w)?);
                let m = at;
                *v = match (e(m.a, v[0], m.b, v[1]), e(m.c, v[0], m.d, v[1])) {
                    (Some(x), Some(y)) => [x, y],
                    _ => return Err(Error::Overflow { n: k as u32 + 1, limit: k as u32 }),
                };
            }
        }
    }
    let noise_floor = vec![0.0; values.len()];
    Ok(CorrelationSeries { values, mean1, mean2, noise_floor, n: None, exact: true })
}

fn empirical_correlation(
    spec: &MapSpec,
    f1: &Observable,
    f2: &Observable,
    k_max: usize,
    fine: &EmpiricalMeasure,
    coarse: Option<&EmpiricalMeasure>,
) -> Result<CorrelationSeries> {
    let h = spec.linear_model().h_top;
    let freq = f1.max_frequency().max(f2.max_frequency());
    let limit = resolution_limit(fine.n, freq, h);
    if k_max > limit {
        return Err(Error::ResolutionExceeded { k_max, n: fine.n, limit });
    }
    let (values, mean1, mean2) = raw_correlation(spec, f1, f2, k_max, fine)?;
    let noise_floor = match coarse {
        // the lag-by-lag drift between approximants, inflated tenfold
        Some(c) => {
            let (other, _, _) = raw_correlation(spec, f1, f2, k_max, c)?;
            values.iter().zip(&other).map(|(a, b)| 10.0 * (a - b).norm() + 1e-12).collect()
        }
        None => vec![1e-12; values.len()],
    };
    Ok(CorrelationSeries { values, mean1, mean2, noise_floor, n: Some(fine.n), exact: false })
}

type Raw = (Vec<Complex64>, Complex64, Complex64);

fn raw_correlation(spec: &MapSpec, f1: &Observable, f2: &Observable, k_max: usize, m: &EmpiricalMeasure) -> Result<Raw> {
    m.check()?;
    // per point: f2(x) f1(F^k x) for k = 0..=k_max
    let rows: Vec<Vec<Complex64>> = m
        .points
        .par_iter()
        .zip(&m.weights)
        .map(|(p, w)| {
            let mut x = p.as_lift();
            let g = f2.eval(&x) * *w;
            let mut row = Vec::with_capacity(k_max + 1);
            for k in 0..=k_max {
                row.push(f1.eval(&x) * g);
                if k < k_max {
                    x = TorusPoint::reduce(&spec.lift(&x)).as_lift();
                }
            }
            row
        })
        .collect();
    let mean1 = m.integrate(f1);
    let mean2 = m.integrate(f2);
    let values = (0..=k_max)
        .map(|k| {
            let col: Vec<Complex64> = rows.iter().map(|r| r[k]).collect();
            complex_sum(&col) - mean1 * mean2
        })
        .collect();
    Ok((values, mean1, mean2))
}

/// Builds the period-`n` approximant (and period `n - 1` for the noise
/// floor, when available) and evaluates the correlations.
pub fn correlation_from_db(
    db: &OrbitDatabase,
    n: u32,
    f1: &Observable,
    f2: &Observable,
    k_max: usize,
) -> Result<CorrelationSeries> {
    let fine = mme_approximation(db, n)?;
    let coarse = if n > 1 { db.level(n - 1).ok().map(|_| mme_approximation(db, n - 1)).transpose()? } else { None };
    correlation(db.spec(), f1, f2, k_max, CorrelationMeasure::Empirical { fine: &fine, coarse: coarse.as_ref() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayVerdict {
    Superexponential,
    Consistent,
    Inconsistent,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    pub rho: f64,
    /// `exp(slope ± 2 stderr)`.
    pub band: (f64, f64),
    pub slope: f64,
    pub stderr: f64,
    pub window: Vec<usize>,
    pub bound: f64,
    pub margin: f64,
    pub verdict: DecayVerdict,
    /// `ρ̂` is indistinguishable from `e^{-h}` within its band.
    pub boundary: bool,
}

pub fn decay_rate_fit(series: &CorrelationSeries, h_top: f64) -> Result<DecayFit> {
    decay_rate_fit_with(series, h_top, DECAY_MARGIN)
}

/// Least squares of `log|C_k|` against `k`, from `k = 0` up to the first
/// value at or below its noise floor.
pub fn decay_rate_fit_with(series: &CorrelationSeries, h_top: f64, margin: f64) -> Result<DecayFit> {
    let bound = (-h_top).exp();
    let mods = series.moduli();
    let window: Vec<usize> = (0..mods.len()).take_while(|&k| mods[k] > series.noise_floor[k]).collect();
    if window.len() <= 1 {
        return Ok(DecayFit {
            rho: 0.0,
            band: (0.0, 0.0),
            slope: f64::NEG_INFINITY,
            stderr: 0.0,
            window,
            bound,
            margin,
            verdict: DecayVerdict::Superexponential,
            boundary: false,
        });
    }
    if window.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientDecaySignal { found: window.len(), needed: MIN_FIT_POINTS });
    }
    let xs: Vec<f64> = window.iter().map(|&k| k as f64).collect();
    let ys: Vec<f64> = window.iter().map(|&k| mods[k].ln()).collect();
    let (slope, stderr) = linear_fit(&xs, &ys);
    let rho = slope.exp();
    let verdict = if rho <= bound * (1.0 + margin) { DecayVerdict::Consistent } else { DecayVerdict::Inconsistent };
    let boundary = (slope + h_top).abs() <= (2.0 * stderr).max(1e-9);
    Ok(DecayFit {
        rho,
        band: ((slope - 2.0 * stderr).exp(), (slope + 2.0 * stderr).exp()),
        slope,
        stderr,
        window,
        bound,
        margin,
        verdict,
        boundary,
    })
}

/// Slope and its standard error.
fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    let stderr = if xs.len() > 2 { (rss / (m - 2.0) / sxx).sqrt() } else { 0.0 };
    (slope, stderr)
}

#[derive(Debug, Clone, Serialize)]
pub struct RateProfileEntry {
    pub n: u32,
    pub rho: Option<f64>,
    pub verdict: Option<DecayVerdict>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateProfile {
    pub entries: Vec<RateProfileEntry>,
    /// `ρ̂(n)` fails to move monotonically in `n`.
    pub non_monotone: bool,
}

/// `ρ̂_top(n)` over several periods; `k_max` is clipped to each resolution limit.
pub fn rate_profile(db: &OrbitDatabase, ns: &[u32], f1: &Observable, f2: &Observable, k_max: usize) -> RateProfile {
    let h = db.spec().linear_model().h_top;
    let freq = f1.max_frequency().max(f2.max_frequency());
    let entries: Vec<RateProfileEntry> = ns
        .iter()
        .map(|&n| {
            let k = k_max.min(resolution_limit(n, freq, h));
            match correlation_from_db(db, n, f1, f2, k).and_then(|s| decay_rate_fit(&s, h)) {
                Ok(fit) => RateProfileEntry { n, rho: Some(fit.rho), verdict: Some(fit.verdict), error: None },
                Err(e) => RateProfileEntry { n, rho: None, verdict: None, error: Some(e.to_string()) },
            }
        })
        .collect();
    let rhos: Vec<f64> = entries.iter().filter_map(|e| e.rho).collect();
    let up = rhos.windows(2).all(|w| w[1] >= w[0]);
    let down = rhos.windows(2).all(|w| w[1] <= w[0]);
    RateProfile { entries, non_monotone: !(up || down) }
}

/// `|∫ f dμ̂_n − ∫ f dμ̂_{n+2}|` for each `n` with `n + 2` in the database.
pub fn equidistribution_gaps(db: &OrbitDatabase, f: &Observable) -> Result<Vec<(u32, f64)>> {
    let top = db.n_max();
    let mut out = Vec::new();
    for n in 1..=top.saturating_sub(2) {
        let a = mme_approximation(db, n)?.integrate(f);
        let b = mme_approximation(db, n + 2)?.integrate(f);
        out.push((n, (a - b).norm()));
    }
    Ok(out)
}
