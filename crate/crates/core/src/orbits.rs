// SPDX-License-Identifier: Apache-2.0

//! Periodic points of `F` by continuation from the exact periodic points of
//! the linear part, and the on-disk orbit database.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bundles::DEFAULT_HALFWIDTH;
use crate::cone::verify_cone_condition;
use crate::error::{Error, Result};
use crate::lattice::{fixed_point_count_linear, linear_fixed_set, LinearCycle};
use crate::maps::{LiftPoint, MapSpec, TorusPoint};

pub const DEFAULT_N_CAP: u32 = 12;
pub const CONDITION_FLAG: f64 = 1e8;
pub const COLLISION_DISTANCE: f64 = 1e-7;
pub const DB_FORMAT: &str = "anosov-orbit-db";
pub const DB_VERSION: u32 = 1;

/// One point of `Fix F^n` with the data of `DF^n` there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub point: TorusPoint,
    pub n: u32,
    /// `F̂^n(x) = x + lift_offset` for the lift through `point`.
    pub lift_offset: [i64; 2],
    pub trace: f64,
    pub det: f64,
    /// Contracting eigenvalue of `DF^n`, signed.
    pub ms: f64,
    /// Expanding eigenvalue of `DF^n`, signed.
    pub mu: f64,
    /// Max-norm residual of the shooting equations at the solution.
    pub newton_residual: f64,
    /// `|F̂^n(x) - x - lift_offset|` by direct iteration.
    pub closure_residual: f64,
    /// 2-norm condition number of `I - DF^n`.
    pub condition: f64,
    pub flagged: bool,
}

impl OrbitRecord {
    /// `|det(I - DF^n)|` expressed through the multipliers.
    pub fn lefschetz_denominator(&self) -> f64 {
        ((1.0 - self.ms) * (1.0 - self.mu)).abs()
    }

    #[cfg(test)]
    pub(crate) fn linear_test_record(n: u32, ms: f64, mu: f64) -> Self {
        OrbitRecord {
            point: TorusPoint::new(0.0, 0.0),
            n,
            lift_offset: [0, 0],
            trace: ms + mu,
            det: ms * mu,
            ms,
            mu,
            newton_residual: 0.0,
            closure_residual: 0.0,
            condition: 1.0,
            flagged: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationSettings {
    /// Initial number of homotopy steps from `s = 0` to `s = 1`.
    pub steps: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Run the cone check at every coarse homotopy parameter.
    pub certify: bool,
    pub cert_grid: usize,
}

impl Default for ContinuationSettings {
    fn default() -> Self {
        Self { steps: 8, tol: 1e-12, max_iter: 60, certify: true, cert_grid: 32 }
    }
}

/// Signed eigen split of a real 2x2 matrix with `|ms| < 1 < |mu|`.
pub fn eigen_split(m: &Matrix2<f64>, n: u32) -> Result<(f64, f64)> {
    let t = m.trace();
    let d = m.determinant();
    let disc = t * t - 4.0 * d;
    if !(disc > 0.0) {
        return Err(Error::EigenSplitFailure { n, ms: f64::NAN, mu: f64::NAN });
    }
    let sign = if t >= 0.0 { 1.0 } else { -1.0 };
    let mu = 0.5 * (t + sign * disc.sqrt());
    let ms = d / mu;
    if !(ms.abs() < 1.0 && mu.abs() > 1.0) {
        return Err(Error::EigenSplitFailure { n, ms: ms.abs(), mu: mu.abs() });
    }
    Ok((ms, mu))
}

fn condition_number(m: &Matrix2<f64>) -> f64 {
    let sv = m.singular_values();
    let (hi, lo) = (sv.max(), sv.min());
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Multiplier data of `F^n` at `x`, which should be a period-`n` point.
pub fn orbit_multipliers(spec: &MapSpec, x: &TorusPoint, n: u32) -> Result<OrbitRecord> {
    record_from_lift(spec, &x.as_lift(), n, 0.0)
}

fn record_from_lift(spec: &MapSpec, x: &LiftPoint, n: u32, newton_residual: f64) -> Result<OrbitRecord> {
    // the offset must refer to the lift through the stored (reduced) point
    let x = &TorusPoint::reduce(x).as_lift();
    let mut y = *x;
    let mut dfn = Matrix2::identity();
    for _ in 0..n {
        let (fy, j) = spec.lift_and_jacobian(&y);
        dfn = j * dfn;
        y = fy;
    }
    let jump = y - x;
    let offset = [jump[0].round() as i64, jump[1].round() as i64];
    let closure = (jump - Vector2::new(offset[0] as f64, offset[1] as f64)).amax();
    let (ms, mu) = eigen_split(&dfn, n)?;
    let condition = condition_number(&(Matrix2::identity() - dfn));
    Ok(OrbitRecord {
        point: TorusPoint::reduce(x),
        n,
        lift_offset: offset,
        trace: dfn.trace(),
        det: dfn.determinant(),
        ms,
        mu,
        newton_residual,
        closure_residual: closure,
        condition,
        flagged: condition > CONDITION_FLAG,
    })
}

/// Residual of the cyclic shooting system
/// `F̂_s(x_k) - m_k - x_{k+1} = 0`, `x_d = x_0`.
fn shooting_residual(spec: &MapSpec, xs: &[LiftPoint], offsets: &[[i64; 2]]) -> DVector<f64> {
    let d = xs.len();
    let mut r = DVector::zeros(2 * d);
    for k in 0..d {
        let f = spec.lift(&xs[k]);
        let next = xs[(k + 1) % d];
        r[2 * k] = f[0] - offsets[k][0] as f64 - next[0];
        r[2 * k + 1] = f[1] - offsets[k][1] as f64 - next[1];
    }
    r
}

fn shooting_jacobian(spec: &MapSpec, xs: &[LiftPoint]) -> DMatrix<f64> {
    let d = xs.len();
    let mut m = DMatrix::zeros(2 * d, 2 * d);
    for k in 0..d {
        let j = spec.jacobian(&xs[k]);
        for a in 0..2 {
            for b in 0..2 {
                m[(2 * k + a, 2 * k + b)] += j[(a, b)];
            }
            let nk = (k + 1) % d;
            m[(2 * k + a, 2 * nk + a)] -= 1.0;
        }
    }
    m
}

/// Damped Newton on the shooting system. Returns the final residual.
fn newton_shooting(
    spec: &MapSpec,
    xs: &mut [LiftPoint],
    offsets: &[[i64; 2]],
    settings: &ContinuationSettings,
) -> Option<f64> {
    let d = xs.len();
    let mut r = shooting_residual(spec, xs, offsets);
    let mut rn = r.amax();
    let mut polish = 0;
    for _ in 0..settings.max_iter {
        if rn <= settings.tol {
            polish += 1;
            if polish > 2 {
                return Some(rn);
            }
        }
        let step = shooting_jacobian(spec, xs).lu().solve(&r)?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..8 {
            let trial: Vec<LiftPoint> =
                (0..d).map(|k| xs[k] - lambda * Vector2::new(step[2 * k], step[2 * k + 1])).collect();
            let tr = shooting_residual(spec, &trial, offsets);
            let tn = tr.amax();
            if tn < rn || tn <= settings.tol {
                xs.copy_from_slice(&trial);
                r = tr;
                rn = tn;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return if rn <= settings.tol { Some(rn) } else { None };
        }
    }
    if rn <= settings.tol {
        Some(rn)
    } else {
        None
    }
}

/// Follows one cycle of the linear map to a cycle of `F` along `s ↦ F_s`.
fn continue_cycle(
    spec: &MapSpec,
    cycle: &LinearCycle,
    denominator: i64,
    steps: usize,
    settings: &ContinuationSettings,
) -> Result<(Vec<LiftPoint>, f64)> {
    let dd = denominator as f64;
    let mut xs: Vec<LiftPoint> =
        cycle.numerators.iter().map(|p| Vector2::new(p[0] as f64 / dd, p[1] as f64 / dd)).collect();
    if spec.is_linear() {
        return Ok((xs, 0.0));
    }
    let seed = xs[0];
    let mut s = 0.0;
    let mut ds = 1.0 / steps as f64;
    let min_ds = ds / 1024.0;
    let mut residual = 0.0;
    while s < 1.0 {
        let target = (s + ds).min(1.0);
        let stage = spec.scaled(target);
        let mut trial = xs.clone();
        match newton_shooting(&stage, &mut trial, &cycle.offsets, settings) {
            Some(r) => {
                xs = trial;
                residual = r;
                s = target;
            }
            None => {
                ds *= 0.5;
                if ds < min_ds {
                    return Err(Error::NewtonDivergence { x1: seed[0], x2: seed[1], s: target });
                }
            }
        }
    }
    Ok((xs, residual))
}

/// Certifies the cone condition along the straight homotopy `F_s`, `s = j / steps`.
pub fn certify_homotopy(spec: &MapSpec, steps: usize, grid: usize) -> Result<()> {
    if spec.is_linear() {
        return Ok(());
    }
    for j in 1..=steps {
        let s = j as f64 / steps as f64;
        verify_cone_condition(&spec.scaled(s), DEFAULT_HALFWIDTH, grid)
            .map_err(|e| Error::HomotopyNotAnosov { s, reason: e.to_string() })?;
    }
    Ok(())
}

/// Smallest torus distance among the points, or `None` if there are fewer than two.
/// Sort-and-sweep in the first coordinate, with wrap-around.
pub fn min_separation(points: &[TorusPoint], cutoff: f64) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let mut pts = points.to_vec();
    crate::lattice::sort_points(&mut pts);
    let mut best = f64::INFINITY;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            if pts[j].x1() - pts[i].x1() > cutoff {
                break;
            }
            best = best.min(pts[i].distance(&pts[j]));
        }
    }
    // pairs straddling x1 = 0
    let head: Vec<&TorusPoint> = pts.iter().take_while(|p| p.x1() < cutoff).collect();
    for q in pts.iter().rev().take_while(|p| p.x1() > 1.0 - cutoff) {
        for p in &head {
            if !std::ptr::eq(*p, q) {
                best = best.min(p.distance(q));
            }
        }
    }
    Some(best)
}

fn enumerate_with_steps(
    spec: &MapSpec,
    n: u32,
    steps: usize,
    settings: &ContinuationSettings,
) -> Result<Vec<OrbitRecord>> {
    let set = linear_fixed_set(spec.matrix(), n)?;
    let per_cycle: Vec<Vec<OrbitRecord>> = set
        .cycles
        .par_iter()
        .map(|cycle| {
            let (xs, residual) = continue_cycle(spec, cycle, set.denominator, steps, settings)?;
            xs.iter().map(|x| record_from_lift(spec, x, n, residual)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut records: Vec<OrbitRecord> = per_cycle.into_iter().flatten().collect();
    records.sort_by(|p, q| p.point.x1().total_cmp(&q.point.x1()).then(p.point.x2().total_cmp(&q.point.x2())));
    let pts: Vec<TorusPoint> = records.iter().map(|r| r.point).collect();
    if let Some(sep) = min_separation(&pts, COLLISION_DISTANCE) {
        if sep < COLLISION_DISTANCE {
            return Err(Error::ContinuationCollision { n, distance: sep });
        }
    }
    Ok(records)
}

/// All of `Fix F^n` with multipliers. Does not run the homotopy cone check;
/// see [`certify_homotopy`].
pub fn enumerate_periodic_records(spec: &MapSpec, n: u32, settings: &ContinuationSettings) -> Result<Vec<OrbitRecord>> {
    let mut steps = settings.steps.max(1);
    loop {
        match enumerate_with_steps(spec, n, steps, settings) {
            Err(Error::ContinuationCollision { .. }) if steps < 64 && !spec.is_linear() => steps *= 2,
            other => return other,
        }
    }
}

/// Sorted points of `Fix F^n`, with the homotopy certified first.
pub fn enumerate_fixed_points(spec: &MapSpec, n: u32) -> Result<Vec<TorusPoint>> {
    let settings = ContinuationSettings::default();
    certify_homotopy(spec, settings.steps, settings.cert_grid)?;
    Ok(enumerate_periodic_records(spec, n, &settings)?.into_iter().map(|r| r.point).collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DbHeader {
    format: String,
    version: u32,
    spec_hash: String,
    spec: MapSpec,
    levels: Vec<u32>,
    n_cap: u32,
}

/// Periodic data for `n = 1..=n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitDatabase {
    spec: MapSpec,
    n_cap: u32,
    levels: BTreeMap<u32, Vec<OrbitRecord>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelCheck {
    pub n: u32,
    pub expected: u64,
    pub found: usize,
    pub max_newton_residual: f64,
    pub max_closure_residual: f64,
    pub min_separation: f64,
    pub flagged: usize,
    pub ok: bool,
}

impl OrbitDatabase {
    pub fn build(spec: &MapSpec, n_max: u32) -> Result<Self> {
        Self::build_with(spec, n_max, &ContinuationSettings::default(), DEFAULT_N_CAP)
    }

    pub fn build_with(spec: &MapSpec, n_max: u32, settings: &ContinuationSettings, n_cap: u32) -> Result<Self> {
        if n_max == 0 || n_max > n_cap {
            return Err(Error::InvalidArgument(format!("n_max = {n_max} outside 1..={n_cap}")));
        }
        if settings.certify {
            certify_homotopy(spec, settings.steps, settings.cert_grid)?;
        }
        let mut levels = BTreeMap::new();
        for n in 1..=n_max {
            levels.insert(n, enumerate_periodic_records(spec, n, settings)?);
        }
        Ok(Self { spec: spec.clone(), n_cap, levels })
    }

    pub fn spec(&self) -> &MapSpec {
        &self.spec
    }

    pub fn n_max(&self) -> u32 {
        self.levels.keys().next_back().copied().unwrap_or(0)
    }

    pub fn n_cap(&self) -> u32 {
        self.n_cap
    }

    pub fn level(&self, n: u32) -> Result<&[OrbitRecord]> {
        self.levels.get(&n).map(|v| v.as_slice()).ok_or(Error::IncompleteDatabase(n))
    }

    /// Checks that levels `1..=n` are all present.
    pub fn require(&self, n: u32) -> Result<()> {
        for k in 1..=n {
            self.level(k)?;
        }
        Ok(())
    }

    pub fn counts(&self) -> Vec<(u32, usize)> {
        self.levels.iter().map(|(n, v)| (*n, v.len())).collect()
    }

    pub fn validate(&self) -> Result<Vec<LevelCheck>> {
        let mut out = Vec::new();
        for (&n, recs) in &self.levels {
            let expected = fixed_point_count_linear(self.spec.matrix(), n)?;
            let pts: Vec<TorusPoint> = recs.iter().map(|r| r.point).collect();
            let sep = min_separation(&pts, 1e-3).unwrap_or(f64::INFINITY);
            let max_newton = recs.iter().map(|r| r.newton_residual).fold(0.0, f64::max);
            let max_closure = recs.iter().map(|r| r.closure_residual).fold(0.0, f64::max);
            // closure is limited by the growth of rounding errors along the orbit
            let lambda = self.spec.linear_model().lambda;
            let closure_tol = 1e-10 * lambda.powi(n as i32).max(1.0);
            let split_ok = recs.iter().all(|r| r.ms.abs() < 1.0 && r.mu.abs() > 1.0);
            let ok = expected == recs.len() as u64
                && sep > COLLISION_DISTANCE
                && max_newton <= 1e-10
                && max_closure <= closure_tol
                && split_ok;
            out.push(LevelCheck {
                n,
                expected,
                found: recs.len(),
                max_newton_residual: max_newton,
                max_closure_residual: max_closure,
                min_separation: sep,
                flagged: recs.iter().filter(|r| r.flagged).count(),
                ok,
            });
        }
        Ok(out)
    }

    pub fn manifest_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".manifest");
        PathBuf::from(s)
    }

    /// JSON lines: a header, then one record per line. A `.manifest` text
    /// file next to it lists counts and the SHA-256 of the data file.
    pub fn save(&self, path: &Path) -> Result<()> {
        let header = DbHeader {
            format: DB_FORMAT.into(),
            version: DB_VERSION,
            spec_hash: self.spec.content_hash(),
            spec: self.spec.clone(),
            levels: self.levels.keys().copied().collect(),
            n_cap: self.n_cap,
        };
        {
            let mut w = BufWriter::new(std::fs::File::create(path)?);
            serde_json::to_writer(&mut w, &header)?;
            w.write_all(b"\n")?;
            for recs in self.levels.values() {
                for r in recs {
                    serde_json::to_writer(&mut w, r)?;
                    w.write_all(b"\n")?;
                }
            }
            w.flush()?;
        }
        let digest = hex::encode(Sha256::digest(std::fs::read(path)?));
        let mut m = String::new();
        m.push_str(&format!("format {DB_FORMAT} {DB_VERSION}\n"));
        m.push_str(&format!("spec_hash {}\n", header.spec_hash));
        m.push_str(&format!("sha256 {digest}\n"));
        for (n, c) in self.counts() {
            m.push_str(&format!("level {n} {c}\n"));
        }
        std::fs::write(Self::manifest_path(path), m)?;
        Ok(())
    }

    /// Loads a database; with `expected` set, refuses one built for another spec.
    pub fn load(path: &Path, expected: Option<&MapSpec>) -> Result<Self> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut lines = reader.lines();
        let first = lines.next().ok_or_else(|| Error::Parse("empty orbit database".into()))??;
        let header: DbHeader = serde_json::from_str(&first)?;
        if header.format != DB_FORMAT || header.version != DB_VERSION {
            return Err(Error::Parse(format!("unsupported database format {} v{}", header.format, header.version)));
        }
        let found = header.spec.content_hash();
        if found != header.spec_hash {
            return Err(Error::Parse("header spec does not match its hash".into()));
        }
        if let Some(spec) = expected {
            let want = spec.content_hash();
            if want != found {
                return Err(Error::SpecMismatch { expected: want, found });
            }
        }
        let mut levels: BTreeMap<u32, Vec<OrbitRecord>> = header.levels.iter().map(|&n| (n, Vec::new())).collect();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let r: OrbitRecord = serde_json::from_str(&line)?;
            levels.get_mut(&r.n).ok_or_else(|| Error::Parse(format!("record for undeclared level {}", r.n)))?.push(r);
        }
        Ok(Self { spec: header.spec, n_cap: header.n_cap, levels })
    }
}
