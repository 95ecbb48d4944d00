// SPDX-License-Identifier: Apache-2.0

// Property suites shared by the `properties` and `acceptance` targets.
// Each runs a seeded proptest runner and returns the first failure.
#![allow(dead_code)]

use std::f64::consts::TAU;

use anosov_core::bundles::{BundleSettings, Bundles};
use anosov_core::horocycle::{integrate_flow, FlowSettings, StableFlow};
use anosov_core::mme::{correlation, mme_approximation, CorrelationMeasure};
use anosov_core::series::{find_zeros, PowerSeries, DEFAULT_ZERO_TOL};
use anosov_core::spectral::{check_identity_base, check_identity_extended, check_identity_twisted, determinant_series, WeightSpec};
use anosov_core::{verify_cone_condition, IntegerMatrix2, MapSpec, Observable, OrbitDatabase, PerturbationTerm, TorusPoint};
use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

pub struct Property {
    pub name: &'static str,
    pub cases: u32,
    pub run: fn(u32) -> Result<(), String>,
}

pub fn suite() -> Vec<Property> {
    vec![
        Property { name: "lift equivariance", cases: 64, run: lift_equivariance },
        Property { name: "jacobian vs finite differences", cases: 64, run: jacobian_consistency },
        Property { name: "linear cone bounds", cases: 16, run: linear_cone_bounds },
        Property { name: "linear model ignores perturbations", cases: 32, run: linear_model_invariance },
        Property { name: "bundle colinearity and orientation", cases: 48, run: bundle_colinearity },
        Property { name: "bundle unit norm", cases: 48, run: bundle_unit_norm },
        Property { name: "stretch determinant identity", cases: 48, run: stretch_determinant },
        Property { name: "bundle depth robustness", cases: 32, run: bundle_depth_robustness },
        Property { name: "orbit count invariance", cases: 8, run: orbit_counts },
        Property { name: "orbit closure", cases: 8, run: orbit_closure },
        Property { name: "period coherence", cases: 8, run: period_coherence },
        Property { name: "multiplier trace and determinant", cases: 8, run: multiplier_identities },
        Property { name: "series exp/log round trip", cases: 64, run: exp_log_round_trip },
        Property { name: "zero truncation stability", cases: 6, run: truncation_stability },
        Property { name: "identity residuals", cases: 6, run: identity_residuals },
        Property { name: "sigma substitution", cases: 8, run: sigma_substitution },
        Property { name: "flow composition", cases: 8, run: flow_composition },
        Property { name: "unit speed and unit integral", cases: 8, run: unit_speed },
        Property { name: "measure normalization", cases: 8, run: measure_normalization },
        Property { name: "character correlation oracle", cases: 64, run: character_oracle },
        Property { name: "zero-lag swap symmetry", cases: 8, run: swap_symmetry },
    ]
}

fn runner(cases: u32) -> TestRunner {
    let cfg = Config { cases, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(cfg, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn check<S: Strategy>(cases: u32, s: S, f: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    runner(cases).run(&s, f).map_err(|e| e.to_string())
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if ok {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

fn cat() -> IntegerMatrix2 {
    IntegerMatrix2::cat()
}

/// Cat map plus one small trigonometric term.
pub fn perturbed_spec() -> impl Strategy<Value = MapSpec> {
    (
        -0.05f64..0.05,
        0usize..2,
        prop::sample::select(vec![[1i64, 0], [0, 1], [1, 1], [1, -1]]),
        0.0..TAU,
    )
        .prop_map(|(e, c, m, p)| MapSpec::new(cat(), vec![PerturbationTerm::new(c, m, e, p)], "prop").unwrap())
}

fn hyperbolic_matrix() -> impl Strategy<Value = IntegerMatrix2> {
    prop::sample::select(vec![[2, 1, 1, 1], [3, 1, 2, 1], [1, 1, 1, 2], [3, 2, 1, 1], [0, 1, 1, -1], [2, 1, 1, 0], [5, 2, 2, 1]])
        .prop_map(|[a, b, c, d]| IntegerMatrix2::new(a, b, c, d).unwrap())
}

/// `det = -1` matrices whose contracting eigenvalue is positive.
fn sigma_minus_matrix() -> impl Strategy<Value = IntegerMatrix2> {
    prop::sample::select(vec![[0, 1, 1, -1], [-1, 1, 1, 0], [-2, 1, 1, 0], [0, 1, 1, -2], [-3, 1, 1, 0]])
        .prop_map(|[a, b, c, d]| IntegerMatrix2::new(a, b, c, d).unwrap())
}

fn point() -> impl Strategy<Value = TorusPoint> {
    (0.0f64..1.0, 0.0f64..1.0).prop_map(|(a, b)| TorusPoint::new(a, b))
}

fn bundles(spec: &MapSpec) -> Bundles<'_> {
    Bundles::new(spec, BundleSettings::new(40, 1e-10))
}

fn cross(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

pub fn lift_equivariance(cases: u32) -> Result<(), String> {
    check(cases, (perturbed_spec(), point(), -5i64..=5, -5i64..=5), |(s, x, m1, m2)| {
        let x = x.as_lift();
        let m = Vector2::new(m1 as f64, m2 as f64);
        let a = s.matrix().to_matrix();
        let d = (s.lift(&(x + m)) - s.lift(&x) - a * m).norm();
        ensure(d <= 1e-12, || format!("defect {d:e}"))
    })
}

pub fn jacobian_consistency(cases: u32) -> Result<(), String> {
    check(cases, (perturbed_spec(), point()), |(s, x)| {
        let x = x.as_lift();
        let h = 1e-6;
        let mut fd = Matrix2::zeros();
        for j in 0..2 {
            let mut e = Vector2::zeros();
            e[j] = h;
            let col = (s.lift(&(x + e)) - s.lift(&(x - e))) / (2.0 * h);
            fd.set_column(j, &col);
        }
        let jac = s.jacobian(&x);
        let rel = (jac - fd).norm() / jac.norm();
        ensure(rel <= 1e-6, || format!("relative error {rel:e}"))
    })
}

pub fn linear_cone_bounds(cases: u32) -> Result<(), String> {
    check(cases, hyperbolic_matrix(), |m| {
        let s = MapSpec::linear(m, "lin").unwrap();
        let r = verify_cone_condition(&s, 0.3, 16).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let (lu, ls) = m.eigenvalues();
        let ok = (r.lambda_u_min - lu.abs()).abs() <= 1e-10
            && (r.big_lambda_u - lu.abs()).abs() <= 1e-10
            && (r.nu_s - ls.abs()).abs() <= 1e-10
            && (r.big_lambda_s - ls.abs()).abs() <= 1e-10;
        ensure(ok, || format!("{m}: {r:?} vs ({lu}, {ls})"))
    })
}

pub fn linear_model_invariance(cases: u32) -> Result<(), String> {
    check(cases, perturbed_spec(), |s| {
        let lin = MapSpec::linear(*s.matrix(), "lin").unwrap();
        ensure(s.linear_model() == lin.linear_model(), || "linear model moved".into())
    })
}

pub fn bundle_colinearity(cases: u32) -> Result<(), String> {
    check(cases, (perturbed_spec(), point()), |(s, x)| {
        let b = bundles(&s);
        let x = x.as_lift();
        let fx = s.lift(&x);
        let j = s.jacobian(&x);
        let fail = |e: anosov_core::Error| TestCaseError::fail(e.to_string());
        let vs = b.stable_direction(&x).map_err(fail)?.vector;
        let vs1 = b.stable_direction(&fx).map_err(fail)?.vector;
        let w = j * vs;
        let ms = w.dot(&vs1);
        let d = (w - ms * vs1).norm();
        ensure(d <= 1e-8 && ms > 0.0, || format!("stable: defect {d:e}, ms {ms}"))?;
        let vu = b.unstable_direction(&x).map_err(fail)?.vector;
        let vu1 = b.unstable_direction(&fx).map_err(fail)?.vector;
        let w = j * vu;
        let mu = w.dot(&vu1);
        let d = (w - mu * vu1).norm();
        ensure(d <= 1e-8 && mu > 1.0, || format!("unstable: defect {d:e}, mu {mu}"))
    })
}

pub fn bundle_unit_norm(cases: u32) -> Result<(), String> {
    check(cases, (perturbed_spec(), point()), |(s, x)| {
        let b = bundles(&s);
        let x = x.as_lift();
        let fail = |e: anosov_core::Error| TestCaseError::fail(e.to_string());
        let a = b.stable_direction(&x).map_err(fail)?.vector.norm();
        let c = b.unstable_direction(&x).map_err(fail)?.vector.norm();
        ensure((a - 1.0).abs() <= 1e-12 && (c - 1.0).abs() <= 1e-12, || format!("norms {a} {c}"))
    })
}

/// `ms mu = det DF` up to the change of angle between the bundles.
pub fn stretch_determinant(cases: u32) -> Result<(), String> {
    check(cases, (perturbed_spec(), point()), |(s, x)| {
        let b = bundles(&s);
        let x = x.as_lift();
        let fx = s.lift(&x);
        let fail = |e: anosov_core::Error| TestCaseError::fail(e.to_string());
        let st = b.stretch_factors(&x).map_err(fail)?;
        let sin0 = cross(&b.stable_direction(&x).map_err(fail)?.vector, &b.unstable_direction(&x).map_err(fail)?.vector);
        let sin1 = cross(&b.stable_direction(&fx).map_err(fail)?.vector, &b.unstable_direction(&fx).map_err(fail)?.vector);
        let det = s.jacobian(&x).determinant();
        let lhs = st.ms * st.mu * sin1 / sin0;
        ensure((lhs - det).abs() <= 1e-8, || format!("{lhs} vs {det}"))?;
        if s.terms().iter().all(|t| t.amp == 0.0) {
            ensure((st.ms * st.mu - det).abs() <= 1e-8, || "linear product".into())?;
        }
        Ok(())
    })
}

pub fn bundle_depth_robustness(cases: u32) -> Result<(), String> {
    check(cases, (perturbed_spec(), point()), |(s, x)| {
        let b = bundles(&s);
        let x = x.as_lift();
        let fail = |e: anosov_core::Error| TestCaseError::fail(e.to_string());
        let d1 = b.stable_direction_at_depth(&x, 20).map_err(|e| fail(e))?;
        let d2 = b.stable_direction_at_depth(&x, 40).map_err(|e| fail(e))?;
        let moved = cross(&d1.vector, &d2.vector).abs();
        ensure(moved <= d1.residual + 1e-15, || format!("moved {moved:e} > residual {:e}", d1.residual))
    })
}

fn db(s: &MapSpec, n: u32) -> Result<OrbitDatabase, TestCaseError> {
    OrbitDatabase::build(s, n).map_err(|e| TestCaseError::fail(e.to_string()))
}

pub fn orbit_counts(cases: u32) -> Result<(), String> {
    check(cases, perturbed_spec(), |s| {
        let d = db(&s, 6)?;
        let want = [1usize, 5, 16, 45, 121, 320];
        for (n, c) in d.counts() {
            ensure(c == want[n as usize - 1], || format!("n={n}: {c}"))?;
        }
        Ok(())
    })
}

pub fn orbit_closure(cases: u32) -> Result<(), String> {
    check(cases, perturbed_spec(), |s| {
        let d = db(&s, 5)?;
        for n in 1..=5 {
            for r in d.level(n).unwrap() {
                let mut y = r.point.as_lift();
                for _ in 0..n {
                    y = s.lift(&y);
                }
                let target = r.point.as_lift() + Vector2::new(r.lift_offset[0] as f64, r.lift_offset[1] as f64);
                let e = (y - target).norm();
                ensure(e <= 1e-9, || format!("n={n} closure {e:e}"))?;
            }
        }
        Ok(())
    })
}

pub fn period_coherence(cases: u32) -> Result<(), String> {
    check(cases, perturbed_spec(), |s| {
        let d = db(&s, 6)?;
        for n in 2..=6u32 {
            let big = d.level(n).unwrap();
            for k in (1..n).filter(|k| n % k == 0) {
                for r in d.level(k).unwrap() {
                    let hit = big.iter().any(|q| q.point.distance(&r.point) <= 1e-9);
                    ensure(hit, || format!("Fix F^{k} point missing from Fix F^{n}"))?;
                }
            }
        }
        Ok(())
    })
}

pub fn multiplier_identities(cases: u32) -> Result<(), String> {
    check(cases, perturbed_spec(), |s| {
        let d = db(&s, 5)?;
        for n in 1..=5 {
            for r in d.level(n).unwrap() {
                let mut m = Matrix2::identity();
                let mut y = r.point.as_lift();
                for _ in 0..n {
                    m = s.jacobian(&y) * m;
                    y = s.lift(&y);
                }
                let (tr, det) = (m.trace(), m.determinant());
                let scale = tr.abs().max(1.0);
                ensure((r.ms + r.mu - tr).abs() <= 1e-9 * scale, || format!("trace {} vs {tr}", r.ms + r.mu))?;
                ensure((r.ms * r.mu - det).abs() <= 1e-9 * scale, || format!("det {} vs {det}", r.ms * r.mu))?;
                ensure(r.ms > 0.0 && r.ms < 1.0 && r.mu > 1.0, || format!("ms {} mu {}", r.ms, r.mu))?;
            }
        }
        Ok(())
    })
}

pub fn exp_log_round_trip(cases: u32) -> Result<(), String> {
    check(cases, prop::collection::vec(-1.0f64..1.0, 1..12), |tail| {
        let mut c = vec![1.0];
        c.extend(tail.iter().copied());
        let s = PowerSeries::from_real(&c, "s");
        let back = s.log().exp();
        let e1 = back.max_residual(&s);
        let mut z = vec![0.0];
        z.extend(tail.iter().copied());
        let t = PowerSeries::from_real(&z, "t");
        let e2 = t.exp().log().max_residual(&t);
        ensure(e1 <= 1e-12 && e2 <= 1e-12, || format!("{e1:e} {e2:e}"))
    })
}

/// Stable zeros of `d_{F̃,g̃}` at orders 8 and 10 agree to 1e-4.
pub fn truncation_stability(cases: u32) -> Result<(), String> {
    check(cases, perturbed_spec(), |s| {
        let d = db(&s, 10)?;
        let fail = |e: anosov_core::Error| TestCaseError::fail(e.to_string());
        let lo = determinant_series(&d, &WeightSpec::G_TILDE, 8, true).map_err(fail)?;
        let hi = determinant_series(&d, &WeightSpec::G_TILDE, 10, true).map_err(fail)?;
        let zl = find_zeros(&lo, 1.0, DEFAULT_ZERO_TOL);
        let zh = find_zeros(&hi, 1.0, DEFAULT_ZERO_TOL);
        for z in zl.iter().filter(|z| z.stable) {
            let near = zh.iter().map(|w| (w.z - z.z).norm()).fold(f64::INFINITY, f64::min);
            ensure(near <= 1e-4, || format!("zero {} moved {near:e}", z.z))?;
        }
        ensure(zl.iter().any(|z| z.stable), || "no stable zero".into())
    })
}

pub fn identity_residuals(cases: u32) -> Result<(), String> {
    check(cases, perturbed_spec(), |s| {
        let d = db(&s, 8)?;
        let fail = |e: anosov_core::Error| TestCaseError::fail(e.to_string());
        let b = check_identity_base(&d, 8).map_err(fail)?.max_residual;
        let e = check_identity_extended(&d, 8).map_err(fail)?.max_residual;
        ensure(b <= 1e-6 && e <= 1e-6, || format!("{b:e} {e:e}"))
    })
}

pub fn sigma_substitution(cases: u32) -> Result<(), String> {
    check(cases, (sigma_minus_matrix(), any::<bool>()), |(m, extended)| {
        let s = MapSpec::linear(m, "sigma").unwrap();
        let d = db(&s, 6)?;
        let fail = |e: anosov_core::Error| TestCaseError::fail(e.to_string());
        let plain = if extended { check_identity_extended(&d, 6) } else { check_identity_base(&d, 6) }.map_err(fail)?;
        let tw = check_identity_twisted(&d, 6, extended).map_err(fail)?;
        let ok = plain.max_residual <= 1e-10 && (plain.max_residual - tw.max_residual).abs() <= 1e-10;
        ensure(ok, || format!("{m}: {:e} vs {:e}", plain.max_residual, tw.max_residual))
    })
}

pub fn flow_composition(cases: u32) -> Result<(), String> {
    check(cases, (perturbed_spec(), point(), 0.1f64..10.0, 0.1f64..10.0), |(s, x, t, u)| {
        let fail = |e: anosov_core::Error| TestCaseError::fail(e.to_string());
        let direct = integrate_flow(&s, &x, t + u, 1e-9).map_err(fail)?;
        let mid = integrate_flow(&s, &x, u, 1e-9).map_err(fail)?;
        let two = integrate_flow(&s, &mid.torus_point, t, 1e-9).map_err(fail)?;
        let e = direct.torus_point.distance(&two.torus_point);
        ensure(e <= 1e-7, || format!("composition defect {e:e}"))
    })
}

pub fn unit_speed(cases: u32) -> Result<(), String> {
    check(cases, (perturbed_spec(), point(), 1.0f64..50.0), |(s, x, t)| {
        let flow = StableFlow::new(&s, FlowSettings::default()).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let tr = flow
            .trajectory(&x.as_lift(), 1.0, &[t / 2.0, t], &[Observable::cos([1, 0])])
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
        ensure(tr.max_unit_defect <= 1e-12, || format!("speed defect {:e}", tr.max_unit_defect))?;
        for r in &tr.records {
            ensure((r.unit - r.t).abs() <= 1e-9 * r.t, || format!("H(1) = {} at T = {}", r.unit, r.t))?;
        }
        Ok(())
    })
}

pub fn measure_normalization(cases: u32) -> Result<(), String> {
    check(cases, (perturbed_spec(), 1u32..=7), |(s, n)| {
        let d = db(&s, n)?;
        let m = mme_approximation(&d, n).map_err(|e| TestCaseError::fail(e.to_string()))?;
        ensure(m.weights.iter().all(|w| *w >= 0.0), || "negative weight".into())?;
        ensure((m.total_weight() - 1.0).abs() <= 1e-12, || format!("total {}", m.total_weight()))?;
        let one = m.integrate(&Observable::constant(1.0));
        ensure((one - Complex64::new(1.0, 0.0)).norm() <= 1e-12, || format!("∫1 = {one}"))
    })
}

/// Exact branch against `C_k != 0 iff (Aᵀ)^k k1 = -k2`.
pub fn character_oracle(cases: u32) -> Result<(), String> {
    let freq = -3i64..=3;
    check(cases, (hyperbolic_matrix(), freq.clone(), freq.clone(), 0usize..4, any::<bool>()), |(m, a, b, k, hit)| {
        let s = MapSpec::linear(m, "lin").unwrap();
        let k1 = if a == 0 && b == 0 { [1, 0] } else { [a, b] };
        let mut img = k1;
        for _ in 0..k {
            img = m.transpose().apply(img);
        }
        let k2 = if hit { [-img[0], -img[1]] } else { [b, -a - 1] };
        let c = correlation(&s, &Observable::character(k1), &Observable::character(k2), 5, CorrelationMeasure::Lebesgue)
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
        let mut v = k1;
        for (j, cj) in c.values.iter().enumerate() {
            let expect = if v[0] == -k2[0] && v[1] == -k2[1] { 1.0 } else { 0.0 };
            // both characters are nontrivial, so the means vanish
            ensure(*cj == Complex64::new(expect, 0.0), || format!("k={j}: {cj} vs {expect}"))?;
            v = m.transpose().apply(v);
        }
        Ok(())
    })
}

pub fn swap_symmetry(cases: u32) -> Result<(), String> {
    let obs = prop::sample::select(vec![[1i64, 0], [0, 1], [1, 1], [2, -1]]);
    check(cases, (perturbed_spec(), obs.clone(), obs, 3u32..=6), |(s, a, b, n)| {
        let d = db(&s, n)?;
        let m = mme_approximation(&d, n).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let meas = CorrelationMeasure::Empirical { fine: &m, coarse: None };
        let (f1, f2) = (Observable::cos(a), Observable::sin(b));
        let x = correlation(&s, &f1, &f2, 0, meas).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let y = correlation(&s, &f2, &f1, 0, meas).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let e = (x.values[0] - y.values[0]).norm();
        ensure(e <= 1e-14, || format!("swap defect {e:e}"))
    })
}
