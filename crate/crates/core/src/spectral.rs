// SPDX-License-Identifier: Apache-2.0

//! Zeta functions, weighted dynamical determinants and their zeros.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::cone::ConeReport;
use crate::error::{Error, Result};
use crate::maps::{IntegerMatrix2, MapSpec};
use crate::orbits::{OrbitDatabase, OrbitRecord};
use crate::series::{find_zeros, kahan_sum, PowerSeries, DEFAULT_ZERO_TOL};

/// `φ^{(n)} = |ms_n|^p · mu_n^q`, optionally with `|mu_n|` and a `σ^{nq}`
/// sign in place of the sign of `mu_n^q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WeightSpec {
    pub p: i32,
    pub q: i32,
    pub abs_mu: bool,
    pub sigma_twist: bool,
    pub name: &'static str,
}

impl WeightSpec {
    pub const fn new(p: i32, q: i32, name: &'static str) -> Self {
        Self { p, q, abs_mu: false, sigma_twist: false, name }
    }

    pub const ONE: Self = Self::new(0, 0, "1");
    pub const INV_DET: Self = Self::new(-1, -1, "inv-det");
    pub const G_TILDE: Self = Self::new(-1, 0, "g-tilde");
    /// Same weight as `G_TILDE`; the base-dynamics name.
    pub const G_S: Self = Self::new(-1, 0, "g-s");
    pub const G_U: Self = Self::new(0, -1, "g-u");
    pub const GU_OVER_G_TILDE: Self = Self::new(1, -1, "gu-over-g-tilde");
    pub const GU_SQUARED: Self = Self::new(0, -2, "gu-squared");
    pub const GU_SQUARED_OVER_G_TILDE: Self = Self::new(1, -2, "gu-squared-over-g-tilde");

    pub const ALL: [Self; 8] = [
        Self::ONE,
        Self::INV_DET,
        Self::G_TILDE,
        Self::G_S,
        Self::G_U,
        Self::GU_OVER_G_TILDE,
        Self::GU_SQUARED,
        Self::GU_SQUARED_OVER_G_TILDE,
    ];

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .find(|w| w.name == name)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("unknown weight '{name}'")))
    }

    /// Absolute `mu` with the sign carried by `σ^{nq}` instead.
    pub fn twisted(self) -> Self {
        Self { abs_mu: true, sigma_twist: true, ..self }
    }

    pub fn evaluate(&self, rec: &OrbitRecord, sigma: i64) -> f64 {
        let mu = if self.abs_mu { rec.mu.abs() } else { rec.mu };
        let mut w = rec.ms.abs().powi(self.p) * mu.powi(self.q);
        if self.sigma_twist && sigma < 0 && (rec.n as i64 * self.q as i64) % 2 != 0 {
            w = -w;
        }
        w
    }
}

/// Denominator `|det(I - DF^n)|`, times `|1 - 1/λ̃^n|` for the extended map.
pub fn orbit_denominator(rec: &OrbitRecord, extended: bool) -> f64 {
    let base = ((1.0 - 1.0 / rec.ms) * (1.0 - 1.0 / rec.mu)).abs();
    if extended {
        base * (1.0 - rec.ms.abs() / rec.mu).abs()
    } else {
        base
    }
}

/// Exact `ζ_A` as the rational function
/// `(1 - s z)(1 - s σ z) / ((1 - s μ z)(1 - s ν z))`, `s = sign μ`.
pub fn zeta_closed_form(a: &IntegerMatrix2, n: usize) -> Result<PowerSeries> {
    let (mu, nu) = a.eigenvalues();
    if !a.is_hyperbolic() {
        return Err(Error::NotHyperbolic { trace: a.trace(), det: a.det() });
    }
    let s = mu.signum();
    let sigma = a.det() as f64;
    let lin = |r: f64| {
        let mut c = vec![0.0; n + 1];
        c[0] = 1.0;
        if n >= 1 {
            c[1] = -r;
        }
        PowerSeries::from_real(&c, "")
    };
    let num = lin(s).mul(&lin(s * sigma));
    let den = lin(s * mu).mul(&lin(s * nu));
    Ok(num.div(&den).with_label(format!("zeta_A closed form, A = {a}")))
}

/// `exp Σ_{n=1}^N z^n / n · count_n` with `N = counts.len()`.
pub fn zeta_from_counts(counts: &[u64]) -> PowerSeries {
    let n = counts.len();
    let mut c = vec![Complex64::default(); n + 1];
    for (k, &v) in counts.iter().enumerate() {
        c[k + 1] = Complex64::new(v as f64 / (k + 1) as f64, 0.0);
    }
    PowerSeries::new(c, "log zeta").exp().with_label("zeta from counts")
}

/// `a_n = Σ_{Fix F^n} φ^{(n)} / D_n` for `n = 1..=order`.
pub fn weighted_sums(db: &OrbitDatabase, weight: &WeightSpec, order: usize, extended: bool) -> Result<Vec<f64>> {
    let sigma = db.spec().matrix().det();
    (1..=order as u32)
        .map(|n| {
            let recs = db.level(n)?;
            let terms: Vec<f64> =
                recs.par_iter().map(|r| weight.evaluate(r, sigma) / orbit_denominator(r, extended)).collect();
            Ok(kahan_sum(terms))
        })
        .collect()
}

/// `d_φ(z) = exp(-Σ_{n<=N} z^n/n · a_n)`.
pub fn determinant_series(db: &OrbitDatabase, weight: &WeightSpec, order: usize, extended: bool) -> Result<PowerSeries> {
    let sums = weighted_sums(db, weight, order, extended)?;
    let mut c = vec![Complex64::default(); order + 1];
    for (k, a) in sums.iter().enumerate() {
        c[k + 1] = Complex64::new(-a / (k + 1) as f64, 0.0);
    }
    let kind = if extended { "extended" } else { "base" };
    Ok(PowerSeries::new(c, "").exp().with_label(format!("d[{}] {kind}", weight.name)))
}

/// Number of factors needed so the omitted tail is below `1e-14` on `|z| <= radius`.
pub fn default_product_terms(lambda: f64, radius: f64) -> usize {
    let mut j = 0;
    while radius * lambda.powi(1 - 2 * j as i32) >= 1e-14 {
        j += 1;
    }
    j
}

/// `∏_{j=0}^{J} (1 - z λ^{1-2j})` expanded to order `n`.
pub fn product_formula_series(a: &IntegerMatrix2, n: usize, j_max: usize) -> Result<PowerSeries> {
    if a.det() != 1 {
        return Err(Error::SigmaMinusOne);
    }
    let lambda = a.linear_model()?.lambda;
    let mut acc = PowerSeries::one(n);
    for j in 0..=j_max {
        let mut c = vec![0.0; n + 1];
        c[0] = 1.0;
        if n >= 1 {
            c[1] = -lambda.powi(1 - 2 * j as i32);
        }
        acc = acc.mul(&PowerSeries::from_real(&c, ""));
    }
    Ok(acc.with_label(format!("product formula, J = {j_max}")))
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub kind: &'static str,
    pub order: usize,
    pub sigma: i64,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
}

fn require_stable_orientation(db: &OrbitDatabase, order: usize) -> Result<()> {
    for n in 1..=order as u32 {
        if db.level(n)?.iter().any(|r| r.ms <= 0.0) {
            return Err(Error::OrientationReversed);
        }
    }
    Ok(())
}

fn identity_report(
    db: &OrbitDatabase,
    order: usize,
    kind: &'static str,
    numerator: &[WeightSpec],
    denominator: &[WeightSpec],
    extended: bool,
    twisted: bool,
) -> Result<IdentityReport> {
    db.require(order as u32)?;
    require_stable_orientation(db, order)?;
    let a = db.spec().matrix();
    let lhs = zeta_closed_form(a, order)?;
    let mut rhs = PowerSeries::one(order);
    for w in numerator {
        let w = if twisted { w.twisted() } else { *w };
        rhs = rhs.mul(&determinant_series(db, &w, order, extended)?);
    }
    for w in denominator {
        let w = if twisted { w.twisted() } else { *w };
        rhs = rhs.div(&determinant_series(db, &w, order, extended)?);
    }
    let residuals = lhs.residuals(&rhs);
    Ok(IdentityReport {
        kind,
        order,
        sigma: a.det(),
        max_residual: residuals.iter().copied().fold(0.0, f64::max),
        residuals,
        lhs: lhs.real_parts(),
        rhs: rhs.real_parts(),
    })
}

/// `ζ_A = d_1 · d_{1/Det} / (d_{g^u} · d_{g^s})` for the base dynamics.
pub fn check_identity_base(db: &OrbitDatabase, order: usize) -> Result<IdentityReport> {
    identity_report(db, order, "base", &[WeightSpec::ONE, WeightSpec::INV_DET], &[WeightSpec::G_U, WeightSpec::G_S], false, false)
}

/// The six-determinant factorization of `ζ_A` through the extended map.
pub fn check_identity_extended(db: &OrbitDatabase, order: usize) -> Result<IdentityReport> {
    identity_report(
        db,
        order,
        "extended",
        &[WeightSpec::ONE, WeightSpec::INV_DET, WeightSpec::GU_SQUARED_OVER_G_TILDE],
        &[WeightSpec::G_TILDE, WeightSpec::GU_OVER_G_TILDE, WeightSpec::GU_SQUARED],
        true,
        false,
    )
}

/// As [`check_identity_base`] / [`check_identity_extended`] but with `|mu|`
/// and the sign moved into a `σ^n` twist.
pub fn check_identity_twisted(db: &OrbitDatabase, order: usize, extended: bool) -> Result<IdentityReport> {
    if extended {
        identity_report(
            db,
            order,
            "extended-twisted",
            &[WeightSpec::ONE, WeightSpec::INV_DET, WeightSpec::GU_SQUARED_OVER_G_TILDE],
            &[WeightSpec::G_TILDE, WeightSpec::GU_OVER_G_TILDE, WeightSpec::GU_SQUARED],
            true,
            true,
        )
    } else {
        identity_report(db, order, "base-twisted", &[WeightSpec::ONE, WeightSpec::INV_DET], &[WeightSpec::G_U, WeightSpec::G_S], false, true)
    }
}

pub const RESONANCE_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Serialize)]
pub struct ResonanceZero {
    pub re: f64,
    pub im: f64,
    pub modulus: f64,
    pub multiplicity: usize,
    pub stable: bool,
    pub drift: f64,
    pub derivative: f64,
    /// Inside the disc used for the verdict.
    pub counted: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResonanceReport {
    pub order: usize,
    pub radius: f64,
    pub verdict_radius: f64,
    pub h_top: f64,
    pub expected_zero: f64,
    pub zeros: Vec<ResonanceZero>,
    /// `max(|c_{N-1}|, |c_N|) / max_k |c_k|`.
    pub tail_ratio: f64,
    pub coefficients: Vec<f64>,
    pub verdict: bool,
    pub reason: String,
}

/// Zeros of `d_{F̃,g̃}` and the check that the only one in the unit disc is a
/// simple zero at `e^{-h_top}`.
pub fn resonance_report(db: &OrbitDatabase, order: usize, radius: f64) -> Result<ResonanceReport> {
    if order < 4 {
        return Err(Error::InvalidArgument(format!("order {order} < 4")));
    }
    db.require(order as u32)?;
    require_stable_orientation(db, order)?;
    let model = db.spec().linear_model();
    let target = (-model.h_top).exp();
    let d = determinant_series(db, &WeightSpec::G_TILDE, order, true)?;
    let verdict_radius = radius.min(1.0);
    let zeros: Vec<ResonanceZero> = find_zeros(&d, radius, DEFAULT_ZERO_TOL)
        .into_iter()
        .map(|z| ResonanceZero {
            re: z.z.re,
            im: z.z.im,
            modulus: z.z.norm(),
            multiplicity: z.multiplicity,
            stable: z.stable,
            drift: z.drift,
            derivative: z.derivative,
            counted: z.stable && z.z.norm() <= verdict_radius,
        })
        .collect();
    let mags: Vec<f64> = d.coefficients.iter().map(|c| c.norm()).collect();
    let peak = mags.iter().copied().fold(0.0, f64::max);
    let tail_ratio = mags[order].max(mags[order - 1]) / peak;
    let counted: Vec<&ResonanceZero> = zeros.iter().filter(|z| z.counted).collect();
    let (verdict, reason) = if tail_ratio >= 1e-2 {
        (false, format!("coefficients have not decayed by order {order} (tail ratio {tail_ratio:.3e})"))
    } else if counted.len() != 1 {
        (false, format!("{} stable zeros in |z| <= {verdict_radius}", counted.len()))
    } else if counted[0].multiplicity != 1 {
        (false, format!("zero has multiplicity {}", counted[0].multiplicity))
    } else {
        let dist = Complex64::new(counted[0].re - target, counted[0].im).norm();
        if dist <= RESONANCE_TOL {
            (true, format!("single simple zero at distance {dist:.3e} from exp(-h_top)"))
        } else {
            (false, format!("zero at distance {dist:.3e} from exp(-h_top)"))
        }
    };
    Ok(ResonanceReport {
        order,
        radius,
        verdict_radius,
        h_top: model.h_top,
        expected_zero: target,
        zeros,
        tail_ratio,
        coefficients: d.real_parts(),
        verdict,
        reason,
    })
}

pub const R1_EPSILON: f64 = 0.01;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RhoBounds {
    pub r: f64,
    pub lambda: f64,
    pub rho_bound: f64,
    pub r1_bound: f64,
    pub certified: bool,
}

/// Plug-in bounds `e^{h_top} / λ^{(r-1)/2}` and the smoothness threshold `r₁`.
pub fn rho_bounds(spec: &MapSpec, report: &ConeReport, r: f64) -> RhoBounds {
    let h = spec.linear_model().h_top;
    let lambda = report.lambda_u_min.min(1.0 / report.nu_s);
    let rho = h.exp() / lambda.powf((r - 1.0) / 2.0);
    let r1 = 1.0
        + R1_EPSILON
        + (report.big_lambda_u.ln() - report.big_lambda_s.ln()) / (-report.nu_s.ln());
    RhoBounds { r, lambda, rho_bound: rho, r1_bound: r1, certified: rho < 1.0 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::fixed_point_count_linear;
    use approx::assert_relative_eq;

    fn lambda() -> f64 {
        (3.0 + 5f64.sqrt()) / 2.0
    }

    #[test]
    fn closed_form_log_coefficients_are_counts() {
        let z = zeta_closed_form(&IntegerMatrix2::cat(), 6).unwrap();
        assert_eq!(z.coeff(0).re, 1.0);
        let l = z.log();
        let expect = [1.0, 5.0 / 2.0, 16.0 / 3.0, 45.0 / 4.0];
        for (k, e) in expect.iter().enumerate() {
            assert_relative_eq!(l.coeff(k + 1).re, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn closed_form_matches_lattice_counts_for_several_matrices() {
        for m in [
            IntegerMatrix2::cat(),
            IntegerMatrix2::new(1, 1, 1, 0).unwrap(),
            IntegerMatrix2::new(0, 1, 1, -1).unwrap(),
            IntegerMatrix2::new(-2, -1, -1, -1).unwrap(),
            IntegerMatrix2::new(3, 1, 2, 1).unwrap(),
        ] {
            let counts: Vec<u64> = (1..=8).map(|n| fixed_point_count_linear(&m, n).unwrap()).collect();
            let from_counts = zeta_from_counts(&counts);
            let closed = zeta_closed_form(&m, 8).unwrap();
            for k in 0..=8 {
                let c = closed.coeff(k).re;
                assert!((from_counts.coeff(k).re - c).abs() <= 1e-12 * c.abs().max(1.0), "{m} order {k}");
            }
        }
    }

    #[test]
    fn sigma_minus_one_first_log_coefficient() {
        let z = zeta_closed_form(&IntegerMatrix2::new(1, 1, 1, 0).unwrap(), 4).unwrap();
        assert_relative_eq!(z.log().coeff(1).re, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn empty_counts() {
        assert_eq!(zeta_from_counts(&[]).coefficients, vec![Complex64::new(1.0, 0.0)]);
    }

    #[test]
    fn product_formula_first_coefficient() {
        let a = IntegerMatrix2::cat();
        let j = default_product_terms(lambda(), 1.0);
        let p = product_formula_series(&a, 8, j).unwrap();
        assert_relative_eq!(p.coeff(1).re, -(lambda() + 1.0 / 5f64.sqrt()), epsilon = 1e-12);
        assert_relative_eq!(p.coeff(1).re, -3.065_247_584_249_853, epsilon = 1e-9);
        let zs = find_zeros(&p, 1.05, DEFAULT_ZERO_TOL);
        assert_eq!(zs.len(), 1);
        assert!((zs[0].z.re - 1.0 / lambda()).abs() < 1e-6 && zs[0].stable);
        assert_eq!(product_formula_series(&IntegerMatrix2::new(1, 1, 1, 0).unwrap(), 4, 5), Err(Error::SigmaMinusOne));
    }

    #[test]
    fn rho_bounds_linear() {
        let spec = MapSpec::linear(IntegerMatrix2::cat(), "cat").unwrap();
        let rep = crate::cone::verify_cone_condition(&spec, 0.3, 16).unwrap();
        let b = rho_bounds(&spec, &rep, 5.0);
        assert_relative_eq!(b.rho_bound, 1.0 / lambda(), epsilon = 1e-9);
        assert_relative_eq!(b.r1_bound, 3.01, epsilon = 1e-9);
        assert!(b.certified);
        let low = rho_bounds(&spec, &rep, 1.5);
        assert_relative_eq!(low.rho_bound, lambda().powf(0.75), epsilon = 1e-9);
        assert!(!low.certified);
    }

    #[test]
    fn weight_names_round_trip() {
        for w in WeightSpec::ALL {
            assert_eq!(WeightSpec::from_name(w.name).unwrap(), w);
        }
        assert!(WeightSpec::from_name("nope").is_err());
    }

    fn linear_db(m: IntegerMatrix2, n: u32) -> OrbitDatabase {
        OrbitDatabase::build(&MapSpec::linear(m, "lin").unwrap(), n).unwrap()
    }

    #[test]
    fn determinant_first_coefficients_linear_cat() {
        let db = linear_db(IntegerMatrix2::cat(), 2);
        let l = lambda();
        let g = determinant_series(&db, &WeightSpec::G_TILDE, 2, true).unwrap();
        let closed = -l / ((1.0 - 1.0 / l) * (l - 1.0) * (1.0 - 1.0 / (l * l)));
        assert_relative_eq!(g.coeff(1).re, closed, epsilon = 1e-12);
        assert_relative_eq!(g.coeff(1).re, -3.065_247_6, epsilon = 1e-7);
        let one = determinant_series(&db, &WeightSpec::ONE, 2, false).unwrap();
        assert_relative_eq!(one.coeff(1).re, -1.0, epsilon = 1e-12);
        assert_eq!(one.coeff(0).re, 1.0);
    }

    #[test]
    fn determinant_matches_product_formula() {
        let db = linear_db(IntegerMatrix2::cat(), 8);
        let d = determinant_series(&db, &WeightSpec::G_TILDE, 8, true).unwrap();
        let p = product_formula_series(&IntegerMatrix2::cat(), 8, default_product_terms(lambda(), 1.0)).unwrap();
        assert!(d.max_residual(&p) <= 1e-10, "{}", d.max_residual(&p));
    }

    #[test]
    fn identities_linear() {
        let db = linear_db(IntegerMatrix2::cat(), 8);
        assert!(check_identity_base(&db, 8).unwrap().max_residual <= 1e-10);
        assert!(check_identity_extended(&db, 8).unwrap().max_residual <= 1e-10);
        assert_eq!(check_identity_base(&db, 1).unwrap().residuals[1], 0.0);
        assert!(matches!(check_identity_base(&db, 9), Err(Error::IncompleteDatabase(9))));
    }

    #[test]
    fn extended_identity_single_fixed_point_closed_form() {
        // n = 1 term with ms = 1/λ, mu = λ, λ̃ = λ²
        let l = lambda();
        let (ms, mu) = (1.0 / l, l);
        let weights = [1.0, 1.0 / (ms * mu), ms / (mu * mu), -1.0 / ms, -ms / mu, -1.0 / (mu * mu)];
        let d = ((1.0 - 1.0 / ms) * (1.0 - 1.0 / mu)).abs() * (1.0 - 1.0 / (l * l)).abs();
        let log_rhs: f64 = -weights.iter().sum::<f64>() / d;
        assert_relative_eq!(log_rhs, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn sigma_minus_one_identities_and_twist() {
        let db = linear_db(IntegerMatrix2::new(0, 1, 1, -1).unwrap(), 8);
        for ext in [false, true] {
            let plain = if ext { check_identity_extended(&db, 8) } else { check_identity_base(&db, 8) }.unwrap();
            let twisted = check_identity_twisted(&db, 8, ext).unwrap();
            assert!(plain.max_residual <= 1e-10, "{plain:?}");
            assert!((plain.max_residual - twisted.max_residual).abs() <= 1e-12);
        }
        let rev = linear_db(IntegerMatrix2::new(1, 1, 1, 0).unwrap(), 4);
        assert_eq!(check_identity_base(&rev, 4).unwrap_err(), Error::OrientationReversed);
    }

    #[test]
    fn resonances_linear_cat() {
        let db = linear_db(IntegerMatrix2::cat(), 10);
        let r = resonance_report(&db, 10, 1.0).unwrap();
        assert!(r.verdict, "{}", r.reason);
        let z = r.zeros.iter().find(|z| z.counted).unwrap();
        assert!((z.re - 1.0 / lambda()).abs() < 1e-6);
        let wide = resonance_report(&db, 10, 2.7).unwrap();
        assert!(wide.verdict);
        assert!(wide.zeros.iter().any(|z| !z.counted && (z.re - lambda()).abs() < 1e-3));
    }
}
