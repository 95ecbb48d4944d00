// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};

use anosov_core::bundles::{converged_depth, DEFAULT_HALFWIDTH};
use anosov_core::corpus::builtin_spec;
use anosov_core::horocycle::{
    coboundary_boundedness, deviation_exponents, horocycle_integral, integrate_flow, log_grid, reference_means,
    rotation_number, sample_points,
};
use anosov_core::mme::{correlation, correlation_from_db, decay_rate_fit, rate_profile, resolution_limit, CorrelationMeasure};
use anosov_core::orbits::DEFAULT_N_CAP;
use anosov_core::spectral::{
    check_identity_base, check_identity_extended, check_identity_twisted, determinant_series, resonance_report,
    rho_bounds, WeightSpec,
};
use anosov_core::{
    verify_cone_condition, BundleSettings, Bundles, ConeReport, Error, LiftPoint, MapSpec, Observable, OrbitDatabase,
    TorusPoint,
};
use num_complex::Complex64;
use serde_json::json;

use crate::observable;
use crate::output::{csv_writer, fmt15, to_value, CliError, CliResult, Report};
use crate::{BundlesCmd, Cli, Cmd, HorocycleCmd, IdentityKind, MmeCmd, OrbitsCmd, Source, SpectralCmd};

const PRECHECK_GRID: usize = 32;

pub fn run(cli: &Cli) -> CliResult<Report> {
    let ctx = Ctx { cli };
    match &cli.cmd {
        Cmd::Verify(a) => ctx.verify(&a.spec.spec, a.halfwidth, a.grid),
        Cmd::Orbits(OrbitsCmd::Enumerate { spec, n, out }) => ctx.enumerate(&spec.spec, *n, out),
        Cmd::Orbits(OrbitsCmd::Validate { db, spec }) => ctx.validate(db, spec.as_deref()),
        Cmd::Bundles(BundlesCmd::Sample { spec, count, tol, depth, csv }) => {
            ctx.bundles_sample(&spec.spec, *count, *tol, *depth, csv.as_deref())
        }
        Cmd::Spectral(SpectralCmd::Determinant { source, weight, extended, twisted, order, out }) => {
            ctx.determinant(source, weight, *extended, *twisted, *order, out.as_deref())
        }
        Cmd::Spectral(SpectralCmd::Resonances { source, order, radius, csv }) => {
            ctx.resonances(source, *order, *radius, csv.as_deref())
        }
        Cmd::Spectral(SpectralCmd::CheckIdentity { kind, source, order, twisted, tol }) => {
            ctx.check_identity(*kind, source, *order, *twisted, *tol)
        }
        Cmd::Horocycle(HorocycleCmd::Integrate { spec, x1, x2, t, f, tol }) => {
            ctx.integrate(&spec.spec, TorusPoint::new(*x1, *x2), *t, f.as_deref(), *tol)
        }
        Cmd::Horocycle(HorocycleCmd::Deviation {
            spec,
            f,
            samples,
            mean_samples,
            t_min,
            t_max,
            per_decade,
            t_long,
            csv,
        }) => ctx.deviation(
            &spec.spec,
            f,
            *samples,
            *mean_samples,
            (*t_min, *t_max, *per_decade),
            *t_long,
            csv.as_deref(),
        ),
        Cmd::Horocycle(HorocycleCmd::Coboundary { spec, f, t_max, samples, mean_samples, csv }) => {
            ctx.coboundary(&spec.spec, f, *t_max, *samples, *mean_samples, csv.as_deref())
        }
        Cmd::Horocycle(HorocycleCmd::Rotation { spec, transversal, iterates, tol }) => {
            ctx.rotation(&spec.spec, *transversal, *iterates, *tol)
        }
        Cmd::Mme(MmeCmd::Correlations { source, n, kmax, f1, f2, exact, csv }) => {
            ctx.correlations(source, *n, *kmax, f1, f2.as_deref(), *exact, csv.as_deref())
        }
        Cmd::Diagnose(a) => ctx.diagnose(&a.spec.spec, a.r, a.halfwidth, a.grid),
    }
}

pub fn load_spec(arg: &str) -> CliResult<MapSpec> {
    if let Some(name) = arg.strip_prefix("builtin:") {
        return builtin_spec(name).ok_or_else(|| CliError::config(format!("no builtin spec named '{name}'")));
    }
    let text = std::fs::read_to_string(arg).map_err(|e| CliError::config(format!("cannot read spec {arg}: {e}")))?;
    MapSpec::from_json(&text).map_err(|e| CliError::config(format!("invalid spec {arg}: {e}")))
}

fn parse_observable(s: &str) -> CliResult<Observable> {
    observable::parse(s).map_err(|e| CliError::config(format!("observable '{s}': {e}")))
}

fn cone_failure(e: Error) -> CliError {
    match e {
        Error::ConeViolation { .. } | Error::NotOrientable => {
            CliError::config(format!("spec fails cone verification ({e}); pass --skip-verify to override"))
        }
        e => e.into(),
    }
}

fn cache_file(dir: &Path, spec: &MapSpec, n: u32) -> PathBuf {
    dir.join(format!("orbits-{}-n{n}.jsonl", &spec.content_hash()[..16]))
}

struct Ctx<'a> {
    cli: &'a Cli,
}

impl Ctx<'_> {
    /// Parses the spec and, unless skipped, runs the cone check on it.
    fn checked_spec(&self, arg: &str) -> CliResult<(MapSpec, Option<ConeReport>)> {
        let spec = load_spec(arg)?;
        let cone = self.precheck(&spec)?;
        Ok((spec, cone))
    }

    fn precheck(&self, spec: &MapSpec) -> CliResult<Option<ConeReport>> {
        if self.cli.skip_verify {
            return Ok(None);
        }
        verify_cone_condition(spec, DEFAULT_HALFWIDTH, PRECHECK_GRID).map(Some).map_err(cone_failure)
    }

    fn build_db(&self, spec: &MapSpec, n: u32) -> CliResult<OrbitDatabase> {
        let Some(dir) = &self.cli.cache_dir else {
            return Ok(OrbitDatabase::build(spec, n)?);
        };
        for m in n..=DEFAULT_N_CAP {
            let path = cache_file(dir, spec, m);
            if path.exists() {
                match OrbitDatabase::load(&path, Some(spec)) {
                    Ok(db) => return Ok(db),
                    Err(e) => eprintln!("ignoring unreadable cache file {}: {e}", path.display()),
                }
            }
        }
        let db = OrbitDatabase::build(spec, n)?;
        std::fs::create_dir_all(dir)?;
        db.save(&cache_file(dir, spec, n))?;
        Ok(db)
    }

    /// Database covering periods `1..=n`.
    fn database(&self, source: &Source, n: u32) -> CliResult<OrbitDatabase> {
        let expected = source.spec.as_deref().map(load_spec).transpose()?;
        let db = match &source.db {
            Some(path) => OrbitDatabase::load(path, expected.as_ref())?,
            None => self.build_db(expected.as_ref().expect("clap requires --db or --spec"), n)?,
        };
        db.require(n)?;
        self.precheck(db.spec())?;
        Ok(db)
    }

    fn verify(&self, arg: &str, halfwidth: f64, grid: usize) -> CliResult<Report> {
        let spec = load_spec(arg)?;
        let mut rep = Report::new("verify", &spec, json!({"halfwidth": halfwidth, "grid": grid}));
        let model = spec.linear_model();
        match verify_cone_condition(&spec, halfwidth, grid) {
            Ok(cone) => {
                rep.verdict("cone_invariance", cone.passes());
                rep.result = json!({
                    "cone": to_value(&cone),
                    "area_preserving": cone.is_area_preserving(),
                    "linear": {"lambda": model.lambda, "h_top": model.h_top, "det": spec.matrix().det()},
                });
            }
            Err(e @ (Error::ConeViolation { .. } | Error::NotOrientable)) => {
                rep.verdict("cone_invariance", false);
                rep.result = json!({"error": e.to_string()});
            }
            Err(e) => return Err(e.into()),
        }
        Ok(rep)
    }

    fn enumerate(&self, arg: &str, n: u32, out: &Path) -> CliResult<Report> {
        let (spec, _) = self.checked_spec(arg)?;
        let db = OrbitDatabase::build(&spec, n)?;
        db.save(out)?;
        let checks = db.validate()?;
        let mut rep = Report::new("orbits enumerate", &spec, json!({"n": n, "out": out.display().to_string()}));
        for c in &checks {
            rep.verdict(format!("level_{}", c.n), c.ok);
        }
        rep.result = json!({
            "counts": db.counts(),
            "levels": to_value(&checks),
            "manifest": OrbitDatabase::manifest_path(out).display().to_string(),
        });
        Ok(rep)
    }

    fn validate(&self, path: &Path, spec: Option<&str>) -> CliResult<Report> {
        let expected = spec.map(load_spec).transpose()?;
        let db = OrbitDatabase::load(path, expected.as_ref())?;
        let checks = db.validate()?;
        let mut rep = Report::new("orbits validate", db.spec(), json!({"db": path.display().to_string()}));
        for c in &checks {
            rep.verdict(format!("level_{}", c.n), c.ok);
        }
        rep.result = json!({"counts": db.counts(), "levels": to_value(&checks)});
        Ok(rep)
    }

    fn bundles_sample(
        &self,
        arg: &str,
        count: usize,
        tol: f64,
        depth: Option<usize>,
        csv: Option<&Path>,
    ) -> CliResult<Report> {
        let (spec, cone) = self.checked_spec(arg)?;
        let settings = match (depth, cone) {
            (Some(d), _) => BundleSettings::new(d.max(1), tol),
            (None, Some(c)) => BundleSettings::from_cone_report(&c, tol),
            (None, None) => {
                let probe = LiftPoint::new(0.5, 0.5);
                BundleSettings::new(converged_depth(&spec, &probe, tol * 0.1, DEFAULT_HALFWIDTH)? + 2, tol)
            }
        };
        let b = Bundles::new(&spec, settings);
        let pts = sample_points(count, self.cli.seed);
        let mut w = csv.map(csv_writer).transpose()?;
        if let Some(w) = w.as_mut() {
            w.write_record(["x1", "x2", "vs1", "vs2", "vu1", "vu2", "ms", "mu", "residual"])?;
        }
        let cross = |x: &LiftPoint| -> CliResult<f64> {
            let s = b.stable_direction(x)?.vector;
            let u = b.unstable_direction(x)?.vector;
            Ok(s[0] * u[1] - s[1] * u[0])
        };
        let (mut max_res, mut max_det) = (0.0f64, 0.0f64);
        for p in &pts {
            let x = p.as_lift();
            let vs = b.stable_direction(&x)?;
            let vu = b.unstable_direction(&x)?;
            let st = b.stretch_factors(&x)?;
            let res = vs.residual.max(vu.residual);
            // DF maps the (E^s, E^u) frame at x to the frame at Fx, so areas scale by det DF
            let s_x = vs.vector[0] * vu.vector[1] - vs.vector[1] * vu.vector[0];
            let s_fx = cross(&spec.lift(&x))?;
            let defect = (st.ms * st.mu * s_fx / s_x - spec.jacobian(&x).determinant()).abs();
            max_res = max_res.max(res);
            max_det = max_det.max(defect);
            if let Some(w) = w.as_mut() {
                let row = [p.x1(), p.x2(), vs.vector[0], vs.vector[1], vu.vector[0], vu.vector[1], st.ms, st.mu, res];
                w.write_record(row.iter().map(|v| fmt15(*v)))?;
            }
        }
        if let Some(mut w) = w {
            w.flush()?;
        }
        let mut rep = Report::new(
            "bundles sample",
            &spec,
            json!({"count": count, "tol": tol, "depth": settings.depth, "csv": csv.map(|p| p.display().to_string())}),
        );
        rep.verdict("bundle_residual", max_res <= tol);
        rep.verdict("det_identity", max_det <= 1e-8);
        rep.result = json!({"max_residual": max_res, "max_det_defect": max_det, "points": pts.len()});
        Ok(rep)
    }

    fn determinant(
        &self,
        source: &Source,
        weight: &str,
        extended: bool,
        twisted: bool,
        order: usize,
        out: Option<&Path>,
    ) -> CliResult<Report> {
        let w = WeightSpec::from_name(weight)?;
        let w = if twisted { w.twisted() } else { w };
        let db = self.database(source, order as u32)?;
        let d = determinant_series(&db, &w, order, extended)?;
        // full precision: shortest strings that parse back to the same doubles
        let coefficients: Vec<[String; 2]> =
            d.coefficients.iter().map(|c| [format!("{:e}", c.re), format!("{:e}", c.im)]).collect();
        if let Some(p) = out {
            let body = json!({
                "weight": w.name,
                "extended": extended,
                "twisted": twisted,
                "order": order,
                "spec_hash": db.spec().content_hash(),
                "coefficients": coefficients,
            });
            std::fs::write(p, serde_json::to_string_pretty(&body).expect("json") + "\n")?;
        }
        let mut rep = Report::new(
            "spectral determinant",
            db.spec(),
            json!({"weight": w.name, "extended": extended, "twisted": twisted, "N": order,
                   "out": out.map(|p| p.display().to_string())}),
        );
        rep.verdict("finite_coefficients", d.coefficients.iter().all(|c| c.re.is_finite() && c.im.is_finite()));
        rep.result = json!({"coefficients": coefficients});
        Ok(rep)
    }

    fn resonances(&self, source: &Source, order: usize, radius: f64, csv: Option<&Path>) -> CliResult<Report> {
        let db = self.database(source, order as u32)?;
        let r = resonance_report(&db, order, radius)?;
        if let Some(p) = csv {
            let mut w = csv_writer(p)?;
            w.write_record(["re", "im", "modulus", "multiplicity", "stable", "counted"])?;
            for z in &r.zeros {
                w.write_record([
                    fmt15(z.re),
                    fmt15(z.im),
                    fmt15(z.modulus),
                    z.multiplicity.to_string(),
                    z.stable.to_string(),
                    z.counted.to_string(),
                ])?;
            }
            w.flush()?;
        }
        let mut rep = Report::new("spectral resonances", db.spec(), json!({"N": order, "radius": radius}));
        rep.verdict("resonance", r.verdict);
        rep.result = to_value(&r);
        Ok(rep)
    }

    fn check_identity(
        &self,
        kind: IdentityKind,
        source: &Source,
        order: usize,
        twisted: bool,
        tol: Option<f64>,
    ) -> CliResult<Report> {
        let db = self.database(source, order as u32)?;
        let extended = kind == IdentityKind::Extended;
        let r = match (extended, twisted) {
            (false, false) => check_identity_base(&db, order)?,
            (true, false) => check_identity_extended(&db, order)?,
            (e, true) => check_identity_twisted(&db, order, e)?,
        };
        let tol = tol.unwrap_or(if db.spec().is_linear() { 1e-10 } else { 1e-6 });
        let mut rep = Report::new(
            "spectral check-identity",
            db.spec(),
            json!({"kind": r.kind, "N": order, "twisted": twisted, "tol": tol}),
        );
        rep.verdict("identity_residual", r.max_residual <= tol);
        rep.result = to_value(&r);
        Ok(rep)
    }

    fn integrate(&self, arg: &str, x: TorusPoint, t: f64, f: Option<&str>, tol: f64) -> CliResult<Report> {
        let (spec, _) = self.checked_spec(arg)?;
        let end = integrate_flow(&spec, &x, t, tol)?;
        let mut rep = Report::new(
            "horocycle integrate",
            &spec,
            json!({"x": [x.x1(), x.x2()], "T": t, "f": f, "tol": tol}),
        );
        let mut result = json!({"endpoint": to_value(&end)});
        if let Some(s) = f {
            let obs = parse_observable(s)?;
            let h = horocycle_integral(&spec, &x, t, &obs, tol)?;
            rep.verdict("unit_speed", (h.unit_integral - t).abs() <= 1e-9 * t.max(1.0));
            result["integral"] = to_value(&h);
        }
        rep.result = result;
        Ok(rep)
    }

    fn deviation(
        &self,
        arg: &str,
        fs: &[String],
        samples: usize,
        mean_samples: usize,
        grid: (f64, f64, usize),
        t_long: f64,
        csv: Option<&Path>,
    ) -> CliResult<Report> {
        let (spec, _) = self.checked_spec(arg)?;
        const DEFAULT_SUITE: [&str; 3] = ["cos(1,0)", "sin(0,1)", "cos(1,1)+0.5*sin(2,-1)"];
        let names: Vec<&str> =
            if fs.is_empty() { DEFAULT_SUITE.to_vec() } else { fs.iter().map(String::as_str).collect() };
        let obs = names.into_iter().map(parse_observable).collect::<CliResult<Vec<Observable>>>()?;
        let (t_min, t_max, per_decade) = grid;
        if t_max <= t_min || per_decade == 0 || samples == 0 || mean_samples == 0 {
            return Err(CliError::config("need t_min < t_max and positive sample counts"));
        }
        let t_grid = log_grid(t_min, t_max, per_decade);
        let xs = sample_points(samples, self.cli.seed);
        let ms = sample_points(mean_samples, self.cli.seed.wrapping_add(1));
        let means: Vec<Complex64> = reference_means(&spec, &obs, t_long, &ms)?.iter().map(|m| m.value).collect();
        let fits = deviation_exponents(&spec, &obs, &xs, &t_grid, &means)?;
        if let Some(p) = csv {
            let mut w = csv_writer(p)?;
            let mut head = vec!["f".to_string(), "T".into(), "sup_dev".into()];
            head.extend((0..samples).map(|i| format!("x{i}")));
            w.write_record(&head)?;
            for (o, fit) in obs.iter().zip(&fits) {
                for (j, t) in fit.t_grid.iter().enumerate() {
                    let mut row = vec![o.label.clone(), fmt15(*t), fmt15(fit.sup_deviation[j])];
                    row.extend(fit.per_x.iter().map(|v| fmt15(v[j])));
                    w.write_record(&row)?;
                }
            }
            w.flush()?;
        }
        let mut rep = Report::new(
            "horocycle deviation",
            &spec,
            json!({"f": obs.iter().map(|o| o.label.clone()).collect::<Vec<_>>(), "samples": samples,
                   "mean_samples": mean_samples, "t_min": t_min, "t_max": t_max, "per_decade": per_decade,
                   "t_long": t_long, "csv": csv.map(|p| p.display().to_string())}),
        );
        let mut fit_json = Vec::new();
        for (o, fit) in obs.iter().zip(&fits) {
            rep.verdict(format!("deviation[{}]", o.label), fit.passes());
            fit_json.push(json!({
                "f": o.label,
                "theta": fit.theta,
                "stderr": fit.stderr,
                "verdict": to_value(&fit.verdict),
                "mean": to_value(&fit.mean),
                "sup_deviation": fit.sup_deviation,
            }));
        }
        rep.result = json!({"t_grid": t_grid, "fits": fit_json});
        Ok(rep)
    }

    fn coboundary(
        &self,
        arg: &str,
        f: &str,
        t_max: f64,
        samples: usize,
        mean_samples: usize,
        csv: Option<&Path>,
    ) -> CliResult<Report> {
        let (spec, _) = self.checked_spec(arg)?;
        let obs = parse_observable(f)?;
        let xs = sample_points(samples, self.cli.seed);
        let ms = sample_points(mean_samples, self.cli.seed.wrapping_add(1));
        let r = coboundary_boundedness(&spec, &obs, t_max, &xs, &ms)?;
        if let Some(p) = csv {
            let mut w = csv_writer(p)?;
            w.write_record(["T", "running_sup"])?;
            for (t, s) in r.t_grid.iter().zip(&r.running_sup) {
                w.write_record([fmt15(*t), fmt15(*s)])?;
            }
            w.flush()?;
        }
        let mut rep = Report::new(
            "horocycle coboundary",
            &spec,
            json!({"f": obs.label, "t_max": t_max, "samples": samples, "mean_samples": mean_samples}),
        );
        rep.verdict("bounded_integrals", r.verdict);
        rep.result = to_value(&r);
        Ok(rep)
    }

    fn rotation(&self, arg: &str, transversal: f64, iterates: usize, tol: Option<f64>) -> CliResult<Report> {
        let (spec, _) = self.checked_spec(arg)?;
        let r = rotation_number(&spec, transversal, iterates)?;
        let tol = tol.unwrap_or(if spec.is_linear() { 1e-6 } else { 1e-4 });
        let mut rep = Report::new(
            "horocycle rotation",
            &spec,
            json!({"transversal": transversal, "iterates": iterates, "tol": tol}),
        );
        rep.verdict("rotation_residual", r.residual <= tol);
        rep.result = to_value(&r);
        Ok(rep)
    }

    #[allow(clippy::too_many_arguments)]
    fn correlations(
        &self,
        source: &Source,
        n: u32,
        kmax: Option<usize>,
        f1: &str,
        f2: Option<&str>,
        exact: bool,
        csv: Option<&Path>,
    ) -> CliResult<Report> {
        let g1 = parse_observable(f1)?;
        let g2 = parse_observable(f2.unwrap_or(f1))?;
        let freq = g1.max_frequency().max(g2.max_frequency());
        let (spec, series, profile) = if exact {
            let spec = match (&source.spec, &source.db) {
                (Some(s), _) => load_spec(s)?,
                (None, Some(p)) => OrbitDatabase::load(p, None)?.spec().clone(),
                (None, None) => unreachable!("clap requires --db or --spec"),
            };
            self.precheck(&spec)?;
            let s = correlation(&spec, &g1, &g2, kmax.unwrap_or(8), CorrelationMeasure::Lebesgue)?;
            (spec, s, None)
        } else {
            let db = self.database(source, n)?;
            let h = db.spec().linear_model().h_top;
            let k = kmax.unwrap_or_else(|| resolution_limit(n, freq, h));
            let s = correlation_from_db(&db, n, &g1, &g2, k)?;
            let ns: Vec<u32> = (n.saturating_sub(3).max(2)..=n).collect();
            let profile = rate_profile(&db, &ns, &g1, &g2, k);
            (db.spec().clone(), s, Some(profile))
        };
        let h = spec.linear_model().h_top;
        let fit = decay_rate_fit(&series, h)?;
        if let Some(p) = csv {
            let mut w = csv_writer(p)?;
            w.write_record(["k", "re", "im", "abs", "noise_floor"])?;
            for (k, c) in series.values.iter().enumerate() {
                w.write_record([k.to_string(), fmt15(c.re), fmt15(c.im), fmt15(c.norm()), fmt15(series.noise_floor[k])])?;
            }
            w.flush()?;
        }
        let mut rep = Report::new(
            "mme correlations",
            &spec,
            json!({"n": if exact { None } else { Some(n) }, "kmax": series.k_max(), "f1": g1.label, "f2": g2.label,
                   "exact": exact, "csv": csv.map(|p| p.display().to_string())}),
        );
        rep.verdict("decay_rate", fit.verdict != anosov_core::mme::DecayVerdict::Inconsistent);
        rep.result = json!({
            "correlations": to_value(&series),
            "fit": to_value(&fit),
            "rate_profile": profile.map(|p| to_value(&p)),
        });
        Ok(rep)
    }

    fn diagnose(&self, arg: &str, r: f64, halfwidth: f64, grid: usize) -> CliResult<Report> {
        let spec = load_spec(arg)?;
        let cone = verify_cone_condition(&spec, halfwidth, grid).map_err(cone_failure)?;
        let b = rho_bounds(&spec, &cone, r);
        let mut rep = Report::new("diagnose", &spec, json!({"r": r, "halfwidth": halfwidth, "grid": grid}));
        rep.verdict("certified", b.certified);
        rep.verdict("smoothness_above_r1", r > b.r1_bound);
        rep.result = json!({"bounds": to_value(&b), "cone": to_value(&cone)});
        Ok(rep)
    }
}
