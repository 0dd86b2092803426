use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use reeblab::blowup::{build_tubular_frame, rotation_number, FrameOptions};
use reeblab::dynamics::{assemble_orbit, find_periodic_orbits, seed_points, OrbitSearchOptions, PeriodicOrbit};
use reeblab::entropy::{entropy_estimate, CatMapSuspension, ReebSystem, CAT_BOX_CENTER};
use reeblab::fixtures::{test_functions, uniform_fiber_measure, HOPF_DISK_JSON};
use reeblab::geometry::{
    helicity, liouville_average_mc, make_model, verify_contact, ContactManifold, HelicityQuadrature, ModelKind, Vec4,
};
use reeblab::liftaxiom::{build_lift, verify_lift};
use reeblab::measures::{
    action_linking_report, boundary_shell_masses, liouville_target, restrict_to_open, weakstar_report, BirkhoffSegment,
    CohomologyClass, Link, Observable, SeifertMesh, WeakStarReport, WeightedOrbitMeasure,
};
use reeblab::sfs::{build_pr_map, check_criterion, search_positive_class, section_diagnostics, MeasureSample, Verdict};
use reeblab::Error;
use serde::Serialize;
use serde_json::json;

use crate::config::*;
use crate::output::Artifact;
use crate::CliError;

/// Closing residual above which a user-supplied orbit is rejected.
const CLOSING_TOL: f64 = 1e-6;

pub enum Status {
    Ok,
    Inconclusive,
    /// Reports were written but a verification inside them failed.
    Failed(String),
}

pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub status: Status,
    pub summary: String,
}

impl Outcome {
    fn ok(artifacts: Vec<Artifact>, summary: String) -> Self {
        Self {
            artifacts,
            status: Status::Ok,
            summary,
        }
    }
}

pub struct Context<'a> {
    pub config: &'a RunConfig,
    pub seed: Option<u64>,
}

impl Context<'_> {
    fn params<T: for<'de> serde::Deserialize<'de>>(&self) -> Result<T, CliError> {
        self.config
            .params()
            .map_err(|e| CliError::schema(format!("params: {e}")))
    }

    fn seed(&self) -> u64 {
        self.seed.expect("seed checked before dispatch")
    }

    fn model(&self) -> Result<ContactManifold, CliError> {
        Ok(make_model(&self.config.model())?)
    }
}

pub fn dispatch(ctx: &Context) -> Result<Outcome, CliError> {
    match ctx.config.command {
        Command::Model => model(ctx),
        Command::Orbits => orbits(ctx),
        Command::Rotnum => rotnum(ctx),
        Command::Linking => linking(ctx),
        Command::Liouville => liouville(ctx),
        Command::Criterion => criterion(ctx),
        Command::Entropy => entropy(ctx),
        Command::Lift => lift(ctx),
    }
}

fn require_round_sphere(m: &ContactManifold, what: &str) -> Result<(), CliError> {
    if m.kind() != ModelKind::RoundSphere {
        return Err(Error::Precondition(format!(
            "{what} uses Hopf-fiber measures and needs the round_sphere model"
        ))
        .into());
    }
    Ok(())
}

/// Projects the base point, assembles the orbit and checks that it closes.
fn user_orbit(
    m: &ContactManifold,
    spec: &OrbitSpec,
    opts: &OrbitSearchOptions,
) -> Result<(PeriodicOrbit, f64), CliError> {
    if !m.is_closed() {
        return Err(Error::Precondition("orbits are only assembled on closed models".into()).into());
    }
    let mut x = Vec4::from(spec.base_point);
    if !(x.norm() > 0.0) || !(spec.period > 0.0) {
        return Err(Error::InvalidParameter("orbit needs a nonzero base point and a positive period".into()).into());
    }
    m.project4(&mut x);
    let orbit = assemble_orbit(m, &x, spec.period, opts)?;
    let closing = orbit.closing_error(m, opts.tol)?;
    if closing > CLOSING_TOL {
        return Err(Error::Precondition(format!(
            "point {:?} with period {} does not close (residual {closing:.3e})",
            spec.base_point, spec.period
        ))
        .into());
    }
    Ok((orbit, closing))
}

fn model(ctx: &Context) -> Result<Outcome, CliError> {
    let p: ModelParams = ctx.params()?;
    let m = ctx.model()?;
    let contact = verify_contact(&m, p.n_samples, p.tol, ctx.seed())?;
    let vol = if m.is_closed() {
        Some(helicity(
            &m,
            HelicityQuadrature {
                pairs: p.helicity_pairs,
                seed: ctx.seed(),
            },
        )?)
    } else {
        None
    };
    let summary = format!("contact check {}", if contact.pass { "passed" } else { "failed" });
    let status = if contact.pass {
        Status::Ok
    } else {
        Status::Failed(format!("contact verification exceeded tolerance {:e}", p.tol))
    };
    let report = json!({
        "model": m.descriptor(),
        "ambient_dim": m.ambient_dim(),
        "closed": m.is_closed(),
        "contact": contact,
        "helicity": vol,
    });
    Ok(Outcome {
        artifacts: vec![Artifact::json("model.json", &report)],
        status,
        summary,
    })
}

fn orbits(ctx: &Context) -> Result<Outcome, CliError> {
    let p: OrbitsParams = ctx.params()?;
    let m = ctx.model()?;
    let seeds = seed_points(&m, p.n_seeds, ctx.seed())?;
    let found = find_periodic_orbits(&m, &seeds, p.t_max, &p.search)?;
    let records: Vec<_> = found.iter().map(|o| o.record()).collect();
    let report = json!({
        "n_seeds": p.n_seeds,
        "t_max": p.t_max,
        "count": records.len(),
        "orbits": records,
    });
    let summary = format!("{} orbits with period <= {}", records.len(), p.t_max);
    Ok(Outcome::ok(vec![Artifact::json("orbits.json", &report)], summary))
}

#[derive(Serialize)]
struct RotationEntry {
    orbit: usize,
    period: f64,
    p: f64,
    q: f64,
    rho: f64,
    slope: f64,
    converged: bool,
    window_gap: f64,
    horizon: f64,
}

fn rotnum(ctx: &Context) -> Result<Outcome, CliError> {
    let p: RotnumParams = ctx.params()?;
    let m = ctx.model()?;
    if p.orbits.is_empty() || p.classes.is_empty() {
        return Err(Error::InvalidParameter("rotnum needs at least one orbit and one class".into()).into());
    }
    let mut orbits = Vec::new();
    let mut rows = Vec::new();
    for (i, spec) in p.orbits.iter().enumerate() {
        let (orbit, closing) = user_orbit(&m, spec, &p.search)?;
        let frame = build_tubular_frame(&m, &orbit, p.frame)?;
        for &[pp, qq] in &p.classes {
            let r = rotation_number(&frame, pp, qq, p.rotation)?;
            rows.push(RotationEntry {
                orbit: i,
                period: orbit.period,
                p: pp,
                q: qq,
                rho: r.rho,
                slope: r.slope,
                converged: r.converged,
                window_gap: r.window_gap,
                horizon: r.horizon,
            });
        }
        orbits.push(json!({
            "orbit": orbit.record(),
            "closing_error": closing,
            "frame": frame.check(&m, 64),
        }));
    }
    let converged = rows.iter().filter(|r| r.converged).count();
    let summary = format!("{} rotation numbers, {converged} converged", rows.len());
    let report = json!({ "orbits": orbits, "rows": rows });
    Ok(Outcome::ok(vec![Artifact::json("rotation.json", &report)], summary))
}

fn fiber_sequence(
    m: &ContactManifold,
    n_list: &[usize],
    n_samples: usize,
) -> Result<Vec<WeightedOrbitMeasure>, CliError> {
    if n_list.is_empty() {
        return Err(Error::InvalidParameter("n_list is empty".into()).into());
    }
    Ok(n_list
        .iter()
        .map(|&n| uniform_fiber_measure(m, n, n_samples))
        .collect::<reeblab::Result<Vec<_>>>()?)
}

fn linking(ctx: &Context) -> Result<Outcome, CliError> {
    let p: LinkingParams = ctx.params()?;
    let m = ctx.model()?;
    require_round_sphere(&m, "linking")?;
    let mesh = match &p.mesh {
        Some(path) => SeifertMesh::load(path)?,
        None => SeifertMesh::from_json(HOPF_DISK_JSON)?,
    };
    let seq = fiber_sequence(&m, &p.n_list, p.n_samples)?;
    let vol = helicity(
        &m,
        HelicityQuadrature {
            pairs: p.helicity_pairs,
            seed: ctx.seed(),
        },
    )?;
    let r = action_linking_report(&m, &seq, &mesh, &p.link_periods, vol.value, &p.crossing)?;
    let summary = format!(
        "final gap {:.3e}, surface gap {:.3e}",
        r.final_gap,
        (r.surface_integral - r.target).abs()
    );
    let report = json!({
        "target": r.target,
        "surface_integral": r.surface_integral,
        "surface_gap": (r.surface_integral - r.target).abs(),
        "helicity": vol,
        "final_gap": r.final_gap,
        "rows": r.rows,
    });
    Ok(Outcome::ok(
        vec![
            Artifact::Csv {
                name: "linking.csv",
                body: r.to_csv(),
            },
            Artifact::json("linking.json", &report),
        ],
        summary,
    ))
}

fn weakstar_csv(out: &mut String, set: &str, r: &WeakStarReport) {
    for row in &r.rows {
        out.push_str(&format!(
            "{set},{},{},{:.12e},{:.12e},{:.12e}\n",
            row.n, row.function, row.value, row.target, row.error
        ));
    }
}

fn liouville(ctx: &Context) -> Result<Outcome, CliError> {
    let p: LiouvilleParams = ctx.params()?;
    let m = ctx.model()?;
    require_round_sphere(&m, "liouville")?;
    let seq = fiber_sequence(&m, &p.n_list, p.n_samples)?;
    let target = liouville_target(&m, p.grid);
    let full = weakstar_report(&seq, &test_functions(), &target)?;
    let mut csv = String::from("set,n,function,value,target,error\n");
    weakstar_csv(&mut csv, "all", &full);
    let mut summary = format!("max error {:.3e}", full.max_error.last().map_or(f64::NAN, |e| e.1));
    let mut report = json!({
        "max_error": full.max_error,
        "non_increasing": full.non_increasing(),
    });
    if let Some(o) = &p.open_set {
        if o.coordinate > 3 {
            return Err(Error::InvalidParameter(format!("coordinate {} out of range 0..4", o.coordinate)).into());
        }
        let (c, thr) = (o.coordinate, o.threshold);
        let phi: Observable = Arc::new(move |x: &Vec4| x[c] - thr);
        let shells = boundary_shell_masses(&m, &phi, &o.shell_deltas, p.grid)?;
        let functions: Vec<(String, Observable)> = test_functions()
            .into_iter()
            .map(|(name, f)| (name, restrict_to_open(f, phi.clone())))
            .collect();
        let seed = ctx.seed();
        let mc = |f: &Observable| Ok(liouville_average_mc(&m, |x| f(x), o.mc_samples, seed)?.0);
        let open = weakstar_report(&seq, &functions, &mc)?;
        weakstar_csv(&mut csv, "open", &open);
        summary.push_str(&format!(
            ", open set {:.3e}",
            open.max_error.last().map_or(f64::NAN, |e| e.1)
        ));
        report["open_set"] = json!({
            "coordinate": c,
            "threshold": thr,
            "max_error": open.max_error,
            "non_increasing": open.non_increasing(),
            "shell_deltas": o.shell_deltas,
            "shell_masses": shells,
        });
    }
    Ok(Outcome::ok(
        vec![
            Artifact::Csv {
                name: "liouville.csv",
                body: csv,
            },
            Artifact::json("liouville.json", &report),
        ],
        summary,
    ))
}

fn criterion(ctx: &Context) -> Result<Outcome, CliError> {
    let p: CriterionParams = ctx.params()?;
    let m = ctx.model()?;
    if p.link.is_empty() {
        return Err(Error::InvalidParameter("criterion needs at least one link component".into()).into());
    }
    let orbit_opts = OrbitSearchOptions {
        n_samples: p.orbit_samples,
        ..OrbitSearchOptions::default()
    };
    let components = p
        .link
        .iter()
        .map(|s| user_orbit(&m, s, &orbit_opts).map(|(o, _)| o))
        .collect::<Result<Vec<_>, _>>()?;
    let link = Arc::new(Link::new(&m, components, FrameOptions::default())?);
    let y = match &p.coeffs {
        Some(c) => CohomologyClass::new(link, c.clone())?,
        None => CohomologyClass::linking_dual(link, 0)?,
    };

    let mut samples = Vec::new();
    if p.n_fibers > 0 {
        require_round_sphere(&m, "n_fibers")?;
        let mu = uniform_fiber_measure(&m, p.n_fibers, p.orbit_samples)?;
        samples.extend(
            mu.atoms()
                .iter()
                .map(|(o, _)| MeasureSample::Orbits(WeightedOrbitMeasure::single(o.clone()))),
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed());
    for i in 0..p.n_segments {
        let start = m.sample_point4(&mut rng);
        let duration = p.segment_duration + i as f64 * p.segment_step;
        samples.push(MeasureSample::Segment(BirkhoffSegment::new(
            &m,
            start,
            duration,
            p.segment_tol,
        )?));
    }

    let report = check_criterion(&m, &y, &samples, &p.options)?;
    let mut summary = format!(
        "verdict {:?}, min measure value {:.6}",
        report.verdict, report.min_measure_value
    );
    let status = if report.verdict == Verdict::Inconclusive {
        Status::Inconclusive
    } else {
        Status::Ok
    };
    let mut artifacts = vec![Artifact::json(
        "criterion.json",
        &json!({
            "n_orbit_measures": p.n_fibers,
            "n_segments": p.n_segments,
            "report": report,
        }),
    )];
    if p.search {
        let s = search_positive_class(&m, &[y.clone(), y.scaled(-1.0)], &samples, &p.options)?;
        summary.push_str(&format!(", LP t* {:.6}", s.t_star));
        artifacts.push(Artifact::json("lp_instance.json", &s));
    }
    if let Some(sec) = &p.section {
        let c = build_pr_map(&m, &y, Vec4::from(sec.basepoint))?;
        let pts: Vec<Vec4> = (0..sec.n_points).map(|_| m.sample_point4(&mut rng)).collect();
        let d = section_diagnostics(&m, &c, &pts, &sec.options)?;
        summary.push_str(&format!(", min eta(X) {:.6}", d.min_eta_x));
        artifacts.push(Artifact::json("section.json", &d));
    }
    Ok(Outcome {
        artifacts,
        status,
        summary,
    })
}

fn entropy(ctx: &Context) -> Result<Outcome, CliError> {
    let p: EntropyParams = ctx.params()?;
    let seed = ctx.seed();
    let opts = reeblab::entropy::EntropyOptions {
        seed,
        ..p.options.clone()
    };
    let (est, reference) = match p.system {
        EntropySystemKind::Reeb => {
            let m = ctx.model()?;
            if !m.is_closed() {
                return Err(Error::Precondition("entropy of a Reeb flow needs a closed model".into()).into());
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cloud: Vec<Vec4> = (0..p.cloud_size).map(|_| m.sample_point4(&mut rng)).collect();
            let sys = ReebSystem { m, tol: p.tol };
            (entropy_estimate(&sys, &cloud, &p.t_list, &p.eps_list, &opts)?, None)
        }
        EntropySystemKind::CatMap => {
            let sys = CatMapSuspension::new();
            let cloud = match p.box_delta {
                Some(d) => sys.box_cloud(p.cloud_size, d, CAT_BOX_CENTER, seed),
                None => sys.uniform_cloud(p.cloud_size, seed),
            };
            (
                entropy_estimate(&sys, &cloud, &p.t_list, &p.eps_list, &opts)?,
                Some(sys.entropy()),
            )
        }
    };
    let summary = format!("h_estimate {:.6} at eps {}", est.h_estimate, est.eps_used);
    let report = json!({
        "system": p.system,
        "h_estimate": est.h_estimate,
        "eps_used": est.eps_used,
        "reference_entropy": reference,
        "slopes": est.slopes,
        "dt": est.dt,
        "cloud_size": est.cloud_size,
        "label": est.label,
    });
    Ok(Outcome::ok(
        vec![
            Artifact::Csv {
                name: "entropy.csv",
                body: est.to_csv(),
            },
            Artifact::json("entropy.json", &report),
        ],
        summary,
    ))
}

fn lift(ctx: &Context) -> Result<Outcome, CliError> {
    let p: LiftParams = ctx.params()?;
    let m = ctx.model()?;
    if m.kind() != ModelKind::LiftBox {
        return Err(Error::Precondition("lift runs on the lift_box model".into()).into());
    }
    let pert = build_lift(p.z0, p.eps)?;
    let r = verify_lift(&pert, &p.check)?;
    let summary = format!("endpoint error {:.3e}, K {:.4}", r.endpoint_error, r.k);
    let report = json!({ "perturbation": pert, "report": r });
    Ok(Outcome::ok(vec![Artifact::json("lift.json", &report)], summary))
}
