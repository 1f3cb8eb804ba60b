//! The `check`, `invariants`, `cover`, `normal-form` and `moser` commands.

use bslice_core::actions::{
    check_axioms, check_invariance, check_transversality, isotropy_decomposition, product_decomposition,
    GroupAction, GroupDescriptor,
};
use bslice_core::bcalc::is_b_symplectic;
use bslice_core::expr::{parse, Chart};
use bslice_core::moser::{
    certify_with, equivariance_defect, integrate_flow, relative_primitive, symmetrize, Certification, FlowResult,
    MoserError, MoserProblem, PrimitiveDecomposition,
};
use bslice_core::slice::{model_for_orbit, Variant};
use bslice_core::torus::{
    check_modular_contract, lift_form, modular_period, quotient_form, trivializing_cover, CollarModel,
};

use crate::report::*;
use crate::scenario::{Scenario, Task};
use crate::Error;

/// Samples for the modular vector field contract.
pub const CONTRACT_SAMPLES: usize = 128;
pub const CONTRACT_TOL: f64 = 1e-10;
/// Group element and point pairs for the equivariance check.
pub const EQUIVARIANCE_PAIRS: usize = 50;
pub const EQUIVARIANCE_TOL: f64 = 1e-6;

/// Command line overrides.
#[derive(Clone, Debug, Default)]
pub struct Options {
    pub seed: Option<u64>,
    pub steps: Option<usize>,
    /// `name=value` assignments replacing the scenario's anchors.
    pub anchor: Option<String>,
}

/// Parses `t=1/2,x=0.3` into a point on `a = 0`; unnamed coordinates are 0.
pub fn parse_anchor(chart: &Chart, text: &str) -> Result<Vec<f64>, Error> {
    let mut p = vec![0.0; chart.dim()];
    let empty = Chart::new(vec![]).expect("empty chart");
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item.split_once('=').ok_or_else(|| Error::validation(format!("--anchor: expected k=v, got `{item}`")))?;
        let i = chart
            .index_of(k.trim())
            .ok_or_else(|| Error::validation(format!("--anchor: unknown coordinate `{}`", k.trim())))?;
        p[i] = parse(v.trim(), &empty)?.eval(&[])?;
    }
    if chart.defining().is_some_and(|a| p[a] != 0.0) || !chart.contains(&p) {
        return Err(Error::validation(format!("--anchor {p:?} is not a point of Z in the chart")));
    }
    Ok(p)
}

struct Ctx<'a> {
    scenario: &'a Scenario,
    seed: u64,
    steps: usize,
    anchors: Vec<(String, Vec<f64>)>,
}

impl Ctx<'_> {
    fn collar(&self) -> Result<&CollarModel, Error> {
        self.scenario
            .collar
            .as_ref()
            .map(|(_, c)| c)
            .ok_or_else(|| Error::validation("scenario declares no [torus]"))
    }

    fn action(&self) -> Result<&GroupAction, Error> {
        self.scenario
            .main_action()
            .map(|(_, a)| a)
            .ok_or_else(|| Error::validation("scenario needs one [action] (or one named `action`)"))
    }
}

/// Runs `tasks` in order; after a failed check the remaining tasks are skipped.
pub fn run_task(scenario: &Scenario, command: &str, tasks: &[Task], opts: &Options) -> Result<Report, Error> {
    let anchors = match &opts.anchor {
        Some(text) => vec![("cli".to_string(), parse_anchor(&scenario.chart, text)?)],
        None => scenario.anchors.clone(),
    };
    let ctx = Ctx {
        scenario,
        seed: opts.seed.unwrap_or(scenario.seed),
        steps: opts.steps.unwrap_or(scenario.steps),
        anchors,
    };
    let mut records = Vec::new();
    let mut status = Status::Pass;
    for task in tasks {
        let record = match task {
            Task::Check => TaskRecord::Check(check(&ctx)?),
            Task::Invariants => TaskRecord::Invariants(invariants(&ctx)?),
            Task::Cover => TaskRecord::Cover(cover(&ctx)?),
            Task::NormalForm => TaskRecord::NormalForm(normal_form(&ctx, scenario.certify)?),
            Task::Moser => TaskRecord::Moser(moser(&ctx)?),
        };
        status = status.combine(record.status());
        records.push(record);
        if *task == Task::Check && status == Status::Fail {
            break;
        }
    }
    Ok(Report {
        schema: SCHEMA,
        toolkit: TOOLKIT,
        version: env!("CARGO_PKG_VERSION"),
        scenario: scenario.name.clone(),
        seed: ctx.seed,
        command: command.to_string(),
        status,
        tasks: records,
    })
}

fn check(ctx: &Ctx) -> Result<CheckRecord, Error> {
    let s = ctx.scenario;
    let seed = ctx.seed;
    let mut forms = Vec::new();
    for (name, w) in &s.forms {
        let r = is_b_symplectic(w, seed)?;
        forms.push(FormCheck {
            name: name.clone(),
            closed: r.closed,
            nondegenerate: r.nondegenerate,
            min_abs_det: r.min_abs_det,
            pfaffian: r.pfaffian.map(|p| p.named(&*s.chart).to_string()),
            witness: r.witness.map(|w| WitnessRecord { point: w.point, reason: w.reason }),
        });
    }
    let collar = match &s.collar {
        Some((form, c)) => {
            let r = check_modular_contract(c, CONTRACT_SAMPLES, seed)?;
            Some(CollarCheck {
                form: form.clone(),
                c: rational(c.modular_coefficient()),
                modular_period: rational(modular_period(c)),
                monodromy_order: c.torus().order(),
                samples: r.samples,
                alpha_error: r.alpha_error,
                beta_error: r.beta_error,
                tolerance: CONTRACT_TOL,
                passed: r.samples == CONTRACT_SAMPLES && r.passed(CONTRACT_TOL),
            })
        }
        None => None,
    };
    let main = s.main_action().map(|(n, _)| n.clone());
    let mut actions = Vec::new();
    for (name, action) in &s.actions {
        let collar_model = s.collar.as_ref().map(|(_, c)| c);
        let axioms = check_axioms(action, collar_model, seed)?;
        let targets: Vec<&String> = match &s.collar {
            Some((form, _)) => vec![form],
            None => s.forms.keys().collect(),
        };
        let mut invariant = true;
        let mut failures = Vec::new();
        for f in &targets {
            let r = check_invariance(action, &s.forms[*f], seed)?;
            invariant &= r.invariant;
            failures.extend(r.failures.into_iter().map(|f| InvarianceFailureRecord {
                element: f.element,
                label: f.label,
                point: f.point,
                max_diff: f.max_diff,
            }));
        }
        let transversality = match collar_model {
            Some(c) if main.as_ref() == Some(name) && !matches!(action.group(), GroupDescriptor::Cyclic(_)) => {
                let r = check_transversality(action, c, seed)?;
                Some(TransversalityRecord {
                    transverse: r.transverse,
                    circle_param: r.circle_param,
                    declared_degree: r.declared_degree,
                    measured_degree: r.measured_degree,
                    min_abs_alpha: r.min_abs_alpha,
                    witness: r.witness,
                })
            }
            _ => None,
        };
        actions.push(ActionCheck {
            name: name.clone(),
            group: action.group().name(),
            axioms: axioms.passed(),
            axiom_witness: axioms.witness,
            invariance_forms: targets.into_iter().cloned().collect(),
            invariant,
            invariance_failures: failures,
            transversality,
        });
    }
    let passed = forms.iter().all(|f| f.closed && f.nondegenerate)
        && collar.as_ref().is_none_or(|c| c.passed)
        && actions
            .iter()
            .all(|a| a.axioms && a.invariant && a.transversality.as_ref().is_none_or(|t| t.transverse));
    Ok(CheckRecord { forms, collar, actions, passed })
}

fn invariants(ctx: &Ctx) -> Result<InvariantsRecord, Error> {
    let collar = ctx.collar()?;
    let action = ctx.action()?;
    let seed = ctx.seed;
    let cover = trivializing_cover(collar, action, seed)?;
    let dec = product_decomposition(action, collar, &cover, seed)?;
    let period = modular_period(collar);
    let c_prime = period * bslice_core::expr::Rational::from_integer(cover.k() as i64);
    let mut isotropy = Vec::new();
    for (name, p) in &ctx.anchors {
        let iso = isotropy_decomposition(action, collar, &cover, &dec, p)?;
        isotropy.push(IsotropyRecord {
            anchor: name.clone(),
            point: p.clone(),
            l: iso.l,
            h_z: iso.h_z.name(),
            h_z_dim: iso.h_z_dim,
            m_dim: iso.m_dim,
            v_dim: iso.v_dim,
            m0: iso.m0,
            sigma_v: rows(&iso.sigma_v),
            orbit_scale: iso.orbit_scale,
            model_period: rational(c_prime / bslice_core::expr::Rational::from_integer(iso.l as i64)),
        });
    }
    Ok(InvariantsRecord {
        c: rational(collar.modular_coefficient()),
        modular_period: rational(period),
        k: cover.k(),
        degree: cover.degree(),
        c_prime: rational(c_prime),
        decomposition: DecompositionRecord {
            h: dec.h.name(),
            case: format!("{:?}", dec.case).to_lowercase(),
            circle_param: dec.circle_param,
            h_prime: dec.h_prime.map(|g| g.params()),
        },
        isotropy,
    })
}

fn cover(ctx: &Ctx) -> Result<CoverRecord, Error> {
    let collar = ctx.collar()?;
    let action = ctx.action()?;
    let seed = ctx.seed;
    let cover = trivializing_cover(collar, action, seed)?;
    let lifted = lift_form(&cover, collar.omega())?;
    let lifted_collar = cover.lift_collar(collar, seed)?;
    let back = quotient_form(&cover, &lifted, seed)?;
    let k = bslice_core::expr::Rational::from_integer(cover.k() as i64);
    Ok(CoverRecord {
        k: cover.k(),
        degree: cover.degree(),
        circle_param: cover.circle_param(),
        deck_generator: MapRecord::of(cover.deck(1)),
        sigma_1: MapRecord::of(cover.sigma(1)),
        lifted_form: lifted.render_terms(),
        lifted_modular_period: rational(modular_period(&lifted_collar)),
        expected_period: rational(modular_period(collar) * k),
        roundtrip: back.equivalent(collar.omega(), seed)?,
    })
}

/// [`certify_with`] with the samples split across threads. Chunks are merged
/// in sample order, so the result does not depend on the thread count.
pub fn certify_parallel(
    p: &MoserProblem,
    decomp: &PrimitiveDecomposition,
    steps: usize,
    samples: usize,
    seed: u64,
) -> Result<(Certification, FlowResult), MoserError> {
    let runner = |pts: &[Vec<f64>]| -> Result<FlowResult, MoserError> {
        if pts.is_empty() {
            return Ok(FlowResult { steps, ..Default::default() });
        }
        let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(pts.len());
        let chunk = pts.len().div_ceil(threads);
        let parts: Vec<Result<FlowResult, MoserError>> = std::thread::scope(|s| {
            let handles: Vec<_> =
                pts.chunks(chunk).map(|c| s.spawn(move || integrate_flow(p, decomp, steps, c))).collect();
            handles.into_iter().map(|h| h.join().expect("flow thread panicked")).collect()
        });
        Ok(FlowResult::merge(parts.into_iter().collect::<Result<_, _>>()?, steps))
    };
    certify_with(p, decomp, steps, samples, seed, &runner)
}

fn certification_record(
    p: &MoserProblem,
    decomp: &PrimitiveDecomposition,
    cert: &Certification,
) -> CertificationRecord {
    CertificationRecord {
        anchor_mismatch: p.anchor_mismatch,
        g: decomp.g.named(&**p.chart()).to_string(),
        radius: cert.radius,
        steps: cert.steps,
        samples: cert.samples,
        residual: cert.residual,
        max_solve_residual: cert.max_solve_residual,
        anchor_displacement: cert.anchor_displacement,
        threshold: cert.threshold,
        passed: cert.passed,
    }
}

fn normal_form(ctx: &Ctx, certify: bool) -> Result<NormalFormRecord, Error> {
    let collar = ctx.collar()?;
    let action = ctx.action()?;
    let seed = ctx.seed;
    let mut orbits = Vec::new();
    for (name, z) in &ctx.anchors {
        let om = model_for_orbit(collar, action, z, seed)?;
        let m = &om.model;
        let chart = &m.chart;
        let certification = if certify {
            let task = &om.task;
            let p = MoserProblem::new(task.model_pullback.clone(), task.lifted.clone(), task.anchor.clone(), seed)?;
            let decomp = relative_primitive(&p, seed)?;
            let (cert, _) = certify_parallel(&p, &decomp, ctx.steps, ctx.scenario.samples, seed)?;
            Some(certification_record(&p, &decomp, &cert))
        } else {
            None
        };
        orbits.push(OrbitRecord {
            anchor: name.clone(),
            point: z.clone(),
            model: ModelRecord {
                c: rational(m.c),
                k: m.k,
                l: m.l,
                c_prime: rational(m.c_prime),
                model_period: rational(m.model_period),
                quotient_period: rational(modular_period(&m.quotient)),
                variant: match m.variant {
                    Variant::One => "one".into(),
                    Variant::Two => "two".into(),
                },
                h: m.entry.h.name(),
                h_z: m.entry.h_z.name(),
                m_dim: m.entry.m_dim,
                v_dim: m.entry.v_dim,
                orbit_scale: rational(m.entry.orbit_scale),
                chart: (0..chart.dim()).map(|i| chart.name(i).to_string()).collect(),
                omega_tilde0: m.omega_tilde0.render_terms(),
                deck_generator: MapRecord::of(&m.deck_generator),
                sigma: rows(&m.sigma),
                h_shift: m.h_shift.iter().map(|q| rational(*q)).collect(),
            },
            identification: MapRecord::of(&om.task.identification),
            lifted_form: om.task.lifted.render_terms(),
            model_pullback: om.task.model_pullback.render_terms(),
            certification,
        });
    }
    Ok(NormalFormRecord { orbits })
}

fn moser(ctx: &Ctx) -> Result<MoserRecord, Error> {
    let s = ctx.scenario;
    let spec = s.moser.as_ref().ok_or_else(|| Error::validation("scenario declares no [moser] section"))?;
    let seed = ctx.seed;
    let anchor = match &ctx.anchors[..] {
        [(n, p)] if n == "cli" => p.clone(),
        _ => s.anchor(&spec.anchor).cloned().expect("anchor checked at parse time"),
    };
    let mut p = MoserProblem::new(s.forms[&spec.omega0].clone(), s.forms[&spec.omega1].clone(), anchor, seed)?;
    if let Some(orbit) = &spec.orbit {
        p = p.with_orbit_coords(orbit.clone());
    }
    let symmetry = spec.symmetry.as_ref().map(|n| s.actions[n].clone());
    if let Some(sym) = &symmetry {
        p = p.with_symmetry(sym.clone(), seed)?;
    }
    let mut decomp = relative_primitive(&p, seed)?;
    if let Some(sym) = &symmetry {
        decomp = symmetrize(&p, &decomp, sym, seed)?;
    }
    let (cert, _) = certify_parallel(&p, &decomp, ctx.steps, s.samples, seed)?;
    let defect = match &symmetry {
        Some(sym) => Some(equivariance_defect(&p, &decomp, sym, ctx.steps, EQUIVARIANCE_PAIRS, cert.radius, seed)?),
        None => None,
    };
    Ok(MoserRecord {
        omega0: spec.omega0.clone(),
        omega1: spec.omega1.clone(),
        anchor: spec.anchor.clone(),
        orbit_coords: p.orbit_coords.iter().map(|&i| s.chart.name(i).to_string()).collect(),
        symmetry: spec.symmetry.clone(),
        certification: certification_record(&p, &decomp, &cert),
        equivariance_defect: defect,
        equivariance_tolerance: EQUIVARIANCE_TOL,
    })
}
