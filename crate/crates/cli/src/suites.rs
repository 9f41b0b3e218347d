//! Verification suites. Each suite turns core checks into report records; a
//! check that errors is recorded as failed rather than aborting the run.

use noether_core::integrate::{drift, integrate, max_abs, tangent_determinant};
use noether_core::noether::{
    build_charge, constant_offset_residual, conservation_check, converse_transform, covariance_excess,
    verify_consistency,
};
use noether_core::phasespace::{make_state, sample_states};
use noether_core::poisson::{bracket_tables, closure_check, jacobi_residual};
use noether_core::qfock::{
    self, block_distance, correspondence_residual, heisenberg, heisenberg_rate, ladder_ops, schrodinger_charge,
    spectrum_action_report, unitarity_residual, FockSpaceCtx,
};
use noether_core::qwave::{self, MomentumGrid, OverlapReading};
use noether_core::{IntegratorKind, Observable, PhaseState, Trajectory, Transformation};
use serde_json::{json, Value};

use crate::config::{RunConfig, Suite};
use crate::registry::Model;
use crate::report::Record;

pub const STATE_BOX: f64 = 2.0;

/// Everything a suite needs: the configuration, the built model and the sample states.
pub struct Ctx<'a> {
    pub cfg: &'a RunConfig,
    pub model: &'a Model,
    pub states: Vec<PhaseState>,
}

impl<'a> Ctx<'a> {
    pub fn new(cfg: &'a RunConfig, model: &'a Model) -> Self {
        let states = sample_states(model.dim(), cfg.samples, cfg.seed, STATE_BOX);
        Ctx { cfg, model, states }
    }

    fn inputs(&self, extra: Value) -> Value {
        json!({
            "model": self.cfg.model,
            "seed": self.cfg.seed,
            "samples": self.cfg.samples,
            "check": extra,
        })
    }

    fn tol(&self, key: &str, default: f64) -> f64 {
        self.cfg.tolerance(key, default)
    }
}

/// Artifacts produced alongside records (file name, contents).
pub type Artifact = (String, String);

pub fn run_suite(suite: Suite, ctx: &Ctx) -> (Vec<Record>, Vec<Artifact>) {
    match suite {
        Suite::Consistency => (consistency(ctx), vec![]),
        Suite::Conservation => (conservation(ctx), vec![]),
        Suite::Converse => (converse(ctx), vec![]),
        Suite::Algebra => (algebra(ctx), vec![]),
        Suite::Trajectory => trajectory(ctx),
        Suite::Qfock => (fock(ctx), vec![]),
        Suite::Qwave => wave(ctx),
    }
}

const LAMBDAS: [f64; 3] = [0.0, 0.5, 1.0];

/// Sampled transformation fields need nested finite differences; they are
/// checked on this many of the sample states.
pub const SAMPLED_STATES: usize = 20;

fn consistency_record(ctx: &Ctx, id: String, tr: &Transformation, inputs: Value, tol: f64) -> Record {
    let exact = tr.phi.iter().chain(&tr.chi).chain([&tr.surface]).all(Observable::is_exact);
    let states = if exact { &ctx.states[..] } else { &ctx.states[..ctx.states.len().min(SAMPLED_STATES)] };
    let inputs = ctx.inputs(json!({"states": states.len(), "check": inputs}));
    match verify_consistency(tr, ctx.model.system(), states, tol) {
        Ok(r) => Record::new(id, "noether.consistency", &inputs, r.max_residual(), tol).with_detail(json!({
            "residual_q": r.residual_q,
            "residual_p": r.residual_p,
            "residual_t": r.residual_t,
        })),
        Err(e) => Record::errored(id, "noether.consistency", &inputs, tol, e),
    }
}

/// Dilation `q → (1+ε)q, p → (1−ε)p` with no surface term: not a symmetry of
/// any built-in model, used to exercise the failure path.
fn scaling_transformation(dim: usize) -> Transformation {
    Transformation::new(
        (0..dim).map(|a| Observable::q(dim, a)).collect(),
        (0..dim).map(|a| Observable::p(dim, a).scale(-1.0)).collect(),
        Observable::constant(dim, 0.0).with_label("scaling"),
        0.5,
    )
    .expect("matching lengths")
}

pub fn consistency(ctx: &Ctx) -> Vec<Record> {
    let mut out = Vec::new();
    match ctx.model {
        Model::Force(m) => {
            let tol = ctx.tol("consistency", 1e-10);
            for axis in 0..m.dim() {
                for l in LAMBDAS {
                    for (kind, tr) in [("translation", m.translation(axis, l)), ("boost", m.boost(axis, l))] {
                        let id = format!("consistency/{kind}{axis}/lambda={l}");
                        let inputs = json!({"kind": kind, "axis": axis, "lambda": l});
                        out.push(match tr {
                            Ok(tr) => consistency_record(ctx, id, &tr, inputs, tol),
                            Err(e) => Record::errored(id, "noether.consistency", &ctx.inputs(inputs), tol, e),
                        });
                    }
                }
            }
        }
        _ => {
            let tol = ctx.tol("consistency", 1e-6);
            for f in ctx.model.charges() {
                for l in LAMBDAS {
                    let id = format!("consistency/generated_by_{}/lambda={l}", f.label());
                    let inputs = json!({"generator": f.label(), "lambda": l});
                    out.push(match converse_transform(&f, l) {
                        Ok(tr) => consistency_record(ctx, id, &tr, inputs, tol),
                        Err(e) => Record::errored(id, "noether.consistency", &ctx.inputs(inputs), tol, e),
                    });
                }
            }
        }
    }
    for extra in &ctx.cfg.extra_transformations {
        let tol = ctx.tol("consistency", 1e-10);
        let tr = scaling_transformation(ctx.model.dim());
        out.push(consistency_record(ctx, format!("consistency/{extra}"), &tr, json!({"kind": extra}), tol));
    }
    out
}

pub fn conservation(ctx: &Ctx) -> Vec<Record> {
    let mut out = Vec::new();
    let sys = ctx.model.system();
    let tol = ctx.tol("conservation", 1e-10);
    let mut observables = ctx.model.charges();
    observables.push(sys.hamiltonian.clone().with_label("H"));
    for f in &observables {
        let id = format!("conservation/{}", f.label());
        let inputs = ctx.inputs(json!({"observable": f.label()}));
        out.push(match conservation_check(f, sys, &ctx.states, tol) {
            Ok(r) => Record::new(id, "noether.dynamical_conservation", &inputs, r.max_total, tol).with_detail(json!({
                "max_partial_t": r.splits.iter().map(|s| s.partial_t.abs()).fold(0.0, f64::max),
                "max_bracket_h": r.splits.iter().map(|s| s.bracket_h.abs()).fold(0.0, f64::max),
            })),
            Err(e) => Record::errored(id, "noether.dynamical_conservation", &inputs, tol, e),
        });
    }
    if let Model::Force(m) = ctx.model {
        let tol = ctx.tol("charge", 1e-12);
        for axis in 0..m.dim() {
            for l in LAMBDAS {
                let pairs = [
                    ("T", m.translation(axis, l), &m.t[axis]),
                    ("gamma", m.boost(axis, l), &m.gamma[axis]),
                ];
                for (name, tr, closed) in pairs {
                    let id = format!("charge/{name}{axis}/lambda={l}");
                    let inputs = ctx.inputs(json!({"charge": name, "axis": axis, "lambda": l}));
                    let r = tr
                        .and_then(|tr| build_charge(&tr))
                        .and_then(|b| constant_offset_residual(&b.charge, closed, &ctx.states));
                    out.push(match r {
                        Ok(r) => Record::new(id, "noether.charge_formula", &inputs, r, tol),
                        Err(e) => Record::errored(id, "noether.charge_formula", &inputs, tol, e),
                    });
                }
            }
        }
    }
    out
}

/// Short reference trajectory for the converse checks.
fn reference_trajectory(ctx: &Ctx) -> noether_core::Result<Trajectory> {
    let s0 = ctx.states.first().cloned().unwrap_or_else(|| make_state(vec![0.0; ctx.model.dim()], vec![0.0; ctx.model.dim()], 0.0).expect("finite"));
    let s0 = PhaseState { t: 0.0, ..s0 };
    integrate(IntegratorKind::Rk4, ctx.model.system(), &s0, reference_step(ctx), ctx.cfg.integrator.n.min(200))
}

/// The covariance residual carries an `ε·O(h²)` finite-difference term, so the
/// reference path uses a step no coarser than `1e-3`.
fn reference_step(ctx: &Ctx) -> f64 {
    ctx.cfg.integrator.h.min(1e-3)
}

pub const COVARIANCE_EPS: f64 = 1e-3;

pub fn converse(ctx: &Ctx) -> Vec<Record> {
    let mut out = Vec::new();
    let sys = ctx.model.system();
    let tol = ctx.tol("converse", 1e-6);
    let traj = reference_trajectory(ctx);
    // converse fields are sampled, so a subset of states keeps the suite fast
    let states: Vec<PhaseState> = ctx.states.iter().take(SAMPLED_STATES).cloned().collect();
    for f in ctx.model.charges() {
        let label = f.label().to_string();
        let inputs = ctx.inputs(json!({"generator": label, "lambda": 0.5}));
        match converse_transform(&f, 0.5) {
            Ok(tr) => {
                let id = format!("converse/{label}/consistency");
                out.push(match verify_consistency(&tr, sys, &states, tol) {
                    Ok(r) => Record::new(id, "noether.converse_construction", &inputs, r.max_residual(), tol),
                    Err(e) => Record::errored(id, "noether.converse_construction", &inputs, tol, e),
                });
                let id = format!("converse/{label}/round_trip");
                let r = build_charge(&tr).and_then(|b| constant_offset_residual(&b.charge, &f, &states));
                out.push(match r {
                    Ok(r) => Record::new(id, "noether.converse_round_trip", &inputs, r, tol),
                    Err(e) => Record::errored(id, "noether.converse_round_trip", &inputs, tol, e),
                });
            }
            Err(e) => out.push(Record::errored(format!("converse/{label}"), "noether.converse_construction", &inputs, tol, e)),
        }
        let id = format!("converse/{label}/covariance");
        let cov_inputs = ctx.inputs(json!({
            "generator": label, "eps": COVARIANCE_EPS, "h": reference_step(ctx), "n": ctx.cfg.integrator.n.min(200)
        }));
        let r = traj.as_ref().map_err(Clone::clone).and_then(|t| covariance_excess(&f, sys, t, COVARIANCE_EPS));
        out.push(match r {
            Ok(r) => Record::new(id, "noether.covariance", &cov_inputs, r, tol),
            Err(e) => Record::errored(id, "noether.covariance", &cov_inputs, tol, e),
        });
    }
    out
}

/// Expected `{f_i, f_j}` at `s` for the model's generator list (charges then `H`).
fn expected_table(model: &Model, obs: &[Observable], s: &PhaseState) -> Vec<Vec<f64>> {
    let n = obs.len();
    let mut e = vec![vec![0.0; n]; n];
    match model {
        Model::Force(m) => {
            let d = m.dim();
            for i in 0..d {
                e[i][d + i] = m.mass;
                e[d + i][i] = -m.mass;
                e[i][2 * d] = m.force[i];
                e[2 * d][i] = -m.force[i];
                let t = m.t[i].eval(s);
                e[d + i][2 * d] = -t;
                e[2 * d][d + i] = t;
            }
        }
        _ => {
            let h = model.as_harmonic().expect("oscillator model");
            let modes = h.a.len();
            let last = n - 1;
            for k in 0..modes {
                let (re, im) = (2 * k, 2 * k + 1);
                let (a_re, a_im) = h.a[k].eval(s);
                let w = h.omegas[k];
                e[re][im] = 0.5;
                e[im][re] = -0.5;
                e[re][last] = w * a_im;
                e[last][re] = -w * a_im;
                e[im][last] = -w * a_re;
                e[last][im] = w * a_re;
            }
        }
    }
    e
}

pub fn algebra(ctx: &Ctx) -> Vec<Record> {
    let mut out = Vec::new();
    let sys = ctx.model.system();
    let mut obs: Vec<Observable> = ctx.model.charges().into_iter().filter(|o| o.label() != "P").collect();
    obs.push(sys.hamiltonian.clone().with_label("H"));
    let labels: Vec<String> = obs.iter().map(|o| o.label().to_string()).collect();
    let inputs = ctx.inputs(json!({"observables": labels}));

    let tol = ctx.tol("algebra", 1e-10);
    match bracket_tables(&obs, &ctx.states) {
        Ok(tables) => {
            let worst = tables
                .iter()
                .zip(&ctx.states)
                .map(|(t, s)| t.max_abs_diff(&expected_table(ctx.model, &obs, s)))
                .fold(0.0, f64::max);
            out.push(Record::new("algebra/structure", "poisson.structure_table", &inputs, worst, tol));
            let anti = tables.iter().map(|t| t.antisymmetry_defect()).fold(0.0, f64::max);
            out.push(Record::new("algebra/antisymmetry", "poisson.antisymmetry", &inputs, anti, tol));
        }
        Err(e) => out.push(Record::errored("algebra/structure", "poisson.structure_table", &inputs, tol, e)),
    }

    let tol = ctx.tol("closure", 1e-9);
    let closure_set: Vec<Observable> = match ctx.model {
        Model::Force(_) => obs.clone(),
        _ => vec![obs[0].clone(), obs[1].clone(), obs[obs.len() - 1].clone()],
    };
    let closure_labels: Vec<&str> = closure_set.iter().map(|o| o.label()).collect();
    let cinputs = ctx.inputs(json!({"observables": closure_labels}));
    let closure_states: Vec<PhaseState> = ctx.states.iter().take(SAMPLED_STATES).cloned().collect();
    out.push(match closure_check(&closure_set, sys, &closure_states, tol) {
        Ok(r) => Record::new("algebra/closure", "noether.lie_closure", &cinputs, r.max_residual, tol).with_detail(&r.pairs),
        Err(e) => Record::errored("algebra/closure", "noether.lie_closure", &cinputs, tol, e),
    });

    let tol = ctx.tol("jacobi", 1e-6);
    let trip = &closure_set[..3];
    let jinputs = ctx.inputs(json!({"observables": [trip[0].label(), trip[1].label(), trip[2].label()]}));
    let r: noether_core::Result<Vec<f64>> =
        ctx.states.iter().take(10).map(|s| jacobi_residual(&trip[0], &trip[1], &trip[2], s)).collect();
    out.push(match r {
        Ok(v) => Record::new("algebra/jacobi", "poisson.jacobi", &jinputs, max_abs(&v), tol),
        Err(e) => Record::errored("algebra/jacobi", "poisson.jacobi", &jinputs, tol, e),
    });
    out
}

pub fn trajectory(ctx: &Ctx) -> (Vec<Record>, Vec<Artifact>) {
    let mut out = Vec::new();
    let ic = &ctx.cfg.integrator;
    let sys = ctx.model.system();
    let default_tol = if matches!(ctx.model, Model::Force(_)) { 1e-9 } else { 5e-4 };
    let tol = ctx.tol("trajectory", default_tol);
    let s0 = PhaseState { t: 0.0, ..ctx.states[0].clone() };
    let inputs = ctx.inputs(json!({"integrator": ic, "initial": {"q": s0.q, "p": s0.p}}));
    let traj = match integrate(ic.kind, sys, &s0, ic.h, ic.n) {
        Ok(t) => t,
        Err(e) => return (vec![Record::errored("trajectory/integrate", "integrate.trajectory", &inputs, tol, e)], vec![]),
    };
    let mut observables = ctx.model.charges();
    observables.push(sys.hamiltonian.clone().with_label("H"));
    for f in &observables {
        let id = format!("trajectory/drift/{}", f.label());
        // relative to the charge's size on the initial state, so large sums of modes are judged fairly
        let scale = 1.0 + f.eval(&s0).abs();
        out.push(match drift(&traj, f) {
            Ok(d) => Record::new(id, "integrate.drift", &inputs, max_abs(&d) / scale, tol)
                .with_detail(json!({"max_abs_drift": max_abs(&d), "scale": scale})),
            Err(e) => Record::errored(id, "integrate.drift", &inputs, tol, e),
        });
    }
    if ctx.model.dim() == 1 && ic.kind != IntegratorKind::Rk4 {
        let tol = ctx.tol("trajectory", 1e-8);
        let steps = ic.n.min(10_000);
        let dinputs = ctx.inputs(json!({"integrator": ic, "steps": steps}));
        out.push(match tangent_determinant(ic.kind, sys, &s0, ic.h, steps) {
            Ok(det) => Record::new("trajectory/symplectic_determinant", "integrate.symplectic", &dinputs, (det - 1.0).abs(), tol),
            Err(e) => Record::errored("trajectory/symplectic_determinant", "integrate.symplectic", &dinputs, tol, e),
        });
    }
    (out, vec![("trajectory.csv".into(), traj.to_csv())])
}

pub const FOCK_TIMES: [f64; 3] = [0.3, 1.7, 9.1];

pub fn fock(ctx: &Ctx) -> Vec<Record> {
    let mut out = Vec::new();
    let (omega, t0) = match ctx.model.as_harmonic() {
        Some(h) => (h.omegas[0], h.t0),
        None => (1.0, 0.0),
    };
    let inputs = |extra: Value| ctx.inputs(json!({"omega": omega, "t0": t0, "hbar": ctx.model.hbar(), "cutoff": qfock::DEFAULT_CUTOFF, "check": extra}));
    let fctx = match FockSpaceCtx::new(qfock::DEFAULT_CUTOFF, omega, ctx.model.hbar(), t0) {
        Ok(c) => c,
        Err(e) => return vec![Record::errored("qfock/context", "qfock.context", &inputs(Value::Null), 0.0, e)],
    };
    let over = |d: f64| ctx.cfg.tolerances.get("qfock").copied().unwrap_or(d);
    let (a, _, _) = ladder_ops(&fctx);
    for t in FOCK_TIMES {
        let tol = over(1e-12);
        let i = inputs(json!({"t": t}));
        let (at, _) = schrodinger_charge(&fctx, t);
        out.push(match heisenberg(&at, &fctx, t) {
            Ok(h) => Record::new(format!("qfock/heisenberg/t={t}"), "qfock.heisenberg_constancy", &i, block_distance(&h, &a), tol),
            Err(e) => Record::errored(format!("qfock/heisenberg/t={t}"), "qfock.heisenberg_constancy", &i, tol, e),
        });
        out.push(Record::new(format!("qfock/unitarity/t={t}"), "qfock.unitarity", &i, unitarity_residual(&fctx, t), tol));
        out.push(Record::new(
            format!("qfock/correspondence/t={t}"),
            "qfock.bracket_correspondence",
            &i,
            correspondence_residual(&fctx, t),
            tol,
        ));
        let tol = over(1e-7);
        out.push(match heisenberg_rate(&fctx, t, 1e-4) {
            Ok(r) => Record::new(format!("qfock/heisenberg_rate/t={t}"), "qfock.heisenberg_constancy", &i, r, tol),
            Err(e) => Record::errored(format!("qfock/heisenberg_rate/t={t}"), "qfock.heisenberg_constancy", &i, tol, e),
        });
        let tol = over(1e-10);
        out.push(match spectrum_action_report(&fctx, t, 3, 3) {
            Ok(r) => {
                let off = r.entries.iter().map(|e| e.off_ladder).fold(0.0, f64::max);
                Record::new(format!("qfock/spectrum/t={t}"), "qfock.spectrum_generating", &i, r.max_residual.max(off), tol)
                    .with_detail(json!({"max_residual": r.max_residual, "max_off_ladder": off}))
            }
            Err(e) => Record::errored(format!("qfock/spectrum/t={t}"), "qfock.spectrum_generating", &i, tol, e),
        });
    }
    out
}

/// Parameter tuples `(T, γ, t, ħ, m, F)` for the overlap-phase arbitration.
pub const OVERLAP_TUPLES: [(f64, f64, f64, f64, f64, f64); 5] = [
    (0.7, -1.3, 0.9, 1.0, 2.0, 1.5),
    (0.4, 0.8, 0.5, 0.7, 1.0, 1.0),
    (-0.3, 1.1, 1.2, 1.3, 1.5, 0.8),
    (1.0, -0.6, 0.3, 0.5, 1.2, 2.0),
    (0.2, 0.5, 2.0, 1.0, 1.0, 0.5),
];
pub const OVERLAP_TOLERANCE: f64 = 1e-5;

/// `(m, F)` for the wave checks: the model's mass and first force component
/// when it is a constant-force model, otherwise `(1, 1.5)`.
fn wave_parameters(model: &Model) -> (f64, f64) {
    match model.as_force() {
        Some(m) => (m.mass, m.force[0]),
        None => (1.0, 1.5),
    }
}

pub fn wave(ctx: &Ctx) -> (Vec<Record>, Vec<Artifact>) {
    let mut out = Vec::new();
    let mut artifacts = Vec::new();
    let (m, f) = wave_parameters(ctx.model);
    let over = |d: f64| ctx.cfg.tolerances.get("qwave").copied().unwrap_or(d);
    let inputs = |extra: Value| ctx.inputs(json!({"m": m, "F": f, "grid": [4096, -40.0, 40.0], "check": extra}));
    let grid = match MomentumGrid::new(4096, -40.0, 40.0, 1.0, m, f) {
        Ok(g) => g,
        Err(e) => return (vec![Record::errored("qwave/grid", "qwave.grid", &inputs(Value::Null), 0.0, e)], vec![]),
    };
    let push = |out: &mut Vec<Record>, id: String, anchor: &str, i: Value, tol: f64, r: noether_core::Result<f64>| {
        out.push(match r {
            Ok(r) => Record::new(id, anchor, &i, r, tol),
            Err(e) => Record::errored(id, anchor, &i, tol, e),
        });
    };

    if f != 0.0 {
        for e in [-5.0, 0.0, 2.5, 5.0] {
            let r = qwave::stationarity_residual(&grid, e);
            let detail = r.as_ref().ok().map(|w| json!({"window": [w.p_lo, w.p_hi]}));
            push(&mut out, format!("qwave/stationarity/E={e}"), "qwave.energy_eigenstate", inputs(json!({"E": e})), over(1e-6), r.map(|w| w.residual));
            if let Some(d) = detail {
                out.last_mut().expect("pushed").detail = Some(d);
            }
        }
        for a in [-1.0, 0.3] {
            let e = 0.4;
            let r = qwave::energy_state(&grid, e)
                .and_then(|s| qwave::ratio_deviation(&qwave::translate_state(&s, a), &qwave::energy_state(&grid, e - a * f)?));
            push(&mut out, format!("qwave/translate_energy_state/a={a}"), "qwave.translation_maps_energy", inputs(json!({"E": e, "a": a})), over(1e-9), r);
        }
        if let Ok(s) = qwave::energy_state(&grid, 0.0) {
            artifacts.push(("energy_state.csv".into(), s.to_csv()));
        }
    }
    for t in [0.5, 1.0, 2.0] {
        let tv = 0.7;
        push(&mut out, format!("qwave/t_schrodinger/t={t}"), "qwave.t_eigenstate", inputs(json!({"T": tv, "t": t})), over(1e-8), qwave::t_schrodinger_residual(&grid, tv, t));
    }
    for t in [0.0, 0.5, 1.0, 2.0] {
        let g = -1.3;
        let i = inputs(json!({"gamma": g, "t": t}));
        push(&mut out, format!("qwave/gamma_eigen/t={t}"), "qwave.gamma_eigenstate", i.clone(), over(1e-6), qwave::gamma_eigen_residual(&grid, g, t).map(|w| w.residual));
        if t > 0.0 {
            push(&mut out, format!("qwave/gamma_schrodinger/t={t}"), "qwave.gamma_eigenstate", i, over(1e-6), qwave::gamma_schrodinger_residual(&grid, g, t).map(|w| w.residual));
        }
    }

    // wave packets
    let (p0, sigma, x0) = (0.8, 0.7, 0.3);
    for (t, tol) in [(0.0, 1e-8), (1.3, 1e-6)] {
        let v = 16.0 * grid.dp / m;
        let i = inputs(json!({"packet": [p0, sigma, x0], "t": t, "v": v}));
        let r = qwave::gaussian_packet(&grid, p0, sigma, x0, t).and_then(|pk| {
            let before = qwave::energy_expectation(&pk)?;
            let after = qwave::energy_expectation(&qwave::boost_state(&pk, v)?)?;
            let t_mean = qwave::momentum_expectation(&pk)? - t * f;
            Ok((after - before - (v * t_mean + 0.5 * m * v * v)).abs())
        });
        push(&mut out, format!("qwave/boost_energy_shift/t={t}"), "qwave.boost_energy_shift", i, over(tol), r);
    }
    let a = 0.6;
    let r = qwave::gaussian_packet(&grid, p0, sigma, x0, 0.0).and_then(|pk| {
        let before = qwave::energy_expectation(&pk)?;
        let after = qwave::energy_expectation(&qwave::translate_state(&pk, a))?;
        Ok((before - after - a * f).abs())
    });
    push(&mut out, "qwave/translate_energy_shift".into(), "qwave.translation_energy_shift", inputs(json!({"packet": [p0, sigma, x0], "a": a})), over(1e-8), r);
    let r = qwave::gaussian_packet(&grid, p0, sigma, x0, 0.4).and_then(|pk| {
        let v = 8.0 * grid.dp / m;
        qwave::global_phase_deviation(&qwave::boost_state(&qwave::boost_state(&pk, v)?, -v)?, &pk)
    });
    push(&mut out, "qwave/boost_group_law".into(), "qwave.boost_group_law", inputs(json!({"packet": [p0, sigma, x0], "t": 0.4})), over(1e-10), r);
    let r: noether_core::Result<f64> = (0..20)
        .map(|k| {
            let k = k as f64;
            qwave::gaussian_packet(&grid, -2.0 + 0.2 * k, 0.5 + 0.05 * k, 1.0 - 0.1 * k, 0.1 * k).and_then(|pk| qwave::commutator_residual(&pk))
        })
        .try_fold(0.0, |acc, r| r.map(|r| f64::max(acc, r)));
    push(&mut out, "qwave/commutator".into(), "qwave.central_extension", inputs(json!({"packets": 20})), over(1e-6), r);

    // overlap
    let (tv, g, t) = (0.7, -1.3, 0.0);
    let r = qwave::t_gamma_overlap(&grid, tv, g, t).map(|z| qwave::phase_distance(z.arg(), tv * g / m));
    push(&mut out, "qwave/overlap_phase/t=0".into(), "qwave.overlap_phase", inputs(json!({"T": tv, "gamma": g, "t": t})), over(1e-9), r);
    for t in [0.0, 1.1] {
        let r = qwave::overlap_phase_gradient(&grid, tv, g, t, 1e-3).map(|d| (d - g / m).abs());
        push(&mut out, format!("qwave/overlap_gradient/t={t}"), "qwave.overlap_gradient", inputs(json!({"T": tv, "gamma": g, "t": t})), over(1e-6), r);
    }
    let i = ctx.inputs(json!({"tuples": OVERLAP_TUPLES, "n": 1024, "dp": 0.01}));
    let tol = over(OVERLAP_TOLERANCE);
    out.push(match qwave::arbitrate_overlap_phase(&OVERLAP_TUPLES, 1024, 0.01, tol) {
        Ok(arb) => {
            let single = arb.tuples.iter().map(|r| r.single_hbar_error).fold(0.0, f64::max);
            let double = arb.tuples.iter().map(|r| r.double_hbar_error).fold(0.0, f64::max);
            let residual = match arb.winner {
                OverlapReading::SingleHbar => single,
                OverlapReading::DoubleHbar => double,
                OverlapReading::Both => f64::INFINITY,
                OverlapReading::Neither => single.min(double),
            };
            Record::new("qwave/overlap_arbitration", "qwave.overlap_arbitration", &i, residual, tol).with_detail(json!({
                "winner": arb.winner.name(),
                "max_single_hbar_error": single,
                "max_double_hbar_error": double,
                "tuples": arb.tuples,
            }))
        }
        Err(e) => Record::errored("qwave/overlap_arbitration", "qwave.overlap_arbitration", &i, tol, e),
    });
    (out, artifacts)
}
