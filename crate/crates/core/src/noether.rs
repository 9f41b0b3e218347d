//! Consistency conditions for a symmetry candidate, Noether charge
//! construction, conservation checks and the converse construction.

use rayon::prelude::*;
use serde::Serialize;

use crate::dualnum::{grad, GradResult};
use crate::error::{ensure_dim, Error, Result};
use crate::integrate::Trajectory;
use crate::phasespace::{sample_states, Observable, PhaseState, SystemSpec, Transformation};
use crate::poisson::total_derivative;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub residual_q: f64,
    pub residual_p: f64,
    pub residual_t: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl ConsistencyReport {
    pub fn max_residual(&self) -> f64 {
        self.residual_q.max(self.residual_p).max(self.residual_t)
    }
}

struct Grads {
    phi: Vec<GradResult>,
    chi: Vec<GradResult>,
    surface: GradResult,
    h: GradResult,
}

fn grads(tr: &Transformation, sys: &SystemSpec, s: &PhaseState) -> Result<Grads> {
    Ok(Grads {
        phi: tr.phi.iter().map(|o| grad(o, s)).collect::<Result<_>>()?,
        chi: tr.chi.iter().map(|o| grad(o, s)).collect::<Result<_>>()?,
        surface: grad(&tr.surface, s)?,
        h: grad(&sys.hamiltonian, s)?,
    })
}

/// Residuals of the three conditions at one state, each maximised over components.
fn condition_residuals(tr: &Transformation, sys: &SystemSpec, s: &PhaseState) -> Result<[f64; 3]> {
    let d = tr.dim();
    let l = tr.lambda;
    let g = grads(tr, sys, s)?;
    let mut rq = 0.0f64;
    let mut rp = 0.0f64;
    for a in 0..d {
        let mut want_q = l * g.chi[a].value;
        let mut want_p = -(1.0 - l) * g.phi[a].value;
        for b in 0..d {
            want_q += l * g.phi[b].d_q[a] * s.p[b] - (1.0 - l) * s.q[b] * g.chi[b].d_q[a];
            want_p += l * g.phi[b].d_p[a] * s.p[b] - (1.0 - l) * s.q[b] * g.chi[b].d_p[a];
        }
        rq = rq.max((g.surface.d_q[a] - want_q).abs());
        rp = rp.max((g.surface.d_p[a] - want_p).abs());
    }
    let mut want_t = 0.0;
    for a in 0..d {
        want_t += l * g.phi[a].d_t * s.p[a] - (1.0 - l) * s.q[a] * g.chi[a].d_t
            - g.phi[a].value * g.h.d_q[a]
            - g.chi[a].value * g.h.d_p[a];
    }
    Ok([rq, rp, (g.surface.d_t - want_t).abs()])
}

/// Checks the three consistency conditions on `(φ, χ, Λ)` at every state.
pub fn verify_consistency(
    tr: &Transformation,
    sys: &SystemSpec,
    states: &[PhaseState],
    tol: f64,
) -> Result<ConsistencyReport> {
    ensure_dim(sys.dim, tr.dim())?;
    if !(tol > 0.0) {
        return Err(Error::BadParameter(format!("tolerance must be positive, got {tol}")));
    }
    let per_state: Vec<[f64; 3]> = states
        .par_iter()
        .map(|s| condition_residuals(tr, sys, s))
        .collect::<Result<_>>()?;
    let mut r = [0.0f64; 3];
    for v in per_state {
        for k in 0..3 {
            r[k] = r[k].max(v[k]);
        }
    }
    Ok(ConsistencyReport {
        residual_q: r[0],
        residual_p: r[1],
        residual_t: r[2],
        tolerance: tol,
        passed: r.iter().all(|x| *x < tol),
    })
}

#[derive(Debug, Clone)]
pub struct ChargeBundle {
    pub charge: Observable,
    pub transformation: Transformation,
    pub lambda: f64,
}

pub const GENERATOR_SAMPLE: (usize, u64, f64) = (16, 0x5eed, 2.0);

/// `Q = λφ·p − (1−λ)q·χ − Λ`, validated through `{q,Q} = φ`, `{p,Q} = χ`.
pub fn build_charge(tr: &Transformation) -> Result<ChargeBundle> {
    let d = tr.dim();
    let l = tr.lambda;
    let exact = tr.phi.iter().chain(&tr.chi).chain([&tr.surface]).all(Observable::is_exact);
    let charge = if exact {
        let (phi, chi, lam) = (tr.phi.clone(), tr.chi.clone(), tr.surface.clone());
        Observable::new(format!("Q[{}]", tr.surface.label()), d, move |q, p, t| {
            let mut acc = -lam.eval_dual(q, p, t).expect("closed form");
            for a in 0..d {
                acc = acc + phi[a].eval_dual(q, p, t).expect("closed form") * &p[a] * l
                    - chi[a].eval_dual(q, p, t).expect("closed form") * &q[a] * (1.0 - l);
            }
            acc
        })
    } else {
        let t2 = tr.clone();
        Observable::sampled(format!("Q[{}]", tr.surface.label()), d, move |s| {
            let mut acc = -t2.surface.eval(s);
            for a in 0..d {
                acc += l * t2.phi[a].eval(s) * s.p[a] - (1.0 - l) * s.q[a] * t2.chi[a].eval(s);
            }
            acc
        })
    };
    let tol = if exact { 1e-9 } else { 1e-6 };
    let (n, seed, box_) = GENERATOR_SAMPLE;
    let residual = generator_residual(&charge, tr, &sample_states(d, n, seed, box_))?;
    if let Some((component, residual)) = residual.into_iter().find(|(_, r)| !(*r < tol)) {
        return Err(Error::GeneratorMismatch { component, residual });
    }
    Ok(ChargeBundle { charge, transformation: tr.clone(), lambda: l })
}

/// Per-component max of `|{q^α,Q} − φ^α|` and `|{p_α,Q} − χ_α|` (scaled by `1 + |field|`).
pub fn generator_residual(q: &Observable, tr: &Transformation, states: &[PhaseState]) -> Result<Vec<(String, f64)>> {
    let d = tr.dim();
    let mut out: Vec<(String, f64)> = (0..d)
        .map(|a| (format!("phi{a}"), 0.0))
        .chain((0..d).map(|a| (format!("chi{a}"), 0.0)))
        .collect();
    for s in states {
        let g = grad(q, s)?;
        for a in 0..d {
            let phi = tr.phi[a].eval(s);
            let chi = tr.chi[a].eval(s);
            let rp = (g.d_p[a] - phi).abs() / (1.0 + phi.abs());
            let rc = (-g.d_q[a] - chi).abs() / (1.0 + chi.abs());
            out[a].1 = out[a].1.max(rp);
            out[d + a].1 = out[d + a].1.max(rc);
        }
    }
    Ok(out)
}

/// Max gradient difference between two observables: zero iff they agree up to a constant.
pub fn constant_offset_residual(f: &Observable, g: &Observable, states: &[PhaseState]) -> Result<f64> {
    ensure_dim(f.dim(), g.dim())?;
    let mut worst = 0.0f64;
    for s in states {
        let (a, b) = (grad(f, s)?, grad(g, s)?);
        let mut diff = a.combine(1.0, &b, -1.0);
        diff.value = 0.0;
        worst = worst.max(diff.max_abs_diff(&GradResult {
            value: 0.0,
            d_q: vec![0.0; diff.dim()],
            d_p: vec![0.0; diff.dim()],
            d_t: 0.0,
        }));
    }
    Ok(worst)
}

/// `f − f(reference)` with the reference at the origin of phase space at `t = 0`.
pub fn gauge_fixed(f: &Observable) -> Observable {
    let d = f.dim();
    let origin = PhaseState { q: vec![0.0; d], p: vec![0.0; d], t: 0.0 };
    let c = f.eval(&origin);
    f.minus(&Observable::constant(d, c)).with_label(format!("{} (gauge fixed)", f.label()))
}

/// `∂Q/∂t − (φ·∂H/∂q + χ·∂H/∂p)` and `{Q,H} + (φ·∂H/∂q + χ·∂H/∂p)`, each maximised over states.
pub fn charge_time_identity(bundle: &ChargeBundle, sys: &SystemSpec, states: &[PhaseState]) -> Result<(f64, f64)> {
    let tr = &bundle.transformation;
    let d = tr.dim();
    let (mut r1, mut r2) = (0.0f64, 0.0f64);
    for s in states {
        let g = grad(&bundle.charge, s)?;
        let h = grad(&sys.hamiltonian, s)?;
        let rhs: f64 = (0..d).map(|a| tr.phi[a].eval(s) * h.d_q[a] + tr.chi[a].eval(s) * h.d_p[a]).sum();
        let br: f64 = (0..d).map(|a| g.d_q[a] * h.d_p[a] - g.d_p[a] * h.d_q[a]).sum();
        r1 = r1.max((g.d_t - rhs).abs());
        r2 = r2.max((br + rhs).abs());
    }
    Ok((r1, r2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Split {
    pub partial_t: f64,
    pub bracket_h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConservationReport {
    pub label: String,
    pub max_total: f64,
    pub splits: Vec<Split>,
    pub tolerance: f64,
    pub passed: bool,
}

/// `max |∂f/∂t + {f,H}|` with the per-state split into its two parts.
pub fn conservation_check(
    f: &Observable,
    sys: &SystemSpec,
    states: &[PhaseState],
    tol: f64,
) -> Result<ConservationReport> {
    ensure_dim(sys.dim, f.dim())?;
    let splits: Vec<Split> = states
        .par_iter()
        .map(|s| {
            let g = grad(f, s)?;
            let h = grad(&sys.hamiltonian, s)?;
            let br = g.d_q.iter().zip(&h.d_p).map(|(x, y)| x * y).sum::<f64>()
                - g.d_p.iter().zip(&h.d_q).map(|(x, y)| x * y).sum::<f64>();
            Ok(Split { partial_t: g.d_t, bracket_h: br })
        })
        .collect::<Result<_>>()?;
    let max_total = splits.iter().map(|s| (s.partial_t + s.bracket_h).abs()).fold(0.0, f64::max);
    if !max_total.is_finite() {
        return Err(Error::NonFinite(f.label().to_string()));
    }
    Ok(ConservationReport {
        label: f.label().to_string(),
        max_total,
        splits,
        tolerance: tol,
        passed: max_total < tol,
    })
}

/// Symmetry generated by `f`: `φ = ∂F/∂p`, `χ = −∂F/∂q`, `Λ = λφ·p − (1−λ)q·χ − F`.
/// Fields are sampled observables; a non-finite gradient surfaces as
/// [`Error::NonFinite`] when they are evaluated.
pub fn converse_transform(f: &Observable, lambda: f64) -> Result<Transformation> {
    let d = f.dim();
    let field = |label: String, pick: fn(&GradResult, usize) -> f64, a: usize| {
        let f = f.clone();
        Observable::sampled(label, d, move |s| grad(&f, s).map_or(f64::NAN, |g| pick(&g, a)))
    };
    let phi: Vec<Observable> = (0..d).map(|a| field(format!("phi{a}[{}]", f.label()), |g, a| g.d_p[a], a)).collect();
    let chi: Vec<Observable> = (0..d).map(|a| field(format!("chi{a}[{}]", f.label()), |g, a| -g.d_q[a], a)).collect();
    let f2 = f.clone();
    let surface = Observable::sampled(format!("Lambda[{}]", f.label()), d, move |s| match grad(&f2, s) {
        Ok(g) => {
            let mut acc = -g.value;
            for a in 0..d {
                acc += lambda * g.d_p[a] * s.p[a] + (1.0 - lambda) * s.q[a] * g.d_q[a];
            }
            acc
        }
        Err(_) => f64::NAN,
    });
    Transformation::new(phi, chi, surface, lambda)
}

pub const COVARIANCE_PRECHECK_TOL: f64 = 1e-6;

fn precheck_conserved(f: &Observable, sys: &SystemSpec, traj: &Trajectory) -> Result<()> {
    ensure_dim(sys.dim, f.dim())?;
    ensure_dim(sys.dim, traj.dim())?;
    for s in &traj.states {
        let r = total_derivative(f, sys, s)?;
        if !(r.abs() < COVARIANCE_PRECHECK_TOL) {
            return Err(Error::PrecheckFailed(format!(
                "`{}` is not conserved: dF/dt = {r:.3e} at t = {}",
                f.label(),
                s.t
            )));
        }
    }
    Ok(())
}

/// Equation-of-motion residuals of the path `q + ε∂F/∂p`, `p − ε∂F/∂q` at
/// interior points, flattened as `[k][q-block, p-block]`.
pub fn covariance_residuals(f: &Observable, sys: &SystemSpec, traj: &Trajectory, eps: f64) -> Result<Vec<f64>> {
    precheck_conserved(f, sys, traj)?;
    let d = sys.dim;
    let moved: Vec<PhaseState> = traj
        .states
        .iter()
        .map(|s| {
            let g = grad(f, s)?;
            Ok(PhaseState {
                q: (0..d).map(|a| s.q[a] + eps * g.d_p[a]).collect(),
                p: (0..d).map(|a| s.p[a] - eps * g.d_q[a]).collect(),
                t: s.t,
            })
        })
        .collect::<Result<_>>()?;
    if moved.len() < 3 {
        return Err(Error::BadParameter("trajectory needs at least three states".into()));
    }
    let h = traj.h;
    let mut out = Vec::with_capacity((moved.len() - 2) * 2 * d);
    for k in 1..moved.len() - 1 {
        let (dq, dp) = sys.vector_field(&moved[k])?;
        for a in 0..d {
            out.push((moved[k + 1].q[a] - moved[k - 1].q[a]) / (2.0 * h) - dq[a]);
        }
        for a in 0..d {
            out.push((moved[k + 1].p[a] - moved[k - 1].p[a]) / (2.0 * h) - dp[a]);
        }
    }
    Ok(out)
}

/// Max equation-of-motion residual of the transformed path; O(ε²) + O(h²).
pub fn covariance_residual(f: &Observable, sys: &SystemSpec, traj: &Trajectory, eps: f64) -> Result<f64> {
    Ok(covariance_residuals(f, sys, traj, eps)?.iter().map(|r| r.abs()).fold(0.0, f64::max))
}

/// `max |r(ε) − r(0)|` over points and components: the part of the residual
/// caused by the transformation rather than by the integrator.
pub fn covariance_excess(f: &Observable, sys: &SystemSpec, traj: &Trajectory, eps: f64) -> Result<f64> {
    let base = covariance_residuals(f, sys, traj, 0.0)?;
    let moved = covariance_residuals(f, sys, traj, eps)?;
    Ok(moved.iter().zip(&base).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// Derivative of a uniformly sampled series: central differences inside,
/// second-order one-sided differences at the ends.
fn series_derivative(x: &[f64], h: f64) -> Vec<f64> {
    let n = x.len();
    if n < 3 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|k| {
            if k == 0 {
                (-3.0 * x[0] + 4.0 * x[1] - x[2]) / (2.0 * h)
            } else if k == n - 1 {
                (3.0 * x[n - 1] - 4.0 * x[n - 2] + x[n - 3]) / (2.0 * h)
            } else {
                (x[k + 1] - x[k - 1]) / (2.0 * h)
            }
        })
        .collect()
}

/// Trapezoid-rule action `∫ [λq̇·p − (1−λ)q·ṗ − H] dt` of a discrete path.
pub fn discrete_action(sys: &SystemSpec, path: &[PhaseState], h: f64, lambda: f64) -> f64 {
    let d = sys.dim;
    let n = path.len();
    if n < 2 {
        return 0.0;
    }
    let qdot: Vec<Vec<f64>> =
        (0..d).map(|a| series_derivative(&path.iter().map(|s| s.q[a]).collect::<Vec<_>>(), h)).collect();
    let pdot: Vec<Vec<f64>> =
        (0..d).map(|a| series_derivative(&path.iter().map(|s| s.p[a]).collect::<Vec<_>>(), h)).collect();
    let lag: Vec<f64> = (0..n)
        .map(|k| {
            let s = &path[k];
            let kin: f64 =
                (0..d).map(|a| lambda * qdot[a][k] * s.p[a] - (1.0 - lambda) * s.q[a] * pdot[a][k]).sum();
            kin - sys.hamiltonian.eval(s)
        })
        .collect();
    h * (0.5 * (lag[0] + lag[n - 1]) + lag[1..n - 1].iter().sum::<f64>())
}

/// `|S[q+εφ, p+εχ] − S[q,p] − ε(Λ(end) − Λ(start))|` on the discrete path.
pub fn action_variation_check(tr: &Transformation, sys: &SystemSpec, traj: &Trajectory, eps: f64) -> Result<f64> {
    ensure_dim(sys.dim, tr.dim())?;
    ensure_dim(sys.dim, traj.dim())?;
    let d = sys.dim;
    let moved: Vec<PhaseState> = traj
        .states
        .iter()
        .map(|s| PhaseState {
            q: (0..d).map(|a| s.q[a] + eps * tr.phi[a].eval(s)).collect(),
            p: (0..d).map(|a| s.p[a] + eps * tr.chi[a].eval(s)).collect(),
            t: s.t,
        })
        .collect();
    let s0 = discrete_action(sys, &traj.states, traj.h, tr.lambda);
    let s1 = discrete_action(sys, &moved, traj.h, tr.lambda);
    let boundary = eps * (tr.surface.eval(traj.last()) - tr.surface.eval(traj.first()));
    Ok((s1 - s0 - boundary).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::{rk4, verlet};
    use crate::models::{constant_force_system, harmonic_system};
    use crate::phasespace::make_state;
    use crate::poisson::bracket;

    const LAMBDAS: [f64; 3] = [0.0, 0.5, 1.0];

    #[test]
    fn constant_force_symmetries_are_consistent() {
        let m = constant_force_system(1.7, &[0.3, -0.4, 2.3]).unwrap();
        let states = sample_states(3, 100, 1, 2.0);
        for l in LAMBDAS {
            for a in 0..3 {
                for tr in [m.translation(a, l).unwrap(), m.boost(a, l).unwrap()] {
                    let r = verify_consistency(&tr, &m.system, &states, 1e-10).unwrap();
                    assert!(r.passed, "{r:?}");
                }
            }
        }
    }

    #[test]
    fn scaling_is_not_a_symmetry_of_the_oscillator() {
        let h = harmonic_system(&[1.0], 0.0).unwrap();
        let tr = Transformation::new(
            vec![Observable::q(1, 0)],
            vec![Observable::constant(1, 0.0)],
            Observable::constant(1, 0.0),
            0.5,
        )
        .unwrap();
        let r = verify_consistency(&tr, &h.system, &sample_states(1, 100, 2, 2.0), 1e-10).unwrap();
        assert!(!r.passed);
        assert!(r.residual_t > 0.5, "{r:?}");
    }

    #[test]
    fn charges_reproduce_closed_forms() {
        let m = constant_force_system(1.3, &[0.8, -1.1]).unwrap();
        let states = sample_states(2, 100, 3, 2.0);
        for l in LAMBDAS {
            for a in 0..2 {
                let qt = build_charge(&m.translation(a, l).unwrap()).unwrap().charge;
                let qg = build_charge(&m.boost(a, l).unwrap()).unwrap().charge;
                for s in &states {
                    assert!((qt.eval(s) - m.t[a].eval(s)).abs() < 1e-12);
                    assert!((qg.eval(s) - m.gamma[a].eval(s)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn free_particle_translation_charge() {
        let m = constant_force_system(1.0, &[0.0]).unwrap();
        for l in LAMBDAS {
            let tr = Transformation::new(
                vec![Observable::constant(1, 1.0)],
                vec![Observable::constant(1, 0.0)],
                Observable::p(1, 0).scale(l - 1.0),
                l,
            )
            .unwrap();
            let q = build_charge(&tr).unwrap().charge;
            for s in sample_states(1, 20, 4, 2.0) {
                assert!((q.eval(&s) - s.p[0]).abs() < 1e-14);
            }
            assert!(verify_consistency(&tr, &m.system, &sample_states(1, 20, 4, 2.0), 1e-12).unwrap().passed);
        }
    }

    #[test]
    fn inconsistent_candidate_is_rejected() {
        let tr = Transformation::new(
            vec![Observable::constant(1, 1.0)],
            vec![Observable::constant(1, 0.0)],
            Observable::p(1, 0).scale(3.0),
            1.0,
        )
        .unwrap();
        assert!(matches!(build_charge(&tr), Err(Error::GeneratorMismatch { .. })));
    }

    #[test]
    fn charge_is_lambda_independent_up_to_constant() {
        let m = constant_force_system(0.9, &[1.5]).unwrap();
        let states = sample_states(1, 100, 5, 2.0);
        let charges: Vec<Observable> =
            LAMBDAS.iter().map(|&l| build_charge(&m.boost(0, l).unwrap()).unwrap().charge).collect();
        for i in 0..3 {
            for j in 0..3 {
                assert!(constant_offset_residual(&charges[i], &charges[j], &states).unwrap() < 1e-10);
            }
        }
        let g = gauge_fixed(&charges[0]);
        assert_eq!(g.eval(&make_state(vec![0.0], vec![0.0], 0.0).unwrap()), 0.0);
    }

    #[test]
    fn generator_property_and_time_identity() {
        let m = constant_force_system(1.7, &[0.0, 0.4, 2.3]).unwrap();
        let states = sample_states(3, 100, 6, 2.0);
        for l in LAMBDAS {
            for tr in [m.translation(2, l).unwrap(), m.boost(1, l).unwrap()] {
                let b = build_charge(&tr).unwrap();
                for (_, r) in generator_residual(&b.charge, &tr, &states).unwrap() {
                    assert!(r < 1e-10);
                }
                for s in &states {
                    for a in 0..3 {
                        let bq = bracket(&Observable::q(3, a), &b.charge, s).unwrap();
                        assert!((bq - tr.phi[a].eval(s)).abs() < 1e-10);
                    }
                }
                let (r1, r2) = charge_time_identity(&b, &m.system, &states).unwrap();
                assert!(r1 < 1e-9 && r2 < 1e-9);
            }
        }
    }

    #[test]
    fn conservation_splits() {
        let m = constant_force_system(1.0, &[2.5]).unwrap();
        let states = sample_states(1, 30, 7, 2.0);
        let r = conservation_check(&m.t[0], &m.system, &states, 1e-12).unwrap();
        assert!(r.passed);
        for sp in &r.splits {
            assert!((sp.partial_t + 2.5).abs() < 1e-14 && (sp.bracket_h - 2.5).abs() < 1e-14);
        }
        let r = conservation_check(&m.gamma[0], &m.system, &states, 1e-12).unwrap();
        assert!(r.passed);
        for (sp, s) in r.splits.iter().zip(&states) {
            let t = m.t[0].eval(s);
            assert!((sp.partial_t - t).abs() < 1e-12 && (sp.bracket_h + t).abs() < 1e-12);
        }
        let h = harmonic_system(&[1.2, 0.4], 0.0).unwrap();
        let r = conservation_check(&h.system.hamiltonian, &h.system, &sample_states(2, 30, 7, 2.0), 1e-12).unwrap();
        assert!(r.splits.iter().all(|s| s.partial_t == 0.0 && s.bracket_h == 0.0));
    }

    #[test]
    fn converse_examples() {
        let m = constant_force_system(1.4, &[0.6]).unwrap();
        let states = sample_states(1, 30, 8, 2.0);
        let tr = converse_transform(&m.gamma[0], 0.5).unwrap();
        for s in &states {
            assert!((tr.phi[0].eval(s) - s.t).abs() < 1e-12);
            assert!((tr.chi[0].eval(s) - 1.4).abs() < 1e-12);
        }
        let tr = converse_transform(&Observable::p(1, 0), 1.0).unwrap();
        for s in &states {
            assert_eq!((tr.phi[0].eval(s), tr.chi[0].eval(s), tr.surface.eval(s)), (1.0, 0.0, 0.0));
        }
        let h = harmonic_system(&[1.0], 0.0).unwrap();
        for l in LAMBDAS {
            let tr = converse_transform(&h.a[0].re, l).unwrap();
            let r = verify_consistency(&tr, &h.system, &sample_states(1, 100, 9, 2.0), 1e-9).unwrap();
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn converse_round_trip() {
        let m = constant_force_system(1.1, &[0.5, -0.7]).unwrap();
        let states = sample_states(2, 100, 10, 2.0);
        for l in LAMBDAS {
            let tr = m.boost(1, l).unwrap();
            let back = converse_transform(&build_charge(&tr).unwrap().charge, l).unwrap();
            for s in &states {
                for a in 0..2 {
                    assert!((back.phi[a].eval(s) - tr.phi[a].eval(s)).abs() < 1e-10);
                    assert!((back.chi[a].eval(s) - tr.chi[a].eval(s)).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn covariance_translation_is_exact() {
        let m = constant_force_system(1.0, &[1.5]).unwrap();
        let s0 = make_state(vec![0.2], vec![-0.3], 0.0).unwrap();
        let traj = verlet(&m.system, &s0, 0.01, 200).unwrap();
        let base = covariance_residual(&m.t[0], &m.system, &traj, 0.0).unwrap();
        assert!(base < 1e-10);
        for eps in [1e-2, 5e-3, 2.5e-3] {
            assert!(covariance_residual(&m.t[0], &m.system, &traj, eps).unwrap() < 1e-10);
        }
    }

    #[test]
    fn covariance_zero_eps_is_integrator_residual() {
        let h = harmonic_system(&[1.0], 0.0).unwrap();
        let s0 = make_state(vec![1.0], vec![0.0], 0.0).unwrap();
        let traj = rk4(&h.system, &s0, 0.01, 300).unwrap();
        let base = covariance_residual(&h.system.hamiltonian, &h.system, &traj, 0.0).unwrap();
        let mut direct = 0.0f64;
        for k in 1..traj.len() - 1 {
            let (dq, _) = h.system.vector_field(&traj.states[k]).unwrap();
            direct = direct.max(((traj.states[k + 1].q[0] - traj.states[k - 1].q[0]) / 0.02 - dq[0]).abs());
        }
        assert!(base >= direct);
        assert!(base < 1e-4);
    }

    #[test]
    fn covariance_rejects_unconserved() {
        let h = harmonic_system(&[1.0], 0.0).unwrap();
        let s0 = make_state(vec![1.0], vec![0.0], 0.0).unwrap();
        let traj = rk4(&h.system, &s0, 0.01, 10).unwrap();
        assert!(matches!(
            covariance_residual(&Observable::q(1, 0), &h.system, &traj, 1e-3),
            Err(Error::PrecheckFailed(_))
        ));
    }

    #[test]
    fn covariance_scales_quadratically_for_nonlinear_flow() {
        // Pendulum energy generates time translation; the linearised map only
        // solves the equations to first order, so the excess is O(ε²).
        let sys = SystemSpec::new("pendulum", Observable::new("H", 1, |q, p, _| p[0].square() * 0.5 - q[0].cos()), true);
        let s0 = make_state(vec![1.0], vec![0.3], 0.0).unwrap();
        let traj = rk4(&sys, &s0, 1e-3, 2000).unwrap();
        let r: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
            .iter()
            .map(|&e| covariance_excess(&sys.hamiltonian, &sys, &traj, e).unwrap())
            .collect();
        for w in r.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.4..=4.6).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn action_variation_examples() {
        let m = constant_force_system(1.2, &[0.9]).unwrap();
        let s0 = make_state(vec![0.3], vec![0.5], 0.0).unwrap();
        let traj = verlet(&m.system, &s0, 0.01, 400).unwrap();
        for l in LAMBDAS {
            let tr = m.translation(0, l).unwrap();
            assert_eq!(action_variation_check(&tr, &m.system, &traj, 0.0).unwrap(), 0.0);
            assert!(action_variation_check(&tr, &m.system, &traj, 1e-2).unwrap() < 1e-10);
        }
    }

    #[test]
    fn action_variation_boost_second_order_in_eps() {
        // away from λ = ½ the boost changes the action by (λ − ½)mε²Δt
        let m = constant_force_system(1.2, &[0.9]).unwrap();
        let s0 = make_state(vec![0.3], vec![0.5], 0.0).unwrap();
        let traj = verlet(&m.system, &s0, 0.01, 400).unwrap();
        let tr = m.boost(0, 1.0).unwrap();
        let eps = 1e-2;
        let r = action_variation_check(&tr, &m.system, &traj, eps).unwrap();
        let want = 0.5 * 1.2 * eps * eps * 4.0;
        assert!((r - want).abs() < 1e-10, "{r} vs {want}");
    }

    #[test]
    fn action_variation_quadrature_order() {
        let h = harmonic_system(&[1.0], 0.0).unwrap();
        let s0 = make_state(vec![1.0], vec![0.0], 0.0).unwrap();
        let tr = converse_transform(&h.a[0].re, 0.5).unwrap();
        let r = |step: f64, n: usize| {
            let traj = rk4(&h.system, &s0, step, n).unwrap();
            action_variation_check(&tr, &h.system, &traj, 1e-2).unwrap()
        };
        let ratio = r(0.02, 100) / r(0.01, 200);
        assert!((ratio - 4.0).abs() < 0.6, "ratio {ratio}");
    }
}
