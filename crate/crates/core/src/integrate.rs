//! Trajectories from Störmer–Verlet, implicit midpoint and classic RK4, with
//! drift diagnostics and CSV export.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dualnum::grad;
use crate::error::{ensure_dim, Error, Result};
use crate::phasespace::{ComplexObservable, Observable, PhaseState, SystemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntegratorKind {
    Verlet,
    Midpoint,
    Rk4,
}

impl fmt::Display for IntegratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IntegratorKind::Verlet => "verlet",
            IntegratorKind::Midpoint => "midpoint",
            IntegratorKind::Rk4 => "rk4",
        })
    }
}

impl FromStr for IntegratorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "verlet" => Ok(IntegratorKind::Verlet),
            "midpoint" => Ok(IntegratorKind::Midpoint),
            "rk4" => Ok(IntegratorKind::Rk4),
            other => Err(Error::BadParameter(format!("unknown integrator `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<PhaseState>,
    pub h: f64,
    pub sys_name: String,
    pub integrator: IntegratorKind,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, PhaseState::dim)
    }

    pub fn first(&self) -> &PhaseState {
        &self.states[0]
    }

    pub fn last(&self) -> &PhaseState {
        &self.states[self.states.len() - 1]
    }

    /// CSV with header `t,q0..,p0..`; every number carries 17 significant digits.
    pub fn to_csv(&self) -> String {
        let d = self.dim();
        let mut out = String::from("t");
        for i in 0..d {
            out.push_str(&format!(",q{i}"));
        }
        for i in 0..d {
            out.push_str(&format!(",p{i}"));
        }
        out.push('\n');
        for s in &self.states {
            out.push_str(&fmt_f64(s.t));
            for x in s.q.iter().chain(&s.p) {
                out.push(',');
                out.push_str(&fmt_f64(*x));
            }
            out.push('\n');
        }
        out
    }

    /// Parses [`Trajectory::to_csv`] output back into states.
    pub fn states_from_csv(text: &str) -> Result<Vec<PhaseState>> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::BadParameter("empty CSV".into()))?;
        let cols = header.split(',').count();
        if cols < 3 || cols % 2 == 0 {
            return Err(Error::BadParameter(format!("bad trajectory header `{header}`")));
        }
        let d = (cols - 1) / 2;
        lines
            .filter(|l| !l.is_empty())
            .map(|line| {
                let vals: Vec<f64> = line
                    .split(',')
                    .map(|v| v.parse::<f64>().map_err(|e| Error::BadParameter(format!("`{v}`: {e}"))))
                    .collect::<Result<_>>()?;
                ensure_dim(cols, vals.len())?;
                Ok(PhaseState { t: vals[0], q: vals[1..=d].to_vec(), p: vals[d + 1..].to_vec() })
            })
            .collect()
    }
}

pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn check_step(h: f64, allow_zero: bool) -> Result<()> {
    let ok = h.is_finite() && (h > 0.0 || (allow_zero && h == 0.0));
    if ok {
        Ok(())
    } else {
        Err(Error::BadParameter(format!("step must be positive, got {h}")))
    }
}

fn finite_or(s: &PhaseState, step: usize) -> Result<()> {
    if s.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("trajectory state at step {step}")))
    }
}

/// Compensated accumulator `x += dx` that carries the rounding residue forward.
#[derive(Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    fn new(x: f64) -> Self {
        Kahan { sum: x, carry: 0.0 }
    }

    fn add(&mut self, dx: f64) {
        let y = dx - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Störmer–Verlet (kick–drift–kick) for `H = K(p) + V(q)`.
pub fn verlet(sys: &SystemSpec, s0: &PhaseState, h: f64, n: usize) -> Result<Trajectory> {
    if !sys.separable {
        return Err(Error::NotSeparable(sys.name.clone()));
    }
    ensure_dim(sys.dim, s0.dim())?;
    check_step(h, false)?;
    let d = sys.dim;
    let mut q: Vec<Kahan> = s0.q.iter().map(|&x| Kahan::new(x)).collect();
    let mut p: Vec<Kahan> = s0.p.iter().map(|&x| Kahan::new(x)).collect();
    let snapshot = |q: &[Kahan], p: &[Kahan], t: f64| PhaseState {
        q: q.iter().map(|k| k.sum).collect(),
        p: p.iter().map(|k| k.sum).collect(),
        t,
    };
    let mut states = Vec::with_capacity(n + 1);
    states.push(s0.clone());
    let mut dv = grad(&sys.hamiltonian, s0)?.d_q;
    for k in 1..=n {
        for i in 0..d {
            p[i].add(-0.5 * h * dv[i]);
        }
        let mid = snapshot(&q, &p, s0.t + (k - 1) as f64 * h);
        let dk = grad(&sys.hamiltonian, &mid)?.d_p;
        for i in 0..d {
            q[i].add(h * dk[i]);
        }
        let drifted = snapshot(&q, &p, s0.t + k as f64 * h);
        dv = grad(&sys.hamiltonian, &drifted)?.d_q;
        for i in 0..d {
            p[i].add(-0.5 * h * dv[i]);
        }
        let s = snapshot(&q, &p, s0.t + k as f64 * h);
        finite_or(&s, k)?;
        states.push(s);
    }
    Ok(Trajectory { states, h, sys_name: sys.name.clone(), integrator: IntegratorKind::Verlet })
}

pub const MIDPOINT_TOL: f64 = 1e-13;
pub const MIDPOINT_MAX_ITER: usize = 50;

/// Implicit midpoint rule solved by fixed-point iteration.
pub fn midpoint(sys: &SystemSpec, s0: &PhaseState, h: f64, n: usize) -> Result<Trajectory> {
    ensure_dim(sys.dim, s0.dim())?;
    check_step(h, true)?;
    let d = sys.dim;
    let mut states = Vec::with_capacity(n + 1);
    states.push(s0.clone());
    let mut cur = s0.clone();
    for k in 1..=n {
        let t_mid = s0.t + (k as f64 - 0.5) * h;
        let mut next = cur.clone();
        let mut converged = false;
        let mut correction = f64::INFINITY;
        for _ in 0..MIDPOINT_MAX_ITER {
            let mid = PhaseState {
                q: (0..d).map(|i| 0.5 * (cur.q[i] + next.q[i])).collect(),
                p: (0..d).map(|i| 0.5 * (cur.p[i] + next.p[i])).collect(),
                t: t_mid,
            };
            let (dq, dp) = sys.vector_field(&mid)?;
            let cand = PhaseState {
                q: (0..d).map(|i| cur.q[i] + h * dq[i]).collect(),
                p: (0..d).map(|i| cur.p[i] + h * dp[i]).collect(),
                t: s0.t + k as f64 * h,
            };
            correction = (0..2 * d).map(|j| (cand.coord(j) - next.coord(j)).abs()).fold(0.0, f64::max);
            let scale = 1.0 + (0..2 * d).map(|j| cand.coord(j).abs()).fold(0.0, f64::max);
            next = cand;
            if correction <= MIDPOINT_TOL * scale {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NoConvergence { step: k, correction });
        }
        finite_or(&next, k)?;
        states.push(next.clone());
        cur = next;
    }
    Ok(Trajectory { states, h, sys_name: sys.name.clone(), integrator: IntegratorKind::Midpoint })
}

/// Classic fourth-order Runge–Kutta; not symplectic.
pub fn rk4(sys: &SystemSpec, s0: &PhaseState, h: f64, n: usize) -> Result<Trajectory> {
    ensure_dim(sys.dim, s0.dim())?;
    check_step(h, false)?;
    let d = sys.dim;
    let shifted = |s: &PhaseState, k: &(Vec<f64>, Vec<f64>), c: f64, t: f64| PhaseState {
        q: (0..d).map(|i| s.q[i] + c * k.0[i]).collect(),
        p: (0..d).map(|i| s.p[i] + c * k.1[i]).collect(),
        t,
    };
    let mut states = Vec::with_capacity(n + 1);
    states.push(s0.clone());
    let mut cur = s0.clone();
    for k in 1..=n {
        let t = s0.t + (k - 1) as f64 * h;
        let k1 = sys.vector_field(&cur)?;
        let k2 = sys.vector_field(&shifted(&cur, &k1, 0.5 * h, t + 0.5 * h))?;
        let k3 = sys.vector_field(&shifted(&cur, &k2, 0.5 * h, t + 0.5 * h))?;
        let k4 = sys.vector_field(&shifted(&cur, &k3, h, t + h))?;
        let next = PhaseState {
            q: (0..d).map(|i| cur.q[i] + h / 6.0 * (k1.0[i] + 2.0 * k2.0[i] + 2.0 * k3.0[i] + k4.0[i])).collect(),
            p: (0..d).map(|i| cur.p[i] + h / 6.0 * (k1.1[i] + 2.0 * k2.1[i] + 2.0 * k3.1[i] + k4.1[i])).collect(),
            t: s0.t + k as f64 * h,
        };
        finite_or(&next, k)?;
        states.push(next.clone());
        cur = next;
    }
    Ok(Trajectory { states, h, sys_name: sys.name.clone(), integrator: IntegratorKind::Rk4 })
}

pub fn integrate(kind: IntegratorKind, sys: &SystemSpec, s0: &PhaseState, h: f64, n: usize) -> Result<Trajectory> {
    match kind {
        IntegratorKind::Verlet => verlet(sys, s0, h, n),
        IntegratorKind::Midpoint => midpoint(sys, s0, h, n),
        IntegratorKind::Rk4 => rk4(sys, s0, h, n),
    }
}

/// Independent trajectories from many initial conditions, in input order.
pub fn integrate_batch(
    kind: IntegratorKind,
    sys: &SystemSpec,
    starts: &[PhaseState],
    h: f64,
    n: usize,
) -> Vec<Result<Trajectory>> {
    starts.par_iter().map(|s0| integrate(kind, sys, s0, h, n)).collect()
}

/// `f(state_k) − f(state_0)` along the trajectory.
pub fn drift(traj: &Trajectory, f: &Observable) -> Result<Vec<f64>> {
    ensure_dim(f.dim(), traj.dim())?;
    let f0 = f.eval(traj.first());
    Ok(traj.states.iter().map(|s| f.eval(s) - f0).collect())
}

/// `|F(state_k) − F(state_0)|` for a complex observable.
pub fn drift_complex(traj: &Trajectory, f: &ComplexObservable) -> Result<Vec<f64>> {
    ensure_dim(f.dim(), traj.dim())?;
    let (r0, i0) = f.eval(traj.first());
    Ok(traj
        .states
        .iter()
        .map(|s| {
            let (r, i) = f.eval(s);
            (r - r0).hypot(i - i0)
        })
        .collect())
}

pub fn max_abs(values: &[f64]) -> f64 {
    values.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

/// Determinant of the one-step tangent map product over `n` steps for a
/// one-degree-of-freedom system (Richardson-extrapolated Jacobians).
pub fn tangent_determinant(kind: IntegratorKind, sys: &SystemSpec, s0: &PhaseState, h: f64, n: usize) -> Result<f64> {
    if sys.dim != 1 {
        return Err(Error::BadDimension(format!("tangent determinant needs d=1, got d={}", sys.dim)));
    }
    let step = |s: &PhaseState| -> Result<PhaseState> {
        let mut t = integrate(kind, sys, s, h, 1)?;
        Ok(t.states.pop().expect("one step"))
    };
    let jac = |s: &PhaseState, delta: f64| -> Result<[[f64; 2]; 2]> {
        let mut j = [[0.0; 2]; 2];
        for c in 0..2 {
            let (mut plus, mut minus) = (s.clone(), s.clone());
            plus.set_coord(c, s.coord(c) + delta);
            minus.set_coord(c, s.coord(c) - delta);
            let (a, b) = (step(&plus)?, step(&minus)?);
            for r in 0..2 {
                j[r][c] = (a.coord(r) - b.coord(r)) / (2.0 * delta);
            }
        }
        Ok(j)
    };
    let mut m = [[1.0, 0.0], [0.0, 1.0]];
    let mut cur = s0.clone();
    const DELTA: f64 = 1e-3;
    for _ in 0..n {
        let (j1, j2) = (jac(&cur, DELTA)?, jac(&cur, 0.5 * DELTA)?);
        let mut j = [[0.0; 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                j[r][c] = (4.0 * j2[r][c] - j1[r][c]) / 3.0;
            }
        }
        m = [
            [j[0][0] * m[0][0] + j[0][1] * m[1][0], j[0][0] * m[0][1] + j[0][1] * m[1][1]],
            [j[1][0] * m[0][0] + j[1][1] * m[1][0], j[1][0] * m[0][1] + j[1][1] * m[1][1]],
        ];
        cur = step(&cur)?;
    }
    Ok(m[0][0] * m[1][1] - m[0][1] * m[1][0])
}
