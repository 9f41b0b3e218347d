//! Poisson brackets, total time derivatives, Jacobi residuals, bracket tables
//! and Lie-closure checks for conserved observables.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::dualnum::grad;
use crate::error::{ensure_dim, Error, Result};
use crate::phasespace::{ComplexObservable, Observable, PhaseState, SystemSpec};

/// `{f, g} = Σ (∂f/∂q ∂g/∂p − ∂f/∂p ∂g/∂q)`.
pub fn bracket(f: &Observable, g: &Observable, s: &PhaseState) -> Result<f64> {
    ensure_dim(f.dim(), g.dim())?;
    let (a, b) = (grad(f, s)?, grad(g, s)?);
    Ok(a.d_q.iter().zip(&b.d_p).map(|(x, y)| x * y).sum::<f64>()
        - a.d_p.iter().zip(&b.d_q).map(|(x, y)| x * y).sum::<f64>())
}

/// Bracket of complex observables, bilinear over the real/imaginary split.
pub fn bracket_complex(f: &ComplexObservable, g: &ComplexObservable, s: &PhaseState) -> Result<Complex64> {
    let rr = bracket(&f.re, &g.re, s)?;
    let ii = bracket(&f.im, &g.im, s)?;
    let ri = bracket(&f.re, &g.im, s)?;
    let ir = bracket(&f.im, &g.re, s)?;
    Ok(Complex64::new(rr - ii, ri + ir))
}

/// `{f, g}` as a new (sampled) observable.
pub fn bracket_observable(f: &Observable, g: &Observable) -> Observable {
    let (f2, g2) = (f.clone(), g.clone());
    Observable::sampled(format!("{{{},{}}}", f.label(), g.label()), f.dim(), move |s| {
        bracket(&f2, &g2, s).unwrap_or(f64::NAN)
    })
}

/// `df/dt = ∂f/∂t + {f, H}`.
pub fn total_derivative(f: &Observable, sys: &SystemSpec, s: &PhaseState) -> Result<f64> {
    ensure_dim(sys.dim, f.dim())?;
    let g = grad(f, s)?;
    let h = grad(&sys.hamiltonian, s)?;
    let br = g.d_q.iter().zip(&h.d_p).map(|(x, y)| x * y).sum::<f64>()
        - g.d_p.iter().zip(&h.d_q).map(|(x, y)| x * y).sum::<f64>();
    Ok(g.d_t + br)
}

pub fn total_derivative_complex(f: &ComplexObservable, sys: &SystemSpec, s: &PhaseState) -> Result<Complex64> {
    Ok(Complex64::new(total_derivative(&f.re, sys, s)?, total_derivative(&f.im, sys, s)?))
}

/// `|{f,{g,h}} + {g,{h,f}} + {h,{f,g}}|`; outer brackets differentiate the
/// inner ones numerically.
pub fn jacobi_residual(f: &Observable, g: &Observable, h: &Observable, s: &PhaseState) -> Result<f64> {
    ensure_dim(f.dim(), g.dim())?;
    ensure_dim(f.dim(), h.dim())?;
    let a = bracket(f, &bracket_observable(g, h), s)?;
    let b = bracket(g, &bracket_observable(h, f), s)?;
    let c = bracket(h, &bracket_observable(f, g), s)?;
    let r = (a + b + c).abs();
    if r.is_finite() {
        Ok(r)
    } else {
        Err(Error::NonFinite("jacobi residual".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BracketTable {
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub state: StateEcho,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateEcho {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub t: f64,
}

impl From<&PhaseState> for StateEcho {
    fn from(s: &PhaseState) -> Self {
        StateEcho { q: s.q.clone(), p: s.p.clone(), t: s.t }
    }
}

impl BracketTable {
    /// Largest `|values[i][j] + values[j][i]|`.
    pub fn antisymmetry_defect(&self) -> f64 {
        let n = self.values.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.values[i][j] + self.values[j][i]).abs());
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, expected: &[Vec<f64>]) -> f64 {
        self.values
            .iter()
            .flatten()
            .zip(expected.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Full bracket table at one state. Each pair is evaluated once and mirrored.
pub fn bracket_table(obs: &[Observable], s: &PhaseState) -> Result<BracketTable> {
    let n = obs.len();
    if let Some(first) = obs.first() {
        for o in obs {
            ensure_dim(first.dim(), o.dim())?;
        }
        ensure_dim(first.dim(), s.dim())?;
    }
    let mut values = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let b = bracket(&obs[i], &obs[j], s)?;
            values[i][j] = b;
            values[j][i] = -b;
        }
    }
    Ok(BracketTable {
        labels: obs.iter().map(|o| o.label().to_string()).collect(),
        values,
        state: s.into(),
    })
}

/// Tables at many states, in input order.
pub fn bracket_tables(obs: &[Observable], states: &[PhaseState]) -> Result<Vec<BracketTable>> {
    states.par_iter().map(|s| bracket_table(obs, s)).collect()
}

/// Per-entry spread (max − min) of structure constants across tables. Zero
/// entries mark brackets that are constant; nonzero ones are observable-valued.
pub fn structure_spread(tables: &[BracketTable]) -> Vec<Vec<f64>> {
    let Some(first) = tables.first() else { return Vec::new() };
    let n = first.values.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let (lo, hi) = tables
                .iter()
                .map(|t| t.values[i][j])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            out[i][j] = hi - lo;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairResidual {
    pub left: String,
    pub right: String,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosureReport {
    pub pairs: Vec<PairResidual>,
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn max_total_derivative(f: &Observable, sys: &SystemSpec, states: &[PhaseState]) -> Result<f64> {
    let vals: Result<Vec<f64>> = states.par_iter().map(|s| total_derivative(f, sys, s).map(f64::abs)).collect();
    Ok(vals?.into_iter().fold(0.0, f64::max))
}

/// Checks that brackets of conserved observables are again conserved.
pub fn closure_check(obs: &[Observable], sys: &SystemSpec, states: &[PhaseState], tol: f64) -> Result<ClosureReport> {
    for o in obs {
        let r = max_total_derivative(o, sys, states)?;
        if !(r < tol) {
            return Err(Error::PrecheckFailed(format!(
                "`{}` is not conserved (max |dF/dt| = {r:.3e})",
                o.label()
            )));
        }
    }
    let mut pairs = Vec::new();
    for i in 0..obs.len() {
        for j in i + 1..obs.len() {
            let b = bracket_observable(&obs[i], &obs[j]);
            let residual = max_total_derivative(&b, sys, states)?;
            pairs.push(PairResidual {
                left: obs[i].label().to_string(),
                right: obs[j].label().to_string(),
                residual,
            });
        }
    }
    let max_residual = pairs.iter().map(|p| p.residual).fold(0.0, f64::max);
    Ok(ClosureReport { pairs, max_residual, tolerance: tol, passed: max_residual < tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dualnum::fd_grad;
    use crate::models::{constant_force_system, harmonic_system};
    use crate::phasespace::{make_state, sample_states};
    use proptest::prelude::*;

    fn free_particle(m: f64) -> SystemSpec {
        SystemSpec::new("free", Observable::new("H", 1, move |_, p, _| p[0].square() / (2.0 * m)), true)
    }

    fn fd_bracket(f: &Observable, g: &Observable, s: &PhaseState) -> f64 {
        let (a, b) = (fd_grad(f, s, 1e-5).unwrap(), fd_grad(g, s, 1e-5).unwrap());
        a.d_q.iter().zip(&b.d_p).map(|(x, y)| x * y).sum::<f64>()
            - a.d_p.iter().zip(&b.d_q).map(|(x, y)| x * y).sum::<f64>()
    }

    #[test]
    fn canonical_brackets() {
        for s in sample_states(3, 10, 3, 2.0) {
            for i in 0..3 {
                for j in 0..3 {
                    let b = bracket(&Observable::q(3, i), &Observable::p(3, j), &s).unwrap();
                    assert_eq!(b, if i == j { 1.0 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn h_with_itself_vanishes() {
        let sys = constant_force_system(1.3, &[0.5, -2.0]).unwrap();
        for s in sample_states(2, 20, 5, 2.0) {
            assert_eq!(bracket(&sys.system.hamiltonian, &sys.system.hamiltonian, &s).unwrap(), 0.0);
        }
    }

    #[test]
    fn translation_boost_central_extension() {
        let m = constant_force_system(1.7, &[0.4, -1.0, 2.3]).unwrap();
        for s in sample_states(3, 50, 9, 2.0) {
            for i in 0..3 {
                for j in 0..3 {
                    let b = bracket(&m.t[i], &m.gamma[j], &s).unwrap();
                    let want = if i == j { 1.7 } else { 0.0 };
                    assert!((b - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn total_derivative_examples() {
        let m = constant_force_system(1.0, &[2.0]).unwrap();
        let free = free_particle(1.5);
        let osc = harmonic_system(&[2.0], 0.0).unwrap();
        for s in sample_states(1, 100, 13, 2.0) {
            assert!(total_derivative(&m.t[0], &m.system, &s).unwrap().abs() < 1e-12);
            assert_eq!(total_derivative(&Observable::p(1, 0), &free, &s).unwrap(), 0.0);
            let a = total_derivative_complex(&osc.a[0], &osc.system, &s).unwrap();
            assert!(a.norm() < 1e-10);
        }
    }

    #[test]
    fn jacobi_examples() {
        let x = Observable::q(1, 0);
        let p = Observable::p(1, 0);
        let quartic = Observable::new("H", 1, |q, p, _| p[0].square() * 0.5 + q[0].powi(4) - &q[0] * &p[0]);
        let m = constant_force_system(1.3, &[0.7]).unwrap();
        let xx = x.times(&x);
        let pp = p.times(&p);
        let xp = x.times(&p);
        for s in sample_states(1, 20, 17, 1.5) {
            assert!(jacobi_residual(&x, &p, &quartic, &s).unwrap() < 1e-6);
            assert!(jacobi_residual(&m.t[0], &m.gamma[0], &m.system.hamiltonian, &s).unwrap() < 1e-6);
            assert!(jacobi_residual(&xx, &pp, &xp, &s).unwrap() < 1e-6);
        }
    }

    #[test]
    fn bracket_table_examples() {
        let m = constant_force_system(1.0, &[3.0]).unwrap();
        let obs = [m.t[0].clone(), m.gamma[0].clone(), m.system.hamiltonian.clone()];
        for s in sample_states(1, 20, 21, 2.0) {
            let tab = bracket_table(&obs, &s).unwrap();
            let t0 = m.t[0].eval(&s);
            let want = vec![vec![0.0, 1.0, 3.0], vec![-1.0, 0.0, -t0], vec![-3.0, t0, 0.0]];
            assert!(tab.max_abs_diff(&want) < 1e-12, "{:?}", tab.values);
            assert_eq!(tab.antisymmetry_defect(), 0.0);
        }
        let s = make_state(vec![0.2], vec![0.1], 0.0).unwrap();
        let single = bracket_table(&obs[..1], &s).unwrap();
        assert_eq!(single.values, vec![vec![0.0]]);
        let xp = bracket_table(&[Observable::q(1, 0), Observable::p(1, 0)], &s).unwrap();
        assert_eq!(xp.values, vec![vec![0.0, 1.0], vec![-1.0, 0.0]]);
    }

    #[test]
    fn structure_spread_separates_constant_and_dynamic_entries() {
        let m = constant_force_system(1.0, &[3.0]).unwrap();
        let obs = [m.t[0].clone(), m.gamma[0].clone(), m.system.hamiltonian.clone()];
        let tables = bracket_tables(&obs, &sample_states(1, 10, 2, 2.0)).unwrap();
        let spread = structure_spread(&tables);
        assert!(spread[0][1] < 1e-12 && spread[0][2] < 1e-12);
        assert!(spread[1][2] > 1e-3);
    }

    #[test]
    fn closure_examples() {
        let m = constant_force_system(1.2, &[0.8]).unwrap();
        let states = sample_states(1, 30, 4, 2.0);
        let r = closure_check(&[m.t[0].clone(), m.gamma[0].clone()], &m.system, &states, 1e-9).unwrap();
        assert!(r.passed, "{r:?}");

        let osc = harmonic_system(&[1.4], 0.0).unwrap();
        let r = closure_check(&[osc.a[0].re.clone(), osc.a[0].im.clone()], &osc.system, &states, 1e-9).unwrap();
        assert!(r.passed, "{r:?}");

        let err = closure_check(&[m.t[0].clone(), Observable::q(1, 0)], &m.system, &states, 1e-9);
        assert!(matches!(err, Err(Error::PrecheckFailed(_))));
    }

    #[test]
    fn dual_matches_fd_bracket() {
        let m = constant_force_system(0.9, &[0.3, -1.1]).unwrap();
        let obs: Vec<Observable> = m.t.iter().chain(&m.gamma).cloned().chain([m.system.hamiltonian.clone()]).collect();
        for s in sample_states(2, 30, 8, 2.0) {
            for f in &obs {
                for g in &obs {
                    assert!((bracket(f, g, &s).unwrap() - fd_bracket(f, g, &s)).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn conserved_product_is_conserved() {
        let m = constant_force_system(1.1, &[0.6]).unwrap();
        let prod = m.t[0].times(&m.gamma[0]);
        for s in sample_states(1, 50, 31, 2.0) {
            assert!(total_derivative(&prod, &m.system, &s).unwrap().abs() < 1e-9);
        }
    }

    fn poly() -> impl Strategy<Value = [f64; 5]> {
        proptest::array::uniform5(-2.0..2.0f64)
    }

    fn make_poly(c: [f64; 5]) -> Observable {
        Observable::new("f", 2, move |q, p, t| {
            &q[0] * &p[1] * c[0] + q[1].square() * c[1] + (&p[0] * t).sin() * c[2] + q[0].powi(3) * c[3] + &p[1] * c[4]
        })
    }

    proptest! {
        #[test]
        fn antisymmetry(cf in poly(), cg in poly(), seed in 0u64..500) {
            let (f, g) = (make_poly(cf), make_poly(cg));
            for s in sample_states(2, 5, seed, 2.0) {
                let a = bracket(&f, &g, &s).unwrap();
                let b = bracket(&g, &f, &s).unwrap();
                prop_assert!((a + b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }

        #[test]
        fn leibniz(cf in poly(), cg in poly(), ch in poly(), seed in 0u64..500) {
            let (f, g, h) = (make_poly(cf), make_poly(cg), make_poly(ch));
            let fg = f.times(&g);
            for s in sample_states(2, 5, seed, 2.0) {
                let lhs = bracket(&fg, &h, &s).unwrap();
                let rhs = f.eval(&s) * bracket(&g, &h, &s).unwrap() + g.eval(&s) * bracket(&f, &h, &s).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
            }
        }
    }
}
