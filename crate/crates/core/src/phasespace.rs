//! Extended phase space: states `(q, p, t)`, observables on it, Hamiltonian
//! systems and linearised transformation candidates.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dualnum::{richardson_diff, seed, unpack, Dual, GradResult};
use crate::error::{ensure_dim, Error, Result};

/// Base step for gradients of sampled observables (one Richardson level on top).
pub const SAMPLED_FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub t: f64,
}

impl PhaseState {
    pub fn dim(&self) -> usize {
        self.q.len()
    }

    /// Flat coordinate access: `q` in `0..d`, `p` in `d..2d`, `t` at `2d`.
    pub fn coord(&self, k: usize) -> f64 {
        let d = self.dim();
        if k < d {
            self.q[k]
        } else if k < 2 * d {
            self.p[k - d]
        } else {
            self.t
        }
    }

    pub fn set_coord(&mut self, k: usize, v: f64) {
        let d = self.dim();
        if k < d {
            self.q[k] = v;
        } else if k < 2 * d {
            self.p[k - d] = v;
        } else {
            self.t = v;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.q.iter().chain(&self.p).all(|x| x.is_finite())
    }
}

pub fn make_state(q: Vec<f64>, p: Vec<f64>, t: f64) -> Result<PhaseState> {
    ensure_dim(q.len(), p.len())?;
    let s = PhaseState { q, p, t };
    if !s.is_finite() {
        return Err(Error::NonFinite("phase state".into()));
    }
    Ok(s)
}

/// `n` states with `q, p` uniform in `[-box, box]^dim` and `t` uniform in `[0, box]`.
pub fn sample_states(dim: usize, n: usize, seed: u64, box_: f64) -> Vec<PhaseState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let q = (0..dim).map(|_| rng.random_range(-box_..=box_)).collect();
            let p = (0..dim).map(|_| rng.random_range(-box_..=box_)).collect();
            let t = rng.random_range(0.0..=box_);
            PhaseState { q, p, t }
        })
        .collect()
}

pub type DualFn = dyn Fn(&[Dual], &[Dual], &Dual) -> Dual + Send + Sync;
pub type SampledFn = dyn Fn(&PhaseState) -> f64 + Send + Sync;

#[derive(Clone)]
enum Repr {
    Dual(Arc<DualFn>),
    Sampled(Arc<SampledFn>),
}

/// Real function of `(q, p, t)`.
///
/// Observables written against [`Dual`] get exact first derivatives. Observables
/// that can only be sampled (brackets, fields built from other gradients) are
/// differentiated by extrapolated central differences.
#[derive(Clone)]
pub struct Observable {
    label: String,
    dim: usize,
    repr: Repr,
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.repr {
            Repr::Dual(_) => "dual",
            Repr::Sampled(_) => "sampled",
        };
        f.debug_struct("Observable")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("kind", &kind)
            .finish()
    }
}

impl Observable {
    pub fn new(
        label: impl Into<String>,
        dim: usize,
        f: impl Fn(&[Dual], &[Dual], &Dual) -> Dual + Send + Sync + 'static,
    ) -> Self {
        Observable { label: label.into(), dim, repr: Repr::Dual(Arc::new(f)) }
    }

    pub fn sampled(
        label: impl Into<String>,
        dim: usize,
        f: impl Fn(&PhaseState) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Observable { label: label.into(), dim, repr: Repr::Sampled(Arc::new(f)) }
    }

    pub fn q(dim: usize, i: usize) -> Self {
        Observable::new(format!("q{i}"), dim, move |q, _, _| q[i].clone())
    }

    pub fn p(dim: usize, i: usize) -> Self {
        Observable::new(format!("p{i}"), dim, move |_, p, _| p[i].clone())
    }

    pub fn time(dim: usize) -> Self {
        Observable::new("t", dim, |_, _, t| t.clone())
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Observable::new(format!("{c}"), dim, move |_, _, _| Dual::constant(c))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.repr, Repr::Dual(_))
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Value at `s`. Panics only if `s` has the wrong dimension for a closed form
    /// that indexes past it; use [`Observable::try_eval`] at API boundaries.
    pub fn eval(&self, s: &PhaseState) -> f64 {
        match &self.repr {
            Repr::Dual(f) => {
                let q: Vec<Dual> = s.q.iter().map(|&x| Dual::constant(x)).collect();
                let p: Vec<Dual> = s.p.iter().map(|&x| Dual::constant(x)).collect();
                f(&q, &p, &Dual::constant(s.t)).re
            }
            Repr::Sampled(f) => f(s),
        }
    }

    pub fn try_eval(&self, s: &PhaseState) -> Result<f64> {
        ensure_dim(self.dim, s.dim())?;
        let v = self.eval(s);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(self.label.clone()))
        }
    }

    pub(crate) fn grad_unchecked(&self, s: &PhaseState) -> Result<GradResult> {
        match &self.repr {
            Repr::Dual(f) => {
                let (q, p, t) = seed(s);
                Ok(unpack(s.dim(), &f(&q, &p, &t)))
            }
            Repr::Sampled(f) => richardson_diff(|x| f(x), s, SAMPLED_FD_STEP),
        }
    }

    /// Evaluates a closed form on dual inputs; `None` for sampled observables.
    pub fn eval_dual(&self, q: &[Dual], p: &[Dual], t: &Dual) -> Option<Dual> {
        match &self.repr {
            Repr::Dual(f) => Some(f(q, p, t)),
            Repr::Sampled(_) => None,
        }
    }

    fn combine(
        &self,
        other: &Observable,
        label: String,
        op: impl Fn(Dual, Dual) -> Dual + Send + Sync + Copy + 'static,
        op_f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Observable {
        match (&self.repr, &other.repr) {
            (Repr::Dual(f), Repr::Dual(g)) => {
                let (f, g) = (f.clone(), g.clone());
                Observable::new(label, self.dim, move |q, p, t| op(f(q, p, t), g(q, p, t)))
            }
            _ => {
                let (a, b) = (self.clone(), other.clone());
                Observable::sampled(label, self.dim, move |s| op_f(a.eval(s), b.eval(s)))
            }
        }
    }

    pub fn plus(&self, other: &Observable) -> Observable {
        let label = format!("({} + {})", self.label, other.label);
        self.combine(other, label, |a, b| a + b, |a, b| a + b)
    }

    pub fn minus(&self, other: &Observable) -> Observable {
        let label = format!("({} - {})", self.label, other.label);
        self.combine(other, label, |a, b| a - b, |a, b| a - b)
    }

    pub fn times(&self, other: &Observable) -> Observable {
        let label = format!("{}*{}", self.label, other.label);
        self.combine(other, label, |a, b| a * b, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Observable {
        self.times(&Observable::constant(self.dim, c)).with_label(format!("{c}*{}", self.label))
    }
}

/// Complex observable stored as a pair of real observables.
#[derive(Debug, Clone)]
pub struct ComplexObservable {
    pub re: Observable,
    pub im: Observable,
}

impl ComplexObservable {
    pub fn new(re: Observable, im: Observable) -> Self {
        ComplexObservable { re, im }
    }

    pub fn dim(&self) -> usize {
        self.re.dim()
    }

    pub fn conj(&self) -> ComplexObservable {
        ComplexObservable { re: self.re.clone(), im: self.im.scale(-1.0) }
    }

    pub fn eval(&self, s: &PhaseState) -> (f64, f64) {
        (self.re.eval(s), self.im.eval(s))
    }

    /// `|f|²` as a real observable.
    pub fn modulus_squared(&self) -> Observable {
        self.re.times(&self.re).plus(&self.im.times(&self.im))
    }
}

/// A Hamiltonian system. `H` carries no explicit time dependence.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub name: String,
    pub dim: usize,
    pub hamiltonian: Observable,
    pub params: BTreeMap<String, f64>,
    /// `H = K(p) + V(q)`; required by the Verlet integrator.
    pub separable: bool,
}

impl SystemSpec {
    pub fn new(name: impl Into<String>, hamiltonian: Observable, separable: bool) -> Self {
        let mut params = BTreeMap::new();
        params.insert("hbar".to_string(), 1.0);
        SystemSpec { name: name.into(), dim: hamiltonian.dim(), hamiltonian, params, separable }
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }

    pub fn hbar(&self) -> f64 {
        self.param("hbar").unwrap_or(1.0)
    }

    /// Largest `|∂H/∂t|` over `states`; zero for every well-formed system.
    pub fn time_dependence(&self, states: &[PhaseState]) -> Result<f64> {
        let mut worst = 0.0f64;
        for s in states {
            worst = worst.max(crate::dualnum::grad(&self.hamiltonian, s)?.d_t.abs());
        }
        Ok(worst)
    }

    /// Hamiltonian vector field `(∂H/∂p, −∂H/∂q)` at `s`.
    pub fn vector_field(&self, s: &PhaseState) -> Result<(Vec<f64>, Vec<f64>)> {
        let g = crate::dualnum::grad(&self.hamiltonian, s)?;
        Ok((g.d_p, g.d_q.iter().map(|x| -x).collect()))
    }
}

/// Linearised transformation `δq = εφ`, `δp = εχ` with surface term `Λ`.
#[derive(Debug, Clone)]
pub struct Transformation {
    pub phi: Vec<Observable>,
    pub chi: Vec<Observable>,
    pub surface: Observable,
    pub lambda: f64,
}

impl Transformation {
    pub fn new(phi: Vec<Observable>, chi: Vec<Observable>, surface: Observable, lambda: f64) -> Result<Self> {
        let d = surface.dim();
        ensure_dim(d, phi.len())?;
        ensure_dim(d, chi.len())?;
        for o in phi.iter().chain(&chi) {
            ensure_dim(d, o.dim())?;
        }
        if !lambda.is_finite() {
            return Err(Error::NonFinite("lambda".into()));
        }
        Ok(Transformation { phi, chi, surface, lambda })
    }

    pub fn dim(&self) -> usize {
        self.surface.dim()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dualnum::grad;

    #[test]
    fn make_state_examples() {
        let s = make_state(vec![0.0], vec![0.0], 0.0).unwrap();
        assert_eq!(s.dim(), 1);
        assert!(matches!(
            make_state(vec![1.0, 2.0], vec![3.0], 0.0),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(make_state(vec![1.0], vec![f64::NAN], 0.0), Err(Error::NonFinite(_))));
        assert!(matches!(make_state(vec![1.0], vec![1.0], f64::INFINITY), Err(Error::NonFinite(_))));
    }

    #[test]
    fn sampling_is_deterministic_and_bounded() {
        assert_eq!(sample_states(1, 3, 42, 1.0), sample_states(1, 3, 42, 1.0));
        for s in sample_states(2, 100, 7, 2.0) {
            assert!(s.q.iter().chain(&s.p).all(|x| (-2.0..=2.0).contains(x)));
            assert!((0.0..=2.0).contains(&s.t));
        }
        assert_ne!(sample_states(1, 3, 1, 1.0), sample_states(1, 3, 2, 1.0));
    }

    #[test]
    fn coord_roundtrip() {
        let mut s = make_state(vec![1.0, 2.0], vec![3.0, 4.0], 5.0).unwrap();
        let flat: Vec<f64> = (0..5).map(|k| s.coord(k)).collect();
        assert_eq!(flat, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        s.set_coord(3, -4.0);
        assert_eq!(s.p[1], -4.0);
    }

    #[test]
    fn combinators_keep_exact_gradients() {
        let x = Observable::q(1, 0);
        let p = Observable::p(1, 0);
        let f = x.times(&p).plus(&Observable::time(1).scale(2.0));
        assert!(f.is_exact());
        let g = grad(&f, &make_state(vec![2.0], vec![3.0], 1.0).unwrap()).unwrap();
        assert_eq!((g.value, g.d_q[0], g.d_p[0], g.d_t), (8.0, 3.0, 2.0, 2.0));
    }

    #[test]
    fn sampled_observable_gradient() {
        let f = Observable::sampled("s", 1, |s| s.q[0].powi(3) * s.p[0] + s.t.sin());
        assert!(!f.is_exact());
        let s = make_state(vec![0.7], vec![-1.2], 0.4).unwrap();
        let g = grad(&f, &s).unwrap();
        assert!((g.d_q[0] - 3.0 * 0.49 * -1.2).abs() < 1e-9);
        assert!((g.d_p[0] - 0.343).abs() < 1e-9);
        assert!((g.d_t - 0.4f64.cos()).abs() < 1e-9);
    }

    #[test]
    fn transformation_checks_lengths() {
        let o = Observable::constant(2, 1.0);
        assert!(Transformation::new(vec![o.clone()], vec![o.clone(), o.clone()], o.clone(), 0.5).is_err());
        assert!(Transformation::new(vec![o.clone(), o.clone()], vec![o.clone(), o.clone()], o, 0.5).is_ok());
    }

    #[test]
    fn complex_modulus() {
        let z = ComplexObservable::new(Observable::q(1, 0), Observable::p(1, 0));
        let s = make_state(vec![3.0], vec![4.0], 0.0).unwrap();
        assert_eq!(z.modulus_squared().eval(&s), 25.0);
        assert_eq!(z.conj().eval(&s), (3.0, -4.0));
    }
}
