//! Forward-mode dual numbers with a vector of derivative slots, plus a
//! central-difference oracle for cross-checking.
//!
//! A [`Dual`] with an empty slot vector is a constant; binary operations
//! broadcast it against any width so model code can mix literals freely.

use std::ops::{Add, Div, Mul, Neg, Sub};

use smallvec::SmallVec;

use crate::error::{ensure_dim, ensure_finite, Error, Result};
use crate::phasespace::{Observable, PhaseState};

pub type Slots = SmallVec<[f64; 8]>;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dual {
    pub re: f64,
    pub eps: Slots,
}

impl Dual {
    pub fn constant(re: f64) -> Self {
        Dual { re, eps: Slots::new() }
    }

    /// Independent variable occupying slot `index` of `width`.
    pub fn variable(re: f64, index: usize, width: usize) -> Self {
        let mut eps = Slots::from_elem(0.0, width);
        eps[index] = 1.0;
        Dual { re, eps }
    }

    pub fn value(&self) -> f64 {
        self.re
    }

    pub fn deriv(&self, slot: usize) -> f64 {
        self.eps.get(slot).copied().unwrap_or(0.0)
    }

    /// Chain rule for a scalar function with value `f` and derivative `df` at `self.re`.
    fn chain(&self, f: f64, df: f64) -> Dual {
        Dual { re: f, eps: self.eps.iter().map(|e| df * e).collect() }
    }

    pub fn sin(&self) -> Dual {
        self.chain(self.re.sin(), self.re.cos())
    }

    pub fn cos(&self) -> Dual {
        self.chain(self.re.cos(), -self.re.sin())
    }

    pub fn exp(&self) -> Dual {
        let e = self.re.exp();
        self.chain(e, e)
    }

    pub fn ln(&self) -> Dual {
        self.chain(self.re.ln(), self.re.recip())
    }

    pub fn sqrt(&self) -> Dual {
        let r = self.re.sqrt();
        self.chain(r, 0.5 / r)
    }

    pub fn powi(&self, n: i32) -> Dual {
        if n == 0 {
            return Dual::constant(1.0);
        }
        self.chain(self.re.powi(n), n as f64 * self.re.powi(n - 1))
    }

    pub fn powf(&self, n: f64) -> Dual {
        self.chain(self.re.powf(n), n * self.re.powf(n - 1.0))
    }

    pub fn recip(&self) -> Dual {
        let r = self.re.recip();
        self.chain(r, -r * r)
    }

    pub fn sinh(&self) -> Dual {
        self.chain(self.re.sinh(), self.re.cosh())
    }

    pub fn cosh(&self) -> Dual {
        self.chain(self.re.cosh(), self.re.sinh())
    }

    pub fn atan(&self) -> Dual {
        self.chain(self.re.atan(), 1.0 / (1.0 + self.re * self.re))
    }

    pub fn square(&self) -> Dual {
        self * self
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.eps.iter().all(|e| e.is_finite())
    }
}

impl From<f64> for Dual {
    fn from(re: f64) -> Self {
        Dual::constant(re)
    }
}

fn zip_with(a: &Slots, b: &Slots, f: impl Fn(f64, f64) -> f64) -> Slots {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| f(a.get(i).copied().unwrap_or(0.0), b.get(i).copied().unwrap_or(0.0)))
        .collect()
}

fn add_dd(a: &Dual, b: &Dual) -> Dual {
    Dual { re: a.re + b.re, eps: zip_with(&a.eps, &b.eps, |x, y| x + y) }
}

fn sub_dd(a: &Dual, b: &Dual) -> Dual {
    Dual { re: a.re - b.re, eps: zip_with(&a.eps, &b.eps, |x, y| x - y) }
}

fn mul_dd(a: &Dual, b: &Dual) -> Dual {
    let (ar, br) = (a.re, b.re);
    Dual { re: ar * br, eps: zip_with(&a.eps, &b.eps, |x, y| ar * y + br * x) }
}

fn div_dd(a: &Dual, b: &Dual) -> Dual {
    let (ar, br) = (a.re, b.re);
    let inv = 1.0 / br;
    Dual { re: ar * inv, eps: zip_with(&a.eps, &b.eps, |x, y| (x * br - ar * y) * inv * inv) }
}

macro_rules! dual_binop {
    ($trait:ident, $method:ident, $f:ident) => {
        impl $trait<&Dual> for &Dual {
            type Output = Dual;
            fn $method(self, rhs: &Dual) -> Dual {
                $f(self, rhs)
            }
        }
        impl $trait<Dual> for Dual {
            type Output = Dual;
            fn $method(self, rhs: Dual) -> Dual {
                $f(&self, &rhs)
            }
        }
        impl $trait<&Dual> for Dual {
            type Output = Dual;
            fn $method(self, rhs: &Dual) -> Dual {
                $f(&self, rhs)
            }
        }
        impl $trait<Dual> for &Dual {
            type Output = Dual;
            fn $method(self, rhs: Dual) -> Dual {
                $f(self, &rhs)
            }
        }
        impl $trait<f64> for Dual {
            type Output = Dual;
            fn $method(self, rhs: f64) -> Dual {
                $f(&self, &Dual::constant(rhs))
            }
        }
        impl $trait<f64> for &Dual {
            type Output = Dual;
            fn $method(self, rhs: f64) -> Dual {
                $f(self, &Dual::constant(rhs))
            }
        }
        impl $trait<Dual> for f64 {
            type Output = Dual;
            fn $method(self, rhs: Dual) -> Dual {
                $f(&Dual::constant(self), &rhs)
            }
        }
        impl $trait<&Dual> for f64 {
            type Output = Dual;
            fn $method(self, rhs: &Dual) -> Dual {
                $f(&Dual::constant(self), rhs)
            }
        }
    };
}

dual_binop!(Add, add, add_dd);
dual_binop!(Sub, sub, sub_dd);
dual_binop!(Mul, mul, mul_dd);
dual_binop!(Div, div, div_dd);

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual { re: -self.re, eps: self.eps.iter().map(|e| -e).collect() }
    }
}

impl Neg for &Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        -(self.clone())
    }
}

impl std::iter::Sum for Dual {
    fn sum<I: Iterator<Item = Dual>>(iter: I) -> Dual {
        iter.fold(Dual::constant(0.0), |acc, x| acc + x)
    }
}

/// Value and first partials of a real observable at one phase-space point.
#[derive(Debug, Clone, PartialEq)]
pub struct GradResult {
    pub value: f64,
    pub d_q: Vec<f64>,
    pub d_p: Vec<f64>,
    pub d_t: f64,
}

impl GradResult {
    pub fn dim(&self) -> usize {
        self.d_q.len()
    }

    /// Linear combination `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &GradResult, b: f64) -> GradResult {
        GradResult {
            value: a * self.value + b * other.value,
            d_q: self.d_q.iter().zip(&other.d_q).map(|(x, y)| a * x + b * y).collect(),
            d_p: self.d_p.iter().zip(&other.d_p).map(|(x, y)| a * x + b * y).collect(),
            d_t: a * self.d_t + b * other.d_t,
        }
    }

    /// Largest absolute difference over value and every partial.
    pub fn max_abs_diff(&self, other: &GradResult) -> f64 {
        let mut m = (self.value - other.value).abs().max((self.d_t - other.d_t).abs());
        for (x, y) in self.d_q.iter().zip(&other.d_q).chain(self.d_p.iter().zip(&other.d_p)) {
            m = m.max((x - y).abs());
        }
        m
    }

    fn check_finite(&self, label: &str) -> Result<()> {
        let ok = self.value.is_finite()
            && self.d_t.is_finite()
            && self.d_q.iter().chain(&self.d_p).all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::NonFinite(label.to_string()))
        }
    }
}

/// Seeds q (slots 0..d), p (d..2d) and t (2d) for a single vector-mode pass.
pub fn seed(s: &PhaseState) -> (Vec<Dual>, Vec<Dual>, Dual) {
    let d = s.dim();
    let w = 2 * d + 1;
    let q = (0..d).map(|i| Dual::variable(s.q[i], i, w)).collect();
    let p = (0..d).map(|i| Dual::variable(s.p[i], d + i, w)).collect();
    (q, p, Dual::variable(s.t, 2 * d, w))
}

pub(crate) fn unpack(d: usize, out: &Dual) -> GradResult {
    GradResult {
        value: out.re,
        d_q: (0..d).map(|i| out.deriv(i)).collect(),
        d_p: (0..d).map(|i| out.deriv(d + i)).collect(),
        d_t: out.deriv(2 * d),
    }
}

/// All first partials of `f` at `s`, by dual numbers when `f` is built from a
/// closed form and by extrapolated differences when it is only sampled.
pub fn grad(f: &Observable, s: &PhaseState) -> Result<GradResult> {
    ensure_dim(f.dim(), s.dim())?;
    let g = f.grad_unchecked(s)?;
    g.check_finite(f.label())?;
    Ok(g)
}

/// Central-difference gradient with step `h`; the oracle for [`grad`].
pub fn fd_grad(f: &Observable, s: &PhaseState, h: f64) -> Result<GradResult> {
    ensure_dim(f.dim(), s.dim())?;
    if !(h > 0.0) {
        return Err(Error::BadParameter(format!("finite-difference step must be positive, got {h}")));
    }
    let g = central_diff(|x| f.eval(x), s, h)?;
    g.check_finite(f.label())?;
    Ok(g)
}

pub(crate) fn central_diff(
    f: impl Fn(&PhaseState) -> f64,
    s: &PhaseState,
    h: f64,
) -> Result<GradResult> {
    let d = s.dim();
    let value = ensure_finite(f(s), "observable value")?;
    let mut probe = s.clone();
    let mut partial = |k: usize| {
        let x0 = probe.coord(k);
        probe.set_coord(k, x0 + h);
        let fp = f(&probe);
        probe.set_coord(k, x0 - h);
        let fm = f(&probe);
        probe.set_coord(k, x0);
        (fp - fm) / (2.0 * h)
    };
    let all: Vec<f64> = (0..=2 * d).map(&mut partial).collect();
    Ok(GradResult {
        value,
        d_q: all[..d].to_vec(),
        d_p: all[d..2 * d].to_vec(),
        d_t: all[2 * d],
    })
}

/// One Richardson step on central differences: `(4 D(h/2) − D(h)) / 3`, error O(h⁴).
pub(crate) fn richardson_diff(
    f: impl Fn(&PhaseState) -> f64,
    s: &PhaseState,
    h: f64,
) -> Result<GradResult> {
    let coarse = central_diff(&f, s, h)?;
    let fine = central_diff(&f, s, 0.5 * h)?;
    Ok(fine.combine(4.0 / 3.0, &coarse, -1.0 / 3.0))
}
