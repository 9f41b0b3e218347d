//! Built-in systems with closed-form charges: harmonic oscillators, a periodic
//! scalar lattice reduced to normal modes, and a particle under constant force.

use std::f64::consts::PI;

use crate::dualnum::Dual;
use crate::error::{ensure_dim, Error, Result};
use crate::phasespace::{ComplexObservable, Observable, PhaseState, SystemSpec, Transformation};

type CDual = (Dual, Dual);

fn cmul(a: &CDual, b: &CDual) -> CDual {
    (&a.0 * &b.0 - &a.1 * &b.1, &a.0 * &b.1 + &a.1 * &b.0)
}

fn cpow(z: &CDual, n: u32) -> CDual {
    (0..n).fold((Dual::constant(1.0), Dual::constant(0.0)), |acc, _| cmul(&acc, z))
}

/// Real and imaginary parts of `A(t) = e^{iω(t−t₀)} √(ω/2)(q + ip/ω)`.
fn fock_charge(omega: f64, t0: f64, q: &Dual, p: &Dual, t: &Dual) -> CDual {
    let theta = (t - t0) * omega;
    let (c, s) = (theta.cos(), theta.sin());
    let k = (omega / 2.0).sqrt();
    let pw = p / omega;
    ((&c * q - &s * &pw) * k, (&s * q + &c * &pw) * k)
}

#[derive(Debug, Clone)]
pub struct HarmonicSystem {
    pub system: SystemSpec,
    pub omegas: Vec<f64>,
    pub t0: f64,
    /// `A_α(t)` for each mode.
    pub a: Vec<ComplexObservable>,
    /// `Σ ω_α |A_α|²`, the Hamiltonian written through the charges.
    pub h_from_charges: Observable,
}

impl HarmonicSystem {
    /// `A†^j A^k` for mode `alpha`.
    pub fn monomial(&self, alpha: usize, j: u32, k: u32) -> ComplexObservable {
        let (omega, t0, d) = (self.omegas[alpha], self.t0, self.omegas.len());
        let part = move |q: &[Dual], p: &[Dual], t: &Dual| {
            let a = fock_charge(omega, t0, &q[alpha], &p[alpha], t);
            let adag = (a.0.clone(), -&a.1);
            cmul(&cpow(&adag, j), &cpow(&a, k))
        };
        let label = format!("Adag{alpha}^{j} A{alpha}^{k}");
        ComplexObservable::new(
            Observable::new(format!("Re[{label}]"), d, move |q, p, t| part(q, p, t).0),
            Observable::new(format!("Im[{label}]"), d, move |q, p, t| part(q, p, t).1),
        )
    }

    /// Exact flow of mode `alpha` from `s0` to time `t`.
    pub fn exact_state(&self, s0: &PhaseState, t: f64) -> PhaseState {
        let mut out = s0.clone();
        let dt = t - s0.t;
        for (i, &w) in self.omegas.iter().enumerate() {
            let (c, s) = ((w * dt).cos(), (w * dt).sin());
            out.q[i] = c * s0.q[i] + s * s0.p[i] / w;
            out.p[i] = -w * s * s0.q[i] + c * s0.p[i];
        }
        out.t = t;
        out
    }
}

/// `H = Σ (½p² + ½ω²q²)` with Fock charges referenced to `t0`.
pub fn harmonic_system(omegas: &[f64], t0: f64) -> Result<HarmonicSystem> {
    if omegas.is_empty() {
        return Err(Error::BadDimension("at least one frequency is required".into()));
    }
    if let Some(&w) = omegas.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
        return Err(Error::BadFrequency(w));
    }
    if !t0.is_finite() {
        return Err(Error::NonFinite("t0".into()));
    }
    let d = omegas.len();
    let ws = omegas.to_vec();
    let w2 = ws.clone();
    let h = Observable::new("H", d, move |q, p, _| {
        (0..w2.len()).map(|i| p[i].square() * 0.5 + q[i].square() * (0.5 * w2[i] * w2[i])).sum()
    });
    let mut system = SystemSpec::new("harmonic", h, true).with_param("t0", t0);
    for (i, w) in omegas.iter().enumerate() {
        system = system.with_param(&format!("omega{i}"), *w);
    }
    let a = (0..d)
        .map(|i| {
            let w = omegas[i];
            ComplexObservable::new(
                Observable::new(format!("ReA{i}"), d, move |q, p, t| fock_charge(w, t0, &q[i], &p[i], t).0),
                Observable::new(format!("ImA{i}"), d, move |q, p, t| fock_charge(w, t0, &q[i], &p[i], t).1),
            )
        })
        .collect();
    let h_from_charges = Observable::new("sum w|A|^2", d, move |q, p, t| {
        (0..ws.len())
            .map(|i| {
                let (re, im) = fock_charge(ws[i], t0, &q[i], &p[i], t);
                (re.square() + im.square()) * ws[i]
            })
            .sum()
    });
    Ok(HarmonicSystem { system, omegas: omegas.to_vec(), t0, a, h_from_charges })
}

#[derive(Debug, Clone)]
pub struct LatticeScalarSystem {
    /// Normal-mode form; mode `k` has coordinates `(q_k, p_k)`.
    pub modes: HarmonicSystem,
    /// Lattice form in site variables `(φ_j, π_j)`, periodic.
    pub sites: SystemSpec,
    pub n_sites: usize,
    pub mu: f64,
    pub spacing: f64,
    /// Orthonormal real profiles: `profiles[k][j]`.
    pub profiles: Vec<Vec<f64>>,
    /// `true` when `profiles[k]` is a cosine profile, `false` for sine.
    pub is_cosine: Vec<bool>,
}

pub fn lattice_dispersion(k: usize, n: usize, mu: f64, spacing: f64) -> f64 {
    let s = (PI * k as f64 / n as f64).sin();
    (mu * mu + (2.0 / spacing).powi(2) * s * s).sqrt()
}

/// Periodic 1-d lattice `H = Σ [½π² + (φ_{j+1}−φ_j)²/(2a²) + ½μ²φ²]`.
pub fn lattice_scalar_system(n_sites: usize, mu: f64, spacing: f64) -> Result<LatticeScalarSystem> {
    if n_sites == 0 {
        return Err(Error::BadDimension("lattice needs at least one site".into()));
    }
    if mu == 0.0 {
        return Err(Error::ZeroModeUnsupported);
    }
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::BadParameter(format!("mass must be positive, got {mu}")));
    }
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(Error::BadParameter(format!("spacing must be positive, got {spacing}")));
    }
    let n = n_sites;
    let omegas: Vec<f64> = (0..n).map(|k| lattice_dispersion(k, n, mu, spacing)).collect();
    let mut profiles = Vec::with_capacity(n);
    let mut is_cosine = Vec::with_capacity(n);
    for k in 0..n {
        let cosine = 2 * k <= n;
        let norm = if k == 0 || 2 * k == n { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        let prof = (0..n)
            .map(|j| {
                let arg = 2.0 * PI * (k * j) as f64 / n as f64;
                norm * if cosine { arg.cos() } else { arg.sin() }
            })
            .collect();
        profiles.push(prof);
        is_cosine.push(cosine);
    }
    let mut modes = harmonic_system(&omegas, 0.0)?;
    modes.system.name = "lattice_scalar".into();
    let (m2, a2) = (mu * mu, spacing * spacing);
    let h = Observable::new("H_lattice", n, move |phi, pi, _| {
        (0..n)
            .map(|j| {
                let grad = &phi[(j + 1) % n] - &phi[j];
                pi[j].square() * 0.5 + grad.square() / (2.0 * a2) + phi[j].square() * (0.5 * m2)
            })
            .sum()
    });
    let sites = SystemSpec::new("lattice_scalar_sites", h, true)
        .with_param("mu", mu)
        .with_param("spacing", spacing);
    Ok(LatticeScalarSystem { modes, sites, n_sites, mu, spacing, profiles, is_cosine })
}

impl LatticeScalarSystem {
    /// Site state to normal-mode state (orthogonal map on `φ` and `π` alike).
    pub fn to_modes(&self, s: &PhaseState) -> Result<PhaseState> {
        ensure_dim(self.n_sites, s.dim())?;
        let proj = |v: &[f64]| -> Vec<f64> {
            self.profiles.iter().map(|u| u.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
        };
        Ok(PhaseState { q: proj(&s.q), p: proj(&s.p), t: s.t })
    }

    pub fn to_sites(&self, s: &PhaseState) -> Result<PhaseState> {
        ensure_dim(self.n_sites, s.dim())?;
        let n = self.n_sites;
        let back = |v: &[f64]| -> Vec<f64> {
            (0..n).map(|j| (0..n).map(|k| self.profiles[k][j] * v[k]).sum()).collect()
        };
        Ok(PhaseState { q: back(&s.q), p: back(&s.p), t: s.t })
    }

    /// `Σ_k k ω_k |A_k|²`: diagonal in modes, hence in involution with `H`.
    pub fn momentum_like_charge(&self) -> Observable {
        let terms: Vec<Observable> = self
            .modes
            .a
            .iter()
            .enumerate()
            .map(|(k, a)| a.modulus_squared().scale(k as f64 * self.modes.omegas[k]))
            .collect();
        terms
            .iter()
            .skip(1)
            .fold(terms[0].clone(), |acc, o| acc.plus(o))
            .with_label("P")
    }
}

#[derive(Debug, Clone)]
pub struct RotationCharge {
    pub i: usize,
    pub j: usize,
    /// `x⊥_i p⊥_j − x⊥_j p⊥_i`.
    pub direct: Observable,
    /// `−(γ⊥_i T⊥_j − γ⊥_j T⊥_i)/m`.
    pub from_charges: Observable,
}

#[derive(Debug, Clone)]
pub struct ConstantForceSystem {
    pub system: SystemSpec,
    pub mass: f64,
    pub force: Vec<f64>,
    /// `T_i = p_i − tF_i`.
    pub t: Vec<Observable>,
    /// `γ_i = −m x_i + t p_i − ½t²F_i`.
    pub gamma: Vec<Observable>,
}

/// `H = p²/2m − x·F`.
pub fn constant_force_system(mass: f64, force: &[f64]) -> Result<ConstantForceSystem> {
    if !(mass > 0.0) || !mass.is_finite() {
        return Err(Error::BadParameter(format!("mass must be positive, got {mass}")));
    }
    if force.is_empty() {
        return Err(Error::BadDimension("force vector must have at least one component".into()));
    }
    if force.iter().any(|f| !f.is_finite()) {
        return Err(Error::NonFinite("force".into()));
    }
    let d = force.len();
    let f = force.to_vec();
    let fh = f.clone();
    let h = Observable::new("H", d, move |q, p, _| {
        (0..fh.len()).map(|i| p[i].square() / (2.0 * mass) - &q[i] * fh[i]).sum()
    });
    let mut system = SystemSpec::new(if force.iter().all(|x| *x == 0.0) { "free_particle" } else { "constant_force" }, h, true)
        .with_param("m", mass);
    for (i, fi) in force.iter().enumerate() {
        system = system.with_param(&format!("F{i}"), *fi);
    }
    let t = (0..d)
        .map(|i| {
            let fi = f[i];
            Observable::new(format!("T{i}"), d, move |_, p, t| &p[i] - t * fi)
        })
        .collect();
    let gamma = (0..d)
        .map(|i| {
            let fi = f[i];
            Observable::new(format!("gamma{i}"), d, move |q, p, t| {
                -(&q[i] * mass) + t * &p[i] - t.square() * (0.5 * fi)
            })
        })
        .collect();
    Ok(ConstantForceSystem { system, mass, force: f, t, gamma })
}

impl ConstantForceSystem {
    pub fn dim(&self) -> usize {
        self.force.len()
    }

    fn axis_check(&self, axis: usize) -> Result<()> {
        if axis < self.dim() {
            Ok(())
        } else {
            Err(Error::BadDimension(format!("axis {axis} out of range for d={}", self.dim())))
        }
    }

    /// `T²/2m + F·γ/m`.
    pub fn hamiltonian_from_charges(&self) -> Observable {
        let (m, f, d) = (self.mass, self.force.clone(), self.dim());
        let (ts, gs) = (self.t.clone(), self.gamma.clone());
        Observable::new("H(T,gamma)", d, move |q, p, t| {
            (0..d)
                .map(|i| {
                    let ti = ts[i].eval_dual(q, p, t).expect("closed form");
                    let gi = gs[i].eval_dual(q, p, t).expect("closed form");
                    ti.square() / (2.0 * m) + gi * (f[i] / m)
                })
                .sum()
        })
    }

    /// Translation along `axis`: `φ = ê`, `χ = 0`, `Λ = −(1−λ)p_a + tF_a`.
    pub fn translation(&self, axis: usize, lambda: f64) -> Result<Transformation> {
        self.axis_check(axis)?;
        let (d, fa) = (self.dim(), self.force[axis]);
        let phi = (0..d).map(|i| Observable::constant(d, if i == axis { 1.0 } else { 0.0 })).collect();
        let chi = (0..d).map(|_| Observable::constant(d, 0.0)).collect();
        let surface = Observable::new(format!("Lambda_T{axis}"), d, move |_, p, t| {
            -(&p[axis] * (1.0 - lambda)) + t * fa
        });
        Transformation::new(phi, chi, surface, lambda)
    }

    /// Boost along `axis`: `φ = tê`, `χ = mê`, `Λ = λm x_v − (1−λ)t p_v + ½t²F_v`.
    pub fn boost(&self, axis: usize, lambda: f64) -> Result<Transformation> {
        self.axis_check(axis)?;
        let (d, m, fv) = (self.dim(), self.mass, self.force[axis]);
        let phi = (0..d)
            .map(|i| {
                if i == axis {
                    Observable::time(d)
                } else {
                    Observable::constant(d, 0.0)
                }
            })
            .collect();
        let chi = (0..d).map(|i| Observable::constant(d, if i == axis { m } else { 0.0 })).collect();
        let surface = Observable::new(format!("Lambda_gamma{axis}"), d, move |q, p, t| {
            &q[axis] * (lambda * m) - t * &p[axis] * (1.0 - lambda) + t.square() * (0.5 * fv)
        });
        Transformation::new(phi, chi, surface, lambda)
    }

    /// `x' = x + a + tv`, `p' = p + mv`.
    pub fn finite_map(&self, a: &[f64], v: &[f64], s: &PhaseState) -> Result<PhaseState> {
        let d = self.dim();
        ensure_dim(d, a.len())?;
        ensure_dim(d, v.len())?;
        ensure_dim(d, s.dim())?;
        Ok(PhaseState {
            q: (0..d).map(|i| s.q[i] + a[i] + s.t * v[i]).collect(),
            p: (0..d).map(|i| s.p[i] + self.mass * v[i]).collect(),
            t: s.t,
        })
    }

    /// Surface term of the finite map:
    /// `λm v·x + λtmv² − (1−λ)t v·p − ½tmv² + ½t² v·F − (1−λ)a·p + t a·F`.
    pub fn finite_surface(&self, a: &[f64], v: &[f64], lambda: f64) -> Result<Observable> {
        let d = self.dim();
        ensure_dim(d, a.len())?;
        ensure_dim(d, v.len())?;
        let (a, v, f, m) = (a.to_vec(), v.to_vec(), self.force.clone(), self.mass);
        let v2: f64 = v.iter().map(|x| x * x).sum();
        let vf: f64 = v.iter().zip(&f).map(|(x, y)| x * y).sum();
        let af: f64 = a.iter().zip(&f).map(|(x, y)| x * y).sum();
        Ok(Observable::new("Lambda_finite", d, move |q, p, t| {
            let vx: Dual = (0..d).map(|i| &q[i] * v[i]).sum();
            let vp: Dual = (0..d).map(|i| &p[i] * v[i]).sum();
            let ap: Dual = (0..d).map(|i| &p[i] * a[i]).sum();
            vx * (lambda * m) + t * (lambda * m * v2) - t * vp * (1.0 - lambda) - t * (0.5 * m * v2)
                + t.square() * (0.5 * vf)
                - ap * (1.0 - lambda)
                + t * af
        }))
    }

    /// `L(λ) = λẋ·p − (1−λ)x·ṗ − H` evaluated on a path point with given velocities.
    pub fn lagrangian(&self, lambda: f64, s: &PhaseState, xdot: &[f64], pdot: &[f64]) -> f64 {
        let kin: f64 = (0..self.dim())
            .map(|i| lambda * xdot[i] * s.p[i] - (1.0 - lambda) * s.q[i] * pdot[i])
            .sum();
        kin - self.system.hamiltonian.eval(s)
    }

    /// `L(mapped path) − L(path) − dΛ/dt` at one point of an arbitrary path;
    /// zero when the finite surface term is exact.
    pub fn finite_lagrangian_defect(
        &self,
        a: &[f64],
        v: &[f64],
        lambda: f64,
        s: &PhaseState,
        xdot: &[f64],
        pdot: &[f64],
    ) -> Result<f64> {
        let d = self.dim();
        ensure_dim(d, xdot.len())?;
        ensure_dim(d, pdot.len())?;
        let mapped = self.finite_map(a, v, s)?;
        let xdot2: Vec<f64> = (0..d).map(|i| xdot[i] + v[i]).collect();
        let surface = self.finite_surface(a, v, lambda)?;
        let g = crate::dualnum::grad(&surface, s)?;
        let dlambda: f64 = g.d_t + (0..d).map(|i| g.d_q[i] * xdot[i] + g.d_p[i] * pdot[i]).sum::<f64>();
        Ok(self.lagrangian(lambda, &mapped, &xdot2, pdot) - self.lagrangian(lambda, s, xdot, pdot) - dlambda)
    }

    /// Rotation charges. With `F ≠ 0` they act in the plane orthogonal to `F`;
    /// with `F = 0` every coordinate plane is a symmetry.
    pub fn rotation_charges(&self) -> Result<Vec<RotationCharge>> {
        let d = self.dim();
        if d < 3 {
            return Err(Error::BadDimension(format!("rotation charges need d >= 3, got d={d}")));
        }
        let fnorm = self.force.iter().map(|x| x * x).sum::<f64>().sqrt();
        let fhat: Vec<f64> = if fnorm > 0.0 {
            self.force.iter().map(|x| x / fnorm).collect()
        } else {
            vec![0.0; d]
        };
        let perp = move |v: &[Dual], fhat: &[f64]| -> Vec<Dual> {
            let along: Dual = v.iter().zip(fhat).map(|(x, f)| x * *f).sum();
            v.iter().zip(fhat).map(|(x, f)| x - &along * *f).collect()
        };
        let mut out = Vec::new();
        for i in 0..d {
            for j in i + 1..d {
                let fh = fhat.clone();
                let direct = Observable::new(format!("L{i}{j}"), d, move |q, p, _| {
                    let (x, k) = (perp(q, &fh), perp(p, &fh));
                    &x[i] * &k[j] - &x[j] * &k[i]
                });
                let (fh, m) = (fhat.clone(), self.mass);
                let (ts, gs) = (self.t.clone(), self.gamma.clone());
                let from_charges = Observable::new(format!("L{i}{j}(T,gamma)"), d, move |q, p, t| {
                    let tv: Vec<Dual> = ts.iter().map(|o| o.eval_dual(q, p, t).expect("closed form")).collect();
                    let gv: Vec<Dual> = gs.iter().map(|o| o.eval_dual(q, p, t).expect("closed form")).collect();
                    let (tp, gp) = (perp(&tv, &fh), perp(&gv, &fh));
                    -(&gp[i] * &tp[j] - &gp[j] * &tp[i]) / m
                });
                out.push(RotationCharge { i, j, direct, from_charges });
            }
        }
        Ok(out)
    }

    /// Exact solution `x(t) = x₀ + Δt p₀/m + Δt²F/2m`, `p(t) = p₀ + ΔtF`.
    pub fn exact_state(&self, s0: &PhaseState, t: f64) -> PhaseState {
        let dt = t - s0.t;
        let m = self.mass;
        PhaseState {
            q: (0..self.dim())
                .map(|i| s0.q[i] + dt * s0.p[i] / m + dt * dt * self.force[i] / (2.0 * m))
                .collect(),
            p: (0..self.dim()).map(|i| s0.p[i] + dt * self.force[i]).collect(),
            t,
        }
    }

    /// Phase-space point at time `t` fixed by the conserved values of `T` and `γ`.
    pub fn state_from_charges(&self, t_vals: &[f64], gamma_vals: &[f64], t: f64) -> Result<PhaseState> {
        let d = self.dim();
        ensure_dim(d, t_vals.len())?;
        ensure_dim(d, gamma_vals.len())?;
        let m = self.mass;
        Ok(PhaseState {
            q: (0..d)
                .map(|i| (-gamma_vals[i] + t * t_vals[i] + 0.5 * t * t * self.force[i]) / m)
                .collect(),
            p: (0..d).map(|i| t_vals[i] + t * self.force[i]).collect(),
            t,
        })
    }
}

/// `|H(x+a+tv, p+mv) − H(x,p) − (−a·F + v·T + ½mv²)|`.
pub fn finite_symmetry_energy_shift(model: &ConstantForceSystem, a: &[f64], v: &[f64], s: &PhaseState) -> Result<f64> {
    let mapped = model.finite_map(a, v, s)?;
    let h = &model.system.hamiltonian;
    let lhs = h.eval(&mapped) - h.eval(s);
    let d = model.dim();
    let rhs: f64 = (0..d)
        .map(|i| -a[i] * model.force[i] + v[i] * model.t[i].eval(s) + 0.5 * model.mass * v[i] * v[i])
        .sum();
    Ok((lhs - rhs).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noether::conservation_check;
    use crate::phasespace::{make_state, sample_states};
    use crate::poisson::{bracket, bracket_complex, total_derivative, total_derivative_complex};
    use proptest::prelude::*;

    #[test]
    fn harmonic_examples() {
        let h = harmonic_system(&[1.0], 0.0).unwrap();
        let (re, im) = h.a[0].eval(&make_state(vec![1.0], vec![0.0], 0.0).unwrap());
        assert!((re - 0.5f64.sqrt()).abs() < 1e-15 && im == 0.0);

        let h = harmonic_system(&[2.0], 0.0).unwrap();
        for s in sample_states(1, 50, 1, 2.0) {
            let (re, im) = h.a[0].eval(&s);
            assert!(((re * re + im * im) * 2.0 - h.system.hamiltonian.eval(&s)).abs() < 1e-12);
        }

        let h = harmonic_system(&[1.0, 3.0], 0.0).unwrap();
        for s in sample_states(2, 20, 2, 2.0) {
            let b = bracket(&h.a[0].re, &h.a[0].im, &s).unwrap();
            assert!((b - 0.5).abs() < 1e-12, "{b}");
        }
    }

    #[test]
    fn harmonic_rejects_bad_frequency() {
        assert!(matches!(harmonic_system(&[1.0, 0.0], 0.0), Err(Error::BadFrequency(_))));
        assert!(matches!(harmonic_system(&[-2.0], 0.0), Err(Error::BadFrequency(_))));
    }

    #[test]
    fn fock_bracket_is_canonical() {
        let h = harmonic_system(&[0.7, 1.9], 0.4).unwrap();
        for s in sample_states(2, 50, 3, 3.0) {
            for a in 0..2 {
                for b in 0..2 {
                    let z = bracket_complex(&h.a[a], &h.a[b].conj(), &s).unwrap();
                    let want = if a == b { -1.0 } else { 0.0 };
                    assert!(z.re.abs() < 1e-12 && (z.im - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn harmonic_charges_conserved() {
        let h = harmonic_system(&[0.5, 2.5], 0.3).unwrap();
        let states = sample_states(2, 100, 4, 2.0);
        for a in &h.a {
            assert!(conservation_check(&a.re, &h.system, &states, 1e-10).unwrap().passed);
            assert!(conservation_check(&a.im, &h.system, &states, 1e-10).unwrap().passed);
        }
        for j in 0..=2 {
            for k in 0..=2 {
                let m = h.monomial(1, j, k);
                for s in &states {
                    assert!(total_derivative_complex(&m, &h.system, s).unwrap().norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn harmonic_exact_flow_matches_charges() {
        let h = harmonic_system(&[1.3], 0.0).unwrap();
        let s0 = make_state(vec![0.8], vec![-0.3], 0.2).unwrap();
        let s1 = h.exact_state(&s0, 3.7);
        let (a0, a1) = (h.a[0].eval(&s0), h.a[0].eval(&s1));
        assert!((a0.0 - a1.0).abs() < 1e-14 && (a0.1 - a1.1).abs() < 1e-14);
    }

    #[test]
    fn lattice_examples() {
        let one = lattice_scalar_system(1, 1.7, 0.5).unwrap();
        assert_eq!(one.modes.omegas, vec![1.7]);
        let four = lattice_scalar_system(4, 1.0, 1.0).unwrap();
        let want = [1.0, 3f64.sqrt(), 5f64.sqrt(), 3f64.sqrt()];
        for (w, e) in four.modes.omegas.iter().zip(want) {
            assert!((w - e).abs() < 1e-14);
        }
        assert!(matches!(lattice_scalar_system(4, 0.0, 1.0), Err(Error::ZeroModeUnsupported)));
    }

    #[test]
    fn lattice_energy_matches_modes() {
        for n in [1, 2, 5, 8] {
            let lat = lattice_scalar_system(n, 0.6, 0.8).unwrap();
            for s in sample_states(n, 30, 5, 2.0) {
                let modes = lat.to_modes(&s).unwrap();
                let h_sites = lat.sites.hamiltonian.eval(&s);
                let h_modes = lat.modes.h_from_charges.eval(&modes);
                assert!((h_sites - h_modes).abs() < 1e-10 * (1.0 + h_sites.abs()), "n={n}");
                let back = lat.to_sites(&modes).unwrap();
                for (x, y) in back.q.iter().zip(&s.q) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn lattice_profiles_orthonormal() {
        let lat = lattice_scalar_system(7, 1.0, 1.0).unwrap();
        for a in 0..7 {
            for b in 0..7 {
                let dot: f64 = lat.profiles[a].iter().zip(&lat.profiles[b]).map(|(x, y)| x * y).sum();
                assert!((dot - if a == b { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lattice_momentum_like_charge_commutes() {
        let lat = lattice_scalar_system(6, 0.9, 1.1).unwrap();
        let p = lat.momentum_like_charge();
        for s in sample_states(6, 30, 6, 2.0) {
            assert!(bracket(&p, &lat.modes.system.hamiltonian, &s).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn constant_force_substitution() {
        let m = constant_force_system(2.0, &[3.0]).unwrap();
        let s = make_state(vec![1.0], vec![4.0], 2.0).unwrap();
        assert_eq!(m.t[0].eval(&s), -2.0);
        assert_eq!(m.gamma[0].eval(&s), 0.0);
    }

    #[test]
    fn hamiltonian_through_charges() {
        let m = constant_force_system(1.4, &[0.3, -2.0, 1.1]).unwrap();
        let hc = m.hamiltonian_from_charges();
        for s in sample_states(3, 100, 7, 3.0) {
            let (a, b) = (hc.eval(&s), m.system.hamiltonian.eval(&s));
            assert!((a - b).abs() < 1e-11 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn rotation_charges() {
        let m = constant_force_system(1.0, &[0.0, 0.0, 1.0]).unwrap();
        let rots = m.rotation_charges().unwrap();
        for s in sample_states(3, 50, 8, 2.0) {
            for r in &rots {
                let (a, b) = (r.direct.eval(&s), r.from_charges.eval(&s));
                assert!((a - b).abs() < 1e-12);
                assert!(total_derivative(&r.direct, &m.system, &s).unwrap().abs() < 1e-12);
            }
            let lxy = &rots[0];
            let want = s.q[0] * s.p[1] - s.q[1] * s.p[0];
            assert!((lxy.direct.eval(&s) - want).abs() < 1e-14);
        }
        assert!(matches!(
            constant_force_system(1.0, &[1.0, 0.0]).unwrap().rotation_charges(),
            Err(Error::BadDimension(_))
        ));
    }

    #[test]
    fn rotation_charges_tilted_force() {
        let m = constant_force_system(1.6, &[0.5, -1.0, 2.0, 0.3]).unwrap();
        let rots = m.rotation_charges().unwrap();
        assert_eq!(rots.len(), 6);
        for s in sample_states(4, 30, 9, 2.0) {
            for r in &rots {
                assert!((r.direct.eval(&s) - r.from_charges.eval(&s)).abs() < 1e-11);
                assert!(total_derivative(&r.direct, &m.system, &s).unwrap().abs() < 1e-11);
            }
        }
    }

    #[test]
    fn free_particle_exposes_all_planes() {
        let m = constant_force_system(1.0, &[0.0; 3]).unwrap();
        assert_eq!(m.system.name, "free_particle");
        let rots = m.rotation_charges().unwrap();
        let s = make_state(vec![1.0, 2.0, 3.0], vec![-1.0, 0.5, 2.0], 0.0).unwrap();
        assert_eq!(rots.len(), 3);
        assert!((rots[1].direct.eval(&s) - (1.0 * 2.0 - 3.0 * -1.0)).abs() < 1e-15);
    }

    #[test]
    fn energy_shift_examples() {
        let m = constant_force_system(1.0, &[2.0]).unwrap();
        let s = make_state(vec![0.3], vec![-0.2], 1.1).unwrap();
        assert_eq!(finite_symmetry_energy_shift(&m, &[0.0], &[0.0], &s).unwrap(), 0.0);
        for s in sample_states(1, 20, 10, 2.0) {
            let mapped = m.finite_map(&[1.0], &[0.0], &s).unwrap();
            let shift = m.system.hamiltonian.eval(&mapped) - m.system.hamiltonian.eval(&s);
            assert!((shift + 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn solution_from_charges() {
        let m = constant_force_system(1.3, &[0.4, -0.9]).unwrap();
        let s0 = make_state(vec![0.5, 1.0], vec![-0.2, 0.3], 0.0).unwrap();
        let tv: Vec<f64> = m.t.iter().map(|o| o.eval(&s0)).collect();
        let gv: Vec<f64> = m.gamma.iter().map(|o| o.eval(&s0)).collect();
        for t in [0.0, 0.7, 3.0] {
            let a = m.state_from_charges(&tv, &gv, t).unwrap();
            let b = m.exact_state(&s0, t);
            for k in 0..4 {
                assert!((a.coord(k) - b.coord(k)).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn energy_shift_identity(
            a in proptest::collection::vec(-2.0..2.0f64, 3),
            v in proptest::collection::vec(-2.0..2.0f64, 3),
            seed in 0u64..1000,
        ) {
            let m = constant_force_system(1.7, &[0.3, -0.4, 2.3]).unwrap();
            for s in sample_states(3, 5, seed, 2.0) {
                prop_assert!(finite_symmetry_energy_shift(&m, &a, &v, &s).unwrap() < 1e-12);
            }
        }

        #[test]
        fn finite_surface_term_is_exact(
            a in proptest::collection::vec(-2.0..2.0f64, 2),
            v in proptest::collection::vec(-2.0..2.0f64, 2),
            xdot in proptest::collection::vec(-2.0..2.0f64, 2),
            pdot in proptest::collection::vec(-2.0..2.0f64, 2),
            lambda in 0.0..1.0f64,
            seed in 0u64..1000,
        ) {
            let m = constant_force_system(0.8, &[1.2, -0.5]).unwrap();
            for s in sample_states(2, 3, seed, 2.0) {
                let defect = m.finite_lagrangian_defect(&a, &v, lambda, &s, &xdot, &pdot).unwrap();
                prop_assert!(defect.abs() < 1e-11);
            }
        }
    }
}
