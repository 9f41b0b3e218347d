//! Single-mode oscillator in a truncated number basis: ladder operators,
//! dynamical charges in both pictures and their spectrum-generating action.
//!
//! Truncation makes `[a, a†]` wrong in the last diagonal entry only, so every
//! comparison is made on the top-left `(N−1)×(N−1)` block.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FockOp {
    pub matrix: DMatrix<Complex64>,
    pub label: String,
}

impl FockOp {
    pub fn new(matrix: DMatrix<Complex64>, label: impl Into<String>) -> Self {
        FockOp { matrix, label: label.into() }
    }

    pub fn cutoff(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn adjoint(&self) -> FockOp {
        FockOp::new(self.matrix.adjoint(), format!("{}^dag", self.label))
    }

    pub fn mul(&self, other: &FockOp) -> FockOp {
        FockOp::new(&self.matrix * &other.matrix, format!("{}{}", self.label, other.label))
    }

    /// Top-left block with the truncation edge removed.
    pub fn block(&self) -> DMatrix<Complex64> {
        let n = self.cutoff() - 1;
        self.matrix.view((0, 0), (n, n)).into_owned()
    }
}

pub fn commutator(x: &FockOp, y: &FockOp) -> FockOp {
    FockOp::new(&x.matrix * &y.matrix - &y.matrix * &x.matrix, format!("[{},{}]", x.label, y.label))
}

/// Largest entrywise modulus of `a − b` on the sub-cutoff block.
pub fn block_distance(a: &FockOp, b: &FockOp) -> f64 {
    (a.block() - b.block()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_entry(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FockSpaceCtx {
    pub cutoff: usize,
    pub omega: f64,
    pub hbar: f64,
    pub t0: f64,
}

pub const DEFAULT_CUTOFF: usize = 16;

impl FockSpaceCtx {
    pub fn new(cutoff: usize, omega: f64, hbar: f64, t0: f64) -> Result<Self> {
        if cutoff < 2 {
            return Err(Error::CutoffTooSmall { cutoff, degree: 0 });
        }
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::BadFrequency(omega));
        }
        if !(hbar > 0.0) || !hbar.is_finite() {
            return Err(Error::BadParameter(format!("hbar must be positive, got {hbar}")));
        }
        if !t0.is_finite() {
            return Err(Error::NonFinite("t0".into()));
        }
        Ok(FockSpaceCtx { cutoff, omega, hbar, t0 })
    }

    fn energy(&self, n: usize) -> f64 {
        self.hbar * self.omega * n as f64
    }

    fn check(&self, op: &FockOp) -> Result<()> {
        if op.cutoff() == self.cutoff && op.matrix.ncols() == self.cutoff {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.cutoff, got: op.cutoff() })
        }
    }
}

/// `(a, a†, H = ħω a†a)` in the number basis.
pub fn ladder_ops(ctx: &FockSpaceCtx) -> (FockOp, FockOp, FockOp) {
    let n = ctx.cutoff;
    let mut a = DMatrix::<Complex64>::zeros(n, n);
    for k in 1..n {
        a[(k - 1, k)] = Complex64::new((k as f64).sqrt(), 0.0);
    }
    let h = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |k, _| Complex64::new(ctx.energy(k), 0.0)));
    let a = FockOp::new(a, "a");
    let adag = a.adjoint().with_label("adag");
    (a, adag, FockOp::new(h, "H"))
}

impl FockOp {
    fn with_label(mut self, label: &str) -> Self {
        self.label = label.to_string();
        self
    }
}

/// Schrödinger-picture charges `A(t) = e^{iω(t−t₀)} a` and its adjoint.
pub fn schrodinger_charge(ctx: &FockSpaceCtx, t: f64) -> (FockOp, FockOp) {
    let (a, adag, _) = ladder_ops(ctx);
    let phase = Complex64::from_polar(1.0, ctx.omega * (t - ctx.t0));
    (
        FockOp::new(a.matrix * phase, "A"),
        FockOp::new(adag.matrix * phase.conj(), "Adag"),
    )
}

/// `U(t) = e^{−iH(t−t₀)/ħ}`, exact because `H` is diagonal.
pub fn evolution(ctx: &FockSpaceCtx, t: f64) -> FockOp {
    let n = ctx.cutoff;
    let u = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |k, _| {
        Complex64::from_polar(1.0, -ctx.energy(k) * (t - ctx.t0) / ctx.hbar)
    }));
    FockOp::new(u, "U")
}

/// `U(t)† op U(t)`: the Heisenberg-picture form of a Schrödinger operator.
pub fn heisenberg(op: &FockOp, ctx: &FockSpaceCtx, t: f64) -> Result<FockOp> {
    ctx.check(op)?;
    let u = evolution(ctx, t).matrix;
    Ok(FockOp::new(u.adjoint() * &op.matrix * u, format!("{}_H", op.label)))
}

pub fn unitarity_residual(ctx: &FockSpaceCtx, t: f64) -> f64 {
    let u = evolution(ctx, t).matrix;
    max_entry(&(u.adjoint() * &u - DMatrix::identity(ctx.cutoff, ctx.cutoff)))
}

/// `[√ħA, √ħA†]/(iħ)` against the classical bracket `{A, A*} = −i` on the block.
pub fn correspondence_residual(ctx: &FockSpaceCtx, t: f64) -> f64 {
    let (a, adag) = schrodinger_charge(ctx, t);
    let c = commutator(&a, &adag).block() * Complex64::new(ctx.hbar, 0.0) / Complex64::new(0.0, ctx.hbar);
    let n = ctx.cutoff - 1;
    max_entry(&(c - DMatrix::identity(n, n) * Complex64::new(0.0, -1.0)))
}

/// Central difference in `t` of the Heisenberg-picture charge, on the block.
pub fn heisenberg_rate(ctx: &FockSpaceCtx, t: f64, dt: f64) -> Result<f64> {
    let (ap, _) = schrodinger_charge(ctx, t + dt);
    let (am, _) = schrodinger_charge(ctx, t - dt);
    let hp = heisenberg(&ap, ctx, t + dt)?;
    let hm = heisenberg(&am, ctx, t - dt)?;
    Ok(max_entry(&((hp.block() - hm.block()) / Complex64::new(2.0 * dt, 0.0))))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonomialAction {
    pub j: usize,
    pub k: usize,
    /// Expected level shift `j − k`.
    pub shift: i64,
    /// `max |[H, M] − ħω(j−k) M|` on the block.
    pub residual: f64,
    /// `max |M_{mn}|` over entries with `m − n ≠ j − k` (must vanish).
    pub off_ladder: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub t: f64,
    pub entries: Vec<MonomialAction>,
    pub max_residual: f64,
}

/// `[H, A†^j A^k] = ħω(j−k) A†^j A^k` for all `j ≤ j_max`, `k ≤ k_max`.
pub fn spectrum_action_report(ctx: &FockSpaceCtx, t: f64, j_max: usize, k_max: usize) -> Result<SpectrumReport> {
    if j_max + k_max >= ctx.cutoff.saturating_sub(1) {
        return Err(Error::CutoffTooSmall { cutoff: ctx.cutoff, degree: j_max + k_max });
    }
    let (a, adag) = schrodinger_charge(ctx, t);
    let (_, _, h) = ladder_ops(ctx);
    let pairs: Vec<(usize, usize)> = (0..=j_max).flat_map(|j| (0..=k_max).map(move |k| (j, k))).collect();
    let entries: Vec<MonomialAction> = pairs
        .par_iter()
        .map(|&(j, k)| {
            let n = ctx.cutoff;
            let pow = |op: &FockOp, e: usize| {
                (0..e).fold(DMatrix::<Complex64>::identity(n, n), |acc, _| acc * &op.matrix)
            };
            let m = FockOp::new(pow(&adag, j) * pow(&a, k), format!("Adag^{j}A^{k}"));
            let shift = j as i64 - k as i64;
            let lhs = commutator(&h, &m);
            let rhs = FockOp::new(&m.matrix * Complex64::new(ctx.hbar * ctx.omega * shift as f64, 0.0), "");
            let mut off_ladder = 0.0f64;
            for r in 0..n {
                for c in 0..n {
                    if r as i64 - c as i64 != shift {
                        off_ladder = off_ladder.max(m.matrix[(r, c)].norm());
                    }
                }
            }
            MonomialAction { j, k, shift, residual: block_distance(&lhs, &rhs), off_ladder }
        })
        .collect();
    let max_residual = entries.iter().map(|e| e.residual).fold(0.0, f64::max);
    Ok(SpectrumReport { t, entries, max_residual })
}
