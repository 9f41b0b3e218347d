//! Instantiates core models from configuration and names their observables.

use noether_core::models::{constant_force_system, harmonic_system, lattice_scalar_system};
use noether_core::{ConstantForceSystem, HarmonicSystem, LatticeScalarSystem, Observable, SystemSpec};

use crate::config::ModelConfig;

pub enum Model {
    Force(ConstantForceSystem),
    Harmonic { sys: HarmonicSystem, hbar: f64 },
    Lattice(LatticeScalarSystem),
}

impl Model {
    pub fn build(cfg: &ModelConfig) -> noether_core::Result<Model> {
        Ok(match cfg {
            ModelConfig::ConstantForce { m, force } => Model::Force(constant_force_system(*m, force)?),
            ModelConfig::FreeParticle { m, d } => Model::Force(constant_force_system(*m, &vec![0.0; (*d).max(1)])?),
            ModelConfig::Harmonic { omega, t0, hbar } => Model::Harmonic { sys: harmonic_system(omega, *t0)?, hbar: *hbar },
            ModelConfig::LatticeScalar { n, mu, a } => Model::Lattice(lattice_scalar_system(*n, *mu, *a)?),
        })
    }

    /// System the classical suites run on; the lattice is checked in mode coordinates.
    pub fn system(&self) -> &SystemSpec {
        match self {
            Model::Force(m) => &m.system,
            Model::Harmonic { sys, .. } => &sys.system,
            Model::Lattice(l) => &l.modes.system,
        }
    }

    pub fn dim(&self) -> usize {
        self.system().dim
    }

    fn harmonic(&self) -> Option<&HarmonicSystem> {
        match self {
            Model::Force(_) => None,
            Model::Harmonic { sys, .. } => Some(sys),
            Model::Lattice(l) => Some(&l.modes),
        }
    }

    /// Conserved charges: `T_i, γ_i` or `Re A_α, Im A_α` (plus `P` on the lattice).
    pub fn charges(&self) -> Vec<Observable> {
        match self {
            Model::Force(m) => m.t.iter().chain(&m.gamma).cloned().collect(),
            _ => {
                let h = self.harmonic().expect("oscillator model");
                let mut out: Vec<Observable> = (0..h.a.len())
                    .flat_map(|k| [h.a[k].re.clone().with_label(format!("ReA{k}")), h.a[k].im.clone().with_label(format!("ImA{k}"))])
                    .collect();
                if let Model::Lattice(l) = self {
                    out.push(l.momentum_like_charge().with_label("P"));
                }
                out
            }
        }
    }

    /// Observable names accepted by `table --obs`.
    pub fn observable_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.charges().iter().map(|o| o.label().to_string()).collect();
        names.push("H".into());
        for k in 0..self.dim() {
            names.push(format!("q{k}"));
            names.push(format!("p{k}"));
        }
        if let Model::Force(m) = self {
            if let Ok(rot) = m.rotation_charges() {
                names.extend(rot.iter().map(|r| format!("L{}{}", r.i, r.j)));
            }
        }
        names
    }

    pub fn observable(&self, name: &str) -> Option<Observable> {
        let d = self.dim();
        if name == "H" {
            return Some(self.system().hamiltonian.clone().with_label("H"));
        }
        if let Some(o) = self.charges().into_iter().find(|o| o.label() == name) {
            return Some(o);
        }
        let index = |prefix: &str| name.strip_prefix(prefix).and_then(|k| k.parse::<usize>().ok()).filter(|k| *k < d);
        if let Some(k) = index("q") {
            return Some(Observable::q(d, k));
        }
        if let Some(k) = index("p") {
            return Some(Observable::p(d, k));
        }
        if let Model::Force(m) = self {
            let rot = m.rotation_charges().ok()?;
            return rot.into_iter().find(|r| format!("L{}{}", r.i, r.j) == name).map(|r| r.direct.with_label(name));
        }
        None
    }

    pub fn as_force(&self) -> Option<&ConstantForceSystem> {
        match self {
            Model::Force(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_harmonic(&self) -> Option<&HarmonicSystem> {
        self.harmonic()
    }

    pub fn hbar(&self) -> f64 {
        match self {
            Model::Harmonic { hbar, .. } => *hbar,
            _ => 1.0,
        }
    }
}
