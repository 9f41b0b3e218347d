//! Numerical verification of Noether charges: forward-mode gradients, Poisson
//! brackets, consistency and conservation checks, symplectic integration, and
//! truncated Fock-space and momentum-grid quantum checks.

pub mod dualnum;
pub mod error;
pub mod integrate;
pub mod models;
pub mod noether;
pub mod phasespace;
pub mod poisson;
pub mod qfock;
pub mod qwave;

pub use dualnum::{Dual, GradResult};
pub use error::{Error, Result};
pub use integrate::{IntegratorKind, Trajectory};
pub use models::{ConstantForceSystem, HarmonicSystem, LatticeScalarSystem};
pub use noether::{ChargeBundle, ConsistencyReport, ConservationReport};
pub use phasespace::{ComplexObservable, Observable, PhaseState, SystemSpec, Transformation};
pub use poisson::{BracketTable, ClosureReport};
pub use qfock::{FockOp, FockSpaceCtx};
pub use qwave::{MomentumGrid, StateKind, WaveState};
