//! Fixed inputs shared by the kernel benchmarks.

use noether_core::models::{constant_force_system, harmonic_system};
use noether_core::phasespace::{make_state, sample_states};
use noether_core::{ConstantForceSystem, HarmonicSystem, PhaseState};

pub const SEED: u64 = 11;

pub fn force_model() -> ConstantForceSystem {
    constant_force_system(1.7, &[0.0, 0.0, 2.3]).expect("valid parameters")
}

pub fn oscillator() -> HarmonicSystem {
    harmonic_system(&[1.0, 2.0], 0.0).expect("valid parameters")
}

pub fn force_states(n: usize) -> Vec<PhaseState> {
    sample_states(3, n, SEED, 2.0)
}

pub fn force_start() -> PhaseState {
    make_state(vec![0.4, -0.3, 0.1], vec![-0.7, 0.2, 0.5], 0.0).expect("finite state")
}

pub fn oscillator_start() -> PhaseState {
    make_state(vec![0.3, -0.5], vec![0.8, 0.1], 0.2).expect("finite state")
}
