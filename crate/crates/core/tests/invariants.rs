use noether_core::integrate::{drift, max_abs, verlet};
use noether_core::models::{constant_force_system, harmonic_system, lattice_scalar_system};
use noether_core::noether::{build_charge, constant_offset_residual, conservation_check, verify_consistency};
use noether_core::phasespace::{make_state, sample_states};
use noether_core::poisson::{bracket, bracket_complex};
use noether_core::qfock::{block_distance, heisenberg, ladder_ops, FockSpaceCtx};
use noether_core::qwave::{energy_state, ratio_deviation, translate_state, MomentumGrid};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn constant_force_symmetries_are_consistent(
        lambda in 0.0..1.0f64, m in 0.3..3.0f64, f0 in -2.0..2.0f64, f1 in -2.0..2.0f64, seed in any::<u64>()
    ) {
        let model = constant_force_system(m, &[f0, f1]).unwrap();
        let states = sample_states(2, 8, seed, 2.0);
        for axis in 0..2 {
            for tr in [model.translation(axis, lambda).unwrap(), model.boost(axis, lambda).unwrap()] {
                let rep = verify_consistency(&tr, &model.system, &states, 1e-10).unwrap();
                prop_assert!(rep.passed, "{rep:?}");
            }
            let t = build_charge(&model.translation(axis, lambda).unwrap()).unwrap();
            prop_assert!(constant_offset_residual(&t.charge, &model.t[axis], &states).unwrap() < 1e-12);
            let g = build_charge(&model.boost(axis, lambda).unwrap()).unwrap();
            prop_assert!(constant_offset_residual(&g.charge, &model.gamma[axis], &states).unwrap() < 1e-12);
        }
    }

    #[test]
    fn central_extension(m in 0.3..3.0f64, f in -2.0..2.0f64, seed in any::<u64>()) {
        let model = constant_force_system(m, &[0.5, f]).unwrap();
        for s in sample_states(2, 4, seed, 2.0) {
            for i in 0..2 {
                for j in 0..2 {
                    let want = if i == j { m } else { 0.0 };
                    prop_assert!((bracket(&model.t[i], &model.gamma[j], &s).unwrap() - want).abs() < 1e-10);
                    prop_assert!(bracket(&model.t[i], &model.t[j], &s).unwrap().abs() < 1e-10);
                    prop_assert!(bracket(&model.gamma[i], &model.gamma[j], &s).unwrap().abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn charges_conserved_along_verlet(q0 in -2.0..2.0f64, p0 in -2.0..2.0f64, f in -2.0..2.0f64) {
        let model = constant_force_system(1.1, &[f]).unwrap();
        let traj = verlet(&model.system, &make_state(vec![q0], vec![p0], 0.0).unwrap(), 0.01, 500).unwrap();
        prop_assert!(max_abs(&drift(&traj, &model.t[0]).unwrap()) < 1e-12);
        prop_assert!(max_abs(&drift(&traj, &model.gamma[0]).unwrap()) < 1e-11);
    }

    #[test]
    fn harmonic_charges_are_dynamical_invariants(w in 0.2..3.0f64, t0 in -1.0..1.0f64, seed in any::<u64>()) {
        let h = harmonic_system(&[w], t0).unwrap();
        let states = sample_states(1, 6, seed, 2.0);
        let rep = conservation_check(&h.a[0].re, &h.system, &states, 1e-10).unwrap();
        prop_assert!(rep.passed);
        for s in &states {
            let later = h.exact_state(s, s.t + 1.7);
            let (a, b) = (h.a[0].eval(s), h.a[0].eval(&later));
            prop_assert!((a.0 - b.0).abs() < 1e-10 && (a.1 - b.1).abs() < 1e-10);
            let z = bracket_complex(&h.a[0], &h.a[0].conj(), s).unwrap();
            prop_assert!(z.re.abs() < 1e-10 && (z.im + 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn lattice_mode_transform_round_trip(mu in 0.1..2.0f64, seed in any::<u64>()) {
        let l = lattice_scalar_system(8, mu, 0.7).unwrap();
        for s in sample_states(8, 4, seed, 2.0) {
            let back = l.to_sites(&l.to_modes(&s).unwrap()).unwrap();
            for k in 0..16 {
                prop_assert!((back.coord(k) - s.coord(k)).abs() < 1e-12);
            }
            let e_sites = l.sites.hamiltonian.eval(&s);
            let e_modes = l.modes.system.hamiltonian.eval(&l.to_modes(&s).unwrap());
            prop_assert!((e_sites - e_modes).abs() < 1e-10 * (1.0 + e_sites.abs()));
        }
    }

    #[test]
    fn heisenberg_charge_is_constant(t in -10.0..10.0f64, w in 0.3..3.0f64) {
        let ctx = FockSpaceCtx::new(16, w, 1.0, 0.0).unwrap();
        let (a, _, _) = ladder_ops(&ctx);
        let (at, _) = noether_core::qfock::schrodinger_charge(&ctx, t);
        prop_assert!(block_distance(&heisenberg(&at, &ctx, t).unwrap(), &a) < 1e-12);
    }

    #[test]
    fn translation_lowers_energy_label(e in -4.0..4.0f64, a in -1.0..1.0f64, f in 0.5..3.0f64) {
        let g = MomentumGrid::default_with_force(f).unwrap();
        let moved = translate_state(&energy_state(&g, e).unwrap(), a);
        prop_assert!(ratio_deviation(&moved, &energy_state(&g, e - a * f).unwrap()).unwrap() < 1e-9);
    }
}
