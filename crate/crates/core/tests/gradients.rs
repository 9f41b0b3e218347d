use noether_core::dualnum::{fd_grad, grad};
use noether_core::models::{constant_force_system, harmonic_system, lattice_scalar_system};
use noether_core::phasespace::{sample_states, Observable};

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6 * (1.0 + a.abs().max(b.abs()))
}

fn check_all(obs: &[Observable], dim: usize, seed: u64) {
    let states = sample_states(dim, 100, seed, 2.0);
    for f in obs {
        for s in &states {
            let g = grad(f, s).unwrap();
            let n = fd_grad(f, s, 1e-5).unwrap();
            let pairs = g.d_q.iter().zip(&n.d_q).chain(g.d_p.iter().zip(&n.d_p));
            for (a, b) in pairs.chain(std::iter::once((&g.d_t, &n.d_t))) {
                assert!(close(*a, *b), "{}: dual {a} vs fd {b} at {s:?}", f.label());
            }
            assert_eq!(g.value, f.eval(s));
        }
    }
}

#[test]
fn constant_force_observables() {
    let m = constant_force_system(1.7, &[0.0, 0.4, 2.3]).unwrap();
    let mut obs = vec![m.system.hamiltonian.clone(), m.hamiltonian_from_charges()];
    obs.extend(m.t.iter().cloned());
    obs.extend(m.gamma.iter().cloned());
    obs.extend(m.rotation_charges().unwrap().into_iter().flat_map(|r| [r.direct, r.from_charges]));
    check_all(&obs, 3, 11);
}

#[test]
fn harmonic_observables() {
    let h = harmonic_system(&[0.7, 1.9], 0.3).unwrap();
    let mut obs = vec![h.system.hamiltonian.clone(), h.h_from_charges.clone()];
    for a in &h.a {
        obs.push(a.re.clone());
        obs.push(a.im.clone());
    }
    let mono = h.monomial(1, 2, 1);
    obs.push(mono.re);
    obs.push(mono.im);
    check_all(&obs, 2, 12);
}

#[test]
fn lattice_observables() {
    let l = lattice_scalar_system(6, 0.8, 1.0).unwrap();
    let obs = vec![l.sites.hamiltonian.clone(), l.modes.system.hamiltonian.clone(), l.momentum_like_charge()];
    check_all(&obs, 6, 13);
}
