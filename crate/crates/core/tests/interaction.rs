use num_complex::Complex64;
use zkw_core::resonance::{phi_int, resonance_phi_hat_int};
use zkw_core::spectral_lattice::sobolev_norm;
use zkw_core::zk_solver::{random_smooth_real, Solver, SolverConfig};

// Two small modes δe^{ik₁·x} + δe^{ik₂·x}: to leading order the k₁+k₂ mode is
// |û(k₃,t)| = |ξ₃| δ² |2 sin(Φ̂t/2) / Φ̂|, Φ̂ = φ(k₃) − φ(k₁) − φ(k₂).
#[test]
fn two_mode_interaction_follows_resonance() {
    let s = Solver::new(SolverConfig {
        radius: 8,
        ..Default::default()
    })
    .unwrap();
    let delta = 1e-6;
    for (k1, k2) in [((2, 1), (1, -2)), ((1, 0), (0, 1)), ((-1, 2), (3, 1))] {
        let k3 = (k1.0 + k2.0, k1.1 + k2.1);
        let phat = resonance_phi_hat_int(k1, k2);
        assert_eq!(phat, phi_int(k3) - phi_int(k1) - phi_int(k2));
        let mut u = s.zero_state();
        u.set_mode(k1.0, k1.1, Complex64::new(delta, 0.0)).unwrap();
        u.set_mode(k2.0, k2.1, Complex64::new(delta, 0.0)).unwrap();
        let t = 0.5;
        let out = s.evolve(&u, 1e-3, 500, |_| {}).unwrap();
        let ph = phat as f64;
        let want = (k3.0 as f64).abs() * delta * delta * if ph == 0.0 { t } else { (2.0 * (ph * t / 2.0).sin() / ph).abs() };
        let got = out.mode(k3.0, k3.1).norm();
        assert!((got / want - 1.0).abs() < 1e-3, "{k1:?} {k2:?}: {got} vs {want}");
    }
}

#[test]
fn solver_norms_agree_with_lattice_norms() {
    for lambda in [1, 2] {
        let s = Solver::new(SolverConfig {
            lambda,
            radius: 8,
            ..Default::default()
        })
        .unwrap();
        let u = random_smooth_real(&s, 1.0, 11);
        let g = u.coeffs();
        for sv in [0.0, 1.0, 1.5] {
            let a = u.hs_norm(sv);
            let b = sobolev_norm(&g, sv) * lambda as f64;
            assert!((a / b - 1.0).abs() < 1e-12, "{lambda} {sv}: {a} {b}");
        }
    }
}
