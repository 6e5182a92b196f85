mod common;

use nalgebra::DVector;
use phshift::analyzer::{self, Verdict};
use phshift::case_studies::{self, sync_gen_default_params, RigidBodyParams, SyncGenParams};
use phshift::equilibrium::find_equilibrium;
use phshift::{PortHamiltonian, Tolerances};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;

#[test]
fn generator_matrix_matches_hand_expansion() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let p = random_sync_gen(&mut rng);
        let s_bar = random_vector(&mut rng, 6, -2.0, 2.0);
        let got = case_studies::sync_gen_condition_matrix(&p, &s_bar).unwrap();
        let want = sync_gen_condition_by_hand(&p, &s_bar);
        assert!(rel_diff(&got, &want) <= 1e-10, "{got}\n{want}");
    }
}

#[test]
fn generator_matrix_matches_closed_form_at_unit_coupling_and_zero_d_current() {
    // The closed form omits the coupling factor from the torque row and has
    // L_d for L_q next to Ī_d; both differences vanish for k = 1, Ī_d = 0.
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let mut p = random_sync_gen(&mut rng);
        p.k = 1.0;
        if p.inductance().cholesky().is_none() {
            continue;
        }
        let mut s_bar = random_vector(&mut rng, 6, -2.0, 2.0);
        s_bar[0] = 0.0;
        let got = case_studies::sync_gen_condition_matrix(&p, &s_bar).unwrap();
        assert!(rel_diff(&got, &sync_gen_condition_closed_form(&p, &s_bar)) <= 1e-10);
    }
}

/// Steady-state residual written out per winding from `ψ = L I`.
fn generator_residual_by_hand(p: &SyncGenParams, s: &DVector<f64>, v_f: f64, tau: f64) -> DVector<f64> {
    let (id, iq, i_f, ikd, ikq, w) = (s[0], s[1], s[2], s[3], s[4], s[5]);
    let psi_d = p.l_d * id + p.k * p.l_afd * i_f + p.k * p.l_akd * ikd;
    let psi_q = p.l_q * iq - p.k * p.l_akq * ikq;
    DVector::from_row_slice(&[
        -psi_q * w - p.r * id,
        psi_d * w - p.r * iq,
        -p.r_f * i_f + v_f,
        -p.r_kd * ikd,
        -p.r_kq * ikq,
        psi_q * id - psi_d * iq - p.d * w + tau,
    ])
}

#[test]
fn generator_equilibrium_satisfies_winding_balances() {
    let tol = Tolerances::default();
    let p = sync_gen_default_params();
    let sys = case_studies::build_sync_gen(&p).unwrap();
    for (v_f, tau) in [(0.1, 1.0), (0.5, 0.2), (-0.2, 0.7)] {
        let guess = case_studies::sync_gen_initial_guess(&p, v_f, tau);
        let eq = find_equilibrium(&sys, &DVector::from_row_slice(&[v_f, tau]), &guess, &tol).unwrap();
        let hand = generator_residual_by_hand(&p, &eq.s_bar, v_f, tau);
        assert!(hand.norm() < 1e-8, "{hand}");
        // Dynamics at an arbitrary point agree with the hand residual mapped back.
        let s = DVector::from_row_slice(&[0.3, -0.2, 1.1, 0.05, -0.4, 2.0]);
        let x = sys.q_inv() * &s;
        let xdot = sys.dynamics(&x, &DVector::from_row_slice(&[v_f, tau])).unwrap();
        assert!((xdot - generator_residual_by_hand(&p, &s, v_f, tau)).amax() < 1e-12);
    }
}

#[test]
fn generator_power_balance() {
    // Ḣ = −sᵀR s + V_f I_f + τ ω: the rotation coupling exchanges no energy.
    let p = sync_gen_default_params();
    let sys = case_studies::build_sync_gen(&p).unwrap();
    let x = DVector::from_row_slice(&[0.4, -1.0, 0.3, 0.2, -0.1, 3.0]);
    let u = DVector::from_row_slice(&[0.7, -0.3]);
    let s = sys.gradient(&x);
    let power = s.dot(&sys.dynamics(&x, &u).unwrap());
    let expected = -s.dot(&(p.dissipation() * &s)) + u[0] * s[2] + u[1] * s[5];
    assert!((power - expected).abs() < 1e-12 * (1.0 + power.abs()));
}

#[test]
fn rigid_body_equilibria_on_disturbed_axis() {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..50 {
        let mut p = random_rigid(&mut rng);
        p.disturbance[1] = 0.0;
        p.disturbance[2] = 0.0;
        let sys = case_studies::build_rigid_body(&p).unwrap();
        let guess = DVector::from_row_slice(&[p.inertia[0] * p.disturbance[0] / p.gains[0] * 0.5, 0.0, 0.0]);
        let eq = find_equilibrium(&sys, &p.input(), &guess, &tol).unwrap();
        let omega = sys.gradient(&eq.x_bar);
        assert!((omega[0] - p.disturbance[0] / p.gains[0]).abs() < 1e-9);
        assert!(omega[1].abs() < 1e-9 && omega[2].abs() < 1e-9);
    }
}

#[test]
fn rigid_body_examples() {
    let tol = Tolerances::default();
    let p = RigidBodyParams {
        inertia: [1.0, 2.0, 3.0],
        gains: [1.0; 3],
        disturbance: [1.0, 0.0, 0.0],
    };
    let sys = case_studies::build_rigid_body(&p).unwrap();
    let at = |w: f64| analyzer::check_affine(&sys, &DVector::from_row_slice(&[w, 0.0, 0.0]), &tol).unwrap();
    let strict = at(1.0);
    assert_eq!(strict.verdict, Verdict::SatisfiedStrictly);
    assert!((strict.epsilon - 0.5).abs() < 1e-12);
    // Eigenvalues −2 ± |ω̄ₓ|: marginal at 2, violated beyond.
    assert_eq!(at(2.0).verdict, Verdict::Satisfied);
    assert_eq!(at(3.0).verdict, Verdict::Violated);
    assert!(case_studies::single_axis_threshold(&p).unwrap().stable);
}
