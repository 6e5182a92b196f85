//! Independent oracles and random draws shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use phshift::case_studies::{RigidBodyParams, SyncGenParams};
use phshift::{PHModel, QuadraticAffinePH};
use rand::Rng;

pub fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..hi)
}

pub fn random_vector<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| uniform(rng, lo, hi))
}

pub fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / (1.0 + b.amax())
}

/// Hand expansion of the rigid-body test matrix at angular velocity `w`.
pub fn rigid_condition_by_hand(m: [f64; 3], r: [f64; 3], w: [f64; 3]) -> DMatrix<f64> {
    let [mx, my, mz] = m;
    let [wx, wy, wz] = w;
    DMatrix::from_row_slice(
        3,
        3,
        &[
            -2.0 * r[0],
            wz * (my - mx),
            wy * (mx - mz),
            wz * (my - mx),
            -2.0 * r[1],
            wx * (mz - my),
            wy * (mx - mz),
            wx * (mz - my),
            -2.0 * r[2],
        ],
    )
}

/// Closed-form generator test matrix with the coupling factor `k` only on the
/// speed terms and `Ī_d L_d` in the torque row; it coincides with the
/// model's matrix when `k = 1` and `Ī_d = 0`.
pub fn sync_gen_condition_closed_form(p: &SyncGenParams, s: &DVector<f64>) -> DMatrix<f64> {
    let (id, iq, w) = (s[0], s[1], s[5]);
    let k = p.k;
    let mut c = DMatrix::zeros(6, 6);
    let mut set = |i: usize, j: usize, v: f64| {
        c[(i, j)] = v;
        c[(j, i)] = v;
    };
    set(0, 0, -2.0 * p.r);
    set(1, 1, -2.0 * p.r);
    set(2, 2, -2.0 * p.r_f);
    set(3, 3, -2.0 * p.r_kd);
    set(4, 4, -2.0 * p.r_kq);
    set(5, 5, -2.0 * p.d);
    set(0, 1, w * (p.l_d - p.l_q));
    set(0, 4, k * w * p.l_akq);
    set(1, 2, k * w * p.l_afd);
    set(1, 3, k * w * p.l_akd);
    set(0, 5, -iq * p.l_d);
    set(1, 5, id * p.l_d);
    set(2, 5, -iq * p.l_afd);
    set(3, 5, -iq * p.l_akd);
    set(4, 5, -id * p.l_akq);
    c
}

/// Generator test matrix expanded by hand from `ψ = L I`, the rotation
/// coupling `[−ψ_q; ψ_d] ω` and its skew counterpart in the torque balance.
pub fn sync_gen_condition_by_hand(p: &SyncGenParams, s: &DVector<f64>) -> DMatrix<f64> {
    let (id, iq) = (s[0], s[1]);
    let k = p.k;
    let mut c = sync_gen_condition_closed_form(p, s);
    let mut set = |i: usize, j: usize, v: f64| {
        c[(i, j)] = v;
        c[(j, i)] = v;
    };
    set(1, 5, id * p.l_q);
    set(2, 5, -iq * k * p.l_afd);
    set(3, 5, -iq * k * p.l_akd);
    set(4, 5, -id * k * p.l_akq);
    c
}

pub fn random_rigid<R: Rng>(rng: &mut R) -> RigidBodyParams {
    RigidBodyParams {
        inertia: [uniform(rng, 0.5, 5.0), uniform(rng, 0.5, 5.0), uniform(rng, 0.5, 5.0)],
        gains: [uniform(rng, 0.1, 3.0), uniform(rng, 0.1, 3.0), uniform(rng, 0.1, 3.0)],
        disturbance: [uniform(rng, -3.0, 3.0), uniform(rng, -3.0, 3.0), uniform(rng, -3.0, 3.0)],
    }
}

/// Random generator parameters with a positive definite inductance matrix.
pub fn random_sync_gen<R: Rng>(rng: &mut R) -> SyncGenParams {
    loop {
        let p = SyncGenParams {
            l_d: uniform(rng, 1.5, 3.0),
            l_q: uniform(rng, 1.5, 3.0),
            l_afd: uniform(rng, 0.1, 0.8),
            l_akd: uniform(rng, 0.1, 0.8),
            l_akq: uniform(rng, 0.1, 0.8),
            l_ffd: uniform(rng, 1.5, 3.0),
            l_kkd: uniform(rng, 1.5, 3.0),
            l_kkq: uniform(rng, 1.5, 3.0),
            k: uniform(rng, 0.5, 1.5),
            r: uniform(rng, 0.01, 1.0),
            r_f: uniform(rng, 0.01, 1.0),
            r_kd: uniform(rng, 0.01, 1.0),
            r_kq: uniform(rng, 0.01, 1.0),
            d: uniform(rng, 0.05, 1.0),
            m: uniform(rng, 1.0, 10.0),
        };
        if p.inductance().cholesky().is_some() {
            return p;
        }
    }
}

fn random_skew<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| uniform(rng, -1.0, 1.0));
    &a - a.transpose()
}

/// Random quadratic-affine system with `n` states and `m ≤ n` inputs.
pub fn random_affine<R: Rng>(rng: &mut R, n: usize, m: usize) -> QuadraticAffinePH {
    let a = DMatrix::from_fn(n, n, |_, _| uniform(rng, -1.0, 1.0));
    let r0 = &a * a.transpose() * 0.5;
    let f0 = random_skew(rng, n) - &r0;
    let f = (0..n).map(|_| random_skew(rng, n)).collect();
    let b = DMatrix::from_fn(n, n, |_, _| uniform(rng, -1.0, 1.0));
    let q = &b * b.transpose() + DMatrix::identity(n, n) * 0.5;
    let g = loop {
        let g = DMatrix::from_fn(n, m, |_, _| uniform(rng, -1.0, 1.0));
        if g.clone().svd(false, false).singular_values.min() > 1e-2 {
            break g;
        }
    };
    QuadraticAffinePH::new(f0, f, q, r0, g).expect("random draw is a valid model")
}

/// `s ↦ F(Q⁻¹s) s̄` evaluated straight from the structure matrices.
pub fn coenergy_condition_map(sys: &QuadraticAffinePH, s: &DVector<f64>, s_bar: &DVector<f64>) -> DVector<f64> {
    let x = sys.q().clone().lu().solve(s).expect("Q is invertible");
    let mut f = sys.f0().clone();
    for (fi, xi) in sys.f_list().iter().zip(x.iter()) {
        f += fi * *xi;
    }
    f * s_bar
}

/// Central differences of [`coenergy_condition_map`].
pub fn fd_condition_jacobian(sys: &QuadraticAffinePH, s: &DVector<f64>, s_bar: &DVector<f64>) -> DMatrix<f64> {
    let n = s.len();
    let h = 1e-5 * (1.0 + s.norm());
    let mut jac = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut plus = s.clone();
        let mut minus = s.clone();
        plus[j] += h;
        minus[j] -= h;
        let col = (coenergy_condition_map(sys, &plus, s_bar) - coenergy_condition_map(sys, &minus, s_bar)) / (2.0 * h);
        jac.set_column(j, &col);
    }
    jac
}

/// `H(x) = Σ (x⁴/4 + x²/2)` with damping `R(x) = diag(1 + x²)`, `R* = I`,
/// and a state-dependent rotation in the first two coordinates.
pub fn quartic_model(n: usize) -> PHModel {
    PHModel::builder(n, 1)
        .interconnection(move |x| {
            let mut j = DMatrix::zeros(n, n);
            if n >= 2 {
                j[(0, 1)] = x[1];
                j[(1, 0)] = -x[1];
            }
            j
        })
        .dissipation(move |x| DMatrix::from_diagonal(&x.map(|v| 1.0 + v * v)), DMatrix::identity(n, n))
        .input_matrix(DMatrix::from_fn(n, 1, |i, _| if i == 0 { 1.0 } else { 0.0 }))
        .hamiltonian(
            |x| x.iter().map(|v| v.powi(4) / 4.0 + v * v / 2.0).sum(),
            |x| x.map(|v| v.powi(3) + v),
            |x| DMatrix::from_diagonal(&x.map(|v| 3.0 * v * v + 1.0)),
        )
        .build()
        .expect("valid model")
}

/// `H(x) = log Σ eˣⁱ + ½‖x‖²`: strictly convex with a non-diagonal Hessian.
pub fn log_sum_exp_model(n: usize) -> PHModel {
    fn softmax(x: &DVector<f64>) -> DVector<f64> {
        let top = x.max();
        let e = x.map(|v| (v - top).exp());
        let total = e.sum();
        e / total
    }
    PHModel::builder(n, n)
        .dissipation(move |_| DMatrix::identity(n, n) * 0.5, DMatrix::identity(n, n) * 0.5)
        .input_matrix(DMatrix::identity(n, n))
        .hamiltonian(
            |x| {
                let top = x.max();
                top + x.map(|v| (v - top).exp()).sum().ln() + 0.5 * x.norm_squared()
            },
            |x| softmax(x) + x,
            move |x| {
                let p = softmax(x);
                DMatrix::from_diagonal(&p) - &p * p.transpose() + DMatrix::identity(n, n)
            },
        )
        .build()
        .expect("valid model")
}
