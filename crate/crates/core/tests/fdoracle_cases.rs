mod common;

use common::cases::{manufactured_sin, plateau, rito_sin2, rito_sine};
use common::{random_weight, unit, unit_source_solution};
use plap_core::fdoracle::{
    distance_guess, fd_eigen, fd_solve, jacobian, residual, FdMesh, FdOptions, FdRhs,
};
use plap_core::pcalc::lambda_1;
use plap_core::{solve_dirichlet, Interval, PExponent, Profile, SolverConfig, WeightFn};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn pe(p: f64) -> PExponent {
    PExponent::new(p).unwrap()
}

fn linear_fd(m: &WeightFn, iv: Interval, p: f64, n: usize) -> (FdMesh, Vec<f64>) {
    let mesh = FdMesh::new(iv, n).unwrap();
    let rhs = FdRhs::linear(&mesh, m);
    let r = fd_solve(&mesh, &rhs, pe(p), &distance_guess(&mesh, 0.1), &FdOptions::default()).unwrap();
    assert!(r.converged);
    (mesh, r.u)
}

fn max_error(mesh: &FdMesh, u: &[f64], exact: impl Fn(f64) -> f64) -> f64 {
    mesh.nodes.iter().zip(u).fold(0.0f64, |e, (x, v)| e.max((v - exact(*x)).abs()))
}

#[test]
fn unit_source_p_two() {
    let (mesh, u) = linear_fd(&WeightFn::constant(unit(), 1.0), unit(), 2.0, 200);
    assert!(max_error(&mesh, &u, |x| x * (1.0 - x) / 2.0) < 1e-5);
}

#[test]
fn sine_source_on_three_periods() {
    let iv = Interval::new(0.0, 3.0 * PI).unwrap();
    let (mesh, u) = linear_fd(&rito_sine().m, iv, 2.0, 600);
    assert!(max_error(&mesh, &u, f64::sin) < mesh.h * mesh.h);
}

#[test]
fn singular_manufactured_sine() {
    let s = manufactured_sin(0.5);
    let mesh = FdMesh::new(s.omega, 400).unwrap();
    let rhs = FdRhs::singular(&mesh, &s.m, 0.5);
    let init: Vec<f64> = mesh.nodes.iter().map(|x| x.min(PI - x)).collect();
    let r = fd_solve(&mesh, &rhs, s.p, &init, &FdOptions::default()).unwrap();
    assert!(r.converged);
    assert!(max_error(&mesh, &r.u, f64::sin) < mesh.h * mesh.h);
}

#[test]
fn second_order_mesh_convergence() {
    let m = rito_sin2().m;
    let errors: Vec<f64> = [100, 200, 400]
        .iter()
        .map(|&n| {
            // n + 1 cells, so doubling the cell count halves h exactly
            let (mesh, u) = linear_fd(&m, m.domain(), 2.0, 2 * n - 1);
            max_error(&mesh, &u, |x| x.sin().powi(2))
        })
        .collect();
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.5..4.5).contains(&ratio), "{errors:?}");
    }
}

#[test]
fn eigenvalues() {
    let opts = FdOptions::default();
    let e = fd_eigen(Interval::new(0.0, PI).unwrap(), pe(2.0), 400, &opts).unwrap();
    assert!((e.lambda - 1.0).abs() < 1e-4, "{}", e.lambda);
    let e = fd_eigen(unit(), pe(2.0), 400, &opts).unwrap();
    assert!((e.lambda - PI * PI).abs() < 1e-3, "{}", e.lambda);
    for p in [1.5, 3.0] {
        let e = fd_eigen(unit(), pe(p), 400, &opts).unwrap();
        let exact = lambda_1(unit(), pe(p));
        assert!(((e.lambda - exact) / exact).abs() < 5e-3, "p = {p}: {} vs {exact}", e.lambda);
        let top = e.phi.iter().cloned().fold(0.0, f64::max);
        assert!((top - 1.0).abs() < 1e-12);
    }
}

#[test]
fn eigenfunction_agrees_with_first_integral_profile() {
    let p = pe(3.0);
    let e = fd_eigen(unit(), p, 400, &FdOptions::default()).unwrap();
    let pair = plap_core::pcalc::eigenpair(unit(), p, 512).unwrap();
    let mesh = FdMesh::new(unit(), 400).unwrap();
    let profile = pair.eval_many(&mesh.nodes);
    let diff = e.phi.iter().zip(&profile).fold(0.0f64, |d, (a, (b, _))| d.max((a - b).abs()));
    assert!(diff < 1e-3, "{diff:e}");
}

/// Regression weights: every linear case the primary solver is checked on.
fn regression_cases() -> Vec<(&'static str, WeightFn, f64)> {
    let mut out = vec![
        ("rito-sine", rito_sine().m, 2.0),
        ("rito-sin2", rito_sin2().m, 2.0),
        ("manufactured-sin", manufactured_sin(0.5).m, 2.0),
        ("plateau p=2", plateau(2.0).m, 2.0),
        ("plateau p=3", plateau(3.0).m, 3.0),
    ];
    for p in [1.5, 2.0, 3.0] {
        out.push(("unit", WeightFn::constant(unit(), 1.0), p));
    }
    out
}

#[test]
fn oracle_agrees_with_primary_on_regression_weights() {
    let cfg = SolverConfig::default();
    for (name, m, p) in regression_cases() {
        let iv = m.domain();
        let (mesh, u) = linear_fd(&m, iv, p, 400);
        let sol = solve_dirichlet(&m, iv, pe(p), &cfg).unwrap();
        let err = max_error(&mesh, &u, |x| sol.value(x));
        let tol = (5.0 * mesh.h * mesh.h).max(1e-6);
        assert!(err <= tol, "{name} p = {p}: {err:e} > {tol:e}");
    }
}

#[test]
fn unit_source_general_p() {
    for p in [1.5, 3.0] {
        let (mesh, u) = linear_fd(&WeightFn::constant(unit(), 1.0), unit(), p, 400);
        let err = max_error(&mesh, &u, |x| unit_source_solution(p, x));
        assert!(err < 5.0 * mesh.h * mesh.h, "p = {p}: {err:e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn jacobian_matches_central_differences(seed in any::<u64>(), p in prop::sample::select(vec![1.5, 2.0, 3.0])) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mesh = FdMesh::new(unit(), 24).unwrap();
        let m = random_weight(&mut rng, 1.0, None);
        let rhs = FdRhs::singular(&mesh, &m, 0.5);
        let u: Vec<f64> = mesh.nodes.iter().map(|x| x.min(1.0 - x) * rng.gen_range(0.5..2.0)).collect();
        let (sub, diag, sup) = jacobian(&mesh, &rhs, pe(p), &u);
        let (f0, _) = residual(&mesh, &rhs, pe(p), &u);
        for j in 0..mesh.n {
            let eps = 1e-6 * u[j];
            let mut up = u.clone();
            let mut dn = u.clone();
            up[j] += eps;
            dn[j] -= eps;
            let (fp, _) = residual(&mesh, &rhs, pe(p), &up);
            let (fm, _) = residual(&mesh, &rhs, pe(p), &dn);
            for i in j.saturating_sub(1)..=(j + 1).min(mesh.n - 1) {
                let fd = (fp[i] - fm[i]) / (2.0 * eps);
                let exact = if i == j { diag[i] } else if i + 1 == j { sup[i] } else { sub[i] };
                let scale = exact.abs().max(f0[i].abs() / u[j]).max(1.0);
                prop_assert!((fd - exact).abs() <= 1e-6 * scale, "p {} i {} j {}: {} vs {}", p, i, j, fd, exact);
            }
        }
    }

    #[test]
    fn oracle_agrees_on_random_weights(seed in any::<u64>(), p in prop::sample::select(vec![1.5, 2.0, 3.0])) {
        let m = random_weight(&mut ChaCha8Rng::seed_from_u64(seed), 1.0, None);
        let (mesh, u) = linear_fd(&m, unit(), p, 400);
        let sol = solve_dirichlet(&m, unit(), pe(p), &SolverConfig::default()).unwrap();
        let err = max_error(&mesh, &u, |x| sol.value(x));
        prop_assert!(err <= (5.0 * mesh.h * mesh.h).max(1e-6), "{:e}", err);
    }
}
