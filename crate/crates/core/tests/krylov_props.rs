use proptest::prelude::*;
use saddlepc_core::krylov::*;
use saddlepc_core::la::{DenseMatrix, SparseMatrix};
use saddlepc_core::mesh::{gen_lshape, gen_square};
use saddlepc_core::saddle::*;

fn spd(n: usize, entries: &[f64]) -> DenseMatrix {
    let q = DenseMatrix::from_row_major(n, n, entries[..n * n].to_vec()).unwrap();
    q.transpose().matmul(&q).unwrap().add(&DenseMatrix::identity(n).scaled(0.5)).unwrap()
}

fn solve_dense(a: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    a.lu().unwrap().solve(b).unwrap()
}

fn energy_error(a: &DenseMatrix, x: &[f64], exact: &[f64]) -> f64 {
    let e: Vec<f64> = x.iter().zip(exact).map(|(u, v)| u - v).collect();
    let ae = a.matvec(&e).unwrap();
    e.iter().zip(&ae).map(|(u, v)| u * v).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn jacobi_pcg_matches_dense_solve(
        n in 2usize..12,
        entries in prop::collection::vec(-1.0f64..1.0, 144),
        rhs in prop::collection::vec(-1.0f64..1.0, 12),
    ) {
        let a = spd(n, &entries);
        let b = &rhs[..n];
        prop_assume!(b.iter().any(|v| v.abs() > 1e-3));
        let sa = SparseMatrix::from_dense(&a);
        let diag: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        let ip = InnerProduct::block_diagonal(SparseMatrix::diagonal(&diag), SparseMatrix::zeros(0, 0)).unwrap();
        let opts = KrylovOptions { tol: 1e-12, max_it: 100 };
        let out = pcg(
            |x| sa.spmv(x),
            |r| Ok(r.iter().zip(&diag).map(|(v, d)| v / d).collect()),
            b, &ip, opts,
        ).unwrap();
        prop_assert!(out.report.converged);
        let exact = solve_dense(&a, b);
        let scale = exact.iter().fold(1.0f64, |s, v| s.max(v.abs()));
        for (x, y) in out.x.iter().zip(&exact) {
            prop_assert!((x - y).abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn cg_energy_error_is_monotone(
        n in 3usize..10,
        entries in prop::collection::vec(-1.0f64..1.0, 100),
    ) {
        let a = spd(n, &entries);
        let sa = SparseMatrix::from_dense(&a);
        let b = vec![1.0; n];
        let exact = solve_dense(&a, &b);
        let mut last = f64::INFINITY;
        for it in 1..=n {
            let out = pcg(|x| sa.spmv(x), |r| Ok(r.to_vec()), &b, &InnerProduct::Euclidean,
                KrylovOptions { tol: 1e-14, max_it: it }).unwrap();
            let err = energy_error(&a, &out.x, &exact);
            prop_assert!(err <= last * (1.0 + 1e-8) + 1e-12);
            last = err;
        }
    }

    #[test]
    fn minres_solves_symmetric_indefinite(
        n in 2usize..10,
        entries in prop::collection::vec(-1.0f64..1.0, 100),
        shift in -2.0f64..2.0,
    ) {
        let q = DenseMatrix::from_row_major(n, n, entries[..n * n].to_vec()).unwrap();
        let a = q.add(&q.transpose()).unwrap().add(&DenseMatrix::identity(n).scaled(shift)).unwrap();
        let lu = a.lu().unwrap();
        prop_assume!(lu.pivot_ratio() > 1e-4);
        let sa = SparseMatrix::from_dense(&a);
        let b = vec![1.0; n];
        let out = minres(|x| sa.spmv(x), |r| Ok(r.to_vec()), &b, &InnerProduct::Euclidean,
            KrylovOptions { tol: 1e-10, max_it: 10 * n }).unwrap();
        prop_assert!(out.report.converged, "{:?}", out.report.relative_residuals);
        let pr = &out.report.preconditioned_residuals;
        for w in pr.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-10));
        }
        let exact = lu.solve(&b).unwrap();
        let scale = exact.iter().fold(1.0f64, |s, v| s.max(v.abs()));
        for (x, y) in out.x.iter().zip(&exact) {
            prop_assert!((x - y).abs() <= 1e-6 * scale);
        }
    }
}

#[test]
fn indefinite_diagonal_needs_at_most_four_minres_steps() {
    let d = [1.0, -1.0, 2.0, -2.0];
    let b = [1.0, 2.0, 3.0, 4.0];
    let out = minres(
        |x| Ok(x.iter().zip(&d).map(|(a, b)| a * b).collect()),
        |r| Ok(r.to_vec()),
        &b,
        &InnerProduct::Euclidean,
        KrylovOptions { tol: 1e-12, max_it: 10 },
    )
    .unwrap();
    assert!(out.report.converged && out.report.iterations <= 4);
    for i in 0..4 {
        assert!((out.x[i] - b[i] / d[i]).abs() < 1e-10);
    }
}

fn square(level: usize) -> SaddleSystem {
    SaddleSystem::assemble(&gen_square(level, 1.0).unwrap(), 0.0).unwrap()
}

#[test]
fn preconditioned_saddle_solves_match_dense_solution() {
    let sys = square(3).with_k(1.0);
    let b = build_rhs(&sys, RhsKind::Rfrg, 1).unwrap();
    let exact = sys.dense_k().lu().unwrap().solve(&b).unwrap();
    let opts = KrylovOptions { tol: 1e-10, max_it: 200 };
    for (cfg, method) in [
        (PreconditionerConfig::p(2.0), Method::Cg),
        (PreconditionerConfig::p(2.0), Method::Minres),
        (PreconditionerConfig::mdiag(2.0), Method::Minres),
    ] {
        let out = solve_case(&sys, &cfg, method, RhsKind::Rfrg, 1, opts).unwrap();
        assert!(out.report.converged, "{cfg:?} {method:?}");
        let err = out.x.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-7, "{cfg:?} {method:?}: {err}");
    }
}

#[test]
fn p0_minres_solves_the_k0_system() {
    let sys = square(3);
    let b = build_rhs(&sys, RhsKind::Rfrg, 1).unwrap();
    let exact = sys.dense_k().lu().unwrap().solve(&b).unwrap();
    let out = solve_case(
        &sys,
        &PreconditionerConfig::p0(),
        Method::Minres,
        RhsKind::Rfrg,
        1,
        KrylovOptions { tol: 1e-10, max_it: 200 },
    )
    .unwrap();
    assert!(out.report.converged);
    let err = out.x.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-7, "{err}");
}

#[test]
fn p_cg_on_level3_square_converges_quickly() {
    let sys = square(3);
    let out = solve_case(&sys, &PreconditionerConfig::p(1.0), Method::Cg, RhsKind::Ones, 0, KrylovOptions::default())
        .unwrap();
    assert!(out.report.converged);
    assert!(out.report.iterations <= 10);
    assert!(out.report.final_residual() <= 1e-6);
    assert_eq!(out.report.relative_residuals.len(), out.report.iterations + 1);
}

#[test]
fn mdiag_minres_is_not_much_faster_than_p_cg() {
    for k in [0.0, 1.0] {
        let sys = square(2).with_k(k);
        let eta = k * k + 1.0;
        let o = KrylovOptions::default();
        let p = solve_case(&sys, &PreconditionerConfig::p(eta), Method::Cg, RhsKind::Ones, 0, o).unwrap().report;
        let d =
            solve_case(&sys, &PreconditionerConfig::mdiag(eta), Method::Minres, RhsKind::Ones, 0, o).unwrap().report;
        assert!(p.converged && d.converged);
        assert!(d.iterations + 1 >= p.iterations);
    }
}

#[test]
fn mdiag_cg_fails_at_k4_with_inexact_inner_solves() {
    let sys = square(3).with_k(4.0);
    let cfg = PreconditionerConfig::mdiag(20.0).with_inner(InnerSolve::Pcg { tol: 1e-2, max_it: 1000 });
    let r = solve_case(&sys, &cfg, Method::Cg, RhsKind::Ones, 0, KrylovOptions::default()).unwrap().report;
    assert!(!r.converged);
    assert!(r.breakdown || r.iterations == 200);
}

#[test]
fn nonsymmetric_triangular_variant_warns_under_minres() {
    let sys = square(3).with_k(1.0);
    let r = solve_case(
        &sys,
        &PreconditionerConfig::mtri(2.0, 0.3),
        Method::Minres,
        RhsKind::Ones,
        0,
        KrylovOptions::default(),
    )
    .unwrap()
    .report;
    assert!(r.warnings.iter().any(|w| w.contains("self-adjoint")), "{r:?}");
}

#[test]
fn reports_are_deterministic() {
    let sys = SaddleSystem::assemble(&gen_lshape(2, 0.5).unwrap(), 2.0).unwrap();
    let cfg = PreconditionerConfig::p(5.0).with_inner(InnerSolve::Pcg { tol: 1e-2, max_it: 100 });
    let a = solve_case(&sys, &cfg, Method::Cg, RhsKind::Rf0g, 9, KrylovOptions::default()).unwrap().report;
    let b = solve_case(&sys, &cfg, Method::Cg, RhsKind::Rf0g, 9, KrylovOptions::default()).unwrap().report;
    assert_eq!(a.iterations, b.iterations);
    assert_eq!(a.relative_residuals, b.relative_residuals);
}

#[test]
fn rhs_families() {
    let sys = square(3);
    let (n, m) = (sys.n(), sys.m());
    assert_eq!(build_rhs(&sys, RhsKind::Ones, 0).unwrap(), vec![1.0; n + m]);
    let d = build_rhs(&sys, RhsKind::Df0g, 4).unwrap();
    let ct = sys.c().spmv_transpose(&d[..n]).unwrap();
    let fnorm = d[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(ct.iter().all(|v| v.abs() <= 1e-12 * fnorm));
    assert!(d[n..].iter().all(|&v| v == 0.0));
    assert_eq!(build_rhs(&sys, RhsKind::Rfrg, 4).unwrap(), build_rhs(&sys, RhsKind::Rfrg, 4).unwrap());
    assert_ne!(build_rhs(&sys, RhsKind::Rfrg, 4).unwrap(), build_rhs(&sys, RhsKind::Rfrg, 5).unwrap());
    let r = build_rhs(&sys, RhsKind::Rf0g, 4).unwrap();
    assert!(r[..n].iter().all(|v| (0.0..1.0).contains(v)));
}

#[test]
fn direct_method_runs_through_solve_case() {
    let sys = square(3);
    let out = solve_case(
        &sys,
        &PreconditionerConfig::direct_k0(),
        Method::Direct,
        RhsKind::Rfrg,
        2,
        KrylovOptions::default(),
    )
    .unwrap();
    assert!(out.report.converged);
    assert!(out.report.final_residual() <= 1e-8);
}
