use nalgebra::DMatrix;
use proptest::prelude::*;
use saddlepc_core::genspd::*;
use saddlepc_core::la::DenseMatrix;
use saddlepc_core::mesh::{gen_lshape, gen_square};
use saddlepc_core::saddle::{dense_k_inverse, SaddleSystem};
use saddlepc_core::Error;

fn to_na(a: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.n_rows(), a.n_cols(), a.entries())
}

fn from_na(a: &DMatrix<f64>) -> DenseMatrix {
    let rows: Vec<f64> = (0..a.nrows()).flat_map(|i| (0..a.ncols()).map(move |j| a[(i, j)])).collect();
    DenseMatrix::from_row_major(a.nrows(), a.ncols(), rows).unwrap()
}

fn shape_strategy() -> impl Strategy<Value = (usize, usize, usize, usize)> {
    prop::sample::select(admissible_shapes(8))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn both_inverses_match_dense_inverse((m, n, k, l) in shape_strategy(), seed in any::<u64>()) {
        let gs = random_admissible(m, n, k, l, seed).unwrap();
        let nd = build_null_data(&gs).unwrap();
        let rep = verify_inverses(&gs, &nd).unwrap();
        prop_assert!(rep.all_passed(), "{:?}\n{}", (m, n, k, l), rep);
        let pr3 = verify_lingshi_pr3(&gs, &nd, seed).unwrap();
        prop_assert!(pr3.all_passed(), "{:?}\n{}", (m, n, k, l), pr3);

        let oracle = from_na(&to_na(&gs.block()).try_inverse().expect("nonsingular"));
        let inv1 = inverse_app1(&gs, &nd, None).unwrap();
        let inv2 = inverse_app2(&gs).unwrap();
        // Rank conditions alone do not bound the conditioning, so compare
        // relative to the size of the inverse.
        prop_assert!(rel_diff(&inv1, &oracle).unwrap() < 1e-7);
        prop_assert!(rel_diff(&inv2, &oracle).unwrap() < 1e-7);
    }

    #[test]
    fn square_case_does_not_depend_on_x(n in 2usize..7, extra in 1usize..4, seed in any::<u64>()) {
        let l = extra.min(n);
        let gs = random_admissible(n, n, l, l, seed).unwrap();
        let nd = build_null_data(&gs).unwrap();
        let base = inverse_app1(&gs, &nd, None).unwrap();
        let mut rng_seed = seed;
        for _ in 0..3 {
            rng_seed = rng_seed.wrapping_mul(6364136223846793005).wrapping_add(1);
            let x = random_admissible(n, n, l, l, rng_seed).unwrap().b;
            match inverse_app1(&gs, &nd, Some(&x)) {
                Ok(other) => prop_assert!(rel_diff(&other, &base).unwrap() < 1e-7),
                Err(Error::Singular { .. }) => {}
                Err(e) => return Err(TestCaseError::fail(format!("{e}"))),
            }
        }
    }
}

fn maxwell_instance(sys: &SaddleSystem, d: &DenseMatrix) -> GeneralSaddle {
    let b = sys.b().to_dense();
    GeneralSaddle::new(sys.a().to_dense(), b.transpose(), b, d.clone()).unwrap()
}

#[test]
fn maxwell_reduction_recovers_laplacian_and_leading_block() {
    for mesh in [gen_square(2, 1.0).unwrap(), gen_lshape(2, 0.5).unwrap()] {
        let sys = SaddleSystem::assemble(&mesh, 0.0).unwrap();
        let (n, m) = (sys.n(), sys.m());
        let c = sys.c().to_dense();
        let gs = maxwell_instance(&sys, &DenseMatrix::zeros(m, m));
        assert!(gs.check_conditions().all_passed());
        let nd = NullData::from_bases(&gs, c.clone(), c.transpose()).unwrap();
        let l = sys.l().to_dense();
        assert!(rel_diff(&nd.l_r, &l).unwrap() < 1e-12);
        assert!(rel_diff(&nd.l_l, &l).unwrap() < 1e-12);

        let inv = inverse_app1(&gs, &nd, None).unwrap();
        let reference = dense_k_inverse(&sys, 1.0).unwrap();
        assert!(rel_diff(&inv, &reference).unwrap() < 1e-9);
        let v = reference.block(0, 0, n, n);
        assert!(rel_diff(&inv.block(0, 0, n, n), &v).unwrap() < 1e-9);
    }
}

#[test]
fn nonzero_d_block_inverse_formula() {
    let sys = SaddleSystem::assemble(&gen_square(2, 1.0).unwrap(), 0.0).unwrap();
    let (n, m) = (sys.n(), sys.m());
    let c = sys.c().to_dense();
    let l_inv = sys.l().to_dense().inverse().unwrap();
    let v = dense_k_inverse(&sys, 1.0).unwrap().block(0, 0, n, n);
    for scale in [-0.5, 2.0] {
        let d = sys.l().to_dense().scaled(scale);
        let gs = maxwell_instance(&sys, &d);
        let nd = NullData::from_bases(&gs, c.clone(), c.transpose()).unwrap();
        let cl = c.matmul(&l_inv).unwrap();
        let top_left = v.sub(&cl.matmul(&d).unwrap().matmul(&cl.transpose()).unwrap()).unwrap();
        let formula = DenseMatrix::block2x2(&top_left, &cl, &cl.transpose(), &DenseMatrix::zeros(m, m)).unwrap();
        let inv = inverse_app1(&gs, &nd, None).unwrap();
        assert!(rel_diff(&inv, &formula).unwrap() < 1e-9, "scale {scale}");
        let oracle = from_na(&to_na(&gs.block()).try_inverse().unwrap());
        assert!(rel_diff(&formula, &oracle).unwrap() < 1e-9);
    }
}

#[test]
fn rank_deficient_instances_are_rejected() {
    let gs = random_admissible(4, 4, 2, 2, 7).unwrap();
    // A of full rank breaks the null-space dimension condition.
    let full = GeneralSaddle::new(DenseMatrix::identity(4), gs.b.clone(), gs.c.clone(), gs.d.clone()).unwrap();
    assert!(!full.check_conditions().all_passed());
    assert!(matches!(build_null_data(&full), Err(Error::RankCondition(_))));
    // B with repeated columns.
    let mut b = gs.b.clone();
    for i in 0..4 {
        b[(i, 1)] = b[(i, 0)];
    }
    let bad = GeneralSaddle::new(gs.a.clone(), b, gs.c.clone(), gs.d.clone()).unwrap();
    assert!(build_null_data(&bad).is_err());
    assert!(random_admissible(3, 2, 1, 1, 0).is_err());
    assert!(GeneralSaddle::new(gs.a.clone(), gs.b.clone(), gs.c.clone(), DenseMatrix::zeros(3, 3)).is_err());
}

#[test]
fn generation_is_deterministic() {
    assert_eq!(random_admissible(5, 4, 2, 1, 42).unwrap(), random_admissible(5, 4, 2, 1, 42).unwrap());
    assert_ne!(random_admissible(5, 4, 2, 1, 42).unwrap(), random_admissible(5, 4, 2, 1, 43).unwrap());
}
