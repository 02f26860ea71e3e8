//! Solutions checked against dense LU from nalgebra.

use ipm_linsolve::factor::{lu_complete, FactorKind};
use ipm_linsolve::ipm::{ipm_solve, IpmConfig, IpmStatus, LpProblem};
use ipm_linsolve::krylov::{solve_right_preconditioned, Identity, KrylovConfig, KrylovMethod};
use ipm_linsolve::pipeline::{Method, Pipeline, PipelineConfig};
use ipm_linsolve::precond::{build_corrected_preconditioner, FilterConfig, ReusePolicy};
use ipm_linsolve::sparse::vector::rel_diff;
use ipm_linsolve::synthetic::{
    constructed_lp, laplacian_2d, random_arrow, random_nonsym_dd, random_spd, scale_disparate_lp,
};
use ipm_linsolve::CsrMatrix64 as M;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dense_solve(a: &M, b: &[f64]) -> Vec<f64> {
    let n = a.nrows();
    DMatrix::from_row_slice(n, n, &a.to_dense())
        .lu()
        .solve(&DVector::from_column_slice(b))
        .expect("nonsingular")
        .as_slice()
        .to_vec()
}

fn rhs(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

#[test]
fn krylov_methods_agree_with_dense_lu() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10 {
        let spd = random_spd::<f64, _>(&mut rng, 40, 0.1);
        let dd = random_nonsym_dd::<f64, _>(&mut rng, 40, 0.1);
        let b = rhs(&mut rng, 40);
        for (a, methods) in [
            (&spd, vec![KrylovMethod::Cg, KrylovMethod::Gcr, KrylovMethod::Bicgstab]),
            (&dd, vec![KrylovMethod::Gcr, KrylovMethod::Bicgstab]),
        ] {
            let oracle = dense_solve(a, &b);
            for method in methods {
                let cfg = KrylovConfig {
                    method,
                    rel_tol: 1e-10,
                    ..KrylovConfig::default()
                };
                let (x, rep) = solve_right_preconditioned(a, &Identity(40), &b, &vec![0.0; 40], &cfg).unwrap();
                assert!(rep.converged(), "{} {:?}", method.name(), rep.status);
                assert!(rel_diff(&x, &oracle) < 1e-7, "{}", method.name());
            }
        }
    }
}

#[test]
fn pipeline_paths_agree_with_dense_lu() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cases = vec![
        laplacian_2d::<f64>(8),
        random_spd(&mut rng, 70, 0.05),
        random_nonsym_dd(&mut rng, 70, 0.05),
        random_arrow(&mut rng, 3, 15, 5, 0.2, false),
    ];
    for a in &cases {
        let b = rhs(&mut rng, a.nrows());
        let oracle = dense_solve(a, &b);
        for method in [Method::BlockJacobi, Method::Bbd] {
            for nranks in [1, 2, 3, 4] {
                let mut p = Pipeline::new(PipelineConfig {
                    nranks,
                    ..PipelineConfig::default()
                })
                .unwrap();
                let (x, out) = p.solve(method, a, &b, None, 0.0, &ReusePolicy::default()).unwrap();
                assert!(out.report.converged() && out.report.final_relres <= 1e-8);
                assert!(rel_diff(&x, &oracle) < 1e-6, "{} at {nranks}", method.name());
            }
        }
    }
}

#[test]
fn filtered_preconditioner_still_converges() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = random_nonsym_dd::<f64, _>(&mut rng, 80, 0.08);
    let b = rhs(&mut rng, 80);
    let oracle = dense_solve(&a, &b);
    let mut p = Pipeline::new(PipelineConfig {
        nranks: 2,
        factor: Some(FactorKind::LuComplete),
        ..PipelineConfig::default()
    })
    .unwrap();
    let (_, exact) = p
        .solve(Method::BlockJacobi, &a, &b, None, 0.0, &ReusePolicy::default())
        .unwrap();
    let (x, filtered) = p
        .solve(Method::BlockJacobi, &a, &b, None, 0.3, &ReusePolicy::default())
        .unwrap();
    assert!(filtered.nnz_l < exact.nnz_l);
    assert!(rel_diff(&x, &oracle) < 1e-6);
}

#[test]
fn corrected_build_solves_zero_pivot_matrix() {
    let a = M::from_dense(3, 3, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 2.0]).unwrap();
    assert!(lu_complete(&a).is_err());
    let f = build_corrected_preconditioner(&a, None, 1e-12).unwrap();
    let b = vec![1.0, 2.0, 3.0];
    let x = f.sptrsv(&b).unwrap();
    assert!(rel_diff(&x, &dense_solve(&a, &b)) < 1e-10);
}

#[test]
fn interior_point_objectives() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for (m, n) in [(5, 10), (10, 20), (20, 45)] {
        let lp = constructed_lp::<f64, _>(&mut rng, m, n, 0.3);
        for method in [Method::BlockJacobi, Method::Bbd] {
            let cfg = IpmConfig {
                method,
                switching: false,
                pipeline: PipelineConfig {
                    nranks: 2,
                    ..PipelineConfig::default()
                },
                ..IpmConfig::default()
            };
            let sol = ipm_solve(&lp.problem, &cfg).unwrap();
            assert_eq!(sol.report.status, IpmStatus::Optimal);
            assert!((sol.report.objective - lp.objective).abs() <= 1e-6 * (1.0 + lp.objective.abs()));
        }
    }
}

#[test]
fn hand_lp_and_filtered_lp() {
    let hand = LpProblem::new(M::from_dense(1, 2, &[1.0, 1.0]).unwrap(), vec![1.0], vec![2.0, 1.0]).unwrap();
    let sol = ipm_solve(&hand, &IpmConfig::default()).unwrap();
    assert_eq!(sol.report.status, IpmStatus::Optimal);
    assert!((sol.report.objective - 1.0).abs() <= 1e-6);
    assert!(sol.x[1] > 0.999 && sol.x[0] < 1e-6);

    let p = scale_disparate_lp::<f64>(16);
    let cfg = IpmConfig {
        filter: Some(FilterConfig::constant(1e-3)),
        ..IpmConfig::default()
    };
    let sol = ipm_solve(&p, &cfg).unwrap();
    assert_eq!(sol.report.status, IpmStatus::Optimal);
    assert!(sol.report.log.iter().filter(|l| l.accepted).all(|l| l.nnz_ratio < 1.0));
}
