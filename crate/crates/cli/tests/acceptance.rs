//! One pass/fail line per acceptance criterion. Exits nonzero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use ipm_linsolve::decomp::{partition_rows, BbdStructure};
use ipm_linsolve::factor::{ilu0, lu_complete, FactorKind};
use ipm_linsolve::ipm::{format_lp, ipm_solve, IpmConfig, IpmStatus, LpProblem};
use ipm_linsolve::krylov::{solve_right_preconditioned, KrylovConfig};
use ipm_linsolve::pipeline::{Method, Pipeline, PipelineConfig};
use ipm_linsolve::precond::{
    build_corrected_preconditioner, mc64_match_scale, sparse_filter, ReuseAction, ReuseMode, ReusePolicy,
};
use ipm_linsolve::runtime::{
    bbd_apply, bbd_factor, bj_apply, dist_spmv, DistVector, RankGroup, TAG_GATHER, TAG_SCHUR, TAG_SOLUTION,
};
use ipm_linsolve::sparse::mtx::write_matrix_market;
use ipm_linsolve::sparse::vector::rel_diff;
use ipm_linsolve::synthetic::{constructed_lp, random_arrow, random_nonsym_dd, random_sparse, random_spd};
use ipm_linsolve::CsrMatrix64 as M;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn dense_solve(a: &M, b: &[f64]) -> Vec<f64> {
    let n = a.nrows();
    let m = nalgebra::DMatrix::from_row_slice(n, n, &a.to_dense());
    m.lu()
        .solve(&nalgebra::DVector::from_column_slice(b))
        .expect("nonsingular test matrix")
        .as_slice()
        .to_vec()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

#[derive(Clone, Copy, Debug)]
enum Class {
    Spd,
    NonsymDd,
    Arrow,
}

fn instance(rng: &mut ChaCha8Rng, class: Class) -> M {
    let n: usize = rng.random_range(5..=120);
    let density = (4.0 / n as f64).min(0.5);
    match class {
        Class::Spd => random_spd(rng, n, density),
        Class::NonsymDd => random_nonsym_dd(rng, n, density),
        Class::Arrow => {
            let nblocks = rng.random_range(2..=4);
            let iface = rng.random_range(1..=(n / 10).max(1));
            let block = ((n - iface) / nblocks).max(1);
            let symmetric = rng.random_bool(0.5);
            random_arrow(rng, nblocks, block, iface, density.max(0.1), symmetric)
        }
    }
}

struct Sweep {
    solves: usize,
    failures: Vec<String>,
    worst_relres: f64,
    worst_err: f64,
    bbd_lu_max_iters: usize,
    bbd_lu_solves: usize,
    seconds: f64,
}

/// Every class, method, factor kind and rank count on 50 seeded instances.
fn sweep() -> Sweep {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut s = Sweep {
        solves: 0,
        failures: Vec::new(),
        worst_relres: 0.0,
        worst_err: 0.0,
        bbd_lu_max_iters: 0,
        bbd_lu_solves: 0,
        seconds: 0.0,
    };
    for class in [Class::Spd, Class::NonsymDd, Class::Arrow] {
        for k in 0..50 {
            let a = instance(&mut rng, class);
            let b = random_vec(&mut rng, a.nrows());
            let oracle = dense_solve(&a, &b);
            for method in [Method::BlockJacobi, Method::Bbd] {
                for kind in [FactorKind::Ilu0, FactorKind::LuComplete] {
                    for nranks in [1usize, 2, 4] {
                        let mut p = Pipeline::new(PipelineConfig {
                            nranks,
                            factor: Some(kind),
                            ..PipelineConfig::default()
                        })
                        .expect("valid config");
                        s.solves += 1;
                        let tag = format!(
                            "{class:?}#{k} n={} {} {} r={nranks}",
                            a.nrows(),
                            method.name(),
                            kind.name()
                        );
                        match p.solve(method, &a, &b, None, 0.0, &ReusePolicy::default()) {
                            Ok((x, out)) => {
                                let err = rel_diff(&x, &oracle);
                                s.worst_relres = s.worst_relres.max(out.report.final_relres);
                                s.worst_err = s.worst_err.max(err);
                                if !out.report.converged() || out.report.final_relres > 1e-8 || err > 1e-6 {
                                    s.failures.push(format!(
                                        "{tag}: {} relres {:.2e} err {err:.2e}",
                                        out.report.status.name(),
                                        out.report.final_relres
                                    ));
                                }
                                if method == Method::Bbd && kind == FactorKind::LuComplete {
                                    s.bbd_lu_solves += 1;
                                    s.bbd_lu_max_iters = s.bbd_lu_max_iters.max(out.report.iterations);
                                }
                            }
                            Err(e) => s.failures.push(format!("{tag}: {e}")),
                        }
                    }
                }
            }
        }
    }
    s.seconds = started.elapsed().as_secs_f64();
    s
}

fn criterion_1(s: &Sweep) -> Outcome {
    let detail = format!(
        "{} solves, worst relres {:.2e}, worst oracle error {:.2e}, {:.1} s",
        s.solves, s.worst_relres, s.worst_err, s.seconds
    );
    if !s.failures.is_empty() {
        return Err(format!(
            "{detail}; {} failed, first: {}",
            s.failures.len(),
            s.failures[0]
        ));
    }
    if s.seconds >= 60.0 {
        return Err(format!("{detail}; over the 60 s budget"));
    }
    Ok(detail)
}

fn criterion_2(s: &Sweep) -> Outcome {
    let detail = format!(
        "{} bbd complete-LU solves, max {} iterations",
        s.bbd_lu_solves, s.bbd_lu_max_iters
    );
    if s.bbd_lu_solves == 0 || s.bbd_lu_max_iters > 3 {
        return Err(detail);
    }
    Ok(detail)
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let taus = [0.0, 1e-8, 1e-4, 1e-2, 0.1, 0.5, 1.0, 10.0];
    let mut checked = 0;
    for k in 0..100 {
        let n = rng.random_range(2..=60);
        let density = rng.random_range(0.05..0.5);
        let base = random_sparse::<f64, _>(&mut rng, n, n, density);
        // spread magnitudes over twelve orders
        let mut a = base.clone();
        for v in a.values_mut() {
            *v *= 10f64.powf(rng.random_range(-6.0..6.0));
        }
        let diag: Vec<f64> = (0..n).map(|i| a.get(i, i).unwrap_or(0.0)).collect();
        let mut previous: Option<M> = None;
        for &tau in &taus {
            let f = sparse_filter(&a, tau).map_err(|e| e.to_string())?;
            let scan: Vec<(usize, usize, f64)> = a
                .triplets()
                .filter(|&(i, j, v)| i == j || !(v.abs() < tau * diag[i].abs() && v.abs() < tau * diag[j].abs()))
                .collect();
            if f.triplets().collect::<Vec<_>>() != scan {
                return Err(format!(
                    "matrix {k}, tau {tau}: filtered entries differ from the direct scan"
                ));
            }
            if tau == 0.0 && (f.triplets().collect::<Vec<_>>() != a.triplets().collect::<Vec<_>>()) {
                return Err(format!("matrix {k}: tau = 0 changed the matrix"));
            }
            if let Some(prev) = &previous {
                if f.triplets().any(|(i, j, _)| prev.get(i, j).is_none()) {
                    return Err(format!("matrix {k}: raising tau to {tau} added an entry"));
                }
            }
            previous = Some(f);
            checked += 1;
        }
    }
    Ok(format!(
        "{checked} (matrix, tau) pairs agree with the direct scan; monotone; tau = 0 is the identity"
    ))
}

/// Instances on which plain complete LU or ILU(0) hits a pivot failure.
fn ill_conditioned() -> Vec<(&'static str, M)> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut out = Vec::new();
    out.push((
        "zero pivot 3x3",
        M::from_dense(3, 3, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 2.0]).unwrap(),
    ));
    // dominant anti-diagonal, empty diagonal
    let n = 10;
    let mut trip = vec![];
    for i in 0..n {
        trip.push((i, n - 1 - i, 10.0 + i as f64));
        if i + 1 < n && i + 1 != n - 1 - i {
            trip.push((i, i + 1, 0.5));
        }
    }
    out.push(("anti-diagonal", M::from_unsorted(n, n, trip).unwrap()));
    // rows of a dominant matrix shuffled, then scaled over twelve orders
    let n = 30;
    let dd = random_nonsym_dd::<f64, _>(&mut rng, n, 0.1);
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        perm.swap(i, rng.random_range(0..=i));
    }
    let id: Vec<usize> = (0..n).collect();
    let shuffled = dd.permute(&perm, &id).unwrap().into_general();
    out.push(("row-shuffled dominant", shuffled.clone()));
    let rs: Vec<f64> = (0..n).map(|i| 10f64.powf(-12.0 * i as f64 / (n - 1) as f64)).collect();
    let cs = vec![1.0; n];
    out.push(("row-shuffled, scales 1 to 1e-12", shuffled.scale(&rs, &cs)));
    // saddle point [[0, B], [Bᵀ, D]] with D over twelve orders
    let (nd, nb) = (12, 5);
    let mut trip = vec![];
    for i in 0..nd {
        trip.push((nb + i, nb + i, 10f64.powf(-6.0 + 12.0 * i as f64 / (nd - 1) as f64)));
    }
    for r in 0..nb {
        for c in [r, r + nb, (r + 3) % nd] {
            let v: f64 = rng.random_range(0.5..2.0);
            trip.push((r, nb + c, v));
            trip.push((nb + c, r, v));
        }
    }
    out.push((
        "saddle point, D from 1e-6 to 1e6",
        M::from_unsorted(nd + nb, nd + nb, trip).unwrap(),
    ));
    // tiny pivot under a 1e12 scale spread
    let a = M::from_dense(
        4,
        4,
        &[
            1e-17, 1.0, 0.0, 0.0, 1.0, 1.0, 1e6, 0.0, 0.0, 1e6, 1.0, 1e-6, 0.0, 0.0, 1e-6, 1e-12,
        ],
    )
    .unwrap();
    out.push(("near-zero leading pivot", a));
    out
}

fn criterion_4() -> Outcome {
    let mut counted = 0;
    let mut notes = Vec::new();
    for (name, a) in ill_conditioned() {
        let raw_fails = lu_complete(&a).is_err() || ilu0(&a).is_err();
        if !raw_fails {
            notes.push(format!("{name}: plain factorization succeeded, not counted"));
            continue;
        }
        let f = build_corrected_preconditioner(&a, None, 1e-12)
            .map_err(|e| format!("{name}: corrected build failed: {e}"))?;
        let n = a.nrows();
        let b = a.spmv(&vec![1.0; n]).unwrap();
        let (_, rep) = solve_right_preconditioned(&a, &f, &b, &vec![0.0; n], &KrylovConfig::default())
            .map_err(|e| format!("{name}: {e}"))?;
        if !rep.converged() {
            return Err(format!("{name}: solve ended with {}", rep.status.name()));
        }
        counted += 1;
    }
    if counted < 5 {
        return Err(format!(
            "only {counted} instances with a plain pivot failure; {}",
            notes.join("; ")
        ));
    }
    Ok(format!(
        "{counted} instances fail plain LU/ILU(0); matching + correction builds and converges on all"
    ))
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let perms: Vec<Vec<Vec<usize>>> = (0..=8).map(permutations).collect();
    for k in 0..200 {
        let n = rng.random_range(1..=8);
        let mut sigma: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            sigma.swap(i, rng.random_range(0..=i));
        }
        let mut trip = vec![];
        for i in 0..n {
            for j in 0..n {
                if sigma[j] == i || rng.random_bool(0.4) {
                    let mag = 10f64.powf(rng.random_range(-3.0..3.0));
                    trip.push((i, j, if rng.random_bool(0.5) { mag } else { -mag }));
                }
            }
        }
        let a = M::from_unsorted(n, n, trip).unwrap();
        let best = perms[n]
            .iter()
            .filter_map(|p| (0..n).map(|j| a.get(p[j], j).map(f64::abs)).product::<Option<f64>>())
            .fold(0.0, f64::max);
        let r = mc64_match_scale(&a).map_err(|e| format!("sample {k}: {e}"))?;
        let got: f64 = (0..n).map(|j| a.get(r.row_perm[j], j).map_or(0.0, f64::abs)).product();
        if (got - best).abs() > 1e-10 * best {
            return Err(format!(
                "sample {k} (n={n}): matched product {got:e}, brute force {best:e}"
            ));
        }
        for (i, j, v) in r.scaled_matrix.triplets() {
            if v.abs() > 1.0 + 1e-8 {
                return Err(format!("sample {k}: scaled entry ({i},{j}) = {v:e} exceeds 1"));
            }
            if i == j && (v.abs() - 1.0).abs() > 1e-8 {
                return Err(format!("sample {k}: matched entry {i} scaled to {v:e}"));
            }
        }
    }
    Ok("200 samples attain the brute-force maximum product; scaled bounds hold to 1e-8".into())
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for nranks in [1usize, 2, 3, 4, 7] {
        for _ in 0..5 {
            let n = rng.random_range(20..=60);
            let a = random_nonsym_dd::<f64, _>(&mut rng, n, 0.1);
            let part = partition_rows(&a, nranks).map_err(|e| e.to_string())?;
            let x = random_vec(&mut rng, n);
            let g = RankGroup::new(nranks).unwrap().with_trace(true);
            let y = dist_spmv(&g, &part, &DistVector::scatter_rows(&part, &x).unwrap()).map_err(|e| e.to_string())?;
            let d = rel_diff(&y.gather(), &a.spmv(&x).unwrap());
            worst = worst.max(d);
            if d > 1e-13 {
                return Err(format!("dist_spmv differs by {d:e} at {nranks} ranks"));
            }
            for e in g.trace() {
                if !part.ghost_maps[e.dst].iter().any(|&(o, _)| o == e.src) {
                    return Err(format!("dist_spmv sent {} -> {} outside the ghost maps", e.src, e.dst));
                }
            }
            let factors: Vec<_> = part.diag_blocks.iter().map(|d| lu_complete(d).unwrap()).collect();
            let g = RankGroup::new(nranks).unwrap().with_trace(true);
            let z = bj_apply(&g, &part, &factors, &DistVector::scatter_rows(&part, &x).unwrap())
                .map_err(|e| e.to_string())?;
            if g.message_count() != 0 {
                return Err(format!("bj_apply sent {} messages", g.message_count()));
            }
            let serial: Vec<f64> = part
                .row_ranges
                .iter()
                .zip(&factors)
                .flat_map(|(r, f)| f.sptrsv(&x[r.clone()]).unwrap())
                .collect();
            let d = rel_diff(&z.gather(), &serial);
            worst = worst.max(d);
            if d > 1e-13 {
                return Err(format!("bj_apply differs by {d:e} at {nranks} ranks"));
            }
            // bordered block solve against the monolithic permuted factorization
            let (bs, iface) = (rng.random_range(3..=8), rng.random_range(1..=4));
            let arrow = random_arrow::<f64, _>(&mut rng, nranks, bs, iface, 0.4, false);
            let s = BbdStructure::from_parts(
                &arrow,
                (0..arrow.nrows()).collect(),
                (0..nranks).map(|k| k * bs..(k + 1) * bs).collect(),
            )
            .map_err(|e| e.to_string())?;
            let g = RankGroup::new(nranks).unwrap().with_trace(true);
            let f = bbd_factor(&g, &s, FactorKind::LuComplete).map_err(|e| e.to_string())?;
            let schur_msgs = g.trace().iter().filter(|e| e.tag == TAG_SCHUR).count();
            if g.message_count() != nranks - 1 || schur_msgs != nranks - 1 {
                return Err(format!(
                    "bbd factor sent {} messages at {nranks} ranks",
                    g.message_count()
                ));
            }
            let r = random_vec(&mut rng, arrow.nrows());
            let solves = 3;
            let mut xb = Vec::new();
            for _ in 0..solves {
                xb = bbd_apply(&g, &s, &f, &DistVector::scatter_bbd(&s, &r).unwrap())
                    .map_err(|e| e.to_string())?
                    .gather_bbd(&s);
            }
            let tr = g.trace();
            let gathers = tr.iter().filter(|e| e.tag == TAG_GATHER).count();
            let bcasts = tr.iter().filter(|e| e.tag == TAG_SOLUTION).count();
            let expected = (nranks - 1) + solves * 2 * (nranks - 1);
            if g.message_count() != expected || gathers != solves * (nranks - 1) || bcasts != solves * (nranks - 1) {
                return Err(format!(
                    "bbd sent {} messages at {nranks} ranks, protocol count {expected}",
                    g.message_count()
                ));
            }
            let mono = lu_complete(&s.reassemble()).unwrap();
            let rp: Vec<f64> = s.perm.iter().map(|&p| r[p]).collect();
            let yp = mono.sptrsv(&rp).unwrap();
            let mut serial = vec![0.0; rp.len()];
            for (new, &old) in s.perm.iter().enumerate() {
                serial[old] = yp[new];
            }
            let d = rel_diff(&xb, &serial);
            worst = worst.max(d);
            if d > 1e-13 {
                return Err(format!(
                    "bbd solve differs from the monolithic factorization by {d:e} at {nranks} ranks"
                ));
            }
        }
    }
    Ok(format!(
        "nranks 1,2,3,4,7: worst deviation {worst:.1e}; bj 0 messages; bbd (p-1) + 2(p-1) per solve"
    ))
}

fn ipm_case(
    name: &str,
    prob: &LpProblem<f64>,
    expected: f64,
    cfg: &IpmConfig,
) -> Result<(IpmStatus, Vec<Method>), String> {
    let sol = ipm_solve(prob, cfg).map_err(|e| format!("{name}: {e}"))?;
    let rep = &sol.report;
    if rep.status == IpmStatus::Optimal && (rep.objective - expected).abs() > 1e-5 {
        return Err(format!("{name}: objective {} expected {expected}", rep.objective));
    }
    Ok((rep.status, rep.log.iter().map(|l| l.method).collect()))
}

fn lp_examples() -> Vec<(&'static str, LpProblem<f64>, f64)> {
    let hand = LpProblem::new(M::from_dense(1, 2, &[1.0, 1.0]).unwrap(), vec![1.0], vec![2.0, 1.0]).unwrap();
    let c = vec![3.0, -1.0, 0.5, 2.0, -4.0];
    let pinned = LpProblem::new(M::identity(5), vec![1.0; 5], c.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let built = constructed_lp::<f64, _>(&mut rng, 10, 20, 0.3);
    vec![
        ("hand 2-variable", hand, 1.0),
        ("pinned B = I", pinned, c.iter().sum()),
        ("constructed 10x20", built.problem, built.objective),
    ]
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut cases = vec![];
    for k in 0..3 {
        let lp = constructed_lp::<f64, _>(&mut rng, 30 + 5 * k, 60 + 10 * k, 0.05);
        cases.push((lp.problem, lp.objective));
    }
    let single = |factor| IpmConfig {
        bj_max_iters: Some(1),
        pipeline: PipelineConfig {
            nranks: 2,
            factor,
            ..PipelineConfig::default()
        },
        ..IpmConfig::default()
    };
    let mut switched = 0;
    for (k, (p, obj)) in cases.iter().enumerate() {
        let (status, methods) = ipm_case("injected bj failure", p, *obj, &single(None))?;
        let flips = methods.windows(2).filter(|w| w[0] != w[1]).count();
        let back = methods
            .windows(2)
            .any(|w| w[0] == Method::Bbd && w[1] == Method::BlockJacobi);
        if status != IpmStatus::Optimal || flips > 1 || back {
            return Err(format!(
                "lp {k}: status {} with method sequence {:?}",
                status.name(),
                methods
            ));
        }
        if flips == 1 && methods[0] == Method::BlockJacobi {
            switched += 1;
        }
        let double = IpmConfig {
            bbd_max_iters: Some(1),
            ..single(Some(FactorKind::Ilu0))
        };
        let (status, methods) = ipm_case("injected double failure", p, *obj, &double)?;
        let flips = methods.windows(2).filter(|w| w[0] != w[1]).count();
        if status != IpmStatus::SolverFailure || flips > 1 || methods.last() != Some(&Method::Bbd) {
            return Err(format!(
                "lp {k}: double failure gave {} with {:?}",
                status.name(),
                methods
            ));
        }
    }
    if switched != cases.len() {
        return Err(format!("only {switched} of {} runs switched", cases.len()));
    }
    // the same through the command line
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let lp = dir.path().join("auto.lp");
    std::fs::write(&lp, format_lp(&cases[0].0)).map_err(|e| e.to_string())?;
    let (code, out) = cli(&[
        "--mode",
        "ipm",
        "--lp",
        path(&lp),
        "--method",
        "auto",
        "--nranks",
        "2",
        "--bj-max-iters",
        "1",
        "--output",
        "csv",
    ]);
    let col: Vec<&str> = out
        .lines()
        .skip(1)
        .take_while(|l| !l.is_empty())
        .map(|l| l.split(',').nth(1).unwrap_or(""))
        .collect();
    let flips = col.windows(2).filter(|w| w[0] != w[1]).count();
    if code != 0 || flips != 1 || col.first() != Some(&"bj") {
        return Err(format!("cli auto run: exit {code}, method column {col:?}"));
    }
    let (code2, _) = cli(&[
        "--mode",
        "ipm",
        "--lp",
        path(&lp),
        "--method",
        "auto",
        "--nranks",
        "2",
        "--factor",
        "ilu0",
        "--bj-max-iters",
        "1",
        "--bbd-max-iters",
        "1",
    ]);
    if code2 != 2 {
        return Err(format!("cli double failure exited {code2}"));
    }
    Ok(format!(
        "{} lps switch once and stay on bbd; double failure reports solver_failure; cli column flips once",
        cases.len()
    ))
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let a0 = random_spd::<f64, _>(&mut rng, 60, 0.08);
    let vary = |a: &M, rng: &mut ChaCha8Rng, amp: f64| -> M {
        let mut b = a.clone();
        let vals = b.values_mut();
        // keep symmetry: scale by a symmetric factor derived from positions
        let noise: Vec<f64> = (0..vals.len())
            .map(|_| 1.0 + amp * rng.random_range(-1.0..1.0))
            .collect();
        for (v, f) in vals.iter_mut().zip(&noise) {
            *v *= f;
        }
        let sym = b.add_scaled(1.0, &b.transpose()).unwrap();
        let mut half = sym.clone();
        for v in half.values_mut() {
            *v *= 0.5;
        }
        half.with_symmetry(ipm_linsolve::sparse::SymmetryTag::Symmetric)
            .unwrap()
    };
    let symbolic = ReusePolicy {
        mode: ReuseMode::ReuseSymbolic,
        ..ReusePolicy::default()
    };
    let mut worst: f64 = 0.0;
    for method in [Method::BlockJacobi, Method::Bbd] {
        let cfg = PipelineConfig {
            nranks: 3,
            ..PipelineConfig::default()
        };
        let mut warm = Pipeline::new(cfg.clone()).unwrap();
        let mut a = a0.clone();
        for step in 0..6 {
            a = vary(&a, &mut rng, 0.05);
            let b = random_vec(&mut rng, a.nrows());
            let (xw, ow) = warm
                .solve(method, &a, &b, None, 1e-3, &symbolic)
                .map_err(|e| e.to_string())?;
            let mut cold = Pipeline::new(cfg.clone()).unwrap();
            let (xc, _) = cold
                .solve(method, &a, &b, None, 1e-3, &symbolic)
                .map_err(|e| e.to_string())?;
            if step > 0 && ow.action != ReuseAction::RefactoredNumeric {
                return Err(format!("{} step {step}: action {}", method.name(), ow.action.name()));
            }
            let d = rel_diff(&xw, &xc);
            worst = worst.max(d);
            if d > 1e-12 {
                return Err(format!(
                    "{} step {step}: reused solve differs from cold by {d:e}",
                    method.name()
                ));
            }
        }
        // one extra coupling changes the pattern
        let mut trip: Vec<_> = a.triplets().collect();
        let (i, j) = (0..a.nrows())
            .flat_map(|i| (0..a.nrows()).map(move |j| (i, j)))
            .find(|&(i, j)| i != j && a.get(i, j).is_none())
            .unwrap();
        trip.push((i, j, 1e-3));
        trip.push((j, i, 1e-3));
        let perturbed = M::from_unsorted(a.nrows(), a.ncols(), trip).unwrap();
        let (_, o) = warm
            .solve(method, &perturbed, &vec![1.0; a.nrows()], None, 1e-3, &symbolic)
            .map_err(|e| e.to_string())?;
        if o.action != ReuseAction::RebuiltAll {
            return Err(format!("{}: pattern change gave {}", method.name(), o.action.name()));
        }
    }
    // slowly drifting sequence under full reuse
    let both = ReusePolicy {
        mode: ReuseMode::ReuseBoth,
        ..ReusePolicy::default()
    };
    let mut p = Pipeline::new(PipelineConfig {
        nranks: 2,
        ..PipelineConfig::default()
    })
    .unwrap();
    let mut a = a0.clone();
    let mut reuses = 0;
    let mut last_err = 0.0;
    let mut last_relres = 0.0;
    for step in 0..20 {
        if step > 0 {
            a = vary(&a, &mut rng, 0.01);
        }
        let b = random_vec(&mut rng, a.nrows());
        let (x, o) = p
            .solve(Method::BlockJacobi, &a, &b, None, 1e-3, &both)
            .map_err(|e| e.to_string())?;
        if !o.report.converged() {
            return Err(format!("drift step {step}: {}", o.report.status.name()));
        }
        reuses += usize::from(o.action.is_reuse());
        last_err = rel_diff(&x, &dense_solve(&a, &b));
        last_relres = o.report.final_relres;
    }
    if reuses < 15 || last_err > 1e-6 || last_relres > 1e-8 {
        return Err(format!(
            "drift: {reuses} reuse actions, final error {last_err:e}, relres {last_relres:e}"
        ));
    }
    Ok(format!("reuse_symbolic matches cold builds (worst {worst:.1e}); pattern change rebuilds; drift run {reuses}/20 reuses, final error {last_err:.1e}"))
}

fn criterion_9() -> Outcome {
    let started = Instant::now();
    let mut notes = vec![];
    for (name, p, expected) in lp_examples() {
        let sol = ipm_solve(&p, &IpmConfig::default()).map_err(|e| format!("{name}: {e}"))?;
        let rep = &sol.report;
        if rep.status != IpmStatus::Optimal {
            return Err(format!("{name}: {}", rep.status.name()));
        }
        let err = (rep.objective - expected).abs();
        if err > 1e-5 || rep.max_complementarity > 1e-5 {
            return Err(format!(
                "{name}: objective error {err:e}, complementarity {:e}",
                rep.max_complementarity
            ));
        }
        if rep.log.iter().any(|l| !(l.min_x > 0.0 && l.min_s > 0.0)) {
            return Err(format!("{name}: left the interior"));
        }
        notes.push(format!("{name} {} steps err {err:.1e}", rep.steps));
    }
    let secs = started.elapsed().as_secs_f64();
    if secs >= 10.0 {
        return Err(format!("took {secs:.1} s"));
    }
    Ok(format!("{}; {secs:.2} s", notes.join(", ")))
}

fn cli(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_ipm-linsolve"))
        .args(args)
        .env_remove("SDSL_LOG")
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
    )
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let lp = dir.path().join("det.lp");
    std::fs::write(&lp, format_lp(&constructed_lp::<f64, _>(&mut rng, 24, 48, 0.1).problem))
        .map_err(|e| e.to_string())?;
    let mtx = dir.path().join("det.mtx");
    write_matrix_market(&random_nonsym_dd::<f64, _>(&mut rng, 80, 0.05), &mtx).map_err(|e| e.to_string())?;
    let runs: Vec<Vec<&str>> = vec![
        vec![
            "--mode",
            "ipm",
            "--lp",
            path(&lp),
            "--method",
            "auto",
            "--nranks",
            "3",
            "--reuse",
            "symbolic",
            "--output",
            "json-lines",
        ],
        vec![
            "--mode",
            "ipm",
            "--lp",
            path(&lp),
            "--method",
            "bbd",
            "--nblocks",
            "4",
            "--tau-schedule",
            "0:0,3:1e-3",
        ],
        vec![
            "--matrix",
            path(&mtx),
            "--method",
            "bj",
            "--nranks",
            "4",
            "--rhs",
            "random",
            "--seed",
            "11",
            "--oracle",
            "dense",
        ],
        vec![
            "--matrix",
            path(&mtx),
            "--method",
            "bbd",
            "--nblocks",
            "3",
            "--output",
            "csv",
        ],
    ];
    let mut compared = 0;
    for args in &runs {
        let (code, reference) = cli(args);
        if code != 0 || reference.is_empty() {
            return Err(format!("{args:?} exited {code}"));
        }
        for sched in [
            vec![],
            vec!["--schedule", "serial"],
            vec!["--schedule", "shuffled", "--seed", "1"],
            vec!["--schedule", "shuffled", "--seed", "2"],
        ] {
            let mut a = args.clone();
            a.extend(sched.iter().copied());
            if a.iter().filter(|s| **s == "--seed").count() > 1 {
                continue;
            }
            let (_, out) = cli(&a);
            if out != reference {
                return Err(format!("{a:?} output differs"));
            }
            compared += 1;
        }
    }
    let mut traces = Vec::new();
    for (k, sched) in ["threaded", "serial", "shuffled"].iter().enumerate() {
        let t = dir.path().join(format!("trace{k}.txt"));
        let (code, _) = cli(&[
            "--matrix",
            path(&mtx),
            "--method",
            "bbd",
            "--nblocks",
            "3",
            "--schedule",
            sched,
            "--trace",
            path(&t),
        ]);
        if code != 0 {
            return Err(format!("traced {sched} run exited {code}"));
        }
        traces.push(std::fs::read(&t).map_err(|e| e.to_string())?);
    }
    if traces[0].is_empty() || traces.iter().any(|t| *t != traces[0]) {
        return Err("message traces differ between schedules".into());
    }
    Ok(format!(
        "{compared} repeated runs byte-identical across threaded, serial and shuffled schedules; traces identical"
    ))
}

fn main() {
    let started = Instant::now();
    let sweep = sweep();
    let results: Vec<(usize, &str, Outcome)> = vec![
        (1, "oracle equivalence", criterion_1(&sweep)),
        (2, "exact preconditioner iteration bound", criterion_2(&sweep)),
        (3, "filter correctness", criterion_3()),
        (4, "robustness on ill-conditioned instances", criterion_4()),
        (5, "matching optimality", criterion_5()),
        (6, "distributed-serial equivalence and messages", criterion_6()),
        (7, "switching state machine", criterion_7()),
        (8, "reuse fidelity", criterion_8()),
        (9, "end-to-end interior point", criterion_9()),
        (10, "determinism", criterion_10()),
    ];
    let mut failed = 0;
    for (k, title, r) in &results {
        match r {
            Ok(d) => println!("criterion {k:>2} PASS  {title}: {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {k:>2} FAIL  {title}: {d}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1} s",
        results.len() - failed,
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
