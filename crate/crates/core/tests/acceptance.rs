//! End-to-end acceptance checks. Runs every criterion in order and prints one
//! PASS/FAIL line per criterion; exits non-zero if any fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use rand::Rng;
use snmf_core::cubic::{solve_depressed_cubic, solve_entry_surrogate};
use snmf_core::metrics::{curvature_along_iterate, curvature_lower_bound, gradient, optimality_gap};
use snmf_core::parallel::Selection;
use snmf_core::sbsum::{compute_entry_coefficients, sweep_sbsum, update_entry};
use snmf_core::simgen::{generate, initialize, GeneratorSpec};
use snmf_core::vbsum::{build_row_subproblem, update_row};
use snmf_core::{
    objective, run_parallel, run_solver, BlockOrderPolicy, Engine, FactorMatrix, GramCache,
    ParallelConfig, SimilarityMatrix, SolverConfig, StopReason, TraceRecord,
};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

const VBSUM: Engine = Engine::Vector { i_max: 10 };

fn solve(m: &SimilarityMatrix, x0: &FactorMatrix, config: SolverConfig) -> snmf_core::SolveOutcome {
    run_solver(m, x0.clone(), &config).expect("solver failed")
}

fn monotone_descent() -> Outcome {
    let ns = [10, 50, 200];
    let rs = [2, 5, 10];
    let mut runs = 0;
    for k in 0..50u64 {
        let n = ns[(k as usize / 2) % 3];
        let r = rs[(k as usize / 6) % 3];
        let spec = if k % 2 == 0 {
            GeneratorSpec::ck(n, r, k)
        } else {
            GeneratorSpec::sgk(n, 5, k)
        };
        let m = generate(&spec).unwrap();
        let x0 = initialize(&m, r, k + 500);
        let f0 = objective(&m, &x0);
        for engine in [Engine::Scalar, VBSUM] {
            for policy in [BlockOrderPolicy::cyclic(), BlockOrderPolicy::random_permutation(k)] {
                let out = solve(
                    &m,
                    &x0,
                    SolverConfig {
                        engine,
                        policy,
                        max_sweeps: 40,
                        gap_tol: 0.0,
                        ..SolverConfig::default()
                    },
                );
                let mut prev = f0;
                for t in &out.trace {
                    ensure!(
                        t.objective <= prev + 1e-10 * prev.max(1.0),
                        "instance {k} (n={n}, r={r}) {engine:?} {:?}: sweep {} raised F from {prev} to {}",
                        policy.kind,
                        t.sweep_index,
                        t.objective
                    );
                    prev = t.objective;
                }
                runs += 1;
            }
        }
    }
    Ok(format!("{runs} runs on 50 instances, no increase beyond 1e-10 relative"))
}

fn stationarity() -> Outcome {
    let mut worst_gap: f64 = 0.0;
    let mut max_sweeps = 0;
    for seed in 2..12 {
        let m = generate(&GeneratorSpec::ck(20, 4, seed)).unwrap();
        let x0 = initialize(&m, 4, seed + 50);
        for engine in [Engine::Scalar, VBSUM] {
            let out = solve(
                &m,
                &x0,
                SolverConfig {
                    engine,
                    max_sweeps: 5000,
                    gap_tol: 1e-4,
                    ..SolverConfig::default()
                },
            );
            let gap = out.report.optimality_gap;
            ensure!(
                out.stop == StopReason::GapTolerance && gap <= 1e-4,
                "seed {seed} {engine:?}: stopped by {:?} with gap {gap}",
                out.stop
            );
            let bound = curvature_lower_bound(&out.x);
            let curv = curvature_along_iterate(&m, &out.x);
            let sigma = bound / 8.0;
            ensure!(
                curv >= bound - 1e-6 * (1.0 + sigma),
                "seed {seed} {engine:?}: curvature {curv} below certificate {bound}"
            );
            worst_gap = worst_gap.max(gap);
            max_sweeps = max_sweeps.max(out.trace.len());
        }
    }
    Ok(format!(
        "20 runs, worst gap {worst_gap:.2e}, at most {max_sweeps} sweeps, curvature certificate holds"
    ))
}

fn exact_recovery() -> Outcome {
    let mut worst: f64 = 0.0;
    for (n, r, seed) in [(20, 4, 1), (30, 3, 2), (50, 5, 3), (50, 2, 4)] {
        let mut spec = GeneratorSpec::ck(n, r, seed);
        spec.noise_sigma = 0.0;
        let m = generate(&spec).unwrap();
        let x0 = initialize(&m, r, seed + 7);
        for engine in [Engine::Scalar, VBSUM] {
            let out = solve(
                &m,
                &x0,
                SolverConfig {
                    engine,
                    max_sweeps: 5000,
                    gap_tol: 1e-9,
                    ..SolverConfig::default()
                },
            );
            let res = out.report.relative_residual_percent;
            ensure!(res <= 0.1, "n={n} r={r} {engine:?}: residual {res}%");
            worst = worst.max(res);
        }
    }
    Ok(format!("8 runs, worst relative residual {worst:.2e}%"))
}

fn cubic_oracles() -> Outcome {
    let mut rng = rng(4);
    for _ in 0..10_000 {
        let (s, beta) = (rng.random_range(0.0..100.0), rng.random_range(0.0..100.0));
        let t = solve_depressed_cubic(s, beta).map_err(|e| e.to_string())?;
        let res = t * t * t + s * t - beta;
        ensure!(res.abs() <= 1e-9 * beta.max(1.0), "s={s} beta={beta}: residual {res}");
        let reference = bisect(|v| v * v * v + s * v - beta, 0.0, beta.cbrt() + 1.0);
        ensure!((t - reference).abs() <= 1e-9 * reference.max(1.0), "s={s} beta={beta}: {t} vs bisection {reference}");
    }
    let mut checked = 0;
    while checked < 10_000 {
        let n = rng.random_range(2..=8);
        let r = rng.random_range(1..=4);
        let md = random_symmetric(&mut rng, n, -0.5, 3.0);
        let xd = random_factor(&mut rng, n, r, 2.0);
        let (m, x) = (dense(n, &md), factor(n, r, &xd));
        let cache = GramCache::from_factor(&x);
        for _ in 0..10 {
            let ctx = compute_entry_coefficients(&m, &x, &cache, rng.random_range(0..n), rng.random_range(0..r));
            let v = solve_entry_surrogate(ctx.surrogate_coefficients()).map_err(|e| e.to_string())?;
            let fv = ctx.surrogate(v);
            let hi = 2.0 * v.max(ctx.x_cur) + 1.0;
            for k in 0..=10_000 {
                let g = hi * k as f64 / 10_000.0;
                let fg = ctx.surrogate(g);
                ensure!(fv <= fg + 1e-9 * fg.abs().max(1.0), "{ctx:?}: g~({v}) = {fv} > g~({g}) = {fg}");
            }
            checked += 1;
        }
    }
    Ok("10^4 depressed-cubic roots and 10^4 entry minimizers verified".into())
}

fn expansion_oracle() -> Outcome {
    let mut rng = rng(5);
    let mut worst_d: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=6);
        let r = rng.random_range(1..=3);
        let md = random_symmetric(&mut rng, n, -1.0, 2.0);
        let xd = random_factor(&mut rng, n, r, 1.5);
        let (m, x) = (dense(n, &md), factor(n, r, &xd));
        let cache = GramCache::from_factor(&x);
        let (i, j) = (rng.random_range(0..n), rng.random_range(0..r));
        let ctx = compute_entry_coefficients(&m, &x, &cache, i, j);
        let at = |v: f64| {
            let mut y = xd.clone();
            y[i * r + j] = v;
            brute_objective(&md, &y, n, r)
        };
        let f0 = brute_objective(&md, &xd, n, r);
        let delta = rng.random_range(-ctx.x_cur..2.0);
        let f1 = at(ctx.x_cur + delta);
        let g = ctx.quartic(ctx.x_cur + delta);
        let scale = f0.max(f1).max(1.0);
        ensure!((g - (f1 - f0)).abs() <= 1e-9 * scale, "expansion {g} vs direct {}", f1 - f0);
        let h = 1e-6;
        let fd = (at(ctx.x_cur + h) - at(ctx.x_cur - h)) / (2.0 * h);
        let err = (ctx.d - fd).abs() / ctx.d.abs().max(1.0);
        ensure!(err <= 1e-4, "d = {} vs finite difference {fd}", ctx.d);
        worst_d = worst_d.max(err);
    }
    Ok(format!("10^3 triples, worst finite-difference error in d {worst_d:.1e}"))
}

/// Random iterate, optionally advanced by a few solver sweeps.
fn sampled_state(rng: &mut impl Rng) -> (SimilarityMatrix, FactorMatrix) {
    let n = rng.random_range(2..=12);
    let r = rng.random_range(1..=5);
    let m = dense(n, &random_symmetric(rng, n, -0.5, 2.0));
    let mut x = factor(n, r, &random_factor(rng, n, r, 1.5));
    if rng.random_bool(0.5) {
        let mut cache = GramCache::from_factor(&x);
        let engine = if rng.random_bool(0.5) { Engine::Scalar } else { VBSUM };
        let order: Vec<usize> = (0..engine.block_count(n, r)).collect();
        for _ in 0..rng.random_range(1..5) {
            engine.sweep(&m, &mut x, &mut cache, &order).unwrap();
        }
    }
    (m, x)
}

fn surrogate_contracts() -> Outcome {
    let mut rng = rng(6);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();
    for _ in 0..1000 {
        let (m, x) = sampled_state(&mut rng);
        let (n, r) = (x.n(), x.r());
        let cache = GramCache::from_factor(&x);

        let ctx = compute_entry_coefficients(&m, &x, &cache, rng.random_range(0..n), rng.random_range(0..r));
        ensure!(ctx.surrogate(ctx.x_cur) == ctx.quartic(ctx.x_cur), "entry surrogate not tight");
        let dg = (ctx.surrogate_derivative(ctx.x_cur) - ctx.quartic_derivative(ctx.x_cur)).abs();
        ensure!(dg <= 1e-9, "entry gradients differ by {dg}");
        for _ in 0..100 {
            let v = rng.random_range(0.0..4.0);
            let (g, gs) = (ctx.quartic(v), ctx.surrogate(v));
            ensure!(gs >= g - 1e-10 * g.abs().max(1.0), "entry surrogate {gs} below {g}");
        }

        let sub = build_row_subproblem(&m, &x, &cache, rng.random_range(0..n));
        let y = x.row(sub.i).to_vec();
        ensure!(sub.surrogate(&y, &y) == sub.objective(&y), "row surrogate not tight");
        for (a, b) in sub.objective_gradient(&y).iter().zip(sub.surrogate_gradient(&y, &y)) {
            ensure!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "row gradients {a} vs {b}");
        }
        for _ in 0..100 {
            let u: Vec<f64> = (0..r).map(|_| rng.random_range(0.0..2.0)).collect();
            let (f, fs) = (sub.objective(&u), sub.surrogate(&u, &y));
            ensure!(fs >= f - 1e-10 * f.abs().max(1.0), "row surrogate {fs} below {f}");
            let d: Vec<f64> = u.iter().zip(&y).map(|(a, b)| a - b).collect();
            let grad_half: Vec<f64> = sub.objective_gradient(&y).iter().zip(&sub.q).zip(&y).map(|((g, q), v)| {
                // Q y = grad/4 - |y|^2 y + q
                g / 4.0 - dot(&y, &y) * v + q
            }).collect();
            let bound = sub.quad_form(&y) + 2.0 * dot(&grad_half, &d) + sub.s * dot(&d, &d);
            let lhs = sub.quad_form(&u);
            ensure!(lhs <= bound + 1e-9 * bound.abs().max(1.0), "quadratic majorization {lhs} > {bound}");
        }
    }
    Ok("10^3 states: tightness exact, upper bounds and gradients hold for both engines".into())
}

fn cache_integrity() -> Outcome {
    let mut rng = rng(7);
    let mut worst: f64 = 0.0;
    for trial in 0..5 {
        let (n, r) = (rng.random_range(10..=50), rng.random_range(1..=8));
        let m = dense(n, &random_symmetric(&mut rng, n, 0.0, 2.0));
        let mut x = factor(n, r, &random_factor(&mut rng, n, r, 1.0));
        let mut cache = GramCache::from_factor(&x);
        for _ in 0..10_000 {
            let i = rng.random_range(0..n);
            if rng.random_bool(0.8) {
                update_entry(&m, &mut x, &mut cache, i, rng.random_range(0..r)).unwrap();
            } else {
                update_row(&m, &mut x, &mut cache, i, 10).unwrap();
            }
        }
        let (g, d) = brute_gram(x.as_slice(), n, r);
        for (a, b) in cache.gram_slice().iter().zip(&g).chain(cache.diag_xxt_slice().iter().zip(&d)) {
            let err = (a - b).abs() / b.abs().max(1.0);
            ensure!(err <= 1e-8, "trial {trial}: cached {a} vs recomputed {b}");
            worst = worst.max(err);
        }
    }
    let sparse = generate(&GeneratorSpec::sgk(60, 3, 8)).unwrap();
    let dense_m = sparse.to_dense();
    let x0 = initialize(&sparse, 4, 9);
    ensure!((objective(&sparse, &x0) - objective(&dense_m, &x0)).abs() <= 1e-12, "objective differs");
    for (a, b) in gradient(&sparse, &x0).iter().zip(gradient(&dense_m, &x0)) {
        ensure!((a - b).abs() <= 1e-12, "gradient differs: {a} vs {b}");
    }
    for engine in [Engine::Scalar, VBSUM] {
        let config = SolverConfig { engine, max_sweeps: 20, gap_tol: 0.0, ..SolverConfig::default() };
        let (a, b) = (solve(&sparse, &x0, config), solve(&dense_m, &x0, config));
        for (u, v) in a.x.as_slice().iter().zip(b.x.as_slice()) {
            ensure!((u - v).abs() <= 1e-12, "{engine:?}: sparse {u} vs dense {v}");
        }
        ensure!((optimality_gap(&sparse, &a.x) - optimality_gap(&dense_m, &b.x)).abs() <= 1e-12, "gap differs");
    }
    Ok(format!("worst cache drift {worst:.1e} after 10^4 updates; sparse and dense paths agree"))
}

fn same_objectives(a: &[TraceRecord], b: &[TraceRecord]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(u, v)| {
            u.objective.to_bits() == v.objective.to_bits()
                && u.optimality_gap.to_bits() == v.optimality_gap.to_bits()
        })
}

fn parallel_quality() -> Outcome {
    let m = generate(&GeneratorSpec::ck(60, 4, 10)).unwrap();
    let x0 = initialize(&m, 4, 11);
    for engine in [Engine::Scalar, VBSUM] {
        let serial = solve(&m, &x0, SolverConfig { engine, max_sweeps: 30, gap_tol: 0.0, ..SolverConfig::default() });
        let par = run_parallel(
            &m,
            x0.clone(),
            &ParallelConfig {
                engine,
                workers: 1,
                selection: Selection::Cyclic,
                max_rounds: 30,
                gap_tol: 0.0,
                ..ParallelConfig::default()
            },
        )
        .unwrap();
        ensure!(same_objectives(&serial.trace, &par.outcome.trace), "{engine:?}: P = 1 trace differs from serial");
    }

    let (n, r, p) = (200, 5, 4);
    let m = generate(&GeneratorSpec::ck(n, r, 12)).unwrap();
    let x0 = initialize(&m, r, 13);
    let serial = solve(&m, &x0, SolverConfig { max_sweeps: 3000, gap_tol: 1e-4, ..SolverConfig::default() });
    let par = run_parallel(
        &m,
        x0.clone(),
        &ParallelConfig { workers: p, max_rounds: 3000, gap_tol: 1e-4, ..ParallelConfig::default() },
    )
    .unwrap();
    let (fs, fp) = (serial.report.objective, par.outcome.report.objective);
    ensure!(fp <= 1.01 * fs, "parallel objective {fp} vs serial {fs}");
    for s in &par.rounds {
        ensure!(s.exchanged_values == s.blocks_updated * (r + 1) * (p - 1), "row counter {s:?}");
        ensure!(s.blocks_updated == n, "row selection {s:?}");
    }
    let scalar = run_parallel(
        &m,
        x0,
        &ParallelConfig { engine: Engine::Scalar, workers: p, max_rounds: 3, gap_tol: 0.0, ..ParallelConfig::default() },
    )
    .unwrap();
    for s in &scalar.rounds {
        ensure!(s.exchanged_values == 3 * n * r * (p - 1), "entry counter {s:?}");
    }
    Ok(format!(
        "P = 1 matches serial bit for bit; P = 4 objective {fp:.6} vs serial {fs:.6} ({:+.4}%); counters exact",
        100.0 * (fp / fs - 1.0)
    ))
}

fn permutation_uniformity() -> Outcome {
    let policy = BlockOrderPolicy::random_permutation(2024);
    let perms: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut counts = [0u32; 6];
    let sweeps = 60_000u64;
    for k in 0..sweeps {
        let order = policy.next_order(3, k).unwrap();
        let idx = perms.iter().position(|p| p[..] == order[..]).ok_or("not a permutation")?;
        counts[idx] += 1;
    }
    let expected = sweeps as f64 / 6.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // upper 1e-3 quantile of chi-square with 5 degrees of freedom
    ensure!(chi2 < 20.515, "chi-square {chi2:.2} over counts {counts:?}");

    let m = generate(&GeneratorSpec::ck(40, 4, 14)).unwrap();
    let x0 = initialize(&m, 4, 15);
    for engine in [Engine::Scalar, VBSUM] {
        let config = SolverConfig {
            engine,
            policy: BlockOrderPolicy::random_permutation(99),
            max_sweeps: 25,
            gap_tol: 0.0,
            ..SolverConfig::default()
        };
        let (a, b) = (solve(&m, &x0, config), solve(&m, &x0, config));
        ensure!(same_objectives(&a.trace, &b.trace) && a.x.as_slice() == b.x.as_slice(), "{engine:?}: rerun differs");
    }
    Ok(format!("chi-square {chi2:.2} (5 dof) over {counts:?}; reruns bit-identical"))
}

fn median_sweep_time(m: &SimilarityMatrix, r: usize) -> f64 {
    let n = m.n();
    let mut x = initialize(m, r, 16);
    let mut cache = GramCache::from_factor(&x);
    let order: Vec<usize> = (0..n * r).collect();
    let mut times: Vec<f64> = (0..9)
        .map(|_| {
            let t = Instant::now();
            sweep_sbsum(m, &mut x, &mut cache, &order).unwrap();
            t.elapsed().as_secs_f64()
        })
        .collect();
    times.sort_by(f64::total_cmp);
    times[4]
}

fn sparse_sweep_scaling() -> Outcome {
    let (n, r) = (2000, 2);
    let dense_m = generate(&GeneratorSpec::ck(n, r, 17)).unwrap();
    let mut spec = GeneratorSpec::sgk(n, 3, 17);
    spec.knn_k = Some(128);
    let sparse = generate(&spec).unwrap();
    let nnz_ratio = dense_m.nnz() as f64 / sparse.nnz() as f64;
    let time_ratio = median_sweep_time(&dense_m, r) / median_sweep_time(&sparse, r);
    let factor = nnz_ratio / time_ratio;
    ensure!(
        (1.0 / 3.0..=3.0).contains(&factor),
        "nnz ratio {nnz_ratio:.1} but sweep time ratio {time_ratio:.1}"
    );
    Ok(format!("nnz ratio {nnz_ratio:.1}, sweep time ratio {time_ratio:.1}"))
}

fn time_to_gap(m: &SimilarityMatrix, x0: &FactorMatrix, engine: Engine) -> f64 {
    let out = solve(m, x0, SolverConfig { engine, max_sweeps: 20_000, gap_tol: 1e-3, ..SolverConfig::default() });
    if out.stop == StopReason::GapTolerance {
        out.trace.last().map_or(0.0, |t| t.elapsed_seconds)
    } else {
        f64::INFINITY
    }
}

fn row_engine_speed() -> Outcome {
    let mut wins = 0;
    let mut ratios = Vec::new();
    for seed in 0..10 {
        let mut spec = GeneratorSpec::ck(100, 10, seed);
        spec.sparsity = 0.5;
        let m = generate(&spec).unwrap();
        let x0 = initialize(&m, 10, seed + 1000);
        let ts = time_to_gap(&m, &x0, Engine::Scalar);
        let tv = time_to_gap(&m, &x0, VBSUM);
        if tv < ts {
            wins += 1;
        }
        ratios.push(format!("{:.2}", tv / ts));
    }
    let detail = format!("row engine faster in {wins}/10 trials (time ratios {})", ratios.join(" "));
    ensure!(wins >= 7, "{detail}");
    Ok(detail)
}

type Criterion = (&'static str, &'static str, fn() -> Outcome, Duration);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("1", "monotone descent", monotone_descent, Duration::from_secs(120)),
        ("2", "stationarity", stationarity, Duration::from_secs(30)),
        ("3", "exact recovery", exact_recovery, Duration::from_secs(30)),
        ("4", "cubic oracles", cubic_oracles, Duration::from_secs(10)),
        ("5", "quartic expansion oracle", expansion_oracle, Duration::from_secs(60)),
        ("6", "surrogate contracts", surrogate_contracts, Duration::from_secs(60)),
        ("7", "cache integrity", cache_integrity, Duration::from_secs(60)),
        ("8", "parallel degeneracy and quality", parallel_quality, Duration::from_secs(120)),
        ("9", "permutation uniformity", permutation_uniformity, Duration::from_secs(60)),
        ("10a", "sparse sweep scaling", sparse_sweep_scaling, Duration::from_secs(60)),
        ("10b", "row engine speed", row_engine_speed, Duration::from_secs(60)),
    ];
    let mut failed = 0;
    for (id, name, check, budget) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".into()))
            .and_then(|detail| {
                let took = start.elapsed();
                if took > budget {
                    Err(format!("took {took:.1?}, budget {budget:?}; {detail}"))
                } else {
                    Ok(detail)
                }
            });
        let took = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS  criterion {id:<3} {name} ({took:.2}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  criterion {id:<3} {name} ({took:.2}s): {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
