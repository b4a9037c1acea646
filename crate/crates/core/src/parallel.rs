//! Shared-memory parallel BSUM.
//!
//! Rows of `X` are split into `P` contiguous ranges, one per worker. In each
//! round every worker copies the current iterate, picks blocks from its own
//! rows, and updates them one after another on its private copy with the
//! damped step `x <- x + gamma (x_hat - x)`. Workers never see each other's
//! writes from the same round. At the barrier the staged changes are applied
//! to the shared iterate in worker order and the Gram cache is brought up to
//! date by replaying the same incremental updates the worker performed.

use std::ops::Range;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Barrier, Mutex, RwLock};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use web_time::Instant;

use crate::error::{Error, Result};
use crate::factor::{FactorMatrix, GramCache};
use crate::matrix::SimilarityMatrix;
use crate::metrics::{evaluate, StationarityReport};
use crate::scheduler::{
    check_dimensions, stop_reason, Engine, SolveOutcome, SolverConfig, StopReason, TraceRecord,
};
use crate::{sbsum, vbsum};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionPlan {
    pub row_ranges: Vec<Range<usize>>,
    /// Blocks each worker updates per round; `None` selects every local block.
    pub blocks_per_worker: Option<usize>,
}

impl PartitionPlan {
    pub fn workers(&self) -> usize {
        self.row_ranges.len()
    }
}

/// Splits `0..n` into `p` contiguous ranges whose sizes differ by at most one.
pub fn plan_partition(n: usize, p: usize, blocks_per_worker: Option<usize>) -> Result<PartitionPlan> {
    if p == 0 || p > n {
        return Err(Error::Config(format!(
            "worker count must be in 1..={n}, got {p}"
        )));
    }
    if blocks_per_worker == Some(0) {
        return Err(Error::Config("blocks_per_round must be at least 1".into()));
    }
    let (base, extra) = (n / p, n % p);
    let mut start = 0;
    let row_ranges = (0..p)
        .map(|k| {
            let len = base + usize::from(k < extra);
            let range = start..start + len;
            start += len;
            range
        })
        .collect();
    Ok(PartitionPlan {
        row_ranges,
        blocks_per_worker,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepsizeRule {
    Constant { gamma: f64 },
    /// `gamma0 / sqrt(1 + k)` in round `k`.
    Diminishing { gamma0: f64 },
}

impl Default for StepsizeRule {
    fn default() -> Self {
        StepsizeRule::Constant { gamma: 1.0 }
    }
}

impl StepsizeRule {
    pub fn gamma(&self, round: usize) -> f64 {
        match *self {
            StepsizeRule::Constant { gamma } => gamma,
            StepsizeRule::Diminishing { gamma0 } => gamma0 / ((1 + round) as f64).sqrt(),
        }
    }

    fn validate(&self) -> Result<()> {
        let g = match *self {
            StepsizeRule::Constant { gamma } => gamma,
            StepsizeRule::Diminishing { gamma0 } => gamma0,
        };
        if !(g > 0.0 && g <= 1.0) {
            return Err(Error::Config(format!("stepsize must lie in (0, 1], got {g}")));
        }
        Ok(())
    }
}

/// How a worker picks its blocks within a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Uniform sample without replacement.
    Random,
    /// Consecutive local blocks in index order, continuing where the last round stopped.
    Cyclic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParallelConfig {
    pub engine: Engine,
    pub workers: usize,
    pub blocks_per_round: Option<usize>,
    pub stepsize: StepsizeRule,
    pub selection: Selection,
    pub seed: u64,
    pub max_rounds: usize,
    pub gap_tol: f64,
    pub rel_obj_tol: f64,
    pub refresh_period: usize,
}

impl Default for ParallelConfig {
    fn default() -> Self {
        let serial = SolverConfig::default();
        Self {
            engine: serial.engine,
            workers: 4,
            blocks_per_round: None,
            stepsize: StepsizeRule::default(),
            selection: Selection::Random,
            seed: 0,
            max_rounds: serial.max_sweeps,
            gap_tol: serial.gap_tol,
            rel_obj_tol: serial.rel_obj_tol,
            refresh_period: serial.refresh_period,
        }
    }
}

/// What one round did, including the values a message-passing
/// implementation would have exchanged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RoundStats {
    pub blocks_updated: usize,
    /// Entry engine: `3` values (value and two indices) per updated entry;
    /// row engine: `r + 1` per updated row; each sent to `P - 1` peers.
    pub exchanged_values: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Delta {
    Entry {
        i: usize,
        j: usize,
        old_row: Vec<f64>,
        new: f64,
    },
    Row {
        i: usize,
        old: Vec<f64>,
        new: Vec<f64>,
    },
}

fn damp(old: f64, proposed: f64, gamma: f64) -> f64 {
    if gamma == 1.0 {
        proposed
    } else {
        (old + gamma * (proposed - old)).max(0.0)
    }
}

/// Blocks (global ids) a worker touches in a round.
fn select_blocks(
    engine: &Engine,
    rows: &Range<usize>,
    r: usize,
    per_worker: Option<usize>,
    selection: Selection,
    round: usize,
    worker: usize,
    seed: u64,
) -> Vec<usize> {
    let (first, count) = match engine {
        Engine::Scalar => (rows.start * r, rows.len() * r),
        Engine::Vector { .. } => (rows.start, rows.len()),
    };
    let take = per_worker.map_or(count, |j| j.min(count));
    if take == count {
        return match selection {
            Selection::Cyclic => (first..first + count).collect(),
            Selection::Random => {
                let mut rng = worker_rng(seed, round, worker);
                sample(&mut rng, count, count).into_iter().map(|k| first + k).collect()
            }
        };
    }
    match selection {
        Selection::Cyclic => {
            let start = (round * take) % count;
            (0..take).map(|k| first + (start + k) % count).collect()
        }
        Selection::Random => {
            let mut rng = worker_rng(seed, round, worker);
            sample(&mut rng, count, take).into_iter().map(|k| first + k).collect()
        }
    }
}

fn worker_rng(seed: u64, round: usize, worker: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((round as u64) << 20) | worker as u64);
    rng
}

/// Updates `blocks` one after another on a private copy of the snapshot.
fn worker_compute(
    m: &SimilarityMatrix,
    snapshot: &FactorMatrix,
    snapshot_cache: &GramCache,
    engine: &Engine,
    gamma: f64,
    blocks: &[usize],
) -> Result<Vec<Delta>> {
    let mut x = snapshot.clone();
    let mut cache = snapshot_cache.clone();
    let r = x.r();
    let mut deltas = Vec::with_capacity(blocks.len());
    for &k in blocks {
        match *engine {
            Engine::Scalar => {
                let (i, j) = (k / r, k % r);
                let proposed = sbsum::propose_entry(m, &x, &cache, i, j)?;
                let new = damp(x.get(i, j), proposed, gamma);
                let old_row = x.row(i).to_vec();
                cache.update_for_entry(&old_row, i, j, new);
                x.set(i, j, new);
                deltas.push(Delta::Entry { i, j, old_row, new });
            }
            Engine::Vector { i_max } => {
                let proposed = vbsum::propose_row(m, &x, &cache, k, i_max)?;
                let old = x.row(k).to_vec();
                let new: Vec<f64> = old
                    .iter()
                    .zip(&proposed)
                    .map(|(&o, &p)| damp(o, p, gamma))
                    .collect();
                cache.update_for_row(&old, &new, k);
                x.row_mut(k).copy_from_slice(&new);
                deltas.push(Delta::Row { i: k, old, new });
            }
        }
    }
    Ok(deltas)
}

fn run_worker(
    m: &SimilarityMatrix,
    snapshot: &FactorMatrix,
    cache: &GramCache,
    plan: &PartitionPlan,
    engine: &Engine,
    gamma: f64,
    selection: Selection,
    round: usize,
    worker: usize,
    seed: u64,
) -> Result<Vec<Delta>> {
    let blocks = select_blocks(
        engine,
        &plan.row_ranges[worker],
        snapshot.r(),
        plan.blocks_per_worker,
        selection,
        round,
        worker,
        seed,
    );
    catch_unwind(AssertUnwindSafe(|| {
        worker_compute(m, snapshot, cache, engine, gamma, &blocks)
    }))
    .unwrap_or(Err(Error::WorkerPanic { worker, round }))
}

/// Applies staged deltas in worker order.
fn merge(
    x: &mut FactorMatrix,
    cache: &mut GramCache,
    staged: Vec<Vec<Delta>>,
    engine: &Engine,
    workers: usize,
) -> RoundStats {
    let r = x.r();
    let mut blocks = 0;
    for deltas in staged {
        blocks += deltas.len();
        for d in deltas {
            match d {
                Delta::Entry { i, j, old_row, new } => {
                    cache.update_for_entry(&old_row, i, j, new);
                    x.set(i, j, new);
                }
                Delta::Row { i, old, new } => {
                    cache.update_for_row(&old, &new, i);
                    x.row_mut(i).copy_from_slice(&new);
                }
            }
        }
    }
    let per_block = match engine {
        Engine::Scalar => 3,
        Engine::Vector { .. } => r + 1,
    };
    RoundStats {
        blocks_updated: blocks,
        exchanged_values: per_block * blocks * (workers - 1),
    }
}

/// Collects per-worker results; the first failure aborts the round.
fn collect(results: Vec<Result<Vec<Delta>>>) -> Result<Vec<Vec<Delta>>> {
    results.into_iter().collect()
}

/// One synchronous round with freshly spawned workers. On error `x` and
/// `cache` keep their pre-round values.
pub fn parallel_round(
    m: &SimilarityMatrix,
    x: &mut FactorMatrix,
    cache: &mut GramCache,
    plan: &PartitionPlan,
    engine: Engine,
    gamma: f64,
    selection: Selection,
    round: usize,
    seed: u64,
) -> Result<RoundStats> {
    check_dimensions(m, x)?;
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Config(format!("stepsize must lie in [0, 1], got {gamma}")));
    }
    let snapshot: &FactorMatrix = x;
    let snap_cache: &GramCache = cache;
    let results: Vec<Result<Vec<Delta>>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..plan.workers())
            .map(|w| {
                s.spawn(move || {
                    run_worker(
                        m, snapshot, snap_cache, plan, &engine, gamma, selection, round, w, seed,
                    )
                })
            })
            .collect();
        handles
            .into_iter()
            .enumerate()
            .map(|(w, h)| h.join().unwrap_or(Err(Error::WorkerPanic { worker: w, round })))
            .collect()
    });
    let staged = collect(results)?;
    Ok(merge(x, cache, staged, &engine, plan.workers()))
}

#[derive(Debug, Clone)]
pub struct ParallelOutcome {
    pub outcome: SolveOutcome,
    pub rounds: Vec<RoundStats>,
}

struct Shared {
    x: FactorMatrix,
    cache: GramCache,
    round: usize,
    gamma: f64,
}

/// Runs rounds on a persistent pool of `workers` threads synchronized by a
/// barrier, until a stopping rule fires.
pub fn run_parallel(
    m: &SimilarityMatrix,
    x0: FactorMatrix,
    config: &ParallelConfig,
) -> Result<ParallelOutcome> {
    SolverConfig::validate_common(
        &config.engine,
        config.gap_tol,
        config.rel_obj_tol,
        config.refresh_period,
    )?;
    config.stepsize.validate()?;
    check_dimensions(m, &x0)?;
    let plan = plan_partition(x0.n(), config.workers, config.blocks_per_round)?;
    let p = plan.workers();

    if config.max_rounds == 0 {
        let report = evaluate(m, &x0);
        return Ok(ParallelOutcome {
            outcome: SolveOutcome {
                x: x0,
                trace: Vec::new(),
                stop: StopReason::MaxSweeps,
                report,
            },
            rounds: Vec::new(),
        });
    }

    let cache = GramCache::from_factor(&x0);
    let shared = RwLock::new(Shared {
        x: x0,
        cache,
        round: 0,
        gamma: config.stepsize.gamma(0),
    });
    let slots: Vec<Mutex<Option<Result<Vec<Delta>>>>> = (0..p).map(|_| Mutex::new(None)).collect();
    let barrier = Barrier::new(p + 1);
    let stop = AtomicBool::new(false);

    let driver = || -> Result<(Vec<TraceRecord>, Vec<RoundStats>, StopReason, StationarityReport)> {
        let mut trace = Vec::new();
        let mut rounds = Vec::new();
        let mut prev = None;
        let mut elapsed = 0.0;
        loop {
            let start = Instant::now();
            barrier.wait(); // round published
            barrier.wait(); // results staged
            let staged = collect(
                slots
                    .iter()
                    .enumerate()
                    .map(|(w, s)| {
                        s.lock()
                            .ok()
                            .and_then(|mut g| g.take())
                            .unwrap_or(Err(Error::WorkerPanic {
                                worker: w,
                                round: trace.len(),
                            }))
                    })
                    .collect(),
            )?;
            let mut guard = shared.write().expect("state lock poisoned");
            let st = &mut *guard;
            let stats = merge(&mut st.x, &mut st.cache, staged, &config.engine, p);
            st.round += 1;
            if st.round.is_multiple_of(config.refresh_period) {
                st.cache.refresh(&st.x);
            }
            st.gamma = config.stepsize.gamma(st.round);
            elapsed += start.elapsed().as_secs_f64();
            let report = evaluate(m, &st.x);
            trace.push(TraceRecord {
                sweep_index: st.round,
                elapsed_seconds: elapsed,
                objective: report.objective,
                relative_residual: report.relative_residual_percent,
                optimality_gap: report.optimality_gap,
                blocks_updated: stats.blocks_updated,
            });
            rounds.push(stats);
            if let Some(reason) = stop_reason(
                &report,
                prev,
                config.gap_tol,
                config.rel_obj_tol,
                st.round,
                config.max_rounds,
            ) {
                return Ok((trace, rounds, reason, report));
            }
            prev = Some(report.objective);
        }
    };

    let result = std::thread::scope(|s| {
        for w in 0..p {
            let (plan, shared, slots, barrier, stop) = (&plan, &shared, &slots, &barrier, &stop);
            s.spawn(move || loop {
                barrier.wait();
                if stop.load(Ordering::Acquire) {
                    break;
                }
                let res = match shared.read() {
                    Ok(st) => run_worker(
                        m,
                        &st.x,
                        &st.cache,
                        plan,
                        &config.engine,
                        st.gamma,
                        config.selection,
                        st.round,
                        w,
                        config.seed,
                    ),
                    Err(_) => Err(Error::WorkerPanic {
                        worker: w,
                        round: usize::MAX,
                    }),
                };
                if let Ok(mut slot) = slots[w].lock() {
                    *slot = Some(res);
                }
                barrier.wait();
            });
        }
        let result = driver();
        stop.store(true, Ordering::Release);
        barrier.wait();
        result
    });

    let (trace, rounds, stop, report) = result?;
    let st = shared.into_inner().expect("state lock poisoned");
    Ok(ParallelOutcome {
        outcome: SolveOutcome {
            x: st.x,
            trace,
            stop,
            report,
        },
        rounds,
    })
}
