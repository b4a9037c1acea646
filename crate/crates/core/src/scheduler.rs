//! Block orders and the serial solver loop.
//!
//! A sweep visits every block once, either in the fixed order `0..m` or in a
//! fresh uniformly random permutation. Permutations are a pure function of
//! `(seed, sweep_index)`: each sweep draws from its own ChaCha stream.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use web_time::Instant;

use crate::error::{Error, Result};
use crate::factor::{FactorMatrix, GramCache};
use crate::matrix::SimilarityMatrix;
use crate::metrics::{evaluate, StationarityReport};
use crate::{sbsum, vbsum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderKind {
    Cyclic,
    RandomPermutation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockOrderPolicy {
    pub kind: OrderKind,
    pub seed: u64,
}

impl BlockOrderPolicy {
    pub fn cyclic() -> Self {
        Self {
            kind: OrderKind::Cyclic,
            seed: 0,
        }
    }

    pub fn random_permutation(seed: u64) -> Self {
        Self {
            kind: OrderKind::RandomPermutation,
            seed,
        }
    }

    /// Order of the `m` blocks for sweep `sweep_index`.
    pub fn next_order(&self, m: usize, sweep_index: u64) -> Result<Vec<usize>> {
        if m == 0 {
            return Err(Error::Config("block count must be positive".into()));
        }
        let mut order: Vec<usize> = (0..m).collect();
        if self.kind == OrderKind::RandomPermutation {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(sweep_index);
            order.shuffle(&mut rng);
        }
        Ok(order)
    }
}

/// Which block structure a solver updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Entries of `X`, one closed-form cubic per entry.
    Scalar,
    /// Rows of `X`, `i_max` majorization steps per row.
    Vector { i_max: usize },
}

impl Engine {
    pub fn block_count(&self, n: usize, r: usize) -> usize {
        match self {
            Engine::Scalar => n * r,
            Engine::Vector { .. } => n,
        }
    }

    /// Runs one sweep in the given order.
    pub fn sweep(
        &self,
        m: &SimilarityMatrix,
        x: &mut FactorMatrix,
        cache: &mut GramCache,
        order: &[usize],
    ) -> Result<()> {
        match *self {
            Engine::Scalar => sbsum::sweep_sbsum(m, x, cache, order),
            Engine::Vector { i_max } => vbsum::sweep_vbsum(m, x, cache, order, i_max),
        }
    }
}

/// One row of the per-sweep trace. Serialized field names are the CSV header.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRecord {
    #[serde(rename = "sweep")]
    pub sweep_index: usize,
    /// Cumulative time spent inside sweeps; metric evaluation is excluded.
    #[serde(rename = "elapsed_s")]
    pub elapsed_seconds: f64,
    pub objective: f64,
    #[serde(rename = "rel_residual_pct")]
    pub relative_residual: f64,
    #[serde(rename = "opt_gap")]
    pub optimality_gap: f64,
    #[serde(rename = "blocks")]
    pub blocks_updated: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GapTolerance,
    ObjectiveStalled,
    MaxSweeps,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub engine: Engine,
    pub policy: BlockOrderPolicy,
    pub max_sweeps: usize,
    /// Stop once the optimality gap is at most this.
    pub gap_tol: f64,
    /// Stop once `|F_prev - F| <= rel_obj_tol * F_prev`; `0` disables.
    pub rel_obj_tol: f64,
    /// Recompute the Gram cache from scratch every this many sweeps.
    pub refresh_period: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            engine: Engine::Vector {
                i_max: vbsum::DEFAULT_I_MAX,
            },
            policy: BlockOrderPolicy::cyclic(),
            max_sweeps: 1000,
            gap_tol: 1e-4,
            rel_obj_tol: 0.0,
            refresh_period: 50,
        }
    }
}

impl SolverConfig {
    pub(crate) fn validate_common(
        engine: &Engine,
        gap_tol: f64,
        rel_obj_tol: f64,
        refresh_period: usize,
    ) -> Result<()> {
        if let Engine::Vector { i_max: 0 } = engine {
            return Err(Error::Config("i_max must be at least 1".into()));
        }
        if !(gap_tol >= 0.0) {
            return Err(Error::Config(format!("gap_tol must be >= 0, got {gap_tol}")));
        }
        if !(rel_obj_tol >= 0.0) {
            return Err(Error::Config(format!(
                "rel_obj_tol must be >= 0, got {rel_obj_tol}"
            )));
        }
        if refresh_period == 0 {
            return Err(Error::Config("refresh_period must be at least 1".into()));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        Self::validate_common(
            &self.engine,
            self.gap_tol,
            self.rel_obj_tol,
            self.refresh_period,
        )
    }
}

pub(crate) fn check_dimensions(m: &SimilarityMatrix, x: &FactorMatrix) -> Result<()> {
    if m.n() != x.n() {
        return Err(Error::Dimension(format!(
            "M is {0} x {0} but X has {1} rows",
            m.n(),
            x.n()
        )));
    }
    if x.r() == 0 || x.n() == 0 {
        return Err(Error::Dimension("X must have at least one row and column".into()));
    }
    Ok(())
}

/// Decides whether to stop after a sweep with report `now`.
pub(crate) fn stop_reason(
    now: &StationarityReport,
    prev_objective: Option<f64>,
    gap_tol: f64,
    rel_obj_tol: f64,
    done: usize,
    max: usize,
) -> Option<StopReason> {
    if now.optimality_gap <= gap_tol {
        return Some(StopReason::GapTolerance);
    }
    if rel_obj_tol > 0.0 {
        if let Some(prev) = prev_objective {
            if (prev - now.objective).abs() <= rel_obj_tol * prev {
                return Some(StopReason::ObjectiveStalled);
            }
        }
    }
    (done >= max).then_some(StopReason::MaxSweeps)
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub x: FactorMatrix,
    pub trace: Vec<TraceRecord>,
    pub stop: StopReason,
    /// Measures at the returned iterate.
    pub report: StationarityReport,
}

/// Serial solver that can be advanced one sweep at a time.
pub struct Solver<'a> {
    m: &'a SimilarityMatrix,
    x: FactorMatrix,
    cache: GramCache,
    config: SolverConfig,
    sweeps: usize,
    elapsed: f64,
    last: Option<StationarityReport>,
}

impl<'a> Solver<'a> {
    pub fn new(m: &'a SimilarityMatrix, x0: FactorMatrix, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        check_dimensions(m, &x0)?;
        let cache = GramCache::from_factor(&x0);
        Ok(Self {
            m,
            x: x0,
            cache,
            config,
            sweeps: 0,
            elapsed: 0.0,
            last: None,
        })
    }

    pub fn x(&self) -> &FactorMatrix {
        &self.x
    }

    pub fn cache(&self) -> &GramCache {
        &self.cache
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    /// Runs one sweep and returns its trace record and the post-sweep report.
    pub fn step(&mut self) -> Result<(TraceRecord, StationarityReport)> {
        let blocks = self.config.engine.block_count(self.x.n(), self.x.r());
        let start = Instant::now();
        let order = self.config.policy.next_order(blocks, self.sweeps as u64)?;
        self.config
            .engine
            .sweep(self.m, &mut self.x, &mut self.cache, &order)?;
        self.sweeps += 1;
        if self.sweeps.is_multiple_of(self.config.refresh_period) {
            self.cache.refresh(&self.x);
        }
        self.elapsed += start.elapsed().as_secs_f64();
        let report = evaluate(self.m, &self.x);
        self.last = Some(report);
        let record = TraceRecord {
            sweep_index: self.sweeps,
            elapsed_seconds: self.elapsed,
            objective: report.objective,
            relative_residual: report.relative_residual_percent,
            optimality_gap: report.optimality_gap,
            blocks_updated: blocks,
        };
        Ok((record, report))
    }

    pub fn run(mut self) -> Result<SolveOutcome> {
        let mut trace = Vec::new();
        let mut prev = None;
        let stop = if self.config.max_sweeps == 0 {
            StopReason::MaxSweeps
        } else {
            loop {
                let (rec, report) = self.step()?;
                trace.push(rec);
                if let Some(reason) = stop_reason(
                    &report,
                    prev,
                    self.config.gap_tol,
                    self.config.rel_obj_tol,
                    self.sweeps,
                    self.config.max_sweeps,
                ) {
                    break reason;
                }
                prev = Some(report.objective);
            }
        };
        let report = self.last.unwrap_or_else(|| evaluate(self.m, &self.x));
        Ok(SolveOutcome {
            x: self.x,
            trace,
            stop,
            report,
        })
    }
}

/// Sweeps until a stopping rule fires, recording one trace row per sweep.
pub fn run_solver(
    m: &SimilarityMatrix,
    x0: FactorMatrix,
    config: &SolverConfig,
) -> Result<SolveOutcome> {
    Solver::new(m, x0, *config)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cyclic_is_identity() {
        let p = BlockOrderPolicy::cyclic();
        for k in 0..3 {
            assert_eq!(p.next_order(5, k).unwrap(), vec![0, 1, 2, 3, 4]);
        }
    }

    #[test]
    fn permutation_is_seed_deterministic() {
        let a = BlockOrderPolicy::random_permutation(42);
        let b = BlockOrderPolicy::random_permutation(42);
        for k in 0..20 {
            let o = a.next_order(7, k).unwrap();
            assert_eq!(o, b.next_order(7, k).unwrap());
            let mut s = o.clone();
            s.sort_unstable();
            assert_eq!(s, (0..7).collect::<Vec<_>>());
        }
        assert_ne!(a.next_order(50, 0).unwrap(), a.next_order(50, 1).unwrap());
    }

    #[test]
    fn zero_blocks_is_an_error() {
        assert!(BlockOrderPolicy::cyclic().next_order(0, 0).is_err());
    }

    #[test]
    fn max_sweeps_zero_returns_start() {
        let m = SimilarityMatrix::dense(2, vec![1.0; 4]).unwrap();
        let x0 = FactorMatrix::from_row_major(2, 1, vec![1.0, 0.0]).unwrap();
        let cfg = SolverConfig {
            max_sweeps: 0,
            ..Default::default()
        };
        let out = run_solver(&m, x0.clone(), &cfg).unwrap();
        assert_eq!(out.x, x0);
        assert!(out.trace.is_empty());
        assert_eq!(out.stop, StopReason::MaxSweeps);
    }

    #[test]
    fn invalid_config_rejected_up_front() {
        let m = SimilarityMatrix::dense(2, vec![1.0; 4]).unwrap();
        let x0 = FactorMatrix::zeros(2, 1);
        let bad = SolverConfig {
            engine: Engine::Vector { i_max: 0 },
            ..Default::default()
        };
        assert!(run_solver(&m, x0.clone(), &bad).is_err());
        let bad = SolverConfig {
            refresh_period: 0,
            ..Default::default()
        };
        assert!(run_solver(&m, x0, &bad).is_err());
        let x_wrong = FactorMatrix::zeros(3, 1);
        assert!(run_solver(&m, x_wrong, &SolverConfig::default()).is_err());
    }
}
