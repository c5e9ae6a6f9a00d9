//! The staged update process.
//!
//! At every stage the nodes that were hopeful at the end of the previous stage
//! are visited in a fixed order; each one switches type if it is still hopeful
//! given the switches already made during the stage. The process terminates at
//! the first stage with no hopeful nodes.

mod naive;
mod record;

pub use naive::{first_divergence, naive_reference_run, naive_reference_run_observed};
pub use record::RunRecord;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::experiments::split_seed;
use crate::lattice::{
    apply_flip, build_counts, neighborhood_size, random_config, Configuration, ModelParams, NeighborCounts, NodeType,
};
use crate::Result;

/// Cross-multiplied happiness test: own-type share of `N(u)` is at least the
/// node's intolerance.
pub fn is_happy(counts: &NeighborCounts, config: &Configuration, u: usize) -> bool {
    let p = config.params();
    let size = neighborhood_size(p) as u128;
    let alpha = counts.get(u) as u128;
    let ty = config.get(u);
    let own = if ty.is_alpha() { alpha } else { size - alpha };
    meets(own, size, p, ty)
}

/// Unhappy now, but happy after switching type (its own vote re-counted).
pub fn is_hopeful(counts: &NeighborCounts, config: &Configuration, u: usize) -> bool {
    if is_happy(counts, config, u) {
        return false;
    }
    let p = config.params();
    let size = neighborhood_size(p) as u128;
    let alpha = counts.get(u) as u128;
    match config.get(u) {
        // becomes beta: beta count is size - (alpha - 1)
        NodeType::Alpha => meets(size - alpha + 1, size, p, NodeType::Beta),
        NodeType::Beta => meets(alpha + 1, size, p, NodeType::Alpha),
    }
}

fn meets(own: u128, size: u128, p: &ModelParams, ty: NodeType) -> bool {
    let tau = p.tau(ty);
    own * *tau.denom() as u128 >= *tau.numer() as u128 * size
}

/// Integer thresholds equivalent to [`is_happy`]: a node of type `t` is happy
/// iff its own-type count is at least `need[t]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HappinessRule {
    size: u32,
    need_alpha: u32,
    need_beta: u32,
}

impl HappinessRule {
    pub fn new(p: &ModelParams) -> Self {
        let size = neighborhood_size(p) as u128;
        let need = |ty| {
            let tau = p.tau(ty);
            let (num, den) = (*tau.numer() as u128 * size, *tau.denom() as u128);
            num.div_ceil(den) as u32
        };
        HappinessRule { size: size as u32, need_alpha: need(NodeType::Alpha), need_beta: need(NodeType::Beta) }
    }

    pub fn size(&self) -> u32 {
        self.size
    }

    /// Smallest own-type count that makes a node of type `ty` happy.
    pub fn need(&self, ty: NodeType) -> u32 {
        match ty {
            NodeType::Alpha => self.need_alpha,
            NodeType::Beta => self.need_beta,
        }
    }

    #[inline]
    pub fn happy(&self, ty: NodeType, alpha: u32) -> bool {
        match ty {
            NodeType::Alpha => alpha >= self.need_alpha,
            NodeType::Beta => self.size - alpha >= self.need_beta,
        }
    }

    #[inline]
    pub fn hopeful(&self, ty: NodeType, alpha: u32) -> bool {
        match ty {
            NodeType::Alpha => alpha < self.need_alpha && self.size - alpha + 1 >= self.need_beta,
            NodeType::Beta => self.size - alpha < self.need_beta && alpha + 1 >= self.need_alpha,
        }
    }
}

/// Order in which the hopeful nodes of a stage are visited.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum UpdateOrder {
    #[default]
    Lexicographic,
    /// A fresh permutation per stage, drawn from `split_seed(seed, stage)`.
    Shuffled { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: u64,
    pub flips: u64,
    pub alpha_count: u64,
    pub lyapunov: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Defaults to `4 n` when `None`.
    pub max_stages: Option<u64>,
    pub order: UpdateOrder,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { max_stages: None, order: UpdateOrder::Lexicographic }
    }
}

impl RunOptions {
    pub fn with_max_stages(max_stages: u64) -> Self {
        RunOptions { max_stages: Some(max_stages), ..Self::default() }
    }

    pub fn max_stages_for(&self, p: &ModelParams) -> u64 {
        self.max_stages.unwrap_or(4 * p.n as u64).max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub params: ModelParams,
    pub seed: u64,
    pub initial: Configuration,
    pub final_config: Configuration,
    pub reports: Vec<StageReport>,
    pub terminated: bool,
}

impl RunResult {
    pub fn stages(&self) -> u64 {
        self.reports.last().map_or(0, |r| r.stage)
    }

    pub fn total_flips(&self) -> u64 {
        self.reports.iter().map(|r| r.flips).sum()
    }

    /// Share of nodes whose final type equals their initial type.
    pub fn unchanged_fraction(&self) -> f64 {
        let same = self.initial.cells().iter().zip(self.final_config.cells()).filter(|(a, b)| a == b).count();
        same as f64 / self.initial.len() as f64
    }
}

/// What an observer sees after each stage.
pub struct StageView<'a> {
    pub report: &'a StageReport,
    pub flipped: &'a [usize],
    pub next_hopeful: &'a [usize],
    pub config: &'a Configuration,
    pub counts: &'a NeighborCounts,
}

pub struct StageOutcome {
    pub report: StageReport,
    pub flipped: Vec<usize>,
    pub next_hopeful: Vec<usize>,
}

/// Sum over nodes of the same-type count in their neighbourhood (self included).
pub fn lyapunov(config: &Configuration) -> u64 {
    lyapunov_from_counts(config, &build_counts(config))
}

pub fn lyapunov_from_counts(config: &Configuration, counts: &NeighborCounts) -> u64 {
    let size = neighborhood_size(config.params()) as u64;
    config
        .cells()
        .iter()
        .zip(counts.as_slice())
        .map(|(t, &a)| if t.is_alpha() { a as u64 } else { size - a as u64 })
        .sum()
}

/// All hopeful nodes, in index order.
pub fn hopeful_nodes(config: &Configuration, counts: &NeighborCounts) -> Vec<usize> {
    let rule = HappinessRule::new(config.params());
    (0..config.len()).filter(|&u| rule.hopeful(config.get(u), counts.get(u))).collect()
}

/// Runs one stage over `hopeful` (the hopeful set at the end of the previous
/// stage) and returns the report together with the next hopeful set.
///
/// The next set is found by rescanning only the nodes within distance `w` of
/// a switch plus the previously hopeful nodes; happiness elsewhere cannot
/// have changed.
pub fn run_stage(
    config: &mut Configuration,
    counts: &mut NeighborCounts,
    hopeful: &[usize],
    order: &UpdateOrder,
) -> StageOutcome {
    let rule = HappinessRule::new(config.params());
    let stage = config.stage + 1;
    let mut queue = hopeful.to_vec();
    match order {
        UpdateOrder::Lexicographic => queue.sort_unstable(),
        UpdateOrder::Shuffled { seed } => {
            queue.sort_unstable();
            let mut rng = ChaCha8Rng::seed_from_u64(split_seed(*seed, stage));
            queue.shuffle(&mut rng);
        }
    }

    let mut flipped = Vec::new();
    for &u in &queue {
        if rule.hopeful(config.get(u), counts.get(u)) {
            apply_flip(config, counts, u);
            flipped.push(u);
        }
    }
    config.stage = stage;

    let next_hopeful = if flipped.is_empty() {
        // nothing moved, so the old hopeful set (empty or not) is unchanged
        let mut h = hopeful.to_vec();
        h.retain(|&u| rule.hopeful(config.get(u), counts.get(u)));
        h.sort_unstable();
        h
    } else {
        let torus = config.torus();
        let w = config.params().w;
        let mut mark = vec![false; config.len()];
        for &u in hopeful {
            mark[u] = true;
        }
        for &f in &flipped {
            torus.for_each_in_window(f, w, |v| mark[v] = true);
        }
        mark.iter()
            .enumerate()
            .filter(|&(u, &m)| m && rule.hopeful(config.get(u), counts.get(u)))
            .map(|(u, _)| u)
            .collect()
    };

    let report = StageReport {
        stage,
        flips: flipped.len() as u64,
        alpha_count: config.alpha_count() as u64,
        lyapunov: lyapunov_from_counts(config, counts),
    };
    StageOutcome { report, flipped, next_hopeful }
}

/// Random fair-coin start from `seed`, then [`run_from`].
pub fn run(params: &ModelParams, seed: u64, opts: &RunOptions) -> Result<RunResult> {
    let initial = random_config(params, seed)?;
    Ok(run_from(initial, seed, opts))
}

pub fn run_from(initial: Configuration, seed: u64, opts: &RunOptions) -> RunResult {
    run_observed(initial, seed, opts, |_| {})
}

/// Runs until a stage has no switches or `max_stages` stages have been run,
/// calling `observer` after every stage.
pub fn run_observed(
    initial: Configuration,
    seed: u64,
    opts: &RunOptions,
    mut observer: impl FnMut(&StageView<'_>),
) -> RunResult {
    let params = *initial.params();
    let max_stages = opts.max_stages_for(&params);
    let mut config = initial.clone();
    let mut counts = build_counts(&config);
    let mut hopeful = hopeful_nodes(&config, &counts);
    let mut reports = Vec::new();
    let mut terminated = false;
    for _ in 0..max_stages {
        let out = run_stage(&mut config, &mut counts, &hopeful, &opts.order);
        observer(&StageView {
            report: &out.report,
            flipped: &out.flipped,
            next_hopeful: &out.next_hopeful,
            config: &config,
            counts: &counts,
        });
        reports.push(out.report);
        hopeful = out.next_hopeful;
        if out.report.flips == 0 {
            terminated = true;
            break;
        }
    }
    RunResult { params, seed, initial, final_config: config, reports, terminated }
}
