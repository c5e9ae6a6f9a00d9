//! Brute-force reference engine used as a testing oracle.
//!
//! Recounts every neighbourhood from scratch at every query and rescans the
//! whole torus for hopeful nodes at every stage. Shares nothing with the fast
//! path except the configuration and report types.

use super::{RunResult, StageReport};
use crate::lattice::{Configuration, NodeType};

struct Naive<'a> {
    cells: &'a [NodeType],
    n: i64,
    w: i64,
    rank: usize,
}

impl Naive<'_> {
    fn coords(&self, u: usize) -> [i64; 3] {
        let n = self.n as usize;
        let mut c = [0i64; 3];
        let mut rest = u;
        for ax in (0..self.rank).rev() {
            c[ax] = (rest % n) as i64;
            rest /= n;
        }
        c
    }

    fn index(&self, c: [i64; 3]) -> usize {
        let mut idx = 0usize;
        for &v in c.iter().take(self.rank) {
            idx = idx * self.n as usize + v.rem_euclid(self.n) as usize;
        }
        idx
    }

    fn count(&self, u: usize, ty: NodeType) -> u128 {
        let c = self.coords(u);
        let span = |ax: usize| if ax < self.rank { -self.w..=self.w } else { 0..=0 };
        let mut total = 0;
        for dx in span(0) {
            for dy in span(1) {
                for dz in span(2) {
                    let v = self.index([c[0] + dx, c[1] + dy, c[2] + dz]);
                    if self.cells[v] == ty {
                        total += 1;
                    }
                }
            }
        }
        total
    }

    fn size(&self) -> u128 {
        ((2 * self.w + 1) as u128).pow(self.rank as u32)
    }
}

fn happy_as(cfg: &Configuration, naive: &Naive<'_>, own: u128, ty: NodeType) -> bool {
    let tau = cfg.params().tau(ty);
    // own/size >= p/q  <=>  own*q >= p*size
    own * *tau.denom() as u128 >= *tau.numer() as u128 * naive.size()
}

fn hopeful(cfg: &Configuration, u: usize) -> bool {
    let p = cfg.params();
    let naive = Naive { cells: cfg.cells(), n: p.n as i64, w: p.w as i64, rank: p.dim.rank() };
    let ty = cfg.get(u);
    let own = naive.count(u, ty);
    if happy_as(cfg, &naive, own, ty) {
        return false;
    }
    let other = naive.count(u, !ty) + 1;
    happy_as(cfg, &naive, other, !ty)
}

fn report(cfg: &Configuration, stage: u64, flips: u64) -> StageReport {
    let p = cfg.params();
    let naive = Naive { cells: cfg.cells(), n: p.n as i64, w: p.w as i64, rank: p.dim.rank() };
    let lyapunov = (0..cfg.len()).map(|u| naive.count(u, cfg.get(u)) as u64).sum();
    let alpha_count = cfg.cells().iter().filter(|c| **c == NodeType::Alpha).count() as u64;
    StageReport { stage, flips, alpha_count, lyapunov }
}

pub fn naive_reference_run(initial: Configuration, seed: u64, max_stages: u64) -> RunResult {
    naive_reference_run_observed(initial, seed, max_stages, |_, _| {})
}

/// First stage (0 = initial) at which the fast engine and the reference engine
/// disagree on the configuration or the report; `None` when they agree throughout.
pub fn first_divergence(initial: Configuration, seed: u64, max_stages: u64) -> Option<u64> {
    let mut fast_frames = Vec::new();
    let fast = super::run_observed(initial.clone(), seed, &super::RunOptions::with_max_stages(max_stages), |v| {
        fast_frames.push(v.config.cells().to_vec())
    });
    let mut slow_frames = Vec::new();
    let slow = naive_reference_run_observed(initial, seed, max_stages, |_, c| slow_frames.push(c.cells().to_vec()));
    let stages = fast_frames.len().max(slow_frames.len());
    for s in 0..stages {
        let same = fast_frames.get(s) == slow_frames.get(s) && fast.reports.get(s) == slow.reports.get(s);
        if !same {
            return Some(s as u64 + 1);
        }
    }
    (fast.terminated != slow.terminated).then_some(stages as u64)
}

/// Reference run; `observer` receives each stage's report and configuration.
pub fn naive_reference_run_observed(
    initial: Configuration,
    seed: u64,
    max_stages: u64,
    mut observer: impl FnMut(&StageReport, &Configuration),
) -> RunResult {
    let params = *initial.params();
    let mut cfg = initial.clone();
    let mut reports = Vec::new();
    let mut terminated = false;
    for _ in 0..max_stages.max(1) {
        let frontier: Vec<usize> = (0..cfg.len()).filter(|&u| hopeful(&cfg, u)).collect();
        let mut flips = 0;
        for u in frontier {
            if hopeful(&cfg, u) {
                let t = cfg.get(u);
                cfg.set(u, !t);
                flips += 1;
            }
        }
        cfg.stage += 1;
        let r = report(&cfg, cfg.stage, flips);
        observer(&r, &cfg);
        reports.push(r);
        if flips == 0 {
            terminated = true;
            break;
        }
    }
    RunResult { params, seed, initial, final_config: cfg, reports, terminated }
}
