//! Trial orchestration: behaviour labels, repeated runs, phase sweeps,
//! Monte Carlo event estimates and planted-structure runs.
//!
//! Every parallel loop derives its randomness from `(master seed, index)` via
//! [`split_seed`] and folds results in index order, so output never depends on
//! scheduling.

use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{run, run_observed, RunOptions, RunResult};
use crate::lattice::{fraction_to_f64, random_config, Configuration, Dim, Fraction, ModelParams, NodeType};
use crate::math::{kappa_2d, kappa_3d, suff_greater, suff_less, Relation};
use crate::structures::{EventEvaluator, EventKind, Region};
use crate::{Error, Result};

/// Derives an independent 64-bit seed for stream `index` of `seed`.
///
/// SplitMix64 finaliser applied to `seed + (index + 1) * φ`, where `φ` is the
/// 64-bit golden-ratio increment.
pub fn split_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorLabel {
    StaticAE,
    AlphaTakeoverAE,
    BetaTakeoverAE,
    AlphaTakeoverTotal,
    BetaTakeoverTotal,
    Unclassified,
}

impl BehaviorLabel {
    pub const ALL: [BehaviorLabel; 6] = [
        BehaviorLabel::StaticAE,
        BehaviorLabel::AlphaTakeoverAE,
        BehaviorLabel::BetaTakeoverAE,
        BehaviorLabel::AlphaTakeoverTotal,
        BehaviorLabel::BetaTakeoverTotal,
        BehaviorLabel::Unclassified,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BehaviorLabel::StaticAE => "static_ae",
            BehaviorLabel::AlphaTakeoverAE => "alpha_ae",
            BehaviorLabel::BetaTakeoverAE => "beta_ae",
            BehaviorLabel::AlphaTakeoverTotal => "alpha_total",
            BehaviorLabel::BetaTakeoverTotal => "beta_total",
            BehaviorLabel::Unclassified => "unclassified",
        }
    }
}

impl fmt::Display for BehaviorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BehaviorLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BehaviorLabel::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown label '{s}'")))
    }
}

/// Label from raw fractions; total beats almost-everywhere beats static.
pub fn classify_fractions(unchanged: f64, alpha_fraction: f64, epsilon: f64) -> BehaviorLabel {
    let bar = 1.0 - epsilon;
    if alpha_fraction == 0.0 {
        BehaviorLabel::BetaTakeoverTotal
    } else if alpha_fraction == 1.0 {
        BehaviorLabel::AlphaTakeoverTotal
    } else if 1.0 - alpha_fraction >= bar {
        BehaviorLabel::BetaTakeoverAE
    } else if alpha_fraction >= bar {
        BehaviorLabel::AlphaTakeoverAE
    } else if unchanged >= bar {
        BehaviorLabel::StaticAE
    } else {
        BehaviorLabel::Unclassified
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 0.5 {
        Ok(())
    } else {
        Err(Error::Domain(format!("epsilon {epsilon} outside (0, 0.5)")))
    }
}

pub fn classify_run(initial: &Configuration, final_config: &Configuration, epsilon: f64) -> Result<BehaviorLabel> {
    check_epsilon(epsilon)?;
    if initial.params() != final_config.params() {
        return Err(Error::ParamsMismatch);
    }
    let same = initial.cells().iter().zip(final_config.cells()).filter(|(a, b)| a == b).count();
    let unchanged = same as f64 / initial.len() as f64;
    let alpha = final_config.alpha_count() as f64 / final_config.len() as f64;
    Ok(classify_fractions(unchanged, alpha, epsilon))
}

pub fn classify_result(result: &RunResult, epsilon: f64) -> Result<BehaviorLabel> {
    classify_run(&result.initial, &result.final_config, epsilon)
}

/// Outcome the main theorems predict for a signature, or `None` in grey zones.
pub fn predict_label(dim: Dim, tau_alpha: f64, tau_beta: f64) -> Option<BehaviorLabel> {
    let (kappa, rel) = match dim {
        Dim::Two => (kappa_2d().value, Relation::TwoD),
        Dim::Three => (kappa_3d().value, Relation::ThreeD),
    };
    let less = |a: f64, b: f64| suff_less(rel, a, b).unwrap_or(false);
    let greater = |a: f64, b: f64| suff_greater(rel, a, b).unwrap_or(false);
    let (a, b) = (tau_alpha, tau_beta);
    if a < 0.25 && b < 0.25 || a > 0.75 && b > 0.75 {
        Some(BehaviorLabel::StaticAE)
    } else if b < 0.5 && 0.5 < a {
        Some(BehaviorLabel::BetaTakeoverTotal)
    } else if a < 0.5 && 0.5 < b {
        Some(BehaviorLabel::AlphaTakeoverTotal)
    } else if kappa < a && a < 0.5 && less(b, a) || 0.5 < b && b < 1.0 - kappa && greater(a, b) {
        Some(BehaviorLabel::BetaTakeoverAE)
    } else if kappa < b && b < 0.5 && less(a, b) || 0.5 < a && a < 1.0 - kappa && greater(b, a) {
        Some(BehaviorLabel::AlphaTakeoverAE)
    } else {
        None
    }
}

/// Intolerance pairs covering every predicted regime in 2D, plus a few grey ones.
pub const CLAUSE_TAU_PAIRS: [(&str, &str); 12] = [
    ("0.2", "0.1"),
    ("0.24", "0.22"),
    ("0.4", "0.3"),
    ("0.45", "0.38"),
    ("0.6", "0.4"),
    ("0.3", "0.7"),
    ("0.6", "0.7"),
    ("0.55", "0.62"),
    ("0.8", "0.9"),
    ("0.76", "0.85"),
    ("0.3", "0.32"),
    ("0.5", "0.5"),
];

/// `"grey"` for `None`, the label name otherwise.
pub fn prediction_name(p: Option<BehaviorLabel>) -> &'static str {
    p.map_or("grey", BehaviorLabel::name)
}

/// Wilson score interval for `successes / trials` at normal quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

const Z95: f64 = 1.959_963_984_540_054;

fn mean_interval(values: &[f64]) -> (f64, (f64, f64)) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, (mean, mean));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let half = Z95 * (var / n).sqrt();
    (mean, ((mean - half).max(0.0), (mean + half).min(1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub stages: u64,
    pub unchanged_fraction: f64,
    pub alpha_fraction: f64,
    pub terminated: bool,
    pub label: BehaviorLabel,
}

impl TrialRecord {
    pub fn from_result(r: &RunResult, epsilon: f64) -> Result<Self> {
        Ok(TrialRecord {
            seed: r.seed,
            stages: r.stages(),
            unchanged_fraction: r.unchanged_fraction(),
            alpha_fraction: r.final_config.alpha_fraction(),
            terminated: r.terminated,
            label: classify_result(r, epsilon)?,
        })
    }
}

/// Label tallies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVotes {
    pub static_ae: u64,
    pub alpha_ae: u64,
    pub beta_ae: u64,
    pub alpha_total: u64,
    pub beta_total: u64,
    pub unclassified: u64,
}

impl LabelVotes {
    fn slot(&mut self, l: BehaviorLabel) -> &mut u64 {
        match l {
            BehaviorLabel::StaticAE => &mut self.static_ae,
            BehaviorLabel::AlphaTakeoverAE => &mut self.alpha_ae,
            BehaviorLabel::BetaTakeoverAE => &mut self.beta_ae,
            BehaviorLabel::AlphaTakeoverTotal => &mut self.alpha_total,
            BehaviorLabel::BetaTakeoverTotal => &mut self.beta_total,
            BehaviorLabel::Unclassified => &mut self.unclassified,
        }
    }

    pub fn add(&mut self, l: BehaviorLabel) {
        *self.slot(l) += 1;
    }

    pub fn get(&self, l: BehaviorLabel) -> u64 {
        *self.clone().slot(l)
    }

    pub fn total(&self) -> u64 {
        BehaviorLabel::ALL.iter().map(|&l| self.get(l)).sum()
    }

    /// Most frequent label; ties go to the earlier entry of [`BehaviorLabel::ALL`].
    pub fn majority(&self) -> BehaviorLabel {
        let mut best = BehaviorLabel::Unclassified;
        let mut votes = 0;
        for l in BehaviorLabel::ALL {
            if self.get(l) > votes {
                best = l;
                votes = self.get(l);
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub runs: u64,
    pub mean_unchanged_fraction: f64,
    pub mean_alpha_fraction_final: f64,
    pub all_beta_count: u64,
    pub all_alpha_count: u64,
    pub terminated_count: u64,
    pub unchanged_ci95: (f64, f64),
    pub alpha_fraction_ci95: (f64, f64),
    pub all_beta_ci95: (f64, f64),
    pub all_alpha_ci95: (f64, f64),
    pub votes: LabelVotes,
    pub records: Vec<TrialRecord>,
}

impl TrialStats {
    pub fn from_records(records: Vec<TrialRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidParams("no trials".into()));
        }
        let runs = records.len() as u64;
        let unchanged: Vec<f64> = records.iter().map(|r| r.unchanged_fraction).collect();
        let alpha: Vec<f64> = records.iter().map(|r| r.alpha_fraction).collect();
        let (mean_unchanged_fraction, unchanged_ci95) = mean_interval(&unchanged);
        let (mean_alpha_fraction_final, alpha_fraction_ci95) = mean_interval(&alpha);
        let all_beta_count = records.iter().filter(|r| r.alpha_fraction == 0.0).count() as u64;
        let all_alpha_count = records.iter().filter(|r| r.alpha_fraction == 1.0).count() as u64;
        let mut votes = LabelVotes::default();
        records.iter().for_each(|r| votes.add(r.label));
        Ok(TrialStats {
            runs,
            mean_unchanged_fraction,
            mean_alpha_fraction_final,
            all_beta_count,
            all_alpha_count,
            terminated_count: records.iter().filter(|r| r.terminated).count() as u64,
            unchanged_ci95,
            alpha_fraction_ci95,
            all_beta_ci95: wilson_interval(all_beta_count, runs, Z95),
            all_alpha_ci95: wilson_interval(all_alpha_count, runs, Z95),
            votes,
            records,
        })
    }
}

/// One independent run per seed. Runs that hit the stage cap are recorded as
/// not terminated.
pub fn run_trials(params: &ModelParams, seeds: &[u64], epsilon: f64, opts: &RunOptions) -> Result<TrialStats> {
    check_epsilon(epsilon)?;
    params.validate()?;
    if seeds.is_empty() {
        return Err(Error::InvalidParams("need at least one seed".into()));
    }
    let records = seeds
        .par_iter()
        .map(|&s| TrialRecord::from_result(&run(params, s, opts)?, epsilon))
        .collect::<Result<Vec<_>>>()?;
    TrialStats::from_records(records)
}

pub const TRIALS_HEADER: [&str; 5] = ["seed", "stages", "unchanged_fraction", "alpha_fraction", "terminated"];

pub fn trials_csv(records: &[TrialRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRIALS_HEADER).expect("in-memory write");
    for r in records {
        w.write_record([
            r.seed.to_string(),
            r.stages.to_string(),
            r.unchanged_fraction.to_string(),
            r.alpha_fraction.to_string(),
            r.terminated.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

/// Cartesian product of two intolerance lists, `tau_alpha` major.
pub fn tau_grid(alphas: &[Fraction], betas: &[Fraction]) -> Vec<(Fraction, Fraction)> {
    alphas.iter().flat_map(|&a| betas.iter().map(move |&b| (a, b))).collect()
}

/// Run seeds for one sweep cell.
pub fn cell_seeds(master_seed: u64, cell: usize, count: usize) -> Vec<u64> {
    let base = split_seed(master_seed, cell as u64);
    (0..count as u64).map(|j| split_seed(base, j)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    #[serde(with = "crate::lattice::fraction_serde")]
    pub tau_alpha: Fraction,
    #[serde(with = "crate::lattice::fraction_serde")]
    pub tau_beta: Fraction,
    pub label: BehaviorLabel,
    pub runs: u64,
    pub votes: LabelVotes,
    pub predicted: Option<BehaviorLabel>,
}

/// Majority label per `(τ_α, τ_β)` cell, each with `seeds_per_cell` runs.
pub fn sweep_phase(
    grid: &[(Fraction, Fraction)],
    base: &ModelParams,
    seeds_per_cell: usize,
    epsilon: f64,
    master_seed: u64,
    opts: &RunOptions,
) -> Result<Vec<PhaseCell>> {
    check_epsilon(epsilon)?;
    if seeds_per_cell == 0 {
        return Err(Error::InvalidParams("need at least one seed per cell".into()));
    }
    let cells = grid.iter().map(|&(a, b)| base.with_taus(a, b)).collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| cell_seeds(master_seed, c, seeds_per_cell).into_iter().map(move |s| (c, s)))
        .collect();
    let labels = jobs
        .par_iter()
        .map(|&(c, s)| classify_result(&run(&cells[c], s, opts)?, epsilon))
        .collect::<Result<Vec<_>>>()?;
    Ok(cells
        .iter()
        .enumerate()
        .map(|(c, p)| {
            let mut votes = LabelVotes::default();
            labels[c * seeds_per_cell..(c + 1) * seeds_per_cell].iter().for_each(|&l| votes.add(l));
            PhaseCell {
                tau_alpha: p.tau_alpha,
                tau_beta: p.tau_beta,
                label: votes.majority(),
                runs: seeds_per_cell as u64,
                votes,
                predicted: predict_label(p.dim, fraction_to_f64(p.tau_alpha), fraction_to_f64(p.tau_beta)),
            }
        })
        .collect())
}

pub const SWEEP_HEADER: [&str; 11] = [
    "tau_alpha",
    "tau_beta",
    "label",
    "runs",
    "static_votes",
    "alpha_ae_votes",
    "beta_ae_votes",
    "alpha_total_votes",
    "beta_total_votes",
    "unclassified_votes",
    "predicted",
];

fn decimal(f: Fraction) -> String {
    let v = fraction_to_f64(f);
    let s = format!("{v}");
    if Fraction::new((v * 1e12).round() as u64, 1_000_000_000_000) == f {
        s
    } else {
        f.to_string()
    }
}

pub fn phase_csv(cells: &[PhaseCell]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_HEADER).expect("in-memory write");
    for c in cells {
        let v = &c.votes;
        w.write_record([
            decimal(c.tau_alpha),
            decimal(c.tau_beta),
            c.label.to_string(),
            c.runs.to_string(),
            v.static_ae.to_string(),
            v.alpha_ae.to_string(),
            v.beta_ae.to_string(),
            v.alpha_total.to_string(),
            v.beta_total.to_string(),
            v.unclassified.to_string(),
            prediction_name(c.predicted).to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
    pub std_error: f64,
    pub ci95: (f64, f64),
}

impl Estimate {
    fn new(successes: u64, trials: u64) -> Self {
        let p = successes as f64 / trials as f64;
        Estimate {
            successes,
            trials,
            estimate: p,
            std_error: (p * (1.0 - p) / trials as f64).sqrt(),
            ci95: wilson_interval(successes, trials, Z95),
        }
    }

    /// `|estimate - p| <= k σ`, with `σ` taken at the reference value `p`.
    pub fn within_sigmas(&self, p: f64, k: f64) -> bool {
        let sigma = (p * (1.0 - p) / self.trials as f64).sqrt();
        (self.estimate - p).abs() <= k * sigma
    }
}

const CHUNK: u64 = 8192;

/// Fraction of fresh fair-coin patches on which `kind` holds at the centre.
///
/// Each trial fills a small torus of side `4w+3`, the smallest admissible one,
/// which contains every event window without self-overlap. Trials are split
/// into chunks of 8192, chunk `i` drawing from `split_seed(seed, i)`.
pub fn estimate_event_prob(kind: EventKind, params: &ModelParams, trials: u64, seed: u64) -> Result<Estimate> {
    if trials == 0 {
        return Err(Error::InvalidParams("need at least one trial".into()));
    }
    let patch = ModelParams::new(params.dim, 4 * params.w + 3, params.w, params.tau_alpha, params.tau_beta)?;
    let torus = patch.torus();
    let eval = EventEvaluator::new(torus, patch.w, kind)?;
    let center = torus.index([patch.n / 2; 3]);
    let chunks = trials.div_ceil(CHUNK);
    let successes: u64 = (0..chunks)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, i));
            let mut config = Configuration::uniform(patch, NodeType::Beta);
            let count = CHUNK.min(trials - i * CHUNK);
            let mut hits = 0;
            for _ in 0..count {
                let mut word = 0u64;
                for v in 0..config.len() {
                    if v % 64 == 0 {
                        word = rng.next_u64();
                    }
                    config.set(v, if word >> (v % 64) & 1 == 1 { NodeType::Alpha } else { NodeType::Beta });
                }
                hits += eval.holds(&config, center) as u64;
            }
            hits
        })
        .sum();
    Ok(Estimate::new(successes, trials))
}

/// A region overwritten with one type before the run starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plant {
    pub region: Region,
    pub ty: NodeType,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedRun {
    pub result: RunResult,
    pub center: usize,
    /// Monochrome radius about `center` after planting and after each stage.
    pub radius_trace: Vec<Option<u64>>,
}

/// Largest integer `r` with `C†(center, r)` entirely of type `ty`, capped at
/// `n/2`; `None` when `center` itself has the other type.
pub fn mono_radius(config: &Configuration, center: usize, ty: NodeType) -> Option<u64> {
    if config.get(center) != ty {
        return None;
    }
    let torus = config.torus();
    let cap = (torus.side() / 2) as u64;
    let nearest = (0..config.len()).filter(|&v| config.get(v) != ty).map(|v| torus.dist2(center, v)).min();
    Some(match nearest {
        None => cap,
        Some(d2) => (d2 - 1).isqrt().min(cap),
    })
}

fn plant_center(region: &Region, params: &ModelParams) -> usize {
    let torus = params.torus();
    match region {
        Region::Disc { center, .. } => *center,
        Region::Box { corner, extent } => {
            let mut c = [0usize; 3];
            for ax in 0..3 {
                c[ax] = corner[ax] + extent[ax].min(params.n) / 2;
            }
            torus.index(c)
        }
        Region::List { nodes } => nodes.get(nodes.len() / 2).copied().unwrap_or(0),
    }
}

/// Random configuration from `seed`, overwritten by `plant`, then run.
pub fn plant_and_run(params: &ModelParams, plant: &Plant, seed: u64, opts: &RunOptions) -> Result<PlantedRun> {
    let mut config = random_config(params, seed)?;
    let torus = config.torus();
    for v in plant.region.nodes(torus) {
        if v >= config.len() {
            return Err(Error::InvalidParams(format!("plant node {v} outside the torus")));
        }
        config.set(v, plant.ty);
    }
    let center = plant_center(&plant.region, params);
    let mut radius_trace = vec![mono_radius(&config, center, plant.ty)];
    let result = run_observed(config, seed, opts, |view| radius_trace.push(mono_radius(view.config, center, plant.ty)));
    Ok(PlantedRun { result, center, radius_trace })
}

#[cfg(test)]
mod tests {

    #[test]
    fn clause_pairs_cover_every_prediction() {
        let mut seen: Vec<&str> = CLAUSE_TAU_PAIRS
            .iter()
            .map(|(a, b)| prediction_name(predict_label(Dim::Two, a.parse().unwrap(), b.parse().unwrap())))
            .collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen, ["alpha_ae", "alpha_total", "beta_ae", "beta_total", "grey", "static_ae"]);
    }

    use super::*;
    use crate::lattice::parse_fraction;
    use crate::math::{prob_event_exact, ExactEvent};
    use crate::structures::EventFamily;
    use proptest::prelude::*;

    fn frac(s: &str) -> Fraction {
        parse_fraction(s).unwrap()
    }

    #[test]
    fn split_seed_streams_differ() {
        let mut seen = std::collections::HashSet::new();
        for s in 0..20u64 {
            for i in 0..50u64 {
                assert!(seen.insert(split_seed(s, i)));
            }
        }
        assert_eq!(split_seed(7, 3), split_seed(7, 3));
    }

    #[test]
    fn labels_for_simple_outcomes() {
        let p = ModelParams::two_d(20, 2, "0.4", "0.3").unwrap();
        let c = random_config(&p, 1).unwrap();
        assert_eq!(classify_run(&c, &c, 0.1).unwrap(), BehaviorLabel::StaticAE);
        let beta = Configuration::uniform(p, NodeType::Beta);
        assert_eq!(classify_run(&c, &beta, 0.1).unwrap(), BehaviorLabel::BetaTakeoverTotal);
        let alpha = Configuration::uniform(p, NodeType::Alpha);
        assert_eq!(classify_run(&c, &alpha, 0.1).unwrap(), BehaviorLabel::AlphaTakeoverTotal);
        assert!(classify_run(&c, &c, 0.6).is_err());
        let q = p.with_taus(frac("0.3"), frac("0.3")).unwrap();
        assert_eq!(classify_run(&c, &Configuration::uniform(q, NodeType::Beta), 0.1), Err(Error::ParamsMismatch));
    }

    #[test]
    fn fraction_precedence() {
        assert_eq!(classify_fractions(0.99, 0.0, 0.1), BehaviorLabel::BetaTakeoverTotal);
        assert_eq!(classify_fractions(0.99, 0.05, 0.1), BehaviorLabel::BetaTakeoverAE);
        assert_eq!(classify_fractions(0.95, 0.5, 0.1), BehaviorLabel::StaticAE);
        assert_eq!(classify_fractions(0.5, 0.5, 0.1), BehaviorLabel::Unclassified);
        assert_eq!(classify_fractions(0.5, 0.8, 0.25), BehaviorLabel::AlphaTakeoverAE);
    }

    #[test]
    fn predictions_by_clause() {
        let d = Dim::Two;
        assert_eq!(predict_label(d, 0.2, 0.1), Some(BehaviorLabel::StaticAE));
        assert_eq!(predict_label(d, 0.8, 0.9), Some(BehaviorLabel::StaticAE));
        assert_eq!(predict_label(d, 0.6, 0.4), Some(BehaviorLabel::BetaTakeoverTotal));
        assert_eq!(predict_label(d, 0.4, 0.6), Some(BehaviorLabel::AlphaTakeoverTotal));
        assert_eq!(predict_label(d, 0.44, 0.40), Some(BehaviorLabel::BetaTakeoverAE));
        assert_eq!(predict_label(d, 0.40, 0.44), Some(BehaviorLabel::AlphaTakeoverAE));
        assert_eq!(predict_label(d, 0.56, 0.60), Some(BehaviorLabel::AlphaTakeoverAE));
        assert_eq!(predict_label(d, 0.60, 0.56), Some(BehaviorLabel::BetaTakeoverAE));
        assert_eq!(predict_label(d, 0.30, 0.28), None);
        assert_eq!(predict_label(d, 0.44, 0.435), None);
        // the 3D relation is stricter
        assert_eq!(predict_label(Dim::Three, 0.44, 0.40), None);
        assert_eq!(predict_label(Dim::Three, 0.45, 0.40), Some(BehaviorLabel::BetaTakeoverAE));
        assert_eq!(prediction_name(None), "grey");
    }

    #[test]
    fn wilson_contains_point_estimate() {
        let (lo, hi) = wilson_interval(30, 100, Z95);
        assert!(lo < 0.3 && 0.3 < hi);
        assert!((lo - 0.2189).abs() < 1e-3 && (hi - 0.3958).abs() < 1e-3);
        assert_eq!(wilson_interval(0, 10, Z95).0, 0.0);
    }

    #[test]
    fn votes_majority() {
        let mut v = LabelVotes::default();
        v.add(BehaviorLabel::BetaTakeoverAE);
        v.add(BehaviorLabel::BetaTakeoverAE);
        v.add(BehaviorLabel::StaticAE);
        assert_eq!(v.majority(), BehaviorLabel::BetaTakeoverAE);
        assert_eq!(v.total(), 3);
        v.add(BehaviorLabel::StaticAE);
        assert_eq!(v.majority(), BehaviorLabel::StaticAE);
    }

    #[test]
    fn tiny_intolerance_is_static() {
        let p = ModelParams::two_d(200, 2, "0.01", "0.01").unwrap();
        let s = run_trials(&p, &[5], 0.1, &RunOptions::default()).unwrap();
        assert_eq!(s.runs, 1);
        assert_eq!(s.mean_unchanged_fraction, 1.0);
        assert_eq!(s.votes.static_ae, 1);
    }

    #[test]
    fn duplicate_seeds_repeat_records() {
        let p = ModelParams::two_d(40, 2, "0.42", "0.3").unwrap();
        let once = run_trials(&p, &[3, 4], 0.1, &RunOptions::default()).unwrap();
        let twice = run_trials(&p, &[3, 4, 3, 4], 0.1, &RunOptions::default()).unwrap();
        assert_eq!(&twice.records[..2], &once.records[..]);
        assert_eq!(&twice.records[2..], &once.records[..]);
        assert_eq!(twice.mean_alpha_fraction_final, once.mean_alpha_fraction_final);
        assert_eq!(twice.all_beta_count, 2 * once.all_beta_count);
    }

    #[test]
    fn trials_csv_header() {
        let p = ModelParams::two_d(20, 1, "0.3", "0.3").unwrap();
        let s = run_trials(&p, &[1, 2], 0.1, &RunOptions::default()).unwrap();
        let text = trials_csv(&s.records);
        assert!(text.starts_with("seed,stages,unchanged_fraction,alpha_fraction,terminated\n"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn sweep_is_deterministic_and_labels_cells() {
        let base = ModelParams::two_d(60, 2, "0.1", "0.1").unwrap();
        let grid = tau_grid(&[frac("0.1"), frac("0.7")], &[frac("0.1"), frac("0.3")]);
        let a = sweep_phase(&grid, &base, 2, 0.1, 11, &RunOptions::default()).unwrap();
        let b = sweep_phase(&grid, &base, 2, 0.1, 11, &RunOptions::default()).unwrap();
        assert_eq!(phase_csv(&a), phase_csv(&b));
        assert_eq!(a.len(), 4);
        assert_eq!(a[0].label, BehaviorLabel::StaticAE);
        assert_eq!(a[0].predicted, Some(BehaviorLabel::StaticAE));
        assert_eq!(a[3].predicted, Some(BehaviorLabel::BetaTakeoverTotal));
        let csv = phase_csv(&a);
        assert!(csv.starts_with(&SWEEP_HEADER.join(",")));
        assert!(csv.contains("\n0.1,0.3,"));
    }

    #[test]
    fn event_estimate_matches_exact_value() {
        let p = ModelParams::two_d(20, 1, "0.25", "0.25").unwrap();
        let uh = EventKind::new(EventFamily::Uh, NodeType::Alpha, frac("1/4")).unwrap();
        let est = estimate_event_prob(uh, &p, 100_000, 3).unwrap();
        let exact = prob_event_exact(ExactEvent::Uh, 1, frac("1/4"));
        assert!(est.within_sigmas(exact, 4.0), "{est:?} vs {exact}");
        assert_eq!(estimate_event_prob(uh, &p, 20_000, 3).unwrap(), estimate_event_prob(uh, &p, 20_000, 3).unwrap());
    }

    #[test]
    fn rotated_estimate_dominates_lower() {
        let p = ModelParams::two_d(20, 2, "0.4", "0.4").unwrap();
        let tau = frac("0.36");
        let ln =
            estimate_event_prob(EventKind::new(EventFamily::Ln, NodeType::Alpha, tau).unwrap(), &p, 30_000, 5).unwrap();
        let rn =
            estimate_event_prob(EventKind::new(EventFamily::Rn, NodeType::Alpha, tau).unwrap(), &p, 30_000, 5).unwrap();
        assert!(rn.successes >= ln.successes, "{rn:?} {ln:?}");
    }

    #[test]
    fn whole_torus_plant_terminates_at_once() {
        let p = ModelParams::two_d(30, 2, "0.6", "0.4").unwrap();
        let plant = Plant { region: Region::whole(p.torus()), ty: NodeType::Beta };
        let out = plant_and_run(&p, &plant, 1, &RunOptions::default()).unwrap();
        assert_eq!(out.result.stages(), 1);
        assert!(out.result.final_config.is_monochrome(NodeType::Beta));
        assert_eq!(out.radius_trace, vec![Some(15), Some(15)]);
    }

    #[test]
    fn mono_radius_examples() {
        let p = ModelParams::two_d(30, 2, "0.6", "0.4").unwrap();
        let t = p.torus();
        let mut c = Configuration::uniform(p, NodeType::Beta);
        let center = t.index([10, 10, 0]);
        c.set(t.index([13, 14, 0]), NodeType::Alpha);
        assert_eq!(mono_radius(&c, center, NodeType::Beta), Some(4));
        c.set(t.index([10, 12, 0]), NodeType::Alpha);
        assert_eq!(mono_radius(&c, center, NodeType::Beta), Some(1));
        assert_eq!(mono_radius(&c, center, NodeType::Alpha), None);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn at_most_one_total_label(u in 0.0f64..=1.0, a in 0.0f64..=1.0, e in 0.01f64..0.49) {
            let l = classify_fractions(u, a, e);
            if a > 0.0 && a < 1.0 {
                prop_assert!(l != BehaviorLabel::AlphaTakeoverTotal && l != BehaviorLabel::BetaTakeoverTotal);
            }
            if l == BehaviorLabel::StaticAE {
                prop_assert!(u >= 1.0 - e);
            }
        }

        #[test]
        fn wilson_is_ordered(s in 0u64..1000, extra in 0u64..1000) {
            let (lo, hi) = wilson_interval(s, s + extra + 1, Z95);
            let p = s as f64 / (s + extra + 1) as f64;
            prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
        }
    }
}
