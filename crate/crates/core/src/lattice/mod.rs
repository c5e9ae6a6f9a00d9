//! Torus geometry, configurations and neighbourhood counts.
//!
//! Nodes are stored densely with the first coordinate varying slowest, so the
//! natural index order coincides with lexicographic order on coordinates:
//! `idx = x*n + y` in 2D and `idx = (x*n + y)*n + z` in 3D.

mod counts;
mod ppm;

pub use counts::{apply_flip, build_counts, window_sums, NeighborCounts};
pub use ppm::{ppm_frame, ppm_frames};

use std::fmt;
use std::ops::Not;
use std::str::FromStr;

use num_rational::Ratio;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Exact intolerance value `p/q`.
pub type Fraction = Ratio<u64>;

/// Parses `"0.44"`, `".5"`, `"1"` or `"3/8"` into an exact fraction.
///
/// Decimals become `digits / 10^k` before reduction, so `"0.44"` is `11/25`.
pub fn parse_fraction(text: &str) -> Result<Fraction> {
    let s = text.trim();
    let bad = || Error::Domain(format!("malformed rational {text:?}"));
    if s.is_empty() {
        return Err(bad());
    }
    if let Some((num, den)) = s.split_once('/') {
        let num: u64 = num.trim().parse().map_err(|_| bad())?;
        let den: u64 = den.trim().parse().map_err(|_| bad())?;
        if den == 0 {
            return Err(bad());
        }
        return Ok(Ratio::new(num, den));
    }
    let (int_part, frac_part) = s.split_once('.').unwrap_or((s, ""));
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
        || (int_part.is_empty() && frac_part.is_empty())
        || frac_part.len() > 18
    {
        return Err(bad());
    }
    let scale = 10u64.pow(frac_part.len() as u32);
    let int_val: u64 = if int_part.is_empty() { 0 } else { int_part.parse().map_err(|_| bad())? };
    let frac_val: u64 = if frac_part.is_empty() { 0 } else { frac_part.parse().map_err(|_| bad())? };
    let num = int_val.checked_mul(scale).and_then(|v| v.checked_add(frac_val)).ok_or_else(bad)?;
    Ok(Ratio::new(num, scale))
}

pub(crate) fn fraction_to_f64(f: Fraction) -> f64 {
    *f.numer() as f64 / *f.denom() as f64
}

pub(crate) mod fraction_serde {
    use super::{parse_fraction, Fraction};
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(f: &Fraction, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}/{}", f.numer(), f.denom()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Fraction, D::Error> {
        let text = String::deserialize(d)?;
        parse_fraction(&text).map_err(D::Error::custom)
    }
}

/// Lattice dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Dim {
    Two,
    Three,
}

impl Dim {
    pub fn rank(self) -> usize {
        match self {
            Dim::Two => 2,
            Dim::Three => 3,
        }
    }
}

impl TryFrom<u8> for Dim {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        match v {
            2 => Ok(Dim::Two),
            3 => Ok(Dim::Three),
            _ => Err(Error::InvalidParams(format!("dimension must be 2 or 3, got {v}"))),
        }
    }
}

impl From<Dim> for u8 {
    fn from(d: Dim) -> u8 {
        d.rank() as u8
    }
}

/// Model parameters: lattice dimension, torus side, neighbourhood radius and
/// the two intolerances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelParams {
    pub dim: Dim,
    pub n: usize,
    pub w: usize,
    #[serde(with = "fraction_serde")]
    pub tau_alpha: Fraction,
    #[serde(with = "fraction_serde")]
    pub tau_beta: Fraction,
}

impl ModelParams {
    pub fn new(dim: Dim, n: usize, w: usize, tau_alpha: Fraction, tau_beta: Fraction) -> Result<Self> {
        let p = ModelParams { dim, n, w, tau_alpha, tau_beta };
        p.validate()?;
        Ok(p)
    }

    /// Convenience constructor for 2D parameters given as decimal strings.
    pub fn two_d(n: usize, w: usize, tau_alpha: &str, tau_beta: &str) -> Result<Self> {
        Self::new(Dim::Two, n, w, parse_fraction(tau_alpha)?, parse_fraction(tau_beta)?)
    }

    pub fn three_d(n: usize, w: usize, tau_alpha: &str, tau_beta: &str) -> Result<Self> {
        Self::new(Dim::Three, n, w, parse_fraction(tau_alpha)?, parse_fraction(tau_beta)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.w == 0 {
            return Err(Error::InvalidParams("w must be positive".into()));
        }
        // a window must never meet itself around the torus
        if self.n <= 2 * (2 * self.w + 1) {
            return Err(Error::InvalidParams(format!(
                "need n > 2(2w+1) = {}, got n = {}",
                2 * (2 * self.w + 1),
                self.n
            )));
        }
        for (name, tau) in [("tau_alpha", self.tau_alpha), ("tau_beta", self.tau_beta)] {
            if tau > Fraction::from_integer(1) {
                return Err(Error::InvalidParams(format!("{name} = {tau} exceeds 1")));
            }
        }
        let nodes = (self.n as u128).checked_pow(self.dim.rank() as u32);
        if nodes.is_none_or(|v| v > u32::MAX as u128) {
            return Err(Error::InvalidParams("lattice too large".into()));
        }
        Ok(())
    }

    pub fn torus(&self) -> Torus {
        Torus::new(self.dim, self.n)
    }

    pub fn tau(&self, ty: NodeType) -> Fraction {
        match ty {
            NodeType::Alpha => self.tau_alpha,
            NodeType::Beta => self.tau_beta,
        }
    }

    pub fn with_taus(mut self, tau_alpha: Fraction, tau_beta: Fraction) -> Result<Self> {
        self.tau_alpha = tau_alpha;
        self.tau_beta = tau_beta;
        self.validate()?;
        Ok(self)
    }
}

/// Size of the Chebyshev neighbourhood, `(2w+1)^dim`.
pub fn neighborhood_size(params: &ModelParams) -> usize {
    (2 * params.w + 1).pow(params.dim.rank() as u32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum NodeType {
    Beta = 0,
    Alpha = 1,
}

impl NodeType {
    pub fn flipped(self) -> Self {
        !self
    }

    pub fn is_alpha(self) -> bool {
        self == NodeType::Alpha
    }

    pub fn symbol(self) -> char {
        match self {
            NodeType::Alpha => 'a',
            NodeType::Beta => 'b',
        }
    }
}

impl Not for NodeType {
    type Output = NodeType;
    fn not(self) -> NodeType {
        match self {
            NodeType::Alpha => NodeType::Beta,
            NodeType::Beta => NodeType::Alpha,
        }
    }
}

impl fmt::Display for NodeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeType::Alpha => "alpha",
            NodeType::Beta => "beta",
        })
    }
}

impl FromStr for NodeType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "alpha" | "a" => Ok(NodeType::Alpha),
            "beta" | "b" => Ok(NodeType::Beta),
            _ => Err(Error::Domain(format!("unknown node type {s:?}"))),
        }
    }
}

/// Coordinates of a node; unused trailing axes are zero.
pub type Coords = [usize; 3];
/// Signed offset between nodes; unused trailing axes are zero.
pub type Offset = [i64; 3];

/// The `n`-periodic lattice in 2 or 3 dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Torus {
    dim: Dim,
    n: usize,
}

impl Torus {
    pub fn new(dim: Dim, n: usize) -> Self {
        Torus { dim, n }
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.dim.rank()
    }

    pub fn side(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.rank() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> Coords {
        let n = self.n;
        match self.dim {
            Dim::Two => [idx / n, idx % n, 0],
            Dim::Three => [idx / (n * n), (idx / n) % n, idx % n],
        }
    }

    #[inline]
    pub fn index(&self, c: Coords) -> usize {
        let n = self.n;
        match self.dim {
            Dim::Two => (c[0] % n) * n + c[1] % n,
            Dim::Three => ((c[0] % n) * n + c[1] % n) * n + c[2] % n,
        }
    }

    #[inline]
    pub fn wrap(&self, v: i64) -> usize {
        v.rem_euclid(self.n as i64) as usize
    }

    /// Node reached from `idx` by the (wrapped) offset `delta`.
    #[inline]
    pub fn shift(&self, idx: usize, delta: Offset) -> usize {
        let c = self.coords(idx);
        let mut out = [0usize; 3];
        for a in 0..self.rank() {
            out[a] = self.wrap(c[a] as i64 + delta[a]);
        }
        self.index(out)
    }

    /// Signed minimal displacement from `from` to `to` along each axis.
    pub fn delta(&self, from: usize, to: usize) -> Offset {
        let a = self.coords(from);
        let b = self.coords(to);
        let n = self.n as i64;
        let mut d = [0i64; 3];
        for ax in 0..self.rank() {
            let mut v = (b[ax] as i64 - a[ax] as i64).rem_euclid(n);
            if v > n / 2 {
                v -= n;
            }
            d[ax] = v;
        }
        d
    }

    /// Chebyshev distance on the torus.
    pub fn cheb_dist(&self, a: usize, b: usize) -> u64 {
        self.delta(a, b).iter().map(|v| v.unsigned_abs()).max().unwrap_or(0)
    }

    /// Squared Euclidean distance on the torus (minimal image).
    pub fn dist2(&self, a: usize, b: usize) -> u64 {
        self.delta(a, b).iter().map(|v| (v * v) as u64).sum()
    }

    /// Calls `f` on every node of the box `center + [lo, hi]` (inclusive,
    /// per active axis), in index order of the offsets.
    #[inline]
    pub fn for_each_in_box(&self, center: usize, lo: Offset, hi: Offset, mut f: impl FnMut(usize)) {
        let c = self.coords(center);
        let n = self.n;
        let start = |ax: usize| self.wrap(c[ax] as i64 + lo[ax]);
        let span = |ax: usize| (hi[ax] - lo[ax] + 1).max(0) as usize;
        match self.dim {
            Dim::Two => {
                let (sx, sy) = (start(0), start(1));
                let (lx, ly) = (span(0), span(1));
                let mut x = sx;
                for _ in 0..lx {
                    let row = x * n;
                    let mut y = sy;
                    for _ in 0..ly {
                        f(row + y);
                        y += 1;
                        if y == n {
                            y = 0;
                        }
                    }
                    x += 1;
                    if x == n {
                        x = 0;
                    }
                }
            }
            Dim::Three => {
                let (sx, sy, sz) = (start(0), start(1), start(2));
                let (lx, ly, lz) = (span(0), span(1), span(2));
                let mut x = sx;
                for _ in 0..lx {
                    let mut y = sy;
                    for _ in 0..ly {
                        let base = (x * n + y) * n;
                        let mut z = sz;
                        for _ in 0..lz {
                            f(base + z);
                            z += 1;
                            if z == n {
                                z = 0;
                            }
                        }
                        y += 1;
                        if y == n {
                            y = 0;
                        }
                    }
                    x += 1;
                    if x == n {
                        x = 0;
                    }
                }
            }
        }
    }

    /// Calls `f` on every node `v` with `||u - v||_inf <= w`.
    #[inline]
    pub fn for_each_in_window(&self, center: usize, w: usize, f: impl FnMut(usize)) {
        let w = w as i64;
        self.for_each_in_box(center, [-w, -w, -w], [w, w, w], f);
    }
}

/// A type assignment for every node of the torus, plus the stage counter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    params: ModelParams,
    cells: Vec<NodeType>,
    pub stage: u64,
}

impl Configuration {
    pub fn uniform(params: ModelParams, ty: NodeType) -> Self {
        let len = params.torus().len();
        Configuration { params, cells: vec![ty; len], stage: 0 }
    }

    pub fn from_cells(params: ModelParams, cells: Vec<NodeType>) -> Result<Self> {
        params.validate()?;
        if cells.len() != params.torus().len() {
            return Err(Error::InvalidParams(format!("expected {} cells, got {}", params.torus().len(), cells.len())));
        }
        Ok(Configuration { params, cells, stage: 0 })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn torus(&self) -> Torus {
        self.params.torus()
    }

    pub fn cells(&self) -> &[NodeType] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    #[inline]
    pub fn get(&self, idx: usize) -> NodeType {
        self.cells[idx]
    }

    #[inline]
    pub fn set(&mut self, idx: usize, ty: NodeType) {
        self.cells[idx] = ty;
    }

    #[inline]
    pub(crate) fn toggle(&mut self, idx: usize) -> NodeType {
        let t = !self.cells[idx];
        self.cells[idx] = t;
        t
    }

    pub fn count(&self, ty: NodeType) -> usize {
        self.cells.iter().filter(|&&c| c == ty).count()
    }

    pub fn alpha_count(&self) -> usize {
        self.count(NodeType::Alpha)
    }

    pub fn alpha_fraction(&self) -> f64 {
        self.alpha_count() as f64 / self.len() as f64
    }

    pub fn is_monochrome(&self, ty: NodeType) -> bool {
        self.cells.iter().all(|&c| c == ty)
    }

    /// Same cells, re-targeted to other intolerances (same geometry).
    pub fn with_params(mut self, params: ModelParams) -> Result<Self> {
        if params.dim != self.params.dim || params.n != self.params.n {
            return Err(Error::ParamsMismatch);
        }
        params.validate()?;
        self.params = params;
        Ok(self)
    }

    /// Copy translated by `shift` (node at `u` moves to `u + shift`).
    pub fn translated(&self, shift: Offset) -> Self {
        let torus = self.torus();
        let mut cells = vec![NodeType::Beta; self.cells.len()];
        for (idx, &c) in self.cells.iter().enumerate() {
            cells[torus.shift(idx, shift)] = c;
        }
        Configuration { params: self.params, cells, stage: self.stage }
    }

    /// Cells packed one bit per node (alpha = 1), least significant bit first.
    pub fn to_bits(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.cells.len().div_ceil(8)];
        for (i, c) in self.cells.iter().enumerate() {
            if c.is_alpha() {
                out[i / 8] |= 1 << (i % 8);
            }
        }
        out
    }

    pub fn from_bits(params: ModelParams, bits: &[u8]) -> Result<Self> {
        let len = params.torus().len();
        if bits.len() != len.div_ceil(8) {
            return Err(Error::InvalidParams("packed cell buffer has the wrong length".into()));
        }
        let cells =
            (0..len).map(|i| if bits[i / 8] >> (i % 8) & 1 == 1 { NodeType::Alpha } else { NodeType::Beta }).collect();
        Self::from_cells(params, cells)
    }
}

/// I.i.d. fair-coin configuration, deterministic in `seed`.
///
/// Draws 64-bit words from `ChaCha8Rng::seed_from_u64(seed)` and assigns one
/// bit per node in index order (bit set means alpha).
pub fn random_config(params: &ModelParams, seed: u64) -> Result<Configuration> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = params.torus().len();
    let mut cells = Vec::with_capacity(len);
    while cells.len() < len {
        let word = rng.next_u64();
        let take = (len - cells.len()).min(64);
        cells.extend((0..take).map(|b| if word >> b & 1 == 1 { NodeType::Alpha } else { NodeType::Beta }));
    }
    Ok(Configuration { params: *params, cells, stage: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p2(n: usize, w: usize) -> ModelParams {
        ModelParams::two_d(n, w, "0.3", "0.3").unwrap()
    }

    #[test]
    fn parses_decimals_exactly() {
        assert_eq!(parse_fraction("0.44").unwrap(), Ratio::new(44, 100));
        assert_eq!(parse_fraction(".5").unwrap(), Ratio::new(1, 2));
        assert_eq!(parse_fraction("1").unwrap(), Ratio::new(1, 1));
        assert_eq!(parse_fraction("3/8").unwrap(), Ratio::new(3, 8));
        assert_eq!(parse_fraction("0.249").unwrap(), Ratio::new(249, 1000));
        for bad in ["", ".", "abc", "0.4.4", "-0.1", "1/0", "0,4"] {
            assert!(parse_fraction(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(ModelParams::two_d(6, 1, "0.3", "0.3").is_err());
        assert!(ModelParams::two_d(7, 1, "0.3", "0.3").is_ok());
        assert!(ModelParams::two_d(20, 1, "1.5", "0.3").is_err());
        assert!(ModelParams::two_d(20, 0, "0.5", "0.3").is_err());
    }

    #[test]
    fn neighbourhood_sizes() {
        assert_eq!(neighborhood_size(&p2(20, 1)), 9);
        assert_eq!(neighborhood_size(&p2(40, 5)), 121);
        assert_eq!(neighborhood_size(&ModelParams::three_d(20, 2, "0.3", "0.3").unwrap()), 125);
    }

    #[test]
    fn random_config_is_deterministic() {
        let p = p2(5 + 2, 1);
        let a = random_config(&p, 11).unwrap();
        let b = random_config(&p, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, random_config(&p, 12).unwrap());
        assert_eq!(a.stage, 0);
    }

    #[test]
    fn cell_count_is_n_pow_dim() {
        // n = 5 violates n > 2(2w+1) for w = 1, so build the geometry directly
        assert_eq!(Torus::new(Dim::Two, 5).len(), 25);
        assert_eq!(Torus::new(Dim::Three, 5).len(), 125);
        let p = p2(7, 1);
        assert_eq!(random_config(&p, 0).unwrap().len(), 49);
    }

    #[test]
    fn alpha_fraction_concentrates() {
        let p = ModelParams::two_d(600, 2, "0.3", "0.3").unwrap();
        for seed in 0..10 {
            let f = random_config(&p, seed).unwrap().alpha_fraction();
            assert!((f - 0.5).abs() < 0.01, "seed {seed}: {f}");
        }
    }

    #[test]
    fn index_order_is_lexicographic() {
        let t = Torus::new(Dim::Three, 4);
        let mut prev = None;
        for x in 0..4 {
            for y in 0..4 {
                for z in 0..4 {
                    let idx = t.index([x, y, z]);
                    assert_eq!(t.coords(idx), [x, y, z]);
                    if let Some(p) = prev {
                        assert!(idx > p);
                    }
                    prev = Some(idx);
                }
            }
        }
    }

    #[test]
    fn negation_is_involution() {
        for t in [NodeType::Alpha, NodeType::Beta] {
            assert_eq!(!!t, t);
            assert_ne!(!t, t);
        }
    }

    #[test]
    fn bit_packing_round_trips() {
        let p = p2(13, 2);
        let c = random_config(&p, 3).unwrap();
        assert_eq!(Configuration::from_bits(p, &c.to_bits()).unwrap(), c);
    }

    #[test]
    fn params_serde_keeps_fractions() {
        let p = ModelParams::two_d(600, 5, "0.44", "0.42").unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"11/25\""), "{s}");
        let back: ModelParams = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}
