//! Threshold events on windows around a node.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::lattice::{Configuration, Dim, Fraction, NodeType, Offset, Torus};
use crate::math::extended_side;
use crate::{Error, Result};

/// Number of directions sampled for the partial-neighbourhood families.
pub const DEFAULT_DIRECTIONS: usize = 360;

/// Tolerance when comparing projections that should tie.
const TIE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventFamily {
    Uh,
    Ruh,
    Ln,
    Rn,
    Pn,
    Ju,
    Rju,
    Euh,
    Eju,
    Pn3d,
}

impl EventFamily {
    pub const ALL: [EventFamily; 10] = [
        EventFamily::Uh,
        EventFamily::Ruh,
        EventFamily::Ln,
        EventFamily::Rn,
        EventFamily::Pn,
        EventFamily::Ju,
        EventFamily::Rju,
        EventFamily::Euh,
        EventFamily::Eju,
        EventFamily::Pn3d,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EventFamily::Uh => "uh",
            EventFamily::Ruh => "ruh",
            EventFamily::Ln => "ln",
            EventFamily::Rn => "rn",
            EventFamily::Pn => "pn",
            EventFamily::Ju => "ju",
            EventFamily::Rju => "rju",
            EventFamily::Euh => "euh",
            EventFamily::Eju => "eju",
            EventFamily::Pn3d => "pn3d",
        }
    }

    pub fn needs_gamma(self) -> bool {
        matches!(self, EventFamily::Pn | EventFamily::Pn3d)
    }

    /// The only dimension the event is defined in, if restricted.
    pub fn required_dim(self) -> Option<Dim> {
        match self {
            EventFamily::Uh | EventFamily::Ju => None,
            EventFamily::Ruh | EventFamily::Rju | EventFamily::Ln | EventFamily::Rn | EventFamily::Pn => Some(Dim::Two),
            EventFamily::Euh | EventFamily::Eju | EventFamily::Pn3d => Some(Dim::Three),
        }
    }
}

impl fmt::Display for EventFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EventFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EventFamily::ALL
            .into_iter()
            .find(|e| e.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidParams(format!("unknown event '{s}'")))
    }
}

/// An event together with its type and thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventKind {
    pub family: EventFamily,
    pub ty: NodeType,
    #[serde(with = "crate::lattice::fraction_serde")]
    pub tau: Fraction,
    pub gamma: Option<Fraction>,
}

impl EventKind {
    pub fn new(family: EventFamily, ty: NodeType, tau: Fraction) -> Result<Self> {
        Self::build(family, ty, tau, None)
    }

    pub fn partial(family: EventFamily, ty: NodeType, tau: Fraction, gamma: Fraction) -> Result<Self> {
        Self::build(family, ty, tau, Some(gamma))
    }

    fn build(family: EventFamily, ty: NodeType, tau: Fraction, gamma: Option<Fraction>) -> Result<Self> {
        if tau > Fraction::from_integer(1) {
            return Err(Error::InvalidParams(format!("tau {tau} exceeds 1")));
        }
        match (family.needs_gamma(), gamma) {
            (true, Some(g)) if g > Fraction::new(1, 2) && g < Fraction::from_integer(1) => {}
            (true, Some(g)) => return Err(Error::InvalidParams(format!("gamma {g} outside (1/2, 1)"))),
            (true, None) => return Err(Error::InvalidParams(format!("{family} needs gamma"))),
            (false, Some(_)) => return Err(Error::InvalidParams(format!("{family} takes no gamma"))),
            (false, None) => {}
        }
        Ok(EventKind { family, ty, tau, gamma })
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}, tau={}", self.family, self.ty, self.tau)?;
        if let Some(g) = self.gamma {
            write!(f, ", gamma={g}")?;
        }
        f.write_str("]")
    }
}

fn cross(d: Offset, v: Offset) -> i64 {
    d[0] * v[1] - d[1] * v[0]
}

fn dot(d: Offset, v: Offset) -> i64 {
    d[0] * v[0] + d[1] * v[1]
}

fn square_offsets(w: i64) -> Vec<Offset> {
    let mut out = Vec::new();
    for x in -w..=w {
        for y in -w..=w {
            out.push([x, y, 0]);
        }
    }
    out
}

fn cube_offsets(w: i64) -> Vec<Offset> {
    let mut out = Vec::new();
    for x in -w..=w {
        for y in -w..=w {
            for z in -w..=w {
                out.push([x, y, z]);
            }
        }
    }
    out
}

/// `{(x', y') ∈ N(u) : y' < y or (y' = y and x' <= x)}` as offsets.
pub fn lower_neighborhood(w: usize) -> Vec<Offset> {
    square_offsets(w as i64).into_iter().filter(|v| v[1] < 0 || (v[1] == 0 && v[0] <= 0)).collect()
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// All distinct rotated lower neighbourhoods of the origin, each a sorted offset list.
///
/// A defining line through the origin contributes the open half-plane on one
/// side plus the closed ray on one side. Lines through no other node of `N(u)`
/// give sets already produced by a lattice direction, so it is enough to range
/// over primitive directions of `N(u)` and both ray choices.
pub fn rotated_lower_neighborhoods(w: usize) -> Vec<Vec<Offset>> {
    let all = square_offsets(w as i64);
    let mut dirs: Vec<Offset> = all
        .iter()
        .filter(|v| **v != [0, 0, 0])
        .map(|v| {
            let g = gcd(v[0], v[1]);
            [v[0] / g, v[1] / g, 0]
        })
        .collect();
    dirs.sort_unstable();
    dirs.dedup();
    let mut sets = Vec::with_capacity(2 * dirs.len());
    for d in dirs {
        for sign in [1i64, -1] {
            let set: Vec<Offset> = all
                .iter()
                .copied()
                .filter(|&v| {
                    let c = cross(d, v);
                    v == [0, 0, 0] || c > 0 || (c == 0 && sign * dot(d, v) > 0)
                })
                .collect();
            sets.push(set);
        }
    }
    sets.sort();
    sets.dedup();
    sets
}

/// Nodes whose projection is among the `ceil(γ |pts|)` largest, ties included.
fn top_fraction(pts: &[Offset], normal: [f64; 3], gamma: Fraction) -> Vec<Offset> {
    let k = (*gamma.numer() as usize * pts.len()).div_ceil(*gamma.denom() as usize).clamp(1, pts.len());
    let proj = |v: &Offset| v[0] as f64 * normal[0] + v[1] as f64 * normal[1] + v[2] as f64 * normal[2];
    let mut values: Vec<f64> = pts.iter().map(proj).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    let cut = values[k - 1] - TIE_EPS;
    let mut set: Vec<Offset> = pts.iter().copied().filter(|v| proj(v) >= cut).collect();
    set.sort_unstable();
    set
}

/// Half-plane sections of `N(u)` holding a `γ` share of its nodes, one per
/// direction at `k_dir` equally spaced angles, deduplicated.
pub fn partial_neighborhoods(w: usize, gamma: Fraction, k_dir: usize) -> Vec<Vec<Offset>> {
    let pts = square_offsets(w as i64);
    let mut sets: Vec<Vec<Offset>> = (0..k_dir.max(1))
        .map(|i| {
            let theta = std::f64::consts::TAU * i as f64 / k_dir.max(1) as f64;
            top_fraction(&pts, [theta.cos(), theta.sin(), 0.0], gamma)
        })
        .collect();
    sets.sort();
    sets.dedup();
    sets
}

/// The 3D analogue, with normals on a Fibonacci sphere of `k_dir` points.
pub fn partial_neighborhoods_3d(w: usize, gamma: Fraction, k_dir: usize) -> Vec<Vec<Offset>> {
    let pts = cube_offsets(w as i64);
    let k = k_dir.max(2);
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let mut sets: Vec<Vec<Offset>> = (0..k)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / k as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            top_fraction(&pts, [r * phi.cos(), r * phi.sin(), z], gamma)
        })
        .collect();
    sets.sort();
    sets.dedup();
    sets
}

#[derive(Debug, Clone)]
enum Shape {
    /// Count over a box; holds when `count < τ·m` and, with slack, `count + slack >= τ·m`.
    Box { lo: Offset, hi: Offset, m: u64, slack: Option<u64> },
    /// Holds when some set carries at least `τ·m` nodes of the type.
    Family { half: i64, sets: Vec<Vec<usize>>, m: u64 },
}

/// An event prepared for repeated evaluation on one torus geometry.
#[derive(Debug, Clone)]
pub struct EventEvaluator {
    kind: EventKind,
    torus: Torus,
    shape: Shape,
}

impl EventEvaluator {
    pub fn new(torus: Torus, w: usize, kind: EventKind) -> Result<Self> {
        Self::with_directions(torus, w, kind, DEFAULT_DIRECTIONS)
    }

    pub fn with_directions(torus: Torus, w: usize, kind: EventKind, k_dir: usize) -> Result<Self> {
        if let Some(dim) = kind.family.required_dim() {
            if dim != torus.dim() {
                return Err(Error::DimensionMismatch { expected: dim.rank(), actual: torus.rank() });
            }
        }
        let wi = w as i64;
        let s = 2 * w as u64 + 1;
        let e = 3 * w as u64 + 1;
        let full = s.pow(torus.rank() as u32);
        let cube = |r: i64| ([-r; 3], [r; 3]);
        let family = |sets: Vec<Vec<Offset>>, m: u64| {
            let side = 2 * wi + 1;
            let local = |v: &Offset| v[..torus.rank()].iter().fold(0, |i, c| i * side + c + wi) as usize;
            Shape::Family { half: wi, sets: sets.iter().map(|s| s.iter().map(local).collect()).collect(), m }
        };
        let shape = match kind.family {
            EventFamily::Uh | EventFamily::Ju => {
                let (lo, hi) = cube(wi);
                let slack = (kind.family == EventFamily::Ju).then_some(s);
                Shape::Box { lo, hi, m: full, slack }
            }
            EventFamily::Ruh | EventFamily::Rju => {
                let slack = (kind.family == EventFamily::Rju).then_some(e);
                Shape::Box { lo: [-wi, -wi, 0], hi: [2 * wi, wi, 0], m: s * e, slack }
            }
            EventFamily::Euh | EventFamily::Eju => {
                let r = (extended_side(w as u64) as i64 - 1) / 2;
                let (lo, hi) = cube(r);
                let slack = (kind.family == EventFamily::Eju).then_some(e * e);
                Shape::Box { lo, hi, m: e * e * e, slack }
            }
            EventFamily::Ln => family(vec![lower_neighborhood(w)], full),
            EventFamily::Rn => family(rotated_lower_neighborhoods(w), full),
            EventFamily::Pn => family(partial_neighborhoods(w, kind.gamma.expect("validated"), k_dir), full),
            EventFamily::Pn3d => family(partial_neighborhoods_3d(w, kind.gamma.expect("validated"), k_dir), full),
        };
        Ok(EventEvaluator { kind, torus, shape })
    }

    pub fn kind(&self) -> EventKind {
        self.kind
    }

    /// Number of candidate sets for existential events, 1 otherwise.
    pub fn family_size(&self) -> usize {
        match &self.shape {
            Shape::Box { .. } => 1,
            Shape::Family { sets, .. } => sets.len(),
        }
    }

    /// `count ≥ τ·m`, exactly.
    fn reaches(&self, count: u64, m: u64) -> bool {
        count as u128 * *self.kind.tau.denom() as u128 >= *self.kind.tau.numer() as u128 * m as u128
    }

    pub fn holds(&self, config: &Configuration, u: usize) -> bool {
        let ty = self.kind.ty;
        match &self.shape {
            Shape::Box { lo, hi, m, slack } => {
                let mut count = 0u64;
                self.torus.for_each_in_box(u, *lo, *hi, |v| count += (config.get(v) == ty) as u64);
                !self.reaches(count, *m) && slack.is_none_or(|s| self.reaches(count + s, *m))
            }
            Shape::Family { half, sets, m } => {
                let mut local = Vec::with_capacity(sets.first().map_or(0, |s| s.len() * 2));
                self.torus.for_each_in_box(u, [-half; 3], [*half; 3], |v| local.push(config.get(v) == ty));
                sets.iter().any(|set| self.reaches(set.iter().filter(|&&i| local[i]).count() as u64, *m))
            }
        }
    }
}

/// Evaluates one event at one node.
pub fn event_holds(config: &Configuration, u: usize, kind: EventKind) -> Result<bool> {
    Ok(EventEvaluator::new(config.torus(), config.params().w, kind)?.holds(config, u))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRow {
    pub coords: [usize; 3],
    pub kind: EventKind,
    pub holds: bool,
}

/// Evaluates every event at every listed node, in node-major order.
pub fn scan_events(
    config: &Configuration,
    kinds: &[EventKind],
    nodes: &[usize],
    k_dir: usize,
) -> Result<Vec<EventRow>> {
    let torus = config.torus();
    let evals = kinds
        .iter()
        .map(|&k| EventEvaluator::with_directions(torus, config.params().w, k, k_dir))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(nodes.len() * kinds.len());
    for &u in nodes {
        for ev in &evals {
            rows.push(EventRow { coords: torus.coords(u), kind: ev.kind(), holds: ev.holds(config, u) });
        }
    }
    Ok(rows)
}

/// CSV with header `x,y,z,event,type,tau,gamma,holds`.
pub fn event_scan_csv(rows: &[EventRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["x", "y", "z", "event", "type", "tau", "gamma", "holds"]).expect("in-memory write");
    for r in rows {
        let gamma = r.kind.gamma.map(|g| g.to_string()).unwrap_or_default();
        w.write_record([
            r.coords[0].to_string(),
            r.coords[1].to_string(),
            r.coords[2].to_string(),
            r.kind.family.to_string(),
            r.kind.ty.to_string(),
            r.kind.tau.to_string(),
            gamma,
            r.holds.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}
