//! Local structures on a configuration: stable regions, firewalls, the event
//! family, and actual versus idealised alpha densities.

mod dagger;
mod events;

pub use dagger::{check_dagger_conditions, dagger_report, find_r_star, DaggerReport};
pub use events::{
    event_holds, event_scan_csv, lower_neighborhood, partial_neighborhoods, partial_neighborhoods_3d,
    rotated_lower_neighborhoods, scan_events, EventEvaluator, EventFamily, EventKind, EventRow, DEFAULT_DIRECTIONS,
};

use serde::{Deserialize, Serialize};

use crate::lattice::{window_sums, Configuration, Coords, Fraction, ModelParams, NodeType, Torus};
use crate::{Error, Result};

/// A set of nodes on the torus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Region {
    /// Sorted, duplicate-free node indices.
    List { nodes: Vec<usize> },
    /// `corner + [0, extent)` on each active axis, wrapping.
    Box { corner: Coords, extent: [usize; 3] },
    /// Nodes at Euclidean distance at most `radius` from `center`.
    Disc {
        center: usize,
        #[serde(with = "crate::lattice::fraction_serde")]
        radius: Fraction,
    },
}

impl Region {
    pub fn list(mut nodes: Vec<usize>) -> Self {
        nodes.sort_unstable();
        nodes.dedup();
        Region::List { nodes }
    }

    pub fn disc(center: usize, radius: u64) -> Self {
        Region::Disc { center, radius: Fraction::from_integer(radius) }
    }

    pub fn whole(torus: Torus) -> Self {
        Region::Box { corner: [0; 3], extent: [torus.side(); 3] }
    }

    /// Sorted node list.
    pub fn nodes(&self, torus: Torus) -> Vec<usize> {
        match self {
            Region::List { nodes } => nodes.clone(),
            Region::Box { corner, extent } => {
                let mut out = Vec::new();
                let hi = extent.map(|e| (e.min(torus.side()) as i64) - 1);
                torus.for_each_in_box(torus.index(*corner), [0; 3], hi, |v| out.push(v));
                out.sort_unstable();
                out
            }
            Region::Disc { center, radius } => disc_nodes(torus, *center, *radius),
        }
    }

    pub fn contains(&self, torus: Torus, v: usize) -> bool {
        match self {
            Region::List { nodes } => nodes.binary_search(&v).is_ok(),
            Region::Box { corner, extent } => {
                let c = torus.coords(v);
                let n = torus.side();
                (0..torus.rank()).all(|ax| (c[ax] + n - corner[ax] % n) % n < extent[ax])
            }
            Region::Disc { center, radius } => in_disc(torus.dist2(*center, v), *radius),
        }
    }
}

/// `d2 <= radius^2`, compared exactly.
pub fn in_disc(d2: u64, radius: Fraction) -> bool {
    let (p, q) = (*radius.numer() as u128, *radius.denom() as u128);
    d2 as u128 * q * q <= p * p
}

fn reach(radius: Fraction) -> i64 {
    (*radius.numer()).div_ceil(*radius.denom()) as i64
}

/// Sorted nodes of the disc `C†(center, radius)`.
pub fn disc_nodes(torus: Torus, center: usize, radius: Fraction) -> Vec<usize> {
    let r = reach(radius).min(torus.side() as i64 / 2);
    let mut out = Vec::new();
    torus.for_each_in_box(center, [-r; 3], [r; 3], |v| {
        if in_disc(torus.dist2(center, v), radius) {
            out.push(v);
        }
    });
    out.sort_unstable();
    out.dedup();
    out
}

/// Nodes outside the disc with a Chebyshev-adjacent node inside it.
pub fn outer_boundary(torus: Torus, center: usize, radius: Fraction) -> Vec<usize> {
    let r = reach(radius) + 1;
    let mut out = Vec::new();
    torus.for_each_in_box(center, [-r; 3], [r; 3], |v| {
        if in_disc(torus.dist2(center, v), radius) {
            return;
        }
        let mut touches = false;
        torus.for_each_in_window(v, 1, |x| touches |= in_disc(torus.dist2(center, x), radius));
        if touches {
            out.push(v);
        }
    });
    out.sort_unstable();
    out.dedup();
    out
}

/// Every node in `region` has at least `τ_ty (2w+1)^dim` nodes of type `ty`
/// inside `N(u) ∩ region`.
pub fn is_stable(config: &Configuration, region: &Region, ty: NodeType) -> Result<bool> {
    let torus = config.torus();
    let nodes = region.nodes(torus);
    if nodes.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let mut mask = vec![0u32; config.len()];
    for &v in &nodes {
        mask[v] = (config.get(v) == ty) as u32;
    }
    let p = config.params();
    let sums = window_sums(torus, &mask, p.w);
    let tau = p.tau(ty);
    let size = crate::lattice::neighborhood_size(p) as u128;
    let (num, den) = (*tau.numer() as u128, *tau.denom() as u128);
    Ok(nodes.iter().all(|&v| sums[v] as u128 * den >= num * size))
}

pub fn is_alpha_stable(config: &Configuration, region: &Region) -> Result<bool> {
    is_stable(config, region, NodeType::Alpha)
}

pub fn is_beta_stable(config: &Configuration, region: &Region) -> Result<bool> {
    is_stable(config, region, NodeType::Beta)
}

/// Every node of `C†(center, radius)` is of type `ty`.
pub fn is_firewall(config: &Configuration, center: usize, radius: Fraction, ty: NodeType) -> bool {
    disc_nodes(config.torus(), center, radius).into_iter().all(|v| config.get(v) == ty)
}

/// The right extended neighbourhood `N⋄(u)`: `x' ∈ [x-w, x+2w]`, `|y'-y| <= w`.
pub fn right_extended(torus: Torus, u: usize, w: usize) -> Region {
    let c = torus.coords(u);
    let n = torus.side();
    Region::Box { corner: [(c[0] + n - w % n) % n, (c[1] + n - w % n) % n, 0], extent: [3 * w + 1, 2 * w + 1, 1] }
}

/// `R⁰_a(u)`: `0 <= x'-x <= w`, `|y'-y| <= a`.
pub fn r0_rect(torus: Torus, u: usize, w: usize, a: usize) -> Region {
    let c = torus.coords(u);
    let n = torus.side();
    Region::Box { corner: [c[0], (c[1] + n - a % n) % n, 0], extent: [w + 1, 2 * a + 1, 1] }
}

/// Fraction of `A` that is alpha.
pub fn xi(config: &Configuration, a: &Region) -> Result<Fraction> {
    let nodes = a.nodes(config.torus());
    if nodes.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let alpha = nodes.iter().filter(|&&v| config.get(v).is_alpha()).count();
    Ok(Fraction::new(alpha as u64, nodes.len() as u64))
}

/// Fraction of `A` that would be alpha after every node of `B` became beta.
pub fn xi_flipped(config: &Configuration, a: &Region, b: &Region) -> Result<Fraction> {
    let torus = config.torus();
    let nodes = a.nodes(torus);
    if nodes.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let alpha = nodes.iter().filter(|&&v| config.get(v).is_alpha() && !b.contains(torus, v)).count();
    Ok(Fraction::new(alpha as u64, nodes.len() as u64))
}

/// Idealised density: proportion `τ` inside `N⋄(u)`, one half elsewhere.
pub fn xi_star(params: &ModelParams, a: &Region, u: usize, tau: Fraction) -> Result<Fraction> {
    xi_star_flipped(params, a, u, &Region::List { nodes: Vec::new() }, tau)
}

/// As [`xi_star`], after every node of `B` is set to beta.
pub fn xi_star_flipped(params: &ModelParams, a: &Region, u: usize, b: &Region, tau: Fraction) -> Result<Fraction> {
    let torus = params.torus();
    let nodes = a.nodes(torus);
    if nodes.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let ext = right_extended(torus, u, params.w);
    let (mut inside, mut outside) = (0u64, 0u64);
    for &v in &nodes {
        if b.contains(torus, v) {
            continue;
        }
        if ext.contains(torus, v) {
            inside += 1;
        } else {
            outside += 1;
        }
    }
    Ok((tau * Fraction::from_integer(inside) + Fraction::new(outside, 2)) / Fraction::from_integer(nodes.len() as u64))
}
