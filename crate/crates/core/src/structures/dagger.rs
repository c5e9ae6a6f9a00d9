//! Geometric conditions on a beta disc of radius `r·w`, checked in the plane.

use serde::{Deserialize, Serialize};

use crate::lattice::Fraction;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DaggerReport {
    pub r: u64,
    pub w: u64,
    /// Smallest `|N(v) ∩ disc|` over disc nodes `v`.
    pub min_inside: u64,
    /// Largest cap area over outer-boundary nodes, in units of `(2w+1)^2`.
    pub max_cap_fraction: f64,
    pub a: bool,
    pub b: bool,
}

impl DaggerReport {
    pub fn passed(&self) -> bool {
        self.a && self.b
    }
}

/// Normals are tried within 45 degrees of the radial direction, half a degree apart.
const SWEEP_STEPS: i32 = 90;
const SWEEP_STEP: f64 = std::f64::consts::PI / 360.0;

fn in_disc(x: i64, y: i64, r2: i64) -> bool {
    x * x + y * y <= r2
}

/// Vertices of the convex hull (monotone chain); collinear points dropped.
fn convex_hull(mut pts: Vec<(i64, i64)>) -> Vec<(i64, i64)> {
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let turn = |o: (i64, i64), a: (i64, i64), b: (i64, i64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut hull: Vec<(i64, i64)> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(i64, i64)>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && turn(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Area of the part of `[cx-w, cx+w] x [cy-w, cy+w]` with `p·n >= t`.
fn cap_area(cx: f64, cy: f64, w: f64, n: (f64, f64), t: f64) -> f64 {
    let square = [(cx - w, cy - w), (cx + w, cy - w), (cx + w, cy + w), (cx - w, cy + w)];
    let side = |p: (f64, f64)| p.0 * n.0 + p.1 * n.1 - t;
    let mut poly = Vec::with_capacity(5);
    for i in 0..4 {
        let (a, b) = (square[i], square[(i + 1) % 4]);
        let (sa, sb) = (side(a), side(b));
        if sa >= 0.0 {
            poly.push(a);
        }
        if (sa >= 0.0) != (sb >= 0.0) {
            let s = sa / (sa - sb);
            poly.push((a.0 + s * (b.0 - a.0), a.1 + s * (b.1 - a.1)));
        }
    }
    let mut twice = 0.0;
    for i in 0..poly.len() {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        twice += p.0 * q.1 - q.0 * p.1;
    }
    twice.abs() / 2.0
}

/// Evaluates both conditions for the disc of radius `r·w` about the origin.
///
/// The first is an exact count. The second asks, for every outer-boundary
/// node `v`, for a line whose far side contains `N(v)` minus the disc and cuts
/// off at most `γ (2w+1)^2` of the square hull of `N(v)`; such a line can then
/// be pushed back until the cut is exactly `γ (2w+1)^2`. Normals are sampled,
/// so a pass is always genuine but a narrow pass can be missed.
pub fn dagger_report(r: u64, w: u64, tau_beta: Fraction, gamma: f64) -> Result<DaggerReport> {
    if r == 0 || w == 0 {
        return Err(Error::InvalidParams("r and w must be positive".into()));
    }
    if !(gamma > 0.5 && gamma < 1.0) {
        return Err(Error::Domain(format!("gamma {gamma} outside (1/2, 1)")));
    }
    let rad = (r * w) as i64;
    let wi = w as i64;
    let r2 = rad * rad;
    let size = (2 * w + 1) * (2 * w + 1);

    // prefix sums of the disc indicator over [-rad-w-1, rad+w+1]^2
    let half = rad + wi + 1;
    let side = (2 * half + 1) as usize;
    let mut pre = vec![0u32; (side + 1) * (side + 1)];
    for i in 0..side {
        for j in 0..side {
            let v = in_disc(i as i64 - half, j as i64 - half, r2) as u32;
            pre[(i + 1) * (side + 1) + j + 1] =
                v + pre[i * (side + 1) + j + 1] + pre[(i + 1) * (side + 1) + j] - pre[i * (side + 1) + j];
        }
    }
    let window = |x: i64, y: i64| -> u64 {
        let (x0, x1) = ((x - wi + half) as usize, (x + wi + half + 1) as usize);
        let (y0, y1) = ((y - wi + half) as usize, (y + wi + half + 1) as usize);
        (pre[x1 * (side + 1) + y1] + pre[x0 * (side + 1) + y0] - pre[x0 * (side + 1) + y1] - pre[x1 * (side + 1) + y0])
            as u64
    };

    let mut min_inside = u64::MAX;
    for x in -rad..=rad {
        for y in -rad..=rad {
            if in_disc(x, y, r2) {
                min_inside = min_inside.min(window(x, y));
            }
        }
    }
    let a = min_inside as u128 * *tau_beta.denom() as u128 >= *tau_beta.numer() as u128 * size as u128;

    // the disc is invariant under the dihedral group, so one octant suffices
    let mut max_cap = 0.0f64;
    for x in 0..=rad + 1 {
        for y in 0..=x {
            if in_disc(x, y, r2) {
                continue;
            }
            let boundary = (-1..=1).any(|dx| (-1..=1).any(|dy| in_disc(x + dx, y + dy, r2)));
            if !boundary {
                continue;
            }
            let mut outside = Vec::new();
            for px in x - wi..=x + wi {
                for py in y - wi..=y + wi {
                    if !in_disc(px, py, r2) {
                        outside.push((px, py));
                    }
                }
            }
            let hull = convex_hull(outside);
            let radial = (y as f64).atan2(x as f64);
            let mut best = f64::INFINITY;
            for k in -SWEEP_STEPS..=SWEEP_STEPS {
                let th = radial + k as f64 * SWEEP_STEP;
                let n = (th.cos(), th.sin());
                let t = hull.iter().map(|&(px, py)| px as f64 * n.0 + py as f64 * n.1).fold(f64::INFINITY, f64::min);
                best = best.min(cap_area(x as f64, y as f64, w as f64, n, t - 1e-12));
            }
            max_cap = max_cap.max(best / size as f64);
        }
    }
    Ok(DaggerReport { r, w, min_inside, max_cap_fraction: max_cap, a, b: max_cap <= gamma })
}

pub fn check_dagger_conditions(r: u64, w: u64, tau_beta: Fraction, gamma: f64) -> Result<bool> {
    Ok(dagger_report(r, w, tau_beta, gamma)?.passed())
}

/// Smallest `r` in `1..=r_max` passing both conditions.
pub fn find_r_star(w: u64, tau_beta: Fraction, gamma: f64, r_max: u64) -> Result<Option<u64>> {
    for r in 1..=r_max {
        if check_dagger_conditions(r, w, tau_beta, gamma)? {
            return Ok(Some(r));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cap_area_of_axis_cuts() {
        let full = cap_area(0.0, 0.0, 1.0, (1.0, 0.0), -5.0);
        assert!((full - 4.0).abs() < 1e-12);
        let half = cap_area(0.0, 0.0, 1.0, (1.0, 0.0), 0.0);
        assert!((half - 2.0).abs() < 1e-12);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let corner = cap_area(0.0, 0.0, 1.0, (s, s), s);
        assert!((corner - 0.5).abs() < 1e-12);
        assert_eq!(cap_area(0.0, 0.0, 1.0, (1.0, 0.0), 2.0), 0.0);
    }

    #[test]
    fn brute_force_inside_counts() {
        let (r, w) = (3u64, 2u64);
        let rep = dagger_report(r, w, Fraction::new(1, 4), 0.6).unwrap();
        let rad = (r * w) as i64;
        let wi = w as i64;
        let mut min = u64::MAX;
        for x in -rad..=rad {
            for y in -rad..=rad {
                if x * x + y * y > rad * rad {
                    continue;
                }
                let mut c = 0;
                for a in x - wi..=x + wi {
                    for b in y - wi..=y + wi {
                        c += (a * a + b * b <= rad * rad) as u64;
                    }
                }
                min = min.min(c);
            }
        }
        assert_eq!(rep.min_inside, min);
    }

    #[test]
    fn thin_disc_fails() {
        for w in 1..=8 {
            assert!(!check_dagger_conditions(1, w, Fraction::new(49, 100), 0.55).unwrap(), "w={w}");
        }
    }

    #[test]
    fn inside_condition_persists_once_met() {
        let tb = Fraction::new(2, 5);
        for w in [3u64, 5, 10] {
            let reps: Vec<_> = (1..=30).map(|r| dagger_report(r, w, tb, 0.55).unwrap()).collect();
            let first = reps.iter().position(|x| x.a).expect("inside condition met");
            assert!(reps[first..].iter().all(|x| x.a), "w={w}");
        }
    }

    #[test]
    fn boundary_condition_is_lattice_noisy_at_small_w() {
        let tb = Fraction::new(2, 5);
        assert_eq!(find_r_star(3, tb, 0.55, 40).unwrap(), Some(5));
        assert!(check_dagger_conditions(8, 3, tb, 0.55).unwrap());
        assert!(!check_dagger_conditions(9, 3, tb, 0.55).unwrap());
        assert!((1..=30).all(|r| !check_dagger_conditions(r, 5, tb, 0.55).unwrap()));
    }

    #[test]
    fn boundary_cap_shrinks_for_wide_windows() {
        let tb = Fraction::new(2, 5);
        for r in 18..=24 {
            assert!(check_dagger_conditions(r, 20, tb, 0.55).unwrap(), "r={r}");
        }
        let small = dagger_report(4, 20, tb, 0.55).unwrap().max_cap_fraction;
        let large = dagger_report(30, 20, tb, 0.55).unwrap().max_cap_fraction;
        assert!(large < small);
    }

    #[test]
    fn rejects_bad_gamma() {
        assert!(dagger_report(2, 2, Fraction::new(2, 5), 0.4).is_err());
        assert!(dagger_report(0, 2, Fraction::new(2, 5), 0.6).is_err());
    }
}
