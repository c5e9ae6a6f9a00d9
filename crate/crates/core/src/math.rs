//! Threshold constants, the "sufficiently less" relations, and exact binomial tails.
//!
//! Everything that multiplies powers is done in log space; the bases involved
//! underflow long before the window sizes of interest.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::lattice::Fraction;
use crate::{Error, Result};

/// `x ln x`, extended continuously to 0 at the origin.
fn xlnx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// `ln g(x, k)`; accepts the closed interval so callers can probe the endpoints.
pub fn ln_g(x: f64, k: f64) -> f64 {
    k * (xlnx(x) + xlnx(1.0 - x))
}

/// `g(x, k) = x^{kx} (1-x)^{k(1-x)}`.
pub fn g(x: f64, k: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Domain(format!("g needs 0 < x < 1, got {x}")));
    }
    if k.is_nan() || k <= 0.0 {
        return Err(Error::Domain(format!("g needs k > 0, got {k}")));
    }
    Ok(ln_g(x, k).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub value: f64,
    pub residual: f64,
    pub bracket: (f64, f64),
    pub iterations: u32,
}

/// Fixed starting bracket for both threshold equations.
pub const ROOT_BRACKET: (f64, f64) = (0.01, 0.49);

/// Intolerances at which the minimal gaps are tabulated.
pub const GAP_TABLE_TAUS: [f64; 8] = [0.39, 0.40, 0.41, 0.42, 0.43, 0.45, 0.47, 0.49];

/// Log-difference whose root is the 2D threshold. Negative below the root.
pub fn kappa_2d_equation(k: f64) -> f64 {
    xlnx(1.0 - 2.0 * k) - (2.0 * (1.0 - k) * LN_2 + xlnx(k) + 3.0 * xlnx(1.0 - k))
}

/// Log-difference whose root is the 3D threshold. Negative below the root.
pub fn kappa_3d_equation(k: f64) -> f64 {
    4.0 * xlnx(1.0 - 2.0 * k) - ((23.0 - 8.0 * k) * LN_2 + 19.0 * xlnx(k) + 27.0 * xlnx(1.0 - k))
}

/// Bisection to bracket width 1e-13 followed by a guarded secant polish.
pub fn solve_bisection(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<ThresholdResult> {
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (f(a), f(b));
    if fa.signum() == fb.signum() {
        return Err(Error::NotBracketed { lo, hi });
    }
    let rising = fa < 0.0;
    let mut iterations = 0;
    while b - a > 1e-13 && iterations < 200 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            a = m;
            b = m;
            break;
        }
        if (fm < 0.0) == rising {
            a = m;
        } else {
            b = m;
        }
        iterations += 1;
    }
    let (fa, fb) = (f(a), f(b));
    let mut value = if fb != fa { a - fa * (b - a) / (fb - fa) } else { 0.5 * (a + b) };
    if !(a..=b).contains(&value) {
        value = 0.5 * (a + b);
    }
    Ok(ThresholdResult { value, residual: f(value).abs(), bracket: (a, b), iterations })
}

/// Number of sign changes of `f` sampled on `[lo, hi]` at spacing `step`.
pub fn sign_changes(f: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> usize {
    let steps = ((hi - lo) / step).round() as usize;
    let mut prev = f(lo).signum();
    let mut changes = 0;
    for i in 1..=steps {
        let s = f(lo + (hi - lo) * i as f64 / steps as f64).signum();
        if s != prev && s != 0.0 {
            changes += 1;
            prev = s;
        }
    }
    changes
}

/// The 2D critical intolerance.
pub fn kappa_2d() -> ThresholdResult {
    solve_bisection(kappa_2d_equation, ROOT_BRACKET.0, ROOT_BRACKET.1).expect("fixed bracket straddles the root")
}

/// The 3D critical intolerance.
pub fn kappa_3d() -> ThresholdResult {
    solve_bisection(kappa_3d_equation, ROOT_BRACKET.0, ROOT_BRACKET.1).expect("fixed bracket straddles the root")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    #[serde(rename = "2d")]
    TwoD,
    #[serde(rename = "3d")]
    ThreeD,
}

impl Relation {
    /// Exponents `(k0, k1, m)` in `g(t0, k0) > 2^m g(t1, k1)`.
    fn shape(self) -> (f64, f64, f64) {
        match self {
            Relation::TwoD => (2.0, 3.0, 1.0),
            Relation::ThreeD => (8.0, 27.0, 19.0),
        }
    }

    /// `ln g(t0, k0) - m ln 2 - ln g(t1, k1)`; positive exactly when the relation holds.
    pub fn margin(self, t0: f64, t1: f64) -> f64 {
        let (k0, k1, m) = self.shape();
        ln_g(t0, k0) - m * LN_2 - ln_g(t1, k1)
    }
}

fn check_lower(t0: f64, t1: f64) -> Result<()> {
    for t in [t0, t1] {
        if !(t > 0.0 && t < 0.5) {
            return Err(Error::Domain(format!("intolerance {t} outside (0, 0.5)")));
        }
    }
    Ok(())
}

fn check_upper(t0: f64, t1: f64) -> Result<()> {
    for t in [t0, t1] {
        if !(t > 0.5 && t < 1.0) {
            return Err(Error::Domain(format!("intolerance {t} outside (0.5, 1)")));
        }
    }
    Ok(())
}

pub fn suff_less(rel: Relation, t0: f64, t1: f64) -> Result<bool> {
    check_lower(t0, t1)?;
    Ok(rel.margin(t0, t1) > 0.0)
}

pub fn suff_greater(rel: Relation, t0: f64, t1: f64) -> Result<bool> {
    check_upper(t0, t1)?;
    // g is symmetric under x -> 1 - x
    Ok(rel.margin(1.0 - t0, 1.0 - t1) > 0.0)
}

pub fn suff_less_2d(t0: f64, t1: f64) -> Result<bool> {
    suff_less(Relation::TwoD, t0, t1)
}

pub fn suff_less_3d(t0: f64, t1: f64) -> Result<bool> {
    suff_less(Relation::ThreeD, t0, t1)
}

pub fn suff_greater_2d(t0: f64, t1: f64) -> Result<bool> {
    suff_greater(Relation::TwoD, t0, t1)
}

pub fn suff_greater_3d(t0: f64, t1: f64) -> Result<bool> {
    suff_greater(Relation::ThreeD, t0, t1)
}

/// Smallest `δ` with `suff_less(t1 - δ, t1)`, to within 1e-9.
///
/// Fails with [`Error::NotBracketed`] when no `t0 ∈ (0, t1)` is sufficiently less,
/// which happens for small `t1` under the 3D relation.
pub fn min_gap(t1: f64, rel: Relation) -> Result<f64> {
    check_lower(t1, t1)?;
    let h = |d: f64| rel.margin(t1 - d, t1);
    let (mut lo, mut hi) = (0.0, t1);
    if h(hi) <= 0.0 {
        return Err(Error::NotBracketed { lo, hi });
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Neumaier-compensated sum.
fn compensated_sum(terms: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for t in terms {
        let s = sum + t;
        if sum.abs() >= t.abs() {
            c += (sum - s) + t;
        } else {
            c += (t - s) + sum;
        }
        sum = s;
    }
    sum + c
}

/// `b(N, k) = 2^{-N} C(N, k)`.
pub fn binom_at(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    (ln_binomial(n, k) - n as f64 * LN_2).exp()
}

/// Number of integers `k ≥ 0` with `k < t`.
fn count_below(t: Fraction) -> u64 {
    let (p, q) = (*t.numer(), *t.denom());
    if p == 0 {
        0
    } else {
        (p - 1) / q + 1
    }
}

/// `P(X < t)` for `X ~ Bin(N, 1/2)`, where `t` is an absolute count threshold.
pub fn binom_below(n: u64, t: Fraction) -> f64 {
    let m = count_below(t).min(n + 1);
    compensated_sum((0..m).map(|k| binom_at(n, k)))
}

/// `P(X ≥ t)` for `X ~ Bin(N, 1/2)`.
pub fn binom_at_least(n: u64, t: Fraction) -> f64 {
    let m = count_below(t).min(n + 1);
    compensated_sum((m..=n).map(|k| binom_at(n, k)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExactEvent {
    Uh,
    Ruh,
    Ln,
    Euh,
}

/// Side of the 3D extended window, `2⌈3w/2⌉ + 1`.
pub fn extended_side(w: u64) -> u64 {
    2 * (3 * w).div_ceil(2) + 1
}

/// Probability of an event at a fixed node when every node is an independent fair coin.
pub fn prob_event_exact(kind: ExactEvent, w: u64, tau: Fraction) -> f64 {
    let s = 2 * w + 1;
    let scaled = |m: u64| tau * Fraction::from_integer(m);
    match kind {
        ExactEvent::Uh => binom_below(s * s, scaled(s * s)),
        ExactEvent::Ruh => {
            let m = s * (3 * w + 1);
            binom_below(m, scaled(m))
        }
        ExactEvent::Ln => binom_at_least(2 * w * w + 2 * w + 1, scaled(s * s)),
        ExactEvent::Euh => {
            let side = extended_side(w);
            let e = 3 * w + 1;
            binom_below(side * side * side, scaled(e * e * e))
        }
    }
}

fn ln_u4(tau: f64, inv: f64) -> f64 {
    let a = 1.0 - 2.0 * tau;
    (a + inv) * a.ln() - ((2.0 - 2.0 * tau - inv) * LN_2 + xlnx(tau) + (3.0 * (1.0 - tau) + inv) * (1.0 - tau).ln())
}

fn ln_u5(tau: f64, tau_beta: f64, inv: f64) -> f64 {
    let num = (2.0 * tau_beta + inv) * tau_beta.ln() + (2.0 * (1.0 - tau_beta) + inv) * (1.0 - tau_beta).ln();
    let den = (1.0 - inv) * LN_2 + (3.0 * tau + inv) * tau.ln() + (3.0 * (1.0 - tau) + inv) * (1.0 - tau).ln();
    num - den
}

/// Limiting base of the ruh/ln probability ratio.
pub fn u4_base(tau: f64) -> Result<f64> {
    check_lower(tau, tau)?;
    Ok(ln_u4(tau, 0.0).exp())
}

/// Base of the ruh/ln ratio with the `1/(2N)` corrections kept.
pub fn u4_base_finite(tau: f64, n: u64) -> Result<f64> {
    check_lower(tau, tau)?;
    Ok(ln_u4(tau, 0.5 / n as f64).exp())
}

/// Limiting base of the ruh/uh probability ratio.
pub fn u5_base(tau: f64, tau_beta: f64) -> Result<f64> {
    check_lower(tau, tau_beta)?;
    Ok(ln_u5(tau, tau_beta, 0.0).exp())
}

pub fn u5_base_finite(tau: f64, tau_beta: f64, n: u64) -> Result<f64> {
    check_lower(tau, tau_beta)?;
    Ok(ln_u5(tau, tau_beta, 0.5 / n as f64).exp())
}

/// `γ = (τ_α + τ') / (4τ')`.
pub fn gamma_from(tau_alpha: f64, tau_prime: f64) -> Result<f64> {
    if !(0.0 < tau_prime && tau_prime < tau_alpha && tau_alpha < 0.5) {
        return Err(Error::Domain(format!("need 0 < τ' < τ_α < 0.5, got τ'={tau_prime}, τ_α={tau_alpha}")));
    }
    let gamma = (tau_alpha + tau_prime) / (4.0 * tau_prime);
    assert!(gamma > 0.5, "gamma {gamma} not above one half");
    Ok(gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(lo: f64, hi: f64, m: usize) -> impl Iterator<Item = f64> + Clone {
        (0..m).map(move |i| lo + (hi - lo) * (i as f64 + 0.5) / m as f64)
    }

    #[test]
    fn g_values() {
        assert!((g(0.5, 2.0).unwrap() - 0.25).abs() < 1e-15);
        for k in [1.0, 3.0, 8.0, 27.0] {
            assert!((g(0.5, k).unwrap() - 2f64.powf(-k)).abs() < 1e-15);
        }
        assert!(g(0.0, 2.0).is_err());
        assert!(g(1.0, 2.0).is_err());
        // a non-log evaluation for comparison
        let (x, k) = (0.3f64, 3.0f64);
        let direct = x.powf(k * x) * (1.0 - x).powf(k * (1.0 - x));
        assert!((g(x, k).unwrap() - direct).abs() < 1e-14);
    }

    #[test]
    fn g_falls_then_rises() {
        for k in [2.0, 3.0, 8.0, 27.0] {
            let xs: Vec<f64> = (1..1000).map(|i| i as f64 / 1000.0).collect();
            for pair in xs.windows(2) {
                let (a, b) = (g(pair[0], k).unwrap(), g(pair[1], k).unwrap());
                if pair[1] <= 0.5 {
                    assert!(b < a);
                } else if pair[0] >= 0.5 {
                    assert!(b > a);
                }
            }
        }
    }

    #[test]
    fn kappa_values() {
        let k = kappa_2d();
        assert!((k.value - 0.365227).abs() < 1e-5, "{k:?}");
        assert!(k.residual <= 1e-12);
        assert!(k.bracket.0 <= k.value && k.value <= k.bracket.1);
        let k3 = kappa_3d();
        assert!((k3.value - 0.3897216).abs() < 1e-6, "{k3:?}");
        assert!(k3.residual <= 1e-12);
        for v in [k.value, k3.value] {
            assert!(v > 0.25 && v < 0.5);
        }
    }

    #[test]
    fn threshold_equations_have_one_root() {
        assert_eq!(sign_changes(kappa_2d_equation, 0.001, 0.499, 1e-3), 1);
        assert_eq!(sign_changes(kappa_3d_equation, 0.001, 0.499, 1e-3), 1);
        assert!(kappa_2d_equation(0.01) < 0.0 && kappa_2d_equation(0.49) > 0.0);
    }

    #[test]
    fn unbracketed_solve_fails() {
        assert!(matches!(solve_bisection(|x| x * x + 1.0, 0.0, 1.0), Err(Error::NotBracketed { .. })));
    }

    #[test]
    fn relation_boundaries_at_045() {
        assert!(suff_less_2d(0.45 - 0.0115, 0.45).unwrap());
        assert!(!suff_less_2d(0.45 - 0.0110, 0.45).unwrap());
        assert!(suff_less_3d(0.45 - 0.0420, 0.45).unwrap());
        assert!(!suff_less_3d(0.45 - 0.0415, 0.45).unwrap());
        assert!(suff_less_2d(0.6, 0.45).is_err());
        assert!(suff_greater_2d(0.3, 0.7).is_err());
    }

    #[test]
    fn relations_strengthen_strict_order() {
        for a in grid(0.0, 0.5, 100) {
            for b in grid(0.0, 0.5, 100) {
                let two = suff_less_2d(a, b).unwrap();
                let three = suff_less_3d(a, b).unwrap();
                assert!(!two || a < b, "{a} {b}");
                assert!(!three || two, "{a} {b}");
                assert_eq!(suff_greater_2d(1.0 - a, 1.0 - b).unwrap(), two);
                assert_eq!(suff_greater_3d(1.0 - a, 1.0 - b).unwrap(), three);
            }
        }
    }

    #[test]
    fn table_of_gaps() {
        let rows = [
            (0.39, 0.024443159, 0.090075592),
            (0.40, 0.022265989, 0.082213355),
            (0.41, 0.020075663, 0.074254555),
            (0.42, 0.017873659, 0.066210554),
            (0.43, 0.015661402, 0.058092129),
            (0.45, 0.011211594, 0.041672737),
            (0.47, 0.0067368244, 0.025074148),
            (0.49, 0.0022472445, 0.0083697183),
        ];
        for (t, two, three) in rows {
            assert!((min_gap(t, Relation::TwoD).unwrap() - two).abs() < 1e-7, "{t}");
            assert!((min_gap(t, Relation::ThreeD).unwrap() - three).abs() < 1e-7, "{t}");
        }
        let gaps: Vec<f64> = rows.iter().map(|r| min_gap(r.0, Relation::TwoD).unwrap()).collect();
        assert!(gaps.windows(2).all(|p| p[1] < p[0]));
    }

    #[test]
    fn gap_missing_for_small_3d_intolerance() {
        assert!(matches!(min_gap(0.1, Relation::ThreeD), Err(Error::NotBracketed { .. })));
        assert!(min_gap(0.1, Relation::TwoD).is_ok());
    }

    #[test]
    fn binomial_small_cases() {
        let p = binom_below(9, Fraction::new(9, 4));
        assert!((p - 46.0 / 512.0).abs() < 1e-15);
        assert_eq!(binom_below(9, Fraction::from_integer(0)), 0.0);
        for n in [1u64, 5, 9, 49, 300] {
            let exact = 0.5f64.powi(n as i32);
            assert!((binom_at_least(n, Fraction::from_integer(n)) - exact).abs() <= 1e-12 * exact);
            let total = compensated_sum((0..=n).map(|k| binom_at(n, k)));
            assert!((total - 1.0).abs() < 1e-12);
            for k in 0..=n {
                assert!((binom_at(n, k) - binom_at(n, n - k)).abs() <= 1e-15);
            }
        }
        assert_eq!(prob_event_exact(ExactEvent::Uh, 1, Fraction::new(1, 4)), p);
    }

    #[test]
    fn exact_event_sizes() {
        assert_eq!(extended_side(1), 5);
        assert_eq!(extended_side(2), 7);
        assert_eq!(extended_side(3), 11);
        // ln with tau such that all 5 lower nodes are needed at w = 1
        let all = prob_event_exact(ExactEvent::Ln, 1, Fraction::new(5, 9));
        assert!((all - 1.0 / 32.0).abs() < 1e-15);
    }

    #[test]
    fn u4_sign_tracks_kappa() {
        let k = kappa_2d().value;
        for t in grid(0.0, 0.5, 1000) {
            assert_eq!(u4_base(t).unwrap() > 1.0, t > k, "{t}");
        }
        assert!((u4_base(k).unwrap() - 1.0).abs() < 1e-9);
        // finite corrections vanish as N grows
        let t = 0.42;
        let lim = u4_base(t).unwrap();
        let errs: Vec<f64> =
            [10u64, 100, 10_000].iter().map(|&n| (u4_base_finite(t, n).unwrap() - lim).abs()).collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2] && errs[2] < 1e-3);
    }

    #[test]
    fn u5_sign_tracks_relation() {
        for t in grid(0.0, 0.5, 40) {
            for tb in grid(0.0, 0.5, 40) {
                assert_eq!(u5_base(t, tb).unwrap() > 1.0, suff_less_2d(tb, t).unwrap(), "{t} {tb}");
            }
        }
        let lim = u5_base(0.44, 0.4).unwrap();
        assert!((u5_base_finite(0.44, 0.4, 1_000_000).unwrap() - lim).abs() < 1e-5);
    }

    #[test]
    fn gamma_values() {
        assert!((gamma_from(0.44, 0.40).unwrap() - 0.525).abs() < 1e-15);
        assert!(gamma_from(0.3, 0.3 - 1e-6).unwrap() - 0.5 < 1e-5);
        assert!(gamma_from(0.3, 0.4).is_err());
        for a in grid(0.0, 0.5, 60) {
            for b in grid(0.0, a, 60) {
                assert!(gamma_from(a, b).unwrap() > 0.5);
            }
        }
    }

    proptest! {
        #[test]
        fn relation_monotone_in_t0(a in 0.001f64..0.499, b in 0.001f64..0.499, shrink in 0.0f64..1.0) {
            if suff_less_2d(a, b).unwrap() {
                prop_assert!(suff_less_2d(a * shrink.max(1e-3), b).unwrap());
            }
        }

        #[test]
        fn below_and_at_least_partition(n in 1u64..400, p in 0u64..2000, q in 1u64..5) {
            let t = Fraction::new(p, q);
            prop_assert!((binom_below(n, t) + binom_at_least(n, t) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn ln_probability_is_monotone(w in 1u64..6, a in 1u64..99, b in 1u64..99) {
            let (lo, hi) = (a.min(b), a.max(b));
            let p_lo = prob_event_exact(ExactEvent::Ln, w, Fraction::new(lo, 100));
            let p_hi = prob_event_exact(ExactEvent::Ln, w, Fraction::new(hi, 100));
            prop_assert!(p_hi <= p_lo + 1e-15);
        }
    }
}
