//! Saddlepoint approximants for the point mass and upper tail of the
//! competitor score sum Σᵢ ln ν(X′ᵢ, yᵢ), conditionally on an output
//! sequence type.
//!
//! With Λ_V(λ) = Σ_y n_y ln A_λ(y) the cumulant generating function of the
//! sum (the −∞ mass contributes zero to every exponential moment), the tilt
//! λ* solves Λ_V′(λ*) = x. Lattice mode, for a sum living on a grid of span
//! h_V containing x:
//!
//! ```text
//! ln P[Σ = x]      ≈ ln h_V − (λ*x − Λ_V) − ½ ln(2π Λ_V″),
//! ln P[Σ ≥ x + h_V] ≈ ln P[Σ = x] − ln(e^{h_V λ*} − 1),
//! ```
//!
//! and nonlattice mode: ln P[Σ ≥ x] ≈ −(λ*x − Λ_V) − ln λ* − ½ ln(2π Λ_V″),
//! with no point mass. h_V is the span of the *sum*: the channel span h
//! times the integer gcd of the per-output multipliers present in the type.
//! Leading-order formulas only; no higher-order corrections are applied, and
//! accuracy is established against the exact convolution engine in tests.

use crate::channel::Channel;
use crate::exact::JointType;
use crate::lattice::LatticeClassification;
use crate::num::{newton_bracketed, LN_2PI};
use crate::tilting::output_tilt;
use crate::{Error, Result};

/// Saddlepoint solve and approximants at one (type, threshold) pair.
#[derive(Debug, Clone, Copy)]
pub struct SaddleResult {
    pub lambda_star: f64,
    /// Approximate ln P[Σ = x]; −∞ in nonlattice mode.
    pub log_point_mass: f64,
    /// Approximate ln P[Σ ≥ x + h_V] (lattice) or ln P[Σ ≥ x] (nonlattice).
    pub log_tail: f64,
    /// Λ_V(λ*).
    pub cgf_value: f64,
    /// Λ_V″(λ*) > 0.
    pub cgf_curvature: f64,
}

/// Λ_V and its first two derivatives at tilt `lam`, for the output counts.
fn cgf(ch: &Channel, y_counts: &[u32], lam: f64) -> (f64, f64, f64) {
    let (mut v, mut d1, mut d2) = (0.0, 0.0, 0.0);
    for (y, &c) in y_counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let t = output_tilt(ch, y, lam);
        let cf = c as f64;
        v += cf * t.log_a;
        d1 += cf * t.mean;
        d2 += cf * t.var;
    }
    (v, d1, d2)
}

/// Conditional-on-finite mean and essential supremum of the score sum.
fn mean_and_sup(ch: &Channel, y_counts: &[u32]) -> (f64, f64) {
    let mut mean = 0.0;
    let mut sup = 0.0;
    for (y, &c) in y_counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let t = output_tilt(ch, y, 0.0);
        mean += c as f64 * t.mean;
        let mx = (0..ch.num_inputs())
            .map(|x| ch.log_nu(x, y))
            .filter(|v| v.is_finite())
            .fold(f64::NEG_INFINITY, f64::max);
        sup += c as f64 * mx;
    }
    (mean, sup)
}

/// Solves Λ_V′(λ*) = x for λ* > 0.
///
/// Requires x strictly between the (finite-part) mean and the essential
/// supremum of the sum: below the mean is a `Domain` error (the tilt would
/// be nonpositive), at or above the supremum is `Saturated`.
pub fn solve_lambda_star(ch: &Channel, jt: &JointType, x: f64) -> Result<f64> {
    let yc = jt.y_counts(ch.num_inputs(), ch.num_outputs());
    solve_for_counts(ch, &yc, x)
}

fn solve_for_counts(ch: &Channel, y_counts: &[u32], x: f64) -> Result<f64> {
    let n: u32 = y_counts.iter().sum();
    if n == 0 {
        return Err(Error::Domain("empty output type".into()));
    }
    let (mean, sup) = mean_and_sup(ch, y_counts);
    let scale = 1e-12 * (sup.abs() + mean.abs()).max(1.0);
    if sup - mean <= scale {
        return Err(Error::Domain(
            "deterministic score: every present output has a single support point".into(),
        ));
    }
    if x >= sup - scale {
        return Err(Error::Saturated(format!(
            "tail point {x} is at or beyond the essential supremum {sup}"
        )));
    }
    if x <= mean {
        return Err(Error::Domain(format!(
            "tail point {x} is not above the conditional mean {mean}"
        )));
    }
    let mut hi = 1.0;
    let mut found = false;
    for _ in 0..120 {
        if cgf(ch, y_counts, hi).1 > x {
            found = true;
            break;
        }
        hi *= 2.0;
    }
    if !found {
        return Err(Error::Saturated(format!(
            "tail point {x} is numerically indistinguishable from the supremum {sup}"
        )));
    }
    Ok(newton_bracketed(
        |lam| {
            let (_, d1, d2) = cgf(ch, y_counts, lam);
            (d1, d2)
        },
        0.0,
        hi,
        x,
        1e-12,
    ))
}

/// Evaluates the saddlepoint approximants for the pairwise error event of a
/// joint type: the threshold is the type's own score Σ counts·ln ν, the
/// point mass approximates p₀, and the tail approximates p₊.
pub fn saddle_pair_probability(
    ch: &Channel,
    jt: &JointType,
    class: &LatticeClassification,
) -> Result<SaddleResult> {
    let yc = jt.y_counts(ch.num_inputs(), ch.num_outputs());
    let x = jt.threshold(ch);
    let lambda_star = solve_for_counts(ch, &yc, x)?;
    let (val, d1, d2) = cgf(ch, &yc, lambda_star);
    let n: u32 = yc.iter().sum();
    debug_assert!(
        (d1 - x).abs() <= 1e-9 * (n as f64).max(1.0),
        "stationarity residual too large: {}",
        (d1 - x).abs()
    );
    if d2 <= 0.0 {
        return Err(Error::Domain("flat cumulant curvature at the tilt".into()));
    }
    let exponent = lambda_star * x - val;
    let half_log = 0.5 * (LN_2PI + d2.ln());
    if class.span > 0.0 {
        // Span of the summed score: channel span times the gcd of the
        // multipliers of the outputs present in this type.
        let mut g: u64 = 0;
        let mut offset_sum = 0.0;
        for (y, &c) in yc.iter().enumerate() {
            if c == 0 {
                continue;
            }
            offset_sum += c as f64 * class.per_output[y].offset;
            if class.per_output[y].support_size >= 2 {
                g = gcd_u64(g, class.per_output[y].multiplier);
            }
        }
        let h_v = class.span * g as f64;
        let rel = (x - offset_sum) / h_v;
        if (rel - rel.round()).abs() > 1e-6 {
            return Err(Error::Domain(format!(
                "threshold {x} is off the lattice grid of the summed score (span {h_v})"
            )));
        }
        let log_pm = h_v.ln() - exponent - half_log;
        Ok(SaddleResult {
            lambda_star,
            log_point_mass: log_pm,
            log_tail: log_pm - (h_v * lambda_star).exp_m1().ln(),
            cgf_value: val,
            cgf_curvature: d2,
        })
    } else {
        Ok(SaddleResult {
            lambda_star,
            log_point_mass: f64::NEG_INFINITY,
            log_tail: -exponent - lambda_star.ln() - half_log,
            cgf_value: val,
            cgf_curvature: d2,
        })
    }
}

fn gcd_u64(a: u64, b: u64) -> u64 {
    let (mut a, mut b) = (a, b);
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::joint_types;
    use crate::lattice::{classify, SNAP_TOL};

    fn bsc25() -> Channel {
        Channel::new(&[vec![0.75, 0.25], vec![0.25, 0.75]], None).unwrap()
    }

    fn type_with_counts(ch: &Channel, n: u32, want: &[u32]) -> JointType {
        joint_types(ch, n, 1 << 24)
            .unwrap()
            .into_iter()
            .find(|t| t.counts == want)
            .unwrap()
    }

    #[test]
    fn solve_matches_bisection_oracle() {
        let ch = bsc25();
        let jt = type_with_counts(&ch, 10, &[4, 1, 2, 3]);
        let yc = jt.y_counts(2, 2);
        let (mean, sup) = mean_and_sup(&ch, &yc);
        let x = 0.5 * (mean + sup);
        let lam = solve_for_counts(&ch, &yc, x).unwrap();
        // Independent plain bisection on the derivative sign.
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        while cgf(&ch, &yc, hi).1 <= x {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if cgf(&ch, &yc, mid).1 < x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((lam - 0.5 * (lo + hi)).abs() < 1e-10);
        let (_, d1, d2) = cgf(&ch, &yc, lam);
        assert!((d1 - x).abs() < 1e-10);
        assert!(d2 > 0.0);
    }

    #[test]
    fn tilt_vanishes_at_the_mean() {
        let ch = bsc25();
        let yc = [6u32, 4];
        let (mean, sup) = mean_and_sup(&ch, &yc);
        let lam = solve_for_counts(&ch, &yc, mean + 1e-8 * (sup - mean)).unwrap();
        assert!(lam < 1e-6);
    }

    #[test]
    fn domain_and_saturation_errors() {
        let ch = bsc25();
        let yc = [3u32, 2];
        let (mean, sup) = mean_and_sup(&ch, &yc);
        assert!(matches!(
            solve_for_counts(&ch, &yc, mean - 0.1),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            solve_for_counts(&ch, &yc, sup),
            Err(Error::Saturated(_))
        ));
        assert!(matches!(
            solve_for_counts(&ch, &yc, sup + 1.0),
            Err(Error::Saturated(_))
        ));
    }

    #[test]
    fn deterministic_type_is_rejected() {
        let ch = Channel::new(&[vec![0.8, 0.0, 0.2], vec![0.0, 0.6, 0.4]], None).unwrap();
        // Only output 0 present: its conditional support is a single point.
        assert!(matches!(
            solve_for_counts(&ch, &[5, 0, 0], 1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn lattice_tail_point_mass_identity() {
        let ch = bsc25();
        let class = classify(&ch, 0.5, SNAP_TOL).unwrap();
        let jt = type_with_counts(&ch, 20, &[9, 3, 2, 6]);
        let r = saddle_pair_probability(&ch, &jt, &class).unwrap();
        let gap = r.log_point_mass - r.log_tail;
        let want = (class.span * r.lambda_star).exp_m1().ln();
        assert!((gap - want).abs() < 1e-12);
        assert!(r.cgf_curvature > 0.0);
        // Positive large-deviation exponent away from the mean.
        assert!(r.lambda_star * jt.threshold(&ch) - r.cgf_value > 0.0);
    }

    #[test]
    fn nonlattice_mode_has_no_point_mass() {
        let ch = Channel::new(&[vec![0.8, 0.2], vec![0.3, 0.7]], None).unwrap();
        let class = classify(&ch, 0.5, SNAP_TOL).unwrap();
        let jt = type_with_counts(&ch, 20, &[9, 3, 2, 6]);
        let r = saddle_pair_probability(&ch, &jt, &class).unwrap();
        assert_eq!(r.log_point_mass, f64::NEG_INFINITY);
        assert!(r.log_tail.is_finite());
    }

    #[test]
    fn lattice_tail_tracks_exact_convolution() {
        // Balanced BSC type at n = 60: the approximant should already be
        // within a few percent of the exact tail.
        let ch = bsc25();
        let class = classify(&ch, 0.5, SNAP_TOL).unwrap();
        let jt = type_with_counts(&ch, 60, &[23, 7, 8, 22]);
        let r = saddle_pair_probability(&ch, &jt, &class).unwrap();
        let opts = crate::exact::ExactOptions::default();
        let sd = crate::exact::score_distribution(
            &ch,
            &jt.y_counts(2, 2),
            class.span,
            &opts,
        )
        .unwrap();
        let stats = crate::exact::pairwise_stats(&sd, jt.threshold(&ch), &opts);
        let rel_pm = (r.log_point_mass.exp() - stats.p_zero).abs() / stats.p_zero;
        let rel_tl = (r.log_tail.exp() - stats.p_plus).abs() / stats.p_plus;
        assert!(rel_pm < 0.10, "point mass rel err {rel_pm}");
        assert!(rel_tl < 0.10, "tail rel err {rel_tl}");
    }
}
