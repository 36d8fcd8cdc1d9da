//! Closed-form asymptotics for the random-coding error probability and the
//! machinery to compare them against the exact engine.
//!
//! All values are natural-log probabilities of the leading-order term; the
//! (1 + o(1)) factor of each asymptotic statement is never folded in, it is
//! surfaced through the ratio diagnostics of [`compare_report`].
//!
//! Three regimes, driven by the exponent solve: above the critical rate the
//! optimizer ρ < 1 is interior and the prefactor decays as n^{-(1+ρ)/2};
//! at and below the critical rate ρ = 1 and the prefactor is n^{-1}, the two
//! differing by exactly a factor 2. The lattice span h of the score enters
//! through hη/(e^{hη} − 1); h = 0 reduces every formula to its nonlattice
//! form.

use crate::channel::Channel;
use crate::exact::{exact_prc, envelope_bounds, ExactOptions};
use crate::gfun::{psi_eval, union_coefficient};
use crate::lattice::{classify, ClassificationCell, LatticeClassification};
use crate::num::{expm1_over_x, LN_2PI};
use crate::tilting::{solve_exponent, sqrt_w_moments, Regime, TiltedSolution};
use crate::{Error, Result};

/// One evaluated refined asymptotic.
#[derive(Debug, Clone, Copy)]
pub struct RefinedAsymptotic {
    pub log_prob: f64,
    /// Set when the score pair is not strongly nonlattice and the rate is
    /// above critical: the formula is then evaluated outside its hypotheses
    /// and may be off by a bounded oscillating factor.
    pub outside_hypotheses: bool,
}

/// Leading-order refined asymptotic of ln P_RC at block length n.
///
/// Above critical (ρ < 1):
/// ln ψ_{ρ,h} + ((1−ρ)/2) ln μ₂ − ρ ln η − ((1+ρ)/2) ln(2πn)
/// − ½ ln(μ₂σ₀₀ + ρ·detΣ) − nE_r.
///
/// At critical: ln(h/(e^{ηh}−1)) − ln 2 − ½ ln(2πn(μ₂+σ₁₁)) − nE_r, with
/// h/(e^{ηh}−1) → 1/η as h → 0; below critical the same without the ln 2.
pub fn refined_asymptotic(
    ts: &TiltedSolution,
    lc: &LatticeClassification,
    n: u32,
) -> Result<RefinedAsymptotic> {
    if n == 0 {
        return Err(Error::Domain("block length must be at least 1".into()));
    }
    let nf = n as f64;
    let m = &ts.moments;
    let log_prob = match ts.regime {
        Regime::AboveCritical => {
            let psi = psi_eval(ts.rho, lc.span, ts.eta)?;
            psi.ln() + 0.5 * (1.0 - ts.rho) * m.mu2.ln() - ts.rho * ts.eta.ln()
                - 0.5 * (1.0 + ts.rho) * (LN_2PI + nf.ln())
                - 0.5 * (m.mu2 * m.sigma00 + ts.rho * m.det_sigma()).ln()
                - nf * ts.error_exponent
        }
        Regime::AtCritical | Regime::BelowCritical => {
            // h/(e^{ηh}−1) = (1/η)·(ηh)/(e^{ηh}−1), stable through h = 0.
            let lead = -ts.eta.ln() - expm1_over_x(lc.span * ts.eta).ln();
            let two = if ts.regime == Regime::AtCritical {
                std::f64::consts::LN_2
            } else {
                0.0
            };
            lead - two - 0.5 * (LN_2PI + (nf * (m.mu2 + m.sigma11)).ln()) - nf * ts.error_exponent
        }
    };
    Ok(RefinedAsymptotic {
        log_prob,
        outside_hypotheses: ts.regime == Regime::AboveCritical && !lc.strongly_nonlattice,
    })
}

/// Leading-order asymptotic of the smoothed expectation
/// E[g_h((1/(c₂√n)) e^{n(Z̄+R) − n Z̄′²/(2c₁)})] for free constants c₁, c₂.
///
/// ρ < 1: ln ψ_{ρ,h} − ρ ln(c₂√n) − ½ ln(2πn(σ₀₀ + ρ·detΣ/c₁)) − nE_r;
/// ρ = 1: ln(hη/(e^{hη}−1)) − ln(c₂√n) − ½ ln(1 + σ₁₁/c₁) − nE_r, minus an
/// additional ln 2 exactly at the critical rate.
///
/// Substituting c₁ = μ₂ and c₂ = η√(2πμ₂) reproduces
/// [`refined_asymptotic`] identically; the unit tests assert that algebra.
pub fn smoothed_expectation_asymptotic(
    ts: &TiltedSolution,
    lc: &LatticeClassification,
    n: u32,
    c1: f64,
    c2: f64,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("block length must be at least 1".into()));
    }
    if !(c1 > 0.0) || !(c2 > 0.0) {
        return Err(Error::Domain(format!(
            "scale constants must be positive, got c1 = {c1}, c2 = {c2}"
        )));
    }
    let nf = n as f64;
    let m = &ts.moments;
    let log_scale = c2.ln() + 0.5 * nf.ln();
    Ok(match ts.regime {
        Regime::AboveCritical => {
            let psi = psi_eval(ts.rho, lc.span, ts.eta)?;
            psi.ln() - ts.rho * log_scale
                - 0.5 * (LN_2PI + (nf * (m.sigma00 + ts.rho * m.det_sigma() / c1)).ln())
                - nf * ts.error_exponent
        }
        Regime::AtCritical | Regime::BelowCritical => {
            let two = if ts.regime == Regime::AtCritical {
                std::f64::consts::LN_2
            } else {
                0.0
            };
            -expm1_over_x(lc.span * ts.eta).ln() - log_scale - two
                - 0.5 * (1.0 + m.sigma11 / c1).ln_1p_m()
                - nf * ts.error_exponent
        }
    })
}

/// Exponent-only reference asymptote for nonlattice channels strictly below
/// the critical rate: −ln η − ½ ln(2πnμ₂′) − nE_r with η = ½ and μ₂′ from
/// the √W moments. Coincides with the refined below-critical value because
/// μ₂ + σ₁₁ = μ₂′ there.
pub fn gallager_asymptotic(ch: &Channel, n: u32, rate: f64) -> Result<f64> {
    let ts = solve_exponent(ch, rate)?;
    if ts.regime != Regime::BelowCritical {
        return Err(Error::NotApplicable(format!(
            "rate {rate} is not strictly below the critical rate {}",
            ts.critical_rate
        )));
    }
    let (span, _) = crate::lattice::classify_nu_lattice(ch, 1e-9)?;
    if span > 0.0 {
        return Err(Error::NotApplicable(
            "exponent-only asymptote applies to nonlattice channels; this score is lattice".into(),
        ));
    }
    let g = sqrt_w_moments(ch);
    let nf = n as f64;
    Ok(-ts.eta.ln() - 0.5 * (LN_2PI + (nf * g.mu2_prime).ln()) - nf * ts.error_exponent)
}

/// Union-bound asymptote: the above-critical refined formula with ψ_{ρ,h}
/// replaced by the union coefficient. Defined for ρ < 1 only.
pub fn union_asymptotic(
    ts: &TiltedSolution,
    lc: &LatticeClassification,
    n: u32,
) -> Result<f64> {
    if ts.regime != Regime::AboveCritical {
        return Err(Error::NotApplicable(
            "union asymptote requires an interior optimizer (rate above critical)".into(),
        ));
    }
    let nf = n as f64;
    let m = &ts.moments;
    let uc = union_coefficient(ts.rho, lc.span, ts.eta)?;
    Ok(uc.ln() + 0.5 * (1.0 - ts.rho) * m.mu2.ln() - ts.rho * ts.eta.ln()
        - 0.5 * (1.0 + ts.rho) * (LN_2PI + nf.ln())
        - 0.5 * (m.mu2 * m.sigma00 + ts.rho * m.det_sigma()).ln()
        - nf * ts.error_exponent)
}

/// Options for [`compare_report`].
#[derive(Debug, Clone)]
pub struct CompareOptions {
    /// Slack of the sandwich evaluation.
    pub eps: f64,
    /// Variance slack of the sandwich; `None` selects μ₂/4.
    pub delta2: Option<f64>,
    pub exact: ExactOptions,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            eps: 0.1,
            delta2: None,
            exact: ExactOptions::default(),
        }
    }
}

/// One block length of a comparison sweep. `None` encodes not-applicable or
/// not-feasible, and is rendered as an explicit marker downstream.
#[derive(Debug, Clone, Copy)]
pub struct BoundRow {
    pub n: u32,
    /// M = ⌈e^{nR}⌉, carried as f64 to survive nR beyond integer range.
    pub m: f64,
    pub log_exact: Option<f64>,
    pub log_envelope_lo: Option<f64>,
    pub log_envelope_hi: Option<f64>,
    pub log_refined: f64,
    pub log_gallager: Option<f64>,
    pub log_union: Option<f64>,
    /// exp(log_refined − log_exact) when the exact value exists.
    pub ratio_refined: Option<f64>,
}

/// A comparison sweep at one rate.
#[derive(Debug, Clone)]
pub struct CompareReport {
    pub rate: f64,
    pub rho: f64,
    pub regime: Regime,
    pub cell: ClassificationCell,
    pub span: f64,
    pub outside_hypotheses: bool,
    pub rows: Vec<BoundRow>,
}

/// Runs every bound that applies at each n, attempting the exact engine and
/// the sandwich where the type space fits the caps. Rows come back sorted by
/// n ascending; infeasible or inapplicable entries are `None`, never
/// silently dropped.
pub fn compare_report(
    ch: &Channel,
    rate: f64,
    n_list: &[u32],
    opts: &CompareOptions,
) -> Result<CompareReport> {
    let ts = solve_exponent(ch, rate)?;
    let lc = classify(ch, ts.eta, opts.exact.snap_tol)?;
    let delta2 = opts.delta2.unwrap_or(ts.moments.mu2 / 4.0);
    let mut ns = n_list.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let mut rows = Vec::with_capacity(ns.len());
    for &n in &ns {
        let m = (n as f64 * rate).exp().ceil();
        let refined = refined_asymptotic(&ts, &lc, n)?;
        let log_exact = match exact_prc(ch, n, m, lc.span, &opts.exact) {
            Ok(v) => Some(v),
            Err(Error::Resource(_)) => None,
            Err(e) => return Err(e),
        };
        let envelope = match envelope_bounds(ch, n, rate, opts.eps, delta2, &opts.exact) {
            Ok(pair) => Some(pair),
            Err(Error::Resource(_)) => None,
            Err(e) => return Err(e),
        };
        let log_gallager = match gallager_asymptotic(ch, n, rate) {
            Ok(v) => Some(v),
            Err(Error::NotApplicable(_)) => None,
            Err(e) => return Err(e),
        };
        let log_union = match union_asymptotic(&ts, &lc, n) {
            Ok(v) => Some(v),
            Err(Error::NotApplicable(_)) => None,
            Err(e) => return Err(e),
        };
        rows.push(BoundRow {
            n,
            m,
            log_exact,
            log_envelope_lo: envelope.map(|p| p.0),
            log_envelope_hi: envelope.map(|p| p.1),
            log_refined: refined.log_prob,
            log_gallager,
            log_union,
            ratio_refined: log_exact.map(|e| (refined.log_prob - e).exp()),
        });
    }
    Ok(CompareReport {
        rate,
        rho: ts.rho,
        regime: ts.regime,
        cell: lc.cell,
        span: lc.span,
        outside_hypotheses: ts.regime == Regime::AboveCritical && !lc.strongly_nonlattice,
        rows,
    })
}
