//! Tilted cumulants of the pairwise score and the error-exponent solver.
//!
//! For a sent pair (x, y) and an independent competitor X′ ~ Px, the
//! pairwise tilt is r = ln ν(X′, y) − ln ν(x, y) and
//!
//! ```text
//! Z_{x,y}(λ) = ln E[e^{λ r}] = ln A_λ(y) − λ ln ν(x,y),
//! A_λ(y)     = Σ_{x′} Px(x′) ν(x′, y)^λ.
//! ```
//!
//! Terms with ν = 0 drop out of A_λ for λ > 0 (e^{λ·(−∞)} = 0). The
//! derivatives Z′, Z″, Z‴ in λ are the tilted mean/variance/third central
//! moment of ln ν(X′, y), so Z″ and Z‴ depend on y alone.
//!
//! The exponent objective is f(α) = αR + Λ(α) with
//! Λ(α) = ln E[e^{α Z(1/(1+α))}] over (X, Y) ~ Px × W; f′(α) = R + μ₀(α)
//! because the coupled η = 1/(1+α) makes the λ-derivative term vanish
//! (μ₁ ≡ 0 along the curve). The minimizer ρ and the moments of
//! (Z(η), Z′(η)) under the ρ-tilted measure feed every asymptotic formula.

use crate::channel::Channel;
use crate::num::{log_sum_exp, newton_bracketed};
use crate::{Error, Result};

/// Rates closer to capacity than this margin are rejected (ρ → 0 blowup).
pub const RATE_MARGIN: f64 = 1e-8;

/// |f′(1)| below this threshold classifies the rate as exactly critical.
pub const CRITICAL_TOL: f64 = 1e-10;

/// Tilted statistics of ln ν(X′, y) at one output under weight ∝ Px·ν^λ.
#[derive(Debug, Clone, Copy)]
pub(crate) struct OutputTilt {
    /// ln A_λ(y).
    pub log_a: f64,
    /// Tilted mean of ln ν(X′, y).
    pub mean: f64,
    /// Tilted variance.
    pub var: f64,
    /// Tilted third central moment.
    pub third: f64,
}

/// Computes `OutputTilt` for output `y` at tilt `lam > 0` (or `lam = 0`,
/// where inputs with ν = 0 still carry weight only in A via their absence —
/// callers here always pass `lam > 0`).
pub(crate) fn output_tilt(ch: &Channel, y: usize, lam: f64) -> OutputTilt {
    let nx = ch.num_inputs();
    let mut logs = Vec::with_capacity(nx);
    let mut vals = Vec::with_capacity(nx);
    for x in 0..nx {
        let ln_nu = ch.log_nu(x, y);
        if ln_nu == f64::NEG_INFINITY {
            continue;
        }
        logs.push(ch.px(x).ln() + lam * ln_nu);
        vals.push(ln_nu);
    }
    let log_a = log_sum_exp(&logs);
    let mut mean = 0.0;
    for (lw, v) in logs.iter().zip(&vals) {
        mean += (lw - log_a).exp() * v;
    }
    let (mut var, mut third) = (0.0, 0.0);
    for (lw, v) in logs.iter().zip(&vals) {
        let w = (lw - log_a).exp();
        let d = v - mean;
        var += w * d * d;
        third += w * d * d * d;
    }
    OutputTilt {
        log_a,
        mean,
        var,
        third,
    }
}

/// Λ(α) = ln E[e^{α Z(1/(1+α))}] for α ∈ (0, 1]. Equals minus Gallager's
/// E₀(α) at the same input distribution.
pub fn lambda_alpha(ch: &Channel, alpha: f64) -> f64 {
    assert!(alpha > 0.0 && alpha <= 1.0, "alpha must lie in (0,1]");
    log_z_mgf(ch, alpha, 1.0 / (1.0 + alpha))
}

/// ln E[e^{ρ Z(λ)}] with independently chosen tilt ρ and argument λ.
pub fn log_z_mgf(ch: &Channel, rho: f64, lam: f64) -> f64 {
    let tilts: Vec<OutputTilt> = (0..ch.num_outputs())
        .map(|y| output_tilt(ch, y, lam))
        .collect();
    let mut terms = Vec::new();
    for x in 0..ch.num_inputs() {
        for y in 0..ch.num_outputs() {
            let j = ch.joint(x, y);
            if j > 0.0 {
                let z = tilts[y].log_a - lam * ch.log_nu(x, y);
                terms.push(j.ln() + rho * z);
            }
        }
    }
    log_sum_exp(&terms)
}

/// Moments of (Z(η), Z′(η)) under the ρ-tilted measure
/// dP_ρ ∝ e^{ρ Z(η)} dP.
#[derive(Debug, Clone, Copy)]
pub struct TiltedMoments {
    /// E_ρ[Z(η)].
    pub mu0: f64,
    /// E_ρ[Z′(η)]; identically 0 when η = 1/(1+ρ).
    pub mu1: f64,
    /// E_ρ[Z″(η)] ≥ 0.
    pub mu2: f64,
    /// E_ρ[Z‴(η)].
    pub mu3: f64,
    /// Var_ρ(Z).
    pub sigma00: f64,
    /// Cov_ρ(Z, Z′).
    pub sigma01: f64,
    /// Var_ρ(Z′).
    pub sigma11: f64,
    /// ln E[e^{ρ Z(η)}], the tilt normalizer.
    pub log_mgf: f64,
}

impl TiltedMoments {
    /// det of the covariance of (Z, Z′), clamped at 0 against roundoff.
    pub fn det_sigma(&self) -> f64 {
        (self.sigma00 * self.sigma11 - self.sigma01 * self.sigma01).max(0.0)
    }
}

/// Computes the tilted moments at an arbitrary (ρ, η) pair.
pub fn tilted_moments(ch: &Channel, rho: f64, eta: f64) -> TiltedMoments {
    let tilts: Vec<OutputTilt> = (0..ch.num_outputs())
        .map(|y| output_tilt(ch, y, eta))
        .collect();
    // (log joint weight, Z, Z′, Z″, Z‴) per support pair, x-major order.
    let mut rows: Vec<(f64, f64, f64, f64, f64)> = Vec::new();
    for x in 0..ch.num_inputs() {
        for y in 0..ch.num_outputs() {
            let j = ch.joint(x, y);
            if j > 0.0 {
                let t = &tilts[y];
                let ln_nu = ch.log_nu(x, y);
                let z = t.log_a - eta * ln_nu;
                rows.push((j.ln() + rho * z, z, t.mean - ln_nu, t.var, t.third));
            }
        }
    }
    let logs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let log_mgf = log_sum_exp(&logs);
    let (mut mu0, mut mu1, mut mu2, mut mu3) = (0.0, 0.0, 0.0, 0.0);
    for r in &rows {
        let w = (r.0 - log_mgf).exp();
        mu0 += w * r.1;
        mu1 += w * r.2;
        mu2 += w * r.3;
        mu3 += w * r.4;
    }
    let (mut s00, mut s01, mut s11) = (0.0, 0.0, 0.0);
    for r in &rows {
        let w = (r.0 - log_mgf).exp();
        let d0 = r.1 - mu0;
        let d1 = r.2 - mu1;
        s00 += w * d0 * d0;
        s01 += w * d0 * d1;
        s11 += w * d1 * d1;
    }
    TiltedMoments {
        mu0,
        mu1,
        mu2,
        mu3,
        sigma00: s00,
        sigma01: s01,
        sigma11: s11,
        log_mgf,
    }
}

/// Position of the rate relative to the critical rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// R > R_crit: interior optimizer ρ < 1.
    AboveCritical,
    /// R = R_crit within [`CRITICAL_TOL`].
    AtCritical,
    /// R < R_crit: optimizer clamped at ρ = 1.
    BelowCritical,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::AboveCritical => "above_critical",
            Regime::AtCritical => "at_critical",
            Regime::BelowCritical => "below_critical",
        }
    }
}

/// Output of the exponent solve at one rate.
#[derive(Debug, Clone, Copy)]
pub struct TiltedSolution {
    pub rate: f64,
    pub rho: f64,
    pub eta: f64,
    pub regime: Regime,
    /// E_r(R) = −min_α {αR + Λ(α)}.
    pub error_exponent: f64,
    pub critical_rate: f64,
    pub mutual_information: f64,
    pub moments: TiltedMoments,
}

/// μ₀ and σ₀₀ along the coupled curve η = 1/(1+α); σ₀₀ is dμ₀/dα there.
fn mu0_curve(ch: &Channel, alpha: f64) -> (f64, f64) {
    let m = tilted_moments(ch, alpha, 1.0 / (1.0 + alpha));
    (m.mu0, m.sigma00)
}

/// Largest rate whose optimizer stays at ρ = 1: R_crit = −μ₀ at (ρ, η) = (1, ½).
pub fn critical_rate(ch: &Channel) -> f64 {
    -mu0_curve(ch, 1.0).0
}

/// Solves min_{α ∈ (0,1]} {αR + Λ(α)} and evaluates the tilted moments at
/// the optimum.
///
/// Requires 0 < R ≤ I(X;Y) − [`RATE_MARGIN`]. Fails for singular channels
/// (μ₂ = 0, i.e. ν constant per output).
pub fn solve_exponent(ch: &Channel, rate: f64) -> Result<TiltedSolution> {
    if !rate.is_finite() || rate <= 0.0 {
        return Err(Error::Domain(format!("rate must be positive, got {rate}")));
    }
    let info = ch.mutual_information();
    if rate > info - RATE_MARGIN {
        return Err(Error::Domain(format!(
            "rate {rate} is not below mutual information {info} by at least {RATE_MARGIN}"
        )));
    }
    let r_crit = critical_rate(ch);
    let d1 = rate - r_crit;
    let (rho, regime) = if d1 > CRITICAL_TOL {
        // Interior root of μ₀(α) = −R; μ₀ is increasing with derivative σ₀₀.
        let rho = newton_bracketed(
            |a| {
                let (m0, s00) = mu0_curve(ch, a);
                (m0, s00)
            },
            1e-8,
            1.0,
            -rate,
            1e-13,
        );
        (rho, Regime::AboveCritical)
    } else if d1 >= -CRITICAL_TOL {
        (1.0, Regime::AtCritical)
    } else {
        (1.0, Regime::BelowCritical)
    };
    let eta = 1.0 / (1.0 + rho);
    let moments = tilted_moments(ch, rho, eta);
    if moments.mu2 <= 1e-14 {
        return Err(Error::Domain(
            "singular channel: pairwise score has zero tilted variance".into(),
        ));
    }
    let error_exponent = -(rho * rate + moments.log_mgf);
    Ok(TiltedSolution {
        rate,
        rho,
        eta,
        regime,
        error_exponent,
        critical_rate: r_crit,
        mutual_information: info,
        moments,
    })
}

/// Per-output √W moments and the variance constant of the exponent-only
/// asymptote: ω_m(y) = Σ_x Px (ln W)^m √W, and
/// μ₂′ = 2 Σ_y (ω₀ω₂ − ω₁²) / Σ_y ω₀².
#[derive(Debug, Clone)]
pub struct SqrtWMoments {
    /// Rows (ω₀, ω₁, ω₂) per output.
    pub omega: Vec<[f64; 3]>,
    pub mu2_prime: f64,
    /// μ₂′/2, the value matched by the tilted μ₂ and σ₁₁ at ρ = 1.
    pub mu2_check: f64,
}

pub fn sqrt_w_moments(ch: &Channel) -> SqrtWMoments {
    let mut omega = Vec::with_capacity(ch.num_outputs());
    let mut num = 0.0;
    let mut den = 0.0;
    for y in 0..ch.num_outputs() {
        let mut o = [0.0_f64; 3];
        for x in 0..ch.num_inputs() {
            let w = ch.w(x, y);
            if w > 0.0 {
                let s = ch.px(x) * w.sqrt();
                let l = w.ln();
                o[0] += s;
                o[1] += s * l;
                o[2] += s * l * l;
            }
        }
        num += o[0] * o[2] - o[1] * o[1];
        den += o[0] * o[0];
        omega.push(o);
    }
    let mu2_prime = 2.0 * num / den;
    SqrtWMoments {
        omega,
        mu2_prime,
        mu2_check: mu2_prime / 2.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bsc25() -> Channel {
        Channel::new(&[vec![0.75, 0.25], vec![0.25, 0.75]], None).unwrap()
    }

    fn basym() -> Channel {
        Channel::new(&[vec![0.8, 0.2], vec![0.3, 0.7]], None).unwrap()
    }

    // Reference values below are frozen from a 50-digit computation of the
    // defining sums (independent of this implementation).

    #[test]
    fn lambda_alpha_matches_references() {
        let ch = bsc25();
        assert!((lambda_alpha(&ch, 1.0) - (-0.069_336_464_195_073_91)).abs() < 1e-14);
        assert!((lambda_alpha(&ch, 0.3) - (-0.031_085_652_776_474_983)).abs() < 1e-14);
        let ch = basym();
        assert!((lambda_alpha(&ch, 1.0) - (-0.070_388_297_909_177_52)).abs() < 1e-14);
        assert!((lambda_alpha(&ch, 0.3) - (-0.031_524_611_282_293_71)).abs() < 1e-14);
    }

    #[test]
    fn lambda_alpha_equals_product_form() {
        // Λ(α) = ln Σ_y (Σ_x Px W^{1/(1+α)})^{1+α}: an algebraic identity of
        // the tilted definition, checked numerically on a non-uniform input.
        let ch = Channel::new(
            &[vec![0.6, 0.3, 0.1], vec![0.1, 0.5, 0.4]],
            Some(&[0.3, 0.7]),
        )
        .unwrap();
        for &a in &[0.2, 0.5, 0.8, 1.0] {
            let eta = 1.0 / (1.0 + a);
            let mut s = 0.0;
            for y in 0..ch.num_outputs() {
                let inner: f64 = (0..ch.num_inputs())
                    .map(|x| ch.px(x) * ch.w(x, y).powf(eta))
                    .sum();
                s += inner.powf(1.0 + a);
            }
            assert!(
                (lambda_alpha(&ch, a) - s.ln()).abs() < 1e-13,
                "alpha = {a}"
            );
        }
    }

    #[test]
    fn critical_rates_match_references() {
        assert!((critical_rate(&bsc25()) - 0.036_340_782_870_473_586).abs() < 1e-13);
        assert!((critical_rate(&basym()) - 0.036_945_377_696_106_59).abs() < 1e-13);
        let abec =
            Channel::new(&[vec![0.8, 0.0, 0.2], vec![0.0, 0.6, 0.4]], None).unwrap();
        assert!((critical_rate(&abec) - 0.384_945_291_826_562_73).abs() < 1e-13);
    }

    #[test]
    fn below_critical_solution_bsc() {
        let ch = bsc25();
        let ts = solve_exponent(&ch, 0.01).unwrap();
        assert_eq!(ts.regime, Regime::BelowCritical);
        assert_eq!(ts.rho, 1.0);
        assert!((ts.error_exponent - 0.059_336_464_195_073_91).abs() < 1e-13);
        let m = ts.moments;
        assert!(m.mu1.abs() < 1e-15);
        assert!((m.mu2 - 0.280_073_481_050_976_88).abs() < 1e-13);
        assert!((m.sigma11 - 0.280_073_481_050_976_88).abs() < 1e-13);
        assert!((m.sigma00 - 0.070_018_370_262_744_22).abs() < 1e-13);
        assert!((m.sigma01 - 0.140_036_740_525_488_44).abs() < 1e-13);
    }

    #[test]
    fn above_critical_solution_bsc() {
        let ch = bsc25();
        let ts = solve_exponent(&ch, 0.08).unwrap();
        assert_eq!(ts.regime, Regime::AboveCritical);
        assert!((ts.rho - 0.316_645_431_479_850_9).abs() < 1e-11);
        assert!((ts.error_exponent - 0.007_101_291_469_794_86).abs() < 1e-13);
        let m = ts.moments;
        assert!((m.mu0 + 0.08).abs() < 1e-12, "stationarity");
        assert!(m.mu1.abs() < 1e-12);
        assert!((m.mu2 - 0.254_761_123_246_208_02).abs() < 1e-11);
        assert!((m.sigma00 - 0.146_958_761_040_365_92).abs() < 1e-11);
    }

    #[test]
    fn above_critical_solution_basym() {
        let ch = basym();
        let ts = solve_exponent(&ch, 0.1).unwrap();
        assert!((ts.rho - 0.173_805_268_625_095_67).abs() < 1e-11);
        assert!((ts.error_exponent - 0.002_636_262_503_548_752).abs() < 1e-13);
        let m = ts.moments;
        assert!((m.mu2 - 0.245_912_471_335_518_19).abs() < 1e-11);
        assert!((m.sigma01 - 0.209_500_227_941_182_24).abs() < 1e-11);
        assert!((m.det_sigma() - 1.187_303_148_627_105_4e-4).abs() < 1e-12);
    }

    #[test]
    fn rate_domain_checks() {
        let ch = bsc25();
        assert!(solve_exponent(&ch, 0.0).is_err());
        assert!(solve_exponent(&ch, -0.1).is_err());
        // I ≈ 0.1308; anything at or above is rejected.
        assert!(solve_exponent(&ch, 0.14).is_err());
        assert!(solve_exponent(&ch, ch.mutual_information()).is_err());
    }

    #[test]
    fn sqrt_w_moments_bsc() {
        let ch = bsc25();
        let g = sqrt_w_moments(&ch);
        // ω₀ = 0.5√0.75 + 0.5√0.25 per output.
        let w0 = 0.5 * 0.75_f64.sqrt() + 0.5 * 0.25_f64.sqrt();
        assert!((g.omega[0][0] - w0).abs() < 1e-15);
        assert!((g.mu2_prime - 0.560_146_962_101_953_76).abs() < 1e-13);
        // Remark-style identity: tilted μ₂ = σ₁₁ = μ₂′/2 at ρ = 1.
        let m = tilted_moments(&ch, 1.0, 0.5);
        assert!((m.mu2 - g.mu2_check).abs() < 1e-12);
        assert!((m.sigma11 - g.mu2_check).abs() < 1e-12);
    }

    #[test]
    fn ternary_symmetric_references() {
        let p = [0.7, 0.2, 0.1];
        let w: Vec<Vec<f64>> = (0..3)
            .map(|x| (0..3).map(|y| p[(3 + y - x) % 3]).collect())
            .collect();
        let ch = Channel::new(&w, None).unwrap();
        assert!((critical_rate(&ch) - 0.082_855_021_808_070_815).abs() < 1e-13);
        let ts = solve_exponent(&ch, 0.1).unwrap();
        assert!((ts.rho - 0.815_495_017_368_167_7).abs() < 1e-11);
        assert!((ts.error_exponent - 0.060_132_307_539_271_26).abs() < 1e-13);
        // Single-line support: Z = c + ηZ′ exactly, so detΣ = 0.
        assert!(ts.moments.det_sigma() < 1e-15);
    }
}
