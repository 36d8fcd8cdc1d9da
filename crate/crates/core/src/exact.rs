//! Ground-truth machinery: the exact M-codeword error formula q_M, exact
//! score-sum distributions by convolution, joint-type enumeration, and the
//! exact random-coding error probability P_RC(n, M).
//!
//! Everything is Rao-Blackwellized: conditioned on the joint type of the
//! sent codeword and the received sequence, the pairwise tie/exceedance
//! probabilities (p₊, p₀) are computed exactly from the convolved competitor
//! score distribution, and the M-codeword error is the closed form q_M. No
//! sampling is involved anywhere, so results are deterministic to roundoff.
//!
//! Probabilities of rare events are carried in log domain throughout; at
//! usable block lengths P_RC reaches e^{−nE_r} far below f64 underflow in
//! linear scale.

use crate::channel::Channel;
use crate::num::{lse2, LnFactorial, OnlineLogSum};
use crate::{Error, Result};
use std::collections::HashMap;

/// Tuning knobs for the exact engine.
#[derive(Debug, Clone, Copy)]
pub struct ExactOptions {
    /// Absolute tolerance for merging nearby score values in dense mode.
    pub merge_tol: f64,
    /// Relative tolerance for snapping values onto a lattice grid and for
    /// threshold lookups.
    pub snap_tol: f64,
    /// Maximum number of atoms a score distribution may hold.
    pub atom_cap: usize,
    /// Maximum number of joint types to enumerate.
    pub type_cap: u64,
}

impl Default for ExactOptions {
    fn default() -> Self {
        ExactOptions {
            merge_tol: 1e-12,
            snap_tol: 1e-9,
            atom_cap: 2_000_000,
            type_cap: 10_000_000,
        }
    }
}

/// Exact q_M: the probability that at least one of M−1 independent
/// competitors beats the sent codeword, ties broken uniformly.
///
/// Closed form 1 − ((1−p₊)^M − (1−p₀−p₊)^M)/(M p₀), evaluated through
/// expm1/log1p primitives so that the result keeps full relative precision
/// both when q_M ≈ 0 and when q_M ≈ 1; the p₀ → 0 limit 1 − (1−p₊)^{M−1}
/// falls out of the same code path.
pub fn q_m_exact(m: f64, p_plus: f64, p_zero: f64) -> Result<f64> {
    check_q_args(m, p_plus, p_zero)?;
    if m == 1.0 {
        return Ok(0.0);
    }
    if p_plus >= 1.0 {
        return Ok(1.0);
    }
    let beta = p_zero / (1.0 - p_plus);
    if beta >= 0.70 {
        // Far from every cancellation regime: the two powers differ by the
        // factor (1−β)^M ≤ 0.3, so the direct closed form is stable.
        let a_pow = (m * (-p_plus).ln_1p()).exp();
        let s_all = p_plus + p_zero;
        let b_pow = if s_all >= 1.0 {
            0.0
        } else {
            (m * (-s_all).ln_1p()).exp()
        };
        return Ok((1.0 - (a_pow - b_pow) / (m * p_zero)).clamp(0.0, 1.0));
    }
    // S = (1−p₊)^M · E₁ · (1+c) with E₁ = (1−e^{−MD})/(MD), D = −ln(1−β),
    // and 1+c = D/p₀ expanded in series to survive β → 0.
    let d = -(-beta).ln_1p();
    let a = -(m * (-p_plus).ln_1p()).exp_m1();
    let e1_ratio = crate::num::one_m_exp_neg_over_x(m * d);
    let mut tail = 0.0;
    let mut pow = beta;
    for k in 1..200 {
        let term = pow / (k + 1) as f64;
        tail += term;
        if term < 1e-17 * (1.0 + tail) {
            break;
        }
        pow *= beta;
    }
    let c = (p_plus + tail) / (1.0 - p_plus);
    let s = (1.0 - a) * e1_ratio * (1.0 + c);
    if s < 0.5 {
        return Ok((1.0 - s).clamp(0.0, 1.0));
    }
    // q ≈ 0 region: expand 1 − (1−a)(1−e₁)(1+c) term by term.
    let e1 = crate::num::one_m_phi(m * d);
    let q = a + e1 - c - a * e1 + a * c + e1 * c - a * e1 * c;
    Ok(q.clamp(0.0, 1.0))
}

/// Limit-form approximations to q_M.
///
/// Lattice mode: 1 − e^{−Mp₊}(1 − e^{−Mp₀})/(Mp₀). Nonlattice mode:
/// 1 − e^{−Mp} with p = p₊ + p₀, folding the (asymptotically negligible)
/// tie mass into the exceedance.
pub fn q_m_approx(m: f64, p_plus: f64, p_zero: f64, lattice: bool) -> Result<f64> {
    check_q_args(m, p_plus, p_zero)?;
    if !lattice {
        return Ok(-(-m * (p_plus + p_zero)).exp_m1());
    }
    let a = -(-m * p_plus).exp_m1();
    let e1_ratio = crate::num::one_m_exp_neg_over_x(m * p_zero);
    let s = (1.0 - a) * e1_ratio;
    if s < 0.5 {
        Ok(1.0 - s)
    } else {
        let e1 = crate::num::one_m_phi(m * p_zero);
        Ok((a + e1 - a * e1).clamp(0.0, 1.0))
    }
}

fn check_q_args(m: f64, p_plus: f64, p_zero: f64) -> Result<()> {
    if !(m >= 1.0) || m.fract() != 0.0 && m < 9.0e15 {
        return Err(Error::Domain(format!(
            "codebook size must be an integer >= 1, got {m}"
        )));
    }
    for (name, p) in [("p_plus", p_plus), ("p_zero", p_zero)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("{name} must lie in [0,1], got {p}")));
        }
    }
    if p_plus + p_zero > 1.0 + 1e-12 {
        return Err(Error::Domain(format!(
            "p_plus + p_zero must not exceed 1, got {}",
            p_plus + p_zero
        )));
    }
    Ok(())
}

/// Support of a convolved score distribution.
#[derive(Debug, Clone)]
enum Support {
    /// Values offset + index·span; atoms sorted by index, log-probs.
    Lattice {
        offset: f64,
        span: f64,
        atoms: Vec<(i64, f64)>,
    },
    /// Sorted (value, log_prob) atoms, merged at the dense tolerance.
    Dense { atoms: Vec<(f64, f64)> },
}

/// Distribution of the competitor score sum Σᵢ ln ν(X′ᵢ, yᵢ) for a fixed
/// output sequence type.
///
/// Finite atoms are stored unnormalized together with `log_minf`, the mass
/// of −∞ (some X′ᵢ impossible under yᵢ); the two parts log-sum to 0.
#[derive(Debug, Clone)]
pub struct ScoreDistribution {
    support: Support,
    /// ln P[score = −∞]; `NEG_INFINITY` when the score is a.s. finite.
    pub log_minf: f64,
    /// Block length the distribution was convolved to.
    pub n: u32,
    /// suffix_log_mass[i] = ln Σ_{j ≥ i} p_j over finite atoms.
    suffix_log_mass: Vec<f64>,
}

/// Intermediate convolution state: finite atoms plus ln(finite mass).
#[derive(Debug, Clone)]
struct Partial {
    support: Support,
    log_finite: f64,
}

impl ScoreDistribution {
    /// Number of finite atoms.
    pub fn num_atoms(&self) -> usize {
        match &self.support {
            Support::Lattice { atoms, .. } => atoms.len(),
            Support::Dense { atoms } => atoms.len(),
        }
    }

    /// Iterates (value, log_prob) over finite atoms in increasing value order.
    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let lattice: Box<dyn Iterator<Item = (f64, f64)>> = match &self.support {
            Support::Lattice {
                offset,
                span,
                atoms,
            } => Box::new(
                atoms
                    .iter()
                    .map(move |&(k, lp)| (offset + k as f64 * span, lp)),
            ),
            Support::Dense { atoms } => Box::new(atoms.iter().copied()),
        };
        lattice
    }

    /// ln of total mass (finite + infinite); 0 up to accumulated roundoff.
    pub fn total_log_mass(&self) -> f64 {
        let finite = self.suffix_log_mass.first().copied().unwrap_or(f64::NEG_INFINITY);
        lse2(finite, self.log_minf)
    }

    fn build(support: Support, log_finite: f64, n: u32) -> Self {
        let mut support = support;
        if let Support::Lattice { atoms, .. } = &mut support {
            atoms.sort_by_key(|a| a.0);
        }
        let logs: Vec<f64> = match &support {
            Support::Lattice { atoms, .. } => atoms.iter().map(|a| a.1).collect(),
            Support::Dense { atoms } => atoms.iter().map(|a| a.1).collect(),
        };
        let mut suffix = vec![f64::NEG_INFINITY; logs.len() + 1];
        for i in (0..logs.len()).rev() {
            suffix[i] = lse2(logs[i], suffix[i + 1]);
        }
        // finite mass must agree with the tracked product of per-symbol
        // finite masses; log_minf is the stable complement of the latter.
        let log_minf = if log_finite >= 0.0 {
            f64::NEG_INFINITY
        } else {
            (-log_finite.exp_m1()).ln()
        };
        ScoreDistribution {
            support,
            log_minf,
            n,
            suffix_log_mass: suffix,
        }
    }

    /// ln P[score = t], resolving t against atoms at `tol` relative scale.
    pub fn log_mass_at(&self, t: f64, tol: f64) -> f64 {
        let atol = tol * t.abs().max(1.0);
        match &self.support {
            Support::Lattice {
                offset,
                span,
                atoms,
            } => {
                let r = (t - offset) / span;
                let k = r.round() as i64;
                if (offset + k as f64 * span - t).abs() > atol {
                    return f64::NEG_INFINITY;
                }
                match atoms.binary_search_by_key(&k, |a| a.0) {
                    Ok(i) => atoms[i].1,
                    Err(_) => f64::NEG_INFINITY,
                }
            }
            Support::Dense { atoms } => {
                let lo = atoms.partition_point(|a| a.0 < t - atol);
                let hi = atoms.partition_point(|a| a.0 <= t + atol);
                let mut acc = OnlineLogSum::new();
                for a in &atoms[lo..hi] {
                    acc.add(a.1);
                }
                acc.value()
            }
        }
    }

    /// ln P[score > t], with equality resolved at `tol` relative scale.
    pub fn log_mass_above(&self, t: f64, tol: f64) -> f64 {
        let atol = tol * t.abs().max(1.0);
        let idx = match &self.support {
            Support::Lattice {
                offset,
                span,
                atoms,
            } => {
                let r = (t - offset) / span;
                let k = r.round() as i64;
                let start = if (offset + k as f64 * span - t).abs() <= atol {
                    k + 1
                } else {
                    r.floor() as i64 + 1
                };
                atoms.partition_point(|a| a.0 < start)
            }
            Support::Dense { atoms } => atoms.partition_point(|a| a.0 <= t + atol),
        };
        self.suffix_log_mass[idx]
    }
}

/// Convolves two finite-atom supports; `work_cap` bounds the pair count.
fn convolve(a: &Support, b: &Support, opts: &ExactOptions) -> Result<Support> {
    let (la, lb) = (support_len(a), support_len(b));
    let pairs = la as u64 * lb as u64;
    if pairs > 256 * opts.atom_cap as u64 {
        return Err(Error::Resource(format!(
            "score convolution needs {pairs} atom products; raise --atom-cap or coarsen --merge-tol"
        )));
    }
    let out = match (a, b) {
        (
            Support::Lattice {
                offset: o1,
                span,
                atoms: a1,
            },
            Support::Lattice {
                offset: o2,
                atoms: a2,
                ..
            },
        ) => {
            let mut acc: HashMap<i64, f64> = HashMap::with_capacity(la + lb);
            for &(i, lp1) in a1 {
                for &(j, lp2) in a2 {
                    let e = acc.entry(i + j).or_insert(f64::NEG_INFINITY);
                    *e = lse2(*e, lp1 + lp2);
                }
            }
            let mut atoms: Vec<(i64, f64)> = acc.into_iter().collect();
            atoms.sort_by_key(|a| a.0);
            Support::Lattice {
                offset: o1 + o2,
                span: *span,
                atoms,
            }
        }
        (Support::Dense { atoms: a1 }, Support::Dense { atoms: a2 }) => {
            let mut prods: Vec<(f64, f64)> = Vec::with_capacity((la * lb).min(1 << 24));
            for &(v1, lp1) in a1 {
                for &(v2, lp2) in a2 {
                    prods.push((v1 + v2, lp1 + lp2));
                }
            }
            prods.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
            let mut atoms: Vec<(f64, f64)> = Vec::new();
            for (v, lp) in prods {
                match atoms.last_mut() {
                    Some(last) if v - last.0 <= opts.merge_tol => last.1 = lse2(last.1, lp),
                    _ => atoms.push((v, lp)),
                }
            }
            Support::Dense { atoms }
        }
        _ => {
            return Err(Error::Domain(
                "internal: mixed lattice and dense score supports".into(),
            ))
        }
    };
    if support_len(&out) > opts.atom_cap {
        return Err(Error::Resource(format!(
            "score distribution exceeds the atom cap ({}); raise --atom-cap or coarsen --merge-tol",
            opts.atom_cap
        )));
    }
    Ok(out)
}

fn support_len(s: &Support) -> usize {
    match s {
        Support::Lattice { atoms, .. } => atoms.len(),
        Support::Dense { atoms } => atoms.len(),
    }
}

fn unit_support(s: &Support) -> Support {
    match s {
        Support::Lattice { span, .. } => Support::Lattice {
            offset: 0.0,
            span: *span,
            atoms: vec![(0, 0.0)],
        },
        Support::Dense { .. } => Support::Dense {
            atoms: vec![(0.0, 0.0)],
        },
    }
}

/// Exact distribution of Σᵢ ln ν(X′ᵢ, yᵢ) for an output sequence with
/// `y_counts[y]` occurrences of symbol y.
///
/// `span` > 0 activates lattice mode: all finite per-symbol values must sit
/// on a grid of that span (per-output offsets differ), which the
/// classification guarantees; violations surface as a `Domain` error.
pub fn score_distribution(
    ch: &Channel,
    y_counts: &[u32],
    span: f64,
    opts: &ExactOptions,
) -> Result<ScoreDistribution> {
    assert_eq!(y_counts.len(), ch.num_outputs(), "y_counts shape");
    let n: u32 = y_counts.iter().sum();
    let mut result: Option<Partial> = None;
    for (y, &c) in y_counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let unit = unit_distribution(ch, y, span, opts)?;
        let powed = convolve_power(&unit, c, opts)?;
        result = Some(match result {
            None => powed,
            Some(acc) => Partial {
                support: convolve(&acc.support, &powed.support, opts)?,
                log_finite: acc.log_finite + powed.log_finite,
            },
        });
    }
    let part = result.unwrap_or(Partial {
        support: if span > 0.0 {
            Support::Lattice {
                offset: 0.0,
                span,
                atoms: vec![(0, 0.0)],
            }
        } else {
            Support::Dense {
                atoms: vec![(0.0, 0.0)],
            }
        },
        log_finite: 0.0,
    });
    Ok(ScoreDistribution::build(part.support, part.log_finite, n))
}

/// Per-symbol competitor score distribution at one output.
fn unit_distribution(ch: &Channel, y: usize, span: f64, opts: &ExactOptions) -> Result<Partial> {
    let vals = ch.pairwise_score_values(y);
    let mut minf_mass = 0.0;
    let mut finite: Vec<(f64, f64)> = Vec::with_capacity(vals.len());
    for (v, p) in vals {
        if v == f64::NEG_INFINITY {
            minf_mass += p;
        } else {
            finite.push((v, p.ln()));
        }
    }
    let log_finite = (-minf_mass).ln_1p();
    let support = if span > 0.0 {
        let offset = finite[0].0;
        let mut atoms = Vec::with_capacity(finite.len());
        for &(v, lp) in &finite {
            let k = ((v - offset) / span).round();
            if (offset + k * span - v).abs() > opts.snap_tol * v.abs().max(1.0) {
                return Err(Error::Domain(format!(
                    "score value {v} at output {y} is off the detected lattice grid (span {span})"
                )));
            }
            atoms.push((k as i64, lp));
        }
        Support::Lattice {
            offset,
            span,
            atoms,
        }
    } else {
        Support::Dense { atoms: finite }
    };
    Ok(Partial {
        support,
        log_finite,
    })
}

/// c-fold self-convolution by binary powering.
fn convolve_power(unit: &Partial, c: u32, opts: &ExactOptions) -> Result<Partial> {
    let mut result = Partial {
        support: unit_support(&unit.support),
        log_finite: 0.0,
    };
    let mut base = unit.clone();
    let mut k = c;
    loop {
        if k & 1 == 1 {
            result = Partial {
                support: convolve(&result.support, &base.support, opts)?,
                log_finite: result.log_finite + base.log_finite,
            };
        }
        k >>= 1;
        if k == 0 {
            break;
        }
        base = Partial {
            support: convolve(&base.support, &base.support, opts)?,
            log_finite: base.log_finite * 2.0,
        };
    }
    Ok(result)
}

/// Exceedance and tie probabilities of one competitor against the decoding
/// threshold t = Σᵢ ln ν(xᵢ, yᵢ).
#[derive(Debug, Clone, Copy)]
pub struct PairwiseErrorStats {
    /// P[Σ ln ν(X′ᵢ, yᵢ) > t].
    pub p_plus: f64,
    /// P[Σ ln ν(X′ᵢ, yᵢ) = t].
    pub p_zero: f64,
    pub threshold: f64,
}

/// Reads (p₊, p₀) off an exact score distribution.
pub fn pairwise_stats(
    sd: &ScoreDistribution,
    threshold: f64,
    opts: &ExactOptions,
) -> PairwiseErrorStats {
    let p_plus = sd.log_mass_above(threshold, opts.snap_tol).exp();
    let p_zero = sd.log_mass_at(threshold, opts.snap_tol).exp();
    if let Support::Lattice { span, .. } = &sd.support {
        // Strictly above t and at-or-above t + span are the same atom set.
        let shifted = lse2(
            sd.log_mass_above(threshold + span, opts.snap_tol),
            sd.log_mass_at(threshold + span, opts.snap_tol),
        )
        .exp();
        debug_assert!(
            (p_plus - shifted).abs() <= 1e-12 * p_plus.max(1e-300),
            "lattice tail identity violated: {p_plus} vs {shifted}"
        );
    }
    PairwiseErrorStats {
        p_plus,
        p_zero,
        threshold,
    }
}

/// One joint empirical distribution of (codeword, output) symbol pairs.
#[derive(Debug, Clone)]
pub struct JointType {
    /// Row-major counts, x·|Y| + y, summing to n.
    pub counts: Vec<u32>,
    /// ln of the multinomial probability of observing these counts under
    /// i.i.d. Px × W.
    pub log_prob: f64,
}

impl JointType {
    /// Output-marginal counts.
    pub fn y_counts(&self, nx: usize, ny: usize) -> Vec<u32> {
        let mut out = vec![0u32; ny];
        for x in 0..nx {
            for (y, o) in out.iter_mut().enumerate() {
                *o += self.counts[x * ny + y];
            }
        }
        out
    }

    /// Decoding threshold Σ counts·ln ν for this type.
    pub fn threshold(&self, ch: &Channel) -> f64 {
        let mut t = 0.0;
        for x in 0..ch.num_inputs() {
            for y in 0..ch.num_outputs() {
                let c = self.counts[x * ch.num_outputs() + y];
                if c > 0 {
                    t += c as f64 * ch.log_nu(x, y);
                }
            }
        }
        t
    }
}

/// Streams every joint type with positive probability, in lexicographic
/// order of the support-cell counts. The visitor may abort by returning an
/// error, which propagates.
pub fn enumerate_joint_types<F>(ch: &Channel, n: u32, type_cap: u64, mut visit: F) -> Result<()>
where
    F: FnMut(&JointType) -> Result<()>,
{
    if n == 0 {
        return Err(Error::Domain("block length must be at least 1".into()));
    }
    let cells: Vec<(usize, usize, f64)> = ch
        .support()
        .map(|(x, y, j)| (x, y, j.ln()))
        .collect();
    let s = cells.len();
    let fact = LnFactorial::up_to(n as usize);
    // Stars-and-bars count C(n+s−1, s−1) against the cap, in log space.
    let ln_count = fact_ln_binom(n as u64 + s as u64 - 1, s as u64 - 1);
    if ln_count > (type_cap as f64).ln() + 1e-9 {
        return Err(Error::Resource(format!(
            "joint-type enumeration needs about e^{ln_count:.2} types, above the cap {type_cap}; reduce n or raise --type-cap"
        )));
    }
    let ny = ch.num_outputs();
    let mut counts_full = vec![0u32; ch.num_inputs() * ny];
    let mut cell_counts = vec![0u32; s];
    // Depth-first composition enumeration over support cells.
    fn rec<F>(
        cells: &[(usize, usize, f64)],
        idx: usize,
        remaining: u32,
        ny: usize,
        fact: &LnFactorial,
        n: u32,
        cell_counts: &mut Vec<u32>,
        counts_full: &mut Vec<u32>,
        visit: &mut F,
    ) -> Result<()>
    where
        F: FnMut(&JointType) -> Result<()>,
    {
        if idx == cells.len() - 1 {
            cell_counts[idx] = remaining;
            let mut log_prob = fact.get(n as usize);
            for (i, &(x, y, lj)) in cells.iter().enumerate() {
                let c = cell_counts[i];
                counts_full[x * ny + y] = c;
                log_prob += c as f64 * lj - fact.get(c as usize);
            }
            let jt = JointType {
                counts: counts_full.clone(),
                log_prob,
            };
            visit(&jt)?;
            counts_full
                .iter_mut()
                .for_each(|c| *c = 0);
            return Ok(());
        }
        for c in 0..=remaining {
            cell_counts[idx] = c;
            rec(
                cells,
                idx + 1,
                remaining - c,
                ny,
                fact,
                n,
                cell_counts,
                counts_full,
                visit,
            )?;
        }
        Ok(())
    }
    rec(
        &cells,
        0,
        n,
        ny,
        &fact,
        n,
        &mut cell_counts,
        &mut counts_full,
        &mut visit,
    )
}

fn fact_ln_binom(n: u64, k: u64) -> f64 {
    crate::num::ln_gamma(n as f64 + 1.0)
        - crate::num::ln_gamma(k as f64 + 1.0)
        - crate::num::ln_gamma((n - k) as f64 + 1.0)
}

/// Materializes the full type list; convenience for tests and small n.
pub fn joint_types(ch: &Channel, n: u32, type_cap: u64) -> Result<Vec<JointType>> {
    let mut out = Vec::new();
    enumerate_joint_types(ch, n, type_cap, |jt| {
        out.push(jt.clone());
        Ok(())
    })?;
    Ok(out)
}

/// Exact ln P_RC(n, M): the random-coding error probability with M
/// codewords drawn i.i.d. from Px over a block of length n, maximum-score
/// decoding, ties uniform.
///
/// `span` is the lattice span of ln ν (0 for nonlattice channels); pass the
/// value from the classification so that per-type thresholds land exactly
/// on the convolution grid.
pub fn exact_prc(ch: &Channel, n: u32, m: f64, span: f64, opts: &ExactOptions) -> Result<f64> {
    let mut cache: HashMap<Vec<u32>, ScoreDistribution> = HashMap::new();
    let mut acc = OnlineLogSum::new();
    let (nx, ny) = (ch.num_inputs(), ch.num_outputs());
    enumerate_joint_types(ch, n, opts.type_cap, |jt| {
        let yc = jt.y_counts(nx, ny);
        if !cache.contains_key(&yc) {
            let sd = score_distribution(ch, &yc, span, opts)?;
            cache.insert(yc.clone(), sd);
        }
        let sd = &cache[&yc];
        let stats = pairwise_stats(sd, jt.threshold(ch), opts);
        let q = q_m_exact(m, stats.p_plus, stats.p_zero)?;
        if q > 0.0 {
            acc.add(jt.log_prob + q.ln());
        }
        Ok(())
    })?;
    Ok(acc.value())
}

/// Exact evaluation of the sandwich expressions that bracket P_RC: for each
/// joint type the smoothed-kernel argument is
///
/// ```text
/// (1∓ε)·exp(n(Z̄(η)+R) − n Z̄′(η)²/(2(μ₂∓δ₂)))/(η√(2πnμ₂)),
/// ```
///
/// with type-averaged Z̄, Z̄′, and the result is the (1∓ε)-scaled expectation
/// of g_h over types. Returns (ln lower, ln upper). The bracket is proven
/// only for n beyond an unspecified threshold, so callers should treat it as
/// a diagnostic at fixed n.
pub fn envelope_bounds(
    ch: &Channel,
    n: u32,
    rate: f64,
    eps: f64,
    delta2: f64,
    opts: &ExactOptions,
) -> Result<(f64, f64)> {
    let ts = crate::tilting::solve_exponent(ch, rate)?;
    let mu2 = ts.moments.mu2;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("eps must lie in (0,1), got {eps}")));
    }
    if !(delta2 > 0.0 && delta2 < mu2) {
        return Err(Error::Domain(format!(
            "delta2 must lie in (0, mu2 = {mu2}), got {delta2}"
        )));
    }
    let (span, _) = crate::lattice::classify_nu_lattice(ch, opts.snap_tol)?;
    let g = crate::gfun::GSmoothing::new(span, ts.eta)?;
    let (nx, ny) = (ch.num_inputs(), ch.num_outputs());
    let tilts: Vec<crate::tilting::OutputTilt> = (0..ny)
        .map(|y| crate::tilting::output_tilt(ch, y, ts.eta))
        .collect();
    let nf = n as f64;
    let log_scale = ts.eta.ln() + 0.5 * (crate::num::LN_2PI + (nf * mu2).ln());
    let mut lo_acc = OnlineLogSum::new();
    let mut hi_acc = OnlineLogSum::new();
    enumerate_joint_types(ch, n, opts.type_cap, |jt| {
        let (mut zbar, mut zpbar) = (0.0, 0.0);
        for x in 0..nx {
            for y in 0..ny {
                let c = jt.counts[x * ny + y];
                if c > 0 {
                    let ln_nu = ch.log_nu(x, y);
                    zbar += c as f64 * (tilts[y].log_a - ts.eta * ln_nu);
                    zpbar += c as f64 * (tilts[y].mean - ln_nu);
                }
            }
        }
        zbar /= nf;
        zpbar /= nf;
        let base = nf * (zbar + rate) - log_scale;
        let log_u_lo = (-eps).ln_1p() + base - nf * zpbar * zpbar / (2.0 * (mu2 - delta2));
        let log_u_hi = eps.ln_1p() + base - nf * zpbar * zpbar / (2.0 * (mu2 + delta2));
        lo_acc.add(jt.log_prob + g.log_eval(log_u_lo));
        hi_acc.add(jt.log_prob + g.log_eval(log_u_hi));
        Ok(())
    })?;
    Ok(((-eps).ln_1p() + lo_acc.value(), eps.ln_1p() + hi_acc.value()))
}
