//! Lattice span detection for the pairwise score and the strong-nonlattice
//! test for the pair (Z(η), Z′(η)).
//!
//! The score ln ν(X, Y) is lattice with span h > 0 when, conditionally on
//! each output y, its finite values lie on offset_y + h·m_y·ℤ for integer
//! multipliers m_y. Commensurability of floating-point differences is
//! decided by a continued-fraction test (nearest-integer Euclid) with a
//! multiplier cap: beyond the cap a ratio is declared irrational. The cap
//! makes the test decidable and rejects accidental convergents such as
//! 355/113 ≈ π.
//!
//! Strong nonlattice asks more: the planar support of (Z(η), Z′(η)) must not
//! be contained in any family of parallel equispaced lines. Candidate
//! directions come from pairs of support points. A direction whose
//! projections take exactly two distinct values does not disqualify: every
//! binary-output channel puts its support on two parallel lines of slope η
//! (one per output), and such channels are still classified as strongly
//! nonlattice when no direction reveals three or more commensurately spaced
//! lines. Supports of at most three points are never strongly nonlattice.

use crate::channel::Channel;
use crate::tilting::output_tilt;
use crate::{Error, Result};
use std::fmt;

/// Default relative tolerance for span detection and grid snapping.
pub const SNAP_TOL: f64 = 1e-9;

/// Largest admissible integer multiplier in the commensurability test.
pub const MULTIPLIER_CAP: f64 = 1e6;

/// Greatest common divisor of two nonnegative reals, if they are
/// commensurate with multipliers at most [`MULTIPLIER_CAP`].
///
/// Runs nearest-integer Euclid (equivalently, the continued-fraction
/// expansion of a/b) until the remainder falls below `rel_tol` times the
/// larger input, then verifies that both inputs are integer multiples of the
/// candidate within the same tolerance.
pub fn commensurate_gcd(a: f64, b: f64, rel_tol: f64) -> Option<f64> {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        return None;
    }
    let tol = rel_tol * scale;
    let (mut x, mut y) = (a.abs(), b.abs());
    for _ in 0..60 {
        if y <= tol {
            break;
        }
        let q = (x / y).round();
        let r = (x - q * y).abs();
        x = y;
        y = r;
    }
    if y > tol {
        return None;
    }
    let g = x;
    if g <= tol {
        return None;
    }
    for v in [a.abs(), b.abs()] {
        let k = (v / g).round();
        if k > MULTIPLIER_CAP || (v - k * g).abs() > tol {
            return None;
        }
    }
    Some(g)
}

/// GCD of a set of nonnegative reals; zeros are ignored; `None` when any
/// pair is incommensurate. All-zero input returns `None`.
fn commensurate_gcd_set(vals: &[f64], rel_tol: f64) -> Option<f64> {
    let mut g: Option<f64> = None;
    for &v in vals {
        if v == 0.0 {
            continue;
        }
        g = Some(match g {
            None => v,
            Some(cur) => commensurate_gcd(cur, v, rel_tol)?,
        });
    }
    g
}

/// Span structure of ln ν(X, y) at a single output.
#[derive(Debug, Clone, Copy)]
pub struct OutputLattice {
    /// Detected span of the conditional support; 0 when the support is a
    /// single point (unconstrained) or its gaps are incommensurate.
    pub span: f64,
    /// Smallest finite score value at this output.
    pub offset: f64,
    /// `span / h` when the channel-level span h is positive; 0 otherwise.
    pub multiplier: u64,
    /// Number of distinct finite score values at this output.
    pub support_size: usize,
}

/// Table cell assigned by the combined classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassificationCell {
    LatticeNotSnl,
    LatticeSnl,
    NonlatticeNotSnl,
    NonlatticeSnl,
}

impl ClassificationCell {
    pub fn as_str(&self) -> &'static str {
        match self {
            ClassificationCell::LatticeNotSnl => "lattice_notSNL",
            ClassificationCell::LatticeSnl => "lattice_SNL",
            ClassificationCell::NonlatticeNotSnl => "nonlattice_notSNL",
            ClassificationCell::NonlatticeSnl => "nonlattice_SNL",
        }
    }

    fn from_flags(lattice: bool, snl: bool) -> Self {
        match (lattice, snl) {
            (true, false) => ClassificationCell::LatticeNotSnl,
            (true, true) => ClassificationCell::LatticeSnl,
            (false, false) => ClassificationCell::NonlatticeNotSnl,
            (false, true) => ClassificationCell::NonlatticeSnl,
        }
    }
}

impl fmt::Display for ClassificationCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Combined classification result.
#[derive(Debug, Clone)]
pub struct LatticeClassification {
    /// Channel-level span h of ln ν; 0 encodes nonlattice.
    pub span: f64,
    pub per_output: Vec<OutputLattice>,
    pub strongly_nonlattice: bool,
    pub cell: ClassificationCell,
}

/// Detects the lattice span of ln ν(X, Y).
///
/// Per output, the span is the GCD of the gaps between consecutive distinct
/// finite score values; the channel span h is the GCD across outputs,
/// maximal by construction of the Euclid recursion. Outputs whose support is
/// a single point impose no constraint. Returns span 0 when any
/// commensurability test fails.
///
/// Errors with `Domain` when every output is degenerate: the score is then
/// deterministic given Y and the tilted variance vanishes.
pub fn classify_nu_lattice(ch: &Channel, tol: f64) -> Result<(f64, Vec<OutputLattice>)> {
    let mut per: Vec<(f64, f64, usize, Option<f64>)> = Vec::with_capacity(ch.num_outputs());
    let mut any_nondegenerate = false;
    for y in 0..ch.num_outputs() {
        let atoms = ch.pairwise_score_values(y);
        let finite: Vec<f64> = atoms
            .iter()
            .map(|&(v, _)| v)
            .filter(|v| v.is_finite())
            .collect();
        let offset = finite[0];
        if finite.len() <= 1 {
            per.push((0.0, offset, finite.len(), None));
            continue;
        }
        any_nondegenerate = true;
        let diffs: Vec<f64> = finite[1..].iter().map(|v| v - offset).collect();
        let span = commensurate_gcd_set(&diffs, tol);
        per.push((span.unwrap_or(0.0), offset, finite.len(), span));
    }
    if !any_nondegenerate {
        return Err(Error::Domain(
            "degenerate pairwise score: every output has a single-point support".into(),
        ));
    }
    let h = if per.iter().any(|p| p.2 > 1 && p.3.is_none()) {
        0.0
    } else {
        let spans: Vec<f64> = per.iter().map(|p| p.0).collect();
        commensurate_gcd_set(&spans, tol).unwrap_or(0.0)
    };
    let per_output = per
        .into_iter()
        .map(|(span, offset, support_size, _)| OutputLattice {
            span,
            offset,
            multiplier: if h > 0.0 && span > 0.0 {
                (span / h).round() as u64
            } else {
                0
            },
            support_size,
        })
        .collect();
    Ok((h, per_output))
}

/// Deduplicated support of (Z_{x,y}(η), Z′_{x,y}(η)) over Px × W.
fn z_support(ch: &Channel, eta: f64, tol: f64) -> Vec<(f64, f64)> {
    let tilts: Vec<_> = (0..ch.num_outputs())
        .map(|y| output_tilt(ch, y, eta))
        .collect();
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for x in 0..ch.num_inputs() {
        for y in 0..ch.num_outputs() {
            if ch.joint(x, y) <= 0.0 {
                continue;
            }
            let ln_nu = ch.log_nu(x, y);
            if !ln_nu.is_finite() {
                // The competitor score may be −∞ but the sent pair's cannot:
                // joint > 0 forces W > 0.
                continue;
            }
            let p = (
                tilts[y].log_a - eta * ln_nu,
                tilts[y].mean - ln_nu,
            );
            let atol = tol * p.0.abs().max(p.1.abs()).max(1.0);
            if !pts
                .iter()
                .any(|q| (q.0 - p.0).abs() <= atol && (q.1 - p.1).abs() <= atol)
            {
                pts.push(p);
            }
        }
    }
    pts
}

/// Distinct values of a projection list under an absolute tolerance.
fn distinct_sorted(vals: &[f64], tol: f64) -> Vec<f64> {
    let mut v = vals.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out: Vec<f64> = Vec::with_capacity(v.len());
    for x in v {
        if out.last().map_or(true, |&l| x - l > tol) {
            out.push(x);
        }
    }
    out
}

/// Tests whether (Z(η), Z′(η)) is strongly nonlattice.
///
/// Returns false when the support has at most three points, lies on a single
/// line, or for some pair-generated direction projects onto three or more
/// commensurately spaced values. See the module docs for why two distinct
/// projection values are permitted.
pub fn strongly_nonlattice_check(ch: &Channel, eta: f64, tol: f64) -> bool {
    let pts = z_support(ch, eta, tol);
    let k = pts.len();
    if k <= 3 {
        return false;
    }
    let mut scale: f64 = 0.0;
    for p in &pts {
        for q in &pts {
            scale = scale.max((p.0 - q.0).abs()).max((p.1 - q.1).abs());
        }
    }
    let atol = tol * scale.max(1.0);
    // Single-line check against the first pair with a usable baseline.
    let base = pts[0];
    if let Some(dir) = pts[1..]
        .iter()
        .map(|p| (p.0 - base.0, p.1 - base.1))
        .find(|d| d.0.hypot(d.1) > atol)
    {
        let n = dir.0.hypot(dir.1);
        let u = (dir.0 / n, dir.1 / n);
        if pts
            .iter()
            .all(|p| ((p.0 - base.0) * u.1 - (p.1 - base.1) * u.0).abs() <= atol)
        {
            return false;
        }
    } else {
        return false;
    }
    // Candidate directions: normals of pair differences, deduplicated up to
    // sign.
    let mut dirs: Vec<(f64, f64)> = Vec::new();
    for i in 0..k {
        for j in (i + 1)..k {
            let d = (pts[j].0 - pts[i].0, pts[j].1 - pts[i].1);
            let n = d.0.hypot(d.1);
            if n <= atol {
                continue;
            }
            let mut xi = (-d.1 / n, d.0 / n);
            if xi.0 < 0.0 || (xi.0 == 0.0 && xi.1 < 0.0) {
                xi = (-xi.0, -xi.1);
            }
            if !dirs
                .iter()
                .any(|e| (e.0 - xi.0).abs() <= 1e-12 && (e.1 - xi.1).abs() <= 1e-12)
            {
                dirs.push(xi);
            }
        }
    }
    for xi in dirs {
        let proj: Vec<f64> = pts.iter().map(|p| xi.0 * p.0 + xi.1 * p.1).collect();
        let levels = distinct_sorted(&proj, atol);
        match levels.len() {
            0 | 1 => return false,
            2 => continue,
            _ => {
                let gaps: Vec<f64> = levels[1..].iter().map(|v| v - levels[0]).collect();
                if commensurate_gcd_set(&gaps, tol).is_some() {
                    return false;
                }
            }
        }
    }
    true
}

/// Runs both tests and assigns the cell. `eta` is the tilt at which the
/// planar support is formed (½ at the critical rate and below).
pub fn classify(ch: &Channel, eta: f64, tol: f64) -> Result<LatticeClassification> {
    let (span, per_output) = classify_nu_lattice(ch, tol)?;
    let snl = strongly_nonlattice_check(ch, eta, tol);
    Ok(LatticeClassification {
        span,
        per_output,
        strongly_nonlattice: snl,
        cell: ClassificationCell::from_flags(span > 0.0, snl),
    })
}
