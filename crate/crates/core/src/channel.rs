//! Channel model: transition matrix, input distribution, output marginal,
//! and the per-pair log-likelihood ratios everything downstream consumes.

use crate::num::log_sum_exp;
use crate::{Error, Result};
use serde::Deserialize;

/// Probability-sum tolerance for validating `W` rows and `Px`.
pub const DIST_TOL: f64 = 1e-9;

/// JSON description of a channel.
///
/// ```json
/// { "name": "bsc25", "W": [[0.75, 0.25], [0.25, 0.75]], "Px": [0.5, 0.5] }
/// ```
///
/// Rows of `W` are inputs, columns outputs. `Px` is optional and defaults to
/// uniform; `name` is optional and used only for display.
#[derive(Debug, Clone, Deserialize)]
pub struct ChannelSpec {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    #[serde(rename = "Px", default)]
    pub px: Option<Vec<f64>>,
}

/// A discrete memoryless channel together with its input distribution.
///
/// Outputs with zero marginal probability and inputs with zero probability
/// are removed at construction (they contribute nothing to any expectation);
/// the removed original indices are recorded in `pruned_outputs` /
/// `pruned_inputs`.
#[derive(Debug, Clone)]
pub struct Channel {
    pub name: String,
    nx: usize,
    ny: usize,
    px: Vec<f64>,
    w: Vec<f64>,      // row-major: w[x * ny + y]
    py: Vec<f64>,
    log_nu: Vec<f64>, // ln(W(y|x)/Py(y)), −inf where W = 0
    pub pruned_outputs: Vec<usize>,
    pub pruned_inputs: Vec<usize>,
}

impl Channel {
    /// Builds and validates a channel from a transition matrix and an
    /// optional input distribution (uniform when absent).
    pub fn new(w_rows: &[Vec<f64>], px: Option<&[f64]>) -> Result<Channel> {
        Self::with_name("channel", w_rows, px)
    }

    pub fn with_name(name: &str, w_rows: &[Vec<f64>], px: Option<&[f64]>) -> Result<Channel> {
        let nx0 = w_rows.len();
        if nx0 == 0 {
            return Err(Error::InvalidChannel("W has no rows".into()));
        }
        let ny0 = w_rows[0].len();
        if ny0 == 0 {
            return Err(Error::InvalidChannel("W has no columns".into()));
        }
        for (x, row) in w_rows.iter().enumerate() {
            if row.len() != ny0 {
                return Err(Error::InvalidChannel(format!(
                    "W row {x} has {} entries, expected {ny0}",
                    row.len()
                )));
            }
            let mut sum = 0.0;
            for (y, &p) in row.iter().enumerate() {
                if !p.is_finite() || p < 0.0 {
                    return Err(Error::InvalidChannel(format!(
                        "W[{x}][{y}] = {p} is not a probability"
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > DIST_TOL {
                return Err(Error::InvalidChannel(format!(
                    "W row {x} sums to {sum}, expected 1 within {DIST_TOL}"
                )));
            }
        }
        let px0: Vec<f64> = match px {
            Some(p) => {
                if p.len() != nx0 {
                    return Err(Error::InvalidChannel(format!(
                        "Px has {} entries, W has {nx0} rows",
                        p.len()
                    )));
                }
                for (x, &v) in p.iter().enumerate() {
                    if !v.is_finite() || v < 0.0 {
                        return Err(Error::InvalidChannel(format!(
                            "Px[{x}] = {v} is not a probability"
                        )));
                    }
                }
                let sum: f64 = p.iter().sum();
                if (sum - 1.0).abs() > DIST_TOL {
                    return Err(Error::InvalidChannel(format!(
                        "Px sums to {sum}, expected 1 within {DIST_TOL}"
                    )));
                }
                p.to_vec()
            }
            None => vec![1.0 / nx0 as f64; nx0],
        };

        let pruned_inputs: Vec<usize> = (0..nx0).filter(|&x| px0[x] == 0.0).collect();
        let keep_x: Vec<usize> = (0..nx0).filter(|&x| px0[x] > 0.0).collect();
        if keep_x.is_empty() {
            return Err(Error::InvalidChannel("Px has no positive entries".into()));
        }

        let py0: Vec<f64> = (0..ny0)
            .map(|y| keep_x.iter().map(|&x| px0[x] * w_rows[x][y]).sum())
            .collect();
        let pruned_outputs: Vec<usize> = (0..ny0).filter(|&y| py0[y] == 0.0).collect();
        let keep_y: Vec<usize> = (0..ny0).filter(|&y| py0[y] > 0.0).collect();
        if keep_y.is_empty() {
            return Err(Error::InvalidChannel("all outputs have zero probability".into()));
        }

        let nx = keep_x.len();
        let ny = keep_y.len();
        let px: Vec<f64> = keep_x.iter().map(|&x| px0[x]).collect();
        let py: Vec<f64> = keep_y.iter().map(|&y| py0[y]).collect();
        let mut w = vec![0.0; nx * ny];
        let mut log_nu = vec![f64::NEG_INFINITY; nx * ny];
        for (xi, &x) in keep_x.iter().enumerate() {
            for (yi, &y) in keep_y.iter().enumerate() {
                let p = w_rows[x][y];
                w[xi * ny + yi] = p;
                if p > 0.0 {
                    log_nu[xi * ny + yi] = (p / py[yi]).ln();
                }
            }
        }

        Ok(Channel {
            name: name.to_string(),
            nx,
            ny,
            px,
            w,
            py,
            log_nu,
            pruned_outputs,
            pruned_inputs,
        })
    }

    /// Parses the JSON schema documented on [`ChannelSpec`].
    pub fn from_json(text: &str) -> Result<Channel> {
        let spec: ChannelSpec = serde_json::from_str(text)
            .map_err(|e| Error::InvalidChannel(format!("JSON parse: {e}")))?;
        let name = spec.name.as_deref().unwrap_or("channel");
        Channel::with_name(name, &spec.w, spec.px.as_deref())
    }

    #[inline]
    pub fn num_inputs(&self) -> usize {
        self.nx
    }

    #[inline]
    pub fn num_outputs(&self) -> usize {
        self.ny
    }

    #[inline]
    pub fn px(&self, x: usize) -> f64 {
        self.px[x]
    }

    #[inline]
    pub fn py(&self, y: usize) -> f64 {
        self.py[y]
    }

    #[inline]
    pub fn w(&self, x: usize, y: usize) -> f64 {
        self.w[x * self.ny + y]
    }

    /// ln ν(x,y) = ln(W(y|x)/P_Y(y)); `-inf` where W(y|x) = 0.
    #[inline]
    pub fn log_nu(&self, x: usize, y: usize) -> f64 {
        self.log_nu[x * self.ny + y]
    }

    /// Joint probability Px(x)·W(y|x).
    #[inline]
    pub fn joint(&self, x: usize, y: usize) -> f64 {
        self.px[x] * self.w(x, y)
    }

    /// Iterator over (x, y) pairs with positive joint probability.
    pub fn support(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.nx)
            .flat_map(move |x| (0..self.ny).map(move |y| (x, y)))
            .filter(move |&(x, y)| self.joint(x, y) > 0.0)
    }

    /// Mutual information I(X;Y) = E[ln ν(X,Y)] in nats.
    pub fn mutual_information(&self) -> f64 {
        let mut s = 0.0;
        for (x, y) in self.support() {
            s += self.joint(x, y) * self.log_nu(x, y);
        }
        s
    }

    /// Distribution of ln ν(X′, y) for a competitor X′ ~ Px, as sorted
    /// `(value, prob)` atoms with duplicates merged. A `-inf` atom collects
    /// the inputs with W(y|x′) = 0.
    pub fn pairwise_score_values(&self, y: usize) -> Vec<(f64, f64)> {
        let mut atoms: Vec<(f64, f64)> = Vec::with_capacity(self.nx);
        for x in 0..self.nx {
            atoms.push((self.log_nu(x, y), self.px[x]));
        }
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (v, p) in atoms {
            match merged.last_mut() {
                Some(last) if values_equal(last.0, v) => last.1 += p,
                _ => merged.push((v, p)),
            }
        }
        merged
    }

    /// Per-output sanity: Σ_x Px(x) ν(x,y) = 1 by construction of P_Y.
    /// Exposed for tests and the `classify` report.
    pub fn nu_normalization_residual(&self) -> f64 {
        let mut worst = 0.0_f64;
        for y in 0..self.ny {
            let logs: Vec<f64> = (0..self.nx)
                .map(|x| {
                    let ln_nu = self.log_nu(x, y);
                    if ln_nu == f64::NEG_INFINITY {
                        f64::NEG_INFINITY
                    } else {
                        self.px[x].ln() + ln_nu
                    }
                })
                .collect();
            worst = worst.max(log_sum_exp(&logs).abs());
        }
        worst
    }
}

#[inline]
fn values_equal(a: f64, b: f64) -> bool {
    if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
        return a == b;
    }
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bsc(p: f64) -> Channel {
        Channel::new(&[vec![1.0 - p, p], vec![p, 1.0 - p]], None).unwrap()
    }

    #[test]
    fn bsc_marginal_and_nu() {
        let ch = bsc(0.25);
        assert_eq!(ch.num_inputs(), 2);
        assert_eq!(ch.num_outputs(), 2);
        assert!((ch.py(0) - 0.5).abs() < 1e-15);
        assert!((ch.log_nu(0, 0) - 1.5_f64.ln()).abs() < 1e-15);
        assert!((ch.log_nu(1, 0) - 0.5_f64.ln()).abs() < 1e-15);
        assert!(ch.nu_normalization_residual() < 1e-12);
    }

    #[test]
    fn mutual_information_bsc25() {
        // I = ln 2 − H(0.25); 50-digit reference 0.13081203594113695913.
        let ch = bsc(0.25);
        let want = 0.130_812_035_941_136_96;
        assert!((ch.mutual_information() - want).abs() < 1e-14);
    }

    #[test]
    fn erasure_channel_keeps_minus_inf() {
        // Asymmetric binary erasure: y=0 only from x=0, y=1 only from x=1.
        let ch = Channel::new(
            &[vec![0.8, 0.0, 0.2], vec![0.0, 0.6, 0.4]],
            None,
        )
        .unwrap();
        assert_eq!(ch.log_nu(1, 0), f64::NEG_INFINITY);
        let atoms = ch.pairwise_score_values(0);
        assert_eq!(atoms.len(), 2);
        assert_eq!(atoms[0].0, f64::NEG_INFINITY);
        assert!((atoms[0].1 - 0.5).abs() < 1e-15);
        // I matches the 50-digit reference for this channel.
        assert!((ch.mutual_information() - 0.502_192_930_071_501_5).abs() < 1e-14);
    }

    #[test]
    fn zero_probability_output_is_pruned() {
        let ch = Channel::new(
            &[vec![0.5, 0.5, 0.0], vec![0.25, 0.75, 0.0]],
            None,
        )
        .unwrap();
        assert_eq!(ch.num_outputs(), 2);
        assert_eq!(ch.pruned_outputs, vec![2]);
    }

    #[test]
    fn zero_probability_input_is_pruned() {
        let ch = Channel::new(
            &[vec![0.5, 0.5], vec![0.25, 0.75], vec![0.9, 0.1]],
            Some(&[0.5, 0.0, 0.5]),
        )
        .unwrap();
        assert_eq!(ch.num_inputs(), 2);
        assert_eq!(ch.pruned_inputs, vec![1]);
        assert!((ch.py(0) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn bad_rows_rejected() {
        assert!(Channel::new(&[vec![0.5, 0.6]], None).is_err());
        assert!(Channel::new(&[vec![0.5, 0.5], vec![0.5]], None).is_err());
        assert!(Channel::new(&[vec![-0.1, 1.1]], None).is_err());
        assert!(Channel::new(&[vec![0.5, 0.5]], Some(&[0.7, 0.4])).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let ch = Channel::from_json(
            r#"{"name":"bsc25","W":[[0.75,0.25],[0.25,0.75]],"Px":[0.5,0.5]}"#,
        )
        .unwrap();
        assert_eq!(ch.name, "bsc25");
        let ch = Channel::from_json(r#"{"W":[[0.75,0.25],[0.25,0.75]]}"#).unwrap();
        assert!((ch.px(0) - 0.5).abs() < 1e-15);
        assert!(Channel::from_json("{").is_err());
    }

    #[test]
    fn pairwise_scores_merge_duplicates() {
        // Two inputs with identical rows produce one merged atom per value.
        let ch = Channel::new(&[vec![0.75, 0.25], vec![0.75, 0.25]], None).unwrap();
        let atoms = ch.pairwise_score_values(0);
        assert_eq!(atoms.len(), 1);
        assert!((atoms[0].1 - 1.0).abs() < 1e-15);
    }
}
