//! Monotone symmetric norms used as clustering objectives: top-ℓ sums,
//! ordered (non-increasing weighted) norms, and their proxy upper bounds.
//!
//! The proxy functions replace a sorting-based norm with a threshold-based
//! expression that is linear in each coordinate once the threshold is fixed:
//! `proxy_topl(x, ℓ, y) = ℓ·y + Σ_i (x_i ∸ y) ≥ top_ℓ(x)`, with equality when
//! `y` is the ℓ-th largest entry of `x`. Summing weighted proxies over all
//! prefix lengths gives [`proxy_ordered`], an upper bound on the ordered norm
//! that is exact when the threshold vector is the sorted input itself. The
//! solvers guess thresholds from a finite candidate list ([`enumerate_thresholds`])
//! after compressing the weight vector ([`sparsify_weights`]).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::dotdiv;

#[derive(Debug, Error)]
pub enum NormError {
    #[error("prefix length ell={ell} out of range 1..={len}")]
    EllOutOfRange { ell: usize, len: usize },
    #[error("length mismatch: vector has {len} entries, {what} has {other}")]
    LengthMismatch {
        what: &'static str,
        len: usize,
        other: usize,
    },
    #[error("weight vector must be nonnegative, non-increasing, with w[0] > 0 (violated at index {index})")]
    BadWeights { index: usize },
    #[error("threshold vector must be nonnegative and non-increasing (violated at index {index})")]
    BadThresholds { index: usize },
    #[error("entries must be finite and nonnegative (violated at index {index})")]
    BadEntries { index: usize },
    #[error("epsilon must be a finite positive number, got {value}")]
    BadEpsilon { value: f64 },
    #[error("threshold enumeration needs {required} vectors, above the cap of {cap}")]
    ThresholdCapExceeded { required: u128, cap: usize },
    #[error("sym_max_ord needs at least one weight vector, all of equal length")]
    BadSymList,
}

/// Objective descriptor as it appears in instance files and CLI flags. The
/// same grammar is used for the inner (per-cluster) and outer (across
/// clusters) positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Objective {
    #[serde(rename = "l1")]
    L1,
    #[serde(rename = "linf")]
    LInf,
    #[serde(rename = "topl")]
    TopL { ell: usize },
    #[serde(rename = "ord")]
    Ord { w: Vec<f64> },
    /// Max over a list of ordered norms. By convention `ws[0]` is the
    /// caller-designated dominating vector used when this norm has to be
    /// traded for a plain ordered norm.
    #[serde(rename = "sym_max_ord")]
    SymMaxOrd { ws: Vec<Vec<f64>> },
}

impl Objective {
    pub fn validate(&self, err_len: Option<usize>) -> Result<(), NormError> {
        match self {
            Objective::L1 | Objective::LInf => Ok(()),
            Objective::TopL { ell } => {
                if *ell == 0 {
                    return Err(NormError::EllOutOfRange {
                        ell: 0,
                        len: err_len.unwrap_or(0),
                    });
                }
                Ok(())
            }
            Objective::Ord { w } => validate_weights(w),
            Objective::SymMaxOrd { ws } => {
                if ws.is_empty() || ws.iter().any(|w| w.len() != ws[0].len()) {
                    return Err(NormError::BadSymList);
                }
                for w in ws {
                    validate_weights(w)?;
                }
                Ok(())
            }
        }
    }
}

fn check_entries(x: &[f64]) -> Result<(), NormError> {
    for (index, &v) in x.iter().enumerate() {
        if !v.is_finite() || v < 0.0 {
            return Err(NormError::BadEntries { index });
        }
    }
    Ok(())
}

/// Checks that `w` is a valid ordered-norm weight vector: nonnegative,
/// non-increasing, and `w[0] > 0`.
pub fn validate_weights(w: &[f64]) -> Result<(), NormError> {
    if w.is_empty() || !w[0].is_finite() || w[0] <= 0.0 {
        return Err(NormError::BadWeights { index: 0 });
    }
    for i in 0..w.len() {
        if !w[i].is_finite() || w[i] < 0.0 || (i > 0 && w[i] > w[i - 1]) {
            return Err(NormError::BadWeights { index: i });
        }
    }
    Ok(())
}

fn validate_thresholds(t: &[f64]) -> Result<(), NormError> {
    for i in 0..t.len() {
        if !t[i].is_finite() || t[i] < 0.0 || (i > 0 && t[i] > t[i - 1]) {
            return Err(NormError::BadThresholds { index: i });
        }
    }
    Ok(())
}

fn sorted_desc(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(|a, b| b.partial_cmp(a).expect("entries are finite"));
    v
}

/// Sum of the `ell` largest entries of `x`.
pub fn top_ell(x: &[f64], ell: usize) -> Result<f64, NormError> {
    check_entries(x)?;
    if ell == 0 || ell > x.len() {
        return Err(NormError::EllOutOfRange { ell, len: x.len() });
    }
    Ok(sorted_desc(x)[..ell].iter().sum())
}

/// Ordered norm `ord_w(x) = Σ_i w_i · x↓_i` (entries of `x` sorted
/// non-increasingly). Requires `len(w) == len(x)`.
pub fn ordered_norm(x: &[f64], w: &[f64]) -> Result<f64, NormError> {
    check_entries(x)?;
    validate_weights(w)?;
    if w.len() != x.len() {
        return Err(NormError::LengthMismatch {
            what: "weight vector",
            len: x.len(),
            other: w.len(),
        });
    }
    Ok(sorted_desc(x)
        .iter()
        .zip(w.iter())
        .map(|(xi, wi)| xi * wi)
        .sum())
}

/// Evaluates an ordered norm after reconciling lengths: the shorter of the
/// two vectors is padded with zeros. Padding is neutral for both sides (zero
/// weights ignore entries, zero entries sort to the tail).
pub fn ordered_norm_padded(x: &[f64], w: &[f64]) -> Result<f64, NormError> {
    let n = x.len().max(w.len());
    let mut xx = x.to_vec();
    xx.resize(n, 0.0);
    let mut ww = w.to_vec();
    ww.resize(n, 0.0);
    ordered_norm(&xx, &ww)
}

/// Threshold proxy for the top-ℓ sum: `ℓ·y + Σ_i (x_i ∸ y)`. Always an upper
/// bound on `top_ell(x, ell)`; tight at `y = x↓_ℓ`.
pub fn proxy_topl(x: &[f64], ell: usize, y: f64) -> Result<f64, NormError> {
    check_entries(x)?;
    if ell == 0 || ell > x.len() {
        return Err(NormError::EllOutOfRange { ell, len: x.len() });
    }
    if !y.is_finite() || y < 0.0 {
        return Err(NormError::BadThresholds { index: 0 });
    }
    Ok(ell as f64 * y + x.iter().map(|&xi| dotdiv(xi, y)).sum::<f64>())
}

/// Threshold proxy for the ordered norm:
/// `Σ_i (w_i − w_{i+1}) · proxy_topl(x, i+1, t_i)` with `w_{len+1} = 0`.
/// Upper-bounds `ordered_norm(x, w)`; tight at `t = x↓`.
pub fn proxy_ordered(x: &[f64], w: &[f64], t: &[f64]) -> Result<f64, NormError> {
    check_entries(x)?;
    validate_weights(w)?;
    validate_thresholds(t)?;
    if w.len() != x.len() {
        return Err(NormError::LengthMismatch {
            what: "weight vector",
            len: x.len(),
            other: w.len(),
        });
    }
    if t.len() != x.len() {
        return Err(NormError::LengthMismatch {
            what: "threshold vector",
            len: x.len(),
            other: t.len(),
        });
    }
    let n = x.len();
    let mut total = 0.0;
    for i in 0..n {
        let next = if i + 1 < n { w[i + 1] } else { 0.0 };
        let gap = w[i] - next;
        if gap > 0.0 {
            total += gap * proxy_topl(x, i + 1, t[i])?;
        }
    }
    Ok(total)
}

/// Rounds each weight down into the geometric net `{w[0]·(1+ε)^{-j}}` and
/// zeroes entries below `w[0]·ε / len(w)`. The result `w̃` satisfies
/// `ord_w̃(x) ≤ ord_w(x) ≤ (1+2ε)·ord_w̃(x) + ε·w[0]·max(x)` for every
/// nonnegative `x`, and keeps `w̃[0] == w[0]`.
pub fn sparsify_weights(w: &[f64], eps: f64) -> Result<Vec<f64>, NormError> {
    validate_weights(w)?;
    if !eps.is_finite() || eps <= 0.0 {
        return Err(NormError::BadEpsilon { value: eps });
    }
    let w1 = w[0];
    let cutoff = w1 * eps / w.len() as f64;
    let base = 1.0 + eps;
    let out = w
        .iter()
        .map(|&wi| {
            if wi >= w1 {
                return w1; // the top weight always survives, whatever ε is
            }
            if wi < cutoff {
                return 0.0;
            }
            // Largest j with w1·(1+ε)^{-j} ≤ wi; floats can land a step off,
            // so correct the exponent locally.
            let mut j = (w1 / wi).ln() / base.ln();
            j = j.ceil().max(0.0);
            let mut val = w1 / base.powf(j);
            while val > wi {
                j += 1.0;
                val = w1 / base.powf(j);
            }
            while j > 0.0 && w1 / base.powf(j - 1.0) <= wi {
                j -= 1.0;
                val = w1 / base.powf(j);
            }
            if val < cutoff {
                0.0
            } else {
                val
            }
        })
        .collect();
    Ok(out)
}

/// Break indices of `w`: positions `i` (1-based would be `i+1`) where
/// `w[i] > w[i+1]` with an implicit trailing zero. Only these positions carry
/// weight in [`proxy_ordered`].
pub fn weight_breakpoints(w: &[f64]) -> Vec<usize> {
    let n = w.len();
    (0..n)
        .filter(|&i| {
            let next = if i + 1 < n { w[i + 1] } else { 0.0 };
            w[i] > next
        })
        .collect()
}

/// Enumerates every threshold vector that is constant on the blocks between
/// breakpoints of `w_tilde`, with block values drawn (non-increasingly) from
/// `candidate_values ∪ {0}`. Errors when the required count exceeds `cap`,
/// naming the count.
pub fn enumerate_thresholds(
    w_tilde: &[f64],
    candidate_values: &[f64],
    cap: usize,
) -> Result<Vec<Vec<f64>>, NormError> {
    validate_weights(w_tilde)?;
    check_entries(candidate_values)?;
    let breaks = weight_breakpoints(w_tilde);
    let d = breaks.len();

    let mut cands = candidate_values.to_vec();
    cands.push(0.0);
    cands.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    cands.dedup();
    let c = cands.len() as u128;

    // Multisets of size d from c values: C(c + d - 1, d).
    let required = binomial(c + d as u128 - 1, d as u128);
    if required > cap as u128 {
        return Err(NormError::ThresholdCapExceeded { required, cap });
    }

    let n = w_tilde.len();
    let mut out = Vec::with_capacity(required as usize);
    let mut picks = vec![0usize; d];
    loop {
        // Materialize this pick as a blockwise-constant vector: positions up
        // to the b-th breakpoint (inclusive) take the b-th value; trailing
        // zero-weight positions take 0.
        let mut t = vec![0.0; n];
        let mut start = 0usize;
        for (b, &bp) in breaks.iter().enumerate() {
            for slot in t.iter_mut().take(bp + 1).skip(start) {
                *slot = cands[picks[b]];
            }
            start = bp + 1;
        }
        out.push(t);

        // Advance the non-decreasing index tuple (values are sorted
        // descending, so non-decreasing indices = non-increasing values).
        let mut pos = d;
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            if picks[pos] + 1 < cands.len() {
                let v = picks[pos] + 1;
                for slot in picks.iter_mut().skip(pos) {
                    *slot = v;
                }
                break;
            }
        }
        if d == 0 {
            return Ok(out);
        }
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}
