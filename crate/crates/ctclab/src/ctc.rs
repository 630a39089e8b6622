//! CTC objective and decoding.
//!
//! The loss is the negative log-likelihood of a label sequence under the
//! standard blank-interleaved forward recursion, computed entirely in log
//! space (`f64::NEG_INFINITY` stands for exact zero probability). The
//! gradient is taken with respect to the per-frame log-probabilities as free
//! variables; the log-softmax coupling is applied where the lattice is
//! produced, in the acoustic model.

use crate::error::{Error, Result};

/// Per-frame log-probabilities over the vocabulary, `T x V` row-major.
///
/// Lattices emitted by the acoustic model are log-normalized per row (each
/// row log-sum-exps to 0 within 1e-6) with entries at most 0. The CTC
/// operations themselves are total over any finite-or-neg-infinity entries,
/// which is what allows perturbing single entries for gradient checks.
#[derive(Debug, Clone)]
pub struct LogProbLattice {
    frames: usize,
    vocab: usize,
    logp: Vec<f64>,
}

impl LogProbLattice {
    pub fn new(frames: usize, vocab: usize, logp: Vec<f64>) -> Result<Self> {
        if frames == 0 || vocab == 0 {
            return Err(Error::ShapeMismatch {
                expected: "T >= 1 and V >= 1".into(),
                actual: format!("T={frames}, V={vocab}"),
            });
        }
        if logp.len() != frames * vocab {
            return Err(Error::ShapeMismatch {
                expected: format!("{frames}x{vocab} = {} entries", frames * vocab),
                actual: format!("{} entries", logp.len()),
            });
        }
        if logp.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::Invalid(
                "lattice entries must be finite or -infinity".into(),
            ));
        }
        Ok(LogProbLattice {
            frames,
            vocab,
            logp,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.logp[t * self.vocab..(t + 1) * self.vocab]
    }

    pub fn get(&self, t: usize, v: usize) -> f64 {
        self.logp[t * self.vocab + v]
    }

    /// Worst absolute row log-sum-exp deviation from 0.
    pub fn max_row_norm_error(&self) -> f64 {
        (0..self.frames)
            .map(|t| log_sum_exp_slice(self.row(t)).abs())
            .fold(0.0, f64::max)
    }
}

/// A label sequence to score against a lattice; never contains the blank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CtcTarget {
    labels: Vec<usize>,
}

impl CtcTarget {
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Invalid("CTC target must be non-empty".into()));
        }
        Ok(CtcTarget { labels })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// log(exp(a) + exp(b)) without overflow; -inf is absorbing for exact zeros.
fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

fn log_sum_exp_slice(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Blank-interleaved extended label sequence: `- l1 - l2 - ... - lL -`.
fn extended_labels(labels: &[usize], blank: usize) -> Vec<usize> {
    let mut ext = Vec::with_capacity(2 * labels.len() + 1);
    ext.push(blank);
    for &l in labels {
        ext.push(l);
        ext.push(blank);
    }
    ext
}

fn adjacent_repeats(labels: &[usize]) -> usize {
    labels.windows(2).filter(|w| w[0] == w[1]).count()
}

fn validate(lattice: &LogProbLattice, target: &CtcTarget, blank: usize) -> Result<()> {
    if blank >= lattice.vocab_size() {
        return Err(Error::ShapeMismatch {
            expected: format!("blank index < {}", lattice.vocab_size()),
            actual: format!("blank = {blank}"),
        });
    }
    for (pos, &l) in target.labels().iter().enumerate() {
        if l == blank {
            return Err(Error::BlankInTarget {
                blank,
                position: pos,
            });
        }
        if l >= lattice.vocab_size() {
            return Err(Error::ShapeMismatch {
                expected: format!("label < {}", lattice.vocab_size()),
                actual: format!("label {l} at position {pos}"),
            });
        }
    }
    let required = target.len() + adjacent_repeats(target.labels());
    if lattice.frames() < required {
        return Err(Error::Infeasible {
            frames: lattice.frames(),
            required,
        });
    }
    Ok(())
}

/// Forward variables: `alpha[t][s]` is the log-probability of all alignment
/// prefixes over frames `0..=t` ending in extended state `s`, including the
/// emission at `t`.
fn forward_alphas(lattice: &LogProbLattice, ext: &[usize], blank: usize) -> Vec<Vec<f64>> {
    let t_len = lattice.frames();
    let s_len = ext.len();
    let mut alpha = vec![vec![f64::NEG_INFINITY; s_len]; t_len];
    alpha[0][0] = lattice.get(0, ext[0]);
    if s_len > 1 {
        alpha[0][1] = lattice.get(0, ext[1]);
    }
    for t in 1..t_len {
        for s in 0..s_len {
            let mut acc = alpha[t - 1][s];
            if s >= 1 {
                acc = log_add(acc, alpha[t - 1][s - 1]);
            }
            // Skip over a blank only when it does not merge equal labels.
            if s >= 2 && ext[s] != blank && ext[s] != ext[s - 2] {
                acc = log_add(acc, alpha[t - 1][s - 2]);
            }
            alpha[t][s] = acc + lattice.get(t, ext[s]);
        }
    }
    alpha
}

/// Backward variables, mirror image of [`forward_alphas`]: `beta[t][s]`
/// covers frames `t..T`, including the emission at `t`.
fn backward_betas(lattice: &LogProbLattice, ext: &[usize], blank: usize) -> Vec<Vec<f64>> {
    let t_len = lattice.frames();
    let s_len = ext.len();
    let mut beta = vec![vec![f64::NEG_INFINITY; s_len]; t_len];
    beta[t_len - 1][s_len - 1] = lattice.get(t_len - 1, ext[s_len - 1]);
    if s_len > 1 {
        beta[t_len - 1][s_len - 2] = lattice.get(t_len - 1, ext[s_len - 2]);
    }
    for t in (0..t_len - 1).rev() {
        for s in 0..s_len {
            let mut acc = beta[t + 1][s];
            if s + 1 < s_len {
                acc = log_add(acc, beta[t + 1][s + 1]);
            }
            if s + 2 < s_len && ext[s] != blank && ext[s] != ext[s + 2] {
                acc = log_add(acc, beta[t + 1][s + 2]);
            }
            beta[t][s] = acc + lattice.get(t, ext[s]);
        }
    }
    beta
}

fn log_likelihood(alpha: &[Vec<f64>], s_len: usize) -> f64 {
    let last = alpha.last().expect("at least one frame");
    if s_len > 1 {
        log_add(last[s_len - 1], last[s_len - 2])
    } else {
        last[s_len - 1]
    }
}

/// Negative log-likelihood of the target under the lattice, in nats.
pub fn ctc_loss(lattice: &LogProbLattice, target: &CtcTarget, blank: usize) -> Result<f64> {
    validate(lattice, target, blank)?;
    let ext = extended_labels(target.labels(), blank);
    let alpha = forward_alphas(lattice, &ext, blank);
    Ok(-log_likelihood(&alpha, ext.len()))
}

/// Gradient of [`ctc_loss`] with respect to every `logp[t][v]` entry treated
/// as a free variable. Returned as a `T x V` row-major matrix.
///
/// Rows sum to -1, not 0: normalization of the lattice is not assumed here,
/// so the softmax Jacobian belongs to the caller.
pub fn ctc_grad(lattice: &LogProbLattice, target: &CtcTarget, blank: usize) -> Result<Vec<f64>> {
    validate(lattice, target, blank)?;
    let ext = extended_labels(target.labels(), blank);
    let s_len = ext.len();
    let alpha = forward_alphas(lattice, &ext, blank);
    let beta = backward_betas(lattice, &ext, blank);
    let log_p = log_likelihood(&alpha, s_len);
    if log_p == f64::NEG_INFINITY {
        return Err(Error::Invalid(
            "target has zero probability under the lattice; gradient undefined".into(),
        ));
    }
    let t_len = lattice.frames();
    let v_len = lattice.vocab_size();
    let mut grad = vec![0.0; t_len * v_len];
    // gamma[t][v] = log sum over states s with ext[s]=v of alpha[t][s]+beta[t][s];
    // each term double-counts the emission logp[t][v], so subtract it once.
    let mut gamma = vec![f64::NEG_INFINITY; v_len];
    for t in 0..t_len {
        gamma.fill(f64::NEG_INFINITY);
        for s in 0..s_len {
            let v = ext[s];
            gamma[v] = log_add(gamma[v], alpha[t][s] + beta[t][s]);
        }
        for v in 0..v_len {
            if gamma[v] == f64::NEG_INFINITY {
                continue; // no alignment passes through (t, v)
            }
            grad[t * v_len + v] = -((gamma[v] - lattice.get(t, v) - log_p).exp());
        }
    }
    Ok(grad)
}

/// CTC collapse: merge adjacent duplicates, then delete blanks.
pub fn collapse(path: &[usize], blank: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev: Option<usize> = None;
    for &l in path {
        if prev != Some(l) {
            if l != blank {
                out.push(l);
            }
            prev = Some(l);
        }
    }
    out
}

/// Best-path decoding: per-frame argmax (ties to the lowest index), then
/// [`collapse`].
pub fn greedy_decode(lattice: &LogProbLattice, blank: usize) -> Vec<usize> {
    let path: Vec<usize> = (0..lattice.frames())
        .map(|t| {
            let row = lattice.row(t);
            let mut best = 0usize;
            for (v, &lp) in row.iter().enumerate() {
                if lp > row[best] {
                    best = v;
                }
            }
            best
        })
        .collect();
    collapse(&path, blank)
}
