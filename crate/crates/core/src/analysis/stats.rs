use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use super::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationMethod {
    Spearman,
    Pearson,
    KendallTauB,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub method: CorrelationMethod,
    pub coefficient: f64,
    pub n: usize,
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<(), AnalysisError> {
    if x.len() != y.len() {
        return Err(AnalysisError::LengthMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(AnalysisError::TooFew {
            needed: 2,
            found: x.len(),
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(AnalysisError::NonFinite);
    }
    Ok(())
}

pub fn correlate(
    x: &[f64],
    y: &[f64],
    method: CorrelationMethod,
) -> Result<CorrelationReport, AnalysisError> {
    check_pair(x, y)?;
    let coefficient = match method {
        CorrelationMethod::Pearson => pearson(x, y)?,
        CorrelationMethod::Spearman => pearson(&average_ranks(x), &average_ranks(y))?,
        CorrelationMethod::KendallTauB => kendall_tau_b(x, y)?,
    };
    Ok(CorrelationReport {
        method,
        coefficient: coefficient.clamp(-1.0, 1.0),
        n: x.len(),
    })
}

/// Spearman, Pearson and Kendall, in that order.
pub fn correlate_all(x: &[f64], y: &[f64]) -> Result<[CorrelationReport; 3], AnalysisError> {
    Ok([
        correlate(x, y, CorrelationMethod::Spearman)?,
        correlate(x, y, CorrelationMethod::Pearson)?,
        correlate(x, y, CorrelationMethod::KendallTauB)?,
    ])
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64, AnalysisError> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AnalysisError::ZeroVariance);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// 1-based ranks, ties sharing the mean of the positions they span.
fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && v[order[j]] == v[order[i]] {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

/// Pairs tied within runs of equal values in a sorted slice.
fn tied_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Knight's O(n log n) τ-b: sort by (x, y), then count the inversions a merge
/// sort on y has to undo.
fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64, AnalysisError> {
    let n = x.len() as u64;
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let n0 = n * (n - 1) / 2;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let n1 = tied_pairs(&xs);
    let n3 = tied_pairs(&pairs);
    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let swaps = merge_count(&mut ys);
    let n2 = tied_pairs(&ys);
    let denom = ((n0 - n1) as f64) * ((n0 - n2) as f64);
    if denom == 0.0 {
        return Err(AnalysisError::ZeroVariance);
    }
    let numer = n0 as f64 - n1 as f64 - n2 as f64 + n3 as f64 - 2.0 * swaps as f64;
    Ok(numer / denom.sqrt())
}

/// Sorts ascending; returns the number of strict inversions.
fn merge_count(v: &mut [f64]) -> u64 {
    let mut buf = v.to_vec();
    let mut swaps = 0u64;
    let n = v.len();
    let mut width = 1;
    while width < n {
        let mut lo = 0;
        while lo < n {
            let mid = (lo + width).min(n);
            let hi = (lo + 2 * width).min(n);
            let (mut i, mut j, mut k) = (lo, mid, lo);
            while i < mid && j < hi {
                if v[j] < v[i] {
                    buf[k] = v[j];
                    swaps += (mid - i) as u64;
                    j += 1;
                } else {
                    buf[k] = v[i];
                    i += 1;
                }
                k += 1;
            }
            buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
            k += mid - i;
            buf[k..k + hi - j].copy_from_slice(&v[j..hi]);
            lo = hi;
        }
        v.copy_from_slice(&buf);
        width *= 2;
    }
    swaps
}

/// Cohen's κ between two label vectors.
pub fn cohen_kappa<T: Ord>(a: &[T], b: &[T]) -> Result<f64, AnalysisError> {
    if a.len() != b.len() {
        return Err(AnalysisError::LengthMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.is_empty() {
        return Err(AnalysisError::TooFew { needed: 1, found: 0 });
    }
    let n = a.len() as f64;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64;
    let mut marginals: BTreeMap<&T, (f64, f64)> = BTreeMap::new();
    for x in a {
        marginals.entry(x).or_default().0 += 1.0;
    }
    for y in b {
        marginals.entry(y).or_default().1 += 1.0;
    }
    let p_o = agree / n;
    let p_e: f64 = marginals.values().map(|(fa, fb)| (fa / n) * (fb / n)).sum();
    if p_e >= 1.0 {
        return Err(AnalysisError::DegenerateAgreement);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

pub const DEFAULT_RBO_PERSISTENCE: f64 = 0.9;

/// Extrapolated rank-biased overlap of two full rankings of the same ids.
pub fn rank_biased_overlap<T: Eq + Hash>(r1: &[T], r2: &[T], p: f64) -> Result<f64, AnalysisError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(AnalysisError::InvalidPersistence(p));
    }
    if r1.len() != r2.len() || r1.is_empty() {
        return Err(AnalysisError::NotSamePermutationDomain);
    }
    let index: HashMap<&T, usize> = r1.iter().enumerate().map(|(i, t)| (t, i)).collect();
    if index.len() != r1.len() {
        return Err(AnalysisError::NotSamePermutationDomain);
    }
    let mut in_a = vec![false; r1.len()];
    let mut in_b = vec![false; r1.len()];
    for t in r2 {
        let i = *index.get(t).ok_or(AnalysisError::NotSamePermutationDomain)?;
        if in_b[i] {
            return Err(AnalysisError::NotSamePermutationDomain);
        }
        in_b[i] = true;
    }
    in_b.fill(false);

    let k = r1.len();
    let mut overlap = 0usize;
    let mut weight = 1.0;
    let mut series = 0.0;
    for d in 0..k {
        let a = d;
        let b = index[&r2[d]];
        if a == b {
            overlap += 1;
        } else {
            overlap += usize::from(in_b[a]) + usize::from(in_a[b]);
        }
        in_a[a] = true;
        in_b[b] = true;
        weight *= p;
        series += overlap as f64 / (d + 1) as f64 * weight;
    }
    let tail = overlap as f64 / k as f64 * weight;
    Ok(tail + (1.0 - p) / p * series)
}

/// One-way random-effects ICC(1) over an items × raters matrix.
pub fn icc1(ratings: &[Vec<f64>]) -> Result<f64, AnalysisError> {
    let n = ratings.len();
    if n < 2 {
        return Err(AnalysisError::TooFew { needed: 2, found: n });
    }
    let k = ratings[0].len();
    if k < 2 {
        return Err(AnalysisError::TooFew { needed: 2, found: k });
    }
    for row in ratings {
        if row.len() != k {
            return Err(AnalysisError::LengthMismatch {
                expected: k,
                found: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(AnalysisError::NonFinite);
        }
    }
    let means: Vec<f64> = ratings.iter().map(|r| r.iter().sum::<f64>() / k as f64).collect();
    let grand = means.iter().sum::<f64>() / n as f64;
    let ss_between: f64 = means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>() * k as f64;
    let ss_within: f64 = ratings
        .iter()
        .zip(&means)
        .map(|(r, m)| r.iter().map(|v| (v - m) * (v - m)).sum::<f64>())
        .sum();
    let ms_between = ss_between / (n - 1) as f64;
    let ms_within = ss_within / (n * (k - 1)) as f64;
    let denom = ms_between + (k - 1) as f64 * ms_within;
    if denom == 0.0 {
        return Err(AnalysisError::DegenerateVariance);
    }
    Ok((ms_between - ms_within) / denom)
}

/// Which item of a comparison pair was judged harder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Choice {
    First,
    Second,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusReport {
    /// `None` for a rater who skipped every valid pair.
    pub per_rater_alignment: Vec<Option<f64>>,
    pub consensus_alignment: f64,
    /// κ between predictions and the majority over pairs with a strict
    /// majority; `None` when no such pair exists or κ is undefined.
    pub kappa: Option<f64>,
    pub valid_pairs: usize,
}

/// `judgments[r][p]` is rater `r`'s choice on pair `p`, `None` for a skip.
pub fn consensus_alignment(
    predictions: &[Choice],
    judgments: &[Vec<Option<Choice>>],
) -> Result<ConsensusReport, AnalysisError> {
    if judgments.is_empty() {
        return Err(AnalysisError::NoRaters);
    }
    for row in judgments {
        if row.len() != predictions.len() {
            return Err(AnalysisError::LengthMismatch {
                expected: predictions.len(),
                found: row.len(),
            });
        }
    }
    let valid: Vec<usize> = (0..predictions.len())
        .filter(|&p| judgments.iter().any(|r| r[p].is_some()))
        .collect();
    if valid.is_empty() {
        return Err(AnalysisError::NoValidPairs);
    }

    let per_rater_alignment = judgments
        .iter()
        .map(|row| {
            let (mut seen, mut hit) = (0usize, 0usize);
            for &p in &valid {
                if let Some(c) = row[p] {
                    seen += 1;
                    hit += usize::from(c == predictions[p]);
                }
            }
            (seen > 0).then(|| hit as f64 / seen as f64)
        })
        .collect();

    let mut matches = 0usize;
    let mut pred_major = Vec::new();
    let mut majority = Vec::new();
    for &p in &valid {
        let first = judgments.iter().filter(|r| r[p] == Some(Choice::First)).count();
        let second = judgments.iter().filter(|r| r[p] == Some(Choice::Second)).count();
        let major = match first.cmp(&second) {
            std::cmp::Ordering::Greater => Some(Choice::First),
            std::cmp::Ordering::Less => Some(Choice::Second),
            std::cmp::Ordering::Equal => None,
        };
        if let Some(c) = major {
            matches += usize::from(c == predictions[p]);
            pred_major.push(predictions[p]);
            majority.push(c);
        }
    }
    let kappa = if majority.is_empty() {
        None
    } else {
        cohen_kappa(&pred_major, &majority).ok()
    };
    Ok(ConsensusReport {
        per_rater_alignment,
        consensus_alignment: matches as f64 / valid.len() as f64,
        kappa,
        valid_pairs: valid.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    /// Position range in the first ranking, 1-based and inclusive.
    pub start: usize,
    pub end: usize,
    pub mean_displacement: f64,
    pub max_displacement: usize,
    /// Kendall τ-b of the two rankings inside the window; `None` when
    /// undefined (a single item, or all ties).
    pub kendall_tau: Option<f64>,
}

/// `rank_a[i]` and `rank_b[i]` are the ranks of item `i` under each method.
/// Items are ordered by `rank_a` (index breaks ties) and cut into
/// consecutive windows; the last may be shorter.
pub fn windowed_displacement(
    rank_a: &[usize],
    rank_b: &[usize],
    window_size: usize,
) -> Result<Vec<WindowStats>, AnalysisError> {
    if rank_a.len() != rank_b.len() {
        return Err(AnalysisError::LengthMismatch {
            expected: rank_a.len(),
            found: rank_b.len(),
        });
    }
    if window_size == 0 {
        return Err(AnalysisError::ZeroWindow);
    }
    let n = rank_a.len();
    if window_size > n {
        return Err(AnalysisError::WindowLargerThanN {
            window: window_size,
            n,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (rank_a[i], i));
    Ok(order
        .chunks(window_size)
        .enumerate()
        .map(|(w, items)| {
            let disp: Vec<usize> = items.iter().map(|&i| rank_a[i].abs_diff(rank_b[i])).collect();
            let a: Vec<f64> = items.iter().map(|&i| rank_a[i] as f64).collect();
            let b: Vec<f64> = items.iter().map(|&i| rank_b[i] as f64).collect();
            let kendall_tau = correlate(&a, &b, CorrelationMethod::KendallTauB)
                .ok()
                .map(|r| r.coefficient);
            WindowStats {
                start: w * window_size + 1,
                end: w * window_size + items.len(),
                mean_displacement: disp.iter().sum::<usize>() as f64 / items.len() as f64,
                max_displacement: disp.iter().copied().max().unwrap_or(0),
                kendall_tau,
            }
        })
        .collect())
}
