use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{EvalError, EvalReport};

/// Largest number of non-zero differences evaluated with the exact null
/// distribution; larger samples use the normal approximation.
pub const EXACT_LIMIT: usize = 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Pairs with a non-zero difference.
    pub n: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    pub exact: bool,
    /// Mean of `a - b` over all pairs, zeros included.
    pub mean_difference: f64,
}

/// Ranks of `|d|`, ascending, with ties given their average rank.
fn ranks(abs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..abs.len()).collect();
    order.sort_by(|&a, &b| abs[a].total_cmp(&abs[b]));
    let mut r = vec![0.0; abs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && abs[order[j + 1]] == abs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Probability mass of the doubled positive rank sum under random signs.
fn exact_distribution(doubled: &[usize]) -> Vec<f64> {
    let total: usize = doubled.iter().sum();
    let mut dist = vec![0.0; total + 1];
    dist[0] = 1.0;
    let mut reach = 0;
    for &r in doubled {
        for s in (0..=reach).rev() {
            if dist[s] != 0.0 {
                dist[s + r] += dist[s] * 0.5;
                dist[s] *= 0.5;
            }
        }
        reach += r;
    }
    dist
}

/// Paired two-sided Wilcoxon signed-rank test of `a` against `b`.
///
/// Zero differences are discarded and tied magnitudes receive average ranks.
/// Up to [`EXACT_LIMIT`] non-zero pairs the p-value comes from the exact
/// null distribution of the positive rank sum; beyond that a normal
/// approximation with tie and continuity correction is used.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> WilcoxonResult {
    assert_eq!(a.len(), b.len(), "paired samples must have equal length");
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean_difference = if diffs.is_empty() {
        0.0
    } else {
        diffs.iter().sum::<f64>() / diffs.len() as f64
    };
    let nz: Vec<f64> = diffs.into_iter().filter(|d| *d != 0.0).collect();
    let n = nz.len();
    let r = ranks(&nz.iter().map(|d| d.abs()).collect::<Vec<_>>());
    let w_plus: f64 = nz.iter().zip(&r).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let w_minus = (n * (n + 1)) as f64 / 2.0 - w_plus;
    if n == 0 {
        return WilcoxonResult {
            n,
            w_plus,
            w_minus,
            p_value: 1.0,
            exact: true,
            mean_difference,
        };
    }
    let (p_value, exact) = if n <= EXACT_LIMIT {
        let doubled: Vec<usize> = r.iter().map(|x| (2.0 * x).round() as usize).collect();
        let dist = exact_distribution(&doubled);
        let w = (2.0 * w_plus).round() as usize;
        let lower: f64 = dist[..=w].iter().sum();
        let upper: f64 = dist[w..].iter().sum();
        ((2.0 * lower.min(upper)).min(1.0), true)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let mut ties = BTreeMap::<u64, usize>::new();
        for x in &r {
            *ties.entry(x.to_bits()).or_default() += 1;
        }
        let tie_term: f64 = ties.values().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
        let dev = ((w_plus - mean).abs() - 0.5).max(0.0);
        let z = dev / var.sqrt();
        let tail = Normal::standard().sf(z);
        ((2.0 * tail).min(1.0), false)
    };
    WilcoxonResult {
        n,
        w_plus,
        w_minus,
        p_value,
        exact,
        mean_difference,
    }
}

/// Pairs the per-person errors of two reports by person id and tests
/// `a` against `b`. Persons present in only one report are ignored.
pub fn compare_reports(a: &EvalReport, b: &EvalReport) -> Result<WilcoxonResult, EvalError> {
    let bm: BTreeMap<u64, f64> = b.per_person.iter().map(|p| (p.id, p.mean_deg)).collect();
    let (xa, xb): (Vec<f64>, Vec<f64>) = a
        .per_person
        .iter()
        .filter_map(|p| bm.get(&p.id).map(|&m| (p.mean_deg, m)))
        .unzip();
    if xa.is_empty() {
        return Err(EvalError::NoCommonPersons);
    }
    Ok(wilcoxon_signed_rank(&xa, &xb))
}
