use serde::Serialize;

use super::experiment::{ExperimentResult, ReplicaRow, Status};
use crate::{Error, Result};

/// Mean and spread of `θ(T)` across replicas.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CovarianceReport {
    pub t: u64,
    pub included: usize,
    pub excluded: usize,
    pub mean: Vec<f64>,
    /// Unbiased sample covariance, row-major `ℓ×ℓ`.
    pub cov: Vec<Vec<f64>>,
    /// `T · cov`, the CLT-scaled spread.
    pub scaled_cov: Vec<Vec<f64>>,
    pub kappa_mean: f64,
    pub cbar_mean: f64,
}

impl CovarianceReport {
    pub fn variance(&self, i: usize) -> f64 {
        self.cov[i][i]
    }
}

/// Summary of the rows at time `t` whose status is `ok`.
pub fn covariance_report(result: &ExperimentResult, t: u64) -> Result<CovarianceReport> {
    let rows: Vec<&ReplicaRow> = result.rows_at(t).collect();
    summarize(&rows, t)
}

pub fn summarize(rows: &[&ReplicaRow], t: u64) -> Result<CovarianceReport> {
    let ok: Vec<&ReplicaRow> = rows.iter().copied().filter(|r| r.status == Status::Ok).collect();
    let n = ok.len();
    if n < 2 {
        return Err(Error::Config(format!(
            "covariance needs at least 2 usable replicas at T={t}, have {n}"
        )));
    }
    let l = ok[0].theta.len();
    let nf = n as f64;
    let mut mean = vec![0.0; l];
    for r in &ok {
        for (m, v) in mean.iter_mut().zip(&r.theta) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= nf);
    let mut cov = vec![vec![0.0; l]; l];
    for r in &ok {
        for i in 0..l {
            for j in 0..l {
                cov[i][j] += (r.theta[i] - mean[i]) * (r.theta[j] - mean[j]);
            }
        }
    }
    for row in cov.iter_mut() {
        row.iter_mut().for_each(|c| *c /= nf - 1.0);
    }
    let scaled_cov = cov
        .iter()
        .map(|row| row.iter().map(|c| c * t as f64).collect())
        .collect();
    Ok(CovarianceReport {
        t,
        included: n,
        excluded: rows.len() - n,
        mean,
        cov,
        scaled_cov,
        kappa_mean: ok.iter().map(|r| r.kappa).sum::<f64>() / nf,
        cbar_mean: ok.iter().map(|r| r.cbar).sum::<f64>() / nf,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    /// `bins + 1` increasing edges.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

/// Freedman–Diaconis binning (width `2·IQR·n^{−1/3}`) of the finite values.
pub fn histogram(values: &[f64]) -> Result<Histogram> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return Err(Error::Config("histogram of an empty sample".into()));
    }
    v.sort_by(f64::total_cmp);
    let (lo, hi) = (v[0], v[v.len() - 1]);
    let iqr = quantile(&v, 0.75) - quantile(&v, 0.25);
    let width = 2.0 * iqr / (v.len() as f64).cbrt();
    let bins = if hi > lo && width > 0.0 {
        (((hi - lo) / width).ceil() as usize).clamp(1, 10_000)
    } else {
        1
    };
    let step = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let edges: Vec<f64> = (0..=bins)
        .map(|k| if k == bins && hi > lo { hi } else { lo + k as f64 * step })
        .collect();
    let mut counts = vec![0u64; bins];
    for x in &v {
        let k = (((x - lo) / step) as usize).min(bins - 1);
        counts[k] += 1;
    }
    Ok(Histogram { edges, counts })
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(replica: u64, theta: Vec<f64>) -> ReplicaRow {
        ReplicaRow { replica, seed: 0, t: 10, theta, kappa: 1.0, cbar: 2.0, status: Status::Ok }
    }

    #[test]
    fn identical_replicas_have_zero_covariance() {
        let rows = [row(0, vec![1.0, 2.0]), row(1, vec![1.0, 2.0]), row(2, vec![1.0, 2.0])];
        let refs: Vec<_> = rows.iter().collect();
        let r = summarize(&refs, 10).unwrap();
        assert!(r.cov.iter().flatten().all(|&c| c == 0.0));
    }

    #[test]
    fn symmetric_pair_gives_unbiased_covariance() {
        let v = [0.5, -2.0];
        let rows = [row(0, v.to_vec()), row(1, v.iter().map(|x| -x).collect())];
        let refs: Vec<_> = rows.iter().collect();
        let r = summarize(&refs, 10).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((r.cov[i][j] - 2.0 * v[i] * v[j]).abs() < 1e-15);
                assert!((r.scaled_cov[i][j] - 20.0 * v[i] * v[j]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn failed_rows_are_excluded_and_counted() {
        let mut bad = row(2, vec![f64::NAN, f64::NAN]);
        bad.status = Status::Diverged;
        let rows = [row(0, vec![1.0, 0.0]), row(1, vec![3.0, 0.0]), bad];
        let refs: Vec<_> = rows.iter().collect();
        let r = summarize(&refs, 10).unwrap();
        assert_eq!((r.included, r.excluded), (2, 1));
        assert_eq!(r.mean, vec![2.0, 0.0]);
        assert!(summarize(&refs[..1], 10).is_err());
    }

    #[test]
    fn histogram_counts_everything() {
        let v: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1000) as f64 / 10.0).collect();
        let h = histogram(&v).unwrap();
        assert_eq!(h.counts.iter().sum::<u64>(), 1000);
        assert_eq!(h.edges.len(), h.counts.len() + 1);
        assert!(h.edges.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(h.edges[0], 0.0);
        assert_eq!(*h.edges.last().unwrap(), 99.9);
        let single = histogram(&[3.0, 3.0]).unwrap();
        assert_eq!(single.counts, vec![2]);
    }
}
