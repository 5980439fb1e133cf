//! CSV and JSON emission. Floats are written with 17 significant digits so
//! that parsing a file reproduces the in-memory values exactly.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::bellman::BellmanReport;
use super::experiment::{ExperimentResult, ReplicaRow, Status};
use super::stats::{CovarianceReport, Histogram};
use crate::{Error, Result};

pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

fn create(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

pub fn replica_header(l: usize) -> Vec<String> {
    let mut h = vec!["replica".to_string(), "seed".into(), "T".into()];
    h.extend((1..=l).map(|i| format!("theta_{i}")));
    h.extend(["kappa".to_string(), "cbar".into(), "status".into()]);
    h
}

pub fn write_replicas(path: &Path, param_len: usize, rows: &[ReplicaRow]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(replica_header(param_len)).map_err(|e| csv_err(path, e))?;
    for r in rows {
        let mut rec = vec![r.replica.to_string(), r.seed.to_string(), r.t.to_string()];
        rec.extend(r.theta.iter().map(|&v| fmt_f64(v)));
        rec.extend([fmt_f64(r.kappa), fmt_f64(r.cbar), r.status.as_str().to_string()]);
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a replica file; returns the number of θ columns and the rows.
pub fn read_replicas(path: &Path) -> Result<(usize, Vec<ReplicaRow>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.len() < 6 {
        return Err(Error::Parse(format!("{}: too few columns", path.display())));
    }
    let l = header.len() - 6;
    if header.iter().collect::<Vec<_>>() != replica_header(l) {
        return Err(Error::Parse(format!("{}: unexpected header", path.display())));
    }
    let parse = |s: &str| -> Result<f64> {
        s.parse().map_err(|_| Error::Parse(format!("{}: bad number '{s}'", path.display())))
    };
    let parse_u = |s: &str| -> Result<u64> {
        s.parse().map_err(|_| Error::Parse(format!("{}: bad integer '{s}'", path.display())))
    };
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        rows.push(ReplicaRow {
            replica: parse_u(&rec[0])?,
            seed: parse_u(&rec[1])?,
            t: parse_u(&rec[2])?,
            theta: (0..l).map(|i| parse(&rec[3 + i])).collect::<Result<_>>()?,
            kappa: parse(&rec[3 + l])?,
            cbar: parse(&rec[4 + l])?,
            status: Status::parse(&rec[5 + l])?,
        });
    }
    Ok((l, rows))
}

pub fn write_bellman(path: &Path, report: &BellmanReport) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["x", "bellman_error", "stderr"]).map_err(|e| csv_err(path, e))?;
    for p in &report.points {
        w.write_record([fmt_f64(p.x), fmt_f64(p.error), fmt_f64(p.stderr)])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_histogram(path: &Path, h: &Histogram) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["bin_lo", "bin_hi", "count"]).map_err(|e| csv_err(path, e))?;
    for (k, c) in h.counts.iter().enumerate() {
        w.write_record([fmt_f64(h.edges[k]), fmt_f64(h.edges[k + 1]), c.to_string()])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes())
        .and_then(|_| f.write_all(b"\n"))
        .map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a std::collections::BTreeMap<String, String>,
    algorithm: &'a str,
    burn_in: u64,
    report_times: &'a [u64],
    diverged: Vec<(u64, usize)>,
    rank_deficient: Vec<(u64, usize)>,
    covariance: Vec<CovarianceReport>,
    histogram_bins: &'static str,
}

/// Writes `replicas.csv`, `summary.json` and, per reporting time with at
/// least two usable replicas, `hist_T{t}_theta_{i}.csv`.
pub fn write_experiment(
    dir: &Path,
    config: &std::collections::BTreeMap<String, String>,
    result: &ExperimentResult,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_replicas(&dir.join("replicas.csv"), result.param_len, &result.rows)?;
    let mut covariance = Vec::new();
    for &t in &result.report_times {
        if let Ok(c) = super::stats::covariance_report(result, t) {
            covariance.push(c);
            let included = result.included_at(t);
            for i in 0..result.param_len {
                let values: Vec<f64> = included.iter().map(|r| r.theta[i]).collect();
                let h = super::stats::histogram(&values)?;
                write_histogram(&dir.join(format!("hist_T{t}_theta_{}.csv", i + 1)), &h)?;
            }
        }
    }
    let count = |s: Status| -> Vec<(u64, usize)> {
        result.report_times.iter().map(|&t| (t, result.count_at(t, s))).collect()
    };
    let summary = Summary {
        config,
        algorithm: result.algorithm.as_str(),
        burn_in: result.burn_in,
        report_times: &result.report_times,
        diverged: count(Status::Diverged),
        rank_deficient: count(Status::RankDeficient),
        covariance,
        histogram_bins: "freedman_diaconis",
    };
    write_json(&dir.join("summary.json"), &summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            assert_eq!(s.split('e').next().unwrap().trim_start_matches('-').len(), 18);
        }
        assert!(fmt_f64(f64::NAN).parse::<f64>().unwrap().is_nan());
    }

    #[test]
    fn empty_result_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        write_replicas(&p, 2, &[]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text, "replica,seed,T,theta_1,theta_2,kappa,cbar,status\n");
        let (l, rows) = read_replicas(&p).unwrap();
        assert_eq!((l, rows.len()), (2, 0));
    }
}
