use rayon::prelude::*;
use serde::Serialize;

use super::config::{AlgorithmKind, ExperimentConfig};
use crate::dynamics::{Model, RngStream, Trajectory};
use crate::estimators::Fit;
use crate::{Error, Result, Vector};

/// Environment variable holding the worker count for parallel runs.
pub const WORKERS_ENV: &str = "DIFFTD_WORKERS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    RankDeficient,
    Diverged,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::RankDeficient => "rank_deficient",
            Status::Diverged => "diverged",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ok" => Ok(Status::Ok),
            "rank_deficient" => Ok(Status::RankDeficient),
            "diverged" => Ok(Status::Diverged),
            other => Err(Error::Parse(format!("unknown status '{other}'"))),
        }
    }
}

/// Estimate reported by one replica at one reporting time.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplicaRow {
    pub replica: u64,
    pub seed: u64,
    pub t: u64,
    pub theta: Vec<f64>,
    pub kappa: f64,
    pub cbar: f64,
    pub status: Status,
}

impl ReplicaRow {
    fn failed(replica: u64, seed: u64, t: u64, l: usize, status: Status) -> Self {
        Self {
            replica,
            seed,
            t,
            theta: vec![f64::NAN; l],
            kappa: f64::NAN,
            cbar: f64::NAN,
            status,
        }
    }

    fn from_fit(replica: u64, seed: u64, t: u64, l: usize, fit: Result<Fit>) -> Self {
        match fit {
            Ok(fit) => Self {
                replica,
                seed,
                t,
                theta: fit.estimate.theta.iter().copied().collect(),
                kappa: fit.estimate.kappa,
                cbar: fit.cbar,
                status: Status::Ok,
            },
            Err(Error::InsufficientRank(_)) => Self::failed(replica, seed, t, l, Status::RankDeficient),
            Err(_) => Self::failed(replica, seed, t, l, Status::Diverged),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub algorithm: AlgorithmKind,
    pub param_len: usize,
    pub burn_in: u64,
    pub report_times: Vec<u64>,
    /// Sorted by replica, then time.
    pub rows: Vec<ReplicaRow>,
}

impl ExperimentResult {
    pub fn rows_at(&self, t: u64) -> impl Iterator<Item = &ReplicaRow> {
        self.rows.iter().filter(move |r| r.t == t)
    }

    pub fn horizon(&self) -> u64 {
        *self.report_times.last().expect("at least one reporting time")
    }

    /// Rows at `t` with a usable estimate.
    pub fn included_at(&self, t: u64) -> Vec<&ReplicaRow> {
        self.rows_at(t).filter(|r| r.status == Status::Ok).collect()
    }

    pub fn count_at(&self, t: u64, status: Status) -> usize {
        self.rows_at(t).filter(|r| r.status == status).count()
    }
}

/// Runs every replica of `cfg`. Replica `i` draws from stream `i` of
/// `run.seed`, so results do not depend on scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let model = cfg.build_model()?;
    let param_len = cfg.param_len(model.as_ref())?;
    let times = cfg.report_times();
    let one = |i: u64| run_replica(cfg, model.as_ref(), &times, param_len, i);

    let per_replica: Result<Vec<Vec<ReplicaRow>>> = if cfg.run.parallel {
        let workers = std::env::var(WORKERS_ENV)
            .ok()
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| Error::Config(format!("{WORKERS_ENV}='{v}' is not a count")))
            })
            .transpose()?
            .unwrap_or(0);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
        pool.install(|| (0..cfg.run.replicas).into_par_iter().map(one).collect())
    } else {
        (0..cfg.run.replicas).map(one).collect()
    };
    Ok(ExperimentResult {
        algorithm: cfg.algorithm.kind,
        param_len,
        burn_in: cfg.run.burn_in,
        report_times: times,
        rows: per_replica?.into_iter().flatten().collect(),
    })
}

fn run_replica(
    cfg: &ExperimentConfig,
    model: &dyn Model,
    times: &[u64],
    l: usize,
    replica: u64,
) -> Result<Vec<ReplicaRow>> {
    let seed = cfg.run.seed;
    let rng = RngStream::new(seed, replica);
    if cfg.algorithm.kind == AlgorithmKind::CtGradLstd {
        return run_ct_replica(cfg, rng, times, l, replica);
    }
    let mut rows = Vec::with_capacity(times.len());
    let mut traj = Trajectory::new(model, Vector::from_element(model.state_dim(), cfg.run.x0), rng);
    let fail_rest = |rows: &mut Vec<ReplicaRow>, from: usize| {
        for &t in &times[from..] {
            rows.push(ReplicaRow::failed(replica, seed, t, l, Status::Diverged));
        }
    };
    if traj.skip_steps(cfg.run.burn_in).is_err() {
        fail_rest(&mut rows, 0);
        return Ok(rows);
    }
    let mut est = cfg.build_estimator(model)?;
    let mut t = 0u64;
    for (k, &target) in times.iter().enumerate() {
        while t < target {
            let ok = traj.next_step().and_then(|s| est.update(&s));
            if ok.is_err() {
                fail_rest(&mut rows, k);
                return Ok(rows);
            }
            t += 1;
        }
        rows.push(ReplicaRow::from_fit(replica, seed, t, l, est.fit()));
    }
    Ok(rows)
}

fn run_ct_replica(
    cfg: &ExperimentConfig,
    mut rng: RngStream,
    times: &[u64],
    l: usize,
    replica: u64,
) -> Result<Vec<ReplicaRow>> {
    let seed = cfg.run.seed;
    let mut est = cfg.build_ct()?;
    let ou = est.model().clone();
    let mut x = cfg.run.x0;
    for _ in 0..cfg.run.burn_in {
        x = ou.euler_step(x, rng.standard_normal());
    }
    let mut rows = Vec::with_capacity(times.len());
    let mut t = 0u64;
    for (k, &target) in times.iter().enumerate() {
        match est.run(x, target - t, &mut rng) {
            Ok(next) => x = next,
            Err(_) => {
                for &t in &times[k..] {
                    rows.push(ReplicaRow::failed(replica, seed, t, l, Status::Diverged));
                }
                return Ok(rows);
            }
        }
        t = target;
        rows.push(ReplicaRow::from_fit(replica, seed, t, l, crate::estimators::Estimator::fit(&est)));
    }
    Ok(rows)
}
