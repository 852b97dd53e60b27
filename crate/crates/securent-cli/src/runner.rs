//! Seeded experiment grids over a bounded worker pool.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::Result;
use rayon::prelude::*;
use securent_core::evaluation::EvaluationReport;
use securent_core::measurement::format_sig;
use securent_core::seed;

use crate::pipeline::{run_trial, TrialSpec};
use crate::{ExperimentConfig, Fixture, Method};

/// Seed of one trial. Methods are not part of the key, so adding a method
/// leaves every other cell's randomness untouched.
pub fn trial_seed(master: u64, topology: &str, probe_idx: usize, p_idx: usize, trial: usize) -> u64 {
    seed::derive(master, &[seed::label(topology), probe_idx as u64, p_idx as u64, trial as u64])
}

/// One grid point with its trial index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Task {
    pub probe_idx: usize,
    pub p_idx: usize,
    pub trial: usize,
    pub spec: TrialSpec,
}

pub fn tasks(fix: &Fixture, probe_counts: &[usize], ps: &[f64], trials: usize, master: u64) -> Vec<Task> {
    let mut out = Vec::with_capacity(probe_counts.len() * ps.len() * trials);
    for (pi, &n) in probe_counts.iter().enumerate() {
        for (qi, &p) in ps.iter().enumerate() {
            for t in 0..trials {
                out.push(Task {
                    probe_idx: pi,
                    p_idx: qi,
                    trial: t,
                    spec: TrialSpec {
                        n_probes: n,
                        p,
                        seed: trial_seed(master, &fix.name, pi, qi, t),
                    },
                });
            }
        }
    }
    out
}

#[derive(Debug, Default)]
pub struct GridOutput {
    /// Reports in grid order: probe count, then p, then trial, then method.
    pub reports: Vec<EvaluationReport>,
    /// One message per failed trial.
    pub failures: Vec<String>,
}

impl GridOutput {
    pub fn extend(&mut self, other: GridOutput) {
        self.reports.extend(other.reports);
        self.failures.extend(other.failures);
    }
}

pub fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?)
}

/// Run every task on `pool`. Row order depends only on the task list.
pub fn run_tasks(pool: &rayon::ThreadPool, fix: &Fixture, tasks: &[Task], methods: &[Method], cfg: &ExperimentConfig) -> GridOutput {
    let results: Vec<_> = pool.install(|| tasks.par_iter().map(|t| run_trial(fix, &t.spec, methods, cfg)).collect());
    let mut out = GridOutput::default();
    for (t, r) in tasks.iter().zip(results) {
        match r {
            Ok(reps) => out.reports.extend(reps),
            Err(e) => {
                let msg = format!(
                    "{} n_probes={} p={} trial={}: {e:#}",
                    fix.name, t.spec.n_probes, t.spec.p, t.trial
                );
                eprintln!("error: {msg}");
                out.failures.push(msg);
            }
        }
    }
    out
}

/// The full `probe_counts x congestion_probabilities x trials` grid.
pub fn run_experiment(fix: &Fixture, cfg: &ExperimentConfig, jobs: usize) -> Result<GridOutput> {
    let tasks = tasks(fix, &cfg.probe_counts, &cfg.congestion_probabilities, cfg.trials, cfg.seed);
    Ok(run_tasks(&pool(jobs)?, fix, &tasks, &cfg.methods, cfg))
}

pub fn results_csv(reports: &[EvaluationReport]) -> String {
    let mut s = String::from(EvaluationReport::CSV_HEADER);
    s.push('\n');
    for r in reports {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

/// Mean and standard error; the error is 0 for a single sample.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

pub const SUMMARY_HEADER: &str =
    "topology,method,n_probes,p,trials,similarity_mean,similarity_stderr,f1_mean,f1_stderr,nrmse_mean,nrmse_stderr";

/// Per-cell mean and standard error, one row per (topology, method,
/// n_probes, p) in first-seen order.
pub fn summary_csv(reports: &[EvaluationReport]) -> String {
    let mut order: Vec<(String, String, usize, String)> = Vec::new();
    let mut cells: BTreeMap<(String, String, usize, String), Vec<&EvaluationReport>> = BTreeMap::new();
    for r in reports {
        let key = (r.topology.clone(), r.method.clone(), r.n_probes, r.p.to_string());
        if !cells.contains_key(&key) {
            order.push(key.clone());
        }
        cells.entry(key).or_default().push(r);
    }
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for key in order {
        let rs = &cells[&key];
        let col = |f: fn(&EvaluationReport) -> f64| mean_stderr(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
        let (sm, se) = col(|r| r.similarity);
        let (fm, fe) = col(|r| r.f1);
        let (nm, ne) = col(|r| r.nrmse);
        let _ = write!(s, "{},{},{},{},{}", key.0, key.1, key.2, key.3, rs.len());
        for v in [sm, se, fm, fe, nm, ne] {
            s.push(',');
            s.push_str(&format_sig(v, 6));
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stderr_of_constant_is_zero() {
        assert_eq!(mean_stderr(&[2.0, 2.0, 2.0]), (2.0, 0.0));
        let (m, e) = mean_stderr(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((e - 1.0).abs() < 1e-12);
    }

    #[test]
    fn seeds_differ_per_coordinate() {
        let base = trial_seed(1, "agis", 0, 0, 0);
        assert_ne!(base, trial_seed(1, "ernet", 0, 0, 0));
        assert_ne!(base, trial_seed(1, "agis", 1, 0, 0));
        assert_ne!(base, trial_seed(1, "agis", 0, 1, 0));
        assert_ne!(base, trial_seed(1, "agis", 0, 0, 1));
        assert_ne!(base, trial_seed(2, "agis", 0, 0, 0));
    }
}
