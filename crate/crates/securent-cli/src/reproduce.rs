//! Plot-ready CSVs for the three evaluation figures.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use securent_core::evaluation::{inference_similarity, EvaluationReport};
use securent_core::measurement::format_sig;

use crate::fixture::load_all;
use crate::runner::{pool, results_csv, run_tasks, tasks, GridOutput};
use crate::{ExperimentConfig, Method};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Attacker similarity against probe count.
    Fig3,
    /// CLINK F1 at the low and high congestion levels.
    Fig4,
    /// Trusted-user inference similarity against p.
    Fig5,
}

impl Figure {
    pub const ALL: [Figure; 3] = [Figure::Fig3, Figure::Fig4, Figure::Fig5];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
        }
    }

    pub fn parse(s: &str) -> Option<Figure> {
        Figure::ALL.into_iter().find(|f| f.name() == s)
    }
}

#[derive(Debug, Default)]
pub struct Reproduction {
    pub files: Vec<PathBuf>,
    pub failures: Vec<String>,
}

struct Row {
    label: String,
    n_probes: usize,
    p: f64,
}

fn mean_of(reports: &[EvaluationReport], row: &Row, method: Method, metric: fn(&EvaluationReport) -> f64) -> f64 {
    let xs: Vec<f64> = reports
        .iter()
        .filter(|r| r.method == method.label() && r.n_probes == row.n_probes && r.p == row.p)
        .map(metric)
        .collect();
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn table(x_header: &str, rows: &[Row], reports: &[EvaluationReport], metric: fn(&EvaluationReport) -> f64) -> String {
    let mut s = String::from(x_header);
    for m in Method::ALL {
        s.push(',');
        s.push_str(m.label());
    }
    s.push('\n');
    for row in rows {
        s.push_str(&row.label);
        for m in Method::ALL {
            s.push(',');
            s.push_str(&format_sig(mean_of(reports, row, m, metric), 6));
        }
        s.push('\n');
    }
    s
}

/// Run one figure's grid on every shipped fixture and write
/// `<fig>_<topology>.csv` plus `<fig>_trials.csv` with the raw reports.
pub fn reproduce(figure: Figure, fixtures: &Path, out_dir: &Path, cfg: &ExperimentConfig, jobs: usize) -> Result<Reproduction> {
    let fixtures = load_all(fixtures)?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let pool = pool(jobs)?;
    let (probes, ps): (Vec<usize>, Vec<f64>) = match figure {
        Figure::Fig3 => (cfg.probe_counts.clone(), vec![cfg.congestion_low]),
        Figure::Fig4 => (vec![cfg.figure_probes], vec![cfg.congestion_low, cfg.congestion_high]),
        Figure::Fig5 => (vec![cfg.figure_probes], cfg.congestion_probabilities.clone()),
    };
    let mut all = GridOutput::default();
    let mut out = Reproduction::default();
    for fix in &fixtures {
        let grid = run_tasks(&pool, fix, &tasks(fix, &probes, &ps, cfg.trials, cfg.seed), &Method::ALL, cfg);
        let text = match figure {
            Figure::Fig3 => {
                let rows: Vec<Row> = probes
                    .iter()
                    .map(|&n| Row {
                        label: n.to_string(),
                        n_probes: n,
                        p: ps[0],
                    })
                    .collect();
                table("n_probes", &rows, &grid.reports, |r| r.similarity)
            }
            Figure::Fig4 => {
                let rows: Vec<Row> = ["low", "high"]
                    .iter()
                    .zip(&ps)
                    .map(|(l, &p)| Row {
                        label: format!("{l},{p}"),
                        n_probes: probes[0],
                        p,
                    })
                    .collect();
                table("congestion,p", &rows, &grid.reports, |r| r.f1)
            }
            Figure::Fig5 => {
                let rows: Vec<Row> = ps
                    .iter()
                    .map(|&p| Row {
                        label: p.to_string(),
                        n_probes: probes[0],
                        p,
                    })
                    .collect();
                table("p", &rows, &grid.reports, |r| inference_similarity(r.nrmse))
            }
        };
        let path = out_dir.join(format!("{}_{}.csv", figure.name(), fix.name));
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        out.files.push(path);
        all.extend(grid);
    }
    let path = out_dir.join(format!("{}_trials.csv", figure.name()));
    std::fs::write(&path, results_csv(&all.reports)).with_context(|| format!("writing {}", path.display()))?;
    out.files.push(path);
    out.failures = all.failures;
    Ok(out)
}
