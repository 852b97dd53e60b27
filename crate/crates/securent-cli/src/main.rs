use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use securent_cli::fixture::fixture_dir;
use securent_cli::reproduce::{reproduce, Figure};
use securent_cli::runner::{results_csv, run_experiment, summary_csv};
use securent_cli::{ExperimentConfig, Fixture};
use securent_core::attacker::infer_topology_with;
use securent_core::evaluation::{
    calibrate_offsets, classify_congested_paths, clink_detect_partial, edit_costs, similarity, GraphView, ThresholdRule,
};
use securent_core::measurement::{format_sig, MeasurementSeries};
use securent_core::obfuscation::{build_plan, PlanConfig};
use securent_core::seed;
use securent_core::topology::{load_graphml, MonitorFixture, Topology};

#[derive(Parser)]
#[command(name = "securent", version, about = "Topology obfuscation lab for network tomography")]
struct Cli {
    /// Experiment config (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; stdout when omitted, where that makes sense.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Topology GraphML; overrides the config.
    #[arg(long, global = true)]
    topology: Option<PathBuf>,
    /// Monitor fixture; defaults to the topology path with a `.monitors`
    /// extension.
    #[arg(long, global = true)]
    monitors: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build an obfuscation plan for the topology.
    Protect,
    /// Infer a logical topology from a measurement CSV.
    Attack {
        /// Measurement CSV (`round,path_0,...`).
        input: PathBuf,
    },
    /// Score a graph pair, or run congestion detection on a series.
    Evaluate {
        /// Ground-truth GraphML.
        #[arg(long, conflicts_with = "series")]
        truth: Option<PathBuf>,
        /// Inferred GraphML.
        #[arg(long, requires = "truth")]
        inferred: Option<PathBuf>,
        /// Measurement CSV to run CLINK on, one row per round.
        #[arg(long)]
        series: Option<PathBuf>,
        /// Link congestion prior for CLINK.
        #[arg(long, default_value_t = 0.1)]
        prior: f64,
    },
    /// Run the full probe-count x p x trial grid.
    Run,
    /// Regenerate the CSVs behind one figure on the shipped fixtures.
    Reproduce {
        /// fig3, fig4 or fig5.
        figure: String,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ExperimentConfig::parse(&text, p.parent()).with_context(|| format!("parsing {}", p.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(t) = &cli.topology {
        cfg.topology = Some(t.clone());
    }
    if let Some(m) = &cli.monitors {
        cfg.monitors = Some(m.clone());
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn load_fixture(cfg: &ExperimentConfig) -> Result<Fixture> {
    let topo = cfg.topology.as_ref().ok_or_else(|| anyhow!("no topology given (--topology or config)"))?;
    let mons = cfg.monitors_path().expect("topology is set");
    let name = topo.file_stem().and_then(|s| s.to_str()).unwrap_or("topology");
    Fixture::from_files(topo, &mons, name)
}

fn load_monitors(cfg: &ExperimentConfig) -> Result<MonitorFixture> {
    let path = cfg.monitors_path().ok_or_else(|| anyhow!("no monitor fixture given (--monitors or --topology)"))?;
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    Ok(MonitorFixture::parse(&text)?)
}

fn emit(out: Option<&Path>, file: &str, text: &str) -> Result<()> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let p = dir.join(file);
            std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
            eprintln!("wrote {}", p.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn read_graph(path: &Path, monitors: Option<&MonitorFixture>) -> Result<Topology> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let t = load_graphml(&bytes).with_context(|| format!("loading {}", path.display()))?;
    Ok(match monitors {
        Some(m) => t.with_monitors(&m.monitors)?,
        None => t,
    })
}

fn protect(cli: &Cli, cfg: &ExperimentConfig) -> Result<()> {
    let fix = load_fixture(cfg)?;
    let pc = PlanConfig {
        alpha: cfg.alpha[0],
        c: cfg.c,
        target_mean_delay: cfg.idle.mean,
        module: cfg.module,
        rewire_fraction: cfg.rewire_fraction,
        fake_seed: seed::derive(cfg.seed, &[seed::label("fake"), 0]),
        fake_congestion: cfg.fake_congestion,
        congestion_ratio: cfg.congestion_ratio,
    };
    let plan = build_plan(&fix.topology, &fix.paths, &fix.routing, &pc)?;
    eprintln!("{}", plan.describe());
    emit(cli.out.as_deref(), "plan.txt", &plan.to_text())
}

fn attack(cli: &Cli, cfg: &ExperimentConfig, input: &Path) -> Result<()> {
    let mf = load_monitors(cfg)?;
    let text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let series = MeasurementSeries::from_csv(&text)?;
    let inferred = infer_topology_with(&series, &mf.effective_pairs(), &cfg.attacker)?;
    if inferred.low_confidence {
        eprintln!("warning: no shared structure found; star layout emitted");
    }
    emit(cli.out.as_deref(), "inferred.graphml", &inferred.to_graphml())
}

fn evaluate_graphs(cli: &Cli, cfg: &ExperimentConfig, truth: &Path, inferred: Option<&Path>) -> Result<()> {
    let inferred = inferred.ok_or_else(|| anyhow!("--truth needs --inferred"))?;
    let mf = match cfg.monitors_path() {
        Some(p) if p.exists() => Some(load_monitors(cfg)?),
        _ => None,
    };
    let g = GraphView::from(&read_graph(truth, mf.as_ref())?);
    let h = GraphView::from(&read_graph(inferred, mf.as_ref())?);
    let ec = edit_costs(&g, &h);
    let sim = similarity(ec.g0, ec.g1, ec.g2)?;
    let text = format!(
        "g0,g1,g2,exact,similarity\n{},{},{},{},{}\n",
        ec.g0,
        ec.g1,
        ec.g2,
        ec.exact,
        format_sig(sim, 9)
    );
    emit(cli.out.as_deref(), "similarity.csv", &text)
}

fn evaluate_series(cli: &Cli, cfg: &ExperimentConfig, series: &Path, prior: f64) -> Result<()> {
    let fix = load_fixture(cfg)?;
    let text = std::fs::read_to_string(series).with_context(|| format!("reading {}", series.display()))?;
    let s = MeasurementSeries::from_csv(&text)?;
    if s.n_paths() != fix.routing.n_paths() {
        bail!("series has {} paths, topology routes {}", s.n_paths(), fix.routing.n_paths());
    }
    let rule = ThresholdRule {
        idle_mean: cfg.idle.mean,
        spread: cfg.idle.spread,
        k: cfg.threshold_k,
        offsets: calibrate_offsets(&s.rounds, &fix.routing, cfg.idle.mean),
    };
    let priors = vec![prior; fix.routing.n_links()];
    let nodes = fix.topology.nodes();
    let mut out = String::from("round,congested_links,unexplained_paths\n");
    for (r, y) in s.rounds.iter().enumerate() {
        let states = classify_congested_paths(y, &fix.routing, &rule);
        let o = clink_detect_partial(&states, &fix.routing, &priors)?;
        let links: Vec<String> = o
            .links
            .iter()
            .enumerate()
            .filter(|(_, c)| **c)
            .map(|(j, _)| {
                let l = &fix.topology.links()[j];
                format!("{}-{}", nodes[l.a], nodes[l.b])
            })
            .collect();
        let unexplained: Vec<String> = o.unexplained.iter().map(usize::to_string).collect();
        out.push_str(&format!("{r},{},{}\n", links.join(" "), unexplained.join(" ")));
    }
    emit(cli.out.as_deref(), "detection.csv", &out)
}

fn run(cli: &Cli, cfg: &ExperimentConfig) -> Result<bool> {
    let fix = load_fixture(cfg)?;
    let grid = run_experiment(&fix, cfg, cli.jobs)?;
    let summary = summary_csv(&grid.reports);
    match &cli.out {
        Some(_) => {
            emit(cli.out.as_deref(), "results.csv", &results_csv(&grid.reports))?;
            emit(cli.out.as_deref(), "summary.csv", &summary)?;
        }
        None => print!("{}", results_csv(&grid.reports)),
    }
    eprint!("{summary}");
    if !grid.failures.is_empty() {
        eprintln!("{} trial(s) failed", grid.failures.len());
    }
    Ok(grid.failures.is_empty())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = (|| -> Result<bool> {
        let cfg = load_config(&cli)?;
        match &cli.cmd {
            Cmd::Protect => protect(&cli, &cfg).map(|_| true),
            Cmd::Attack { input } => attack(&cli, &cfg, input).map(|_| true),
            Cmd::Evaluate {
                truth,
                inferred,
                series,
                prior,
            } => match (truth, series) {
                (Some(t), _) => evaluate_graphs(&cli, &cfg, t, inferred.as_deref()).map(|_| true),
                (None, Some(s)) => evaluate_series(&cli, &cfg, s, *prior).map(|_| true),
                (None, None) => bail!("evaluate needs --truth/--inferred or --series"),
            },
            Cmd::Run => run(&cli, &cfg),
            Cmd::Reproduce { figure } => {
                let fig = Figure::parse(figure).ok_or_else(|| anyhow!("unknown figure {figure:?} (fig3, fig4, fig5)"))?;
                let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
                let rep = reproduce(fig, &fixture_dir(), &out, &cfg, cli.jobs)?;
                for f in &rep.files {
                    eprintln!("wrote {}", f.display());
                }
                Ok(rep.failures.is_empty())
            }
        }
    })();
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
