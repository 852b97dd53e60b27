//! One trial: synthesize a series, protect it, attack it, score it.

use anyhow::Result;
use securent_core::attacker::infer_topology_with;
use securent_core::evaluation::{
    calibrate_offsets, classify_congested_paths, clink_detect_partial, f1_score, inference_similarity, nrmse, topology_similarity,
    trusted_link_inference, EvaluationReport, ThresholdRule,
};
use securent_core::measurement::{generate_probe_series, CongestionScenario, MeasurementSeries};
use securent_core::obfuscation::{build_plan, calibrate_uniform_scale, objective_from_distortion, select_best, uniform_series, ObfuscationPlan, PlanConfig};
use securent_core::seed;

use crate::{ExperimentConfig, Fixture, Method};

/// Scores of one observed series against the ground truth behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub similarity: f64,
    pub f1: f64,
    pub nrmse: f64,
    pub distortion: f64,
}

impl Scores {
    pub fn inference_similarity(&self) -> f64 {
        inference_similarity(self.nrmse)
    }
}

pub fn score(fix: &Fixture, truth: &MeasurementSeries, observed: &MeasurementSeries, cfg: &ExperimentConfig) -> Result<Scores> {
    let inferred = infer_topology_with(observed, &fix.pairs, &cfg.attacker)?;
    let similarity = topology_similarity(&fix.topology, &inferred)?;

    let rule = ThresholdRule {
        idle_mean: cfg.idle.mean,
        spread: cfg.idle.spread,
        k: cfg.threshold_k,
        offsets: calibrate_offsets(&observed.rounds, &fix.routing, cfg.idle.mean),
    };
    let p = truth.congestion_probability.unwrap_or(0.1).clamp(1e-6, 1.0 - 1e-6);
    let priors = vec![p; fix.routing.n_links()];
    let n_f1 = cfg.f1_rounds.min(observed.n_rounds()).max(1);
    let mut f1 = 0.0;
    for r in 0..n_f1 {
        let states = classify_congested_paths(&observed.rounds[r], &fix.routing, &rule);
        let links = clink_detect_partial(&states, &fix.routing, &priors)?.links;
        f1 += f1_score(&truth.link_states[r], &links)?;
    }
    f1 /= n_f1 as f64;

    let n_ls = cfg.nrmse_rounds.min(observed.n_rounds()).max(1);
    let (mut xs, mut hats) = (Vec::new(), Vec::new());
    for r in 0..n_ls {
        let est = trusted_link_inference(&observed.rounds[r], &fix.routing)?;
        for (x, e) in truth.link_values[r].iter().zip(est) {
            if let Some(e) = e {
                xs.push(*x);
                hats.push(e);
            }
        }
    }
    let nrmse = nrmse(&xs, &hats)?;

    let n = observed.n_rounds() as f64;
    let mut mean_noise = vec![0.0; observed.n_paths()];
    for (o, t) in observed.rounds.iter().zip(&truth.rounds) {
        for (m, (a, b)) in mean_noise.iter_mut().zip(o.iter().zip(t)) {
            *m += (a - b) / n;
        }
    }
    let distortion = mean_noise.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(Scores {
        similarity,
        f1,
        nrmse,
        distortion,
    })
}

/// Coordinates of one trial within a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSpec {
    pub n_probes: usize,
    pub p: f64,
    /// Seed of the measurement series; every method of the trial shares it.
    pub seed: u64,
}

/// The SecureNT candidate picked by the objective, with its protected series.
pub struct Protected {
    pub plan: ObfuscationPlan,
    pub series: MeasurementSeries,
    pub noise_total: f64,
    pub scores: Scores,
}

/// Build every `(alpha, fake seed)` candidate, score each, keep the best.
pub fn protect(fix: &Fixture, truth: &MeasurementSeries, cfg: &ExperimentConfig, trial_seed: u64) -> Result<Protected> {
    let mut cands: Vec<(ObfuscationPlan, EvaluationReport)> = Vec::new();
    let mut extra = Vec::new();
    for k in 0..cfg.fake_seeds {
        let fake_seed = seed::derive(trial_seed, &[seed::label("fake"), k as u64]);
        let noise_seed = seed::derive(trial_seed, &[seed::label("noise"), k as u64]);
        for &alpha in &cfg.alpha {
            let pc = PlanConfig {
                alpha,
                c: cfg.c,
                target_mean_delay: cfg.idle.mean,
                module: cfg.module,
                rewire_fraction: cfg.rewire_fraction,
                fake_seed,
                fake_congestion: cfg.fake_congestion,
                congestion_ratio: cfg.congestion_ratio,
            };
            let plan = build_plan(&fix.topology, &fix.paths, &fix.routing, &pc)?;
            let (series, total) = plan.protect_series(truth, noise_seed)?;
            let s = score(fix, truth, &series, cfg)?;
            let rep = report(fix, Method::Securent, truth, 0, s, cfg);
            cands.push((plan, rep));
            extra.push((series, total, s));
        }
    }
    let best = select_best(&cands, cfg.lambda1, cfg.lambda2)?;
    let plan = cands.swap_remove(best).0;
    let (series, noise_total, scores) = extra.swap_remove(best);
    Ok(Protected {
        plan,
        series,
        noise_total,
        scores,
    })
}

fn report(fix: &Fixture, method: Method, truth: &MeasurementSeries, seed: u64, s: Scores, cfg: &ExperimentConfig) -> EvaluationReport {
    EvaluationReport {
        topology: fix.name.clone(),
        method: method.label().to_owned(),
        n_probes: truth.n_rounds(),
        p: truth.congestion_probability.unwrap_or(f64::NAN),
        seed,
        similarity: s.similarity,
        f1: s.f1,
        nrmse: s.nrmse,
        objective: objective_from_distortion(s.distortion, s.similarity, s.nrmse, cfg.lambda1, cfg.lambda2),
        distortion: s.distortion,
    }
}

pub fn measure(fix: &Fixture, spec: &TrialSpec, cfg: &ExperimentConfig) -> Result<MeasurementSeries> {
    let mut sc = CongestionScenario::new(spec.p, vec![false; fix.routing.n_links()], cfg.idle, cfg.congested)?;
    sc.link_states.clear();
    Ok(generate_probe_series(&fix.routing, &sc, spec.n_probes, spec.seed)?)
}

/// Run the listed methods on one shared measurement series. Reports come
/// back in the order of `methods`.
pub fn run_trial(fix: &Fixture, spec: &TrialSpec, methods: &[Method], cfg: &ExperimentConfig) -> Result<Vec<EvaluationReport>> {
    let truth = measure(fix, spec, cfg)?;
    let needs_plan = methods.iter().any(|m| matches!(m, Method::Securent | Method::Uniform));
    let protected = if needs_plan { Some(protect(fix, &truth, cfg, spec.seed)?) } else { None };
    let mut out = Vec::with_capacity(methods.len());
    for &m in methods {
        let s = match m {
            Method::None => score(fix, &truth, &truth, cfg)?,
            Method::Securent => protected.as_ref().expect("plan built").scores,
            Method::Uniform => {
                let budget = protected.as_ref().expect("plan built").noise_total;
                let useed = seed::derive(spec.seed, &[seed::label("uniform")]);
                let scale = calibrate_uniform_scale(&truth, budget, useed, 1e-3)?;
                let (series, _) = uniform_series(&truth, scale, useed)?;
                score(fix, &truth, &series, cfg)?
            }
        };
        out.push(report(fix, m, &truth, spec.seed, s, cfg));
    }
    Ok(out)
}
