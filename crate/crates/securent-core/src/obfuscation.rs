//! Fake-topology noise construction and injection.
//!
//! A fake graph is derived from the real one by degree-preserving rewiring.
//! Its link lengths give fake link delays `x'_j = c / (l'_j + 1)`, the fake
//! routing turns them into a raw per-path noise vector, and the protection
//! computing module reshapes that vector until its total equals the real
//! hop-count total. The reshaped vector, scaled by `alpha`, is added to the
//! real measurements.
//!
//! A noise vector that never changes between rounds shifts path means but
//! leaves path covariances untouched, so it is invisible to a covariance
//! attacker. [`ObfuscationPlan::round_noise`] therefore lets fake links
//! congest independently per round (probability `fake_congestion`, delay
//! multiplied by `congestion_ratio`) and reruns the module on every round.
//! With `fake_congestion = 0` every round receives the same vector.

use std::fmt::Write as _;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::error::{arg, Error, Result};
use crate::measurement::{format_sig, MeasurementSeries};
use crate::seed;
use crate::topology::{compute_paths_for_pairs, Link, PathSet, RoutingMatrix, Topology};

#[derive(Debug, Clone)]
pub struct FakeTopology {
    /// Rewired graph; link weights are the fake lengths.
    pub graph: Topology,
    pub paths: PathSet,
    pub routing: RoutingMatrix,
    pub lengths: Vec<f64>,
}

/// Rewire `ceil(rewire_fraction * |L|)` pairs of links of `real` with
/// degree-preserving double-edge swaps, draw fake lengths uniformly from the
/// real weight range and route the same monitor pairs over the result.
pub fn generate_fake_topology(
    real: &Topology,
    paths: &PathSet,
    seed: u64,
    rewire_fraction: f64,
) -> Result<FakeTopology> {
    if !(rewire_fraction > 0.0 && rewire_fraction <= 1.0) {
        return arg(format!("rewire_fraction {rewire_fraction} outside (0, 1]"));
    }
    let n_links = real.links().len();
    let needed = (rewire_fraction * n_links as f64).ceil() as usize;
    let mut rng = seed::rng(seed);
    let mut edges: Vec<(usize, usize)> = real.links().iter().map(|l| (l.a, l.b)).collect();
    let max_attempts = 200 * needed + 200;
    let mut done = 0;
    let mut attempts = 0;
    let idx: Vec<usize> = (0..n_links).collect();
    while done < needed {
        attempts += 1;
        if attempts > max_attempts || n_links < 2 {
            return Err(Error::Generation(format!(
                "only {done} of {needed} swaps kept the graph simple and connected"
            )));
        }
        let pick: Vec<usize> = idx.choose_multiple(&mut rng, 2).copied().collect();
        let (i, k) = (pick[0], pick[1]);
        let (a, b) = edges[i];
        let (mut c, mut d) = edges[k];
        if rng.random::<bool>() {
            std::mem::swap(&mut c, &mut d);
        }
        if a == c || a == d || b == c || b == d {
            continue;
        }
        let has = |x: usize, y: usize, es: &[(usize, usize)]| {
            es.iter().any(|&(p, q)| (p == x && q == y) || (p == y && q == x))
        };
        if has(a, d, &edges) || has(c, b, &edges) {
            continue;
        }
        let mut trial = edges.clone();
        trial[i] = (a, d);
        trial[k] = (c, b);
        if connected(real.nodes().len(), &trial) {
            edges = trial;
            done += 1;
        }
    }
    let same = {
        let norm = |es: &[(usize, usize)]| {
            let mut v: Vec<(usize, usize)> = es.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
            v.sort_unstable();
            v
        };
        let real_edges: Vec<(usize, usize)> = real.links().iter().map(|l| (l.a, l.b)).collect();
        norm(&edges) == norm(&real_edges)
    };
    if same {
        return Err(Error::Generation("swaps restored the real graph".into()));
    }

    let (lo, hi) = real.weight_range();
    let lengths: Vec<f64> = (0..n_links)
        .map(|_| if hi > lo { rng.random_range(lo..=hi) } else { lo })
        .collect();
    let links = edges
        .iter()
        .zip(&lengths)
        .map(|(&(a, b), &weight)| Link { a, b, weight })
        .collect();
    let graph = Topology::new(real.nodes().to_vec(), links)?;
    let fake_paths = compute_paths_for_pairs(&graph, &paths.endpoint_ids(real))?;
    let routing = crate::topology::build_routing_matrix(&fake_paths, n_links)?;
    Ok(FakeTopology {
        graph,
        paths: fake_paths,
        routing,
        lengths,
    })
}

fn connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                stack.push(v);
            }
        }
    }
    count == n
}

/// `x'_j = c / (l'_j + 1)`: longer fake links get smaller delays.
pub fn fake_link_delays(fake_lengths: &[f64], c: f64) -> Result<Vec<f64>> {
    if !(c > 0.0 && c.is_finite()) {
        return arg(format!("scaling constant {c} must be positive"));
    }
    if let Some(l) = fake_lengths.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return arg(format!("fake length {l} must be positive"));
    }
    Ok(fake_lengths.iter().map(|l| c / (l + 1.0)).collect())
}

/// Scaling constant that makes the mean fake delay equal `target_mean`.
pub fn scaling_for_mean(fake_lengths: &[f64], target_mean: f64) -> Result<f64> {
    if fake_lengths.is_empty() {
        return arg("no fake lengths");
    }
    let unit = fake_link_delays(fake_lengths, 1.0)?;
    Ok(target_mean * unit.len() as f64 / unit.iter().sum::<f64>())
}

/// `R' · x'`.
pub fn raw_noise(fake: &FakeTopology, x_prime: &[f64]) -> Result<Vec<f64>> {
    fake.routing.mul_vec(x_prime)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModuleParams {
    pub eta: f64,
    pub t_max: usize,
    pub gamma: f64,
}

impl Default for ModuleParams {
    fn default() -> Self {
        ModuleParams {
            eta: 0.1,
            t_max: 1000,
            gamma: 0.9,
        }
    }
}

/// Result of one run of the protection computing module.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuleRun {
    pub output: Vec<f64>,
    pub iterations: usize,
    /// Squared L2 distance to the target after rescaling and after every
    /// iteration; `losses[0]` is the initial loss.
    pub losses: Vec<f64>,
    /// True when the loop stopped on the loss criterion rather than `t_max`.
    pub converged: bool,
}

impl ModuleRun {
    pub fn initial_loss(&self) -> f64 {
        self.losses[0]
    }

    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("initial loss is always recorded")
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Sum-preserving projected gradient descent from `initial` toward `target`.
///
/// `initial` is first rescaled to the target total. Each iteration takes the
/// step `Y - eta * 2 (Y - B)`, clamps negatives to zero and rescales back to
/// the target total. The loop stops once the squared loss is at most
/// `gamma` times the initial loss, or after `t_max` iterations.
pub fn protection_computing_module(initial: &[f64], target: &[f64], params: &ModuleParams) -> Result<ModuleRun> {
    if initial.len() != target.len() || initial.is_empty() {
        return arg(format!(
            "vectors must be non-empty and equally long ({} vs {})",
            initial.len(),
            target.len()
        ));
    }
    if initial.iter().chain(target).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite input".into()));
    }
    if !(params.eta > 0.0) || !(params.gamma > 0.0 && params.gamma < 1.0) {
        return arg(format!("bad module parameters {params:?}"));
    }
    let sa: f64 = initial.iter().sum();
    let sb: f64 = target.iter().sum();
    if !(sa > 0.0) || !(sb > 0.0) {
        return arg("initial and target sums must be positive");
    }
    let mut y: Vec<f64> = initial.iter().map(|v| v * sb / sa).collect();
    let mut losses = vec![sq_dist(&y, target)];
    let threshold = params.gamma * losses[0];
    let mut iterations = 0;
    let mut converged = losses[0] <= threshold;
    while !converged && iterations < params.t_max {
        for (v, b) in y.iter_mut().zip(target) {
            *v = (*v - params.eta * 2.0 * (*v - b)).max(0.0);
        }
        let s: f64 = y.iter().sum();
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Numeric(format!("projection total {s} after iteration {}", iterations + 1)));
        }
        for v in &mut y {
            *v *= sb / s;
        }
        iterations += 1;
        let l = sq_dist(&y, target);
        losses.push(l);
        converged = l <= threshold;
    }
    Ok(ModuleRun {
        output: y,
        iterations,
        losses,
        converged,
    })
}

/// Reshape the raw fake noise toward the real hop-count vector `R · 1`.
pub fn adjusted_noise(
    real_routing: &RoutingMatrix,
    fake: &FakeTopology,
    x_prime: &[f64],
    params: &ModuleParams,
) -> Result<Vec<f64>> {
    if real_routing.n_paths() != fake.routing.n_paths() {
        return arg("real and fake routing disagree on the path count");
    }
    let raw = raw_noise(fake, x_prime)?;
    Ok(protection_computing_module(&raw, &hop_target(real_routing), params)?.output)
}

fn hop_target(r: &RoutingMatrix) -> Vec<f64> {
    r.hop_counts().into_iter().map(|h| h as f64).collect()
}

/// `Y + alpha * delta`.
pub fn apply_protection(y: &[f64], delta: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if y.len() != delta.len() {
        return arg(format!("{} measurements, {} noise entries", y.len(), delta.len()));
    }
    if !(alpha > 0.0) {
        return arg(format!("alpha {alpha} must be positive"));
    }
    Ok(y.iter().zip(delta).map(|(v, d)| v + alpha * d).collect())
}

/// Protection objective; lower is better.
///
/// `‖Ỹ − Y‖₂ − λ1 (1 − similarity) + λ2 nrmse`.
pub fn objective_score(y: &[f64], y_tilde: &[f64], similarity_protected: f64, nrmse_trusted: f64, lambda1: f64, lambda2: f64) -> f64 {
    objective_from_distortion(sq_dist(y, y_tilde).sqrt(), similarity_protected, nrmse_trusted, lambda1, lambda2)
}

pub fn objective_from_distortion(distortion: f64, similarity: f64, nrmse: f64, lambda1: f64, lambda2: f64) -> f64 {
    distortion - lambda1 * (1.0 - similarity) + lambda2 * nrmse
}

/// Index of the lowest objective; the first index wins ties.
pub fn select_best(candidates: &[(ObfuscationPlan, crate::evaluation::EvaluationReport)], lambda1: f64, lambda2: f64) -> Result<usize> {
    if candidates.is_empty() {
        return arg("no candidates");
    }
    let mut best = 0;
    let mut best_score = f64::INFINITY;
    for (i, (_, rep)) in candidates.iter().enumerate() {
        let s = objective_from_distortion(rep.distortion, rep.similarity, rep.nrmse, lambda1, lambda2);
        if s < best_score {
            best = i;
            best_score = s;
        }
    }
    Ok(best)
}

/// Everything needed to regenerate a protected series.
#[derive(Debug, Clone)]
pub struct PlanConfig {
    pub alpha: f64,
    /// Scaling constant for fake delays `c / (l + 1)`; `None` matches the mean fake delay to
    /// `target_mean_delay`.
    pub c: Option<f64>,
    pub target_mean_delay: f64,
    pub module: ModuleParams,
    pub rewire_fraction: f64,
    pub fake_seed: u64,
    pub fake_congestion: f64,
    pub congestion_ratio: f64,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            alpha: 4.0,
            c: None,
            target_mean_delay: 1.0,
            module: ModuleParams::default(),
            rewire_fraction: 0.5,
            fake_seed: 0,
            fake_congestion: 0.012,
            congestion_ratio: 150.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ObfuscationPlan {
    pub fake: FakeTopology,
    pub c: f64,
    pub alpha: f64,
    pub fake_link_delays: Vec<f64>,
    pub raw_noise: Vec<f64>,
    pub adjusted_noise: Vec<f64>,
    pub module: ModuleParams,
    pub rewire_fraction: f64,
    pub fake_seed: u64,
    pub fake_congestion: f64,
    pub congestion_ratio: f64,
    /// Real hop counts, the module's target.
    pub target: Vec<f64>,
}

pub fn build_plan(real: &Topology, paths: &PathSet, routing: &RoutingMatrix, cfg: &PlanConfig) -> Result<ObfuscationPlan> {
    if !(cfg.alpha > 0.0) {
        return arg("alpha must be positive");
    }
    if !(0.0..=1.0).contains(&cfg.fake_congestion) || !(cfg.congestion_ratio >= 1.0) {
        return arg("fake congestion must lie in [0, 1] with ratio >= 1");
    }
    let fake = generate_fake_topology(real, paths, cfg.fake_seed, cfg.rewire_fraction)?;
    let c = match cfg.c {
        Some(c) => c,
        None => scaling_for_mean(&fake.lengths, cfg.target_mean_delay)?,
    };
    let x = fake_link_delays(&fake.lengths, c)?;
    let raw = raw_noise(&fake, &x)?;
    let adj = adjusted_noise(routing, &fake, &x, &cfg.module)?;
    Ok(ObfuscationPlan {
        fake,
        c,
        alpha: cfg.alpha,
        fake_link_delays: x,
        raw_noise: raw,
        adjusted_noise: adj,
        module: cfg.module,
        rewire_fraction: cfg.rewire_fraction,
        fake_seed: cfg.fake_seed,
        fake_congestion: cfg.fake_congestion,
        congestion_ratio: cfg.congestion_ratio,
        target: hop_target(routing),
    })
}

impl ObfuscationPlan {
    /// Adjusted noise for probe round `r` (before scaling by alpha).
    pub fn round_noise(&self, noise_seed: u64, r: usize) -> Result<Vec<f64>> {
        if self.fake_congestion == 0.0 {
            return Ok(self.adjusted_noise.clone());
        }
        let mut rng = seed::rng(seed::derive(noise_seed, &[r as u64]));
        let x: Vec<f64> = self
            .fake_link_delays
            .iter()
            .map(|&v| {
                if rng.random::<f64>() < self.fake_congestion {
                    v * self.congestion_ratio
                } else {
                    v
                }
            })
            .collect();
        let raw = raw_noise(&self.fake, &x)?;
        Ok(protection_computing_module(&raw, &self.target, &self.module)?.output)
    }

    /// Protect every round of `series`. Returns the protected series and the
    /// total noise added.
    pub fn protect_series(&self, series: &MeasurementSeries, noise_seed: u64) -> Result<(MeasurementSeries, f64)> {
        let mut total = 0.0;
        let mut rounds = Vec::with_capacity(series.n_rounds());
        for (r, y) in series.rounds.iter().enumerate() {
            let d = self.round_noise(noise_seed, r)?;
            let p = apply_protection(y, &d, self.alpha)?;
            total += self.alpha * d.iter().sum::<f64>();
            rounds.push(p);
        }
        Ok((series.with_rounds(rounds)?, total))
    }

    /// Key-value header followed by CSV blocks for the fake graph, fake
    /// routing and adjusted noise. Floats use the shortest exact
    /// representation so a parsed plan replays bit for bit.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let kv = [
            ("alpha", self.alpha.to_string()),
            ("c", self.c.to_string()),
            ("gamma", self.module.gamma.to_string()),
            ("eta", self.module.eta.to_string()),
            ("t_max", self.module.t_max.to_string()),
            ("rewire_fraction", self.rewire_fraction.to_string()),
            ("fake_seed", self.fake_seed.to_string()),
            ("fake_congestion", self.fake_congestion.to_string()),
            ("congestion_ratio", self.congestion_ratio.to_string()),
        ];
        for (k, v) in kv {
            let _ = writeln!(s, "{k}={v}");
        }
        s.push_str("\n[fake_links]\nsource,target,length\n");
        let g = &self.fake.graph;
        for l in g.links() {
            let _ = writeln!(s, "{},{},{}", g.nodes()[l.a], g.nodes()[l.b], l.weight);
        }
        s.push_str("\n[fake_routing]\n");
        for i in 0..self.fake.routing.n_paths() {
            let row: Vec<String> = self.fake.routing.row(i).iter().map(u8::to_string).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s.push_str("\n[adjusted_noise]\npath,value\n");
        for (i, v) in self.adjusted_noise.iter().enumerate() {
            let _ = writeln!(s, "{i},{v}");
        }
        s
    }

    /// Human-oriented summary line with 9 significant digits.
    pub fn describe(&self) -> String {
        format!(
            "alpha={} c={} fake_links={} noise_total={}",
            self.alpha,
            format_sig(self.c, 9),
            self.fake.lengths.len(),
            format_sig(self.adjusted_noise.iter().sum::<f64>() * self.alpha, 9)
        )
    }
}

/// Header fields of a serialized plan.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanHeader {
    pub alpha: f64,
    pub c: f64,
    pub module: ModuleParams,
    pub rewire_fraction: f64,
    pub fake_seed: u64,
    pub fake_congestion: f64,
    pub congestion_ratio: f64,
    pub adjusted_noise: Vec<f64>,
    pub fake_routing: Vec<Vec<u8>>,
}

pub fn parse_plan(text: &str) -> Result<PlanHeader> {
    let mut kv = std::collections::HashMap::new();
    let mut block = "";
    let mut noise = Vec::new();
    let mut routing = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        if line.starts_with('[') {
            block = match line {
                "[fake_links]" => "links",
                "[fake_routing]" => "routing",
                "[adjusted_noise]" => "noise",
                _ => return Err(Error::Parse(format!("unknown block {line}"))),
            };
            continue;
        }
        match block {
            "" => {
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| Error::Parse(format!("expected key=value, got {line:?}")))?;
                kv.insert(k.trim().to_owned(), v.trim().to_owned());
            }
            "routing" => routing.push(
                line.split(',')
                    .map(|t| t.parse::<u8>().map_err(|_| Error::Parse(format!("bad routing entry {t:?}"))))
                    .collect::<Result<Vec<_>>>()?,
            ),
            "noise" if line != "path,value" => {
                let v = line.split(',').nth(1).unwrap_or("");
                noise.push(v.parse::<f64>().map_err(|_| Error::Parse(format!("bad noise value {v:?}")))?);
            }
            _ => {}
        }
    }
    let get = |k: &str| -> Result<&String> { kv.get(k).ok_or_else(|| Error::Parse(format!("missing key {k}"))) };
    let f = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| Error::Parse(format!("bad value for {k}"))) };
    let u = |k: &str| -> Result<u64> { get(k)?.parse().map_err(|_| Error::Parse(format!("bad value for {k}"))) };
    Ok(PlanHeader {
        alpha: f("alpha")?,
        c: f("c")?,
        module: ModuleParams {
            eta: f("eta")?,
            t_max: u("t_max")? as usize,
            gamma: f("gamma")?,
        },
        rewire_fraction: f("rewire_fraction")?,
        fake_seed: u("fake_seed")?,
        fake_congestion: f("fake_congestion")?,
        congestion_ratio: f("congestion_ratio")?,
        adjusted_noise: noise,
        fake_routing: routing,
    })
}

/// Add independent `U[0, scale]` noise to each entry of `y`. Returns the
/// protected row and the total noise added.
pub fn baseline_uniform_noise(y: &[f64], scale: f64, seed: u64) -> Result<(Vec<f64>, f64)> {
    if !(scale >= 0.0 && scale.is_finite()) {
        return arg(format!("scale {scale} must be non-negative"));
    }
    let mut rng = seed::rng(seed);
    let mut total = 0.0;
    let out = y
        .iter()
        .map(|v| {
            let n = scale * rng.random::<f64>();
            total += n;
            v + n
        })
        .collect();
    Ok((out, total))
}

/// Uniform baseline over a whole series, one derived seed per round.
pub fn uniform_series(series: &MeasurementSeries, scale: f64, seed: u64) -> Result<(MeasurementSeries, f64)> {
    let mut total = 0.0;
    let mut rounds = Vec::with_capacity(series.n_rounds());
    for (r, y) in series.rounds.iter().enumerate() {
        let (p, t) = baseline_uniform_noise(y, scale, seed::derive(seed, &[r as u64]))?;
        total += t;
        rounds.push(p);
    }
    Ok((series.with_rounds(rounds)?, total))
}

/// Bisect the uniform scale until the realized total noise over `series`
/// lies within `rel_tol` of `budget`.
pub fn calibrate_uniform_scale(series: &MeasurementSeries, budget: f64, seed: u64, rel_tol: f64) -> Result<f64> {
    if !(budget > 0.0) {
        return arg("noise budget must be positive");
    }
    let total = |s: f64| -> Result<f64> {
        let mut t = 0.0;
        for r in 0..series.n_rounds() {
            let row = vec![1.0; series.n_paths()];
            t += baseline_uniform_noise(&row, s, seed::derive(seed, &[r as u64]))?.1;
        }
        Ok(t)
    };
    let cells = (series.n_rounds() * series.n_paths()).max(1) as f64;
    let (mut lo, mut hi) = (0.0, 2.0 * budget / cells);
    while total(hi)? < budget {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let t = total(mid)?;
        if (t - budget).abs() <= rel_tol * budget {
            return Ok(mid);
        }
        if t < budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Numeric("uniform scale bisection did not converge".into()))
}
