//! Privacy and utility scores.

use std::collections::HashSet;

use crate::attacker::InferredTopology;
use crate::error::{arg, Error, Result};
use crate::topology::{RoutingMatrix, Topology};

/// Plain graph view used by the edit-distance search.
#[derive(Debug, Clone)]
pub struct GraphView {
    pub nodes: Vec<String>,
    pub edges: Vec<(usize, usize)>,
    /// Nodes that keep their identity across graphs.
    pub anchors: Vec<usize>,
}

impl GraphView {
    pub fn empty() -> Self {
        GraphView {
            nodes: Vec::new(),
            edges: Vec::new(),
            anchors: Vec::new(),
        }
    }
}

impl From<&Topology> for GraphView {
    fn from(t: &Topology) -> Self {
        GraphView {
            nodes: t.nodes().to_vec(),
            edges: t.links().iter().map(|l| (l.a, l.b)).collect(),
            anchors: t.monitors().to_vec(),
        }
    }
}

impl From<&InferredTopology> for GraphView {
    fn from(t: &InferredTopology) -> Self {
        GraphView {
            nodes: t.nodes.clone(),
            edges: t.links.clone(),
            anchors: t.monitors.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EditCosts {
    pub g0: f64,
    pub g1: f64,
    pub g2: f64,
    /// False when the node-mapping search hit its budget and `g0` is only
    /// an upper bound.
    pub exact: bool,
}

/// Search-node budget of the branch and bound before it settles for the
/// best mapping found so far.
pub const GED_BUDGET: usize = 2_000_000;

pub fn graph_edit_costs(real: &Topology, inferred: &InferredTopology) -> EditCosts {
    edit_costs(&GraphView::from(real), &GraphView::from(inferred))
}

/// Unit-cost edit costs between two graphs.
///
/// Anchors present by name in both graphs map to themselves. Other nodes
/// are matched by branch and bound maximizing preserved edges; with unit
/// costs and unlabeled nodes the node cost of the best mapping is the
/// difference of the free node counts.
pub fn edit_costs(g: &GraphView, h: &GraphView) -> EditCosts {
    let g1 = (g.nodes.len() + g.edges.len()) as f64;
    let g2 = (h.nodes.len() + h.edges.len()) as f64;
    let mut fixed: Vec<Option<usize>> = vec![None; g.nodes.len()];
    let mut h_fixed = vec![false; h.nodes.len()];
    for &a in &g.anchors {
        if let Some(b) = h.nodes.iter().position(|n| *n == g.nodes[a]) {
            if h.anchors.contains(&b) {
                fixed[a] = Some(b);
                h_fixed[b] = true;
            }
        }
    }
    let free_g: Vec<usize> = (0..g.nodes.len()).filter(|&i| fixed[i].is_none()).collect();
    let free_h: Vec<usize> = (0..h.nodes.len()).filter(|&i| !h_fixed[i]).collect();
    let node_cost = free_g.len().abs_diff(free_h.len()) as f64;

    let h_edges: HashSet<(usize, usize)> = h.edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    let mut g_adj = vec![Vec::new(); g.nodes.len()];
    for &(a, b) in &g.edges {
        g_adj[a].push(b);
        g_adj[b].push(a);
    }
    let mut h_deg = vec![0usize; h.nodes.len()];
    for &(a, b) in &h.edges {
        h_deg[a] += 1;
        h_deg[b] += 1;
    }
    let base = g
        .edges
        .iter()
        .filter(|&&(a, b)| match (fixed[a], fixed[b]) {
            (Some(x), Some(y)) => h_edges.contains(&(x.min(y), x.max(y))),
            _ => false,
        })
        .count();

    let mut order = free_g.clone();
    order.sort_by(|&a, &b| g_adj[b].len().cmp(&g_adj[a].len()).then(a.cmp(&b)));
    let mut search = Search {
        g_adj: &g_adj,
        h_edges: &h_edges,
        order: &order,
        free_h: &free_h,
        map: fixed,
        used: vec![false; h.nodes.len()],
        best: 0,
        expansions: 0,
        exhausted: false,
        back: Vec::new(),
        cap: free_h.iter().map(|&w| h_deg[w]).max().unwrap_or(0),
    };
    // Edges from each ordered node back to anchors or earlier ordered nodes.
    let mut pos = vec![usize::MAX; g.nodes.len()];
    for (k, &u) in order.iter().enumerate() {
        pos[u] = k;
    }
    search.back = order
        .iter()
        .enumerate()
        .map(|(k, &u)| {
            g_adj[u]
                .iter()
                .filter(|&&x| search.map[x].is_some() || pos[x] < k)
                .count()
        })
        .collect();
    search.best = search.greedy();
    search.rec(0, 0);
    let preserved = base + search.best;
    let g0 = node_cost + (g.edges.len() + h.edges.len()) as f64 - 2.0 * preserved as f64;
    EditCosts {
        g0,
        g1,
        g2,
        exact: !search.exhausted,
    }
}

struct Search<'a> {
    g_adj: &'a [Vec<usize>],
    h_edges: &'a HashSet<(usize, usize)>,
    order: &'a [usize],
    free_h: &'a [usize],
    map: Vec<Option<usize>>,
    used: Vec<bool>,
    best: usize,
    expansions: usize,
    exhausted: bool,
    back: Vec<usize>,
    cap: usize,
}

impl Search<'_> {
    fn gain(&self, u: usize, w: usize) -> usize {
        self.g_adj[u]
            .iter()
            .filter_map(|&x| self.map[x])
            .filter(|&y| self.h_edges.contains(&(w.min(y), w.max(y))))
            .count()
    }

    fn bound(&self, k: usize) -> usize {
        self.back[k..].iter().map(|&b| b.min(self.cap)).sum()
    }

    /// Map nodes in order to their best-gain partner; returns the edges
    /// preserved and leaves the search state untouched.
    fn greedy(&mut self) -> usize {
        let mut total = 0;
        let mut assigned = Vec::new();
        for &u in self.order {
            let best = self
                .free_h
                .iter()
                .filter(|&&w| !self.used[w])
                .map(|&w| (self.gain(u, w), w))
                .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
            if let Some((g, w)) = best {
                total += g;
                self.map[u] = Some(w);
                self.used[w] = true;
                assigned.push((u, w));
            }
        }
        for (u, w) in assigned {
            self.map[u] = None;
            self.used[w] = false;
        }
        total
    }

    fn rec(&mut self, k: usize, score: usize) {
        if self.exhausted {
            return;
        }
        self.expansions += 1;
        if self.expansions > GED_BUDGET {
            self.exhausted = true;
            return;
        }
        if k == self.order.len() {
            self.best = self.best.max(score);
            return;
        }
        if score + self.bound(k) <= self.best {
            return;
        }
        let u = self.order[k];
        let mut cands: Vec<(usize, usize)> = self
            .free_h
            .iter()
            .filter(|&&w| !self.used[w])
            .map(|&w| (self.gain(u, w), w))
            .collect();
        cands.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        let spare = self.free_h.len() - self.used.iter().filter(|&&x| x).count();
        for (gain, w) in cands {
            self.map[u] = Some(w);
            self.used[w] = true;
            self.rec(k + 1, score + gain);
            self.map[u] = None;
            self.used[w] = false;
        }
        // Leaving u unmapped only helps when partners are scarce.
        if self.order.len() - k > spare {
            self.rec(k + 1, score);
        }
    }
}

/// `1 - G0 / (G1 + G2)`.
pub fn similarity(g0: f64, g1: f64, g2: f64) -> Result<f64> {
    if !(g1 + g2 > 0.0) {
        return arg("similarity of two empty graphs is undefined");
    }
    Ok((1.0 - g0 / (g1 + g2)).clamp(0.0, 1.0))
}

pub fn topology_similarity(real: &Topology, inferred: &InferredTopology) -> Result<f64> {
    let c = graph_edit_costs(real, inferred);
    similarity(c.g0, c.g1, c.g2)
}

/// Congestion threshold per path:
/// `hops * idle_mean + k * spread * sqrt(hops) + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdRule {
    pub idle_mean: f64,
    pub spread: f64,
    pub k: f64,
    /// Per-path additive offsets; empty means zero.
    pub offsets: Vec<f64>,
}

impl Default for ThresholdRule {
    fn default() -> Self {
        ThresholdRule {
            idle_mean: 1.0,
            spread: 0.2,
            k: 3.0,
            offsets: Vec::new(),
        }
    }
}

pub fn classify_congested_paths(y: &[f64], routing: &RoutingMatrix, rule: &ThresholdRule) -> Vec<bool> {
    routing
        .hop_counts()
        .iter()
        .zip(y)
        .enumerate()
        .map(|(i, (&h, &v))| {
            let h = h as f64;
            let off = rule.offsets.get(i).copied().unwrap_or(0.0);
            v > h * rule.idle_mean + rule.k * rule.spread * h.sqrt() + off
        })
        .collect()
}

/// Per-path offsets from the observed series alone: how far the median
/// round sits above the idle baseline, floored at zero. Shifts from
/// additive noise land here; the user needs no knowledge of the noise.
pub fn calibrate_offsets(rounds: &[Vec<f64>], routing: &RoutingMatrix, idle_mean: f64) -> Vec<f64> {
    let hops = routing.hop_counts();
    (0..routing.n_paths())
        .map(|i| {
            let mut col: Vec<f64> = rounds.iter().map(|r| r[i]).collect();
            if col.is_empty() {
                return 0.0;
            }
            col.sort_by(f64::total_cmp);
            let m = col.len();
            let med = if m % 2 == 1 { col[m / 2] } else { 0.5 * (col[m / 2 - 1] + col[m / 2]) };
            (med - hops[i] as f64 * idle_mean).max(0.0)
        })
        .collect()
}

/// CLINK output together with congested paths no candidate link explains.
#[derive(Debug, Clone, PartialEq)]
pub struct ClinkOutcome {
    pub links: Vec<bool>,
    pub unexplained: Vec<usize>,
}

/// Largest candidate set solved exactly.
pub const CLINK_EXACT_LIMIT: usize = 20;

pub fn clink_detect(path_states: &[bool], routing: &RoutingMatrix, link_priors: &[f64]) -> Result<Vec<bool>> {
    let out = clink_detect_partial(path_states, routing, link_priors)?;
    if let Some(&i) = out.unexplained.first() {
        return Err(Error::Infeasible(format!(
            "congested path {i} has every link on an uncongested path"
        )));
    }
    Ok(out.links)
}

/// CLINK that sets aside congested paths it cannot explain instead of
/// failing.
pub fn clink_detect_partial(path_states: &[bool], routing: &RoutingMatrix, link_priors: &[f64]) -> Result<ClinkOutcome> {
    let (np, nl) = (routing.n_paths(), routing.n_links());
    if path_states.len() != np || link_priors.len() != nl {
        return arg("path states or priors do not match the routing matrix");
    }
    if let Some(p) = link_priors.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
        return arg(format!("prior {p} outside (0, 1)"));
    }
    let mut good = vec![false; nl];
    for i in (0..np).filter(|&i| !path_states[i]) {
        for j in routing.path_links(i) {
            good[j] = true;
        }
    }
    let mut unexplained = Vec::new();
    let mut targets: Vec<Vec<usize>> = Vec::new();
    for i in (0..np).filter(|&i| path_states[i]) {
        let c: Vec<usize> = routing.path_links(i).into_iter().filter(|&j| !good[j]).collect();
        if c.is_empty() {
            unexplained.push(i);
        } else {
            targets.push(c);
        }
    }
    let mut cand: Vec<usize> = targets.iter().flatten().copied().collect();
    cand.sort_unstable();
    cand.dedup();
    let weight: Vec<f64> = link_priors.iter().map(|p| -p.ln()).collect();

    let mut links = greedy_cover(&targets, &cand, &weight, nl);
    if cand.len() <= CLINK_EXACT_LIMIT {
        let mut best_w: f64 = (0..nl).filter(|&j| links[j]).map(|j| weight[j]).sum();
        let mut chosen = vec![false; nl];
        exact_cover(&targets, &weight, &mut chosen, 0.0, &mut best_w, &mut links);
    }
    Ok(ClinkOutcome { links, unexplained })
}

fn greedy_cover(targets: &[Vec<usize>], cand: &[usize], weight: &[f64], nl: usize) -> Vec<bool> {
    let mut out = vec![false; nl];
    let mut covered = vec![false; targets.len()];
    loop {
        let mut best: Option<(f64, usize)> = None;
        for &j in cand {
            if out[j] {
                continue;
            }
            let cov = targets
                .iter()
                .zip(&covered)
                .filter(|(t, &c)| !c && t.contains(&j))
                .count();
            if cov == 0 {
                continue;
            }
            let score = weight[j] / cov as f64;
            if best.is_none_or(|(s, _)| score < s - 1e-12) {
                best = Some((score, j));
            }
        }
        let Some((_, j)) = best else { break };
        out[j] = true;
        for (t, c) in targets.iter().zip(covered.iter_mut()) {
            if t.contains(&j) {
                *c = true;
            }
        }
    }
    out
}

/// Branch on the links of the first uncovered path.
fn exact_cover(targets: &[Vec<usize>], weight: &[f64], chosen: &mut Vec<bool>, w: f64, best_w: &mut f64, best: &mut Vec<bool>) {
    let Some(t) = targets.iter().find(|t| !t.iter().any(|&j| chosen[j])) else {
        if w < *best_w - 1e-12 {
            *best_w = w;
            best.clone_from(chosen);
        }
        return;
    };
    let cheapest = t.iter().map(|&j| weight[j]).fold(f64::INFINITY, f64::min);
    if w + cheapest >= *best_w - 1e-12 {
        return;
    }
    for &j in t {
        chosen[j] = true;
        exact_cover(targets, weight, chosen, w + weight[j], best_w, best);
        chosen[j] = false;
    }
}

/// F1 of the congested class; 1.0 when neither vector has a positive.
pub fn f1_score(true_states: &[bool], predicted: &[bool]) -> Result<f64> {
    if true_states.len() != predicted.len() {
        return arg("state vectors differ in length");
    }
    let (mut tp, mut fp, mut fnn) = (0usize, 0usize, 0usize);
    for (&t, &p) in true_states.iter().zip(predicted) {
        match (t, p) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fnn += 1,
            _ => {}
        }
    }
    if tp + fp + fnn == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * tp as f64 / (2 * tp + fp + fnn) as f64)
}

pub const NNLS_TOLERANCE: f64 = 1e-8;
pub const NNLS_MAX_SWEEPS: usize = 10_000;

/// Nonnegative least squares fit of `R x ≈ y` by projected coordinate
/// descent. Links no path crosses are unidentifiable and come back `None`.
pub fn trusted_link_inference(y: &[f64], routing: &RoutingMatrix) -> Result<Vec<Option<f64>>> {
    let (np, nl) = (routing.n_paths(), routing.n_links());
    if y.len() != np {
        return arg(format!("{} measurements for {np} paths", y.len()));
    }
    let cols: Vec<Vec<usize>> = (0..nl).map(|j| (0..np).filter(|&i| routing.get(i, j)).collect()).collect();
    if cols.iter().all(Vec::is_empty) {
        return arg("routing matrix has no nonzero entry");
    }
    let mut x = vec![0.0; nl];
    let mut resid: Vec<f64> = y.iter().map(|v| -v).collect();
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for _ in 0..NNLS_MAX_SWEEPS {
        let mut delta = 0.0f64;
        for (j, col) in cols.iter().enumerate() {
            if col.is_empty() {
                continue;
            }
            let g: f64 = col.iter().map(|&i| resid[i]).sum();
            let nx = (x[j] - g / col.len() as f64).max(0.0);
            let d = nx - x[j];
            if d != 0.0 {
                for &i in col {
                    resid[i] += d;
                }
                x[j] = nx;
                delta = delta.max(d.abs());
            }
        }
        if delta <= NNLS_TOLERANCE * 1e-3 * scale {
            break;
        }
    }
    Ok(x
        .into_iter()
        .zip(&cols)
        .map(|(v, c)| if c.is_empty() { None } else { Some(v) })
        .collect())
}

/// `sqrt(Σ (y - ŷ)² / Σ y²)`.
pub fn nrmse(y_true: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y_true.len() != y_hat.len() {
        return arg("vectors differ in length");
    }
    let den: f64 = y_true.iter().map(|v| v * v).sum();
    if !(den > 0.0) {
        return arg("reference vector is all zero");
    }
    let num: f64 = y_true.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((num / den).sqrt())
}

/// `1 - nrmse`, clamped to `[0, 1]`.
pub fn inference_similarity(nrmse: f64) -> f64 {
    (1.0 - nrmse).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub topology: String,
    pub method: String,
    pub n_probes: usize,
    pub p: f64,
    pub seed: u64,
    pub similarity: f64,
    pub f1: f64,
    pub nrmse: f64,
    pub objective: f64,
    /// Norm of the mean per-round noise, the fidelity term of the objective.
    pub distortion: f64,
}

impl EvaluationReport {
    pub const CSV_HEADER: &'static str = "topology,method,n_probes,p,seed,similarity,f1,nrmse,objective";

    pub fn csv_row(&self) -> String {
        use crate::measurement::format_sig;
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.topology,
            self.method,
            self.n_probes,
            self.p,
            self.seed,
            format_sig(self.similarity, 9),
            format_sig(self.f1, 9),
            format_sig(self.nrmse, 9),
            format_sig(self.objective, 9)
        )
    }
}
