//! Topology inference from end-to-end delay series.
//!
//! The attacker knows only the series and which monitor pair each column
//! belongs to. For every monitor with at least two paths it builds a logical
//! tree by agglomerative clustering of the path covariance matrix: two
//! groups of paths merge when their mean cross-covariance is the largest,
//! and that covariance is the variance shared from the monitor down to the
//! branching node. Internal nodes that add less than `penalty` times the
//! largest covariance over their parent are pruned.
//!
//! The trees are then stitched together. A branching node found from
//! monitor `a` at shared variance `g` on path `a-b` sits at variance
//! `V - g'` from `b` when `b`'s tree has a node there, so nodes from the two
//! ends of a path merge when their positions agree within `tolerance`. A
//! node never merges with another node of the same tree. Each path is then
//! laid out as its endpoint, the merged nodes in order of position, and the
//! other endpoint.
//!
//! Per-path measurement noise inflates every path variance without touching
//! the covariances. Its level is estimated as the median excess of path
//! variance over the best-matching pair of tree positions and removed first.

use std::collections::BTreeMap;

use crate::error::{arg, Result};
use crate::measurement::MeasurementSeries;
use crate::topology::{write_graphml, RoutingMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct PathStatistics {
    pub means: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
}

pub fn estimate_path_statistics(series: &MeasurementSeries) -> Result<PathStatistics> {
    let n = series.n_rounds();
    if n < 2 {
        return arg(format!("need at least 2 rounds, got {n}"));
    }
    let p = series.n_paths();
    let mut means = vec![0.0; p];
    for row in &series.rounds {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    let mut cov = vec![vec![0.0; p]; p];
    for row in &series.rounds {
        let d: Vec<f64> = row.iter().zip(&means).map(|(v, m)| v - m).collect();
        for i in 0..p {
            for j in i..p {
                cov[i][j] += d[i] * d[j];
            }
        }
    }
    for i in 0..p {
        for j in i..p {
            cov[i][j] /= (n - 1) as f64;
            cov[j][i] = cov[i][j];
        }
    }
    Ok(PathStatistics {
        means,
        covariance: cov,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackerParams {
    /// Minimum gain of an internal node, relative to the largest
    /// off-diagonal covariance of its tree.
    pub penalty: f64,
    /// Relative position tolerance for merging nodes across trees.
    pub tolerance: f64,
}

impl Default for AttackerParams {
    fn default() -> Self {
        AttackerParams {
            penalty: 0.1,
            tolerance: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferredTopology {
    /// Monitors first, in first-appearance order, then internal nodes.
    pub nodes: Vec<String>,
    pub links: Vec<(usize, usize)>,
    pub monitors: Vec<usize>,
    /// Node walk of each measured path.
    pub walks: Vec<Vec<usize>>,
    pub routing: RoutingMatrix,
    /// Set when the statistics carried no usable structure and the star
    /// fallback was returned.
    pub low_confidence: bool,
}

impl InferredTopology {
    pub fn internal_count(&self) -> usize {
        self.nodes.len() - self.monitors.len()
    }

    pub fn degree(&self, n: usize) -> usize {
        self.links.iter().filter(|&&(a, b)| a == n || b == n).count()
    }

    pub fn to_graphml(&self) -> String {
        let links: Vec<(usize, usize, f64)> = self.links.iter().map(|&(a, b)| (a, b, 1.0)).collect();
        write_graphml(&self.nodes, &links)
    }
}

pub fn infer_topology(series: &MeasurementSeries, monitor_pairs: &[(String, String)], penalty: f64) -> Result<InferredTopology> {
    infer_topology_with(
        series,
        monitor_pairs,
        &AttackerParams {
            penalty,
            ..AttackerParams::default()
        },
    )
}

pub fn infer_topology_with(series: &MeasurementSeries, monitor_pairs: &[(String, String)], params: &AttackerParams) -> Result<InferredTopology> {
    if series.n_paths() != monitor_pairs.len() {
        return arg(format!(
            "{} series columns for {} monitor pairs",
            series.n_paths(),
            monitor_pairs.len()
        ));
    }
    let stats = estimate_path_statistics(series)?;
    infer_from_covariance(&stats.covariance, monitor_pairs, params)
}

/// One retained internal node of a per-monitor logical tree.
#[derive(Debug, Clone, PartialEq)]
struct TreeNode {
    /// Local path indices below the node.
    members: Vec<usize>,
    /// Variance shared from the tree's monitor down to the node.
    gamma: f64,
}

struct Cluster {
    members: Vec<usize>,
    gamma: f64,
    children: Vec<usize>,
}

fn logical_tree(cov: &[Vec<f64>], penalty: f64) -> Vec<TreeNode> {
    let n = cov.len();
    let mut cl: Vec<Cluster> = (0..n)
        .map(|i| Cluster {
            members: vec![i],
            gamma: cov[i][i],
            children: Vec::new(),
        })
        .collect();
    let mut active: Vec<usize> = (0..n).collect();
    while active.len() > 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for x in 0..active.len() {
            for y in x + 1..active.len() {
                let (a, b) = (active[x], active[y]);
                let mut s = 0.0;
                for &i in &cl[a].members {
                    for &j in &cl[b].members {
                        s += cov[i][j];
                    }
                }
                let v = s / (cl[a].members.len() * cl[b].members.len()) as f64;
                if best.is_none_or(|(bv, _, _)| v > bv) {
                    best = Some((v, x, y));
                }
            }
        }
        let (v, x, y) = best.expect("at least two active clusters");
        let (a, b) = (active[x], active[y]);
        let mut members = cl[a].members.clone();
        members.extend(&cl[b].members);
        cl.push(Cluster {
            members,
            gamma: v,
            children: vec![a, b],
        });
        active.remove(y);
        active.remove(x);
        active.push(cl.len() - 1);
    }
    let top = active[0];
    let mut scale = 0.0f64;
    for (i, row) in cov.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if i != j {
                scale = scale.max(v);
            }
        }
    }
    let cut = penalty * scale.max(1e-12);

    let mut kept = Vec::new();
    // (cluster, gamma of the nearest retained ancestor)
    let mut stack = vec![(top, 0.0)];
    while let Some((u, parent_gamma)) = stack.pop() {
        let keep = cl[u].gamma - parent_gamma >= cut;
        let g = if keep { cl[u].gamma } else { parent_gamma };
        if keep {
            kept.push(u);
        }
        for &c in cl[u].children.iter().rev() {
            if c >= n {
                stack.push((c, g));
            }
        }
    }
    kept.sort_unstable();
    kept.into_iter()
        .map(|u| {
            let mut members = cl[u].members.clone();
            members.sort_unstable();
            TreeNode {
                members,
                gamma: cl[u].gamma.max(0.0),
            }
        })
        .collect()
}

struct Handle {
    tree: usize,
}

/// Per path: positions found from the first and from the second endpoint.
type Sides = Vec<[Vec<(f64, usize)>; 2]>;

fn build_trees(cov: &[Vec<f64>], pairs: &[(String, String)], monitors: &[String], penalty: f64) -> (Sides, Vec<Handle>) {
    let mut sides: Sides = vec![[Vec::new(), Vec::new()]; pairs.len()];
    let mut handles = Vec::new();
    for (t, m) in monitors.iter().enumerate() {
        let idx: Vec<usize> = (0..pairs.len()).filter(|&i| &pairs[i].0 == m || &pairs[i].1 == m).collect();
        if idx.len() < 2 {
            continue;
        }
        let sub: Vec<Vec<f64>> = idx.iter().map(|&i| idx.iter().map(|&j| cov[i][j]).collect()).collect();
        for node in logical_tree(&sub, penalty) {
            let h = handles.len();
            handles.push(Handle { tree: t });
            for &k in &node.members {
                let i = idx[k];
                let side = if &pairs[i].0 == m { 0 } else { 1 };
                sides[i][side].push((node.gamma, h));
            }
        }
    }
    (sides, handles)
}

fn noise_floor(var: &[f64], sides: &Sides, tol: f64) -> f64 {
    let mut excess = Vec::new();
    for (i, s) in sides.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for &(ga, _) in &s[0] {
            for &(gb, _) in &s[1] {
                let t = ga + gb;
                if t <= 0.0 || t > var[i] * (1.0 + tol) {
                    continue;
                }
                let count = s[0]
                    .iter()
                    .flat_map(|&(x, _)| s[1].iter().map(move |&(y, _)| x + y))
                    .filter(|&v| (v - t).abs() <= tol * t)
                    .count();
                if best.is_none_or(|(bc, bt)| (count, t) > (bc, bt)) {
                    best = Some((count, t));
                }
            }
        }
        if let Some((_, t)) = best {
            excess.push((var[i] - t).max(0.0));
        }
    }
    if excess.is_empty() {
        return 0.0;
    }
    excess.sort_by(f64::total_cmp);
    let m = excess.len();
    if m % 2 == 1 {
        excess[m / 2]
    } else {
        0.5 * (excess[m / 2 - 1] + excess[m / 2])
    }
}

/// Infer a topology directly from a path covariance matrix.
pub fn infer_from_covariance(cov: &[Vec<f64>], pairs: &[(String, String)], params: &AttackerParams) -> Result<InferredTopology> {
    let p = pairs.len();
    if cov.len() != p || cov.iter().any(|r| r.len() != p) {
        return arg("covariance shape does not match the pair list");
    }
    if p == 0 {
        return arg("no monitor pairs");
    }
    let mut monitors: Vec<String> = Vec::new();
    for (a, b) in pairs {
        for m in [a, b] {
            if !monitors.contains(m) {
                monitors.push(m.clone());
            }
        }
    }
    let structured = cov.iter().enumerate().any(|(i, r)| r.iter().enumerate().any(|(j, v)| i != j && *v > 0.0));
    if !structured {
        return Ok(star(pairs, &monitors, true));
    }

    let (sides, handles) = build_trees(cov, pairs, &monitors, params.penalty);
    if handles.is_empty() {
        return Ok(star(pairs, &monitors, false));
    }
    let var: Vec<f64> = (0..p).map(|i| cov[i][i]).collect();
    let floor = noise_floor(&var, &sides, params.tolerance);
    let total: Vec<f64> = var.iter().map(|v| (v - floor).max(1e-12)).collect();

    let mut cands: Vec<(f64, usize, usize, usize)> = Vec::new();
    for (i, s) in sides.iter().enumerate() {
        let t = total[i];
        for &(ga, ha) in &s[0] {
            for &(gb, hb) in &s[1] {
                let d = (ga - (t - gb)).abs();
                if d <= params.tolerance * t {
                    cands.push((d / t, i, ha, hb));
                }
            }
        }
    }
    cands.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2, x.3).cmp(&(y.1, y.2, y.3))));

    let mut parent: Vec<usize> = (0..handles.len()).collect();
    let mut trees: Vec<Vec<usize>> = handles.iter().map(|h| vec![h.tree]).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(_, _, ha, hb) in &cands {
        let (a, b) = (find(&mut parent, ha), find(&mut parent, hb));
        if a == b || trees[a].iter().any(|t| trees[b].contains(t)) {
            continue;
        }
        let (lo, hi) = (a.min(b), a.max(b));
        parent[hi] = lo;
        let moved = std::mem::take(&mut trees[hi]);
        trees[lo].extend(moved);
    }

    // Lay out every path as endpoint, merged nodes by position, endpoint.
    let mut walks_named: Vec<Vec<Node>> = Vec::with_capacity(p);
    for (i, (a, b)) in pairs.iter().enumerate() {
        let t = total[i];
        let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for &(g, h) in &sides[i][0] {
            groups.entry(find(&mut parent, h)).or_default().push(g);
        }
        for &(g, h) in &sides[i][1] {
            groups.entry(find(&mut parent, h)).or_default().push(t - g);
        }
        let mut inner: Vec<(f64, usize)> = groups
            .into_iter()
            .map(|(r, v)| (v.iter().sum::<f64>() / v.len() as f64, r))
            .collect();
        inner.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        let mut w = vec![Node::Monitor(a.clone())];
        if inner.is_empty() {
            w.push(Node::PathHub(i));
        }
        w.extend(inner.into_iter().map(|(_, r)| Node::Internal(r)));
        w.push(Node::Monitor(b.clone()));
        walks_named.push(w);
    }
    Ok(assemble(walks_named, &monitors, false))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Node {
    Monitor(String),
    Internal(usize),
    PathHub(usize),
    Star,
}

fn star(pairs: &[(String, String)], monitors: &[String], low_confidence: bool) -> InferredTopology {
    let walks = pairs
        .iter()
        .map(|(a, b)| vec![Node::Monitor(a.clone()), Node::Star, Node::Monitor(b.clone())])
        .collect();
    assemble(walks, monitors, low_confidence)
}

/// Turn named walks into an [`InferredTopology`], contracting the
/// neighbours of any monitor that ended up with more than one so monitors
/// stay leaves.
fn assemble(mut walks: Vec<Vec<Node>>, monitors: &[String], low_confidence: bool) -> InferredTopology {
    for _ in 0..walks.len() * 4 + 4 {
        let mut nbrs: BTreeMap<&str, Vec<Node>> = BTreeMap::new();
        for w in &walks {
            for k in 0..w.len() {
                if let Node::Monitor(m) = &w[k] {
                    for n in [k.checked_sub(1), Some(k + 1)].into_iter().flatten() {
                        if let Some(x) = w.get(n) {
                            let e = nbrs.entry(m.as_str()).or_default();
                            if !e.contains(x) {
                                e.push(x.clone());
                            }
                        }
                    }
                }
            }
        }
        let Some((_, mut group)) = nbrs.into_iter().find(|(_, v)| v.len() > 1) else {
            break;
        };
        group.sort();
        if group.iter().any(|n| matches!(n, Node::Monitor(_))) {
            // Monitor-to-monitor adjacency cannot occur: every walk carries
            // at least one internal node.
            break;
        }
        let keep = group[0].clone();
        for w in &mut walks {
            for x in w.iter_mut() {
                if group.contains(x) {
                    *x = keep.clone();
                }
            }
            *w = simplify(std::mem::take(w));
        }
    }

    let mut nodes: Vec<String> = monitors.to_vec();
    let mut ids: BTreeMap<Node, usize> = BTreeMap::new();
    for (i, m) in monitors.iter().enumerate() {
        ids.insert(Node::Monitor(m.clone()), i);
    }
    let mut next = 0;
    let mut fresh = |nodes: &mut Vec<String>| -> String {
        loop {
            let name = format!("h{next}");
            next += 1;
            if !nodes.contains(&name) {
                return name;
            }
        }
    };
    let mut links: Vec<(usize, usize)> = Vec::new();
    let mut link_index: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut walks_idx = Vec::with_capacity(walks.len());
    let mut rows: Vec<Vec<usize>> = Vec::with_capacity(walks.len());
    for w in &walks {
        let mut wi = Vec::with_capacity(w.len());
        for x in w {
            let id = match ids.get(x) {
                Some(&id) => id,
                None => {
                    let name = fresh(&mut nodes);
                    nodes.push(name);
                    ids.insert(x.clone(), nodes.len() - 1);
                    nodes.len() - 1
                }
            };
            wi.push(id);
        }
        let mut row = Vec::new();
        for e in wi.windows(2) {
            let key = (e[0].min(e[1]), e[0].max(e[1]));
            let j = *link_index.entry(key).or_insert_with(|| {
                links.push(key);
                links.len() - 1
            });
            row.push(j);
        }
        rows.push(row);
        walks_idx.push(wi);
    }
    let dense: Vec<Vec<u8>> = rows
        .iter()
        .map(|r| {
            let mut v = vec![0u8; links.len()];
            for &j in r {
                v[j] = 1;
            }
            v
        })
        .collect();
    let routing = RoutingMatrix::from_rows(&dense, links.len()).expect("every walk has a link");
    InferredTopology {
        nodes,
        links,
        monitors: (0..monitors.len()).collect(),
        walks: walks_idx,
        routing,
        low_confidence,
    }
}

/// Drop repeated consecutive nodes and cut any loop a contraction created.
fn simplify(w: Vec<Node>) -> Vec<Node> {
    let mut out: Vec<Node> = Vec::with_capacity(w.len());
    for x in w {
        if let Some(pos) = out.iter().position(|y| *y == x) {
            out.truncate(pos + 1);
        } else {
            out.push(x);
        }
    }
    out
}
