//! Graphs, monitors, shortest-path routing and the routing matrix.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{arg, Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

impl Link {
    pub fn other(&self, n: usize) -> usize {
        if self.a == n {
            self.b
        } else {
            self.a
        }
    }
}

/// Undirected weighted graph with an optional monitor set.
///
/// Construction checks connectivity, positive weights and the absence of
/// self-loops and parallel links. A freshly loaded graph has no monitors;
/// attach them with [`Topology::with_monitors`].
#[derive(Debug, Clone)]
pub struct Topology {
    nodes: Vec<String>,
    links: Vec<Link>,
    monitors: Vec<usize>,
    index: HashMap<String, usize>,
    adj: Vec<Vec<(usize, usize)>>,
}

impl Topology {
    pub fn new(nodes: Vec<String>, links: Vec<Link>) -> Result<Self> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.clone(), i).is_some() {
                return Err(Error::Structural(format!("duplicate node id {n:?}")));
            }
        }
        if nodes.len() < 2 || links.is_empty() {
            let comps = nodes.iter().map(|n| vec![n.clone()]).collect::<Vec<_>>();
            return Err(Error::Structural(format!(
                "graph is disconnected, components: {comps:?}"
            )));
        }
        let mut adj = vec![Vec::new(); nodes.len()];
        let mut seen = HashMap::new();
        for (j, l) in links.iter().enumerate() {
            if l.a >= nodes.len() || l.b >= nodes.len() {
                return arg(format!("link {j} references a missing node"));
            }
            if l.a == l.b {
                return Err(Error::Structural(format!("self-loop on {}", nodes[l.a])));
            }
            if !(l.weight > 0.0) || !l.weight.is_finite() {
                return Err(Error::Structural(format!(
                    "link {}-{} has non-positive weight {}",
                    nodes[l.a], nodes[l.b], l.weight
                )));
            }
            if seen.insert((l.a.min(l.b), l.a.max(l.b)), j).is_some() {
                return Err(Error::Structural(format!(
                    "duplicate link {}-{}",
                    nodes[l.a], nodes[l.b]
                )));
            }
            adj[l.a].push((l.b, j));
            adj[l.b].push((l.a, j));
        }
        let topo = Topology {
            nodes,
            links,
            monitors: Vec::new(),
            index,
            adj,
        };
        let comps = topo.components();
        if comps.len() > 1 {
            let named: Vec<Vec<&str>> = comps
                .iter()
                .map(|c| c.iter().map(|&i| topo.nodes[i].as_str()).collect())
                .collect();
            return Err(Error::Structural(format!(
                "graph is disconnected, components: {named:?}"
            )));
        }
        Ok(topo)
    }

    pub fn with_monitors<S: AsRef<str>>(mut self, monitors: &[S]) -> Result<Self> {
        let mut ms = Vec::with_capacity(monitors.len());
        for m in monitors {
            let i = self.require(m.as_ref())?;
            if !ms.contains(&i) {
                ms.push(i);
            }
        }
        if ms.len() < 2 {
            return arg("a topology needs at least two monitors");
        }
        self.monitors = ms;
        Ok(self)
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn monitors(&self) -> &[usize] {
        &self.monitors
    }

    pub fn monitor_ids(&self) -> Vec<String> {
        self.monitors.iter().map(|&i| self.nodes[i].clone()).collect()
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    fn require(&self, id: &str) -> Result<usize> {
        self.node_index(id)
            .ok_or_else(|| Error::Argument(format!("unknown node {id:?}")))
    }

    pub fn degree(&self, n: usize) -> usize {
        self.adj[n].len()
    }

    /// `(neighbour, link index)` pairs of node `n`.
    pub fn neighbours(&self, n: usize) -> &[(usize, usize)] {
        &self.adj[n]
    }

    pub fn link_between(&self, a: usize, b: usize) -> Option<usize> {
        self.adj[a].iter().find(|&&(m, _)| m == b).map(|&(_, j)| j)
    }

    pub fn weight_range(&self) -> (f64, f64) {
        self.links.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), l| {
            (lo.min(l.weight), hi.max(l.weight))
        })
    }

    fn components(&self) -> Vec<Vec<usize>> {
        let mut comp = vec![usize::MAX; self.nodes.len()];
        let mut out = Vec::new();
        for s in 0..self.nodes.len() {
            if comp[s] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut stack = vec![s];
            let mut members = Vec::new();
            comp[s] = id;
            while let Some(u) = stack.pop() {
                members.push(u);
                for &(v, _) in &self.adj[u] {
                    if comp[v] == usize::MAX {
                        comp[v] = id;
                        stack.push(v);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    pub fn to_graphml(&self) -> String {
        let links: Vec<(usize, usize, f64)> =
            self.links.iter().map(|l| (l.a, l.b, l.weight)).collect();
        write_graphml(&self.nodes, &links)
    }
}

/// Parse a GraphML document into a [`Topology`].
///
/// Edges are read as undirected. The edge attribute named `weight` supplies
/// the link length, defaulting to 1.0. Parallel edges collapse onto the
/// shortest one and self-loops are dropped, since Topology Zoo files contain
/// both.
pub fn load_graphml(bytes: &[u8]) -> Result<Topology> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))?;
    let doc = roxmltree::Document::parse(text).map_err(|e| Error::Parse(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "graphml" {
        return Err(Error::Parse("root element is not <graphml>".into()));
    }
    let weight_key = root
        .children()
        .filter(|n| n.tag_name().name() == "key")
        .find(|n| {
            n.attribute("attr.name") == Some("weight")
                && matches!(n.attribute("for"), Some("edge") | Some("all") | None)
        })
        .and_then(|n| n.attribute("id"))
        .map(str::to_owned);
    let graph = root
        .children()
        .find(|n| n.tag_name().name() == "graph")
        .ok_or_else(|| Error::Parse("no <graph> element".into()))?;
    if graph.attribute("edgedefault") == Some("directed") {
        return Err(Error::Parse("directed graphs are not supported".into()));
    }

    let mut nodes = Vec::new();
    let mut index = HashMap::new();
    for n in graph.children().filter(|n| n.tag_name().name() == "node") {
        let id = n
            .attribute("id")
            .ok_or_else(|| Error::Parse("node without id".into()))?;
        if index.insert(id.to_owned(), nodes.len()).is_some() {
            return Err(Error::Parse(format!("duplicate node id {id:?}")));
        }
        nodes.push(id.to_owned());
    }

    let mut order: Vec<(usize, usize)> = Vec::new();
    let mut weights: HashMap<(usize, usize), f64> = HashMap::new();
    for e in graph.children().filter(|n| n.tag_name().name() == "edge") {
        let end = |attr: &str| -> Result<usize> {
            let id = e
                .attribute(attr)
                .ok_or_else(|| Error::Parse(format!("edge without {attr}")))?;
            index
                .get(id)
                .copied()
                .ok_or_else(|| Error::Parse(format!("edge references unknown node {id:?}")))
        };
        let (a, b) = (end("source")?, end("target")?);
        if a == b {
            continue;
        }
        let mut w = 1.0;
        if let Some(key) = &weight_key {
            if let Some(d) = e
                .children()
                .find(|d| d.tag_name().name() == "data" && d.attribute("key") == Some(key))
            {
                let raw = d.text().unwrap_or("").trim();
                w = raw
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad edge weight {raw:?}")))?;
            }
        }
        let key = (a.min(b), a.max(b));
        match weights.get_mut(&key) {
            Some(old) => *old = old.min(w),
            None => {
                weights.insert(key, w);
                order.push((a, b));
            }
        }
    }
    let links = order
        .into_iter()
        .map(|(a, b)| Link {
            a,
            b,
            weight: weights[&(a.min(b), a.max(b))],
        })
        .collect();
    Topology::new(nodes, links)
}

/// Serialize nodes and weighted links in the dialect [`load_graphml`] reads.
pub fn write_graphml(nodes: &[String], links: &[(usize, usize, f64)]) -> String {
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"utf-8\"?>\n");
    s.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
    s.push_str("  <key attr.name=\"weight\" attr.type=\"double\" for=\"edge\" id=\"w\" />\n");
    s.push_str("  <graph edgedefault=\"undirected\">\n");
    for n in nodes {
        let _ = writeln!(s, "    <node id=\"{}\" />", xml_escape(n));
    }
    for &(a, b, w) in links {
        let _ = writeln!(
            s,
            "    <edge source=\"{}\" target=\"{}\"><data key=\"w\">{}</data></edge>",
            xml_escape(&nodes[a]),
            xml_escape(&nodes[b]),
            w
        );
    }
    s.push_str("  </graph>\n</graphml>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Pick `count` monitors, lowest degree first.
///
/// Nodes strictly below the cut-off degree are always taken; the seed only
/// decides which of the nodes tied at the cut-off degree fill the remaining
/// slots. The result is in node-identifier order.
pub fn select_monitors(topo: &Topology, count: usize, seed: u64) -> Result<Vec<String>> {
    let n = topo.nodes().len();
    if count < 2 || count > n {
        return arg(format!("monitor count {count} outside 2..={n}"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        topo.degree(a)
            .cmp(&topo.degree(b))
            .then_with(|| topo.nodes[a].cmp(&topo.nodes[b]))
    });
    let cut = topo.degree(order[count - 1]);
    let mut chosen: Vec<usize> = order.iter().copied().filter(|&i| topo.degree(i) < cut).collect();
    let mut tied: Vec<usize> = order.iter().copied().filter(|&i| topo.degree(i) == cut).collect();
    if tied.len() > count - chosen.len() {
        tied.shuffle(&mut seed::rng(seed));
    }
    tied.truncate(count - chosen.len());
    chosen.extend(tied);
    let mut ids: Vec<String> = chosen.into_iter().map(|i| topo.nodes[i].clone()).collect();
    ids.sort();
    Ok(ids)
}

/// Random logical tree with at most `max_nodes` nodes (at least 4): a root
/// monitor `r` with a single child, every other internal node branching two
/// or three ways, and a monitor at every leaf. Returns the tree and the
/// root-to-leaf monitor pairs.
pub fn random_logical_tree(max_nodes: usize, seed: u64) -> Result<(Topology, Vec<(String, String)>)> {
    if max_nodes < 4 {
        return arg(format!("a logical tree needs at least 4 nodes, got {max_nodes}"));
    }
    let mut rng = seed::rng(seed);
    let target = rng.random_range(4..=max_nodes);
    // parent[i] for every node but the root.
    let mut parent: Vec<Option<usize>> = vec![None, Some(0)];
    let mut open = vec![1usize];
    while !open.is_empty() {
        let room = target - parent.len();
        if room < 2 {
            break;
        }
        let at = open.remove(rng.random_range(0..open.len()));
        let k = if room >= 3 && rng.random::<bool>() { 3 } else { 2 };
        for _ in 0..k {
            open.push(parent.len());
            parent.push(Some(at));
        }
    }
    let n = parent.len();
    let mut has_child = vec![false; n];
    for p in parent.iter().flatten() {
        has_child[*p] = true;
    }
    let names: Vec<String> = (0..n)
        .map(|i| match i {
            0 => "r".to_owned(),
            _ if has_child[i] => format!("v{i}"),
            _ => format!("m{i}"),
        })
        .collect();
    let links = (1..n)
        .map(|i| Link {
            a: parent[i].expect("non-root"),
            b: i,
            weight: 1.0,
        })
        .collect();
    let monitors: Vec<String> = (0..n).filter(|&i| i == 0 || !has_child[i]).map(|i| names[i].clone()).collect();
    let pairs = monitors[1..].iter().map(|m| ("r".to_owned(), m.clone())).collect();
    let topo = Topology::new(names, links)?.with_monitors(&monitors)?;
    Ok((topo, pairs))
}

/// One routed path per monitor pair.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PathSet {
    /// Link indices in walk order from source to destination.
    pub paths: Vec<Vec<usize>>,
    /// `(source, destination)` node indices.
    pub endpoints: Vec<(usize, usize)>,
}

impl PathSet {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Node sequence of path `i`.
    pub fn node_walk(&self, topo: &Topology, i: usize) -> Vec<usize> {
        let mut cur = self.endpoints[i].0;
        let mut walk = vec![cur];
        for &j in &self.paths[i] {
            cur = topo.links()[j].other(cur);
            walk.push(cur);
        }
        walk
    }

    pub fn endpoint_ids(&self, topo: &Topology) -> Vec<(String, String)> {
        self.endpoints
            .iter()
            .map(|&(a, b)| (topo.nodes[a].clone(), topo.nodes[b].clone()))
            .collect()
    }
}

/// Shortest paths for every unordered pair of `monitors`, pairs taken in
/// list order.
pub fn compute_paths<S: AsRef<str>>(topo: &Topology, monitors: &[S]) -> Result<PathSet> {
    if monitors.len() < 2 {
        return arg("need at least two monitors");
    }
    let mut pairs = Vec::new();
    for i in 0..monitors.len() {
        for j in i + 1..monitors.len() {
            pairs.push((monitors[i].as_ref().to_owned(), monitors[j].as_ref().to_owned()));
        }
    }
    compute_paths_for_pairs(topo, &pairs)
}

/// Shortest paths for an explicit list of monitor pairs.
pub fn compute_paths_for_pairs<S: AsRef<str>>(topo: &Topology, pairs: &[(S, S)]) -> Result<PathSet> {
    let mut paths = Vec::with_capacity(pairs.len());
    let mut endpoints = Vec::with_capacity(pairs.len());
    let mut trees: BTreeMap<usize, Vec<Option<Vec<usize>>>> = BTreeMap::new();
    for (a, b) in pairs {
        let (s, t) = (topo.require(a.as_ref())?, topo.require(b.as_ref())?);
        if s == t {
            return arg(format!("pair {:?} joins a node to itself", a.as_ref()));
        }
        let tree = trees.entry(s).or_insert_with(|| shortest_walks(topo, s));
        let walk = tree[t]
            .as_ref()
            .ok_or_else(|| Error::Structural("monitor pair is not connected".into()))?;
        let links = walk
            .windows(2)
            .map(|w| topo.link_between(w[0], w[1]).expect("walk follows links"))
            .collect();
        paths.push(links);
        endpoints.push((s, t));
    }
    Ok(PathSet { paths, endpoints })
}

/// Dijkstra from `s`, keeping for every node the lexicographically smallest
/// identifier sequence among its minimum-weight walks.
fn shortest_walks(topo: &Topology, s: usize) -> Vec<Option<Vec<usize>>> {
    let n = topo.nodes.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut walk: Vec<Option<Vec<usize>>> = vec![None; n];
    let mut done = vec![false; n];
    dist[s] = 0.0;
    walk[s] = Some(vec![s]);
    let ids = |w: &[usize]| -> Vec<&str> { w.iter().map(|&i| topo.nodes[i].as_str()).collect() };
    for _ in 0..n {
        let Some(u) = (0..n)
            .filter(|&i| !done[i] && dist[i].is_finite())
            .min_by(|&a, &b| dist[a].total_cmp(&dist[b]))
        else {
            break;
        };
        done[u] = true;
        let base = walk[u].clone().expect("reached nodes have walks");
        for &(v, j) in &topo.adj[u] {
            if done[v] {
                continue;
            }
            let d = dist[u] + topo.links[j].weight;
            let eps = 1e-9 * d.abs().max(1.0);
            let mut cand = base.clone();
            cand.push(v);
            let better = if d < dist[v] - eps {
                true
            } else if (d - dist[v]).abs() <= eps {
                ids(&cand) < ids(walk[v].as_deref().unwrap_or(&[]))
            } else {
                false
            };
            if better {
                dist[v] = dist[v].min(d);
                walk[v] = Some(cand);
            }
        }
    }
    walk
}

/// Binary path-by-link incidence matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutingMatrix {
    n_paths: usize,
    n_links: usize,
    entries: Vec<u8>,
}

impl RoutingMatrix {
    /// Build from explicit 0/1 rows. Every row must contain a 1.
    pub fn from_rows(rows: &[Vec<u8>], n_links: usize) -> Result<Self> {
        let mut entries = Vec::with_capacity(rows.len() * n_links);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n_links {
                return arg(format!("row {i} has {} entries, expected {n_links}", r.len()));
            }
            if r.iter().any(|&v| v > 1) {
                return arg(format!("row {i} is not binary"));
            }
            if !r.contains(&1) {
                return arg(format!("row {i} is empty"));
            }
            entries.extend_from_slice(r);
        }
        Ok(RoutingMatrix {
            n_paths: rows.len(),
            n_links,
            entries,
        })
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_links(&self) -> usize {
        self.n_links
    }

    /// A matrix without paths carries no measurements.
    pub fn is_degenerate(&self) -> bool {
        self.n_paths == 0
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.entries[i * self.n_links + j] == 1
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.entries[i * self.n_links..(i + 1) * self.n_links]
    }

    pub fn path_links(&self, i: usize) -> Vec<usize> {
        (0..self.n_links).filter(|&j| self.get(i, j)).collect()
    }

    pub fn hop_counts(&self) -> Vec<usize> {
        (0..self.n_paths)
            .map(|i| self.row(i).iter().map(|&v| v as usize).sum())
            .collect()
    }

    pub fn column_sums(&self) -> Vec<usize> {
        let mut s = vec![0; self.n_links];
        for i in 0..self.n_paths {
            for (j, &v) in self.row(i).iter().enumerate() {
                s[j] += v as usize;
            }
        }
        s
    }

    /// Links no path traverses.
    pub fn unmeasured_links(&self) -> Vec<usize> {
        self.column_sums()
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == 0)
            .map(|(j, _)| j)
            .collect()
    }

    /// `R · x`.
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_links {
            return arg(format!("vector has {} entries, matrix has {} links", x.len(), self.n_links));
        }
        Ok((0..self.n_paths)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .filter(|(&r, _)| r == 1)
                    .map(|(_, &v)| v)
                    .sum()
            })
            .collect())
    }

    /// `paths=<n> links=<m>` header followed by one space-separated row per path.
    pub fn to_text(&self) -> String {
        let mut s = format!("paths={} links={}\n", self.n_paths, self.n_links);
        for i in 0..self.n_paths {
            let row: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty routing file".into()))?;
        let mut n_paths = None;
        let mut n_links = None;
        for tok in header.split_whitespace() {
            match tok.split_once('=') {
                Some(("paths", v)) => n_paths = v.parse::<usize>().ok(),
                Some(("links", v)) => n_links = v.parse::<usize>().ok(),
                _ => return Err(Error::Parse(format!("bad header token {tok:?}"))),
            }
        }
        let (Some(n_paths), Some(n_links)) = (n_paths, n_links) else {
            return Err(Error::Parse(format!("bad header {header:?}")));
        };
        let rows = lines
            .map(|l| {
                l.split_whitespace()
                    .map(|t| t.parse::<u8>().map_err(|_| Error::Parse(format!("bad entry {t:?}"))))
                    .collect::<Result<Vec<u8>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        if rows.len() != n_paths {
            return Err(Error::Parse(format!("header says {n_paths} paths, found {}", rows.len())));
        }
        Self::from_rows(&rows, n_links)
    }
}

pub fn build_routing_matrix(paths: &PathSet, link_count: usize) -> Result<RoutingMatrix> {
    let mut rows = Vec::with_capacity(paths.len());
    for (i, p) in paths.paths.iter().enumerate() {
        let mut r = vec![0u8; link_count];
        for &j in p {
            if j >= link_count {
                return arg(format!("path {i} uses link {j}, only {link_count} links exist"));
            }
            r[j] = 1;
        }
        rows.push(r);
    }
    RoutingMatrix::from_rows(&rows, link_count)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub paths: usize,
    pub links: usize,
    pub mean_hops: f64,
    pub mean_weight: f64,
}

pub fn summarize(topo: &Topology, paths: &PathSet) -> Summary {
    let hops: usize = paths.paths.iter().map(Vec::len).sum();
    let weight: f64 = topo.links.iter().map(|l| l.weight).sum();
    Summary {
        paths: paths.len(),
        links: topo.links.len(),
        mean_hops: if paths.is_empty() { 0.0 } else { hops as f64 / paths.len() as f64 },
        mean_weight: weight / topo.links.len() as f64,
    }
}

/// Monitor set and probed pairs for one topology, as stored next to its
/// GraphML file.
///
/// ```text
/// version 1
/// monitors a b c
/// pair a b
/// pair a c
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorFixture {
    pub version: u32,
    pub monitors: Vec<String>,
    pub pairs: Vec<(String, String)>,
}

impl MonitorFixture {
    pub fn parse(text: &str) -> Result<Self> {
        let mut version = 1;
        let mut monitors = Vec::new();
        let mut pairs = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut toks = line.split_whitespace();
            let bad = || Error::Parse(format!("monitor fixture line {}: {line:?}", n + 1));
            match toks.next() {
                Some("version") => {
                    version = toks.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?
                }
                Some("monitors") => monitors.extend(toks.map(str::to_owned)),
                Some("pair") => {
                    let (Some(a), Some(b), None) = (toks.next(), toks.next(), toks.next()) else {
                        return Err(bad());
                    };
                    pairs.push((a.to_owned(), b.to_owned()));
                }
                _ => return Err(bad()),
            }
        }
        if monitors.is_empty() {
            monitors = pairs.iter().flat_map(|(a, b)| [a.clone(), b.clone()]).collect();
            monitors.sort();
            monitors.dedup();
        }
        for (a, b) in &pairs {
            if !monitors.contains(a) || !monitors.contains(b) {
                return Err(Error::Parse(format!("pair {a}-{b} uses a non-monitor")));
            }
        }
        Ok(MonitorFixture {
            version,
            monitors,
            pairs,
        })
    }

    /// All unordered pairs of the monitor set, used when no pair lines exist.
    pub fn effective_pairs(&self) -> Vec<(String, String)> {
        if !self.pairs.is_empty() {
            return self.pairs.clone();
        }
        let m = &self.monitors;
        let mut out = Vec::new();
        for i in 0..m.len() {
            for j in i + 1..m.len() {
                out.push((m[i].clone(), m[j].clone()));
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("version {}\nmonitors {}\n", self.version, self.monitors.join(" "));
        for (a, b) in &self.pairs {
            let _ = writeln!(s, "pair {a} {b}");
        }
        s
    }
}
