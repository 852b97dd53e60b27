//! Link metric synthesis and end-to-end aggregation.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{arg, Error, Result};
use crate::seed;
use crate::topology::{RoutingMatrix, Topology};

/// Floor applied to truncated draws so every metric stays strictly positive.
pub const MIN_METRIC: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MetricKind {
    /// Path value is the sum of its link delays.
    #[default]
    Delay,
    /// Path value is its bottleneck link capacity.
    Capacity,
}

/// Normal distribution truncated at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayDist {
    pub mean: f64,
    pub spread: f64,
}

impl DelayDist {
    pub const IDLE: DelayDist = DelayDist { mean: 1.0, spread: 0.2 };
    pub const CONGESTED: DelayDist = DelayDist { mean: 10.0, spread: 2.0 };

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        (self.mean + self.spread * z).max(MIN_METRIC)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CongestionScenario {
    pub congestion_probability: f64,
    pub link_states: Vec<bool>,
    pub delay_idle: DelayDist,
    pub delay_congested: DelayDist,
    pub kind: MetricKind,
}

impl CongestionScenario {
    pub fn new(p: f64, link_states: Vec<bool>, idle: DelayDist, congested: DelayDist) -> Result<Self> {
        check_probability(p)?;
        for d in [idle, congested] {
            if !(d.mean > 0.0) || !(d.spread >= 0.0) || !d.mean.is_finite() || !d.spread.is_finite() {
                return arg(format!("bad delay distribution {d:?}"));
            }
        }
        if congested.mean <= idle.mean {
            return arg("congested mean must exceed idle mean");
        }
        Ok(CongestionScenario {
            congestion_probability: p,
            link_states,
            delay_idle: idle,
            delay_congested: congested,
            kind: MetricKind::Delay,
        })
    }

    /// Default delay parameters, all links idle.
    pub fn with_defaults(p: f64, n_links: usize) -> Result<Self> {
        Self::new(p, vec![false; n_links], DelayDist::IDLE, DelayDist::CONGESTED)
    }
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return arg(format!("probability {p} outside [0, 1]"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkMetrics {
    pub values: Vec<f64>,
    pub kind: MetricKind,
}

pub fn sample_congestion(topo: &Topology, p: f64, seed: u64) -> Result<Vec<bool>> {
    check_probability(p)?;
    Ok(congestion_with(topo.links().len(), p, &mut seed::rng(seed)))
}

pub(crate) fn congestion_with<R: Rng + ?Sized>(n_links: usize, p: f64, rng: &mut R) -> Vec<bool> {
    (0..n_links).map(|_| rng.random::<f64>() < p).collect()
}

pub fn sample_link_delays(scenario: &CongestionScenario, seed: u64) -> LinkMetrics {
    let mut rng = seed::rng(seed);
    let values = scenario
        .link_states
        .iter()
        .map(|&c| {
            if c {
                scenario.delay_congested.sample(&mut rng)
            } else {
                scenario.delay_idle.sample(&mut rng)
            }
        })
        .collect();
    LinkMetrics {
        values,
        kind: scenario.kind,
    }
}

pub fn aggregate(routing: &RoutingMatrix, metrics: &LinkMetrics) -> Result<Vec<f64>> {
    if metrics.values.len() != routing.n_links() {
        return arg(format!(
            "{} link metrics for {} links",
            metrics.values.len(),
            routing.n_links()
        ));
    }
    match metrics.kind {
        MetricKind::Delay => routing.mul_vec(&metrics.values),
        MetricKind::Capacity => Ok((0..routing.n_paths())
            .map(|i| {
                routing
                    .path_links(i)
                    .into_iter()
                    .map(|j| metrics.values[j])
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()),
    }
}

/// Seed of probe round `r`. Within a round, child 0 drives the congestion
/// states and child 1 the link draws.
pub fn round_seed(seed: u64, r: usize) -> u64 {
    seed::derive(seed, &[r as u64])
}

/// Per-round path measurements plus, for synthesized series, the link
/// ground truth behind each round.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSeries {
    pub rounds: Vec<Vec<f64>>,
    pub kind: MetricKind,
    pub congestion_probability: Option<f64>,
    /// Per-round link congestion states; empty when loaded from CSV.
    pub link_states: Vec<Vec<bool>>,
    /// Per-round link metrics; empty when loaded from CSV.
    pub link_values: Vec<Vec<f64>>,
}

impl MeasurementSeries {
    /// Series without ground truth. Rows must be equally wide, finite and
    /// positive.
    pub fn from_rounds(rounds: Vec<Vec<f64>>, kind: MetricKind) -> Result<Self> {
        check_rounds(&rounds)?;
        Ok(MeasurementSeries {
            rounds,
            kind,
            congestion_probability: None,
            link_states: Vec::new(),
            link_values: Vec::new(),
        })
    }

    /// Same ground truth, different observed rounds.
    pub fn with_rounds(&self, rounds: Vec<Vec<f64>>) -> Result<Self> {
        if rounds.len() != self.rounds.len() {
            return arg("round count changed");
        }
        check_rounds(&rounds)?;
        Ok(MeasurementSeries {
            rounds,
            ..self.clone()
        })
    }

    pub fn n_rounds(&self) -> usize {
        self.rounds.len()
    }

    pub fn n_paths(&self) -> usize {
        self.rounds.first().map_or(0, Vec::len)
    }

    /// CSV with header `round,path_0,...` and 9 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("round");
        for i in 0..self.n_paths() {
            s.push_str(&format!(",path_{i}"));
        }
        s.push('\n');
        for (r, row) in self.rounds.iter().enumerate() {
            s.push_str(&r.to_string());
            for &v in row {
                s.push(',');
                s.push_str(&format_sig(v, 9));
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.first() != Some(&"round") {
            return Err(Error::Parse("first column must be `round`".into()));
        }
        for (i, c) in cols[1..].iter().enumerate() {
            if *c != format!("path_{i}") {
                return Err(Error::Parse(format!("unexpected column {c:?}")));
            }
        }
        let mut rounds = Vec::new();
        for l in lines {
            let vals = l
                .split(',')
                .skip(1)
                .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad value {t:?}"))))
                .collect::<Result<Vec<f64>>>()?;
            if vals.len() != cols.len() - 1 {
                return Err(Error::Parse(format!("row has {} values, header has {}", vals.len(), cols.len() - 1)));
            }
            rounds.push(vals);
        }
        Self::from_rounds(rounds, MetricKind::Delay)
    }
}

fn check_rounds(rounds: &[Vec<f64>]) -> Result<()> {
    let w = rounds.first().map_or(0, Vec::len);
    for (r, row) in rounds.iter().enumerate() {
        if row.len() != w {
            return arg(format!("round {r} has {} paths, expected {w}", row.len()));
        }
        if let Some(v) = row.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Numeric(format!("round {r} holds non-positive value {v}")));
        }
    }
    Ok(())
}

/// Format `v` with `digits` significant digits in plain decimal notation.
pub fn format_sig(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let mag = v.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - mag).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    } else {
        s
    }
}

/// Synthesize `n_probes` i.i.d. rounds. Link states are redrawn each round
/// with the scenario's congestion probability; the scenario's own state
/// vector is ignored.
pub fn generate_probe_series(
    routing: &RoutingMatrix,
    scenario: &CongestionScenario,
    n_probes: usize,
    seed: u64,
) -> Result<MeasurementSeries> {
    if n_probes == 0 {
        return arg("n_probes must be at least 1");
    }
    let n_links = routing.n_links();
    let mut rounds = Vec::with_capacity(n_probes);
    let mut states = Vec::with_capacity(n_probes);
    let mut values = Vec::with_capacity(n_probes);
    let mut sc = scenario.clone();
    for r in 0..n_probes {
        let rs = round_seed(seed, r);
        sc.link_states = congestion_with(
            n_links,
            scenario.congestion_probability,
            &mut seed::rng(seed::derive(rs, &[0])),
        );
        let m = sample_link_delays(&sc, seed::derive(rs, &[1]));
        rounds.push(aggregate(routing, &m)?);
        states.push(std::mem::take(&mut sc.link_states));
        values.push(m.values);
    }
    Ok(MeasurementSeries {
        rounds,
        kind: scenario.kind,
        congestion_probability: Some(scenario.congestion_probability),
        link_states: states,
        link_values: values,
    })
}
