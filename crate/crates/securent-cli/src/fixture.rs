use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use securent_core::topology::{build_routing_matrix, compute_paths_for_pairs, load_graphml, MonitorFixture, PathSet, RoutingMatrix, Topology};

/// The four measured subgraphs shipped with the crate.
pub const FIXTURE_NAMES: [&str; 4] = ["chinanet", "agis", "geant2001", "ernet"];

/// Fixture directory: `$SECURENT_FIXTURES` when set, else the repository's
/// `fixtures/`.
pub fn fixture_dir() -> PathBuf {
    std::env::var_os("SECURENT_FIXTURES")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures"))
}

/// A topology with its monitor pairs routed.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub topology: Topology,
    pub pairs: Vec<(String, String)>,
    pub paths: PathSet,
    pub routing: RoutingMatrix,
}

impl Fixture {
    pub fn load(dir: &Path, name: &str) -> Result<Fixture> {
        Self::from_files(&dir.join(format!("{name}.graphml")), &dir.join(format!("{name}.monitors")), name)
    }

    pub fn from_files(graphml: &Path, monitors: &Path, name: &str) -> Result<Fixture> {
        let bytes = std::fs::read(graphml).with_context(|| format!("missing fixture {}", graphml.display()))?;
        let topo = load_graphml(&bytes).with_context(|| format!("loading {}", graphml.display()))?;
        let text = std::fs::read_to_string(monitors).with_context(|| format!("missing fixture {}", monitors.display()))?;
        let mf = MonitorFixture::parse(&text).with_context(|| format!("parsing {}", monitors.display()))?;
        Self::from_parts(name, topo, &mf)
    }

    pub fn from_parts(name: &str, topo: Topology, mf: &MonitorFixture) -> Result<Fixture> {
        let topology = topo.with_monitors(&mf.monitors)?;
        let pairs = mf.effective_pairs();
        let paths = compute_paths_for_pairs(&topology, &pairs)?;
        let routing = build_routing_matrix(&paths, topology.links().len())?;
        Ok(Fixture {
            name: name.to_owned(),
            topology,
            pairs,
            paths,
            routing,
        })
    }

    pub fn hop_total(&self) -> usize {
        self.routing.hop_counts().iter().sum()
    }
}

/// Load all four shipped fixtures, naming the first one that is missing.
pub fn load_all(dir: &Path) -> Result<Vec<Fixture>> {
    FIXTURE_NAMES.iter().map(|n| Fixture::load(dir, n)).collect()
}
