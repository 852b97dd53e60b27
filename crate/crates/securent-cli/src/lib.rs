//! Experiment orchestration for the securent lab: configuration, fixture
//! loading, per-trial pipeline, seeded grids and figure CSVs.

pub mod config;
pub mod fixture;
pub mod pipeline;
pub mod reproduce;
pub mod runner;

pub use config::ExperimentConfig;
pub use fixture::Fixture;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    None,
    Securent,
    Uniform,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::None, Method::Securent, Method::Uniform];

    pub fn label(self) -> &'static str {
        match self {
            Method::None => "none",
            Method::Securent => "securent",
            Method::Uniform => "uniform-baseline",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.label() == s)
    }
}
