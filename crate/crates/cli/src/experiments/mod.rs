//! One function per subcommand, each returning an [`Outcome`].

mod bessel;
mod dimension;
mod exceptional;
mod fredholm;
mod landscape;
mod report;

pub use exceptional::{read_records, write_records};
pub use report::collect_manifests;

use anyhow::Result;

use crate::config::{Experiment, ExperimentConfig};
use crate::run::Outcome;

pub fn dispatch(cfg: &ExperimentConfig) -> Result<Outcome> {
    match (cfg.experiment, cfg.mode.as_str()) {
        (Experiment::SampleLandscape, "tw-onepoint") => landscape::tw_onepoint(cfg),
        (Experiment::SampleLandscape, "bessel-ic") => landscape::bessel_ic(cfg),
        (Experiment::SampleLandscape, _) => landscape::profile(cfg),
        (Experiment::SymmetrySuite, _) => landscape::symmetry(cfg),
        (Experiment::TwTable, _) => fredholm::tw_table(cfg),
        (Experiment::MaxCdf, _) => fredholm::max_cdf(cfg),
        (Experiment::BesselSuite, _) => bessel::suite(cfg),
        (Experiment::Exceptional, _) => exceptional::run(cfg),
        (Experiment::DimEstimate, "synthetic") => dimension::synthetic(cfg),
        (Experiment::DimEstimate, "records") => dimension::records(cfg),
        (Experiment::DimEstimate, _) => dimension::cantor(cfg),
        (Experiment::Report, _) => report::report(cfg),
    }
}
