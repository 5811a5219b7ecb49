//! The synthetic and Adult income studies, and their file output.

pub mod adult;
pub mod emit;
pub mod synthetic;

pub use adult::{adult_graph, ingest_adult, parse_adult, run_adult_study, AdultIngest, AdultStudy, AdultStudyConfig};
pub use emit::{emit_results, histogram, tv_distance, CurveRow, StudyOutput, DENSITY_BINS};
pub use synthetic::{
    build_fig4b_variant, draw_truth, run_synthetic_study, SyntheticStudy, SyntheticStudyConfig, ThetaRanges, VARIANTS,
};

use crate::error::{Error, Result};

pub const SEED_ENV: &str = "MLFAIR_SEED";

/// The seed override from `MLFAIR_SEED`, if set.
pub fn seed_from_env() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{SEED_ENV}={v} is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}
