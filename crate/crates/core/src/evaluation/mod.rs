//! Evaluation pipeline: matching, additionality and leakage, permanence
//! adjustment, PACT tonnage and price.

pub mod carbon;
pub mod did;
pub mod matching;
pub mod permanence;
pub mod pipeline;
pub mod synthetic;
pub mod world;

pub use carbon::{carbon_stock, CarbonTable, CarbonTableError};
pub use did::{additionality_series, did_series, leakage_series, YearValue};
pub use matching::{match_pixels, MatchConfig, MatchResult, MatchedPair, Sampling};
pub use permanence::{compute_price, equivalent_permanence, Price, ReleaseSchedule};
pub use pipeline::{
    evaluate_project, load_project, pact_kg, EvaluationResult, LoadedProject, ProjectConfig, ProjectLoadError,
};
pub use world::{LandUse, PixelRecord, Region, World, WorldError};

use crate::artifact_store::StoreError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvaluationError {
    #[error("matching area has no pixels")]
    EmptyMatchingArea,
    #[error("world has no project pixels")]
    NoProjectPixels,
    #[error("no project pixel found a match")]
    NoProjectPairs,
    #[error("land-use history must reach back to {required_from}, world starts at {available_from}")]
    InsufficientHistory { required_from: i32, available_from: i32 },
    #[error("year {year} outside world coverage {first}..={last}")]
    YearOutOfRange { year: i32, first: i32, last: i32 },
    #[error("evaluation window is empty: t_end {t_end} before t0 {t0}")]
    EmptyWindow { t0: i32, t_end: i32 },
    #[error("carbon table has no density for ecoregion {ecoregion} class {class}")]
    MissingTableEntry { ecoregion: u32, class: LandUse },
    #[error("pair references unknown pixel {0}")]
    UnknownPixel(u64),
    #[error("invalid release schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid price inputs: price {price_project}, al_adj {al_adj}, eP {ep}")]
    InvalidPriceInput { price_project: f64, al_adj: f64, ep: f64 },
    #[error("claimed tonnes must be finite and > 0, got {0}")]
    InvalidClaim(f64),
    #[error("artifact store: {0}")]
    Store(String),
}

impl From<StoreError> for EvaluationError {
    fn from(e: StoreError) -> Self {
        EvaluationError::Store(e.to_string())
    }
}
