//! End-to-end project evaluation and the project config file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::carbon::{CarbonTable, CarbonTableError, DEFAULT_CARBON_FRACTION};
use super::did::{additionality_series, leakage_series, YearValue};
use super::matching::{match_pixels, MatchConfig, MatchResult, MatchedPair, Sampling};
use super::permanence::{compute_price, equivalent_permanence, Price, ReleaseSchedule};
use super::world::{Region, World};
use super::EvaluationError;
use crate::artifact_store::{ArtifactManifest, ArtifactStore};
use crate::canonical::ContentHash;

pub const PIPELINE_VERSION: &str = concat!("pact-eval/", env!("CARGO_PKG_VERSION"), " did-v1 ep-discounted-v1");

/// Added before flooring to kilograms so that a product which is integral
/// in exact arithmetic does not lose a kilogram to binary rounding.
const KG_FLOOR_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectConfig {
    pub name: String,
    pub t0: i32,
    pub t_end: i32,
    pub matching: MatchConfig,
    /// tonnes CO2e the project itself claims, for the price comparison
    pub claimed_tonnes: Option<f64>,
    /// currency per tonne
    pub price_project: Option<f64>,
    /// Logical timestamp recorded in the manifest.
    pub run_counter: u64,
}

impl ProjectConfig {
    pub fn new(name: impl Into<String>, t0: i32, t_end: i32) -> Self {
        ProjectConfig {
            name: name.into(),
            t0,
            t_end,
            matching: MatchConfig::default(),
            claimed_tonnes: None,
            price_project: None,
            run_counter: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub project: String,
    pub t0: i32,
    pub t_end: i32,
    pub additionality: Vec<YearValue>,
    pub leakage: Vec<YearValue>,
    pub additionality_final: f64,
    pub leakage_final: f64,
    pub ep: f64,
    pub pact_kg: u64,
    pub claimed_tonnes: Option<f64>,
    pub al_adj: Option<f64>,
    pub price_project: Option<f64>,
    pub price_pact: Option<Price>,
    pub project_pixels: usize,
    pub buffer_pixels: usize,
    pub matched_project: usize,
    pub matched_buffer: usize,
    pub unmatched_count: usize,
    pub manifest: ArtifactManifest,
    pub manifest_digest: ContentHash,
}

impl EvaluationResult {
    /// Pretty JSON with a trailing newline; stable across runs.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("result serializes");
        s.push('\n');
        s
    }
}

/// Mintable kilograms for a net tonnage and permanence factor.
pub fn pact_kg(net_tonnes: f64, ep: f64) -> u64 {
    let kg = net_tonnes * ep * 1000.0;
    if kg.is_nan() || kg <= 0.0 {
        return 0;
    }
    (kg + KG_FLOOR_SLACK).floor() as u64
}

fn ground_truth_bytes(world: &World, table: &CarbonTable) -> Vec<u8> {
    format!(
        "pact-ground-truth v1\n[world]\n{}[carbon carbon_fraction={} pixel_area={} co2_per_carbon={}]\n{}",
        world.to_csv(),
        table.carbon_fraction,
        table.pixel_area,
        table.co2_per_carbon,
        table.to_csv()
    )
    .into_bytes()
}

fn counterfactual_bytes(config: &ProjectConfig, matched: &MatchResult, a: &[YearValue], l: &[YearValue]) -> Vec<u8> {
    let mut out = String::from("pact-counterfactual v1\n");
    out.push_str(&format!(
        "t0 {}\nt_end {}\nhistory_offsets {}\nwith_replacement {}\n",
        config.t0,
        config.t_end,
        config
            .matching
            .history_offsets
            .iter()
            .map(u32::to_string)
            .collect::<Vec<_>>()
            .join(","),
        config.matching.with_replacement
    ));
    if let Some(s) = config.matching.sampling {
        out.push_str(&format!(
            "sampling seed={} max_per_region={}\n",
            s.seed, s.max_per_region
        ));
    }
    out.push_str(&format!(
        "scales {},{},{}\n[pairs]\ntreatment,region,control,distance\n",
        matched.scales[0], matched.scales[1], matched.scales[2]
    ));
    for p in &matched.pairs {
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.treatment,
            p.treatment_region.as_str(),
            p.control,
            p.covariate_distance
        ));
    }
    out.push_str("[unmatched]\n");
    for id in &matched.unmatched {
        out.push_str(&format!("{id}\n"));
    }
    out.push_str("[series]\nyear,additionality,leakage\n");
    for (av, lv) in a.iter().zip(l) {
        out.push_str(&format!("{},{},{}\n", av.year, av.tonnes, lv.tonnes));
    }
    out.into_bytes()
}

pub fn evaluate_project(
    world: &World,
    config: &ProjectConfig,
    table: &CarbonTable,
    schedule: &ReleaseSchedule,
    store: &ArtifactStore,
) -> Result<EvaluationResult, EvaluationError> {
    if let Some(claimed) = config.claimed_tonnes {
        if !(claimed.is_finite() && claimed > 0.0) {
            return Err(EvaluationError::InvalidClaim(claimed));
        }
    }
    let ep = equivalent_permanence(schedule)?;
    let matched = match_pixels(world, config.t0, &config.matching)?;
    let split = |region: Region| -> Vec<MatchedPair> { matched.pairs_in(region).cloned().collect() };
    let project_pairs = split(Region::Project);
    let buffer_pairs = split(Region::LeakageBuffer);

    let a = additionality_series(world, &project_pairs, table, config.t0, config.t_end)?;
    let l = leakage_series(world, &buffer_pairs, table, config.t0, config.t_end)?;
    let a_final = a.last().map_or(0.0, |v| v.tonnes);
    let l_final = l.last().map_or(0.0, |v| v.tonnes);
    let net = a_final - l_final;

    let al_adj = config.claimed_tonnes.map(|claimed| net.max(0.0) / claimed);
    let price_pact = match (config.price_project, al_adj) {
        (Some(p), Some(adj)) => Some(compute_price(p, adj, ep)?),
        _ => None,
    };

    let (manifest, manifest_digest) = store.build_manifest(
        &ground_truth_bytes(world, table),
        &counterfactual_bytes(config, &matched, &a, &l),
        schedule.to_text().as_bytes(),
        PIPELINE_VERSION,
        config.run_counter,
    )?;

    Ok(EvaluationResult {
        project: config.name.clone(),
        t0: config.t0,
        t_end: config.t_end,
        additionality_final: a_final,
        leakage_final: l_final,
        additionality: a,
        leakage: l,
        ep,
        pact_kg: pact_kg(net, ep),
        claimed_tonnes: config.claimed_tonnes,
        al_adj,
        price_project: config.price_project,
        price_pact,
        project_pixels: world.count(Region::Project),
        buffer_pixels: world.count(Region::LeakageBuffer),
        matched_project: project_pairs.len(),
        matched_buffer: buffer_pairs.len(),
        unmatched_count: matched.unmatched.len(),
        manifest,
        manifest_digest,
    })
}

// ---- project file ----

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProjectFile {
    name: String,
    t0: i32,
    t_end: i32,
    #[serde(default = "default_lookback")]
    lookback: u32,
    #[serde(default = "default_lookback_step")]
    lookback_step: u32,
    #[serde(default = "default_true")]
    with_replacement: bool,
    claimed_tonnes: Option<f64>,
    price_project: Option<f64>,
    #[serde(default)]
    run_counter: u64,
    carbon: CarbonSection,
    schedule: ReleaseSchedule,
    sampling: Option<Sampling>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CarbonSection {
    table: PathBuf,
    #[serde(default = "default_fraction")]
    carbon_fraction: f64,
    pixel_area: f64,
}

fn default_lookback() -> u32 {
    10
}
fn default_lookback_step() -> u32 {
    5
}
fn default_true() -> bool {
    true
}
fn default_fraction() -> f64 {
    DEFAULT_CARBON_FRACTION
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedProject {
    pub config: ProjectConfig,
    pub table: CarbonTable,
    pub schedule: ReleaseSchedule,
}

#[derive(Debug, thiserror::Error)]
pub enum ProjectLoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Table {
        path: PathBuf,
        #[source]
        source: CarbonTableError,
    },
}

/// Reads a project TOML file. The carbon table path is resolved relative
/// to the config file's directory.
pub fn load_project(path: &Path) -> Result<LoadedProject, ProjectLoadError> {
    let io_err = |path: &Path, source| ProjectLoadError::Io {
        path: path.to_path_buf(),
        source,
    };
    let cfg_err = |message: String| ProjectLoadError::Config {
        path: path.to_path_buf(),
        message,
    };
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let file: ProjectFile = toml::from_str(&text).map_err(|e| cfg_err(e.to_string()))?;
    if file.lookback_step == 0 || !file.lookback.is_multiple_of(file.lookback_step) {
        return Err(cfg_err(format!(
            "lookback {} must be a positive multiple of lookback_step {}",
            file.lookback, file.lookback_step
        )));
    }
    let table_path = path.parent().unwrap_or(Path::new(".")).join(&file.carbon.table);
    let table_file = fs::File::open(&table_path).map_err(|e| io_err(&table_path, e))?;
    let table =
        CarbonTable::from_csv(table_file, file.carbon.carbon_fraction, file.carbon.pixel_area).map_err(|source| {
            ProjectLoadError::Table {
                path: table_path.clone(),
                source,
            }
        })?;
    file.schedule.validate().map_err(|e| cfg_err(e.to_string()))?;
    let config = ProjectConfig {
        name: file.name,
        t0: file.t0,
        t_end: file.t_end,
        matching: MatchConfig {
            history_offsets: (0..=file.lookback).step_by(file.lookback_step as usize).collect(),
            with_replacement: file.with_replacement,
            sampling: file.sampling,
        },
        claimed_tonnes: file.claimed_tonnes,
        price_project: file.price_project,
        run_counter: file.run_counter,
    };
    Ok(LoadedProject {
        config,
        table,
        schedule: file.schedule,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::world::{LandUse, PixelRecord};

    #[test]
    fn kg_floor() {
        assert_eq!(pact_kg(15509.7, 0.5), 7_754_850);
        assert_eq!(pact_kg(0.0, 1.0), 0);
        assert_eq!(pact_kg(-3.0, 0.5), 0);
        assert_eq!(pact_kg(f64::NAN, 0.5), 0);
        assert_eq!(pact_kg(1.0, 0.0), 0);
        assert_eq!(pact_kg(0.0019999, 1.0), 1);
    }

    fn flat_world() -> World {
        let pixels = (0..20)
            .map(|i| PixelRecord {
                id: i,
                region: match i % 4 {
                    0 => Region::Project,
                    1 => Region::LeakageBuffer,
                    _ => Region::MatchingArea,
                },
                country: "SL".into(),
                ecoregion: 1,
                elevation: i as f64,
                slope: 1.0,
                settlement_distance: 2.0,
                landuse: vec![LandUse::UndisturbedForest; 16],
            })
            .collect();
        World::new(2000, 2015, pixels).unwrap()
    }

    fn table() -> CarbonTable {
        CarbonTable::new(
            [
                ((1, LandUse::UndisturbedForest), 200.0),
                ((1, LandUse::Deforested), 0.0),
            ]
            .into(),
            0.47,
            0.09,
        )
        .unwrap()
    }

    #[test]
    fn null_world_mints_nothing_and_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let store = ArtifactStore::open(dir.path()).unwrap();
        let mut cfg = ProjectConfig::new("null", 2010, 2015);
        cfg.claimed_tonnes = Some(100.0);
        cfg.price_project = Some(10.0);
        let sched = ReleaseSchedule {
            release_fractions: vec![0.1; 5],
            discount_rate: 0.03,
        };
        let a = evaluate_project(&flat_world(), &cfg, &table(), &sched, &store).unwrap();
        assert_eq!(a.pact_kg, 0);
        assert_eq!(a.al_adj, Some(0.0));
        assert_eq!(a.price_pact, Some(Price::NoFinitePrice));
        assert_eq!(a.matched_project, 5);
        assert_eq!(a.matched_buffer, 5);
        let b = evaluate_project(&flat_world(), &cfg, &table(), &sched, &store).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert!(store.verify(&a.manifest_digest).unwrap().is_ok());

        cfg.run_counter = 1;
        let c = evaluate_project(&flat_world(), &cfg, &table(), &sched, &store).unwrap();
        assert_ne!(c.manifest_digest, a.manifest_digest);
        assert_eq!(c.manifest.ground_truth_hash, a.manifest.ground_truth_hash);
    }

    #[test]
    fn bad_claim_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let store = ArtifactStore::open(dir.path()).unwrap();
        let mut cfg = ProjectConfig::new("x", 2010, 2015);
        cfg.claimed_tonnes = Some(0.0);
        let err = evaluate_project(&flat_world(), &cfg, &table(), &ReleaseSchedule::permanent(), &store).unwrap_err();
        assert_eq!(err, EvaluationError::InvalidClaim(0.0));
    }

    #[test]
    fn loads_project_file() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("agb.csv"), "ecoregion,landuse,agb\n1,1,200\n1,3,0\n").unwrap();
        let cfg_path = dir.path().join("project.toml");
        fs::write(
            &cfg_path,
            r#"
name = "demo"
t0 = 2012
t_end = 2020
lookback = 10
claimed_tonnes = 500.0
price_project = 5.8
run_counter = 3

[carbon]
table = "agb.csv"
pixel_area = 0.09

[schedule]
discount_rate = 0.03
release_fractions = [0.01, 0.02]

[sampling]
seed = 42
max_per_region = 100
"#,
        )
        .unwrap();
        let p = load_project(&cfg_path).unwrap();
        assert_eq!(p.config.matching.history_offsets, vec![0, 5, 10]);
        assert_eq!(p.config.run_counter, 3);
        assert_eq!(p.table.carbon_fraction, 0.47);
        assert_eq!(p.schedule.release_fractions, vec![0.01, 0.02]);
        assert!(p.config.matching.with_replacement);

        fs::write(&cfg_path, "name = \"x\"\nt0 = 1\n").unwrap();
        assert!(matches!(load_project(&cfg_path), Err(ProjectLoadError::Config { .. })));
    }
}
