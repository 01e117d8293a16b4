//! Small random worlds built to provoke exact-key collisions and distance
//! ties.

use pact_core::evaluation::{CarbonTable, LandUse, PixelRecord, Region, World};
use rand::Rng;

pub const FIRST_YEAR: i32 = 2000;
pub const LAST_YEAR: i32 = 2020;
pub const T0: i32 = 2012;

/// A `width` x `height` world with randomly assigned regions, discrete
/// covariates and land-use series drawn from a handful of trajectories.
pub fn random_world(rng: &mut impl Rng, width: u32, height: u32) -> World {
    let years = (LAST_YEAR - FIRST_YEAR + 1) as usize;
    let mut pixels = Vec::new();
    let mut has_project = false;
    let mut has_control = false;
    for i in 0..width * height {
        let region = match rng.random_range(0..10) {
            0..=1 => Region::Project,
            2 => Region::LeakageBuffer,
            3 => Region::Excluded,
            _ => Region::MatchingArea,
        };
        has_project |= region == Region::Project;
        has_control |= region == Region::MatchingArea;
        let start = if rng.random_bool(0.8) {
            LandUse::UndisturbedForest
        } else {
            LandUse::ALL[rng.random_range(0..6)]
        };
        let mut landuse = vec![start; years];
        // at most two change points
        for _ in 0..rng.random_range(0..3) {
            let at = rng.random_range(1..years);
            let class = LandUse::ALL[rng.random_range(0..4)];
            for slot in &mut landuse[at..] {
                *slot = class;
            }
        }
        pixels.push(PixelRecord {
            id: u64::from(i) + 1,
            region,
            country: if rng.random_bool(0.85) { "SL" } else { "LR" }.to_string(),
            ecoregion: rng.random_range(1..=2),
            elevation: f64::from(rng.random_range(0..6)) * 50.0,
            slope: f64::from(rng.random_range(0..4)) * 2.5,
            settlement_distance: f64::from(rng.random_range(0..5)),
            landuse,
        });
    }
    if !has_project {
        pixels[0].region = Region::Project;
    }
    if !has_control {
        let last = pixels.len() - 1;
        pixels[last].region = Region::MatchingArea;
    }
    World::new(FIRST_YEAR, LAST_YEAR, pixels).expect("valid world")
}

/// Densities for every class in ecoregions 1 and 2.
pub fn full_table(rng: &mut impl Rng) -> CarbonTable {
    let mut densities = std::collections::BTreeMap::new();
    for eco in 1..=2 {
        let undisturbed = rng.random_range(200.0..400.0);
        densities.insert((eco, LandUse::UndisturbedForest), undisturbed);
        densities.insert((eco, LandUse::DegradedForest), undisturbed * rng.random_range(0.4..0.8));
        densities.insert((eco, LandUse::Deforested), rng.random_range(0.0..5.0));
        densities.insert((eco, LandUse::Regrowth), rng.random_range(20.0..100.0));
        densities.insert((eco, LandUse::Water), 0.0);
        densities.insert((eco, LandUse::Other), rng.random_range(0.0..20.0));
    }
    CarbonTable::new(densities, 0.47, rng.random_range(0.05..1.0)).expect("valid table")
}
