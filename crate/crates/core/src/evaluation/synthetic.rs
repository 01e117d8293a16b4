//! Seeded synthetic worlds: a forest landscape with a protected project
//! block, a leakage buffer around it and a surrounding matching area.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::carbon::{CarbonTable, DEFAULT_CARBON_FRACTION};
use super::world::{LandUse, PixelRecord, Region, World};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub width: u32,
    pub height: u32,
    pub first_year: i32,
    pub last_year: i32,
    pub t0: i32,
    /// annual probability, forest to deforested, far from settlements
    pub deforestation: f64,
    /// annual probability, undisturbed to degraded
    pub degradation: f64,
    pub regrowth: f64,
    /// rate multiplier inside the project from t0 on
    pub project_effect: f64,
    /// rate multiplier in the buffer from t0 on
    pub buffer_effect: f64,
}

impl SyntheticSpec {
    /// West-African lowland forest landscape used by the bundled demo.
    pub fn demo() -> Self {
        SyntheticSpec {
            seed: 2012,
            width: 48,
            height: 48,
            first_year: 2000,
            last_year: 2021,
            t0: 2012,
            deforestation: 0.015,
            degradation: 0.02,
            regrowth: 0.05,
            project_effect: 0.2,
            buffer_effect: 1.4,
        }
    }
}

fn region_of(x: u32, y: u32, w: u32, h: u32) -> Region {
    if x == 0 || y == 0 || x == w - 1 || y == h - 1 {
        return Region::Excluded;
    }
    let (cx0, cx1) = (w * 3 / 8, w * 5 / 8);
    let (cy0, cy1) = (h * 3 / 8, h * 5 / 8);
    if (cx0..cx1).contains(&x) && (cy0..cy1).contains(&y) {
        return Region::Project;
    }
    let ring = 2;
    if (cx0.saturating_sub(ring)..cx1 + ring).contains(&x) && (cy0.saturating_sub(ring)..cy1 + ring).contains(&y) {
        return Region::LeakageBuffer;
    }
    Region::MatchingArea
}

pub fn generate_world(spec: &SyntheticSpec) -> World {
    assert!(spec.first_year <= spec.t0 && spec.t0 <= spec.last_year);
    assert!(spec.width >= 3 && spec.height >= 3);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (w, h) = (spec.width, spec.height);
    let years = (spec.last_year - spec.first_year + 1) as usize;
    let mut pixels = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        for x in 0..w {
            let region = region_of(x, y, w, h);
            let country = if x * 100 >= w * 85 { "LR" } else { "SL" };
            let ecoregion = if y * 2 < h { 1 } else { 2 };
            let (fx, fy) = (x as f64 / w as f64, y as f64 / h as f64);
            let elevation = (80.0 + 420.0 * fx + 120.0 * fy + rng.random_range(-25.0..25.0)).round();
            let slope = (2.0 + 14.0 * fx * fy + rng.random_range(0.0..4.0) * 10.0).round() / 10.0;
            // settlement at the south-west corner, 300 m pixels
            let settlement_distance =
                ((x as f64).hypot(y as f64) * 0.3 + rng.random_range(0.0..1.0) * 100.0).round() / 100.0;
            // pressure falls off with distance from the settlement
            let pressure = 1.5 / (1.0 + settlement_distance / 6.0);

            let draw: f64 = rng.random();
            let mut current = if draw < 0.03 {
                LandUse::Water
            } else if draw < 0.05 {
                LandUse::Other
            } else if draw < 0.82 {
                LandUse::UndisturbedForest
            } else if draw < 0.94 {
                LandUse::DegradedForest
            } else {
                LandUse::Deforested
            };
            let mut landuse = Vec::with_capacity(years);
            landuse.push(current);
            for year in spec.first_year + 1..=spec.last_year {
                let effect = match region {
                    Region::Project if year > spec.t0 => spec.project_effect,
                    Region::LeakageBuffer if year > spec.t0 => spec.buffer_effect,
                    _ => 1.0,
                };
                let def = (spec.deforestation * pressure * effect).min(1.0);
                let deg = (spec.degradation * pressure * effect).min(1.0);
                let u: f64 = rng.random();
                current = match current {
                    LandUse::UndisturbedForest if u < def => LandUse::Deforested,
                    LandUse::UndisturbedForest if u < def + deg => LandUse::DegradedForest,
                    LandUse::DegradedForest if u < (1.5 * def).min(1.0) => LandUse::Deforested,
                    LandUse::Regrowth if u < def => LandUse::Deforested,
                    LandUse::Deforested if u < spec.regrowth => LandUse::Regrowth,
                    other => other,
                };
                landuse.push(current);
            }
            pixels.push(PixelRecord {
                id: u64::from(y * w + x + 1),
                region,
                country: country.to_string(),
                ecoregion,
                elevation,
                slope,
                settlement_distance,
                landuse,
            });
        }
    }
    World::new(spec.first_year, spec.last_year, pixels).expect("generator emits a valid world")
}

/// Densities (t dry matter / ha) for the demo's two ecoregions; 300 m
/// pixels.
pub fn demo_carbon_table() -> CarbonTable {
    let mut densities = BTreeMap::new();
    for (eco, undisturbed, degraded, regrowth) in [(1, 310.0, 190.0, 85.0), (2, 280.0, 170.0, 75.0)] {
        densities.insert((eco, LandUse::UndisturbedForest), undisturbed);
        densities.insert((eco, LandUse::DegradedForest), degraded);
        densities.insert((eco, LandUse::Deforested), 0.0);
        densities.insert((eco, LandUse::Regrowth), regrowth);
        densities.insert((eco, LandUse::Water), 0.0);
        densities.insert((eco, LandUse::Other), 12.0);
    }
    CarbonTable::new(densities, DEFAULT_CARBON_FRACTION, 9.0).expect("demo table is valid")
}
