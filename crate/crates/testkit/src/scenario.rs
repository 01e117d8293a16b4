//! The integration scenario: 100 project pixels kept intact while their
//! controls are cleared one year after t0, and 10 buffer pixels cleared
//! while their controls stay intact.

use std::collections::BTreeMap;

use pact_core::evaluation::{CarbonTable, LandUse, PixelRecord, ProjectConfig, Region, ReleaseSchedule, World};

use crate::match_oracle::brute_force_match;

pub const T0: i32 = 2010;
pub const T_END: i32 = 2011;
/// Forest stock per pixel, in hundredths of a tonne CO2e.
pub const FOREST_CENTI_TONNES: i64 = 17_233;
pub const PROJECT_PIXELS: u64 = 100;
pub const BUFFER_PIXELS: u64 = 10;

pub struct Scenario {
    pub world: World,
    pub table: CarbonTable,
    pub schedule: ReleaseSchedule,
    pub config: ProjectConfig,
}

fn pixel(id: u64, region: Region, ecoregion: u32, cleared_after_t0: bool) -> PixelRecord {
    let landuse = (2000..=T_END)
        .map(|y| {
            if cleared_after_t0 && y > T0 {
                LandUse::Deforested
            } else {
                LandUse::UndisturbedForest
            }
        })
        .collect();
    PixelRecord {
        id,
        region,
        country: "SL".into(),
        ecoregion,
        elevation: 100.0 + (id % 17) as f64,
        slope: (id % 5) as f64,
        settlement_distance: (id % 7) as f64 * 0.5,
        landuse,
    }
}

pub fn build() -> Scenario {
    let mut pixels = Vec::new();
    for i in 0..PROJECT_PIXELS {
        pixels.push(pixel(1 + i, Region::Project, 1, false));
        pixels.push(pixel(1001 + i, Region::MatchingArea, 1, true));
    }
    for i in 0..BUFFER_PIXELS {
        pixels.push(pixel(201 + i, Region::LeakageBuffer, 2, true));
        pixels.push(pixel(2001 + i, Region::MatchingArea, 2, false));
    }
    pixels.sort_by_key(|p| p.id);
    let world = World::new(2000, T_END, pixels).expect("valid world");

    // density chosen so one pixel holds 172.33 t CO2e at 1 ha
    let density = 172.33 / (0.47 * 44.0 / 12.0);
    let mut densities = BTreeMap::new();
    for eco in 1..=2 {
        densities.insert((eco, LandUse::UndisturbedForest), density);
        densities.insert((eco, LandUse::Deforested), 0.0);
    }
    let table = CarbonTable::new(densities, 0.47, 1.0).expect("valid table");
    let schedule = ReleaseSchedule {
        release_fractions: vec![0.5],
        discount_rate: 0.0,
    };
    let config = ProjectConfig::new("integration scenario", T0, T_END);
    Scenario {
        world,
        table,
        schedule,
        config,
    }
}

/// Exact expectation in integer arithmetic: (A, L) in hundredths of a
/// tonne and the mintable kg, with eP = 1/2.
pub struct Expected {
    pub additionality_centi: i64,
    pub leakage_centi: i64,
    pub pact_kg: i64,
}

fn centi(class: LandUse) -> i64 {
    match class {
        LandUse::UndisturbedForest => FOREST_CENTI_TONNES,
        _ => 0,
    }
}

pub fn expected(s: &Scenario) -> Expected {
    let w = &s.world;
    let m = brute_force_match(w, T0, &[0, 5, 10], true);
    let find = |id: u64| w.pixels.iter().find(|p| p.id == id).unwrap();
    let at = |id: u64, year: i32| centi(find(id).landuse[(year - w.first_year) as usize]);
    let (mut a, mut buffer) = (0i64, 0i64);
    for p in &m.pairs {
        let did = (at(p.treatment, T_END) - at(p.treatment, T0)) - (at(p.control, T_END) - at(p.control, T0));
        match find(p.treatment).region {
            Region::Project => a += did,
            _ => buffer += did,
        }
    }
    let l = (-buffer).max(0);
    // centi-tonnes x 10 kg, times eP = 1/2
    let pact_kg = ((a - l) * 10 / 2).max(0);
    Expected {
        additionality_centi: a,
        leakage_centi: l,
        pact_kg,
    }
}
