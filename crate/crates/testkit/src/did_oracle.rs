//! Per-pixel recomputation of the difference-in-differences sums.

use pact_core::evaluation::{CarbonTable, World};

fn stock(world: &World, table: &CarbonTable, id: u64, year: i32) -> f64 {
    let p = world.pixels.iter().find(|p| p.id == id).expect("pair pixel exists");
    let class = p.landuse[(year - world.first_year) as usize];
    let agb = table.densities[&(p.ecoregion, class)];
    agb * table.pixel_area * table.carbon_fraction * table.co2_per_carbon
}

/// Σ over (treatment, control) of the change-since-t0 difference, one value
/// per year t0..=t_end.
pub fn brute_force_did(world: &World, pairs: &[(u64, u64)], table: &CarbonTable, t0: i32, t_end: i32) -> Vec<f64> {
    (t0..=t_end)
        .map(|year| {
            let mut total = 0.0;
            for &(t, c) in pairs {
                let treat = stock(world, table, t, year) - stock(world, table, t, t0);
                let ctrl = stock(world, table, c, year) - stock(world, table, c, t0);
                total += treat - ctrl;
            }
            total
        })
        .collect()
}

/// Leakage from a buffer DiD: losses only.
pub fn clamp_leakage(did: &[f64]) -> Vec<f64> {
    did.iter().map(|v| if *v < 0.0 { -v } else { 0.0 }).collect()
}
