//! Exhaustive matcher: for each treatment pixel, scan every pixel in the
//! world and keep the closest eligible control.

use std::collections::BTreeSet;

use pact_core::evaluation::{PixelRecord, Region, World};

#[derive(Debug, Clone, PartialEq)]
pub struct OraclePair {
    pub treatment: u64,
    pub control: u64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleMatch {
    pub pairs: Vec<OraclePair>,
    pub unmatched: Vec<u64>,
}

fn class_at(world: &World, p: &PixelRecord, year: i32) -> u8 {
    p.landuse[(year - world.first_year) as usize].code()
}

fn same_key(world: &World, a: &PixelRecord, b: &PixelRecord, t0: i32, offsets: &[u32]) -> bool {
    if a.country != b.country || a.ecoregion != b.ecoregion {
        return false;
    }
    offsets
        .iter()
        .all(|off| class_at(world, a, t0 - *off as i32) == class_at(world, b, t0 - *off as i32))
}

fn spread(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mut mean = 0.0;
    for v in values {
        mean += v;
    }
    mean /= n;
    let mut ss = 0.0;
    for v in values {
        ss += (v - mean) * (v - mean);
    }
    let sd = (ss / n).sqrt();
    if sd > 0.0 {
        sd
    } else {
        1.0
    }
}

pub fn brute_force_match(world: &World, t0: i32, offsets: &[u32], with_replacement: bool) -> OracleMatch {
    let mut ids: Vec<u64> = world.pixels.iter().map(|p| p.id).collect();
    ids.sort();
    let by_id = |id: u64| world.pixels.iter().find(|p| p.id == id).unwrap();

    let control_ids: Vec<u64> = ids
        .iter()
        .copied()
        .filter(|id| by_id(*id).region == Region::MatchingArea)
        .collect();
    let column = |f: fn(&PixelRecord) -> f64| -> Vec<f64> { control_ids.iter().map(|id| f(by_id(*id))).collect() };
    let sd = [
        spread(&column(|p| p.elevation)),
        spread(&column(|p| p.slope)),
        spread(&column(|p| p.settlement_distance)),
    ];

    let mut used = BTreeSet::new();
    let mut pairs = Vec::new();
    let mut unmatched = Vec::new();
    for &tid in &ids {
        let t = by_id(tid);
        if !matches!(t.region, Region::Project | Region::LeakageBuffer) {
            continue;
        }
        let mut best: Option<(f64, u64)> = None;
        for &cid in &control_ids {
            let c = by_id(cid);
            if !same_key(world, t, c, t0, offsets) || (!with_replacement && used.contains(&cid)) {
                continue;
            }
            let de = (t.elevation - c.elevation) / sd[0];
            let ds = (t.slope - c.slope) / sd[1];
            let dd = (t.settlement_distance - c.settlement_distance) / sd[2];
            let dist = (de * de + ds * ds + dd * dd).sqrt();
            let better = match best {
                None => true,
                Some((bd, bid)) => dist < bd || (dist == bd && cid < bid),
            };
            if better {
                best = Some((dist, cid));
            }
        }
        match best {
            Some((distance, control)) => {
                if !with_replacement {
                    used.insert(control);
                }
                pairs.push(OraclePair {
                    treatment: tid,
                    control,
                    distance,
                });
            }
            None => unmatched.push(tid),
        }
    }
    OracleMatch { pairs, unmatched }
}
