//! Difference-in-differences over matched pairs.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::carbon::{carbon_stock, CarbonTable};
use super::matching::MatchedPair;
use super::world::{PixelRecord, World};
use super::EvaluationError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YearValue {
    pub year: i32,
    /// tonnes CO2e
    pub tonnes: f64,
}

fn check_window(world: &World, t0: i32, t_end: i32) -> Result<(), EvaluationError> {
    for year in [t0, t_end] {
        if !world.covers(year) {
            return Err(EvaluationError::YearOutOfRange {
                year,
                first: world.first_year,
                last: world.last_year,
            });
        }
    }
    if t_end < t0 {
        return Err(EvaluationError::EmptyWindow { t0, t_end });
    }
    Ok(())
}

/// Σ over pairs of (treatment change since t0) − (control change since t0),
/// for each year in t0..=t_end.
pub fn did_series(
    world: &World,
    pairs: &[MatchedPair],
    table: &CarbonTable,
    t0: i32,
    t_end: i32,
) -> Result<Vec<YearValue>, EvaluationError> {
    check_window(world, t0, t_end)?;
    let by_id: HashMap<u64, &PixelRecord> = world.pixels.iter().map(|p| (p.id, p)).collect();
    let lookup = |id: u64| by_id.get(&id).copied().ok_or(EvaluationError::UnknownPixel(id));
    let change = |pixel: &PixelRecord, year: i32| -> Result<f64, EvaluationError> {
        Ok(carbon_stock(world, pixel, year, table)? - carbon_stock(world, pixel, t0, table)?)
    };
    (t0..=t_end)
        .map(|year| {
            let mut total = 0.0;
            for pair in pairs {
                total += change(lookup(pair.treatment)?, year)? - change(lookup(pair.control)?, year)?;
            }
            Ok(YearValue { year, tonnes: total })
        })
        .collect()
}

/// A(t). Positive when controls lose more carbon than the project.
pub fn additionality_series(
    world: &World,
    project_pairs: &[MatchedPair],
    table: &CarbonTable,
    t0: i32,
    t_end: i32,
) -> Result<Vec<YearValue>, EvaluationError> {
    if project_pairs.is_empty() {
        return Err(EvaluationError::NoProjectPairs);
    }
    did_series(world, project_pairs, table, t0, t_end)
}

/// L(t): excess buffer loss relative to its counterfactual. Buffer
/// out-performance clamps to zero.
pub fn leakage_series(
    world: &World,
    buffer_pairs: &[MatchedPair],
    table: &CarbonTable,
    t0: i32,
    t_end: i32,
) -> Result<Vec<YearValue>, EvaluationError> {
    Ok(did_series(world, buffer_pairs, table, t0, t_end)?
        .into_iter()
        .map(|v| YearValue {
            year: v.year,
            tonnes: if v.tonnes < 0.0 { -v.tonnes } else { 0.0 },
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::world::{LandUse, Region};
    use LandUse::*;

    const T0: i32 = 2010;

    fn table() -> CarbonTable {
        CarbonTable::new(
            [((1, UndisturbedForest), 100.0), ((1, Deforested), 0.0)].into(),
            0.47,
            1.0,
        )
        .unwrap()
    }

    fn px(id: u64, region: Region, series: Vec<LandUse>) -> PixelRecord {
        PixelRecord {
            id,
            region,
            country: "SL".into(),
            ecoregion: 1,
            elevation: 0.0,
            slope: 0.0,
            settlement_distance: 0.0,
            landuse: series,
        }
    }

    fn pair(t: u64, c: u64, region: Region) -> MatchedPair {
        MatchedPair {
            treatment: t,
            treatment_region: region,
            control: c,
            covariate_distance: 0.0,
        }
    }

    /// 2008..=2012, flipping to deforested from t0+1 when `loses`
    fn series(loses: bool) -> Vec<LandUse> {
        (2008..=2012)
            .map(|y| if loses && y > T0 { Deforested } else { UndisturbedForest })
            .collect()
    }

    #[test]
    fn identical_series_give_zero() {
        let w = World::new(
            2008,
            2012,
            vec![
                px(1, Region::Project, series(true)),
                px(2, Region::MatchingArea, series(true)),
            ],
        )
        .unwrap();
        let a = additionality_series(&w, &[pair(1, 2, Region::Project)], &table(), T0, 2012).unwrap();
        assert_eq!(a.len(), 3);
        assert!(a.iter().all(|v| v.tonnes == 0.0));
    }

    #[test]
    fn controls_lose_project_keeps() {
        let mut pixels = vec![];
        let mut pairs = vec![];
        for i in 0..100 {
            pixels.push(px(i, Region::Project, series(false)));
            pixels.push(px(1000 + i, Region::MatchingArea, series(true)));
            pairs.push(pair(i, 1000 + i, Region::Project));
        }
        let w = World::new(2008, 2012, pixels).unwrap();
        let a = additionality_series(&w, &pairs, &table(), T0, 2012).unwrap();
        assert_eq!(a[0], YearValue { year: T0, tonnes: 0.0 });
        // 100 pixels x 517/3 t each
        assert!((a[1].tonnes - 51700.0 / 3.0).abs() < 1e-6);
        assert!((a[1].tonnes - 17233.0).abs() < 0.5);
        assert_eq!(a[1].tonnes, a[2].tonnes);
    }

    #[test]
    fn leakage_clamps_and_counts_losses() {
        let mut pixels = vec![
            px(500, Region::MatchingArea, series(false)),
            px(501, Region::MatchingArea, series(true)),
        ];
        let mut losing = vec![];
        for i in 0..10 {
            pixels.push(px(i, Region::LeakageBuffer, series(true)));
            losing.push(pair(i, 500, Region::LeakageBuffer));
        }
        pixels.push(px(99, Region::LeakageBuffer, series(false)));
        let w = World::new(2008, 2012, pixels).unwrap();

        let l = leakage_series(&w, &losing, &table(), T0, 2012).unwrap();
        assert_eq!(l[0].tonnes, 0.0);
        assert!((l[1].tonnes - 5170.0 / 3.0).abs() < 1e-9);
        assert!((l[1].tonnes - 1723.3).abs() < 0.05);

        // buffer did better than its counterfactual
        let better = [pair(99, 501, Region::LeakageBuffer)];
        let d = did_series(&w, &better, &table(), T0, 2012).unwrap();
        assert!(d[1].tonnes > 0.0);
        let l = leakage_series(&w, &better, &table(), T0, 2012).unwrap();
        assert!(l.iter().all(|v| v.tonnes == 0.0 && v.tonnes.is_sign_positive()));

        let l = leakage_series(&w, &[], &table(), T0, 2012).unwrap();
        assert!(l.iter().all(|v| v.tonnes == 0.0));
        assert_eq!(
            additionality_series(&w, &[], &table(), T0, 2012).unwrap_err(),
            EvaluationError::NoProjectPairs
        );
    }
}
