//! Counterfactual pixel matching.
//!
//! Every project and leakage-buffer pixel is paired with a matching-area
//! pixel that agrees exactly on country, ecoregion and land-use history, and
//! is nearest on the standardized physical covariates among those.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::world::{LandUse, PixelRecord, Region, World};
use super::EvaluationError;

/// Random subsampling of treatment pixels, per region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sampling {
    pub seed: u64,
    pub max_per_region: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchConfig {
    /// Years before t0 at which land use must agree. Must include the
    /// longest lookback the world is required to cover.
    pub history_offsets: Vec<u32>,
    pub with_replacement: bool,
    pub sampling: Option<Sampling>,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            history_offsets: vec![0, 5, 10],
            with_replacement: true,
            sampling: None,
        }
    }
}

impl MatchConfig {
    pub fn lookback(&self) -> u32 {
        self.history_offsets.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub treatment: u64,
    pub treatment_region: Region,
    pub control: u64,
    pub covariate_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// Sorted by treatment id.
    pub pairs: Vec<MatchedPair>,
    /// Treatment ids with no exact-key candidate, ascending.
    pub unmatched: Vec<u64>,
    /// Divisors applied to elevation, slope and settlement distance.
    pub scales: [f64; 3],
}

impl MatchResult {
    pub fn pairs_in(&self, region: Region) -> impl Iterator<Item = &MatchedPair> {
        self.pairs.iter().filter(move |p| p.treatment_region == region)
    }
}

type ExactKey<'a> = (&'a str, u32, Vec<LandUse>);

fn exact_key<'a>(world: &World, pixel: &'a PixelRecord, t0: i32, offsets: &[u32]) -> ExactKey<'a> {
    let history = offsets
        .iter()
        .map(|off| {
            world
                .landuse(pixel, t0 - *off as i32)
                .expect("history coverage checked before matching")
        })
        .collect();
    (pixel.country.as_str(), pixel.ecoregion, history)
}

/// Population standard deviation of each covariate over `pixels`; a
/// degenerate spread falls back to 1 so the covariate still contributes
/// in raw units.
pub fn covariate_scales<'a>(pixels: impl Iterator<Item = &'a PixelRecord> + Clone) -> [f64; 3] {
    let n = pixels.clone().count() as f64;
    let mut scales = [1.0; 3];
    if n == 0.0 {
        return scales;
    }
    for (k, scale) in scales.iter_mut().enumerate() {
        let mean = pixels.clone().map(|p| p.covariates()[k]).sum::<f64>() / n;
        let var = pixels
            .clone()
            .map(|p| {
                let d = p.covariates()[k] - mean;
                d * d
            })
            .sum::<f64>()
            / n;
        let sd = var.sqrt();
        if sd.is_finite() && sd > 0.0 {
            *scale = sd;
        }
    }
    scales
}

pub fn standardized_distance(a: &PixelRecord, b: &PixelRecord, scales: &[f64; 3]) -> f64 {
    let (ca, cb) = (a.covariates(), b.covariates());
    (0..3)
        .map(|k| {
            let d = (ca[k] - cb[k]) / scales[k];
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

fn sample_treatments(mut treatments: Vec<&PixelRecord>, sampling: Option<Sampling>) -> Vec<&PixelRecord> {
    let Some(s) = sampling else {
        return treatments;
    };
    if treatments.len() <= s.max_per_region {
        return treatments;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut keep: Vec<usize> = rand::seq::index::sample(&mut rng, treatments.len(), s.max_per_region).into_vec();
    keep.sort_unstable();
    treatments = keep.into_iter().map(|i| treatments[i]).collect();
    treatments
}

pub fn match_pixels(world: &World, t0: i32, config: &MatchConfig) -> Result<MatchResult, EvaluationError> {
    if !world.covers(t0) {
        return Err(EvaluationError::YearOutOfRange {
            year: t0,
            first: world.first_year,
            last: world.last_year,
        });
    }
    let lookback = config.lookback();
    if t0 - (lookback as i32) < world.first_year {
        return Err(EvaluationError::InsufficientHistory {
            required_from: t0 - lookback as i32,
            available_from: world.first_year,
        });
    }
    if world.count(Region::Project) == 0 {
        return Err(EvaluationError::NoProjectPixels);
    }
    let mut controls: Vec<&PixelRecord> = world.in_region(Region::MatchingArea).collect();
    if controls.is_empty() {
        return Err(EvaluationError::EmptyMatchingArea);
    }
    controls.sort_by_key(|p| p.id);
    let scales = covariate_scales(controls.iter().copied());

    let mut buckets: BTreeMap<ExactKey, Vec<&PixelRecord>> = BTreeMap::new();
    for c in &controls {
        buckets
            .entry(exact_key(world, c, t0, &config.history_offsets))
            .or_default()
            .push(c);
    }

    let mut treatments = Vec::new();
    for (i, region) in [Region::Project, Region::LeakageBuffer].into_iter().enumerate() {
        let mut in_region: Vec<&PixelRecord> = world.in_region(region).collect();
        in_region.sort_by_key(|p| p.id);
        let sampling = config.sampling.map(|s| Sampling {
            seed: s.seed.wrapping_add(i as u64),
            ..s
        });
        treatments.extend(sample_treatments(in_region, sampling));
    }
    treatments.sort_by_key(|p| p.id);

    let mut used: BTreeSet<u64> = BTreeSet::new();
    let mut pairs = Vec::new();
    let mut unmatched = Vec::new();
    for t in treatments {
        let key = exact_key(world, t, t0, &config.history_offsets);
        let mut best: Option<(&PixelRecord, f64)> = None;
        for c in buckets.get(&key).into_iter().flatten() {
            if !config.with_replacement && used.contains(&c.id) {
                continue;
            }
            let d = standardized_distance(t, c, &scales);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((c, d));
            }
        }
        match best {
            Some((c, d)) => {
                if !config.with_replacement {
                    used.insert(c.id);
                }
                pairs.push(MatchedPair {
                    treatment: t.id,
                    treatment_region: t.region,
                    control: c.id,
                    covariate_distance: d,
                });
            }
            None => unmatched.push(t.id),
        }
    }
    Ok(MatchResult {
        pairs,
        unmatched,
        scales,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use LandUse::*;

    fn px(id: u64, region: Region, eco: u32, cov: [f64; 3], lu: LandUse) -> PixelRecord {
        PixelRecord {
            id,
            region,
            country: "SL".into(),
            ecoregion: eco,
            elevation: cov[0],
            slope: cov[1],
            settlement_distance: cov[2],
            landuse: vec![lu; 11],
        }
    }

    fn world(pixels: Vec<PixelRecord>) -> World {
        World::new(2000, 2010, pixels).unwrap()
    }

    #[test]
    fn forced_match_ignores_distance() {
        let w = world(vec![
            px(1, Region::Project, 1, [0.0, 0.0, 0.0], UndisturbedForest),
            px(2, Region::Project, 2, [0.0, 0.0, 0.0], UndisturbedForest),
            px(10, Region::MatchingArea, 1, [900.0, 40.0, 30.0], UndisturbedForest),
            px(11, Region::MatchingArea, 2, [800.0, 30.0, 20.0], UndisturbedForest),
            px(12, Region::MatchingArea, 1, [0.0, 0.0, 0.0], DegradedForest),
        ]);
        let r = match_pixels(&w, 2010, &MatchConfig::default()).unwrap();
        let got: Vec<_> = r.pairs.iter().map(|p| (p.treatment, p.control)).collect();
        assert_eq!(got, vec![(1, 10), (2, 11)]);
        assert!(r.unmatched.is_empty());
    }

    #[test]
    fn no_candidate_is_unmatched() {
        let w = world(vec![
            px(1, Region::Project, 1, [0.0; 3], UndisturbedForest),
            px(2, Region::LeakageBuffer, 9, [0.0; 3], UndisturbedForest),
            px(10, Region::MatchingArea, 1, [1.0; 3], UndisturbedForest),
        ]);
        let r = match_pixels(&w, 2010, &MatchConfig::default()).unwrap();
        assert_eq!(r.pairs.len(), 1);
        assert_eq!(r.unmatched, vec![2]);
    }

    #[test]
    fn nearest_then_lowest_id() {
        let w = world(vec![
            px(1, Region::Project, 1, [5.0, 0.0, 0.0], UndisturbedForest),
            px(20, Region::MatchingArea, 1, [6.0, 0.0, 0.0], UndisturbedForest),
            px(21, Region::MatchingArea, 1, [4.0, 0.0, 0.0], UndisturbedForest),
            px(22, Region::MatchingArea, 1, [9.0, 0.0, 0.0], UndisturbedForest),
        ]);
        let r = match_pixels(&w, 2010, &MatchConfig::default()).unwrap();
        assert_eq!(r.pairs[0].control, 20);
        // controls' elevation sd is sqrt(38/9); other covariates fall back to 1
        assert!((r.scales[0] - (38.0f64 / 9.0).sqrt()).abs() < 1e-12);
        assert_eq!(&r.scales[1..], &[1.0, 1.0]);
        assert!((r.pairs[0].covariate_distance - 1.0 / r.scales[0]).abs() < 1e-12);
    }

    #[test]
    fn without_replacement_consumes_controls() {
        let w = world(vec![
            px(1, Region::Project, 1, [0.0; 3], UndisturbedForest),
            px(2, Region::Project, 1, [0.0; 3], UndisturbedForest),
            px(3, Region::Project, 1, [0.0; 3], UndisturbedForest),
            px(10, Region::MatchingArea, 1, [0.0; 3], UndisturbedForest),
            px(11, Region::MatchingArea, 1, [1.0; 3], UndisturbedForest),
        ]);
        let mut cfg = MatchConfig::default();
        let r = match_pixels(&w, 2010, &cfg).unwrap();
        assert!(r.pairs.iter().all(|p| p.control == 10));
        cfg.with_replacement = false;
        let r = match_pixels(&w, 2010, &cfg).unwrap();
        let got: Vec<_> = r.pairs.iter().map(|p| (p.treatment, p.control)).collect();
        assert_eq!(got, vec![(1, 10), (2, 11)]);
        assert_eq!(r.unmatched, vec![3]);
    }

    #[test]
    fn history_must_agree() {
        let mut t = px(1, Region::Project, 1, [0.0; 3], UndisturbedForest);
        t.landuse[0] = DegradedForest; // 2000 = t0 - 10
        let w = world(vec![t, px(10, Region::MatchingArea, 1, [0.0; 3], UndisturbedForest)]);
        let r = match_pixels(&w, 2010, &MatchConfig::default()).unwrap();
        assert_eq!(r.unmatched, vec![1]);
        let cfg = MatchConfig {
            history_offsets: vec![0, 5],
            ..MatchConfig::default()
        };
        assert_eq!(match_pixels(&w, 2010, &cfg).unwrap().pairs.len(), 1);
    }

    #[test]
    fn errors() {
        let w = world(vec![
            px(1, Region::Project, 1, [0.0; 3], UndisturbedForest),
            px(10, Region::MatchingArea, 1, [0.0; 3], UndisturbedForest),
        ]);
        assert_eq!(
            match_pixels(&w, 2009, &MatchConfig::default()).unwrap_err(),
            EvaluationError::InsufficientHistory {
                required_from: 1999,
                available_from: 2000
            }
        );
        assert!(matches!(
            match_pixels(&w, 2011, &MatchConfig::default()),
            Err(EvaluationError::YearOutOfRange { .. })
        ));
        let w = world(vec![px(1, Region::Project, 1, [0.0; 3], UndisturbedForest)]);
        assert_eq!(
            match_pixels(&w, 2010, &MatchConfig::default()).unwrap_err(),
            EvaluationError::EmptyMatchingArea
        );
        let w = world(vec![px(1, Region::MatchingArea, 1, [0.0; 3], UndisturbedForest)]);
        assert_eq!(
            match_pixels(&w, 2010, &MatchConfig::default()).unwrap_err(),
            EvaluationError::NoProjectPixels
        );
    }

    #[test]
    fn sampling_is_seeded() {
        let mut pixels: Vec<_> = (0..50)
            .map(|i| px(i, Region::Project, 1, [i as f64, 0.0, 0.0], UndisturbedForest))
            .collect();
        pixels.push(px(100, Region::MatchingArea, 1, [0.0; 3], UndisturbedForest));
        let w = world(pixels);
        let cfg = MatchConfig {
            sampling: Some(Sampling {
                seed: 7,
                max_per_region: 10,
            }),
            ..MatchConfig::default()
        };
        let a = match_pixels(&w, 2010, &cfg).unwrap();
        let b = match_pixels(&w, 2010, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.pairs.len(), 10);
        assert!(a.pairs.windows(2).all(|p| p[0].treatment < p[1].treatment));
    }
}
