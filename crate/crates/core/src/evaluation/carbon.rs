//! Above-ground biomass lookup and per-pixel carbon stock.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::world::{LandUse, PixelRecord, World};
use super::EvaluationError;

pub const DEFAULT_CARBON_FRACTION: f64 = 0.47;
/// Mass ratio CO2 : C.
pub const CO2_PER_CARBON: f64 = 44.0 / 12.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarbonTable {
    /// tonnes dry matter per hectare, keyed by (ecoregion, class)
    #[serde(with = "crate::address::entries")]
    pub densities: BTreeMap<(u32, LandUse), f64>,
    pub carbon_fraction: f64,
    /// hectares
    pub pixel_area: f64,
    pub co2_per_carbon: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CarbonTableError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("density for ecoregion {ecoregion} class {class} must be finite and >= 0, got {value}")]
    BadDensity { ecoregion: u32, class: LandUse, value: f64 },
    #[error("ecoregion {ecoregion}: deforested density {deforested} is not below {class} density {forest}")]
    DeforestedNotLower {
        ecoregion: u32,
        class: LandUse,
        deforested: f64,
        forest: f64,
    },
    #[error("{name} must be finite and > 0, got {value}")]
    BadConstant { name: &'static str, value: f64 },
}

impl CarbonTable {
    pub fn new(
        densities: BTreeMap<(u32, LandUse), f64>,
        carbon_fraction: f64,
        pixel_area: f64,
    ) -> Result<Self, CarbonTableError> {
        let table = CarbonTable {
            densities,
            carbon_fraction,
            pixel_area,
            co2_per_carbon: CO2_PER_CARBON,
        };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<(), CarbonTableError> {
        for (name, value) in [
            ("carbon_fraction", self.carbon_fraction),
            ("pixel_area", self.pixel_area),
            ("co2_per_carbon", self.co2_per_carbon),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(CarbonTableError::BadConstant { name, value });
            }
        }
        for (&(ecoregion, class), &value) in &self.densities {
            if !(value.is_finite() && value >= 0.0) {
                return Err(CarbonTableError::BadDensity {
                    ecoregion,
                    class,
                    value,
                });
            }
        }
        for (&(ecoregion, class), &forest) in &self.densities {
            if !class.is_forest() {
                continue;
            }
            if let Some(&deforested) = self.densities.get(&(ecoregion, LandUse::Deforested)) {
                if deforested >= forest {
                    return Err(CarbonTableError::DeforestedNotLower {
                        ecoregion,
                        class,
                        deforested,
                        forest,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn density(&self, ecoregion: u32, class: LandUse) -> Option<f64> {
        self.densities.get(&(ecoregion, class)).copied()
    }

    /// Reads `ecoregion,landuse,agb` rows (landuse as class code).
    pub fn from_csv(reader: impl Read, carbon_fraction: f64, pixel_area: f64) -> Result<Self, CarbonTableError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let parse_err = |line: u64, message: String| CarbonTableError::Parse { line, message };
        let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?;
        if headers.iter().collect::<Vec<_>>() != ["ecoregion", "landuse", "agb"] {
            return Err(parse_err(1, "expected header ecoregion,landuse,agb".into()));
        }
        let mut densities = BTreeMap::new();
        for record in rdr.records() {
            let record = record.map_err(|e| parse_err(e.position().map(|p| p.line()).unwrap_or(0), e.to_string()))?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let ecoregion: u32 = record[0]
                .parse()
                .map_err(|_| parse_err(line, format!("bad ecoregion {:?}", &record[0])))?;
            let class = record[1]
                .parse::<u8>()
                .ok()
                .and_then(LandUse::from_code)
                .ok_or_else(|| parse_err(line, format!("bad land-use code {:?}", &record[1])))?;
            let agb: f64 = record[2]
                .parse()
                .map_err(|_| parse_err(line, format!("bad density {:?}", &record[2])))?;
            if densities.insert((ecoregion, class), agb).is_some() {
                return Err(parse_err(
                    line,
                    format!("duplicate entry for ecoregion {ecoregion} class {class}"),
                ));
            }
        }
        CarbonTable::new(densities, carbon_fraction, pixel_area)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("ecoregion,landuse,agb\n");
        for (&(eco, class), agb) in &self.densities {
            out.push_str(&format!("{eco},{},{agb}\n", class.code()));
        }
        out
    }

    /// tonnes CO2e held by one pixel of the given class
    pub fn stock_of(&self, ecoregion: u32, class: LandUse) -> Result<f64, EvaluationError> {
        let agb = self
            .density(ecoregion, class)
            .ok_or(EvaluationError::MissingTableEntry { ecoregion, class })?;
        Ok(agb * self.pixel_area * self.carbon_fraction * self.co2_per_carbon)
    }
}

/// Carbon stock of `pixel` in `year`, tonnes CO2e.
pub fn carbon_stock(
    world: &World,
    pixel: &PixelRecord,
    year: i32,
    table: &CarbonTable,
) -> Result<f64, EvaluationError> {
    let class = world.landuse(pixel, year).ok_or(EvaluationError::YearOutOfRange {
        year,
        first: world.first_year,
        last: world.last_year,
    })?;
    table.stock_of(pixel.ecoregion, class)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(entries: &[(u32, LandUse, f64)]) -> CarbonTable {
        CarbonTable::new(
            entries.iter().map(|&(e, c, d)| ((e, c), d)).collect(),
            DEFAULT_CARBON_FRACTION,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn hundred_tonnes_per_hectare() {
        let t = table(&[(1, LandUse::UndisturbedForest, 100.0)]);
        let stock = t.stock_of(1, LandUse::UndisturbedForest).unwrap();
        // 100 * 0.47 * 44 / 12 by hand: 47 * 11 / 3 = 517 / 3
        assert!((stock - 517.0 / 3.0).abs() < 1e-9);
        assert!((stock - 172.33).abs() < 0.005);
    }

    #[test]
    fn zero_density_classes() {
        let t = table(&[
            (1, LandUse::UndisturbedForest, 250.0),
            (1, LandUse::Deforested, 0.0),
            (1, LandUse::Water, 0.0),
            (2, LandUse::Water, 0.0),
        ]);
        assert_eq!(t.stock_of(1, LandUse::Deforested).unwrap(), 0.0);
        assert_eq!(t.stock_of(1, LandUse::Water).unwrap(), 0.0);
        assert_eq!(t.stock_of(2, LandUse::Water).unwrap(), 0.0);
        assert_eq!(
            t.stock_of(2, LandUse::Other).unwrap_err(),
            EvaluationError::MissingTableEntry {
                ecoregion: 2,
                class: LandUse::Other
            }
        );
    }

    #[test]
    fn invariants_enforced() {
        let bad = CarbonTable::new(
            [((1, LandUse::DegradedForest), 10.0), ((1, LandUse::Deforested), 10.0)].into(),
            0.47,
            1.0,
        );
        assert!(matches!(bad, Err(CarbonTableError::DeforestedNotLower { .. })));
        let bad = CarbonTable::new([((1, LandUse::Other), -1.0)].into(), 0.47, 1.0);
        assert!(matches!(bad, Err(CarbonTableError::BadDensity { .. })));
        let bad = CarbonTable::new(BTreeMap::new(), 0.0, 1.0);
        assert!(matches!(bad, Err(CarbonTableError::BadConstant { .. })));
    }

    #[test]
    fn csv_round_trip() {
        let text = "ecoregion,landuse,agb\n3,1,310.5\n3,3,0\n";
        let t = CarbonTable::from_csv(text.as_bytes(), 0.47, 0.09).unwrap();
        assert_eq!(t.density(3, LandUse::UndisturbedForest), Some(310.5));
        assert_eq!(t.to_csv(), text);
        let err = CarbonTable::from_csv("ecoregion,landuse,agb\n3,1,310.5\n3,8,0\n".as_bytes(), 0.47, 1.0).unwrap_err();
        assert!(matches!(err, CarbonTableError::Parse { line: 3, .. }));
    }
}
