//! Pixel records and the tabular world file.
//!
//! One pixel per row, comma separated, with a header naming the columns:
//! `id, region, country, ecoregion, elevation, slope, settlement_distance`
//! in any order, followed by one `lu_YYYY` column per year. Year columns must
//! cover a contiguous range. Land-use cells hold the class code (1 to 6).

use std::collections::BTreeSet;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Annual land-use class, coded as in the tropical moist forest change
/// product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LandUse {
    UndisturbedForest,
    DegradedForest,
    Deforested,
    Regrowth,
    Water,
    Other,
}

impl LandUse {
    pub const ALL: [LandUse; 6] = [
        LandUse::UndisturbedForest,
        LandUse::DegradedForest,
        LandUse::Deforested,
        LandUse::Regrowth,
        LandUse::Water,
        LandUse::Other,
    ];

    pub fn code(self) -> u8 {
        match self {
            LandUse::UndisturbedForest => 1,
            LandUse::DegradedForest => 2,
            LandUse::Deforested => 3,
            LandUse::Regrowth => 4,
            LandUse::Water => 5,
            LandUse::Other => 6,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        LandUse::ALL.get(usize::from(code).checked_sub(1)?).copied()
    }

    pub fn is_forest(self) -> bool {
        matches!(
            self,
            LandUse::UndisturbedForest | LandUse::DegradedForest | LandUse::Regrowth
        )
    }
}

impl fmt::Display for LandUse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Project,
    LeakageBuffer,
    MatchingArea,
    Excluded,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::Project => "project",
            Region::LeakageBuffer => "leakage",
            Region::MatchingArea => "matching",
            Region::Excluded => "excluded",
        }
    }
}

impl FromStr for Region {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "project" => Ok(Region::Project),
            "leakage" => Ok(Region::LeakageBuffer),
            "matching" => Ok(Region::MatchingArea),
            "excluded" => Ok(Region::Excluded),
            other => Err(format!(
                "unknown region {other:?} (expected project, leakage, matching or excluded)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PixelRecord {
    pub id: u64,
    pub region: Region,
    pub country: String,
    pub ecoregion: u32,
    /// metres
    pub elevation: f64,
    /// degrees
    pub slope: f64,
    /// kilometres to nearest settlement
    pub settlement_distance: f64,
    /// One class per year starting at the world's first year.
    pub landuse: Vec<LandUse>,
}

impl PixelRecord {
    pub fn covariates(&self) -> [f64; 3] {
        [self.elevation, self.slope, self.settlement_distance]
    }
}

/// A set of pixels sharing one land-use year range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub first_year: i32,
    pub last_year: i32,
    pub pixels: Vec<PixelRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WorldError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("world has no land-use year columns")]
    NoYears,
    #[error("duplicate pixel id {0}")]
    DuplicateId(u64),
    #[error("pixel {id} has {found} land-use years, expected {expected}")]
    SeriesLength { id: u64, found: usize, expected: usize },
    #[error("pixel {id}: covariate {name} is not finite")]
    NonFinite { id: u64, name: &'static str },
}

const FIXED_COLUMNS: [&str; 7] = [
    "id",
    "region",
    "country",
    "ecoregion",
    "elevation",
    "slope",
    "settlement_distance",
];

impl World {
    pub fn new(first_year: i32, last_year: i32, pixels: Vec<PixelRecord>) -> Result<Self, WorldError> {
        if last_year < first_year {
            return Err(WorldError::NoYears);
        }
        let expected = (last_year - first_year + 1) as usize;
        let mut seen = BTreeSet::new();
        for p in &pixels {
            if !seen.insert(p.id) {
                return Err(WorldError::DuplicateId(p.id));
            }
            if p.landuse.len() != expected {
                return Err(WorldError::SeriesLength {
                    id: p.id,
                    found: p.landuse.len(),
                    expected,
                });
            }
            for (name, v) in ["elevation", "slope", "settlement_distance"]
                .into_iter()
                .zip(p.covariates())
            {
                if !v.is_finite() {
                    return Err(WorldError::NonFinite { id: p.id, name });
                }
            }
        }
        Ok(World {
            first_year,
            last_year,
            pixels,
        })
    }

    pub fn covers(&self, year: i32) -> bool {
        (self.first_year..=self.last_year).contains(&year)
    }

    pub fn landuse(&self, pixel: &PixelRecord, year: i32) -> Option<LandUse> {
        if !self.covers(year) {
            return None;
        }
        pixel.landuse.get((year - self.first_year) as usize).copied()
    }

    pub fn in_region(&self, region: Region) -> impl Iterator<Item = &PixelRecord> {
        self.pixels.iter().filter(move |p| p.region == region)
    }

    pub fn count(&self, region: Region) -> usize {
        self.in_region(region).count()
    }

    /// Parses a world file. Errors name the 1-based line number.
    pub fn from_csv(reader: impl Read) -> Result<Self, WorldError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let parse_err = |line: u64, message: String| WorldError::Parse { line, message };

        let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
        let mut fixed = [usize::MAX; 7];
        let mut years: Vec<(i32, usize)> = Vec::new();
        for (col, name) in headers.iter().enumerate() {
            if let Some(year) = name.strip_prefix("lu_") {
                let year: i32 = year
                    .parse()
                    .map_err(|_| parse_err(1, format!("bad year column {name:?}")))?;
                years.push((year, col));
            } else if let Some(slot) = FIXED_COLUMNS.iter().position(|c| *c == name) {
                if fixed[slot] != usize::MAX {
                    return Err(parse_err(1, format!("duplicate column {name:?}")));
                }
                fixed[slot] = col;
            } else {
                return Err(parse_err(1, format!("unknown column {name:?}")));
            }
        }
        if let Some(missing) = FIXED_COLUMNS.iter().zip(fixed).find(|(_, col)| *col == usize::MAX) {
            return Err(parse_err(1, format!("missing column {:?}", missing.0)));
        }
        if years.is_empty() {
            return Err(WorldError::NoYears);
        }
        years.sort();
        let first_year = years[0].0;
        let last_year = years[years.len() - 1].0;
        for (i, (year, _)) in years.iter().enumerate() {
            if *year != first_year + i as i32 {
                return Err(parse_err(
                    1,
                    format!("land-use years must be contiguous; gap or repeat at {year}"),
                ));
            }
        }

        let mut pixels = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                parse_err(line, e.to_string())
            })?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let field = |slot: usize| record.get(fixed[slot]).unwrap_or("");
            let num = |slot: usize| -> Result<f64, WorldError> {
                let raw = field(slot);
                let v: f64 = raw
                    .parse()
                    .map_err(|_| parse_err(line, format!("{}: not a number: {raw:?}", FIXED_COLUMNS[slot])))?;
                if !v.is_finite() {
                    return Err(parse_err(line, format!("{}: not finite", FIXED_COLUMNS[slot])));
                }
                Ok(v)
            };
            let id: u64 = field(0)
                .parse()
                .map_err(|_| parse_err(line, format!("id: not an integer: {:?}", field(0))))?;
            let region: Region = field(1).parse().map_err(|e| parse_err(line, e))?;
            let country = field(2).to_string();
            if country.is_empty() {
                return Err(parse_err(line, "country: empty".into()));
            }
            let ecoregion: u32 = field(3)
                .parse()
                .map_err(|_| parse_err(line, format!("ecoregion: not an integer: {:?}", field(3))))?;
            let landuse = years
                .iter()
                .map(|(year, col)| {
                    let raw = record.get(*col).unwrap_or("");
                    raw.parse::<u8>()
                        .ok()
                        .and_then(LandUse::from_code)
                        .ok_or_else(|| parse_err(line, format!("lu_{year}: bad land-use code {raw:?}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            pixels.push(PixelRecord {
                id,
                region,
                country,
                ecoregion,
                elevation: num(4)?,
                slope: num(5)?,
                settlement_distance: num(6)?,
                landuse,
            });
        }
        World::new(first_year, last_year, pixels)
    }

    /// Canonical world file: fixed columns in declared order, then years
    /// ascending, rows in stored order, `\n` line endings.
    pub fn to_csv(&self) -> String {
        let mut out = FIXED_COLUMNS.join(",");
        for year in self.first_year..=self.last_year {
            out.push_str(&format!(",lu_{year}"));
        }
        out.push('\n');
        for p in &self.pixels {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}",
                p.id,
                p.region.as_str(),
                p.country,
                p.ecoregion,
                p.elevation,
                p.slope,
                p.settlement_distance
            ));
            for lu in &p.landuse {
                out.push(',');
                out.push_str(&lu.code().to_string());
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
id,region,country,ecoregion,elevation,slope,settlement_distance,lu_2000,lu_2001
1,project,SL,7,120.5,3,2.25,1,1
2,matching,SL,7,99,2.5,4,1,3
";

    #[test]
    fn parses_and_round_trips() {
        let w = World::from_csv(SAMPLE.as_bytes()).unwrap();
        assert_eq!((w.first_year, w.last_year), (2000, 2001));
        assert_eq!(w.pixels.len(), 2);
        assert_eq!(w.landuse(&w.pixels[1], 2001), Some(LandUse::Deforested));
        assert_eq!(w.landuse(&w.pixels[1], 2002), None);
        assert_eq!(w.to_csv(), SAMPLE);
        assert_eq!(World::from_csv(w.to_csv().as_bytes()).unwrap(), w);
    }

    #[test]
    fn column_order_is_free() {
        let text = "\
lu_2001,id,country,region,ecoregion,slope,elevation,settlement_distance,lu_2000
3,5,SL,matching,1,2,3,4,1
";
        let w = World::from_csv(text.as_bytes()).unwrap();
        assert_eq!(
            w.pixels[0].landuse,
            vec![LandUse::UndisturbedForest, LandUse::Deforested]
        );
        assert_eq!(w.pixels[0].elevation, 3.0);
    }

    #[test]
    fn errors_name_the_line() {
        let bad = SAMPLE.replace("2,matching,SL,7,99", "2,matching,SL,7,tall");
        let err = World::from_csv(bad.as_bytes()).unwrap_err();
        assert!(matches!(err, WorldError::Parse { line: 3, .. }), "{err}");
        assert!(err.to_string().starts_with("line 3:"));

        let bad = SAMPLE.replace(",1,3\n", ",1,9\n");
        assert!(matches!(
            World::from_csv(bad.as_bytes()).unwrap_err(),
            WorldError::Parse { line: 3, .. }
        ));

        let bad = SAMPLE.replace("project", "forest");
        assert!(matches!(
            World::from_csv(bad.as_bytes()).unwrap_err(),
            WorldError::Parse { line: 2, .. }
        ));

        let bad = SAMPLE.replace("lu_2001", "lu_2003");
        assert!(matches!(
            World::from_csv(bad.as_bytes()).unwrap_err(),
            WorldError::Parse { line: 1, .. }
        ));

        let bad = format!("{SAMPLE}2,excluded,SL,7,1,1,1,1,1\n");
        assert_eq!(World::from_csv(bad.as_bytes()).unwrap_err(), WorldError::DuplicateId(2));

        let bad = format!("{SAMPLE}9,excluded,SL,7,1,1\n");
        assert!(matches!(
            World::from_csv(bad.as_bytes()).unwrap_err(),
            WorldError::Parse { line: 4, .. }
        ));
    }

    #[test]
    fn land_use_codes() {
        for lu in LandUse::ALL {
            assert_eq!(LandUse::from_code(lu.code()), Some(lu));
        }
        assert_eq!(LandUse::from_code(0), None);
        assert_eq!(LandUse::from_code(7), None);
    }
}
