//! Equivalent permanence and the comparable per-tonne price.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::EvaluationError;

/// Tolerance on Σ r_t ≤ 1 for fractions read from text.
const FRACTION_SUM_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReleaseSchedule {
    /// Fraction of the stored carbon released in year t = 1, 2, ...
    pub release_fractions: Vec<f64>,
    /// per year
    pub discount_rate: f64,
}

impl ReleaseSchedule {
    pub fn permanent() -> Self {
        ReleaseSchedule {
            release_fractions: Vec::new(),
            discount_rate: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), EvaluationError> {
        let bad = |msg: String| Err(EvaluationError::InvalidSchedule(msg));
        if !(self.discount_rate.is_finite() && self.discount_rate >= 0.0) {
            return bad(format!("discount rate {} must be >= 0", self.discount_rate));
        }
        for (i, r) in self.release_fractions.iter().enumerate() {
            if !(r.is_finite() && *r >= 0.0) {
                return bad(format!("release fraction for year {} is {r}, must be >= 0", i + 1));
            }
        }
        let total: f64 = self.release_fractions.iter().sum();
        if total > 1.0 + FRACTION_SUM_SLACK {
            return bad(format!("release fractions sum to {total}, must be <= 1"));
        }
        Ok(())
    }

    /// Canonical text used for the schedule artifact.
    pub fn to_text(&self) -> String {
        let fractions: Vec<String> = self.release_fractions.iter().map(|r| r.to_string()).collect();
        format!(
            "formula 1-sum(r_t*(1+d)^-t)\ndiscount_rate {}\nrelease_fractions {}\n",
            self.discount_rate,
            fractions.join(",")
        )
    }
}

/// eP = 1 − Σ r_t (1 + δ)^−t, clamped to [0, 1].
pub fn equivalent_permanence(schedule: &ReleaseSchedule) -> Result<f64, EvaluationError> {
    schedule.validate()?;
    let growth = 1.0 + schedule.discount_rate;
    let released: f64 = schedule
        .release_fractions
        .iter()
        .enumerate()
        .map(|(i, r)| r / growth.powi(i as i32 + 1))
        .sum();
    Ok((1.0 - released).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Price {
    PerTonne(f64),
    NoFinitePrice,
}

impl Price {
    /// One decimal place, the precision prices are compared at.
    pub fn rounded(self) -> Option<f64> {
        match self {
            Price::PerTonne(p) => Some((p * 10.0).round() / 10.0),
            Price::NoFinitePrice => None,
        }
    }
}

impl fmt::Display for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Price::PerTonne(p) => write!(f, "{p:.1}"),
            Price::NoFinitePrice => f.write_str("---"),
        }
    }
}

/// Project price rescaled to one permanent additional tonne.
pub fn compute_price(price_project: f64, al_adj: f64, ep: f64) -> Result<Price, EvaluationError> {
    let ok = price_project.is_finite()
        && price_project >= 0.0
        && al_adj.is_finite()
        && al_adj >= 0.0
        && (0.0..=1.0).contains(&ep);
    if !ok {
        return Err(EvaluationError::InvalidPriceInput {
            price_project,
            al_adj,
            ep,
        });
    }
    let denom = al_adj * ep;
    if denom == 0.0 {
        return Ok(Price::NoFinitePrice);
    }
    Ok(Price::PerTonne(price_project / denom))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sched(r: &[f64], d: f64) -> ReleaseSchedule {
        ReleaseSchedule {
            release_fractions: r.to_vec(),
            discount_rate: d,
        }
    }

    #[test]
    fn boundaries() {
        assert_eq!(equivalent_permanence(&ReleaseSchedule::permanent()).unwrap(), 1.0);
        assert_eq!(equivalent_permanence(&sched(&[0.0; 40], 0.03)).unwrap(), 1.0);
        assert_eq!(equivalent_permanence(&sched(&[1.0], 0.0)).unwrap(), 0.0);
        let ep = equivalent_permanence(&sched(&[1.0], 0.03)).unwrap();
        assert!((ep - 0.029126213592233).abs() < 1e-12);
    }

    #[test]
    fn invalid_schedules() {
        for s in [
            sched(&[0.5, 0.6], 0.0),
            sched(&[-0.1], 0.0),
            sched(&[0.1], -0.01),
            sched(&[f64::NAN], 0.0),
        ] {
            assert!(matches!(
                equivalent_permanence(&s),
                Err(EvaluationError::InvalidSchedule(_))
            ));
        }
    }

    #[test]
    fn price_rows() {
        assert_eq!(compute_price(900.0, 1.0, 1.0).unwrap(), Price::PerTonne(900.0));
        assert_eq!(compute_price(5.8, 0.23, 0.35).unwrap().rounded(), Some(72.0));
        assert_eq!(compute_price(17.5, 0.48, 0.36).unwrap().rounded(), Some(101.3));
        assert_eq!(compute_price(112.0, 1.0, 0.77).unwrap().rounded(), Some(145.5));
        assert_eq!(compute_price(15.0, 0.0, 0.20).unwrap(), Price::NoFinitePrice);
        assert_eq!(Price::NoFinitePrice.to_string(), "---");
        assert_eq!(compute_price(17.5, 0.48, 0.36).unwrap().to_string(), "101.3");
        assert!(compute_price(-1.0, 1.0, 1.0).is_err());
        assert!(compute_price(1.0, 1.0, 1.5).is_err());
    }
}
