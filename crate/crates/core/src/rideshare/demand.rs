use std::io::{Read, Write};

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::seeded_rng;
use crate::signal::csv_to_error;

/// Accepted share of the potential demand `δ` at price `p`:
/// `δ (1 - θ p / p_max)`, clamped at zero.
pub fn accepted_demand(delta: f64, theta: f64, p: f64, p_max: f64) -> Result<f64> {
    if p > p_max {
        return Err(Error::InvalidArgument(format!("price {p} exceeds the cap {p_max}")));
    }
    if !(delta >= 0.0) || !(0.0..=1.0).contains(&theta) || !(p >= 0.0) {
        return Err(Error::InvalidArgument(
            "demand needs δ ≥ 0, θ ∈ [0, 1] and p ≥ 0".into(),
        ));
    }
    Ok((delta * (1.0 - theta * p / p_max)).max(0.0))
}

/// Potential demand `δ^{ij}_k` per slot, normalized by the fleet size.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandProfile {
    slot_minutes: f64,
    slots: Vec<DMatrix<f64>>,
}

impl DemandProfile {
    pub fn new(slot_minutes: f64, slots: Vec<DMatrix<f64>>) -> Result<Self> {
        let n = slots.first().map(|m| m.nrows()).unwrap_or(0);
        for (k, m) in slots.iter().enumerate() {
            if m.shape() != (n, n) {
                return Err(Error::dimension(
                    format!("demand slot {k}"),
                    format!("{n}x{n}"),
                    format!("{}x{}", m.nrows(), m.ncols()),
                ));
            }
            if m.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::InvalidArgument(format!("demand slot {k} has a negative entry")));
            }
        }
        Ok(Self { slot_minutes, slots })
    }

    pub fn zeros(n_regions: usize, horizon: usize, slot_minutes: f64) -> Self {
        Self {
            slot_minutes,
            slots: vec![DMatrix::zeros(n_regions, n_regions); horizon],
        }
    }

    pub fn horizon(&self) -> usize {
        self.slots.len()
    }

    pub fn n_regions(&self) -> usize {
        self.slots.first().map(|m| m.nrows()).unwrap_or(0)
    }

    pub fn slot_minutes(&self) -> f64 {
        self.slot_minutes
    }

    pub fn slot(&self, k: usize) -> &DMatrix<f64> {
        &self.slots[k]
    }

    /// Time average over the horizon.
    pub fn mean(&self) -> DMatrix<f64> {
        let n = self.n_regions();
        let sum = self.slots.iter().fold(DMatrix::zeros(n, n), |acc, m| acc + m);
        sum / self.horizon().max(1) as f64
    }

    /// Largest total demand in any slot.
    pub fn peak_total(&self) -> f64 {
        self.slots.iter().map(|m| m.sum()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            slot_minutes: self.slot_minutes,
            slots: self.slots.iter().map(|m| m * factor).collect(),
        }
    }

    /// Write `slot,origin,dest,delta` rows for nonzero entries.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["slot", "origin", "dest", "delta"])
            .map_err(csv_to_error)?;
        for (k, m) in self.slots.iter().enumerate() {
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    if m[(i, j)] != 0.0 {
                        wtr.write_record(&[k.to_string(), i.to_string(), j.to_string(), m[(i, j)].to_string()])
                            .map_err(csv_to_error)?;
                    }
                }
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// Parse `slot,origin,dest,delta` rows. Missing entries are zero; the
    /// horizon is one past the largest slot.
    pub fn read_csv<R: Read>(reader: R, n_regions: usize, slot_minutes: f64) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers().map_err(csv_to_error)?.clone();
        let expected = ["slot", "origin", "dest", "delta"];
        if header.len() != 4 || header.iter().zip(expected).any(|(h, e)| h != e) {
            return Err(Error::Parse {
                line: 1,
                message: "header must be `slot,origin,dest,delta`".into(),
            });
        }
        let mut entries = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(csv_to_error)?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let parse_idx = |s: &str, what: &str| {
                s.parse::<usize>().map_err(|_| Error::Parse {
                    line,
                    message: format!("invalid {what} `{s}`"),
                })
            };
            let slot = parse_idx(&record[0], "slot")?;
            let i = parse_idx(&record[1], "origin")?;
            let j = parse_idx(&record[2], "dest")?;
            let delta: f64 = record[3].parse().map_err(|_| Error::Parse {
                line,
                message: format!("invalid delta `{}`", &record[3]),
            })?;
            if i >= n_regions || j >= n_regions || i == j {
                return Err(Error::Parse {
                    line,
                    message: format!("pair ({i}, {j}) is not an origin/destination pair of {n_regions} regions"),
                });
            }
            if !(delta >= 0.0) {
                return Err(Error::Parse {
                    line,
                    message: format!("negative demand {delta}"),
                });
            }
            entries.push((slot, i, j, delta));
        }
        let horizon = entries.iter().map(|e| e.0 + 1).max().unwrap_or(0);
        let mut profile = Self::zeros(n_regions, horizon, slot_minutes);
        for (k, i, j, d) in entries {
            profile.slots[k][(i, j)] += d;
        }
        Ok(profile)
    }
}

/// Synthetic weekday with morning and evening rush hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticDay {
    pub n_regions: usize,
    /// Start and end of the day in hours.
    pub start_hour: f64,
    pub end_hour: f64,
    pub slot_minutes: f64,
    /// Centres of the two peaks in hours.
    pub peaks: [f64; 2],
    /// Width (standard deviation) of each peak in hours.
    pub peak_width: f64,
    /// Off-peak level as a fraction of the peak.
    pub base_level: f64,
    /// Total potential demand per slot at the peak.
    pub peak_total: f64,
    /// Seed of the origin/destination weights.
    pub seed: u64,
}

impl Default for SyntheticDay {
    fn default() -> Self {
        Self {
            n_regions: 4,
            start_hour: 6.0,
            end_hour: 21.0,
            slot_minutes: 5.0,
            peaks: [8.5, 17.5],
            peak_width: 1.0,
            base_level: 0.2,
            peak_total: 4.0,
            seed: 7,
        }
    }
}

impl SyntheticDay {
    pub fn generate(&self) -> Result<DemandProfile> {
        if self.n_regions < 2 || !(self.end_hour > self.start_hour) || !(self.slot_minutes > 0.0) {
            return Err(Error::InvalidArgument(
                "synthetic day needs ≥ 2 regions and a positive duration".into(),
            ));
        }
        let n = self.n_regions;
        let mut rng = seeded_rng(self.seed);
        let mut weights = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { rng.random_range(0.5..1.5) });
        weights /= weights.sum();
        let horizon = ((self.end_hour - self.start_hour) * 60.0 / self.slot_minutes).round() as usize;
        let shape = |h: f64| {
            self.peaks
                .iter()
                .map(|c| (-0.5 * ((h - c) / self.peak_width).powi(2)).exp())
                .fold(0.0, f64::max)
        };
        let slots = (0..horizon)
            .map(|k| {
                let hour = self.start_hour + (k as f64 + 0.5) * self.slot_minutes / 60.0;
                let level = self.base_level + (1.0 - self.base_level) * shape(hour);
                &weights * (self.peak_total * level)
            })
            .collect();
        DemandProfile::new(self.slot_minutes, slots)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn elasticity_cases() {
        assert_eq!(accepted_demand(3.0, 1.0, 2.0, 2.0).unwrap(), 0.0);
        assert_eq!(accepted_demand(3.0, 0.0, 1.7, 2.0).unwrap(), 3.0);
        assert_relative_eq!(accepted_demand(2.0, 0.5, 1.0, 2.0).unwrap(), 1.5);
        assert!(accepted_demand(1.0, 0.5, 2.1, 2.0).is_err());
    }

    #[test]
    fn synthetic_day_shape() {
        let day = SyntheticDay::default();
        let p = day.generate().unwrap();
        assert_eq!(p.horizon(), 180);
        assert_relative_eq!(p.peak_total(), 4.0, max_relative = 0.01);
        let totals: Vec<f64> = (0..180).map(|k| p.slot(k).sum()).collect();
        let noon = totals[72];
        assert!(totals[30] > 3.0 * noon && totals[138] > 3.0 * noon);
        assert!((0..180).all(|k| p.slot(k).iter().all(|v| *v >= 0.0) && (0..4).all(|i| p.slot(k)[(i, i)] == 0.0)));
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let p = SyntheticDay {
            n_regions: 3,
            end_hour: 7.0,
            ..Default::default()
        }
        .generate()
        .unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let back = DemandProfile::read_csv(buf.as_slice(), 3, 5.0).unwrap();
        assert_eq!(back.horizon(), p.horizon());
        for k in 0..p.horizon() {
            assert_eq!(back.slot(k), p.slot(k));
        }
        let bad = "slot,origin,dest,delta\n0,0,1,0.5\n1,2,2,0.1\n";
        assert!(matches!(
            DemandProfile::read_csv(bad.as_bytes(), 3, 5.0),
            Err(Error::Parse { line: 3, .. })
        ));
    }
}
