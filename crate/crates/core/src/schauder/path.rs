use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::{qadic_grid, qpow, PartitionGrid};

/// Time-change provenance attached to pulled-back paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimechangeMeta {
    pub table_hash: String,
    #[serde(rename = "N")]
    pub depth: u32,
}

/// Provenance of a sampled path.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathMeta {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec_hash: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation_level: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timechange: Option<TimechangeMeta>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, serde_json::Value>,
}

/// Values of a continuous path at the points of one partition level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SampledPathRecord", into = "SampledPathRecord")]
pub struct SampledPath {
    pub grid: PartitionGrid,
    pub values: Vec<f64>,
    pub meta: PathMeta,
}

#[derive(Clone, Serialize, Deserialize)]
struct SampledPathRecord {
    q: u32,
    level: u32,
    values: Vec<f64>,
    #[serde(default)]
    meta: PathMeta,
    /// Present only for grids that are not q-adic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    points: Option<Vec<f64>>,
}

impl From<SampledPath> for SampledPathRecord {
    fn from(p: SampledPath) -> Self {
        let points = (!p.grid.is_qadic()).then(|| p.grid.points.clone());
        Self { q: p.grid.q, level: p.grid.level, values: p.values, meta: p.meta, points }
    }
}

impl TryFrom<SampledPathRecord> for SampledPath {
    type Error = Error;

    fn try_from(r: SampledPathRecord) -> Result<Self> {
        let grid = match r.points {
            Some(pts) => PartitionGrid::from_points(r.q, r.level, pts)?,
            None => qadic_grid(r.q, r.level)?,
        };
        let mut path = SampledPath::new(grid, r.values)?;
        path.meta = r.meta;
        Ok(path)
    }
}

impl SampledPath {
    pub fn new(grid: PartitionGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.points.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.points.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("path values must be finite"));
        }
        Ok(Self { grid, values, meta: PathMeta::default() })
    }

    pub fn from_fn(grid: PartitionGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.points.iter().map(|&t| f(t)).collect();
        Self::new(grid, values)
    }

    /// Samples `f` on the level-`n` q-adic grid.
    pub fn qadic_fn(q: u32, n: u32, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_fn(qadic_grid(q, n)?, f)
    }

    pub fn q(&self) -> u32 {
        self.grid.q
    }

    pub fn level(&self) -> u32 {
        self.grid.level
    }

    pub fn points(&self) -> &[f64] {
        &self.grid.points
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Restriction to level `m <= level`, valid for every q-refining grid
    /// because coarse points sit at multiples of `q^{level-m}`.
    pub fn subsample(&self, m: u32) -> Result<Self> {
        if m > self.level() {
            return Err(Error::InsufficientLevels {
                needed: m as usize,
                available: self.level() as usize,
            });
        }
        let stride = qpow(self.q(), self.level() - m);
        let points = self.grid.points.iter().step_by(stride).copied().collect();
        let values = self.values.iter().step_by(stride).copied().collect();
        let grid = PartitionGrid { q: self.q(), level: m, points };
        Ok(Self { grid, values, meta: self.meta.clone() })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = self.values.iter().map(|&v| f(v)).collect();
        let mut out = Self::new(self.grid.clone(), values)?;
        out.meta = self.meta.clone();
        Ok(out)
    }

    /// Checks that `other` lives on exactly the same grid.
    pub fn ensure_same_grid(&self, other: &SampledPath) -> Result<()> {
        if self.grid.q != other.grid.q
            || self.grid.level != other.grid.level
            || self.grid.points != other.grid.points
        {
            return Err(Error::GridMismatch(format!(
                "q={} level={} vs q={} level={}",
                self.grid.q, self.grid.level, other.grid.q, other.grid.level
            )));
        }
        Ok(())
    }

    pub fn zip_with(&self, other: &SampledPath, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.ensure_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self::new(self.grid.clone(), values)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::RefiningTable;

    #[test]
    fn json_keeps_qadic_grids_compact() {
        let p = SampledPath::qadic_fn(2, 3, |t| t * t).unwrap();
        let s = p.to_json().unwrap();
        assert!(!s.contains("points"));
        assert_eq!(SampledPath::from_json(&s).unwrap(), p);
    }

    #[test]
    fn json_carries_general_grids() {
        let table = RefiningTable::random(3, 2, 5).unwrap();
        let p = SampledPath::from_fn(table.finest().clone(), |t| t).unwrap();
        let s = p.to_json().unwrap();
        assert!(s.contains("points"));
        assert_eq!(SampledPath::from_json(&s).unwrap(), p);
    }

    #[test]
    fn rejects_length_mismatch() {
        let g = qadic_grid(2, 2).unwrap();
        assert!(matches!(SampledPath::new(g, vec![0.0; 4]), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn subsample_takes_coarse_points() {
        let p = SampledPath::qadic_fn(3, 4, |t| t).unwrap();
        let c = p.subsample(2).unwrap();
        assert_eq!(c.grid, qadic_grid(3, 2).unwrap());
        assert_eq!(c.values, c.grid.points);
    }
}
