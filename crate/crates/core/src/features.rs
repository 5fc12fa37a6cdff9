//! Feature matrices with per-row operating-condition metadata.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Health state of a bearing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Class {
    Healthy,
    Faulty,
}

impl Class {
    pub fn as_str(self) -> &'static str {
        match self {
            Class::Healthy => "healthy",
            Class::Faulty => "faulty",
        }
    }

    pub fn index(self) -> usize {
        match self {
            Class::Healthy => 0,
            Class::Faulty => 1,
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Class {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "healthy" => Ok(Class::Healthy),
            "faulty" => Ok(Class::Faulty),
            other => Err(Error::InvalidArgument(format!("unknown class {other:?}"))),
        }
    }
}

/// A steady-state operating point: shaft speed and load torque.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Condition {
    pub speed_rpm: f64,
    pub load_nm: f64,
}

impl Condition {
    pub fn new(speed_rpm: f64, load_nm: f64) -> Self {
        Self { speed_rpm, load_nm }
    }

    /// Operating (shaft) frequency in Hz.
    pub fn fo_hz(&self) -> f64 {
        self.speed_rpm / 60.0
    }

    pub fn label(&self) -> String {
        format!("{}rpm@{}Nm", self.speed_rpm, self.load_nm)
    }
}

impl PartialEq for Condition {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Condition {}

impl PartialOrd for Condition {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Condition {
    fn cmp(&self, other: &Self) -> Ordering {
        self.speed_rpm
            .total_cmp(&other.speed_rpm)
            .then(self.load_nm.total_cmp(&other.load_nm))
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} RPM / {} Nm", self.speed_rpm, self.load_nm)
    }
}

/// Where a feature row came from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowMeta {
    pub bearing_id: String,
    pub class: Class,
    pub condition: Condition,
    pub run: u32,
    pub segment: u32,
}

/// `n x m` feature values with aligned row metadata and column labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Array2<f64>,
    meta: Vec<RowMeta>,
    columns: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(values: Array2<f64>, meta: Vec<RowMeta>, columns: Vec<String>) -> Result<Self> {
        if values.nrows() != meta.len() {
            return Err(Error::InvalidArgument(format!(
                "{} rows of values but {} metadata rows",
                values.nrows(),
                meta.len()
            )));
        }
        if values.ncols() != columns.len() {
            return Err(Error::InvalidArgument(format!(
                "{} feature columns but {} labels",
                values.ncols(),
                columns.len()
            )));
        }
        Ok(Self {
            values,
            meta,
            columns,
        })
    }

    /// Stacks per-recording blocks in order; every block must share the
    /// column layout.
    pub fn concat(blocks: Vec<FeatureMatrix>) -> Result<Self> {
        let mut iter = blocks.into_iter();
        let Some(first) = iter.next() else {
            return Err(Error::InvalidArgument(
                "no feature blocks to concatenate".into(),
            ));
        };
        let columns = first.columns;
        let mut rows: Vec<f64> = first.values.iter().copied().collect();
        let mut meta = first.meta;
        for block in iter {
            if block.columns != columns {
                return Err(Error::InvalidArgument(
                    "feature blocks have different column layouts".into(),
                ));
            }
            rows.extend(block.values.iter().copied());
            meta.extend(block.meta);
        }
        let values = Array2::from_shape_vec((meta.len(), columns.len()), rows)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Self::new(values, meta, columns)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn meta(&self) -> &[RowMeta] {
        &self.meta
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    /// Per-row operating frequency (Hz).
    pub fn fo(&self) -> Vec<f64> {
        self.meta.iter().map(|m| m.condition.fo_hz()).collect()
    }

    /// Per-row load (Nm).
    pub fn to(&self) -> Vec<f64> {
        self.meta.iter().map(|m| m.condition.load_nm).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            values: self.values.select(Axis(0), rows),
            meta: rows.iter().map(|&i| self.meta[i].clone()).collect(),
            columns: self.columns.clone(),
        }
    }

    /// Same metadata, new values of identical shape.
    pub fn with_values(&self, values: Array2<f64>) -> Result<FeatureMatrix> {
        if values.dim() != self.values.dim() {
            return Err(Error::InvalidArgument(format!(
                "replacement values have shape {:?}, expected {:?}",
                values.dim(),
                self.values.dim()
            )));
        }
        Ok(FeatureMatrix {
            values,
            meta: self.meta.clone(),
            columns: self.columns.clone(),
        })
    }
}

/// `20 log10(max(v, floor))` for magnitudes, `10 log10` for power readings.
pub(crate) fn to_decibels(v: f64, floor: f64, factor: f64) -> f64 {
    factor * v.max(floor).log10()
}
