//! Bearing-weighted aggregation and report rendering.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::CellResult;
use crate::features::Condition;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub accuracy: f64,
    pub ocid_error: f64,
}

/// Mean over bearings of each bearing's mean over its cells.
pub fn aggregate(cells: &[CellResult]) -> Aggregate {
    Aggregate {
        accuracy: bearing_weighted(cells, |c| c.accuracy),
        ocid_error: bearing_weighted(cells, |c| c.ocid_error),
    }
}

fn bearing_weighted(cells: &[CellResult], metric: impl Fn(&CellResult) -> f64) -> f64 {
    let mut per_bearing: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for c in cells {
        let e = per_bearing.entry(c.bearing.as_str()).or_default();
        e.0 += metric(c);
        e.1 += 1;
    }
    if per_bearing.is_empty() {
        return 0.0;
    }
    per_bearing
        .values()
        .map(|(s, n)| s / *n as f64)
        .sum::<f64>()
        / per_bearing.len() as f64
}

/// The two reported metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Accuracy,
    OcidError,
}

impl Metric {
    pub fn file_stem(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::OcidError => "ocid_error",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Metric::Accuracy => "Classification accuracy",
            Metric::OcidError => "Operating condition ID error (higher is better)",
        }
    }

    fn of(self, c: &CellResult) -> f64 {
        match self {
            Metric::Accuracy => c.accuracy,
            Metric::OcidError => c.ocid_error,
        }
    }
}

/// Conditions, bearings and the cell at each (condition, bearing).
type Grid<'a> = (
    Vec<Condition>,
    Vec<&'a str>,
    BTreeMap<(Condition, &'a str), &'a CellResult>,
);

/// Results of one method on one channel set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub channels: String,
    pub seed: u64,
    pub config_hash: String,
    /// Description of the k-selection weighting.
    pub reweighting: String,
    pub cells: Vec<CellResult>,
    pub aggregate: Aggregate,
}

impl EvalReport {
    pub fn new(
        method: impl Into<String>,
        channels: impl Into<String>,
        seed: u64,
        config_hash: impl Into<String>,
        reweighting: impl Into<String>,
        mut cells: Vec<CellResult>,
    ) -> Self {
        cells.sort_by(|a, b| {
            a.bearing
                .cmp(&b.bearing)
                .then(a.condition.cmp(&b.condition))
        });
        let aggregate = aggregate(&cells);
        Self {
            method: method.into(),
            channels: channels.into(),
            seed,
            config_hash: config_hash.into(),
            reweighting: reweighting.into(),
            cells,
            aggregate,
        }
    }

    fn grid(&self) -> Grid<'_> {
        let conditions: BTreeSet<Condition> = self.cells.iter().map(|c| c.condition).collect();
        let bearings: BTreeSet<&str> = self.cells.iter().map(|c| c.bearing.as_str()).collect();
        let lookup = self
            .cells
            .iter()
            .map(|c| ((c.condition, c.bearing.as_str()), c))
            .collect();
        (
            conditions.into_iter().collect(),
            bearings.into_iter().collect(),
            lookup,
        )
    }

    fn bearing_mean(&self, bearing: &str, metric: Metric) -> f64 {
        let vals: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.bearing == bearing)
            .map(|c| metric.of(c))
            .collect();
        vals.iter().sum::<f64>() / vals.len().max(1) as f64
    }

    fn aggregate_of(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Accuracy => self.aggregate.accuracy,
            Metric::OcidError => self.aggregate.ocid_error,
        }
    }

    /// Rows are held-out conditions, columns bearings; the last column is
    /// the mean over bearings and the last row each bearing's mean, with
    /// the bearing-weighted aggregate in the corner.
    pub fn to_csv(&self, metric: Metric) -> String {
        let (conditions, bearings, lookup) = self.grid();
        let mut out = String::from("condition");
        for b in &bearings {
            let _ = write!(out, ",{b}");
        }
        out.push_str(",mean\n");
        for c in &conditions {
            let _ = write!(out, "{}", c.label());
            let mut vals = Vec::new();
            for b in &bearings {
                match lookup.get(&(*c, *b)) {
                    Some(cell) => {
                        let v = metric.of(cell);
                        vals.push(v);
                        let _ = write!(out, ",{v:.6}");
                    }
                    None => out.push(','),
                }
            }
            let mean = vals.iter().sum::<f64>() / vals.len().max(1) as f64;
            let _ = writeln!(out, ",{mean:.6}");
        }
        out.push_str("bearing_mean");
        for b in &bearings {
            let _ = write!(out, ",{:.6}", self.bearing_mean(b, metric));
        }
        let _ = writeln!(out, ",{:.6}", self.aggregate_of(metric));
        out
    }

    pub fn to_markdown(&self) -> String {
        let (conditions, bearings, lookup) = self.grid();
        let mut out = String::new();
        let _ = writeln!(out, "# {} with {}", self.method, self.channels);
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "seed: {} | config: {} | k* selection: {}",
            self.seed, self.config_hash, self.reweighting
        );
        for metric in [Metric::Accuracy, Metric::OcidError] {
            let _ = writeln!(out);
            let _ = writeln!(out, "## {}", metric.title());
            let _ = writeln!(out);
            let _ = write!(out, "| |");
            for b in &bearings {
                let _ = write!(out, " {b} |");
            }
            out.push('\n');
            out.push_str("|---|");
            for _ in &bearings {
                out.push_str("---|");
            }
            out.push('\n');
            for c in &conditions {
                let _ = write!(out, "| {} |", c.label());
                for b in &bearings {
                    match lookup.get(&(*c, *b)) {
                        Some(cell) => {
                            let _ = write!(out, " {} |", percent(metric.of(cell)));
                        }
                        None => out.push_str(" - |"),
                    }
                }
                out.push('\n');
            }
            let _ = writeln!(out);
            let _ = writeln!(
                out,
                "Bearing-weighted: {}",
                percent(self.aggregate_of(metric))
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "## k*");
        let _ = writeln!(out);
        let _ = write!(out, "| |");
        for b in &bearings {
            let _ = write!(out, " {b} |");
        }
        out.push('\n');
        out.push_str("|---|");
        for _ in &bearings {
            out.push_str("---|");
        }
        out.push('\n');
        for c in &conditions {
            let _ = write!(out, "| {} |", c.label());
            for b in &bearings {
                match lookup.get(&(*c, *b)) {
                    Some(cell) => {
                        let _ = write!(out, " {} |", cell.k_star);
                    }
                    None => out.push_str(" - |"),
                }
            }
            out.push('\n');
        }
        out
    }
}

pub(crate) fn percent(v: f64) -> String {
    format!("{:.0}%", v * 100.0)
}
