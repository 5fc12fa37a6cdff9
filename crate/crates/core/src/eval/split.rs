use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::features::{Condition, RowMeta};

/// One evaluation cell: a bearing tested at an operating condition that is
/// absent from training, with the bearing itself absent from training.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub test_bearing: String,
    pub test_condition: Condition,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
}

/// One plan per (bearing, held-out condition), bearings in lexical order.
///
/// Training rows exclude the test bearing entirely and every row at any of
/// the held-out conditions.
pub fn make_splits(meta: &[RowMeta], test_conditions: &[Condition]) -> Result<Vec<SplitPlan>> {
    if test_conditions.is_empty() {
        return Err(Error::InvalidSplit("no held-out conditions given".into()));
    }
    let bearings: BTreeSet<&str> = meta.iter().map(|m| m.bearing_id.as_str()).collect();
    if bearings.len() < 2 {
        return Err(Error::InvalidSplit(format!(
            "need at least two bearings, found {}",
            bearings.len()
        )));
    }
    let present: BTreeSet<Condition> = meta.iter().map(|m| m.condition).collect();
    let held_out: BTreeSet<Condition> = test_conditions.iter().copied().collect();
    for c in &held_out {
        if !present.contains(c) {
            return Err(Error::InvalidSplit(format!(
                "held-out condition {c} is not in the data"
            )));
        }
    }

    let mut plans = Vec::with_capacity(bearings.len() * held_out.len());
    for bearing in &bearings {
        let train_rows: Vec<usize> = meta
            .iter()
            .enumerate()
            .filter(|(_, m)| m.bearing_id != *bearing && !held_out.contains(&m.condition))
            .map(|(i, _)| i)
            .collect();
        for &condition in &held_out {
            let test_rows: Vec<usize> = meta
                .iter()
                .enumerate()
                .filter(|(_, m)| m.bearing_id == *bearing && m.condition == condition)
                .map(|(i, _)| i)
                .collect();
            if train_rows.is_empty() || test_rows.is_empty() {
                return Err(Error::InvalidSplit(format!(
                    "bearing {bearing} at {condition}: {} train rows, {} test rows",
                    train_rows.len(),
                    test_rows.len()
                )));
            }
            plans.push(SplitPlan {
                test_bearing: bearing.to_string(),
                test_condition: condition,
                train_rows: train_rows.clone(),
                test_rows,
            });
        }
    }
    Ok(plans)
}
