//! Evaluation on unseen bearings at unseen operating conditions.
//!
//! Per split: optional condition adjustment fitted on healthy training rows,
//! standardisation and PCA fitted on training rows, `k*` chosen by
//! class-balanced leave-one-out on the projected training points, then
//! classification accuracy on the test rows and the operating-condition ID
//! error (how well kNN tells the test rows apart from same-class training
//! rows; higher means a smaller domain shift).

pub mod knn;
pub mod pca;
pub mod report;
pub mod split;

use std::collections::BTreeMap;

use ndarray::{Array2, Axis};
use rayon::prelude::*;

use crate::adjust::{adjust_matrix, AdjustmentModel};
use crate::error::{Error, Result};
use crate::features::{Class, Condition, FeatureMatrix};

pub use knn::{class_balanced_error, knn_predict, loo_predictions, select_k_star, KSelection};
pub use pca::{fit_projection, Projection, TrainMatrix};
pub use report::{aggregate, Aggregate, EvalReport};
pub use split::{make_splits, SplitPlan};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    /// Fit and apply the condition adjustment inside each split.
    pub adjust: bool,
    pub pca_components: usize,
    /// Fit the adjustment on all training rows when none are healthy.
    pub allow_mixed_training: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            adjust: true,
            pca_components: 2,
            allow_mixed_training: false,
        }
    }
}

/// Metrics of one (bearing, condition) cell.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CellResult {
    pub bearing: String,
    pub condition: Condition,
    pub class: Class,
    pub accuracy: f64,
    pub ocid_error: f64,
    pub k_star: usize,
    pub k_max: usize,
    pub n_train: usize,
    pub n_test: usize,
}

/// Projected points of one split.
#[derive(Debug, Clone)]
pub struct PreparedSplit {
    pub train: Array2<f64>,
    pub train_labels: Vec<Class>,
    pub test: Array2<f64>,
    pub test_labels: Vec<Class>,
    /// Largest admissible `k`: rows of the smallest training bearing.
    pub k_max: usize,
}

fn class_indices(labels: &[Class]) -> Vec<usize> {
    labels.iter().map(|c| c.index()).collect()
}

/// Row count of the smallest training bearing.
pub fn k_max_for(matrix: &FeatureMatrix, train_rows: &[usize]) -> usize {
    let mut per_bearing: BTreeMap<&str, usize> = BTreeMap::new();
    for &i in train_rows {
        *per_bearing
            .entry(matrix.meta()[i].bearing_id.as_str())
            .or_default() += 1;
    }
    per_bearing.values().copied().min().unwrap_or(0)
}

/// Adjusts (optionally) and projects the rows of a split.
pub fn prepare_split(
    matrix: &FeatureMatrix,
    plan: &SplitPlan,
    opts: &EvalOptions,
) -> Result<PreparedSplit> {
    let train = matrix.select_rows(&plan.train_rows);
    let test = matrix.select_rows(&plan.test_rows);
    let (train, test) = if opts.adjust {
        let healthy: Vec<usize> = train
            .meta()
            .iter()
            .enumerate()
            .filter(|(_, m)| m.class == Class::Healthy)
            .map(|(i, _)| i)
            .collect();
        let fit_rows = if healthy.is_empty() {
            if !opts.allow_mixed_training {
                return Err(Error::InvalidSplit(format!(
                    "bearing {} at {}: no healthy training rows to fit the adjustment",
                    plan.test_bearing, plan.test_condition
                )));
            }
            (0..train.nrows()).collect()
        } else if opts.allow_mixed_training {
            (0..train.nrows()).collect()
        } else {
            healthy
        };
        let model = AdjustmentModel::fit(&train.select_rows(&fit_rows))?;
        (
            adjust_matrix(&train, &model)?,
            adjust_matrix(&test, &model)?,
        )
    } else {
        (train, test)
    };

    let projection = fit_projection(
        &TrainMatrix::tag(train.values().clone()),
        opts.pca_components,
    )?;
    Ok(PreparedSplit {
        train: projection.project(train.values().view())?,
        train_labels: train.meta().iter().map(|m| m.class).collect(),
        test: projection.project(test.values().view())?,
        test_labels: test.meta().iter().map(|m| m.class).collect(),
        k_max: k_max_for(matrix, &plan.train_rows),
    })
}

/// kNN(k*) accuracy on the test points; returns `(accuracy, k*)`.
pub fn classification_accuracy(split: &PreparedSplit) -> Result<(f64, usize)> {
    let labels = class_indices(&split.train_labels);
    let selection = select_k_star(split.train.view(), &labels, split.k_max.max(1))?;
    let k = selection.k_star;
    let mut correct = 0usize;
    for (row, truth) in split.test.rows().into_iter().zip(&split.test_labels) {
        if knn_predict(split.train.view(), &labels, row, k)? == truth.index() {
            correct += 1;
        }
    }
    Ok((correct as f64 / split.test_labels.len() as f64, k))
}

/// Leave-one-out kNN(k) error on the test points of a pool made of the test
/// rows and the same-class training rows, labelled "train" and "test".
pub fn operating_condition_id_error(split: &PreparedSplit, k: usize) -> Result<f64> {
    let Some(&class) = split.test_labels.first() else {
        return Err(Error::InvalidSplit("split has no test rows".into()));
    };
    if split.test_labels.iter().any(|&c| c != class) {
        return Err(Error::InvalidSplit(
            "test rows span more than one class".into(),
        ));
    }
    let same: Vec<usize> = split
        .train_labels
        .iter()
        .enumerate()
        .filter(|(_, &c)| c == class)
        .map(|(i, _)| i)
        .collect();
    if same.is_empty() {
        return Err(Error::InvalidSplit(format!(
            "no {class} training rows to pool with the test rows"
        )));
    }
    let pool = ndarray::concatenate(
        Axis(0),
        &[split.train.select(Axis(0), &same).view(), split.test.view()],
    )
    .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let n_train = same.len();
    let labels: Vec<usize> = (0..pool.nrows())
        .map(|i| usize::from(i >= n_train))
        .collect();
    let k = k.clamp(1, pool.nrows() - 1);
    let predictions = loo_predictions(pool.view(), &labels, k)?;
    let last = &predictions[k - 1];
    let wrong = (n_train..pool.nrows()).filter(|&i| last[i] != 1).count();
    Ok(wrong as f64 / (pool.nrows() - n_train) as f64)
}

pub fn evaluate_split(
    matrix: &FeatureMatrix,
    plan: &SplitPlan,
    opts: &EvalOptions,
) -> Result<CellResult> {
    let prepared = prepare_split(matrix, plan, opts)?;
    let (accuracy, k_star) = classification_accuracy(&prepared)?;
    let ocid_error = operating_condition_id_error(&prepared, k_star)?;
    Ok(CellResult {
        bearing: plan.test_bearing.clone(),
        condition: plan.test_condition,
        class: prepared.test_labels[0],
        accuracy,
        ocid_error,
        k_star,
        k_max: prepared.k_max,
        n_train: plan.train_rows.len(),
        n_test: plan.test_rows.len(),
    })
}

/// Evaluates every plan in parallel; results keep plan order.
pub fn evaluate(
    matrix: &FeatureMatrix,
    plans: &[SplitPlan],
    opts: &EvalOptions,
) -> Result<Vec<CellResult>> {
    plans
        .par_iter()
        .map(|plan| evaluate_split(matrix, plan, opts))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn prepared(
        train: Array2<f64>,
        train_labels: Vec<Class>,
        test: Array2<f64>,
        test_labels: Vec<Class>,
        k_max: usize,
    ) -> PreparedSplit {
        PreparedSplit {
            train,
            train_labels,
            test,
            test_labels,
            k_max,
        }
    }

    #[test]
    fn memorised_test_rows_are_classified() {
        let train = array![
            [0.0, 0.0],
            [0.2, 0.1],
            [0.1, 0.3],
            [5.0, 5.0],
            [5.2, 5.1],
            [5.1, 5.3]
        ];
        let labels = vec![
            Class::Healthy,
            Class::Healthy,
            Class::Healthy,
            Class::Faulty,
            Class::Faulty,
            Class::Faulty,
        ];
        let test = array![[5.0, 5.0], [5.2, 5.1]];
        let split = prepared(train, labels, test, vec![Class::Faulty; 2], 3);
        let (acc, k) = classification_accuracy(&split).unwrap();
        assert_eq!(acc, 1.0);
        assert_eq!(k, 1);
    }

    #[test]
    fn duplicated_test_rows_are_indistinguishable() {
        // Train on a grid; test rows duplicate every third grid point.
        let mut train = Vec::new();
        for i in 0..6 {
            for j in 0..6 {
                train.push([i as f64, j as f64]);
            }
        }
        let test: Vec<[f64; 2]> = train.iter().step_by(3).copied().collect();
        let to_arr = |v: &[[f64; 2]]| Array2::from_shape_fn((v.len(), 2), |(i, j)| v[i][j]);
        let split = prepared(
            to_arr(&train),
            vec![Class::Healthy; train.len()],
            to_arr(&test),
            vec![Class::Healthy; test.len()],
            5,
        );
        for k in 2..5 {
            assert_eq!(operating_condition_id_error(&split, k).unwrap(), 1.0);
        }
    }

    #[test]
    fn displaced_test_rows_are_separable() {
        let train = array![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let test = array![[50.0, 50.0], [50.5, 50.0], [50.0, 50.5]];
        let split = prepared(
            train,
            vec![Class::Faulty; 4],
            test,
            vec![Class::Faulty; 3],
            4,
        );
        assert_eq!(operating_condition_id_error(&split, 1).unwrap(), 0.0);
    }

    #[test]
    fn id_error_needs_same_class_training_rows() {
        let split = prepared(
            array![[0.0, 0.0], [1.0, 0.0]],
            vec![Class::Healthy; 2],
            array![[0.0, 0.0]],
            vec![Class::Faulty],
            1,
        );
        assert!(matches!(
            operating_condition_id_error(&split, 1),
            Err(Error::InvalidSplit(_))
        ));
    }
}
