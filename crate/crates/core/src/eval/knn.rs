//! Euclidean k-nearest-neighbour voting with deterministic tie rules.
//!
//! Neighbours are ordered by distance, equal distances by lower row index.
//! A vote tie between classes goes to the tied class whose member appears
//! first in that order.

use ndarray::{ArrayView1, ArrayView2};

use crate::error::{Error, Result};

fn squared_distance(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Row indices of `points` ordered by distance to `query`, skipping `exclude`.
fn neighbour_order(
    points: ArrayView2<f64>,
    query: ArrayView1<f64>,
    exclude: Option<usize>,
) -> Vec<usize> {
    let mut order: Vec<(f64, usize)> = (0..points.nrows())
        .filter(|&i| Some(i) != exclude)
        .map(|i| (squared_distance(points.row(i), query), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    order.into_iter().map(|(_, i)| i).collect()
}

/// Running vote over a neighbour ordering, yielding the winner for every
/// `k = 1..=k_max`.
fn votes_for_each_k(order: &[usize], labels: &[usize], k_max: usize) -> Vec<usize> {
    let n_labels = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; n_labels];
    let mut first_rank = vec![usize::MAX; n_labels];
    let mut winners = Vec::with_capacity(k_max);
    for (rank, &idx) in order.iter().take(k_max).enumerate() {
        let label = labels[idx];
        counts[label] += 1;
        if first_rank[label] == usize::MAX {
            first_rank[label] = rank;
        }
        let best = *counts.iter().max().unwrap_or(&0);
        let winner = (0..n_labels)
            .filter(|&l| counts[l] == best)
            .min_by_key(|&l| first_rank[l])
            .unwrap_or(label);
        winners.push(winner);
    }
    winners
}

fn check_inputs(points: ArrayView2<f64>, labels: &[usize]) -> Result<()> {
    if points.nrows() == 0 {
        return Err(Error::InvalidArgument(
            "kNN needs at least one training point".into(),
        ));
    }
    if points.nrows() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} training points but {} labels",
            points.nrows(),
            labels.len()
        )));
    }
    Ok(())
}

/// Majority label among the `k` nearest training points.
pub fn knn_predict(
    points: ArrayView2<f64>,
    labels: &[usize],
    query: ArrayView1<f64>,
    k: usize,
) -> Result<usize> {
    check_inputs(points, labels)?;
    if k == 0 || k > points.nrows() {
        return Err(Error::InvalidArgument(format!(
            "k={k} outside 1..={}",
            points.nrows()
        )));
    }
    if query.len() != points.ncols() {
        return Err(Error::InvalidArgument(format!(
            "query has {} coordinates, training points have {}",
            query.len(),
            points.ncols()
        )));
    }
    let order = neighbour_order(points, query, None);
    Ok(*votes_for_each_k(&order, labels, k).last().expect("k >= 1"))
}

/// Leave-one-out predictions for every `k` in `1..=k_max`:
/// `result[k - 1][i]` is the prediction for point `i`.
pub fn loo_predictions(
    points: ArrayView2<f64>,
    labels: &[usize],
    k_max: usize,
) -> Result<Vec<Vec<usize>>> {
    check_inputs(points, labels)?;
    let n = points.nrows();
    if k_max == 0 || k_max > n - 1 {
        return Err(Error::InvalidArgument(format!(
            "leave-one-out k_max={k_max} outside 1..={}",
            n.saturating_sub(1)
        )));
    }
    let mut by_k = vec![vec![0usize; n]; k_max];
    for i in 0..n {
        let order = neighbour_order(points, points.row(i), Some(i));
        for (row, winner) in by_k.iter_mut().zip(votes_for_each_k(&order, labels, k_max)) {
            row[i] = winner;
        }
    }
    Ok(by_k)
}

/// Error with each class weighted equally: the mean over classes of the
/// fraction of that class's points that are misclassified.
pub fn class_balanced_error(predicted: &[usize], truth: &[usize]) -> f64 {
    let n_labels = truth.iter().copied().max().map_or(0, |m| m + 1);
    let mut total = vec![0usize; n_labels];
    let mut wrong = vec![0usize; n_labels];
    for (&p, &t) in predicted.iter().zip(truth) {
        total[t] += 1;
        if p != t {
            wrong[t] += 1;
        }
    }
    let present: Vec<f64> = total
        .iter()
        .zip(&wrong)
        .filter(|(t, _)| **t > 0)
        .map(|(&t, &w)| w as f64 / t as f64)
        .collect();
    if present.is_empty() {
        0.0
    } else {
        present.iter().sum::<f64>() / present.len() as f64
    }
}

const TIE_TOLERANCE: f64 = 1e-12;

/// Outcome of the k search.
#[derive(Debug, Clone, PartialEq)]
pub struct KSelection {
    pub k_star: usize,
    /// Class-balanced LOO error for `k = 1..=k_max`.
    pub errors: Vec<f64>,
}

/// Picks the `k` in `1..=k_max` with the lowest class-balanced leave-one-out
/// error; ties go to the smallest `k`. `k_max` is clamped to `n - 1`.
pub fn select_k_star(
    points: ArrayView2<f64>,
    labels: &[usize],
    k_max: usize,
) -> Result<KSelection> {
    check_inputs(points, labels)?;
    if points.nrows() < 2 {
        return Err(Error::InvalidArgument(
            "k selection needs at least two training points".into(),
        ));
    }
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be >= 1".into()));
    }
    let k_max = k_max.min(points.nrows() - 1);
    let predictions = loo_predictions(points, labels, k_max)?;
    let errors: Vec<f64> = predictions
        .iter()
        .map(|p| class_balanced_error(p, labels))
        .collect();
    // Errors are sums of small fractions; rounding must not break ties.
    let mut k_star = 1;
    for (i, &e) in errors.iter().enumerate() {
        if e < errors[k_star - 1] - TIE_TOLERANCE {
            k_star = i + 1;
        }
    }
    Ok(KSelection { k_star, errors })
}
