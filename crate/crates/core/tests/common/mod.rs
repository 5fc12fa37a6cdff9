//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::f64::consts::PI;

use harmshift::features::{Class, Condition, FeatureMatrix, RowMeta};
use ndarray::Array2;

/// O(n^2) DFT magnitudes of bins `0..n/2`.
pub fn naive_dft_magnitudes(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &v) in x.iter().enumerate() {
                let ang = -2.0 * PI * (k * t % n) as f64 / n as f64;
                re += v * ang.cos();
                im += v * ang.sin();
            }
            re.hypot(im)
        })
        .collect()
}

/// Full two-sided DFT energy `sum |X_k|^2` by brute force.
pub fn naive_dft_energy(x: &[f64]) -> f64 {
    let n = x.len();
    (0..n)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &v) in x.iter().enumerate() {
                let ang = -2.0 * PI * (k * t % n) as f64 / n as f64;
                re += v * ang.cos();
                im += v * ang.sin();
            }
            re * re + im * im
        })
        .sum()
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

fn monomial_row(a: f64, b: f64) -> [f64; 6] {
    [1.0, a, b, a * a, a * b, b * b]
}

/// Least-squares coefficients from the 6x6 normal equations.
pub fn normal_equations_fit(fo: &[f64], to: &[f64], y: &[f64]) -> Vec<f64> {
    let rows: Vec<[f64; 6]> = fo
        .iter()
        .zip(to)
        .map(|(&a, &b)| monomial_row(a, b))
        .collect();
    let mut xtx = vec![vec![0.0; 6]; 6];
    let mut xty = vec![0.0; 6];
    for (r, &v) in rows.iter().zip(y) {
        for i in 0..6 {
            xty[i] += r[i] * v;
            for j in 0..6 {
                xtx[i][j] += r[i] * r[j];
            }
        }
    }
    gauss_solve(xtx, xty)
}

/// Predicted value of coefficients `c` at `(a, b)`.
pub fn poly(c: &[f64], a: f64, b: f64) -> f64 {
    monomial_row(a, b).iter().zip(c).map(|(m, k)| m * k).sum()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// kNN vote by full sort; vote ties go to the tied class met first.
pub fn brute_knn(
    points: &[Vec<f64>],
    labels: &[usize],
    query: &[f64],
    k: usize,
    skip: Option<usize>,
) -> usize {
    let mut idx: Vec<usize> = (0..points.len()).filter(|&i| Some(i) != skip).collect();
    idx.sort_by(|&i, &j| {
        sq_dist(&points[i], query)
            .partial_cmp(&sq_dist(&points[j], query))
            .unwrap()
            .then(i.cmp(&j))
    });
    let near = &idx[..k];
    let mut counts = std::collections::HashMap::new();
    for &i in near {
        *counts.entry(labels[i]).or_insert(0usize) += 1;
    }
    let best = *counts.values().max().unwrap();
    near.iter()
        .map(|&i| labels[i])
        .find(|l| counts[l] == best)
        .unwrap()
}

/// Class-balanced error as an exact fraction `(numerator, denominator)`.
pub fn balanced_error_exact(pred: &[usize], truth: &[usize]) -> (u64, u64) {
    let classes: std::collections::BTreeSet<usize> = truth.iter().copied().collect();
    let (mut num, mut den) = (0u64, 1u64);
    for &c in &classes {
        let total = truth.iter().filter(|&&t| t == c).count() as u64;
        let wrong = pred
            .iter()
            .zip(truth)
            .filter(|(&p, &t)| t == c && p != t)
            .count() as u64;
        // num/den + wrong/total
        num = num * total + wrong * den;
        den *= total;
    }
    (num, den * classes.len() as u64)
}

/// k* by exhaustive LOO with exact error comparison; ties to smallest k.
pub fn brute_k_star(
    points: &[Vec<f64>],
    labels: &[usize],
    k_max: usize,
) -> (usize, Vec<(u64, u64)>) {
    let k_max = k_max.min(points.len() - 1);
    let errors: Vec<(u64, u64)> = (1..=k_max)
        .map(|k| {
            let pred: Vec<usize> = (0..points.len())
                .map(|i| brute_knn(points, labels, &points[i], k, Some(i)))
                .collect();
            balanced_error_exact(&pred, labels)
        })
        .collect();
    let mut best = 0;
    for (i, e) in errors.iter().enumerate() {
        let b = errors[best];
        if (e.0 as u128) * (b.1 as u128) < (b.0 as u128) * (e.1 as u128) {
            best = i;
        }
    }
    (best + 1, errors)
}

pub fn to_rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// Fifteen distinct (rpm, Nm) operating points.
pub fn fifteen_conditions() -> Vec<Condition> {
    harmshift::synth::ConditionGrid::fifteen_cells().cells
}

/// One row per condition; feature `j` is `intercept[j] + poly(coeffs[j])`.
pub fn polynomial_matrix(
    conditions: &[Condition],
    intercepts: &[f64],
    coeffs: &[[f64; 5]],
) -> FeatureMatrix {
    let m = intercepts.len();
    let values = Array2::from_shape_fn((conditions.len(), m), |(i, j)| {
        let (a, b) = (conditions[i].fo_hz(), conditions[i].load_nm);
        let c = coeffs[j];
        intercepts[j] + poly(&[0.0, c[0], c[1], c[2], c[3], c[4]], a, b)
    });
    let meta = conditions
        .iter()
        .enumerate()
        .map(|(i, &condition)| RowMeta {
            bearing_id: format!("B{}", i % 3),
            class: Class::Healthy,
            condition,
            run: 0,
            segment: 0,
        })
        .collect();
    let columns = (0..m).map(|j| format!("f{j}")).collect();
    FeatureMatrix::new(values, meta, columns).unwrap()
}
