//! Standardisation followed by principal component projection.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Feature rows that are allowed to provide fitting statistics.
///
/// Only training rows may be wrapped; test rows are only ever passed to
/// [`Projection::project`].
#[derive(Debug, Clone)]
pub struct TrainMatrix(Array2<f64>);

impl TrainMatrix {
    pub fn tag(values: Array2<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.0
    }
}

/// Train-fitted scaler plus the leading principal axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub feature_means: Array1<f64>,
    /// Population standard deviations; zero marks a constant feature.
    pub feature_stds: Array1<f64>,
    /// `k x m`, orthonormal rows.
    pub components: Array2<f64>,
    /// Variance along each component (divisor `n - 1`), non-increasing.
    pub explained_variance: Array1<f64>,
}

fn standardize(values: ArrayView2<f64>, means: &Array1<f64>, stds: &Array1<f64>) -> Array2<f64> {
    let mut z = values.to_owned();
    for mut row in z.rows_mut() {
        for ((v, &mu), &sd) in row.iter_mut().zip(means).zip(stds) {
            *v = if sd > 0.0 { (*v - mu) / sd } else { 0.0 };
        }
    }
    z
}

/// Sorted (descending) eigenpairs of a symmetric matrix.
fn eigen_desc(sym: DMatrix<f64>) -> Vec<(f64, Vec<f64>)> {
    let eig = SymmetricEigen::new(sym);
    let mut pairs: Vec<(f64, Vec<f64>)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &l)| (l, eig.eigenvectors.column(i).iter().copied().collect()))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs
}

/// Flips `v` so that its largest-magnitude entry is positive.
fn fix_sign(v: &mut [f64]) {
    let pivot = v
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |best, (i, x)| {
            if x.abs() > best.1.abs() {
                (i, *x)
            } else {
                best
            }
        })
        .1;
    if pivot < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Extends `basis` with a unit vector orthogonal to all of its members.
fn orthogonal_completion(basis: &[Vec<f64>], m: usize) -> Vec<f64> {
    for e in 0..m {
        let mut v = vec![0.0; m];
        v[e] = 1.0;
        for b in basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        if normalize(&mut v) > 1e-6 {
            return v;
        }
    }
    vec![0.0; m]
}

/// Fits the scaler and the top `n_components` principal axes on `train`.
pub fn fit_projection(train: &TrainMatrix, n_components: usize) -> Result<Projection> {
    let x = train.values();
    let (n, m) = x.dim();
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "projection needs at least 3 training rows, got {n}"
        )));
    }
    if n_components == 0 || n_components > m {
        return Err(Error::InvalidArgument(format!(
            "cannot keep {n_components} components of {m} features"
        )));
    }
    let means = x.mean_axis(Axis(0)).expect("n >= 3");
    let stds = x.std_axis(Axis(0), 0.0);
    let z = standardize(x.view(), &means, &stds);
    let zm = DMatrix::from_row_iterator(n, m, z.iter().copied());

    // Eigen-decompose whichever Gram form is smaller.
    let pairs: Vec<(f64, Vec<f64>)> = if n < m {
        let gram = &zm * zm.transpose();
        eigen_desc(gram)
            .into_iter()
            .take(n_components)
            .map(|(lambda, u)| {
                let u = nalgebra::DVector::from_vec(u);
                (lambda, (zm.transpose() * u).iter().copied().collect())
            })
            .collect()
    } else {
        eigen_desc(zm.transpose() * &zm)
            .into_iter()
            .take(n_components)
            .collect()
    };
    let lambda_max = pairs.first().map_or(0.0, |p| p.0.max(0.0));

    // Re-orthogonalise; directions with no variance get an arbitrary
    // completion of the basis.
    let mut axes: Vec<(f64, Vec<f64>)> = Vec::with_capacity(n_components);
    for (lambda, mut v) in pairs {
        let mut usable = lambda > 1e-12 * lambda_max;
        if usable {
            for (_, b) in &axes {
                let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
            }
            usable = normalize(&mut v) > 0.0;
        }
        if !usable {
            let basis: Vec<Vec<f64>> = axes.iter().map(|a| a.1.clone()).collect();
            v = orthogonal_completion(&basis, m);
        }
        axes.push((lambda.max(0.0), v));
    }

    let mut components = Array2::zeros((n_components, m));
    let mut explained = Array1::zeros(n_components);
    for (i, (lambda, mut v)) in axes.into_iter().enumerate() {
        fix_sign(&mut v);
        components.row_mut(i).assign(&Array1::from_vec(v));
        explained[i] = lambda / (n - 1) as f64;
    }
    Ok(Projection {
        feature_means: means,
        feature_stds: stds,
        components,
        explained_variance: explained,
    })
}

impl Projection {
    pub fn features(&self) -> usize {
        self.feature_means.len()
    }

    /// `((rows - means) / stds) * components^T`.
    pub fn project(&self, rows: ArrayView2<f64>) -> Result<Array2<f64>> {
        if rows.ncols() != self.features() {
            return Err(Error::InvalidArgument(format!(
                "rows have {} features, projection expects {}",
                rows.ncols(),
                self.features()
            )));
        }
        let z = standardize(rows, &self.feature_means, &self.feature_stds);
        Ok(z.dot(&self.components.t()))
    }
}
