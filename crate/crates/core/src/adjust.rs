//! Operating-condition adjustment.
//!
//! Each feature is modelled on healthy training rows as a degree-2
//! polynomial in operating frequency `a` (Hz) and load `b` (Nm) over the
//! monomials `[1, a, b, a^2, ab, b^2]`. The intercept is discarded after
//! fitting, so subtracting the prediction removes only the
//! condition-dependent trend and leaves the healthy baseline level (and any
//! fault excess) in place.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// Column names of the condition design matrix.
pub const MONOMIALS: [&str; 6] = ["1", "a", "b", "a^2", "ab", "b^2"];

const HEADER_TAG: &str = "harmshift-adjustment";

/// Relative size of an `R` diagonal entry below which the corresponding
/// monomial is treated as collinear with the preceding ones.
const RANK_TOLERANCE: f64 = 1e-10;

/// Where a model came from.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Provenance {
    pub manifest_hash: String,
    pub healthy_only: bool,
}

/// Per-feature regression coefficients (`m x 6`), intercept column zeroed.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjustmentModel {
    coeffs: Array2<f64>,
    pub trained_on: Provenance,
}

/// Row `i` is `[1, fo[i], to[i], fo[i]^2, fo[i] to[i], to[i]^2]`.
pub fn make_condition_monomials(fo: &[f64], to: &[f64]) -> Result<Array2<f64>> {
    if fo.len() != to.len() {
        return Err(Error::InvalidArgument(format!(
            "{} operating frequencies but {} loads",
            fo.len(),
            to.len()
        )));
    }
    if let Some(i) = fo.iter().chain(to).position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "condition value {i} is not finite"
        )));
    }
    Ok(Array2::from_shape_fn((fo.len(), 6), |(i, j)| {
        let (a, b) = (fo[i], to[i]);
        match j {
            0 => 1.0,
            1 => a,
            2 => b,
            3 => a * a,
            4 => a * b,
            _ => b * b,
        }
    }))
}

/// Householder QR of a tall matrix, stored compactly.
struct Qr {
    /// Householder vectors below the diagonal (with implicit leading entry
    /// stored in `v0`), `R` on and above it.
    qr: Array2<f64>,
    v0: Vec<f64>,
    beta: Vec<f64>,
}

impl Qr {
    fn factor(mut a: Array2<f64>) -> Self {
        let (n, p) = a.dim();
        let mut v0 = vec![0.0; p];
        let mut beta = vec![0.0; p];
        for k in 0..p {
            let norm = (k..n).map(|i| a[[i, k]] * a[[i, k]]).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            let alpha = if a[[k, k]] > 0.0 { -norm } else { norm };
            let head = a[[k, k]] - alpha;
            let vnorm2 = head * head + (k + 1..n).map(|i| a[[i, k]] * a[[i, k]]).sum::<f64>();
            v0[k] = head;
            beta[k] = if vnorm2 > 0.0 { 2.0 / vnorm2 } else { 0.0 };
            // Apply reflector to the remaining columns.
            for j in k + 1..p {
                let dot = head * a[[k, j]] + (k + 1..n).map(|i| a[[i, k]] * a[[i, j]]).sum::<f64>();
                let f = beta[k] * dot;
                a[[k, j]] -= f * head;
                for i in k + 1..n {
                    let vi = a[[i, k]];
                    a[[i, j]] -= f * vi;
                }
            }
            a[[k, k]] = alpha;
        }
        Qr { qr: a, v0, beta }
    }

    fn r_diag(&self) -> Vec<f64> {
        (0..self.qr.ncols()).map(|k| self.qr[[k, k]]).collect()
    }

    /// Least-squares solution of `A x = y`.
    fn solve(&self, y: ArrayView1<f64>) -> Array1<f64> {
        let (n, p) = self.qr.dim();
        let mut b = y.to_owned();
        for k in 0..p {
            if self.beta[k] == 0.0 {
                continue;
            }
            let dot = self.v0[k] * b[k] + (k + 1..n).map(|i| self.qr[[i, k]] * b[i]).sum::<f64>();
            let f = self.beta[k] * dot;
            b[k] -= f * self.v0[k];
            for i in k + 1..n {
                b[i] -= f * self.qr[[i, k]];
            }
        }
        let mut x = Array1::zeros(p);
        for k in (0..p).rev() {
            let s = b[k] - (k + 1..p).map(|j| self.qr[[k, j]] * x[j]).sum::<f64>();
            x[k] = s / self.qr[[k, k]];
        }
        x
    }
}

/// Fits one degree-2 condition polynomial per feature column of `h`.
///
/// Columns of the design are scaled to unit max-abs before an orthogonal
/// factorisation; coefficients are scaled back before storage.
pub fn fit_adjustment(h: &Array2<f64>, fo: &[f64], to: &[f64]) -> Result<AdjustmentModel> {
    let x = make_condition_monomials(fo, to)?;
    let n = x.nrows();
    if h.nrows() != n {
        return Err(Error::InvalidArgument(format!(
            "{} feature rows but {n} condition rows",
            h.nrows()
        )));
    }
    if n < MONOMIALS.len() {
        return Err(Error::IllConditionedDesign {
            monomials: MONOMIALS.iter().map(|s| s.to_string()).collect(),
        });
    }
    if let Some(v) = h.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "feature value {v} is not finite"
        )));
    }

    let mut scaled = x;
    let mut col_scale = [1.0; 6];
    for (j, scale) in col_scale.iter_mut().enumerate() {
        let max = scaled.column(j).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if max > 0.0 {
            *scale = max;
            scaled.column_mut(j).mapv_inplace(|v| v / max);
        }
    }

    let qr = Qr::factor(scaled);
    let diag = qr.r_diag();
    let largest = diag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let deficient: Vec<String> = diag
        .iter()
        .enumerate()
        .filter(|(_, d)| d.abs() <= RANK_TOLERANCE * largest.max(f64::MIN_POSITIVE))
        .map(|(j, _)| MONOMIALS[j].to_string())
        .collect();
    if !deficient.is_empty() {
        return Err(Error::IllConditionedDesign {
            monomials: deficient,
        });
    }

    let rows: Vec<[f64; 6]> = (0..h.ncols())
        .into_par_iter()
        .map(|i| {
            let beta = qr.solve(h.column(i));
            let mut out = [0.0; 6];
            for j in 1..6 {
                out[j] = beta[j] / col_scale[j];
            }
            out
        })
        .collect();
    let coeffs = Array2::from_shape_fn((rows.len(), 6), |(i, j)| rows[i][j]);
    AdjustmentModel::new(coeffs)
}

impl AdjustmentModel {
    /// Wraps an `m x 6` coefficient matrix; the intercept column is forced to 0.
    pub fn new(mut coeffs: Array2<f64>) -> Result<Self> {
        if coeffs.ncols() != MONOMIALS.len() {
            return Err(Error::InvalidArgument(format!(
                "adjustment coefficients need {} columns, got {}",
                MONOMIALS.len(),
                coeffs.ncols()
            )));
        }
        if coeffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "adjustment coefficient is not finite".into(),
            ));
        }
        coeffs.column_mut(0).fill(0.0);
        Ok(Self {
            coeffs,
            trained_on: Provenance::default(),
        })
    }

    /// Fits on the rows of a feature matrix using its own condition metadata.
    pub fn fit(h: &FeatureMatrix) -> Result<Self> {
        fit_adjustment(h.values(), &h.fo(), &h.to())
    }

    pub fn with_provenance(mut self, trained_on: Provenance) -> Self {
        self.trained_on = trained_on;
        self
    }

    pub fn coeffs(&self) -> &Array2<f64> {
        &self.coeffs
    }

    pub fn features(&self) -> usize {
        self.coeffs.nrows()
    }

    /// Flat text form: a header line, then one line of six coefficients per
    /// feature in shortest round-trip decimal.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{HEADER_TAG} m={} monomials={} healthy_only={} manifest={}\n",
            self.features(),
            MONOMIALS.join(","),
            self.trained_on.healthy_only,
            if self.trained_on.manifest_hash.is_empty() {
                "-"
            } else {
                &self.trained_on.manifest_hash
            },
        );
        for row in self.coeffs.rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn from_text(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::format(origin, "empty model file"))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some(HEADER_TAG) {
            return Err(Error::format(origin, "missing model header"));
        }
        let mut m = None;
        let mut provenance = Provenance::default();
        for field in fields {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::format(origin, format!("bad header field {field:?}")))?;
            match key {
                "m" => {
                    m = Some(
                        value
                            .parse::<usize>()
                            .map_err(|e| Error::format(origin, e.to_string()))?,
                    )
                }
                "monomials" if value != MONOMIALS.join(",") => {
                    return Err(Error::format(
                        origin,
                        format!("unsupported monomials {value}"),
                    ));
                }
                "healthy_only" => provenance.healthy_only = value == "true",
                "manifest" if value != "-" => provenance.manifest_hash = value.to_string(),
                _ => {}
            }
        }
        let m = m.ok_or_else(|| Error::format(origin, "header lacks m"))?;
        let mut values = Vec::with_capacity(m * 6);
        for (i, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::format(origin, format!("line {}: {e}", i + 2)))?;
            if row.len() != 6 {
                return Err(Error::format(
                    origin,
                    format!("line {}: expected 6 coefficients", i + 2),
                ));
            }
            values.extend(row);
        }
        if values.len() != m * 6 {
            return Err(Error::format(
                origin,
                format!("header declares {m} features, found {}", values.len() / 6),
            ));
        }
        let coeffs = Array2::from_shape_vec((m, 6), values)
            .map_err(|e| Error::format(origin, e.to_string()))?;
        Ok(Self::new(coeffs)?.with_provenance(provenance))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }
}

/// `H_adj[:, i] = H[:, i] - X A[i, :]^T`.
pub fn apply_adjustment(
    h: &Array2<f64>,
    fo: &[f64],
    to: &[f64],
    model: &AdjustmentModel,
) -> Result<Array2<f64>> {
    let x = make_condition_monomials(fo, to)?;
    if h.nrows() != x.nrows() {
        return Err(Error::InvalidArgument(format!(
            "{} feature rows but {} condition rows",
            h.nrows(),
            x.nrows()
        )));
    }
    if h.ncols() != model.features() {
        return Err(Error::InvalidArgument(format!(
            "{} feature columns but the model has {}",
            h.ncols(),
            model.features()
        )));
    }
    let trend = x.dot(&model.coeffs.t());
    Ok(h - &trend)
}

/// Applies `model` to a feature matrix using its own condition metadata.
pub fn adjust_matrix(h: &FeatureMatrix, model: &AdjustmentModel) -> Result<FeatureMatrix> {
    h.with_values(apply_adjustment(h.values(), &h.fo(), &h.to(), model)?)
}
