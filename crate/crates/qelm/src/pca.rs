//! Principal component analysis by SVD of the centered data matrix, plus the
//! rank-k reconstruction filter used for denoising.
//!
//! Sign convention: the largest-magnitude entry of each component is made
//! positive, so fits are reproducible across platforms.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A fitted PCA basis for one patch (or for full spectra, in filter use).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    /// Per-column mean of the training data.
    pub mean: Vec<f64>,
    /// Component vectors as rows (M × bins), mutually orthonormal.
    pub components: Vec<Vec<f64>>,
    /// Variance captured by each component, descending.
    pub explained_variance: Vec<f64>,
    /// Total variance of the training data (all components).
    pub total_variance: f64,
}

/// Fits an `m`-component PCA on `rows` (samples × bins).
pub fn pca_fit(rows: &DMatrix<f64>, m: usize) -> Result<PcaModel> {
    let (n, p) = rows.shape();
    if m == 0 {
        return Err(Error::Shape("component count must be at least 1".into()));
    }
    if m > n.min(p) {
        return Err(Error::Shape(format!(
            "cannot extract {m} components from a {n}×{p} matrix"
        )));
    }
    if n < 2 {
        return Err(Error::Shape("need at least 2 samples to fit a PCA".into()));
    }

    let mean: Vec<f64> = (0..p).map(|j| rows.column(j).mean()).collect();
    let mut centered = rows.clone();
    for j in 0..p {
        let mu = mean[j];
        for i in 0..n {
            centered[(i, j)] -= mu;
        }
    }

    let svd = centered.svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let denom = (n - 1) as f64;
    let total_variance: f64 = svd.singular_values.iter().map(|s| s * s / denom).sum();

    let mut components = Vec::with_capacity(m);
    let mut explained_variance = Vec::with_capacity(m);
    for k in 0..m {
        let mut comp: Vec<f64> = v_t.row(k).iter().copied().collect();
        // Fix the sign: largest-magnitude entry positive.
        let dominant = comp
            .iter()
            .fold(0.0f64, |acc, &x| if x.abs() > acc.abs() { x } else { acc });
        if dominant < 0.0 {
            comp.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(comp);
        explained_variance.push(svd.singular_values[k] * svd.singular_values[k] / denom);
    }

    Ok(PcaModel {
        mean,
        components,
        explained_variance,
        total_variance,
    })
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Projects a row onto the component basis: C·(row − mean).
    pub fn transform(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.dim() {
            return Err(Error::Shape(format!(
                "row has {} bins, model expects {}",
                row.len(),
                self.dim()
            )));
        }
        Ok(self
            .components
            .iter()
            .map(|c| {
                c.iter()
                    .zip(row.iter().zip(&self.mean))
                    .map(|(ck, (&x, &mu))| ck * (x - mu))
                    .sum()
            })
            .collect())
    }

    /// Maps component coordinates back to data space: mean + Cᵀ·comps.
    pub fn inverse(&self, comps: &[f64]) -> Result<Vec<f64>> {
        if comps.len() != self.n_components() {
            return Err(Error::Shape(format!(
                "{} coordinates for a {}-component model",
                comps.len(),
                self.n_components()
            )));
        }
        let mut row = self.mean.clone();
        for (c, &w) in self.components.iter().zip(comps) {
            for (r, &ck) in row.iter_mut().zip(c) {
                *r += w * ck;
            }
        }
        Ok(row)
    }

    /// Rank-k reconstruction of one row (projection onto the component span).
    pub fn reconstruct_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.inverse(&self.transform(row)?)
    }

    /// Rank-k reconstruction of every row of a matrix.
    pub fn reconstruct_rows(&self, rows: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut out = rows.clone();
        for i in 0..rows.nrows() {
            let row: Vec<f64> = rows.row(i).iter().copied().collect();
            let rec = self.reconstruct_row(&row)?;
            out.set_row(i, &DVector::from_vec(rec).transpose());
        }
        Ok(out)
    }

    /// Normalized cumulative explained variance, in (0, 1].
    pub fn cumulative_explained_variance(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.explained_variance
            .iter()
            .map(|v| {
                acc += v;
                if self.total_variance > 0.0 {
                    acc / self.total_variance
                } else {
                    1.0
                }
            })
            .collect()
    }
}

/// Fits a k-component PCA on `rows` and replaces every row by its rank-k
/// reconstruction. Fit and application on the same matrix; for train/test
/// separation fit with [`pca_fit`] and apply [`PcaModel::reconstruct_rows`].
pub fn pca_filter(rows: &DMatrix<f64>, k: usize) -> Result<(PcaModel, DMatrix<f64>)> {
    if rows.nrows() <= k {
        return Err(Error::Shape(format!(
            "filter needs more than {k} samples, got {}",
            rows.nrows()
        )));
    }
    let model = pca_fit(rows, k)?;
    let filtered = model.reconstruct_rows(rows)?;
    Ok((model, filtered))
}
