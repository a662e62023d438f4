//! The trained output layer: pseudoinverse regression from reservoir
//! probabilities to atmospheric parameters, plus the relative-error and
//! accuracy metrics and the train/test split.
//!
//! Targets are regressed in the representation of [`AtmosphericParams`]:
//! log10 for the mixing ratios, physical units for mass, radius and
//! temperature. Every target is therefore bounded away from zero (log10
//! mixing ratios ≤ −1, physicals ≥ 0.8), which keeps the relative-error
//! metric meaningful.

use nalgebra::DMatrix;
use rand::{seq::SliceRandom, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::params::{AtmosphericParams, Param, PARAM_COUNT};
use crate::reservoir::ProbabilityMatrix;

/// Relative cutoff under which singular values are discarded when inverting.
pub const SV_CUTOFF: f64 = 1e-10;

/// Default success threshold (percent) of the accuracy metric.
pub const DEFAULT_THRESHOLD: f64 = 5.0;

/// Targets as a D_feat × D matrix, rows in [`Param::ALL`] order, mixing
/// ratios in log10.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetMatrix {
    pub values: DMatrix<f64>,
}

impl TargetMatrix {
    pub fn from_labels(labels: &[AtmosphericParams]) -> Self {
        let values = DMatrix::from_fn(PARAM_COUNT, labels.len(), |r, c| {
            labels[c].get(Param::ALL[r])
        });
        TargetMatrix { values }
    }

    pub fn n_samples(&self) -> usize {
        self.values.ncols()
    }
}

/// The trained linear map, with the cutoff and effective rank used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutWeights {
    /// Row-major D_feat × D_out weight matrix.
    pub rows: Vec<Vec<f64>>,
    pub sv_cutoff: f64,
    pub rank: usize,
}

impl ReadoutWeights {
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows.len(), self.rows[0].len(), |r, c| self.rows[r][c])
    }

    fn from_matrix(w: &DMatrix<f64>, sv_cutoff: f64, rank: usize) -> Self {
        ReadoutWeights {
            rows: (0..w.nrows())
                .map(|r| w.row(r).iter().copied().collect())
                .collect(),
            sv_cutoff,
            rank,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Numeric(format!("weights serialization: {e}")))?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
    }
}

/// Moore–Penrose pseudoinverse by SVD, discarding singular values below
/// `rcond`·σ_max. Returns the pseudoinverse and the retained rank.
pub fn pseudoinverse(m: &DMatrix<f64>, rcond: f64) -> Result<(DMatrix<f64>, usize)> {
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let sigma_max = svd.singular_values.max();
    if sigma_max <= 0.0 {
        return Err(Error::Numeric("cannot invert an all-zero matrix".into()));
    }
    let cutoff = rcond * sigma_max;
    let mut rank = 0usize;
    let inv_sigma: Vec<f64> = svd
        .singular_values
        .iter()
        .map(|&s| {
            if s > cutoff {
                rank += 1;
                1.0 / s
            } else {
                0.0
            }
        })
        .collect();
    // P⁺ = V Σ⁺ Uᵀ, assembled as (scaled Vᵀ rows)ᵀ · Uᵀ.
    let mut scaled_vt = v_t.clone();
    for (k, &is) in inv_sigma.iter().enumerate() {
        scaled_vt.row_mut(k).scale_mut(is);
    }
    Ok((scaled_vt.transpose() * u.transpose(), rank))
}

/// Trains the readout: W = Y·P⁺ (Y the targets, P the training probability
/// matrix). The residual ‖W·P − Y‖ is the least-squares minimum over all
/// linear maps of this shape.
pub fn train(p_train: &ProbabilityMatrix, y_train: &TargetMatrix) -> Result<ReadoutWeights> {
    let p = &p_train.values;
    let y = &y_train.values;
    if p.ncols() != y.ncols() {
        return Err(Error::Shape(format!(
            "{} probability columns vs {} target columns",
            p.ncols(),
            y.ncols()
        )));
    }
    if p.ncols() == 0 {
        return Err(Error::Shape("empty training set".into()));
    }
    let (pinv, rank) = pseudoinverse(p, SV_CUTOFF)?;
    let w = y * pinv;
    Ok(ReadoutWeights::from_matrix(&w, SV_CUTOFF, rank))
}

/// Applies the trained map to probability columns.
pub fn predict(w: &ReadoutWeights, p: &ProbabilityMatrix) -> Result<DMatrix<f64>> {
    let wm = w.matrix();
    if wm.ncols() != p.values.nrows() {
        return Err(Error::Shape(format!(
            "weights expect {} features, matrix has {}",
            wm.ncols(),
            p.values.nrows()
        )));
    }
    Ok(wm * &p.values)
}

/// Relative error in percent: (y_test − y_pred)²/y_test² × 100.
pub fn relative_error(y_test: f64, y_pred: f64) -> Result<f64> {
    if y_test == 0.0 {
        return Err(Error::Numeric("relative error undefined for zero target".into()));
    }
    let d = y_test - y_pred;
    Ok(d * d / (y_test * y_test) * 100.0)
}

/// Per-(parameter, sample) relative errors.
pub fn error_matrix(y_test: &DMatrix<f64>, y_pred: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if y_test.shape() != y_pred.shape() {
        return Err(Error::Shape(format!(
            "target shape {:?} vs prediction shape {:?}",
            y_test.shape(),
            y_pred.shape()
        )));
    }
    let mut out = DMatrix::zeros(y_test.nrows(), y_test.ncols());
    for r in 0..y_test.nrows() {
        for c in 0..y_test.ncols() {
            out[(r, c)] = relative_error(y_test[(r, c)], y_pred[(r, c)])?;
        }
    }
    Ok(out)
}

/// Fraction of errors at or below the threshold (boundary counts as
/// success).
pub fn accuracy(errors: &[f64], threshold: f64) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::Shape("accuracy of an empty error list".into()));
    }
    let hits = errors.iter().filter(|&&e| e <= threshold).count();
    Ok(hits as f64 / errors.len() as f64)
}

/// Per-parameter retrieval metrics of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub threshold: f64,
    /// Accuracy per parameter, [`Param::ALL`] order.
    pub accuracy: [f64; PARAM_COUNT],
    /// Relative errors, parameters × test samples.
    pub errors: DMatrix<f64>,
}

impl MetricsReport {
    pub fn from_predictions(
        y_test: &DMatrix<f64>,
        y_pred: &DMatrix<f64>,
        threshold: f64,
    ) -> Result<Self> {
        let errors = error_matrix(y_test, y_pred)?;
        let mut acc = [0.0; PARAM_COUNT];
        for (r, slot) in acc.iter_mut().enumerate() {
            let row: Vec<f64> = errors.row(r).iter().copied().collect();
            *slot = accuracy(&row, threshold)?;
        }
        Ok(MetricsReport {
            threshold,
            accuracy: acc,
            errors,
        })
    }

    pub fn accuracy_of(&self, p: Param) -> f64 {
        self.accuracy[p.index()]
    }
}

/// Seed-reproducible disjoint random split of 0..n into train and test
/// index lists. The train side keeps its shuffled order, so prefixes of it
/// form nested subsets.
pub fn split(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&train_fraction) || train_fraction == 0.0 {
        return Err(Error::Config(format!(
            "train fraction must lie strictly between 0 and 1, got {train_fraction}"
        )));
    }
    let n_train = (n as f64 * train_fraction).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::Config(format!(
            "split of {n} samples at fraction {train_fraction} leaves an empty side"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut ChaCha12Rng::seed_from_u64(seed));
    let test = indices.split_off(n_train);
    Ok((indices, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reservoir::Shots;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn pmatrix(values: DMatrix<f64>) -> ProbabilityMatrix {
        ProbabilityMatrix {
            values,
            shots: Shots::INFINITE,
        }
    }

    #[test]
    fn identity_probabilities_return_the_targets() {
        let y = TargetMatrix {
            values: DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
        };
        let p = pmatrix(DMatrix::identity(3, 3));
        let w = train(&p, &y).unwrap();
        let wm = w.matrix();
        for r in 0..2 {
            for c in 0..3 {
                assert_relative_eq!(wm[(r, c)], y.values[(r, c)], epsilon = 1e-12);
            }
        }
        assert_eq!(w.rank, 3);
    }

    #[test]
    fn diagonal_case_divides_componentwise() {
        let p = pmatrix(DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]));
        let y = TargetMatrix {
            values: DMatrix::from_row_slice(1, 2, &[2.0, 8.0]),
        };
        let w = train(&p, &y).unwrap();
        assert_relative_eq!(w.rows[0][0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(w.rows[0][1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn training_matches_normal_equations_oracle() {
        // Underdetermined consistent system: P (288×50) has full column
        // rank, so the minimum-norm solution is W = Y (PᵀP)⁻¹Pᵀ exactly.
        // The oracle solves the 50×50 normal equations by hand-rolled
        // Gaussian elimination, independent of the SVD route.
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        let p = DMatrix::from_fn(288, 50, |_, _| rng.random_range(0.0..1.0));
        let y = DMatrix::from_fn(7, 50, |_, _| rng.random_range(-5.0..5.0));

        let w = train(&pmatrix(p.clone()), &TargetMatrix { values: y.clone() }).unwrap();
        let wm = w.matrix();

        let residual = (&wm * &p - &y).norm();
        assert!(residual < 1e-8 * y.norm(), "residual {residual}");

        // Oracle: solve (PᵀP) G = Pᵀ column by column with partial pivoting.
        let ptp = p.transpose() * &p;
        let pt = p.transpose();
        let n = 50;
        let mut g = DMatrix::zeros(n, 288);
        for col in 0..288 {
            let mut a: Vec<Vec<f64>> = (0..n)
                .map(|i| (0..n).map(|j| ptp[(i, j)]).collect())
                .collect();
            let mut b: Vec<f64> = (0..n).map(|i| pt[(i, col)]).collect();
            for k in 0..n {
                let piv = (k..n)
                    .max_by(|&i, &j| a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap())
                    .unwrap();
                a.swap(k, piv);
                b.swap(k, piv);
                for i in k + 1..n {
                    let f = a[i][k] / a[k][k];
                    for j in k..n {
                        a[i][j] -= f * a[k][j];
                    }
                    b[i] -= f * b[k];
                }
            }
            for k in (0..n).rev() {
                let mut s = b[k];
                for j in k + 1..n {
                    s -= a[k][j] * g[(j, col)];
                }
                g[(k, col)] = s / a[k][k];
            }
        }
        let w_oracle = &y * g;
        for (a, b) in wm.iter().zip(w_oracle.iter()) {
            assert!((a - b).abs() <= 1e-8 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn all_zero_matrix_is_rejected() {
        let p = pmatrix(DMatrix::zeros(4, 3));
        let y = TargetMatrix {
            values: DMatrix::zeros(2, 3),
        };
        assert!(train(&p, &y).is_err());
    }

    #[test]
    fn pseudoinverse_identities_hold() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let p = DMatrix::from_fn(20, 12, |_, _| rng.random_range(-1.0..1.0));
        let (pinv, rank) = pseudoinverse(&p, SV_CUTOFF).unwrap();
        assert_eq!(rank, 12);
        let ppp = &p * &pinv * &p;
        assert!((&ppp - &p).norm() < 1e-10 * p.norm());
        let ipi = &pinv * &p * &pinv;
        assert!((&ipi - &pinv).norm() < 1e-10 * pinv.norm());
    }

    #[test]
    fn prediction_is_linear() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let w = ReadoutWeights {
            rows: (0..3)
                .map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect(),
            sv_cutoff: SV_CUTOFF,
            rank: 3,
        };
        let p1 = DMatrix::from_fn(6, 2, |_, _| rng.random_range(0.0..1.0));
        let p2 = DMatrix::from_fn(6, 2, |_, _| rng.random_range(0.0..1.0));
        let (a, b) = (0.7, -1.3);
        let lhs = predict(&w, &pmatrix(a * &p1 + b * &p2)).unwrap();
        let rhs = a * predict(&w, &pmatrix(p1.clone())).unwrap()
            + b * predict(&w, &pmatrix(p2.clone())).unwrap();
        for (x, y) in lhs.iter().zip(rhs.iter()) {
            assert!((x - y).abs() < 1e-12);
        }

        let zero = predict(&w, &pmatrix(DMatrix::zeros(6, 1))).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn training_columns_are_reproduced_within_residual() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        // Overdetermined in the useful sense: 10 features, 6 samples.
        let p = DMatrix::from_fn(10, 6, |_, _| rng.random_range(0.0..1.0));
        let y = DMatrix::from_fn(2, 6, |_, _| rng.random_range(-2.0..2.0));
        let w = train(&pmatrix(p.clone()), &TargetMatrix { values: y.clone() }).unwrap();
        let fit = w.matrix() * &p;
        assert!((&fit - &y).norm() < 1e-8 * (1.0 + y.norm()));
    }

    #[test]
    fn relative_error_examples() {
        assert_eq!(relative_error(3.0, 3.0).unwrap(), 0.0);
        assert_relative_eq!(relative_error(2.0, 1.9).unwrap(), 0.25, epsilon = 1e-12);
        // ε = 5 boundary: y_pred = y_test ± √0.05·|y_test|.
        let eps = relative_error(1.0, 1.0 + 0.05f64.sqrt()).unwrap();
        assert_relative_eq!(eps, 5.0, epsilon = 1e-9);
        assert!(relative_error(0.0, 1.0).is_err());
    }

    #[test]
    fn accuracy_counts_boundary_as_success() {
        assert_eq!(accuracy(&[0.0, 0.0], 5.0).unwrap(), 1.0);
        assert_eq!(accuracy(&[10.0, 10.0, 10.0], 5.0).unwrap(), 0.0);
        assert_eq!(accuracy(&[3.0, 6.0, 4.0, 5.0], 5.0).unwrap(), 0.75);
        assert!(accuracy(&[], 5.0).is_err());
    }

    #[test]
    fn accuracy_is_monotone_in_threshold() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let errors: Vec<f64> = (0..200).map(|_| rng.random_range(0.0..20.0)).collect();
        let mut prev = 0.0;
        for t in [0.0, 1.0, 2.0, 5.0, 10.0, 25.0] {
            let a = accuracy(&errors, t).unwrap();
            assert!(a >= prev);
            prev = a;
        }
    }

    #[test]
    fn split_sizes_match_the_configured_run() {
        let (train, test) = split(4080, 0.75, 11).unwrap();
        assert_eq!(train.len(), 3060);
        assert_eq!(test.len(), 1020);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..4080).collect::<Vec<_>>());
    }

    #[test]
    fn split_is_reproducible() {
        assert_eq!(split(100, 0.6, 3).unwrap(), split(100, 0.6, 3).unwrap());
        assert_ne!(split(100, 0.6, 3).unwrap(), split(100, 0.6, 4).unwrap());
    }

    #[test]
    fn degenerate_splits_are_rejected() {
        assert!(split(10, 0.0, 1).is_err());
        assert!(split(10, 1.0, 1).is_err());
        assert!(split(1, 0.5, 1).is_err());
        assert!(split(10, 0.999, 1).is_err());
    }

    #[test]
    fn weights_round_trip_through_json() {
        let w = ReadoutWeights {
            rows: vec![vec![0.1, -0.2, 0.3], vec![1.5, 2.5, -3.5]],
            sv_cutoff: SV_CUTOFF,
            rank: 2,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.json");
        w.save(&path).unwrap();
        assert_eq!(ReadoutWeights::load(&path).unwrap(), w);
    }

    #[test]
    fn target_matrix_uses_canonical_order() {
        let p = AtmosphericParams {
            ch4: -3.0,
            co2: -4.0,
            co: -5.0,
            h2o: -2.0,
            mass: 1.1,
            radius: 1.2,
            temp: 1400.0,
        };
        let y = TargetMatrix::from_labels(&[p]);
        let col: Vec<f64> = y.values.column(0).iter().copied().collect();
        assert_eq!(col, vec![-3.0, -4.0, -5.0, -2.0, 1.1, 1.2, 1400.0]);
    }
}
