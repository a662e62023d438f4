//! The evaluation suite: bootstrap parameter-estimation intervals, tolerance
//! sweeps, feature-count and training-size sweeps, and finite- versus
//! infinite-statistics comparisons.
//!
//! Every sweep holds the full configuration fixed except the swept variable
//! and emits a configuration fingerprint proving it. Sweep points re-fit the
//! entire pipeline — changing M changes the PCA bases and the bank, so
//! nothing is cached across points except the dataset and the split.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::params::{Param, ParameterGrid, PARAM_COUNT};
use crate::pipeline::{
    execute_split, prepare_dataset, shifted_probability_matrix, split_dataset, RunArtifacts,
};
use crate::preprocess::FeaturePipeline;
use crate::readout::{self, MetricsReport, TargetMatrix};
use crate::reservoir::{build_probability_matrix, ReservoirBank, Shots};

/// Linear-interpolation percentile of a sample (q in [0, 1]).
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    percentile(&v, 0.5)
}

/// Bootstrap estimate for one (parameter, true grid value) group of test
/// predictions. Empty groups are reported with `count = 0` rather than
/// dropped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapGroup {
    pub param: Param,
    pub true_value: f64,
    pub count: usize,
    pub median: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub groups: Vec<BootstrapGroup>,
    pub resamples: usize,
    pub level: f64,
}

/// Resamples each group's predictions `b` times with replacement; the
/// statistic is the resample median, the interval the percentile interval of
/// the `b` medians at the given confidence level, and the reported median
/// the 50th percentile of the same distribution. Group i uses RNG stream i
/// of `seed`.
pub fn bootstrap_estimates(
    groups: &[(Param, f64, Vec<f64>)],
    b: usize,
    level: f64,
    seed: u64,
) -> Result<BootstrapResult> {
    if b < 100 {
        return Err(Error::Config(format!("bootstrap needs at least 100 resamples, got {b}")));
    }
    if !(0.0..1.0).contains(&level) || level == 0.0 {
        return Err(Error::Config(format!("confidence level must lie in (0, 1), got {level}")));
    }
    let tail = (1.0 - level) / 2.0;
    let mut out = Vec::with_capacity(groups.len());
    for (gi, (param, true_value, predictions)) in groups.iter().enumerate() {
        if predictions.is_empty() {
            out.push(BootstrapGroup {
                param: *param,
                true_value: *true_value,
                count: 0,
                median: None,
                lower: None,
                upper: None,
            });
            continue;
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(gi as u64);
        let n = predictions.len();
        let mut medians: Vec<f64> = (0..b)
            .map(|_| {
                let resample: Vec<f64> =
                    (0..n).map(|_| predictions[rng.random_range(0..n)]).collect();
                median(&resample)
            })
            .collect();
        medians.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.push(BootstrapGroup {
            param: *param,
            true_value: *true_value,
            count: n,
            median: Some(percentile(&medians, 0.5)),
            lower: Some(percentile(&medians, tail)),
            upper: Some(percentile(&medians, 1.0 - tail)),
        });
    }
    Ok(BootstrapResult {
        groups: out,
        resamples: b,
        level,
    })
}

/// Groups test predictions by the nearest grid value of their true label,
/// per parameter: 7 × 10 groups in canonical order.
pub fn group_predictions_by_grid(
    y_true: &DMatrix<f64>,
    y_pred: &DMatrix<f64>,
    grid: &ParameterGrid,
) -> Vec<(Param, f64, Vec<f64>)> {
    let mut groups = Vec::with_capacity(PARAM_COUNT * crate::params::GRID_POINTS);
    for (r, &param) in Param::ALL.iter().enumerate() {
        let values = grid.values(param);
        for &v in values {
            let mut predictions = Vec::new();
            for c in 0..y_true.ncols() {
                let t = y_true[(r, c)];
                let nearest = values
                    .iter()
                    .copied()
                    .min_by(|a, b| (a - t).abs().partial_cmp(&(b - t).abs()).unwrap())
                    .unwrap();
                if nearest == v {
                    predictions.push(y_pred[(r, c)]);
                }
            }
            groups.push((param, v, predictions));
        }
    }
    groups
}

/// One point of a sweep: the swept value's label and per-parameter accuracy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub label: String,
    pub accuracy: [f64; PARAM_COUNT],
}

/// A completed sweep with the fingerprint of everything that was held fixed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub variable: String,
    pub points: Vec<SweepPoint>,
    pub fingerprint: String,
}

impl SweepResult {
    /// Plot-ready CSV: swept value, parameter, accuracy.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut out = format!("{},parameter,accuracy\n", self.variable);
        for point in &self.points {
            for (i, p) in Param::ALL.iter().enumerate() {
                let _ = writeln!(out, "{},{},{}", point.label, p.name(), point.accuracy[i]);
            }
        }
        out
    }
}

/// Accuracy as a function of the tolerance threshold, on fixed errors.
pub fn tolerance_sweep(errors: &DMatrix<f64>, thresholds: &[f64]) -> Result<SweepResult> {
    if thresholds.is_empty() || thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Config("thresholds must be a nonempty ascending list".into()));
    }
    let mut points = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        let mut acc = [0.0; PARAM_COUNT];
        for (r, slot) in acc.iter_mut().enumerate() {
            let row: Vec<f64> = errors.row(r).iter().copied().collect();
            *slot = readout::accuracy(&row, t)?;
        }
        points.push(SweepPoint {
            label: format!("{t}"),
            accuracy: acc,
        });
    }
    Ok(SweepResult {
        variable: "threshold".into(),
        points,
        fingerprint: String::new(),
    })
}

fn run_point(cfg: &RunConfig, ds: &crate::spectrum::SpectralDataset) -> Result<RunArtifacts> {
    let split = split_dataset(cfg, ds.len())?;
    execute_split(cfg, ds, &split)
}

/// Re-runs the full pipeline for each component count M, everything else
/// seed-fixed.
pub fn feature_sweep(cfg: &RunConfig, m_values: &[usize]) -> Result<SweepResult> {
    if m_values.iter().any(|&m| m == 0) {
        return Err(Error::Config("component counts must be at least 1".into()));
    }
    let ds = prepare_dataset(cfg)?;
    let mut points = Vec::with_capacity(m_values.len());
    for &m in m_values {
        let mut point_cfg = cfg.clone();
        point_cfg.pca.components = m;
        let artifacts = run_point(&point_cfg, &ds)?;
        points.push(SweepPoint {
            label: format!("{m}"),
            accuracy: artifacts.metrics.accuracy,
        });
    }
    Ok(SweepResult {
        variable: "m".into(),
        points,
        fingerprint: cfg.fingerprint("m"),
    })
}

/// Re-runs the pipeline truncating the training side to each size; the test
/// side stays at the configured size, and smaller training sets are prefixes
/// of larger ones.
pub fn training_size_sweep(cfg: &RunConfig, sizes: &[usize]) -> Result<SweepResult> {
    let ds = prepare_dataset(cfg)?;
    let mut points = Vec::with_capacity(sizes.len());
    for &d in sizes {
        let mut point_cfg = cfg.clone();
        point_cfg.train_size = Some(d);
        let artifacts = run_point(&point_cfg, &ds)?;
        points.push(SweepPoint {
            label: format!("{d}"),
            accuracy: artifacts.metrics.accuracy,
        });
    }
    Ok(SweepResult {
        variable: "train_size".into(),
        points,
        fingerprint: cfg.fingerprint("train_size"),
    })
}

/// Accuracy per shot setting on one shared bank and split. The exact
/// probabilities are computed once; finite entries resample them with the
/// configured sampling seed, exactly as a direct finite run would.
pub fn shots_comparison(cfg: &RunConfig, shots_list: &[Shots]) -> Result<SweepResult> {
    let ds = prepare_dataset(cfg)?;
    let split = split_dataset(cfg, ds.len())?;
    let train_spectra: Vec<_> = split.train.iter().map(|&i| ds.spectra[i].clone()).collect();
    let test_spectra: Vec<_> = split.test.iter().map(|&i| ds.spectra[i].clone()).collect();

    let pre_cfg = crate::preprocess::PreprocessConfig {
        mode: cfg.mode,
        layout: match &cfg.patches {
            Some(edges) => crate::preprocess::PatchLayout::new(edges.clone())?,
            None => crate::preprocess::PatchLayout::for_mode(cfg.mode),
        },
        components: cfg.pca.components,
        filter_components: cfg.filter.components,
        target_grid: crate::preprocess::jwst_wavelength_grid(),
    };
    let pipeline = FeaturePipeline::fit(&train_spectra, &pre_cfg)?;
    let x_train = pipeline.features_all(&train_spectra)?;
    let x_test = pipeline.features_all(&test_spectra)?;
    let bank = ReservoirBank::build(&x_train, cfg.pca.components, cfg.reservoir_seed)?;

    let exact_train = build_probability_matrix(&x_train, &bank, Shots::INFINITE, 0)?;
    let exact_test =
        shifted_probability_matrix(&x_test, &bank, Shots::INFINITE, 0, x_train.len())?;
    let y_train = TargetMatrix::from_labels(
        &train_spectra.iter().map(|s| s.params.unwrap()).collect::<Vec<_>>(),
    );
    let y_test = TargetMatrix::from_labels(
        &test_spectra.iter().map(|s| s.params.unwrap()).collect::<Vec<_>>(),
    );

    let mut points = Vec::with_capacity(shots_list.len());
    for &shots in shots_list {
        let (p_train, p_test) = match shots.finite() {
            None => (exact_train.clone(), exact_test.clone()),
            Some(n) => (
                crate::reservoir::sample_probability_matrix(&exact_train, &bank, n, cfg.sampling_seed)?,
                resample_shifted(&exact_test, &bank, n, cfg.sampling_seed, x_train.len())?,
            ),
        };
        let weights = readout::train(&p_train, &y_train)?;
        let y_pred = readout::predict(&weights, &p_test)?;
        let metrics = MetricsReport::from_predictions(&y_test.values, &y_pred, cfg.threshold)?;
        points.push(SweepPoint {
            label: shots.to_string(),
            accuracy: metrics.accuracy,
        });
    }
    Ok(SweepResult {
        variable: "shots".into(),
        points,
        fingerprint: cfg.fingerprint("shots"),
    })
}

fn resample_shifted(
    exact: &crate::reservoir::ProbabilityMatrix,
    bank: &ReservoirBank,
    shots: u64,
    sampling_seed: u64,
    offset: usize,
) -> Result<crate::reservoir::ProbabilityMatrix> {
    use rayon::prelude::*;
    let columns: Vec<Vec<f64>> = (0..exact.n_samples())
        .into_par_iter()
        .map(|i| {
            let col: Vec<f64> = exact.values.column(i).iter().copied().collect();
            bank.sample_column(&col, shots, sampling_seed, (offset + i) as u64)
        })
        .collect::<Result<_>>()?;
    let values =
        DMatrix::from_fn(exact.n_features(), exact.n_samples(), |r, c| columns[c][r]);
    Ok(crate::reservoir::ProbabilityMatrix {
        values,
        shots: Shots::Finite(shots),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::GenerateSpec;
    use crate::params::{build_grid, ParameterBounds};
    use approx::assert_relative_eq;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn identical_group_has_degenerate_interval() {
        let groups = vec![(Param::Radius, 1.2, vec![7.5; 12])];
        let result = bootstrap_estimates(&groups, 500, 0.95, 1).unwrap();
        let g = &result.groups[0];
        assert_eq!(g.median, Some(7.5));
        assert_eq!(g.lower, Some(7.5));
        assert_eq!(g.upper, Some(7.5));
        assert_eq!(g.count, 12);
    }

    #[test]
    fn two_point_group_endpoints_come_from_enumerable_medians() {
        // Resamples of {0, 10} have medians in {0, 5, 10} only.
        let groups = vec![(Param::Mass, 1.0, vec![0.0, 10.0])];
        let result = bootstrap_estimates(&groups, 2000, 0.95, 3).unwrap();
        let g = &result.groups[0];
        for v in [g.lower.unwrap(), g.median.unwrap(), g.upper.unwrap()] {
            assert!(
                [0.0, 5.0, 10.0].contains(&v),
                "unexpected interval endpoint {v}"
            );
        }
        assert!(g.lower <= g.median && g.median <= g.upper);
    }

    #[test]
    fn empty_group_is_reported_not_skipped() {
        let groups = vec![
            (Param::Temp, 1000.0, vec![]),
            (Param::Temp, 2000.0, vec![1.0, 2.0]),
        ];
        let result = bootstrap_estimates(&groups, 200, 0.95, 0).unwrap();
        assert_eq!(result.groups.len(), 2);
        assert_eq!(result.groups[0].count, 0);
        assert_eq!(result.groups[0].median, None);
        assert_eq!(result.groups[1].count, 2);
    }

    #[test]
    fn bootstrap_is_reproducible() {
        let groups = vec![(Param::Ch4, -3.0, vec![1.0, 2.0, 3.0, 4.0, 5.0])];
        let a = bootstrap_estimates(&groups, 300, 0.9, 5).unwrap();
        let b = bootstrap_estimates(&groups, 300, 0.9, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn coverage_of_gaussian_groups_is_near_nominal() {
        // 100 synthetic groups of 30 draws from N(0, 1): the 95% interval
        // for the median should cover the true value (0, which is also the
        // population median) in at least 88 trials.
        let mut rng = ChaCha12Rng::seed_from_u64(2024);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut covered = 0;
        for trial in 0..100u64 {
            let sample: Vec<f64> = (0..30).map(|_| normal.sample(&mut rng)).collect();
            let groups = vec![(Param::Mass, 0.0, sample)];
            let result = bootstrap_estimates(&groups, 500, 0.95, trial).unwrap();
            let g = &result.groups[0];
            if g.lower.unwrap() <= 0.0 && 0.0 <= g.upper.unwrap() {
                covered += 1;
            }
        }
        assert!(covered >= 88, "only {covered}/100 intervals covered the truth");
    }

    #[test]
    fn interval_width_shrinks_with_group_size() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let width_at = |n: usize, rng: &mut ChaCha12Rng| {
            let mut widths = Vec::new();
            for trial in 0..20 {
                let sample: Vec<f64> = (0..n).map(|_| normal.sample(rng)).collect();
                let groups = vec![(Param::Mass, 0.0, sample)];
                let r = bootstrap_estimates(&groups, 400, 0.95, trial).unwrap();
                widths.push(r.groups[0].upper.unwrap() - r.groups[0].lower.unwrap());
            }
            median(&widths)
        };
        let small = width_at(20, &mut rng);
        let large = width_at(200, &mut rng);
        assert!(large < small, "width {large} at n=200 vs {small} at n=20");
    }

    #[test]
    fn grouping_splits_test_samples_by_true_grid_value() {
        let grid = build_grid(&ParameterBounds::default()).unwrap();
        let temps = grid.values(Param::Temp);
        let n = 6;
        let y_true = DMatrix::from_fn(PARAM_COUNT, n, |r, c| {
            if r == Param::Temp.index() {
                temps[c % 3]
            } else {
                grid.values(Param::ALL[r])[0]
            }
        });
        let y_pred = y_true.map(|v| v + 0.1);
        let groups = group_predictions_by_grid(&y_true, &y_pred, &grid);
        assert_eq!(groups.len(), 70);
        let temp_groups: Vec<_> = groups
            .iter()
            .filter(|(p, _, _)| *p == Param::Temp)
            .collect();
        assert_eq!(temp_groups.len(), 10);
        assert_eq!(temp_groups[0].2.len(), 2);
        assert_eq!(temp_groups[1].2.len(), 2);
        assert_eq!(temp_groups[2].2.len(), 2);
        assert!(temp_groups[3..].iter().all(|(_, _, v)| v.is_empty()));
    }

    #[test]
    fn tolerance_sweep_is_monotone_and_exhaustive() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let errors = DMatrix::from_fn(PARAM_COUNT, 50, |_, _| rng.random_range(0.0..15.0));
        let thresholds: Vec<f64> = (0..=15).map(|t| t as f64).collect();
        let sweep = tolerance_sweep(&errors, &thresholds).unwrap();
        for param in 0..PARAM_COUNT {
            let mut prev = 0.0;
            for point in &sweep.points {
                assert!(point.accuracy[param] >= prev);
                prev = point.accuracy[param];
            }
        }
        // Threshold beyond the error range reaches 1.
        assert!(sweep.points.last().unwrap().accuracy.iter().all(|&a| a == 1.0));
        // Threshold 0 counts exact predictions only.
        let zero = tolerance_sweep(&errors, &[0.0]).unwrap();
        assert!(zero.points[0].accuracy.iter().all(|&a| a == 0.0));
    }

    fn sweep_config() -> RunConfig {
        RunConfig {
            generate: GenerateSpec { n: 60, seed: 5 },
            pca: crate::config::PcaSection { components: 2 },
            shots: Shots::INFINITE,
            ..RunConfig::default()
        }
    }

    #[test]
    fn single_point_feature_sweep_equals_plain_run() {
        let cfg = sweep_config();
        let sweep = feature_sweep(&cfg, &[2]).unwrap();
        assert_eq!(sweep.points.len(), 1);
        let (_, artifacts) = crate::pipeline::run(&cfg).unwrap();
        assert_eq!(sweep.points[0].accuracy, artifacts.metrics.accuracy);
    }

    #[test]
    fn feature_sweep_produces_complete_metric_sets() {
        let cfg = sweep_config();
        let sweep = feature_sweep(&cfg, &[2, 3]).unwrap();
        assert_eq!(sweep.points.len(), 2);
        assert_eq!(sweep.points[0].label, "2");
        assert_eq!(sweep.points[1].label, "3");
        for point in &sweep.points {
            assert!(point.accuracy.iter().all(|a| (0.0..=1.0).contains(a)));
        }
        assert!(!sweep.fingerprint.is_empty());
    }

    #[test]
    fn training_size_sweep_uses_nested_subsets() {
        let cfg = sweep_config();
        let sweep = training_size_sweep(&cfg, &[20, 40]).unwrap();
        assert_eq!(sweep.points.len(), 2);
        // Nesting is a property of split_dataset, asserted there; here the
        // labels and shapes.
        assert_eq!(sweep.points[0].label, "20");
        let single = training_size_sweep(&cfg, &[40]).unwrap();
        assert_eq!(single.points[0].accuracy, sweep.points[1].accuracy);
    }

    #[test]
    fn training_size_below_feature_count_is_rejected() {
        let cfg = sweep_config();
        assert!(training_size_sweep(&cfg, &[3]).is_err());
    }

    #[test]
    fn shots_comparison_shares_the_bank() {
        let cfg = sweep_config();
        let sweep =
            shots_comparison(&cfg, &[Shots::Finite(200), Shots::INFINITE]).unwrap();
        assert_eq!(sweep.points.len(), 2);
        assert_eq!(sweep.points[0].label, "200");
        assert_eq!(sweep.points[1].label, "infinite");

        // The infinite entry reproduces the plain infinite run bitwise.
        let (_, artifacts) = crate::pipeline::run(&cfg).unwrap();
        assert_eq!(sweep.points[1].accuracy, artifacts.metrics.accuracy);
    }

    #[test]
    fn finite_shots_entry_matches_direct_finite_run() {
        let mut cfg = sweep_config();
        let sweep = shots_comparison(&cfg, &[Shots::Finite(300)]).unwrap();
        cfg.shots = Shots::Finite(300);
        let (_, artifacts) = crate::pipeline::run(&cfg).unwrap();
        assert_eq!(sweep.points[0].accuracy, artifacts.metrics.accuracy);
    }

    #[test]
    fn percentile_interpolates_linearly() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 1.0), 4.0);
        assert_relative_eq!(percentile(&v, 0.5), 2.5, epsilon = 1e-12);
        assert_relative_eq!(percentile(&v, 0.25), 1.75, epsilon = 1e-12);
    }
}
