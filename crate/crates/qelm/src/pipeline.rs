//! End-to-end orchestration: dataset preparation, split, preprocessing fit,
//! reservoir bank construction, probability matrices, readout training, and
//! metrics — with every artifact reproducible from the run manifest alone.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::Path;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::forward;
use crate::noise;
use crate::params::{Param, PARAM_COUNT};
use crate::preprocess::{
    interpolate, jwst_wavelength_grid, FeatureMatrix, FeaturePipeline, Mode, PatchLayout,
    PreprocessConfig,
};
use crate::readout::{self, MetricsReport, ReadoutWeights, TargetMatrix};
use crate::reservoir::{
    build_probability_matrix, ProbabilityMatrix, ReservoirBank, Shots,
};
use crate::spectrum::{SpectralDataset, Spectrum};

/// The working dataset of a run: loaded or generated, moved onto the
/// instrument grid for JWST-range modes, and noised in the noisy modes.
pub fn prepare_dataset(cfg: &RunConfig) -> Result<SpectralDataset> {
    let ds = match &cfg.dataset {
        Some(path) => crate::spectrum::read_dataset(path)?,
        None => forward::generate_dataset(cfg.generate.n, cfg.generate.seed)?,
    };
    let ds = if cfg.mode.is_jwst_range() {
        let grid = jwst_wavelength_grid();
        let spectra: Vec<Spectrum> = ds
            .spectra
            .iter()
            .map(|s| interpolate(s, &grid))
            .collect::<Result<_>>()?;
        SpectralDataset::new(grid, spectra, ds.seed)?
    } else {
        ds
    };
    if cfg.mode.is_noisy() {
        noise::apply_shot_noise(&ds, &cfg.instrument, cfg.noise_seed)
    } else {
        Ok(ds)
    }
}

fn preprocess_config(cfg: &RunConfig) -> Result<PreprocessConfig> {
    let layout = match &cfg.patches {
        Some(edges) => PatchLayout::new(edges.clone())?,
        None => PatchLayout::for_mode(cfg.mode),
    };
    Ok(PreprocessConfig {
        mode: cfg.mode,
        layout,
        components: cfg.pca.components,
        filter_components: cfg.filter.components,
        target_grid: jwst_wavelength_grid(),
    })
}

/// Index selections of one run, after optional truncation.
#[derive(Clone, Debug)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Splits the dataset and applies the configured truncations. Truncations
/// take prefixes of the shuffled sides, so smaller training sets are nested
/// inside larger ones.
pub fn split_dataset(cfg: &RunConfig, n: usize) -> Result<SplitIndices> {
    let (mut train, mut test) = readout::split(n, cfg.split.fraction, cfg.split.seed)?;
    if let Some(limit) = cfg.train_size {
        if limit < PARAM_COUNT {
            return Err(Error::Config(format!(
                "train_size {limit} is below the {PARAM_COUNT} target features"
            )));
        }
        if limit < train.len() {
            train.truncate(limit);
        }
    }
    if let Some(limit) = cfg.test_size {
        if limit == 0 {
            return Err(Error::Config("test_size must be at least 1".into()));
        }
        if limit < test.len() {
            test.truncate(limit);
        }
    }
    Ok(SplitIndices { train, test })
}

/// Everything produced by one end-to-end run.
pub struct RunArtifacts {
    pub bank: ReservoirBank,
    pub weights: ReadoutWeights,
    pub metrics: MetricsReport,
    pub y_test: DMatrix<f64>,
    pub y_pred: DMatrix<f64>,
    pub test_indices: Vec<usize>,
    pub p_train_sha256: String,
    pub p_test_sha256: String,
    pub d_train: usize,
    pub d_test: usize,
}

/// SHA-256 of a probability matrix: dims header plus the little-endian
/// bytes of the column-major values.
pub fn matrix_checksum(m: &DMatrix<f64>) -> String {
    let mut hasher = Sha256::new();
    hasher.update((m.nrows() as u64).to_le_bytes());
    hasher.update((m.ncols() as u64).to_le_bytes());
    for v in m.iter() {
        hasher.update(v.to_le_bytes());
    }
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn select<T: Clone>(items: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| items[i].clone()).collect()
}

/// Runs split → preprocessing fit → features → bank → probability matrices
/// → training → metrics on a prepared dataset.
pub fn execute(cfg: &RunConfig, ds: &SpectralDataset) -> Result<RunArtifacts> {
    let split = split_dataset(cfg, ds.len())?;
    execute_split(cfg, ds, &split)
}

/// [`execute`] with an explicit index split (sweeps reuse one split across
/// points).
pub fn execute_split(
    cfg: &RunConfig,
    ds: &SpectralDataset,
    split: &SplitIndices,
) -> Result<RunArtifacts> {
    let train_spectra = select(&ds.spectra, &split.train);
    let test_spectra = select(&ds.spectra, &split.test);

    let pre_cfg = preprocess_config(cfg)?;
    let pipeline = FeaturePipeline::fit(&train_spectra, &pre_cfg)?;
    let x_train = pipeline.features_all(&train_spectra)?;
    let x_test = pipeline.features_all(&test_spectra)?;

    let bank = ReservoirBank::build(&x_train, cfg.pca.components, cfg.reservoir_seed)?;
    let p_train = build_probability_matrix(&x_train, &bank, cfg.shots, cfg.sampling_seed)?;
    // Test sampling streams continue after the training ones.
    let p_test = shifted_probability_matrix(
        &x_test,
        &bank,
        cfg.shots,
        cfg.sampling_seed,
        split.train.len(),
    )?;

    finish_run(cfg, &train_spectra, &test_spectra, split, bank, p_train, p_test)
}

/// Builds a probability matrix whose per-sample RNG streams start at
/// `offset` — keeps train and test sampling streams disjoint.
pub fn shifted_probability_matrix(
    xs: &[FeatureMatrix],
    bank: &ReservoirBank,
    shots: Shots,
    sampling_seed: u64,
    offset: usize,
) -> Result<ProbabilityMatrix> {
    use rayon::prelude::*;
    let columns: Vec<Vec<f64>> = xs
        .par_iter()
        .enumerate()
        .map(|(i, x)| bank.run(x, shots, sampling_seed, (offset + i) as u64))
        .collect::<Result<_>>()?;
    let values = DMatrix::from_fn(bank.output_len(), xs.len(), |r, c| columns[c][r]);
    Ok(ProbabilityMatrix { values, shots })
}

fn finish_run(
    cfg: &RunConfig,
    train_spectra: &[Spectrum],
    test_spectra: &[Spectrum],
    split: &SplitIndices,
    bank: ReservoirBank,
    p_train: ProbabilityMatrix,
    p_test: ProbabilityMatrix,
) -> Result<RunArtifacts> {
    let labels_of = |specs: &[Spectrum]| -> Vec<crate::params::AtmosphericParams> {
        specs.iter().map(|s| s.params.expect("labeled")).collect()
    };
    let y_train = TargetMatrix::from_labels(&labels_of(train_spectra));
    let y_test = TargetMatrix::from_labels(&labels_of(test_spectra));

    let weights = readout::train(&p_train, &y_train)?;
    let y_pred = readout::predict(&weights, &p_test)?;
    let metrics = MetricsReport::from_predictions(&y_test.values, &y_pred, cfg.threshold)?;

    Ok(RunArtifacts {
        bank,
        weights,
        metrics,
        p_train_sha256: matrix_checksum(&p_train.values),
        p_test_sha256: matrix_checksum(&p_test.values),
        d_train: train_spectra.len(),
        d_test: test_spectra.len(),
        y_test: y_test.values,
        y_pred,
        test_indices: split.test.clone(),
    })
}

/// Prepares the dataset and executes the run.
pub fn run(cfg: &RunConfig) -> Result<(SpectralDataset, RunArtifacts)> {
    cfg.validate()?;
    let ds = prepare_dataset(cfg)?;
    let artifacts = execute(cfg, &ds)?;
    Ok((ds, artifacts))
}

/// The JSON summary written as `metrics.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub mode: Mode,
    pub shots: Shots,
    pub threshold: f64,
    pub d_train: usize,
    pub d_test: usize,
    /// (parameter name, accuracy) in canonical order.
    pub accuracy: Vec<(String, f64)>,
    pub p_train_sha256: String,
    pub p_test_sha256: String,
    pub config_fingerprint: String,
}

impl MetricsSummary {
    pub fn new(cfg: &RunConfig, artifacts: &RunArtifacts) -> Self {
        MetricsSummary {
            mode: cfg.mode,
            shots: cfg.shots,
            threshold: cfg.threshold,
            d_train: artifacts.d_train,
            d_test: artifacts.d_test,
            accuracy: Param::ALL
                .iter()
                .map(|&p| (p.name().to_string(), artifacts.metrics.accuracy_of(p)))
                .collect(),
            p_train_sha256: artifacts.p_train_sha256.clone(),
            p_test_sha256: artifacts.p_test_sha256.clone(),
            config_fingerprint: cfg.fingerprint(""),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Numeric(format!("metrics serialization: {e}")))
    }
}

/// Run manifest: the resolved configuration plus its hash. A manifest alone
/// replays the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: RunConfig,
    pub config_sha256: String,
}

impl Manifest {
    pub fn new(cfg: &RunConfig) -> Self {
        Manifest {
            config: cfg.clone(),
            config_sha256: cfg.fingerprint(""),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Numeric(format!("manifest serialization: {e}")))?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
        manifest.config.validate()?;
        Ok(manifest)
    }
}

/// Writes every artifact of a finished run into `dir`: manifest, bank,
/// weights, per-sample error CSV, metrics JSON, and the test predictions.
pub fn write_run_dir(dir: &Path, cfg: &RunConfig, artifacts: &RunArtifacts) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Manifest::new(cfg).save(dir.join("manifest.json"))?;
    artifacts.bank.save(dir.join("bank.json"))?;
    artifacts.weights.save(dir.join("weights.json"))?;

    let summary = MetricsSummary::new(cfg, artifacts);
    let path = dir.join("metrics.json");
    std::fs::write(&path, summary.to_json()?).map_err(|e| Error::io(&path, e))?;

    let mut csv = String::from("parameter,sample_id,epsilon\n");
    for (r, p) in Param::ALL.iter().enumerate() {
        for (c, &sample) in artifacts.test_indices.iter().enumerate() {
            let _ = writeln!(csv, "{},{},{}", p.name(), sample, artifacts.metrics.errors[(r, c)]);
        }
    }
    let path = dir.join("metrics.csv");
    std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;

    let mut csv = String::from(
        "sample_id,ch4_true,co2_true,co_true,h2o_true,mass_true,radius_true,temp_true,\
         ch4_pred,co2_pred,co_pred,h2o_pred,mass_pred,radius_pred,temp_pred\n",
    );
    for (c, &sample) in artifacts.test_indices.iter().enumerate() {
        let _ = write!(csv, "{sample}");
        for r in 0..PARAM_COUNT {
            let _ = write!(csv, ",{}", artifacts.y_test[(r, c)]);
        }
        for r in 0..PARAM_COUNT {
            let _ = write!(csv, ",{}", artifacts.y_pred[(r, c)]);
        }
        csv.push('\n');
    }
    let path = dir.join("predictions.csv");
    std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
    Ok(())
}

/// Reads back the test predictions written by [`write_run_dir`]:
/// (sample ids, y_true, y_pred).
pub fn read_predictions(path: &Path) -> Result<(Vec<usize>, DMatrix<f64>, DMatrix<f64>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut ids = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 1 + 2 * PARAM_COUNT {
            return Err(Error::parse(
                path,
                idx + 1,
                format!("expected {} columns, got {}", 1 + 2 * PARAM_COUNT, fields.len()),
            ));
        }
        let id: usize = fields[0]
            .parse()
            .map_err(|_| Error::parse(path, idx + 1, "bad sample id"))?;
        let values: Vec<f64> = fields[1..]
            .iter()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::parse(path, idx + 1, format!("bad float {t:?}")))
            })
            .collect::<Result<_>>()?;
        ids.push(id);
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::parse(path, 1, "no predictions"));
    }
    let n = rows.len();
    let y_true = DMatrix::from_fn(PARAM_COUNT, n, |r, c| rows[c][r]);
    let y_pred = DMatrix::from_fn(PARAM_COUNT, n, |r, c| rows[c][PARAM_COUNT + r]);
    Ok((ids, y_true, y_pred))
}
