//! Spectrum-to-feature preprocessing: interpolation onto the instrument
//! grid, patch splitting, per-patch min–max normalization, per-patch PCA,
//! optional PCA denoising, and assembly of the feature matrix handed to the
//! reservoirs.
//!
//! Every statistic (denoising basis, patch PCA bases, later the encoder
//! ranges) is fitted on the training split only; the fitted pipeline is a
//! pure function of its input spectrum afterwards.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pca::{pca_fit, PcaModel};
use crate::spectrum::Spectrum;

/// Bins of the default instrument grid.
pub const JWST_BINS: usize = 96;

/// Instrument wavelength range in micrometers.
pub const JWST_RANGE_UM: (f64, f64) = (0.6, 2.8);

/// Default denoising rank for the filtered mode.
pub const FILTER_COMPONENTS: usize = 10;

/// The default 96-bin instrument grid, log-uniform over 0.6–2.8 µm.
pub fn jwst_wavelength_grid() -> Vec<f64> {
    crate::forward::log_wavelength_grid(JWST_RANGE_UM.0, JWST_RANGE_UM.1, JWST_BINS)
}

/// Processing mode for the dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Native grid, 14 patches, no noise.
    Taurex,
    /// Instrument grid, 8 patches, no noise.
    Jwst,
    /// Instrument grid with shot noise, no filter.
    Njwst,
    /// Instrument grid with shot noise and the PCA denoising filter.
    Fjwst,
}

impl Mode {
    pub fn is_jwst_range(self) -> bool {
        !matches!(self, Mode::Taurex)
    }

    pub fn is_noisy(self) -> bool {
        matches!(self, Mode::Njwst | Mode::Fjwst)
    }

    pub fn uses_filter(self) -> bool {
        matches!(self, Mode::Fjwst)
    }

    pub fn default_patch_count(self) -> usize {
        match self {
            Mode::Taurex => 14,
            _ => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Taurex => "taurex",
            Mode::Jwst => "jwst",
            Mode::Njwst => "njwst",
            Mode::Fjwst => "fjwst",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "taurex" => Ok(Mode::Taurex),
            "jwst" => Ok(Mode::Jwst),
            "njwst" => Ok(Mode::Njwst),
            "fjwst" => Ok(Mode::Fjwst),
            other => Err(Error::Config(format!(
                "unknown mode {other:?} (expected taurex|jwst|njwst|fjwst)"
            ))),
        }
    }
}

/// Contiguous wavelength bands, defined by their edges. A bin belongs to
/// patch j when its wavelength falls in [e_j, e_{j+1}); the last patch is
/// closed on the right.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchLayout {
    edges: Vec<f64>,
}

impl PatchLayout {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::Config("patch layout needs at least 2 edges".into()));
        }
        if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("patch edges must be strictly increasing".into()));
        }
        Ok(PatchLayout { edges })
    }

    /// Equal-width-in-log10 partition of [lo, hi] into `n` patches — the
    /// shipped preset shape.
    pub fn equal_log(lo_um: f64, hi_um: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("patch count must be at least 1".into()));
        }
        let (llo, lhi) = (lo_um.log10(), hi_um.log10());
        let step = (lhi - llo) / n as f64;
        let mut edges: Vec<f64> = (0..=n).map(|i| 10f64.powf(llo + step * i as f64)).collect();
        edges[0] = lo_um;
        edges[n] = hi_um;
        PatchLayout::new(edges)
    }

    /// 14 equal-log patches over the native 0.3–50 µm range.
    pub fn taurex_default() -> Self {
        PatchLayout::equal_log(
            crate::forward::DEFAULT_RANGE_UM.0,
            crate::forward::DEFAULT_RANGE_UM.1,
            14,
        )
        .expect("valid preset")
    }

    /// 8 equal-log patches over the 0.6–2.8 µm instrument range.
    pub fn jwst_default() -> Self {
        PatchLayout::equal_log(JWST_RANGE_UM.0, JWST_RANGE_UM.1, 8).expect("valid preset")
    }

    pub fn for_mode(mode: Mode) -> Self {
        match mode {
            Mode::Taurex => PatchLayout::taurex_default(),
            _ => PatchLayout::jwst_default(),
        }
    }

    pub fn n_patches(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }
}

/// Piecewise-linear interpolation of the depths onto `target`. The target
/// grid must lie inside the source span; extrapolation is refused.
pub fn interpolate(spec: &Spectrum, target: &[f64]) -> Result<Spectrum> {
    if target.is_empty() || target.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Numeric("target grid must be strictly increasing".into()));
    }
    let (src, dep) = (&spec.wavelengths, &spec.depths);
    if target[0] < src[0] || target[target.len() - 1] > src[src.len() - 1] {
        return Err(Error::Config(format!(
            "target grid [{}, {}] extends beyond source span [{}, {}]",
            target[0],
            target[target.len() - 1],
            src[0],
            src[src.len() - 1]
        )));
    }
    let mut out = Vec::with_capacity(target.len());
    let mut k = 0usize;
    for &t in target {
        while k + 2 < src.len() && src[k + 1] < t {
            k += 1;
        }
        let (x0, x1) = (src[k], src[k + 1]);
        let w = (t - x0) / (x1 - x0);
        out.push(dep[k] * (1.0 - w) + dep[k + 1] * w);
    }
    Spectrum::new(target.to_vec(), out, spec.params)
}

/// Index ranges of the bins belonging to each patch. Errors if a patch is
/// empty or a bin falls outside the layout.
pub fn patch_ranges(grid: &[f64], layout: &PatchLayout) -> Result<Vec<std::ops::Range<usize>>> {
    let edges = layout.edges();
    if grid[0] < edges[0] {
        return Err(Error::Config(format!(
            "bin at {} µm falls below the patch layout",
            grid[0]
        )));
    }
    let last_edge = edges[edges.len() - 1];
    let mut ranges = Vec::with_capacity(layout.n_patches());
    let mut pos = 0usize;
    for j in 0..layout.n_patches() {
        let start = pos;
        while pos < grid.len()
            && (grid[pos] < edges[j + 1] || (j == layout.n_patches() - 1 && grid[pos] <= last_edge))
        {
            pos += 1;
        }
        if pos == start {
            return Err(Error::Config(format!(
                "patch {j} ([{}, {}] µm) holds no bins",
                edges[j],
                edges[j + 1]
            )));
        }
        ranges.push(start..pos);
    }
    if pos != grid.len() {
        return Err(Error::Config(format!(
            "bin at {} µm falls outside the patch layout",
            grid[pos]
        )));
    }
    Ok(ranges)
}

/// Splits the spectrum into per-patch depth vectors.
pub fn split_patches(spec: &Spectrum, layout: &PatchLayout) -> Result<Vec<Vec<f64>>> {
    let ranges = patch_ranges(&spec.wavelengths, layout)?;
    Ok(ranges.into_iter().map(|r| spec.depths[r].to_vec()).collect())
}

/// Min–max normalization to [0, 1]; a constant patch maps to all zeros.
pub fn normalize_patch(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if span == 0.0 {
        return vec![0.0; v.len()];
    }
    v.iter().map(|&x| (x - lo) / span).collect()
}

/// (max, min, mean) of the depths — the global-properties feature vector.
pub fn global_features(spec: &Spectrum) -> [f64; 3] {
    let max = spec.depths.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = spec.depths.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = spec.depths.iter().sum::<f64>() / spec.len() as f64;
    [max, min, mean]
}

/// Per-spectrum feature stack: one M-vector of principal components per
/// patch plus the (max, min, mean) global row.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub patch_rows: Vec<Vec<f64>>,
    pub global_row: [f64; 3],
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.patch_rows.len() + 1
    }

    /// Row i for i < N_p is the patch row; row N_p is the global row.
    pub fn row(&self, i: usize) -> &[f64] {
        if i < self.patch_rows.len() {
            &self.patch_rows[i]
        } else {
            &self.global_row
        }
    }
}

/// Preprocessing settings needed to fit a [`FeaturePipeline`].
#[derive(Clone, Debug)]
pub struct PreprocessConfig {
    pub mode: Mode,
    pub layout: PatchLayout,
    /// Principal components per patch.
    pub components: usize,
    /// Denoising rank, used in the filtered mode only.
    pub filter_components: usize,
    /// Interpolation target for JWST-range modes.
    pub target_grid: Vec<f64>,
}

impl PreprocessConfig {
    pub fn for_mode(mode: Mode, components: usize) -> Self {
        PreprocessConfig {
            mode,
            layout: PatchLayout::for_mode(mode),
            components,
            filter_components: FILTER_COMPONENTS,
            target_grid: jwst_wavelength_grid(),
        }
    }
}

/// The fitted spectrum-to-features map: interpolate (JWST modes), denoise
/// (filtered mode), patch, normalize, project each patch onto its PCA basis,
/// and append the global row. Global features are taken from the working
/// (post-filter) spectrum.
#[derive(Clone, Debug)]
pub struct FeaturePipeline {
    mode: Mode,
    target_grid: Option<Vec<f64>>,
    filter: Option<PcaModel>,
    layout: PatchLayout,
    patch_models: Vec<PcaModel>,
}

impl FeaturePipeline {
    /// Fits every statistic of the pipeline on the training spectra.
    pub fn fit(train: &[Spectrum], cfg: &PreprocessConfig) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Shape("cannot fit a pipeline on zero spectra".into()));
        }
        let target_grid = cfg.mode.is_jwst_range().then(|| cfg.target_grid.clone());

        let working: Vec<Spectrum> = match &target_grid {
            Some(grid) => train
                .iter()
                .map(|s| interpolate(s, grid))
                .collect::<Result<_>>()?,
            None => train.to_vec(),
        };
        let grid = working[0].wavelengths.clone();
        let grid = &grid;

        let (filter, working) = if cfg.mode.uses_filter() {
            let rows = DMatrix::from_fn(working.len(), grid.len(), |i, j| working[i].depths[j]);
            let model = pca_fit(&rows, cfg.filter_components)?;
            let filtered_rows = model.reconstruct_rows(&rows)?;
            let filtered: Vec<Spectrum> = working
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    Spectrum::new(
                        grid.clone(),
                        filtered_rows.row(i).iter().copied().collect(),
                        s.params,
                    )
                })
                .collect::<Result<_>>()?;
            (Some(model), filtered)
        } else {
            (None, working)
        };

        let ranges = patch_ranges(grid, &cfg.layout)?;
        let mut patch_models = Vec::with_capacity(ranges.len());
        for r in &ranges {
            if cfg.components > r.len() {
                return Err(Error::Shape(format!(
                    "patch with {} bins cannot yield {} components",
                    r.len(),
                    cfg.components
                )));
            }
            let normalized: Vec<Vec<f64>> = working
                .iter()
                .map(|s| normalize_patch(&s.depths[r.clone()]))
                .collect();
            let rows = DMatrix::from_fn(working.len(), r.len(), |i, j| normalized[i][j]);
            patch_models.push(pca_fit(&rows, cfg.components)?);
        }

        Ok(FeaturePipeline {
            mode: cfg.mode,
            target_grid,
            filter,
            layout: cfg.layout.clone(),
            patch_models,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn n_patches(&self) -> usize {
        self.patch_models.len()
    }

    pub fn components(&self) -> usize {
        self.patch_models.first().map_or(0, |m| m.n_components())
    }

    /// The working spectrum right before patching: interpolated and, in the
    /// filtered mode, denoised.
    pub fn working_spectrum(&self, spec: &Spectrum) -> Result<Spectrum> {
        let working = match &self.target_grid {
            Some(grid) => interpolate(spec, grid)?,
            None => spec.clone(),
        };
        match &self.filter {
            Some(model) => Spectrum::new(
                working.wavelengths.clone(),
                model.reconstruct_row(&working.depths)?,
                working.params,
            ),
            None => Ok(working),
        }
    }

    /// Assembles the feature stack for one spectrum.
    pub fn features(&self, spec: &Spectrum) -> Result<FeatureMatrix> {
        let working = self.working_spectrum(spec)?;
        let patches = split_patches(&working, &self.layout)?;
        if patches.len() != self.patch_models.len() {
            return Err(Error::Shape(format!(
                "{} patches for {} fitted models",
                patches.len(),
                self.patch_models.len()
            )));
        }
        let patch_rows = patches
            .iter()
            .zip(&self.patch_models)
            .map(|(patch, model)| model.transform(&normalize_patch(patch)))
            .collect::<Result<_>>()?;
        Ok(FeatureMatrix {
            patch_rows,
            global_row: global_features(&working),
        })
    }

    /// Feature stacks for a batch of spectra, in order.
    pub fn features_all(&self, specs: &[Spectrum]) -> Result<Vec<FeatureMatrix>> {
        specs.par_iter().map(|s| self.features(s)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn toy_spectrum(bins: usize) -> Spectrum {
        let grid = crate::forward::log_wavelength_grid(0.6, 2.8, bins);
        let depths = grid.iter().map(|&l| 0.01 + 0.002 * (l * 3.0).sin().abs() + 1e-4 * l).collect();
        Spectrum::new(grid, depths, None).unwrap()
    }

    #[test]
    fn interpolation_onto_same_grid_is_identity() {
        let s = toy_spectrum(40);
        let t = interpolate(&s, &s.wavelengths.clone()).unwrap();
        assert_eq!(s.depths, t.depths);
    }

    #[test]
    fn interpolation_at_midpoint_averages_neighbors() {
        let s = Spectrum::new(vec![1.0, 2.0, 3.0], vec![0.01, 0.03, 0.02], None).unwrap();
        let t = interpolate(&s, &[1.5, 2.5]).unwrap();
        assert_relative_eq!(t.depths[0], 0.02, epsilon = 1e-15);
        assert_relative_eq!(t.depths[1], 0.025, epsilon = 1e-15);
    }

    #[test]
    fn interpolation_error_is_bounded_by_curvature() {
        // Oracle: the closed-form model evaluated on the dense target grid.
        // Linear interpolation error is bounded by max|f''|·h²/8; for a sum
        // of Gaussian bands, |g''| ≤ amp/w² globally, so the analytic bound
        // is Σ_bands amp/w² (the flat baseline contributes no curvature).
        let params = crate::params::AtmosphericParams {
            ch4: -2.0,
            co2: -3.0,
            co: -4.0,
            h2o: -1.0,
            mass: 1.0,
            radius: 1.0,
            temp: 1500.0,
        };
        let coarse = crate::forward::log_wavelength_grid(0.6, 2.8, 60);
        let src = crate::forward::synth_spectrum(&params, &coarse).unwrap();
        let dense = crate::forward::log_wavelength_grid(0.61, 2.79, 400);
        let got = interpolate(&src, &dense).unwrap();
        let exact = crate::forward::synth_spectrum(&params, &dense).unwrap();

        let h_norm = (params.temp * params.radius * params.radius / params.mass - 320.0)
            / (5625.0 - 320.0);
        let amp = |log_vmr: f64| {
            1.8e-3 * (0.05 + 0.95 * (log_vmr + 8.0) / 7.0) * (0.3 + 0.7 * h_norm)
        };
        let mut bands: Vec<(f64, crate::forward::Band)> = Vec::new();
        for (v, fundamentals) in [
            (params.h2o, &crate::forward::H2O_FUNDAMENTALS[..]),
            (params.ch4, &crate::forward::CH4_FUNDAMENTALS[..]),
            (params.co2, &crate::forward::CO2_FUNDAMENTALS[..]),
            (params.co, &crate::forward::CO_FUNDAMENTALS[..]),
        ] {
            for band in crate::forward::band_table(fundamentals) {
                bands.push((v, band));
            }
        }
        let width_scale = 0.8 + 0.4 * (params.temp - 1000.0) / 1000.0;
        let max_f2: f64 = bands
            .iter()
            .map(|&(v, b)| {
                let w = b.width_fraction * b.center_um * width_scale;
                b.strength * amp(v) / (w * w)
            })
            .sum();
        let h = coarse
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0f64, f64::max);
        let bound = max_f2 * h * h / 8.0;
        for (a, b) in got.depths.iter().zip(&exact.depths) {
            assert!((a - b).abs() <= bound, "|{a} - {b}| > {bound}");
        }
    }

    #[test]
    fn extrapolation_is_refused() {
        let s = toy_spectrum(40);
        assert!(interpolate(&s, &[0.5, 1.0]).is_err());
        assert!(interpolate(&s, &[1.0, 3.0]).is_err());
    }

    #[test]
    fn single_patch_covers_everything() {
        let s = toy_spectrum(30);
        let layout = PatchLayout::new(vec![0.6, 2.8]).unwrap();
        let patches = split_patches(&s, &layout).unwrap();
        assert_eq!(patches.len(), 1);
        assert_eq!(patches[0], s.depths);
    }

    #[test]
    fn bin_on_interior_edge_joins_right_patch() {
        let s = Spectrum::new(vec![1.0, 2.0, 3.0, 4.0], vec![0.1, 0.2, 0.3, 0.4], None).unwrap();
        let layout = PatchLayout::new(vec![1.0, 2.0, 4.0]).unwrap();
        let patches = split_patches(&s, &layout).unwrap();
        assert_eq!(patches[0], vec![0.1]);
        assert_eq!(patches[1], vec![0.2, 0.3, 0.4]);
    }

    #[test]
    fn patches_partition_the_grid() {
        let s = toy_spectrum(100);
        let layout = PatchLayout::jwst_default();
        let patches = split_patches(&s, &layout).unwrap();
        assert_eq!(patches.len(), 8);
        let concat: Vec<f64> = patches.into_iter().flatten().collect();
        assert_eq!(concat, s.depths);
    }

    #[test]
    fn empty_patch_is_reported_by_index() {
        let s = Spectrum::new(vec![1.0, 1.1, 3.9, 4.0], vec![0.1; 4], None).unwrap();
        let layout = PatchLayout::new(vec![1.0, 1.5, 2.0, 4.0]).unwrap();
        let err = split_patches(&s, &layout).unwrap_err();
        assert!(err.to_string().contains("patch 1"), "{err}");
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_patch(&[2.0, 4.0]), vec![0.0, 1.0]);
        assert_eq!(normalize_patch(&[3.0, 3.0, 3.0]), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn global_feature_examples() {
        let c = Spectrum::new(vec![1.0, 2.0], vec![0.5, 0.5], None).unwrap();
        assert_eq!(global_features(&c), [0.5, 0.5, 0.5]);
        let two = Spectrum::new(vec![1.0, 2.0], vec![1.0, 3.0], None).unwrap();
        assert_eq!(global_features(&two), [3.0, 1.0, 2.0]);

        let s = toy_spectrum(50);
        let [max, min, mean] = global_features(&s);
        let mut scan_max = f64::NEG_INFINITY;
        let mut scan_min = f64::INFINITY;
        let mut sum = 0.0;
        for &d in &s.depths {
            scan_max = scan_max.max(d);
            scan_min = scan_min.min(d);
            sum += d;
        }
        assert_eq!(max, scan_max);
        assert_eq!(min, scan_min);
        assert_relative_eq!(mean, sum / 50.0, epsilon = 1e-15);
    }

    fn training_set(n: usize) -> Vec<Spectrum> {
        let ds = crate::forward::generate_dataset(n, 5).unwrap();
        ds.spectra
    }

    #[test]
    fn assembled_features_have_documented_shape() {
        let train = training_set(30);
        let cfg = PreprocessConfig::for_mode(Mode::Jwst, 5);
        let pipeline = FeaturePipeline::fit(&train, &cfg).unwrap();
        let x = pipeline.features(&train[0]).unwrap();
        assert_eq!(x.n_rows(), 9);
        assert_eq!(x.patch_rows.len(), 8);
        for row in &x.patch_rows {
            assert_eq!(row.len(), 5);
        }
        assert_eq!(x.row(8).len(), 3);
    }

    #[test]
    fn identical_spectra_get_identical_features() {
        let train = training_set(20);
        let cfg = PreprocessConfig::for_mode(Mode::Jwst, 3);
        let pipeline = FeaturePipeline::fit(&train, &cfg).unwrap();
        let a = pipeline.features(&train[3]).unwrap();
        let b = pipeline.features(&train[3]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pipeline_matches_hand_composed_stages() {
        let train = training_set(25);
        let cfg = PreprocessConfig::for_mode(Mode::Jwst, 4);
        let pipeline = FeaturePipeline::fit(&train, &cfg).unwrap();
        let spec = &train[7];
        let got = pipeline.features(spec).unwrap();

        // Hand composition of the public stage functions.
        let interp = interpolate(spec, &jwst_wavelength_grid()).unwrap();
        let patches = split_patches(&interp, &cfg.layout).unwrap();
        for (i, patch) in patches.iter().enumerate() {
            let normalized = normalize_patch(patch);
            let comps = pipeline.patch_models[i].transform(&normalized).unwrap();
            assert_eq!(got.patch_rows[i], comps);
        }
        assert_eq!(got.global_row, global_features(&interp));
    }

    #[test]
    fn filtered_mode_denoises_before_patching() {
        let train = training_set(40);
        let mut cfg = PreprocessConfig::for_mode(Mode::Fjwst, 3);
        cfg.filter_components = 6;
        let pipeline = FeaturePipeline::fit(&train, &cfg).unwrap();
        assert!(pipeline.filter.is_some());

        let working = pipeline.working_spectrum(&train[0]).unwrap();
        let interp = interpolate(&train[0], &jwst_wavelength_grid()).unwrap();
        let filtered = pipeline
            .filter
            .as_ref()
            .unwrap()
            .reconstruct_row(&interp.depths)
            .unwrap();
        assert_eq!(working.depths, filtered);
        // Global row comes from the filtered spectrum.
        let x = pipeline.features(&train[0]).unwrap();
        assert_eq!(x.global_row, global_features(&working));
    }

    #[test]
    fn too_many_components_for_a_patch_is_an_error() {
        let train = training_set(30);
        let mut cfg = PreprocessConfig::for_mode(Mode::Jwst, 13);
        cfg.target_grid = crate::forward::log_wavelength_grid(0.6, 2.8, 96);
        // 96 bins over 8 patches leaves 12 bins per patch.
        assert!(FeaturePipeline::fit(&train, &cfg).is_err());
    }

    proptest! {
        #[test]
        fn normalization_lands_in_unit_interval(v in proptest::collection::vec(-1e3f64..1e3, 1..40)) {
            for x in normalize_patch(&v) {
                prop_assert!((0.0..=1.0).contains(&x));
            }
        }

        #[test]
        fn normalization_is_affine_invariant(
            v in proptest::collection::vec(-100.0f64..100.0, 2..20),
            scale in 0.1f64..50.0,
            offset in -100.0f64..100.0,
        ) {
            let shifted: Vec<f64> = v.iter().map(|x| x * scale + offset).collect();
            let a = normalize_patch(&v);
            let b = normalize_patch(&shifted);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-9, "{x} vs {y}");
            }
        }
    }
}
