//! Desk-scale synthetic transmission spectra on the discrete parameter grid.
//!
//! The generator is an explicit closed form, not radiative transfer:
//!
//! ```text
//! depth(λ) = d0·R² + Σ_mol amp_mol · Σ_band s_b · exp(−(λ − c_b)² / (2 w_b(T)²))
//!
//! amp_mol  = A0 · (0.05 + 0.95·v_mol) · (0.3 + 0.7·h)
//! v_mol    = (log10 VMR_mol + 8) / 7            (0 at 1e-8, 1 at 1e-1)
//! h        = (T·R²/M − 320) / (5625 − 320)      (scale-height factor, 0..1)
//! w_b(T)   = f_b·c_b · (0.8 + 0.4·(T − 1000)/1000)
//! ```
//!
//! with R in Jupiter radii, M in Jupiter masses, T in Kelvin, λ in µm. The
//! flat baseline scales with the planet disk area; every band amplitude
//! grows affinely with the molecule's log10 mixing ratio and with the
//! scale-height factor T·R²/M; band widths grow affinely with temperature.
//!
//! The band table derives from per-molecule fundamentals (center c µm,
//! strength s), each of which contributes one broad envelope Gaussian
//! (f_b = 0.12) plus four narrow branch lines (f_b = 0.03) at
//! c·(1 ± 0.025) with strength 0.45·s and c·(1 ± 0.06) with strength
//! 0.35·s. Fundamentals:
//!
//! | molecule | (center µm, strength)                                      |
//! |----------|------------------------------------------------------------|
//! | H2O      | (0.95, 0.30) (1.13, 0.45) (1.4, 1.0) (1.9, 0.8) (2.7, 1.3) |
//! | CH4      | (0.89, 0.25) (1.15, 0.35) (1.7, 1.0) (2.3, 0.9) (3.3, 1.1) |
//! | CO2      | (1.6, 0.30) (2.0, 1.0) (4.3, 1.4)                          |
//! | CO       | (1.6, 0.25) (2.3, 0.7) (4.7, 1.0)                          |
//!
//! Envelopes overlap across neighboring patches, CO's in-range bands
//! deliberately coincide with CH4 and CO2 bands, and the strongest CO2/CO
//! fundamentals fall outside the 0.6–2.8 µm instrument range.
//!
//! The full function is deterministic; all randomness in dataset generation
//! flows from the single dataset seed.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::params::{
    build_grid, sample_params, AtmosphericParams, Param, ParameterBounds, ParameterGrid,
};
use crate::spectrum::{SpectralDataset, Spectrum};

/// Bins of the native wavelength grid.
pub const DEFAULT_BINS: usize = 515;

/// Native wavelength range in micrometers.
pub const DEFAULT_RANGE_UM: (f64, f64) = (0.3, 50.0);

/// Baseline transit depth of a 1-Jupiter-radius planet.
pub const BASE_DEPTH: f64 = 5.0e-3;

/// Peak depth modulation of a fully saturated band.
pub const BAND_AMPLITUDE: f64 = 1.8e-3;

/// Scale-height factor T·R²/M at the corners of the parameter box.
const H_MIN: f64 = 320.0; // T=1000, R=0.8, M=2.0
const H_MAX: f64 = 5625.0; // T=2000, R=1.5, M=0.8

/// Fractional width of a fundamental's broad envelope Gaussian.
pub const ENVELOPE_WIDTH_FRACTION: f64 = 0.12;

/// Fractional width of the narrow branch lines.
pub const LINE_WIDTH_FRACTION: f64 = 0.03;

/// Branch lines attached to every fundamental: (center offset as a fraction
/// of the fundamental center, strength relative to the fundamental).
pub const BRANCH_LINES: [(f64, f64); 4] =
    [(-0.06, 0.35), (-0.025, 0.45), (0.025, 0.45), (0.06, 0.35)];

/// (center µm, strength) fundamentals, per molecule.
pub const H2O_FUNDAMENTALS: [(f64, f64); 5] = [
    (0.95, 0.30),
    (1.13, 0.45),
    (1.4, 1.0),
    (1.9, 0.8),
    (2.7, 1.3),
];
pub const CH4_FUNDAMENTALS: [(f64, f64); 5] = [
    (0.89, 0.25),
    (1.15, 0.35),
    (1.7, 1.0),
    (2.3, 0.9),
    (3.3, 1.1),
];
pub const CO2_FUNDAMENTALS: [(f64, f64); 3] = [(1.6, 0.30), (2.0, 1.0), (4.3, 1.4)];
pub const CO_FUNDAMENTALS: [(f64, f64); 3] = [(1.6, 0.25), (2.3, 0.7), (4.7, 1.0)];

/// One Gaussian component of the opacity model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Band {
    pub center_um: f64,
    pub strength: f64,
    pub width_fraction: f64,
}

/// Expands the fundamentals of one molecule into its full band table:
/// envelope plus branch lines per fundamental.
pub fn band_table(fundamentals: &[(f64, f64)]) -> Vec<Band> {
    let mut bands = Vec::with_capacity(fundamentals.len() * (1 + BRANCH_LINES.len()));
    for &(c, s) in fundamentals {
        bands.push(Band {
            center_um: c,
            strength: s,
            width_fraction: ENVELOPE_WIDTH_FRACTION,
        });
        for &(offset, rel) in &BRANCH_LINES {
            bands.push(Band {
                center_um: c * (1.0 + offset),
                strength: s * rel,
                width_fraction: LINE_WIDTH_FRACTION,
            });
        }
    }
    bands
}

/// Wavelength grid uniform in log10(λ) with exact endpoints.
pub fn log_wavelength_grid(lo_um: f64, hi_um: f64, bins: usize) -> Vec<f64> {
    let (llo, lhi) = (lo_um.log10(), hi_um.log10());
    let step = (lhi - llo) / (bins - 1) as f64;
    let mut grid: Vec<f64> = (0..bins)
        .map(|i| 10f64.powf(llo + step * i as f64))
        .collect();
    grid[0] = lo_um;
    grid[bins - 1] = hi_um;
    grid
}

/// The native 515-bin grid over 0.3–50 µm.
pub fn default_wavelength_grid() -> Vec<f64> {
    log_wavelength_grid(DEFAULT_RANGE_UM.0, DEFAULT_RANGE_UM.1, DEFAULT_BINS)
}

fn band_sum(lambda_um: f64, bands: &[Band], temp: f64) -> f64 {
    let width_scale = 0.8 + 0.4 * (temp - 1000.0) / 1000.0;
    bands
        .iter()
        .map(|b| {
            let w = b.width_fraction * b.center_um * width_scale;
            let z = (lambda_um - b.center_um) / w;
            b.strength * (-0.5 * z * z).exp()
        })
        .sum()
}

fn amplitude(log_vmr: f64, h_norm: f64) -> f64 {
    let v = (log_vmr + 8.0) / 7.0;
    BAND_AMPLITUDE * (0.05 + 0.95 * v) * (0.55 + 0.45 * h_norm)
}

fn check_in_bounds(params: &AtmosphericParams, bounds: &ParameterBounds) -> Result<()> {
    for p in Param::ALL {
        let (lo, hi) = bounds.get(p);
        let (lo, hi) = if p.is_log_vmr() {
            (lo.log10(), hi.log10())
        } else {
            (lo, hi)
        };
        let v = params.get(p);
        if !v.is_finite() || v < lo || v > hi {
            return Err(Error::Config(format!(
                "{} = {v} outside admissible range [{lo}, {hi}]",
                p.name()
            )));
        }
    }
    Ok(())
}

/// Evaluates the closed-form model on `grid` (strictly increasing, within
/// 0.3–50 µm). Rejects parameters outside the admissible box.
pub fn synth_spectrum(params: &AtmosphericParams, grid: &[f64]) -> Result<Spectrum> {
    check_in_bounds(params, &ParameterBounds::default())?;
    if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Numeric("grid must be strictly increasing".into()));
    }
    if grid[0] < DEFAULT_RANGE_UM.0 || grid[grid.len() - 1] > DEFAULT_RANGE_UM.1 {
        return Err(Error::Config(format!(
            "grid must lie within [{}, {}] µm",
            DEFAULT_RANGE_UM.0, DEFAULT_RANGE_UM.1
        )));
    }

    let h_norm = (params.temp * params.radius * params.radius / params.mass - H_MIN)
        / (H_MAX - H_MIN);
    let base = BASE_DEPTH * params.radius * params.radius;
    let molecules = [
        (amplitude(params.h2o, h_norm), band_table(&H2O_FUNDAMENTALS)),
        (amplitude(params.ch4, h_norm), band_table(&CH4_FUNDAMENTALS)),
        (amplitude(params.co2, h_norm), band_table(&CO2_FUNDAMENTALS)),
        (amplitude(params.co, h_norm), band_table(&CO_FUNDAMENTALS)),
    ];
    let depths = grid
        .iter()
        .map(|&lambda| {
            base + molecules
                .iter()
                .map(|(amp, bands)| amp * band_sum(lambda, bands, params.temp))
                .sum::<f64>()
        })
        .collect();
    Spectrum::new(grid.to_vec(), depths, Some(*params))
}

/// Generates `n` labeled spectra on the native grid. Parameters are drawn
/// from the default ten-value grid; spectrum `i` uses RNG stream `i` of the
/// dataset seed, so output is reproducible and order-independent of the
/// parallel schedule.
pub fn generate_dataset(n: usize, seed: u64) -> Result<SpectralDataset> {
    generate_dataset_on(n, seed, &default_wavelength_grid())
}

/// [`generate_dataset`] on an explicit wavelength grid.
pub fn generate_dataset_on(n: usize, seed: u64, grid: &[f64]) -> Result<SpectralDataset> {
    if n == 0 {
        return Err(Error::Config("dataset size must be at least 1".into()));
    }
    let param_grid: ParameterGrid = build_grid(&ParameterBounds::default())?;
    let spectra: Vec<Spectrum> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let params = sample_params(&param_grid, &mut rng);
            synth_spectrum(&params, grid)
        })
        .collect::<Result<_>>()?;
    SpectralDataset::new(grid.to_vec(), spectra, seed)
}
