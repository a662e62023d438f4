//! Photon shot noise for a JWST-like observation.
//!
//! The per-bin relative uncertainty comes from the mean photoelectron count
//!
//! ```text
//! N_ph = (π τ Δt)/(h c) · (R★ D / 2d)² · ∫ B(λ, T★) λ dλ
//! ```
//!
//! integrated over the bin, with a flat noise floor (30 ppm by default)
//! applied wherever the photometric term is smaller. Noise is injected as an
//! independent zero-mean Gaussian perturbation of the transit depth in each
//! bin, σ = max(1/√N_ph, floor). `D` is kept as the quoted dimensionless
//! telescope parameter with units absorbed into the prefactor.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::{SpectralDataset, Spectrum};

/// Planck constant, J·s.
const PLANCK_H: f64 = 6.62607015e-34;
/// Speed of light, m/s.
const LIGHT_C: f64 = 299_792_458.0;
/// Boltzmann constant, J/K.
const BOLTZMANN_K: f64 = 1.380649e-23;
/// Solar radius, m.
const R_SUN: f64 = 6.957e8;
/// Parsec, m.
const PARSEC: f64 = 3.0856775814913673e16;

/// Simpson intervals per bin integral (even; relative error ≪ 1e-6).
const QUAD_INTERVALS: usize = 2048;

/// Stellar and telescope parameters of the simulated observation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InstrumentModel {
    /// Stellar radius in solar radii.
    pub r_star: f64,
    /// Stellar effective temperature in Kelvin.
    pub t_star: f64,
    /// Distance to the star in parsec.
    pub distance_pc: f64,
    /// Dimensionless telescope diameter parameter.
    pub diameter: f64,
    /// System throughput.
    pub throughput: f64,
    /// Integration time in seconds.
    pub integration_s: f64,
    /// Noise floor in parts per million.
    pub floor_ppm: f64,
}

impl Default for InstrumentModel {
    fn default() -> Self {
        InstrumentModel {
            r_star: 1.46,
            t_star: 6460.0,
            distance_pc: 270.0,
            diameter: 16.0,
            throughput: 0.4,
            integration_s: 21340.0,
            floor_ppm: 30.0,
        }
    }
}

impl InstrumentModel {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("r_star", self.r_star),
            ("t_star", self.t_star),
            ("distance_pc", self.distance_pc),
            ("diameter", self.diameter),
            ("throughput", self.throughput),
            ("integration_s", self.integration_s),
        ];
        for (name, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Config(format!("instrument.{name} must be positive, got {v}")));
            }
        }
        if !self.floor_ppm.is_finite() || self.floor_ppm < 0.0 {
            return Err(Error::Config(format!(
                "instrument.floor_ppm must be nonnegative, got {}",
                self.floor_ppm
            )));
        }
        Ok(())
    }
}

fn planck_unchecked(lambda_m: f64, t_k: f64) -> f64 {
    let x = PLANCK_H * LIGHT_C / (lambda_m * BOLTZMANN_K * t_k);
    2.0 * PLANCK_H * LIGHT_C * LIGHT_C / lambda_m.powi(5) / x.exp_m1()
}

/// Spectral radiance B(λ, T) in W·m⁻³·sr⁻¹. λ in meters, T in Kelvin.
pub fn planck(lambda_m: f64, t_k: f64) -> Result<f64> {
    if !lambda_m.is_finite() || !t_k.is_finite() || lambda_m <= 0.0 || t_k <= 0.0 {
        return Err(Error::Numeric(format!(
            "planck requires positive finite inputs, got λ={lambda_m}, T={t_k}"
        )));
    }
    Ok(planck_unchecked(lambda_m, t_k))
}

/// Mean photoelectron count collected in the bin [λ1, λ2] (micrometers).
pub fn photon_count(lambda1_um: f64, lambda2_um: f64, inst: &InstrumentModel) -> Result<f64> {
    inst.validate()?;
    if !lambda1_um.is_finite() || !lambda2_um.is_finite() || lambda1_um <= 0.0 {
        return Err(Error::Numeric(format!(
            "bin edges must be positive finite, got ({lambda1_um}, {lambda2_um})"
        )));
    }
    if lambda2_um < lambda1_um {
        return Err(Error::Numeric(format!(
            "inverted bin edges ({lambda1_um}, {lambda2_um})"
        )));
    }
    if lambda2_um == lambda1_um {
        return Ok(0.0);
    }

    // Composite Simpson over the bin, integrand B(λ, T★)·λ.
    let (a, b) = (lambda1_um * 1e-6, lambda2_um * 1e-6);
    let h = (b - a) / QUAD_INTERVALS as f64;
    let f = |lambda: f64| planck_unchecked(lambda, inst.t_star) * lambda;
    let mut sum = f(a) + f(b);
    for i in 1..QUAD_INTERVALS {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + h * i as f64);
    }
    let integral = sum * h / 3.0;

    let geom = inst.r_star * R_SUN * inst.diameter / (2.0 * inst.distance_pc * PARSEC);
    let prefactor =
        std::f64::consts::PI * inst.throughput * inst.integration_s / (PLANCK_H * LIGHT_C);
    Ok(prefactor * geom * geom * integral)
}

/// Relative depth uncertainty for the bin: max(1/√N_ph, floor).
pub fn noise_sigma(lambda1_um: f64, lambda2_um: f64, inst: &InstrumentModel) -> Result<f64> {
    let n_ph = photon_count(lambda1_um, lambda2_um, inst)?;
    if n_ph <= 0.0 {
        return Err(Error::Numeric(format!(
            "zero photon count in bin ({lambda1_um}, {lambda2_um}): sigma diverges"
        )));
    }
    Ok((1.0 / n_ph.sqrt()).max(inst.floor_ppm * 1e-6))
}

/// Bin edges around each grid point, at geometric midpoints of neighbors
/// (end bins mirrored in log).
pub fn bin_edges(grid_um: &[f64]) -> Vec<(f64, f64)> {
    let n = grid_um.len();
    if n == 1 {
        return vec![(grid_um[0], grid_um[0])];
    }
    (0..n)
        .map(|i| {
            let lo = if i == 0 {
                grid_um[0] * (grid_um[0] / grid_um[1]).sqrt()
            } else {
                (grid_um[i - 1] * grid_um[i]).sqrt()
            };
            let hi = if i == n - 1 {
                grid_um[n - 1] * (grid_um[n - 1] / grid_um[n - 2]).sqrt()
            } else {
                (grid_um[i] * grid_um[i + 1]).sqrt()
            };
            (lo, hi)
        })
        .collect()
}

/// Per-bin σ for every grid point.
pub fn noise_sigmas(grid_um: &[f64], inst: &InstrumentModel) -> Result<Vec<f64>> {
    bin_edges(grid_um)
        .into_iter()
        .map(|(lo, hi)| noise_sigma(lo, hi, inst))
        .collect()
}

/// Adds N(0, σᵢ) to each depth with precomputed σ values. σ = 0 leaves the
/// bin untouched.
pub fn add_shot_noise_with(spec: &Spectrum, sigmas: &[f64], rng: &mut impl Rng) -> Result<Spectrum> {
    if sigmas.len() != spec.len() {
        return Err(Error::Shape(format!(
            "{} sigma values for {} bins",
            sigmas.len(),
            spec.len()
        )));
    }
    let depths = spec
        .depths
        .iter()
        .zip(sigmas)
        .map(|(&d, &s)| {
            if s == 0.0 {
                d
            } else {
                d + Normal::new(0.0, s).expect("sigma is finite nonnegative").sample(rng)
            }
        })
        .collect();
    Spectrum::new(spec.wavelengths.clone(), depths, spec.params)
}

/// Computes per-bin σ from the instrument model and perturbs the spectrum.
pub fn add_shot_noise(spec: &Spectrum, inst: &InstrumentModel, rng: &mut impl Rng) -> Result<Spectrum> {
    let sigmas = noise_sigmas(&spec.wavelengths, inst)?;
    add_shot_noise_with(spec, &sigmas, rng)
}

/// Noises every spectrum of a dataset. σ values are computed once for the
/// shared grid; spectrum `i` perturbs with RNG stream `i` of `seed`.
pub fn apply_shot_noise(
    ds: &SpectralDataset,
    inst: &InstrumentModel,
    seed: u64,
) -> Result<SpectralDataset> {
    let sigmas = noise_sigmas(&ds.wavelengths, inst)?;
    let spectra: Vec<Spectrum> = ds
        .spectra
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            add_shot_noise_with(s, &sigmas, &mut rng)
        })
        .collect::<Result<_>>()?;
    SpectralDataset::new(ds.wavelengths.clone(), spectra, ds.seed)
}
