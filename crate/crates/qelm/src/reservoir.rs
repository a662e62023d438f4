//! Statevector simulation of the factorized quantum reservoirs: angle
//! encoding, fixed random circuit evolution, and exact or finite-shot
//! outcome probabilities.
//!
//! Rotation convention: gates are the exponentials `e^{−iθσx}` and
//! `e^{−iθσy}` with NO θ/2 factor, so e.g. RX(π/2) maps |0⟩ to −i|1⟩. This
//! differs from the common half-angle convention; the angle-to-probability
//! identities in the tests depend on it.
//!
//! Qubit k is bit k of the basis-state index (qubit 0 is the least
//! significant bit). One reservoir applies, to |0…0⟩:
//!
//! 1. encoding layer — RX(θ_k) on the first `len(x)` qubits, θ_k the affine
//!    image of feature k in [0, 2π];
//! 2. reservoir layers — RY(β_k) on every qubit, a CNOT chain k→k+1 for
//!    ascending k, RY(α_k) on every qubit;
//! 3. measurement — outcome probabilities of all 2^Q basis states, exact or
//!    estimated from a finite number of shots.
//!
//! All random angles are fixed at bank construction and bitwise identical
//! across samples and across the train/test split.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::path::Path;

use crate::error::{Error, Result};
use crate::preprocess::FeatureMatrix;

/// Qubits of the reservoir handling the global-features row.
pub const GLOBAL_RESERVOIR_QUBITS: usize = 5;

/// A pure Q-qubit state as 2^Q complex amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: Vec<Complex64>,
    qubits: usize,
}

impl StateVector {
    /// The |0…0⟩ state.
    pub fn zero(qubits: usize) -> Self {
        let mut amps = vec![Complex64::ZERO; 1 << qubits];
        amps[0] = Complex64::ONE;
        StateVector { amps, qubits }
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        if !amps.len().is_power_of_two() {
            return Err(Error::Shape(format!(
                "amplitude count {} is not a power of two",
                amps.len()
            )));
        }
        let qubits = amps.len().trailing_zeros() as usize;
        let state = StateVector { amps, qubits };
        if (state.norm_sqr() - 1.0).abs() > 1e-10 {
            return Err(Error::Numeric(format!(
                "state norm² = {} is not 1",
                state.norm_sqr()
            )));
        }
        Ok(state)
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check_qubit(&self, k: usize) -> Result<()> {
        if k >= self.qubits {
            return Err(Error::Shape(format!(
                "qubit {k} out of range for a {}-qubit state",
                self.qubits
            )));
        }
        Ok(())
    }

    /// RX(θ) = e^{−iθσx} on qubit k:
    /// (a₀, a₁) → (cosθ·a₀ − i·sinθ·a₁, −i·sinθ·a₀ + cosθ·a₁).
    pub fn apply_rx(&mut self, k: usize, theta: f64) -> Result<()> {
        self.check_qubit(k)?;
        let (c, s) = (theta.cos(), theta.sin());
        let mis = Complex64::new(0.0, -s);
        let mask = 1usize << k;
        for i in 0..self.amps.len() {
            if i & mask == 0 {
                let j = i | mask;
                let (a0, a1) = (self.amps[i], self.amps[j]);
                self.amps[i] = c * a0 + mis * a1;
                self.amps[j] = mis * a0 + c * a1;
            }
        }
        Ok(())
    }

    /// RY(θ) = e^{−iθσy} on qubit k:
    /// (a₀, a₁) → (cosθ·a₀ − sinθ·a₁, sinθ·a₀ + cosθ·a₁).
    pub fn apply_ry(&mut self, k: usize, theta: f64) -> Result<()> {
        self.check_qubit(k)?;
        let (c, s) = (theta.cos(), theta.sin());
        let mask = 1usize << k;
        for i in 0..self.amps.len() {
            if i & mask == 0 {
                let j = i | mask;
                let (a0, a1) = (self.amps[i], self.amps[j]);
                self.amps[i] = c * a0 - s * a1;
                self.amps[j] = s * a0 + c * a1;
            }
        }
        Ok(())
    }

    /// CNOT with control k and target k+1.
    pub fn apply_cnot(&mut self, k: usize) -> Result<()> {
        if k + 1 >= self.qubits {
            return Err(Error::Shape(format!(
                "CNOT control {k} needs target {} inside a {}-qubit state",
                k + 1,
                self.qubits
            )));
        }
        let control = 1usize << k;
        let target = 1usize << (k + 1);
        for i in 0..self.amps.len() {
            if i & control != 0 && i & target == 0 {
                self.amps.swap(i, i | target);
            }
        }
        Ok(())
    }

    /// Outcome probabilities |a_m|² of all basis states.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// Exact outcome probabilities of a state.
pub fn exact_probabilities(state: &StateVector) -> Vec<f64> {
    state.probabilities()
}

/// Per-feature affine maps from the training-set feature range onto
/// [0, 2π]. Features outside the fitted range are clamped to the interval
/// boundary with a logged warning.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleEncoder {
    ranges: Vec<(f64, f64)>,
}

impl AngleEncoder {
    /// Fits the ranges from training feature rows (one slice per sample).
    /// A feature that is constant over the training set gets a unit-width
    /// range starting at its value, so its angle is always 0.
    pub fn fit<S: AsRef<[f64]>>(rows: &[S]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::Shape("cannot fit an encoder on zero rows".into()))?
            .as_ref()
            .len();
        let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); first];
        for row in rows {
            let row = row.as_ref();
            if row.len() != first {
                return Err(Error::Shape("feature rows differ in length".into()));
            }
            for (r, &x) in ranges.iter_mut().zip(row) {
                if !x.is_finite() {
                    return Err(Error::Numeric("non-finite feature value".into()));
                }
                r.0 = r.0.min(x);
                r.1 = r.1.max(x);
            }
        }
        for r in &mut ranges {
            if r.0 == r.1 {
                r.1 = r.0 + 1.0;
            }
        }
        Ok(AngleEncoder { ranges })
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn ranges(&self) -> &[(f64, f64)] {
        &self.ranges
    }

    /// Angle for feature j: 2π·(x − lo)/(hi − lo), clamped to [0, 2π].
    pub fn angle(&self, j: usize, x: f64) -> f64 {
        let (lo, hi) = self.ranges[j];
        let t = (x - lo) / (hi - lo);
        if !(0.0..=1.0).contains(&t) {
            log::warn!("feature {j} = {x} outside fitted range [{lo}, {hi}]; clamping");
        }
        TAU * t.clamp(0.0, 1.0)
    }
}

/// Fixed random angles of one reservoir circuit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReservoirConfig {
    pub qubits: usize,
    /// Second RY layer, applied last.
    pub alpha: Vec<f64>,
    /// First RY layer, applied before the CNOT chain.
    pub beta: Vec<f64>,
    pub seed: u64,
}

impl ReservoirConfig {
    /// Draws both RY layers uniformly on [0, 2π): first the β layer, then α.
    pub fn random(qubits: usize, seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let beta = (0..qubits).map(|_| rng.random_range(0.0..TAU)).collect();
        let alpha = (0..qubits).map(|_| rng.random_range(0.0..TAU)).collect();
        ReservoirConfig {
            qubits,
            alpha,
            beta,
            seed,
        }
    }
}

/// Feature encoding: RX(angle_k(x_k)) on qubit k for each feature, the
/// remaining qubits untouched.
pub fn encode(state: &mut StateVector, x: &[f64], encoder: &AngleEncoder) -> Result<()> {
    if x.len() > state.qubits() {
        return Err(Error::Shape(format!(
            "{} features do not fit on {} qubits",
            x.len(),
            state.qubits()
        )));
    }
    if x.len() != encoder.len() {
        return Err(Error::Shape(format!(
            "{} features for an encoder fitted on {}",
            x.len(),
            encoder.len()
        )));
    }
    for (k, &xk) in x.iter().enumerate() {
        state.apply_rx(k, encoder.angle(k, xk))?;
    }
    Ok(())
}

/// Reservoir evolution: RY(β) layer, CNOT chain in ascending k, RY(α) layer.
pub fn evolve_reservoir(state: &mut StateVector, config: &ReservoirConfig) -> Result<()> {
    if config.qubits != state.qubits() {
        return Err(Error::Shape(format!(
            "reservoir has {} qubits, state has {}",
            config.qubits,
            state.qubits()
        )));
    }
    for (k, &b) in config.beta.iter().enumerate() {
        state.apply_ry(k, b)?;
    }
    for k in 0..config.qubits.saturating_sub(1) {
        state.apply_cnot(k)?;
    }
    for (k, &a) in config.alpha.iter().enumerate() {
        state.apply_ry(k, a)?;
    }
    Ok(())
}

/// Empirical outcome frequencies from a multinomial draw of `shots` shots.
///
/// Sampling walks the outcomes drawing conditional binomials, which gives
/// exactly multinomial counts in O(2^Q) time per call.
pub fn sample_probabilities(p: &[f64], shots: u64, rng: &mut impl Rng) -> Result<Vec<f64>> {
    if shots == 0 {
        return Err(Error::Config("shot count must be at least 1".into()));
    }
    let mut counts = vec![0u64; p.len()];
    let mut remaining_shots = shots;
    let mut remaining_prob = 1.0f64;
    for (i, &pi) in p.iter().enumerate() {
        if remaining_shots == 0 {
            break;
        }
        if i == p.len() - 1 {
            counts[i] = remaining_shots;
            break;
        }
        let q = if remaining_prob > 0.0 {
            (pi / remaining_prob).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let c = if q >= 1.0 {
            remaining_shots
        } else {
            Binomial::new(remaining_shots, q)
                .map_err(|e| Error::Numeric(format!("binomial: {e}")))?
                .sample(rng)
        };
        counts[i] = c;
        remaining_shots -= c;
        remaining_prob -= pi;
    }
    Ok(counts
        .into_iter()
        .map(|c| c as f64 / shots as f64)
        .collect())
}

/// Exact probabilities or an empirical estimate from a finite shot count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Shots {
    Finite(u64),
    Infinite(InfiniteTag),
}

/// Serialization tag for the infinite-statistics setting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfiniteTag {
    Infinite,
}

impl Shots {
    pub const INFINITE: Shots = Shots::Infinite(InfiniteTag::Infinite);

    pub fn finite(self) -> Option<u64> {
        match self {
            Shots::Finite(n) => Some(n),
            Shots::Infinite(_) => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Shots::Infinite(_))
    }
}

impl std::fmt::Display for Shots {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Shots::Finite(n) => write!(f, "{n}"),
            Shots::Infinite(_) => write!(f, "infinite"),
        }
    }
}

impl std::str::FromStr for Shots {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inf" | "infinite" => Ok(Shots::INFINITE),
            other => other
                .parse::<u64>()
                .map(Shots::Finite)
                .map_err(|_| Error::Config(format!("bad shots value {other:?}"))),
        }
    }
}

/// One reservoir plus the encoder for its feature row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReservoirUnit {
    pub config: ReservoirConfig,
    pub encoder: AngleEncoder,
}

/// The factorized reservoir: one unit per feature row (N_p patch reservoirs
/// plus the global one), with fixed angles and train-fitted encoders.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReservoirBank {
    pub master_seed: u64,
    /// Principal components per patch (features on each patch reservoir).
    pub components: usize,
    pub reservoirs: Vec<ReservoirUnit>,
}

impl ReservoirBank {
    /// Builds the bank for feature stacks shaped like `x_train`: patch
    /// reservoirs use max(M, 3) qubits, the global reservoir
    /// [`GLOBAL_RESERVOIR_QUBITS`]. Reservoir i draws its angles from seed
    /// `master_seed + i`; encoders are fitted on the training features.
    pub fn build(x_train: &[FeatureMatrix], components: usize, master_seed: u64) -> Result<Self> {
        let first = x_train
            .first()
            .ok_or_else(|| Error::Shape("cannot build a bank from zero samples".into()))?;
        let n_rows = first.n_rows();
        let mut reservoirs = Vec::with_capacity(n_rows);
        for i in 0..n_rows {
            let qubits = if i + 1 == n_rows {
                GLOBAL_RESERVOIR_QUBITS
            } else {
                components.max(3)
            };
            let rows: Vec<&[f64]> = x_train.iter().map(|x| x.row(i)).collect();
            let encoder = AngleEncoder::fit(&rows)?;
            if encoder.len() > qubits {
                return Err(Error::Shape(format!(
                    "reservoir {i}: {} features exceed {qubits} qubits",
                    encoder.len()
                )));
            }
            reservoirs.push(ReservoirUnit {
                config: ReservoirConfig::random(qubits, master_seed.wrapping_add(i as u64)),
                encoder,
            });
        }
        Ok(ReservoirBank {
            master_seed,
            components,
            reservoirs,
        })
    }

    pub fn n_reservoirs(&self) -> usize {
        self.reservoirs.len()
    }

    /// Length of one probability column: Σ_i 2^{Q_i}.
    pub fn output_len(&self) -> usize {
        self.reservoirs.iter().map(|r| 1usize << r.config.qubits).sum()
    }

    /// Exact probability column for one feature stack: per reservoir,
    /// |0⟩ → encode → evolve → |amplitude|², blocks concatenated in
    /// reservoir order.
    pub fn exact_column(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        if x.n_rows() != self.n_reservoirs() {
            return Err(Error::Shape(format!(
                "feature stack has {} rows, bank has {} reservoirs",
                x.n_rows(),
                self.n_reservoirs()
            )));
        }
        let mut column = Vec::with_capacity(self.output_len());
        for (i, unit) in self.reservoirs.iter().enumerate() {
            let mut state = StateVector::zero(unit.config.qubits);
            encode(&mut state, x.row(i), &unit.encoder)?;
            evolve_reservoir(&mut state, &unit.config)?;
            column.extend(exact_probabilities(&state));
        }
        Ok(column)
    }

    /// Probability column with the given statistics. Finite-shot sampling
    /// for sample `sample_idx` uses RNG stream `sample_idx·n_res + i` of
    /// `sampling_seed` for reservoir i.
    pub fn run(
        &self,
        x: &FeatureMatrix,
        shots: Shots,
        sampling_seed: u64,
        sample_idx: u64,
    ) -> Result<Vec<f64>> {
        let exact = self.exact_column(x)?;
        match shots.finite() {
            None => Ok(exact),
            Some(n) => self.sample_column(&exact, n, sampling_seed, sample_idx),
        }
    }

    /// Resamples an exact column into empirical frequencies, block by block.
    pub fn sample_column(
        &self,
        exact: &[f64],
        shots: u64,
        sampling_seed: u64,
        sample_idx: u64,
    ) -> Result<Vec<f64>> {
        if exact.len() != self.output_len() {
            return Err(Error::Shape(format!(
                "column length {} does not match bank output {}",
                exact.len(),
                self.output_len()
            )));
        }
        let n_res = self.n_reservoirs() as u64;
        let mut column = Vec::with_capacity(exact.len());
        let mut offset = 0usize;
        for (i, unit) in self.reservoirs.iter().enumerate() {
            let block = 1usize << unit.config.qubits;
            let mut rng = ChaCha12Rng::seed_from_u64(sampling_seed);
            rng.set_stream(sample_idx * n_res + i as u64);
            column.extend(sample_probabilities(
                &exact[offset..offset + block],
                shots,
                &mut rng,
            )?);
            offset += block;
        }
        Ok(column)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Numeric(format!("bank serialization: {e}")))?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
    }
}

/// Aggregated outcome probabilities: one column per sample, rows are the
/// concatenated reservoir blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityMatrix {
    pub values: DMatrix<f64>,
    pub shots: Shots,
}

impl ProbabilityMatrix {
    pub fn n_features(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.values.ncols()
    }
}

/// Runs the bank over every feature stack, in parallel over samples.
pub fn build_probability_matrix(
    xs: &[FeatureMatrix],
    bank: &ReservoirBank,
    shots: Shots,
    sampling_seed: u64,
) -> Result<ProbabilityMatrix> {
    let columns: Vec<Vec<f64>> = xs
        .par_iter()
        .enumerate()
        .map(|(i, x)| bank.run(x, shots, sampling_seed, i as u64))
        .collect::<Result<_>>()?;
    let values = DMatrix::from_fn(bank.output_len(), xs.len(), |r, c| columns[c][r]);
    Ok(ProbabilityMatrix { values, shots })
}

/// Derives a finite-shot matrix from exact probabilities, using the same
/// per-(sample, reservoir) RNG streams as [`build_probability_matrix`], so
/// both routes are bitwise identical.
pub fn sample_probability_matrix(
    exact: &ProbabilityMatrix,
    bank: &ReservoirBank,
    shots: u64,
    sampling_seed: u64,
) -> Result<ProbabilityMatrix> {
    if !exact.shots.is_infinite() {
        return Err(Error::Config("source matrix must hold exact probabilities".into()));
    }
    let columns: Vec<Vec<f64>> = (0..exact.n_samples())
        .into_par_iter()
        .map(|i| {
            let col: Vec<f64> = exact.values.column(i).iter().copied().collect();
            bank.sample_column(&col, shots, sampling_seed, i as u64)
        })
        .collect::<Result<_>>()?;
    let values = DMatrix::from_fn(exact.n_features(), exact.n_samples(), |r, c| columns[c][r]);
    Ok(ProbabilityMatrix {
        values,
        shots: Shots::Finite(shots),
    })
}
