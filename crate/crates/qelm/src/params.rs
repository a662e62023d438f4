//! Retrieval targets and the discrete parameter grid they are drawn from.
//!
//! Seven targets: four molecular volume mixing ratios (handled throughout in
//! log10), planetary mass and radius in Jupiter units, and the equilibrium
//! temperature in Kelvin. Each parameter takes one of exactly ten admissible
//! values between its bounds; mixing-ratio grids are uniform in log10, the
//! physical grids are linear.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of grid values per parameter.
pub const GRID_POINTS: usize = 10;

/// Number of retrieval targets.
pub const PARAM_COUNT: usize = 7;

/// The retrieval targets, in canonical order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Param {
    Ch4,
    Co2,
    Co,
    H2o,
    Mass,
    Radius,
    Temp,
}

impl Param {
    pub const ALL: [Param; PARAM_COUNT] = [
        Param::Ch4,
        Param::Co2,
        Param::Co,
        Param::H2o,
        Param::Mass,
        Param::Radius,
        Param::Temp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Param::Ch4 => "ch4",
            Param::Co2 => "co2",
            Param::Co => "co",
            Param::H2o => "h2o",
            Param::Mass => "mass",
            Param::Radius => "radius",
            Param::Temp => "temp",
        }
    }

    /// Mixing ratios are represented (and regressed) as log10 values.
    pub fn is_log_vmr(self) -> bool {
        matches!(self, Param::Ch4 | Param::Co2 | Param::Co | Param::H2o)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// One labeled point in parameter space. Mixing ratios are stored as log10
/// of the volume mixing ratio; mass and radius in Jupiter units; temperature
/// in Kelvin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtmosphericParams {
    pub ch4: f64,
    pub co2: f64,
    pub co: f64,
    pub h2o: f64,
    pub mass: f64,
    pub radius: f64,
    pub temp: f64,
}

impl AtmosphericParams {
    pub fn get(&self, p: Param) -> f64 {
        match p {
            Param::Ch4 => self.ch4,
            Param::Co2 => self.co2,
            Param::Co => self.co,
            Param::H2o => self.h2o,
            Param::Mass => self.mass,
            Param::Radius => self.radius,
            Param::Temp => self.temp,
        }
    }

    pub fn to_array(&self) -> [f64; PARAM_COUNT] {
        [
            self.ch4,
            self.co2,
            self.co,
            self.h2o,
            self.mass,
            self.radius,
            self.temp,
        ]
    }

    pub fn from_array(a: [f64; PARAM_COUNT]) -> Self {
        AtmosphericParams {
            ch4: a[0],
            co2: a[1],
            co: a[2],
            h2o: a[3],
            mass: a[4],
            radius: a[5],
            temp: a[6],
        }
    }
}

/// Per-parameter lower/upper bounds in native units (raw mixing ratio for
/// the molecules, Jupiter masses/radii, Kelvin).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterBounds {
    pub ch4: (f64, f64),
    pub co2: (f64, f64),
    pub co: (f64, f64),
    pub h2o: (f64, f64),
    pub mass: (f64, f64),
    pub radius: (f64, f64),
    pub temp: (f64, f64),
}

impl Default for ParameterBounds {
    fn default() -> Self {
        ParameterBounds {
            ch4: (1e-8, 1e-1),
            co2: (1e-8, 1e-1),
            co: (1e-8, 1e-1),
            h2o: (1e-8, 1e-1),
            mass: (0.8, 2.0),
            radius: (0.8, 1.5),
            temp: (1000.0, 2000.0),
        }
    }
}

impl ParameterBounds {
    pub fn get(&self, p: Param) -> (f64, f64) {
        match p {
            Param::Ch4 => self.ch4,
            Param::Co2 => self.co2,
            Param::Co => self.co,
            Param::H2o => self.h2o,
            Param::Mass => self.mass,
            Param::Radius => self.radius,
            Param::Temp => self.temp,
        }
    }
}

/// Ten admissible values per parameter, in the same representation as
/// [`AtmosphericParams`] (log10 for mixing ratios).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterGrid {
    values: Vec<Vec<f64>>,
}

impl ParameterGrid {
    /// Builds a grid from explicit per-parameter value lists (one list per
    /// target, in canonical order, each of length [`GRID_POINTS`], sorted).
    pub fn from_values(values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != PARAM_COUNT {
            return Err(Error::Shape(format!(
                "expected {PARAM_COUNT} value lists, got {}",
                values.len()
            )));
        }
        for (p, list) in Param::ALL.iter().zip(&values) {
            if list.len() != GRID_POINTS {
                return Err(Error::Shape(format!(
                    "{}: expected {GRID_POINTS} grid values, got {}",
                    p.name(),
                    list.len()
                )));
            }
            if list.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!("{}: non-finite grid value", p.name())));
            }
            if list.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::Numeric(format!("{}: grid values not sorted", p.name())));
            }
        }
        Ok(ParameterGrid { values })
    }

    pub fn values(&self, p: Param) -> &[f64] {
        &self.values[p.index()]
    }
}

/// Inclusive linear spacing with exact endpoints.
fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    let mut v: Vec<f64> = (0..n).map(|i| lo + step * i as f64).collect();
    v[0] = lo;
    v[n - 1] = hi;
    v
}

/// Builds the ten-value grids: mixing ratios uniform in log10 between the
/// bounds, the physical parameters uniform in their native unit. Endpoints
/// are the bounds themselves.
pub fn build_grid(bounds: &ParameterBounds) -> Result<ParameterGrid> {
    let mut values = Vec::with_capacity(PARAM_COUNT);
    for p in Param::ALL {
        let (lo, hi) = bounds.get(p);
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Numeric(format!("{}: non-finite bounds", p.name())));
        }
        if lo >= hi {
            return Err(Error::Config(format!(
                "{}: bounds must satisfy low < high, got ({lo}, {hi})",
                p.name()
            )));
        }
        let list = if p.is_log_vmr() {
            if lo <= 0.0 {
                return Err(Error::Config(format!(
                    "{}: mixing-ratio bounds must be positive",
                    p.name()
                )));
            }
            linspace(lo.log10(), hi.log10(), GRID_POINTS)
        } else {
            linspace(lo, hi, GRID_POINTS)
        };
        values.push(list);
    }
    ParameterGrid::from_values(values)
}

/// Draws one parameter vector with each field independent and uniform over
/// its ten grid values.
pub fn sample_params(grid: &ParameterGrid, rng: &mut impl Rng) -> AtmosphericParams {
    let mut a = [0.0; PARAM_COUNT];
    for (i, slot) in a.iter_mut().enumerate() {
        let list = &grid.values[i];
        *slot = list[rng.random_range(0..list.len())];
    }
    AtmosphericParams::from_array(a)
}
