//! Box domains and per-dimension boundary treatment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boundary treatment along one coordinate direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    /// Exterior trace is zero: nothing flows in, outflow leaves freely.
    ZeroInflow,
}

/// Axis-aligned box `[lower_m, upper_m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub boundaries: Vec<Boundary>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, boundaries: Vec<Boundary>) -> Result<Self> {
        if lower.len() != upper.len() || lower.len() != boundaries.len() {
            return Err(Error::DimensionMismatch { expected: lower.len(), got: upper.len().min(boundaries.len()) });
        }
        if lower.iter().zip(&upper).any(|(a, b)| !(b > a)) {
            return Err(Error::Config("domain extents must be positive".into()));
        }
        Ok(Self { lower, upper, boundaries })
    }

    /// `[0, 1]^d` with periodic boundaries.
    pub fn unit_periodic(d: usize) -> Self {
        Self { lower: vec![0.0; d], upper: vec![1.0; d], boundaries: vec![Boundary::Periodic; d] }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn extent(&self, m: usize) -> f64 {
        self.upper[m] - self.lower[m]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|m| self.extent(m)).product()
    }

    /// Physical coordinate to unit coordinate along `m`.
    pub fn to_unit(&self, m: usize, x: f64) -> f64 {
        (x - self.lower[m]) / self.extent(m)
    }

    pub fn from_unit(&self, m: usize, xi: f64) -> f64 {
        self.lower[m] + xi * self.extent(m)
    }
}
