//! Piecewise-linear labour rate `C(t)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Positive piecewise-linear function of time, held constant outside its knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabourRate {
    knots: Vec<(f64, f64)>,
}

impl LabourRate {
    pub fn constant(c: f64) -> Result<Self> {
        Self::from_knots(vec![(0.0, c)])
    }

    /// Knots must have strictly increasing times and positive values.
    pub fn from_knots(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::params("labour rate needs at least one knot"));
        }
        for (i, &(t, c)) in knots.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::params(format!("knot {i}: time {t} is not finite")));
            }
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::params(format!("knot {i}: C = {c} must be positive")));
            }
        }
        if let Some(w) = knots.windows(2).find(|w| w[1].0 <= w[0].0) {
            return Err(Error::params(format!("knot times not increasing at t = {}", w[1].0)));
        }
        Ok(Self { knots })
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn is_constant(&self) -> bool {
        self.knots.windows(2).all(|w| w[0].1 == w[1].1)
    }

    pub fn min_value(&self) -> f64 {
        self.knots.iter().map(|k| k.1).fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.knots.iter().map(|k| k.1).fold(0.0, f64::max)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let k = &self.knots;
        if t <= k[0].0 {
            return k[0].1;
        }
        let last = k[k.len() - 1];
        if t >= last.0 {
            return last.1;
        }
        let i = k.partition_point(|&(tk, _)| tk <= t);
        let (t0, c0) = k[i - 1];
        let (t1, c1) = k[i];
        c0 + (c1 - c0) * (t - t0) / (t1 - t0)
    }
}
