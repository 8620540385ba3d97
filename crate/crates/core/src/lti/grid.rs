use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing set of positive angular frequencies (rad/s).
///
/// The Hz values are kept alongside so that grids built from Hz survive a
/// write/read cycle through CSV bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    omega: Vec<f64>,
    hz: Vec<f64>,
}

impl FrequencyGrid {
    pub fn from_rad_per_sec(omega: Vec<f64>) -> Result<Self> {
        let hz = omega.iter().map(|w| w / (2.0 * PI)).collect();
        Self::checked(omega, hz)
    }

    pub fn from_hz(hz: Vec<f64>) -> Result<Self> {
        let omega = hz.iter().map(|f| 2.0 * PI * f).collect();
        Self::checked(omega, hz)
    }

    fn checked(omega: Vec<f64>, hz: Vec<f64>) -> Result<Self> {
        if omega.is_empty() {
            return Err(Error::InvalidGrid("grid is empty".into()));
        }
        if let Some(bad) = omega.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidGrid(format!(
                "frequency {bad} is not a positive finite value"
            )));
        }
        if let Some(i) = (1..omega.len()).find(|&i| omega[i] <= omega[i - 1]) {
            return Err(Error::InvalidGrid(format!(
                "frequencies not strictly increasing at index {i}"
            )));
        }
        Ok(Self { omega, hz })
    }

    /// `n` log-spaced points from `f_lo` to `f_hi` (Hz), endpoints included.
    pub fn log_hz(f_lo: f64, f_hi: f64, n: usize) -> Result<Self> {
        if n == 0 || !(f_lo > 0.0 && f_hi > f_lo) {
            return Err(Error::InvalidGrid(format!(
                "bad log grid spec [{f_lo}, {f_hi}] with {n} points"
            )));
        }
        if n == 1 {
            return Self::from_hz(vec![f_lo]);
        }
        let (a, b) = (f_lo.log10(), f_hi.log10());
        let hz = (0..n)
            .map(|k| 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64))
            .collect();
        Self::from_hz(hz)
    }

    /// Merge extra Hz points into this grid, dropping near-duplicates.
    pub fn with_extra_hz(&self, extra: &[f64]) -> Result<Self> {
        let mut all: Vec<f64> = self.hz.iter().chain(extra.iter()).copied().collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut merged: Vec<f64> = Vec::with_capacity(all.len());
        for f in all {
            match merged.last() {
                Some(&last) if (f - last) <= 1e-9 * f => {}
                _ => merged.push(f),
            }
        }
        Self::from_hz(merged)
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn hz(&self) -> &[f64] {
        &self.hz
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(FrequencyGrid::from_rad_per_sec(vec![]).is_err());
        assert!(FrequencyGrid::from_rad_per_sec(vec![1.0, 1.0]).is_err());
        assert!(FrequencyGrid::from_rad_per_sec(vec![-1.0, 2.0]).is_err());
        assert!(FrequencyGrid::from_rad_per_sec(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn log_grid_hits_endpoints() {
        let g = FrequencyGrid::log_hz(1.0, 5000.0, 600).unwrap();
        assert_eq!(g.len(), 600);
        assert!((g.hz()[0] - 1.0).abs() < 1e-12);
        assert!((g.hz()[599] - 5000.0).abs() < 1e-9);
    }

    #[test]
    fn merging_keeps_order_and_drops_duplicates() {
        let g = FrequencyGrid::from_hz(vec![1.0, 10.0, 100.0]).unwrap();
        let m = g.with_extra_hz(&[10.0, 50.0, 0.5]).unwrap();
        assert_eq!(m.hz(), &[0.5, 1.0, 10.0, 50.0, 100.0]);
    }
}
