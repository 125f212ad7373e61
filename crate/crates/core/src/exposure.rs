//! Piecewise-constant exposure schedules (usage per unit time).

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Exposure rate that is constant on each segment `(b[k], b[k+1]]`.
///
/// Segments are left-open and right-closed, so an event recorded at the
/// last day of a month picks up that month's rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureSchedule {
    pub unit_id: String,
    /// `breakpoints[0] == 0`, strictly ascending, last element is `tau`.
    pub breakpoints: Vec<f64>,
    /// One non-negative rate per segment.
    pub daily_rate: Vec<f64>,
}

impl ExposureSchedule {
    pub fn new(unit_id: impl Into<String>, breakpoints: Vec<f64>, daily_rate: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 || daily_rate.len() + 1 != breakpoints.len() {
            return Err(invalid("exposure needs one rate per segment and at least one segment"));
        }
        if breakpoints[0] != 0.0 {
            return Err(invalid("exposure breakpoints must start at 0"));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("exposure breakpoints must be strictly ascending"));
        }
        if daily_rate.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(invalid("exposure rates must be finite and non-negative"));
        }
        Ok(Self { unit_id: unit_id.into(), breakpoints, daily_rate })
    }

    /// A single segment of constant rate on `(0, tau]`.
    pub fn constant(unit_id: impl Into<String>, rate: f64, tau: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(invalid("tau must be positive"));
        }
        Self::new(unit_id, alloc::vec![0.0, tau], alloc::vec![rate])
    }

    pub fn tau(&self) -> f64 {
        *self.breakpoints.last().expect("validated non-empty")
    }

    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.breakpoints.windows(2).zip(&self.daily_rate).map(|(w, &r)| (w[0], w[1], r))
    }

    /// Rate at time `t`, or `None` outside `(0, tau]`.
    pub fn rate_at(&self, t: f64) -> Option<f64> {
        if !(t > 0.0) || t > self.tau() {
            return None;
        }
        let k = self.breakpoints.partition_point(|&b| b < t);
        Some(self.daily_rate[k - 1])
    }

    /// Integrated exposure over `(0, tau]`.
    pub fn total(&self) -> f64 {
        self.segments().map(|(a, b, r)| r * (b - a)).sum()
    }

    /// Integral of `f'(s) x(s)` over `(0, tau]` given the antiderivative
    /// difference `cum(a, b) = F(b) - F(a)`.
    pub fn integrate_with<F: Fn(f64, f64) -> f64>(&self, cum: F) -> f64 {
        self.segments().filter(|s| s.2 > 0.0).map(|(a, b, r)| r * cum(a, b)).sum()
    }

    /// Sum of several schedules on a common horizon (superposition).
    pub fn superpose(unit_id: impl Into<String>, parts: &[ExposureSchedule]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| invalid("no schedules to superpose"))?;
        let tau = first.tau();
        if parts.iter().any(|p| (p.tau() - tau).abs() > 1e-9 * tau) {
            return Err(invalid("schedules to superpose must share tau"));
        }
        let mut cuts: Vec<f64> = parts.iter().flat_map(|p| p.breakpoints.iter().copied()).collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * tau);
        *cuts.last_mut().expect("non-empty") = tau;
        let rates = cuts
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                parts.iter().map(|p| p.rate_at(mid).unwrap_or(0.0)).sum()
            })
            .collect();
        Self::new(unit_id, cuts, rates)
    }

    /// Rescale time by `c` (rates scale by `1/c` so total exposure is kept).
    pub fn rescale_time(&self, c: f64) -> Self {
        Self {
            unit_id: self.unit_id.clone(),
            breakpoints: self.breakpoints.iter().map(|b| b * c).collect(),
            daily_rate: self.daily_rate.iter().map(|r| r / c).collect(),
        }
    }
}
