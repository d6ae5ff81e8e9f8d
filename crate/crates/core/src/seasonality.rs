//! Seasonality as a normalized piecewise-linear density on `[0, T]`.
//!
//! The density is given by knots `(t_i, sigma_i)`; construction rescales it so
//! the cumulative `sigma_hat` reaches exactly 1 at the horizon. The cumulative
//! is integrated analytically per segment (quadratic in `t`), so there is no
//! quadrature error in `sigma_hat`.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seasonality {
    horizon: f64,
    /// Knot abscissae, strictly increasing, first 0, last `horizon`.
    ts: Vec<f64>,
    /// Normalized density at each knot.
    ds: Vec<f64>,
    /// Cumulative density at each knot; last entry is exactly 1.
    cum: Vec<f64>,
}

impl Seasonality {
    /// Uniform density `1/T` on `[0, T]`.
    pub fn uniform(horizon: f64) -> Result<Self> {
        Self::from_knots(&[(0.0, 1.0), (horizon, 1.0)])
    }

    /// Build from density knots; the density is normalized to unit mass.
    pub fn from_knots(knots: &[(f64, f64)]) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::input(format!(
                "seasonality needs at least 2 knots, got {}",
                knots.len()
            )));
        }
        for (idx, &(t, d)) in knots.iter().enumerate() {
            if !t.is_finite() || !d.is_finite() {
                return Err(Error::input(format!("seasonality knot {idx} is non-finite")));
            }
            if d < 0.0 {
                return Err(Error::input(format!(
                    "seasonality knot {idx} has negative density {d}"
                )));
            }
        }
        if knots[0].0 != 0.0 {
            return Err(Error::input(format!(
                "seasonality must start at t=0, first knot is at t={}",
                knots[0].0
            )));
        }
        for idx in 1..knots.len() {
            if knots[idx].0 <= knots[idx - 1].0 {
                return Err(Error::input(format!(
                    "seasonality knot {idx} at t={} does not increase past t={}",
                    knots[idx].0,
                    knots[idx - 1].0
                )));
            }
        }
        let horizon = knots[knots.len() - 1].0;

        // Exact trapezoid mass of each linear segment, then running sums.
        let mut raw_cum = Vec::with_capacity(knots.len());
        let mut running = 0.0;
        raw_cum.push(0.0);
        for w in knots.windows(2) {
            let (t0, d0) = w[0];
            let (t1, d1) = w[1];
            running += (t1 - t0) * (d0 + d1) / 2.0;
            raw_cum.push(running);
        }
        let total = running;
        if total <= 0.0 {
            return Err(Error::input(
                "seasonality density integrates to zero; at least one knot must be positive".to_string(),
            ));
        }
        let ts: Vec<f64> = knots.iter().map(|k| k.0).collect();
        let ds: Vec<f64> = knots.iter().map(|k| k.1 / total).collect();
        let cum: Vec<f64> = raw_cum.iter().map(|c| c / total).collect();
        debug_assert_eq!(*cum.last().unwrap(), 1.0);
        Ok(Seasonality { horizon, ts, ds, cum })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Density and cumulative at `t` in `[0, T]`.
    pub fn eval(&self, t: f64) -> Result<(f64, f64)> {
        if !t.is_finite() || t < 0.0 || t > self.horizon {
            return Err(Error::domain(format!(
                "seasonality evaluated at t={t} outside [0, {}]",
                self.horizon
            )));
        }
        if t == self.horizon {
            return Ok((*self.ds.last().unwrap(), 1.0));
        }
        // Last segment whose start is <= t.
        let seg = match self.ts.binary_search_by(|probe| probe.partial_cmp(&t).unwrap()) {
            Ok(k) => k.min(self.ts.len() - 2),
            Err(k) => k - 1,
        };
        let (t0, t1) = (self.ts[seg], self.ts[seg + 1]);
        let (d0, d1) = (self.ds[seg], self.ds[seg + 1]);
        let w = (t - t0) / (t1 - t0);
        let density = d0 + (d1 - d0) * w;
        let cumulative = self.cum[seg] + (t - t0) * (d0 + density) / 2.0;
        Ok((density, cumulative.min(1.0)))
    }

    /// Remaining seasonal mass `tau = 1 - sigma_hat(t)`.
    pub fn tau(&self, t: f64) -> Result<f64> {
        Ok(1.0 - self.eval(t)?.1)
    }

    /// True when the normalized density is constant across all knots.
    pub fn is_uniform(&self) -> bool {
        let d0 = self.ds[0];
        self.ds.iter().all(|&d| (d - d0).abs() <= 1e-12 * d0.abs().max(1e-300))
    }

    /// Normalized density knots, e.g. for serialization.
    pub fn knots(&self) -> Vec<(f64, f64)> {
        self.ts.iter().cloned().zip(self.ds.iter().cloned()).collect()
    }
}

/// Uniform time grid with exact endpoints `0` and `horizon`.
pub fn uniform_grid(horizon: f64, n_intervals: usize) -> Vec<f64> {
    let n = n_intervals.max(1);
    (0..=n)
        .map(|k| {
            if k == n {
                horizon
            } else {
                horizon * k as f64 / n as f64
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_on_unit_interval() {
        let s = Seasonality::uniform(1.0).unwrap();
        let (d, c) = s.eval(0.25).unwrap();
        assert_relative_eq!(d, 1.0, max_relative = 1e-14);
        assert_relative_eq!(c, 0.25, max_relative = 1e-14);
        assert!(s.is_uniform());
    }

    #[test]
    fn uniform_long_horizon_hits_unit_mass() {
        let s = Seasonality::uniform(77.0).unwrap();
        let (d, c) = s.eval(77.0).unwrap();
        assert_relative_eq!(d, 1.0 / 77.0, max_relative = 1e-14);
        assert_eq!(c, 1.0);
    }

    #[test]
    fn triangular_ramp() {
        let s = Seasonality::from_knots(&[(0.0, 0.0), (1.0, 2.0)]).unwrap();
        let (d, c) = s.eval(0.5).unwrap();
        assert_relative_eq!(d, 1.0, max_relative = 1e-14);
        assert_relative_eq!(c, 0.25, max_relative = 1e-14);
        assert_eq!(s.eval(1.0).unwrap().1, 1.0);
        assert!(!s.is_uniform());
    }

    #[test]
    fn unnormalized_input_is_rescaled() {
        let s = Seasonality::from_knots(&[(0.0, 5.0), (2.0, 5.0)]).unwrap();
        let (d, c) = s.eval(1.0).unwrap();
        assert_relative_eq!(d, 0.5, max_relative = 1e-14);
        assert_relative_eq!(c, 0.5, max_relative = 1e-14);
    }

    #[test]
    fn multi_segment_cumulative_is_monotone_and_normalized() {
        let s = Seasonality::from_knots(&[(0.0, 0.2), (1.0, 1.4), (3.0, 0.1), (4.0, 0.9)]).unwrap();
        let mut prev = 0.0;
        for k in 0..=400 {
            let t = 4.0 * k as f64 / 400.0;
            let (_, c) = s.eval(t).unwrap();
            assert!(c >= prev - 1e-15);
            prev = c;
        }
        assert!((s.eval(4.0).unwrap().1 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_malformed_knots() {
        assert!(Seasonality::from_knots(&[(0.0, 1.0)]).is_err());
        assert!(Seasonality::from_knots(&[(0.5, 1.0), (1.0, 1.0)]).is_err());
        assert!(Seasonality::from_knots(&[(0.0, 1.0), (0.0, 1.0)]).is_err());
        assert!(Seasonality::from_knots(&[(0.0, -1.0), (1.0, 1.0)]).is_err());
        assert!(Seasonality::from_knots(&[(0.0, 0.0), (1.0, 0.0)]).is_err());
        let s = Seasonality::uniform(1.0).unwrap();
        assert!(s.eval(-0.1).is_err());
        assert!(s.eval(1.1).is_err());
    }

    #[test]
    fn uniform_grid_endpoints_are_exact() {
        let g = uniform_grid(77.0, 400);
        assert_eq!(g.len(), 401);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[400], 77.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }
}
