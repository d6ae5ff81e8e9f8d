//! Time-indexed states of a price/inventory policy.
//!
//! All rates stored on snapshots (`demand`, `revenue`, `profit`, `rho2`) are
//! de-seasoned: the observed rate at time `t` is the stored rate times the
//! seasonality density `sigma(t)`, which the trajectory carries per grid
//! point. The flow equation in these conventions is
//! `dI/dt = (rho2 - S) * sigma`.
//!
//! Snapshot identities enforced by construction:
//! `revenue = price .* demand`, `lerner = (price - cost) ./ price`, and
//! `profit = lerner .* revenue` (the last one holds bit for bit).

use nalgebra::DVector;

use crate::error::Error;
use crate::model::ModelParams;
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct StateSnapshot {
    pub t: f64,
    pub inventory: DVector<f64>,
    pub price: DVector<f64>,
    /// De-seasoned demand rate.
    pub demand: DVector<f64>,
    /// De-seasoned revenue rate, `price .* demand`.
    pub revenue: DVector<f64>,
    /// De-seasoned profit rate, `lerner .* revenue`.
    pub profit: DVector<f64>,
    /// Lerner index `(price - cost) ./ price`.
    pub lerner: DVector<f64>,
    /// Adjoint (shadow value of the flow constraint), non-positive at optima.
    pub lambda: DVector<f64>,
    /// De-seasoned replenishment rate (a square, hence non-negative).
    pub rho2: DVector<f64>,
}

impl StateSnapshot {
    /// Assemble a snapshot from primary fields, deriving revenue, Lerner index
    /// and profit so their identities hold exactly.
    pub fn assemble(
        params: &ModelParams,
        t: f64,
        inventory: DVector<f64>,
        price: DVector<f64>,
        demand: DVector<f64>,
        lambda: DVector<f64>,
        rho2: DVector<f64>,
    ) -> Result<Self> {
        let n = params.n;
        for (name, len) in [
            ("inventory", inventory.len()),
            ("price", price.len()),
            ("demand", demand.len()),
            ("lambda", lambda.len()),
            ("rho2", rho2.len()),
        ] {
            if len != n {
                return Err(Error::Dimension {
                    what: format!("snapshot {name}"),
                    expected: format!("{n}"),
                    got: format!("{len}"),
                });
            }
        }
        for (idx, &p) in price.iter().enumerate() {
            if !(p > 0.0) {
                return Err(Error::domain(format!(
                    "snapshot price component {idx} must be positive, got {p}"
                )));
            }
        }
        for (idx, &v) in inventory.iter().enumerate() {
            if !(v >= 0.0) {
                return Err(Error::domain(format!(
                    "snapshot inventory component {idx} must be non-negative, got {v}"
                )));
            }
        }
        for (idx, &v) in rho2.iter().enumerate() {
            if !(v >= 0.0) {
                return Err(Error::domain(format!(
                    "snapshot replenishment component {idx} must be non-negative, got {v}"
                )));
            }
        }
        let revenue = price.component_mul(&demand);
        let lerner = DVector::from_fn(n, |k, _| (price[k] - params.cost[k]) / price[k]);
        let profit = lerner.component_mul(&revenue);
        Ok(StateSnapshot {
            t,
            inventory,
            price,
            demand,
            revenue,
            profit,
            lerner,
            lambda,
            rho2,
        })
    }
}

/// Which objective a trajectory is evaluated under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveMode {
    /// Revenue minus replenishment cost: integrand `<p, S> - <c, rho2>`.
    Profit,
    /// Revenue only: integrand `<p, S>`.
    Revenue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<StateSnapshot>,
    /// Seasonality density at each grid time.
    pub sigma: Vec<f64>,
    /// Cumulative seasonality at each grid time.
    pub sigma_hat: Vec<f64>,
    /// Realized objective value recorded by whoever built the trajectory.
    pub objective: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn n_items(&self) -> usize {
        self.states.first().map_or(0, |s| s.price.len())
    }

    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    pub fn horizon(&self) -> f64 {
        self.states.last().map_or(0.0, |s| s.t)
    }

    /// Remaining seasonal mass per grid point.
    pub fn tau(&self) -> Vec<f64> {
        self.sigma_hat.iter().map(|c| 1.0 - c).collect()
    }

    /// Full-trajectory contract: window structure plus a grid starting at 0.
    pub fn validate(&self) -> Result<()> {
        self.validate_window()?;
        if self.states[0].t != 0.0 {
            return Err(Error::input(format!(
                "trajectory must start at t=0, got t={}",
                self.states[0].t
            )));
        }
        Ok(())
    }

    /// Structural checks that interior windows also satisfy: at least two
    /// points, aligned seasonality arrays, uniform item count, and a strictly
    /// increasing grid (which need not start at 0).
    pub fn validate_window(&self) -> Result<()> {
        if self.states.len() < 2 {
            return Err(Error::input(format!(
                "trajectory needs at least 2 grid points, got {}",
                self.states.len()
            )));
        }
        if self.sigma.len() != self.states.len() || self.sigma_hat.len() != self.states.len() {
            return Err(Error::Dimension {
                what: "trajectory seasonality arrays".to_string(),
                expected: format!("{}", self.states.len()),
                got: format!("{} / {}", self.sigma.len(), self.sigma_hat.len()),
            });
        }
        let n = self.n_items();
        for (k, s) in self.states.iter().enumerate() {
            if s.price.len() != n {
                return Err(Error::Dimension {
                    what: format!("trajectory state {k}"),
                    expected: format!("{n}"),
                    got: format!("{}", s.price.len()),
                });
            }
            if k > 0 && s.t <= self.states[k - 1].t {
                return Err(Error::input(format!(
                    "trajectory grid not strictly increasing at index {k} (t={})",
                    s.t
                )));
            }
        }
        Ok(())
    }

    /// Clone of the window of grid points with `t` in `[t_lo, t_hi]`.
    /// The recorded objective is carried over unchanged; the window is meant
    /// for evaluating pointwise diagnostics away from the endpoints.
    pub fn window(&self, t_lo: f64, t_hi: f64) -> Trajectory {
        let mut states = Vec::new();
        let mut sigma = Vec::new();
        let mut sigma_hat = Vec::new();
        for (k, s) in self.states.iter().enumerate() {
            if s.t >= t_lo && s.t <= t_hi {
                states.push(s.clone());
                sigma.push(self.sigma[k]);
                sigma_hat.push(self.sigma_hat[k]);
            }
        }
        Trajectory {
            states,
            sigma,
            sigma_hat,
            objective: self.objective,
        }
    }

    /// Interior window dropping leading and trailing fractions of the horizon.
    pub fn interior(&self, drop_head_frac: f64, drop_tail_frac: f64) -> Trajectory {
        let horizon = self.horizon();
        self.window(drop_head_frac * horizon, (1.0 - drop_tail_frac) * horizon)
    }
}

/// Trapezoidal quadrature of the chosen objective integrand against
/// `sigma dt` over the trajectory grid.
pub fn objective(params: &ModelParams, traj: &Trajectory, mode: ObjectiveMode) -> Result<f64> {
    traj.validate()?;
    if traj.n_items() != params.n {
        return Err(Error::Dimension {
            what: "trajectory item count".to_string(),
            expected: format!("{}", params.n),
            got: format!("{}", traj.n_items()),
        });
    }
    let integrand: Vec<f64> = traj
        .states
        .iter()
        .zip(traj.sigma.iter())
        .map(|(s, &sig)| {
            let revenue: f64 = s.revenue.sum();
            let value = match mode {
                ObjectiveMode::Revenue => revenue,
                ObjectiveMode::Profit => revenue - params.cost.dot(&s.rho2),
            };
            value * sig
        })
        .collect();
    let mut total = 0.0;
    for k in 0..traj.states.len() - 1 {
        let dt = traj.states[k + 1].t - traj.states[k].t;
        total += dt * (integrand[k] + integrand[k + 1]) / 2.0;
    }
    Ok(total)
}

/// Derivative of a sampled vector series by local quadratic fit: central
/// three-point stencils inside, one-sided second-order stencils at the ends.
/// Handles non-uniform grids.
pub(crate) fn differentiate_series(ts: &[f64], values: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let m = ts.len();
    assert_eq!(m, values.len());
    assert!(m >= 3, "need at least 3 points to differentiate");
    let deriv_at = |x: f64, ia: usize, ib: usize, ic: usize| -> DVector<f64> {
        let (a, b, c) = (ts[ia], ts[ib], ts[ic]);
        let wa = (2.0 * x - b - c) / ((a - b) * (a - c));
        let wb = (2.0 * x - a - c) / ((b - a) * (b - c));
        let wc = (2.0 * x - a - b) / ((c - a) * (c - b));
        &values[ia] * wa + &values[ib] * wb + &values[ic] * wc
    };
    (0..m)
        .map(|k| {
            if k == 0 {
                deriv_at(ts[0], 0, 1, 2)
            } else if k == m - 1 {
                deriv_at(ts[m - 1], m - 3, m - 2, m - 1)
            } else {
                deriv_at(ts[k], k - 1, k, k + 1)
            }
        })
        .collect()
}

/// Residual of the inventory flow `dI/dt + S*sigma - rho2*sigma` per grid
/// point, with `dI/dt` from the same three-point stencils as
/// [`differentiate_series`]. Small residuals certify that stored rates and
/// stored inventories are mutually consistent up to discretization error.
pub fn flow_residual(traj: &Trajectory) -> Result<Vec<DVector<f64>>> {
    traj.validate()?;
    if traj.len() < 3 {
        return Err(Error::input(
            "flow residual needs at least 3 grid points".to_string(),
        ));
    }
    let ts = traj.times();
    let inventories: Vec<DVector<f64>> = traj.states.iter().map(|s| s.inventory.clone()).collect();
    let didt = differentiate_series(&ts, &inventories);
    Ok(traj
        .states
        .iter()
        .zip(didt)
        .zip(traj.sigma.iter())
        .map(|((s, didt_k), &sig)| didt_k + (&s.demand - &s.rho2) * sig)
        .collect())
}
