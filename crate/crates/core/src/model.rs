//! Demand model: items, cross-elasticities, inventory effects.
//!
//! Both supported demand kinds share the log-linear skeleton
//! `log S = log S0 + alpha * log I + gamma * f(p)` where `f` is `log p` for
//! the constant-elasticity kind and the identity for the exponential kind.
//! `S` is a de-seasoned rate: the observed sales rate at time `t` is
//! `S(I, p) * sigma(t)` with `sigma` the normalized seasonality density.
//!
//! Conventions:
//! * the effective elasticity matrix is `diag(S)^-1 (dS/dp) diag(p)`: equal to
//!   `gamma` for constant elasticity and `gamma * diag(p)` for exponential;
//! * the inventory-effect matrix `diag(S)^-1 (dS/dI) diag(I)` equals `alpha`
//!   for both kinds;
//! * evaluation near stock-out clamps inventory from below at a caller-chosen
//!   floor (see [`inventory_floor`]); the clamp applies only inside evaluation
//!   and is never written back to stored state.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Functional form of the price dependence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemandKind {
    ConstantElasticity,
    Exponential,
}

/// Relative inventory floor: evaluation clamps `I` at `1e-9 * max(I0)`.
pub const INVENTORY_FLOOR_REL: f64 = 1e-9;

/// Evaluation floor for inventories, derived from the initial stock scale.
pub fn inventory_floor(i0_max: f64) -> f64 {
    INVENTORY_FLOOR_REL * i0_max
}

/// Parameters of an `n`-item demand model.
///
/// `gamma` is the (cross-)price matrix, `alpha` the (cross-)inventory-effect
/// matrix, `s0` the base demand scale, `cost` the unit costs.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub n: usize,
    pub kind: DemandKind,
    pub s0: DVector<f64>,
    pub gamma: DMatrix<f64>,
    pub alpha: DMatrix<f64>,
    pub cost: DVector<f64>,
}

impl ModelParams {
    pub fn new(
        kind: DemandKind,
        s0: DVector<f64>,
        gamma: DMatrix<f64>,
        alpha: DMatrix<f64>,
        cost: DVector<f64>,
    ) -> Result<Self> {
        let params = ModelParams {
            n: s0.len(),
            kind,
            s0,
            gamma,
            alpha,
            cost,
        };
        params.validate()?;
        Ok(params)
    }

    /// One-item constructor used heavily in tests and the one-item solvers.
    pub fn one_item(kind: DemandKind, s0: f64, gamma: f64, alpha: f64, cost: f64) -> Result<Self> {
        Self::new(
            kind,
            DVector::from_vec(vec![s0]),
            DMatrix::from_row_slice(1, 1, &[gamma]),
            DMatrix::from_row_slice(1, 1, &[alpha]),
            DVector::from_vec(vec![cost]),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::input("model must have at least one item"));
        }
        let dims: [(&str, usize); 2] = [("S0", self.s0.len()), ("c", self.cost.len())];
        for (name, len) in dims {
            if len != self.n {
                return Err(Error::Dimension {
                    what: name.to_string(),
                    expected: format!("{}", self.n),
                    got: format!("{len}"),
                });
            }
        }
        for (name, m) in [("gamma", &self.gamma), ("alpha", &self.alpha)] {
            if m.nrows() != self.n || m.ncols() != self.n {
                return Err(Error::Dimension {
                    what: name.to_string(),
                    expected: format!("{0}x{0}", self.n),
                    got: format!("{}x{}", m.nrows(), m.ncols()),
                });
            }
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::input(format!("{name} contains a non-finite entry")));
            }
        }
        for (idx, &v) in self.s0.iter().enumerate() {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::input(format!(
                    "S0 component {idx} must be finite and positive, got {v}"
                )));
            }
        }
        for (idx, &v) in self.cost.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::input(format!(
                    "c component {idx} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }

    fn check_lengths(&self, i: &DVector<f64>, p: &DVector<f64>) -> Result<()> {
        if i.len() != self.n {
            return Err(Error::Dimension {
                what: "inventory vector".to_string(),
                expected: format!("{}", self.n),
                got: format!("{}", i.len()),
            });
        }
        if p.len() != self.n {
            return Err(Error::Dimension {
                what: "price vector".to_string(),
                expected: format!("{}", self.n),
                got: format!("{}", p.len()),
            });
        }
        Ok(())
    }

    fn check_prices(&self, p: &DVector<f64>) -> Result<()> {
        for (idx, &v) in p.iter().enumerate() {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::domain(format!(
                    "price component {idx} must be finite and positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// De-seasoned demand rate at inventory `i` and price `p` (both strictly
    /// positive). See [`ModelParams::demand_floored`] for stock-out handling.
    pub fn demand(&self, i: &DVector<f64>, p: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_lengths(i, p)?;
        self.check_prices(p)?;
        for (idx, &v) in i.iter().enumerate() {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::domain(format!(
                    "inventory component {idx} must be finite and positive, got {v}"
                )));
            }
        }
        Ok(self.demand_unchecked(i, p))
    }

    /// Demand with inventory clamped from below at `floor` (> 0). Negative or
    /// zero stock therefore evaluates as a positive near-zero stock; the input
    /// vector itself is not modified.
    pub fn demand_floored(&self, i: &DVector<f64>, p: &DVector<f64>, floor: f64) -> Result<DVector<f64>> {
        self.check_lengths(i, p)?;
        self.check_prices(p)?;
        if !(floor > 0.0) {
            return Err(Error::domain(format!("inventory floor must be positive, got {floor}")));
        }
        let i_eff = i.map(|x| x.max(floor));
        Ok(self.demand_unchecked(&i_eff, p))
    }

    fn demand_unchecked(&self, i: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        let log_i = i.map(f64::ln);
        let price_term = match self.kind {
            DemandKind::ConstantElasticity => &self.gamma * p.map(f64::ln),
            DemandKind::Exponential => &self.gamma * p,
        };
        let log_s = self.s0.map(f64::ln) + &self.alpha * log_i + price_term;
        log_s.map(f64::exp)
    }

    /// Effective elasticity matrix `diag(S)^-1 (dS/dp) diag(p)` at price `p`.
    pub fn elasticity_matrix(&self, p: &DVector<f64>) -> Result<DMatrix<f64>> {
        if p.len() != self.n {
            return Err(Error::Dimension {
                what: "price vector".to_string(),
                expected: format!("{}", self.n),
                got: format!("{}", p.len()),
            });
        }
        self.check_prices(p)?;
        Ok(match self.kind {
            DemandKind::ConstantElasticity => self.gamma.clone(),
            DemandKind::Exponential => {
                let mut g = self.gamma.clone();
                for j in 0..self.n {
                    for r in 0..self.n {
                        g[(r, j)] *= p[j];
                    }
                }
                g
            }
        })
    }

    /// Inventory-effect matrix `diag(S)^-1 (dS/dI) diag(I)`; constant for both
    /// demand kinds.
    pub fn inventory_effect_matrix(&self) -> DMatrix<f64> {
        self.alpha.clone()
    }

    /// Demand transference coefficient: the stock-out limit of the inventory
    /// effect of item `j` on item `i`, which for these log-linear models is the
    /// constant `alpha[(i, j)]`.
    pub fn demand_transference(&self, i: usize, j: usize) -> Result<f64> {
        if i >= self.n || j >= self.n {
            return Err(Error::input(format!(
                "transference index ({i}, {j}) out of range for {} items",
                self.n
            )));
        }
        Ok(self.alpha[(i, j)])
    }

    /// Demand and its Jacobians with respect to price and inventory.
    pub fn demand_jacobians(&self, i: &DVector<f64>, p: &DVector<f64>) -> Result<DemandJacobians> {
        let s = self.demand(i, p)?;
        let gamma_eff = self.elasticity_matrix(p)?;
        let mut wrt_price = gamma_eff;
        let mut wrt_inventory = self.alpha.clone();
        for r in 0..self.n {
            for c in 0..self.n {
                wrt_price[(r, c)] *= s[r] / p[c];
                wrt_inventory[(r, c)] *= s[r] / i[c];
            }
        }
        Ok(DemandJacobians {
            demand: s,
            wrt_price,
            wrt_inventory,
        })
    }

}

/// Demand value and Jacobians at a state.
#[derive(Debug, Clone)]
pub struct DemandJacobians {
    pub demand: DVector<f64>,
    /// `dS/dp`, an `n x n` matrix.
    pub wrt_price: DMatrix<f64>,
    /// `dS/dI`, an `n x n` matrix.
    pub wrt_inventory: DMatrix<f64>,
}
