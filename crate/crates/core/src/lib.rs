//! Optimal price/inventory trajectories for multi-item retail demand models.
//!
//! The library covers two control regimes over a finite season `[0, T]`:
//!
//! * **markdown** (`md`): a fixed initial stock is sold down to zero with no
//!   replenishment, choosing the price path that maximizes revenue;
//! * **continuous replenishment** (`cr`): stock is replenished at unit cost and
//!   the price/replenishment pair maximizes profit, returning inventory to its
//!   starting level at the end of the season.
//!
//! Demand couples items through a cross-elasticity matrix (`gamma`) and a
//! cross-inventory-effect matrix (`alpha`); seasonality enters as a normalized
//! density so that all rates carried on trajectories are de-seasoned.
//!
//! Three layers check each other:
//!
//! * [`closedform`] builds exact optimal trajectories where the model admits
//!   them (power-law markdown paths, stationary replenishment equilibria);
//! * [`varsolve`] solves the same problems by direct numerical ascent with no
//!   knowledge of the closed forms;
//! * [`optimality`] turns the first-order conditions and conservation laws into
//!   numerical residuals that either trajectory source must satisfy.
//!
//! The `pricepath` binary wires these together behind `solve`, `verify`,
//! `check-model`, and `reproduce-example` subcommands.

pub mod cli;
pub mod closedform;
pub mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod optimality;
pub mod seasonality;
pub mod trajectory;
pub mod varsolve;

pub use error::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
