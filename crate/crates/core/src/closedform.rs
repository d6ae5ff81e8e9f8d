//! Closed-form optimal trajectories.
//!
//! Two families admit exact solutions for constant-elasticity demand:
//!
//! * the stationary replenishment equilibrium: constant price, constant
//!   inventory, replenishment exactly covering sales ([`cr_one_item`],
//!   [`cr_multi`]);
//! * the power-law markdown: `p = p0 tau^mu`, `I = I0 tau^a` with
//!   `tau = 1 - sigma_hat(t)` and `a + mu = 1` componentwise
//!   ([`md_one_item`], [`md_multi`]).
//!
//! Both constructions report the residuals of every identity they rely on so
//! that the independent checks in [`crate::optimality`] and the numerical
//! solver in [`crate::varsolve`] can be cross-referenced against them.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::linalg::{min_norm_solve, null_vector_1d, rank, real_eigenvalues, solve_checked};
use crate::model::{DemandKind, ModelParams};
use crate::seasonality::{uniform_grid, Seasonality};
use crate::trajectory::{objective, ObjectiveMode, StateSnapshot, Trajectory};
use crate::Result;

/// Trajectory grids stop at this value of `tau` instead of 0 so the power-law
/// forms stay finite; the terminal snapshot still records zero inventory.
pub const TAU_FLOOR: f64 = 1e-9;

/// Power-law markdown solution.
///
/// Depending on the boundary closure, rates are either per unit of the
/// normalized seasonal measure (`plain_time = false`) or per unit of plain
/// time with no seasonality (`plain_time = true`); see [`md_multi`].
#[derive(Debug, Clone)]
pub struct ClosedFormMD {
    /// Price decay exponents, each in `(0,1)` (the one-item `alpha = 0` limit
    /// allows `mu = 0`).
    pub mu: DVector<f64>,
    /// Inventory decay exponents, `a = 1 - mu`.
    pub a: DVector<f64>,
    /// `theta = a / mu` componentwise (`+inf` in the one-item `alpha = 0` limit).
    pub theta: DVector<f64>,
    pub p0: DVector<f64>,
    pub i0: DVector<f64>,
    /// Constant per-item revenue rates `p0 .* I0 .* a` (divided by the horizon
    /// when `plain_time`).
    pub revenue_rate: DVector<f64>,
    /// Adjoint proportionality: `lambda(t) = adjoint_coeff .* p(t)`, each
    /// component non-positive.
    pub adjoint_coeff: DVector<f64>,
    pub horizon: f64,
    /// Scale pairing `revenue_rate` with the revenue direction `-G^T V`.
    pub r_scale: f64,
    /// True when the boundary closure ran in plain time (uniform unit density,
    /// horizon solved rather than given).
    pub plain_time: bool,
    /// Sup-norm residual of the exponent system `alpha a + (1 + Gamma) mu = mu + Gamma mu + alpha a`
    /// recombined as `alpha a + Gamma mu + mu = 0`.
    pub residual_exponents: f64,
    /// Relative sup-norm residual of the revenue identity
    /// `(diag(theta) alpha^T + 1) (Gamma^T)^-1 R = -R`.
    pub residual_revenue: f64,
}

/// Stationary replenishment equilibrium: constant price and inventory with
/// `rho^2 = S` and `lambda = -c`.
#[derive(Debug, Clone)]
pub struct CREquilibrium {
    pub price: DVector<f64>,
    pub inventory: DVector<f64>,
    /// Per-item profit rates `(p - c) .* S`; lies in the null space of the
    /// inventory-effect transpose.
    pub profit_rate: DVector<f64>,
    /// Per-item revenue rates `p .* S = -Gamma^T profit_rate`.
    pub revenue_rate: DVector<f64>,
    /// Lerner indices `(p - c) ./ p`, each in `(0,1)`.
    pub lerner: DVector<f64>,
    /// Magnitude of the revenue rates along the revenue direction.
    pub r_scale: f64,
    /// Relative deviation between model demand at `(I, p)` and `R ./ p`.
    pub residual_demand: f64,
}

/// Markdown boundary data accepted by [`md_multi`].
#[derive(Debug, Clone)]
pub enum MdBoundary {
    /// Full initial inventory vector.
    InitialInventory(DVector<f64>),
    /// Geometric mean of the initial inventory; the direction is solved from
    /// the model (requires an explicit seasonality).
    Magnitude { geomean: f64 },
}

/// Stationary replenishment price for one item: `p = gamma c / (gamma + 1)`.
pub fn cr_one_item(gamma: f64, cost: f64) -> Result<f64> {
    if !(gamma < -1.0) {
        return Err(Error::hypothesis(format!(
            "a stationary replenishment optimum needs own-price elasticity < -1 \
             (markup factor gamma/(gamma+1) > 1), got gamma = {gamma}"
        )));
    }
    if !(cost > 0.0 && cost.is_finite()) {
        return Err(Error::domain(format!(
            "stationary replenishment needs a positive finite unit cost, got {cost}"
        )));
    }
    Ok(gamma * cost / (gamma + 1.0))
}

/// Stationary replenishment equilibrium for `n` items.
///
/// Requires constant-elasticity demand, `rank(alpha) = n - 1`, a strictly
/// one-signed null vector of `alpha^T` (the profit direction), and Lerner
/// indices in `(0,1)`. `i_scale` fixes the geometric mean of the inventory,
/// which the stationarity conditions leave free along the null direction of
/// `alpha`.
pub fn cr_multi(params: &ModelParams, i_scale: f64) -> Result<CREquilibrium> {
    if params.kind != DemandKind::ConstantElasticity {
        return Err(Error::hypothesis(
            "the stationary replenishment closed form requires constant-elasticity demand",
        ));
    }
    if !(i_scale > 0.0 && i_scale.is_finite()) {
        return Err(Error::domain(format!(
            "inventory scale must be positive and finite, got {i_scale}"
        )));
    }
    for (idx, &c) in params.cost.iter().enumerate() {
        if !(c > 0.0) {
            return Err(Error::hypothesis(format!(
                "stationary replenishment needs positive unit costs; component {} is {c}",
                idx + 1
            )));
        }
    }
    let n = params.n;
    let rk = rank(&params.alpha);
    if rk + 1 != n {
        return Err(Error::hypothesis(format!(
            "the inventory-effect matrix must have rank n-1 = {} so that a profit direction \
             exists; got rank {rk}",
            n - 1
        )));
    }
    let mut p_dir = null_vector_1d(&params.alpha.transpose(), "profit direction")?;
    if p_dir.sum() < 0.0 {
        p_dir.neg_mut();
    }
    if p_dir.iter().any(|&x| x <= 0.0) {
        return Err(Error::hypothesis(
            "the profit direction (null vector of the inventory-effect transpose) is not \
             strictly one-signed; no positive stationary profit vector exists",
        ));
    }
    let r_dir = -params.gamma.transpose() * &p_dir;
    for (idx, &x) in r_dir.iter().enumerate() {
        if !(x > 0.0) {
            return Err(Error::hypothesis(format!(
                "revenue direction component {} is {x}; the price matrix does not map the \
                 profit direction to positive revenue",
                idx + 1
            )));
        }
    }
    let lerner = p_dir.component_div(&r_dir);
    for (idx, &l) in lerner.iter().enumerate() {
        if !(l > 0.0 && l < 1.0) {
            return Err(Error::hypothesis(format!(
                "stationary Lerner index for item {} is {l:.6}, outside (0,1); \
                 the price matrix is not negative enough on the revenue direction",
                idx + 1
            )));
        }
    }
    let ones = DVector::from_element(n, 1.0);
    let price = DVector::from_fn(n, |i, _| params.cost[i] / (1.0 - lerner[i]));

    // Revenue scale: the demand consistency conditions read
    // alpha log I = b0 + (log r) 1_n with b0 = log R_dir - (1+Gamma) log p - log S0,
    // solvable iff the right side lies in range(alpha), i.e. is orthogonal to
    // the profit direction.
    let p_dot_ones = p_dir.dot(&ones);
    if p_dot_ones.abs() <= 1e-10 * (n as f64).sqrt() {
        return Err(Error::hypothesis(
            "the ones vector lies in the range of the inventory-effect matrix; \
             the revenue scale is undetermined",
        ));
    }
    let log_p = price.map(f64::ln);
    let eye = DMatrix::<f64>::identity(n, n);
    let b0 = r_dir.map(f64::ln) - (&eye + &params.gamma) * &log_p - params.s0.map(f64::ln);
    let log_r = -p_dir.dot(&b0) / p_dot_ones;
    let rhs = &b0 + &ones * log_r;
    let y0 = min_norm_solve(&params.alpha, &rhs, "inventory solve")?;
    let proj_res = (&params.alpha * &y0 - &rhs).amax();
    if proj_res > 1e-8 * rhs.amax().max(1.0) {
        return Err(Error::Singular {
            context: "inventory solve".to_string(),
            detail: format!("projected system left residual {proj_res:.3e}"),
        });
    }
    // Shift along null(alpha) to hit the requested geometric mean.
    let w = null_vector_1d(&params.alpha, "inventory null direction")?;
    let w_mean = w.mean();
    let mut y = y0;
    if w_mean.abs() > 1e-12 {
        let s = (i_scale.ln() - y.mean()) / w_mean;
        y += w * s;
    }
    let inventory = y.map(f64::exp);

    let r_scale = log_r.exp();
    let revenue_rate = &r_dir * r_scale;
    let demand_expected = revenue_rate.component_div(&price);
    let demand_model = params.demand(&inventory, &price)?;
    let residual_demand = (&demand_model - &demand_expected)
        .component_div(&demand_expected)
        .amax();
    if residual_demand > 1e-8 {
        return Err(Error::Singular {
            context: "stationary equilibrium".to_string(),
            detail: format!(
                "model demand deviates from the stationary revenue by {residual_demand:.3e} relative"
            ),
        });
    }
    Ok(CREquilibrium {
        price,
        inventory,
        profit_rate: &p_dir * r_scale,
        revenue_rate,
        lerner,
        r_scale,
        residual_demand,
    })
}

/// Emit the constant equilibrium as a trajectory over a seasonality horizon,
/// with `lambda = -c` and `rho^2 = S` at every grid point.
pub fn cr_trajectory(
    params: &ModelParams,
    eq: &CREquilibrium,
    seasonality: &Seasonality,
    n_points: usize,
) -> Result<Trajectory> {
    if n_points < 2 {
        return Err(Error::input(format!(
            "a trajectory needs at least 2 grid points, got {n_points}"
        )));
    }
    let demand = eq.revenue_rate.component_div(&eq.price);
    let lambda = -&params.cost;
    let ts = uniform_grid(seasonality.horizon(), n_points - 1);
    let mut states = Vec::with_capacity(n_points);
    let mut sigma = Vec::with_capacity(n_points);
    let mut sigma_hat = Vec::with_capacity(n_points);
    for &t in &ts {
        let (dens, cum) = seasonality.eval(t)?;
        sigma.push(dens);
        sigma_hat.push(cum);
        states.push(StateSnapshot::assemble(
            params,
            t,
            eq.inventory.clone(),
            eq.price.clone(),
            demand.clone(),
            lambda.clone(),
            demand.clone(),
        )?);
    }
    let mut traj = Trajectory {
        states,
        sigma,
        sigma_hat,
        objective: 0.0,
    };
    traj.objective = objective(params, &traj, ObjectiveMode::Profit)?;
    Ok(traj)
}

/// One-item markdown closed form for constant-elasticity demand with zero
/// marginal cost (the stock is sunk).
///
/// `theta = -(gamma+1)/alpha`, `p = p0 tau^{1/(1+theta)}`,
/// `I = I0 tau^{theta/(1+theta)}`; `alpha = 0` is the `theta -> inf` limit
/// (constant price, linear drawdown). `p0` matches demand to the drawdown at
/// `tau = 1`: `S0 I0^alpha p0^gamma = I0 a`.
pub fn md_one_item(
    gamma: f64,
    alpha: f64,
    i0: f64,
    s0: f64,
    seasonality: &Seasonality,
    n_points: usize,
) -> Result<(ClosedFormMD, Trajectory)> {
    let params = ModelParams::one_item(DemandKind::ConstantElasticity, s0, gamma, alpha, 0.0)?;
    md_one_item_with(&params, i0, seasonality, n_points)
}

fn md_one_item_with(
    params: &ModelParams,
    i0: f64,
    seasonality: &Seasonality,
    n_points: usize,
) -> Result<(ClosedFormMD, Trajectory)> {
    let gamma = params.gamma[(0, 0)];
    let alpha = params.alpha[(0, 0)];
    let s0 = params.s0[0];
    if !(gamma < -1.0) {
        return Err(Error::hypothesis(format!(
            "markdown pricing needs own-price elasticity < -1, got gamma = {gamma}"
        )));
    }
    if alpha < 0.0 {
        return Err(Error::hypothesis(format!(
            "markdown pricing needs a non-negative inventory effect, got alpha = {alpha}"
        )));
    }
    if !(i0 > 0.0 && i0.is_finite()) {
        return Err(Error::domain(format!(
            "initial inventory must be positive and finite, got {i0}"
        )));
    }
    let (theta, mu, a) = if alpha > 0.0 {
        let theta = -(gamma + 1.0) / alpha;
        (theta, 1.0 / (1.0 + theta), theta / (1.0 + theta))
    } else {
        (f64::INFINITY, 0.0, 1.0)
    };
    let p0 = (i0.powf(1.0 - alpha) * a / s0).powf(1.0 / gamma);
    let revenue = p0 * a * i0;
    let c_coeff = -(1.0 + 1.0 / gamma);
    let residual_exponents = if alpha > 0.0 {
        (alpha * a + gamma * mu + mu).abs()
    } else {
        0.0
    };
    let cf = ClosedFormMD {
        mu: DVector::from_vec(vec![mu]),
        a: DVector::from_vec(vec![a]),
        theta: DVector::from_vec(vec![theta]),
        p0: DVector::from_vec(vec![p0]),
        i0: DVector::from_vec(vec![i0]),
        revenue_rate: DVector::from_vec(vec![revenue]),
        adjoint_coeff: DVector::from_vec(vec![c_coeff]),
        horizon: seasonality.horizon(),
        r_scale: revenue,
        plain_time: false,
        residual_exponents,
        residual_revenue: 0.0,
    };
    let traj = emit_markdown_trajectory(params, &cf, Some(seasonality), n_points)?;
    Ok((cf, traj))
}

/// Multivariate power-law markdown.
///
/// The exponents solve `(alpha - Gamma - 1) mu = alpha 1_n` and must land in
/// `(0,1)`. The revenue direction is `-Gamma^T (delta mu)` where `delta` is a
/// positive diagonal similarity with `delta Gamma delta^-1 = Gamma^T`
/// (identity for symmetric `Gamma`; for a 2x2 matrix with same-signed cross
/// terms, `delta = diag(1, g12/g21)`).
///
/// Boundary closures:
/// * `InitialInventory` with `seasonality = None` (n = 2 only): plain time,
///   solves initial prices, the revenue scale, and the horizon, as in a
///   season-free markdown whose length is itself optimal.
/// * `Magnitude` with an explicit seasonality (any n): the horizon comes from
///   the seasonality, the inventory direction is solved from the model, and
///   the geometric mean of `I0` is pinned to the given magnitude.
pub fn md_multi(
    params: &ModelParams,
    boundary: &MdBoundary,
    seasonality: Option<&Seasonality>,
    n_points: usize,
) -> Result<(ClosedFormMD, Trajectory)> {
    if params.kind != DemandKind::ConstantElasticity {
        return Err(Error::hypothesis(
            "the power-law markdown closed form requires constant-elasticity demand",
        ));
    }
    let n = params.n;
    if n == 1 {
        let seas = seasonality.ok_or_else(|| {
            Error::input(
                "a one-item markdown horizon is undetermined without seasonality; supply one",
            )
        })?;
        let i0 = match boundary {
            MdBoundary::InitialInventory(v) => {
                if v.len() != 1 {
                    return Err(Error::Dimension {
                        what: "initial inventory".to_string(),
                        expected: "1".to_string(),
                        got: format!("{}", v.len()),
                    });
                }
                v[0]
            }
            MdBoundary::Magnitude { geomean } => *geomean,
        };
        return md_one_item_with(params, i0, seas, n_points);
    }

    // The closed form needs a diagonal inventory-effect matrix with strictly
    // positive diagonal.
    for i in 0..n {
        for j in 0..n {
            if i != j && params.alpha[(i, j)] != 0.0 {
                return Err(Error::hypothesis(format!(
                    "the multivariate markdown closed form needs a diagonal inventory-effect \
                     matrix; alpha[{}][{}] = {}",
                    i + 1,
                    j + 1,
                    params.alpha[(i, j)]
                )));
            }
        }
        if !(params.alpha[(i, i)] > 0.0) {
            return Err(Error::hypothesis(format!(
                "the multivariate markdown closed form needs strictly positive diagonal \
                 inventory effects; alpha[{k}][{k}] = {}",
                params.alpha[(i, i)],
                k = i + 1
            )));
        }
    }

    let eye = DMatrix::<f64>::identity(n, n);
    let ones = DVector::from_element(n, 1.0);

    // Exponents: (alpha - Gamma - 1) mu = alpha 1_n, then a = 1 - mu.
    let m = &params.alpha - &params.gamma - &eye;
    let mu = solve_checked(&m, &(&params.alpha * &ones), "markdown exponent system")?;
    for (idx, &x) in mu.iter().enumerate() {
        if !(x > 0.0 && x < 1.0) {
            return Err(Error::hypothesis(format!(
                "markdown ansatz exponent mu[{}] = {x:.6} outside (0,1); no interior \
                 power-law markdown exists for this model",
                idx + 1
            )));
        }
    }
    let a = &ones - &mu;
    let theta = a.component_div(&mu);
    let residual_exponents = (&params.alpha * &a + &params.gamma * &mu + &mu).amax();
    if residual_exponents > 1e-10 * mu.amax().max(1.0) {
        return Err(Error::Singular {
            context: "markdown exponent system".to_string(),
            detail: format!("solution residual {residual_exponents:.3e}"),
        });
    }

    // Revenue direction via the transpose similarity delta Gamma delta^-1 = Gamma^T.
    let gamma_scale = params.gamma.amax();
    let asym = (&params.gamma - &params.gamma.transpose()).amax();
    let delta = if asym <= 1e-12 * gamma_scale {
        DVector::from_element(n, 1.0)
    } else if n == 2 && params.gamma[(0, 1)] * params.gamma[(1, 0)] > 0.0 {
        // delta Gamma = Gamma^T delta forces delta_1/delta_2 = g21/g12; a
        // square-root scaling would merely symmetrize Gamma and break the
        // revenue identity checked below.
        DVector::from_vec(vec![1.0, params.gamma[(0, 1)] / params.gamma[(1, 0)]])
    } else {
        return Err(Error::hypothesis(
            "the revenue direction needs Gamma symmetric, or 2x2 with same-signed \
             cross-price terms; neither holds",
        ));
    };
    let sim_res = (DMatrix::from_diagonal(&delta) * &params.gamma
        - params.gamma.transpose() * DMatrix::from_diagonal(&delta))
    .amax();
    if sim_res > 1e-10 * gamma_scale {
        return Err(Error::Singular {
            context: "transpose similarity".to_string(),
            detail: format!("delta Gamma - Gamma^T delta has residual {sim_res:.3e}"),
        });
    }
    let v = delta.component_mul(&mu);
    let r_dir = -params.gamma.transpose() * &v;
    for (idx, &x) in r_dir.iter().enumerate() {
        if !(x > 0.0) {
            return Err(Error::hypothesis(format!(
                "markdown revenue direction component {} is {x:.6}; must be positive",
                idx + 1
            )));
        }
    }
    // Revenue identity: (diag(theta) alpha^T + 1)(Gamma^T)^-1 R = -R.
    let z = solve_checked(&params.gamma.transpose(), &r_dir, "revenue identity")?;
    let rev_res = (theta.component_mul(&(params.alpha.transpose() * &z)) + &z + &r_dir).amax();
    let residual_revenue = rev_res / r_dir.amax();
    if residual_revenue > 1e-10 {
        return Err(Error::Singular {
            context: "revenue identity".to_string(),
            detail: format!("residual {residual_revenue:.3e} relative"),
        });
    }
    // Adjoint proportionality lambda = C p; C = -1 - (Gamma^T)^-1 R ./ R <= 0.
    let c_coeff = DVector::from_fn(n, |i, _| -1.0 - z[i] / r_dir[i]);
    for (idx, &c) in c_coeff.iter().enumerate() {
        if c > 1e-10 {
            return Err(Error::hypothesis(format!(
                "adjoint sign violation: lambda = C .* p needs C <= 0, but C[{}] = {c:.6}; \
                 the price matrix is not negative enough on the markdown revenue direction",
                idx + 1
            )));
        }
    }

    let log_s0 = params.s0.map(f64::ln);
    let log_a = a.map(f64::ln);
    let log_r_dir = r_dir.map(f64::ln);

    let (p0, i0, r_scale, horizon, plain_time) = match (boundary, seasonality) {
        (MdBoundary::InitialInventory(i0), None) => {
            if n != 2 {
                return Err(Error::input(format!(
                    "solving the markdown horizon from given initial inventories is a square \
                     system only for 2 items; got {n}. Supply a seasonality and the inventory \
                     magnitude instead"
                )));
            }
            for (idx, &x) in i0.iter().enumerate() {
                if !(x > 0.0 && x.is_finite()) {
                    return Err(Error::domain(format!(
                        "initial inventory component {} must be positive and finite, got {x}",
                        idx + 1
                    )));
                }
            }
            // Unknowns u = log r, v = log T. Demand consistency at tau = 1 and
            // the revenue definition R = p0 I0 a / T reduce to a 2x2 linear
            // system in (u, v) after eliminating log p0 = (u+v) 1 + d.
            let log_i0 = i0.map(f64::ln);
            let d = &log_r_dir - (log_i0.clone() + log_a.clone());
            let q = &log_r_dir - &log_s0 - &params.alpha * &log_i0 - (&eye + &params.gamma) * &d;
            let col_u = &params.gamma * &ones;
            let col_v = (&eye + &params.gamma) * &ones;
            let mut sys = DMatrix::<f64>::zeros(2, 2);
            sys.set_column(0, &col_u);
            sys.set_column(1, &col_v);
            let uv = solve_checked(&sys, &q, "markdown horizon closure")?;
            let (u, vv) = (uv[0], uv[1]);
            let horizon = vv.exp();
            if !horizon.is_finite() || horizon <= 0.0 {
                return Err(Error::Singular {
                    context: "markdown horizon closure".to_string(),
                    detail: format!("solved log-horizon {vv:.3e} leaves no representable horizon"),
                });
            }
            let p0 = d.map(|x| (x + u + vv).exp());
            (p0, i0.clone(), u.exp(), horizon, true)
        }
        (MdBoundary::Magnitude { geomean }, Some(seas)) => {
            if !(*geomean > 0.0 && geomean.is_finite()) {
                return Err(Error::domain(format!(
                    "inventory magnitude must be positive and finite, got {geomean}"
                )));
            }
            // Unknowns y = log I0 (n) and u = log r. Demand consistency gives
            // (1 + Gamma - alpha) y - u Gamma 1 = log S0 + Gamma log R_dir - (1+Gamma) log a,
            // and the magnitude row pins mean(y) = log geomean.
            let mut sys = DMatrix::<f64>::zeros(n + 1, n + 1);
            let block = &eye + &params.gamma - &params.alpha;
            sys.view_mut((0, 0), (n, n)).copy_from(&block);
            let col_u = -(&params.gamma * &ones);
            for i in 0..n {
                sys[(i, n)] = col_u[i];
                sys[(n, i)] = 1.0 / n as f64;
            }
            let mut rhs = DVector::<f64>::zeros(n + 1);
            let top = &log_s0 + &params.gamma * &log_r_dir - (&eye + &params.gamma) * &log_a;
            for i in 0..n {
                rhs[i] = top[i];
            }
            rhs[n] = geomean.ln();
            let sol = solve_checked(&sys, &rhs, "markdown inventory closure")?;
            let y = DVector::from_fn(n, |i, _| sol[i]);
            let u = sol[n];
            let i0 = y.map(f64::exp);
            let p0 = DVector::from_fn(n, |i, _| (u + log_r_dir[i] - y[i] - log_a[i]).exp());
            (p0, i0, u.exp(), seas.horizon(), false)
        }
        (MdBoundary::InitialInventory(_), Some(_)) => {
            return Err(Error::input(
                "with a fixed seasonality horizon the markdown initial-inventory direction is \
                 determined by the model; supply the inventory magnitude instead of the full \
                 vector, or drop the seasonality to solve for the horizon",
            ));
        }
        (MdBoundary::Magnitude { .. }, None) => {
            return Err(Error::input(
                "the inventory-magnitude closure needs an explicit seasonality horizon",
            ));
        }
    };

    let mut revenue_rate = p0.component_mul(&i0).component_mul(&a);
    if plain_time {
        revenue_rate /= horizon;
    }
    let cf = ClosedFormMD {
        mu,
        a,
        theta,
        p0,
        i0,
        revenue_rate,
        adjoint_coeff: c_coeff,
        horizon,
        r_scale,
        plain_time,
        residual_exponents,
        residual_revenue,
    };
    let traj = emit_markdown_trajectory(params, &cf, seasonality, n_points)?;
    Ok((cf, traj))
}

/// Evaluate the power-law ansatz on a uniform time grid.
///
/// Every snapshot is computed at `tau_eff = max(1 - sigma_hat, TAU_FLOOR)` so
/// that demand stays finite; the terminal snapshot then overrides the stored
/// inventory with exactly zero.
fn emit_markdown_trajectory(
    params: &ModelParams,
    cf: &ClosedFormMD,
    seasonality: Option<&Seasonality>,
    n_points: usize,
) -> Result<Trajectory> {
    if n_points < 2 {
        return Err(Error::input(format!(
            "a trajectory needs at least 2 grid points, got {n_points}"
        )));
    }
    let n = params.n;
    let ts = uniform_grid(cf.horizon, n_points - 1);
    let mut states = Vec::with_capacity(n_points);
    let mut sigma = Vec::with_capacity(n_points);
    let mut sigma_hat = Vec::with_capacity(n_points);
    for (k, &t) in ts.iter().enumerate() {
        let (dens, cum) = match seasonality {
            Some(s) => s.eval(t)?,
            None => (1.0, t / cf.horizon),
        };
        sigma.push(dens);
        sigma_hat.push(cum);
        let tau = (1.0 - cum).max(TAU_FLOOR);
        let price = DVector::from_fn(n, |i, _| cf.p0[i] * tau.powf(cf.mu[i]));
        let inv = DVector::from_fn(n, |i, _| cf.i0[i] * tau.powf(cf.a[i]));
        let demand = params.demand(&inv, &price)?;
        let lambda = cf.adjoint_coeff.component_mul(&price);
        let stored_inv = if k + 1 == n_points { DVector::zeros(n) } else { inv };
        states.push(StateSnapshot::assemble(
            params,
            t,
            stored_inv,
            price,
            demand,
            lambda,
            DVector::zeros(n),
        )?);
    }
    let mut traj = Trajectory {
        states,
        sigma,
        sigma_hat,
        objective: 0.0,
    };
    traj.objective = objective(params, &traj, ObjectiveMode::Revenue)?;
    Ok(traj)
}

/// Check that the real spectra of `A B` and `A^T B^T` coincide as multisets.
///
/// The two products are similar whenever `A` is invertible, so this holds for
/// any invertible pair; it underpins the existence of a real exponent solution
/// for the markdown system.
pub fn eigen_lemma_check(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<bool> {
    if a.nrows() != a.ncols() || b.nrows() != b.ncols() || a.nrows() != b.nrows() {
        return Err(Error::Dimension {
            what: "eigen lemma operands".to_string(),
            expected: "matching square matrices".to_string(),
            got: format!("{}x{} and {}x{}", a.nrows(), a.ncols(), b.nrows(), b.ncols()),
        });
    }
    let n = a.nrows();
    if rank(a) < n || rank(b) < n {
        return Err(Error::Singular {
            context: "eigen lemma".to_string(),
            detail: "both operands must be invertible".to_string(),
        });
    }
    let s1 = real_eigenvalues(&(a * b));
    let s2 = real_eigenvalues(&(a.transpose() * b.transpose()));
    if s1.len() != s2.len() {
        return Ok(false);
    }
    let scale = s1
        .iter()
        .chain(&s2)
        .fold(1.0f64, |acc, &x| acc.max(x.abs()));
    Ok(s1
        .iter()
        .zip(&s2)
        .all(|(&x, &y)| (x - y).abs() <= 1e-8 * scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::geometric_mean;
    use crate::optimality::{
        degeneracy_check, hamiltonian_invariant, invariance_report, lerner_rule_check, InvariantKind,
    };
    use crate::trajectory::flow_residual;
    use approx::assert_relative_eq;

    fn cr_two_item_params() -> ModelParams {
        ModelParams::new(
            DemandKind::ConstantElasticity,
            DVector::from_vec(vec![1.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[-2.0, 0.25, 0.25, -1.5]),
            DMatrix::from_row_slice(2, 2, &[1.0, -2.0, -0.5, 1.0]),
            DVector::from_vec(vec![1.0, 1.0]),
        )
        .unwrap()
    }

    fn md_two_item_params() -> ModelParams {
        ModelParams::new(
            DemandKind::ConstantElasticity,
            DVector::from_vec(vec![1.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[-2.0, 0.25, 0.25, -1.5]),
            DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.3]),
            DVector::from_vec(vec![0.0, 0.0]),
        )
        .unwrap()
    }

    #[test]
    fn one_item_replenishment_price() {
        assert_relative_eq!(cr_one_item(-2.0, 1.0).unwrap(), 2.0);
        assert_relative_eq!(cr_one_item(-1.5, 2.0).unwrap(), 6.0);
        let p = cr_one_item(-100.0, 5.0).unwrap();
        assert!((p - 5.0).abs() < 0.06, "markup factor should approach 1, p = {p}");
        assert!(cr_one_item(-1.0, 1.0).is_err());
        assert!(cr_one_item(-0.5, 1.0).is_err());
        assert!(cr_one_item(-2.0, 0.0).is_err());
    }

    #[test]
    fn two_item_equilibrium_reference_values() {
        let params = cr_two_item_params();
        let eq = cr_multi(&params, 100.0).unwrap();
        assert_relative_eq!(eq.price[0], 3.0, max_relative = 1e-10);
        assert_relative_eq!(eq.price[1], 11.0 / 3.0, max_relative = 1e-10);
        assert_relative_eq!(eq.lerner[0], 2.0 / 3.0, max_relative = 1e-10);
        assert_relative_eq!(eq.lerner[1], 8.0 / 11.0, max_relative = 1e-10);
        assert_relative_eq!(eq.r_scale, 0.5988408064295826, max_relative = 1e-10);
        assert_relative_eq!(eq.inventory[0], 443.258439836273, max_relative = 1e-8);
        assert_relative_eq!(eq.inventory[1], 22.560202133306, max_relative = 1e-8);
        assert_relative_eq!(geometric_mean(&eq.inventory).unwrap(), 100.0, max_relative = 1e-10);
        assert!(eq.residual_demand <= 1e-10);
        // Stationarity identities.
        let p_res = (params.alpha.transpose() * &eq.profit_rate).amax();
        assert!(p_res < 1e-12, "alpha^T P = {p_res:e}");
        let r_res = (params.gamma.transpose() * &eq.profit_rate + &eq.revenue_rate).amax();
        assert!(r_res < 1e-12, "Gamma^T P + R = {r_res:e}");
    }

    #[test]
    fn equilibrium_trajectory_passes_optimality_checks() {
        let params = cr_two_item_params();
        let eq = cr_multi(&params, 100.0).unwrap();
        let seas = Seasonality::uniform(4.0).unwrap();
        let traj = cr_trajectory(&params, &eq, &seas, 9).unwrap();
        let snap = &traj.states[0];
        let h = hamiltonian_invariant(&params, snap).unwrap();
        let total_profit: f64 = snap.profit.sum();
        assert_relative_eq!(h, -total_profit, max_relative = 1e-10);
        let lerner = lerner_rule_check(&params, snap).unwrap();
        assert!(lerner.residual.amax() < 1e-12);
        assert!(lerner.feasible);
        assert!(degeneracy_check(&params, snap).amax() < 1e-12);
        // Objective equals the constant total profit rate (measure normalized).
        assert_relative_eq!(traj.objective, total_profit, max_relative = 1e-10);
        assert!(flow_residual(&traj).unwrap().iter().all(|r| r.amax() < 1e-9));
    }

    #[test]
    fn one_item_equilibrium_via_multi() {
        let params = ModelParams::one_item(DemandKind::ConstantElasticity, 100.0, -2.0, 0.0, 1.0).unwrap();
        let eq = cr_multi(&params, 50.0).unwrap();
        assert_relative_eq!(eq.price[0], 2.0, max_relative = 1e-12);
        assert_relative_eq!(eq.inventory[0], 50.0, max_relative = 1e-12);
        assert_relative_eq!(eq.revenue_rate[0], 50.0, max_relative = 1e-10);
        assert_relative_eq!(eq.profit_rate[0], 25.0, max_relative = 1e-10);
    }

    #[test]
    fn equilibrium_hypothesis_violations() {
        // Null vector of alpha^T is (1,-1): not one-signed.
        let mixed = ModelParams::new(
            DemandKind::ConstantElasticity,
            DVector::from_vec(vec![1.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[-2.0, 0.25, 0.25, -1.5]),
            DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 1.0, -1.0]),
            DVector::from_vec(vec![1.0, 1.0]),
        )
        .unwrap();
        let err = cr_multi(&mixed, 10.0).unwrap_err();
        assert!(err.to_string().contains("one-signed"), "{err}");

        // Full-rank alpha: no profit direction.
        let full = ModelParams::new(
            DemandKind::ConstantElasticity,
            DVector::from_vec(vec![1.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[-2.0, 0.25, 0.25, -1.5]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
            DVector::from_vec(vec![1.0, 1.0]),
        )
        .unwrap();
        assert!(cr_multi(&full, 10.0).is_err());

        // Elasticity too weak: Lerner index escapes (0,1).
        let weak = ModelParams::one_item(DemandKind::ConstantElasticity, 100.0, -0.5, 0.0, 1.0).unwrap();
        let err = cr_multi(&weak, 10.0).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("outside (0,1)"), "{err}");

        // Exponential demand has no constant-price equilibrium of this form.
        let exp = ModelParams::one_item(DemandKind::Exponential, 100.0, -2.0, 0.0, 1.0).unwrap();
        assert!(cr_multi(&exp, 10.0).is_err());
    }

    #[test]
    fn one_item_markdown_reference_values() {
        let seas = Seasonality::uniform(1.0).unwrap();
        let (cf, traj) = md_one_item(-2.0, 0.5, 100.0, 400.0, &seas, 101).unwrap();
        assert_relative_eq!(cf.theta[0], 2.0, max_relative = 1e-12);
        assert_relative_eq!(cf.mu[0], 1.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(cf.a[0], 2.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(cf.p0[0], 60.0f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(cf.revenue_rate[0], 516.3977794943222, max_relative = 1e-12);
        assert_relative_eq!(cf.adjoint_coeff[0], -0.5, max_relative = 1e-12);
        assert_relative_eq!(traj.objective, 516.3977794943222, max_relative = 1e-12);
        // Terminal snapshot: inventory exactly zero, price still positive.
        let last = traj.states.last().unwrap();
        assert_eq!(last.inventory[0], 0.0);
        assert!(last.price[0] > 0.0);
        // Per-item revenue constant along the grid.
        let reports = invariance_report(&params_of(&cf), &traj, &[InvariantKind::RevenueItems], 1e-8).unwrap();
        assert!(reports[0].pass, "revenue dev {}", reports[0].max_rel_dev);
    }

    fn params_of(cf: &ClosedFormMD) -> ModelParams {
        // Reconstruct the one-item model used by md_one_item tests.
        let _ = cf;
        ModelParams::one_item(DemandKind::ConstantElasticity, 400.0, -2.0, 0.5, 0.0).unwrap()
    }

    #[test]
    fn one_item_markdown_zero_alpha_limit() {
        let seas = Seasonality::uniform(1.0).unwrap();
        let (cf, traj) = md_one_item(-2.0, 0.0, 100.0, 400.0, &seas, 41).unwrap();
        assert_eq!(cf.mu[0], 0.0);
        assert_eq!(cf.a[0], 1.0);
        assert!(cf.theta[0].is_infinite());
        assert_relative_eq!(cf.p0[0], 2.0, max_relative = 1e-12);
        assert_relative_eq!(cf.revenue_rate[0], 200.0, max_relative = 1e-12);
        // Linear drawdown: flow residual is tiny everywhere on the grid.
        let res = flow_residual(&traj).unwrap();
        assert!(res.iter().all(|r| r.amax() < 1e-9), "flow residual too large");
        for (k, s) in traj.states.iter().enumerate() {
            assert_relative_eq!(s.price[0], 2.0, max_relative = 1e-12);
            if k + 1 < traj.len() {
                assert_relative_eq!(s.inventory[0], 100.0 * (1.0 - s.t), max_relative = 1e-9);
            }
        }
        assert!(md_one_item(-0.9, 0.5, 100.0, 400.0, &seas, 11).is_err());
        assert!(md_one_item(-2.0, -0.1, 100.0, 400.0, &seas, 11).is_err());
    }

    #[test]
    fn two_item_markdown_reference_values() {
        let params = md_two_item_params();
        let boundary = MdBoundary::InitialInventory(DVector::from_vec(vec![200.0, 300.0]));
        let (cf, traj) = md_multi(&params, &boundary, None, 201).unwrap();
        assert_relative_eq!(cf.mu[0], 38.0 / 91.0, max_relative = 1e-12);
        assert_relative_eq!(cf.mu[1], 46.0 / 91.0, max_relative = 1e-12);
        assert_relative_eq!(cf.a[0], 53.0 / 91.0, max_relative = 1e-12);
        assert_relative_eq!(cf.a[1], 45.0 / 91.0, max_relative = 1e-12);
        assert_relative_eq!(cf.p0[0], 3.424252384157, max_relative = 1e-9);
        assert_relative_eq!(cf.p0[1], 2.48024803754, max_relative = 1e-9);
        assert_relative_eq!(cf.horizon, 76.95861266629719, max_relative = 1e-9);
        assert_relative_eq!(cf.r_scale, 7.312311560181181, max_relative = 1e-9);
        assert_relative_eq!(cf.revenue_rate[0], 5.182902149799, max_relative = 1e-9);
        assert_relative_eq!(cf.revenue_rate[1], 4.781126789349, max_relative = 1e-9);
        let ratio = cf.revenue_rate[0] / cf.revenue_rate[1];
        assert_relative_eq!(ratio, 1.0840336134453785, max_relative = 1e-9);
        assert_relative_eq!(
            cf.adjoint_coeff[0],
            -53.0 / 129.0,
            max_relative = 1e-10
        );
        assert_relative_eq!(
            cf.adjoint_coeff[1],
            -27.0 / 119.0,
            max_relative = 1e-10
        );
        assert!(cf.residual_exponents <= 1e-12);
        assert!(cf.residual_revenue <= 1e-12);
        assert!(cf.plain_time);

        // Emitted trajectory: plain-time measure, constant per-item revenue,
        // objective = total de-seasoned revenue.
        assert!(traj.sigma.iter().all(|&s| s == 1.0));
        assert_relative_eq!(traj.objective, 766.8178437236661, max_relative = 1e-10);
        let reports = invariance_report(&params, &traj, &[InvariantKind::RevenueItems], 1e-8).unwrap();
        for rep in &reports {
            assert!(rep.pass, "{} dev {}", rep.name, rep.max_rel_dev);
        }
        // lambda = C p at the start of the markdown.
        let first = &traj.states[0];
        for i in 0..2 {
            assert_relative_eq!(
                first.lambda[i],
                cf.adjoint_coeff[i] * first.price[i],
                max_relative = 1e-12
            );
        }
        assert_eq!(traj.states.last().unwrap().inventory.amax(), 0.0);
    }

    #[test]
    fn magnitude_closure_matches_one_item_formulas() {
        // A decoupled two-item model must reproduce the one-item closed form
        // item by item through the joint magnitude closure.
        let params = ModelParams::new(
            DemandKind::ConstantElasticity,
            DVector::from_vec(vec![400.0, 200.0]),
            DMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, -3.0]),
            DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.25]),
            DVector::from_vec(vec![0.0, 0.0]),
        )
        .unwrap();
        let seas = Seasonality::uniform(1.0).unwrap();
        let (cf, _traj) = md_multi(&params, &MdBoundary::Magnitude { geomean: 80.0 }, Some(&seas), 51).unwrap();
        assert_relative_eq!(geometric_mean(&cf.i0).unwrap(), 80.0, max_relative = 1e-10);
        assert!(!cf.plain_time);
        let (cf1, _) = md_one_item(-2.0, 0.5, cf.i0[0], 400.0, &seas, 11).unwrap();
        let (cf2, _) = md_one_item(-3.0, 0.25, cf.i0[1], 200.0, &seas, 11).unwrap();
        assert_relative_eq!(cf.mu[0], cf1.mu[0], max_relative = 1e-12);
        assert_relative_eq!(cf.mu[1], cf2.mu[0], max_relative = 1e-12);
        assert_relative_eq!(cf.p0[0], cf1.p0[0], max_relative = 1e-10);
        assert_relative_eq!(cf.p0[1], cf2.p0[0], max_relative = 1e-10);
        assert_relative_eq!(cf.revenue_rate[0], cf1.revenue_rate[0], max_relative = 1e-10);
        assert_relative_eq!(cf.revenue_rate[1], cf2.revenue_rate[0], max_relative = 1e-10);
    }

    #[test]
    fn one_item_via_multi_delegates() {
        let params = ModelParams::one_item(DemandKind::ConstantElasticity, 400.0, -2.0, 0.5, 0.0).unwrap();
        let seas = Seasonality::uniform(1.0).unwrap();
        let boundary = MdBoundary::InitialInventory(DVector::from_vec(vec![100.0]));
        let (cf_multi, _) = md_multi(&params, &boundary, Some(&seas), 21).unwrap();
        let (cf_one, _) = md_one_item(-2.0, 0.5, 100.0, 400.0, &seas, 21).unwrap();
        assert_relative_eq!(cf_multi.p0[0], cf_one.p0[0], max_relative = 1e-12);
        assert_relative_eq!(cf_multi.mu[0], cf_one.mu[0], max_relative = 1e-12);
        // Without a seasonality the one-item horizon is undetermined.
        assert!(md_multi(&params, &boundary, None, 21).is_err());
    }

    #[test]
    fn nonsymmetric_same_sign_cross_terms_use_ratio_scaling() {
        let params = ModelParams::new(
            DemandKind::ConstantElasticity,
            DVector::from_vec(vec![1.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[-2.0, 0.3, 0.15, -1.5]),
            DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.3]),
            DVector::from_vec(vec![0.0, 0.0]),
        )
        .unwrap();
        let boundary = MdBoundary::InitialInventory(DVector::from_vec(vec![200.0, 300.0]));
        let (cf, _traj) = md_multi(&params, &boundary, None, 51).unwrap();
        assert!(cf.residual_revenue <= 1e-10, "revenue identity residual {}", cf.residual_revenue);
        assert!(cf.mu.iter().all(|&m| m > 0.0 && m < 1.0));

        // The square-root scaling symmetrizes Gamma instead of transposing it
        // and leaves a macroscopic residual in the revenue identity.
        let ones = DVector::from_element(2, 1.0);
        let eye = DMatrix::<f64>::identity(2, 2);
        let m = &params.alpha - &params.gamma - &eye;
        let mu = solve_checked(&m, &(&params.alpha * &ones), "test").unwrap();
        let theta = (&ones - &mu).component_div(&mu);
        let delta_bad = DVector::from_vec(vec![1.0, (0.3f64 / 0.15).sqrt()]);
        let r_bad = -params.gamma.transpose() * delta_bad.component_mul(&mu);
        let z = solve_checked(&params.gamma.transpose(), &r_bad, "test").unwrap();
        let res = (theta.component_mul(&(params.alpha.transpose() * &z)) + &z + &r_bad).amax()
            / r_bad.amax();
        assert!(res > 1e-3, "sqrt scaling unexpectedly satisfies the identity: {res:e}");
    }

    #[test]
    fn markdown_hypothesis_violations() {
        let seas = Seasonality::uniform(1.0).unwrap();
        // Weak elasticity pushes mu out of (0,1).
        let weak = ModelParams::new(
            DemandKind::ConstantElasticity,
            DVector::from_vec(vec![1.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[-0.2, 0.0, 0.0, -0.2]),
            DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]),
            DVector::from_vec(vec![0.0, 0.0]),
        )
        .unwrap();
        let err = md_multi(
            &weak,
            &MdBoundary::Magnitude { geomean: 10.0 },
            Some(&seas),
            11,
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("outside (0,1)"), "{err}");

        // Non-diagonal inventory effect.
        let cross = ModelParams::new(
            DemandKind::ConstantElasticity,
            DVector::from_vec(vec![1.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[-2.0, 0.25, 0.25, -1.5]),
            DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.0, 0.3]),
            DVector::from_vec(vec![0.0, 0.0]),
        )
        .unwrap();
        assert!(md_multi(&cross, &MdBoundary::Magnitude { geomean: 10.0 }, Some(&seas), 11).is_err());

        // Opposite-signed cross-price terms admit no positive scaling.
        let opp = ModelParams::new(
            DemandKind::ConstantElasticity,
            DVector::from_vec(vec![1.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[-2.0, 0.3, -0.15, -1.5]),
            DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.3]),
            DVector::from_vec(vec![0.0, 0.0]),
        )
        .unwrap();
        let err = md_multi(
            &opp,
            &MdBoundary::Magnitude { geomean: 10.0 },
            Some(&seas),
            11,
        )
        .unwrap_err();
        assert!(err.to_string().contains("same-signed"), "{err}");

        // Boundary/seasonality combinations that leave the closure non-square.
        let good = md_two_item_params();
        let i0 = MdBoundary::InitialInventory(DVector::from_vec(vec![200.0, 300.0]));
        assert!(md_multi(&good, &i0, Some(&seas), 11).is_err());
        assert!(md_multi(&good, &MdBoundary::Magnitude { geomean: 10.0 }, None, 11).is_err());
    }

    #[test]
    fn eigen_lemma_small_cases() {
        let eye = DMatrix::<f64>::identity(3, 3);
        assert!(eigen_lemma_check(&eye, &eye).unwrap());
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(eigen_lemma_check(&a, &b).unwrap());
        let sing = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(eigen_lemma_check(&sing, &b).is_err());
    }
}
