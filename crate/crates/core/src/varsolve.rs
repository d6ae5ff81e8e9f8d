//! Direct numerical trajectory optimization, independent of the closed forms.
//!
//! Single shooting: controls are piecewise constant per grid interval
//! (log-prices for markdown; log-prices plus replenishment roots `rho` for
//! continuous replenishment, so `rho^2 >= 0` needs no constraint machinery).
//! The inventory flow `dI/dt = (rho^2 - S) sigma` is integrated with Heun's
//! method, the objective with the matching trapezoidal quadrature, and the
//! terminal boundary (`I(T) = 0` for markdown, `I(T) = I(0)` for
//! replenishment) is enforced by an augmented Lagrangian: a multiplier
//! estimate plus a moderate quadratic penalty, with the multiplier updated
//! between rounds and the weight grown only when the violation stops
//! shrinking. Gradients come from the exact reverse sweep of the discrete
//! recursion, so the analytic gradient matches finite differences of the
//! discretized objective to roundoff, not merely to `O(h)`.
//!
//! Everything is deterministic for a fixed config: initialization is
//! closed-form, the only randomness (picking which gradient components to
//! finite-difference-check) uses a seeded generator.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::closedform::{cr_multi, md_multi, MdBoundary};
use crate::error::Error;
use crate::linalg::geometric_mean;
use crate::model::{DemandKind, ModelParams};
use crate::seasonality::{uniform_grid, Seasonality};
use crate::trajectory::{StateSnapshot, Trajectory};
use crate::Result;

/// Curvature pairs kept for the quasi-Newton direction.
const LBFGS_MEMORY: usize = 10;

/// Tuning knobs for the projected-gradient solver. All fields have serde
/// defaults so a config file may specify any subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Number of grid intervals.
    pub n_grid: usize,
    /// Iteration cap per penalty round.
    pub max_iters: usize,
    /// Convergence tolerance: sup-norm of the projected gradient relative to
    /// `max(1, |objective|)`, enforced fully on the final penalty round.
    /// Tightening this toward machine precision is counterproductive on the
    /// multi-item problems, whose stationary paths sit next to flat valleys:
    /// once the gradient is at noise level, further polishing just walks the
    /// iterate along the valley.
    pub tol_rel: f64,
    /// Terminal-boundary tolerance relative to `max(1, |I(0)|_inf)`.
    pub tol_constraint_rel: f64,
    /// Armijo sufficient-increase constant.
    pub armijo_c1: f64,
    /// Line-search halvings before declaring a stall.
    pub max_backtracks: usize,
    /// Initial terminal-penalty weight; `None` scales it from the initial
    /// objective magnitude.
    pub penalty_w0: Option<f64>,
    /// Penalty growth factor, applied between rounds only when the terminal
    /// violation failed to shrink by 4x.
    pub penalty_growth: f64,
    /// Number of multiplier-update rounds.
    pub penalty_rounds: usize,
    /// Half-width of the log-price box around the initial prices.
    pub price_log_halfwidth: f64,
    /// Seed for the gradient-check component sample.
    pub seed: u64,
    /// Verify the analytic gradient against central differences at the first
    /// iterate.
    pub check_gradient: bool,
    /// How many control components to finite-difference (all, if fewer).
    pub gradient_check_components: usize,
    /// Central-difference step for the gradient check.
    pub fd_step: f64,
    /// Print one line of progress per penalty round to stderr.
    pub trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            n_grid: 400,
            max_iters: 4000,
            tol_rel: 1e-7,
            tol_constraint_rel: 1e-3,
            armijo_c1: 1e-4,
            max_backtracks: 60,
            penalty_w0: None,
            penalty_growth: 10.0,
            penalty_rounds: 8,
            price_log_halfwidth: (1e6f64).ln(),
            seed: 0,
            check_gradient: true,
            gradient_check_components: 24,
            fd_step: 1e-5,
            trace: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_grid < 10 {
            return Err(Error::input(format!(
                "solver grid needs at least 10 intervals, got {}",
                self.n_grid
            )));
        }
        if !(self.tol_rel > 0.0) || !(self.tol_constraint_rel > 0.0) || !(self.fd_step > 0.0) {
            return Err(Error::input("solver tolerances must be positive".to_string()));
        }
        if !(self.penalty_growth > 1.0) || self.penalty_rounds == 0 {
            return Err(Error::input(
                "penalty continuation needs growth > 1 and at least one round".to_string(),
            ));
        }
        if self.max_iters == 0 || self.max_backtracks == 0 {
            return Err(Error::input("iteration limits must be positive".to_string()));
        }
        if let Some(w) = self.penalty_w0 {
            if !(w > 0.0) {
                return Err(Error::input(format!("penalty weight must be positive, got {w}")));
            }
        }
        Ok(())
    }
}

/// Outcome of a numerical solve.
#[derive(Debug, Clone)]
pub struct SolverResult {
    pub trajectory: Trajectory,
    /// Pure quadrature objective (no penalty term).
    pub objective: f64,
    /// Final-round projected gradient met `tol_rel` and the terminal boundary
    /// met `tol_constraint_rel`.
    pub converged: bool,
    /// Accepted ascent steps across all rounds.
    pub iterations: usize,
    /// Final sup-norm of the projected gradient.
    pub grad_norm: f64,
    /// `|I(T) - target|_inf`.
    pub constraint_violation: f64,
    /// Some log-price sits on the search box; for replenishment problems this
    /// signals prices running away (no interior optimum).
    pub hit_price_bounds: bool,
    /// Worst relative mismatch between analytic and central-difference
    /// gradients at the first iterate, when checked.
    pub gradient_check: Option<f64>,
    /// Accepted penalized-objective steps were nondecreasing within every
    /// penalty round.
    pub ascent_monotone: bool,
}

/// Sup-norm deviations between two trajectories on the first `1 - exclude_tail_frac`
/// of the horizon (grids aligned by linear interpolation onto `a`'s grid).
#[derive(Debug, Clone)]
pub struct TrajectoryComparison {
    pub sup_rel_dev_p: f64,
    pub sup_rel_dev_i: f64,
    pub obj_rel_dev: f64,
}

enum Problem {
    Markdown,
    Replenishment,
}

/// Width of the smooth inventory floor relative to the largest initial stock.
/// Demand is evaluated at `0.5 (I + sqrt(I^2 + 4 eps^2))`, which matches `I`
/// away from zero but stays positive and smooth through sell-out, so the
/// shooting objective has exact gradients everywhere.
const SMOOTH_FLOOR_REL: f64 = 1e-4;

/// Log-price box halfwidth used when a markdown solve starts on the
/// power-law stationary path. Multi-item revenue has no finite supremum
/// (see `md_warm_start`), so the solve is a local verification: within this
/// trust box the cross-substitution ridge is strictly unprofitable (its
/// payoff grows like `exp(width/8)` of one item's revenue while the held
/// item forfeits most of its own), yet the box leaves room for every
/// discretization-level correction, which moves prices by far less than one
/// log unit.
const MD_POLISH_HALFWIDTH: f64 = 2.5;

struct Discretization<'a> {
    params: &'a ModelParams,
    i0: DVector<f64>,
    ts: Vec<f64>,
    sig: Vec<f64>,
    sighat: Vec<f64>,
    h: f64,
    n: usize,
    intervals: usize,
    /// Controls per interval: n log-prices, plus n replenishment roots for CR.
    dim: usize,
    problem: Problem,
    /// Smooth-floor width.
    eps: f64,
    target: DVector<f64>,
}

struct ForwardPass {
    /// Node states, length intervals + 1.
    states: Vec<DVector<f64>>,
    /// Heun predictor per interval.
    preds: Vec<DVector<f64>>,
    /// Pure quadrature objective.
    quad: f64,
    /// Quadrature plus multiplier term minus terminal penalty.
    penalized: f64,
}

impl ForwardPass {
    /// Marker for a blown-up rollout; never accepted by the line search.
    fn poisoned(states: Vec<DVector<f64>>, preds: Vec<DVector<f64>>) -> Self {
        ForwardPass {
            states,
            preds,
            quad: f64::NEG_INFINITY,
            penalized: f64::NEG_INFINITY,
        }
    }
}

struct Stage {
    /// Flow value `(rho^2 - S) sigma`.
    f: DVector<f64>,
    /// `df/dI`.
    f_i: DMatrix<f64>,
    /// `df/d(log p)`.
    f_x: DMatrix<f64>,
    /// Integrand value.
    g: f64,
    /// `dg/dI`.
    g_i: DVector<f64>,
    /// `dg/d(log p)`.
    g_x: DVector<f64>,
    /// `dg/drho` (CR only; empty for markdown).
    g_rho: DVector<f64>,
}

impl<'a> Discretization<'a> {
    fn control_price(&self, u: &DVector<f64>, k: usize) -> DVector<f64> {
        DVector::from_fn(self.n, |i, _| u[k * self.dim + i].exp())
    }

    fn control_rho(&self, u: &DVector<f64>, k: usize) -> DVector<f64> {
        match self.problem {
            Problem::Markdown => DVector::zeros(self.n),
            Problem::Replenishment => DVector::from_fn(self.n, |i, _| u[k * self.dim + self.n + i]),
        }
    }

    /// Smooth positive part of the inventory vector, and the log-derivative
    /// `d log(I_eff) / d I` per component.
    fn smooth_inventory(&self, i: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let ieff = i.map(|x| 0.5 * (x + (x * x + 4.0 * self.eps * self.eps).sqrt()));
        let wlog = DVector::from_fn(self.n, |c, _| {
            let x = i[c];
            let root = (x * x + 4.0 * self.eps * self.eps).sqrt();
            0.5 * (1.0 + x / root) / ieff[c]
        });
        (ieff, wlog)
    }

    /// Flow and integrand with all derivatives at `(I, controls_k, node)`.
    fn stage(&self, i: &DVector<f64>, u: &DVector<f64>, k: usize, node: usize) -> Result<Stage> {
        let p = self.control_price(u, k);
        let rho = self.control_rho(u, k);
        let sig = self.sig[node];
        let (ieff, wlog) = self.smooth_inventory(i);
        let s = self.params.demand(&ieff, &p)?;
        let gamma_eff = self.params.elasticity_matrix(&p)?;
        // dS_r/dI_c = S_r alpha_rc dlog(I_eff_c)/dI_c.
        let ds_di = DMatrix::from_fn(self.n, self.n, |r, c| {
            s[r] * self.params.alpha[(r, c)] * wlog[c]
        });
        // dS_r/dlog p_c = S_r (Gamma_eff)_rc.
        let ds_dx = DMatrix::from_fn(self.n, self.n, |r, c| s[r] * gamma_eff[(r, c)]);
        let rho2 = rho.component_mul(&rho);
        let f = (&rho2 - &s) * sig;
        let f_i = &ds_di * (-sig);
        let f_x = &ds_dx * (-sig);
        let revenue = p.component_mul(&s);
        let (g, g_rho) = match self.problem {
            Problem::Markdown => (sig * revenue.sum(), DVector::zeros(0)),
            Problem::Replenishment => (
                sig * (revenue.sum() - self.params.cost.dot(&rho2)),
                -2.0 * sig * self.params.cost.component_mul(&rho),
            ),
        };
        let g_i = ds_di.transpose() * &p * sig;
        let g_x = (&revenue + ds_dx.transpose() * &p) * sig;
        Ok(Stage {
            f,
            f_i,
            f_x,
            g,
            g_i,
            g_x,
            g_rho,
        })
    }

    /// Heun rollout plus matching trapezoidal quadrature. `nu` is the current
    /// terminal-constraint multiplier estimate and `w` the penalty weight.
    ///
    /// A rollout that overflows (inventories beyond any physical scale, or
    /// non-finite values from runaway controls mid line-search) comes back
    /// with `penalized = -inf` so the line search rejects the trial instead
    /// of the whole solve erroring out.
    fn forward(&self, u: &DVector<f64>, nu: &DVector<f64>, w: &DVector<f64>) -> Result<ForwardPass> {
        let nn = self.intervals;
        let h = self.h;
        let mut states = Vec::with_capacity(nn + 1);
        let mut preds = Vec::with_capacity(nn);
        states.push(self.i0.clone());
        let mut quad = 0.0;
        let sane = |v: &DVector<f64>| v.iter().all(|x| x.is_finite() && x.abs() < 1e30);
        for k in 0..nn {
            let left = self.stage(&states[k], u, k, k)?;
            let pred = &states[k] + &left.f * h;
            if !sane(&pred) {
                return Ok(ForwardPass::poisoned(states, preds));
            }
            let pred_stage = self.stage(&pred, u, k, k + 1)?;
            let next = &states[k] + (&left.f + &pred_stage.f) * (h / 2.0);
            if !sane(&next) {
                return Ok(ForwardPass::poisoned(states, preds));
            }
            let right = self.stage(&next, u, k, k + 1)?;
            quad += (h / 2.0) * (left.g + right.g);
            preds.push(pred);
            states.push(next);
        }
        let dev = states[nn].clone() - &self.target;
        let penalized = quad + nu.dot(&dev) - w.component_mul(&dev).dot(&dev);
        if !penalized.is_finite() {
            return Ok(ForwardPass::poisoned(states, preds));
        }
        Ok(ForwardPass {
            states,
            preds,
            quad,
            penalized,
        })
    }

    /// Exact reverse sweep of the Heun recursion.
    ///
    /// `abar` carries the derivative of the penalized objective with respect
    /// to the current node state; the recorded adjoint is `lambda = -abar`
    /// (an extra unit of stock raises the objective by `-lambda`).
    fn reverse(
        &self,
        u: &DVector<f64>,
        fwd: &ForwardPass,
        nu: &DVector<f64>,
        w: &DVector<f64>,
    ) -> Result<(DVector<f64>, Vec<DVector<f64>>)> {
        let nn = self.intervals;
        let h = self.h;
        let mut grad = DVector::zeros(self.dim * nn);
        let mut lambda = vec![DVector::zeros(self.n); nn + 1];
        let dev = fwd.states[nn].clone() - &self.target;
        let mut abar: DVector<f64> = nu - w.component_mul(&dev) * 2.0;
        let eye = DMatrix::<f64>::identity(self.n, self.n);
        for k in (0..nn).rev() {
            let left = self.stage(&fwd.states[k], u, k, k)?;
            let pred_stage = self.stage(&fwd.preds[k], u, k, k + 1)?;
            let right = self.stage(&fwd.states[k + 1], u, k, k + 1)?;

            // Quadrature contribution at the right node completes dJ/dI_{k+1}.
            abar += &right.g_i * (h / 2.0);
            lambda[k + 1] = -abar.clone();

            // Control gradient: direct quadrature terms plus the flow path
            // I_{k+1}(u_k) pulled back through abar.
            let du_direct_x = (&left.g_x + &right.g_x) * (h / 2.0);
            // dI_{k+1}/d(log p_k) = (h/2) (F_l + h F'_p F_l + F_p) in the
            // x-block, with F evaluated at the left node (l) and predictor (p).
            let dnext_dx = (&left.f_x + &pred_stage.f_i * &left.f_x * h + &pred_stage.f_x) * (h / 2.0);
            let gx = du_direct_x + dnext_dx.transpose() * &abar;
            for i in 0..self.n {
                grad[k * self.dim + i] = gx[i];
            }
            if let Problem::Replenishment = self.problem {
                let du_direct_r = (&left.g_rho + &right.g_rho) * (h / 2.0);
                // f_rho is the same diagonal at both stage evaluations (it
                // depends only on the control and the node densities).
                let mut grho = du_direct_r;
                for i in 0..self.n {
                    // Column i of dI_{k+1}/drho_k: (h/2)(e_i fl + h F'_p e_i fl + e_i fp)
                    // where fl, fp are the diagonal entries at nodes k, k+1.
                    let fl = 2.0 * self.sig[k] * u[k * self.dim + self.n + i];
                    let fp = 2.0 * self.sig[k + 1] * u[k * self.dim + self.n + i];
                    let mut col = DVector::zeros(self.n);
                    col[i] = fl + fp;
                    let mut extra = pred_stage.f_i.column(i) * (h * fl);
                    extra[i] += col[i];
                    // extra now holds e_i (fl + fp) + h F'_p e_i fl componentwise.
                    grho[i] += (h / 2.0) * extra.dot(&abar);
                }
                for i in 0..self.n {
                    grad[k * self.dim + self.n + i] = grho[i];
                }
            }

            // Pull abar back through I_{k+1}(I_k) and add the left-node
            // quadrature term.
            let dnext_di = &eye + (&left.f_i + &pred_stage.f_i * (&eye + &left.f_i * h)) * (h / 2.0);
            abar = dnext_di.transpose() * &abar + &left.g_i * (h / 2.0);
        }
        lambda[0] = -abar;
        Ok((grad, lambda))
    }
}

/// Limited-memory quasi-Newton ascent direction `H g` from stored pairs
/// `(s, y_f)` where `y_f` is the change in the *descent* gradient of `-J`.
/// Empty history degrades to the plain gradient.
fn lbfgs_direction(grad: &DVector<f64>, history: &VecDeque<(DVector<f64>, DVector<f64>)>) -> DVector<f64> {
    if history.is_empty() {
        return grad.clone();
    }
    // Standard two-loop recursion on the minimization gradient of -J.
    let mut q = -grad;
    let mut alphas = Vec::with_capacity(history.len());
    for (s, yf) in history.iter().rev() {
        let rho = 1.0 / s.dot(yf);
        let alpha = rho * s.dot(&q);
        q -= yf * alpha;
        alphas.push((alpha, rho));
    }
    let (s_last, yf_last) = history.back().expect("nonempty");
    let mut r = q * (s_last.dot(yf_last) / yf_last.dot(yf_last));
    for ((s, yf), &(alpha, rho)) in history.iter().zip(alphas.iter().rev()) {
        let beta = rho * yf.dot(&r);
        r += s * (alpha - beta);
    }
    // r = H * grad(-J); the ascent direction is -r.
    -r
}

struct AcceptedStep {
    u: DVector<f64>,
    fwd: ForwardPass,
    /// The box projection altered the raw step.
    clipped: bool,
}

/// Backtracking Armijo search along `dir` on the projected path. Returns
/// `None` when no acceptable step exists within the backtrack budget.
#[allow(clippy::too_many_arguments)]
fn line_search(
    disc: &Discretization,
    u: &DVector<f64>,
    fwd: &ForwardPass,
    grad: &DVector<f64>,
    dir: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    nu: &DVector<f64>,
    w: &DVector<f64>,
    config: &SolverConfig,
) -> Result<Option<AcceptedStep>> {
    // Cap the first trial so no control moves more than 2 log units at once;
    // lets steep early gradients shrink to sane steps without burning the
    // backtrack budget or slamming prices across the box.
    let mut step = (2.0 / dir.amax().max(1e-12)).min(1.0);
    for _ in 0..config.max_backtracks {
        let raw = u + dir * step;
        let u_try = clamp_controls(&raw, lo, hi);
        let s = &u_try - u;
        let pred = grad.dot(&s);
        if pred <= 0.0 {
            step *= 0.5;
            continue;
        }
        let try_fwd = disc.forward(&u_try, nu, w)?;
        if try_fwd.penalized >= fwd.penalized + config.armijo_c1 * pred {
            let clipped = (&u_try - &raw).amax() > 0.0;
            return Ok(Some(AcceptedStep {
                u: u_try,
                fwd: try_fwd,
                clipped,
            }));
        }
        step *= 0.5;
    }
    Ok(None)
}

fn masked_gradient(grad: &DVector<f64>, u: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(grad.len(), |i, _| {
        if (u[i] <= lo[i] && grad[i] < 0.0) || (u[i] >= hi[i] && grad[i] > 0.0) {
            0.0
        } else {
            grad[i]
        }
    })
}

fn clamp_controls(u: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(u.len(), |i, _| u[i].clamp(lo[i], hi[i]))
}

/// Replenishment solves warm-start from the algebraic equilibrium candidate
/// when one exists. This matters because multi-item profit with any positive
/// cross-price coefficient is unbounded along single-price rays (raising one
/// price forever inflates substitute demand which replenishment keeps
/// feeding), so the equilibrium is a stationary point rather than a global
/// maximum; starting next to it verifies local stationarity instead of
/// chasing the runaway.
fn cr_warm_start(params: &ModelParams, i0: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = geometric_mean(i0).ok()?;
    cr_multi(params, scale).ok().map(|eq| eq.price)
}

/// Multi-item markdown warm start: initial prices and decay exponents of the
/// power-law stationary path, when one exists for this model.
///
/// Multi-item markdown shares the replenishment saddle structure: with a
/// positive cross-price coefficient, holding one item expensive inflates the
/// other's demand without bound, so revenue has no finite supremum and the
/// power-law path is a stationary point rather than a global maximum. A flat
/// cold start can drift onto that ridge and climb it until the search box
/// stops it; starting on the stationary path verifies local stationarity
/// instead. The inventory magnitude closure is used because it accepts any
/// item count and any seasonality; if `i0` is off the solved inventory
/// direction the start is merely approximate, which is all an initialization
/// needs to be.
fn md_warm_start(
    params: &ModelParams,
    i0: &DVector<f64>,
    seasonality: &Seasonality,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let scale = geometric_mean(i0).ok()?;
    md_multi(
        params,
        &MdBoundary::Magnitude { geomean: scale },
        Some(seasonality),
        2,
    )
    .ok()
    .map(|(cf, _)| (cf.p0, cf.mu))
}

/// Deterministic starting prices: the one-item stationary markup when costs
/// allow it, otherwise a sell-through price that clears the initial stock in
/// unit de-seasoned time. Note the demand kinds differ in where price enters:
/// `gamma log p` versus `gamma p`.
fn initial_prices(params: &ModelParams, i0: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(params.n, |i, _| {
        let g = params.gamma[(i, i)];
        let c = params.cost[i];
        let log_clear = {
            let mut log_s = params.s0[i].ln();
            for j in 0..params.n {
                log_s += params.alpha[(i, j)] * i0[j].ln();
            }
            (i0[i].ln() - log_s) / g
        };
        match params.kind {
            DemandKind::ConstantElasticity => {
                if c > 0.0 && g < -1.0 {
                    g * c / (g + 1.0)
                } else if c > 0.0 {
                    1.5 * c
                } else {
                    log_clear.exp()
                }
            }
            DemandKind::Exponential => {
                if c > 0.0 {
                    c - 1.0 / g
                } else {
                    // Sell-through price, floored away from zero at a tenth
                    // of the revenue-maximizing price -1/gamma.
                    log_clear.max(-0.1 / g)
                }
            }
        }
    })
}

fn solve(
    params: &ModelParams,
    i0: &DVector<f64>,
    seasonality: &Seasonality,
    config: &SolverConfig,
    problem: Problem,
) -> Result<SolverResult> {
    config.validate()?;
    if i0.len() != params.n {
        return Err(Error::Dimension {
            what: "initial inventory".to_string(),
            expected: format!("{}", params.n),
            got: format!("{}", i0.len()),
        });
    }
    for (idx, &x) in i0.iter().enumerate() {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::domain(format!(
                "initial inventory component {} must be positive and finite, got {x}",
                idx + 1
            )));
        }
    }

    let nn = config.n_grid;
    let ts = uniform_grid(seasonality.horizon(), nn);
    let mut sig = Vec::with_capacity(nn + 1);
    let mut sighat = Vec::with_capacity(nn + 1);
    for &t in &ts {
        let (d, c) = seasonality.eval(t)?;
        sig.push(d);
        sighat.push(c);
    }
    let h = seasonality.horizon() / nn as f64;
    let target = match problem {
        Problem::Markdown => DVector::zeros(params.n),
        Problem::Replenishment => i0.clone(),
    };
    let dim = match problem {
        Problem::Markdown => params.n,
        Problem::Replenishment => 2 * params.n,
    };
    let disc = Discretization {
        params,
        i0: i0.clone(),
        ts,
        sig,
        sighat,
        h,
        n: params.n,
        intervals: nn,
        dim,
        problem,
        eps: SMOOTH_FLOOR_REL * i0.amax(),
        target,
    };

    // Initial controls and the log-price search box. Multi-item markdown
    // starts on the decaying power-law path when the model admits one (see
    // `md_warm_start` for why); everything else starts from flat heuristic
    // prices. The box tracks the initial path componentwise, so a decaying
    // start gets a decaying box.
    let p_init = match disc.problem {
        Problem::Markdown => initial_prices(params, i0),
        Problem::Replenishment => {
            cr_warm_start(params, i0).unwrap_or_else(|| initial_prices(params, i0))
        }
    };
    let md_decay = match disc.problem {
        Problem::Markdown if params.n >= 2 => md_warm_start(params, i0, seasonality),
        _ => None,
    };
    let halfwidth = if md_decay.is_some() {
        config.price_log_halfwidth.min(MD_POLISH_HALFWIDTH)
    } else {
        config.price_log_halfwidth
    };
    let mut u = DVector::zeros(dim * nn);
    let mut lo = DVector::from_element(dim * nn, f64::NEG_INFINITY);
    let mut hi = DVector::from_element(dim * nn, f64::INFINITY);
    let s_init = params.demand(i0, &p_init)?;
    for k in 0..nn {
        // De-seasoned time to go at the interval midpoint.
        let tau = (1.0 - 0.5 * (disc.sighat[k] + disc.sighat[k + 1])).max(1e-12);
        for i in 0..params.n {
            let x = match &md_decay {
                Some((p0, mu)) => p0[i].ln() + mu[i] * tau.ln(),
                None => p_init[i].ln(),
            };
            u[k * dim + i] = x;
            lo[k * dim + i] = x - halfwidth;
            hi[k * dim + i] = x + halfwidth;
            if let Problem::Replenishment = disc.problem {
                u[k * dim + params.n + i] = s_init[i].sqrt();
            }
        }
    }

    // Per-item penalty weights sized so the round-0 terminal drift stays
    // around 1% of each item's own stock; the multiplier nu does the
    // asymptotic enforcement so w never needs to grow ill-conditioningly
    // large. The drift per item is roughly |terminal multiplier_i| / (2 w_i):
    // the multiplier is price-scaled for markdown and exactly -c for
    // replenishment.
    //
    // Replenishment starts nu at c outright: terminal stock is worth its
    // replacement cost, and with that credit in place a profit-stationary
    // cyclic path is already stationary for the round-0 objective, so the
    // solve polishes the equilibrium instead of drifting off the saddle
    // toward the unbounded cross-substitution rays.
    let mut nu = match disc.problem {
        Problem::Markdown => DVector::zeros(params.n),
        Problem::Replenishment => params.cost.clone(),
    };
    let first = disc.forward(&u, &nu, &DVector::zeros(params.n))?;
    let scale_i = i0.amax();
    let mut w = match config.penalty_w0 {
        Some(w0) => DVector::from_element(params.n, w0),
        None => match disc.problem {
            Problem::Markdown => DVector::from_element(
                params.n,
                first.quad.abs().max(1.0) / (scale_i * scale_i).max(1e-12),
            ),
            Problem::Replenishment => DVector::from_fn(params.n, |i, _| {
                let lam_scale = params.cost[i].max(1e-3 * p_init[i]).max(1e-9);
                lam_scale / (0.02 * i0[i])
            }),
        },
    };

    let mut iterations = 0usize;
    let mut gradient_check = None;
    let mut ascent_monotone = true;
    let mut prev_violation = f64::INFINITY;
    let target_abs = config.tol_constraint_rel * scale_i.max(1.0);
    // Per-item brackets on the nu -> terminal deviation map: the best
    // leftover-side and overshoot-side observations seen so far.
    let mut dev_pos: Vec<Option<(f64, f64)>> = vec![None; params.n];
    let mut dev_neg: Vec<Option<(f64, f64)>> = vec![None; params.n];
    let u_start = u.clone();

    for round in 0..config.penalty_rounds {
        // Loose tolerance early, full tolerance on the last round. Early
        // rounds are clamped to 1e-4 relative so they still resolve the
        // terminal deviation well enough for the multiplier updates.
        let exponent = ((config.penalty_rounds - 1 - round) as i32).min(4);
        let tol_round = (config.tol_rel * config.penalty_growth.powi(exponent)).min(1e-4);
        let mut fwd = disc.forward(&u, &nu, &w)?;
        let mut grad = disc.reverse(&u, &fwd, &nu, &w)?.0;
        if gradient_check.is_none() && config.check_gradient {
            gradient_check = Some(fd_gradient_check(&disc, &u, &nu, &w, &grad, config)?);
        }
        let mut history: VecDeque<(DVector<f64>, DVector<f64>)> = VecDeque::new();
        let mut round_converged = false;
        let mut round_iters = 0usize;
        let mut stalled = false;
        for _ in 0..config.max_iters {
            let pg = masked_gradient(&grad, &u, &lo, &hi);
            if pg.amax() <= tol_round * fwd.penalized.abs().max(1.0) {
                round_converged = true;
                break;
            }
            let mut dir = lbfgs_direction(&grad, &history);
            if dir.dot(&grad) <= 0.0 {
                // Stale curvature; fall back to steepest ascent.
                history.clear();
                dir = grad.clone();
            }
            let mut outcome = line_search(&disc, &u, &fwd, &grad, &dir, &lo, &hi, &nu, &w, config)?;
            if outcome.is_none() && !history.is_empty() {
                // Quasi-Newton direction unusable here; retry steepest.
                history.clear();
                dir = grad.clone();
                outcome = line_search(&disc, &u, &fwd, &grad, &dir, &lo, &hi, &nu, &w, config)?;
            }
            let Some(step) = outcome else {
                stalled = true;
                break;
            };
            round_iters += 1;
            if step.fwd.penalized < fwd.penalized {
                ascent_monotone = false;
            }
            let new_grad = disc.reverse(&step.u, &step.fwd, &nu, &w)?.0;
            if step.clipped {
                // The projection bent the step; curvature across the bend
                // would poison the quasi-Newton model.
                history.clear();
            } else {
                // y_f is the change in the gradient of -J.
                let s = &step.u - &u;
                let yf = &grad - &new_grad;
                let sy = s.dot(&yf);
                if sy > 1e-12 * s.norm() * yf.norm() {
                    if history.len() == LBFGS_MEMORY {
                        history.pop_front();
                    }
                    history.push_back((s, yf));
                }
            }
            u = step.u;
            fwd = step.fwd;
            grad = new_grad;
            iterations += 1;
        }
        let dev = fwd.states[disc.intervals].clone() - &disc.target;
        let violation = dev.amax();
        if config.trace {
            let pg = masked_gradient(&grad, &u, &lo, &hi);
            let (mut arg, mut best) = (0usize, -1.0f64);
            for i in 0..pg.len() {
                if pg[i].abs() > best {
                    best = pg[i].abs();
                    arg = i;
                }
            }
            let end = if round_converged {
                "tol"
            } else if stalled {
                "stall"
            } else {
                "cap"
            };
            let fmt_vec = |v: &DVector<f64>| {
                v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(",")
            };
            eprintln!(
                "round {round}: iters {round_iters} ({end}), J {:.6}, pen {:.6}, viol {:.3e}, \
                 pg {:.3e} at interval {} comp {}, |u-u0| {:.3e}, w [{}], nu [{}]",
                fwd.quad,
                fwd.penalized,
                violation,
                best,
                arg / disc.dim,
                arg % disc.dim,
                (&u - &u_start).amax(),
                fmt_vec(&w),
                fmt_vec(&nu),
            );
        }
        // Fully done: the final tolerance holds, not just this round's.
        let pg_full = masked_gradient(&grad, &u, &lo, &hi).amax();
        if round_converged
            && violation <= target_abs
            && pg_full <= config.tol_rel * fwd.penalized.abs().max(1.0)
        {
            break;
        }
        if round + 1 < config.penalty_rounds {
            // Multiplier update, skipped entirely once the boundary is met:
            // the nu -> deviation map is kinked (past the right multiplier
            // the subproblem overshoots into the demand floor, where the
            // deviation responds steeply), so gratuitous refinement risks
            // jumping the kink for accuracy nobody asked for.
            if violation > target_abs {
                let mut nu_next = nu.clone();
                for i in 0..params.n {
                    if dev[i] > 0.0 {
                        let cand = (nu[i], dev[i]);
                        dev_pos[i] = Some(match dev_pos[i] {
                            Some(prev) if prev.1 < cand.1 => prev,
                            _ => cand,
                        });
                    } else if dev[i] < 0.0 {
                        let cand = (nu[i], dev[i]);
                        dev_neg[i] = Some(match dev_neg[i] {
                            Some(prev) if prev.1 > cand.1 => prev,
                            _ => cand,
                        });
                    }
                    nu_next[i] = match (dev_pos[i], dev_neg[i]) {
                        // Regula falsi inside the sign-flip bracket; never
                        // extrapolates, so the kink cannot throw it.
                        (Some((np, dp)), Some((nn, dn))) => np + dp * (nn - np) / (dp - dn),
                        // One-sided history: the plain first-order step.
                        _ => nu[i] - 2.0 * w[i] * dev[i],
                    };
                }
                nu = nu_next;
            }
            // Stiffen the penalty only if the violation is neither shrinking
            // nor already near the target. Growing the weight once the
            // boundary is nearly met only makes the terminal intervals stiff
            // (their curvature scales with the weight) without buying
            // accuracy the multiplier cannot deliver; and a weight change
            // shifts the deviation map, so the brackets are stale.
            if violation > 0.25 * prev_violation && violation > 3.0 * target_abs {
                w *= config.penalty_growth;
                dev_pos = vec![None; params.n];
                dev_neg = vec![None; params.n];
            }
            prev_violation = violation;
        }
    }

    // Final evaluation at the solution: states, adjoints, and diagnostics.
    let fwd = disc.forward(&u, &nu, &w)?;
    let (grad, lambda) = disc.reverse(&u, &fwd, &nu, &w)?;
    let pg = masked_gradient(&grad, &u, &lo, &hi);
    let grad_norm = pg.amax();
    let constraint_violation = (fwd.states[nn].clone() - &disc.target).amax();
    let hit_price_bounds = (0..nn * dim).any(|i| {
        lo[i].is_finite() && (u[i] - lo[i] <= 1e-12 || hi[i] - u[i] <= 1e-12)
    });
    let converged = grad_norm <= config.tol_rel * fwd.penalized.abs().max(1.0)
        && constraint_violation <= target_abs;

    // Node values of the piecewise-constant controls: a converged control
    // approximates the continuum value at its interval's center, so interior
    // nodes take the log-mean of the two adjacent intervals (arithmetic mean
    // for rho^2), which cancels the half-interval sampling bias; the
    // endpoints only have one neighbor.
    let mut states = Vec::with_capacity(nn + 1);
    for k in 0..=nn {
        let (price, rho2) = if k == 0 || k == nn {
            let interval = k.min(nn - 1);
            let p = disc.control_price(&u, interval);
            let r = disc.control_rho(&u, interval);
            (p, r.component_mul(&r))
        } else {
            let pa = disc.control_price(&u, k - 1);
            let pb = disc.control_price(&u, k);
            let ra = disc.control_rho(&u, k - 1);
            let rb = disc.control_rho(&u, k);
            (
                DVector::from_fn(disc.n, |i, _| (pa[i] * pb[i]).sqrt()),
                DVector::from_fn(disc.n, |i, _| 0.5 * (ra[i] * ra[i] + rb[i] * rb[i])),
            )
        };
        let inv = fwd.states[k].map(|x| x.max(0.0));
        let s = params.demand(&disc.smooth_inventory(&fwd.states[k]).0, &price)?;
        states.push(StateSnapshot::assemble(
            params,
            disc.ts[k],
            inv,
            price,
            s,
            lambda[k].clone(),
            rho2,
        )?);
    }
    let trajectory = Trajectory {
        states,
        sigma: disc.sig.clone(),
        sigma_hat: disc.sighat.clone(),
        objective: fwd.quad,
    };
    Ok(SolverResult {
        trajectory,
        objective: fwd.quad,
        converged,
        iterations,
        grad_norm,
        constraint_violation,
        hit_price_bounds,
        gradient_check,
        ascent_monotone,
    })
}

/// Central-difference check of a seeded sample of gradient components.
fn fd_gradient_check(
    disc: &Discretization,
    u: &DVector<f64>,
    nu: &DVector<f64>,
    w: &DVector<f64>,
    grad: &DVector<f64>,
    config: &SolverConfig,
) -> Result<f64> {
    let dim = u.len();
    let n_check = config.gradient_check_components.min(dim).max(1);
    let indices: Vec<usize> = if n_check == dim {
        (0..dim).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        sample(&mut rng, dim, n_check).into_vec()
    };
    let scale = grad.amax().max(1e-9);
    let mut worst = 0.0f64;
    for idx in indices {
        let mut up = u.clone();
        let mut dn = u.clone();
        up[idx] += config.fd_step;
        dn[idx] -= config.fd_step;
        let fd = (disc.forward(&up, nu, w)?.penalized - disc.forward(&dn, nu, w)?.penalized)
            / (2.0 * config.fd_step);
        worst = worst.max((fd - grad[idx]).abs() / scale);
    }
    Ok(worst)
}

/// Maximize markdown revenue with terminal sell-out `I(T) = 0`.
pub fn solve_md(
    params: &ModelParams,
    i0: &DVector<f64>,
    seasonality: &Seasonality,
    config: &SolverConfig,
) -> Result<SolverResult> {
    solve(params, i0, seasonality, config, Problem::Markdown)
}

/// Maximize replenishment profit with the cyclical boundary `I(T) = I(0)`.
pub fn solve_cr(
    params: &ModelParams,
    i0: &DVector<f64>,
    seasonality: &Seasonality,
    config: &SolverConfig,
) -> Result<SolverResult> {
    solve(params, i0, seasonality, config, Problem::Replenishment)
}

/// Compare price and inventory paths over the first `1 - exclude_tail_frac`
/// of `a`'s horizon, interpolating `b` onto `a`'s grid when they differ.
pub fn compare_trajectories(
    a: &Trajectory,
    b: &Trajectory,
    exclude_tail_frac: f64,
) -> Result<TrajectoryComparison> {
    a.validate()?;
    b.validate()?;
    if a.n_items() != b.n_items() {
        return Err(Error::Dimension {
            what: "trajectory item count".to_string(),
            expected: format!("{}", a.n_items()),
            got: format!("{}", b.n_items()),
        });
    }
    if !(0.0..1.0).contains(&exclude_tail_frac) {
        return Err(Error::input(format!(
            "tail fraction must lie in [0,1), got {exclude_tail_frac}"
        )));
    }
    let n = a.n_items();
    let t_max = (1.0 - exclude_tail_frac) * a.horizon();
    let tb = b.times();
    let p_floor: f64 = a
        .states
        .iter()
        .map(|s| s.price.amax())
        .fold(0.0, f64::max)
        * 1e-9;
    let i_floor: f64 = a
        .states
        .iter()
        .map(|s| s.inventory.amax())
        .fold(0.0, f64::max)
        * 1e-9;
    let mut dev_p = 0.0f64;
    let mut dev_i = 0.0f64;
    for snap in a.states.iter().filter(|s| s.t <= t_max) {
        let (pb, ib) = interp_state(&tb, b, snap.t)?;
        for i in 0..n {
            dev_p = dev_p.max((snap.price[i] - pb[i]).abs() / snap.price[i].abs().max(p_floor));
            dev_i = dev_i.max((snap.inventory[i] - ib[i]).abs() / snap.inventory[i].abs().max(i_floor));
        }
    }
    let obj_rel_dev = (a.objective - b.objective).abs() / a.objective.abs().max(1e-12);
    Ok(TrajectoryComparison {
        sup_rel_dev_p: dev_p,
        sup_rel_dev_i: dev_i,
        obj_rel_dev,
    })
}

fn interp_state(tb: &[f64], b: &Trajectory, t: f64) -> Result<(DVector<f64>, DVector<f64>)> {
    let last = *tb.last().expect("validated trajectory is nonempty");
    if t <= tb[0] {
        return Ok((b.states[0].price.clone(), b.states[0].inventory.clone()));
    }
    if t >= last {
        let s = b.states.last().expect("nonempty");
        return Ok((s.price.clone(), s.inventory.clone()));
    }
    let j = match tb.binary_search_by(|x| x.partial_cmp(&t).expect("finite times")) {
        Ok(j) => return Ok((b.states[j].price.clone(), b.states[j].inventory.clone())),
        Err(j) => j,
    };
    let (t0, t1) = (tb[j - 1], tb[j]);
    let wgt = (t - t0) / (t1 - t0);
    let lerp = |x0: &DVector<f64>, x1: &DVector<f64>| x0 * (1.0 - wgt) + x1 * wgt;
    Ok((
        lerp(&b.states[j - 1].price, &b.states[j].price),
        lerp(&b.states[j - 1].inventory, &b.states[j].inventory),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closedform::{cr_multi, md_one_item};
    use crate::model::DemandKind;
    use approx::assert_relative_eq;

    fn quick_config(n_grid: usize) -> SolverConfig {
        SolverConfig {
            n_grid,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn one_item_markdown_tracks_closed_form() {
        let params = ModelParams::one_item(DemandKind::ConstantElasticity, 400.0, -2.0, 0.5, 0.0).unwrap();
        let seas = Seasonality::uniform(1.0).unwrap();
        let i0 = DVector::from_vec(vec![100.0]);
        let cfg = quick_config(400);
        let res = solve_md(&params, &i0, &seas, &cfg).unwrap();
        assert!(res.ascent_monotone);
        if let Some(gc) = res.gradient_check {
            assert!(gc <= 1e-5, "gradient mismatch {gc:e}");
        }
        let (_, closed) = md_one_item(-2.0, 0.5, 100.0, 400.0, &seas, 401).unwrap();
        let cmp = compare_trajectories(&closed, &res.trajectory, 0.05).unwrap();
        assert!(cmp.obj_rel_dev <= 5e-3, "objective dev {}", cmp.obj_rel_dev);
        assert!(cmp.sup_rel_dev_p <= 0.02, "price dev {}", cmp.sup_rel_dev_p);
        assert!(cmp.sup_rel_dev_i <= 0.02, "inventory dev {}", cmp.sup_rel_dev_i);
        assert!(res.constraint_violation <= 0.1, "I(T) = {}", res.constraint_violation);
        // The recovered adjoint is nonpositive through the interior and
        // tracks the closed-form lambda = C p.
        let cf = md_one_item(-2.0, 0.5, 100.0, 400.0, &seas, 401).unwrap().0;
        for k in (20..=380).step_by(40) {
            let s = &res.trajectory.states[k];
            assert!(s.lambda[0] <= 0.0, "lambda sign at t={}", s.t);
            let expect = cf.adjoint_coeff[0] * closed.states[k].price[0];
            assert_relative_eq!(s.lambda[0], expect, max_relative = 0.03);
        }
    }

    #[test]
    fn two_item_markdown_tracks_closed_form() {
        // Two items with cross-price elasticity, no seasonality: the closed
        // form solves its own horizon T, and the numeric stage runs the
        // normalized instance (demand scaled by T, uniform density on [0, T])
        // which has the same objective and the same price and stock paths.
        let params = ModelParams::new(
            DemandKind::ConstantElasticity,
            DVector::from_vec(vec![1.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[-2.0, 0.25, 0.25, -1.5]),
            DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.3]),
            DVector::zeros(2),
        )
        .unwrap();
        let i0 = DVector::from_vec(vec![200.0, 300.0]);
        let (cf, closed) = md_multi(
            &params,
            &MdBoundary::InitialInventory(i0.clone()),
            None,
            401,
        )
        .unwrap();
        let t = cf.horizon;
        let params_eff = ModelParams::new(
            params.kind,
            &params.s0 * t,
            params.gamma.clone(),
            params.alpha.clone(),
            params.cost.clone(),
        )
        .unwrap();
        let seas = Seasonality::uniform(t).unwrap();
        let cfg = quick_config(400);
        let res = solve_md(&params_eff, &i0, &seas, &cfg).unwrap();
        assert!(
            res.converged,
            "grad {:e} cviol {:e} after {} iterations",
            res.grad_norm, res.constraint_violation, res.iterations
        );
        if let Some(gc) = res.gradient_check {
            assert!(gc <= 1e-5, "gradient mismatch {gc:e}");
        }
        let cmp = compare_trajectories(&closed, &res.trajectory, 0.05).unwrap();
        assert!(cmp.obj_rel_dev <= 5e-3, "objective dev {}", cmp.obj_rel_dev);
        assert!(cmp.sup_rel_dev_p <= 0.02, "price dev {}", cmp.sup_rel_dev_p);
        assert!(cmp.sup_rel_dev_i <= 0.02, "inventory dev {}", cmp.sup_rel_dev_i);
    }

    #[test]
    fn exponential_demand_markdown_solves() {
        let params = ModelParams::one_item(DemandKind::Exponential, 400.0, -0.5, 0.5, 0.0).unwrap();
        let seas = Seasonality::uniform(1.0).unwrap();
        let i0 = DVector::from_vec(vec![100.0]);
        let cfg = quick_config(200);
        let res = solve_md(&params, &i0, &seas, &cfg).unwrap();
        assert!(res.converged, "grad {:e} cviol {:e}", res.grad_norm, res.constraint_violation);
        if let Some(gc) = res.gradient_check {
            assert!(gc <= 1e-5, "gradient mismatch {gc:e}");
        }
        assert!(!res.hit_price_bounds);
        // All stock moves: the terminal boundary binds.
        assert!(res.constraint_violation <= 0.1);
    }

    #[test]
    fn one_item_replenishment_finds_stationary_price() {
        let params = ModelParams::one_item(DemandKind::ConstantElasticity, 100.0, -2.0, 0.0, 1.0).unwrap();
        let seas = Seasonality::uniform(1.0).unwrap();
        let i0 = DVector::from_vec(vec![50.0]);
        let cfg = quick_config(100);
        let res = solve_cr(&params, &i0, &seas, &cfg).unwrap();
        assert!(!res.hit_price_bounds);
        // Interior prices settle on the stationary markup price 2.
        let mid = &res.trajectory.states[50];
        assert_relative_eq!(mid.price[0], 2.0, max_relative = 5e-3);
        // rho^2 covers demand at the equilibrium.
        assert_relative_eq!(mid.rho2[0], mid.demand[0], max_relative = 2e-2);
        assert!(res.constraint_violation <= 0.05 * 50.0);
    }

    #[test]
    fn weak_elasticity_replenishment_runs_away() {
        let params = ModelParams::one_item(DemandKind::ConstantElasticity, 100.0, -0.5, 0.0, 1.0).unwrap();
        let seas = Seasonality::uniform(1.0).unwrap();
        let i0 = DVector::from_vec(vec![50.0]);
        let mut cfg = quick_config(50);
        cfg.max_iters = 600;
        cfg.price_log_halfwidth = 3.0;
        let res = solve_cr(&params, &i0, &seas, &cfg).unwrap();
        assert!(
            res.hit_price_bounds || !res.converged,
            "no interior equilibrium exists for gamma = -0.5"
        );
    }

    #[test]
    fn two_item_replenishment_matches_equilibrium() {
        let params = ModelParams::new(
            DemandKind::ConstantElasticity,
            DVector::from_vec(vec![1.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[-2.0, 0.25, 0.25, -1.5]),
            DMatrix::from_row_slice(2, 2, &[1.0, -2.0, -0.5, 1.0]),
            DVector::from_vec(vec![1.0, 1.0]),
        )
        .unwrap();
        // A large stock scale separates the inventory and demand time scales;
        // at small scales the finite-horizon optimum wobbles around the
        // constant path by O(S T / I) (defer replenishment, harvest the
        // cross-item substitution, top back up at the end).
        let eq = cr_multi(&params, 1000.0).unwrap();
        let seas = Seasonality::uniform(1.0).unwrap();
        let cfg = quick_config(60);
        let res = solve_cr(&params, &eq.inventory, &seas, &cfg).unwrap();
        assert!(!res.hit_price_bounds);
        let expected_profit = eq.profit_rate.sum();
        assert_relative_eq!(res.objective, expected_profit, max_relative = 5e-3);
        let mid = &res.trajectory.states[30];
        for i in 0..2 {
            assert_relative_eq!(mid.price[i], eq.price[i], max_relative = 5e-3);
        }
    }

    #[test]
    fn deterministic_across_runs() {
        let params = ModelParams::one_item(DemandKind::ConstantElasticity, 400.0, -2.0, 0.5, 0.0).unwrap();
        let seas = Seasonality::uniform(1.0).unwrap();
        let i0 = DVector::from_vec(vec![100.0]);
        let mut cfg = quick_config(50);
        cfg.max_iters = 200;
        cfg.penalty_rounds = 2;
        let a = solve_md(&params, &i0, &seas, &cfg).unwrap();
        let b = solve_md(&params, &i0, &seas, &cfg).unwrap();
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        assert_eq!(a.iterations, b.iterations);
        for (sa, sb) in a.trajectory.states.iter().zip(&b.trajectory.states) {
            assert_eq!(sa.price[0].to_bits(), sb.price[0].to_bits());
            assert_eq!(sa.inventory[0].to_bits(), sb.inventory[0].to_bits());
        }
    }

    #[test]
    fn comparison_scales_and_errors() {
        let params = ModelParams::one_item(DemandKind::ConstantElasticity, 400.0, -2.0, 0.0, 0.0).unwrap();
        let seas = Seasonality::uniform(1.0).unwrap();
        let (_, traj) = md_one_item(-2.0, 0.0, 100.0, 400.0, &seas, 21).unwrap();
        let same = compare_trajectories(&traj, &traj, 0.0).unwrap();
        assert_eq!(same.sup_rel_dev_p, 0.0);
        assert_eq!(same.sup_rel_dev_i, 0.0);
        assert_eq!(same.obj_rel_dev, 0.0);
        let mut scaled = traj.clone();
        for s in &mut scaled.states {
            s.price *= 1.01;
        }
        let cmp = compare_trajectories(&traj, &scaled, 0.0).unwrap();
        assert_relative_eq!(cmp.sup_rel_dev_p, 0.01, max_relative = 1e-10);
        let _ = params;
    }

    #[test]
    fn config_validation() {
        let mut cfg = SolverConfig::default();
        cfg.n_grid = 5;
        assert!(cfg.validate().is_err());
        let mut cfg = SolverConfig::default();
        cfg.penalty_growth = 1.0;
        assert!(cfg.validate().is_err());
        let round_trip: SolverConfig =
            serde_json::from_str(&serde_json::to_string(&SolverConfig::default()).unwrap()).unwrap();
        assert_eq!(round_trip.n_grid, 400);
        // Partial configs fill in defaults.
        let partial: SolverConfig = serde_json::from_str(r#"{"n_grid": 50}"#).unwrap();
        assert_eq!(partial.n_grid, 50);
        assert_eq!(partial.penalty_rounds, 8);
    }
}
