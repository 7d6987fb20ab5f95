//! Bandwidth and power allocation at fixed UAV positions.
//!
//! Variables: `[x_0..x_U, p_0..p_U, r_0..r_U, p_obs, (p_relay)]`, where
//! `r_u` is the effective rate of user `u`. The AGU rate constraint is
//! written in perspective form `r_u <= (1 - rho) x log2(1 + c p / x)`, which
//! is jointly concave in `(x, p)`, so the whole program is concave.

use std::f64::consts::LN_2;

use super::{DecisionState, Model, Resources, Topology};
use crate::channel::{perspective_rate, shannon};
use crate::convex::{solve_concave, ConcaveProgram, HessianSink, SolveReport, SolveStatus};
use crate::error::{Error, Result};
use crate::scenario::UavPlacement;

/// Newton-step budget per barrier stage.
const MAX_NEWTON: usize = 200;
/// Bandwidth shares of the starting point are kept at least this large.
const MIN_START_SHARE: f64 = 1e-6;
/// Effective rates start at this fraction of the best feasible rates.
const START_RATE_FRACTION: f64 = 0.99;

/// The resource-allocation subproblem as a [`ConcaveProgram`].
#[derive(Debug, Clone)]
pub struct ResourceProgram {
    users: usize,
    topology: Topology,
    keep: f64,
    theta_over_u: f64,
    log_scale: f64,
    /// `F^-1(rho) mu0 / d_uo^2` per user.
    agu_gain: Vec<f64>,
    first_hop_gain: f64,
    gbs_gain: f64,
    p_max_user: f64,
    p_max_obs: f64,
    p_max_relay: f64,
}

impl ResourceProgram {
    pub fn new(model: &Model<'_>, placement: &UavPlacement) -> Self {
        let users = model.num_users();
        let c = &model.scenario.config;
        Self {
            users,
            topology: model.topology,
            keep: 1.0 - model.rho(),
            theta_over_u: model.utility.theta / users as f64,
            log_scale: (model.utility.beta / model.utility.rbar).ln(),
            agu_gain: (0..users).map(|u| model.agu_gain(placement, u)).collect(),
            first_hop_gain: model.first_hop_gain(placement),
            gbs_gain: match model.topology {
                Topology::Relay => model.gbs_gain(placement),
                Topology::Direct => 0.0,
            },
            p_max_user: c.p_max_user,
            p_max_obs: c.p_max_obs,
            p_max_relay: c.p_max_relay,
        }
    }

    fn x(&self, u: usize) -> usize {
        u
    }
    fn p(&self, u: usize) -> usize {
        self.users + u
    }
    fn r(&self, u: usize) -> usize {
        2 * self.users + u
    }
    fn p_obs(&self) -> usize {
        3 * self.users
    }
    fn p_relay(&self) -> usize {
        3 * self.users + 1
    }

    /// Packs resources and effective rates into a variable vector.
    pub fn pack(&self, resources: &Resources, r_tilde: &[f64]) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend_from_slice(&resources.x);
        v.extend_from_slice(&resources.p_user);
        v.extend_from_slice(r_tilde);
        v.push(resources.p_obs);
        if self.topology == Topology::Relay {
            v.push(resources.p_relay);
        }
        v
    }

    /// Splits a variable vector into resources and effective rates.
    pub fn unpack(&self, v: &[f64]) -> (Resources, Vec<f64>) {
        let u = self.users;
        let resources = Resources {
            x: v[..u].to_vec(),
            p_user: v[u..2 * u].to_vec(),
            p_obs: v[self.p_obs()],
            p_relay: match self.topology {
                Topology::Relay => v[self.p_relay()],
                Topology::Direct => 0.0,
            },
        };
        (resources, v[2 * u..3 * u].to_vec())
    }

    fn rate_sum(&self, v: &[f64]) -> f64 {
        v[2 * self.users..3 * self.users].iter().sum()
    }
}

/// Gradient `(d/dx, d/dp)` and Hessian scale of `x log2(1 + c p / x)`.
struct Perspective {
    dx: f64,
    dp: f64,
    /// `s = c p / x`; the Hessian is
    /// `-1 / (x (1 + s)^2 ln 2) [[s^2, -c s], [-c s, c^2]]`.
    s: f64,
}

fn perspective(x: f64, c: f64, p: f64) -> Perspective {
    let s = c * p / x;
    Perspective {
        dx: (s.ln_1p() - s / (1.0 + s)) / LN_2,
        dp: c / (1.0 + s) / LN_2,
        s,
    }
}

impl ConcaveProgram for ResourceProgram {
    fn dim(&self) -> usize {
        match self.topology {
            Topology::Relay => 3 * self.users + 2,
            Topology::Direct => 3 * self.users + 1,
        }
    }

    fn num_constraints(&self) -> usize {
        match self.topology {
            Topology::Relay => self.users + 3,
            Topology::Direct => self.users + 2,
        }
    }

    fn lower(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }

    fn upper(&self) -> Vec<f64> {
        let mut hi = vec![1.0; self.users];
        hi.extend(std::iter::repeat(self.p_max_user).take(self.users));
        hi.extend(std::iter::repeat(f64::INFINITY).take(self.users));
        hi.push(self.p_max_obs);
        if self.topology == Topology::Relay {
            hi.push(self.p_max_relay);
        }
        hi
    }

    fn objective(&self, v: &[f64]) -> f64 {
        (0..self.users).map(|u| self.log_scale + v[self.r(u)].ln()).sum::<f64>() * self.theta_over_u
    }

    fn objective_grad(&self, v: &[f64], grad: &mut [f64]) {
        for u in 0..self.users {
            grad[self.r(u)] = self.theta_over_u / v[self.r(u)];
        }
    }

    fn constraint(&self, j: usize, v: &[f64]) -> f64 {
        let u = self.users;
        if j < u {
            self.keep * perspective_rate(v[self.x(j)], self.agu_gain[j], v[self.p(j)]) - v[self.r(j)]
        } else if j == u {
            1.0 - v[..u].iter().sum::<f64>()
        } else if j == u + 1 {
            shannon(self.first_hop_gain * v[self.p_obs()]) - self.rate_sum(v)
        } else {
            shannon(self.gbs_gain * v[self.p_relay()]) - self.rate_sum(v)
        }
    }

    fn constraint_grad(&self, j: usize, v: &[f64], grad: &mut [f64]) {
        let u = self.users;
        if j < u {
            let f = perspective(v[self.x(j)], self.agu_gain[j], v[self.p(j)]);
            grad[self.x(j)] = self.keep * f.dx;
            grad[self.p(j)] = self.keep * f.dp;
            grad[self.r(j)] = -1.0;
            return;
        }
        if j == u {
            grad[..u].iter_mut().for_each(|g| *g = -1.0);
            return;
        }
        let (gain, idx) = if j == u + 1 {
            (self.first_hop_gain, self.p_obs())
        } else {
            (self.gbs_gain, self.p_relay())
        };
        grad[idx] = gain / (1.0 + gain * v[idx]) / LN_2;
        grad[2 * u..3 * u].iter_mut().for_each(|g| *g = -1.0);
    }

    fn has_hessian(&self) -> bool {
        true
    }

    fn add_objective_hessian(&self, v: &[f64], scale: f64, add: &mut HessianSink) {
        for u in 0..self.users {
            let r = v[self.r(u)];
            add(self.r(u), self.r(u), -scale * self.theta_over_u / (r * r));
        }
    }

    fn add_constraint_hessian(&self, j: usize, v: &[f64], scale: f64, add: &mut HessianSink) {
        let u = self.users;
        if j < u {
            let (ix, ip) = (self.x(j), self.p(j));
            let x = v[ix];
            let c = self.agu_gain[j];
            let f = perspective(x, c, v[ip]);
            let k = -scale * self.keep / (x * (1.0 + f.s).powi(2) * LN_2);
            add(ix, ix, k * f.s * f.s);
            add(ix, ip, -k * c * f.s);
            add(ip, ix, -k * c * f.s);
            add(ip, ip, k * c * c);
        } else if j > u {
            let (gain, idx) = if j == u + 1 {
                (self.first_hop_gain, self.p_obs())
            } else {
                (self.gbs_gain, self.p_relay())
            };
            let denom = 1.0 + gain * v[idx];
            add(idx, idx, -scale * gain * gain / (denom * denom * LN_2));
        }
    }
}

/// Result of [`solve_p5`].
#[derive(Debug, Clone)]
pub struct ResourceOutcome {
    /// New state: solver bandwidth shares, powers at their budgets and the
    /// best effective rates for them.
    pub state: DecisionState,
    /// Exact average utility of `state`.
    pub objective: f64,
    /// Raw interior-point output (powers before snapping to the budget).
    pub report: SolveReport,
    /// The solver did not improve on the starting point, which was kept.
    pub kept_start: bool,
}

/// Strictly feasible starting vector derived from `start`.
fn starting_point(model: &Model<'_>, program: &ResourceProgram, start: &Resources, placement: &UavPlacement) -> Vec<f64> {
    let users = model.num_users();
    let mut x: Vec<f64> = start.x.iter().map(|v| v.clamp(MIN_START_SHARE, 1.0)).collect();
    let total: f64 = x.iter().sum();
    let cap = 1.0 - MIN_START_SHARE * users as f64;
    if total > cap {
        x.iter_mut().for_each(|v| *v *= cap / total);
    }
    let c = &model.scenario.config;
    let inside = |p: f64, max: f64| p.clamp(1e-3 * max, max);
    let resources = Resources {
        x,
        p_user: start.p_user.iter().map(|p| inside(*p, c.p_max_user)).collect(),
        p_obs: inside(start.p_obs, c.p_max_obs),
        p_relay: match model.topology {
            Topology::Relay => inside(start.p_relay, c.p_max_relay),
            Topology::Direct => 0.0,
        },
    };
    let r: Vec<f64> =
        model.best_rates(&resources, placement).iter().map(|r| START_RATE_FRACTION * r).collect();
    program.pack(&resources, &r)
}

/// Solves the resource subproblem at `placement`, warm-started from
/// `start`.
///
/// Every rate is non-decreasing in its transmit power and in its bandwidth
/// share, so the powers of the returned state sit exactly at their budgets
/// and any unused bandwidth (possible when the backhaul is the bottleneck)
/// is handed out in proportion to the solver's shares. The effective rates
/// are the best ones for the returned resources.
///
/// When the backhaul is the bottleneck the objective is flat over a whole
/// set of bandwidth splits and the solver returns an arbitrary member of
/// it. To keep the alternating optimization from being steered by that
/// choice, the starting shares (with full powers) are kept unless the
/// solver improves on them by more than `tol`.
pub fn solve_p5(
    model: &Model<'_>,
    placement: &UavPlacement,
    start: &DecisionState,
    tol: f64,
) -> Result<ResourceOutcome> {
    let program = ResourceProgram::new(model, placement);
    let v0 = starting_point(model, &program, &start.resources(), placement);
    let report = solve_concave(&program, Some(&v0), tol, MAX_NEWTON)?;
    if report.status == SolveStatus::Infeasible {
        return Err(Error::Infeasible("resource allocation has no interior point".into()));
    }
    let (solved, _) = program.unpack(&report.solution);
    let share_sum: f64 = solved.x.iter().sum();
    let resources = model.max_power_resources(solved.x.iter().map(|x| x / share_sum).collect());
    let rates = model.best_rates(&resources, placement);
    let objective = model.utility_of(&rates)?;

    let start_resources = model.max_power_resources(start.x.clone());
    let start_rates = model.best_rates(&start_resources, placement);
    let start_objective = model.utility_of(&start_rates).unwrap_or(f64::NEG_INFINITY);
    if objective <= start_objective + tol {
        return Ok(ResourceOutcome {
            state: DecisionState::from_parts(start_resources, *placement, start_rates),
            objective: start_objective,
            report,
            kept_start: true,
        });
    }
    Ok(ResourceOutcome {
        state: DecisionState::from_parts(resources, *placement, rates),
        objective,
        report,
        kept_start: false,
    })
}
