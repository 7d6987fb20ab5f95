//! The two blocks of the alternating optimization: bandwidth/power
//! allocation at fixed UAV positions ([`solve_p5`]) and successive convex
//! approximation of the UAV positions at fixed resources ([`solve_p7`]).

mod coupled;
mod placement;
mod resource;
mod sca;

pub use coupled::{solve_coupled, CoupledOutcome, CoupledProgram};
pub use placement::{solve_p7, PlacementOutcome, PlacementProgram};
pub use resource::{solve_p5, ResourceOutcome, ResourceProgram};
pub use sca::{
    lower_bound_rates, sca_coefficients, LowerBoundRates,
    SCACoefficients, TaylorCoefficients,
};

use crate::channel::{perspective_rate, shannon, LinkBudget};
use crate::error::{Error, Result};
use crate::scenario::{Scenario, UavPlacement};
use crate::utility::UtilityParams;

/// Slack allowed on every feasibility check of a [`DecisionState`].
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// How the observation UAV reaches the GBS.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    /// Observation UAV -> relay UAV -> GBS.
    Relay,
    /// Observation UAV -> GBS over one free-space link; the relay UAV
    /// and its power are unused.
    Direct,
}

/// Bandwidth shares and transmit powers.
#[derive(Debug, Clone, PartialEq)]
pub struct Resources {
    pub x: Vec<f64>,
    pub p_user: Vec<f64>,
    pub p_obs: f64,
    pub p_relay: f64,
}

/// Every optimization variable of the joint problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionState {
    pub x: Vec<f64>,
    pub p_user: Vec<f64>,
    pub p_obs: f64,
    pub p_relay: f64,
    pub placement: UavPlacement,
    /// Effective per-user rates `R_u (1 - rho)` actually scheduled.
    pub r_tilde: Vec<f64>,
}

impl DecisionState {
    pub fn resources(&self) -> Resources {
        Resources {
            x: self.x.clone(),
            p_user: self.p_user.clone(),
            p_obs: self.p_obs,
            p_relay: self.p_relay,
        }
    }

    pub fn from_parts(resources: Resources, placement: UavPlacement, r_tilde: Vec<f64>) -> Self {
        Self {
            x: resources.x,
            p_user: resources.p_user,
            p_obs: resources.p_obs,
            p_relay: resources.p_relay,
            placement,
            r_tilde,
        }
    }
}

/// Exact achievable rates of every link for a given state.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactRates {
    /// Outage-constrained AGU rates `R_u` (before the `1 - rho` factor).
    pub agu: Vec<f64>,
    /// Observation -> relay (or -> GBS for [`Topology::Direct`]).
    pub relay: f64,
    /// Relay -> GBS; `+inf` for [`Topology::Direct`].
    pub gbs: f64,
}

impl ExactRates {
    /// Capacity shared by all AGU streams after the first hop.
    pub fn backhaul(&self) -> f64 {
        self.relay.min(self.gbs)
    }
}

/// A scenario together with the quantities every subproblem needs:
/// `mu0`, `F^-1(rho)`, the utility parameters and the topology.
#[derive(Debug, Clone)]
pub struct Model<'a> {
    pub scenario: &'a Scenario,
    pub budget: LinkBudget,
    pub utility: UtilityParams,
    pub topology: Topology,
}

impl<'a> Model<'a> {
    /// Computes `F^-1(rho)` by bisection once for this scenario.
    pub fn new(scenario: &'a Scenario, topology: Topology) -> Result<Self> {
        let budget = LinkBudget::from_config(&scenario.config)?;
        Ok(Self::with_budget(scenario, topology, budget))
    }

    pub fn with_budget(scenario: &'a Scenario, topology: Topology, budget: LinkBudget) -> Self {
        Self { scenario, budget, utility: UtilityParams::from_config(&scenario.config), topology }
    }

    pub fn num_users(&self) -> usize {
        self.scenario.num_users()
    }

    pub fn rho(&self) -> f64 {
        self.scenario.config.outage_target
    }

    /// Resources with every power at its budget.
    pub fn max_power_resources(&self, x: Vec<f64>) -> Resources {
        let c = &self.scenario.config;
        Resources {
            p_user: vec![c.p_max_user; x.len()],
            x,
            p_obs: c.p_max_obs,
            p_relay: match self.topology {
                Topology::Relay => c.p_max_relay,
                Topology::Direct => 0.0,
            },
        }
    }

    /// `F^-1(rho) mu0 / d_uo^2`: AGU SNR per watt at full bandwidth.
    pub(crate) fn agu_gain(&self, placement: &UavPlacement, user: usize) -> f64 {
        self.budget.inv_cdf_at_rho * self.budget.mu0 / self.scenario.d_uo_sq(placement.q_obs, user)
    }

    /// `mu0 / d^2` for the first backhaul hop.
    pub(crate) fn first_hop_gain(&self, placement: &UavPlacement) -> f64 {
        let d_sq = match self.topology {
            Topology::Relay => self.scenario.d_or_sq(placement),
            Topology::Direct => self.scenario.d_ob_sq(placement.q_obs),
        };
        self.budget.mu0 / d_sq
    }

    /// `mu0 / d_rb^2`.
    pub(crate) fn gbs_gain(&self, placement: &UavPlacement) -> f64 {
        self.budget.mu0 / self.scenario.d_rb_sq(placement.q_relay)
    }

    pub fn exact_rates(&self, resources: &Resources, placement: &UavPlacement) -> ExactRates {
        let agu = (0..self.num_users())
            .map(|u| perspective_rate(resources.x[u], self.agu_gain(placement, u), resources.p_user[u]))
            .collect();
        let relay = shannon(resources.p_obs * self.first_hop_gain(placement));
        let gbs = match self.topology {
            Topology::Relay => shannon(resources.p_relay * self.gbs_gain(placement)),
            Topology::Direct => f64::INFINITY,
        };
        ExactRates { agu, relay, gbs }
    }

    /// Best effective rates for fixed resources and placement: maximizes
    /// the utility subject to `r_u <= (1 - rho) R_u` and
    /// `sum r <= backhaul`, which is a water-filling problem.
    pub fn best_rates(&self, resources: &Resources, placement: &UavPlacement) -> Vec<f64> {
        let rates = self.exact_rates(resources, placement);
        let keep = 1.0 - self.rho();
        let caps: Vec<f64> = rates.agu.iter().map(|r| keep * r).collect();
        water_fill(&caps, rates.backhaul())
    }

    /// Average utility of a vector of effective rates.
    pub fn utility_of(&self, r_tilde: &[f64]) -> Result<f64> {
        crate::utility::average_utility(r_tilde, &self.utility)
    }

    /// Objective of the original (non-approximated) problem at the given
    /// resources and placement.
    pub fn exact_objective(&self, resources: &Resources, placement: &UavPlacement) -> Result<f64> {
        self.utility_of(&self.best_rates(resources, placement))
    }

    /// Checks every constraint of the joint problem on `state`.
    pub fn check_feasible(&self, state: &DecisionState) -> Result<()> {
        let c = &self.scenario.config;
        let n = self.num_users();
        let fail = |what: String| Err(Error::Infeasible(what));
        if state.x.len() != n || state.p_user.len() != n || state.r_tilde.len() != n {
            return fail("state vectors do not match the number of users".into());
        }
        let tol = FEASIBILITY_TOL;
        if state.x.iter().any(|x| *x < -tol) || state.x.iter().sum::<f64>() > 1.0 + tol {
            return fail(format!("bandwidth shares {:?} violate x >= 0, sum x <= 1", state.x));
        }
        if state.p_user.iter().any(|p| *p < -tol || *p > c.p_max_user + tol)
            || state.p_obs < -tol
            || state.p_obs > c.p_max_obs + tol
            || state.p_relay < -tol
            || state.p_relay > c.p_max_relay + tol
        {
            return fail("transmit power outside its budget".into());
        }
        if !state.placement.is_finite() {
            return fail("non-finite UAV placement".into());
        }
        let rates = self.exact_rates(&state.resources(), &state.placement);
        let keep = 1.0 - self.rho();
        for (u, (r, cap)) in state.r_tilde.iter().zip(&rates.agu).enumerate() {
            if *r < -tol || *r > keep * cap + tol {
                return fail(format!("user {u}: effective rate {r} exceeds {}", keep * cap));
            }
        }
        let total: f64 = state.r_tilde.iter().sum();
        if total > rates.relay + tol || total > rates.gbs + tol {
            return fail(format!(
                "sum rate {total} exceeds backhaul ({}, {})",
                rates.relay, rates.gbs
            ));
        }
        Ok(())
    }
}

/// Maximizes `sum ln r_u` subject to `0 <= r_u <= caps_u`, `sum r <= total`:
/// `r_u = min(caps_u, level)` with the level chosen to exhaust `total`.
pub fn water_fill(caps: &[f64], total: f64) -> Vec<f64> {
    let cap_sum: f64 = caps.iter().sum();
    if cap_sum <= total {
        return caps.to_vec();
    }
    let mut order: Vec<usize> = (0..caps.len()).collect();
    order.sort_by(|&a, &b| caps[a].total_cmp(&caps[b]));
    let mut out = vec![0.0; caps.len()];
    let mut remaining = total.max(0.0);
    for (k, &idx) in order.iter().enumerate() {
        let level = remaining / (caps.len() - k) as f64;
        if caps[idx] <= level {
            out[idx] = caps[idx];
            remaining -= caps[idx];
        } else {
            for &rest in &order[k..] {
                out[rest] = level;
            }
            break;
        }
    }
    out
}
