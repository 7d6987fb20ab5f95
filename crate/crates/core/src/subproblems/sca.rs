//! First-order lower bounds used by the placement subproblem.
//!
//! Each rate has the form `log2(1 + mu / (h^2 + s))` with `s` the squared
//! horizontal distance. It is convex in `s`, so its tangent at the
//! expansion point `s_ref`,
//!
//! ```text
//! C - D (s - s_ref),  C = log2(1 + mu / (h^2 + s_ref)),
//!                     D = mu log2(e) / ((h^2 + s_ref) (h^2 + s_ref + mu)),
//! ```
//!
//! is a global lower bound that is tight at `s_ref`. Since `s` is a convex
//! quadratic of the positions, the bound is concave in the positions.

use std::f64::consts::LOG2_E;

use super::{Model, Resources, Topology};
use crate::channel::shannon;
use crate::scenario::{dist_sq, UavPlacement};

/// Tangent `C - D (s - s_ref)` of one rate in the squared horizontal
/// distance `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaylorCoefficients {
    pub c: f64,
    pub d: f64,
    pub s_ref: f64,
}

impl TaylorCoefficients {
    /// Expands `log2(1 + mu / (h_sq + s))` at `s = s_ref`.
    pub fn expand(mu: f64, h_sq: f64, s_ref: f64) -> Self {
        if !(mu > 0.0) {
            return Self { c: 0.0, d: 0.0, s_ref };
        }
        let base = h_sq + s_ref;
        Self { c: shannon(mu / base), d: mu * LOG2_E / (base * (base + mu)), s_ref }
    }

    /// Lower bound on the rate at squared horizontal distance `s`.
    #[inline]
    pub fn bound(&self, s: f64) -> f64 {
        self.c - self.d * (s - self.s_ref)
    }
}

/// Coefficients of every rate bound, all expanded at `expansion`.
#[derive(Debug, Clone, PartialEq)]
pub struct SCACoefficients {
    /// Per-user bounds on `log2(1 + F^-1 P mu0 / (x d_uo^2))`; the AGU rate
    /// bound is `x_u` times this.
    pub users: Vec<TaylorCoefficients>,
    /// First backhaul hop: observation -> relay, or observation -> GBS
    /// without a relay.
    pub relay: TaylorCoefficients,
    /// Relay -> GBS; `None` without a relay.
    pub gbs: Option<TaylorCoefficients>,
    pub expansion: UavPlacement,
}

/// Lower-bound rates at some placement.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundRates {
    /// AGU rate bounds (before the `1 - rho` factor).
    pub agu: Vec<f64>,
    pub relay: f64,
    /// `+inf` without a relay.
    pub gbs: f64,
}

/// Expands every rate at `expansion` for fixed `resources`.
pub fn sca_coefficients(
    model: &Model<'_>,
    resources: &Resources,
    expansion: &UavPlacement,
) -> SCACoefficients {
    let s = model.scenario;
    let c = &s.config;
    let quantile_mu0 = model.budget.inv_cdf_at_rho * model.budget.mu0;
    let users = (0..model.num_users())
        .map(|u| {
            let x = resources.x[u];
            let mu = if x > 0.0 { quantile_mu0 * resources.p_user[u] / x } else { 0.0 };
            TaylorCoefficients::expand(mu, c.height_obs * c.height_obs, dist_sq(expansion.q_obs, s.agu_pos[u]))
        })
        .collect();
    let mu0 = model.budget.mu0;
    let (relay, gbs) = match model.topology {
        Topology::Relay => {
            let dh = c.height_relay - c.height_obs;
            let db = c.height_gbs - c.height_relay;
            (
                TaylorCoefficients::expand(
                    mu0 * resources.p_obs,
                    dh * dh,
                    dist_sq(expansion.q_obs, expansion.q_relay),
                ),
                Some(TaylorCoefficients::expand(
                    mu0 * resources.p_relay,
                    db * db,
                    dist_sq(expansion.q_relay, s.gbs_pos),
                )),
            )
        }
        Topology::Direct => {
            let dh = c.height_gbs - c.height_obs;
            (
                TaylorCoefficients::expand(
                    mu0 * resources.p_obs,
                    dh * dh,
                    dist_sq(expansion.q_obs, s.gbs_pos),
                ),
                None,
            )
        }
    };
    SCACoefficients { users, relay, gbs, expansion: *expansion }
}

/// Evaluates the lower-bound rates of `coeffs` at `placement`.
pub fn lower_bound_rates(
    model: &Model<'_>,
    coeffs: &SCACoefficients,
    resources: &Resources,
    placement: &UavPlacement,
) -> LowerBoundRates {
    let s = model.scenario;
    let agu = coeffs
        .users
        .iter()
        .enumerate()
        .map(|(u, t)| resources.x[u] * t.bound(dist_sq(placement.q_obs, s.agu_pos[u])))
        .collect();
    let (relay, gbs) = match coeffs.gbs {
        Some(g) => (
            coeffs.relay.bound(dist_sq(placement.q_obs, placement.q_relay)),
            g.bound(dist_sq(placement.q_relay, s.gbs_pos)),
        ),
        None => (coeffs.relay.bound(dist_sq(placement.q_obs, s.gbs_pos)), f64::INFINITY),
    };
    LowerBoundRates { agu, relay, gbs }
}
