//! Placement step that moves the bandwidth shares together with the UAVs.
//!
//! With `y = 1 / d_uo^2`, the AGU rate `x log2(1 + k y / x)` (with
//! `k = F^-1(rho) P mu0`) is the perspective of `log2(1 + k y)` and hence
//! jointly concave in `(x, y)` and increasing in `y`. Replacing `y` by its
//! tangent in the squared horizontal distance `s`,
//!
//! ```text
//! y_hat(s) = 1 / b - (s - s_ref) / b^2,   b = h^2 + s_ref,
//! ```
//!
//! which is a lower bound on `y` and concave in the position, gives a rate
//! bound that is jointly concave in `(x, q)` and tight at the expansion
//! point. The backhaul rates use the same tangent bounds as
//! [`PlacementProgram`](super::PlacementProgram).
//!
//! Alternating between bandwidth allocation at fixed positions and
//! placement at fixed bandwidth can stop at a point where every AGU link
//! and the backhaul bind simultaneously: neither block can improve alone
//! although moving both together can. This step does not have that
//! blind spot.
//!
//! Variables: `[q_obs (2), (q_relay (2)), x_0..x_U, r_0..r_U]`.

use std::f64::consts::LN_2;

use super::sca::{sca_coefficients, TaylorCoefficients};
use super::{Model, Resources, Topology};
use crate::convex::{solve_concave, ConcaveProgram, HessianSink, SolveReport, SolveStatus};
use crate::error::{Error, Result};
use crate::scenario::{dist_sq, Point, UavPlacement};

const MAX_NEWTON: usize = 200;
const START_RATE_FRACTION: f64 = 0.99;
/// Bandwidth shares of the starting point are scaled by this factor so
/// that `sum x < 1` strictly.
const START_SHARE_FRACTION: f64 = 1.0 - 1e-6;

/// Joint bandwidth/placement surrogate program.
#[derive(Debug, Clone)]
pub struct CoupledProgram {
    users: usize,
    npos: usize,
    keep: f64,
    theta_over_u: f64,
    log_scale: f64,
    /// `F^-1(rho) P_u mu0` per user.
    k: Vec<f64>,
    /// `h^2 + s_ref` per user.
    b: Vec<f64>,
    s_ref: Vec<f64>,
    agu_pos: Vec<Point>,
    gbs_pos: Point,
    half_width: f64,
    relay: TaylorCoefficients,
    gbs: Option<TaylorCoefficients>,
}

/// First and second derivatives of one AGU constraint.
struct UserTerms {
    value: f64,
    /// d/dx
    gx: f64,
    /// d/dy_hat
    gy: f64,
    /// `K = keep / (x (1 + z)^2 ln 2)` and `z = k y_hat / x`; the `(x, y)`
    /// Hessian is `-K [[z^2, -k z], [-k z, k^2]]`.
    kk: f64,
    z: f64,
    /// d y_hat / d q_obs
    dy: [f64; 2],
}

impl CoupledProgram {
    pub fn new(model: &Model<'_>, resources: &Resources, expansion: &UavPlacement) -> Self {
        let s = model.scenario;
        let users = model.num_users();
        let coeffs = sca_coefficients(model, resources, expansion);
        let h_sq = s.config.height_obs * s.config.height_obs;
        let s_ref: Vec<f64> = (0..users).map(|u| dist_sq(expansion.q_obs, s.agu_pos[u])).collect();
        Self {
            users,
            npos: match model.topology {
                Topology::Relay => 4,
                Topology::Direct => 2,
            },
            keep: 1.0 - model.rho(),
            theta_over_u: model.utility.theta / users as f64,
            log_scale: (model.utility.beta / model.utility.rbar).ln(),
            k: resources
                .p_user
                .iter()
                .map(|p| model.budget.inv_cdf_at_rho * p * model.budget.mu0)
                .collect(),
            b: s_ref.iter().map(|sr| h_sq + sr).collect(),
            s_ref,
            agu_pos: s.agu_pos.clone(),
            gbs_pos: s.gbs_pos,
            half_width: s.working_half_width(),
            relay: coeffs.relay,
            gbs: coeffs.gbs,
        }
    }

    pub fn pack(&self, placement: &UavPlacement, x: &[f64], r_tilde: &[f64]) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend_from_slice(&placement.q_obs);
        if self.npos == 4 {
            v.extend_from_slice(&placement.q_relay);
        }
        v.extend_from_slice(x);
        v.extend_from_slice(r_tilde);
        v
    }

    /// Returns placement, bandwidth shares and effective rates.
    pub fn unpack(&self, v: &[f64]) -> (UavPlacement, Vec<f64>, Vec<f64>) {
        let q_obs = [v[0], v[1]];
        let q_relay = if self.npos == 4 { [v[2], v[3]] } else { q_obs };
        let n = self.users;
        (
            UavPlacement { q_obs, q_relay },
            v[self.npos..self.npos + n].to_vec(),
            v[self.npos + n..].to_vec(),
        )
    }

    fn x(&self, u: usize) -> usize {
        self.npos + u
    }

    fn r(&self, u: usize) -> usize {
        self.npos + self.users + u
    }

    fn rate_sum(&self, v: &[f64]) -> f64 {
        v[self.npos + self.users..].iter().sum()
    }

    fn user_terms(&self, u: usize, v: &[f64]) -> UserTerms {
        let x = v[self.x(u)];
        let w = self.agu_pos[u];
        let (b, k) = (self.b[u], self.k[u]);
        let s = (v[0] - w[0]).powi(2) + (v[1] - w[1]).powi(2);
        let y = (b - (s - self.s_ref[u])) / (b * b);
        let z = k * y / x;
        let value = if z > -1.0 { self.keep * x * z.ln_1p() / LN_2 } else { f64::NEG_INFINITY };
        UserTerms {
            value,
            gx: self.keep * (z.ln_1p() - z / (1.0 + z)) / LN_2,
            gy: self.keep * k / ((1.0 + z) * LN_2),
            kk: self.keep / (x * (1.0 + z).powi(2) * LN_2),
            z,
            dy: [-2.0 * (v[0] - w[0]) / (b * b), -2.0 * (v[1] - w[1]) / (b * b)],
        }
    }

    /// Backhaul constraint `j > U`: its coefficients, the index of the
    /// transmitting UAV and the receiver (a UAV index or the GBS).
    fn backhaul(&self, j: usize) -> (TaylorCoefficients, usize, Receiver) {
        let k = j - self.users - 1;
        match (self.npos, k) {
            (4, 0) => (self.relay, 0, Receiver::Uav(2)),
            (4, _) => (self.gbs.expect("relay topology"), 2, Receiver::Gbs(self.gbs_pos)),
            _ => (self.relay, 0, Receiver::Gbs(self.gbs_pos)),
        }
    }
}

#[derive(Clone, Copy)]
enum Receiver {
    Uav(usize),
    Gbs(Point),
}

impl Receiver {
    fn at(self, v: &[f64]) -> Point {
        match self {
            Receiver::Uav(i) => [v[i], v[i + 1]],
            Receiver::Gbs(p) => p,
        }
    }
}

impl ConcaveProgram for CoupledProgram {
    fn dim(&self) -> usize {
        self.npos + 2 * self.users
    }

    fn num_constraints(&self) -> usize {
        self.users + 1 + self.npos / 2
    }

    fn lower(&self) -> Vec<f64> {
        let mut lo = vec![-self.half_width; self.npos];
        lo.extend(std::iter::repeat(0.0).take(2 * self.users));
        lo
    }

    fn upper(&self) -> Vec<f64> {
        let mut hi = vec![self.half_width; self.npos];
        hi.extend(std::iter::repeat(1.0).take(self.users));
        hi.extend(std::iter::repeat(f64::INFINITY).take(self.users));
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
        let n = self.users;
        if j < n {
            return self.user_terms(j, v).value - v[self.r(j)];
        }
        if j == n {
            return 1.0 - v[self.npos..self.npos + n].iter().sum::<f64>();
        }
        let (t, a, b) = self.backhaul(j);
        t.bound(sq([v[a], v[a + 1]], b.at(v))) - self.rate_sum(v)
    }

    fn constraint_grad(&self, j: usize, v: &[f64], grad: &mut [f64]) {
        let n = self.users;
        if j < n {
            let t = self.user_terms(j, v);
            grad[0] = t.gy * t.dy[0];
            grad[1] = t.gy * t.dy[1];
            grad[self.x(j)] = t.gx;
            grad[self.r(j)] = -1.0;
            return;
        }
        if j == n {
            grad[self.npos..self.npos + n].iter_mut().for_each(|g| *g = -1.0);
            return;
        }
        let (t, ia, b) = self.backhaul(j);
        let pb = b.at(v);
        for axis in 0..2 {
            let g = -2.0 * t.d * (v[ia + axis] - pb[axis]);
            grad[ia + axis] += g;
            if let Receiver::Uav(ib) = b {
                grad[ib + axis] -= g;
            }
        }
        let start = self.npos + n;
        grad[start..].iter_mut().for_each(|g| *g = -1.0);
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
        let n = self.users;
        if j < n {
            let t = self.user_terms(j, v);
            let k = self.k[j];
            let b = self.b[j];
            let ix = self.x(j);
            // (x, y_hat) block of the perspective, chained through y_hat(q).
            let hxx = -t.kk * t.z * t.z;
            let hxy = t.kk * k * t.z;
            let hyy = -t.kk * k * k;
            add(ix, ix, scale * hxx);
            for a in 0..2 {
                add(ix, a, scale * hxy * t.dy[a]);
                add(a, ix, scale * hxy * t.dy[a]);
                for c in 0..2 {
                    let mut h = hyy * t.dy[a] * t.dy[c];
                    if a == c {
                        h += t.gy * (-2.0 / (b * b));
                    }
                    add(a, c, scale * h);
                }
            }
            return;
        }
        if j == n {
            return;
        }
        let (t, ia, b) = self.backhaul(j);
        let k = -2.0 * scale * t.d;
        for axis in 0..2 {
            add(ia + axis, ia + axis, k);
            if let Receiver::Uav(ib) = b {
                add(ib + axis, ib + axis, k);
                add(ia + axis, ib + axis, -k);
                add(ib + axis, ia + axis, -k);
            }
        }
    }
}

fn sq(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Result of [`solve_coupled`].
#[derive(Debug, Clone)]
pub struct CoupledOutcome {
    pub placement: UavPlacement,
    /// New bandwidth shares, rescaled to sum to one.
    pub x: Vec<f64>,
    /// Average utility of the surrogate program at its optimum.
    pub lower_bound_objective: f64,
    /// Exact objective at the new placement and shares.
    pub exact_objective: f64,
    pub report: SolveReport,
    /// The exact objective would have decreased; the inputs were kept.
    pub stalled: bool,
}

/// One minorize-maximize step over placement and bandwidth shares, with
/// transmit powers fixed to those in `resources`.
pub fn solve_coupled(
    model: &Model<'_>,
    resources: &Resources,
    expansion: &UavPlacement,
    tol: f64,
) -> Result<CoupledOutcome> {
    let program = CoupledProgram::new(model, resources, expansion);
    let start_objective = model.exact_objective(resources, expansion)?;
    let mut shrunk = resources.clone();
    shrunk.x.iter_mut().for_each(|x| *x *= START_SHARE_FRACTION);
    let r0: Vec<f64> = model
        .best_rates(&shrunk, expansion)
        .into_iter()
        .map(|r| START_RATE_FRACTION * r)
        .collect();
    let v0 = program.pack(expansion, &shrunk.x, &r0);
    let report = solve_concave(&program, Some(&v0), tol, MAX_NEWTON)?;
    if report.status == SolveStatus::Infeasible {
        return Err(Error::Infeasible("coupled placement step has no interior point".into()));
    }
    let (placement, x, _) = program.unpack(&report.solution);
    let total: f64 = x.iter().sum();
    let candidate = Resources { x: x.iter().map(|v| v / total).collect(), ..resources.clone() };
    let exact_objective = model.exact_objective(&candidate, &placement)?;
    if !(exact_objective >= start_objective) {
        return Ok(CoupledOutcome {
            placement: *expansion,
            x: resources.x.clone(),
            lower_bound_objective: start_objective,
            exact_objective: start_objective,
            report,
            stalled: true,
        });
    }
    Ok(CoupledOutcome {
        placement,
        x: candidate.x,
        lower_bound_objective: report.objective,
        exact_objective,
        report,
        stalled: false,
    })
}
