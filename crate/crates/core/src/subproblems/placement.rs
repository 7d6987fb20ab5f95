//! UAV placement at fixed resources, one successive-convex-approximation
//! step.
//!
//! Variables: `[q_obs (2), (q_relay (2)), r_0..r_U]`. Every rate is
//! replaced by its tangent lower bound at the current placement, which is
//! concave in the positions, so each step solves a concave program whose
//! optimum is a feasible point of the original problem.

use super::sca::{sca_coefficients, SCACoefficients, TaylorCoefficients};
use super::{Model, Resources, Topology};
use crate::convex::{solve_concave, ConcaveProgram, HessianSink, SolveReport, SolveStatus};
use crate::error::{Error, Result};
use crate::scenario::{Point, UavPlacement};

const MAX_NEWTON: usize = 200;
const START_RATE_FRACTION: f64 = 0.99;

/// The placement subproblem for fixed resources and expansion point.
#[derive(Debug, Clone)]
pub struct PlacementProgram {
    users: usize,
    /// Number of position coordinates (4 with a relay, 2 without).
    npos: usize,
    keep: f64,
    theta_over_u: f64,
    log_scale: f64,
    x: Vec<f64>,
    agu_pos: Vec<Point>,
    gbs_pos: Point,
    half_width: f64,
    coeffs: SCACoefficients,
}

impl PlacementProgram {
    pub fn new(model: &Model<'_>, resources: &Resources, expansion: &UavPlacement) -> Self {
        let users = model.num_users();
        Self {
            users,
            npos: match model.topology {
                Topology::Relay => 4,
                Topology::Direct => 2,
            },
            keep: 1.0 - model.rho(),
            theta_over_u: model.utility.theta / users as f64,
            log_scale: (model.utility.beta / model.utility.rbar).ln(),
            x: resources.x.clone(),
            agu_pos: model.scenario.agu_pos.clone(),
            gbs_pos: model.scenario.gbs_pos,
            half_width: model.scenario.working_half_width(),
            coeffs: sca_coefficients(model, resources, expansion),
        }
    }

    pub fn coefficients(&self) -> &SCACoefficients {
        &self.coeffs
    }

    pub fn pack(&self, placement: &UavPlacement, r_tilde: &[f64]) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend_from_slice(&placement.q_obs);
        if self.npos == 4 {
            v.extend_from_slice(&placement.q_relay);
        }
        v.extend_from_slice(r_tilde);
        v
    }

    /// Without a relay, the returned relay position equals the observation
    /// UAV position.
    pub fn unpack(&self, v: &[f64]) -> (UavPlacement, Vec<f64>) {
        let q_obs = [v[0], v[1]];
        let q_relay = if self.npos == 4 { [v[2], v[3]] } else { q_obs };
        (UavPlacement { q_obs, q_relay }, v[self.npos..].to_vec())
    }

    fn r(&self, u: usize) -> usize {
        self.npos + u
    }

    fn rate_sum(&self, v: &[f64]) -> f64 {
        v[self.npos..].iter().sum()
    }

    /// The backhaul link of constraint `j >= U`: its coefficients and the
    /// two endpoints as (variable index or fixed point).
    fn backhaul(&self, j: usize) -> (TaylorCoefficients, End, End) {
        let k = j - self.users;
        match (self.npos, k) {
            (4, 0) => (self.coeffs.relay, End::Var(0), End::Var(2)),
            (4, _) => (self.coeffs.gbs.expect("relay topology"), End::Var(2), End::Fixed(self.gbs_pos)),
            _ => (self.coeffs.relay, End::Var(0), End::Fixed(self.gbs_pos)),
        }
    }
}

#[derive(Clone, Copy)]
enum End {
    Var(usize),
    Fixed(Point),
}

impl End {
    fn at(self, v: &[f64]) -> Point {
        match self {
            End::Var(i) => [v[i], v[i + 1]],
            End::Fixed(p) => p,
        }
    }
}

fn sq(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

impl ConcaveProgram for PlacementProgram {
    fn dim(&self) -> usize {
        self.npos + self.users
    }

    fn num_constraints(&self) -> usize {
        self.users + self.npos / 2
    }

    fn lower(&self) -> Vec<f64> {
        let mut lo = vec![-self.half_width; self.npos];
        lo.extend(std::iter::repeat(0.0).take(self.users));
        lo
    }

    fn upper(&self) -> Vec<f64> {
        let mut hi = vec![self.half_width; self.npos];
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
        if j < self.users {
            let s = sq([v[0], v[1]], self.agu_pos[j]);
            return self.keep * self.x[j] * self.coeffs.users[j].bound(s) - v[self.r(j)];
        }
        let (t, a, b) = self.backhaul(j);
        t.bound(sq(a.at(v), b.at(v))) - self.rate_sum(v)
    }

    fn constraint_grad(&self, j: usize, v: &[f64], grad: &mut [f64]) {
        if j < self.users {
            let k = -2.0 * self.keep * self.x[j] * self.coeffs.users[j].d;
            let w = self.agu_pos[j];
            grad[0] = k * (v[0] - w[0]);
            grad[1] = k * (v[1] - w[1]);
            grad[self.r(j)] = -1.0;
            return;
        }
        let (t, a, b) = self.backhaul(j);
        let (pa, pb) = (a.at(v), b.at(v));
        for axis in 0..2 {
            let g = -2.0 * t.d * (pa[axis] - pb[axis]);
            if let End::Var(i) = a {
                grad[i + axis] += g;
            }
            if let End::Var(i) = b {
                grad[i + axis] -= g;
            }
        }
        let npos = self.npos;
        grad[npos..].iter_mut().for_each(|g| *g = -1.0);
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

    fn add_constraint_hessian(&self, j: usize, _v: &[f64], scale: f64, add: &mut HessianSink) {
        if j < self.users {
            let k = -2.0 * scale * self.keep * self.x[j] * self.coeffs.users[j].d;
            add(0, 0, k);
            add(1, 1, k);
            return;
        }
        let (t, a, b) = self.backhaul(j);
        let k = -2.0 * scale * t.d;
        for axis in 0..2 {
            if let End::Var(i) = a {
                add(i + axis, i + axis, k);
            }
            if let End::Var(i) = b {
                add(i + axis, i + axis, k);
            }
            if let (End::Var(i), End::Var(l)) = (a, b) {
                add(i + axis, l + axis, -k);
                add(l + axis, i + axis, -k);
            }
        }
    }
}

/// Result of [`solve_p7`].
#[derive(Debug, Clone)]
pub struct PlacementOutcome {
    pub placement: UavPlacement,
    /// Effective rates of the approximated program at its optimum.
    pub r_tilde: Vec<f64>,
    /// Average utility of `r_tilde` (the lower-bound objective).
    pub lower_bound_objective: f64,
    /// Exact objective at `placement` with the best effective rates.
    pub exact_objective: f64,
    pub report: SolveReport,
    /// The exact objective would have decreased, so the expansion point
    /// was returned instead of the solver output.
    pub stalled: bool,
}

/// One SCA step: maximizes the lower-bound utility around `expansion`.
pub fn solve_p7(
    model: &Model<'_>,
    resources: &Resources,
    expansion: &UavPlacement,
    tol: f64,
) -> Result<PlacementOutcome> {
    let program = PlacementProgram::new(model, resources, expansion);
    let start_rates = model.best_rates(resources, expansion);
    let start_objective = model.utility_of(&start_rates)?;
    let r0: Vec<f64> = start_rates.iter().map(|r| START_RATE_FRACTION * r).collect();
    let v0 = program.pack(expansion, &r0);
    let report = solve_concave(&program, Some(&v0), tol, MAX_NEWTON)?;
    if report.status == SolveStatus::Infeasible {
        return Err(Error::Infeasible("placement step has no interior point".into()));
    }
    let (placement, r_tilde) = program.unpack(&report.solution);
    let lower_bound_objective = report.objective;
    let exact_objective = model.exact_objective(resources, &placement)?;
    if !(exact_objective >= start_objective) {
        return Ok(PlacementOutcome {
            placement: *expansion,
            r_tilde: start_rates,
            lower_bound_objective: start_objective,
            exact_objective: start_objective,
            report,
            stalled: true,
        });
    }
    Ok(PlacementOutcome { placement, r_tilde, lower_bound_objective, exact_objective, report, stalled: false })
}
