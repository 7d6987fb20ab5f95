//! Log-barrier interior-point method for smooth concave maximization.
//!
//! A [`ConcaveProgram`] is
//!
//! ```text
//! maximize f(v)  subject to  g_j(v) >= 0 (j = 1..m),  lo <= v <= hi
//! ```
//!
//! with `f` and every `g_j` concave. The solver follows the central path
//! of `t f(v) + sum ln g_j(v) + sum ln(v - lo) + sum ln(hi - v)`, taking
//! damped Newton steps for each `t` and multiplying `t` by ten until the
//! duality-gap bound falls below the tolerance. Programs that do not
//! provide second derivatives are centered with a damped BFGS model.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Callback used to accumulate Hessian entries: `add(row, col, value)`.
/// Implementations must report both `(i, k)` and `(k, i)` for off-diagonal
/// entries.
pub type HessianSink<'a> = dyn FnMut(usize, usize, f64) + 'a;

pub trait ConcaveProgram {
    fn dim(&self) -> usize;
    fn num_constraints(&self) -> usize;
    /// Lower box bounds; `f64::NEG_INFINITY` for none.
    fn lower(&self) -> Vec<f64>;
    /// Upper box bounds; `f64::INFINITY` for none.
    fn upper(&self) -> Vec<f64>;

    fn objective(&self, v: &[f64]) -> f64;
    /// Writes the gradient into a zeroed buffer.
    fn objective_grad(&self, v: &[f64], grad: &mut [f64]);

    fn constraint(&self, j: usize, v: &[f64]) -> f64;
    /// Writes the gradient of constraint `j` into a zeroed buffer.
    fn constraint_grad(&self, j: usize, v: &[f64], grad: &mut [f64]);

    /// Whether the two `add_*_hessian` methods are implemented.
    fn has_hessian(&self) -> bool {
        false
    }
    fn add_objective_hessian(&self, _v: &[f64], _scale: f64, _add: &mut HessianSink) {}
    fn add_constraint_hessian(&self, _j: usize, _v: &[f64], _scale: f64, _add: &mut HessianSink) {}
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIters,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: Vec<f64>,
    pub objective: f64,
    /// Bound on the gap between `objective` and the optimum:
    /// `(m + lambda^2 / 2) / t` at the last centering, with `m` the number of
    /// barrier terms and `lambda` the final Newton decrement.
    pub kkt_residual: f64,
    /// Number of outer (barrier) stages.
    pub barrier_iterations: usize,
    pub newton_steps: usize,
    pub status: SolveStatus,
    /// Objective at the end of every barrier stage.
    pub stage_objectives: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_newton: usize,
    pub t_init: f64,
    pub t_factor: f64,
    pub max_stages: usize,
    /// Armijo sufficient-decrease fraction.
    pub armijo: f64,
    /// Backtracking factor.
    pub backtrack: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_newton: 200,
            t_init: 1.0,
            t_factor: 10.0,
            max_stages: 64,
            armijo: 0.25,
            backtrack: 0.5,
        }
    }
}

/// Centering stops once half the squared Newton decrement drops below this.
const NEWTON_EPS: f64 = 1e-10;
/// A stalled line search still counts as centered below this decrement.
const STALL_EPS: f64 = 1e-6;
/// Starting points on a finite bound are pulled inside by this margin.
const BOX_MARGIN: f64 = 1e-12;

pub fn solve_concave(
    program: &dyn ConcaveProgram,
    start: Option<&[f64]>,
    tol: f64,
    max_newton: usize,
) -> Result<SolveReport> {
    solve_with(program, start, &SolveOptions { tol, max_newton, ..SolveOptions::default() })
}

pub fn solve_with(
    program: &dyn ConcaveProgram,
    start: Option<&[f64]>,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    let lo = program.lower();
    let hi = program.upper();
    let n = program.dim();
    if lo.len() != n || hi.len() != n {
        return Err(Error::Domain("box bounds do not match the program dimension".into()));
    }
    if lo.iter().zip(&hi).any(|(l, h)| !(l < h)) {
        return Err(Error::Domain("box bounds must satisfy lo < hi".into()));
    }

    let initial = match start {
        Some(s) if s.len() == n => pull_inside(s, &lo, &hi),
        Some(_) => return Err(Error::Domain("start vector has the wrong dimension".into())),
        None => box_center(&lo, &hi),
    };

    let feasible = strictly_feasible(program, &initial)?;
    let v0 = if feasible {
        initial
    } else {
        match phase_one(program, &initial, opts)? {
            Some(v) => v,
            None => {
                let objective = program.objective(&initial);
                return Ok(SolveReport {
                    solution: initial,
                    objective,
                    kkt_residual: f64::INFINITY,
                    barrier_iterations: 0,
                    newton_steps: 0,
                    status: SolveStatus::Infeasible,
                    stage_objectives: Vec::new(),
                });
            }
        }
    };
    Barrier::new(program, opts).run(v0, None)
}

fn pull_inside(v: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    v.iter()
        .zip(lo.iter().zip(hi))
        .map(|(&x, (&l, &h))| {
            let magnitude = [l, h].iter().filter(|b| b.is_finite()).fold(1.0f64, |m, b| m.max(b.abs()));
            let margin = BOX_MARGIN * magnitude;
            let x = if l.is_finite() { x.max(l + margin) } else { x };
            if h.is_finite() {
                x.min(h - margin)
            } else {
                x
            }
        })
        .collect()
}

fn box_center(lo: &[f64], hi: &[f64]) -> Vec<f64> {
    lo.iter()
        .zip(hi)
        .map(|(&l, &h)| match (l.is_finite(), h.is_finite()) {
            (true, true) => 0.5 * (l + h),
            (true, false) => l + 1.0,
            (false, true) => h - 1.0,
            (false, false) => 0.0,
        })
        .collect()
}

fn checked(value: f64, context: &str, v: &[f64]) -> Result<f64> {
    if value.is_nan() || value == f64::INFINITY {
        Err(Error::Numeric { context: context.to_string(), point: v.to_vec() })
    } else {
        Ok(value)
    }
}

fn strictly_feasible(program: &dyn ConcaveProgram, v: &[f64]) -> Result<bool> {
    let lo = program.lower();
    let hi = program.upper();
    if v.iter().zip(lo.iter().zip(&hi)).any(|(x, (l, h))| !(x > l && x < h)) {
        return Ok(false);
    }
    for j in 0..program.num_constraints() {
        let g = program.constraint(j, v);
        if g.is_nan() {
            return Err(Error::Numeric { context: format!("constraint {j}"), point: v.to_vec() });
        }
        if !(g > 0.0) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Finds a strictly feasible point by maximizing `-s` subject to
/// `g_j(v) + s >= 0`, stopping as soon as `s < 0`.
fn phase_one(
    program: &dyn ConcaveProgram,
    initial: &[f64],
    opts: &SolveOptions,
) -> Result<Option<Vec<f64>>> {
    let n = program.dim();
    let worst = (0..program.num_constraints())
        .map(|j| program.constraint(j, initial))
        .fold(f64::INFINITY, f64::min);
    let slack0 = if worst.is_finite() { (-worst).max(0.0) + 1.0 } else { 1.0 };
    let aux = PhaseOne { inner: program };
    let mut v0 = initial.to_vec();
    v0.push(slack0);
    let phase_opts = SolveOptions { tol: 1e-12, ..*opts };
    let stop = |v: &[f64]| v[n] < 0.0;
    let report = Barrier::new(&aux, &phase_opts).run(v0, Some(&stop))?;
    if report.solution[n] < 0.0 {
        let v = report.solution[..n].to_vec();
        if strictly_feasible(program, &v)? {
            return Ok(Some(v));
        }
    }
    Ok(None)
}

struct PhaseOne<'a> {
    inner: &'a dyn ConcaveProgram,
}

impl ConcaveProgram for PhaseOne<'_> {
    fn dim(&self) -> usize {
        self.inner.dim() + 1
    }
    fn num_constraints(&self) -> usize {
        self.inner.num_constraints()
    }
    fn lower(&self) -> Vec<f64> {
        let mut l = self.inner.lower();
        l.push(f64::NEG_INFINITY);
        l
    }
    fn upper(&self) -> Vec<f64> {
        let mut h = self.inner.upper();
        h.push(f64::INFINITY);
        h
    }
    fn objective(&self, v: &[f64]) -> f64 {
        -v[v.len() - 1]
    }
    fn objective_grad(&self, v: &[f64], grad: &mut [f64]) {
        grad[v.len() - 1] = -1.0;
    }
    fn constraint(&self, j: usize, v: &[f64]) -> f64 {
        let n = v.len() - 1;
        self.inner.constraint(j, &v[..n]) + v[n]
    }
    fn constraint_grad(&self, j: usize, v: &[f64], grad: &mut [f64]) {
        let n = v.len() - 1;
        self.inner.constraint_grad(j, &v[..n], &mut grad[..n]);
        grad[n] = 1.0;
    }
    fn has_hessian(&self) -> bool {
        self.inner.has_hessian()
    }
    fn add_objective_hessian(&self, _v: &[f64], _scale: f64, _add: &mut HessianSink) {}
    fn add_constraint_hessian(&self, j: usize, v: &[f64], scale: f64, add: &mut HessianSink) {
        let n = v.len() - 1;
        self.inner.add_constraint_hessian(j, &v[..n], scale, add);
    }
}

struct Barrier<'a> {
    program: &'a dyn ConcaveProgram,
    opts: &'a SolveOptions,
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// Barrier terms: constraints plus finite box sides.
    terms: f64,
    grad_buf: Vec<f64>,
}

impl<'a> Barrier<'a> {
    fn new(program: &'a dyn ConcaveProgram, opts: &'a SolveOptions) -> Self {
        let lo = program.lower();
        let hi = program.upper();
        let finite_sides = lo.iter().filter(|l| l.is_finite()).count()
            + hi.iter().filter(|h| h.is_finite()).count();
        Self {
            terms: (program.num_constraints() + finite_sides) as f64,
            grad_buf: vec![0.0; program.dim()],
            program,
            opts,
            lo,
            hi,
        }
    }

    /// `phi_t(v) = -t f(v) - sum ln g_j - box logs`, or `None` outside the
    /// strict interior.
    fn phi(&self, v: &[f64], t: f64) -> Result<Option<f64>> {
        let mut total = 0.0;
        for ((&x, &l), &h) in v.iter().zip(&self.lo).zip(&self.hi) {
            if !(x > l && x < h) {
                return Ok(None);
            }
            if l.is_finite() {
                total -= (x - l).ln();
            }
            if h.is_finite() {
                total -= (h - x).ln();
            }
        }
        for j in 0..self.program.num_constraints() {
            let g = checked(self.program.constraint(j, v), &format!("constraint {j}"), v)?;
            if !(g > 0.0) {
                return Ok(None);
            }
            total -= g.ln();
        }
        let f = checked(self.program.objective(v), "objective", v)?;
        if f == f64::NEG_INFINITY {
            return Ok(None);
        }
        Ok(Some(total - t * f))
    }

    /// Gradient of `phi_t` and, when available, its exact Hessian.
    fn derivatives(&mut self, v: &[f64], t: f64, want_hessian: bool) -> Result<(DVector<f64>, Option<DMatrix<f64>>)> {
        let n = v.len();
        let program = self.program;
        let mut grad = DVector::zeros(n);
        let mut hess: Option<DMatrix<f64>> = want_hessian.then(|| DMatrix::zeros(n, n));

        self.grad_buf.iter_mut().for_each(|g| *g = 0.0);
        program.objective_grad(v, &mut self.grad_buf);
        for (i, g) in self.grad_buf.iter().enumerate() {
            grad[i] -= t * checked(*g, "objective gradient", v)?;
        }
        if let Some(h) = hess.as_mut() {
            program.add_objective_hessian(v, -t, &mut |i, k, val| h[(i, k)] += val);
        }

        for j in 0..program.num_constraints() {
            let g = program.constraint(j, v);
            self.grad_buf.iter_mut().for_each(|x| *x = 0.0);
            program.constraint_grad(j, v, &mut self.grad_buf);
            let inv = 1.0 / g;
            let nz: Vec<(usize, f64)> = self
                .grad_buf
                .iter()
                .enumerate()
                .filter(|(_, d)| **d != 0.0)
                .map(|(i, d)| (i, *d))
                .collect();
            for &(i, d) in &nz {
                grad[i] -= checked(d, &format!("constraint {j} gradient"), v)? * inv;
            }
            if let Some(h) = hess.as_mut() {
                let inv_sq = inv * inv;
                for &(i, di) in &nz {
                    for &(k, dk) in &nz {
                        h[(i, k)] += di * dk * inv_sq;
                    }
                }
                program.add_constraint_hessian(j, v, -inv, &mut |i, k, val| h[(i, k)] += val);
            }
        }

        for i in 0..n {
            let (l, u) = (self.lo[i], self.hi[i]);
            let mut diag = 0.0;
            if l.is_finite() {
                let d = v[i] - l;
                grad[i] -= 1.0 / d;
                diag += 1.0 / (d * d);
            }
            if u.is_finite() {
                let d = u - v[i];
                grad[i] += 1.0 / d;
                diag += 1.0 / (d * d);
            }
            if let Some(h) = hess.as_mut() {
                h[(i, i)] += diag;
            }
        }
        if let Some(h) = &hess {
            if h.iter().any(|x: &f64| !x.is_finite()) {
                return Err(Error::Numeric { context: "barrier Hessian".into(), point: v.to_vec() });
            }
        }
        Ok((grad, hess))
    }

    /// Structural curvature used to seed the BFGS model.
    fn bfgs_seed(&mut self, v: &[f64]) -> DMatrix<f64> {
        let n = v.len();
        let mut h = DMatrix::zeros(n, n);
        for j in 0..self.program.num_constraints() {
            let g = self.program.constraint(j, v);
            self.grad_buf.iter_mut().for_each(|x| *x = 0.0);
            self.program.constraint_grad(j, v, &mut self.grad_buf);
            let gv = DVector::from_column_slice(&self.grad_buf);
            h += &gv * gv.transpose() / (g * g);
        }
        for i in 0..n {
            if self.lo[i].is_finite() {
                h[(i, i)] += 1.0 / (v[i] - self.lo[i]).powi(2);
            }
            if self.hi[i].is_finite() {
                h[(i, i)] += 1.0 / (self.hi[i] - v[i]).powi(2);
            }
        }
        let scale = (h.trace() / n as f64).max(1.0);
        for i in 0..n {
            h[(i, i)] += 1e-6 * scale;
        }
        h
    }

    fn run(mut self, mut v: Vec<f64>, stop: Option<&dyn Fn(&[f64]) -> bool>) -> Result<SolveReport> {
        let exact = self.program.has_hessian();
        let mut t = self.opts.t_init;
        let mut stage_objectives = Vec::new();
        let mut newton_steps = 0;
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut status = SolveStatus::MaxIters;
        let mut kkt = f64::INFINITY;

        for stage in 0..self.opts.max_stages {
            let mut bfgs = (!exact).then(|| self.bfgs_seed(&v));
            let mut decrement = f64::INFINITY;
            let mut centered = false;
            for _ in 0..self.opts.max_newton {
                let (grad, hess) = self.derivatives(&v, t, exact)?;
                let h = match (&hess, &bfgs) {
                    (Some(h), _) => h.clone(),
                    (None, Some(b)) => b.clone(),
                    (None, None) => unreachable!("either exact or BFGS curvature"),
                };
                let step = newton_direction(h, &grad);
                decrement = -grad.dot(&step);
                if !(decrement.is_finite()) || decrement <= 2.0 * NEWTON_EPS {
                    centered = decrement.is_finite();
                    break;
                }
                let Some(accepted) = self.line_search(&v, &step, &grad, t)? else {
                    centered = decrement <= 2.0 * STALL_EPS;
                    break;
                };
                let next: Vec<f64> = v.iter().zip(step.iter()).map(|(x, d)| x + accepted * d).collect();
                newton_steps += 1;
                if let Some(b) = bfgs.as_mut() {
                    let (grad_next, _) = self.derivatives(&next, t, false)?;
                    bfgs_update(b, &(step.clone() * accepted), &(grad_next - &grad));
                }
                v = next;
                if let Some(stop) = stop {
                    if stop(&v) {
                        let objective = self.program.objective(&v);
                        return Ok(SolveReport {
                            solution: v,
                            objective,
                            kkt_residual: f64::INFINITY,
                            barrier_iterations: stage + 1,
                            newton_steps,
                            status: SolveStatus::Converged,
                            stage_objectives,
                        });
                    }
                }
            }

            let f = checked(self.program.objective(&v), "objective", &v)?;
            stage_objectives.push(f);
            if best.as_ref().is_none_or(|(bf, _)| f >= *bf) {
                best = Some((f, v.clone()));
            }
            let dec = if decrement.is_finite() { decrement.max(0.0) } else { 0.0 };
            kkt = (self.terms + 0.5 * dec) / t;
            if kkt <= self.opts.tol {
                status = if centered { SolveStatus::Converged } else { SolveStatus::MaxIters };
                break;
            }
            t *= self.opts.t_factor;
        }

        let (objective, solution) = best.expect("at least one barrier stage");
        Ok(SolveReport {
            solution,
            objective,
            kkt_residual: kkt,
            barrier_iterations: stage_objectives.len(),
            newton_steps,
            status,
            stage_objectives,
        })
    }

    /// Backtracking Armijo search on `phi_t`, starting from the largest
    /// step that keeps the box interior. Returns `None` when no acceptable
    /// step exists above round-off.
    fn line_search(&self, v: &[f64], step: &DVector<f64>, grad: &DVector<f64>, t: f64) -> Result<Option<f64>> {
        let phi0 = self.phi(v, t)?.expect("iterate is strictly feasible");
        let slope = grad.dot(step);
        let mut s: f64 = 1.0;
        for (i, d) in step.iter().enumerate() {
            if *d < 0.0 && self.lo[i].is_finite() {
                s = s.min(0.99 * (self.lo[i] - v[i]) / d);
            } else if *d > 0.0 && self.hi[i].is_finite() {
                s = s.min(0.99 * (self.hi[i] - v[i]) / d);
            }
        }
        // phi carries round-off proportional to its magnitude
        let noise = 16.0 * f64::EPSILON * (phi0.abs() + 1.0);
        let mut trial = vec![0.0; v.len()];
        while s > 1e-14 {
            for (k, x) in trial.iter_mut().enumerate() {
                *x = v[k] + s * step[k];
            }
            if let Some(phi) = self.phi(&trial, t)? {
                if phi <= phi0 + self.opts.armijo * s * slope + noise {
                    return Ok(Some(s));
                }
            }
            s *= self.opts.backtrack;
        }
        Ok(None)
    }
}

/// Solves `H d = -g` by Cholesky, adding diagonal regularization when `H`
/// is not numerically positive definite.
fn newton_direction(h: DMatrix<f64>, grad: &DVector<f64>) -> DVector<f64> {
    let n = h.nrows();
    let scale = (0..n).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut shift = 0.0;
    loop {
        let mut m = h.clone();
        if shift > 0.0 {
            for i in 0..n {
                m[(i, i)] += shift;
            }
        }
        if let Some(chol) = m.cholesky() {
            return -chol.solve(grad);
        }
        shift = if shift == 0.0 { 1e-12 * scale } else { shift * 10.0 };
        if shift > 1e12 * scale {
            return -grad.clone() / scale;
        }
    }
}

/// Powell-damped BFGS update of a Hessian model.
fn bfgs_update(b: &mut DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>) {
    let bs = &*b * s;
    let sbs = s.dot(&bs);
    if !(sbs > 0.0) {
        return;
    }
    let sy = s.dot(y);
    let r = if sy >= 0.2 * sbs {
        y.clone()
    } else {
        let theta = 0.8 * sbs / (sbs - sy);
        y * theta + &bs * (1.0 - theta)
    };
    let sr = s.dot(&r);
    if !(sr > 0.0) {
        return;
    }
    *b += &r * r.transpose() / sr - &bs * bs.transpose() / sbs;
}

/// Result of comparing analytic derivatives against central differences.
#[derive(Debug, Clone, Copy, Default)]
pub struct GradientCheck {
    /// Largest `max_i |fd_i - an_i| / max(|an|_inf, 1e-12)` over the
    /// objective and every constraint.
    pub max_relative_error: f64,
}

/// Central-difference check of every gradient callback at `v`.
///
/// The step along coordinate `i` is `1e-5 * max(|v_i|, 1e-3)`.
pub fn check_gradients(program: &dyn ConcaveProgram, v: &[f64]) -> GradientCheck {
    let n = program.dim();
    let steps: Vec<f64> = v.iter().map(|x| 1e-5 * x.abs().max(1e-3)).collect();
    let fd = |f: &dyn Fn(&[f64]) -> f64| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let mut p = v.to_vec();
                let mut m = v.to_vec();
                p[i] += steps[i];
                m[i] -= steps[i];
                (f(&p) - f(&m)) / (p[i] - m[i])
            })
            .collect()
    };
    let compare = |analytic: &[f64], numeric: &[f64]| -> f64 {
        let scale = analytic.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1e-12);
        analytic
            .iter()
            .zip(numeric)
            .map(|(a, b)| (a - b).abs() / scale)
            .fold(0.0, f64::max)
    };

    let mut worst = 0.0f64;
    let mut g = vec![0.0; n];
    program.objective_grad(v, &mut g);
    worst = worst.max(compare(&g, &fd(&|x| program.objective(x))));
    for j in 0..program.num_constraints() {
        g.iter_mut().for_each(|x| *x = 0.0);
        program.constraint_grad(j, v, &mut g);
        worst = worst.max(compare(&g, &fd(&|x| program.constraint(j, x))));
    }
    GradientCheck { max_relative_error: worst }
}

/// Central-difference check of the Hessian callbacks at `v`, comparing
/// each assembled Hessian row against differences of the gradient.
pub fn check_hessians(program: &dyn ConcaveProgram, v: &[f64]) -> GradientCheck {
    let n = program.dim();
    let steps: Vec<f64> = v.iter().map(|x| 1e-5 * x.abs().max(1e-3)).collect();
    let dense = |fill: &dyn Fn(&mut HessianSink)| {
        let mut h = DMatrix::zeros(n, n);
        fill(&mut |i, k, val| h[(i, k)] += val);
        h
    };
    let numeric = |grad: &dyn Fn(&[f64], &mut [f64])| {
        let mut h = DMatrix::zeros(n, n);
        for k in 0..n {
            let mut p = v.to_vec();
            let mut m = v.to_vec();
            p[k] += steps[k];
            m[k] -= steps[k];
            let mut gp = vec![0.0; n];
            let mut gm = vec![0.0; n];
            grad(&p, &mut gp);
            grad(&m, &mut gm);
            for i in 0..n {
                h[(i, k)] = (gp[i] - gm[i]) / (p[k] - m[k]);
            }
        }
        h
    };
    let compare = |a: &DMatrix<f64>, b: &DMatrix<f64>| (a - b).amax() / a.amax().max(1e-12);

    let mut worst = compare(
        &dense(&|add| program.add_objective_hessian(v, 1.0, add)),
        &numeric(&|x, g| program.objective_grad(x, g)),
    );
    for j in 0..program.num_constraints() {
        worst = worst.max(compare(
            &dense(&|add| program.add_constraint_hessian(j, v, 1.0, add)),
            &numeric(&|x, g| program.constraint_grad(j, x, g)),
        ));
    }
    GradientCheck { max_relative_error: worst }
}
