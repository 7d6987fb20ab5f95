//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use skyrelay_core::scenario::dist_sq;
use skyrelay_core::subproblems::{solve_p7, water_fill, Model, Resources, Topology};
use skyrelay_core::UavPlacement;

/// Dense search over the bandwidth shares with every power at its budget;
/// coarse grid followed by two local refinements. Returns the best exact
/// objective and the shares achieving it.
pub fn grid_best_shares(model: &Model<'_>, q: &UavPlacement) -> (f64, Vec<f64>) {
    let n = model.num_users();
    assert!(n <= 2, "grid oracle supports one or two users");
    let eval = |x: &[f64]| {
        if x.iter().any(|v| *v <= 0.0) || x.iter().sum::<f64>() > 1.0 + 1e-15 {
            return f64::NEG_INFINITY;
        }
        model.exact_objective(&model.max_power_resources(x.to_vec()), q).unwrap()
    };
    let mut best = (f64::NEG_INFINITY, vec![0.0; n]);
    let mut center = vec![0.5; n];
    let mut half: f64 = 0.5;
    for step in [1e-2, 1e-3, 1e-4, 1e-5] {
        let k = (2.0 * half / step).round() as i64;
        let axis = |c: f64| (0..=k).map(move |i| c - half + i as f64 * step);
        if n == 1 {
            for a in axis(center[0]) {
                let v = eval(&[a]);
                if v > best.0 {
                    best = (v, vec![a]);
                }
            }
        } else {
            for a in axis(center[0]) {
                for b in axis(center[1]) {
                    let v = eval(&[a, b]);
                    if v > best.0 {
                        best = (v, vec![a, b]);
                    }
                }
            }
        }
        center = best.1.clone();
        half = 20.0 * step;
    }
    best
}

/// Largest first-hop/second-hop bottleneck rate over relay positions for
/// a fixed observation UAV. The optimal relay lies on the segment from
/// `q_obs` to the GBS (projecting onto it shortens both hops), and along
/// the segment one hop rate falls while the other rises, so the optimum
/// is their crossing, found by bisection.
fn best_backhaul(model: &Model<'_>, resources: &Resources, q_obs: [f64; 2]) -> f64 {
    let s = model.scenario;
    let c = &s.config;
    let mu0 = model.budget.mu0;
    match model.topology {
        Topology::Direct => {
            let h = c.height_gbs - c.height_obs;
            (1.0 + resources.p_obs * mu0 / (h * h + dist_sq(q_obs, s.gbs_pos))).log2()
        }
        Topology::Relay => {
            let l_sq = dist_sq(q_obs, s.gbs_pos);
            let ho = c.height_relay - c.height_obs;
            let hb = c.height_gbs - c.height_relay;
            let r_o = |t: f64| (1.0 + resources.p_obs * mu0 / (ho * ho + t * t * l_sq)).log2();
            let r_b = |t: f64| {
                (1.0 + resources.p_relay * mu0 / (hb * hb + (1.0 - t) * (1.0 - t) * l_sq)).log2()
            };
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            if r_o(1.0) >= r_b(1.0) {
                return r_b(1.0);
            }
            if r_o(0.0) <= r_b(0.0) {
                return r_o(0.0);
            }
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if r_o(mid) > r_b(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            r_o(lo).min(r_b(lo))
        }
    }
}

fn objective_at(model: &Model<'_>, resources: &Resources, q_obs: [f64; 2]) -> f64 {
    let s = model.scenario;
    let c = &s.config;
    let keep = 1.0 - c.outage_target;
    let quantile_mu0 = model.budget.inv_cdf_at_rho * model.budget.mu0;
    let caps: Vec<f64> = (0..s.num_users())
        .map(|u| {
            let x = resources.x[u];
            let d_sq = c.height_obs * c.height_obs + dist_sq(q_obs, s.agu_pos[u]);
            keep * x * (1.0 + quantile_mu0 * resources.p_user[u] / (x * d_sq)).log2()
        })
        .collect();
    let rates = water_fill(&caps, best_backhaul(model, resources, q_obs));
    model.utility_of(&rates).unwrap()
}

/// Best exact objective over all UAV placements for fixed resources:
/// 5 m grid over the observation UAV position (covering the users and the
/// path to the GBS) with the relay placed optimally, then local
/// refinement.
pub fn best_placement_exact(model: &Model<'_>, resources: &Resources) -> f64 {
    let s = model.scenario;
    let margin = 200.0;
    let xs = s.agu_pos.iter().map(|p| p[0]);
    let ys = s.agu_pos.iter().map(|p| p[1]);
    let x_lo = s.gbs_pos[0].min(xs.clone().fold(f64::INFINITY, f64::min)) - margin;
    let x_hi = xs.fold(f64::NEG_INFINITY, f64::max) + margin;
    let y_lo = ys.clone().fold(0.0f64, f64::min) - margin;
    let y_hi = ys.fold(0.0f64, f64::max) + margin;

    let mut best = (f64::NEG_INFINITY, [0.0, 0.0]);
    let step = 5.0;
    let nx = ((x_hi - x_lo) / step).ceil() as usize;
    let ny = ((y_hi - y_lo) / step).ceil() as usize;
    for i in 0..=nx {
        for j in 0..=ny {
            let q = [x_lo + i as f64 * step, y_lo + j as f64 * step];
            let v = objective_at(model, resources, q);
            if v > best.0 {
                best = (v, q);
            }
        }
    }
    let mut half: f64 = 2.0 * step;
    for fine in [0.5, 0.05, 0.005, 0.0005] {
        let center = best.1;
        let k = (2.0 * half / fine).round() as i64;
        for i in 0..=k {
            for j in 0..=k {
                let q = [center[0] - half + i as f64 * fine, center[1] - half + j as f64 * fine];
                let v = objective_at(model, resources, q);
                if v > best.0 {
                    best = (v, q);
                }
            }
        }
        half = 4.0 * fine;
    }
    best.0
}

/// Repeats SCA placement steps until the exact objective stops improving.
/// Returns the final placement, its exact objective and the history.
pub fn iterate_p7(
    model: &Model<'_>,
    resources: &Resources,
    start: UavPlacement,
) -> (UavPlacement, f64, Vec<f64>) {
    let mut q = start;
    let mut history = vec![model.exact_objective(resources, &q).unwrap()];
    for _ in 0..2000 {
        let out = solve_p7(model, resources, &q, 1e-10).unwrap();
        q = out.placement;
        let prev = *history.last().unwrap();
        history.push(out.exact_objective);
        if out.stalled || out.exact_objective - prev < 1e-11 {
            break;
        }
    }
    (q, *history.last().unwrap(), history)
}

/// Marcum Q1 by direct quadrature of its defining integral
/// `int_b^inf x exp(-(x^2 + a^2)/2) I0(a x) dx`, with `I0` itself obtained
/// from its periodic integral representation (trapezoid rule, which is
/// spectrally accurate for periodic integrands).
pub fn marcum_q1_quadrature(a: f64, b: f64) -> f64 {
    let i0_scaled = |z: f64| {
        // exp(-z) I0(z) = (1/pi) int_0^pi exp(z (cos t - 1)) dt
        let n = 600;
        let h = std::f64::consts::PI / n as f64;
        let mut sum = 0.5 * (1.0 + (-2.0 * z).exp());
        for k in 1..n {
            sum += (z * ((k as f64 * h).cos() - 1.0)).exp();
        }
        sum * h / std::f64::consts::PI
    };
    let integrand = |x: f64| x * (-0.5 * (x - a) * (x - a)).exp() * i0_scaled(a * x);
    // Integrate whichever side is shorter; the integrand is negligible
    // beyond a + 40.
    let upper = a.max(b) + 40.0;
    let (lo, hi, tail) = if b < a { (0.0, b, false) } else { (b, upper, true) };
    let n = (((hi - lo) / 4e-3).ceil() as usize).max(2) & !1;
    let h = (hi - lo) / n as f64;
    let mut sum = integrand(lo) + integrand(hi);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * integrand(lo + k as f64 * h);
    }
    let part = sum * h / 3.0;
    if tail {
        part
    } else {
        1.0 - part
    }
}
