//! Link-level math: Rician power statistics, channel gains, achievable
//! spectral efficiencies and rate outage probability.

mod marcum;

use std::f64::consts::LN_2;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::scenario::{dist_sq, Point};

/// Default absolute tolerance on `F(z) - rho` for the inverse CDF.
pub const INVERSE_CDF_TOL: f64 = 1e-10;

/// Small-scale fading of the AGU uplink: `|eps|^2` is Rician with unit
/// mean power and LoS-to-scatter ratio `rician_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingModel {
    pub rician_k: f64,
}

impl FadingModel {
    pub fn new(rician_k: f64) -> Result<Self> {
        if !(rician_k.is_finite() && rician_k >= 0.0) {
            return Err(Error::Domain(format!("Rician factor must be >= 0, got {rician_k}")));
        }
        Ok(Self { rician_k })
    }

    pub fn cdf(&self, z: f64) -> f64 {
        rician_cdf(z, self.rician_k)
    }

    pub fn inverse_cdf(&self, rho: f64, tol: f64) -> Result<f64> {
        rician_cdf_inverse(rho, self.rician_k, tol)
    }
}

/// Constants shared by every AGU-link rate: `mu0 = alpha0 / (B N0)` and
/// the fading quantile `F^-1(rho)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub mu0: f64,
    pub inv_cdf_at_rho: f64,
}

impl LinkBudget {
    pub fn from_config(config: &SystemConfig) -> Result<Self> {
        let inv = rician_cdf_inverse(config.outage_target, config.rician_k, INVERSE_CDF_TOL)?;
        Ok(Self { mu0: config.mu0(), inv_cdf_at_rho: inv })
    }
}

/// Rate of a UAV-UAV or UAV-GBS link. Coincident endpoints make the
/// free-space SNR unbounded; that case is reported instead of returning a
/// bare infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinkRate {
    Finite(f64),
    Coincident,
}

impl LinkRate {
    pub fn value(self) -> f64 {
        match self {
            LinkRate::Finite(r) => r,
            LinkRate::Coincident => f64::INFINITY,
        }
    }

    pub fn is_degenerate(self) -> bool {
        matches!(self, LinkRate::Coincident)
    }
}

/// Large-scale power gain `alpha0 / d^2`.
pub fn large_scale_gain(distance: f64, ref_gain: f64) -> f64 {
    ref_gain / (distance * distance)
}

/// First-order Marcum Q-function `Q1(a, b)`.
pub fn marcum_q1(a: f64, b: f64) -> f64 {
    marcum::marcum_q1_pair(a.max(0.0), b.max(0.0)).0
}

/// CDF of the Rician power `|eps|^2`:
/// `F(z) = 1 - Q1(sqrt(2K), sqrt(2(K+1)z))`.
pub fn rician_cdf(z: f64, rician_k: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    if z == f64::INFINITY {
        return 1.0;
    }
    let a = (2.0 * rician_k).sqrt();
    let b = (2.0 * (rician_k + 1.0) * z).sqrt();
    marcum::marcum_q1_pair(a, b).1
}

/// Inverts [`rician_cdf`] by doubling an upper bracket from 1 and then
/// bisecting until `|F(z) - rho| <= tol`.
pub fn rician_cdf_inverse(rho: f64, rician_k: f64, tol: f64) -> Result<f64> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Domain(format!("outage target must lie in (0, 1), got {rho}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be > 0, got {tol}")));
    }
    let cdf = |z| rician_cdf(z, rician_k);
    let mut hi = 1.0;
    while cdf(hi) < rho {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Numeric { context: "inverse CDF bracket".into(), point: vec![rho] });
        }
    }
    let mut lo = 0.0;
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..2000 {
        mid = 0.5 * (lo + hi);
        let f = cdf(mid);
        if (f - rho).abs() <= tol || mid <= lo || mid >= hi {
            break;
        }
        if f < rho {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

/// `x log2(1 + c p / x)`, extended by continuity to 0 at `x = 0`.
#[inline]
pub(crate) fn perspective_rate(x: f64, snr_per_watt: f64, p: f64) -> f64 {
    if x <= 0.0 || p <= 0.0 {
        return 0.0;
    }
    x * (snr_per_watt * p / x).ln_1p() / LN_2
}

/// `log2(1 + snr)`.
#[inline]
pub(crate) fn shannon(snr: f64) -> f64 {
    snr.ln_1p() / LN_2
}

/// Outage-constrained AGU uplink rate (b/s/Hz):
/// `x log2(1 + F^-1(rho) P mu0 / (x (Ho^2 + |q_obs - w_u|^2)))`.
pub fn rate_agu(
    x_u: f64,
    p_u: f64,
    q_obs: Point,
    w_u: Point,
    budget: &LinkBudget,
    height_obs: f64,
) -> Result<f64> {
    if p_u < 0.0 {
        return Err(Error::Domain(format!("transmit power must be >= 0, got {p_u}")));
    }
    if p_u == 0.0 {
        return Ok(0.0);
    }
    if !(x_u > 0.0 && x_u <= 1.0) {
        return Err(Error::Domain(format!("bandwidth share must lie in (0, 1], got {x_u}")));
    }
    let d_sq = height_obs * height_obs + dist_sq(q_obs, w_u);
    Ok(perspective_rate(x_u, budget.inv_cdf_at_rho * budget.mu0 / d_sq, p_u))
}

fn fspl_rate(power: f64, mu0: f64, d_sq: f64) -> Result<LinkRate> {
    if power < 0.0 {
        return Err(Error::Domain(format!("transmit power must be >= 0, got {power}")));
    }
    if power == 0.0 {
        return Ok(LinkRate::Finite(0.0));
    }
    if d_sq == 0.0 {
        return Ok(LinkRate::Coincident);
    }
    Ok(LinkRate::Finite(shannon(power * mu0 / d_sq)))
}

/// Observation-to-relay rate `log2(1 + P_o mu0 / d_or^2)`.
pub fn rate_relay(
    p_obs: f64,
    q_obs: Point,
    q_relay: Point,
    mu0: f64,
    height_obs: f64,
    height_relay: f64,
) -> Result<LinkRate> {
    let dh = height_relay - height_obs;
    fspl_rate(p_obs, mu0, dh * dh + dist_sq(q_relay, q_obs))
}

/// Relay-to-GBS rate `log2(1 + P_r mu0 / d_rb^2)`.
pub fn rate_gbs(
    p_relay: f64,
    q_relay: Point,
    w_b: Point,
    mu0: f64,
    height_relay: f64,
    height_gbs: f64,
) -> Result<LinkRate> {
    let dh = height_gbs - height_relay;
    fspl_rate(p_relay, mu0, dh * dh + dist_sq(w_b, q_relay))
}

/// Probability that the AGU channel cannot carry `rate` over share `x_u`:
/// `F((2^(R/x) - 1) x (Ho^2 + |q_obs - w_u|^2) / (P mu0))`.
///
/// The factor `x` is the bandwidth-scaled noise of the uplink SNR, the same
/// scaling [`rate_agu`] uses, so the two are exact inverses.
#[allow(clippy::too_many_arguments)]
pub fn outage_probability(
    rate: f64,
    x_u: f64,
    p_u: f64,
    q_obs: Point,
    w_u: Point,
    mu0: f64,
    height_obs: f64,
    rician_k: f64,
) -> Result<f64> {
    if !(x_u > 0.0 && p_u > 0.0) {
        return Err(Error::Domain(format!(
            "outage needs positive share and power, got x = {x_u}, P = {p_u}"
        )));
    }
    let d_sq = height_obs * height_obs + dist_sq(q_obs, w_u);
    let threshold = (rate / x_u * LN_2).exp_m1() * x_u * d_sq / (p_u * mu0);
    Ok(rician_cdf(threshold, rician_k))
}
