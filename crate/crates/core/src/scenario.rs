//! Problem instance: GBS and AGU ground positions plus UAV placement
//! geometry.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{AreaShape, SystemConfig};
use crate::error::Result;

/// Ground-plane coordinates in meters.
pub type Point = [f64; 2];

#[inline]
pub fn dist_sq(a: Point, b: Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// Ground projections of the observation and relay UAVs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UavPlacement {
    pub q_obs: Point,
    pub q_relay: Point,
}

impl UavPlacement {
    pub fn is_finite(&self) -> bool {
        self.q_obs.iter().chain(self.q_relay.iter()).all(|v| v.is_finite())
    }
}

/// Three-dimensional link lengths for one AGU.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkDistances {
    pub d_uo: f64,
    pub d_or: f64,
    pub d_rb: f64,
}

/// Immutable problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: SystemConfig,
    pub gbs_pos: Point,
    pub agu_pos: Vec<Point>,
}

impl Scenario {
    /// Builds a scenario from explicit AGU positions. The GBS is always
    /// placed at `[-D, 0]`.
    pub fn with_users(config: SystemConfig, agu_pos: Vec<Point>) -> Result<Self> {
        config.validate()?;
        if agu_pos.len() != config.num_users {
            return Err(crate::Error::Config(format!(
                "expected {} AGU positions, got {}",
                config.num_users,
                agu_pos.len()
            )));
        }
        if agu_pos.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(crate::Error::Config("AGU positions must be finite".into()));
        }
        Ok(Self { gbs_pos: [-config.network_size, 0.0], config, agu_pos })
    }

    pub fn num_users(&self) -> usize {
        self.agu_pos.len()
    }

    pub fn centroid(&self) -> Point {
        let n = self.agu_pos.len() as f64;
        let (sx, sy) = self
            .agu_pos
            .iter()
            .fold((0.0, 0.0), |(sx, sy), p| (sx + p[0], sy + p[1]));
        [sx / n, sy / n]
    }

    /// Squared 3-D distance from AGU `user` to the observation UAV.
    pub fn d_uo_sq(&self, q_obs: Point, user: usize) -> f64 {
        let h = self.config.height_obs;
        h * h + dist_sq(q_obs, self.agu_pos[user])
    }

    /// Squared 3-D distance between the two UAVs.
    pub fn d_or_sq(&self, placement: &UavPlacement) -> f64 {
        let h = self.config.height_relay - self.config.height_obs;
        h * h + dist_sq(placement.q_relay, placement.q_obs)
    }

    /// Squared 3-D distance from the relay UAV to the GBS.
    pub fn d_rb_sq(&self, q_relay: Point) -> f64 {
        let h = self.config.height_gbs - self.config.height_relay;
        h * h + dist_sq(self.gbs_pos, q_relay)
    }

    /// Squared 3-D distance from the observation UAV straight to the GBS.
    pub fn d_ob_sq(&self, q_obs: Point) -> f64 {
        let h = self.config.height_gbs - self.config.height_obs;
        h * h + dist_sq(self.gbs_pos, q_obs)
    }

    /// Half-width of the square the UAV positions are confined to while
    /// optimizing: four times the larger of the network size and the area.
    pub fn working_half_width(&self) -> f64 {
        4.0 * self.config.network_size.max(self.config.area_side)
    }
}

/// Drops `num_users_U` AGUs uniformly over the configured area using a
/// ChaCha8 stream seeded by `rng_seed`.
pub fn generate_scenario(config: &SystemConfig) -> Result<Scenario> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let side = config.area_side;
    let users = (0..config.num_users)
        .map(|_| match config.area_shape {
            AreaShape::Square => {
                let x = side * (rng.random::<f64>() - 0.5);
                let y = side * (rng.random::<f64>() - 0.5);
                [x, y]
            }
            AreaShape::Disk => {
                let r = side * rng.random::<f64>().sqrt();
                let phi = std::f64::consts::TAU * rng.random::<f64>();
                [r * phi.cos(), r * phi.sin()]
            }
        })
        .collect();
    Scenario::with_users(config.clone(), users)
}

pub fn distances(scenario: &Scenario, placement: &UavPlacement, user: usize) -> LinkDistances {
    LinkDistances {
        d_uo: scenario.d_uo_sq(placement.q_obs, user).sqrt(),
        d_or: scenario.d_or_sq(placement).sqrt(),
        d_rb: scenario.d_rb_sq(placement.q_relay).sqrt(),
    }
}
