//! System configuration, validation, and the key-value config file format.
//!
//! Config files are TOML. Keys are the field names listed on
//! [`SystemConfig`]; any key may instead be given in decibels with a
//! `_db` suffix (linear = 10^(v/10)) or in dBm with a `_dbm` suffix
//! (linear watts = 10^((v-30)/10)). For example `noise_density_N0_dbm =
//! -170` is read as `noise_density_N0 = 1e-20`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of the region AGUs are dropped into, centered at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AreaShape {
    /// Square of side `area_side`.
    #[default]
    Square,
    /// Disk of radius `area_side`.
    Disk,
}

/// Physical and algorithmic constants for one problem instance.
///
/// All quantities are linear (watts, hertz, meters). Rates are spectral
/// efficiencies in b/s/Hz, so `playback_rate_rbar` is the playback rate
/// divided by the system bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(rename = "bandwidth_B")]
    pub bandwidth: f64,
    #[serde(rename = "noise_density_N0")]
    pub noise_density: f64,
    #[serde(rename = "ref_gain_alpha0")]
    pub ref_gain: f64,
    #[serde(rename = "height_obs_Ho")]
    pub height_obs: f64,
    #[serde(rename = "height_relay_Hr")]
    pub height_relay: f64,
    #[serde(rename = "height_gbs_Hb")]
    pub height_gbs: f64,
    #[serde(rename = "rician_K")]
    pub rician_k: f64,
    #[serde(rename = "outage_target_rho")]
    pub outage_target: f64,
    pub p_max_user: f64,
    pub p_max_obs: f64,
    pub p_max_relay: f64,
    pub utility_theta: f64,
    pub utility_beta: f64,
    #[serde(rename = "playback_rate_rbar")]
    pub playback_rate: f64,
    #[serde(rename = "num_users_U")]
    pub num_users: usize,
    pub area_side: f64,
    #[serde(default)]
    pub area_shape: AreaShape,
    #[serde(rename = "network_size_D")]
    pub network_size: f64,
    pub rng_seed: u64,
    /// Duality-gap tolerance for every convex subproblem solve.
    pub sca_tol: f64,
    /// Stop once the exact objective improves by less than this.
    pub bcd_tol: f64,
    pub max_bcd_iters: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self::table2()
    }
}

impl SystemConfig {
    /// Simulation defaults: 1 MHz, -170 dBm/Hz, -60 dB reference gain,
    /// 100 m UAV altitude, 20 m GBS, K = 4, rho = 0.01.
    pub fn table2() -> Self {
        Self {
            bandwidth: 1e6,
            noise_density: 1e-20,
            ref_gain: 1e-6,
            height_obs: 100.0,
            height_relay: 100.0,
            height_gbs: 20.0,
            rician_k: 4.0,
            outage_target: 0.01,
            p_max_user: 0.2,
            p_max_obs: 0.1,
            p_max_relay: 0.1,
            utility_theta: 0.8,
            utility_beta: 100.0,
            playback_rate: 1.0,
            num_users: 30,
            area_side: 500.0,
            area_shape: AreaShape::Square,
            network_size: 2500.0,
            rng_seed: 1,
            sca_tol: 1e-9,
            bcd_tol: 1e-4,
            max_bcd_iters: 100,
        }
    }

    /// mu0 = alpha0 / (B N0).
    pub fn mu0(&self) -> f64 {
        self.ref_gain / (self.bandwidth * self.noise_density)
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(name: &str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be finite and > 0, got {v}")))
            }
        }
        positive("bandwidth_B", self.bandwidth)?;
        positive("noise_density_N0", self.noise_density)?;
        positive("ref_gain_alpha0", self.ref_gain)?;
        positive("height_obs_Ho", self.height_obs)?;
        positive("height_relay_Hr", self.height_relay)?;
        positive("height_gbs_Hb", self.height_gbs)?;
        positive("p_max_user", self.p_max_user)?;
        positive("p_max_obs", self.p_max_obs)?;
        positive("p_max_relay", self.p_max_relay)?;
        positive("utility_theta", self.utility_theta)?;
        positive("utility_beta", self.utility_beta)?;
        positive("playback_rate_rbar", self.playback_rate)?;
        positive("network_size_D", self.network_size)?;
        positive("sca_tol", self.sca_tol)?;
        positive("bcd_tol", self.bcd_tol)?;
        if !(self.rician_k.is_finite() && self.rician_k >= 0.0) {
            return Err(Error::Config(format!("rician_K must be >= 0, got {}", self.rician_k)));
        }
        if !(self.outage_target > 0.0 && self.outage_target < 1.0) {
            return Err(Error::Config(format!(
                "outage_target_rho must lie in (0, 1), got {}",
                self.outage_target
            )));
        }
        // zero is allowed: every AGU then sits at the origin
        if !(self.area_side.is_finite() && self.area_side >= 0.0) {
            return Err(Error::Config(format!("area_side must be >= 0, got {}", self.area_side)));
        }
        if self.num_users == 0 {
            return Err(Error::Config("num_users_U must be >= 1".into()));
        }
        if self.max_bcd_iters == 0 {
            return Err(Error::Config("max_bcd_iters must be >= 1".into()));
        }
        let mu0 = self.mu0();
        if !(mu0.is_finite() && mu0 > 0.0) {
            return Err(Error::Config(format!("derived mu0 = {mu0} is not finite and positive")));
        }
        Ok(())
    }

    /// Parses and validates a config file body.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        let table = linearize_decibel_keys(table)?;
        let cfg: SystemConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Renders a commented config file that [`SystemConfig::from_toml_str`]
    /// reads back to an identical value.
    pub fn to_documented_toml(&self, title: &str) -> String {
        let mut out = String::new();
        out.push_str(&format!("# {title}\n# All values linear (W, Hz, m). Any key also accepts a _db or _dbm suffix.\n\n"));
        let mut float = |key: &str, doc: &str, v: f64| {
            out.push_str(&format!("# {doc}\n{key} = {v:?}\n"));
        };
        float("bandwidth_B", "system bandwidth (Hz)", self.bandwidth);
        float("noise_density_N0", "noise power spectral density (W/Hz); -170 dBm/Hz = 1e-20", self.noise_density);
        float("ref_gain_alpha0", "channel power gain at 1 m; -60 dB = 1e-6", self.ref_gain);
        float("height_obs_Ho", "observation UAV altitude (m)", self.height_obs);
        float("height_relay_Hr", "relay UAV altitude (m)", self.height_relay);
        float("height_gbs_Hb", "ground base station antenna height (m)", self.height_gbs);
        float("rician_K", "Rician factor of the AGU uplink", self.rician_k);
        float("outage_target_rho", "target rate outage probability", self.outage_target);
        float("p_max_user", "AGU transmit power budget (W)", self.p_max_user);
        float("p_max_obs", "observation UAV transmit power budget (W)", self.p_max_obs);
        float("p_max_relay", "relay UAV transmit power budget (W)", self.p_max_relay);
        float("utility_theta", "streaming utility scale", self.utility_theta);
        float("utility_beta", "streaming utility rate multiplier", self.utility_beta);
        float("playback_rate_rbar", "playback rate in b/s/Hz (1 Mbps over 1 MHz = 1)", self.playback_rate);
        float("area_side", "side of the AGU square, or radius when area_shape = \"disk\" (m)", self.area_side);
        float("network_size_D", "distance from area center to the GBS (m)", self.network_size);
        float("sca_tol", "duality-gap tolerance of each convex subproblem", self.sca_tol);
        float("bcd_tol", "stop when the objective improves by less than this", self.bcd_tol);
        let shape = match self.area_shape {
            AreaShape::Square => "square",
            AreaShape::Disk => "disk",
        };
        out.push_str(&format!("# number of AGUs\nnum_users_U = {}\n", self.num_users));
        out.push_str(&format!("# AGU region shape: square or disk\narea_shape = \"{shape}\"\n"));
        out.push_str(&format!("# seed for AGU placement\nrng_seed = {}\n", self.rng_seed));
        out.push_str(&format!("# iteration cap for the alternating loop\nmax_bcd_iters = {}\n", self.max_bcd_iters));
        out
    }
}

fn linearize_decibel_keys(table: toml::Table) -> Result<toml::Table> {
    let mut out = toml::Table::new();
    for (key, value) in table {
        let (name, linear) = if let Some(base) = key.strip_suffix("_dbm") {
            (base.to_string(), Some(decibel_value(&key, &value)? - 30.0))
        } else if let Some(base) = key.strip_suffix("_db") {
            (base.to_string(), Some(decibel_value(&key, &value)?))
        } else {
            (key.clone(), None)
        };
        let value = match linear {
            Some(db) => toml::Value::Float(10f64.powf(db / 10.0)),
            None => value,
        };
        if out.insert(name.clone(), value).is_some() {
            return Err(Error::Config(format!("{name} given more than once")));
        }
    }
    Ok(out)
}

fn decibel_value(key: &str, value: &toml::Value) -> Result<f64> {
    match value {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(Error::Config(format!("{key} must be numeric"))),
    }
}

/// One named preset.
#[derive(Debug, Clone)]
pub struct Preset {
    pub name: String,
    pub description: String,
    pub config: SystemConfig,
}

pub const PRESET_NAMES: [&str; 2] = ["table2", "video_scenarios"];

/// Built-in presets. `video_scenarios` returns editable placeholder
/// utility parameters for different content types; the physical layer is
/// the `table2` one.
pub fn preset(name: &str) -> Result<Vec<Preset>> {
    match name {
        "table2" => Ok(vec![Preset {
            name: "table2".into(),
            description: "default simulation parameters".into(),
            config: SystemConfig::table2(),
        }]),
        "video_scenarios" => {
            // placeholders: (name, theta, beta, rbar)
            let variants = [
                ("baseline", 0.8, 100.0, 1.0),
                ("surveillance", 0.6, 60.0, 0.5),
                ("live_sports", 1.0, 150.0, 2.0),
                ("video_call", 0.7, 80.0, 0.75),
                ("high_definition", 1.2, 200.0, 4.0),
            ];
            Ok(variants
                .iter()
                .map(|&(n, theta, beta, rbar)| Preset {
                    name: format!("video_{n}"),
                    description: format!(
                        "video scenario '{n}': placeholder utility parameters, edit to taste"
                    ),
                    config: SystemConfig {
                        utility_theta: theta,
                        utility_beta: beta,
                        playback_rate: rbar,
                        ..SystemConfig::table2()
                    },
                })
                .collect())
        }
        other => Err(Error::Config(format!(
            "unknown preset '{other}', expected one of {PRESET_NAMES:?}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table2_values() {
        let c = SystemConfig::table2();
        assert_eq!(c.bandwidth, 1e6);
        assert_eq!(c.noise_density, 1e-20);
        assert_eq!(c.ref_gain, 1e-6);
        assert_eq!((c.height_obs, c.height_relay, c.height_gbs), (100.0, 100.0, 20.0));
        assert_eq!(c.rician_k, 4.0);
        assert_eq!(c.outage_target, 0.01);
        assert_eq!((c.p_max_obs, c.p_max_relay, c.p_max_user), (0.1, 0.1, 0.2));
        assert_eq!((c.utility_theta, c.utility_beta, c.playback_rate), (0.8, 100.0, 1.0));
        assert!((c.mu0() - 1e8).abs() < 1e-6);
    }

    #[test]
    fn documented_toml_round_trips() {
        for name in PRESET_NAMES {
            for p in preset(name).unwrap() {
                let text = p.config.to_documented_toml(&p.description);
                let back = SystemConfig::from_toml_str(&text).unwrap();
                assert_eq!(back, p.config);
            }
        }
        let odd = SystemConfig {
            noise_density: 3.7e-21,
            area_shape: AreaShape::Disk,
            rng_seed: u32::MAX as u64,
            outage_target: 0.123456789012345,
            ..SystemConfig::table2()
        };
        assert_eq!(SystemConfig::from_toml_str(&odd.to_documented_toml("x")).unwrap(), odd);
    }

    #[test]
    fn decibel_suffixes_are_converted() {
        let mut text = SystemConfig::table2().to_documented_toml("t");
        text = text
            .lines()
            .filter(|l| !l.starts_with("noise_density_N0") && !l.starts_with("ref_gain_alpha0"))
            .collect::<Vec<_>>()
            .join("\n");
        text.push_str("\nnoise_density_N0_dbm = -170\nref_gain_alpha0_db = -60.0\n");
        let c = SystemConfig::from_toml_str(&text).unwrap();
        assert!((c.noise_density / 1e-20 - 1.0).abs() < 1e-12);
        assert!((c.ref_gain / 1e-6 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_linear_and_db_key_rejected() {
        let mut text = SystemConfig::table2().to_documented_toml("t");
        text.push_str("ref_gain_alpha0_db = -60\n");
        assert!(matches!(SystemConfig::from_toml_str(&text), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_values_rejected() {
        let bad = [
            SystemConfig { outage_target: 1.0, ..SystemConfig::table2() },
            SystemConfig { outage_target: 0.0, ..SystemConfig::table2() },
            SystemConfig { num_users: 0, ..SystemConfig::table2() },
            SystemConfig { bandwidth: -1.0, ..SystemConfig::table2() },
            SystemConfig { rician_k: -0.5, ..SystemConfig::table2() },
            SystemConfig { p_max_obs: 0.0, ..SystemConfig::table2() },
            SystemConfig { area_side: f64::NAN, ..SystemConfig::table2() },
            SystemConfig { noise_density: 1e-320, ref_gain: 1e10, ..SystemConfig::table2() },
        ];
        for c in bad {
            let err = c.validate().unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{c:?}");
        }
    }

    #[test]
    fn unknown_key_and_unknown_preset_rejected() {
        let mut text = SystemConfig::table2().to_documented_toml("t");
        text.push_str("warp_factor = 9\n");
        assert!(SystemConfig::from_toml_str(&text).is_err());
        assert!(preset("nope").is_err());
    }
}
