//! Parameter sweeps over many random scenarios, and the CSV files they
//! produce.
//!
//! Every file is written with fixed columns and can be read back with the
//! matching `read_*` function.

use std::io::{Read, Write};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::orchestrator::{run_benchmark, IterationTrace, SchemeId};
use crate::scenario::generate_scenario;

/// The configuration entry varied along a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVar {
    NumUsers,
    /// All three power budgets, scaled together; the sweep value is the
    /// AGU budget and the UAV budgets keep their ratio to it.
    PowerBudget,
    Rho,
    NetworkSize,
}

impl SweepVar {
    pub const ALL: [SweepVar; 4] =
        [SweepVar::NumUsers, SweepVar::PowerBudget, SweepVar::Rho, SweepVar::NetworkSize];

    pub fn as_str(self) -> &'static str {
        match self {
            SweepVar::NumUsers => "num_users",
            SweepVar::PowerBudget => "power_budget",
            SweepVar::Rho => "rho",
            SweepVar::NetworkSize => "network_size_D",
        }
    }

    /// Grid used when none is given.
    pub fn default_grid(self) -> Vec<f64> {
        match self {
            SweepVar::NumUsers => vec![10.0, 20.0, 30.0],
            SweepVar::PowerBudget => vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.5],
            SweepVar::Rho => vec![1e-4, 1e-3, 1e-2, 0.05, 0.1, 0.2, 0.3, 0.5],
            SweepVar::NetworkSize => vec![1500.0, 2000.0, 2500.0, 3000.0, 3200.0],
        }
    }

    /// `base` with this variable set to `value`.
    pub fn apply(self, base: &SystemConfig, value: f64) -> Result<SystemConfig> {
        let mut c = base.clone();
        match self {
            SweepVar::NumUsers => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(Error::Config(format!("num_users must be a positive integer, got {value}")));
                }
                c.num_users = value as usize;
            }
            SweepVar::PowerBudget => {
                let scale = value / base.p_max_user;
                c.p_max_user = value;
                c.p_max_obs = base.p_max_obs * scale;
                c.p_max_relay = base.p_max_relay * scale;
            }
            SweepVar::Rho => c.outage_target = value,
            SweepVar::NetworkSize => c.network_size = value,
        }
        c.validate()?;
        Ok(c)
    }
}

impl FromStr for SweepVar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepVar::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown sweep variable {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub var: SweepVar,
    /// Strictly increasing, non-empty.
    pub grid: Vec<f64>,
    /// Scenario seeds; every grid point uses all of them.
    pub seeds: Vec<u64>,
    pub schemes: Vec<SchemeId>,
}

impl SweepSpec {
    /// `count` consecutive seeds starting at `first_seed`.
    pub fn new(var: SweepVar, grid: Vec<f64>, first_seed: u64, count: usize, schemes: Vec<SchemeId>) -> Result<Self> {
        let spec = Self { var, grid, seeds: (first_seed..first_seed + count as u64).collect(), schemes };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        if self.grid.iter().any(|v| !v.is_finite()) || self.grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("sweep grid must be finite and strictly increasing".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("at least one scheme is required".into()));
        }
        Ok(())
    }
}

/// One (scheme, grid value, seed) outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scheme: String,
    pub sweep_var: String,
    pub sweep_value: f64,
    pub seed: u64,
    /// Empty when the run failed.
    pub avg_utility: Option<f64>,
    pub iters: usize,
    /// Wall-clock milliseconds; 0 when timing is disabled.
    pub wall_ms: u64,
    /// `converged`, `max_iters`, `stalled`, `infeasible`, `numeric_error`
    /// or `config_error`.
    pub status: String,
}

/// Seed average of one (scheme, grid value).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scheme: String,
    pub sweep_var: String,
    pub sweep_value: f64,
    /// Mean over the seeds that succeeded; empty if none did.
    pub mean_utility: Option<f64>,
    pub seeds_ok: usize,
    pub seeds_failed: usize,
}

/// One iteration of a convergence trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub exact_objective: f64,
    pub lower_bound_objective: f64,
    pub q_obs_x: f64,
    pub q_obs_y: f64,
    pub q_relay_x: f64,
    pub q_relay_y: f64,
}

fn error_status(err: &Error) -> &'static str {
    match err {
        Error::Infeasible(_) => "infeasible",
        Error::Domain(_) | Error::Numeric { .. } => "numeric_error",
        Error::Config(_) | Error::Io(_) | Error::Csv(_) => "config_error",
    }
}

/// Runs every scheme of `spec` on one (grid value, seed) scenario.
fn run_point(base: &SystemConfig, spec: &SweepSpec, value: f64, seed: u64, timing: bool) -> Vec<ResultRow> {
    let row = |scheme: SchemeId, avg_utility, iters, wall_ms, status: &str| ResultRow {
        scheme: scheme.as_str().to_string(),
        sweep_var: spec.var.as_str().to_string(),
        sweep_value: value,
        seed,
        avg_utility,
        iters,
        wall_ms,
        status: status.to_string(),
    };
    let scenario = spec.var.apply(base, value).and_then(|mut c| {
        c.rng_seed = seed;
        generate_scenario(&c)
    });
    let scenario = match scenario {
        Ok(s) => s,
        Err(e) => return spec.schemes.iter().map(|&s| row(s, None, 0, 0, error_status(&e))).collect(),
    };
    spec.schemes
        .iter()
        .map(|&scheme| {
            let start = Instant::now();
            let outcome = run_benchmark(&scenario, scheme);
            let wall_ms = if timing { start.elapsed().as_millis() as u64 } else { 0 };
            match outcome {
                Ok(r) => row(scheme, Some(r.average_utility), r.iterations, wall_ms, r.status.as_str()),
                Err(e) => row(scheme, None, 0, wall_ms, error_status(&e)),
            }
        })
        .collect()
}

/// Runs the sweep on a pool of `workers` threads (0 = one per core).
/// Failures are recorded per row. Rows are ordered by grid value, seed
/// and scheme (in `spec.schemes` order) regardless of scheduling.
pub fn run_sweep(base: &SystemConfig, spec: &SweepSpec, workers: usize, timing: bool) -> Result<Vec<ResultRow>> {
    use rayon::prelude::*;

    spec.validate()?;
    let jobs: Vec<(usize, usize)> = (0..spec.grid.len())
        .flat_map(|g| (0..spec.seeds.len()).map(move |s| (g, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let mut keyed: Vec<((usize, usize), Vec<ResultRow>)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(g, s)| ((g, s), run_point(base, spec, spec.grid[g], spec.seeds[s], timing)))
            .collect()
    });
    keyed.sort_by_key(|(key, _)| *key);
    Ok(keyed.into_iter().flat_map(|(_, rows)| rows).collect())
}

/// Seed-averaged summary, one row per (scheme, grid value), in the order
/// the pairs first appear in `rows`.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut out: Vec<(SummaryRow, f64)> = Vec::new();
    for r in rows {
        let idx = match out
            .iter()
            .position(|(s, _)| s.scheme == r.scheme && s.sweep_value == r.sweep_value)
        {
            Some(i) => i,
            None => {
                out.push((
                    SummaryRow {
                        scheme: r.scheme.clone(),
                        sweep_var: r.sweep_var.clone(),
                        sweep_value: r.sweep_value,
                        mean_utility: None,
                        seeds_ok: 0,
                        seeds_failed: 0,
                    },
                    0.0,
                ));
                out.len() - 1
            }
        };
        let (summary, total) = &mut out[idx];
        match r.avg_utility {
            Some(u) => {
                summary.seeds_ok += 1;
                *total += u;
            }
            None => summary.seeds_failed += 1,
        }
    }
    out.into_iter()
        .map(|(mut s, total)| {
            if s.seeds_ok > 0 {
                s.mean_utility = Some(total / s.seeds_ok as f64);
            }
            s
        })
        .collect()
}

/// Flattens an iteration trace into CSV rows.
pub fn trace_rows(trace: &IterationTrace) -> Vec<TraceRow> {
    trace
        .records
        .iter()
        .map(|r| TraceRow {
            iteration: r.iteration,
            exact_objective: r.exact_objective,
            lower_bound_objective: r.lower_bound_objective,
            q_obs_x: r.state.placement.q_obs[0],
            q_obs_y: r.state.placement.q_obs[1],
            q_relay_x: r.state.placement.q_relay[0],
            q_relay_y: r.state.placement.q_relay[1],
        })
        .collect()
}

fn write_rows<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<T: for<'de> Deserialize<'de>, R: Read>(input: R) -> Result<Vec<T>> {
    csv::Reader::from_reader(input).deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn write_results<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    write_rows(rows, out)
}

pub fn read_results<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    read_rows(input)
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    write_rows(rows, out)
}

pub fn read_summary<R: Read>(input: R) -> Result<Vec<SummaryRow>> {
    read_rows(input)
}

pub fn write_trace<W: Write>(rows: &[TraceRow], out: W) -> Result<()> {
    write_rows(rows, out)
}

pub fn read_trace<R: Read>(input: R) -> Result<Vec<TraceRow>> {
    read_rows(input)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_base() -> SystemConfig {
        SystemConfig { num_users: 4, ..SystemConfig::table2() }
    }

    #[test]
    fn power_budget_scales_all_three() {
        let c = SweepVar::PowerBudget.apply(&SystemConfig::table2(), 0.5).unwrap();
        assert_eq!((c.p_max_user, c.p_max_obs, c.p_max_relay), (0.5, 0.25, 0.25));
    }

    #[test]
    fn bad_values_rejected() {
        assert!(SweepVar::NumUsers.apply(&small_base(), 2.5).is_err());
        assert!(SweepVar::Rho.apply(&small_base(), 1.0).is_err());
        assert!("altitude".parse::<SweepVar>().is_err());
        assert!(SweepSpec::new(SweepVar::Rho, vec![0.1, 0.1], 0, 1, vec![SchemeId::Joint]).is_err());
        assert!(SweepSpec::new(SweepVar::Rho, vec![], 0, 1, vec![SchemeId::Joint]).is_err());
        assert!(SweepSpec::new(SweepVar::Rho, vec![0.1], 0, 0, vec![SchemeId::Joint]).is_err());
    }

    #[test]
    fn sweep_rows_are_ordered_and_deterministic() {
        let spec = SweepSpec::new(
            SweepVar::NumUsers,
            vec![2.0, 3.0],
            5,
            2,
            vec![SchemeId::RelayBaseline, SchemeId::Joint],
        )
        .unwrap();
        let a = run_sweep(&small_base(), &spec, 2, false).unwrap();
        let b = run_sweep(&small_base(), &spec, 1, false).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 8);
        let keys: Vec<(f64, u64, &str)> =
            a.iter().map(|r| (r.sweep_value, r.seed, r.scheme.as_str())).collect();
        assert_eq!(keys[0], (2.0, 5, "relay_baseline"));
        assert_eq!(keys[1], (2.0, 5, "joint"));
        assert_eq!(keys[2], (2.0, 6, "relay_baseline"));
        assert_eq!(keys[7], (3.0, 6, "joint"));

        let mut buf = Vec::new();
        write_results(&a, &mut buf).unwrap();
        assert_eq!(read_results(buf.as_slice()).unwrap(), a);
        let header = String::from_utf8(buf).unwrap();
        assert!(header.starts_with("scheme,sweep_var,sweep_value,seed,avg_utility,iters,wall_ms,status\n"));

        let summary = summarize(&a);
        assert_eq!(summary.len(), 4);
        let mut buf = Vec::new();
        write_summary(&summary, &mut buf).unwrap();
        assert_eq!(read_summary(buf.as_slice()).unwrap(), summary);
    }

    #[test]
    fn failures_are_recorded_per_row() {
        let spec =
            SweepSpec::new(SweepVar::Rho, vec![0.5, 2.0], 1, 1, vec![SchemeId::RelayBaseline]).unwrap();
        let rows = run_sweep(&small_base(), &spec, 1, false).unwrap();
        assert_eq!(rows[0].status, "converged");
        assert_eq!(rows[1].status, "config_error");
        assert_eq!(rows[1].avg_utility, None);
        let summary = summarize(&rows);
        assert_eq!((summary[1].seeds_ok, summary[1].seeds_failed), (0, 1));
        let mut buf = Vec::new();
        write_results(&rows, &mut buf).unwrap();
        assert_eq!(read_results(buf.as_slice()).unwrap(), rows);
    }
}
