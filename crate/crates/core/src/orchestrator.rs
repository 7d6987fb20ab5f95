//! Block coordinate ascent over resources and placement, and the benchmark
//! schemes it is compared against.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scenario::{Scenario, UavPlacement};
use crate::subproblems::{solve_coupled, solve_p5, solve_p7, DecisionState, Model, Topology};

/// Effective rates of the initial state are this fraction of the best
/// feasible ones, leaving every constraint strictly slack.
const INITIAL_RATE_FRACTION: f64 = 0.99;

/// How the placement block of the alternating optimization is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlacementStep {
    /// SCA over the positions with the bandwidth shares fixed
    /// ([`solve_p7`]).
    FixedBandwidth,
    /// SCA over the positions and the bandwidth shares together
    /// ([`solve_coupled`]). Never worse than the fixed-bandwidth step at
    /// its own fixed points, and avoids stopping where every link binds
    /// at once.
    #[default]
    Coupled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeId {
    /// Alternating resource allocation and SCA placement.
    Joint,
    /// Resource allocation only, UAVs kept at the initial placement.
    ResourceOnly,
    /// SCA placement only, equal bandwidth and full power.
    PositionOnly,
    /// Initial placement, equal bandwidth and full power; nothing optimized.
    RelayBaseline,
    /// No relay UAV: the observation UAV sends straight to the GBS;
    /// bandwidth and observation UAV position are optimized.
    NoRelay,
}

impl SchemeId {
    pub const ALL: [SchemeId; 5] = [
        SchemeId::Joint,
        SchemeId::ResourceOnly,
        SchemeId::PositionOnly,
        SchemeId::RelayBaseline,
        SchemeId::NoRelay,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeId::Joint => "joint",
            SchemeId::ResourceOnly => "resource_only",
            SchemeId::PositionOnly => "position_only",
            SchemeId::RelayBaseline => "relay_baseline",
            SchemeId::NoRelay => "no_relay",
        }
    }

    pub fn topology(self) -> Topology {
        match self {
            SchemeId::NoRelay => Topology::Direct,
            _ => Topology::Relay,
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme {s:?}")))
    }
}

/// State after one outer iteration (iteration 0 is the initial state).
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Average utility with exact rates and the best effective rates.
    pub exact_objective: f64,
    /// Average utility of the SCA program at its optimum; equals the exact
    /// objective for iterations without a placement step.
    pub lower_bound_objective: f64,
    pub state: DecisionState,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
}

impl IterationTrace {
    pub fn exact_objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.exact_objective).collect()
    }

    pub fn lower_bound_objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.lower_bound_objective).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    /// The last iteration improved the exact objective by less than
    /// `bcd_tol` (or the scheme has nothing to iterate).
    Converged,
    /// `max_bcd_iters` reached.
    MaxIters,
    /// A placement step could not improve the exact objective; the last
    /// feasible state is reported.
    Stalled,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::MaxIters => "max_iters",
            RunStatus::Stalled => "stalled",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeResult {
    pub scheme: SchemeId,
    pub state: DecisionState,
    pub average_utility: f64,
    pub trace: IterationTrace,
    /// Outer iterations performed (excluding the initial state).
    pub iterations: usize,
    pub status: RunStatus,
}

/// Observation UAV at the AGU centroid, relay UAV halfway to the GBS
/// (co-located with the observation UAV without a relay), equal bandwidth,
/// every power at its budget and effective rates at 99 % of the best
/// feasible ones.
pub fn initialize_state(model: &Model<'_>) -> DecisionState {
    let s = model.scenario;
    let q_obs = s.centroid();
    let q_relay = match model.topology {
        Topology::Relay => [(q_obs[0] + s.gbs_pos[0]) / 2.0, (q_obs[1] + s.gbs_pos[1]) / 2.0],
        Topology::Direct => q_obs,
    };
    let placement = UavPlacement { q_obs, q_relay };
    let n = s.num_users();
    let resources = model.max_power_resources(vec![1.0 / n as f64; n]);
    let r_tilde = model
        .best_rates(&resources, &placement)
        .into_iter()
        .map(|r| INITIAL_RATE_FRACTION * r)
        .collect();
    DecisionState::from_parts(resources, placement, r_tilde)
}

/// Runs the joint scheme from [`initialize_state`].
pub fn run_algorithm1(scenario: &Scenario) -> Result<SchemeResult> {
    let model = Model::new(scenario, Topology::Relay)?;
    let start = initialize_state(&model);
    run_algorithm1_from(&model, start)
}

/// Runs the joint scheme from an arbitrary feasible state.
pub fn run_algorithm1_from(model: &Model<'_>, start: DecisionState) -> Result<SchemeResult> {
    run_algorithm1_with(model, start, PlacementStep::default())
}

/// Runs the joint scheme with an explicit choice of placement step.
pub fn run_algorithm1_with(
    model: &Model<'_>,
    start: DecisionState,
    step: PlacementStep,
) -> Result<SchemeResult> {
    run_bcd(model, start, SchemeId::Joint, true, Some(step))
}

/// Runs one of the schemes on `scenario`.
pub fn run_benchmark(scenario: &Scenario, scheme: SchemeId) -> Result<SchemeResult> {
    let model = Model::new(scenario, scheme.topology())?;
    let start = initialize_state(&model);
    let coupled = Some(PlacementStep::Coupled);
    match scheme {
        SchemeId::Joint | SchemeId::NoRelay => run_bcd(&model, start, scheme, true, coupled),
        SchemeId::ResourceOnly => run_bcd(&model, start, scheme, true, None),
        SchemeId::PositionOnly => {
            run_bcd(&model, start, scheme, false, Some(PlacementStep::FixedBandwidth))
        }
        SchemeId::RelayBaseline => run_bcd(&model, start, scheme, false, None),
    }
}

fn with_context(err: Error, scheme: SchemeId, iteration: usize, block: &str) -> Error {
    match err {
        Error::Infeasible(msg) => {
            Error::Infeasible(format!("{scheme}, iteration {iteration}, {block}: {msg}"))
        }
        other => other,
    }
}

/// Alternates the enabled blocks until the exact objective improves by
/// less than `bcd_tol`, a placement step stalls or the iteration cap is
/// reached.
fn run_bcd(
    model: &Model<'_>,
    start: DecisionState,
    scheme: SchemeId,
    resources_block: bool,
    placement_block: Option<PlacementStep>,
) -> Result<SchemeResult> {
    let config = &model.scenario.config;
    let tol = config.sca_tol;
    let exact0 = model.exact_objective(&start.resources(), &start.placement)?;
    let mut state = start;
    state.r_tilde = model.best_rates(&state.resources(), &state.placement);
    let mut trace = IterationTrace {
        records: vec![IterationRecord {
            iteration: 0,
            exact_objective: exact0,
            lower_bound_objective: exact0,
            state: state.clone(),
        }],
    };
    let finish = |state: DecisionState, trace: IterationTrace, iterations, status| {
        let average_utility = trace.records.last().map_or(exact0, |r| r.exact_objective);
        Ok(SchemeResult { scheme, state, average_utility, trace, iterations, status })
    };
    if !resources_block && placement_block.is_none() {
        return finish(state, trace, 0, RunStatus::Converged);
    }

    let mut previous = exact0;
    for iteration in 1..=config.max_bcd_iters {
        let mut exact = previous;
        let mut lower = previous;
        if resources_block {
            let out = solve_p5(model, &state.placement, &state, tol)
                .map_err(|e| with_context(e, scheme, iteration, "resource allocation"))?;
            state = out.state;
            exact = out.objective;
            lower = exact;
        }
        let mut stalled = false;
        match placement_block {
            Some(PlacementStep::FixedBandwidth) => {
                let out = solve_p7(model, &state.resources(), &state.placement, tol)
                    .map_err(|e| with_context(e, scheme, iteration, "placement"))?;
                stalled = out.stalled;
                state.placement = out.placement;
                exact = out.exact_objective;
                lower = out.lower_bound_objective;
            }
            Some(PlacementStep::Coupled) => {
                let out = solve_coupled(model, &state.resources(), &state.placement, tol)
                    .map_err(|e| with_context(e, scheme, iteration, "placement"))?;
                stalled = out.stalled;
                state.placement = out.placement;
                state.x = out.x;
                exact = out.exact_objective;
                lower = out.lower_bound_objective;
            }
            None => {}
        }
        state.r_tilde = model.best_rates(&state.resources(), &state.placement);
        trace.records.push(IterationRecord {
            iteration,
            exact_objective: exact,
            lower_bound_objective: lower,
            state: state.clone(),
        });
        if stalled {
            return finish(state, trace, iteration, RunStatus::Stalled);
        }
        if exact - previous < config.bcd_tol {
            return finish(state, trace, iteration, RunStatus::Converged);
        }
        previous = exact;
    }
    let iterations = config.max_bcd_iters;
    finish(state, trace, iterations, RunStatus::MaxIters)
}
