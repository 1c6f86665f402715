//! Block-coordinate outer loop over mode selection, power and phases, and
//! the baseline schemes built by switching blocks off.

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::coalition::{form_coalitions, CoalitionConfig, SwitchPower};
use crate::error::{Error, Result};
use crate::params::SimParams;
use crate::phase_search::{optimize_phases, PhaseSearchConfig};
use crate::power::{allocate_power, PowerConfig};
use crate::rate::{Partition, PowerVector, RateModel, Topology};
use crate::ris::{EffectiveGains, PhaseConfig};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SchemeId {
    PA,
    MP,
    RP,
    NonRIS,
    NonCG,
    Fmm,
}

impl SchemeId {
    pub const ALL: [SchemeId; 6] = [
        SchemeId::PA,
        SchemeId::MP,
        SchemeId::RP,
        SchemeId::NonRIS,
        SchemeId::NonCG,
        SchemeId::Fmm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::PA => "PA",
            SchemeId::MP => "MP",
            SchemeId::RP => "RP",
            SchemeId::NonRIS => "NonRIS",
            SchemeId::NonCG => "NonCG",
            SchemeId::Fmm => "Fmm",
        }
    }

    pub fn runs_coalition(self) -> bool {
        !matches!(self, SchemeId::NonCG | SchemeId::Fmm)
    }

    pub fn runs_power(self) -> bool {
        self != SchemeId::MP
    }

    pub fn runs_phase_search(self) -> bool {
        self != SchemeId::RP
    }

    /// Channels the scheme operates on.
    pub fn channels(self, channels: &ChannelRealization) -> Cow<'_, ChannelRealization> {
        if self == SchemeId::NonRIS {
            Cow::Owned(channels.without_reflections())
        } else {
            Cow::Borrowed(channels)
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeId::ALL
            .into_iter()
            .find(|id| id.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::param("scheme", format!("unknown scheme `{s}`")))
    }
}

/// Starting mode assignment for schemes that are not pinned to mm-wave.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialModes {
    /// Each pair uniform over the `C + 1` coalitions.
    #[default]
    Random,
    AllMmWave,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_outer: usize,
    pub initial_modes: InitialModes,
    /// Outer stopping threshold, bit/s.
    pub eps_outer: f64,
    pub coalition: CoalitionConfig,
    pub power: PowerConfig,
    pub phase: PhaseSearchConfig,
    /// Random phase draws tried by RP.
    pub rp_draws: usize,
}

impl SolverConfig {
    pub fn from_params(params: &SimParams) -> Self {
        Self {
            max_outer: 50,
            initial_modes: InitialModes::default(),
            eps_outer: params.epsilon_outer,
            coalition: CoalitionConfig::default(),
            power: PowerConfig {
                eps_inner: params.epsilon_inner,
                ..PowerConfig::default()
            },
            phase: PhaseSearchConfig { max_sweeps: 1 },
            rp_draws: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub sum_rate_bps: f64,
    pub switches: usize,
    pub power_iterations: usize,
    pub phase_changes: usize,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub scheme: SchemeId,
    pub seed: u64,
    pub partition: Partition,
    pub power: PowerVector,
    pub phases: PhaseConfig,
    pub sum_rate_bps: f64,
    pub iterations: usize,
    /// Sum rate at initialization, then after every outer iteration.
    pub rate_trace: Vec<f64>,
    pub feasible: bool,
    /// Links below the SINR floor in the returned state.
    pub violations: Vec<usize>,
    pub termination: Termination,
    pub history: Vec<IterationRecord>,
}

impl SolveResult {
    /// System sum rate of the returned state, evaluated from scratch.
    pub fn recompute_sum_rate(&self, scenario: &Scenario, channels: &ChannelRealization) -> Result<f64> {
        let channels = self.scheme.channels(channels);
        crate::rate::system_sum_rate(scenario, &channels, &self.partition, &self.power, &self.phases)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Per-iteration records as JSON lines.
    pub fn history_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.history {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }
}

const STREAM_PHASES: u64 = 1;
const STREAM_MODES: u64 = 2;
const STREAM_COALITION: u64 = 3;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub fn maximize_sum_rate(
    scenario: &Scenario,
    channels: &ChannelRealization,
    scheme: SchemeId,
    seed: u64,
) -> Result<SolveResult> {
    maximize_sum_rate_with(scenario, channels, scheme, seed, &SolverConfig::from_params(&scenario.params))
}

struct State {
    partition: Partition,
    power: PowerVector,
    phases: PhaseConfig,
    gains: EffectiveGains,
    sum_rate: f64,
}

pub fn maximize_sum_rate_with(
    scenario: &Scenario,
    channels: &ChannelRealization,
    scheme: SchemeId,
    seed: u64,
    config: &SolverConfig,
) -> Result<SolveResult> {
    scenario.params.validate()?;
    if channels.rx_slots != scenario.num_rx_slots() || channels.tx_links != scenario.num_links() {
        return Err(Error::InconsistentState("channels do not match the scenario".into()));
    }
    let channels = scheme.channels(channels);
    let model = RateModel::new(scenario, &channels);
    let c = scenario.num_cellular();
    let d = scenario.num_d2d();

    let mut mode_rng = stream(seed, STREAM_MODES);
    let mut phase_rng = stream(seed, STREAM_PHASES);
    let mut coalition_rng = stream(seed, STREAM_COALITION);

    let pinned = scheme == SchemeId::Fmm
        || (scheme != SchemeId::NonCG && config.initial_modes == InitialModes::AllMmWave);
    let partition = if pinned {
        Partition::all_mmwave(c, d)
    } else {
        Partition::from_assignment(c, (0..d).map(|_| mode_rng.random_range(0..=c)).collect())?
    };
    let power = PowerVector::at_caps(scenario, &partition);
    let topo = Topology::new(scenario, &partition)?;

    let phases = if scheme == SchemeId::RP {
        random_feasible_phases(&model, &topo, &power, &mut phase_rng, config.rp_draws)?
    } else {
        PhaseConfig::random(scenario, &mut phase_rng)
    };
    let gains = EffectiveGains::compose(scenario, &channels, &phases)?;
    let sum_rate = model.system_sum_rate(&topo, &gains, &power);
    let mut state = State {
        partition,
        power,
        phases,
        gains,
        sum_rate,
    };

    let mut rate_trace = vec![sum_rate];
    let mut history = Vec::new();
    let mut best = (sum_rate, state.partition.clone(), state.power.clone(), state.phases.clone());
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;

    for it in 1..=config.max_outer {
        iterations = it;
        let mut record = IterationRecord {
            iteration: it,
            sum_rate_bps: 0.0,
            switches: 0,
            power_iterations: 0,
            phase_changes: 0,
            violations: 0,
        };
        if scheme.runs_coalition() {
            let mut cc = config.coalition;
            if !scheme.runs_power() {
                cc.switch_power = SwitchPower::Cap;
            }
            let out = form_coalitions(
                &model,
                &state.gains,
                state.partition.clone(),
                state.power.clone(),
                &mut coalition_rng,
                &cc,
            )?;
            record.switches = out.trace.len();
            state.partition = out.partition;
            state.power = out.power;
        }
        let topo = Topology::new(scenario, &state.partition)?;
        if scheme.runs_power() {
            for k in 0..state.partition.num_coalitions() {
                let out = allocate_power(&model, &state.partition, &topo, &state.gains, &state.power, k, &config.power)?;
                record.power_iterations += out.solution.iterations;
                state.power = out.power;
            }
        }
        if scheme.runs_phase_search() {
            let out = optimize_phases(&model, &topo, &state.power, state.phases.clone(), &config.phase)?;
            record.phase_changes = out.changes;
            state.phases = out.phases;
            state.gains = out.gains;
        }
        let rate = model.system_sum_rate(&topo, &state.gains, &state.power);
        record.sum_rate_bps = rate;
        record.violations = model.violations(&topo, &state.gains, &state.power).len();
        history.push(record);
        rate_trace.push(rate);

        if rate > best.0 {
            best = (rate, state.partition.clone(), state.power.clone(), state.phases.clone());
        }
        let prev = state.sum_rate;
        state.sum_rate = rate;
        if (rate - prev).abs() < config.eps_outer {
            termination = Termination::Converged;
            break;
        }
    }

    let (_, partition, power, phases) = best;
    let topo = Topology::new(scenario, &partition)?;
    let gains = EffectiveGains::compose(scenario, &channels, &phases)?;
    let sum_rate_bps = model.system_sum_rate(&topo, &gains, &power);
    let violations = model.violations(&topo, &gains, &power);
    Ok(SolveResult {
        scheme,
        seed,
        partition,
        power,
        phases,
        sum_rate_bps,
        iterations,
        rate_trace,
        feasible: violations.is_empty(),
        violations,
        termination,
        history,
    })
}

/// Uniform codeword draws until one satisfies every SINR floor; if none of
/// `draws` does, the draw with the highest sum rate.
fn random_feasible_phases<R: Rng + ?Sized>(
    model: &RateModel<'_>,
    topo: &Topology,
    power: &PowerVector,
    rng: &mut R,
    draws: usize,
) -> Result<PhaseConfig> {
    let mut best: Option<(f64, PhaseConfig)> = None;
    for _ in 0..draws.max(1) {
        let phases = PhaseConfig::random(model.scenario, rng);
        let gains = EffectiveGains::compose(model.scenario, model.channels, &phases)?;
        if model.violations(topo, &gains, power).is_empty() {
            return Ok(phases);
        }
        let rate = model.system_sum_rate(topo, &gains, power);
        if best.as_ref().is_none_or(|b| rate > b.0) {
            best = Some((rate, phases));
        }
    }
    Ok(best.map(|b| b.1).expect("at least one draw"))
}
