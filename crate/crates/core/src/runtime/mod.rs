//! Decentralized multi-agent trial loop.
//!
//! Each step: deliver due records, advance the world, then every agent
//! decides, senses, filters and maybe broadcasts. Decisions at step `t` never
//! see teammates' step-`t` records. Agents share nothing but
//! [`ObservationRecord`] values.

mod agent;

pub use agent::{AgentDiagnostics, AgentState};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{build_action_space, ActionSpace, SearchSpace, SensingAction, TargetSet, DEFAULT_CLUTTER_RATES, DEFAULT_SCALES};
use crate::phd::{round_mass, FilterConfig, ParticlePhd};
use crate::policy::{ospa, select_action, DecisionSetup, OspaParams, PolicyKind, RolloutConfig};
use crate::rng::{RngStream, StreamId};
use crate::sampling::TsConfig;
use crate::world::{init_targets, sense, step_targets, MeasurementSet};

/// The tuple an agent shares: when, where it looked, and what it saw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub time: u32,
    pub agent_id: u32,
    pub action: SensingAction,
    pub measurements: MeasurementSet,
}

/// Extra delivery lag in steps on top of the minimal one-step lag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DelayDistribution {
    Fixed(u32),
    /// Uniform on `0..=max`.
    Uniform { max: u32 },
}

impl DelayDistribution {
    fn draw(&self, rng: &mut RngStream) -> u32 {
        match *self {
            DelayDistribution::Fixed(d) => d,
            DelayDistribution::Uniform { max } => rng.random_range(0..=max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub share_prob: f64,
    pub delay: DelayDistribution,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            share_prob: 1.0,
            delay: DelayDistribution::Fixed(0),
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.share_prob) {
            return Err(invalid("share_prob must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Everything one trial needs apart from its seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub space: SearchSpace,
    pub scales: Vec<u32>,
    pub clutter_rates: Vec<f64>,
    pub targets: usize,
    pub agents: usize,
    pub steps: u32,
    /// Speed bound for ground-truth initialization and uniform TS states.
    pub v_max: f64,
    pub filter: FilterConfig,
    pub policy: PolicyKind,
    pub ts: TsConfig,
    pub ospa: OspaParams,
    pub rollout: RolloutConfig,
    pub channel: ChannelConfig,
    /// Mass of the uniform initial PHD.
    pub prior_mass: f64,
    pub checkpoint_horizon: u32,
    /// Run agents of one step on separate threads.
    pub parallel_agents: bool,
}

impl Default for TrialConfig {
    fn default() -> Self {
        let space = SearchSpace::default();
        let mut filter = FilterConfig::default();
        filter.motion = filter.motion.with_velocity_bound(Some(0.1)).with_domain(Some(space));
        TrialConfig {
            space,
            scales: DEFAULT_SCALES.to_vec(),
            clutter_rates: DEFAULT_CLUTTER_RATES.to_vec(),
            targets: 15,
            agents: 2,
            steps: 150,
            v_max: 0.1,
            filter,
            policy: PolicyKind::default(),
            ts: TsConfig::default(),
            ospa: OspaParams::default(),
            rollout: RolloutConfig::default(),
            channel: ChannelConfig::default(),
            prior_mass: 5.0,
            checkpoint_horizon: 25,
            parallel_agents: false,
        }
    }
}

impl TrialConfig {
    pub fn validate(&self) -> Result<ActionSpace> {
        if self.agents == 0 {
            return Err(invalid("agents must be >= 1"));
        }
        if self.steps == 0 {
            return Err(invalid("steps must be >= 1"));
        }
        if self.checkpoint_horizon == 0 {
            return Err(invalid("checkpoint_horizon must be >= 1"));
        }
        if !(self.prior_mass >= 0.0 && self.prior_mass.is_finite()) {
            return Err(invalid("prior_mass must be finite and >= 0"));
        }
        if !(self.v_max >= 0.0 && self.v_max.is_finite()) {
            return Err(invalid("v_max must be finite and >= 0"));
        }
        self.filter.validate()?;
        self.policy.validate()?;
        self.ts.validate()?;
        self.ospa.validate()?;
        self.rollout.validate()?;
        self.channel.validate()?;
        build_action_space(self.space, &self.scales, &self.clutter_rates)
    }
}

/// One agent's outcome at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u32,
    pub action_index: usize,
    /// Cumulative sensing actions taken by this agent, one per step.
    pub measurements: u32,
    /// Size of this step's measurement set.
    pub detections: u32,
    pub ospa: f64,
    pub estimated_cardinality: usize,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialTrace {
    pub agent_id: u32,
    pub steps: Vec<StepRecord>,
    pub broadcasts: u32,
    /// Own records still queued at the end of the trial.
    pub unsent: u32,
    pub replays: u64,
    pub retimed_records: u64,
}

/// Hook for per-step inspection, e.g. dumping particles.
pub trait TrialObserver {
    fn on_step(&mut self, _agent_id: u32, _step: u32, _phd: &ParticlePhd, _truth: &TargetSet) -> Result<()> {
        Ok(())
    }
}

pub struct NoObserver;

impl TrialObserver for NoObserver {}

/// An agent together with its private randomness and outbox.
struct Agent {
    state: AgentState,
    unsent: Vec<ObservationRecord>,
    decision_rng: RngStream,
    sensing_rng: RngStream,
    channel_rng: RngStream,
    broadcasts: u32,
    trace: Vec<StepRecord>,
}

struct Outgoing {
    from: u32,
    records: Vec<ObservationRecord>,
}

struct InFlight {
    available_at: u32,
    to: u32,
    record: ObservationRecord,
}

pub fn run_trial(config: &TrialConfig, seed: u64) -> Result<Vec<TrialTrace>> {
    run_trial_observed(config, seed, &mut NoObserver)
}

pub fn run_trial_observed(config: &TrialConfig, seed: u64, observer: &mut dyn TrialObserver) -> Result<Vec<TrialTrace>> {
    Ok(run_trial_with_states(config, seed, observer)?.0)
}

/// Like [`run_trial_observed`], also returning every agent's final state.
pub fn run_trial_with_states(
    config: &TrialConfig,
    seed: u64,
    observer: &mut dyn TrialObserver,
) -> Result<(Vec<TrialTrace>, Vec<AgentState>)> {
    let actions = config.validate()?;
    let space = config.space;
    let mut world_rng = RngStream::new(seed, StreamId::WORLD_MOTION);
    let mut truth = init_targets(&space, config.targets, config.v_max, &mut RngStream::new(seed, StreamId::WORLD_INIT));
    let mut agents: Vec<Agent> = (1..=config.agents as u32)
        .map(|id| {
            let mut prior_rng = RngStream::new(seed, StreamId::filter(id, 0));
            let count = round_mass(config.prior_mass).max(1) * config.filter.particles_per_target;
            let prior = ParticlePhd::uniform(&space, config.prior_mass, count, config.v_max, &mut prior_rng);
            Agent {
                state: AgentState::new(id, seed, prior, config.checkpoint_horizon),
                unsent: Vec::new(),
                decision_rng: RngStream::new(seed, StreamId::decision(id)),
                sensing_rng: RngStream::new(seed, StreamId::sensing(id)),
                channel_rng: RngStream::new(seed, StreamId::channel(id)),
                broadcasts: 0,
                trace: Vec::with_capacity(config.steps as usize),
            }
        })
        .collect();
    let mut in_flight: Vec<InFlight> = Vec::new();
    for t in 1..=config.steps {
        // deliveries happen at the step boundary
        let (due, rest): (Vec<_>, Vec<_>) = in_flight.into_iter().partition(|m| m.available_at <= t);
        in_flight = rest;
        let mut inbox: Vec<Vec<ObservationRecord>> = vec![Vec::new(); agents.len()];
        for m in due {
            inbox[(m.to - 1) as usize].push(m.record);
        }
        truth = step_targets(&truth, &config.filter.motion, &space, &mut world_rng);
        let run = |(agent, records): (&mut Agent, Vec<ObservationRecord>)| {
            agent_step(agent, records, t, &truth, &actions, config)
        };
        let outgoing: Vec<Result<Option<Outgoing>>> = if config.parallel_agents {
            agents.par_iter_mut().zip(inbox.into_par_iter()).map(run).collect()
        } else {
            agents.iter_mut().zip(inbox).map(run).collect()
        };
        for out in outgoing {
            let Some(out) = out? else { continue };
            let sender = &mut agents[(out.from - 1) as usize];
            for record in out.records {
                for to in 1..=config.agents as u32 {
                    if to == out.from {
                        continue;
                    }
                    let lag = config.channel.delay.draw(&mut sender.channel_rng);
                    in_flight.push(InFlight {
                        available_at: t + 1 + lag,
                        to,
                        record: record.clone(),
                    });
                }
            }
        }
        for agent in &agents {
            observer.on_step(agent.state.agent_id(), t, agent.state.phd(), &truth)?;
        }
    }
    Ok(agents
        .into_iter()
        .map(|a| {
            let d = a.state.diagnostics();
            let trace = TrialTrace {
                agent_id: a.state.agent_id(),
                steps: a.trace,
                broadcasts: a.broadcasts,
                unsent: a.unsent.len() as u32,
                replays: d.replays,
                retimed_records: d.retimed_records,
            };
            (trace, a.state)
        })
        .unzip())
}

/// Assimilate, decide, sense, filter, estimate, maybe broadcast.
fn agent_step(
    agent: &mut Agent,
    received: Vec<ObservationRecord>,
    t: u32,
    truth: &TargetSet,
    actions: &ActionSpace,
    config: &TrialConfig,
) -> Result<Option<Outgoing>> {
    let cfg = &config.filter;
    agent.state.assimilate(received, cfg)?;
    let setup = DecisionSetup {
        actions,
        sensor: &cfg.sensor,
        motion: &cfg.motion,
        birth: &cfg.birth,
        ts: &config.ts,
        ospa: &config.ospa,
        rollout: &config.rollout,
    };
    let decision = select_action(&config.policy, agent.state.phd(), &setup, &mut agent.decision_rng)?;
    let z = sense(truth, &decision.action, &cfg.sensor, &mut agent.sensing_rng);
    let z_len = z.len() as u32;
    let record = ObservationRecord {
        time: t,
        agent_id: agent.state.agent_id(),
        action: decision.action,
        measurements: z,
    };
    agent.state.observe(record.clone(), cfg)?;
    let estimate = agent.state.estimate(cfg);
    agent.trace.push(StepRecord {
        step: t,
        action_index: decision.action_index,
        measurements: t,
        detections: z_len,
        ospa: ospa(truth, &estimate, &config.ospa),
        estimated_cardinality: estimate.len(),
        mass: agent.state.phd().total_weight(),
    });
    let share = config.channel.share_prob >= 1.0
        || (config.channel.share_prob > 0.0 && agent.channel_rng.random::<f64>() < config.channel.share_prob);
    agent.unsent.push(record);
    if !share {
        return Ok(None);
    }
    agent.broadcasts += 1;
    Ok(Some(Outgoing {
        from: agent.state.agent_id(),
        records: std::mem::take(&mut agent.unsent),
    }))
}
