//! One agent's belief: its observation log, PHD, and replay checkpoints.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::Result;
use crate::phd::{extract_targets_with, filter_step, BirthTiming, FilterConfig, ParticlePhd};
use crate::rng::{RngStream, StreamId};
use crate::runtime::ObservationRecord;
use crate::geometry::{SensingAction, TargetSet};
use crate::world::MeasurementSet;

/// Counters for late-arrival handling.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AgentDiagnostics {
    pub filter_calls: u64,
    pub replays: u64,
    pub replayed_steps: u64,
    pub retimed_records: u64,
    pub duplicates: u64,
}

/// Filtering state of one agent. Only [`ObservationRecord`] values enter from
/// outside.
#[derive(Debug, Clone)]
pub struct AgentState {
    agent_id: u32,
    seed: u64,
    initial: ParticlePhd,
    phd: ParticlePhd,
    /// Sorted by `(time, agent_id)`.
    log: Vec<ObservationRecord>,
    /// Original `(time, agent_id)` of every logged record.
    seen: BTreeSet<(u32, u32)>,
    /// PHD before processing step `s`, keyed by `s`.
    checkpoints: BTreeMap<u32, ParticlePhd>,
    /// Next step to process.
    next_step: u32,
    horizon: u32,
    diagnostics: AgentDiagnostics,
}

impl AgentState {
    /// `initial` is the belief before step 1.
    pub fn new(agent_id: u32, seed: u64, initial: ParticlePhd, horizon: u32) -> Self {
        AgentState {
            agent_id,
            seed,
            phd: initial.clone(),
            initial,
            log: Vec::new(),
            seen: BTreeSet::new(),
            checkpoints: BTreeMap::new(),
            next_step: 1,
            horizon,
            diagnostics: AgentDiagnostics::default(),
        }
    }

    pub fn agent_id(&self) -> u32 {
        self.agent_id
    }

    pub fn phd(&self) -> &ParticlePhd {
        &self.phd
    }

    pub fn initial(&self) -> &ParticlePhd {
        &self.initial
    }

    pub fn log(&self) -> &[ObservationRecord] {
        &self.log
    }

    pub fn next_step(&self) -> u32 {
        self.next_step
    }

    pub fn diagnostics(&self) -> AgentDiagnostics {
        self.diagnostics
    }

    pub fn checkpoint_steps(&self) -> impl Iterator<Item = u32> + '_ {
        self.checkpoints.keys().copied()
    }

    fn insert(&mut self, record: ObservationRecord, original_time: u32) -> bool {
        if !self.seen.insert((original_time, record.agent_id)) {
            self.diagnostics.duplicates += 1;
            return false;
        }
        let key = (record.time, record.agent_id);
        let pos = self.log.partition_point(|r| (r.time, r.agent_id) <= key);
        self.log.insert(pos, record);
        true
    }

    /// Adds teammates' records. Records for already processed steps trigger one
    /// replay from the earliest affected step; records older than the
    /// checkpoint horizon are re-timed to the next step.
    pub fn assimilate(&mut self, records: Vec<ObservationRecord>, cfg: &FilterConfig) -> Result<()> {
        let oldest_kept = self.checkpoints.keys().next().copied().unwrap_or(self.next_step);
        let mut earliest: Option<u32> = None;
        for mut r in records {
            let original = r.time;
            if r.time < self.next_step && r.time < oldest_kept {
                if self.seen.contains(&(original, r.agent_id)) {
                    self.diagnostics.duplicates += 1;
                    continue;
                }
                r.time = self.next_step;
                self.diagnostics.retimed_records += 1;
            }
            let time = r.time;
            if self.insert(r, original) && time < self.next_step {
                earliest = Some(earliest.map_or(time, |e: u32| e.min(time)));
            }
        }
        if let Some(from) = earliest {
            self.replay_from(from, cfg)?;
        }
        Ok(())
    }

    fn replay_from(&mut self, from: u32, cfg: &FilterConfig) -> Result<()> {
        let start = self.checkpoints.get(&from).cloned().expect("checkpoint within horizon");
        self.diagnostics.replays += 1;
        self.phd = start;
        for s in from..self.next_step {
            if s != from {
                self.checkpoints.insert(s, self.phd.clone());
            }
            self.phd = self.run_step(s, cfg)?;
            self.diagnostics.replayed_steps += 1;
        }
        Ok(())
    }

    /// Records the agent's own observation for the next step and processes
    /// that step.
    pub fn observe(&mut self, record: ObservationRecord, cfg: &FilterConfig) -> Result<()> {
        debug_assert_eq!(record.agent_id, self.agent_id);
        debug_assert_eq!(record.time, self.next_step);
        let t = record.time;
        self.insert(record, t);
        self.checkpoints.insert(t, self.phd.clone());
        self.phd = self.run_step(t, cfg)?;
        self.next_step = t + 1;
        let keep_from = self.next_step.saturating_sub(self.horizon);
        self.checkpoints = self.checkpoints.split_off(&keep_from);
        Ok(())
    }

    /// Processes step `t` starting from the current PHD.
    fn run_step(&mut self, t: u32, cfg: &FilterConfig) -> Result<ParticlePhd> {
        self.diagnostics.filter_calls += 1;
        let mut rng = RngStream::new(self.seed, StreamId::filter(self.agent_id, t));
        step_from_log(&self.phd, &self.log, t, cfg, &mut rng)
    }

    /// Current estimate, drawn from a stream keyed by `(agent, step)` so that
    /// it does not disturb filtering draws.
    pub fn estimate(&self, cfg: &FilterConfig) -> TargetSet {
        let t = self.next_step.saturating_sub(1);
        let mut rng = RngStream::new(self.seed, StreamId::filter(self.agent_id, t).child(1));
        extract_targets_with(&self.phd, &cfg.extract, &mut rng)
    }

    /// Reprocesses the whole log from the initial PHD. Used to check that the
    /// incremental state matches.
    pub fn replay_from_scratch(&self, cfg: &FilterConfig) -> Result<ParticlePhd> {
        let mut phd = self.initial.clone();
        for t in 1..self.next_step {
            let mut rng = RngStream::new(self.seed, StreamId::filter(self.agent_id, t));
            phd = step_from_log(&phd, &self.log, t, cfg, &mut rng)?;
        }
        Ok(phd)
    }
}

fn records_at(log: &[ObservationRecord], t: u32) -> &[ObservationRecord] {
    let lo = log.partition_point(|r| r.time < t);
    let hi = log.partition_point(|r| r.time <= t);
    &log[lo..hi]
}

fn step_from_log(
    prev: &ParticlePhd,
    log: &[ObservationRecord],
    t: u32,
    cfg: &FilterConfig,
    rng: &mut RngStream,
) -> Result<ParticlePhd> {
    let now = records_at(log, t);
    let obs: Vec<(&SensingAction, &MeasurementSet)> = now.iter().map(|r| (&r.action, &r.measurements)).collect();
    let births: Vec<&MeasurementSet> = match cfg.birth_timing {
        BirthTiming::CurrentStep => now.iter().map(|r| &r.measurements).collect(),
        BirthTiming::PreviousStep => records_at(log, t.saturating_sub(1))
            .iter()
            .filter(|r| t > 1 && r.time == t - 1)
            .map(|r| &r.measurements)
            .collect(),
    };
    filter_step(prev, &obs, &births, cfg, rng)
}
