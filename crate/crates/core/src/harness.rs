//! Experiment sweeps, multi-trial aggregation and result files.
//!
//! Configuration is a flat `key = value` text file; lists are comma
//! separated and turn a key into a sweep axis. [`ExperimentConfig::to_text`]
//! writes the resolved configuration back in the same format, so an output
//! directory always carries what is needed to rerun it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::geometry::{SearchSpace, TargetSet};
use crate::phd::{BirthTiming, ParticlePhd};
use crate::policy::{PolicyKind, PolicyVariant};
use crate::runtime::{run_trial_observed, DelayDistribution, TrialConfig, TrialObserver, TrialTrace};
use crate::sampling::Ts1Cardinality;
use crate::world::MotionModel;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Template for every trial; swept fields are overwritten per point.
    pub trial: TrialConfig,
    pub trials: usize,
    pub base_seed: u64,
    pub policies: Vec<PolicyVariant>,
    pub targets: Vec<usize>,
    pub agents: Vec<usize>,
    pub share_probs: Vec<f64>,
    pub dump_particles: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let trial = TrialConfig::default();
        ExperimentConfig {
            trials: 10,
            base_seed: 0,
            policies: vec![trial.policy.variant],
            targets: vec![trial.targets],
            agents: vec![trial.agents],
            share_probs: vec![trial.channel.share_prob],
            dump_particles: false,
            trial,
        }
    }
}

/// One combination of the swept values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub policy: PolicyVariant,
    pub targets: usize,
    pub agents: usize,
    pub share_prob: f64,
}

impl SweepPoint {
    /// File-name stem, e.g. `decster2_k15_J2_p1`.
    pub fn label(&self) -> String {
        format!("{}_k{}_J{}_p{}", self.policy, self.targets, self.agents, self.share_prob)
    }
}

/// Every documented key, in echo order.
pub const CONFIG_KEYS: &[&str] = &[
    "policy",
    "targets",
    "agents",
    "steps",
    "trials",
    "base_seed",
    "share_prob",
    "delay",
    "space_width",
    "space_length",
    "scales",
    "clutter_rates",
    "v_max",
    "survival_prob",
    "detection_prob",
    "noise_std",
    "birth_particles",
    "birth_weight",
    "birth_position_std",
    "birth_velocity_std",
    "birth_timing",
    "particles_per_target",
    "particle_cap",
    "prior_mass",
    "checkpoint_horizon",
    "ospa_cutoff",
    "ospa_order",
    "ts_samples",
    "ts1_particles",
    "ts1_cardinality",
    "ts_pool_size",
    "renyi_alpha",
    "stochastic_rollouts",
    "exact_rollouts",
    "rollout_births",
    "rollout_merge_cell",
    "parallel_agents",
    "dump_particles",
];

fn parse_one<T>(key: &str, v: &str) -> Result<T>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    v.trim()
        .parse()
        .map_err(|e| invalid(format!("bad value '{v}' for key '{key}': {e}")))
}

fn parse_list<T>(key: &str, v: &str) -> Result<Vec<T>>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    let items: Vec<T> = v
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_one(key, s))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(invalid(format!("key '{key}' needs at least one value")));
    }
    Ok(items)
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(invalid(format!("bad value '{v}' for key '{key}' (expected true or false)"))),
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Parses a config file body. Unknown keys and malformed lines are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected 'key = value', got '{line}'"),
            })?;
            cfg.set(k.trim(), v.trim()).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.trial;
        match key {
            "policy" => self.policies = parse_list(key, value)?,
            "targets" => self.targets = parse_list(key, value)?,
            "agents" => self.agents = parse_list(key, value)?,
            "share_prob" => self.share_probs = parse_list(key, value)?,
            "steps" => t.steps = parse_one(key, value)?,
            "trials" => self.trials = parse_one(key, value)?,
            "base_seed" => self.base_seed = parse_one(key, value)?,
            "delay" => t.channel.delay = parse_delay(value)?,
            "space_width" | "space_length" => {
                let v: f64 = parse_one(key, value)?;
                t.space = if key == "space_width" {
                    SearchSpace::new(v, t.space.length())?
                } else {
                    SearchSpace::new(t.space.width(), v)?
                };
                t.filter.motion = t.filter.motion.clone().with_domain(Some(t.space));
            }
            "scales" => t.scales = parse_list(key, value)?,
            "clutter_rates" => t.clutter_rates = parse_list(key, value)?,
            "v_max" => t.v_max = parse_one(key, value)?,
            "survival_prob" => {
                let m = &t.filter.motion;
                t.filter.motion = MotionModel::constant_velocity(m.step(), *m.process_noise_cov(), parse_one(key, value)?)?
                    .with_velocity_bound(m.velocity_bound())
                    .with_domain(m.domain().copied());
            }
            "detection_prob" => t.filter.sensor.detection_prob = parse_one(key, value)?,
            "noise_std" => t.filter.sensor.noise_std = parse_one(key, value)?,
            "birth_particles" => t.filter.birth.particles_per_measurement = parse_one(key, value)?,
            "birth_weight" => t.filter.birth.weight_per_measurement = parse_one(key, value)?,
            "birth_position_std" => t.filter.birth.position_std = parse_one(key, value)?,
            "birth_velocity_std" => t.filter.birth.velocity_std = parse_one(key, value)?,
            "birth_timing" => {
                t.filter.birth_timing = match value {
                    "current" => BirthTiming::CurrentStep,
                    "previous" => BirthTiming::PreviousStep,
                    _ => return Err(invalid(format!("birth_timing must be 'current' or 'previous', got '{value}'"))),
                }
            }
            "particles_per_target" => t.filter.particles_per_target = parse_one(key, value)?,
            "particle_cap" => t.filter.particle_cap = parse_one(key, value)?,
            "prior_mass" => t.prior_mass = parse_one(key, value)?,
            "checkpoint_horizon" => t.checkpoint_horizon = parse_one(key, value)?,
            "ospa_cutoff" => t.ospa.cutoff = parse_one(key, value)?,
            "ospa_order" => t.ospa.order = parse_one(key, value)?,
            "ts_samples" => t.ts.ts2_samples_per_decision = parse_one(key, value)?,
            "ts1_particles" => t.ts.ts1_particle_count = parse_one(key, value)?,
            "ts1_cardinality" => {
                t.ts.ts1_cardinality = match value {
                    "total" => Ts1Cardinality::TotalMass,
                    "drawn" => Ts1Cardinality::DrawnWeights,
                    _ => return Err(invalid(format!("ts1_cardinality must be 'total' or 'drawn', got '{value}'"))),
                }
            }
            "ts_pool_size" => {
                t.ts.ts2_random_pool_size = if value == "auto" { None } else { Some(parse_one(key, value)?) }
            }
            "renyi_alpha" => t.policy.renyi_alpha = parse_one(key, value)?,
            "stochastic_rollouts" => t.rollout.stochastic = parse_bool(key, value)?,
            "exact_rollouts" => t.rollout.exact = parse_bool(key, value)?,
            "rollout_births" => t.rollout.births = parse_bool(key, value)?,
            "rollout_merge_cell" => t.rollout.merge_cell = parse_one(key, value)?,
            "parallel_agents" => t.parallel_agents = parse_bool(key, value)?,
            "dump_particles" => self.dump_particles = parse_bool(key, value)?,
            _ => return Err(invalid(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// The resolved configuration in config-file form.
    pub fn to_text(&self) -> String {
        let t = &self.trial;
        let mut out = String::new();
        for &key in CONFIG_KEYS {
            let v = match key {
                "policy" => join(&self.policies),
                "targets" => join(&self.targets),
                "agents" => join(&self.agents),
                "share_prob" => join(&self.share_probs),
                "steps" => t.steps.to_string(),
                "trials" => self.trials.to_string(),
                "base_seed" => self.base_seed.to_string(),
                "delay" => match t.channel.delay {
                    DelayDistribution::Fixed(d) => d.to_string(),
                    DelayDistribution::Uniform { max } => format!("uniform:{max}"),
                },
                "space_width" => t.space.width().to_string(),
                "space_length" => t.space.length().to_string(),
                "scales" => join(&t.scales),
                "clutter_rates" => join(&t.clutter_rates),
                "v_max" => t.v_max.to_string(),
                "survival_prob" => t.filter.motion.survival_prob().to_string(),
                "detection_prob" => t.filter.sensor.detection_prob.to_string(),
                "noise_std" => t.filter.sensor.noise_std.to_string(),
                "birth_particles" => t.filter.birth.particles_per_measurement.to_string(),
                "birth_weight" => t.filter.birth.weight_per_measurement.to_string(),
                "birth_position_std" => t.filter.birth.position_std.to_string(),
                "birth_velocity_std" => t.filter.birth.velocity_std.to_string(),
                "birth_timing" => match t.filter.birth_timing {
                    BirthTiming::CurrentStep => "current".into(),
                    BirthTiming::PreviousStep => "previous".into(),
                },
                "particles_per_target" => t.filter.particles_per_target.to_string(),
                "particle_cap" => t.filter.particle_cap.to_string(),
                "prior_mass" => t.prior_mass.to_string(),
                "checkpoint_horizon" => t.checkpoint_horizon.to_string(),
                "ospa_cutoff" => t.ospa.cutoff.to_string(),
                "ospa_order" => t.ospa.order.to_string(),
                "ts_samples" => t.ts.ts2_samples_per_decision.to_string(),
                "ts1_particles" => t.ts.ts1_particle_count.to_string(),
                "ts1_cardinality" => match t.ts.ts1_cardinality {
                    Ts1Cardinality::TotalMass => "total".into(),
                    Ts1Cardinality::DrawnWeights => "drawn".into(),
                },
                "ts_pool_size" => t.ts.ts2_random_pool_size.map_or("auto".into(), |n| n.to_string()),
                "renyi_alpha" => t.policy.renyi_alpha.to_string(),
                "stochastic_rollouts" => t.rollout.stochastic.to_string(),
                "exact_rollouts" => t.rollout.exact.to_string(),
                "rollout_births" => t.rollout.births.to_string(),
                "rollout_merge_cell" => t.rollout.merge_cell.to_string(),
                "parallel_agents" => t.parallel_agents.to_string(),
                "dump_particles" => self.dump_particles.to_string(),
                _ => unreachable!("key list and echo out of sync"),
            };
            let _ = writeln!(out, "{key} = {v}");
        }
        out
    }

    pub fn sweep(&self) -> Vec<SweepPoint> {
        let mut out = Vec::new();
        for &policy in &self.policies {
            for &targets in &self.targets {
                for &agents in &self.agents {
                    for &share_prob in &self.share_probs {
                        out.push(SweepPoint { policy, targets, agents, share_prob });
                    }
                }
            }
        }
        out
    }

    /// Trial configuration of one sweep point.
    pub fn trial_config(&self, point: &SweepPoint) -> TrialConfig {
        let mut t = self.trial.clone();
        t.policy = PolicyKind {
            variant: point.policy,
            ..t.policy
        };
        t.targets = point.targets;
        t.agents = point.agents;
        t.channel.share_prob = point.share_prob;
        t
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(invalid("trials must be >= 1"));
        }
        for p in self.sweep() {
            self.trial_config(&p).validate()?;
        }
        Ok(())
    }
}

fn parse_delay(v: &str) -> Result<DelayDistribution> {
    match v.split_once(':') {
        Some(("uniform", max)) => Ok(DelayDistribution::Uniform { max: parse_one("delay", max)? }),
        None => Ok(DelayDistribution::Fixed(parse_one("delay", v)?)),
        _ => Err(invalid(format!("delay must be '<steps>' or 'uniform:<max>', got '{v}'"))),
    }
}

/// Per-step statistics across trials for one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub step: u32,
    pub measurements_per_agent: f64,
    /// Mean over agents and trials.
    pub mean_ospa: f64,
    /// Standard error of the per-trial team means; 0 for one trial.
    pub se_ospa: f64,
    pub mean_cardinality: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointResult {
    pub point: SweepPoint,
    pub seeds: Vec<u64>,
    /// One entry per trial, one trace per agent.
    #[serde(skip)]
    pub traces: Vec<Vec<TrialTrace>>,
    pub rows: Vec<AggregateRow>,
    /// Mean OSPA over the last quarter of the steps, per trial.
    pub final_quarter: Vec<f64>,
}

impl PointResult {
    pub fn final_quarter_mean(&self) -> f64 {
        mean(&self.final_quarter)
    }

    pub fn final_quarter_se(&self) -> f64 {
        standard_error(&self.final_quarter)
    }
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation over `sqrt(n)`; 0 when `n < 2`.
pub fn standard_error(v: &[f64]) -> f64 {
    let n = v.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(v);
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

/// Team-mean OSPA per trial over the last quarter of the steps.
pub fn final_quarter_ospa(traces: &[TrialTrace]) -> f64 {
    let mut acc = 0.0;
    let mut n = 0usize;
    for t in traces {
        let from = t.steps.len() - t.steps.len() / 4;
        for r in &t.steps[from..] {
            acc += r.ospa;
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        acc / n as f64
    }
}

pub fn aggregate(traces: &[Vec<TrialTrace>]) -> Vec<AggregateRow> {
    let steps = traces.iter().flatten().map(|t| t.steps.len()).min().unwrap_or(0);
    (0..steps)
        .map(|i| {
            let team: Vec<f64> = traces
                .iter()
                .map(|trial| mean(&trial.iter().map(|a| a.steps[i].ospa).collect::<Vec<_>>()))
                .collect();
            let all: Vec<&crate::runtime::StepRecord> = traces.iter().flatten().map(|a| &a.steps[i]).collect();
            let k = all.len() as f64;
            AggregateRow {
                step: all[0].step,
                measurements_per_agent: all.iter().map(|r| r.measurements as f64).sum::<f64>() / k,
                mean_ospa: all.iter().map(|r| r.ospa).sum::<f64>() / k,
                se_ospa: standard_error(&team),
                mean_cardinality: all.iter().map(|r| r.estimated_cardinality as f64).sum::<f64>() / k,
            }
        })
        .collect()
}

/// Runs every trial of one sweep point, trials in parallel.
pub fn run_point(cfg: &ExperimentConfig, point: &SweepPoint, dump_dir: Option<&Path>) -> Result<PointResult> {
    let trial = cfg.trial_config(point);
    trial.validate()?;
    let seeds: Vec<u64> = (0..cfg.trials as u64).map(|i| cfg.base_seed.wrapping_add(i)).collect();
    let traces: Vec<Vec<TrialTrace>> = seeds
        .par_iter()
        .map(|&seed| match dump_dir {
            Some(dir) => {
                let path = dir.join(format!("particles_{}_seed{seed}.csv", point.label()));
                let mut dump = ParticleDump::create(&path)?;
                let out = run_trial_observed(&trial, seed, &mut dump)?;
                dump.finish()?;
                Ok(out)
            }
            None => crate::runtime::run_trial(&trial, seed),
        })
        .collect::<Result<_>>()?;
    let final_quarter = traces.iter().map(|t| final_quarter_ospa(t)).collect();
    Ok(PointResult {
        point: *point,
        rows: aggregate(&traces),
        seeds,
        traces,
        final_quarter,
    })
}

/// Runs the whole sweep without writing anything.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<PointResult>> {
    cfg.validate()?;
    cfg.sweep().iter().map(|p| run_point(cfg, p, None)).collect()
}

#[derive(Serialize)]
struct SummaryEntry<'a> {
    #[serde(flatten)]
    point: &'a SweepPoint,
    label: String,
    trials: usize,
    seeds: &'a [u64],
    final_quarter_mean_ospa: f64,
    final_quarter_se_ospa: f64,
    final_mean_ospa: f64,
    final_se_ospa: f64,
}

/// Runs the sweep and writes, into `out_dir`: `config.txt` (resolved
/// configuration), one `traces_<label>.csv` and one `aggregate_<label>.csv`
/// per sweep point, `summary.json`, and particle dumps when enabled.
pub fn run_and_write(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PointResult>> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("config.txt"), cfg.to_text())?;
    let mut results = Vec::new();
    for point in cfg.sweep() {
        let dump = cfg.dump_particles.then_some(out_dir);
        let r = run_point(cfg, &point, dump)?;
        write_traces(&out_dir.join(format!("traces_{}.csv", point.label())), &r)?;
        write_aggregate(&out_dir.join(format!("aggregate_{}.csv", point.label())), &r.rows)?;
        results.push(r);
    }
    let summary: Vec<SummaryEntry> = results
        .iter()
        .map(|r| {
            let last = r.rows.last();
            SummaryEntry {
                point: &r.point,
                label: r.point.label(),
                trials: r.seeds.len(),
                seeds: &r.seeds,
                final_quarter_mean_ospa: r.final_quarter_mean(),
                final_quarter_se_ospa: r.final_quarter_se(),
                final_mean_ospa: last.map_or(0.0, |x| x.mean_ospa),
                final_se_ospa: last.map_or(0.0, |x| x.se_ospa),
            }
        })
        .collect();
    fs::write(out_dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(results)
}

pub const TRACE_HEADER: &str = "seed,policy,J,k,share_prob,agent,step,measurements,ospa,estimated_cardinality";

fn write_traces(path: &Path, r: &PointResult) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "{TRACE_HEADER}")?;
    let p = &r.point;
    for (seed, trial) in r.seeds.iter().zip(&r.traces) {
        for a in trial {
            for s in &a.steps {
                writeln!(
                    f,
                    "{seed},{},{},{},{},{},{},{},{},{}",
                    p.policy, p.agents, p.targets, p.share_prob, a.agent_id, s.step, s.measurements, s.ospa,
                    s.estimated_cardinality
                )?;
            }
        }
    }
    f.flush()?;
    Ok(())
}

fn write_aggregate(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "step,measurements_per_agent,mean_ospa,se_ospa,mean_cardinality")?;
    for r in rows {
        writeln!(
            f,
            "{},{},{},{},{}",
            r.step, r.measurements_per_agent, r.mean_ospa, r.se_ospa, r.mean_cardinality
        )?;
    }
    f.flush()?;
    Ok(())
}

/// Writes every agent's particles and the ground truth after each step.
pub struct ParticleDump {
    out: BufWriter<File>,
    path: PathBuf,
}

impl ParticleDump {
    pub fn create(path: &Path) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "step,agent,kind,weight,px,py,vx,vy")?;
        Ok(ParticleDump {
            out,
            path: path.to_path_buf(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

impl TrialObserver for ParticleDump {
    fn on_step(&mut self, agent_id: u32, step: u32, phd: &ParticlePhd, truth: &TargetSet) -> Result<()> {
        // truth rows are written once per step, with the first agent
        if agent_id == 1 {
            for x in truth.iter() {
                writeln!(self.out, "{step},0,truth,1,{},{},{},{}", x.px, x.py, x.vx, x.vy)?;
            }
        }
        for p in phd.iter() {
            let s = &p.state;
            writeln!(self.out, "{step},{agent_id},particle,{},{},{},{},{}", p.weight, s.px, s.py, s.vx, s.vy)?;
        }
        Ok(())
    }
}

/// Summary keyed by label, for quick lookups in tests and scripts.
pub fn final_quarter_table(results: &[PointResult]) -> BTreeMap<String, (f64, f64)> {
    results
        .iter()
        .map(|r| (r.point.label(), (r.final_quarter_mean(), r.final_quarter_se())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_parses_back_to_the_same_config() {
        let mut cfg = ExperimentConfig::default();
        cfg.set("policy", "random, decster-c").unwrap();
        cfg.set("share_prob", "0.05,0.5").unwrap();
        cfg.set("delay", "uniform:3").unwrap();
        cfg.set("space_width", "20").unwrap();
        cfg.set("ts_pool_size", "64").unwrap();
        cfg.set("birth_timing", "current").unwrap();
        let back = ExperimentConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_text(), cfg.to_text());
        assert_eq!(back.trial.filter.motion.domain().unwrap().width(), 20.0);
    }

    #[test]
    fn every_key_is_echoed_once() {
        let text = ExperimentConfig::default().to_text();
        assert_eq!(text.lines().count(), CONFIG_KEYS.len());
        for k in CONFIG_KEYS {
            assert!(text.lines().any(|l| l.starts_with(&format!("{k} = "))), "{k}");
        }
    }

    #[test]
    fn bad_input_is_reported_with_its_line() {
        let err = ExperimentConfig::parse("# header\nsteps = 10\n\nspeed = 3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");
        assert!(err.to_string().contains("unknown key 'speed'"));
        assert!(ExperimentConfig::parse("steps 10").is_err());
        assert!(ExperimentConfig::parse("policy = greedy").is_err());
        assert!(ExperimentConfig::parse("agents = ").is_err());
        assert!(ExperimentConfig::parse("delay = gamma:2").is_err());
    }

    #[test]
    fn lists_expand_into_a_sweep() {
        let cfg = ExperimentConfig::parse("policy = random,renyi\nagents = 2,4\nshare_prob = 0.5,1").unwrap();
        let s = cfg.sweep();
        assert_eq!(s.len(), 8);
        assert_eq!(s[0].label(), "random_k15_J2_p0.5");
        let t = cfg.trial_config(&s[7]);
        assert_eq!((t.agents, t.channel.share_prob, t.policy.variant), (4, 1.0, PolicyVariant::Renyi));
    }

    #[test]
    fn defaults_describe_the_reference_setup() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.trials, 10);
        assert_eq!(cfg.trial.steps, 150);
        assert_eq!(cfg.trial.space.width(), 16.0);
        assert_eq!(cfg.targets, vec![15]);
        assert_eq!(cfg.agents, vec![2]);
        cfg.validate().unwrap();
        let mut zero = cfg.clone();
        zero.trials = 0;
        assert!(zero.validate().is_err());
    }

    #[test]
    fn one_trial_has_zero_standard_error() {
        assert_eq!(standard_error(&[1.3]), 0.0);
        assert_eq!(standard_error(&[]), 0.0);
        // sample sd of {1,2,3,4} is sqrt(5/3)
        assert!((standard_error(&[1.0, 2.0, 3.0, 4.0]) - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn final_quarter_covers_the_last_steps() {
        let steps = (1..=8)
            .map(|i| crate::runtime::StepRecord {
                step: i,
                action_index: 0,
                measurements: i,
                detections: 0,
                ospa: i as f64,
                estimated_cardinality: 0,
                mass: 0.0,
            })
            .collect();
        let t = TrialTrace {
            agent_id: 1,
            steps,
            broadcasts: 0,
            unsent: 0,
            replays: 0,
            retimed_records: 0,
        };
        assert_eq!(final_quarter_ospa(&[t]), 7.5);
    }
}
