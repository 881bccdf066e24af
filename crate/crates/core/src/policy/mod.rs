//! Sensing-action selection.
//!
//! The DecSTER variants pick the action whose pseudo-measurement rollout
//! brings the estimate closest, in OSPA, to a Thompson sample. RENYI variants
//! maximize the divergence between predicted and updated intensities.

pub mod ospa;
pub mod rollout;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{ActionSpace, SensingAction, TargetSet};
use crate::phd::{predict, update_factors, BirthConfig, ParticlePhd};
use crate::rng::RngStream;
use crate::sampling::{ts_phd_1, ts_phd_2_from_estimates, ts_phd_2_with_cardinality, TsConfig};
use crate::world::{poisson_count, MeasurementSet, MotionModel, SensorModel};

pub use ospa::{min_cost_assignment, ospa, ospa_cardinality_term, OspaParams};
pub use rollout::{pseudo_measurements, pseudo_rollout, RolloutConfig, RolloutEngine};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyVariant {
    DecsterTs1,
    DecsterTs2,
    DecsterC,
    Renyi,
    TsRenyi,
    Random,
}

impl PolicyVariant {
    pub const ALL: [PolicyVariant; 6] = [
        PolicyVariant::Random,
        PolicyVariant::Renyi,
        PolicyVariant::TsRenyi,
        PolicyVariant::DecsterTs1,
        PolicyVariant::DecsterTs2,
        PolicyVariant::DecsterC,
    ];

    /// Command-line name.
    pub fn name(self) -> &'static str {
        match self {
            PolicyVariant::Random => "random",
            PolicyVariant::Renyi => "renyi",
            PolicyVariant::TsRenyi => "ts-renyi",
            PolicyVariant::DecsterTs1 => "decster1",
            PolicyVariant::DecsterTs2 => "decster2",
            PolicyVariant::DecsterC => "decster-c",
        }
    }
}

impl fmt::Display for PolicyVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = PolicyVariant::ALL.iter().map(|v| v.name()).collect();
                invalid(format!("unknown policy '{s}' (expected one of {})", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyKind {
    pub variant: PolicyVariant,
    pub renyi_alpha: f64,
}

impl PolicyKind {
    pub fn new(variant: PolicyVariant) -> Self {
        PolicyKind { variant, renyi_alpha: 0.5 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.renyi_alpha > 0.0 && self.renyi_alpha < 1.0) {
            return Err(invalid("renyi_alpha must lie in (0, 1)"));
        }
        Ok(())
    }
}

impl Default for PolicyKind {
    fn default() -> Self {
        PolicyKind::new(PolicyVariant::DecsterTs2)
    }
}

/// Models and tuning shared by every decision of one agent.
#[derive(Debug, Clone, Copy)]
pub struct DecisionSetup<'a> {
    pub actions: &'a ActionSpace,
    pub sensor: &'a SensorModel,
    pub motion: &'a MotionModel,
    /// Births spawned at pseudo-measurements when rollouts include them.
    pub birth: &'a BirthConfig,
    pub ts: &'a TsConfig,
    pub ospa: &'a OspaParams,
    pub rollout: &'a RolloutConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub action_index: usize,
    pub action: SensingAction,
    /// Best candidates as `(action index, score)`, best first. Scores are
    /// minimized for DecSTER and maximized for RENYI.
    pub top_scores: Vec<(usize, f64)>,
    pub ts_cardinalities: Vec<usize>,
}

/// Index of the smallest value; exact ties are broken uniformly at random.
pub fn argmin_with_ties(values: &[f64], rng: &mut RngStream) -> usize {
    let best = values.iter().copied().fold(f64::INFINITY, f64::min);
    let tied: Vec<usize> = (0..values.len()).filter(|&i| values[i] == best).collect();
    match tied.len() {
        0 => rng.random_range(0..values.len()),
        1 => tied[0],
        n => tied[rng.random_range(0..n)],
    }
}

/// `sum w_pred + a/(1-a) sum w_upd - 1/(1-a) sum w_upd^a w_pred^(1-a)`.
pub fn renyi_divergence(w_pred: &[f64], w_upd: &[f64], alpha: f64) -> f64 {
    let mut sum_pred = 0.0;
    let mut sum_upd = 0.0;
    let mut cross = 0.0;
    for (&p, &u) in w_pred.iter().zip(w_upd) {
        sum_pred += p;
        sum_upd += u;
        cross += u.powf(alpha) * p.powf(1.0 - alpha);
    }
    sum_pred + alpha / (1.0 - alpha) * sum_upd - cross / (1.0 - alpha)
}

/// Chooses the next sensing action. `phd` is the agent's current posterior
/// and is not modified.
pub fn select_action(
    policy: &PolicyKind,
    phd: &ParticlePhd,
    setup: &DecisionSetup<'_>,
    rng: &mut RngStream,
) -> Result<Decision> {
    let actions = setup.actions;
    if actions.is_empty() {
        return Err(invalid("the action space is empty"));
    }
    policy.validate()?;
    if policy.variant == PolicyVariant::Random {
        let k = rng.random_range(0..actions.len());
        return Ok(decision(actions, k, Vec::new(), Vec::new()));
    }
    let pred = predict(phd, setup.motion, &[], rng);
    let births = Some((setup.birth.weight_per_measurement, setup.birth.position_std));
    let engine = RolloutEngine::new(&pred, actions, setup.sensor, setup.rollout, births, rng);
    match policy.variant {
        PolicyVariant::Renyi => {
            let est = engine.estimates().clone();
            renyi_choice(&pred, &est, policy.renyi_alpha, setup, rng, Vec::new())
        }
        PolicyVariant::TsRenyi => {
            let space = actions.space();
            let sample = ts_phd_2_from_estimates(engine.total_mass(), engine.estimates(), space, setup.ts, rng);
            let n = vec![sample.len()];
            renyi_choice(&pred, &sample, policy.renyi_alpha, setup, rng, n)
        }
        _ => decster_choice(policy.variant, &pred, &engine, setup, rng),
    }
}

fn decision(actions: &ActionSpace, k: usize, top_scores: Vec<(usize, f64)>, ts_cardinalities: Vec<usize>) -> Decision {
    Decision {
        action_index: k,
        action: actions.actions()[k],
        top_scores,
        ts_cardinalities,
    }
}

fn top_k(values: &[f64], k: usize) -> Vec<(usize, f64)> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    idx.into_iter().take(k).map(|i| (i, values[i])).collect()
}

fn decster_choice(
    variant: PolicyVariant,
    pred: &ParticlePhd,
    engine: &RolloutEngine<'_>,
    setup: &DecisionSetup<'_>,
    rng: &mut RngStream,
) -> Result<Decision> {
    let actions = setup.actions;
    let space = actions.space();
    let samples: Vec<TargetSet> = match variant {
        PolicyVariant::DecsterTs1 => vec![ts_phd_1(pred, setup.ts, rng)],
        // DecSTER-C scores cardinality alone, so it keeps one draw per replicate
        PolicyVariant::DecsterTs2 if setup.ts.ts2_shared_cardinality => {
            let n = poisson_count(engine.total_mass(), rng);
            (0..setup.ts.ts2_samples_per_decision)
                .map(|_| ts_phd_2_with_cardinality(n, engine.estimates(), space, setup.ts, rng))
                .collect()
        }
        _ => (0..setup.ts.ts2_samples_per_decision)
            .map(|_| ts_phd_2_from_estimates(engine.total_mass(), engine.estimates(), space, setup.ts, rng))
            .collect(),
    };
    let mut values = vec![0.0; actions.len()];
    for (k, act) in actions.actions().iter().enumerate() {
        let mut acc = 0.0;
        // replicates often see the same pseudo-measurements in a region
        let mut seen: Vec<(MeasurementSet, TargetSet)> = Vec::new();
        for sample in &samples {
            let z = if setup.rollout.stochastic {
                rollout::stochastic_pseudo_measurements(sample, act, setup.sensor, rng)
            } else {
                pseudo_measurements(sample, act, setup.sensor)
            };
            acc += match variant {
                PolicyVariant::DecsterC => {
                    let n = crate::phd::round_mass(engine.mass_after(k, z.points()));
                    ospa_cardinality_term(sample.len(), n, setup.ospa)
                }
                _ if setup.rollout.exact => {
                    let mut base = pred.clone();
                    if setup.rollout.births {
                        let born = predict(&ParticlePhd::default(), setup.motion, &[(&z, setup.birth)], rng);
                        base = ParticlePhd::new(base.iter().chain(born.iter()).copied().collect())?;
                    }
                    let up = crate::phd::update(&base, act, setup.sensor, &z)?;
                    ospa(sample, &crate::phd::extract_targets(&up, rng), setup.ospa)
                }
                _ => {
                    let y = match seen.iter().find(|(z0, _)| *z0 == z) {
                        Some((_, y)) => y.clone(),
                        None => {
                            let y = engine.rollout(k, z.points());
                            seen.push((z, y.clone()));
                            y
                        }
                    };
                    ospa(sample, &y, setup.ospa)
                }
            };
        }
        values[k] = acc / samples.len() as f64;
    }
    let k = argmin_with_ties(&values, rng);
    let sizes = samples.iter().map(|s| s.len()).collect();
    Ok(decision(actions, k, top_k(&values, 10), sizes))
}

fn renyi_choice(
    pred: &ParticlePhd,
    truth: &TargetSet,
    alpha: f64,
    setup: &DecisionSetup<'_>,
    rng: &mut RngStream,
    ts_cardinalities: Vec<usize>,
) -> Result<Decision> {
    let actions = setup.actions;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); actions.len()];
    for (i, p) in pred.iter().enumerate() {
        for a in actions.tiles_containing(p.state.px, p.state.py) {
            if actions.actions()[a].contains(&p.state) {
                members[a].push(i);
            }
        }
    }
    // negated so that the shared argmin applies
    let mut neg = vec![0.0; actions.len()];
    for (k, act) in actions.actions().iter().enumerate() {
        let z: MeasurementSet = if setup.rollout.stochastic {
            rollout::stochastic_pseudo_measurements(truth, act, setup.sensor, rng)
        } else {
            pseudo_measurements(truth, act, setup.sensor)
        };
        let m = &members[k];
        let hx: Vec<[f64; 2]> = m.iter().map(|&i| setup.sensor.project(&pred.particles()[i].state)).collect();
        let w: Vec<f64> = m.iter().map(|&i| pred.particles()[i].weight).collect();
        let f = update_factors(&hx, &w, act.clutter_density(), setup.sensor, z.points());
        let upd: Vec<f64> = w.iter().zip(&f).map(|(w, f)| w * f).collect();
        neg[k] = -renyi_divergence(&w, &upd, alpha);
    }
    let k = argmin_with_ties(&neg, rng);
    let top = top_k(&neg, 10).into_iter().map(|(i, v)| (i, -v)).collect();
    Ok(decision(actions, k, top, ts_cardinalities))
}
