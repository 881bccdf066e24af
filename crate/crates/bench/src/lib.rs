//! Shared fixtures for the criterion benchmarks: a mid-trial posterior and
//! the models an agent decides with.

use mast_core::phd::filter_step;
use mast_core::policy::DecisionSetup;
use mast_core::world::{init_targets, sense, step_targets};
use mast_core::{
    build_action_space, ActionSpace, MeasurementSet, ParticlePhd, RngStream, SensingAction, TargetSet, TrialConfig,
};

pub struct Fixture {
    pub cfg: TrialConfig,
    pub actions: ActionSpace,
    pub truth: TargetSet,
    /// Posterior after `warmup` steps of scale-8 sweeps.
    pub phd: ParticlePhd,
}

impl Fixture {
    pub fn new(targets: usize, warmup: u32, seed: u64) -> Self {
        let mut cfg = TrialConfig::default();
        cfg.targets = targets;
        let actions = build_action_space(cfg.space, &cfg.scales, &cfg.clutter_rates).expect("default actions");
        let mut rng = RngStream::from_seed(seed);
        let mut truth = init_targets(&cfg.space, targets, cfg.v_max, &mut rng);
        let mut phd = ParticlePhd::uniform(&cfg.space, cfg.prior_mass, 2000, cfg.v_max, &mut rng);
        let wide: Vec<SensingAction> = actions.actions().iter().filter(|a| a.scale == 8).copied().collect();
        for t in 0..warmup {
            truth = step_targets(&truth, &cfg.filter.motion, &cfg.space, &mut rng);
            let a = wide[t as usize % wide.len()];
            let z = sense(&truth, &a, &cfg.filter.sensor, &mut rng);
            phd = filter_step(&phd, &[(&a, &z)], &[&z], &cfg.filter, &mut rng).expect("valid step");
        }
        Fixture { cfg, actions, truth, phd }
    }

    pub fn setup(&self) -> DecisionSetup<'_> {
        DecisionSetup {
            actions: &self.actions,
            sensor: &self.cfg.filter.sensor,
            motion: &self.cfg.filter.motion,
            birth: &self.cfg.filter.birth,
            ts: &self.cfg.ts,
            ospa: &self.cfg.ospa,
            rollout: &self.cfg.rollout,
        }
    }

    /// One observation per action, drawn from the fixture's ground truth.
    pub fn observe(&self, actions: &[SensingAction], rng: &mut RngStream) -> Vec<MeasurementSet> {
        actions.iter().map(|a| sense(&self.truth, a, &self.cfg.filter.sensor, rng)).collect()
    }
}
