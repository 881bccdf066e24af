//! Trial loop and late-arrival handling.

use mast_core::runtime::{run_trial_with_states, AgentState, DelayDistribution, NoObserver};
use mast_core::world::sense;
use mast_core::{
    build_action_space, run_trial, FilterConfig, ObservationRecord, ParticlePhd, PolicyKind, PolicyVariant,
    RngStream, SearchSpace, TargetSet, TargetState, TrialConfig,
};
use proptest::prelude::*;

/// Small, fast trial.
fn small(policy: PolicyVariant) -> TrialConfig {
    let mut cfg = TrialConfig::default();
    cfg.policy = PolicyKind::new(policy);
    cfg.targets = 4;
    cfg.agents = 2;
    cfg.steps = 12;
    cfg.prior_mass = 2.0;
    cfg.filter.particles_per_target = 150;
    cfg.ts.ts2_samples_per_decision = 3;
    cfg
}

#[test]
fn same_seed_gives_identical_traces() {
    for policy in [PolicyVariant::Random, PolicyVariant::Renyi, PolicyVariant::DecsterTs2] {
        let cfg = small(policy);
        let a = run_trial(&cfg, 42).unwrap();
        let b = run_trial(&cfg, 42).unwrap();
        assert_eq!(a, b, "{policy}");
        assert_eq!(a.len(), 2);
        assert!(a.iter().all(|t| t.steps.len() == 12));
        let c = run_trial(&cfg, 43).unwrap();
        assert_ne!(a, c);
    }
}

#[test]
fn parallel_agents_match_sequential() {
    let mut cfg = small(PolicyVariant::DecsterTs2);
    cfg.agents = 3;
    cfg.channel.share_prob = 0.6;
    cfg.channel.delay = DelayDistribution::Uniform { max: 3 };
    let seq = run_trial(&cfg, 5).unwrap();
    cfg.parallel_agents = true;
    assert_eq!(run_trial(&cfg, 5).unwrap(), seq);
}

#[test]
fn measurement_counts_are_cumulative() {
    let tr = run_trial(&small(PolicyVariant::Random), 1).unwrap();
    for t in &tr {
        for (i, r) in t.steps.iter().enumerate() {
            assert_eq!(r.step, i as u32 + 1);
            assert_eq!(r.measurements, r.step);
        }
    }
}

#[test]
fn full_sharing_leaves_nothing_queued() {
    let mut cfg = small(PolicyVariant::Random);
    cfg.agents = 3;
    let (traces, states) = run_trial_with_states(&cfg, 9, &mut NoObserver).unwrap();
    for t in &traces {
        assert_eq!(t.unsent, 0);
        assert_eq!(t.broadcasts, cfg.steps);
    }
    // teammates' final-step records are still in flight
    let expected = cfg.agents * (cfg.steps as usize - 1) + 1;
    for s in &states {
        assert_eq!(s.log().len(), expected);
        assert!(s.log().windows(2).all(|w| (w[0].time, w[0].agent_id) < (w[1].time, w[1].agent_id)));
    }
}

#[test]
fn broadcast_frequency_matches_share_prob() {
    let mut cfg = TrialConfig::default();
    cfg.policy = PolicyKind::new(PolicyVariant::Random);
    cfg.targets = 0;
    cfg.agents = 1;
    cfg.steps = 10_000;
    cfg.prior_mass = 0.0;
    cfg.clutter_rates = vec![0.0; 4];
    cfg.channel.share_prob = 0.5;
    let tr = run_trial(&cfg, 3).unwrap();
    let n = cfg.steps as f64;
    let freq = tr[0].broadcasts as f64 / n;
    let sigma = (0.25 / n).sqrt();
    assert!((freq - 0.5).abs() < 3.0 * sigma, "frequency {freq}");
}

#[test]
fn silent_channel_never_broadcasts() {
    let mut cfg = small(PolicyVariant::Random);
    cfg.channel.share_prob = 0.0;
    let (traces, states) = run_trial_with_states(&cfg, 2, &mut NoObserver).unwrap();
    for (t, s) in traces.iter().zip(&states) {
        assert_eq!(t.broadcasts, 0);
        assert_eq!(t.unsent, cfg.steps);
        assert!(s.log().iter().all(|r| r.agent_id == s.agent_id()));
    }
}

#[test]
fn nothing_to_find_gives_zero_error() {
    let mut cfg = small(PolicyVariant::DecsterTs2);
    cfg.agents = 1;
    cfg.targets = 0;
    cfg.prior_mass = 0.0;
    cfg.clutter_rates = vec![0.0; 4];
    let tr = run_trial(&cfg, 4).unwrap();
    assert!(tr[0].steps.iter().all(|r| r.ospa == 0.0 && r.estimated_cardinality == 0));
}

#[test]
fn invalid_config_is_rejected_before_running() {
    let mut cfg = small(PolicyVariant::Random);
    cfg.agents = 0;
    assert!(run_trial(&cfg, 1).is_err());
    let mut cfg = small(PolicyVariant::Random);
    cfg.channel.share_prob = 1.5;
    assert!(run_trial(&cfg, 1).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn replay_matches_processing_from_scratch(
        seed in any::<u64>(),
        share in 0.2f64..1.0,
        max_delay in 0u32..6,
        horizon in 2u32..8,
    ) {
        let mut cfg = small(PolicyVariant::Random);
        cfg.agents = 3;
        cfg.steps = 20;
        cfg.checkpoint_horizon = horizon;
        cfg.channel.share_prob = share;
        cfg.channel.delay = DelayDistribution::Uniform { max: max_delay };
        let (_, states) = run_trial_with_states(&cfg, seed, &mut NoObserver).unwrap();
        for s in &states {
            let fresh = s.replay_from_scratch(&cfg.filter).unwrap();
            prop_assert_eq!(s.phd(), &fresh);
        }
    }
}

/// One agent fed hand-made records.
struct Bench {
    cfg: FilterConfig,
    agent: AgentState,
    truth: TargetSet,
    rng: RngStream,
    actions: mast_core::ActionSpace,
}

impl Bench {
    fn new() -> Self {
        let space = SearchSpace::square(16.0).unwrap();
        let mut cfg = FilterConfig::default();
        cfg.motion = cfg.motion.with_velocity_bound(Some(0.1)).with_domain(Some(space));
        cfg.particles_per_target = 200;
        let mut rng = RngStream::from_seed(77);
        let prior = ParticlePhd::uniform(&space, 2.0, 400, 0.1, &mut rng);
        Bench {
            cfg,
            agent: AgentState::new(1, 77, prior, 25),
            truth: TargetSet::from_vec(vec![TargetState::at(5.5, 5.5), TargetState::at(10.2, 3.3)]),
            rng,
            actions: build_action_space(space, &[1, 2, 4, 8], &[0.005, 0.04, 1.0, 5.0]).unwrap(),
        }
    }

    fn record(&mut self, time: u32, agent_id: u32) -> ObservationRecord {
        let action = self.actions.actions()[(time as usize * 31 + agent_id as usize * 7) % self.actions.len()];
        let measurements = sense(&self.truth, &action, &self.cfg.sensor, &mut self.rng);
        ObservationRecord { time, agent_id, action, measurements }
    }

    fn run_own(&mut self, steps: u32) {
        for _ in 0..steps {
            let r = self.record(self.agent.next_step(), 1);
            self.agent.observe(r, &self.cfg).unwrap();
        }
    }
}

#[test]
fn late_record_replays_exactly_the_missed_steps() {
    let mut b = Bench::new();
    b.run_own(5);
    assert_eq!(b.agent.next_step(), 6);
    let before = b.agent.diagnostics();
    let late = b.record(3, 2);
    b.agent.assimilate(vec![late], &b.cfg).unwrap();
    let after = b.agent.diagnostics();
    assert_eq!(after.replays - before.replays, 1);
    assert_eq!(after.replayed_steps - before.replayed_steps, 3);
    assert_eq!(after.filter_calls - before.filter_calls, 3);
    assert_eq!(b.agent.phd(), &b.agent.replay_from_scratch(&b.cfg).unwrap());
}

#[test]
fn in_order_record_needs_no_replay() {
    let mut b = Bench::new();
    b.run_own(4);
    let before = b.agent.diagnostics();
    let r = b.record(5, 2);
    b.agent.assimilate(vec![r], &b.cfg).unwrap();
    assert_eq!(b.agent.diagnostics(), before);
    b.run_own(1);
    assert_eq!(b.agent.diagnostics().filter_calls, before.filter_calls + 1);
    assert_eq!(b.agent.phd(), &b.agent.replay_from_scratch(&b.cfg).unwrap());
}

#[test]
fn duplicate_delivery_is_a_no_op() {
    let mut b = Bench::new();
    b.run_own(6);
    let r = b.record(4, 3);
    b.agent.assimilate(vec![r.clone()], &b.cfg).unwrap();
    let phd = b.agent.phd().clone();
    let log_len = b.agent.log().len();
    b.agent.assimilate(vec![r.clone(), r], &b.cfg).unwrap();
    assert_eq!(b.agent.phd(), &phd);
    assert_eq!(b.agent.log().len(), log_len);
    assert_eq!(b.agent.diagnostics().duplicates, 2);
}

#[test]
fn records_past_the_horizon_are_retimed() {
    let space = SearchSpace::square(16.0).unwrap();
    let mut b = Bench::new();
    let mut rng = RngStream::from_seed(1);
    b.agent = AgentState::new(1, 77, ParticlePhd::uniform(&space, 2.0, 400, 0.1, &mut rng), 3);
    b.run_own(8);
    let old = b.record(2, 2);
    b.agent.assimilate(vec![old.clone()], &b.cfg).unwrap();
    assert_eq!(b.agent.diagnostics().retimed_records, 1);
    assert_eq!(b.agent.diagnostics().replays, 0);
    assert!(b.agent.log().iter().any(|r| r.agent_id == 2 && r.time == 9));
    // the original stamp still identifies duplicates
    b.agent.assimilate(vec![old], &b.cfg).unwrap();
    assert_eq!(b.agent.diagnostics().duplicates, 1);
    b.run_own(1);
    assert_eq!(b.agent.phd(), &b.agent.replay_from_scratch(&b.cfg).unwrap());
}
