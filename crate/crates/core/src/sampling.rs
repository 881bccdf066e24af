//! Thompson samples of the multi-target state drawn from a particle PHD.
//!
//! Two samplers are provided. The first resamples a small set of particles in
//! proportion to weight and clusters them. The second draws a Poisson
//! cardinality and fills it with current estimates first, then with uniformly
//! random states.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{SearchSpace, TargetSet};
use crate::kmeans::{weighted_kmeans, KMeansConfig, WeightedCloud};
use crate::phd::{extract_targets_with, round_mass, ParticlePhd};
use crate::rng::RngStream;
use crate::world::{poisson_count, uniform_state};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TsMethod {
    Ts1,
    Ts2,
}

/// Cardinality rule for the particle-clustering sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ts1Cardinality {
    /// `round` of the total PHD mass.
    TotalMass,
    /// `round` of the summed original weights of the drawn particles.
    DrawnWeights,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsConfig {
    pub method: TsMethod,
    pub ts1_particle_count: usize,
    pub ts1_cardinality: Ts1Cardinality,
    pub ts2_samples_per_decision: usize,
    /// Draw one cardinality per decision and vary only the locations across
    /// its replicates.
    pub ts2_shared_cardinality: bool,
    /// Size of the uniform pool; `None` means `4 * ceil(mass) + 8`.
    pub ts2_random_pool_size: Option<usize>,
    /// Velocity bound for uniformly drawn states.
    pub v_max: f64,
}

impl Default for TsConfig {
    fn default() -> Self {
        TsConfig {
            method: TsMethod::Ts2,
            ts1_particle_count: 100,
            ts1_cardinality: Ts1Cardinality::TotalMass,
            ts2_samples_per_decision: 10,
            ts2_shared_cardinality: true,
            ts2_random_pool_size: None,
            v_max: 0.1,
        }
    }
}

impl TsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ts1_particle_count == 0 {
            return Err(invalid("ts1_particle_count must be >= 1"));
        }
        if self.ts2_samples_per_decision == 0 {
            return Err(invalid("ts2_samples_per_decision must be >= 1"));
        }
        if !(self.v_max >= 0.0 && self.v_max.is_finite()) {
            return Err(invalid("v_max must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn pool_size(&self, mass: f64) -> usize {
        self.ts2_random_pool_size
            .unwrap_or_else(|| 4 * mass.max(0.0).ceil() as usize + 8)
    }
}

/// Particle-clustering sampler.
pub fn ts_phd_1(phd: &ParticlePhd, cfg: &TsConfig, rng: &mut RngStream) -> TargetSet {
    let total = phd.total_weight();
    if phd.is_empty() || total <= 0.0 {
        return TargetSet::new();
    }
    let mut cum = Vec::with_capacity(phd.len());
    let mut acc = 0.0;
    for p in phd.iter() {
        acc += p.weight;
        cum.push(acc);
    }
    let mut drawn = WeightedCloud::with_capacity(cfg.ts1_particle_count);
    let mut drawn_mass = 0.0;
    for _ in 0..cfg.ts1_particle_count {
        let u = rng.random::<f64>() * acc;
        let i = cum.partition_point(|&c| c <= u).min(phd.len() - 1);
        let p = &phd.particles()[i];
        drawn.push(1.0, &p.state);
        drawn_mass += p.weight;
    }
    let n = match cfg.ts1_cardinality {
        Ts1Cardinality::TotalMass => round_mass(total),
        Ts1Cardinality::DrawnWeights => round_mass(drawn_mass),
    };
    let km = KMeansConfig {
        merge_cell: None,
        ..KMeansConfig::default()
    };
    TargetSet::from_vec(weighted_kmeans(&drawn, n, &km, rng).centroids)
}

/// Poisson-cardinality sampler. Extracts the estimates from `phd` first.
pub fn ts_phd_2(phd: &ParticlePhd, space: &SearchSpace, cfg: &TsConfig, rng: &mut RngStream) -> TargetSet {
    let estimates = extract_targets_with(phd, &KMeansConfig::default(), rng);
    ts_phd_2_from_estimates(phd.total_weight(), &estimates, space, cfg, rng)
}

/// Poisson-cardinality sampler with precomputed estimates, so several
/// replicates for one decision can share one extraction.
///
/// The uniform states that fill the tail are i.i.d., so drawing the needed
/// number directly has the same law as taking them without replacement from a
/// pool of `pool_size` i.i.d. states.
pub fn ts_phd_2_from_estimates(
    mass: f64,
    estimates: &TargetSet,
    space: &SearchSpace,
    cfg: &TsConfig,
    rng: &mut RngStream,
) -> TargetSet {
    let n = poisson_count(mass, rng);
    ts_phd_2_with_cardinality(n, estimates, space, cfg, rng)
}

/// The location part of the Poisson-cardinality sampler for a given
/// cardinality `n`.
pub fn ts_phd_2_with_cardinality(
    n: usize,
    estimates: &TargetSet,
    space: &SearchSpace,
    cfg: &TsConfig,
    rng: &mut RngStream,
) -> TargetSet {
    let mut pool: Vec<_> = estimates.as_slice().to_vec();
    let from_est = n.min(pool.len());
    let mut out = Vec::with_capacity(n);
    // partial Fisher-Yates: first `from_est` slots become a uniform subset
    for i in 0..from_est {
        let j = rng.random_range(i..pool.len());
        pool.swap(i, j);
        out.push(pool[i]);
    }
    for _ in from_est..n {
        out.push(uniform_state(space, cfg.v_max, rng));
    }
    TargetSet::from_vec(out)
}

/// One sample with the configured method.
pub fn thompson_sample(phd: &ParticlePhd, space: &SearchSpace, cfg: &TsConfig, rng: &mut RngStream) -> TargetSet {
    match cfg.method {
        TsMethod::Ts1 => ts_phd_1(phd, cfg, rng),
        TsMethod::Ts2 => ts_phd_2(phd, space, cfg, rng),
    }
}
