//! Sequential Monte Carlo PHD filter.
//!
//! The intensity is a cloud of weighted particles. Total weight over a region
//! is the expected number of targets there.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{SearchSpace, SensingAction, TargetSet, TargetState};
use crate::kmeans::{weighted_kmeans, KMeansConfig, WeightedCloud};
use crate::rng::RngStream;
use crate::world::{reflect, MeasurementSet, MotionModel, SensorModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub weight: f64,
    pub state: TargetState,
}

impl Particle {
    pub fn new(weight: f64, state: TargetState) -> Self {
        Particle { weight, state }
    }
}

/// Particle approximation of the PHD intensity.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParticlePhd {
    particles: Vec<Particle>,
}

impl ParticlePhd {
    pub fn empty() -> Self {
        ParticlePhd::default()
    }

    pub fn new(particles: Vec<Particle>) -> Result<Self> {
        if let Some(p) = particles.iter().find(|p| !(p.weight >= 0.0 && p.weight.is_finite())) {
            return Err(invalid(format!("particle weight must be finite and >= 0, got {}", p.weight)));
        }
        Ok(ParticlePhd { particles })
    }

    /// `count` equally weighted particles spread uniformly over the space with
    /// total weight `mass`; velocities uniform on `[-v_max, v_max]`.
    pub fn uniform(space: &SearchSpace, mass: f64, count: usize, v_max: f64, rng: &mut RngStream) -> Self {
        if mass <= 0.0 || count == 0 {
            return ParticlePhd::empty();
        }
        let w = mass / count as f64;
        let particles = (0..count)
            .map(|_| Particle::new(w, crate::world::uniform_state(space, v_max, rng)))
            .collect();
        ParticlePhd { particles }
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Particle> {
        self.particles.iter()
    }

    /// Sum of weights in particle order.
    pub fn total_weight(&self) -> f64 {
        self.particles.iter().map(|p| p.weight).sum()
    }

    pub fn into_particles(self) -> Vec<Particle> {
        self.particles
    }

    pub(crate) fn to_cloud(&self) -> WeightedCloud {
        let mut c = WeightedCloud::with_capacity(self.len());
        for p in &self.particles {
            c.push(p.weight, &p.state);
        }
        c
    }
}

/// How birth particles are spawned around each measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirthConfig {
    pub particles_per_measurement: usize,
    /// Total weight of the particles spawned for one measurement.
    pub weight_per_measurement: f64,
    pub position_std: f64,
    pub velocity_std: f64,
}

impl Default for BirthConfig {
    fn default() -> Self {
        BirthConfig {
            particles_per_measurement: 100,
            weight_per_measurement: 0.01,
            position_std: 0.1,
            velocity_std: 0.05,
        }
    }
}

impl BirthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particles_per_measurement == 0 {
            return Err(invalid("birth particles per measurement must be >= 1"));
        }
        if !(self.weight_per_measurement >= 0.0 && self.weight_per_measurement.is_finite()) {
            return Err(invalid("birth weight must be finite and >= 0"));
        }
        if !(self.position_std >= 0.0 && self.velocity_std >= 0.0) {
            return Err(invalid("birth spreads must be >= 0"));
        }
        Ok(())
    }
}

/// Prediction step: propagate survivors through the motion model and append
/// birth particles around every measurement in `births`.
pub fn predict(
    phd: &ParticlePhd,
    model: &MotionModel,
    births: &[(&MeasurementSet, &BirthConfig)],
    rng: &mut RngStream,
) -> ParticlePhd {
    let n_births: usize = births.iter().map(|(z, b)| z.len() * b.particles_per_measurement).sum();
    let mut out = Vec::with_capacity(phd.len() + n_births);
    let ps = model.survival_prob();
    for p in &phd.particles {
        out.push(Particle::new(p.weight * ps, model.propagate(&p.state, rng)));
    }
    for (zs, cfg) in births {
        let w = cfg.weight_per_measurement / cfg.particles_per_measurement as f64;
        for z in zs.iter() {
            for _ in 0..cfg.particles_per_measurement {
                let nx: f64 = rng.sample(StandardNormal);
                let ny: f64 = rng.sample(StandardNormal);
                let nvx: f64 = rng.sample(StandardNormal);
                let nvy: f64 = rng.sample(StandardNormal);
                let mut s = TargetState::new(
                    z[0] + cfg.position_std * nx,
                    z[1] + cfg.position_std * ny,
                    cfg.velocity_std * nvx,
                    cfg.velocity_std * nvy,
                );
                if let Some(space) = model.domain() {
                    s = reflect(s, space);
                }
                out.push(Particle::new(w, s));
            }
        }
    }
    ParticlePhd { particles: out }
}

/// Measurement update for one sensing action.
///
/// Particle `i` is reweighted by `(1 - p_d,i) + sum_z psi_z(x_i) / eta_z`
/// where `p_d,i` is the detection probability inside the region and zero
/// outside, `psi_z = p_d,i g(z | x_i)`, and
/// `eta_z = kappa + sum_i psi_z(x_i) w_i` with uniform clutter density
/// `kappa = lambda / area`.
pub fn update(
    phd: &ParticlePhd,
    action: &SensingAction,
    sensor: &SensorModel,
    measurements: &MeasurementSet,
) -> Result<ParticlePhd> {
    let mut out = phd.clone();
    update_in_place(&mut out, action, sensor, measurements)?;
    Ok(out)
}

pub(crate) fn update_in_place(
    phd: &mut ParticlePhd,
    action: &SensingAction,
    sensor: &SensorModel,
    measurements: &MeasurementSet,
) -> Result<()> {
    if let Some(z) = measurements.iter().find(|z| !action.covers_point(z[0], z[1])) {
        return Err(Error::ContractViolation(format!(
            "measurement ({}, {}) lies outside the sensed region at ({}, {}) scale {}",
            z[0], z[1], action.origin_x, action.origin_y, action.scale
        )));
    }
    if !measurements.is_empty() && sensor.noise_std <= 0.0 {
        return Err(Error::ContractViolation(
            "the filter update needs a positive sensor noise".into(),
        ));
    }
    let inside: Vec<usize> = (0..phd.len())
        .filter(|&i| action.contains(&phd.particles[i].state))
        .collect();
    let hx: Vec<[f64; 2]> = inside.iter().map(|&i| sensor.project(&phd.particles[i].state)).collect();
    let weights: Vec<f64> = inside.iter().map(|&i| phd.particles[i].weight).collect();
    let factors = update_factors(&hx, &weights, action.clutter_density(), sensor, measurements.points());
    for (&i, f) in inside.iter().zip(factors) {
        phd.particles[i].weight *= f;
    }
    Ok(())
}

/// Multiplicative weight factors for in-region particles with projected
/// positions `hx` and weights `weights`, in input order.
pub(crate) fn update_factors(
    hx: &[[f64; 2]],
    weights: &[f64],
    clutter_density: f64,
    sensor: &SensorModel,
    zs: &[[f64; 2]],
) -> Vec<f64> {
    update_factors_with_births(hx, weights, clutter_density, sensor, zs, None).0
}

/// Like [`update_factors`], with a Gaussian birth group of total weight
/// `weight` and spread `std` centred on every measurement. Returns the
/// particle factors and the updated mass of each birth group, using the
/// group's mean likelihood.
pub(crate) fn update_factors_with_births(
    hx: &[[f64; 2]],
    weights: &[f64],
    clutter_density: f64,
    sensor: &SensorModel,
    zs: &[[f64; 2]],
    births: Option<(f64, f64)>,
) -> (Vec<f64>, Vec<f64>) {
    let n = hx.len();
    let pd = sensor.detection_prob;
    let mut factors = vec![1.0 - pd; n];
    let (bw, bstd) = births.unwrap_or((0.0, 0.0));
    let mut birth_mass = vec![bw * (1.0 - pd); if births.is_some() { zs.len() } else { 0 }];
    if zs.is_empty() || pd == 0.0 {
        return (factors, birth_mass);
    }
    let var = sensor.noise_std * sensor.noise_std;
    let norm = pd / (2.0 * std::f64::consts::PI * var);
    let inv = 1.0 / (2.0 * var);
    let bvar = var + bstd * bstd;
    let bnorm = pd / (2.0 * std::f64::consts::PI * bvar);
    let binv = 1.0 / (2.0 * bvar);
    let mut psi = vec![0.0; n];
    let mut bpsi = vec![0.0; birth_mass.len()];
    for z in zs {
        let mut eta = clutter_density;
        for i in 0..n {
            let d2 = (z[0] - hx[i][0]).powi(2) + (z[1] - hx[i][1]).powi(2);
            psi[i] = norm * (-d2 * inv).exp();
            eta += psi[i] * weights[i];
        }
        for (j, c) in zs.iter().enumerate().take(bpsi.len()) {
            let d2 = (z[0] - c[0]).powi(2) + (z[1] - c[1]).powi(2);
            bpsi[j] = bnorm * (-d2 * binv).exp();
            eta += bpsi[j] * bw;
        }
        if eta > 0.0 && eta.is_finite() {
            for i in 0..n {
                factors[i] += psi[i] / eta;
            }
            for j in 0..bpsi.len() {
                birth_mass[j] += bw * bpsi[j] / eta;
            }
        }
    }
    (factors, birth_mass)
}

/// Sum of weights of particles inside `region`, or of all particles.
pub fn expected_cardinality(phd: &ParticlePhd, region: Option<&SensingAction>) -> f64 {
    match region {
        None => phd.total_weight(),
        Some(a) => phd
            .particles
            .iter()
            .filter(|p| a.contains(&p.state))
            .map(|p| p.weight)
            .sum(),
    }
}

/// Round half up, for non-negative masses.
pub fn round_mass(x: f64) -> usize {
    if x.is_finite() && x > 0.0 {
        (x + 0.5).floor() as usize
    } else {
        0
    }
}

/// Low-variance (systematic) resampling to `max(1, round(W)) * particles_per_target`
/// equally weighted particles with the same total weight `W`.
pub fn resample(phd: &ParticlePhd, particles_per_target: usize, rng: &mut RngStream) -> Result<ParticlePhd> {
    if particles_per_target == 0 {
        return Err(invalid("particles per target must be >= 1"));
    }
    let total = phd.total_weight();
    if total <= 0.0 || phd.is_empty() {
        return Ok(ParticlePhd::empty());
    }
    let m = round_mass(total).max(1) * particles_per_target;
    let idx = systematic_indices(phd.particles.iter().map(|p| p.weight), total, m, rng);
    let w = total / m as f64;
    Ok(ParticlePhd {
        particles: idx.into_iter().map(|i| Particle::new(w, phd.particles[i].state)).collect(),
    })
}

/// `m` indices drawn by a single-offset systematic sweep over the weights.
pub(crate) fn systematic_indices(
    weights: impl Iterator<Item = f64>,
    total: f64,
    m: usize,
    rng: &mut RngStream,
) -> Vec<usize> {
    let step = total / m as f64;
    let mut u = rng.random::<f64>() * step;
    let mut out = Vec::with_capacity(m);
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        if w <= 0.0 {
            continue;
        }
        last = i;
        acc += w;
        while out.len() < m && u < acc {
            out.push(i);
            u += step;
        }
    }
    // rounding in the running sum can leave the last slot unfilled
    while out.len() < m {
        out.push(last);
    }
    out
}

/// Multi-target state estimate: `round(W)` weighted k-means centroids.
pub fn extract_targets(phd: &ParticlePhd, rng: &mut RngStream) -> TargetSet {
    extract_targets_with(phd, &KMeansConfig::default(), rng)
}

pub fn extract_targets_with(phd: &ParticlePhd, cfg: &KMeansConfig, rng: &mut RngStream) -> TargetSet {
    let n = round_mass(phd.total_weight());
    if n == 0 {
        return TargetSet::new();
    }
    let mut cloud = phd.to_cloud();
    if let Some(cell) = cfg.merge_cell {
        cloud = cloud.merged(cell);
    }
    TargetSet::from_vec(weighted_kmeans(&cloud, n, cfg, rng).centroids)
}

/// When birth particles are drawn from a step's measurements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BirthTiming {
    /// Births for step `t` come from the measurements of step `t`.
    CurrentStep,
    /// Births for step `t` come from the measurements of step `t - 1`.
    PreviousStep,
}

/// Everything one agent needs to run the filter recursion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub motion: MotionModel,
    pub sensor: SensorModel,
    pub birth: BirthConfig,
    pub birth_timing: BirthTiming,
    pub particles_per_target: usize,
    pub particle_cap: usize,
    pub extract: KMeansConfig,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            motion: MotionModel::default(),
            sensor: SensorModel::default(),
            birth: BirthConfig::default(),
            birth_timing: BirthTiming::PreviousStep,
            particles_per_target: 1000,
            particle_cap: 200_000,
            extract: KMeansConfig::default(),
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        self.sensor.validate()?;
        self.birth.validate()?;
        if self.particles_per_target == 0 {
            return Err(invalid("particles per target must be >= 1"));
        }
        if self.particle_cap == 0 {
            return Err(invalid("particle cap must be >= 1"));
        }
        if self.sensor.noise_std <= 0.0 {
            return Err(invalid("the filter needs a positive sensor noise"));
        }
        Ok(())
    }
}

/// One full filter step: predict with births, apply every observation in
/// order, then resample.
pub fn filter_step(
    prev: &ParticlePhd,
    observations: &[(&SensingAction, &MeasurementSet)],
    birth_sources: &[&MeasurementSet],
    cfg: &FilterConfig,
    rng: &mut RngStream,
) -> Result<ParticlePhd> {
    let births: Vec<(&MeasurementSet, &BirthConfig)> =
        birth_sources.iter().map(|z| (*z, &cfg.birth)).collect();
    let mut phd = predict(prev, &cfg.motion, &births, rng);
    if phd.len() > cfg.particle_cap {
        phd = resample(&phd, cfg.particles_per_target, rng)?;
    }
    for (action, z) in observations {
        update_in_place(&mut phd, action, &cfg.sensor, z)?;
    }
    resample(&phd, cfg.particles_per_target, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{sense, Mat4};
    use approx::assert_abs_diff_eq;

    const ZERO: Mat4 = [[0.0; 4]; 4];

    fn space16() -> SearchSpace {
        SearchSpace::square(16.0).unwrap()
    }

    fn tile(x: f64, y: f64, s: u32, rate: f64) -> SensingAction {
        SensingAction::new(x, y, s, rate, &space16()).unwrap()
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(ParticlePhd::new(vec![Particle::new(-1.0, TargetState::default())]).is_err());
        assert!(ParticlePhd::new(vec![Particle::new(f64::NAN, TargetState::default())]).is_err());
    }

    #[test]
    fn predict_empty_is_empty() {
        let mut rng = RngStream::from_seed(1);
        assert!(predict(&ParticlePhd::empty(), &MotionModel::default(), &[], &mut rng).is_empty());
    }

    #[test]
    fn noiseless_prediction_drifts_and_keeps_mass() {
        let model = MotionModel::constant_velocity(1.0, ZERO, 1.0).unwrap();
        let phd = ParticlePhd::new(vec![
            Particle::new(0.4, TargetState::new(1.0, 1.0, 0.1, 0.0)),
            Particle::new(0.6, TargetState::new(5.0, 6.0, -0.05, 0.02)),
        ])
        .unwrap();
        let mut rng = RngStream::from_seed(2);
        let out = predict(&phd, &model, &[], &mut rng);
        assert_eq!(out.total_weight(), phd.total_weight());
        assert_abs_diff_eq!(out.particles()[0].state.px, 1.1, epsilon = 1e-12);
        assert_abs_diff_eq!(out.particles()[1].state.px, 4.95, epsilon = 1e-12);
        assert_abs_diff_eq!(out.particles()[1].state.py, 6.02, epsilon = 1e-12);
    }

    #[test]
    fn births_append_expected_count_and_mass() {
        let z = MeasurementSet(vec![[3.0, 4.0]]);
        let cfg = BirthConfig {
            particles_per_measurement: 100,
            weight_per_measurement: 0.01,
            ..BirthConfig::default()
        };
        let mut rng = RngStream::from_seed(3);
        let out = predict(&ParticlePhd::empty(), &MotionModel::default(), &[(&z, &cfg)], &mut rng);
        assert_eq!(out.len(), 100);
        assert_abs_diff_eq!(out.total_weight(), 0.01, epsilon = 1e-15);
    }

    #[test]
    fn outside_particle_is_untouched() {
        let phd = ParticlePhd::new(vec![Particle::new(0.7, TargetState::at(10.0, 10.0))]).unwrap();
        let z = MeasurementSet(vec![[1.0, 1.0]]);
        let out = update(&phd, &tile(0.0, 0.0, 4, 1.0), &SensorModel::default(), &z).unwrap();
        assert_eq!(out, phd);
    }

    #[test]
    fn empty_scan_scales_by_miss_probability() {
        let phd = ParticlePhd::new(vec![
            Particle::new(0.5, TargetState::at(1.0, 1.0)),
            Particle::new(0.25, TargetState::at(2.0, 3.5)),
        ])
        .unwrap();
        let out = update(&phd, &tile(0.0, 0.0, 4, 1.0), &SensorModel::default(), &MeasurementSet::new()).unwrap();
        assert_abs_diff_eq!(out.particles()[0].weight, 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(out.particles()[1].weight, 0.025, epsilon = 1e-15);
    }

    #[test]
    fn single_particle_single_measurement_by_hand() {
        // (1 - 0.9) + 0.9 g(0) / (0 + 0.9 g(0) * 1) = 1.1
        let phd = ParticlePhd::new(vec![Particle::new(1.0, TargetState::at(2.0, 2.0))]).unwrap();
        let z = MeasurementSet(vec![[2.0, 2.0]]);
        let out = update(&phd, &tile(0.0, 0.0, 4, 0.0), &SensorModel::default(), &z).unwrap();
        assert_abs_diff_eq!(out.particles()[0].weight, 1.1, epsilon = 1e-12);
    }

    #[test]
    fn measurement_outside_region_is_a_contract_violation() {
        let phd = ParticlePhd::empty();
        let z = MeasurementSet(vec![[9.0, 9.0]]);
        let err = update(&phd, &tile(0.0, 0.0, 4, 0.0), &SensorModel::default(), &z).unwrap_err();
        assert!(matches!(err, Error::ContractViolation(_)));
    }

    #[test]
    fn mass_identity_with_certain_detection() {
        let mut rng = RngStream::from_seed(4);
        let phd = ParticlePhd::uniform(&space16(), 3.0, 2000, 0.1, &mut rng);
        let sensor = SensorModel::new(0.1, 1.0).unwrap();
        let z = MeasurementSet(vec![[1.0, 1.0], [2.5, 3.0], [3.9, 0.2]]);
        let a = tile(0.0, 0.0, 4, 0.0);
        let out = update(&phd, &a, &sensor, &z).unwrap();
        // with p_d = 1 the in-region miss term vanishes
        let outside = phd.total_weight() - expected_cardinality(&phd, Some(&a));
        assert_abs_diff_eq!(out.total_weight() - outside, 3.0, epsilon = 1e-9);
    }

    #[test]
    fn expected_cardinality_cases() {
        assert_eq!(expected_cardinality(&ParticlePhd::empty(), None), 0.0);
        let phd = ParticlePhd::new(vec![
            Particle::new(0.4, TargetState::at(1.0, 1.0)),
            Particle::new(0.6, TargetState::at(1.5, 1.0)),
            Particle::new(1.0, TargetState::at(0.5, 3.0)),
        ])
        .unwrap();
        assert_abs_diff_eq!(expected_cardinality(&phd, Some(&tile(0.0, 0.0, 4, 0.0))), 2.0);
        assert_abs_diff_eq!(expected_cardinality(&phd, Some(&tile(0.0, 0.0, 2, 0.0))), 1.0);
        assert_abs_diff_eq!(expected_cardinality(&phd, None), 2.0);
    }

    #[test]
    fn region_cardinality_matches_scan() {
        let mut rng = RngStream::from_seed(5);
        let phd = ParticlePhd::uniform(&space16(), 4.0, 5000, 0.1, &mut rng);
        let a = tile(0.0, 0.0, 8, 0.0);
        let brute: f64 = phd
            .particles()
            .iter()
            .filter(|p| p.state.px >= 0.0 && p.state.px < 8.0 && p.state.py >= 0.0 && p.state.py < 8.0)
            .map(|p| p.weight)
            .sum();
        assert_abs_diff_eq!(expected_cardinality(&phd, Some(&a)), brute, epsilon = 1e-12);
    }

    #[test]
    fn resample_two_targets() {
        let mut rng = RngStream::from_seed(6);
        let phd = ParticlePhd::uniform(&space16(), 2.0, 777, 0.1, &mut rng);
        let out = resample(&phd, 1000, &mut rng).unwrap();
        assert_eq!(out.len(), 2000);
        assert!(out.particles().iter().all(|p| (p.weight - 0.001).abs() < 1e-15));
    }

    #[test]
    fn resample_degenerate_cloud() {
        let mut rng = RngStream::from_seed(7);
        let s = TargetState::new(3.0, 4.0, 0.1, 0.0);
        let phd = ParticlePhd::new(vec![Particle::new(1.0, s)]).unwrap();
        let out = resample(&phd, 50, &mut rng).unwrap();
        assert_eq!(out.len(), 50);
        assert!(out.particles().iter().all(|p| p.state == s));
        assert!(resample(&ParticlePhd::empty(), 50, &mut rng).unwrap().is_empty());
        assert!(resample(&phd, 0, &mut rng).is_err());
    }

    #[test]
    fn resample_heavy_particle_share() {
        let phd = ParticlePhd::new(vec![
            Particle::new(0.999, TargetState::at(1.0, 1.0)),
            Particle::new(0.001, TargetState::at(9.0, 9.0)),
        ])
        .unwrap();
        let reps = 200;
        let mut heavy = 0usize;
        let mut rng = RngStream::from_seed(8);
        for _ in 0..reps {
            let out = resample(&phd, 1000, &mut rng).unwrap();
            heavy += out.particles().iter().filter(|p| p.state.px == 1.0).count();
        }
        let frac = heavy as f64 / (reps * 1000) as f64;
        // systematic resampling is at least as tight as multinomial
        let sigma = (0.999f64 * 0.001 / (reps * 1000) as f64).sqrt();
        assert!((frac - 0.999).abs() < 3.0 * sigma + 1e-12, "{frac}");
    }

    #[test]
    fn extraction_rounding_and_single_centroid() {
        let mut rng = RngStream::from_seed(9);
        let light = ParticlePhd::uniform(&space16(), 0.4, 100, 0.1, &mut rng);
        assert!(extract_targets(&light, &mut rng).is_empty());

        let phd = ParticlePhd::new(vec![
            Particle::new(0.3, TargetState::new(2.0, 2.0, 0.1, 0.0)),
            Particle::new(0.5, TargetState::new(4.0, 3.0, 0.0, 0.1)),
            Particle::new(0.2, TargetState::new(9.0, 5.0, 0.0, 0.0)),
        ])
        .unwrap();
        let est = extract_targets(&phd, &mut rng);
        assert_eq!(est.len(), 1);
        let s = est.as_slice()[0];
        assert_abs_diff_eq!(s.px, 0.6 + 2.0 + 1.8, epsilon = 1e-12);
        assert_abs_diff_eq!(s.py, 0.6 + 1.5 + 1.0, epsilon = 1e-12);
    }

    #[test]
    fn extraction_finds_two_blobs() {
        let mut rng = RngStream::from_seed(10);
        let mut parts = Vec::new();
        for (cx, cy) in [(3.0, 3.0), (11.0, 12.0)] {
            for _ in 0..500 {
                let dx: f64 = rng.sample(StandardNormal);
                let dy: f64 = rng.sample(StandardNormal);
                parts.push(Particle::new(0.002, TargetState::at(cx + 0.2 * dx, cy + 0.2 * dy)));
            }
        }
        let phd = ParticlePhd::new(parts.clone()).unwrap();
        let mean = |range: std::ops::Range<usize>| {
            let n = range.len() as f64;
            let sx: f64 = parts[range.clone()].iter().map(|p| p.state.px).sum();
            let sy: f64 = parts[range].iter().map(|p| p.state.py).sum();
            (sx / n, sy / n)
        };
        let (m1, m2) = (mean(0..500), mean(500..1000));
        let est = extract_targets(&phd, &mut rng);
        assert_eq!(est.len(), 2);
        for m in [m1, m2] {
            assert!(est.iter().any(|s| (s.px - m.0).abs() < 0.1 && (s.py - m.1).abs() < 0.1));
        }
    }

    #[test]
    fn single_target_is_held_locally() {
        // mass drifting out of a unit field of view is never corrected, so
        // only the mass on the sensed tile is expected to settle near one
        let space = space16();
        let motion = MotionModel::default().with_velocity_bound(Some(0.1)).with_domain(Some(space));
        let cfg = FilterConfig { motion, ..FilterConfig::default() };
        let (mut held, mut near) = (0, 0);
        for seed in 0..10u64 {
            let mut world = RngStream::new(seed, crate::rng::StreamId::WORLD_MOTION);
            let mut eye = RngStream::new(seed, crate::rng::StreamId::sensing(1));
            let mut frng = RngStream::new(seed, crate::rng::StreamId::filter(1, 0));
            let mut truth = TargetSet::from_vec(vec![TargetState::new(7.5, 8.5, 0.05, -0.03)]);
            let mut phd = ParticlePhd::empty();
            let mut last = MeasurementSet::new();
            let mut a = tile(7.0, 8.0, 1, 0.005);
            for _ in 0..30 {
                truth = crate::world::step_targets(&truth, &cfg.motion, &space, &mut world);
                let x = truth.as_slice()[0];
                a = tile(x.px.floor(), x.py.floor(), 1, 0.005);
                let z = sense(&truth, &a, &cfg.sensor, &mut eye);
                let born = match cfg.birth_timing {
                    BirthTiming::CurrentStep => &z,
                    BirthTiming::PreviousStep => &last,
                };
                phd = filter_step(&phd, &[(&a, &z)], &[born], &cfg, &mut frng).unwrap();
                last = z;
            }
            let x = truth.as_slice()[0];
            if (0.8..=1.2).contains(&expected_cardinality(&phd, Some(&a))) {
                held += 1;
            }
            let est = extract_targets(&phd, &mut frng);
            if est.iter().any(|e| e.distance(&x) < 0.4) {
                near += 1;
            }
        }
        assert!(held >= 8, "{held}/10");
        assert!(near >= 8, "{near}/10");
    }
}
