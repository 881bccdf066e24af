//! Ground-truth environment: target motion and noisy sensing.

use std::io::Write;

use nalgebra::{Matrix4, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{SearchSpace, SensingAction, TargetSet, TargetState};
use crate::rng::RngStream;

pub type Mat4 = [[f64; 4]; 4];

/// Linear-Gaussian target motion `x' = F x + e`, `e ~ N(0, Q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionModel {
    transition: Mat4,
    process_noise_cov: Mat4,
    step: f64,
    survival_prob: f64,
    /// Velocity components are clamped to `[-v, v]` after propagation.
    velocity_bound: Option<f64>,
    /// Reflecting boundary applied when propagating filter particles.
    domain: Option<SearchSpace>,
    #[serde(skip)]
    noise_factor: Mat4,
}

pub const DEFAULT_PROCESS_NOISE: Mat4 = [
    [0.03, 0.0, 0.05, 0.0],
    [0.0, 0.03, 0.0, 0.05],
    [0.05, 0.0, 0.1, 0.0],
    [0.0, 0.05, 0.0, 0.1],
];

pub fn constant_velocity_transition(dt: f64) -> Mat4 {
    [
        [1.0, 0.0, dt, 0.0],
        [0.0, 1.0, 0.0, dt],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

impl MotionModel {
    pub fn new(transition: Mat4, process_noise_cov: Mat4, step: f64, survival_prob: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&survival_prob) {
            return Err(invalid(format!("survival probability {survival_prob} outside [0, 1]")));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(invalid(format!("time step must be positive, got {step}")));
        }
        let noise_factor = psd_factor(&process_noise_cov)?;
        Ok(MotionModel {
            transition,
            process_noise_cov,
            step,
            survival_prob,
            velocity_bound: None,
            domain: None,
            noise_factor,
        })
    }

    pub fn constant_velocity(step: f64, process_noise_cov: Mat4, survival_prob: f64) -> Result<Self> {
        Self::new(constant_velocity_transition(step), process_noise_cov, step, survival_prob)
    }

    pub fn with_velocity_bound(mut self, bound: Option<f64>) -> Self {
        self.velocity_bound = bound;
        self
    }

    pub fn with_domain(mut self, domain: Option<SearchSpace>) -> Self {
        self.domain = domain;
        self
    }

    pub fn transition(&self) -> &Mat4 {
        &self.transition
    }

    pub fn process_noise_cov(&self) -> &Mat4 {
        &self.process_noise_cov
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn survival_prob(&self) -> f64 {
        self.survival_prob
    }

    pub fn velocity_bound(&self) -> Option<f64> {
        self.velocity_bound
    }

    pub fn domain(&self) -> Option<&SearchSpace> {
        self.domain.as_ref()
    }

    pub fn is_noiseless(&self) -> bool {
        self.noise_factor.iter().flatten().all(|v| *v == 0.0)
    }

    /// Applies `F`, adds process noise and the velocity bound. No boundary.
    pub fn advance(&self, state: &TargetState, rng: &mut RngStream) -> TargetState {
        let x = state.to_array();
        let mut out = [0.0; 4];
        for (r, o) in out.iter_mut().enumerate() {
            *o = (0..4).map(|c| self.transition[r][c] * x[c]).sum();
        }
        if !self.is_noiseless() {
            let n: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
            for (r, o) in out.iter_mut().enumerate() {
                *o += (0..4).map(|c| self.noise_factor[r][c] * n[c]).sum::<f64>();
            }
        }
        let mut next = TargetState::from_array(out);
        if let Some(v) = self.velocity_bound {
            next.vx = next.vx.clamp(-v, v);
            next.vy = next.vy.clamp(-v, v);
        }
        next
    }

    /// [`MotionModel::advance`] followed by reflection off the model's domain, if any.
    pub fn propagate(&self, state: &TargetState, rng: &mut RngStream) -> TargetState {
        let next = self.advance(state, rng);
        match &self.domain {
            Some(space) => reflect(next, space),
            None => next,
        }
    }
}

impl Default for MotionModel {
    fn default() -> Self {
        MotionModel::constant_velocity(1.0, DEFAULT_PROCESS_NOISE, 1.0)
            .expect("default motion model is valid")
    }
}

/// Symmetric square root `L` with `L L^T = cov`. Rejects asymmetric or
/// indefinite matrices.
fn psd_factor(cov: &Mat4) -> Result<Mat4> {
    for r in 0..4 {
        for c in 0..4 {
            if !cov[r][c].is_finite() {
                return Err(invalid("process noise covariance has non-finite entries"));
            }
            if (cov[r][c] - cov[c][r]).abs() > 1e-12 {
                return Err(invalid("process noise covariance is not symmetric"));
            }
        }
    }
    let m = Matrix4::from_fn(|r, c| cov[r][c]);
    let eig = SymmetricEigen::new(m);
    let scale = m.amax().max(1.0);
    if eig.eigenvalues.iter().any(|&l| l < -1e-10 * scale) {
        return Err(invalid("process noise covariance is not positive semidefinite"));
    }
    let sqrt = Matrix4::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    let factor = eig.eigenvectors * sqrt;
    let mut out = [[0.0; 4]; 4];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            let x = factor[(r, c)];
            *v = if x.abs() < 1e-15 { 0.0 } else { x };
        }
    }
    Ok(out)
}

/// Reflects a state back into the space, negating the velocity component of
/// every violated axis.
pub fn reflect(mut s: TargetState, space: &SearchSpace) -> TargetState {
    let (px, vx) = reflect_axis(s.px, s.vx, space.width());
    let (py, vy) = reflect_axis(s.py, s.vy, space.length());
    s.px = px;
    s.vx = vx;
    s.py = py;
    s.vy = vy;
    s
}

fn reflect_axis(mut p: f64, mut v: f64, hi: f64) -> (f64, f64) {
    if !p.is_finite() {
        return (p.clamp(0.0, hi), v);
    }
    if p < -2.0 * hi || p > 3.0 * hi {
        // fold far excursions onto one period first
        let period = 2.0 * hi;
        let folded = p.rem_euclid(period);
        let flips = ((p - folded) / hi).round() as i64;
        p = folded;
        if flips % 2 != 0 {
            v = -v;
        }
    }
    for _ in 0..8 {
        if p < 0.0 {
            p = -p;
            v = -v;
        } else if p > hi {
            p = 2.0 * hi - p;
            v = -v;
        } else {
            break;
        }
    }
    (p.clamp(0.0, hi), v)
}

/// Linear position sensor with isotropic Gaussian noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    pub projection: [[f64; 4]; 2],
    pub noise_std: f64,
    pub detection_prob: f64,
}

impl SensorModel {
    pub fn new(noise_std: f64, detection_prob: f64) -> Result<Self> {
        let s = SensorModel {
            projection: [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]],
            noise_std,
            detection_prob,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(invalid(format!("sensor noise std must be >= 0, got {}", self.noise_std)));
        }
        if !(0.0..=1.0).contains(&self.detection_prob) {
            return Err(invalid(format!(
                "detection probability {} outside [0, 1]",
                self.detection_prob
            )));
        }
        Ok(())
    }

    pub fn project(&self, state: &TargetState) -> [f64; 2] {
        let x = state.to_array();
        let h = &self.projection;
        [
            (0..4).map(|c| h[0][c] * x[c]).sum(),
            (0..4).map(|c| h[1][c] * x[c]).sum(),
        ]
    }

    /// Measurement likelihood `g(z | x)`.
    pub fn likelihood(&self, z: [f64; 2], state: &TargetState) -> f64 {
        let hx = self.project(state);
        let var = self.noise_std * self.noise_std;
        let d2 = (z[0] - hx[0]).powi(2) + (z[1] - hx[1]).powi(2);
        (-d2 / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var)
    }

    /// True when `H` extracts `(p_x, p_y)` directly, enabling fast paths.
    pub fn is_position_projection(&self) -> bool {
        self.projection == [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]]
    }
}

impl Default for SensorModel {
    fn default() -> Self {
        SensorModel::new(0.1, 0.9).expect("default sensor is valid")
    }
}

/// Unordered set of 2-D measurements.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MeasurementSet(pub Vec<[f64; 2]>);

impl MeasurementSet {
    pub fn new() -> Self {
        MeasurementSet(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, [f64; 2]> {
        self.0.iter()
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.0
    }
}

/// Draws `count` targets uniformly over the space with velocity components
/// uniform on `[-v_max, v_max]`.
pub fn init_targets(space: &SearchSpace, count: usize, v_max: f64, rng: &mut RngStream) -> TargetSet {
    (0..count)
        .map(|_| uniform_state(space, v_max, rng))
        .collect()
}

pub(crate) fn uniform_state(space: &SearchSpace, v_max: f64, rng: &mut RngStream) -> TargetState {
    let px = rng.random::<f64>() * space.width();
    let py = rng.random::<f64>() * space.length();
    let vx = (2.0 * rng.random::<f64>() - 1.0) * v_max;
    let vy = (2.0 * rng.random::<f64>() - 1.0) * v_max;
    TargetState::new(px, py, vx, vy)
}

/// Advances every target one step and reflects it back into the space.
pub fn step_targets(
    targets: &TargetSet,
    model: &MotionModel,
    space: &SearchSpace,
    rng: &mut RngStream,
) -> TargetSet {
    targets
        .iter()
        .filter_map(|t| {
            let next = reflect(model.advance(t, rng), space);
            // survival is drawn after propagation so the noise sequence does not
            // depend on earlier deaths
            let survives = model.survival_prob() >= 1.0 || rng.random::<f64>() < model.survival_prob();
            survives.then_some(next)
        })
        .collect()
}

/// Generates one measurement set: thinned noisy detections of in-region
/// targets plus Poisson clutter uniform over the region.
pub fn sense(
    targets: &TargetSet,
    action: &SensingAction,
    sensor: &SensorModel,
    rng: &mut RngStream,
) -> MeasurementSet {
    let mut points = Vec::new();
    for t in targets.iter().filter(|t| action.contains(t)) {
        if rng.random::<f64>() < sensor.detection_prob {
            let hx = sensor.project(t);
            let nx: f64 = rng.sample(StandardNormal);
            let ny: f64 = rng.sample(StandardNormal);
            points.push(action.clamp_point(hx[0] + sensor.noise_std * nx, hx[1] + sensor.noise_std * ny));
        }
    }
    let n_clutter = poisson_count(action.clutter_rate, rng);
    let s = action.side();
    for _ in 0..n_clutter {
        let x = action.origin_x + rng.random::<f64>() * s;
        let y = action.origin_y + rng.random::<f64>() * s;
        points.push([x, y]);
    }
    MeasurementSet(points)
}

pub(crate) fn poisson_count(mean: f64, rng: &mut RngStream) -> usize {
    if mean <= 0.0 || !mean.is_finite() {
        return 0;
    }
    let d = Poisson::new(mean).expect("positive finite Poisson mean");
    let x: f64 = d.sample(rng);
    x as usize
}

/// Writes a ground-truth trajectory table with header
/// `t,target,p_x,p_y,v_x,v_y`.
pub fn write_trajectories<W: Write>(mut out: W, frames: &[(u32, TargetSet)]) -> Result<()> {
    writeln!(out, "t,target,p_x,p_y,v_x,v_y")?;
    for (t, set) in frames {
        for (i, s) in set.iter().enumerate() {
            writeln!(out, "{t},{i},{},{},{},{}", s.px, s.py, s.vx, s.vy)?;
        }
    }
    Ok(())
}
