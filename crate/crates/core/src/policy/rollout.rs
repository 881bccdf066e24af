//! One-step pseudo-measurement rollouts.
//!
//! [`pseudo_rollout`] is the direct form: update the predicted PHD with the
//! pseudo-measurements and extract. [`RolloutEngine`] evaluates the same
//! quantity for many (action, sample) pairs per decision on a thinned copy of
//! the predicted PHD, warm-starting the clustering from one base extraction.

use std::cell::{OnceCell, RefCell};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{ActionSpace, SensingAction, TargetSet, TargetState};
use crate::kmeans::{dist_sq, nearest, weighted_kmeans, KMeansConfig, WeightedCloud};
use crate::phd::{extract_targets, round_mass, update, update_factors_with_births, ParticlePhd};
use crate::rng::RngStream;
use crate::world::{sense, MeasurementSet, SensorModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutConfig {
    /// Side of the cells in which predicted particles are merged before
    /// rollouts.
    pub merge_cell: f64,
    /// Actions with less predicted mass in their region than this, and no
    /// pseudo-measurements, reuse the base estimate.
    pub skip_mass: f64,
    /// Thin pseudo-detections by `p_d`, add sensor noise and clutter.
    pub stochastic: bool,
    /// Run the full update and extraction for every rollout.
    pub exact: bool,
    /// Spawn birth mass at every pseudo-measurement, as the filter does for
    /// real scans.
    pub births: bool,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        RolloutConfig {
            merge_cell: 0.1,
            skip_mass: 0.01,
            stochastic: false,
            exact: false,
            births: true,
        }
    }
}

impl RolloutConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.merge_cell > 0.0 && self.merge_cell.is_finite()) {
            return Err(invalid("rollout merge cell must be positive"));
        }
        if !(self.skip_mass >= 0.0 && self.skip_mass.is_finite()) {
            return Err(invalid("rollout skip mass must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Noiseless, always-detected measurements of the sample states inside the
/// region.
pub fn pseudo_measurements(sample: &TargetSet, action: &SensingAction, sensor: &SensorModel) -> MeasurementSet {
    MeasurementSet(
        sample
            .iter()
            .filter(|x| action.contains(x))
            .map(|x| {
                let h = sensor.project(x);
                action.clamp_point(h[0], h[1])
            })
            .collect(),
    )
}

/// Pseudo-measurements drawn like real ones: thinned, noisy, with clutter.
pub fn stochastic_pseudo_measurements(
    sample: &TargetSet,
    action: &SensingAction,
    sensor: &SensorModel,
    rng: &mut RngStream,
) -> MeasurementSet {
    sense(sample, action, sensor, rng)
}

/// Expected estimate after sensing `action` when the targets are `sample`.
pub fn pseudo_rollout(
    phd_pred: &ParticlePhd,
    sample: &TargetSet,
    action: &SensingAction,
    sensor: &SensorModel,
    rng: &mut RngStream,
) -> Result<TargetSet> {
    let z = pseudo_measurements(sample, action, sensor);
    let updated = update(phd_pred, action, sensor, &z)?;
    Ok(extract_targets(&updated, rng))
}

/// Per-decision rollout evaluator.
///
/// The predicted PHD is merged into small cells and clustered once. A rollout
/// reweights the points inside the sensed region, keeps every other point's
/// cluster, and adjusts the cluster count to the rounded new mass: the
/// lightest clusters are dissolved into their nearest neighbours, or new
/// centroids are opened at the worst-served points. Centroids are the
/// weighted means of the resulting clusters.
pub struct RolloutEngine<'a> {
    actions: &'a ActionSpace,
    sensor: &'a SensorModel,
    cfg: &'a RolloutConfig,
    cloud: WeightedCloud,
    hx: Vec<[f64; 2]>,
    members: Vec<Vec<u32>>,
    region_mass: Vec<f64>,
    total: f64,
    assignment: Vec<u32>,
    /// Squared distance of each point to its base centroid.
    d2: Vec<f64>,
    /// Points of each base cluster.
    clusters: Vec<Vec<u32>>,
    /// Per cluster: weight, then weighted sums of px, py, vx, vy.
    sums: Vec<[f64; 5]>,
    base: TargetSet,
    base_pos: Vec<[f64; 2]>,
    empty_cache: Vec<OnceCell<TargetSet>>,
    /// Weight and spread of the birth group spawned per pseudo-measurement.
    births: Option<(f64, f64)>,
    scratch: RefCell<Scratch>,
}

/// Working copies of the per-point arrays. Each rollout edits a few entries
/// and appends its birth points, then restores them.
struct Scratch {
    pos: Vec<[f64; 2]>,
    vel: Vec<[f64; 2]>,
    w: Vec<f64>,
    owner: Vec<u32>,
    d2: Vec<f64>,
    touched: Vec<u32>,
}

impl<'a> RolloutEngine<'a> {
    pub fn new(
        pred: &ParticlePhd,
        actions: &'a ActionSpace,
        sensor: &'a SensorModel,
        cfg: &'a RolloutConfig,
        births: Option<(f64, f64)>,
        rng: &mut RngStream,
    ) -> Self {
        let cloud = pred.to_cloud().merged(cfg.merge_cell);
        let total = cloud.total_weight();
        let hx: Vec<[f64; 2]> = (0..cloud.len()).map(|i| sensor.project(&point_state(&cloud, i))).collect();
        let mut members = vec![Vec::new(); actions.len()];
        let mut region_mass = vec![0.0; actions.len()];
        for i in 0..cloud.len() {
            let [x, y] = cloud.pos[i];
            for a in actions.tiles_containing(x, y) {
                if actions.actions()[a].contains_point(x, y) {
                    members[a].push(i as u32);
                    region_mass[a] += cloud.w[i];
                }
            }
        }
        let n0 = round_mass(total);
        let km = KMeansConfig {
            merge_cell: None,
            restarts: 1,
            ..KMeansConfig::default()
        };
        let base = weighted_kmeans(&cloud, n0, &km, rng);
        let k = base.centroids.len();
        let mut clusters = vec![Vec::new(); k];
        let mut sums = vec![[0.0; 5]; k];
        let mut d2 = vec![f64::INFINITY; cloud.len()];
        let assignment: Vec<u32> = base.assignment.iter().map(|&j| j as u32).collect();
        if k > 0 {
            for i in 0..cloud.len() {
                let j = base.assignment[i];
                clusters[j].push(i as u32);
                add_point(&mut sums[j], &cloud, i, cloud.w[i]);
                d2[i] = dist_sq(&cloud.pos[i], &base.centroids[j].position());
            }
        }
        let scratch = RefCell::new(Scratch {
            pos: cloud.pos.clone(),
            vel: cloud.vel.clone(),
            w: cloud.w.clone(),
            owner: if k > 0 { assignment.clone() } else { vec![0; cloud.len()] },
            d2: d2.clone(),
            touched: Vec::new(),
        });
        RolloutEngine {
            actions,
            sensor,
            cfg,
            empty_cache: (0..actions.len()).map(|_| OnceCell::new()).collect(),
            hx,
            members,
            region_mass,
            total,
            assignment,
            d2,
            clusters,
            sums,
            base_pos: base.centroids.iter().map(|x| [x.px, x.py]).collect(),
            base: TargetSet::from_vec(base.centroids),
            cloud,
            births: if cfg.births { births } else { None },
            scratch,
        }
    }

    pub fn actions(&self) -> &ActionSpace {
        self.actions
    }

    /// Number of points in the decision cloud.
    pub fn cloud_len(&self) -> usize {
        self.cloud.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.total
    }

    pub fn region_mass(&self, action: usize) -> f64 {
        self.region_mass[action]
    }

    /// Estimate of the unchanged predicted PHD.
    pub fn estimates(&self) -> &TargetSet {
        &self.base
    }

    /// Updated weights of the region's points and the updated birth masses.
    fn updated_member_weights(&self, action: usize, zs: &[[f64; 2]]) -> (Vec<f64>, Vec<f64>) {
        let m = &self.members[action];
        let hx: Vec<[f64; 2]> = m.iter().map(|&i| self.hx[i as usize]).collect();
        let w: Vec<f64> = m.iter().map(|&i| self.cloud.w[i as usize]).collect();
        let density = self.actions.actions()[action].clutter_density();
        let (f, births) = update_factors_with_births(&hx, &w, density, self.sensor, zs, self.births);
        (w.iter().zip(f).map(|(w, f)| w * f).collect(), births)
    }

    /// Total mass after updating with `zs` under `action`.
    pub fn mass_after(&self, action: usize, zs: &[[f64; 2]]) -> f64 {
        let (inside, births) = self.updated_member_weights(action, zs);
        let added: f64 = inside.iter().sum::<f64>() + births.iter().sum::<f64>();
        (self.total - self.region_mass[action] + added).max(0.0)
    }

    /// Estimate after updating with `zs` under `action`.
    pub fn rollout(&self, action: usize, zs: &[[f64; 2]]) -> TargetSet {
        if zs.is_empty() {
            if self.region_mass[action] < self.cfg.skip_mass {
                return self.base.clone();
            }
            return self.empty_cache[action].get_or_init(|| self.compute(action, zs)).clone();
        }
        self.compute(action, zs)
    }

    fn compute(&self, action: usize, zs: &[[f64; 2]]) -> TargetSet {
        let (updated, births) = self.updated_member_weights(action, zs);
        let mut guard = self.scratch.borrow_mut();
        let sc = &mut *guard;
        let k = self.sums.len();
        let n_cloud = self.cloud.len();
        let mut sums = self.sums.clone();
        let mut mass = self.total - self.region_mass[action];
        for (&i, &wi) in self.members[action].iter().zip(&updated) {
            let i = i as usize;
            if k > 0 {
                add(&mut sums[sc.owner[i] as usize], sc.pos[i], sc.vel[i], wi - sc.w[i]);
            }
            sc.w[i] = wi;
            mass += wi;
        }
        // birth groups become extra points after the cloud
        let base_pos = &self.base_pos;
        for (z, &b) in zs.iter().zip(&births) {
            sc.pos.push(*z);
            sc.vel.push([0.0, 0.0]);
            sc.w.push(b);
            mass += b;
            if k > 0 {
                let (j, d) = nearest(z, base_pos);
                add(&mut sums[j], *z, [0.0, 0.0], b);
                sc.owner.push(j as u32);
                sc.d2.push(d);
            } else {
                sc.owner.push(0);
                sc.d2.push(f64::INFINITY);
            }
        }
        let n = round_mass(mass.max(0.0));
        let mut alive = vec![true; k];
        let mut extra: Vec<[f64; 5]> = Vec::new();
        if n > 0 && n < k {
            let mut order: Vec<usize> = (0..k).collect();
            order.sort_by(|&a, &b| sums[a][0].total_cmp(&sums[b][0]).then(a.cmp(&b)));
            for &j in &order[..k - n] {
                alive[j] = false;
            }
            let keep: Vec<usize> = (0..k).filter(|&j| alive[j]).collect();
            let centers: Vec<[f64; 2]> = keep.iter().map(|&j| self.mean_pos(&sums[j], j)).collect();
            let dissolved = order[..k - n].iter().flat_map(|&j| self.clusters[j].iter().map(|&i| i as usize));
            let born = (n_cloud..sc.w.len()).filter(|&i| !alive[sc.owner[i] as usize]);
            for i in dissolved.chain(born) {
                let (t, _) = nearest(&sc.pos[i], &centers);
                add(&mut sums[keep[t]], sc.pos[i], sc.vel[i], sc.w[i]);
            }
        } else if n > k {
            // owner index: < k base clusters, >= k opened here
            while k + extra.len() < n {
                let pick = (0..sc.w.len())
                    .filter(|&i| sc.w[i] > 0.0)
                    .max_by(|&a, &b| score(sc.w[a], sc.d2[a]).total_cmp(&score(sc.w[b], sc.d2[b])).then(b.cmp(&a)));
                let Some(p) = pick else { break };
                let c = sc.pos[p];
                let new = (k + extra.len()) as u32;
                extra.push([0.0; 5]);
                for i in 0..sc.w.len() {
                    let d = dist_sq(&sc.pos[i], &c);
                    if d < sc.d2[i] || i == p {
                        if sc.d2[i].is_finite() {
                            let o = sc.owner[i] as usize;
                            let s = if o < k { &mut sums[o] } else { &mut extra[o - k] };
                            add(s, sc.pos[i], sc.vel[i], -sc.w[i]);
                        }
                        add(&mut extra[new as usize - k], sc.pos[i], sc.vel[i], sc.w[i]);
                        if i < n_cloud {
                            sc.touched.push(i as u32);
                        }
                        sc.owner[i] = new;
                        sc.d2[i] = d;
                    }
                }
            }
        }
        let mut out = Vec::with_capacity(n);
        if n > 0 {
            for j in 0..k {
                if alive[j] {
                    out.push(self.mean_state(&sums[j], j));
                }
            }
            for s in &extra {
                if s[0] > 0.0 {
                    out.push(TargetState::new(s[1] / s[0], s[2] / s[0], s[3] / s[0], s[4] / s[0]));
                }
            }
        }
        self.restore(sc, action);
        TargetSet::from_vec(out)
    }

    /// Puts the scratch buffers back to the base state.
    fn restore(&self, sc: &mut Scratch, action: usize) {
        let n = self.cloud.len();
        for &i in &self.members[action] {
            sc.w[i as usize] = self.cloud.w[i as usize];
        }
        for i in sc.touched.drain(..) {
            let i = i as usize;
            sc.owner[i] = self.owner0(i);
            sc.d2[i] = self.d2[i];
        }
        sc.pos.truncate(n);
        sc.vel.truncate(n);
        sc.w.truncate(n);
        sc.owner.truncate(n);
        sc.d2.truncate(n);
    }

    fn owner0(&self, i: usize) -> u32 {
        if self.sums.is_empty() {
            0
        } else {
            self.assignment[i]
        }
    }

    fn mean_pos(&self, s: &[f64; 5], j: usize) -> [f64; 2] {
        let m = self.mean_state(s, j);
        [m.px, m.py]
    }

    /// Weighted mean of a cluster; a cluster that lost all weight keeps its
    /// base centroid.
    fn mean_state(&self, s: &[f64; 5], j: usize) -> TargetState {
        if s[0] > 1e-12 {
            TargetState::new(s[1] / s[0], s[2] / s[0], s[3] / s[0], s[4] / s[0])
        } else {
            self.base.as_slice()[j]
        }
    }
}

fn score(w: f64, d2: f64) -> f64 {
    if d2.is_finite() {
        w * d2
    } else {
        // no centroid yet: heaviest point first
        f64::MAX / 2.0 * w.min(1.0)
    }
}

fn point_state(cloud: &WeightedCloud, i: usize) -> TargetState {
    TargetState::new(cloud.pos[i][0], cloud.pos[i][1], cloud.vel[i][0], cloud.vel[i][1])
}

fn add_point(s: &mut [f64; 5], cloud: &WeightedCloud, i: usize, w: f64) {
    add(s, cloud.pos[i], cloud.vel[i], w);
}

fn add(s: &mut [f64; 5], pos: [f64; 2], vel: [f64; 2], w: f64) {
    s[0] += w;
    s[1] += w * pos[0];
    s[2] += w * pos[1];
    s[3] += w * vel[0];
    s[4] += w * vel[1];
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_action_space, SearchSpace, DEFAULT_CLUTTER_RATES, DEFAULT_SCALES};
    use crate::phd::{expected_cardinality, Particle};
    use crate::policy::ospa::{ospa, OspaParams};
    use rand_distr::{Distribution, Normal};

    fn space() -> SearchSpace {
        SearchSpace::square(16.0).unwrap()
    }

    fn actions() -> ActionSpace {
        build_action_space(space(), &DEFAULT_SCALES, &DEFAULT_CLUTTER_RATES).unwrap()
    }

    fn blobs(centers: &[[f64; 2]], per: usize, spread: f64, rng: &mut RngStream) -> ParticlePhd {
        let d = Normal::new(0.0, spread).unwrap();
        let mut ps = Vec::new();
        for c in centers {
            for _ in 0..per {
                let s = TargetState::at(
                    (c[0] + d.sample(rng)).clamp(0.0, 16.0),
                    (c[1] + d.sample(rng)).clamp(0.0, 16.0),
                );
                ps.push(Particle::new(1.0 / per as f64, s));
            }
        }
        ParticlePhd::new(ps).unwrap()
    }

    #[test]
    fn sample_outside_region_gives_no_pseudo_measurements() {
        let a = actions();
        let act = &a.actions()[a.find(0.0, 0.0, 4).unwrap()];
        let sample = TargetSet::from_vec(vec![TargetState::at(10.0, 10.0)]);
        assert!(pseudo_measurements(&sample, act, &SensorModel::default()).is_empty());
        let two = TargetSet::from_vec(vec![TargetState::at(1.0, 1.0), TargetState::at(3.0, 2.5)]);
        assert_eq!(pseudo_measurements(&two, act, &SensorModel::default()).len(), 2);
    }

    #[test]
    fn miss_case_downweights_the_region() {
        let mut rng = RngStream::from_seed(1);
        let phd = blobs(&[[2.0, 2.0]], 1000, 0.2, &mut rng);
        let a = actions();
        let act = &a.actions()[a.find(0.0, 0.0, 4).unwrap()];
        let z = pseudo_measurements(&TargetSet::new(), act, &SensorModel::default());
        let up = update(&phd, act, &SensorModel::default(), &z).unwrap();
        assert!((expected_cardinality(&up, None) - 0.1).abs() < 1e-9);
        let y = pseudo_rollout(&phd, &TargetSet::new(), act, &SensorModel::default(), &mut rng).unwrap();
        assert!(y.is_empty());
    }

    #[test]
    fn covering_rollout_recovers_the_sample() {
        let mut rng = RngStream::from_seed(2);
        let centers = [[3.0, 4.0], [11.0, 12.0], [12.5, 3.0]];
        let phd = blobs(&centers, 1000, 0.3, &mut rng);
        let whole = build_action_space(space(), &[16], &[1.0]).unwrap();
        let sample: TargetSet = centers.iter().map(|c| TargetState::at(c[0] + 0.1, c[1] - 0.1)).collect();
        let y = pseudo_rollout(&phd, &sample, &whole.actions()[0], &SensorModel::default(), &mut rng).unwrap();
        assert!(ospa(&sample, &y, &OspaParams::default()) < 0.5);
    }

    #[test]
    fn engine_members_match_region_test() {
        let mut rng = RngStream::from_seed(3);
        let phd = ParticlePhd::uniform(&space(), 4.0, 4000, 0.1, &mut rng);
        let a = actions();
        let s = SensorModel::default();
        let cfg = RolloutConfig::default();
        let e = RolloutEngine::new(&phd, &a, &s, &cfg, None, &mut rng);
        assert!((e.total_mass() - 4.0).abs() < 1e-9);
        let mut sum_scale1 = 0.0;
        for (k, act) in a.actions().iter().enumerate() {
            let direct: f64 = (0..e.cloud.len())
                .filter(|&i| act.contains_point(e.cloud.pos[i][0], e.cloud.pos[i][1]))
                .map(|i| e.cloud.w[i])
                .sum();
            assert!((direct - e.region_mass(k)).abs() < 1e-12);
            if act.scale == 1 {
                sum_scale1 += e.region_mass(k);
            }
        }
        assert!((sum_scale1 - 4.0).abs() < 1e-9);
    }

    #[test]
    fn engine_mass_matches_full_update() {
        let mut rng = RngStream::from_seed(4);
        let phd = blobs(&[[5.0, 5.0], [9.0, 9.5]], 1000, 0.3, &mut rng);
        let a = actions();
        let s = SensorModel::default();
        let cfg = RolloutConfig::default();
        let e = RolloutEngine::new(&phd, &a, &s, &cfg, None, &mut rng);
        let k = a.find(8.0, 8.0, 8).unwrap();
        let z = [[9.0, 9.5]];
        let full = update(&phd, &a.actions()[k], &s, &MeasurementSet(z.to_vec())).unwrap();
        assert!((e.mass_after(k, &z) - full.total_weight()).abs() < 0.05);
    }

    #[test]
    fn engine_agrees_with_direct_rollout() {
        let mut rng = RngStream::from_seed(5);
        let centers = [[2.5, 3.0], [6.0, 12.0], [13.0, 5.0], [10.5, 10.5]];
        let phd = blobs(&centers, 1000, 0.25, &mut rng);
        let a = actions();
        let s = SensorModel::default();
        let cfg = RolloutConfig::default();
        let e = RolloutEngine::new(&phd, &a, &s, &cfg, None, &mut rng);
        let sample: TargetSet = centers.iter().map(|c| TargetState::at(c[0] + 0.2, c[1])).collect();
        let p = OspaParams::default();
        let mut worst: f64 = 0.0;
        for k in (0..a.len()).step_by(7) {
            let act = &a.actions()[k];
            let z = pseudo_measurements(&sample, act, &s);
            let y_fast = e.rollout(k, z.points());
            let y_ref = pseudo_rollout(&phd, &sample, act, &s, &mut rng).unwrap();
            worst = worst.max(ospa(&y_fast, &y_ref, &p));
        }
        assert!(worst < 0.3, "{worst}");
    }

    #[test]
    fn lost_mass_drops_centroids() {
        let mut rng = RngStream::from_seed(6);
        let phd = blobs(&[[2.0, 2.0], [12.0, 12.0]], 1000, 0.2, &mut rng);
        let a = actions();
        let s = SensorModel::default();
        let cfg = RolloutConfig::default();
        let e = RolloutEngine::new(&phd, &a, &s, &cfg, None, &mut rng);
        assert_eq!(e.estimates().len(), 2);
        let k = a.find(0.0, 0.0, 4).unwrap();
        let y = e.rollout(k, &[]);
        assert_eq!(y.len(), 1);
        // one centroid over everything: the surviving blob plus the 0.1 left behind
        let m = (12.0 + 2.0 * 0.1) / 1.1;
        assert!(y.as_slice()[0].distance(&TargetState::at(m, m)) < 0.2);
    }
}
