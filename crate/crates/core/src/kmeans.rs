//! Weighted k-means over particle positions.
//!
//! Distances use positions only; each centroid's velocity is the weighted mean
//! velocity of its members.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::TargetState;
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    /// Independently seeded runs; the lowest-cost run is kept.
    pub restarts: usize,
    pub max_iter: usize,
    /// When set, points falling in the same square cell of this side are merged
    /// into one point (summed weight, weighted-mean state) before clustering.
    pub merge_cell: Option<f64>,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            restarts: 3,
            max_iter: 50,
            merge_cell: Some(0.1),
        }
    }
}

/// Structure-of-arrays point cloud.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightedCloud {
    pub pos: Vec<[f64; 2]>,
    pub vel: Vec<[f64; 2]>,
    pub w: Vec<f64>,
}

impl WeightedCloud {
    pub fn with_capacity(n: usize) -> Self {
        WeightedCloud {
            pos: Vec::with_capacity(n),
            vel: Vec::with_capacity(n),
            w: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, w: f64, s: &TargetState) {
        self.pos.push([s.px, s.py]);
        self.vel.push([s.vx, s.vy]);
        self.w.push(w);
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.w.iter().sum()
    }

    /// Merges points sharing a grid cell. Output order follows cell keys, so
    /// the result is independent of hashing.
    pub fn merged(&self, cell: f64) -> WeightedCloud {
        let key = |p: &[f64; 2]| ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64);
        let mut order: Vec<usize> = (0..self.len()).filter(|&i| self.w[i] > 0.0).collect();
        order.sort_by_key(|&i| key(&self.pos[i]));
        let mut out = WeightedCloud::with_capacity(order.len() / 2 + 1);
        let mut i = 0;
        while i < order.len() {
            let k = key(&self.pos[order[i]]);
            let (mut w, mut px, mut py, mut vx, mut vy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            while i < order.len() && key(&self.pos[order[i]]) == k {
                let j = order[i];
                let wj = self.w[j];
                w += wj;
                px += wj * self.pos[j][0];
                py += wj * self.pos[j][1];
                vx += wj * self.vel[j][0];
                vy += wj * self.vel[j][1];
                i += 1;
            }
            out.pos.push([px / w, py / w]);
            out.vel.push([vx / w, vy / w]);
            out.w.push(w);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub centroids: Vec<TargetState>,
    pub assignment: Vec<usize>,
    pub cost: f64,
}

#[inline]
pub(crate) fn dist_sq(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

#[inline]
pub(crate) fn nearest(p: &[f64; 2], centroids: &[[f64; 2]]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = dist_sq(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Weighted k-means with k-means++ seeding.
///
/// Returns `k` centroids (possibly coincident when the cloud has fewer than
/// `k` distinct positions). An empty or weightless cloud yields no centroids.
pub fn weighted_kmeans(cloud: &WeightedCloud, k: usize, cfg: &KMeansConfig, rng: &mut RngStream) -> KMeansResult {
    let empty = KMeansResult {
        centroids: Vec::new(),
        assignment: vec![0; cloud.len()],
        cost: 0.0,
    };
    if k == 0 || cloud.is_empty() || cloud.total_weight() <= 0.0 {
        return empty;
    }
    let mut best: Option<KMeansResult> = None;
    for _ in 0..cfg.restarts.max(1) {
        let seeds = seed_plus_plus(cloud, k, rng);
        let run = lloyd(cloud, seeds, cfg.max_iter);
        if best.as_ref().is_none_or(|b| run.cost < b.cost) {
            best = Some(run);
        }
    }
    best.unwrap_or(empty)
}

fn seed_plus_plus(cloud: &WeightedCloud, k: usize, rng: &mut RngStream) -> Vec<[f64; 2]> {
    let n = cloud.len();
    let mut centroids = Vec::with_capacity(k);
    centroids.push(cloud.pos[sample_proportional(&cloud.w, rng)]);
    let mut d2: Vec<f64> = cloud.pos.iter().map(|p| dist_sq(p, &centroids[0])).collect();
    let mut scores = vec![0.0; n];
    while centroids.len() < k {
        for i in 0..n {
            scores[i] = cloud.w[i] * d2[i];
        }
        let total: f64 = scores.iter().sum();
        let pick = if total > 0.0 {
            sample_proportional(&scores, rng)
        } else {
            sample_proportional(&cloud.w, rng)
        };
        let c = cloud.pos[pick];
        for i in 0..n {
            d2[i] = d2[i].min(dist_sq(&cloud.pos[i], &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Index drawn with probability proportional to `weights`.
pub(crate) fn sample_proportional(weights: &[f64], rng: &mut RngStream) -> usize {
    let total: f64 = weights.iter().sum();
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if acc > target {
                return i;
            }
        }
    }
    last_positive
}

/// Squared centroid displacement below which Lloyd iterations stop.
const SETTLED: f64 = 1e-8;

/// Lloyd iterations from the given centroids until assignments or centroids
/// settle.
pub fn lloyd(cloud: &WeightedCloud, init: Vec<[f64; 2]>, max_iter: usize) -> KMeansResult {
    let n = cloud.len();
    let k = init.len();
    let mut centroids = init;
    let mut assignment = vec![usize::MAX; n];
    let mut d2 = vec![0.0; n];
    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        for i in 0..n {
            let (j, d) = nearest(&cloud.pos[i], &centroids);
            d2[i] = d;
            if assignment[i] != j {
                assignment[i] = j;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![[0.0f64; 3]; k];
        for i in 0..n {
            let w = cloud.w[i];
            let s = &mut sums[assignment[i]];
            s[0] += w;
            s[1] += w * cloud.pos[i][0];
            s[2] += w * cloud.pos[i][1];
        }
        let mut shift = 0.0f64;
        for j in 0..k {
            if sums[j][0] > 0.0 {
                let c = [sums[j][1] / sums[j][0], sums[j][2] / sums[j][0]];
                shift = shift.max(dist_sq(&c, &centroids[j]));
                centroids[j] = c;
            } else {
                shift = f64::INFINITY;
                // empty cluster: move it to the worst-served point
                let far = (0..n)
                    .filter(|&i| cloud.w[i] > 0.0)
                    .max_by(|&a, &b| (cloud.w[a] * d2[a]).total_cmp(&(cloud.w[b] * d2[b])).then(b.cmp(&a)));
                if let Some(i) = far {
                    if cloud.w[i] * d2[i] > 0.0 {
                        centroids[j] = cloud.pos[i];
                        d2[i] = 0.0;
                    }
                }
            }
        }
        if shift < SETTLED {
            break;
        }
    }
    finish(cloud, centroids)
}

/// Final assignment, member-weighted states and cost for fixed centroids.
fn finish(cloud: &WeightedCloud, centroids: Vec<[f64; 2]>) -> KMeansResult {
    let k = centroids.len();
    let mut sums = vec![[0.0f64; 5]; k];
    let mut assignment = Vec::with_capacity(cloud.len());
    let mut cost = 0.0;
    for i in 0..cloud.len() {
        let (j, d) = nearest(&cloud.pos[i], &centroids);
        assignment.push(j);
        let w = cloud.w[i];
        cost += w * d;
        let s = &mut sums[j];
        s[0] += w;
        s[1] += w * cloud.pos[i][0];
        s[2] += w * cloud.pos[i][1];
        s[3] += w * cloud.vel[i][0];
        s[4] += w * cloud.vel[i][1];
    }
    let states = centroids
        .iter()
        .zip(&sums)
        .map(|(c, s)| {
            if s[0] > 0.0 {
                TargetState::new(s[1] / s[0], s[2] / s[0], s[3] / s[0], s[4] / s[0])
            } else {
                TargetState::at(c[0], c[1])
            }
        })
        .collect();
    KMeansResult {
        centroids: states,
        assignment,
        cost,
    }
}
