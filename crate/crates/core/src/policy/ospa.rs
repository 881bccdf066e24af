//! OSPA distance between target sets, on positions only.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::TargetSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OspaParams {
    pub cutoff: f64,
    pub order: f64,
}

impl Default for OspaParams {
    fn default() -> Self {
        OspaParams { cutoff: 2.0, order: 1.0 }
    }
}

impl OspaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.cutoff > 0.0 && self.cutoff.is_finite()) {
            return Err(invalid("OSPA cutoff must be positive"));
        }
        if !(self.order >= 1.0 && self.order.is_finite()) {
            return Err(invalid("OSPA order must be >= 1"));
        }
        Ok(())
    }
}

pub fn ospa(a: &TargetSet, b: &TargetSet, params: &OspaParams) -> f64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let (m, n) = (small.len(), large.len());
    if n == 0 {
        return 0.0;
    }
    let c = params.cutoff;
    let p = params.order;
    let cp = c.powf(p);
    let mut matched = 0.0;
    if m > 0 {
        let mut cost = Vec::with_capacity(m * n);
        for x in small.iter() {
            for y in large.iter() {
                let d = x.distance(y).min(c);
                cost.push(if p == 1.0 { d } else { d.powf(p) });
            }
        }
        matched = min_cost_assignment(&cost, m, n).1;
    }
    let mean = (matched + cp * (n - m) as f64) / n as f64;
    if p == 1.0 {
        mean
    } else {
        mean.powf(1.0 / p)
    }
}

/// Cardinality part of OSPA alone, `((1/n) c^p (n - m))^(1/p)`.
pub fn ospa_cardinality_term(size_a: usize, size_b: usize, params: &OspaParams) -> f64 {
    let (m, n) = (size_a.min(size_b), size_a.max(size_b));
    if n == 0 {
        return 0.0;
    }
    (params.cutoff.powf(params.order) * (n - m) as f64 / n as f64).powf(1.0 / params.order)
}

/// Minimum-cost assignment of every row to a distinct column of a row-major
/// `rows x cols` cost matrix with `rows <= cols` (Hungarian method with
/// potentials). Returns the column of each row and the total cost.
pub fn min_cost_assignment(cost: &[f64], rows: usize, cols: usize) -> (Vec<usize>, f64) {
    assert!(rows <= cols, "more rows than columns");
    assert_eq!(cost.len(), rows * cols);
    if rows == 0 {
        return (Vec::new(), 0.0);
    }
    // 1-based arrays; column 0 is a virtual start
    let mut u = vec![0.0; rows + 1];
    let mut v = vec![0.0; cols + 1];
    let mut owner = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for i in 1..=rows {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=cols {
                if !used[j] {
                    let cur = cost[(i0 - 1) * cols + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; rows];
    for j in 1..=cols {
        if owner[j] != 0 {
            assign[owner[j] - 1] = j - 1;
        }
    }
    let total = assign.iter().enumerate().map(|(i, &j)| cost[i * cols + j]).sum();
    (assign, total)
}
