//! Search space, target states and the hierarchical sensing-action lattice.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Rectangular search region `[0, width] x [0, length]` in grid units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    width: f64,
    length: f64,
}

impl SearchSpace {
    /// `width` is the extent along x, `length` the extent along y.
    pub fn new(width: f64, length: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite() && length > 0.0 && length.is_finite()) {
            return Err(invalid(format!(
                "search space dimensions must be positive, got {width} x {length}"
            )));
        }
        Ok(SearchSpace { width, length })
    }

    pub fn square(side: f64) -> Result<Self> {
        Self::new(side, side)
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn area(&self) -> f64 {
        self.width * self.length
    }

    pub fn center(&self) -> [f64; 2] {
        [self.width / 2.0, self.length / 2.0]
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..=self.width).contains(&x) && (0.0..=self.length).contains(&y)
    }

    pub fn clamp(&self, x: f64, y: f64) -> [f64; 2] {
        [x.clamp(0.0, self.width), y.clamp(0.0, self.length)]
    }
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            width: 16.0,
            length: 16.0,
        }
    }
}

/// Kinematic state of one target: position and velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TargetState {
    pub px: f64,
    pub py: f64,
    pub vx: f64,
    pub vy: f64,
}

impl TargetState {
    pub const fn new(px: f64, py: f64, vx: f64, vy: f64) -> Self {
        TargetState { px, py, vx, vy }
    }

    pub const fn at(px: f64, py: f64) -> Self {
        TargetState::new(px, py, 0.0, 0.0)
    }

    pub fn position(&self) -> [f64; 2] {
        [self.px, self.py]
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.px, self.py, self.vx, self.vy]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        TargetState::new(a[0], a[1], a[2], a[3])
    }

    pub fn distance_sq(&self, other: &TargetState) -> f64 {
        let dx = self.px - other.px;
        let dy = self.py - other.py;
        dx * dx + dy * dy
    }

    pub fn distance(&self, other: &TargetState) -> f64 {
        self.distance_sq(other).sqrt()
    }
}

/// An unordered finite set of target states. Element order carries no meaning.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TargetSet(Vec<TargetState>);

impl TargetSet {
    pub fn new() -> Self {
        TargetSet(Vec::new())
    }

    pub fn from_vec(states: Vec<TargetState>) -> Self {
        TargetSet(states)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, state: TargetState) {
        self.0.push(state);
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TargetState> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[TargetState] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<TargetState> {
        self.0
    }

    pub fn positions(&self) -> Vec<[f64; 2]> {
        self.0.iter().map(TargetState::position).collect()
    }
}

impl FromIterator<TargetState> for TargetSet {
    fn from_iter<I: IntoIterator<Item = TargetState>>(iter: I) -> Self {
        TargetSet(iter.into_iter().collect())
    }
}

impl IntoIterator for TargetSet {
    type Item = TargetState;
    type IntoIter = std::vec::IntoIter<TargetState>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.into_iter()
    }
}

impl<'a> IntoIterator for &'a TargetSet {
    type Item = &'a TargetState;
    type IntoIter = std::slice::Iter<'a, TargetState>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// One square sensing region of the action lattice.
///
/// Membership is half-open, `[origin, origin + scale)` on each axis, except on
/// the far edges of the search space where the tile is closed, so that the
/// tiles of one scale partition the closed space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensingAction {
    pub origin_x: f64,
    pub origin_y: f64,
    pub scale: u32,
    /// Expected number of false positives per observation.
    pub clutter_rate: f64,
    closed_x: bool,
    closed_y: bool,
}

impl SensingAction {
    pub fn new(
        origin_x: f64,
        origin_y: f64,
        scale: u32,
        clutter_rate: f64,
        space: &SearchSpace,
    ) -> Result<Self> {
        if scale == 0 {
            return Err(invalid("action scale must be positive"));
        }
        if !(clutter_rate >= 0.0 && clutter_rate.is_finite()) {
            return Err(invalid(format!("clutter rate must be >= 0, got {clutter_rate}")));
        }
        let s = scale as f64;
        if origin_x < 0.0
            || origin_y < 0.0
            || origin_x + s > space.width() + 1e-9
            || origin_y + s > space.length() + 1e-9
        {
            return Err(invalid(format!(
                "action ({origin_x}, {origin_y}, scale {scale}) leaves the search space"
            )));
        }
        Ok(SensingAction {
            origin_x,
            origin_y,
            scale,
            clutter_rate,
            closed_x: (origin_x + s - space.width()).abs() < 1e-9,
            closed_y: (origin_y + s - space.length()).abs() < 1e-9,
        })
    }

    pub fn side(&self) -> f64 {
        self.scale as f64
    }

    pub fn area(&self) -> f64 {
        self.side() * self.side()
    }

    /// Uniform clutter density over the region.
    pub fn clutter_density(&self) -> f64 {
        self.clutter_rate / self.area()
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        let s = self.side();
        let in_x = x >= self.origin_x
            && (x < self.origin_x + s || (self.closed_x && x <= self.origin_x + s));
        let in_y = y >= self.origin_y
            && (y < self.origin_y + s || (self.closed_y && y <= self.origin_y + s));
        in_x && in_y
    }

    pub fn contains(&self, state: &TargetState) -> bool {
        self.contains_point(state.px, state.py)
    }

    /// Closed-rectangle test used to validate reported measurements, which may
    /// sit on the region boundary after clamping.
    pub fn covers_point(&self, x: f64, y: f64) -> bool {
        const EPS: f64 = 1e-9;
        let s = self.side();
        x >= self.origin_x - EPS
            && x <= self.origin_x + s + EPS
            && y >= self.origin_y - EPS
            && y <= self.origin_y + s + EPS
    }

    pub fn clamp_point(&self, x: f64, y: f64) -> [f64; 2] {
        let s = self.side();
        [
            x.clamp(self.origin_x, self.origin_x + s),
            y.clamp(self.origin_y, self.origin_y + s),
        ]
    }
}

/// `action_contains` as a free function.
pub fn action_contains(action: &SensingAction, state: &TargetState) -> bool {
    action.contains(state)
}

/// The full ordered list of sensing actions.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSpace {
    space: SearchSpace,
    actions: Vec<SensingAction>,
    levels: Vec<Level>,
    cell: u32,
}

#[derive(Debug, Clone, PartialEq)]
struct Level {
    scale: u32,
    offset: usize,
    cols: usize,
    rows: usize,
}

impl ActionSpace {
    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn actions(&self) -> &[SensingAction] {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&SensingAction> {
        self.actions.get(index)
    }

    pub fn scales(&self) -> Vec<u32> {
        self.levels.iter().map(|l| l.scale).collect()
    }

    /// Side of the finest grid cell all tiles are aligned to (gcd of scales).
    pub fn cell_size(&self) -> u32 {
        self.cell
    }

    /// Index of the action of each scale whose tile contains the point, in
    /// scale order. Empty if the point lies outside the space.
    pub fn tiles_containing(&self, x: f64, y: f64) -> impl Iterator<Item = usize> + '_ {
        let inside = self.space.contains(x, y);
        self.levels.iter().filter_map(move |level| {
            if !inside {
                return None;
            }
            let s = level.scale as f64;
            let col = ((x / s).floor() as usize).min(level.cols - 1);
            let row = ((y / s).floor() as usize).min(level.rows - 1);
            Some(level.offset + row * level.cols + col)
        })
    }

    /// Finds the action with the given origin and scale.
    pub fn find(&self, origin_x: f64, origin_y: f64, scale: u32) -> Option<usize> {
        let level = self.levels.iter().find(|l| l.scale == scale)?;
        let s = scale as f64;
        if origin_x % s != 0.0 || origin_y % s != 0.0 {
            return None;
        }
        let col = (origin_x / s) as usize;
        let row = (origin_y / s) as usize;
        (col < level.cols && row < level.rows).then(|| level.offset + row * level.cols + col)
    }
}

/// Enumerates every tile of every scale, ordered by scale ascending and then
/// row-major by origin, tagging each with its scale's clutter rate.
pub fn build_action_space(
    space: SearchSpace,
    scales: &[u32],
    clutter_rates: &[f64],
) -> Result<ActionSpace> {
    if scales.is_empty() {
        return Err(invalid("at least one action scale is required"));
    }
    if scales.len() != clutter_rates.len() {
        return Err(invalid(format!(
            "{} scales but {} clutter rates",
            scales.len(),
            clutter_rates.len()
        )));
    }
    let mut pairs: Vec<(u32, f64)> = scales.iter().copied().zip(clutter_rates.iter().copied()).collect();
    pairs.sort_by_key(|p| p.0);
    if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(invalid("duplicate action scale"));
    }

    let mut actions = Vec::new();
    let mut levels = Vec::new();
    let mut cell = 0u32;
    for &(scale, rate) in &pairs {
        if scale == 0 {
            return Err(invalid("action scale must be positive"));
        }
        let s = scale as f64;
        let cols = space.width() / s;
        let rows = space.length() / s;
        if cols.fract() != 0.0 || rows.fract() != 0.0 {
            return Err(invalid(format!(
                "scale {scale} does not divide the {} x {} search space",
                space.width(),
                space.length()
            )));
        }
        let (cols, rows) = (cols as usize, rows as usize);
        levels.push(Level {
            scale,
            offset: actions.len(),
            cols,
            rows,
        });
        for row in 0..rows {
            for col in 0..cols {
                actions.push(SensingAction::new(col as f64 * s, row as f64 * s, scale, rate, &space)?);
            }
        }
        cell = gcd(cell, scale);
    }
    Ok(ActionSpace {
        space,
        actions,
        levels,
        cell,
    })
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// The default hierarchical lattice: scales 1, 2, 4, 8 with clutter rates
/// 0.005, 0.04, 1 and 5.
pub const DEFAULT_SCALES: [u32; 4] = [1, 2, 4, 8];
pub const DEFAULT_CLUTTER_RATES: [f64; 4] = [0.005, 0.04, 1.0, 5.0];
