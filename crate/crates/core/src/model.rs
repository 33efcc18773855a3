//! Trajectories, fixed-width sub-trajectories and the succeed relation.
//!
//! A trajectory of `l` points is cut into windows of `w` points, advancing
//! `s` points at a time. Window `i` covers points `i*s .. i*s + w`; trailing
//! points that cannot fill a whole window are dropped. Windows never copy
//! points: they are `(offset, length)` views into the parent's array.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A planar position in meters (x east, y north).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GeoPoint {
    pub x: f64,
    pub y: f64,
}

impl GeoPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        GeoPoint { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    id: String,
    points: Vec<GeoPoint>,
}

impl Trajectory {
    /// Fails when fewer than two points are given or any coordinate is not finite.
    pub fn new(id: impl Into<String>, points: Vec<GeoPoint>) -> Result<Self> {
        let id = id.into();
        if points.len() < 2 {
            return Err(Error::InvalidTrajectory {
                id,
                reason: format!("needs at least 2 points, got {}", points.len()),
            });
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidTrajectory {
                id,
                reason: format!("point {i} is not finite"),
            });
        }
        Ok(Trajectory { id, points })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn points(&self) -> &[GeoPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Window length and step, both counted in points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionParams {
    window: usize,
    step: usize,
}

impl PartitionParams {
    pub fn new(window: usize, step: usize) -> Result<Self> {
        if step == 0 || step >= window {
            return Err(Error::InvalidParameter(format!(
                "partition requires 0 < step < window, got window={window} step={step}"
            )));
        }
        Ok(PartitionParams { window, step })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn step(&self) -> usize {
        self.step
    }

    /// Number of full windows in a trajectory of `len` points.
    pub fn window_count(&self, len: usize) -> usize {
        if len < self.window {
            0
        } else {
            (len - self.window) / self.step + 1
        }
    }
}

impl Default for PartitionParams {
    fn default() -> Self {
        PartitionParams { window: 6, step: 1 }
    }
}

/// Borrowed view of one window of a parent trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubTrajectory<'a> {
    /// Ordinal of the parent within its corpus.
    pub parent: u32,
    pub parent_id: &'a str,
    pub index_in_parent: usize,
    pub start_offset: usize,
    pub points: &'a [GeoPoint],
}

impl<'a> SubTrajectory<'a> {
    pub fn last_point(&self) -> GeoPoint {
        self.points[self.points.len() - 1]
    }

    /// The window read as a flat `2w` vector `[x0, y0, x1, y1, ...]`.
    pub fn vector_view(&self) -> impl Iterator<Item = f64> + 'a {
        self.points.iter().flat_map(|p| [p.x, p.y])
    }
}

/// Partition one trajectory. Returns an empty list when it is shorter than the window.
pub fn partition<'a>(
    trajectory: &'a Trajectory,
    parent: u32,
    params: PartitionParams,
) -> Vec<SubTrajectory<'a>> {
    let count = params.window_count(trajectory.len());
    (0..count)
        .map(|i| {
            let start = i * params.step;
            SubTrajectory {
                parent,
                parent_id: trajectory.id(),
                index_in_parent: i,
                start_offset: start,
                points: &trajectory.points[start..start + params.window],
            }
        })
        .collect()
}

/// Identifier of a window inside a [`SubTrajectoryStore`].
///
/// Windows are numbered parent by parent, so ordering by id is ordering by
/// `(parent, index_in_parent)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WindowId(pub u32);

impl WindowId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// All windows of a corpus, with their parents.
#[derive(Debug, Clone, PartialEq)]
pub struct SubTrajectoryStore {
    params: PartitionParams,
    trajectories: Vec<Trajectory>,
    /// `first_window[p]..first_window[p + 1]` are the windows of parent `p`.
    first_window: Vec<u32>,
    window_parent: Vec<u32>,
    /// Square root of each window's path length; 0 for stationary windows.
    sqrt_path_len: Vec<f64>,
}

impl SubTrajectoryStore {
    /// Partition every trajectory. Trajectories shorter than the window keep
    /// their ordinal but contribute no windows.
    pub fn new(trajectories: Vec<Trajectory>, params: PartitionParams) -> Self {
        let mut first_window = Vec::with_capacity(trajectories.len() + 1);
        let mut window_parent = Vec::new();
        let mut sqrt_path_len = Vec::new();
        first_window.push(0u32);
        for (p, t) in trajectories.iter().enumerate() {
            for sub in partition(t, p as u32, params) {
                window_parent.push(p as u32);
                sqrt_path_len.push(crate::similarity::path_length(sub.points).sqrt());
            }
            first_window.push(window_parent.len() as u32);
        }
        SubTrajectoryStore {
            params,
            trajectories,
            first_window,
            window_parent,
            sqrt_path_len,
        }
    }

    pub fn params(&self) -> PartitionParams {
        self.params
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn trajectory_count(&self) -> usize {
        self.trajectories.len()
    }

    /// Number of windows, stationary ones included.
    pub fn len(&self) -> usize {
        self.window_parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window_parent.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = WindowId> {
        (0..self.len() as u32).map(WindowId)
    }

    pub fn parent(&self, id: WindowId) -> u32 {
        self.window_parent[id.index()]
    }

    pub fn index_in_parent(&self, id: WindowId) -> usize {
        (id.0 - self.first_window[self.parent(id) as usize]) as usize
    }

    pub fn points(&self, id: WindowId) -> &[GeoPoint] {
        let start = self.index_in_parent(id) * self.params.step;
        let t = &self.trajectories[self.parent(id) as usize];
        &t.points[start..start + self.params.window]
    }

    pub fn sqrt_path_len(&self, id: WindowId) -> f64 {
        self.sqrt_path_len[id.index()]
    }

    /// A window with zero path length has no defined normalized distance.
    pub fn is_stationary(&self, id: WindowId) -> bool {
        self.sqrt_path_len[id.index()] == 0.0
    }

    pub fn get(&self, id: WindowId) -> SubTrajectory<'_> {
        let parent = self.parent(id);
        let index = self.index_in_parent(id);
        let start = index * self.params.step;
        let t = &self.trajectories[parent as usize];
        SubTrajectory {
            parent,
            parent_id: t.id(),
            index_in_parent: index,
            start_offset: start,
            points: &t.points[start..start + self.params.window],
        }
    }

    /// The next window of the same parent, or `None` for its last window.
    pub fn succ(&self, id: WindowId) -> Option<WindowId> {
        let next = id.0 + 1;
        let parent = self.parent(id) as usize;
        (next < self.first_window[parent + 1]).then_some(WindowId(next))
    }

    /// Windows of one parent in order.
    pub fn windows_of(&self, parent: u32) -> impl Iterator<Item = WindowId> {
        let p = parent as usize;
        (self.first_window[p]..self.first_window[p + 1]).map(WindowId)
    }
}
