//! Priority agent: statuses, priority orders, state image and reward.
//!
//! The network head always has `4! = 24` outputs, one per permutation of
//! four ranks in lexicographic order. A set of `k < 4` platoons uses the
//! permutations that leave ranks `k..4` in place; all others are masked.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::drl::{Input, Shape};
use crate::dynamics::{project_desired_location, KinematicPose};
use crate::geometry::{occupied_cells, Grid, Point, Rect};
use crate::{Error, Result};

/// Largest coordinated set the network head supports.
pub const K_MAX: usize = 4;
/// Network outputs: `K_MAX!`.
pub const ACTIONS: usize = 24;
pub const CHANNELS: usize = 4;

/// Per-platoon label for one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StatusLabel {
    /// No binding conflict: accelerate toward the limit.
    Free,
    /// Waiting for another platoon that holds priority.
    Blocked,
    /// Member of a coordinated set.
    Coordinated { set: u32 },
}

/// All permutations of `0..k` in lexicographic order.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                go(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut alloc::vec![false; k], &mut out);
    out
}

/// Candidate priority orders of a `k`-platoon set, as rank permutations.
pub fn enumerate_priority_actions(k: usize) -> Result<Vec<Vec<usize>>> {
    if !(2..=K_MAX).contains(&k) {
        return Err(Error::Domain(alloc::format!("coordinated sets hold 2..={K_MAX} platoons, got {k}")));
    }
    Ok(permutations(k))
}

/// Valid head outputs for a set of `k` platoons.
pub fn action_mask(k: usize) -> Vec<bool> {
    permutations(K_MAX).iter().map(|p| p[k.min(K_MAX)..].iter().enumerate().all(|(i, r)| *r == k + i)).collect()
}

/// Priority order (ranks, highest priority first) for head output `action`.
pub fn action_order(action: usize, k: usize) -> Result<Vec<usize>> {
    let all = permutations(K_MAX);
    let p = all.get(action).ok_or_else(|| Error::Domain(alloc::format!("action {action} out of range")))?;
    if !action_mask(k)[action] {
        return Err(Error::Domain(alloc::format!("action {action} invalid for {k} platoons")));
    }
    Ok(p[..k].to_vec())
}

/// Head output that encodes `order` (a permutation of `0..k`).
pub fn order_action(order: &[usize]) -> Option<usize> {
    let k = order.len();
    let mut full = order.to_vec();
    full.extend(k..K_MAX);
    permutations(K_MAX).iter().position(|p| *p == full)
}

/// `-(CT + sum(PC) / k)`.
pub fn coordination_reward(coordination_time: f64, pass_times: &[f64]) -> Result<f64> {
    if pass_times.is_empty() {
        return Err(Error::Domain("coordination without platoons".into()));
    }
    let mean = pass_times.iter().sum::<f64>() / pass_times.len() as f64;
    Ok(-(coordination_time + mean))
}

/// How a finished coordination trains the shared network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Situation {
    /// A member went on into another coordination: bootstrap from it.
    Chained,
    /// All members ended independent: the target is the reward itself.
    Terminal,
}

/// One platoon of a coordinated set as drawn in the state image.
#[derive(Debug, Clone, PartialEq)]
pub struct SetMember {
    /// Member bodies now.
    pub bodies: Vec<Rect>,
    /// Member poses (centers, headings, speed, commanded acceleration).
    pub poses: Vec<KinematicPose>,
    pub speed: f64,
}

/// Rasterizes a coordinated set onto the `g x g` zone grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinationEncoder {
    pub grid: Grid,
    pub v_max: f64,
    /// Projection interval for desired locations, s.
    pub horizon: f64,
}

impl CoordinationEncoder {
    pub fn shape(&self) -> Shape {
        Shape::new(self.grid.rows, self.grid.cols, CHANNELS)
    }

    /// Cells each member would cover after the projection interval.
    pub fn desired_cells(&self, member: &SetMember) -> Vec<crate::geometry::Cell> {
        let rects: Vec<Rect> = member
            .bodies
            .iter()
            .zip(&member.poses)
            .map(|(b, p)| {
                let c = project_desired_location(p, self.horizon);
                Rect { center: Point::new(c.x, c.y), ..*b }
            })
            .collect();
        occupied_cells(&rects, &self.grid)
    }

    /// Channel 0: current cells coded by rank `1..=k`. Channel 1: speed over
    /// `v_max` on those cells. Channel 2: desired cells coded by rank, with
    /// `k + 1` where different members' desired cells coincide. Channel 3:
    /// cells of other platoons.
    pub fn encode(&self, members: &[SetMember], others: &[Rect]) -> Input {
        let shape = self.shape();
        let n = self.grid.rows * self.grid.cols;
        let k = members.len();
        let mut current = alloc::vec![0.0; n];
        let mut speed = alloc::vec![0.0; n];
        let mut desired = alloc::vec![0.0; n];
        for (rank, m) in members.iter().enumerate() {
            let code = (rank + 1) as f64;
            for c in occupied_cells(&m.bodies, &self.grid) {
                let i = self.grid.index(c);
                current[i] = code;
                speed[i] = (m.speed / self.v_max).clamp(0.0, 1.0);
            }
            for c in self.desired_cells(m) {
                let i = self.grid.index(c);
                desired[i] = if desired[i] != 0.0 && desired[i] != code { (k + 1) as f64 } else { code };
            }
        }
        let mut other = alloc::vec![0.0; n];
        for c in occupied_cells(others, &self.grid) {
            other[self.grid.index(c)] = 1.0;
        }
        let mut entries = Vec::new();
        for i in 0..n {
            for (ch, v) in [current[i], speed[i], desired[i], other[i]].into_iter().enumerate() {
                if v != 0.0 {
                    entries.push(((i * CHANNELS + ch) as u32, v));
                }
            }
        }
        Input::Sparse { shape, entries }
    }
}
