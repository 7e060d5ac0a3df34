//! Tracking-overlap detection between pairs of agents.
//!
//! Two agents whose footprints overlap and whose estimates agree closely
//! for several consecutive steps are following the same targets; one of
//! them is then released back to search.

use std::collections::{BTreeMap, VecDeque};

use rand::Rng;

use crate::world::{Position, Rect};

/// Minimum-cost assignment of every row to a distinct column (`rows ≤ cols`).
///
/// Classic Hungarian method with potentials, O(rows²·cols). Returns the column
/// assigned to each row.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    assert!(n <= m, "hungarian needs rows <= cols");
    // 1-based arrays; column 0 is the virtual start.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// OSPA distance of order 2 with cutoff `c` between two point sets.
pub fn ospa(x: &[Position], y: &[Position], c: f64) -> f64 {
    let (small, large) = if x.len() <= y.len() { (x, y) } else { (y, x) };
    let (m, n) = (small.len(), large.len());
    if n == 0 {
        return 0.0;
    }
    if m == 0 {
        return c;
    }
    let cost: Vec<Vec<f64>> = small
        .iter()
        .map(|a| large.iter().map(|b| a.distance(b).min(c).powi(2)).collect())
        .collect();
    let assignment = hungarian(&cost);
    let matched: f64 = assignment.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    ((matched + c * c * (n - m) as f64) / n as f64).sqrt()
}

/// Sliding windows of incremental overlap scores, one per agent pair.
#[derive(Debug, Clone)]
pub struct OverlapLedger {
    window: usize,
    cutoff: f64,
    threshold: f64,
    scores: BTreeMap<(usize, usize), VecDeque<f64>>,
}

fn key(i: usize, j: usize) -> (usize, usize) {
    (i.min(j), i.max(j))
}

impl OverlapLedger {
    pub fn new(window: usize, cutoff: f64, threshold: f64) -> Self {
        Self { window: window.max(1), cutoff, threshold, scores: BTreeMap::new() }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Records one step for the pair `(i, j)`.
    ///
    /// Overlapping footprints with nonempty estimates on both sides push the
    /// OSPA between the estimated positions; anything else pushes ∞.
    #[allow(clippy::too_many_arguments)]
    pub fn overlap_step(
        &mut self,
        i: usize,
        j: usize,
        est_i: &[Position],
        est_j: &[Position],
        s_i: Position,
        s_j: Position,
        side: f64,
    ) -> f64 {
        let overlapping = Rect::square(s_i, side).intersects(&Rect::square(s_j, side));
        let score = if overlapping && !est_i.is_empty() && !est_j.is_empty() {
            ospa(est_i, est_j, self.cutoff)
        } else {
            f64::INFINITY
        };
        self.push(i, j, score);
        score
    }

    /// Pushes a raw incremental score for the pair.
    pub fn push(&mut self, i: usize, j: usize, score: f64) {
        let buf = self.scores.entry(key(i, j)).or_default();
        buf.push_back(score);
        while buf.len() > self.window {
            buf.pop_front();
        }
    }

    /// Sum over the pair's window, or `None` while fewer than `window` steps are recorded.
    pub fn cumulative(&self, i: usize, j: usize) -> Option<f64> {
        let buf = self.scores.get(&key(i, j))?;
        (buf.len() == self.window).then(|| buf.iter().sum())
    }

    pub fn reset(&mut self, i: usize, j: usize) {
        self.scores.remove(&key(i, j));
    }

    /// If the pair's full window scores at or below the threshold, picks one
    /// of the two agents uniformly at random and clears the window.
    pub fn decide_switch<R: Rng + ?Sized>(&mut self, i: usize, j: usize, rng: &mut R) -> Option<usize> {
        let q = self.cumulative(i, j)?;
        if q <= self.threshold {
            self.reset(i, j);
            Some(if rng.random_bool(0.5) { i } else { j })
        } else {
            None
        }
    }
}
