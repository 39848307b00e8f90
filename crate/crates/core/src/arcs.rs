//! Closed arc sets on the circle `T = [0, 2π)`.
//!
//! Arcs are stored split at phase 0, sorted and disjoint, so set algebra
//! is linear scans; [`ArcSet::canonical_arcs`] re-joins a pair meeting at
//! the cut for reporting.

use crate::linalg::{circ_dist, TAU};

const EPS: f64 = 1e-12;

/// A closed arc `[lo, hi] ⊂ [0, 2π]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub lo: f64,
    pub hi: f64,
}

impl Arc {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// A canonicalized union of closed arcs on the circle.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcSet {
    arcs: Vec<Arc>,
    full: bool,
}

impl ArcSet {
    pub fn empty() -> Self {
        Self { arcs: Vec::new(), full: false }
    }

    pub fn full_circle() -> Self {
        Self { arcs: Vec::new(), full: true }
    }

    /// Builds from `(lo, hi)` pairs; `hi < lo` or `hi > 2π` denote arcs
    /// crossing phase 0. Arcs of width `>= 2π` make the full circle.
    pub fn from_intervals(intervals: &[(f64, f64)]) -> Self {
        let mut pieces: Vec<Arc> = Vec::new();
        for &(lo, hi) in intervals {
            let mut lo_n = lo.rem_euclid(TAU);
            let mut width = hi - lo;
            if width < 0.0 {
                width = (hi - lo).rem_euclid(TAU);
            }
            if width >= TAU - EPS {
                return Self::full_circle();
            }
            if width <= 0.0 {
                // degenerate: a single point arc
                width = 0.0;
            }
            if lo_n + width <= TAU {
                pieces.push(Arc { lo: lo_n, hi: lo_n + width });
            } else {
                pieces.push(Arc { lo: lo_n, hi: TAU });
                lo_n = 0.0;
                pieces.push(Arc { lo: lo_n, hi: (lo + width).rem_euclid(TAU) });
            }
        }
        Self::canonicalize(pieces)
    }

    fn canonicalize(mut pieces: Vec<Arc>) -> Self {
        if pieces.is_empty() {
            return Self::empty();
        }
        pieces.sort_by(|a, b| a.lo.partial_cmp(&b.lo).unwrap());
        let mut merged: Vec<Arc> = Vec::with_capacity(pieces.len());
        for p in pieces {
            match merged.last_mut() {
                Some(last) if p.lo <= last.hi + EPS => {
                    last.hi = last.hi.max(p.hi);
                }
                _ => merged.push(p),
            }
        }
        let measure: f64 = merged.iter().map(Arc::width).sum();
        if measure >= TAU - EPS {
            return Self::full_circle();
        }
        Self { arcs: merged, full: false }
    }

    pub fn is_empty(&self) -> bool {
        !self.full && self.arcs.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.full
    }

    /// Internal arcs, split at phase 0.
    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    /// Arcs for reporting: a trailing piece ending at `2π` is joined with a
    /// leading piece starting at `0` into one wrap-around arc (whose `hi`
    /// then exceeds `2π`).
    pub fn canonical_arcs(&self) -> Vec<Arc> {
        if self.full {
            return vec![Arc { lo: 0.0, hi: TAU }];
        }
        let mut out = self.arcs.clone();
        if out.len() >= 2 {
            let first = out[0];
            let last = *out.last().unwrap();
            if first.lo <= EPS && (TAU - last.hi) <= EPS {
                out.pop();
                out[0] = Arc { lo: last.lo, hi: first.hi + TAU };
            }
        }
        out
    }

    pub fn measure(&self) -> f64 {
        if self.full {
            TAU
        } else {
            self.arcs.iter().map(Arc::width).sum()
        }
    }

    /// Distance from a phase to the set (0 when inside).
    pub fn distance_to(&self, theta: f64) -> f64 {
        if self.full {
            return 0.0;
        }
        if self.is_empty() {
            return std::f64::consts::PI;
        }
        let t = theta.rem_euclid(TAU);
        let mut best = f64::INFINITY;
        for a in &self.arcs {
            if t >= a.lo - EPS && t <= a.hi + EPS {
                return 0.0;
            }
            best = best.min(circ_dist(t, a.lo)).min(circ_dist(t, a.hi));
        }
        best
    }

    pub fn contains(&self, theta: f64) -> bool {
        self.distance_to(theta) <= EPS
    }

    pub fn union(&self, other: &Self) -> Self {
        if self.full || other.full {
            return Self::full_circle();
        }
        let mut pieces = self.arcs.clone();
        pieces.extend_from_slice(&other.arcs);
        Self::canonicalize(pieces)
    }

    /// Closure of the complement.
    pub fn complement(&self) -> Self {
        if self.full {
            return Self::empty();
        }
        if self.is_empty() {
            return Self::full_circle();
        }
        let mut gaps = Vec::new();
        for w in self.arcs.windows(2) {
            gaps.push((w[0].hi, w[1].lo));
        }
        let last = self.arcs.last().unwrap().hi;
        let first = self.arcs[0].lo;
        // the gap through phase 0
        let wrap_width = (TAU - last) + first;
        if wrap_width > EPS {
            gaps.push((last, last + wrap_width));
        }
        Self::from_intervals(&gaps)
    }

    /// Midpoints of the complementary gaps (wrap-joined, so a gap through
    /// phase 0 yields its true midpoint).
    fn gap_midpoints(&self) -> Vec<f64> {
        self.complement()
            .canonical_arcs()
            .iter()
            .map(|g| ((g.lo + g.hi) / 2.0).rem_euclid(TAU))
            .collect()
    }

    /// Directed Hausdorff distance `sup_{a∈self} dist(a, other)`.
    pub fn directed_hausdorff(&self, other: &Self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        if other.is_full() {
            return 0.0;
        }
        if other.is_empty() {
            return std::f64::consts::PI;
        }
        let mut candidates: Vec<f64> = Vec::new();
        if self.full {
            candidates.extend(other.gap_midpoints());
        } else {
            for a in &self.arcs {
                candidates.push(a.lo);
                candidates.push(a.hi.rem_euclid(TAU));
            }
            for m in other.gap_midpoints() {
                if self.contains(m) {
                    candidates.push(m);
                }
            }
        }
        candidates.iter().map(|&t| other.distance_to(t)).fold(0.0, f64::max)
    }

    /// Symmetric Hausdorff distance on the circle.
    pub fn hausdorff(&self, other: &Self) -> f64 {
        self.directed_hausdorff(other).max(other.directed_hausdorff(self))
    }

    /// Image of the set under angle doubling `θ → 2θ`.
    pub fn double_angles(&self) -> Self {
        if self.full {
            return Self::full_circle();
        }
        let doubled: Vec<(f64, f64)> = self
            .canonical_arcs()
            .iter()
            .map(|a| (2.0 * a.lo, 2.0 * a.lo + 2.0 * a.width()))
            .collect();
        Self::from_intervals(&doubled)
    }

    /// Builds a covering arc set from sampled phases: samples closer than
    /// `merge_gap` join one arc, and every arc is padded by `pad` on both
    /// sides.
    pub fn from_phase_samples(phases: &[f64], pad: f64, merge_gap: f64) -> Self {
        if phases.is_empty() {
            return Self::empty();
        }
        let mut sorted: Vec<f64> = phases.iter().map(|p| p.rem_euclid(TAU)).collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = sorted.len();
        // find the largest circular gap; arcs start after it
        let mut max_gap = TAU - sorted[n - 1] + sorted[0];
        let mut start = 0;
        for k in 1..n {
            let g = sorted[k] - sorted[k - 1];
            if g > max_gap {
                max_gap = g;
                start = k;
            }
        }
        if max_gap <= merge_gap {
            return Self::full_circle();
        }
        let mut intervals = Vec::new();
        let mut lo = sorted[start];
        let mut prev = sorted[start];
        for i in 1..=n {
            let t_raw = sorted[(start + i) % n];
            // unwrap so the walk is monotone
            let t = if i == n || (start + i) >= n { t_raw + TAU } else { t_raw };
            let t = if t < prev { t + TAU } else { t };
            if i == n || t - prev > merge_gap {
                intervals.push((lo - pad, prev + pad));
                lo = t;
            }
            prev = t;
        }
        Self::from_intervals(&intervals)
    }
}

/// Clusters phases on the circle: values within `radius` of a chain join
/// one cluster, represented by its circular mean.
pub fn cluster_phases(phases: &[f64], radius: f64) -> Vec<f64> {
    if phases.is_empty() {
        return Vec::new();
    }
    let mut sorted: Vec<f64> = phases.iter().map(|p| p.rem_euclid(TAU)).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    // rotate so the walk starts after the largest gap
    let mut max_gap = TAU - sorted[n - 1] + sorted[0];
    let mut start = 0;
    for k in 1..n {
        let g = sorted[k] - sorted[k - 1];
        if g > max_gap {
            max_gap = g;
            start = k;
        }
    }
    let mut reps = Vec::new();
    let mut cluster: Vec<f64> = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    for i in 0..n {
        let mut t = sorted[(start + i) % n];
        if (start + i) >= n {
            t += TAU;
        }
        if !cluster.is_empty() && t - prev > radius {
            reps.push(circular_mean(&cluster));
            cluster.clear();
        }
        cluster.push(t);
        prev = t;
    }
    if !cluster.is_empty() {
        reps.push(circular_mean(&cluster));
    }
    reps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    reps
}

fn circular_mean(values: &[f64]) -> f64 {
    let (s, c) = values.iter().fold((0.0, 0.0), |(s, c), &v| (s + v.sin(), c + v.cos()));
    s.atan2(c).rem_euclid(TAU)
}
