//! Symbols `M(x)` of translation-invariant models, band-curve extraction on
//! torus grids, detection of crossings and critical points, and window
//! certification.
//!
//! A certified window is an open arc of quasienergies whose symbol
//! preimage stays clear of every detected band crossing and critical
//! point; on such windows all band velocities are bounded away from zero,
//! and the minimum squared velocity `c_Δ` is the positivity constant used
//! by the commutator check in [`crate::mourre`].

use std::sync::Arc as StdArc;

use ndarray::Array2;

use crate::arcs::{cluster_phases, ArcSet};
use crate::error::{Error, Result};
use crate::lattice::UnitaryMatrix;
use crate::linalg::{self, C64, TAU};
use crate::par::{self, Parallelism};

const PI: f64 = std::f64::consts::PI;

type SamplerFn = dyn Fn(&[f64]) -> Array2<C64> + Send + Sync;

/// A grid-samplable map `T^d → U(d')` given by an exact analytic formula.
#[derive(Clone)]
pub struct Symbol {
    d: usize,
    dim: usize,
    sampler: StdArc<SamplerFn>,
}

impl std::fmt::Debug for Symbol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Symbol").field("d", &self.d).field("dim", &self.dim).finish()
    }
}

impl Symbol {
    pub fn new(
        d: usize,
        dim: usize,
        sampler: impl Fn(&[f64]) -> Array2<C64> + Send + Sync + 'static,
    ) -> Self {
        Self { d, dim, sampler: StdArc::new(sampler) }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &[f64]) -> Array2<C64> {
        debug_assert_eq!(x.len(), self.d);
        (self.sampler)(x)
    }
}

/// Symbol of the homogeneous quantum walk:
/// `M(x) = diag(e^{ix_1}, e^{-ix_1}, …, e^{ix_d}, e^{-ix_d}) · C_∞`.
pub fn symbol_qw(c_inf: &UnitaryMatrix, d: usize) -> Result<Symbol> {
    if c_inf.dim() != 2 * d {
        return Err(Error::DimensionMismatch { expected: 2 * d, got: c_inf.dim() });
    }
    let coin = c_inf.matrix().clone();
    Ok(Symbol::new(d, 2 * d, move |x: &[f64]| {
        let n = 2 * d;
        let mut m = coin.clone();
        for row in 0..n {
            let axis = row / 2;
            let sign = if row % 2 == 0 { 1.0 } else { -1.0 };
            let ph = C64::from_polar(1.0, sign * x[axis]);
            for col in 0..n {
                m[[row, col]] *= ph;
            }
        }
        m
    }))
}

/// The 4×4 Chalker-Coddington symbol exactly as printed, in the coin order
/// `(+1, +2, -1, -2)`.
pub fn mcc_matrix(phi: f64, x1: f64, x2: f64) -> Array2<C64> {
    let c = C64::new(phi.cos(), 0.0);
    let is = C64::new(0.0, phi.sin());
    let e = |t: f64| C64::from_polar(1.0, t);
    let z = C64::new(0.0, 0.0);
    ndarray::array![
        [z, is * e(x2), z, c],
        [c, z, is * e(-x1), z],
        [z, c, z, is * e(-x2)],
        [is * e(x1), z, c, z],
    ]
}

/// Permutation taking the lattice coin order `(+1, -1, +2, -2)` to the
/// order the printed symbol uses, `(+1, +2, -1, -2)`.
pub const CC_SYMBOL_COIN_ORDER: [usize; 4] = [0, 2, 1, 3];

/// Symbol of the homogeneous Chalker-Coddington walk in the lattice coin
/// order `(+1, -1, +2, -2)` (the printed form [`mcc_matrix`] re-indexed).
pub fn symbol_cc(phi: f64) -> Result<Symbol> {
    if !(0.0..=PI / 2.0 + 1e-15).contains(&phi) {
        return Err(Error::Validation(format!("phi = {phi} outside [0, pi/2]")));
    }
    Ok(Symbol::new(2, 4, move |x: &[f64]| {
        let printed = mcc_matrix(phi, x[0], x[1]);
        let mut m = Array2::zeros((4, 4));
        for a in 0..4 {
            for b in 0..4 {
                // entry in lattice order (a, b) sits at the permuted slot
                let pa = CC_SYMBOL_COIN_ORDER.iter().position(|&v| v == a).unwrap();
                let pb = CC_SYMBOL_COIN_ORDER.iter().position(|&v| v == b).unwrap();
                m[[a, b]] = printed[[pa, pb]];
            }
        }
        m
    }))
}

/// Detection tolerances for band scans.
#[derive(Debug, Clone, Copy)]
pub struct BandOptions {
    /// Eigenphase distance below which two curves count as crossing.
    pub gap_tol: f64,
    /// Gradient norm below which a point counts as critical.
    pub grad_tol: f64,
    /// Eigenvector overlap gap below which tracking is ambiguous.
    pub overlap_tie: f64,
    /// Padding of band arcs; defaults to one phase grid step.
    pub pad: Option<f64>,
    /// Sample gap that still joins one arc; defaults to three grid steps.
    pub merge_gap: Option<f64>,
}

impl Default for BandOptions {
    fn default() -> Self {
        Self { gap_tol: 1e-6, grad_tol: 1e-4, overlap_tie: 1e-6, pad: None, merge_gap: None }
    }
}

/// A grid point whose eigenphases degenerate (or whose tracking was
/// ambiguous), with the phases involved.
#[derive(Debug, Clone)]
pub struct DegeneratePoint {
    pub point: usize,
    pub phases: Vec<f64>,
}

/// A grid point where some band velocity vanishes.
#[derive(Debug, Clone)]
pub struct CriticalPoint {
    pub point: usize,
    pub curve: usize,
    pub phase: f64,
}

/// Eigenphase curves of a symbol sampled on a regular `N^d` grid, with
/// continuity-tracked labels, finite-difference gradients, detected
/// crossings/critical points and the covering band arcs.
#[derive(Debug, Clone)]
pub struct BandStructure {
    d: usize,
    dim: usize,
    n: usize,
    phases: Vec<f64>,        // n_points × dim, tracked order
    vectors: Vec<Array2<C64>>, // per point, columns tracked
    grads: Vec<f64>,         // n_points × dim × d
    grad_ok: Vec<bool>,      // n_points × dim
    pub crossings: Vec<DegeneratePoint>,
    pub criticals: Vec<CriticalPoint>,
    pub tau_m: Vec<f64>,
    bands: ArcSet,
    opts: BandOptions,
}

impl BandStructure {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid_n(&self) -> usize {
        self.n
    }

    pub fn n_points(&self) -> usize {
        (self.n as u64).pow(self.d as u32) as usize
    }

    pub fn grid_step(&self) -> f64 {
        TAU / self.n as f64
    }

    pub fn options(&self) -> &BandOptions {
        &self.opts
    }

    pub fn coords(&self, mut p: usize) -> Vec<usize> {
        let mut c = vec![0; self.d];
        for a in (0..self.d).rev() {
            c[a] = p % self.n;
            p /= self.n;
        }
        c
    }

    pub fn point_index(&self, coords: &[usize]) -> usize {
        let mut p = 0;
        for &c in coords {
            p = p * self.n + c;
        }
        p
    }

    pub fn x_of(&self, p: usize) -> Vec<f64> {
        self.coords(p).iter().map(|&c| TAU * c as f64 / self.n as f64).collect()
    }

    pub fn neighbor(&self, p: usize, axis: usize, delta: i64) -> usize {
        let mut c = self.coords(p);
        c[axis] = (c[axis] as i64 + delta).rem_euclid(self.n as i64) as usize;
        self.point_index(&c)
    }

    pub fn phase(&self, p: usize, k: usize) -> f64 {
        self.phases[p * self.dim + k]
    }

    pub fn phases_at(&self, p: usize) -> &[f64] {
        &self.phases[p * self.dim..(p + 1) * self.dim]
    }

    pub fn vectors_at(&self, p: usize) -> &Array2<C64> {
        &self.vectors[p]
    }

    pub fn gradient(&self, p: usize, k: usize) -> Option<&[f64]> {
        if self.grad_ok[p * self.dim + k] {
            let base = (p * self.dim + k) * self.d;
            Some(&self.grads[base..base + self.d])
        } else {
            None
        }
    }

    pub fn bands(&self) -> &ArcSet {
        &self.bands
    }

    /// l∞ torus distance between two grid points, in cells.
    pub fn cell_distance(&self, p: usize, q: usize) -> usize {
        let (ca, cb) = (self.coords(p), self.coords(q));
        ca.iter()
            .zip(&cb)
            .map(|(&x, &y)| {
                let d = x.abs_diff(y);
                d.min(self.n - d)
            })
            .max()
            .unwrap_or(0)
    }
}

/// Eigen-decomposes the symbol at every grid point, tracks curves by
/// eigenvector overlap between lexicographic neighbors, and detects
/// crossings and critical points.
pub fn band_structure(
    sym: &Symbol,
    n: usize,
    opts: &BandOptions,
    par: Parallelism,
) -> Result<BandStructure> {
    if n < 16 {
        return Err(Error::Config(format!("band grid n = {n} too coarse (need n >= 16)")));
    }
    let d = sym.d();
    let dim = sym.dim();
    let n_points = (n as u64).pow(d as u32) as usize;
    let h = TAU / n as f64;

    // per-point eigensolves, parallel
    let raw: Vec<(Vec<f64>, Array2<C64>)> = par::try_map_indices(par, n_points, |p| {
        let mut coords = vec![0usize; d];
        let mut pp = p;
        for a in (0..d).rev() {
            coords[a] = pp % n;
            pp /= n;
        }
        let x: Vec<f64> = coords.iter().map(|&c| TAU * c as f64 / n as f64).collect();
        let m = sym.eval(&x);
        let defect = linalg::unitarity_defect(&m.view());
        if defect > 1e-12 {
            return Err(Error::Validation(format!(
                "symbol sample at grid point {p} is not unitary (defect {defect:.3e})"
            )));
        }
        let pairs = linalg::unitary_eigenpairs(&m.view())?;
        Ok((pairs.phases, pairs.vectors))
    })?;

    let mut bs = BandStructure {
        d,
        dim,
        n,
        phases: vec![0.0; n_points * dim],
        vectors: Vec::with_capacity(n_points),
        grads: vec![0.0; n_points * dim * d],
        grad_ok: vec![false; n_points * dim],
        crossings: Vec::new(),
        criticals: Vec::new(),
        tau_m: Vec::new(),
        bands: ArcSet::empty(),
        opts: *opts,
    };

    // sequential tracking pass in lexicographic order
    let mut ambiguous = vec![false; n_points];
    for p in 0..n_points {
        let (ph_raw, v_raw) = &raw[p];
        let perm: Vec<usize> = if p == 0 {
            (0..dim).collect()
        } else {
            // lexicographic predecessor: step back along the last nonzero axis
            let coords = bs.coords(p);
            let axis = (0..d).rev().find(|&a| coords[a] > 0).unwrap();
            let q = bs.neighbor(p, axis, -1);
            let vq = &bs.vectors[q];
            let mut overlap = vec![0.0; dim * dim];
            for i in 0..dim {
                for j in 0..dim {
                    let mut s = C64::new(0.0, 0.0);
                    for row in 0..dim {
                        s += vq[[row, i]].conj() * v_raw[[row, j]];
                    }
                    overlap[i * dim + j] = s.norm_sqr();
                }
            }
            // greedy assignment with tie detection
            let mut perm = vec![usize::MAX; dim];
            let mut used_i = vec![false; dim];
            let mut used_j = vec![false; dim];
            let mut tie = false;
            for _ in 0..dim {
                let (mut bi, mut bj, mut bv) = (0, 0, -1.0);
                for i in 0..dim {
                    if used_i[i] {
                        continue;
                    }
                    for j in 0..dim {
                        if used_j[j] {
                            continue;
                        }
                        if overlap[i * dim + j] > bv {
                            bv = overlap[i * dim + j];
                            bi = i;
                            bj = j;
                        }
                    }
                }
                // second best in the chosen row
                let mut second = -1.0f64;
                for j in 0..dim {
                    if !used_j[j] && j != bj {
                        second = second.max(overlap[bi * dim + j]);
                    }
                }
                if second >= 0.0 && (bv - second) < opts.overlap_tie {
                    tie = true;
                }
                perm[bi] = bj;
                used_i[bi] = true;
                used_j[bj] = true;
            }
            if tie {
                ambiguous[p] = true;
                (0..dim).collect()
            } else {
                perm
            }
        };
        let mut vecs = Array2::zeros((dim, dim));
        for i in 0..dim {
            let j = perm[i];
            bs.phases[p * dim + i] = ph_raw[j];
            for row in 0..dim {
                vecs[[row, i]] = v_raw[[row, j]];
            }
        }
        bs.vectors.push(vecs);
    }

    // crossings: degenerate eigenphases or ambiguous tracking
    for p in 0..n_points {
        let ph = bs.phases_at(p);
        let mut degenerate: Vec<f64> = Vec::new();
        for i in 0..dim {
            for j in (i + 1)..dim {
                if linalg::circ_dist(ph[i], ph[j]) < opts.gap_tol {
                    degenerate.push(ph[i]);
                    degenerate.push(ph[j]);
                }
            }
        }
        if !degenerate.is_empty() {
            bs.crossings.push(DegeneratePoint { point: p, phases: degenerate });
        } else if ambiguous[p] {
            bs.crossings.push(DegeneratePoint { point: p, phases: ph.to_vec() });
        }
    }

    // gradients by locally-matched centered differences
    let local_phase = |p: usize, vec_ref: ndarray::ArrayView1<C64>| -> (f64, bool) {
        // phase at point p of the curve whose eigenvector best matches vec_ref
        let v = &bs.vectors[p];
        let mut best = (-1.0, 0usize);
        let mut second = -1.0;
        for j in 0..dim {
            let mut s = C64::new(0.0, 0.0);
            for row in 0..dim {
                s += v[[row, j]].conj() * vec_ref[row];
            }
            let o = s.norm_sqr();
            if o > best.0 {
                second = best.0;
                best = (o, j);
            } else if o > second {
                second = o;
            }
        }
        (bs.phases[p * dim + best.1], best.0 - second >= 1e-9)
    };
    let mut grads = vec![0.0; n_points * dim * d];
    let mut grad_ok = vec![false; n_points * dim];
    for p in 0..n_points {
        for k in 0..dim {
            let vk = bs.vectors[p].column(k);
            let mut ok = true;
            let base = (p * dim + k) * d;
            for a in 0..d {
                let (pp, pm) = (bs.neighbor(p, a, 1), bs.neighbor(p, a, -1));
                let (ph_p, ok_p) = local_phase(pp, vk);
                let (ph_m, ok_m) = local_phase(pm, vk);
                ok &= ok_p && ok_m;
                grads[base + a] = linalg::circ_diff(ph_p, ph_m) / (2.0 * h);
            }
            grad_ok[p * dim + k] = ok;
        }
    }
    bs.grads = grads;
    bs.grad_ok = grad_ok;

    // critical points: vanishing velocity away from detected crossings
    let crossing_points: std::collections::HashSet<usize> =
        bs.crossings.iter().map(|c| c.point).collect();
    for p in 0..n_points {
        if crossing_points.contains(&p) {
            continue;
        }
        for k in 0..dim {
            if let Some(g) = bs.gradient(p, k) {
                let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm < opts.grad_tol {
                    bs.criticals.push(CriticalPoint { point: p, curve: k, phase: bs.phase(p, k) });
                }
            }
        }
    }

    // tau_M: quasienergies of crossings and critical points, clustered to
    // one grid step
    let mut tau_phases: Vec<f64> = Vec::new();
    for c in &bs.crossings {
        tau_phases.extend(&c.phases);
    }
    for c in &bs.criticals {
        tau_phases.push(c.phase);
    }
    bs.tau_m = cluster_phases(&tau_phases, h);

    // band arcs from all samples
    let pad = opts.pad.unwrap_or(h);
    let merge = opts.merge_gap.unwrap_or(3.0 * h);
    bs.bands = ArcSet::from_phase_samples(&bs.phases, pad, merge);

    Ok(bs)
}

/// Union of arcs covering all sampled eigenphases, padded by grid
/// resolution.
pub fn essential_spectrum(bs: &BandStructure) -> ArcSet {
    bs.bands().clone()
}

/// Axis-aligned box of grid cells, per-axis intervals mod `n`.
#[derive(Debug, Clone)]
pub struct ThetaBox {
    /// Core bounding box of the preimage component (plateau of the bump).
    pub core_lo: Vec<usize>,
    pub core_len: Vec<usize>,
    /// Ramp width in cells added on each side for the support.
    pub margin: usize,
}

impl ThetaBox {
    /// Offset of `coord` outside the core interval along `axis` (0 when
    /// inside), measured in cells on the torus.
    pub fn axis_offset(&self, axis: usize, coord: usize, n: usize) -> usize {
        let lo = self.core_lo[axis];
        let len = self.core_len[axis];
        if len >= n {
            return 0;
        }
        let rel = (coord + n - lo) % n;
        if rel < len {
            0
        } else {
            let past_hi = rel - len + 1;
            let before_lo = n - rel;
            past_hi.min(before_lo)
        }
    }

    /// Largest per-axis offset from the core box (l∞), 0 inside.
    pub fn offset(&self, coords: &[usize], n: usize) -> usize {
        coords
            .iter()
            .enumerate()
            .map(|(a, &c)| self.axis_offset(a, c, n))
            .max()
            .unwrap_or(0)
    }

    pub fn contains_with_margin(&self, coords: &[usize], n: usize, margin: usize) -> bool {
        self.offset(coords, n) <= margin
    }
}

/// Certificate that a window avoids crossings and critical points: the
/// witness boxes, the positivity constant `c_Δ`, and failure diagnostics.
#[derive(Debug, Clone)]
pub struct WindowCertificate {
    pub pass: bool,
    pub c_delta: f64,
    pub boxes: Vec<ThetaBox>,
    pub offending_phases: Vec<f64>,
    pub reason: Option<String>,
    pub grid_n: usize,
}

/// Margin (in cells) a preimage must keep from every crossing/critical
/// point.
pub const CERTIFY_MARGIN_CELLS: usize = 2;

/// Certifies `delta`: passes iff the preimage of `delta` under the band
/// curves stays at least [`CERTIFY_MARGIN_CELLS`] grid cells away from
/// every detected crossing and critical point, and `delta` lies inside the
/// essential spectrum. On pass, `c_delta` is the minimum squared band
/// velocity over the preimage (all curves).
pub fn is_m_good(delta: &ArcSet, bs: &BandStructure) -> WindowCertificate {
    let n = bs.grid_n();
    let n_points = bs.n_points();
    let dim = bs.dim();
    let fail = |reason: String, offending: Vec<f64>| WindowCertificate {
        pass: false,
        c_delta: 0.0,
        boxes: Vec::new(),
        offending_phases: offending,
        reason: Some(reason),
        grid_n: n,
    };

    if delta.is_empty() {
        return fail("window is empty".into(), Vec::new());
    }
    if delta.directed_hausdorff(bs.bands()) > 1e-12 {
        return fail("outside essential spectrum".into(), Vec::new());
    }

    // preimage mask
    let mut mask = vec![false; n_points];
    for p in 0..n_points {
        if bs.phases_at(p).iter().any(|&ph| delta.contains(ph)) {
            mask[p] = true;
        }
    }
    if !mask.iter().any(|&m| m) {
        return fail("window has empty symbol preimage at this resolution".into(), Vec::new());
    }

    // connected components of the mask (per-axis torus adjacency)
    let mut comp = vec![usize::MAX; n_points];
    let mut n_comp = 0;
    for start in 0..n_points {
        if !mask[start] || comp[start] != usize::MAX {
            continue;
        }
        let id = n_comp;
        n_comp += 1;
        let mut stack = vec![start];
        comp[start] = id;
        while let Some(p) = stack.pop() {
            for a in 0..bs.d() {
                for delta_c in [-1i64, 1] {
                    let q = bs.neighbor(p, a, delta_c);
                    if mask[q] && comp[q] == usize::MAX {
                        comp[q] = id;
                        stack.push(q);
                    }
                }
            }
        }
    }

    // merge components whose dilations would overlap
    let cells_of = |id: usize| -> Vec<usize> {
        (0..n_points).filter(|&p| comp[p] == id).collect()
    };
    let mut parent: Vec<usize> = (0..n_comp).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..n_comp {
        for j in (i + 1)..n_comp {
            let ci = cells_of(i);
            let cj = cells_of(j);
            let mut min_d = usize::MAX;
            for &p in &ci {
                for &q in &cj {
                    min_d = min_d.min(bs.cell_distance(p, q));
                }
            }
            if min_d <= 2 * CERTIFY_MARGIN_CELLS {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }

    // bounding boxes of merged components
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for p in 0..n_points {
        if mask[p] {
            let root = find(&mut parent, comp[p]);
            groups.entry(root).or_default().push(p);
        }
    }
    let mut boxes = Vec::new();
    for cells in groups.values() {
        let mut box_lo = vec![0usize; bs.d()];
        let mut box_len = vec![0usize; bs.d()];
        for a in 0..bs.d() {
            let mut present = vec![false; n];
            for &p in cells {
                present[bs.coords(p)[a]] = true;
            }
            let count = present.iter().filter(|&&b| b).count();
            if count == n {
                box_lo[a] = 0;
                box_len[a] = n;
                continue;
            }
            // minimal circular interval: complement of the largest gap
            let vals: Vec<usize> = (0..n).filter(|&v| present[v]).collect();
            let mut best_gap = n - vals[vals.len() - 1] + vals[0];
            let mut best_after = vals.len() - 1;
            for w in 1..vals.len() {
                let gap = vals[w] - vals[w - 1];
                if gap > best_gap {
                    best_gap = gap;
                    best_after = w - 1;
                }
            }
            let lo = vals[(best_after + 1) % vals.len()];
            box_lo[a] = lo;
            box_len[a] = n - best_gap + 1;
        }
        boxes.push(ThetaBox { core_lo: box_lo, core_len: box_len, margin: CERTIFY_MARGIN_CELLS });
    }

    // bad points must stay out of every box inflated by margin - 1
    // (equivalently: distance from the core hull >= margin)
    let mut offending: Vec<f64> = Vec::new();
    let bad_points: Vec<(usize, Vec<f64>)> = bs
        .crossings
        .iter()
        .map(|cp| (cp.point, cp.phases.clone()))
        .chain(bs.criticals.iter().map(|cp| (cp.point, vec![cp.phase])))
        .collect();
    for (p, phases) in &bad_points {
        let coords = bs.coords(*p);
        for b in &boxes {
            if b.contains_with_margin(&coords, n, CERTIFY_MARGIN_CELLS - 1) {
                offending.extend(phases.iter().cloned());
            }
        }
    }
    if !offending.is_empty() {
        let reps = cluster_phases(&offending, bs.grid_step());
        return fail("window preimage too close to a crossing or critical point".into(), reps);
    }

    // c_delta: minimum squared velocity over preimage cells, all curves
    let mut c_delta = f64::INFINITY;
    for p in 0..n_points {
        if !mask[p] {
            continue;
        }
        for k in 0..dim {
            match bs.gradient(p, k) {
                Some(g) => {
                    let sq = g.iter().map(|v| v * v).sum::<f64>();
                    c_delta = c_delta.min(sq);
                }
                None => {
                    return fail(
                        "band velocity undefined on the window preimage".into(),
                        vec![bs.phase(p, k)],
                    );
                }
            }
        }
    }
    if !c_delta.is_finite() || c_delta <= 0.0 {
        return fail("minimum band velocity is not positive".into(), Vec::new());
    }

    WindowCertificate {
        pass: true,
        c_delta,
        boxes,
        offending_phases: Vec::new(),
        reason: None,
        grid_n: n,
    }
}

/// Closed-form bands and exceptional quasienergies of the one-dimensional
/// walk with coin modulus `|α|` and global phase `η`: two arcs of
/// half-width `arcsin|α|` centered at `±π/2 - η`, with the four band-edge
/// phases as the exceptional set.
pub fn qw1d_closed_form(alpha: C64, eta: f64) -> (ArcSet, Vec<f64>) {
    let a = alpha.norm().clamp(0.0, 1.0);
    let w = a.acos(); // half-gap from the band edge to phase 0
    let arcs = ArcSet::from_intervals(&[
        (w - eta, (PI - w) - eta),
        ((PI + w) - eta, (TAU - w) - eta),
    ]);
    let raw = [w - eta, PI - w - eta, PI + w - eta, TAU - w - eta];
    let tau_m = cluster_phases(&raw.map(|t| t.rem_euclid(TAU)), 1e-9);
    (arcs, tau_m)
}

/// Closed-form bands and exceptional set of the Chalker-Coddington model:
/// four arcs of half-width `min(φ, π/2 - φ)` centered at `0, π/2, π,
/// 3π/2`, plus the four centers and eight edges as exceptional points.
pub fn cc_closed_form(phi: f64) -> (ArcSet, Vec<f64>) {
    let w = phi.min(PI / 2.0 - phi).max(0.0);
    let centers = [0.0, PI / 2.0, PI, 3.0 * PI / 2.0];
    let arcs = ArcSet::from_intervals(
        &centers.map(|c0| (c0 - w, c0 + w)),
    );
    let mut tau: Vec<f64> = Vec::new();
    for c0 in centers {
        tau.push(c0.rem_euclid(TAU));
        tau.push((c0 - w).rem_euclid(TAU));
        tau.push((c0 + w).rem_euclid(TAU));
    }
    let tau_m = cluster_phases(&tau, 1e-9);
    (arcs, tau_m)
}

/// Bands and exceptional set of the BB family asymptotic to a single
/// scattering matrix: the squares of the corresponding walk's bands
/// (angle doubling on the circle).
pub fn bb_closed_form_via_square(alpha: C64, eta: f64) -> (ArcSet, Vec<f64>) {
    let (arcs, tau) = qw1d_closed_form(alpha, eta);
    let doubled: Vec<f64> = tau.iter().map(|t| (2.0 * t).rem_euclid(TAU)).collect();
    (arcs.double_angles(), cluster_phases(&doubled, 1e-9))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Coin1d;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn qw_symbol_identity_coin() {
        let sym = symbol_qw(&UnitaryMatrix::identity(2), 1).unwrap();
        let m = sym.eval(&[0.7]);
        assert!((m[[0, 0]] - C64::from_polar(1.0, 0.7)).norm() < 1e-15);
        assert!((m[[1, 1]] - C64::from_polar(1.0, -0.7)).norm() < 1e-15);
        assert!(m[[0, 1]].norm() < 1e-15 && m[[1, 0]].norm() < 1e-15);
    }

    #[test]
    fn qw_symbol_hadamard_characteristic_polynomial() {
        // eigenvalues solve λ² − √2 cos(x) λ + 1 = 0
        let sym = symbol_qw(&Coin1d::hadamard().matrix(), 1).unwrap();
        let mut rng = StdRng::seed_from_u64(4);
        for _ in 0..50 {
            let x: f64 = rng.random::<f64>() * TAU;
            let m = sym.eval(&[x]);
            let pairs = linalg::unitary_eigenpairs(&m.view()).unwrap();
            for &ph in &pairs.phases {
                let lam = C64::from_polar(1.0, ph);
                let p = lam * lam - c(2.0f64.sqrt() * x.cos(), 0.0) * lam + c(1.0, 0.0);
                assert!(p.norm() < 1e-12, "characteristic polynomial residual {}", p.norm());
            }
        }
    }

    #[test]
    fn qw_symbol_unitary_at_random_points() {
        let mut rng = StdRng::seed_from_u64(8);
        let coin = UnitaryMatrix::new_lenient(linalg::haar_unitary(4, &mut rng)).unwrap();
        let sym = symbol_qw(&coin, 2).unwrap();
        for _ in 0..1000 {
            let x = [rng.random::<f64>() * TAU, rng.random::<f64>() * TAU];
            let m = sym.eval(&x);
            assert!(linalg::unitarity_defect(&m.view()) < 1e-13);
        }
    }

    #[test]
    fn cc_symbol_matches_printed_form_up_to_relabeling() {
        let phi = 0.4;
        let sym = symbol_cc(phi).unwrap();
        let x = [0.3, -1.2];
        let lattice_order = sym.eval(&x);
        let printed = mcc_matrix(phi, x[0], x[1]);
        for a in 0..4 {
            for b in 0..4 {
                let pa = CC_SYMBOL_COIN_ORDER[a];
                let pb = CC_SYMBOL_COIN_ORDER[b];
                assert!((lattice_order[[pa, pb]] - printed[[a, b]]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn cc_symbol_phi_zero_constant_spectrum() {
        let sym = symbol_cc(0.0).unwrap();
        for x in [[0.0, 0.0], [1.0, 2.0], [4.0, 5.0]] {
            let pairs = linalg::unitary_eigenpairs(&sym.eval(&x).view()).unwrap();
            let expect = [0.0, PI / 2.0, PI, 3.0 * PI / 2.0];
            assert!(linalg::multiset_phase_distance(&pairs.phases, &expect) < 1e-12);
        }
    }

    #[test]
    fn cc_symbol_quarter_pi_crossing_at_origin() {
        let sym = symbol_cc(PI / 4.0).unwrap();
        let pairs = linalg::unitary_eigenpairs(&sym.eval(&[0.0, 0.0]).view()).unwrap();
        // all four eigenvalues pair up: {e^{iπ/4}, e^{iπ/4}, e^{i5π/4}, e^{i5π/4}}
        let expect = [PI / 4.0, PI / 4.0, 5.0 * PI / 4.0, 5.0 * PI / 4.0];
        assert!(linalg::multiset_phase_distance(&pairs.phases, &expect) < 1e-12);
    }

    #[test]
    fn cc_symbol_determinant_unimodular() {
        use ndarray_linalg::Determinant;
        let sym = symbol_cc(PI / 6.0).unwrap();
        for i in 0..64 {
            for j in 0..64 {
                let x = [TAU * i as f64 / 64.0, TAU * j as f64 / 64.0];
                let det = sym.eval(&x).det().unwrap();
                assert!((det.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn free_shift_band_structure() {
        let sym = symbol_qw(&UnitaryMatrix::identity(2), 1).unwrap();
        let bs = band_structure(&sym, 64, &BandOptions::default(), Parallelism::default()).unwrap();
        assert!(bs.bands().is_full());
        // crossings at x = 0 and x = π (grid points 0 and 32)
        let crossing_pts: Vec<usize> = bs.crossings.iter().map(|c| c.point).collect();
        assert!(crossing_pts.contains(&0));
        assert!(crossing_pts.contains(&32));
        assert!(bs.criticals.is_empty());
        // τ_M = {0, π}
        assert_eq!(bs.tau_m.len(), 2);
        assert!(linalg::multiset_phase_distance(&bs.tau_m, &[0.0, PI]) < 1e-9);
    }

    #[test]
    fn hadamard_band_structure_tau_m() {
        let sym = symbol_qw(&Coin1d::hadamard().matrix(), 1).unwrap();
        let bs =
            band_structure(&sym, 512, &BandOptions::default(), Parallelism::default()).unwrap();
        let expect = [PI / 4.0, 3.0 * PI / 4.0, 5.0 * PI / 4.0, 7.0 * PI / 4.0];
        assert_eq!(bs.tau_m.len(), 4, "tau_m = {:?}", bs.tau_m);
        assert!(linalg::multiset_phase_distance(&bs.tau_m, &expect) < 2.0 * TAU / 512.0);
        // bands match the closed form within two grid steps
        let (arcs, _) = qw1d_closed_form(c(1.0 / 2.0f64.sqrt(), 0.0), 0.0);
        assert!(bs.bands().hausdorff(&arcs) <= 2.0 * TAU / 512.0);
        assert!(bs.crossings.is_empty());
    }

    #[test]
    fn essential_spectrum_hadamard_and_free() {
        let sym = symbol_qw(&Coin1d::hadamard().matrix(), 1).unwrap();
        let bs =
            band_structure(&sym, 256, &BandOptions::default(), Parallelism::default()).unwrap();
        let ess = essential_spectrum(&bs);
        let expect = ArcSet::from_intervals(&[
            (PI / 4.0, 3.0 * PI / 4.0),
            (5.0 * PI / 4.0, 7.0 * PI / 4.0),
        ]);
        assert!(ess.hausdorff(&expect) <= 2.0 * TAU / 256.0);

        let free = symbol_qw(&UnitaryMatrix::identity(2), 1).unwrap();
        let bs = band_structure(&free, 64, &BandOptions::default(), Parallelism::default()).unwrap();
        assert!(essential_spectrum(&bs).is_full());
    }

    #[test]
    fn cc_band_structure_matches_closed_form() {
        for phi in [PI / 6.0, PI / 3.0] {
            let sym = symbol_cc(phi).unwrap();
            let bs =
                band_structure(&sym, 64, &BandOptions::default(), Parallelism::default()).unwrap();
            let (arcs, tau) = cc_closed_form(phi);
            let step = TAU / 64.0;
            assert!(
                bs.bands().hausdorff(&arcs) <= 2.0 * step,
                "phi = {phi}: hausdorff {} > {}",
                bs.bands().hausdorff(&arcs),
                2.0 * step
            );
            assert_eq!(tau.len(), 12);
            // every closed-form point detected within 2 steps and vice versa
            for &t in &tau {
                assert!(
                    bs.tau_m.iter().any(|&u| linalg::circ_dist(t, u) <= 2.0 * step),
                    "phi = {phi}: closed-form tau point {t} undetected; got {:?}",
                    bs.tau_m
                );
            }
            for &u in &bs.tau_m {
                assert!(
                    tau.iter().any(|&t| linalg::circ_dist(t, u) <= 2.0 * step),
                    "phi = {phi}: spurious detection {u}"
                );
            }
        }
    }

    #[test]
    fn window_certification_hadamard() {
        let sym = symbol_qw(&Coin1d::hadamard().matrix(), 1).unwrap();
        let bs =
            band_structure(&sym, 512, &BandOptions::default(), Parallelism::default()).unwrap();
        // a window straddling the band center passes
        let delta = ArcSet::from_intervals(&[(PI / 2.0 - 0.3, PI / 2.0 + 0.3)]);
        let cert = is_m_good(&delta, &bs);
        assert!(cert.pass, "{:?}", cert.reason);
        // oracle: min over the window of (α² - p²)/(1 - p²), attained at the
        // window edge p = sin(0.3)
        let p_edge = 0.3f64.sin();
        let oracle = (0.5 - p_edge * p_edge) / (1.0 - p_edge * p_edge);
        assert!(
            (cert.c_delta - oracle).abs() / oracle < 0.05,
            "c_delta = {}, oracle = {}",
            cert.c_delta,
            oracle
        );
        assert!(!cert.boxes.is_empty());

        // a window containing the band edge π/4 fails
        let bad = ArcSet::from_intervals(&[(PI / 4.0 - 0.1, PI / 4.0 + 0.1)]);
        let cert = is_m_good(&bad, &bs);
        assert!(!cert.pass);

        // a window just inside the band but touching the edge preimage
        // fails on proximity to the critical point, naming it
        let edge = ArcSet::from_intervals(&[(PI / 4.0 + 1e-4, PI / 4.0 + 0.1)]);
        let cert = is_m_good(&edge, &bs);
        assert!(!cert.pass);
        assert!(!cert.offending_phases.is_empty());
        assert!(cert
            .offending_phases
            .iter()
            .any(|&p| linalg::circ_dist(p, PI / 4.0) < 0.05));

        // a window in the spectral gap fails with the right reason
        let gap = ArcSet::from_intervals(&[(-0.05, 0.05)]);
        let cert = is_m_good(&gap, &bs);
        assert!(!cert.pass);
        assert!(cert.reason.as_deref().unwrap().contains("outside essential spectrum"));
    }

    #[test]
    fn gradient_matches_closed_form_velocity() {
        // |dθ/dx| = α |sin x| / sqrt(1 - α² cos² x) for the balanced coin
        let sym = symbol_qw(&Coin1d::hadamard().matrix(), 1).unwrap();
        let bs =
            band_structure(&sym, 1024, &BandOptions::default(), Parallelism::default()).unwrap();
        let a = 1.0 / 2.0f64.sqrt();
        for p in (0..1024).step_by(7) {
            let x = bs.x_of(p)[0];
            // stay away from the critical points x = 0, π
            if x.min(TAU - x) < 0.3 || (x - PI).abs() < 0.3 {
                continue;
            }
            let expect = a * x.sin().abs() / (1.0 - a * a * x.cos() * x.cos()).sqrt();
            for k in 0..2 {
                let g = bs.gradient(p, k).expect("valid gradient");
                let got = g[0].abs();
                assert!(
                    (got - expect).abs() / expect < 1e-3,
                    "x = {x}: |dθ/dx| = {got}, expected {expect}"
                );
            }
        }
    }

    #[test]
    fn closed_forms_degenerate_cases() {
        // |α| = 0: bands collapse to {±i e^{-iη}}
        let (arcs, tau) = qw1d_closed_form(c(0.0, 0.0), 0.0);
        assert!(arcs.measure() < 1e-12);
        assert_eq!(tau.len(), 2);
        assert!(linalg::multiset_phase_distance(&tau, &[PI / 2.0, 3.0 * PI / 2.0]) < 1e-12);
        // |α| = 1: full circle, τ_M = {±1}
        let (arcs, tau) = qw1d_closed_form(c(1.0, 0.0), 0.0);
        assert!(arcs.is_full());
        assert_eq!(tau.len(), 2);
        assert!(linalg::multiset_phase_distance(&tau, &[0.0, PI]) < 1e-12);
        // nonzero η rotates everything
        let (_, tau) = qw1d_closed_form(c(0.0, 0.0), PI / 2.0);
        assert!(linalg::multiset_phase_distance(&tau, &[0.0, PI]) < 1e-12);

        // CC: φ = 0 point spectrum; φ = π/4 touching arcs with 8 points
        let (arcs, tau) = cc_closed_form(0.0);
        assert!(arcs.measure() < 1e-12);
        assert_eq!(tau.len(), 4);
        let (arcs, tau) = cc_closed_form(PI / 4.0);
        assert!(arcs.is_full());
        assert_eq!(tau.len(), 8);
        // φ = π/6: 12 points, arcs of width π/3
        let (arcs, tau) = cc_closed_form(PI / 6.0);
        assert_eq!(tau.len(), 12);
        assert!((arcs.measure() - 4.0 * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn three_dimensional_scan_runs() {
        // d >= 3 uses the same code path; N^d eigensolves get expensive fast
        let mut rng = StdRng::seed_from_u64(12);
        let coin = UnitaryMatrix::new_lenient(linalg::haar_unitary(6, &mut rng)).unwrap();
        let sym = symbol_qw(&coin, 3).unwrap();
        let bs = band_structure(&sym, 16, &BandOptions::default(), Parallelism::default()).unwrap();
        assert_eq!(bs.n_points(), 16 * 16 * 16);
        assert!(!bs.bands().is_empty());
    }

    #[test]
    fn bb_square_closed_form() {
        // |α| = 1/√2, η = 0: doubled τ_M collapses to {±i}
        let (arcs, tau) = bb_closed_form_via_square(c(1.0 / 2.0f64.sqrt(), 0.0), 0.0);
        assert_eq!(tau.len(), 2);
        assert!(linalg::multiset_phase_distance(&tau, &[PI / 2.0, 3.0 * PI / 2.0]) < 1e-9);
        let expect = ArcSet::from_intervals(&[(PI / 2.0, 3.0 * PI / 2.0)]);
        assert!(arcs.hausdorff(&expect) < 1e-9);
        // |α| = 1: full circle stays full
        let (arcs, _) = bb_closed_form_via_square(c(1.0, 0.0), 0.0);
        assert!(arcs.is_full());
    }
}
