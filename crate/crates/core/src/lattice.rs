//! Vectors and sparse banded unitary operators on the truncated lattice
//! `C^{d'} ⊗ l²((Z/LZ)^d)`.
//!
//! Index layout (frozen so CSV exports are reproducible bit-for-bit):
//! the linear index is coin-major, `idx = c · L^d + s`, where `c` is the
//! linear coin index and `s` enumerates sites lexicographically with the
//! first coordinate most significant and the last coordinate fastest.
//! Coin labels follow the order `{+1, -1, +2, -2, …, +d, -d}`, so the
//! linear coin index of `τ` is `2(|τ|-1)` for `τ > 0` and `2(|τ|-1)+1`
//! for `τ < 0`.

use std::io::Write;

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, C64};

/// Default unitarity tolerance for constructed matrices and operators.
pub const UNITARITY_TOL: f64 = 1e-12;
/// Drift above which parametrized constructions re-orthonormalize.
pub const REORTHONORMALIZE_ABOVE: f64 = 1e-10;

/// Geometry of the truncation: spatial dimension `d`, side length `L` and
/// coin dimension `d'`.
///
/// The total Hilbert-space dimension is `d' · L^d`. Pairing-based
/// constructions (BB, CMV, Chalker-Coddington plaquettes) additionally
/// require `L` even and at least 4; builders enforce that where the
/// pairing demands it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeShape {
    d: usize,
    l: usize,
    coin_dim: usize,
}

impl LatticeShape {
    pub fn new(d: usize, l: usize, coin_dim: usize) -> Result<Self> {
        if d == 0 || coin_dim == 0 {
            return Err(Error::Config("dimension and coin dimension must be positive".into()));
        }
        if l < 2 {
            return Err(Error::Config(format!("truncation side l = {l} is too small (need l >= 2)")));
        }
        let n_sites = (l as u128).pow(d as u32);
        if n_sites.saturating_mul(coin_dim as u128) > u32::MAX as u128 {
            return Err(Error::Config("truncation too large to index".into()));
        }
        Ok(Self { d, l, coin_dim })
    }

    /// Shape for even-pairing constructions; enforces `L >= 4` and even.
    pub fn new_paired(d: usize, l: usize, coin_dim: usize) -> Result<Self> {
        if l < 4 || !l.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "pairing constructions need an even truncation side >= 4, got l = {l}"
            )));
        }
        Self::new(d, l, coin_dim)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn coin_dim(&self) -> usize {
        self.coin_dim
    }

    pub fn n_sites(&self) -> usize {
        (self.l as u64).pow(self.d as u32) as usize
    }

    pub fn total_dim(&self) -> usize {
        self.coin_dim * self.n_sites()
    }

    /// Lexicographic site index of `coords` (first coordinate most
    /// significant).
    pub fn site_index(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.d);
        let mut s = 0;
        for &c in coords {
            debug_assert!(c < self.l);
            s = s * self.l + c;
        }
        s
    }

    pub fn site_coords(&self, mut site: usize) -> Vec<usize> {
        let mut coords = vec![0; self.d];
        for a in (0..self.d).rev() {
            coords[a] = site % self.l;
            site /= self.l;
        }
        coords
    }

    pub fn linear_index(&self, coin: usize, site: usize) -> usize {
        debug_assert!(coin < self.coin_dim);
        coin * self.n_sites() + site
    }

    pub fn split_index(&self, idx: usize) -> (usize, usize) {
        let n = self.n_sites();
        (idx / n, idx % n)
    }

    /// Site reached from `site` by one step along `axis` in direction
    /// `sign`, wrapped periodically.
    pub fn step_site(&self, site: usize, axis: usize, sign: i64) -> usize {
        let mut coords = self.site_coords(site);
        let c = coords[axis] as i64 + sign;
        coords[axis] = c.rem_euclid(self.l as i64) as usize;
        self.site_index(&coords)
    }

    /// l¹ distance between two sites on the torus.
    pub fn torus_site_distance(&self, a: usize, b: usize) -> usize {
        let ca = self.site_coords(a);
        let cb = self.site_coords(b);
        ca.iter()
            .zip(&cb)
            .map(|(&x, &y)| {
                let d = x.abs_diff(y);
                d.min(self.l - d)
            })
            .sum()
    }

    /// Integer representative of a coordinate in `(-L/2, L/2]`.
    pub fn centered_rep(&self, c: usize) -> i64 {
        let l = self.l as i64;
        let mut v = c as i64 % l;
        if v > l / 2 {
            v -= l;
        }
        v
    }
}

/// Coin label `τ ∈ {1, -1, …, d, -d}`; `τ = ±k` displaces a walker by
/// `± f_k` on the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoinIndex(i32);

impl CoinIndex {
    pub fn new(tau: i32, d: usize) -> Result<Self> {
        if tau == 0 || tau.unsigned_abs() as usize > d {
            return Err(Error::Config(format!("coin label {tau} outside N_{d}")));
        }
        Ok(Self(tau))
    }

    pub fn from_linear(c: usize, d: usize) -> Result<Self> {
        if c >= 2 * d {
            return Err(Error::Config(format!("linear coin index {c} out of range for d = {d}")));
        }
        let axis = c / 2 + 1;
        let tau = if c.is_multiple_of(2) { axis as i32 } else { -(axis as i32) };
        Ok(Self(tau))
    }

    pub fn tau(&self) -> i32 {
        self.0
    }

    pub fn linear(&self) -> usize {
        let k = self.0.unsigned_abs() as usize;
        2 * (k - 1) + usize::from(self.0 < 0)
    }

    /// Axis moved by this coin label (0-based).
    pub fn axis(&self) -> usize {
        self.0.unsigned_abs() as usize - 1
    }

    pub fn sign(&self) -> i64 {
        if self.0 > 0 {
            1
        } else {
            -1
        }
    }
}

/// A `d'×d'` matrix certified unitary within `tol`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix {
    m: Array2<C64>,
    tol: f64,
    reorthonormalized: bool,
}

impl UnitaryMatrix {
    /// Accepts `m` only if its unitarity defect is within [`UNITARITY_TOL`].
    pub fn new(m: Array2<C64>) -> Result<Self> {
        Self::with_tol(m, UNITARITY_TOL)
    }

    pub fn with_tol(m: Array2<C64>, tol: f64) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
        }
        let defect = linalg::unitarity_defect(&m.view());
        if defect > tol {
            return Err(Error::Validation(format!(
                "matrix is not unitary: defect {defect:.3e} > tol {tol:.1e}"
            )));
        }
        Ok(Self { m, tol, reorthonormalized: false })
    }

    /// Constructor for matrices assembled from parameters: drift up to
    /// [`REORTHONORMALIZE_ABOVE`] is accepted as-is; larger drift is
    /// repaired by projecting onto the closest unitary (polar factor) and
    /// the repair is recorded in [`UnitaryMatrix::was_reorthonormalized`].
    pub fn new_lenient(m: Array2<C64>) -> Result<Self> {
        let defect = linalg::unitarity_defect(&m.view());
        if defect <= REORTHONORMALIZE_ABOVE {
            return Ok(Self { m, tol: UNITARITY_TOL, reorthonormalized: false });
        }
        use ndarray_linalg::{JobSvd, SVDDC};
        let (u, _s, vt) = m
            .svddc(JobSvd::All)
            .map_err(|_| Error::Lapack { routine: "zgesdd", info: -1 })?;
        let (u, vt) = (u.unwrap(), vt.unwrap());
        let polar = u.dot(&vt);
        let defect_after = linalg::unitarity_defect(&polar.view());
        if defect_after > UNITARITY_TOL {
            return Err(Error::Validation(format!(
                "matrix could not be re-orthonormalized (defect {defect_after:.3e})"
            )));
        }
        Ok(Self { m: polar, tol: UNITARITY_TOL, reorthonormalized: true })
    }

    pub fn identity(n: usize) -> Self {
        Self { m: Array2::eye(n), tol: UNITARITY_TOL, reorthonormalized: false }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.m
    }

    pub fn view(&self) -> ArrayView2<'_, C64> {
        self.m.view()
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn was_reorthonormalized(&self) -> bool {
        self.reorthonormalized
    }

    pub fn unitarity_defect(&self) -> f64 {
        linalg::unitarity_defect(&self.m.view())
    }
}

/// A site-indexed family of unitary blocks `C(j)`.
#[derive(Debug, Clone)]
pub struct CoinField {
    shape: LatticeShape,
    blocks: Vec<UnitaryMatrix>,
}

impl CoinField {
    pub fn from_blocks(shape: LatticeShape, blocks: Vec<UnitaryMatrix>) -> Result<Self> {
        if blocks.len() != shape.n_sites() {
            return Err(Error::MissingSite { site: blocks.len().min(shape.n_sites()) });
        }
        for (site, b) in blocks.iter().enumerate() {
            if b.dim() != shape.coin_dim() {
                return Err(Error::DimensionMismatch { expected: shape.coin_dim(), got: b.dim() });
            }
            let defect = b.unitarity_defect();
            if defect > b.tol() {
                return Err(Error::NonUnitaryBlock { site, defect });
            }
        }
        Ok(Self { shape, blocks })
    }

    pub fn homogeneous(shape: LatticeShape, block: UnitaryMatrix) -> Result<Self> {
        let blocks = vec![block; shape.n_sites()];
        Self::from_blocks(shape, blocks)
    }

    pub fn shape(&self) -> &LatticeShape {
        &self.shape
    }

    pub fn block(&self, site: usize) -> &UnitaryMatrix {
        &self.blocks[site]
    }

    pub fn blocks(&self) -> &[UnitaryMatrix] {
        &self.blocks
    }

    /// Replaces the block at `site`.
    pub fn set_block(&mut self, site: usize, block: UnitaryMatrix) -> Result<()> {
        if block.dim() != self.shape.coin_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.shape.coin_dim(),
                got: block.dim(),
            });
        }
        self.blocks[site] = block;
        Ok(())
    }
}

/// Sparse banded unitary operator in CSR form.
#[derive(Debug, Clone)]
pub struct NetworkOperator {
    shape: LatticeShape,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
    bandwidth: usize,
}

impl NetworkOperator {
    /// Builds from coordinate triplets; duplicates are summed, exact zeros
    /// dropped.
    pub fn from_triplets(shape: LatticeShape, mut trip: Vec<(usize, usize, C64)>) -> Self {
        let n = shape.total_dim();
        trip.sort_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(trip.len());
        let mut vals = Vec::with_capacity(trip.len());
        let mut k = 0;
        for r in 0..n {
            while k < trip.len() && trip[k].0 == r {
                let c = trip[k].1;
                let mut v = trip[k].2;
                k += 1;
                while k < trip.len() && trip[k].0 == r && trip[k].1 == c {
                    v += trip[k].2;
                    k += 1;
                }
                if v != C64::new(0.0, 0.0) {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr[r + 1] = cols.len();
        }
        let bandwidth = compute_bandwidth(&shape, &row_ptr, &cols);
        Self { shape, row_ptr, cols, vals, bandwidth }
    }

    pub fn identity(shape: LatticeShape) -> Self {
        let n = shape.total_dim();
        let trip = (0..n).map(|i| (i, i, C64::new(1.0, 0.0))).collect();
        Self::from_triplets(shape, trip)
    }

    pub fn from_dense(shape: LatticeShape, m: &ArrayView2<C64>, drop_tol: f64) -> Result<Self> {
        let n = shape.total_dim();
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: m.nrows() });
        }
        let mut trip = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if m[[i, j]].norm() > drop_tol {
                    trip.push((i, j, m[[i, j]]));
                }
            }
        }
        Ok(Self::from_triplets(shape, trip))
    }

    pub fn shape(&self) -> &LatticeShape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.shape.total_dim()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Maximum l¹ torus distance between coupled sites.
    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim()).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k], self.vals[k]))
        })
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let n = self.dim();
        let mut m = Array2::zeros((n, n));
        for (r, c, v) in self.triplets() {
            m[[r, c]] += v;
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        let trip = self.triplets().map(|(r, c, v)| (c, r, v.conj())).collect();
        Self::from_triplets(self.shape, trip)
    }

    pub fn scale(&self, z: C64) -> Self {
        let trip = self.triplets().map(|(r, c, v)| (r, c, z * v)).collect();
        Self::from_triplets(self.shape, trip)
    }

    /// Entry-wise sum; shapes must match.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch);
        }
        let trip = self.triplets().chain(other.triplets()).collect();
        Ok(Self::from_triplets(self.shape, trip))
    }

    /// `‖U*U − I‖_F` computed sparsely; works at any size.
    pub fn unitarity_defect(&self) -> f64 {
        let gram = compose(&self.adjoint(), self).expect("same shape");
        let mut s = 0.0;
        let mut diag_seen = vec![false; self.dim()];
        for (r, c, v) in gram.triplets() {
            if r == c {
                diag_seen[r] = true;
                s += (v - C64::new(1.0, 0.0)).norm_sqr();
            } else {
                s += v.norm_sqr();
            }
        }
        for seen in diag_seen {
            if !seen {
                s += 1.0;
            }
        }
        s.sqrt()
    }

    /// Writes the operator as coordinate-list CSV with a shape-metadata
    /// header. Entries appear sorted by `(row, col)`.
    pub fn write_coordinate_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "# uninet coo v1 d={} l={} coin_dim={} nnz={} bandwidth={}",
            self.shape.d(),
            self.shape.l(),
            self.shape.coin_dim(),
            self.nnz(),
            self.bandwidth
        )?;
        writeln!(w, "row,col,re,im")?;
        for (r, c, v) in self.triplets() {
            writeln!(w, "{},{},{},{}", r, c, v.re, v.im)?;
        }
        Ok(())
    }
}

fn compute_bandwidth(shape: &LatticeShape, row_ptr: &[usize], cols: &[usize]) -> usize {
    let mut bw = 0;
    for r in 0..shape.total_dim() {
        let (_, rs) = shape.split_index(r);
        for k in row_ptr[r]..row_ptr[r + 1] {
            let (_, cs) = shape.split_index(cols[k]);
            bw = bw.max(shape.torus_site_distance(rs, cs));
        }
    }
    bw
}

/// State on the truncation, indexed `(coin, site)` with the crate's linear
/// layout.
#[derive(Debug, Clone)]
pub struct StateVector {
    shape: LatticeShape,
    amp: Array1<C64>,
}

impl StateVector {
    pub fn zero(shape: LatticeShape) -> Self {
        let n = shape.total_dim();
        Self { shape, amp: Array1::zeros(n) }
    }

    pub fn basis_state(shape: LatticeShape, coin: usize, site: usize) -> Self {
        let mut v = Self::zero(shape);
        let idx = shape.linear_index(coin, site);
        v.amp[idx] = C64::new(1.0, 0.0);
        v
    }

    pub fn from_amplitudes(shape: LatticeShape, amp: Array1<C64>) -> Result<Self> {
        if amp.len() != shape.total_dim() {
            return Err(Error::DimensionMismatch { expected: shape.total_dim(), got: amp.len() });
        }
        Ok(Self { shape, amp })
    }

    pub fn random_normalized(shape: LatticeShape, rng: &mut impl Rng) -> Self {
        let amp = Array1::from_shape_fn(shape.total_dim(), |_| linalg::random_complex_normal(rng));
        let norm = amp.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        Self { shape, amp: amp / C64::new(norm, 0.0) }
    }

    pub fn shape(&self) -> &LatticeShape {
        &self.shape
    }

    pub fn amplitudes(&self) -> &Array1<C64> {
        &self.amp
    }

    pub fn norm(&self) -> f64 {
        self.amp.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Probability of each site, summed over the coin index.
    pub fn position_marginals(&self) -> Vec<f64> {
        let n_sites = self.shape.n_sites();
        let mut p = vec![0.0; n_sites];
        for c in 0..self.shape.coin_dim() {
            for s in 0..n_sites {
                p[s] += self.amp[self.shape.linear_index(c, s)].norm_sqr();
            }
        }
        p
    }
}

/// The symmetric shift `S = Σ_{j,τ} |τ⟩⟨τ| ⊗ |j+τ⟩⟨j|` with periodic wrap;
/// `j + τ` means `j + sign(τ) f_{|τ|}`.
pub fn build_shift(shape: LatticeShape) -> Result<NetworkOperator> {
    if shape.coin_dim() != 2 * shape.d() {
        return Err(Error::Config(format!(
            "shift needs coin_dim = 2d; got coin_dim = {}, d = {}",
            shape.coin_dim(),
            shape.d()
        )));
    }
    let n_sites = shape.n_sites();
    let mut trip = Vec::with_capacity(shape.total_dim());
    for c in 0..shape.coin_dim() {
        let tau = CoinIndex::from_linear(c, shape.d())?;
        for j in 0..n_sites {
            let target = shape.step_site(j, tau.axis(), tau.sign());
            trip.push((shape.linear_index(c, target), shape.linear_index(c, j), C64::new(1.0, 0.0)));
        }
    }
    Ok(NetworkOperator::from_triplets(shape, trip))
}

/// Block-diagonal coin operator `C = Σ_j C(j) ⊗ |j⟩⟨j|`.
pub fn build_coin_operator(field: &CoinField) -> Result<NetworkOperator> {
    let shape = *field.shape();
    let dc = shape.coin_dim();
    let mut trip = Vec::with_capacity(shape.n_sites() * dc * dc);
    for j in 0..shape.n_sites() {
        let block = field.block(j);
        let defect = block.unitarity_defect();
        if defect > block.tol() {
            return Err(Error::NonUnitaryBlock { site: j, defect });
        }
        for cr in 0..dc {
            for cc in 0..dc {
                let v = block.matrix()[[cr, cc]];
                if v != C64::new(0.0, 0.0) {
                    trip.push((shape.linear_index(cr, j), shape.linear_index(cc, j), v));
                }
            }
        }
    }
    Ok(NetworkOperator::from_triplets(shape, trip))
}

/// Sparse product `a · b`.
pub fn compose(a: &NetworkOperator, b: &NetworkOperator) -> Result<NetworkOperator> {
    if a.shape != b.shape {
        return Err(Error::ShapeMismatch);
    }
    let n = a.dim();
    let mut trip = Vec::new();
    let mut scratch: Vec<(usize, C64)> = Vec::new();
    for r in 0..n {
        scratch.clear();
        for ka in a.row_ptr[r]..a.row_ptr[r + 1] {
            let mid = a.cols[ka];
            let av = a.vals[ka];
            for kb in b.row_ptr[mid]..b.row_ptr[mid + 1] {
                scratch.push((b.cols[kb], av * b.vals[kb]));
            }
        }
        scratch.sort_by_key(|&(c, _)| c);
        let mut k = 0;
        while k < scratch.len() {
            let c = scratch[k].0;
            let mut v = scratch[k].1;
            let mut k2 = k + 1;
            while k2 < scratch.len() && scratch[k2].0 == c {
                v += scratch[k2].1;
                k2 += 1;
            }
            if v != C64::new(0.0, 0.0) {
                trip.push((r, c, v));
            }
            k = k2;
        }
    }
    Ok(NetworkOperator::from_triplets(a.shape, trip))
}

/// Sparse matrix-vector product `op · v`.
pub fn apply(op: &NetworkOperator, v: &StateVector) -> Result<StateVector> {
    if op.shape != v.shape {
        return Err(Error::ShapeMismatch);
    }
    let n = op.dim();
    let mut out = Array1::zeros(n);
    for r in 0..n {
        let mut acc = C64::new(0.0, 0.0);
        for k in op.row_ptr[r]..op.row_ptr[r + 1] {
            acc += op.vals[k] * v.amp[op.cols[k]];
        }
        out[r] = acc;
    }
    Ok(StateVector { shape: op.shape, amp: out })
}

/// Largest torus distance between sites coupled by `op^n`.
///
/// Fails when `n · bandwidth` reaches around the torus, where coupling
/// distances become ambiguous.
pub fn check_locality(op: &NetworkOperator, n: usize) -> Result<usize> {
    if n == 0 {
        return Err(Error::Config("power must be at least 1".into()));
    }
    let reach = n * op.bandwidth.max(1);
    if 2 * reach >= op.shape.l() {
        return Err(Error::WrapAmbiguity { n, l: op.shape.l() });
    }
    let mut power = op.clone();
    for _ in 1..n {
        power = compose(&power, op)?;
    }
    Ok(power.bandwidth())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    pub(crate) fn random_coin_field(shape: LatticeShape, seed: u64) -> CoinField {
        let mut rng = StdRng::seed_from_u64(seed);
        let blocks = (0..shape.n_sites())
            .map(|_| UnitaryMatrix::new(linalg::haar_unitary(shape.coin_dim(), &mut rng)).unwrap())
            .collect();
        CoinField::from_blocks(shape, blocks).unwrap()
    }

    #[test]
    fn shift_moves_and_wraps() {
        let shape = LatticeShape::new(1, 4, 2).unwrap();
        let s = build_shift(shape).unwrap();
        // |+1 ⊗ 2⟩ → |+1 ⊗ 3⟩
        let v = StateVector::basis_state(shape, 0, 2);
        let w = apply(&s, &v).unwrap();
        assert_eq!(w.amplitudes()[shape.linear_index(0, 3)], c(1.0, 0.0));
        // |-1 ⊗ 0⟩ → |-1 ⊗ 3⟩ (wrap)
        let v = StateVector::basis_state(shape, 1, 0);
        let w = apply(&s, &v).unwrap();
        assert_eq!(w.amplitudes()[shape.linear_index(1, 3)], c(1.0, 0.0));
    }

    #[test]
    fn shift_is_a_permutation() {
        for (d, l) in [(1usize, 6usize), (2, 4), (3, 4)] {
            let shape = LatticeShape::new(d, l, 2 * d).unwrap();
            let s = build_shift(shape).unwrap();
            assert!(s.unitarity_defect() < 1e-15);
            assert_eq!(s.bandwidth(), 1);
        }
    }

    #[test]
    fn shift_needs_matching_coin_dim() {
        let shape = LatticeShape::new(2, 4, 2).unwrap();
        assert!(matches!(build_shift(shape), Err(Error::Config(_))));
    }

    #[test]
    fn shift_matches_brute_force_permutation_d2() {
        // Independent oracle: loop over all (τ, j) pairs and place 1s by
        // hand, recomputing indices from scratch.
        let d = 2;
        let l = 6usize;
        let shape = LatticeShape::new(d, l, 2 * d).unwrap();
        let n = shape.total_dim();
        let mut oracle = Array2::<C64>::zeros((n, n));
        let n_sites = l * l;
        for coin in 0..4usize {
            // coin order: +1, -1, +2, -2
            let (axis, sign) = [(0usize, 1i64), (0, -1), (1, 1), (1, -1)][coin];
            for j1 in 0..l {
                for j2 in 0..l {
                    let from = j1 * l + j2;
                    let (mut t1, mut t2) = (j1 as i64, j2 as i64);
                    if axis == 0 {
                        t1 = (t1 + sign).rem_euclid(l as i64);
                    } else {
                        t2 = (t2 + sign).rem_euclid(l as i64);
                    }
                    let to = (t1 as usize) * l + t2 as usize;
                    oracle[[coin * n_sites + to, coin * n_sites + from]] = c(1.0, 0.0);
                }
            }
        }
        let s = build_shift(shape).unwrap().to_dense();
        assert_eq!(s, oracle);
    }

    #[test]
    fn coin_operator_identity_and_blocks() {
        let shape = LatticeShape::new(1, 8, 2).unwrap();
        let id_field = CoinField::homogeneous(shape, UnitaryMatrix::identity(2)).unwrap();
        let cop = build_coin_operator(&id_field).unwrap();
        let dense = cop.to_dense();
        assert_eq!(dense, Array2::eye(16));
        assert_eq!(cop.bandwidth(), 0);

        // a 2x2 block lands on the right diagonal slots
        let h = 1.0 / 2.0f64.sqrt();
        let had =
            UnitaryMatrix::new(ndarray::array![[c(h, 0.0), c(-h, 0.0)], [c(h, 0.0), c(h, 0.0)]])
                .unwrap();
        let field = CoinField::homogeneous(shape, had.clone()).unwrap();
        let cop = build_coin_operator(&field).unwrap().to_dense();
        for j in 0..8 {
            for a in 0..2 {
                for b in 0..2 {
                    assert_eq!(cop[[a * 8 + j, b * 8 + j]], had.matrix()[[a, b]]);
                }
            }
        }
    }

    #[test]
    fn coin_field_rejects_non_unitary_block() {
        let shape = LatticeShape::new(1, 4, 2).unwrap();
        let mut blocks = vec![UnitaryMatrix::identity(2); 4];
        blocks[2] = UnitaryMatrix {
            m: Array2::eye(2) * c(1.1, 0.0),
            tol: UNITARITY_TOL,
            reorthonormalized: false,
        };
        match CoinField::from_blocks(shape, blocks) {
            Err(Error::NonUnitaryBlock { site, .. }) => assert_eq!(site, 2),
            other => panic!("expected NonUnitaryBlock, got {other:?}"),
        }
    }

    #[test]
    fn random_coin_operator_is_unitary() {
        let shape = LatticeShape::new(1, 8, 2).unwrap();
        let field = random_coin_field(shape, 11);
        let cop = build_coin_operator(&field).unwrap();
        let dense = cop.to_dense();
        assert!(linalg::unitarity_defect(&dense.view()) < 1e-12);
    }

    #[test]
    fn compose_against_dense_oracle() {
        let shape = LatticeShape::new(1, 8, 2).unwrap();
        let s = build_shift(shape).unwrap();
        let cop = build_coin_operator(&random_coin_field(shape, 5)).unwrap();
        let u = compose(&s, &cop).unwrap();
        let dense = s.to_dense().dot(&cop.to_dense());
        let diff = u.to_dense() - &dense;
        assert!(diff.iter().all(|z| z.norm() < 1e-14));
        assert!(u.bandwidth() <= s.bandwidth() + cop.bandwidth());

        let id = NetworkOperator::identity(shape);
        let si = compose(&s, &id).unwrap();
        assert_eq!(si.to_dense(), s.to_dense());
        let ss = compose(&s, &s.adjoint()).unwrap();
        assert_eq!(ss.to_dense(), Array2::eye(16));
    }

    #[test]
    fn apply_matches_dense_matvec() {
        let shape = LatticeShape::new(1, 16, 2).unwrap();
        let s = build_shift(shape).unwrap();
        let cop = build_coin_operator(&random_coin_field(shape, 9)).unwrap();
        let u = compose(&s, &cop).unwrap();
        let mut rng = StdRng::seed_from_u64(21);
        let v = StateVector::random_normalized(shape, &mut rng);
        let w = apply(&u, &v).unwrap();
        let dense = u.to_dense();
        let expect = dense.dot(v.amplitudes());
        for i in 0..shape.total_dim() {
            assert!((w.amplitudes()[i] - expect[i]).norm() < 1e-13);
        }
        assert!((w.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn norm_preserved_on_random_states() {
        let shape = LatticeShape::new(1, 16, 2).unwrap();
        let u = compose(
            &build_shift(shape).unwrap(),
            &build_coin_operator(&random_coin_field(shape, 2)).unwrap(),
        )
        .unwrap();
        let mut rng = StdRng::seed_from_u64(1);
        for _ in 0..100 {
            let v = StateVector::random_normalized(shape, &mut rng);
            let w = apply(&u, &v).unwrap();
            assert!((w.norm() - v.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn locality_of_shift_powers() {
        let shape = LatticeShape::new(1, 32, 2).unwrap();
        let s = build_shift(shape).unwrap();
        assert_eq!(check_locality(&s, 1).unwrap(), 1);
        assert_eq!(check_locality(&s, 5).unwrap(), 5);
        let id = NetworkOperator::identity(shape);
        assert_eq!(check_locality(&id, 7).unwrap(), 0);
        assert!(matches!(check_locality(&s, 16), Err(Error::WrapAmbiguity { .. })));
    }

    #[test]
    fn centered_representative() {
        let shape = LatticeShape::new(1, 8, 1).unwrap();
        assert_eq!(shape.centered_rep(0), 0);
        assert_eq!(shape.centered_rep(4), 4);
        assert_eq!(shape.centered_rep(5), -3);
        assert_eq!(shape.centered_rep(7), -1);
    }

    #[test]
    fn csv_export_is_deterministic() {
        let shape = LatticeShape::new(1, 4, 2).unwrap();
        let s = build_shift(shape).unwrap();
        let mut buf1 = Vec::new();
        let mut buf2 = Vec::new();
        s.write_coordinate_csv(&mut buf1).unwrap();
        s.write_coordinate_csv(&mut buf2).unwrap();
        assert_eq!(buf1, buf2);
        let text = String::from_utf8(buf1).unwrap();
        assert!(text.starts_with("# uninet coo v1 d=1 l=4 coin_dim=2 nnz=8 bandwidth=1"));
        assert!(text.lines().nth(1) == Some("row,col,re,im"));
    }

    #[test]
    fn lenient_constructor_records_repair() {
        let clean = UnitaryMatrix::new_lenient(Array2::eye(3)).unwrap();
        assert!(!clean.was_reorthonormalized());
        let drifted = Array2::eye(3) * c(1.0 + 3e-9, 0.0);
        let fixed = UnitaryMatrix::new_lenient(drifted).unwrap();
        assert!(fixed.was_reorthonormalized());
        assert!(fixed.unitarity_defect() < 1e-13);
    }
}
