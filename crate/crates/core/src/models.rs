//! Builders turning parameter families into [`NetworkOperator`]s:
//! symmetric quantum walks on `Z^d`, BB matrices, CMV matrices and the
//! Chalker-Coddington model in its scalar and coined forms.

use ndarray::{array, Array2};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::lattice::{
    build_coin_operator, build_shift, compose, CoinField, LatticeShape, NetworkOperator,
    UnitaryMatrix,
};
use crate::linalg::{self, C64, TAU};

const PI: f64 = std::f64::consts::PI;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// One-dimensional coin `C = e^{-iη} [[α, -β̄], [β, ᾱ]]` with
/// `|α|² + |β|² = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coin1d {
    pub alpha: C64,
    pub beta: C64,
    pub eta: f64,
}

impl Coin1d {
    pub fn new(alpha: C64, beta: C64, eta: f64) -> Result<Self> {
        let s = alpha.norm_sqr() + beta.norm_sqr();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!(
                "coin parameters violate |alpha|^2 + |beta|^2 = 1 (got {s:.12})"
            )));
        }
        Ok(Self { alpha, beta, eta })
    }

    pub fn matrix(&self) -> UnitaryMatrix {
        let e = C64::from_polar(1.0, -self.eta);
        let m = array![
            [e * self.alpha, -e * self.beta.conj()],
            [e * self.beta, e * self.alpha.conj()],
        ];
        UnitaryMatrix::new_lenient(m).expect("coin matrix is unitary by construction")
    }

    /// The balanced real coin `(1/√2) [[1, -1], [1, 1]]` (α = β = 1/√2,
    /// η = 0). Its walk has bands `[π/4, 3π/4] ∪ [5π/4, 7π/4]`.
    pub fn hadamard() -> Self {
        let h = 1.0 / 2.0f64.sqrt();
        Self { alpha: c(h, 0.0), beta: c(h, 0.0), eta: 0.0 }
    }

    pub fn identity() -> Self {
        Self { alpha: c(1.0, 0.0), beta: c(0.0, 0.0), eta: 0.0 }
    }

    /// `|α| = 0` coin; the walk is pure point with spectrum `{±i}`.
    pub fn antidiagonal() -> Self {
        Self { alpha: c(0.0, 0.0), beta: c(1.0, 0.0), eta: 0.0 }
    }

    /// Recovers `(α, β, η)` from any 2×2 unitary (the parametrization is
    /// onto `U(2)`); the branch is fixed by `η ∈ (-π/2, π/2]`.
    pub fn from_matrix(m: &UnitaryMatrix) -> Result<Self> {
        if m.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: m.dim() });
        }
        let u = m.matrix();
        let det = u[[0, 0]] * u[[1, 1]] - u[[0, 1]] * u[[1, 0]];
        let mut eta = -det.arg() / 2.0;
        if eta <= -PI / 2.0 {
            eta += PI;
        } else if eta > PI / 2.0 {
            eta -= PI;
        }
        let mut best: Option<Coin1d> = None;
        let mut best_err = f64::INFINITY;
        for branch in [eta, eta + PI] {
            let ph = C64::from_polar(1.0, branch);
            let coin = Coin1d { alpha: ph * u[[0, 0]], beta: ph * u[[1, 0]], eta: branch };
            let rebuilt = coin.matrix();
            let errv =
                (rebuilt.matrix() - u).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if errv < best_err {
                best_err = errv;
                best = Some(coin);
            }
        }
        let coin = best.ok_or_else(|| Error::Validation("degenerate coin matrix".into()))?;
        if best_err > 1e-9 {
            return Err(Error::Validation(format!(
                "matrix is not of coin form (residual {best_err:.3e})"
            )));
        }
        Ok(coin)
    }
}

/// Homogeneous coins addressable by name in configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NamedCoin {
    Hadamard,
    Identity,
    Antidiagonal,
}

impl NamedCoin {
    pub fn coin(&self) -> Coin1d {
        match self {
            NamedCoin::Hadamard => Coin1d::hadamard(),
            NamedCoin::Identity => Coin1d::identity(),
            NamedCoin::Antidiagonal => Coin1d::antidiagonal(),
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "hadamard" => Ok(NamedCoin::Hadamard),
            "identity" => Ok(NamedCoin::Identity),
            "antidiagonal" => Ok(NamedCoin::Antidiagonal),
            other => Err(Error::Config(format!("unknown named coin '{other}'"))),
        }
    }
}

/// Parameters of a symmetric quantum walk: a coin field with `d' = 2d`
/// blocks.
#[derive(Debug, Clone)]
pub struct QwParams {
    field: CoinField,
}

impl QwParams {
    pub fn new(field: CoinField) -> Result<Self> {
        let shape = field.shape();
        if shape.coin_dim() != 2 * shape.d() {
            return Err(Error::Config(format!(
                "quantum walk needs coin_dim = 2d, got {} for d = {}",
                shape.coin_dim(),
                shape.d()
            )));
        }
        Ok(Self { field })
    }

    pub fn homogeneous(shape: LatticeShape, coin: UnitaryMatrix) -> Result<Self> {
        Self::new(CoinField::homogeneous(shape, coin)?)
    }

    pub fn from_coins_1d(l: usize, coins: &[Coin1d]) -> Result<Self> {
        let shape = LatticeShape::new(1, l, 2)?;
        if coins.len() != l {
            return Err(Error::MissingSite { site: coins.len().min(l) });
        }
        let blocks = coins.iter().map(|cn| cn.matrix()).collect();
        Self::new(CoinField::from_blocks(shape, blocks)?)
    }

    pub fn field(&self) -> &CoinField {
        &self.field
    }

    pub fn shape(&self) -> &LatticeShape {
        self.field.shape()
    }
}

/// `U = S · C`: shift after coin.
pub fn build_qw(params: &QwParams) -> Result<NetworkOperator> {
    let shape = *params.shape();
    let s = build_shift(shape)?;
    let cop = build_coin_operator(params.field())?;
    compose(&s, &cop)
}

/// Parameters `(r, t, θ, ν, γ)` of a 2×2 scattering matrix
/// `S = e^{-iθ} [[r e^{-iν}, i t e^{iγ}], [i t e^{-iγ}, r e^{iν}]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringParams {
    pub r: f64,
    pub t: f64,
    pub theta: f64,
    pub nu: f64,
    pub gamma: f64,
}

impl ScatteringParams {
    pub fn new(r: f64, t: f64, theta: f64, nu: f64, gamma: f64) -> Result<Self> {
        if !(0.0..=1.0 + 1e-12).contains(&r) || !(0.0..=1.0 + 1e-12).contains(&t) {
            return Err(Error::Validation(format!("r = {r}, t = {t} must lie in [0, 1]")));
        }
        let s = r * r + t * t;
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("r^2 + t^2 = {s:.12} must equal 1")));
        }
        Ok(Self { r, t, theta, nu, gamma })
    }

    pub fn identity() -> Self {
        Self { r: 1.0, t: 0.0, theta: 0.0, nu: 0.0, gamma: 0.0 }
    }

    pub fn matrix(&self) -> Array2<C64> {
        let e = C64::from_polar(1.0, -self.theta);
        array![
            [
                e * C64::from_polar(self.r, -self.nu),
                e * c(0.0, 1.0) * C64::from_polar(self.t, self.gamma)
            ],
            [
                e * c(0.0, 1.0) * C64::from_polar(self.t, -self.gamma),
                e * C64::from_polar(self.r, self.nu)
            ],
        ]
    }

    /// Recovers parameters from a 2×2 unitary; the global-phase branch is
    /// fixed by `θ ∈ (-π/2, π/2]`.
    pub fn from_matrix(s: &Array2<C64>) -> Result<Self> {
        if s.nrows() != 2 || s.ncols() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: s.nrows() });
        }
        let defect = linalg::unitarity_defect(&s.view());
        if defect > 1e-10 {
            return Err(Error::Validation(format!(
                "scattering matrix is not unitary (defect {defect:.3e})"
            )));
        }
        let det = s[[0, 0]] * s[[1, 1]] - s[[0, 1]] * s[[1, 0]];
        // det = e^{-2iθ}
        let mut theta = -det.arg() / 2.0;
        if theta <= -PI / 2.0 {
            theta += PI;
        } else if theta > PI / 2.0 {
            theta -= PI;
        }
        let mut best: Option<ScatteringParams> = None;
        let mut best_err = f64::INFINITY;
        for branch in [theta, theta + PI] {
            let e = C64::from_polar(1.0, branch);
            let s00 = e * s[[0, 0]];
            let s01 = e * s[[0, 1]];
            let r = s00.norm().min(1.0);
            let t = s01.norm().min(1.0);
            let nu = if r > 1e-14 { -s00.arg() } else { 0.0 };
            let gamma = if t > 1e-14 { s01.arg() - PI / 2.0 } else { 0.0 };
            if let Ok(p) = ScatteringParams::new(r, t, branch, nu, gamma) {
                let rebuilt = p.matrix();
                let err = (&rebuilt - s).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if err < best_err {
                    best_err = err;
                    best = Some(p);
                }
            }
        }
        let p = best.ok_or_else(|| Error::Validation("could not parametrize matrix".into()))?;
        if best_err > 1e-9 {
            return Err(Error::Validation(format!(
                "matrix is not of scattering form (residual {best_err:.3e})"
            )));
        }
        Ok(p)
    }
}

/// Scattering matrices of a BB operator, indexed `k mod L` with `L` even.
#[derive(Debug, Clone)]
pub struct BbParams {
    blocks: Vec<ScatteringParams>,
}

impl BbParams {
    pub fn new(blocks: Vec<ScatteringParams>) -> Result<Self> {
        if blocks.len() < 4 || !blocks.len().is_multiple_of(2) {
            return Err(Error::Config(format!(
                "BB needs an even number >= 4 of scattering matrices, got {}",
                blocks.len()
            )));
        }
        for (k, b) in blocks.iter().enumerate() {
            let s = b.r * b.r + b.t * b.t;
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::Validation(format!(
                    "scattering matrix {k}: r^2 + t^2 = {s:.12} must equal 1"
                )));
            }
        }
        Ok(Self { blocks })
    }

    pub fn uniform(l: usize, p: ScatteringParams) -> Result<Self> {
        Self::new(vec![p; l])
    }

    pub fn random(l: usize, seed: u64) -> Result<Self> {
        let mut rng = StdRng::seed_from_u64(seed);
        let blocks = (0..l)
            .map(|_| {
                let w: f64 = rng.random::<f64>() * PI / 2.0;
                ScatteringParams {
                    r: w.cos(),
                    t: w.sin(),
                    theta: rng.random::<f64>() * TAU - PI,
                    nu: rng.random::<f64>() * TAU - PI,
                    gamma: rng.random::<f64>() * TAU - PI,
                }
            })
            .collect();
        Self::new(blocks)
    }

    pub fn l(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, k: usize) -> &ScatteringParams {
        &self.blocks[k % self.blocks.len()]
    }

    pub fn blocks(&self) -> &[ScatteringParams] {
        &self.blocks
    }

    /// Same parameters with `γ ≡ 0`.
    pub fn without_gamma(&self) -> Self {
        let blocks =
            self.blocks.iter().map(|b| ScatteringParams { gamma: 0.0, ..*b }).collect();
        Self { blocks }
    }

    /// Sum of the `γ` phases mod 2π; nonzero values obstruct periodic
    /// gauging.
    pub fn gamma_holonomy(&self) -> f64 {
        let s: f64 = self.blocks.iter().map(|b| b.gamma).sum();
        s.rem_euclid(TAU)
    }
}

/// Block-diagonal factor with 2×2 blocks at site pairs `(k, k+1 mod L)` for
/// `k` ranging over evens (`parity = 0`) or odds (`parity = 1`).
fn build_pair_factor(params: &BbParams, parity: usize) -> Result<NetworkOperator> {
    let l = params.l();
    let shape = LatticeShape::new_paired(1, l, 1)?;
    let mut trip = Vec::with_capacity(2 * l);
    let mut k = parity;
    while k < l {
        let s = params.block(k).matrix();
        let a = k;
        let b = (k + 1) % l;
        trip.push((a, a, s[[0, 0]]));
        trip.push((a, b, s[[0, 1]]));
        trip.push((b, a, s[[1, 0]]));
        trip.push((b, b, s[[1, 1]]));
        k += 2;
    }
    Ok(NetworkOperator::from_triplets(shape, trip))
}

/// The two factors of `U_BB = D_o · D_e`.
pub fn build_bb_factors(params: &BbParams) -> Result<(NetworkOperator, NetworkOperator)> {
    let d_o = build_pair_factor(params, 1)?;
    let d_e = build_pair_factor(params, 0)?;
    Ok((d_o, d_e))
}

/// `U_BB = D_o · D_e` on `l²(Z/LZ)`, the five-diagonal band matrix of
/// scattering blocks.
pub fn build_bb(params: &BbParams) -> Result<NetworkOperator> {
    let (d_o, d_e) = build_bb_factors(params)?;
    compose(&d_o, &d_e)
}

/// Verblunski coefficients, one- or two-sided depending on use.
#[derive(Debug, Clone)]
pub struct VerblunskiSeq {
    pub a: Vec<C64>,
    /// Set when the orthogonalization hit a numerically singular Gram
    /// factor: the measure is supported on `a.len()` points and the last
    /// coefficient is unimodular.
    pub terminated: bool,
}

impl VerblunskiSeq {
    pub fn new(a: Vec<C64>) -> Result<Self> {
        for (k, v) in a.iter().enumerate() {
            if v.norm() > 1.0 + 1e-12 {
                return Err(Error::Validation(format!(
                    "Verblunski coefficient {k} has modulus {} > 1",
                    v.norm()
                )));
            }
        }
        Ok(Self { a, terminated: false })
    }

    pub fn constant(value: C64, l: usize) -> Result<Self> {
        Self::new(vec![value; l])
    }

    pub fn random(l: usize, modulus: f64, seed: u64) -> Result<Self> {
        let mut rng = StdRng::seed_from_u64(seed);
        let a = (0..l).map(|_| C64::from_polar(modulus, rng.random::<f64>() * TAU)).collect();
        Self::new(a)
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }
}

/// Scattering matrix of the CMV specialization: `θ = π/2`, `ν = π/2 - μ`,
/// `r = |a|`, `γ = 0` for `a = |a| e^{iμ}`.
pub fn cmv_scattering(a: C64) -> Result<ScatteringParams> {
    let r = a.norm();
    if r > 1.0 + 1e-12 {
        return Err(Error::Validation(format!("|a| = {r} exceeds 1")));
    }
    let r = r.min(1.0);
    let mu = if r > 0.0 { a.arg() } else { 0.0 };
    let t = (1.0 - r * r).max(0.0).sqrt();
    ScatteringParams::new(r, t, PI / 2.0, PI / 2.0 - mu, 0.0)
}

/// BB parameters realizing the doubly infinite CMV matrix of `seq`.
pub fn cmv_bb_params(seq: &VerblunskiSeq) -> Result<BbParams> {
    let blocks = seq.a.iter().map(|&a| cmv_scattering(a)).collect::<Result<Vec<_>>>()?;
    BbParams::new(blocks)
}

/// Doubly infinite CMV matrix on the truncation, indexed `k mod L`.
pub fn build_cmv(seq: &VerblunskiSeq) -> Result<NetworkOperator> {
    build_bb(&cmv_bb_params(seq)?)
}

/// Verblunski coefficients of the measure with trigonometric moments
/// `c[n] = ∫ z^{-n} dμ`, `n = 0..=n_max`, via the monic orthogonal
/// polynomial recursion.
///
/// Needs `c.len() >= n_max + 1` and `c[0] = 1`. A Gram factor falling
/// below `1e-12` of the leading scale terminates the recursion early with
/// the `terminated` flag set (the measure is supported on finitely many
/// points).
pub fn verblunski_from_measure(c_moments: &[C64], n_max: usize) -> Result<VerblunskiSeq> {
    if c_moments.is_empty() || (c_moments[0] - c(1.0, 0.0)).norm() > 1e-10 {
        return Err(Error::Validation("moments must start with c_0 = 1".into()));
    }
    if c_moments.len() < n_max + 1 {
        return Err(Error::Config(format!(
            "need moments up to order {n_max}, got {}",
            c_moments.len() - 1
        )));
    }
    // m_k = ∫ z^k dμ for k of either sign
    let moment = |k: i64| -> C64 {
        if k >= 0 {
            c_moments[k as usize].conj()
        } else {
            c_moments[(-k) as usize]
        }
    };
    // ⟨f, g⟩ = Σ conj(f_i) g_j m_{j-i}
    let inner = |f: &[C64], g: &[C64]| -> C64 {
        let mut s = c(0.0, 0.0);
        for (i, fi) in f.iter().enumerate() {
            for (j, gj) in g.iter().enumerate() {
                s += fi.conj() * gj * moment(j as i64 - i as i64);
            }
        }
        s
    };

    let mut phi = vec![c(1.0, 0.0)]; // monic Φ_0
    let mut norm2 = 1.0f64;
    let mut a = Vec::with_capacity(n_max);
    for _n in 0..n_max {
        let deg = phi.len() - 1;
        // z Φ_n
        let mut zphi = vec![c(0.0, 0.0); deg + 2];
        zphi[1..].copy_from_slice(&phi);
        // Φ_n* (reversed conjugate)
        let star: Vec<C64> = (0..=deg).map(|k| phi[deg - k].conj()).collect();
        let alpha_bar = inner(&star, &zphi) / norm2;
        let mut a_n = -alpha_bar; // = Φ_{n+1}(0)
        let next_norm2 = (1.0 - alpha_bar.norm_sqr()) * norm2;
        if next_norm2 < -1e-9 {
            return Err(Error::Validation(
                "moment sequence is not positive semidefinite".into(),
            ));
        }
        if next_norm2 <= 1e-12 {
            // singular Gram factor: clamp the terminal coefficient onto the
            // circle and stop
            if a_n.norm() > 0.0 {
                a_n /= a_n.norm();
            } else {
                a_n = c(1.0, 0.0);
            }
            a.push(a_n);
            return Ok(VerblunskiSeq { a, terminated: true });
        }
        // Φ_{n+1} = zΦ_n - ᾱ_n Φ_n*
        let mut next = zphi;
        for (k, s) in star.iter().enumerate() {
            next[k] -= alpha_bar * s;
        }
        phi = next;
        norm2 = next_norm2;
        a.push(a_n);
    }
    Ok(VerblunskiSeq { a, terminated: false })
}

/// Moments `⟨e_0, (U⁺)^n e_0⟩` for `n = 0..=n_powers` of the one-sided CMV
/// matrix with coefficients `seq` (boundary condition `S_{-1} = 1`).
///
/// For a non-terminated sequence the matrix is padded with zero
/// coefficients well past the light cone of `n_powers` applications, so
/// the returned moments agree with the half-infinite operator exactly.
pub fn onesided_cmv_moments(seq: &VerblunskiSeq, n_powers: usize) -> Result<Vec<C64>> {
    let dense = onesided_cmv_dense(seq, n_powers)?;
    let dim = dense.nrows();
    let mut v = ndarray::Array1::<C64>::zeros(dim);
    v[0] = c(1.0, 0.0);
    let mut out = Vec::with_capacity(n_powers + 1);
    out.push(c(1.0, 0.0));
    for _ in 0..n_powers {
        v = dense.dot(&v);
        out.push(v[0]);
    }
    Ok(out)
}

/// Dense one-sided CMV matrix large enough for `n_powers` exact moments.
pub fn onesided_cmv_dense(seq: &VerblunskiSeq, n_powers: usize) -> Result<Array2<C64>> {
    let mut coeffs = seq.a.clone();
    let dim = if seq.terminated {
        coeffs.len()
    } else {
        let target = (2 * n_powers + 8).max(coeffs.len() + 4);
        coeffs.resize(target, c(0.0, 0.0));
        target
    };
    let block = |k: usize| -> Result<Array2<C64>> { Ok(cmv_scattering(coeffs[k])?.matrix()) };
    let mut d_e = Array2::<C64>::zeros((dim, dim));
    let mut d_o = Array2::<C64>::zeros((dim, dim));
    d_o[[0, 0]] = c(1.0, 0.0); // S_{-1} = identity boundary
    let mut k = 0;
    while k < dim {
        let s = block(k)?;
        if k + 1 < dim {
            d_e[[k, k]] = s[[0, 0]];
            d_e[[k, k + 1]] = s[[0, 1]];
            d_e[[k + 1, k]] = s[[1, 0]];
            d_e[[k + 1, k + 1]] = s[[1, 1]];
        } else {
            d_e[[k, k]] = s[[0, 0]];
        }
        k += 2;
    }
    let mut k = 1;
    while k < dim {
        let s = block(k)?;
        if k + 1 < dim {
            d_o[[k, k]] = s[[0, 0]];
            d_o[[k, k + 1]] = s[[0, 1]];
            d_o[[k + 1, k]] = s[[1, 0]];
            d_o[[k + 1, k + 1]] = s[[1, 1]];
        } else {
            d_o[[k, k]] = s[[0, 0]];
        }
        k += 2;
    }
    Ok(d_o.dot(&d_e))
}

/// Chalker-Coddington parameters: mixing angle `φ ∈ [0, π/2]` and one
/// diagonal phase per site of the original `(Z/LZ)²` lattice (lexicographic
/// site order).
#[derive(Debug, Clone)]
pub struct CcParams {
    phi: f64,
    l: usize,
    d_phases: Vec<f64>,
}

impl CcParams {
    pub fn new(phi: f64, l: usize, d_phases: Vec<f64>) -> Result<Self> {
        if !(0.0..=PI / 2.0 + 1e-15).contains(&phi) {
            return Err(Error::Validation(format!("phi = {phi} outside [0, pi/2]")));
        }
        if l < 4 || !l.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "Chalker-Coddington needs an even torus side >= 4, got {l}"
            )));
        }
        if d_phases.len() != l * l {
            return Err(Error::MissingSite { site: d_phases.len().min(l * l) });
        }
        Ok(Self { phi, l, d_phases })
    }

    pub fn uniform(phi: f64, l: usize) -> Result<Self> {
        Self::new(phi, l, vec![0.0; l * l])
    }

    pub fn random(phi: f64, l: usize, seed: u64) -> Result<Self> {
        let mut rng = StdRng::seed_from_u64(seed);
        let d = (0..l * l).map(|_| rng.random::<f64>() * TAU).collect();
        Self::new(phi, l, d)
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn d_phase(&self, site: usize) -> f64 {
        self.d_phases[site]
    }
}

/// `U(φ) = D (cos φ S_↺ + i sin φ S_↻)` on `l²((Z/LZ)²)`.
///
/// The counterclockwise plaquette at `j` spans
/// `{2j, 2j+(1,0), 2j+(1,1), 2j+(0,1)}`, the clockwise one
/// `{2j, 2j-(0,1), 2j-(1,1), 2j-(1,0)}`; both 4-cycles visit the corners
/// in the listed order.
pub fn build_cc_original(params: &CcParams) -> Result<NetworkOperator> {
    let l = params.l;
    let shape = LatticeShape::new_paired(2, l, 1)?;
    let site = |x: i64, y: i64| -> usize {
        shape.site_index(&[x.rem_euclid(l as i64) as usize, y.rem_euclid(l as i64) as usize])
    };
    let cph = c(params.phi.cos(), 0.0);
    let sph = c(0.0, 1.0) * c(params.phi.sin(), 0.0);
    let mut trip = Vec::with_capacity(2 * l * l);
    for j1 in 0..(l as i64) / 2 {
        for j2 in 0..(l as i64) / 2 {
            let (x, y) = (2 * j1, 2 * j2);
            // counterclockwise cycle through the even plaquette
            let ccw = [site(x, y), site(x + 1, y), site(x + 1, y + 1), site(x, y + 1)];
            for k in 0..4 {
                trip.push((ccw[(k + 1) % 4], ccw[k], cph));
            }
            // clockwise cycle through the odd plaquette below-left of 2j
            let cw = [site(x, y), site(x, y - 1), site(x - 1, y - 1), site(x - 1, y)];
            for k in 0..4 {
                trip.push((cw[(k + 1) % 4], cw[k], sph));
            }
        }
    }
    let t = NetworkOperator::from_triplets(shape, trip);
    let d_trip = (0..shape.n_sites())
        .map(|s| (s, s, C64::from_polar(1.0, params.d_phases[s])))
        .collect();
    let d = NetworkOperator::from_triplets(shape, d_trip);
    compose(&d, &t)
}

/// The coin rotation `R` of the coined form: `R|±1⟩ = |±2⟩`,
/// `R|±2⟩ = |∓1⟩`, written in the coin order `(+1, -1, +2, -2)`.
pub fn cc_rotation() -> Array2<C64> {
    let mut r = Array2::zeros((4, 4));
    r[[2, 0]] = c(1.0, 0.0); // +1 -> +2
    r[[3, 1]] = c(1.0, 0.0); // -1 -> -2
    r[[1, 2]] = c(1.0, 0.0); // +2 -> -1
    r[[0, 3]] = c(1.0, 0.0); // -2 -> +1
    r
}

/// Diagonal coin block of the coined form at reduced site `j`: the original
/// phases at the four plaquette corners, ordered by the coin labels
/// `(+1, -1, +2, -2) ↔ (2j+(1,0), 2j+(0,1), 2j+(1,1), 2j)`.
pub fn cc_coin_block(params: &CcParams, j1: usize, j2: usize) -> Array2<C64> {
    let l = params.l;
    let orig = LatticeShape::new(2, l, 1).expect("validated");
    let corner = |dx: usize, dy: usize| -> f64 {
        params.d_phases[orig.site_index(&[(2 * j1 + dx) % l, (2 * j2 + dy) % l])]
    };
    let phases = [corner(1, 0), corner(0, 1), corner(1, 1), corner(0, 0)];
    let mut m = Array2::zeros((4, 4));
    for (k, &p) in phases.iter().enumerate() {
        m[[k, k]] = C64::from_polar(1.0, p);
    }
    m
}

/// The coined form `Ũ(φ) = D (cos φ R⊗I + i sin φ (R⁻¹⊗I) S)` on
/// `C⁴ ⊗ l²((Z/(L/2)Z)²)`.
pub fn build_cc_qw(params: &CcParams) -> Result<NetworkOperator> {
    let l = params.l;
    if !l.is_multiple_of(2) {
        return Err(Error::Config("torus side must be even".into()));
    }
    let lr = l / 2;
    let shape = LatticeShape::new(2, lr, 4)?;
    let n_sites = shape.n_sites();
    let r = cc_rotation();
    let r_inv = linalg::conj_t(&r.view());

    // cos φ (R ⊗ I)
    let cph = c(params.phi.cos(), 0.0);
    let mut trip = Vec::new();
    for cr in 0..4 {
        for cc_ in 0..4 {
            let v = r[[cr, cc_]] * cph;
            if v != c(0.0, 0.0) {
                for s in 0..n_sites {
                    trip.push((shape.linear_index(cr, s), shape.linear_index(cc_, s), v));
                }
            }
        }
    }
    let term1 = NetworkOperator::from_triplets(shape, trip);

    // i sin φ (R⁻¹ ⊗ I) S
    let s_op = build_shift(shape)?;
    let mut trip = Vec::new();
    for cr in 0..4 {
        for cc_ in 0..4 {
            let v = r_inv[[cr, cc_]];
            if v != c(0.0, 0.0) {
                for s in 0..n_sites {
                    trip.push((shape.linear_index(cr, s), shape.linear_index(cc_, s), v));
                }
            }
        }
    }
    let r_inv_op = NetworkOperator::from_triplets(shape, trip);
    let term2 = compose(&r_inv_op, &s_op)?.scale(c(0.0, 1.0) * c(params.phi.sin(), 0.0));

    let t = term1.add(&term2)?;

    let mut d_trip = Vec::with_capacity(4 * n_sites);
    for j1 in 0..lr {
        for j2 in 0..lr {
            let s = shape.site_index(&[j1, j2]);
            let block = cc_coin_block(params, j1, j2);
            for k in 0..4 {
                d_trip.push((shape.linear_index(k, s), shape.linear_index(k, s), block[[k, k]]));
            }
        }
    }
    let d = NetworkOperator::from_triplets(shape, d_trip);
    compose(&d, &t)
}

/// Haar-random coin field with a fixed seed.
pub fn random_coin_field(shape: LatticeShape, seed: u64) -> Result<CoinField> {
    let mut rng = StdRng::seed_from_u64(seed);
    let blocks = (0..shape.n_sites())
        .map(|_| UnitaryMatrix::new_lenient(linalg::haar_unitary(shape.coin_dim(), &mut rng)))
        .collect::<Result<Vec<_>>>()?;
    CoinField::from_blocks(shape, blocks)
}

/// Random 1-d coin parameters with a fixed seed.
pub fn random_coins_1d(l: usize, seed: u64) -> Vec<Coin1d> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..l)
        .map(|_| {
            let w: f64 = rng.random::<f64>() * PI / 2.0;
            let alpha = C64::from_polar(w.cos(), rng.random::<f64>() * TAU);
            let beta = C64::from_polar(w.sin(), rng.random::<f64>() * TAU);
            let eta = rng.random::<f64>() * TAU - PI;
            Coin1d { alpha, beta, eta }
        })
        .collect()
}
