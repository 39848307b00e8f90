//! Executable unitary equivalences between the models, each paired with a
//! numerical verification returning a residual norm.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::lattice::LatticeShape;
use crate::linalg::{self, C64, NormKind};
use crate::models::{
    build_bb, build_bb_factors, build_cc_original, build_cc_qw, build_qw, BbParams, CcParams,
    Coin1d, QwParams, ScatteringParams, VerblunskiSeq,
};



fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Outcome of a verified relation.
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub relation: String,
    pub dimension: usize,
    pub residual: f64,
    pub norm_kind: NormKind,
    pub tolerance: f64,
    pub pass: bool,
}

impl VerifyReport {
    pub fn new(
        relation: &str,
        dimension: usize,
        residual: f64,
        norm_kind: NormKind,
        tolerance: f64,
    ) -> Self {
        Self {
            relation: relation.to_string(),
            dimension,
            residual,
            norm_kind,
            tolerance,
            pass: residual < tolerance,
        }
    }
}

/// A permutation with phases: `e_k → phase[k] · e_{target[k]}`.
#[derive(Debug, Clone)]
pub struct MonomialMap {
    target: Vec<usize>,
    phase: Vec<C64>,
}

impl MonomialMap {
    pub fn permutation(target: Vec<usize>) -> Self {
        let phase = vec![c(1.0, 0.0); target.len()];
        Self { target, phase }
    }

    pub fn with_phases(target: Vec<usize>, phase: Vec<C64>) -> Self {
        assert_eq!(target.len(), phase.len());
        Self { target, phase }
    }

    pub fn dim(&self) -> usize {
        self.target.len()
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let n = self.dim();
        let mut m = Array2::zeros((n, n));
        for (k, (&t, &p)) in self.target.iter().zip(&self.phase).enumerate() {
            m[[t, k]] = p;
        }
        m
    }

    /// `I · U · I⁻¹` computed by index relabeling (no matrix products).
    pub fn conjugate(&self, u: &Array2<C64>) -> Array2<C64> {
        let n = self.dim();
        let mut out = Array2::zeros((n, n));
        for r in 0..n {
            for cidx in 0..n {
                let v = u[[r, cidx]];
                if v != c(0.0, 0.0) {
                    out[[self.target[r], self.target[cidx]]] =
                        self.phase[r] * v * self.phase[cidx].conj();
                }
            }
        }
        out
    }
}

/// The relabeling `I: l²((Z/LZ)²) → C⁴ ⊗ l²((Z/(L/2)Z)²)` identifying each
/// even plaquette with a coin fiber: `2j → -2`, `2j+(1,0) → +1`,
/// `2j+(1,1) → +2`, `2j+(0,1) → -1`.
pub fn cc_intertwiner(l: usize) -> Result<MonomialMap> {
    if l < 4 || !l.is_multiple_of(2) {
        return Err(Error::Config(format!("torus side must be even and >= 4, got {l}")));
    }
    let lr = l / 2;
    let orig = LatticeShape::new(2, l, 1)?;
    let reduced = LatticeShape::new(2, lr, 4)?;
    let mut target = vec![0usize; orig.total_dim()];
    for n1 in 0..l {
        for n2 in 0..l {
            let site = orig.site_index(&[n1, n2]);
            let j = [n1 / 2, n2 / 2];
            // coin order (+1, -1, +2, -2) ↔ linear (0, 1, 2, 3)
            let coin = match (n1 % 2, n2 % 2) {
                (0, 0) => 3, // -2
                (1, 0) => 0, // +1
                (1, 1) => 2, // +2
                (0, 1) => 1, // -1
                _ => unreachable!(),
            };
            target[site] = reduced.linear_index(coin, reduced.site_index(&j));
        }
    }
    Ok(MonomialMap::permutation(target))
}

/// Verifies `I · U(φ) · I⁻¹ = Ũ(φ)` for the Chalker-Coddington model.
pub fn verify_cc_equivalence(params: &CcParams) -> Result<VerifyReport> {
    let u = build_cc_original(params)?.to_dense();
    let u_qw = build_cc_qw(params)?.to_dense();
    let map = cc_intertwiner(params.l())?;
    let diff = map.conjugate(&u) - &u_qw;
    let (residual, kind) = linalg::residual_norm(&diff.view())?;
    Ok(VerifyReport::new("cc-qw", u_qw.nrows(), residual, kind, 1e-12))
}

/// BB scattering matrices of a one-dimensional walk under the interleaving
/// `|+1 ⊗ k⟩ → |2k⟩`, `|-1 ⊗ k⟩ → |2k+1⟩`: odd blocks are `i·offdiag`,
/// even blocks `-i e^{-iη_j} [[β_j, ᾱ_j], [α_j, -β̄_j]]`.
pub fn qw_to_bb(coins: &[Coin1d]) -> Result<(BbParams, MonomialMap)> {
    let l = coins.len();
    if l < 2 {
        return Err(Error::Config("need at least two sites".into()));
    }
    let mut blocks = Vec::with_capacity(2 * l);
    for coin in coins {
        let e = c(0.0, -1.0) * C64::from_polar(1.0, -coin.eta);
        let even = ndarray::array![
            [e * coin.beta, e * coin.alpha.conj()],
            [e * coin.alpha, -e * coin.beta.conj()],
        ];
        blocks.push(ScatteringParams::from_matrix(&even)?);
        // S_{2j+1} = i [[0, 1], [1, 0]] regardless of the coin
        blocks.push(ScatteringParams::new(0.0, 1.0, 0.0, 0.0, 0.0)?);
    }
    let params = BbParams::new(blocks)?;
    let qw_shape = LatticeShape::new(1, l, 2)?;
    let mut target = vec![0usize; 2 * l];
    for k in 0..l {
        target[qw_shape.linear_index(0, k)] = 2 * k;
        target[qw_shape.linear_index(1, k)] = 2 * k + 1;
    }
    Ok((params, MonomialMap::permutation(target)))
}

/// Verifies `I · U_QW · I⁻¹ = U_BB` for the extracted parameters.
pub fn verify_qw_bb(coins: &[Coin1d]) -> Result<VerifyReport> {
    let l = coins.len();
    let (bb, map) = qw_to_bb(coins)?;
    let u_qw = build_qw(&QwParams::from_coins_1d(l, coins)?)?.to_dense();
    let u_bb = build_bb(&bb)?.to_dense();
    let diff = map.conjugate(&u_qw) - &u_bb;
    let (residual, kind) = linalg::residual_norm(&diff.view())?;
    Ok(VerifyReport::new("qw-bb", 2 * l, residual, kind, 1e-12))
}

/// The gauge unitary `V(γ)` and the gauged parameters, together with the
/// holonomy `Σ γ_k mod 2π` that obstructs periodic gauging when nonzero.
#[derive(Debug, Clone)]
pub struct GaugeReport {
    /// Phases `ζ_k` with `V(γ)|k⟩ = e^{iζ_k}|k⟩`.
    pub zeta: Vec<f64>,
    pub gauged: BbParams,
    /// `Σ γ_k` folded into `(-π, π]`; zero within tolerance means
    /// wrap-consistent.
    pub holonomy: f64,
    pub wrap_consistent: bool,
    /// `‖V⁻¹ U_BB(γ) V − U_BB(0)‖`, only meaningful when wrap-consistent.
    pub residual: Option<f64>,
    pub norm_kind: NormKind,
}

/// Gauge phases `ζ_0 = 0`, `ζ_k = -Σ_{j<k} γ_j`.
pub fn gauge_phases(params: &BbParams) -> Vec<f64> {
    let l = params.l();
    let mut zeta = vec![0.0; l];
    for k in 1..l {
        zeta[k] = zeta[k - 1] - params.block(k - 1).gamma;
    }
    zeta
}

/// Removes the `γ` phases of a BB operator by the diagonal gauge `V(γ)`,
/// verifying `V⁻¹ U_BB(r,θ,ν,γ) V = U_BB(r,θ,ν,0)` on the truncation.
/// A nonzero holonomy `Σ γ_k mod 2π` is reported instead of silently
/// producing a wrong residual.
pub fn gauge_transform(params: &BbParams) -> Result<GaugeReport> {
    let l = params.l();
    let zeta = gauge_phases(params);
    let holonomy = linalg::circ_diff(params.gamma_holonomy(), 0.0);
    let wrap_consistent = holonomy.abs() < 1e-10;
    let gauged = params.without_gamma();
    if !wrap_consistent {
        return Ok(GaugeReport {
            zeta,
            gauged,
            holonomy,
            wrap_consistent,
            residual: None,
            norm_kind: NormKind::Operator2,
        });
    }
    let u_g = build_bb(params)?.to_dense();
    let u_0 = build_bb(&gauged)?.to_dense();
    let mut conj = u_g;
    for r in 0..l {
        for cc_ in 0..l {
            conj[[r, cc_]] *= C64::from_polar(1.0, zeta[cc_] - zeta[r]);
        }
    }
    let diff = conj - &u_0;
    let (residual, kind) = linalg::residual_norm(&diff.view())?;
    Ok(GaugeReport {
        zeta,
        gauged,
        holonomy,
        wrap_consistent,
        residual: Some(residual),
        norm_kind: kind,
    })
}

/// Data of the square-root relation: the walk whose square is conjugate to
/// `U_BB ⊕ U_BB`.
#[derive(Debug, Clone)]
pub struct SquareRootReport {
    pub coins: Vec<Coin1d>,
    /// The unitary `W = I_e⁻¹ + I_o⁻¹ D_o*`, mapping
    /// `l²(Z/LZ) ⊕ l²(Z/LZ)` onto the walk space.
    pub w: Array2<C64>,
    pub residual: f64,
    pub norm_kind: NormKind,
}

/// To a BB operator corresponds a walk whose square is
/// `W (U_BB ⊕ U_BB) W⁻¹`, with coins
/// `α_k = (-1)^{k+1} t_k e^{-iγ_k}`, `β_k = (-1)^k i r_k e^{-iν_k}`,
/// `η_k = θ_k` and `W = I_e⁻¹ + I_o⁻¹ D_o*`.
///
/// With these coins `P_e U² P_e` reproduces the matrix elements of
/// `U_BB = D_o D_e` exactly and `P_o U² P_o` reproduces `D_e D_o`
/// (verified to rounding in the tests); conjugating the odd part by
/// `D_o*` turns `D_e D_o` into `U_BB`.
pub fn bb_to_qw_square(params: &BbParams) -> Result<SquareRootReport> {
    let l = params.l();
    let coins: Vec<Coin1d> = (0..l)
        .map(|k| {
            let b = params.block(k);
            let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
            Coin1d::new(
                C64::from_polar(sign * b.t, -b.gamma),
                c(0.0, 1.0) * C64::from_polar(-sign * b.r, -b.nu),
                b.theta,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    // W columns: first summand through I_e⁻¹, second through I_o⁻¹ D_o*
    let qw_shape = LatticeShape::new(1, l, 2)?;
    let dim = 2 * l;
    let mut w = Array2::<C64>::zeros((dim, dim));
    for k in 0..l / 2 {
        // I_e⁻¹: |2k⟩ → |+1 ⊗ 2k⟩, |2k+1⟩ → |-1 ⊗ 2k⟩
        w[[qw_shape.linear_index(0, 2 * k), 2 * k]] = c(1.0, 0.0);
        w[[qw_shape.linear_index(1, 2 * k), 2 * k + 1]] = c(1.0, 0.0);
    }
    let (d_o, _) = build_bb_factors(params)?;
    let x = linalg::conj_t(&d_o.to_dense().view());
    // I_o⁻¹: |r odd⟩ → |+1 ⊗ r⟩, |r even⟩ → |-1 ⊗ (r-1 mod L)⟩
    for m in 0..l {
        for r in 0..l {
            let v = x[[r, m]];
            if v != c(0.0, 0.0) {
                let row = if r % 2 == 1 {
                    qw_shape.linear_index(0, r)
                } else {
                    qw_shape.linear_index(1, (r + l - 1) % l)
                };
                w[[row, l + m]] = v;
            }
        }
    }

    // residual of U² = W (U_BB ⊕ U_BB) W⁻¹
    let u_qw = build_qw(&QwParams::from_coins_1d(l, &coins)?)?.to_dense();
    let u2 = u_qw.dot(&u_qw);
    let u_bb = build_bb(params)?.to_dense();
    let mut block = Array2::<C64>::zeros((dim, dim));
    for r in 0..l {
        for cc_ in 0..l {
            block[[r, cc_]] = u_bb[[r, cc_]];
            block[[l + r, l + cc_]] = u_bb[[r, cc_]];
        }
    }
    let rhs = w.dot(&block).dot(&linalg::conj_t(&w.view()));
    let diff = u2 - rhs;
    let (residual, kind) = linalg::residual_norm(&diff.view())?;
    Ok(SquareRootReport { coins, w, residual, norm_kind: kind })
}

/// Result of representing a cyclic unitary by a one-sided CMV matrix.
#[derive(Debug, Clone)]
pub struct CyclicCmvReport {
    pub seq: VerblunskiSeq,
    /// Moments `⟨φ, Uⁿ φ⟩` for `n = 0..=n_max`.
    pub moments: Vec<C64>,
    /// Smallest/largest singular value ratio of the Krylov matrix.
    pub krylov_ratio: f64,
    /// `max_n |⟨φ, Uⁿφ⟩ − ⟨e_0, (U⁺)ⁿ e_0⟩|`.
    pub roundtrip_error: f64,
}

/// Verblunski coefficients of the spectral measure of `(u, phi)`.
///
/// `phi` must be cyclic: the Krylov matrix `[φ, Uφ, …, U^{d-1}φ]` needs
/// smallest singular value above `1e-10` of its largest.
pub fn cyclic_to_cmv(
    u: &Array2<C64>,
    phi: &Array1<C64>,
    n_max: usize,
) -> Result<CyclicCmvReport> {
    let d = u.nrows();
    if u.ncols() != d || phi.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: phi.len() });
    }
    let nrm = phi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if nrm < 1e-14 {
        return Err(Error::Validation("cyclic vector must be nonzero".into()));
    }
    let phi0 = phi.mapv(|z| z / nrm);

    // Krylov rank check
    let mut krylov = Array2::<C64>::zeros((d, d));
    let mut v = phi0.clone();
    for k in 0..d {
        for r in 0..d {
            krylov[[r, k]] = v[r];
        }
        v = u.dot(&v);
    }
    use ndarray_linalg::{JobSvd, SVDDC};
    let (_, sv, _) = krylov
        .svddc(JobSvd::None)
        .map_err(|_| Error::Lapack { routine: "zgesdd", info: -1 })?;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
    if ratio <= 1e-10 {
        return Err(Error::NotCyclic { defect: ratio });
    }

    // moments m_n = ⟨φ, Uⁿ φ⟩
    let mut moments = Vec::with_capacity(n_max + 1);
    let mut v = phi0.clone();
    for _ in 0..=n_max {
        let m: C64 = phi0.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
        moments.push(m);
        v = u.dot(&v);
    }
    // the orthogonalization consumes c_n = ∫ z^{-n} dμ = conj(m_n)
    let c_moments: Vec<C64> = moments.iter().map(|m| m.conj()).collect();
    let seq = crate::models::verblunski_from_measure(&c_moments, n_max)?;
    let recon = crate::models::onesided_cmv_moments(&seq, n_max)?;
    let roundtrip_error = moments
        .iter()
        .zip(&recon)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    Ok(CyclicCmvReport { seq, moments, krylov_ratio: ratio, roundtrip_error })
}

/// The two-sided duplication `U⁻ ⊕ U⁺` on `2n` sites indexed
/// `(-n, …, -1, 0, …, n-1)`, with `⟨-(j+1)|U⁻|-(k+1)⟩ = ⟨j|U⁺|k⟩`.
pub fn twosided_duplication(seq: &VerblunskiSeq, n_powers: usize) -> Result<Array2<C64>> {
    let u_plus = crate::models::onesided_cmv_dense(seq, n_powers)?;
    let n = u_plus.nrows();
    let mut out = Array2::<C64>::zeros((2 * n, 2 * n));
    for j in 0..n {
        for k in 0..n {
            out[[n + j, n + k]] = u_plus[[j, k]];
            // site -(j+1) has index n - 1 - j
            out[[n - 1 - j, n - 1 - k]] = u_plus[[j, k]];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{unitarity_defect, TAU};
    use crate::models::random_coins_1d;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    const PI: f64 = std::f64::consts::PI;

    #[test]
    fn cc_intertwiner_is_a_permutation() {
        let map = cc_intertwiner(8).unwrap();
        let dense = map.to_dense();
        assert_eq!(unitarity_defect(&dense.view()), 0.0);
        // exactly one 1 per row and column
        for r in 0..dense.nrows() {
            let row_sum: f64 = (0..dense.ncols()).map(|cc_| dense[[r, cc_]].norm()).sum();
            assert_eq!(row_sum, 1.0);
        }
    }

    #[test]
    fn cc_equivalence_identity_field() {
        for phi in [0.0, PI / 6.0, PI / 4.0, PI / 2.0] {
            let params = CcParams::uniform(phi, 8).unwrap();
            let report = verify_cc_equivalence(&params).unwrap();
            assert!(report.pass, "phi = {phi}: residual {}", report.residual);
            assert!(report.residual < 1e-13);
        }
    }

    #[test]
    fn cc_equivalence_random_field() {
        for seed in [1u64, 2] {
            let params = CcParams::random(PI / 3.0, 8, seed).unwrap();
            let report = verify_cc_equivalence(&params).unwrap();
            assert!(report.residual < 1e-13, "residual {}", report.residual);
        }
    }

    #[test]
    fn qw_bb_identity_coin() {
        let coins = vec![Coin1d::identity(); 8];
        let (bb, _) = qw_to_bb(&coins).unwrap();
        // even blocks: -i [[0, 1], [1, 0]]
        let expect = ndarray::array![[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, -1.0), c(0.0, 0.0)]];
        let diff = &bb.block(0).matrix() - &expect;
        assert!(diff.iter().all(|z| z.norm() < 1e-14));
        let report = verify_qw_bb(&coins).unwrap();
        assert!(report.residual < 1e-15);
    }

    #[test]
    fn qw_bb_odd_blocks_are_coin_independent() {
        let coins = random_coins_1d(8, 3);
        let (bb, _) = qw_to_bb(&coins).unwrap();
        let expect = ndarray::array![[c(0.0, 0.0), c(0.0, 1.0)], [c(0.0, 1.0), c(0.0, 0.0)]];
        for k in 0..8 {
            let diff = &bb.block(2 * k + 1).matrix() - &expect;
            assert!(diff.iter().all(|z| z.norm() < 1e-14));
        }
    }

    #[test]
    fn qw_bb_hadamard_and_random() {
        let coins = vec![Coin1d::hadamard(); 8];
        let report = verify_qw_bb(&coins).unwrap();
        assert!(report.residual < 1e-13, "residual {}", report.residual);
        for seed in [5u64, 6] {
            let coins = random_coins_1d(8, seed);
            let report = verify_qw_bb(&coins).unwrap();
            assert!(report.residual < 1e-13, "residual {}", report.residual);
        }
    }

    #[test]
    fn qw_bb_sparsity_pattern() {
        // interleaved walk: columns (2k, 2k+1) couple only rows 2k-1, 2k+2
        let coins = random_coins_1d(8, 11);
        let (bb, map) = qw_to_bb(&coins).unwrap();
        let _ = bb;
        let u_qw = build_qw(&QwParams::from_coins_1d(8, &coins).unwrap()).unwrap().to_dense();
        let conj = map.conjugate(&u_qw);
        let l2 = 16i64;
        for r in 0..16usize {
            for col in 0..16usize {
                if conj[[r, col]].norm() > 1e-14 {
                    let k = (col / 2) as i64;
                    let up = (2 * k - 1).rem_euclid(l2) as usize;
                    let down = (2 * k + 2).rem_euclid(l2) as usize;
                    assert!(
                        r == up || r == down,
                        "unexpected entry at ({r}, {col}): {}",
                        conj[[r, col]]
                    );
                }
            }
        }
    }

    #[test]
    fn gauge_constant_field() {
        let l = 8;
        let blocks: Vec<ScatteringParams> = BbParams::random(l, 17)
            .unwrap()
            .blocks()
            .iter()
            .map(|b| ScatteringParams { gamma: TAU / l as f64, ..*b })
            .collect();
        let params = BbParams::new(blocks).unwrap();
        let report = gauge_transform(&params).unwrap();
        assert!(report.wrap_consistent);
        assert!((report.zeta[1] + TAU / 8.0).abs() < 1e-14);
        assert!((report.zeta[2] + 2.0 * TAU / 8.0).abs() < 1e-14);
        assert!(report.residual.unwrap() < 1e-13);
    }

    #[test]
    fn gauge_zero_field_is_identity() {
        let params = BbParams::random(8, 23).unwrap().without_gamma();
        let report = gauge_transform(&params).unwrap();
        assert!(report.zeta.iter().all(|&z| z == 0.0));
        assert_eq!(report.residual.unwrap(), 0.0);
    }

    #[test]
    fn gauge_obstruction_reported() {
        let params = BbParams::random(8, 29).unwrap();
        let holonomy = params.gamma_holonomy();
        if linalg::circ_diff(holonomy, 0.0).abs() > 1e-6 {
            let report = gauge_transform(&params).unwrap();
            assert!(!report.wrap_consistent);
            assert!(report.residual.is_none());
            assert!((linalg::circ_diff(report.holonomy - linalg::circ_diff(holonomy, 0.0), 0.0))
                .abs()
                < 1e-12);
        }
    }

    #[test]
    fn gauge_cocycle_property() {
        // V(γ + γ̃) = V(γ) V(γ̃) for wrap-consistent pairs
        let l = 8;
        let mut rng = StdRng::seed_from_u64(31);
        for _ in 0..5 {
            let mut g1: Vec<f64> = (0..l).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let mut g2: Vec<f64> = (0..l).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let s1: f64 = g1.iter().sum();
            let s2: f64 = g2.iter().sum();
            g1[l - 1] -= s1;
            g2[l - 1] -= s2;
            let mk = |g: &[f64]| {
                BbParams::new(
                    g.iter()
                        .map(|&gamma| ScatteringParams { gamma, ..ScatteringParams::identity() })
                        .collect(),
                )
                .unwrap()
            };
            let za = gauge_phases(&mk(&g1));
            let zb = gauge_phases(&mk(&g2));
            let sum: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a + b).collect();
            let zs = gauge_phases(&mk(&sum));
            for k in 0..l {
                let lhs = C64::from_polar(1.0, zs[k]);
                let rhs = C64::from_polar(1.0, za[k]) * C64::from_polar(1.0, zb[k]);
                assert!((lhs - rhs).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn gauge_preserves_spectrum() {
        // the eigenphase multiset is gauge-invariant for wrap-consistent γ
        let l = 16;
        let mut rng = StdRng::seed_from_u64(37);
        let mut blocks = BbParams::random(l, 41).unwrap().blocks().to_vec();
        let mut total: f64 = 0.0;
        for b in blocks.iter_mut().take(l - 1) {
            b.gamma = rng.random::<f64>() * 2.0 - 1.0;
            total += b.gamma;
        }
        blocks[l - 1].gamma = -total;
        let params = BbParams::new(blocks).unwrap();
        let report = gauge_transform(&params).unwrap();
        assert!(report.wrap_consistent);
        let u_g = build_bb(&params).unwrap().to_dense();
        let u_0 = build_bb(&report.gauged).unwrap().to_dense();
        let pg = linalg::unitary_eigenpairs(&u_g.view()).unwrap().phases;
        let p0 = linalg::unitary_eigenpairs(&u_0.view()).unwrap().phases;
        assert!(linalg::multiset_phase_distance(&pg, &p0) < 1e-11);
    }

    #[test]
    fn square_root_identity_scattering() {
        let params = BbParams::uniform(8, ScatteringParams::identity()).unwrap();
        let report = bb_to_qw_square(&params).unwrap();
        assert!(report.residual < 1e-15, "residual {}", report.residual);
        assert!(unitarity_defect(&report.w.view()) < 1e-13);
    }

    #[test]
    fn square_root_random_parameters() {
        for seed in [43u64, 47] {
            let params = BbParams::random(16, seed).unwrap();
            let report = bb_to_qw_square(&params).unwrap();
            assert!(report.residual < 1e-12, "seed {seed}: residual {}", report.residual);
            assert!(unitarity_defect(&report.w.view()) < 1e-12);
        }
    }

    #[test]
    fn square_root_doubles_the_spectrum() {
        let params = BbParams::random(12, 53).unwrap();
        let report = bb_to_qw_square(&params).unwrap();
        let u_qw =
            build_qw(&QwParams::from_coins_1d(12, &report.coins).unwrap()).unwrap().to_dense();
        let u2 = u_qw.dot(&u_qw);
        let p2 = linalg::unitary_eigenpairs(&u2.view()).unwrap().phases;
        let pb = linalg::unitary_eigenpairs(&build_bb(&params).unwrap().to_dense().view())
            .unwrap()
            .phases;
        let doubled: Vec<f64> = pb.iter().flat_map(|&p| [p, p]).collect();
        assert!(linalg::multiset_phase_distance(&p2, &doubled) < 1e-11);
    }

    #[test]
    fn cyclic_two_point_spectrum() {
        // U = diag(1, -1), φ = (1, 1)/√2: moments (1 + (-1)^n)/2
        let u = ndarray::array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]];
        let phi = ndarray::array![c(1.0, 0.0), c(1.0, 0.0)];
        let report = cyclic_to_cmv(&u, &phi, 6).unwrap();
        for (n, m) in report.moments.iter().enumerate() {
            let expect = if n % 2 == 0 { 1.0 } else { 0.0 };
            assert!((m - c(expect, 0.0)).norm() < 1e-12);
        }
        assert!(report.seq.terminated);
        assert_eq!(report.seq.a.len(), 2);
        assert!(report.seq.a[0].norm() < 1e-10);
        assert!((report.seq.a[1] - c(-1.0, 0.0)).norm() < 1e-10);
        assert!(report.roundtrip_error < 1e-10);
    }

    #[test]
    fn cyclic_single_atom() {
        let u = ndarray::array![[C64::from_polar(1.0, 0.7)]];
        let phi = ndarray::array![c(1.0, 0.0)];
        let report = cyclic_to_cmv(&u, &phi, 4).unwrap();
        assert!(report.seq.terminated);
        assert_eq!(report.seq.a.len(), 1);
        assert!((report.seq.a[0].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cyclic_random_unitary_roundtrip() {
        let mut rng = StdRng::seed_from_u64(59);
        for _ in 0..3 {
            let u = linalg::haar_unitary(6, &mut rng);
            let phi = Array1::from_shape_fn(6, |_| linalg::random_complex_normal(&mut rng));
            let report = cyclic_to_cmv(&u, &phi, 6).unwrap();
            assert!(
                report.roundtrip_error < 1e-8,
                "roundtrip error {}",
                report.roundtrip_error
            );
        }
    }

    #[test]
    fn non_cyclic_vector_rejected() {
        // an eigenvector is never cyclic in dimension > 1
        let u = ndarray::array![
            [c(1.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), C64::from_polar(1.0, 1.0)]
        ];
        let phi = ndarray::array![c(1.0, 0.0), c(0.0, 0.0)];
        match cyclic_to_cmv(&u, &phi, 4) {
            Err(Error::NotCyclic { defect }) => assert!(defect < 1e-10),
            other => panic!("expected NotCyclic, got {other:?}"),
        }
    }

    #[test]
    fn twosided_duplication_mirrors_entries() {
        let seq = VerblunskiSeq::random(4, 0.4, 61).unwrap();
        let two = twosided_duplication(&seq, 4).unwrap();
        let one = crate::models::onesided_cmv_dense(&seq, 4).unwrap();
        let n = one.nrows();
        for j in 0..n {
            for k in 0..n {
                assert_eq!(two[[n + j, n + k]], one[[j, k]]);
                assert_eq!(two[[n - 1 - j, n - 1 - k]], one[[j, k]]);
            }
        }
        // off-diagonal blocks vanish
        for j in 0..n {
            for k in 0..n {
                assert_eq!(two[[j, n + k]], c(0.0, 0.0));
                assert_eq!(two[[n + j, k]], c(0.0, 0.0));
            }
        }
    }
}
