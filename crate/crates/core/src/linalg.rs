//! Dense complex linear algebra helpers.
//!
//! Unitary (normal) matrices are eigendecomposed through the complex Schur
//! factorization `U = Z T Z*` (LAPACK `zgees`): for a normal input the
//! triangular factor is diagonal to rounding, so the Schur basis is an
//! orthonormal eigenbasis even across degenerate clusters, which plain
//! `zgeev` does not guarantee.

use ndarray::{Array1, Array2, ArrayView2};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const TAU: f64 = 2.0 * std::f64::consts::PI;

/// Largest dimension handled by the dense 2-norm / eigensolvers.
pub const DENSE_LIMIT: usize = 4096;

/// Argument of `z` folded into `[0, 2π)`.
pub fn phase_of(z: C64) -> f64 {
    let mut p = z.arg();
    if p < 0.0 {
        p += TAU;
    }
    if p >= TAU {
        p = 0.0;
    }
    p
}

/// Distance between two phases on the circle, in `[0, π]`.
pub fn circ_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Signed difference `a - b` wrapped into `(-π, π]`.
pub fn circ_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > std::f64::consts::PI {
        d - TAU
    } else {
        d
    }
}

pub fn fro_norm(a: &ArrayView2<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `‖M*M − I‖_F`, the unitarity defect.
pub fn unitarity_defect(m: &ArrayView2<C64>) -> f64 {
    let gram = conj_t(m).dot(m);
    let n = gram.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            s += (gram[[i, j]] - target).norm_sqr();
        }
    }
    s.sqrt()
}

pub fn conj_t(a: &ArrayView2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

/// Which norm a residual was measured in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    Operator2,
    Frobenius,
}

impl NormKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            NormKind::Operator2 => "op2",
            NormKind::Frobenius => "fro",
        }
    }
}

/// Operator 2-norm through the largest singular value.
pub fn op2_norm(a: &ArrayView2<C64>) -> Result<f64> {
    use ndarray_linalg::{JobSvd, SVDDC};
    let (_, s, _) = a
        .to_owned()
        .svddc(JobSvd::None)
        .map_err(|_| Error::Lapack { routine: "zgesdd", info: -1 })?;
    Ok(s.iter().cloned().fold(0.0, f64::max))
}

/// Residual norm dispatch: dense 2-norm up to [`DENSE_LIMIT`], Frobenius
/// above, reporting which one was used.
pub fn residual_norm(a: &ArrayView2<C64>) -> Result<(f64, NormKind)> {
    if a.nrows() <= DENSE_LIMIT {
        Ok((op2_norm(a)?, NormKind::Operator2))
    } else {
        Ok((fro_norm(a), NormKind::Frobenius))
    }
}

/// Complex Schur decomposition `A = Z T Z*` via LAPACK `zgees`.
///
/// Returns the eigenvalues `diag(T)`, the unitary `Z` (columns are Schur
/// vectors) and the Frobenius norm of the strict upper triangle of `T`,
/// which measures how far the input was from normal.
pub fn schur(a: &ArrayView2<C64>) -> Result<(Vec<C64>, Array2<C64>, f64)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch { expected: n, got: a.ncols() });
    }
    if n == 0 {
        return Ok((Vec::new(), Array2::zeros((0, 0)), 0.0));
    }
    // column-major copy for LAPACK
    let mut t: Vec<C64> = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            t.push(a[[i, j]]);
        }
    }
    let mut w = vec![C64::new(0.0, 0.0); n];
    let mut vs = vec![C64::new(0.0, 0.0); n * n];
    let mut rwork = vec![0.0f64; n];
    let mut bwork = vec![0i32; n];
    let mut sdim = 0i32;
    let mut info = 0i32;
    let n_i = n as i32;
    let jobvs = b'V' as std::ffi::c_char;
    let sort = b'N' as std::ffi::c_char;

    unsafe {
        // workspace query
        let mut work_query = [C64::new(0.0, 0.0)];
        let lwork_query = -1i32;
        lapack_sys::zgees_(
            &jobvs,
            &sort,
            None,
            &n_i,
            t.as_mut_ptr().cast(),
            &n_i,
            &mut sdim,
            w.as_mut_ptr().cast(),
            vs.as_mut_ptr().cast(),
            &n_i,
            work_query.as_mut_ptr().cast(),
            &lwork_query,
            rwork.as_mut_ptr(),
            bwork.as_mut_ptr(),
            &mut info,
        );
        if info != 0 {
            return Err(Error::Lapack { routine: "zgees", info });
        }
        let lwork = work_query[0].re as i32;
        let mut work = vec![C64::new(0.0, 0.0); lwork.max(1) as usize];
        lapack_sys::zgees_(
            &jobvs,
            &sort,
            None,
            &n_i,
            t.as_mut_ptr().cast(),
            &n_i,
            &mut sdim,
            w.as_mut_ptr().cast(),
            vs.as_mut_ptr().cast(),
            &n_i,
            work.as_mut_ptr().cast(),
            &lwork,
            rwork.as_mut_ptr(),
            bwork.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "zgees", info });
    }

    let mut z = Array2::zeros((n, n));
    for j in 0..n {
        for i in 0..n {
            z[[i, j]] = vs[j * n + i];
        }
    }
    let mut offdiag = 0.0;
    for j in 0..n {
        for i in 0..j {
            offdiag += t[j * n + i].norm_sqr();
        }
    }
    Ok((w, z, offdiag.sqrt()))
}

/// Eigenphases and an orthonormal eigenbasis of a unitary matrix, sorted by
/// phase in `[0, 2π)`.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub phases: Vec<f64>,
    /// Column `k` is the eigenvector for `phases[k]`.
    pub vectors: Array2<C64>,
    /// Frobenius norm of the strict upper triangle of the Schur factor;
    /// small iff the input was numerically normal.
    pub normality_defect: f64,
}

pub fn unitary_eigenpairs(u: &ArrayView2<C64>) -> Result<EigenPairs> {
    let (w, z, offdiag) = schur(u)?;
    let n = w.len();
    for ev in &w {
        if (ev.norm() - 1.0).abs() > 1e-8 {
            return Err(Error::Validation(format!(
                "eigenvalue modulus {:.6} deviates from the unit circle; input is not unitary",
                ev.norm()
            )));
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let phases_raw: Vec<f64> = w.iter().map(|&z| phase_of(z)).collect();
    order.sort_by(|&a, &b| {
        phases_raw[a].partial_cmp(&phases_raw[b]).unwrap().then(a.cmp(&b))
    });
    let phases: Vec<f64> = order.iter().map(|&k| phases_raw[k]).collect();
    let mut vectors = Array2::zeros((n, n));
    for (new_col, &old_col) in order.iter().enumerate() {
        for i in 0..n {
            vectors[[i, new_col]] = z[[i, old_col]];
        }
    }
    Ok(EigenPairs { phases, vectors, normality_defect: offdiag })
}

/// Maximum circular mismatch between two equally-sized phase multisets.
///
/// Both sides are sorted; because a phase just below `2π` may legitimately
/// pair with one just above `0`, cyclic pairings shifted by up to two slots
/// are tried and the best alignment wins.
pub fn multiset_phase_distance(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "phase multisets must have equal size");
    let n = a.len();
    if n == 0 {
        return 0.0;
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut best = f64::INFINITY;
    for shift in -2i64..=2 {
        let mut worst: f64 = 0.0;
        for k in 0..n {
            let j = (k as i64 + shift).rem_euclid(n as i64) as usize;
            worst = worst.max(circ_dist(sa[k], sb[j]));
        }
        best = best.min(worst);
    }
    best
}

/// The unitary grid-to-lattice map `Φ` with entries
/// `Φ[j, m] = exp(-i 2π j m / n) / √n`.
///
/// Under `Φ`, multiplication by `exp(i x)` on the grid side becomes the
/// one-step shift `|j⟩ → |j+1⟩` on the lattice side, matching the Fourier
/// convention used throughout the crate.
pub fn dft_matrix(n: usize) -> Array2<C64> {
    let scale = 1.0 / (n as f64).sqrt();
    Array2::from_shape_fn((n, n), |(j, m)| {
        let angle = -TAU * (j as f64) * (m as f64) / (n as f64);
        C64::from_polar(scale, angle)
    })
}

pub fn kron(a: &ArrayView2<C64>, b: &ArrayView2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = aij * b[[k, l]];
                }
            }
        }
    }
    out
}

fn standard_normal(rng: &mut impl Rng) -> f64 {
    // Box-Muller; rejects the measure-zero u = 0 draw.
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            let v: f64 = rng.random();
            return (-2.0 * u.ln()).sqrt() * (TAU / 2.0 * 2.0 * v).cos();
        }
    }
}

pub fn random_complex_normal(rng: &mut impl Rng) -> C64 {
    C64::new(standard_normal(rng), standard_normal(rng))
}

/// Haar-distributed random unitary: QR of a complex Ginibre matrix with the
/// R-diagonal phases absorbed into Q.
pub fn haar_unitary(n: usize, rng: &mut impl Rng) -> Array2<C64> {
    use ndarray_linalg::QR;
    let g = Array2::from_shape_fn((n, n), |_| random_complex_normal(rng));
    let (q, r) = g.qr().expect("qr of a Ginibre matrix");
    let mut out = q;
    for j in 0..n {
        let d = r[[j, j]];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            out[[i, j]] *= ph;
        }
    }
    out
}

/// Eigenvalues of a Hermitian matrix (ascending) with eigenvectors.
pub fn hermitian_eigenpairs(a: &ArrayView2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    use ndarray_linalg::{Eigh, UPLO};
    a.to_owned()
        .eigh(UPLO::Lower)
        .map_err(|_| Error::Lapack { routine: "zheev", info: -1 })
}
