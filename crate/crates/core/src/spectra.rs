//! Truncated-operator diagnostics: dense eigendecomposition, arc-windowed
//! eigenvalue statistics, time evolution, position moments, spreading
//! exponents and spectral-measure estimation from autocorrelations.

use ndarray::Array2;

use crate::arcs::ArcSet;
use crate::error::{Error, Result};
use crate::lattice::{apply, NetworkOperator, StateVector};
use crate::linalg::{self, C64, TAU};

/// Dense diagonalization limit.
pub const DIAG_LIMIT: usize = 16384;

/// Eigenphases (sorted in `[0, 2π)`) and eigenvectors of a truncation.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub phases: Vec<f64>,
    /// Column `k` belongs to `phases[k]`.
    pub vectors: Array2<C64>,
}

impl Spectrum {
    /// `‖U − V Λ V*‖_F` for the stored eigenpairs.
    pub fn reconstruction_residual(&self, u: &Array2<C64>) -> f64 {
        let n = self.phases.len();
        let mut lam = Array2::<C64>::zeros((n, n));
        for k in 0..n {
            lam[[k, k]] = C64::from_polar(1.0, self.phases[k]);
        }
        let recon = self.vectors.dot(&lam).dot(&linalg::conj_t(&self.vectors.view()));
        linalg::fro_norm(&(u - &recon).view())
    }
}

/// Full unitary eigendecomposition of the truncation (dense, up to
/// [`DIAG_LIMIT`]).
pub fn diagonalize(op: &NetworkOperator) -> Result<Spectrum> {
    if op.dim() > DIAG_LIMIT {
        return Err(Error::Config(format!(
            "dimension {} exceeds the dense limit {DIAG_LIMIT}; for homogeneous models \
             sample the symbol on the Fourier grid instead",
            op.dim()
        )));
    }
    let dense = op.to_dense();
    let pairs = linalg::unitary_eigenpairs(&dense.view())?;
    Ok(Spectrum { phases: pairs.phases, vectors: pairs.vectors })
}

/// Per-step position statistics of a walk, with displacements measured
/// from the initial support in `(-L/2, L/2]` representatives.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Position marginals per step: `marginals[t][site]`.
    pub marginals: Vec<Vec<f64>>,
    /// Mean displacement per axis, per step.
    pub mean: Vec<Vec<f64>>,
    /// Mean squared displacement `⟨‖X‖²⟩` per step.
    pub mean_sq: Vec<f64>,
    /// Largest deviation of the state norm from its initial value.
    pub norm_drift: f64,
}

/// Runs `t_steps` applications of `op`, recording position marginals and
/// moments. Fails when the walk could wrap around the torus
/// (`t_steps · bandwidth` must stay below `L/2 - 1`).
pub fn evolve(op: &NetworkOperator, psi0: &StateVector, t_steps: usize) -> Result<Trajectory> {
    let shape = *op.shape();
    if op.bandwidth() > 0 && t_steps * op.bandwidth() + 2 > shape.l() / 2 {
        return Err(Error::WrapAmbiguity { n: t_steps, l: shape.l() });
    }
    let p0 = psi0.position_marginals();
    let center = p0
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0);
    let center_coords = shape.site_coords(center);

    let displacement = |site: usize| -> Vec<i64> {
        shape
            .site_coords(site)
            .iter()
            .zip(&center_coords)
            .map(|(&a, &c0)| shape.centered_rep((a + shape.l() - c0) % shape.l()))
            .collect()
    };

    let mut traj = Trajectory {
        marginals: Vec::with_capacity(t_steps + 1),
        mean: Vec::with_capacity(t_steps + 1),
        mean_sq: Vec::with_capacity(t_steps + 1),
        norm_drift: 0.0,
    };
    let norm0 = psi0.norm();
    let mut state = psi0.clone();
    for t in 0..=t_steps {
        if t > 0 {
            state = apply(op, &state)?;
        }
        traj.norm_drift = traj.norm_drift.max((state.norm() - norm0).abs());
        let marg = state.position_marginals();
        let mut mean = vec![0.0; shape.d()];
        let mut mean_sq = 0.0;
        for (site, &p) in marg.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let disp = displacement(site);
            for (a, &dx) in disp.iter().enumerate() {
                mean[a] += p * dx as f64;
            }
            mean_sq += p * disp.iter().map(|&dx| (dx * dx) as f64).sum::<f64>();
        }
        traj.marginals.push(marg);
        traj.mean.push(mean);
        traj.mean_sq.push(mean_sq);
    }
    Ok(traj)
}

/// Least-squares exponent `κ` of `⟨X²⟩(t) ~ t^κ` on the log-log points
/// after `burn_in`, skipping steps with zero variance. Needs at least 50
/// usable steps.
pub fn spreading_exponent(traj: &Trajectory, burn_in: usize) -> Result<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (t, &x2) in traj.mean_sq.iter().enumerate() {
        if t > burn_in && x2 > 0.0 {
            xs.push((t as f64).ln());
            ys.push(x2.ln());
        }
    }
    if xs.len() < 50 {
        return Err(Error::DegenerateData(format!(
            "only {} usable steps after burn-in {burn_in}; need at least 50",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateData("time samples are constant".into()));
    }
    Ok(sxy / sxx)
}

/// Fejér-smoothed spectral density on a phase grid.
#[derive(Debug, Clone)]
pub struct SpectralDensity {
    pub theta: Vec<f64>,
    pub density: Vec<f64>,
    /// `∫ ρ dθ` by the (exact) uniform-grid rule.
    pub total_mass: f64,
    /// Autocorrelations `⟨ψ, Uⁿ ψ⟩`, `n = 0..=n_max`.
    pub moments: Vec<C64>,
}

/// Estimates the spectral measure of `(op, psi)` from autocorrelations
/// `c_n = ⟨ψ, Uⁿψ⟩` with Fejér-kernel smoothing of order `n_max`; the
/// kernel keeps the density nonnegative. `n_max · bandwidth` must stay
/// below `L/2` (wrap guard).
pub fn spectral_measure_estimate(
    op: &NetworkOperator,
    psi: &StateVector,
    n_max: usize,
    grid_points: usize,
) -> Result<SpectralDensity> {
    let l = op.shape().l();
    if op.bandwidth() > 0 && 2 * n_max * op.bandwidth() >= l {
        return Err(Error::WrapAmbiguity { n: n_max, l });
    }
    if grid_points < 2 * n_max + 2 {
        return Err(Error::Config(format!(
            "phase grid of {grid_points} points cannot resolve a kernel of order {n_max}"
        )));
    }
    let mut moments = Vec::with_capacity(n_max + 1);
    let mut state = psi.clone();
    for n in 0..=n_max {
        if n > 0 {
            state = apply(op, &state)?;
        }
        let m: C64 = psi
            .amplitudes()
            .iter()
            .zip(state.amplitudes().iter())
            .map(|(a, b)| a.conj() * b)
            .sum();
        moments.push(m);
    }
    let nf = (n_max + 1) as f64;
    let mut theta = Vec::with_capacity(grid_points);
    let mut density = Vec::with_capacity(grid_points);
    for g in 0..grid_points {
        let th = TAU * g as f64 / grid_points as f64;
        let mut rho = moments[0].re;
        for (n, m) in moments.iter().enumerate().skip(1) {
            let w = 1.0 - n as f64 / nf;
            rho += 2.0 * w * (m * C64::from_polar(1.0, -(n as f64) * th)).re;
        }
        theta.push(th);
        density.push(rho / TAU);
    }
    let total_mass = density.iter().sum::<f64>() * TAU / grid_points as f64;
    Ok(SpectralDensity { theta, density, total_mass, moments })
}

/// Counts and nearest-neighbor gaps of eigenphases inside one arc.
#[derive(Debug, Clone)]
pub struct ArcStat {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub min_gap: Option<f64>,
    pub max_gap: Option<f64>,
    pub mean_gap: Option<f64>,
}

/// Per-arc eigenphase counts and gap statistics.
pub fn arc_eigen_statistics(phases: &[f64], arcs: &ArcSet) -> Vec<ArcStat> {
    arcs.canonical_arcs()
        .iter()
        .map(|arc| {
            let mut inside: Vec<f64> = phases
                .iter()
                .map(|p| p.rem_euclid(TAU))
                .filter(|&p| {
                    let rel = (p - arc.lo).rem_euclid(TAU);
                    rel <= arc.width() + 1e-12
                })
                .collect();
            inside.sort_by(|a, b| {
                (a - arc.lo).rem_euclid(TAU).partial_cmp(&(b - arc.lo).rem_euclid(TAU)).unwrap()
            });
            let gaps: Vec<f64> = inside.windows(2).map(|w| linalg::circ_dist(w[0], w[1])).collect();
            ArcStat {
                lo: arc.lo,
                hi: arc.hi,
                count: inside.len(),
                min_gap: gaps.iter().cloned().reduce(f64::min),
                max_gap: gaps.iter().cloned().reduce(f64::max),
                mean_gap: if gaps.is_empty() {
                    None
                } else {
                    Some(gaps.iter().sum::<f64>() / gaps.len() as f64)
                },
            }
        })
        .collect()
}
