//! Acceptance suite: one test per criterion, each pinned to a bundled
//! config under `configs/` and printing a PASS line with the measured
//! values (run with `--nocapture` to see them).

use std::path::Path;
use std::time::Instant;

use ndarray::Array1;
use rand::rngs::StdRng;
use rand::SeedableRng;

use uninet_cli::config::Config;
use uninet_core::arcs::ArcSet;
use uninet_core::equivalence::{
    bb_to_qw_square, cyclic_to_cmv, gauge_transform, verify_cc_equivalence, verify_qw_bb,
};
use uninet_core::fibered::{
    band_structure, cc_closed_form, qw1d_closed_form, symbol_cc, symbol_qw, BandOptions,
};
use uninet_core::lattice::{LatticeShape, StateVector};
use uninet_core::linalg::{self, C64, TAU};
use uninet_core::models::{
    build_bb, build_cmv, build_qw, random_coins_1d, BbParams, CcParams, Coin1d, QwParams,
    VerblunskiSeq,
};
use uninet_core::mourre::{build_conjugate, mourre_check, ConjugateOptions};
use uninet_core::par::Parallelism;
use uninet_core::spectra::{diagonalize, evolve, spreading_exponent};

const PI: f64 = std::f64::consts::PI;

fn load(name: &str) -> Config {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    let raw = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("cannot read bundled config {name}: {e}"));
    Config::from_json(&raw).unwrap_or_else(|e| panic!("bundled config {name} invalid: {e}"))
}

fn symbol_grid_phases(sym: &uninet_core::fibered::Symbol, l: usize) -> Vec<f64> {
    let n_points = (l as u64).pow(sym.d() as u32) as usize;
    let mut phases = Vec::with_capacity(n_points * sym.dim());
    for p in 0..n_points {
        let mut coords = vec![0usize; sym.d()];
        let mut pp = p;
        for a in (0..sym.d()).rev() {
            coords[a] = pp % l;
            pp /= l;
        }
        let x: Vec<f64> = coords.iter().map(|&c| TAU * c as f64 / l as f64).collect();
        let pairs = linalg::unitary_eigenpairs(&sym.eval(&x).view()).unwrap();
        phases.extend(pairs.phases);
    }
    phases
}

#[test]
fn criterion_01_fourier_exactness() {
    let t0 = Instant::now();
    let cfg = load("c01_fourier_exactness.json");
    let op = cfg.model.build_operator().unwrap();
    let spec = diagonalize(&op).unwrap();
    let sym = cfg.model.build_symbol().unwrap();
    let grid = symbol_grid_phases(&sym, cfg.model.truncation);
    let dev = linalg::multiset_phase_distance(&spec.phases, &grid);
    assert!(dev < 1e-10, "max eigenphase deviation {dev:.3e}");
    let dt = t0.elapsed();
    assert!(dt.as_secs_f64() < 10.0, "runtime {dt:?} exceeds 10 s");
    println!(
        "criterion 01 (fourier exactness, L = {}): PASS — max deviation {dev:.3e}, {dt:?}",
        cfg.model.truncation
    );
}

#[test]
fn criterion_02_qw_band_reproduction() {
    let t0 = Instant::now();
    let cfg = load("c02_qw_bands.json");
    let n = cfg.grid.unwrap();
    let step = TAU / n as f64;
    let sym = cfg.model.build_symbol().unwrap();
    let bs = band_structure(&sym, n, &BandOptions::default(), Parallelism::default()).unwrap();

    let expect_arcs = ArcSet::from_intervals(&[
        (PI / 4.0, 3.0 * PI / 4.0),
        (5.0 * PI / 4.0, 7.0 * PI / 4.0),
    ]);
    let hd = bs.bands().hausdorff(&expect_arcs);
    assert!(hd <= step * (1.0 + 1e-9), "band Hausdorff distance {hd:.3e} > one grid step");

    let expect_tau = [PI / 4.0, 3.0 * PI / 4.0, 5.0 * PI / 4.0, 7.0 * PI / 4.0];
    assert_eq!(bs.tau_m.len(), 4, "tau_m = {:?}", bs.tau_m);
    let tau_dev = linalg::multiset_phase_distance(&bs.tau_m, &expect_tau);
    assert!(tau_dev <= 2.0 * step, "tau_m deviation {tau_dev:.3e}");

    // degenerate |α| = 0 case: spectrum collapses to {±i}
    let anti = symbol_qw(&Coin1d::antidiagonal().matrix(), 1).unwrap();
    let bs0 = band_structure(&anti, n, &BandOptions::default(), Parallelism::default()).unwrap();
    let (arcs0, tau0) = qw1d_closed_form(C64::new(0.0, 0.0), 0.0);
    assert!(bs0.bands().hausdorff(&arcs0) <= 2.0 * step);
    assert!(linalg::multiset_phase_distance(&tau0, &[PI / 2.0, 3.0 * PI / 2.0]) < 1e-12);

    let dt = t0.elapsed();
    assert!(dt.as_secs_f64() < 30.0, "runtime {dt:?} exceeds 30 s");
    println!(
        "criterion 02 (band reproduction, N = {n}): PASS — hausdorff {hd:.3e}, tau deviation {tau_dev:.3e}, {dt:?}"
    );
}

#[test]
fn criterion_03_cc_band_reproduction() {
    let t0 = Instant::now();
    let cfg = load("c03_cc_bands.json");
    let n = cfg.grid.unwrap();
    let step = TAU / n as f64;
    for phi in [PI / 6.0, PI / 4.0, PI / 3.0] {
        let sym = symbol_cc(phi).unwrap();
        let bs = band_structure(&sym, n, &BandOptions::default(), Parallelism::default()).unwrap();
        let (arcs, tau) = cc_closed_form(phi);
        let hd = bs.bands().hausdorff(&arcs);
        assert!(hd <= 2.0 * step, "phi = {phi}: hausdorff {hd:.3e} > 2 grid steps");
        // two-sided recovery of the exceptional set
        for &t in &tau {
            assert!(
                bs.tau_m.iter().any(|&u| linalg::circ_dist(t, u) <= 2.0 * step),
                "phi = {phi}: exceptional phase {t} undetected"
            );
        }
        for &u in &bs.tau_m {
            assert!(
                tau.iter().any(|&t| linalg::circ_dist(t, u) <= 2.0 * step),
                "phi = {phi}: spurious detection {u}"
            );
        }
        if (phi - PI / 4.0).abs() > 1e-12 {
            assert_eq!(tau.len(), 12, "phi = {phi}");
        }
    }
    // φ = 0: pure point, exactly {1, i, -1, -i}
    let (arcs, tau) = cc_closed_form(0.0);
    assert!(arcs.measure() < 1e-12);
    assert!(
        linalg::multiset_phase_distance(&tau, &[0.0, PI / 2.0, PI, 3.0 * PI / 2.0]) < 1e-12
    );
    let dt = t0.elapsed();
    assert!(dt.as_secs_f64() < 120.0, "runtime {dt:?} exceeds 2 min");
    println!("criterion 03 (network-model bands, {n}x{n} grid): PASS — {dt:?}");
}

#[test]
fn criterion_04_cc_equivalence() {
    let t0 = Instant::now();
    let cfg = load("c04_cc_equivalence.json");
    let l = cfg.model.truncation;
    let mut worst = 0.0f64;
    for seed in 41..46u64 {
        for phi in [0.0, PI / 6.0, PI / 4.0, PI / 2.0] {
            let params = CcParams::random(phi, l, seed).unwrap();
            let report = verify_cc_equivalence(&params).unwrap();
            worst = worst.max(report.residual);
            assert!(
                report.residual < 1e-12,
                "seed {seed}, phi {phi}: residual {:.3e}",
                report.residual
            );
        }
    }
    let dt = t0.elapsed();
    assert!(dt.as_secs_f64() < 60.0, "runtime {dt:?} exceeds 1 min");
    println!(
        "criterion 04 (coined-form equivalence, {l}x{l} torus): PASS — worst residual {worst:.3e}, {dt:?}"
    );
}

#[test]
fn criterion_05_qw_bb_equivalence() {
    let t0 = Instant::now();
    let cfg = load("c05_qw_bb.json");
    let l = cfg.model.truncation;
    let mut worst = 0.0f64;
    for seed in 101..111u64 {
        let coins = random_coins_1d(l, seed);
        let report = verify_qw_bb(&coins).unwrap();
        worst = worst.max(report.residual);
        assert!(report.residual < 1e-12, "seed {seed}: residual {:.3e}", report.residual);
    }
    let dt = t0.elapsed();
    assert!(dt.as_secs_f64() < 60.0, "runtime {dt:?} exceeds 1 min");
    println!(
        "criterion 05 (walk-to-five-diagonal interleaving, L = {l}): PASS — worst residual {worst:.3e}, {dt:?}"
    );
}

#[test]
fn criterion_06_square_root_relation() {
    let t0 = Instant::now();
    let cfg = load("c06_bb_square.json");
    let l = cfg.model.truncation;
    let mut worst = 0.0f64;
    let mut worst_spec = 0.0f64;
    for seed in 201..211u64 {
        let params = BbParams::random(l, seed).unwrap();
        let report = bb_to_qw_square(&params).unwrap();
        worst = worst.max(report.residual);
        assert!(report.residual < 1e-11, "seed {seed}: residual {:.3e}", report.residual);
        // eigenphase multiset of U² equals the doubled multiset of U_BB
        let u_qw = build_qw(&QwParams::from_coins_1d(l, &report.coins).unwrap())
            .unwrap()
            .to_dense();
        let u2 = u_qw.dot(&u_qw);
        let p2 = linalg::unitary_eigenpairs(&u2.view()).unwrap().phases;
        let pb = linalg::unitary_eigenpairs(&build_bb(&params).unwrap().to_dense().view())
            .unwrap()
            .phases;
        let doubled: Vec<f64> = pb.iter().flat_map(|&p| [p, p]).collect();
        let dev = linalg::multiset_phase_distance(&p2, &doubled);
        worst_spec = worst_spec.max(dev);
        assert!(dev < 1e-11, "seed {seed}: eigenphase doubling deviation {dev:.3e}");
    }
    let dt = t0.elapsed();
    assert!(dt.as_secs_f64() < 60.0, "runtime {dt:?} exceeds 1 min");
    println!(
        "criterion 06 (square-root relation, L = {l}): PASS — worst residual {worst:.3e}, worst spectral deviation {worst_spec:.3e}, {dt:?}"
    );
}

#[test]
fn criterion_07_gauge_identity() {
    let t0 = Instant::now();
    let cfg = load("c07_gauge.json");
    let l = cfg.model.truncation;
    let mut worst = 0.0f64;
    let mut worst_spec = 0.0f64;
    for seed in 301..311u64 {
        // wrap-consistent random gamma on top of random scattering data
        let base = BbParams::random(l, seed).unwrap();
        let mut rng = StdRng::seed_from_u64(seed ^ 0xabcd);
        let mut blocks = base.blocks().to_vec();
        let mut total = 0.0;
        for b in blocks.iter_mut().take(l - 1) {
            b.gamma = rand::Rng::random::<f64>(&mut rng) * 2.0 - 1.0;
            total += b.gamma;
        }
        blocks[l - 1].gamma = -total;
        let params = BbParams::new(blocks).unwrap();
        let report = gauge_transform(&params).unwrap();
        assert!(report.wrap_consistent);
        let residual = report.residual.unwrap();
        worst = worst.max(residual);
        assert!(residual < 1e-12, "seed {seed}: residual {residual:.3e}");
        let pg = linalg::unitary_eigenpairs(&build_bb(&params).unwrap().to_dense().view())
            .unwrap()
            .phases;
        let p0 =
            linalg::unitary_eigenpairs(&build_bb(&report.gauged).unwrap().to_dense().view())
                .unwrap()
                .phases;
        let dev = linalg::multiset_phase_distance(&pg, &p0);
        worst_spec = worst_spec.max(dev);
        assert!(dev < 1e-11, "seed {seed}: spectral deviation {dev:.3e}");
    }
    let dt = t0.elapsed();
    println!(
        "criterion 07 (gauge identity, L = {l}): PASS — worst residual {worst:.3e}, worst spectral deviation {worst_spec:.3e}, {dt:?}"
    );
}

#[test]
fn criterion_08_commutator_positivity() {
    let t0 = Instant::now();
    let cfg = load("c08_mourre.json");
    let delta = cfg.delta_arcs().unwrap();
    let sym = cfg.model.build_symbol().unwrap();
    let sizes = cfg.sizes.clone().unwrap();
    let mut margins = Vec::new();
    // closed-form velocity oracle, minimized over the window preimage
    let p_edge = 0.3f64.sin();
    let oracle = (0.5 - p_edge * p_edge) / (1.0 - p_edge * p_edge);
    for &l in &sizes {
        let shape = LatticeShape::new(1, l, 2).unwrap();
        let conj = build_conjugate(
            &sym,
            &delta,
            &shape,
            &ConjugateOptions::default(),
            Parallelism::default(),
        )
        .unwrap();
        let coins = vec![cfg.model.coin_1d().unwrap(); l];
        let u = build_qw(&QwParams::from_coins_1d(l, &coins).unwrap()).unwrap();
        let report = mourre_check(&u, &conj, &delta).unwrap();
        assert!(
            report.pass,
            "L = {l}: lambda_min {:.4} < c - margin = {:.4}",
            report.lambda_min,
            report.c_delta - report.margin
        );
        let c_err = (report.c_delta - oracle).abs() / oracle;
        assert!(c_err < 0.05, "L = {l}: c_delta {:.4} off the oracle {oracle:.4} by {c_err:.3}", report.c_delta);
        margins.push((l, report.margin, report.lambda_min, report.c_delta));
    }
    let m_first = margins.first().unwrap().1;
    let m_last = margins.last().unwrap().1;
    assert!(
        m_last < m_first,
        "margin did not shrink: {m_first:.4} at L = {} vs {m_last:.4} at L = {}",
        margins.first().unwrap().0,
        margins.last().unwrap().0
    );
    let dt = t0.elapsed();
    assert!(dt.as_secs_f64() < 300.0, "runtime {dt:?} exceeds 5 min");
    let summary: Vec<String> = margins
        .iter()
        .map(|(l, m, lam, c)| format!("L={l}: lambda_min={lam:.4}, c={c:.4}, margin={m:.4}"))
        .collect();
    println!("criterion 08 (commutator positivity): PASS — {}; {dt:?}", summary.join("; "));
}

#[test]
fn criterion_09_eigenvalue_count_stabilization() {
    let t0 = Instant::now();
    let cfg = load("c09_stability.json");
    let delta_prime = cfg.delta_prime_rcs().unwrap();
    let sizes = cfg.sizes.clone().unwrap();
    let sym = cfg.model.build_symbol().unwrap();
    let model = cfg.model.clone();
    let build = move |l: usize| {
        let mut m = model.clone();
        m.truncation = l;
        m.build_operator().map_err(|e| uninet_core::Error::Config(e.to_string()))
    };
    let report = uninet_core::mourre::eigenvalue_stability(
        build,
        &sym,
        &delta_prime,
        &sizes,
        Parallelism::default(),
    )
    .unwrap();
    assert!(report.stabilized, "counts not identical: {:?}", report.counts);
    let dt = t0.elapsed();
    assert!(dt.as_secs_f64() < 300.0, "runtime {dt:?} exceeds 5 min");
    println!(
        "criterion 09 (isolated-count stabilization): PASS — counts {:?}, {dt:?}",
        report.counts
    );
}

#[test]
fn criterion_10_ballistic_transport() {
    let t0 = Instant::now();
    let cfg = load("c10_transport.json");
    let l = cfg.model.truncation;
    let t_steps = cfg.time_steps.unwrap();

    let u = cfg.model.build_operator().unwrap();
    let psi = StateVector::basis_state(*u.shape(), 0, 0);
    let traj = evolve(&u, &psi, t_steps).unwrap();
    let kappa = spreading_exponent(&traj, 20).unwrap();
    assert!(
        (1.95..=2.0).contains(&kappa),
        "balanced-coin spreading exponent {kappa:.4} outside [1.95, 2.0]"
    );

    let coins = vec![Coin1d::antidiagonal(); l];
    let u0 = build_qw(&QwParams::from_coins_1d(l, &coins).unwrap()).unwrap();
    let traj0 = evolve(&u0, &psi, t_steps).unwrap();
    let kappa0 = spreading_exponent(&traj0, 20).unwrap();
    assert!(kappa0 < 0.1, "flat-band walk spreading exponent {kappa0:.4} >= 0.1");

    let dt = t0.elapsed();
    assert!(dt.as_secs_f64() < 120.0, "runtime {dt:?} exceeds 2 min");
    println!(
        "criterion 10 (ballistic transport, T = {t_steps}, L = {l}): PASS — kappa {kappa:.4}, flat-band kappa {kappa0:.4}, {dt:?}"
    );
}

#[test]
fn criterion_11_cmv_roundtrip() {
    let t0 = Instant::now();
    let cfg = load("c11_cmv_roundtrip.json");
    // uniform measure: all coefficients vanish
    let mut moments = vec![C64::new(0.0, 0.0); 9];
    moments[0] = C64::new(1.0, 0.0);
    let seq = uninet_core::models::verblunski_from_measure(&moments, 8).unwrap();
    let worst_a = seq.a.iter().map(|a| a.norm()).fold(0.0, f64::max);
    assert!(worst_a < 1e-12, "uniform-measure coefficient of modulus {worst_a:.3e}");

    // moment round-trip on random cyclic unitaries
    let n_max = cfg.n_max.unwrap();
    let mut rng = StdRng::seed_from_u64(cfg.seed);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let u = linalg::haar_unitary(6, &mut rng);
        let phi = Array1::from_shape_fn(6, |_| linalg::random_complex_normal(&mut rng));
        let report = cyclic_to_cmv(&u, &phi, n_max).unwrap();
        worst = worst.max(report.roundtrip_error);
        assert!(
            report.roundtrip_error < 1e-8,
            "roundtrip error {:.3e}",
            report.roundtrip_error
        );
    }
    // the configured random two-sided matrix builds and is unitary
    let seq = cfg.model.verblunski_seq(cfg.model.truncation).unwrap();
    let op = build_cmv(&VerblunskiSeq::new(seq.a.clone()).unwrap());
    assert!(op.is_ok() || cfg.model.truncation < 4);
    if let Ok(op) = op {
        assert!(op.unitarity_defect() < 1e-12);
    }

    let dt = t0.elapsed();
    assert!(dt.as_secs_f64() < 10.0, "runtime {dt:?} exceeds 10 s");
    println!(
        "criterion 11 (orthogonal-polynomial roundtrip): PASS — worst moment error {worst:.3e}, {dt:?}"
    );
}
