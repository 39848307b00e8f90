//! Implementations of the CLI subcommands.

use std::io::Write;

use ndarray::Array1;
use rand::rngs::StdRng;
use rand::SeedableRng;
use serde::Serialize;
use serde_json::json;

use uninet_core::arcs::ArcSet;
use uninet_core::equivalence;
use uninet_core::fibered::{self, BandOptions};
use uninet_core::lattice::StateVector;
use uninet_core::linalg;
use uninet_core::mourre::{self, ConjugateOptions};
use uninet_core::par::Parallelism;
use uninet_core::spectra;

use crate::config::{Config, SchemaError};
use crate::report::RunDir;
use crate::CliError;

fn schema(e: SchemaError) -> CliError {
    CliError::Schema(e)
}

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

fn band_options(cfg: &Config) -> BandOptions {
    BandOptions {
        gap_tol: cfg.tolerances.gap,
        grad_tol: cfg.tolerances.grad,
        ..BandOptions::default()
    }
}

fn arcs_json(arcs: &ArcSet) -> serde_json::Value {
    json!(arcs
        .canonical_arcs()
        .iter()
        .map(|a| [a.lo, a.hi])
        .collect::<Vec<_>>())
}

pub fn build(cfg: &Config, run: &RunDir) -> Result<(), CliError> {
    let op = cfg.model.build_operator().map_err(schema)?;
    let mut w = run.csv_writer("operator.csv")?;
    op.write_coordinate_csv(&mut w).map_err(CliError::io)?;
    w.flush().map_err(CliError::io)?;
    #[derive(Serialize)]
    struct Body {
        kind: String,
        dimension: usize,
        nnz: usize,
        bandwidth: usize,
        unitarity_defect: f64,
    }
    run.write_summary(
        "build",
        &Body {
            kind: cfg.model.kind.clone(),
            dimension: op.dim(),
            nnz: op.nnz(),
            bandwidth: op.bandwidth(),
            unitarity_defect: op.unitarity_defect(),
        },
    )
}

pub fn bands(cfg: &Config, run: &RunDir) -> Result<(), CliError> {
    let sym = cfg.model.build_symbol().map_err(schema)?;
    let n = cfg.grid.unwrap_or(256);
    let bs = fibered::band_structure(&sym, n, &band_options(cfg), Parallelism::default())
        .map_err(numerical)?;

    let mut w = run.csv_writer("bands.csv")?;
    let d = bs.d();
    let dim = bs.dim();
    let mut header = (0..d).map(|a| format!("x{a}")).collect::<Vec<_>>();
    header.extend((0..dim).map(|k| format!("phase{k}")));
    header.extend((0..dim).map(|k| format!("gradnorm{k}")));
    writeln!(w, "{}", header.join(",")).map_err(CliError::io)?;
    for p in 0..bs.n_points() {
        let mut row: Vec<String> = bs.x_of(p).iter().map(|x| x.to_string()).collect();
        row.extend(bs.phases_at(p).iter().map(|ph| ph.to_string()));
        for k in 0..dim {
            let g = bs
                .gradient(p, k)
                .map(|g| g.iter().map(|v| v * v).sum::<f64>().sqrt().to_string())
                .unwrap_or_else(|| "nan".into());
            row.push(g);
        }
        writeln!(w, "{}", row.join(",")).map_err(CliError::io)?;
    }
    w.flush().map_err(CliError::io)?;

    let window = cfg.delta_arcs();
    let cert = window.as_ref().map(|delta| fibered::is_m_good(delta, &bs));
    #[derive(Serialize)]
    struct Body {
        grid: usize,
        arcs: serde_json::Value,
        tau_m: Vec<f64>,
        crossings: usize,
        criticals: usize,
        #[serde(skip_serializing_if = "Option::is_none")]
        window: Option<serde_json::Value>,
    }
    run.write_summary(
        "bands",
        &Body {
            grid: n,
            arcs: arcs_json(bs.bands()),
            tau_m: bs.tau_m.clone(),
            crossings: bs.crossings.len(),
            criticals: bs.criticals.len(),
            window: cert.map(|c| {
                json!({
                    "pass": c.pass,
                    "c_delta": c.c_delta,
                    "reason": c.reason,
                    "offending_phases": c.offending_phases,
                })
            }),
        },
    )
}

pub fn tau(cfg: &Config, run: &RunDir) -> Result<(), CliError> {
    let sym = cfg.model.build_symbol().map_err(schema)?;
    let n = cfg.grid.unwrap_or(256);
    let bs = fibered::band_structure(&sym, n, &band_options(cfg), Parallelism::default())
        .map_err(numerical)?;
    // closed forms where available
    let closed = match cfg.model.kind.as_str() {
        "qw1d" => {
            let coin = cfg.model.coin_1d().map_err(schema)?;
            let (arcs, tau) = fibered::qw1d_closed_form(coin.alpha, coin.eta);
            Some((arcs, tau))
        }
        "cc-original" | "cc-qw" => {
            let (arcs, tau) = fibered::cc_closed_form(cfg.model.phi.unwrap_or(0.0));
            Some((arcs, tau))
        }
        _ => None,
    };
    #[derive(Serialize)]
    struct Body {
        grid: usize,
        tau_m: Vec<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        closed_form_tau_m: Option<Vec<f64>>,
        #[serde(skip_serializing_if = "Option::is_none")]
        closed_form_arcs: Option<serde_json::Value>,
        #[serde(skip_serializing_if = "Option::is_none")]
        max_detection_distance: Option<f64>,
    }
    let (cf_tau, cf_arcs, max_dist) = match closed {
        Some((arcs, tau)) => {
            let max_dist = tau
                .iter()
                .map(|&t| {
                    bs.tau_m
                        .iter()
                        .map(|&u| linalg::circ_dist(t, u))
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(0.0, f64::max);
            (Some(tau), Some(arcs_json(&arcs)), Some(max_dist))
        }
        None => (None, None, None),
    };
    run.write_summary(
        "tau",
        &Body {
            grid: n,
            tau_m: bs.tau_m.clone(),
            closed_form_tau_m: cf_tau,
            closed_form_arcs: cf_arcs,
            max_detection_distance: max_dist,
        },
    )
}

pub fn verify(cfg: &Config, run: &RunDir, relation: &str) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Body {
        relation: String,
        dimension: usize,
        residual: f64,
        norm_kind: String,
        pass: bool,
        #[serde(skip_serializing_if = "Option::is_none")]
        detail: Option<serde_json::Value>,
    }
    let body = match relation {
        "cc-qw" => {
            let params = cfg.model.cc_params().map_err(schema)?;
            let report = equivalence::verify_cc_equivalence(&params).map_err(numerical)?;
            Body {
                relation: report.relation,
                dimension: report.dimension,
                residual: report.residual,
                norm_kind: report.norm_kind.as_str().into(),
                pass: report.pass,
                detail: None,
            }
        }
        "qw-bb" => {
            let coins = cfg.model.coins_1d().map_err(schema)?;
            let report = equivalence::verify_qw_bb(&coins).map_err(numerical)?;
            Body {
                relation: report.relation,
                dimension: report.dimension,
                residual: report.residual,
                norm_kind: report.norm_kind.as_str().into(),
                pass: report.pass,
                detail: None,
            }
        }
        "bb-square" => {
            let params = cfg.model.bb_params(cfg.model.truncation).map_err(schema)?;
            let report = equivalence::bb_to_qw_square(&params).map_err(numerical)?;
            Body {
                relation: "bb-square".into(),
                dimension: 2 * cfg.model.truncation,
                residual: report.residual,
                norm_kind: report.norm_kind.as_str().into(),
                pass: report.residual < 1e-11,
                detail: None,
            }
        }
        "gauge" => {
            let params = cfg.model.bb_params(cfg.model.truncation).map_err(schema)?;
            let report = equivalence::gauge_transform(&params).map_err(numerical)?;
            Body {
                relation: "gauge".into(),
                dimension: cfg.model.truncation,
                residual: report.residual.unwrap_or(f64::NAN),
                norm_kind: report.norm_kind.as_str().into(),
                pass: report.wrap_consistent && report.residual.is_some_and(|r| r < 1e-12),
                detail: Some(json!({
                    "wrap_consistent": report.wrap_consistent,
                    "holonomy": report.holonomy,
                })),
            }
        }
        "cmv-roundtrip" => {
            let dim = cfg.model.truncation.clamp(2, 12);
            let mut rng = StdRng::seed_from_u64(cfg.seed);
            let u = linalg::haar_unitary(dim, &mut rng);
            let phi =
                Array1::from_shape_fn(dim, |_| linalg::random_complex_normal(&mut rng));
            let n_max = cfg.n_max.unwrap_or(dim);
            let report = equivalence::cyclic_to_cmv(&u, &phi, n_max).map_err(numerical)?;
            Body {
                relation: "cmv-roundtrip".into(),
                dimension: dim,
                residual: report.roundtrip_error,
                norm_kind: "max-moment-error".into(),
                pass: report.roundtrip_error < 1e-8,
                detail: Some(json!({
                    "krylov_ratio": report.krylov_ratio,
                    "coefficients": report.seq.a.iter().map(|a| [a.re, a.im]).collect::<Vec<_>>(),
                    "terminated": report.seq.terminated,
                })),
            }
        }
        other => {
            return Err(CliError::Schema(SchemaError {
                path: "--relation".into(),
                message: format!(
                    "unknown relation '{other}' (one of cc-qw, qw-bb, bb-square, gauge, cmv-roundtrip)"
                ),
            }))
        }
    };
    run.write_summary("verify", &body)
}

pub fn mourre(cfg: &Config, run: &RunDir) -> Result<(), CliError> {
    let delta = cfg
        .delta_arcs()
        .ok_or_else(|| CliError::Schema(SchemaError { path: "delta".into(), message: "mourre needs a phase window".into() }))?;
    let sym = cfg.model.build_symbol().map_err(schema)?;
    let shape = cfg.model.shape().map_err(schema)?;
    let opts = ConjugateOptions { band: band_options(cfg), ..Default::default() };
    let conj = mourre::build_conjugate(&sym, &delta, &shape, &opts, Parallelism::default())
        .map_err(numerical)?;
    let op = cfg.model.build_operator().map_err(schema)?;
    let report = mourre::mourre_check(&op, &conj, &delta).map_err(numerical)?;

    let mut w = run.csv_writer("commutator_spectrum.csv")?;
    writeln!(w, "index,eigenvalue").map_err(CliError::io)?;
    for (i, v) in report.compressed_spectrum.iter().enumerate() {
        writeln!(w, "{i},{v}").map_err(CliError::io)?;
    }
    w.flush().map_err(CliError::io)?;

    #[derive(Serialize)]
    struct Body {
        c_delta: f64,
        lambda_min: f64,
        lambda_min_raw: f64,
        margin: f64,
        pass: bool,
        window_dim: usize,
        tail_norm: f64,
        herm_defect: f64,
        ramp_cells: Vec<usize>,
    }
    run.write_summary(
        "mourre",
        &Body {
            c_delta: report.c_delta,
            lambda_min: report.lambda_min,
            lambda_min_raw: report.lambda_min_raw,
            margin: report.margin,
            pass: report.pass,
            window_dim: report.window_dim,
            tail_norm: report.tail_norm,
            herm_defect: report.herm_defect,
            ramp_cells: conj.ramp_cells.clone(),
        },
    )
}

pub fn evolve(cfg: &Config, run: &RunDir) -> Result<(), CliError> {
    let op = cfg.model.build_operator().map_err(schema)?;
    let t_steps = cfg.time_steps.unwrap_or(100);
    let psi0 = StateVector::basis_state(*op.shape(), 0, 0);
    let traj = spectra::evolve(&op, &psi0, t_steps).map_err(numerical)?;
    let kappa = spectra::spreading_exponent(&traj, 20).ok();

    let mut w = run.csv_writer("trajectory.csv")?;
    let d = op.shape().d();
    let mut header = vec!["t".to_string()];
    header.extend((0..d).map(|a| format!("mean_x{a}")));
    header.push("mean_sq".into());
    writeln!(w, "{}", header.join(",")).map_err(CliError::io)?;
    for t in 0..=t_steps {
        let mut row = vec![t.to_string()];
        row.extend(traj.mean[t].iter().map(|v| v.to_string()));
        row.push(traj.mean_sq[t].to_string());
        writeln!(w, "{}", row.join(",")).map_err(CliError::io)?;
    }
    w.flush().map_err(CliError::io)?;

    #[derive(Serialize)]
    struct Body {
        steps: usize,
        #[serde(skip_serializing_if = "Option::is_none")]
        spreading_exponent: Option<f64>,
        norm_drift: f64,
        final_mean_sq: f64,
    }
    run.write_summary(
        "evolve",
        &Body {
            steps: t_steps,
            spreading_exponent: kappa,
            norm_drift: traj.norm_drift,
            final_mean_sq: traj.mean_sq[t_steps],
        },
    )
}

pub fn spectrum(cfg: &Config, run: &RunDir) -> Result<(), CliError> {
    let op = cfg.model.build_operator().map_err(schema)?;
    let spec = spectra::diagonalize(&op).map_err(numerical)?;

    let mut w = run.csv_writer("eigenphases.csv")?;
    writeln!(w, "index,phase").map_err(CliError::io)?;
    for (i, p) in spec.phases.iter().enumerate() {
        writeln!(w, "{i},{p}").map_err(CliError::io)?;
    }
    w.flush().map_err(CliError::io)?;

    let density = match cfg.n_max {
        Some(n_max) => {
            let psi0 = StateVector::basis_state(*op.shape(), 0, 0);
            let grid = cfg.grid.unwrap_or(4 * n_max.max(64));
            let dens = spectra::spectral_measure_estimate(&op, &psi0, n_max, grid)
                .map_err(numerical)?;
            let mut w = run.csv_writer("density.csv")?;
            writeln!(w, "phase,density").map_err(CliError::io)?;
            for (t, r) in dens.theta.iter().zip(&dens.density) {
                writeln!(w, "{t},{r}").map_err(CliError::io)?;
            }
            w.flush().map_err(CliError::io)?;
            Some(dens.total_mass)
        }
        None => None,
    };

    #[derive(Serialize)]
    struct Body {
        dimension: usize,
        #[serde(skip_serializing_if = "Option::is_none")]
        density_total_mass: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        window_count: Option<usize>,
    }
    let window_count = cfg.delta_arcs().map(|delta| {
        spectra::arc_eigen_statistics(&spec.phases, &delta)
            .iter()
            .map(|s| s.count)
            .sum()
    });
    run.write_summary(
        "spectrum",
        &Body { dimension: op.dim(), density_total_mass: density, window_count },
    )
}

pub fn stability(cfg: &Config, run: &RunDir) -> Result<(), CliError> {
    let delta_prime = cfg.delta_prime_rcs().ok_or_else(|| {
        CliError::Schema(SchemaError {
            path: "delta_prime".into(),
            message: "stability needs a compact sub-window".into(),
        })
    })?;
    let sizes = cfg.sizes.clone().unwrap_or_else(|| vec![128, 256, 512]);
    let sym = cfg.model.build_symbol().map_err(schema)?;
    let model = cfg.model.clone();
    let build = move |l: usize| {
        let mut m = model.clone();
        m.truncation = l;
        m.build_operator().map_err(|e| uninet_core::Error::Config(e.to_string()))
    };
    let report =
        spectra_stability(&sym, build, &delta_prime, &sizes).map_err(numerical)?;

    #[derive(Serialize)]
    struct Body {
        counts: Vec<(usize, usize)>,
        stabilized: bool,
        isolated_phases: Vec<(usize, Vec<f64>)>,
    }
    run.write_summary(
        "stability",
        &Body {
            counts: report.counts,
            stabilized: report.stabilized,
            isolated_phases: report.isolated,
        },
    )
}

fn spectra_stability(
    sym: &fibered::Symbol,
    build: impl Fn(usize) -> uninet_core::Result<uninet_core::lattice::NetworkOperator>,
    delta_prime: &ArcSet,
    sizes: &[usize],
) -> uninet_core::Result<mourre::StabilityReport> {
    mourre::eigenvalue_stability(build, sym, delta_prime, sizes, Parallelism::default())
}
