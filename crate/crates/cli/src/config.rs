//! Run configuration: a versioned JSON schema with field-path diagnostics.
//!
//! Complex numbers are `[re, im]` pairs, angles are radians, phase windows
//! are `[lo, hi]` arcs.

use serde::{Deserialize, Serialize};
use uninet_core::arcs::ArcSet;
use uninet_core::lattice::{LatticeShape, NetworkOperator};
use uninet_core::linalg::C64;
use uninet_core::models::{
    self, BbParams, CcParams, Coin1d, NamedCoin, QwParams, ScatteringParams, VerblunskiSeq,
};
use uninet_core::mourre::{DecayKind, PerturbationProfile};
use uninet_core::{fibered, lattice};

/// A violation of the config schema, carrying the offending field path.
#[derive(Debug)]
pub struct SchemaError {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for SchemaError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl std::error::Error for SchemaError {}

fn err(path: impl Into<String>, message: impl Into<String>) -> SchemaError {
    SchemaError { path: path.into(), message: message.into() }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Config {
    pub version: u32,
    pub model: ModelConfig,
    /// Phase window `[lo, hi]` for certification / positivity checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<[f64; 2]>,
    /// Compact sub-window for eigenvalue-count stabilization.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_prime: Option<[f64; 2]>,
    /// Band-scan grid resolution per axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    /// Truncation sizes for sweeps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<usize>>,
    /// Evolution steps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_steps: Option<usize>,
    /// Autocorrelation order for spectral-measure estimates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    /// Seed for any randomness not pinned elsewhere in the config.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tolerances {
    #[serde(default = "default_gap_tol")]
    pub gap: f64,
    #[serde(default = "default_grad_tol")]
    pub grad: f64,
}

fn default_gap_tol() -> f64 {
    1e-6
}

fn default_grad_tol() -> f64 {
    1e-4
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { gap: default_gap_tol(), grad: default_grad_tol() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    /// One of `qw1d`, `qw`, `bb`, `cmv`, `cc-original`, `cc-qw`.
    pub kind: String,
    /// Torus side length.
    pub truncation: usize,
    /// Spatial dimension (for `qw`; `qw1d` is 1, `cc-*` are 2).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coin: Option<CoinConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scattering: Option<ScatteringConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verblunski: Option<VerblunskiConfig>,
    /// Chalker-Coddington mixing angle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_field: Option<DFieldConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoinConfig {
    Named { named: String },
    Explicit { alpha: [f64; 2], beta: [f64; 2], eta: f64 },
    RandomField { seed: u64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScatteringConfig {
    Random { seed: u64 },
    Explicit(Vec<ScatteringEntry>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScatteringEntry {
    pub r: f64,
    pub t: f64,
    #[serde(default)]
    pub theta: f64,
    #[serde(default)]
    pub nu: f64,
    #[serde(default)]
    pub gamma: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VerblunskiConfig {
    Random { modulus: f64, seed: u64 },
    Explicit(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DFieldConfig {
    Identity,
    Random { seed: u64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PerturbationConfig {
    None,
    Compact { radius: usize, strength: f64, seed: u64 },
    PowerLaw { c: f64, epsilon: f64, seed: u64 },
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self, SchemaError> {
        let cfg: Config = serde_json::from_str(text)
            .map_err(|e| err("<document>", format!("invalid JSON: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        if self.version != 1 {
            return Err(err("version", format!("unsupported version {}", self.version)));
        }
        let m = &self.model;
        match m.kind.as_str() {
            "qw1d" | "qw" | "bb" | "cmv" | "cc-original" | "cc-qw" => {}
            other => return Err(err("model.kind", format!("unknown model kind '{other}'"))),
        }
        if m.truncation < 2 {
            return Err(err("model.truncation", "must be at least 2"));
        }
        if let Some(ScatteringConfig::Explicit(list)) = &m.scattering {
            for (k, s) in list.iter().enumerate() {
                let sum = s.r * s.r + s.t * s.t;
                if (sum - 1.0).abs() > 1e-12 {
                    return Err(err(
                        format!("model.scattering[{k}]"),
                        format!("r^2 + t^2 = {sum} must equal 1"),
                    ));
                }
            }
        }
        if let Some(VerblunskiConfig::Explicit(list)) = &m.verblunski {
            for (k, a) in list.iter().enumerate() {
                let norm = (a[0] * a[0] + a[1] * a[1]).sqrt();
                if norm > 1.0 + 1e-12 {
                    return Err(err(
                        format!("model.verblunski[{k}]"),
                        format!("|a| = {norm} exceeds 1"),
                    ));
                }
            }
        }
        if let Some(phi) = m.phi {
            if !(0.0..=std::f64::consts::FRAC_PI_2 + 1e-15).contains(&phi) {
                return Err(err("model.phi", format!("phi = {phi} outside [0, pi/2]")));
            }
        }
        if let Some(d) = &self.delta {
            if !d[1].is_finite() || !d[0].is_finite() {
                return Err(err("delta", "bounds must be finite"));
            }
        }
        match m.kind.as_str() {
            "qw1d" => {
                if m.coin.is_none() {
                    return Err(err("model.coin", "qw1d needs a coin"));
                }
            }
            "qw" => {
                let d = m.dimension.ok_or_else(|| err("model.dimension", "qw needs a dimension"))?;
                if d == 0 {
                    return Err(err("model.dimension", "must be positive"));
                }
            }
            "bb" => {
                if m.scattering.is_none() {
                    return Err(err("model.scattering", "bb needs scattering matrices"));
                }
            }
            "cmv" => {
                if m.verblunski.is_none() {
                    return Err(err("model.verblunski", "cmv needs Verblunski coefficients"));
                }
            }
            "cc-original" | "cc-qw" => {
                if m.phi.is_none() {
                    return Err(err("model.phi", "Chalker-Coddington needs phi"));
                }
            }
            _ => unreachable!(),
        }
        Ok(())
    }

    pub fn delta_arcs(&self) -> Option<ArcSet> {
        self.delta.map(|[lo, hi]| ArcSet::from_intervals(&[(lo, hi)]))
    }

    pub fn delta_prime_rcs(&self) -> Option<ArcSet> {
        self.delta_prime.map(|[lo, hi]| ArcSet::from_intervals(&[(lo, hi)]))
    }
}

fn c64(pair: [f64; 2]) -> C64 {
    C64::new(pair[0], pair[1])
}

impl ModelConfig {
    pub fn coin_1d(&self) -> Result<Coin1d, SchemaError> {
        match &self.coin {
            Some(CoinConfig::Named { named }) => NamedCoin::from_name(named)
                .map(|n| n.coin())
                .map_err(|e| err("model.coin.named", e.to_string())),
            Some(CoinConfig::Explicit { alpha, beta, eta }) => {
                Coin1d::new(c64(*alpha), c64(*beta), *eta)
                    .map_err(|e| err("model.coin", e.to_string()))
            }
            Some(CoinConfig::RandomField { .. }) => {
                Err(err("model.coin", "random coin fields have no single homogeneous coin"))
            }
            None => Err(err("model.coin", "missing coin")),
        }
    }

    pub fn bb_params(&self, l: usize) -> Result<BbParams, SchemaError> {
        match &self.scattering {
            Some(ScatteringConfig::Random { seed }) => {
                BbParams::random(l, *seed).map_err(|e| err("model.scattering", e.to_string()))
            }
            Some(ScatteringConfig::Explicit(list)) => {
                if list.len() != l {
                    return Err(err(
                        "model.scattering",
                        format!("need {l} entries, got {}", list.len()),
                    ));
                }
                let blocks = list
                    .iter()
                    .enumerate()
                    .map(|(k, s)| {
                        ScatteringParams::new(s.r, s.t, s.theta, s.nu, s.gamma)
                            .map_err(|e| err(format!("model.scattering[{k}]"), e.to_string()))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                BbParams::new(blocks).map_err(|e| err("model.scattering", e.to_string()))
            }
            None => Err(err("model.scattering", "missing scattering matrices")),
        }
    }

    pub fn verblunski_seq(&self, l: usize) -> Result<VerblunskiSeq, SchemaError> {
        match &self.verblunski {
            Some(VerblunskiConfig::Random { modulus, seed }) => {
                VerblunskiSeq::random(l, *modulus, *seed)
                    .map_err(|e| err("model.verblunski", e.to_string()))
            }
            Some(VerblunskiConfig::Explicit(list)) => {
                if list.len() != l {
                    return Err(err(
                        "model.verblunski",
                        format!("need {l} entries, got {}", list.len()),
                    ));
                }
                VerblunskiSeq::new(list.iter().map(|a| c64(*a)).collect())
                    .map_err(|e| err("model.verblunski", e.to_string()))
            }
            None => Err(err("model.verblunski", "missing Verblunski coefficients")),
        }
    }

    pub fn cc_params(&self) -> Result<CcParams, SchemaError> {
        let phi = self.phi.ok_or_else(|| err("model.phi", "missing phi"))?;
        let l = self.truncation;
        match &self.d_field {
            None | Some(DFieldConfig::Identity) => {
                CcParams::uniform(phi, l).map_err(|e| err("model", e.to_string()))
            }
            Some(DFieldConfig::Random { seed }) => {
                CcParams::random(phi, l, *seed).map_err(|e| err("model", e.to_string()))
            }
        }
    }

    /// Site-indexed 1-d coins of a `qw1d` model.
    pub fn coins_1d(&self) -> Result<Vec<Coin1d>, SchemaError> {
        let l = self.truncation;
        match &self.coin {
            Some(CoinConfig::RandomField { seed }) => Ok(models::random_coins_1d(l, *seed)),
            _ => Ok(vec![self.coin_1d()?; l]),
        }
    }

    /// Builds the configured operator, applying any perturbation.
    pub fn build_operator(&self) -> Result<NetworkOperator, SchemaError> {
        let op = match self.kind.as_str() {
            "qw1d" => {
                let coins = self.coins_1d()?;
                let params = QwParams::from_coins_1d(self.truncation, &coins)
                    .map_err(|e| err("model", e.to_string()))?;
                models::build_qw(&params).map_err(|e| err("model", e.to_string()))?
            }
            "qw" => {
                let d = self.dimension.unwrap_or(1);
                let shape = LatticeShape::new(d, self.truncation, 2 * d)
                    .map_err(|e| err("model.truncation", e.to_string()))?;
                let field = match &self.coin {
                    Some(CoinConfig::RandomField { seed }) => {
                        models::random_coin_field(shape, *seed)
                            .map_err(|e| err("model.coin", e.to_string()))?
                    }
                    _ => {
                        return Err(err("model.coin", "qw in d > 1 takes a random coin field seed"))
                    }
                };
                let params = QwParams::new(field).map_err(|e| err("model", e.to_string()))?;
                models::build_qw(&params).map_err(|e| err("model", e.to_string()))?
            }
            "bb" => {
                let params = self.bb_params(self.truncation)?;
                models::build_bb(&params).map_err(|e| err("model", e.to_string()))?
            }
            "cmv" => {
                let seq = self.verblunski_seq(self.truncation)?;
                models::build_cmv(&seq).map_err(|e| err("model", e.to_string()))?
            }
            "cc-original" => {
                let params = self.cc_params()?;
                models::build_cc_original(&params).map_err(|e| err("model", e.to_string()))?
            }
            "cc-qw" => {
                let params = self.cc_params()?;
                models::build_cc_qw(&params).map_err(|e| err("model", e.to_string()))?
            }
            _ => unreachable!(),
        };
        match self.perturbation_profile()? {
            None => Ok(op),
            Some(profile) => {
                let field = profile
                    .coin_field(*op.shape())
                    .map_err(|e| err("model.perturbation", e.to_string()))?;
                let pert = lattice::build_coin_operator(&field)
                    .map_err(|e| err("model.perturbation", e.to_string()))?;
                lattice::compose(&op, &pert).map_err(|e| err("model", e.to_string()))
            }
        }
    }

    pub fn perturbation_profile(&self) -> Result<Option<PerturbationProfile>, SchemaError> {
        Ok(match &self.perturbation {
            None | Some(PerturbationConfig::None) => None,
            Some(PerturbationConfig::Compact { radius, strength, seed }) => {
                if *strength < 0.0 || *strength > 2.0 {
                    return Err(err("model.perturbation.strength", "must lie in [0, 2]"));
                }
                Some(PerturbationProfile {
                    kind: DecayKind::Compact { radius: *radius, strength: *strength },
                    seed: *seed,
                })
            }
            Some(PerturbationConfig::PowerLaw { c, epsilon, seed }) => {
                if *c < 0.0 {
                    return Err(err("model.perturbation.c", "must be nonnegative"));
                }
                Some(PerturbationProfile {
                    kind: DecayKind::PowerLaw { c: *c, epsilon: *epsilon },
                    seed: *seed,
                })
            }
        })
    }

    /// The translation-invariant symbol of the model's homogeneous part.
    pub fn build_symbol(&self) -> Result<fibered::Symbol, SchemaError> {
        match self.kind.as_str() {
            "qw1d" => {
                let coin = self.coin_1d()?;
                fibered::symbol_qw(&coin.matrix(), 1).map_err(|e| err("model.coin", e.to_string()))
            }
            "cc-original" | "cc-qw" => {
                let phi = self.phi.ok_or_else(|| err("model.phi", "missing phi"))?;
                fibered::symbol_cc(phi).map_err(|e| err("model.phi", e.to_string()))
            }
            other => Err(err(
                "model.kind",
                format!("'{other}' has no homogeneous symbol; use qw1d or cc-*"),
            )),
        }
    }

    /// Shape of the configured operator.
    pub fn shape(&self) -> Result<LatticeShape, SchemaError> {
        let mk = |d: usize, l: usize, dc: usize| {
            LatticeShape::new(d, l, dc).map_err(|e| err("model.truncation", e.to_string()))
        };
        match self.kind.as_str() {
            "qw1d" => mk(1, self.truncation, 2),
            "qw" => {
                let d = self.dimension.unwrap_or(1);
                mk(d, self.truncation, 2 * d)
            }
            "bb" | "cmv" => mk(1, self.truncation, 1),
            "cc-original" => mk(2, self.truncation, 1),
            "cc-qw" => mk(2, self.truncation / 2, 4),
            _ => unreachable!(),
        }
    }

    /// The homogeneous (unperturbed) operator, for symbol-grid comparisons.
    pub fn build_homogeneous(&self) -> Result<NetworkOperator, SchemaError> {
        let mut cfg = self.clone();
        cfg.perturbation = None;
        cfg.build_operator()
    }
}

/// FNV-1a 64-bit hash of the raw config bytes, hex-encoded; embedded in
/// every report so outputs are traceable to their exact inputs.
pub fn config_hash(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}
