//! Experiment configuration files (TOML).

use std::fmt;
use std::path::{Path, PathBuf};

use lowedge_core::{HamiltonianSpec, SolverOptions};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    FieldCertify,
    LargeDeviation,
    Lifshitz,
    CtCheck,
    MsaInitial,
    EigenDecay,
    Dynloc,
    SpectralEdge,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        Self::FieldCertify,
        Self::LargeDeviation,
        Self::Lifshitz,
        Self::CtCheck,
        Self::MsaInitial,
        Self::EigenDecay,
        Self::Dynloc,
        Self::SpectralEdge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::FieldCertify => "field-certify",
            Self::LargeDeviation => "large-deviation",
            Self::Lifshitz => "lifshitz",
            Self::CtCheck => "ct-check",
            Self::MsaInitial => "msa-initial",
            Self::EigenDecay => "eigen-decay",
            Self::Dynloc => "dynloc",
            Self::SpectralEdge => "spectral-edge",
        }
    }

    /// Smallest trial count the underlying estimator accepts.
    pub fn min_trials(self) -> u64 {
        match self {
            Self::FieldCertify | Self::LargeDeviation => 1000,
            Self::Lifshitz | Self::MsaInitial => 100,
            Self::SpectralEdge => 10,
            Self::CtCheck | Self::EigenDecay | Self::Dynloc => 1,
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldCertifyParams {
    /// Separations at which the median-event covariance is estimated.
    pub distances: Vec<u64>,
    /// If set, also run the conditional-continuity probe at this ε.
    #[serde(default)]
    pub continuity_eps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LargeDeviationParams {
    pub energy: f64,
    pub beta: f64,
    /// Truncation constant: the field is capped at `c L^{-2}/3`.
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LifshitzParams {
    #[serde(default = "one")]
    pub n: usize,
    pub sizes: Vec<usize>,
    /// Threshold constant: events are `E_0 ≤ 2 c L^{-1/2}`.
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CtCheckParams {
    #[serde(default = "one")]
    pub n: usize,
    pub sizes: Vec<usize>,
    /// Distances below the ground state are drawn uniformly from `[eta_min, 1]`.
    #[serde(default = "default_eta_min")]
    pub eta_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MsaInitialParams {
    /// Maximal particle number `N`.
    pub n_max: usize,
    /// Particle number of the cubes; defaults to `N`.
    #[serde(default)]
    pub n: Option<usize>,
    /// Initial scales `L0`.
    pub scales: Vec<u64>,
    #[serde(default = "one_f")]
    pub p: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub estar_override: Option<f64>,
}

impl MsaInitialParams {
    pub fn particles(&self) -> usize {
        self.n.unwrap_or(self.n_max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenDecayParams {
    #[serde(default = "one")]
    pub n: usize,
    pub size: usize,
    /// Window `[E_0, E_0 + width]`.
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynlocParams {
    #[serde(default = "one")]
    pub n: usize,
    pub size: usize,
    /// Spectral window `[a, b]`.
    pub window: [f64; 2],
    /// Moment exponent `s`.
    pub s: f64,
    /// Radius of the initial region `K` around the origin.
    #[serde(default = "one")]
    pub k_radius: usize,
    /// Sampled times; defaults to `0, 0.1, 1, ..., 10^6`.
    #[serde(default)]
    pub times: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralEdgeParams {
    #[serde(default = "one")]
    pub n: usize,
    pub sizes: Vec<usize>,
}

fn one() -> usize {
    1
}

fn one_f() -> f64 {
    1.0
}

fn default_alpha() -> f64 {
    1.5
}

fn default_eta_min() -> f64 {
    0.01
}

fn default_out() -> PathBuf {
    PathBuf::from("results")
}

/// One experiment, fully determined by this file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub trials: u64,
    pub seed: u64,
    /// Worker threads; defaults to the number of available cores.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    pub model: HamiltonianSpec,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub field_certify: Option<FieldCertifyParams>,
    #[serde(default)]
    pub large_deviation: Option<LargeDeviationParams>,
    #[serde(default)]
    pub lifshitz: Option<LifshitzParams>,
    #[serde(default)]
    pub ct_check: Option<CtCheckParams>,
    #[serde(default)]
    pub msa: Option<MsaInitialParams>,
    #[serde(default)]
    pub eigen_decay: Option<EigenDecayParams>,
    #[serde(default)]
    pub dynloc: Option<DynlocParams>,
    #[serde(default)]
    pub spectral_edge: Option<SpectralEdgeParams>,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
}

/// Parses TOML text; unknown keys are rejected.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        ConfigError::Parse { line, column, message: e.message().to_string() }
    })
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Reads, parses and checks a configuration file.
pub fn validate_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    let config = parse_config(&text)?;
    config.check()?;
    Ok(config)
}

impl ExperimentConfig {
    /// Every invariant violation, or `Ok` if there are none.
    pub fn check(&self) -> Result<(), ConfigError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(v))
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let kind = self.kind;
        if self.trials < kind.min_trials() {
            v.push(format!("trials = {} but {kind} needs at least {}", self.trials, kind.min_trials()));
        }
        if self.workers == Some(0) {
            v.push("workers must be at least 1".into());
        }
        if let Err(e) = self.model.validate() {
            v.push(format!("model: {e}"));
        }
        let sections = [
            ("field_certify", self.field_certify.is_some(), ExperimentKind::FieldCertify),
            ("large_deviation", self.large_deviation.is_some(), ExperimentKind::LargeDeviation),
            ("lifshitz", self.lifshitz.is_some(), ExperimentKind::Lifshitz),
            ("ct_check", self.ct_check.is_some(), ExperimentKind::CtCheck),
            ("msa", self.msa.is_some(), ExperimentKind::MsaInitial),
            ("eigen_decay", self.eigen_decay.is_some(), ExperimentKind::EigenDecay),
            ("dynloc", self.dynloc.is_some(), ExperimentKind::Dynloc),
            ("spectral_edge", self.spectral_edge.is_some(), ExperimentKind::SpectralEdge),
        ];
        for (name, present, owner) in sections {
            if owner == kind && !present {
                v.push(format!("[{name}] section required for {kind}"));
            }
            if owner != kind && present {
                v.push(format!("[{name}] section is not used by {kind}"));
            }
        }
        let positive = |v: &mut Vec<String>, name: &str, x: f64| {
            if !(x > 0.0 && x.is_finite()) {
                v.push(format!("{name} must be positive, got {x}"));
            }
        };
        let particles = |v: &mut Vec<String>, n: usize| {
            if n == 0 {
                v.push("particle number n must be at least 1".into());
            }
        };
        let sizes = |v: &mut Vec<String>, s: &[usize]| {
            if s.is_empty() {
                v.push("sizes must not be empty".into());
            }
        };
        if let Some(p) = &self.field_certify {
            if p.distances.is_empty() {
                v.push("distances must not be empty".into());
            }
            if p.distances.contains(&0) {
                v.push("distances must be positive".into());
            }
            if let Some(eps) = p.continuity_eps {
                if !(0.0..1.0).contains(&eps) {
                    v.push(format!("continuity_eps = {eps} outside [0, 1)"));
                }
            }
        }
        if let Some(p) = &self.large_deviation {
            positive(&mut v, "energy", p.energy);
            positive(&mut v, "beta", p.beta);
            positive(&mut v, "c", p.c);
            if let Err(e) = lowedge_core::observables::large_deviation_scale(p.energy, p.beta) {
                v.push(format!("large_deviation: {e}"));
            }
        }
        if let Some(p) = &self.lifshitz {
            particles(&mut v, p.n);
            sizes(&mut v, &p.sizes);
            positive(&mut v, "c", p.c);
        }
        if let Some(p) = &self.ct_check {
            particles(&mut v, p.n);
            sizes(&mut v, &p.sizes);
            if !(p.eta_min > 0.0 && p.eta_min <= 1.0) {
                v.push(format!("eta_min = {} outside (0, 1]", p.eta_min));
            }
        }
        if let Some(p) = &self.msa {
            if !(p.alpha > 1.0) {
                v.push(format!("alpha > 1 required, got {}", p.alpha));
            }
            if !(p.p > 0.0) {
                v.push(format!("p > 0 required, got {}", p.p));
            }
            if p.n_max == 0 {
                v.push("n_max must be at least 1".into());
            }
            if p.particles() == 0 || p.particles() > p.n_max {
                v.push(format!("n = {} outside 1..={}", p.particles(), p.n_max));
            }
            if p.scales.is_empty() {
                v.push("scales must not be empty".into());
            }
            if p.scales.iter().any(|&l| l < 2) {
                v.push("every initial scale L0 must be at least 2".into());
            }
            if let Some(e) = p.estar_override {
                positive(&mut v, "estar_override", e);
            }
        }
        if let Some(p) = &self.eigen_decay {
            particles(&mut v, p.n);
            positive(&mut v, "width", p.width);
        }
        if let Some(p) = &self.dynloc {
            particles(&mut v, p.n);
            if !(p.window[0] <= p.window[1]) {
                v.push(format!("window [{}, {}] is empty", p.window[0], p.window[1]));
            }
            if !(p.s > 0.0 && p.s <= 2.0) {
                v.push(format!("s = {} outside (0, 2]", p.s));
            }
            if p.k_radius > p.size {
                v.push(format!("k_radius = {} exceeds size = {}", p.k_radius, p.size));
            }
            if let Some(t) = &p.times {
                if t.is_empty() || t.iter().any(|x| !x.is_finite()) {
                    v.push("times must be a non-empty list of finite values".into());
                }
            }
        }
        if let Some(p) = &self.spectral_edge {
            particles(&mut v, p.n);
            sizes(&mut v, &p.sizes);
        }
        v
    }
}
