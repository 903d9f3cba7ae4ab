//! Configuration-driven experiment runner.
//!
//! A config is flat `key = value` text with dotted section prefixes
//! (`ast.rho = 1.0`); `#` starts a comment. Built-in presets are config
//! templates in the same format, and later text overrides earlier keys.
//!
//! A run ingests or synthesizes a signal, adds noise, takes the analytic
//! signal, runs each requested method, and writes into `output_dir`:
//!
//! | file | content |
//! |------|---------|
//! | `report.csv` | `method,renyi_bits,rmse`, one row per requested method |
//! | `tf_<method>.csv` | time-frequency raster |
//! | `ast_support.csv` | sparse AST-STF support points with certificates |
//! | `ast_trace.csv` | `iteration,objective,primal_residual,dual_residual` |
//! | `config.txt` | the fully resolved configuration |
//! | `summary.txt` | solver convergence, failures, wall-clock per method |
//! | `input_signal.txt` | the noisy real signal that was analyzed |
//!
//! `report.csv` depends only on the configuration and seed; timings live in
//! `summary.txt`.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use num_complex::Complex64;

use crate::ast::{admm_solve, calibrated_tau, AdmmParams, AstProblem, AstSolution};
use crate::baselines::{calibrated_lambda, reassign, stft, stft_l1};
use crate::error::{Error, Result};
use crate::frames::{make_frame_plan, FramePlan};
use crate::localization::{assemble_tfd, localize_solution, LocalizeParams, WindowSupport};
use crate::metrics::{renyi3, rmse, MapConvention, MetricReport, REPORT_HEADER};
use crate::signal::{
    add_noise, analytic_signal, generate_bat_chirp, generate_test_signal, read_signal, sigma_for_snr,
    write_signal, ComplexSignal, Signal,
};
use crate::tf::TfMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    AstStf,
    Stft,
    Reassignment,
    StftL1,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::AstStf, Method::Stft, Method::Reassignment, Method::StftL1];

    pub fn name(&self) -> &'static str {
        match self {
            Method::AstStf => "ast_stf",
            Method::Stft => "stft",
            Method::Reassignment => "reassignment",
            Method::StftL1 => "stft_l1",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "ast_stf" | "ast" => Some(Method::AstStf),
            "stft" => Some(Method::Stft),
            "reassignment" | "reassign" => Some(Method::Reassignment),
            "stft_l1" | "l1" => Some(Method::StftL1),
            _ => None,
        }
    }

    fn convention(&self) -> MapConvention {
        match self {
            Method::Reassignment => MapConvention::Energy,
            _ => MapConvention::Magnitude,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputSource {
    /// The two-component FM/chirp test signal.
    Synthetic,
    /// Harmonic downward chirp standing in for an echolocation call.
    BatChirp,
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    None,
    Sigma(f64),
    SnrDb(f64),
}

/// A parameter that is either given or derived from the noise level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Auto {
    Auto,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameConfig {
    pub length: usize,
    pub hop: usize,
    pub window_sigma_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AstConfig {
    /// Window for the AST-STF segments; `None` uses `frame.window_sigma_ratio`.
    pub window_sigma_ratio: Option<f64>,
    pub tau: Auto,
    /// Multiplies the noise-calibrated τ when `tau = auto`.
    pub tau_scale: f64,
    pub rho: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub residual_balancing: bool,
    pub track_psd: bool,
    pub oversample: usize,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub nfft: usize,
    pub dict_oversample: usize,
    pub lambda: Auto,
    pub lambda_scale: f64,
    pub max_iters: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub input: InputSource,
    /// Required for synthetic input; overrides a file header otherwise.
    pub sample_rate: Option<f64>,
    /// Synthetic signal length.
    pub length: usize,
    pub noise: Noise,
    pub seed: u64,
    pub frame: FrameConfig,
    pub ast: AstConfig,
    pub baselines: BaselineConfig,
    pub n_freq_bins: usize,
    pub output_dir: PathBuf,
    pub methods: Vec<Method>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            input: InputSource::Synthetic,
            sample_rate: Some(1024.0),
            length: 1024,
            noise: Noise::None,
            seed: 0,
            frame: FrameConfig {
                length: 64,
                hop: 32,
                window_sigma_ratio: 1.0 / 6.0,
            },
            ast: AstConfig {
                window_sigma_ratio: None,
                tau: Auto::Auto,
                tau_scale: 1.0,
                rho: 1.0,
                max_iters: 1000,
                tol: 1e-4,
                residual_balancing: true,
                track_psd: false,
                oversample: 64,
                epsilon: 1e-2,
            },
            baselines: BaselineConfig {
                nfft: 1024,
                dict_oversample: 16,
                lambda: Auto::Auto,
                lambda_scale: 1.0,
                max_iters: 20_000,
            },
            n_freq_bins: 1024,
            output_dir: PathBuf::from("out"),
            methods: Method::ALL.to_vec(),
        }
    }
}

const PRESET_TABLE1: &str = "\
# Noiseless two-component test signal, all four methods.
input = synthetic
sample_rate = 1024
length = 1024
noise = none
seed = 1
frame.length = 64
frame.hop = 32
frame.window_sigma_ratio = 0.16666666666666666
ast.window_sigma_ratio = 0.3
ast.tau = 2
ast.rho = 1
ast.max_iters = 1000
ast.tol = 1e-4
ast.residual_balancing = true
ast.track_psd = true
ast.oversample = 64
ast.epsilon = 0.01
baselines.nfft = 1024
baselines.dict_oversample = 16
baselines.lambda = 0.25
baselines.max_iters = 20000
n_freq_bins = 1024
methods = ast_stf, stft, reassignment, stft_l1
output_dir = out/table1
";

const PRESET_TABLE2: &str = "\
# Test signal with white Gaussian noise at 5 dB SNR (sigma = 0.5614).
input = synthetic
sample_rate = 1024
length = 1024
noise = sigma 0.5614
seed = 7
frame.length = 64
frame.hop = 32
frame.window_sigma_ratio = 0.16666666666666666
ast.window_sigma_ratio = 0.4
ast.tau = auto
ast.tau_scale = 0.5
ast.rho = 1
ast.max_iters = 1000
ast.tol = 1e-4
ast.residual_balancing = true
ast.track_psd = true
ast.oversample = 64
ast.epsilon = 0.01
baselines.nfft = 1024
baselines.dict_oversample = 16
baselines.lambda = auto
baselines.lambda_scale = 0.5
baselines.max_iters = 20000
n_freq_bins = 1024
methods = ast_stf, stft, reassignment, stft_l1
output_dir = out/table2
";

const PRESET_BAT: &str = "\
# 400-sample echolocation-style call at a 2.7 microsecond sampling period.
# Set input to a signal file to analyze a recording instead of the chirp.
input = bat
sample_rate = 370370.37
length = 400
noise = none
seed = 3
frame.length = 64
frame.hop = 32
frame.window_sigma_ratio = 0.16666666666666666
ast.window_sigma_ratio = 0.3
ast.tau = 1
ast.rho = 1
ast.max_iters = 1000
ast.tol = 1e-4
ast.residual_balancing = true
ast.track_psd = true
ast.oversample = 64
ast.epsilon = 0.01
baselines.nfft = 800
baselines.dict_oversample = 16
baselines.lambda = 0.125
baselines.max_iters = 20000
n_freq_bins = 800
methods = ast_stf, stft, reassignment, stft_l1
output_dir = out/bat
";

pub const PRESET_NAMES: [&str; 3] = ["table1", "table2", "bat"];

fn parse_f64(field: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .map_err(|_| Error::config(field, format!("expected a number, got '{v}'")))
}

fn parse_usize(field: &str, v: &str) -> Result<usize> {
    v.parse::<usize>()
        .map_err(|_| Error::config(field, format!("expected a non-negative integer, got '{v}'")))
}

fn parse_bool(field: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config(field, format!("expected true or false, got '{v}'"))),
    }
}

fn parse_auto(field: &str, v: &str) -> Result<Auto> {
    if v.eq_ignore_ascii_case("auto") {
        Ok(Auto::Auto)
    } else {
        parse_f64(field, v).map(Auto::Value)
    }
}

fn fmt_auto(a: Auto) -> String {
    match a {
        Auto::Auto => "auto".into(),
        Auto::Value(v) => format!("{v}"),
    }
}

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let text = match name {
            "table1" => PRESET_TABLE1,
            "table2" => PRESET_TABLE2,
            "bat" => PRESET_BAT,
            other => {
                return Err(Error::config(
                    "preset",
                    format!("unknown preset '{other}', expected one of {}", PRESET_NAMES.join(", ")),
                ))
            }
        };
        Self::parse(text)
    }

    /// Defaults overlaid with `text`, then validated.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Applies every `key = value` line of `text`. Does not validate.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected key = value, got '{line}'"),
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Sets one key. Unknown keys and malformed values name the field.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "input" => {
                self.input = match v {
                    "synthetic" | "eq23" => InputSource::Synthetic,
                    "bat" => InputSource::BatChirp,
                    "" => return Err(Error::config(key, "empty input")),
                    path => InputSource::File(PathBuf::from(path)),
                }
            }
            "sample_rate" => {
                self.sample_rate = if v.eq_ignore_ascii_case("header") {
                    None
                } else {
                    Some(parse_f64(key, v)?)
                }
            }
            "length" => self.length = parse_usize(key, v)?,
            "noise" => {
                let mut parts = v.split_whitespace();
                self.noise = match (parts.next(), parts.next(), parts.next()) {
                    (Some("none"), None, None) => Noise::None,
                    (Some("sigma"), Some(x), None) => Noise::Sigma(parse_f64(key, x)?),
                    (Some("snr_db"), Some(x), None) => Noise::SnrDb(parse_f64(key, x)?),
                    _ => return Err(Error::config(key, format!("expected 'none', 'sigma <value>' or 'snr_db <value>', got '{v}'"))),
                }
            }
            "seed" => {
                self.seed = v
                    .parse()
                    .map_err(|_| Error::config(key, format!("expected an unsigned integer, got '{v}'")))?
            }
            "frame.length" => self.frame.length = parse_usize(key, v)?,
            "frame.hop" => self.frame.hop = parse_usize(key, v)?,
            "frame.window_sigma_ratio" => self.frame.window_sigma_ratio = parse_f64(key, v)?,
            "ast.window_sigma_ratio" => {
                self.ast.window_sigma_ratio = if v.eq_ignore_ascii_case("frame") {
                    None
                } else {
                    Some(parse_f64(key, v)?)
                }
            }
            "ast.tau" => self.ast.tau = parse_auto(key, v)?,
            "ast.tau_scale" => self.ast.tau_scale = parse_f64(key, v)?,
            "ast.rho" => self.ast.rho = parse_f64(key, v)?,
            "ast.max_iters" => self.ast.max_iters = parse_usize(key, v)?,
            "ast.tol" => self.ast.tol = parse_f64(key, v)?,
            "ast.residual_balancing" => self.ast.residual_balancing = parse_bool(key, v)?,
            "ast.track_psd" => self.ast.track_psd = parse_bool(key, v)?,
            "ast.oversample" => self.ast.oversample = parse_usize(key, v)?,
            "ast.epsilon" => self.ast.epsilon = parse_f64(key, v)?,
            "baselines.nfft" => self.baselines.nfft = parse_usize(key, v)?,
            "baselines.dict_oversample" => self.baselines.dict_oversample = parse_usize(key, v)?,
            "baselines.lambda" => self.baselines.lambda = parse_auto(key, v)?,
            "baselines.lambda_scale" => self.baselines.lambda_scale = parse_f64(key, v)?,
            "baselines.max_iters" => self.baselines.max_iters = parse_usize(key, v)?,
            "n_freq_bins" => self.n_freq_bins = parse_usize(key, v)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            "methods" => {
                let mut methods = Vec::new();
                for name in v.trim_matches(|c| c == '[' || c == ']').split(',') {
                    let name = name.trim();
                    if name.is_empty() {
                        continue;
                    }
                    let m = Method::parse(name).ok_or_else(|| Error::config(key, format!("unknown method '{name}'")))?;
                    if methods.contains(&m) {
                        return Err(Error::config(key, format!("method '{name}' listed twice")));
                    }
                    methods.push(m);
                }
                self.methods = methods;
            }
            other => return Err(Error::config(other, "unknown key")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if self.methods.is_empty() {
            return Err(Error::config("methods", "at least one method is required"));
        }
        match &self.input {
            InputSource::File(path) => {
                if !path.is_file() {
                    return Err(Error::config("input", format!("file not found: {}", path.display())));
                }
            }
            _ => {
                if self.sample_rate.is_none() {
                    return Err(Error::config("sample_rate", "synthetic input needs a sample rate"));
                }
                if self.length < 2 {
                    return Err(Error::config("length", "must be at least 2"));
                }
            }
        }
        if let Some(fs) = self.sample_rate {
            if !positive(fs) {
                return Err(Error::config("sample_rate", format!("must be positive, got {fs}")));
            }
        }
        match self.noise {
            Noise::Sigma(s) if !(s.is_finite() && s >= 0.0) => {
                return Err(Error::config("noise", format!("sigma must be >= 0, got {s}")))
            }
            Noise::SnrDb(s) if !s.is_finite() => return Err(Error::config("noise", "snr_db must be finite")),
            _ => {}
        }
        if self.frame.length < 2 {
            return Err(Error::config("frame.length", "must be at least 2"));
        }
        if self.frame.hop == 0 || self.frame.hop > self.frame.length {
            return Err(Error::config("frame.hop", format!("must lie in [1, {}]", self.frame.length)));
        }
        if !(self.frame.window_sigma_ratio > 0.0) {
            return Err(Error::config("frame.window_sigma_ratio", "must be positive (inf for rectangular)"));
        }
        if let Some(r) = self.ast.window_sigma_ratio {
            if !(r > 0.0) {
                return Err(Error::config("ast.window_sigma_ratio", "must be positive (inf for rectangular)"));
            }
        }
        match self.ast.tau {
            Auto::Value(t) if !positive(t) => return Err(Error::config("ast.tau", format!("must be positive, got {t}"))),
            _ => {}
        }
        if !positive(self.ast.tau_scale) {
            return Err(Error::config("ast.tau_scale", "must be positive"));
        }
        if !positive(self.ast.rho) {
            return Err(Error::config("ast.rho", "must be positive"));
        }
        if self.ast.max_iters == 0 {
            return Err(Error::config("ast.max_iters", "must be at least 1"));
        }
        if !positive(self.ast.tol) {
            return Err(Error::config("ast.tol", "must be positive"));
        }
        if self.ast.oversample < 4 || !self.ast.oversample.is_power_of_two() {
            return Err(Error::config("ast.oversample", "must be a power of two >= 4"));
        }
        if !(self.ast.epsilon > 0.0 && self.ast.epsilon < 0.5) {
            return Err(Error::config("ast.epsilon", "must lie in (0, 0.5)"));
        }
        if self.baselines.nfft < self.frame.length {
            return Err(Error::config("baselines.nfft", "must be at least frame.length"));
        }
        if self.baselines.dict_oversample == 0 {
            return Err(Error::config("baselines.dict_oversample", "must be at least 1"));
        }
        match self.baselines.lambda {
            Auto::Value(l) if !positive(l) => {
                return Err(Error::config("baselines.lambda", format!("must be positive, got {l}")))
            }
            _ => {}
        }
        if !positive(self.baselines.lambda_scale) {
            return Err(Error::config("baselines.lambda_scale", "must be positive"));
        }
        if self.baselines.max_iters == 0 {
            return Err(Error::config("baselines.max_iters", "must be at least 1"));
        }
        if self.n_freq_bins < self.frame.length {
            return Err(Error::config("n_freq_bins", "must be at least frame.length"));
        }
        // Checked last so that range errors elsewhere are reported first.
        if self.ast.tau == Auto::Auto && self.methods.contains(&Method::AstStf) && !self.has_noise() {
            return Err(Error::config("ast.tau", "auto needs a noise level; set a value for noiseless runs"));
        }
        if self.baselines.lambda == Auto::Auto && self.methods.contains(&Method::StftL1) && !self.has_noise() {
            return Err(Error::config("baselines.lambda", "auto needs a noise level; set a value for noiseless runs"));
        }
        Ok(())
    }

    fn has_noise(&self) -> bool {
        match self.noise {
            Noise::None => false,
            Noise::Sigma(s) => s > 0.0,
            Noise::SnrDb(_) => true,
        }
    }

    /// The resolved configuration in the input format; parsing it back
    /// yields an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let input = match &self.input {
            InputSource::Synthetic => "synthetic".to_string(),
            InputSource::BatChirp => "bat".to_string(),
            InputSource::File(p) => p.display().to_string(),
        };
        let noise = match self.noise {
            Noise::None => "none".to_string(),
            Noise::Sigma(v) => format!("sigma {v}"),
            Noise::SnrDb(v) => format!("snr_db {v}"),
        };
        let _ = writeln!(s, "input = {input}");
        let _ = writeln!(s, "sample_rate = {}", self.sample_rate.map_or("header".into(), |v| format!("{v}")));
        let _ = writeln!(s, "length = {}", self.length);
        let _ = writeln!(s, "noise = {noise}");
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "frame.length = {}", self.frame.length);
        let _ = writeln!(s, "frame.hop = {}", self.frame.hop);
        let _ = writeln!(s, "frame.window_sigma_ratio = {}", self.frame.window_sigma_ratio);
        let _ = writeln!(
            s,
            "ast.window_sigma_ratio = {}",
            self.ast.window_sigma_ratio.map_or("frame".into(), |v| format!("{v}"))
        );
        let _ = writeln!(s, "ast.tau = {}", fmt_auto(self.ast.tau));
        let _ = writeln!(s, "ast.tau_scale = {}", self.ast.tau_scale);
        let _ = writeln!(s, "ast.rho = {}", self.ast.rho);
        let _ = writeln!(s, "ast.max_iters = {}", self.ast.max_iters);
        let _ = writeln!(s, "ast.tol = {}", self.ast.tol);
        let _ = writeln!(s, "ast.residual_balancing = {}", self.ast.residual_balancing);
        let _ = writeln!(s, "ast.track_psd = {}", self.ast.track_psd);
        let _ = writeln!(s, "ast.oversample = {}", self.ast.oversample);
        let _ = writeln!(s, "ast.epsilon = {}", self.ast.epsilon);
        let _ = writeln!(s, "baselines.nfft = {}", self.baselines.nfft);
        let _ = writeln!(s, "baselines.dict_oversample = {}", self.baselines.dict_oversample);
        let _ = writeln!(s, "baselines.lambda = {}", fmt_auto(self.baselines.lambda));
        let _ = writeln!(s, "baselines.lambda_scale = {}", self.baselines.lambda_scale);
        let _ = writeln!(s, "baselines.max_iters = {}", self.baselines.max_iters);
        let _ = writeln!(s, "n_freq_bins = {}", self.n_freq_bins);
        let _ = writeln!(s, "output_dir = {}", self.output_dir.display());
        let names: Vec<&str> = self.methods.iter().map(|m| m.name()).collect();
        let _ = writeln!(s, "methods = {}", names.join(", "));
        s
    }
}

/// Reads the signal a config refers to, before noise.
pub fn ingest_signal(config: &ExperimentConfig) -> Result<Signal> {
    match &config.input {
        InputSource::Synthetic => generate_test_signal(config.sample_rate.unwrap_or(1024.0), config.length),
        InputSource::BatChirp => generate_bat_chirp(config.sample_rate.unwrap_or(370_370.37), config.length),
        InputSource::File(path) => read_signal(path, config.sample_rate),
    }
}

/// AST-STF results kept for inspection after a run.
#[derive(Debug, Clone)]
pub struct AstOutcome {
    pub tau: f64,
    pub plan: FramePlan,
    pub solution: AstSolution,
    pub supports: Vec<WindowSupport>,
}

impl AstOutcome {
    /// Largest per-window dual polynomial maximum over `τ`.
    pub fn max_dual_ratio(&self) -> f64 {
        self.supports.iter().map(|s| s.dual_max / self.tau).fold(0.0, f64::max)
    }

    /// Smallest certificate over `τ` among accepted supports, if any.
    pub fn min_certificate_ratio(&self) -> Option<f64> {
        self.supports
            .iter()
            .flat_map(|s| s.certificates.iter().map(|c| c / self.tau))
            .reduce(f64::min)
    }
}

#[derive(Debug, Clone)]
pub struct MethodFailure {
    pub method: Method,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub methods: Vec<Method>,
    /// Successful methods, in requested order.
    pub rows: Vec<MetricReport>,
    pub failures: Vec<MethodFailure>,
    pub config_echo: String,
    /// Noise standard deviation actually used, if any.
    pub sigma: Option<f64>,
    pub ast: Option<AstOutcome>,
    /// λ used by the sparse STFT baseline, if it ran.
    pub stft_l1_lambda: Option<f64>,
    pub timings: Vec<(Method, Duration)>,
}

impl RunReport {
    pub fn row(&self, method: Method) -> Option<&MetricReport> {
        self.rows.iter().find(|r| r.method == method.name())
    }

    /// `report.csv` content. Failed methods keep their row with empty fields.
    pub fn report_csv(&self) -> String {
        let mut out = format!("{REPORT_HEADER}\n");
        for m in &self.methods {
            match self.row(*m) {
                Some(r) => out.push_str(&r.csv_row()),
                None => out.push_str(&format!("{},,", m.name())),
            }
            out.push('\n');
        }
        out
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        if let Some(sigma) = self.sigma {
            let _ = writeln!(s, "noise_sigma = {sigma}");
        }
        for r in &self.rows {
            let _ = writeln!(s, "{}: renyi entropy on {} values", r.method, r.convention.as_str());
        }
        if let Some(a) = &self.ast {
            let _ = writeln!(s, "ast_stf.tau = {}", a.tau);
            let _ = writeln!(s, "ast_stf.iterations = {}", a.solution.iterations);
            let _ = writeln!(s, "ast_stf.converged = {}", a.solution.converged);
            let _ = writeln!(s, "ast_stf.final_primal_residual = {:e}", a.solution.final_primal());
            let _ = writeln!(s, "ast_stf.final_dual_residual = {:e}", a.solution.final_dual());
            let _ = writeln!(s, "ast_stf.final_rho = {}", a.solution.final_rho);
            let _ = writeln!(s, "ast_stf.max_dual_over_tau = {:.6}", a.max_dual_ratio());
            if let Some(c) = a.min_certificate_ratio() {
                let _ = writeln!(s, "ast_stf.min_certificate_over_tau = {c:.6}");
            }
            if let Some(p) = a.solution.psd_trace.iter().copied().reduce(f64::min) {
                let _ = writeln!(s, "ast_stf.min_block_eigenvalue = {p:e}");
            }
            let atoms: usize = a.supports.iter().map(|w| w.frequencies.len()).sum();
            let _ = writeln!(s, "ast_stf.support_points = {atoms}");
        }
        if let Some(l) = self.stft_l1_lambda {
            let _ = writeln!(s, "stft_l1.lambda = {l}");
        }
        for f in &self.failures {
            let _ = writeln!(s, "FAILED {}: {}", f.method, f.message);
        }
        for (m, d) in &self.timings {
            let _ = writeln!(s, "time.{} = {:.3} s", m, d.as_secs_f64());
        }
        s
    }

    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

struct MethodResult {
    tf: TfMatrix,
    rmse: Option<f64>,
    ast: Option<AstOutcome>,
    lambda: Option<f64>,
    extra_files: Vec<(String, String)>,
}

struct Prepared<'a> {
    config: &'a ExperimentConfig,
    clean: Signal,
    y: ComplexSignal,
    sigma: Option<f64>,
    plan: FramePlan,
}

fn real_part(samples: &[Complex64]) -> Vec<f64> {
    samples.iter().map(|c| c.re).collect()
}

fn run_ast(p: &Prepared) -> Result<MethodResult> {
    let cfg = &p.config.ast;
    let n = p.y.len();
    let ratio = cfg.window_sigma_ratio.unwrap_or(p.config.frame.window_sigma_ratio);
    let plan = make_frame_plan(n, p.config.frame.length, p.config.frame.hop, ratio)?;
    let tau = match cfg.tau {
        Auto::Value(t) => t,
        Auto::Auto => cfg.tau_scale * calibrated_tau(p.sigma.unwrap_or(0.0), &plan)?,
    };
    let problem = AstProblem::new(p.y.clone(), plan.clone(), tau)?;
    let params = AdmmParams {
        max_iters: cfg.max_iters,
        tol_primal: cfg.tol,
        tol_dual: cfg.tol,
        rho: cfg.rho,
        residual_balancing: cfg.residual_balancing,
        track_psd: cfg.track_psd,
    };
    let solution = admm_solve(&problem, &params)?;
    let lp = LocalizeParams {
        oversample: cfg.oversample,
        epsilon: cfg.epsilon,
    };
    let supports = localize_solution(&solution, plan.num_frames(), tau, &lp)?;
    let fs = p.y.sample_rate();
    let tfd = assemble_tfd(&supports, &plan, fs, p.config.n_freq_bins)?;

    let mut dx = vec![Complex64::new(0.0, 0.0); n];
    plan.apply(&solution.x_hat, &mut dx);
    let estimate = Signal::new(real_part(&dx), fs)?;
    let err = rmse(&estimate, &p.clean)?;

    let mut trace = String::from("iteration,objective,primal_residual,dual_residual\n");
    for i in 0..solution.objective_trace.len() {
        let _ = writeln!(
            trace,
            "{},{:.12e},{:.6e},{:.6e}",
            i + 1,
            solution.objective_trace[i],
            solution.primal_trace[i],
            solution.dual_trace[i]
        );
    }
    Ok(MethodResult {
        tf: tfd.raster.clone(),
        rmse: Some(err),
        extra_files: vec![
            ("ast_support.csv".into(), tfd.sparse_csv()),
            ("ast_trace.csv".into(), trace),
        ],
        ast: Some(AstOutcome {
            tau,
            plan,
            solution,
            supports,
        }),
        lambda: None,
    })
}

fn run_method(p: &Prepared, method: Method) -> Result<MethodResult> {
    let simple = |tf: TfMatrix| MethodResult {
        tf,
        rmse: None,
        ast: None,
        lambda: None,
        extra_files: Vec::new(),
    };
    let b = &p.config.baselines;
    match method {
        Method::AstStf => run_ast(p),
        Method::Stft => stft(&p.y, &p.plan, b.nfft).map(simple),
        Method::Reassignment => reassign(&p.y, &p.plan, b.nfft).map(simple),
        Method::StftL1 => {
            let lambda = match b.lambda {
                Auto::Value(l) => l,
                Auto::Auto => b.lambda_scale * calibrated_lambda(p.sigma.unwrap_or(0.0), &p.plan)?,
            };
            let out = stft_l1(&p.y, &p.plan, b.dict_oversample, lambda, b.max_iters)?;
            let estimate = Signal::new(real_part(out.resynthesis.samples()), p.y.sample_rate())?;
            Ok(MethodResult {
                tf: out.tf,
                rmse: Some(rmse(&estimate, &p.clean)?),
                ast: None,
                lambda: Some(lambda),
                extra_files: Vec::new(),
            })
        }
    }
}

/// Runs the configured pipeline and writes all outputs. Method failures are
/// recorded in the report rather than returned; only configuration, input
/// and output errors abort the run.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let clean = ingest_signal(config)?;
    let sigma = match config.noise {
        Noise::None => None,
        Noise::Sigma(s) => Some(s),
        Noise::SnrDb(db) => Some(sigma_for_snr(&clean, db)),
    };
    let noisy = match sigma {
        Some(s) => add_noise(&clean, s, config.seed)?,
        None => clean.clone(),
    };
    let y = analytic_signal(&noisy)?;
    let plan = make_frame_plan(y.len(), config.frame.length, config.frame.hop, config.frame.window_sigma_ratio)?;

    let out_dir = &config.output_dir;
    std::fs::create_dir_all(out_dir)?;
    let config_echo = config.to_text();
    std::fs::write(out_dir.join("config.txt"), &config_echo)?;
    write_signal(out_dir.join("input_signal.txt"), &noisy)?;

    let prepared = Prepared {
        config,
        clean,
        y,
        sigma,
        plan,
    };
    let mut report = RunReport {
        methods: config.methods.clone(),
        rows: Vec::new(),
        failures: Vec::new(),
        config_echo,
        sigma,
        ast: None,
        stft_l1_lambda: None,
        timings: Vec::new(),
    };
    for &method in &config.methods {
        let start = Instant::now();
        let outcome = run_method(&prepared, method).and_then(|r| {
            let renyi = renyi3(r.tf.values())?;
            Ok((r, renyi))
        });
        report.timings.push((method, start.elapsed()));
        match outcome {
            Ok((r, renyi_bits)) => {
                r.tf.write_csv(out_dir.join(format!("tf_{}.csv", method.name())))?;
                for (name, content) in &r.extra_files {
                    std::fs::write(out_dir.join(name), content)?;
                }
                report.rows.push(MetricReport {
                    method: method.name().to_string(),
                    renyi_bits,
                    rmse: r.rmse,
                    convention: method.convention(),
                });
                if r.ast.is_some() {
                    report.ast = r.ast;
                }
                if r.lambda.is_some() {
                    report.stft_l1_lambda = r.lambda;
                }
            }
            Err(e) => report.failures.push(MethodFailure {
                method,
                message: e.to_string(),
            }),
        }
    }
    std::fs::write(out_dir.join("report.csv"), report.report_csv())?;
    std::fs::write(out_dir.join("summary.txt"), report.summary_text())?;
    Ok(report)
}
