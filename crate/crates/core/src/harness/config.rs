//! Experiment configuration: TOML ingestion, per-constellation defaults and validation.

use std::path::Path;

use serde::{Deserialize, Serialize, Serializer};

use crate::adapt::AutoSelectConfig;
use crate::channel::{noise_variance_for_snr, profile_from_db, GainNormalization, VEHICULAR_A_DB};
use crate::error::{Error, Result};
use crate::jpdf::prestored_pattern;
use crate::metrics::{Algorithm, AxisKind};
use crate::receiver::SelectionRule;
use crate::signal::Constellation;

/// Kernel width used when the noise variance is exactly zero.
pub const NOISELESS_KERNEL_WIDTH: f64 = 1e-3;

/// Step sizes and sizes tuned for each algorithm, per constellation family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Defaults {
    pub lms_mu: f64,
    pub mser_mu: f64,
    pub jpdf_mu: f64,
    pub jpdf_rank: usize,
    pub jpdf_pre_len: usize,
    pub auto_mu: f64,
    pub auto: AutoSelectConfig,
    pub branches: usize,
    pub users: usize,
    pub snr_db: f64,
    pub doppler: f64,
}

impl Defaults {
    pub fn for_constellation(c: &Constellation) -> Self {
        if c.is_bpsk() {
            Self {
                lms_mu: 0.015,
                mser_mu: 0.02,
                jpdf_mu: 0.01,
                jpdf_rank: 10,
                jpdf_pre_len: 12,
                auto_mu: 0.006,
                auto: AutoSelectConfig {
                    d_min: 6,
                    d_max: 10,
                    i_min: 6,
                    i_max: 12,
                },
                branches: 4,
                users: 6,
                snr_db: 10.0,
                doppler: 1e-5,
            }
        } else {
            Self {
                lms_mu: 0.0015,
                mser_mu: 0.004,
                jpdf_mu: 0.006,
                jpdf_rank: 12,
                jpdf_pre_len: 12,
                auto_mu: 0.003,
                auto: AutoSelectConfig {
                    d_min: 6,
                    d_max: 12,
                    i_min: 6,
                    i_max: 12,
                },
                branches: 4,
                users: 3,
                snr_db: 12.0,
                doppler: 1e-6,
            }
        }
    }
}

pub const DEFAULT_ANTENNAS: usize = 40;
pub const DEFAULT_WINDOW: usize = 3;
pub const DEFAULT_RUNS: usize = 100;
pub const DEFAULT_SYMBOLS: usize = 1500;
pub const DEFAULT_TRAINING: usize = 300;

/// Parses `BPSK`, `M-QAM`, `QAM-M`, `QAMM` or `QPSK` (case-insensitive).
pub fn parse_constellation(s: &str) -> Result<Constellation> {
    let t = s.trim().to_ascii_lowercase().replace(['_', ' '], "-");
    if t == "bpsk" {
        return Ok(Constellation::bpsk());
    }
    if t == "qpsk" {
        return Constellation::qam(4);
    }
    let digits = t.trim_end_matches("-qam").trim_end_matches("qam").trim_start_matches("qam").trim_matches('-');
    match digits.parse::<usize>() {
        Ok(m) if t.contains("qam") => Constellation::qam(m),
        _ => Err(Error::Config(format!("unknown constellation '{s}'"))),
    }
}

fn serialize_constellation<S: Serializer>(c: &Constellation, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&c.name())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelSpec {
    pub users: usize,
    pub antennas: usize,
    pub window: usize,
    pub profile: Vec<f64>,
    pub doppler: f64,
    pub snr_db: f64,
    /// Overrides the SNR-derived noise variance.
    pub noise_variance: Option<f64>,
    pub normalization: GainNormalization,
    /// Overrides `ρ = 1.06σ`.
    pub kernel_width: Option<f64>,
}

impl ChannelSpec {
    pub fn observation_len(&self) -> usize {
        self.antennas * self.window
    }

    pub fn noise_variance(&self, c: &Constellation) -> f64 {
        self.noise_variance
            .unwrap_or_else(|| noise_variance_for_snr(self.snr_db, c.energy()))
    }

    pub fn kernel_width(&self, c: &Constellation) -> f64 {
        if let Some(rho) = self.kernel_width {
            return rho;
        }
        let sigma = self.noise_variance(c).sqrt();
        if sigma > 0.0 {
            crate::adapt::kernel_width(sigma)
        } else {
            NOISELESS_KERNEL_WIDTH
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReceiverSpec {
    pub label: String,
    pub algorithm: Algorithm,
    pub mu_w: f64,
    pub mu_p: f64,
    pub branches: usize,
    pub rank: usize,
    pub pre_len: usize,
    pub auto: Option<AutoSelectConfig>,
    pub selection: SelectionRule,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub axis: AxisKind,
    pub values: Vec<f64>,
}

/// Fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub runs: usize,
    pub symbols: usize,
    pub training: usize,
    pub workers: usize,
    #[serde(serialize_with = "serialize_constellation")]
    pub constellation: Constellation,
    pub channel: ChannelSpec,
    pub receivers: Vec<ReceiverSpec>,
    pub sweep: Option<SweepSpec>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    runs: Option<usize>,
    symbols: Option<usize>,
    training: Option<usize>,
    workers: Option<usize>,
    constellation: Option<String>,
    algorithm: Option<String>,
    channel: Option<RawChannel>,
    receiver: Option<Vec<RawReceiver>>,
    sweep: Option<RawSweep>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    users: Option<usize>,
    antennas: Option<usize>,
    window: Option<usize>,
    profile: Option<Vec<f64>>,
    profile_db: Option<Vec<f64>>,
    doppler: Option<f64>,
    snr_db: Option<f64>,
    noise_variance: Option<f64>,
    normalization: Option<GainNormalization>,
    kernel_width: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReceiver {
    algorithm: Option<String>,
    label: Option<String>,
    mu: Option<f64>,
    mu_w: Option<f64>,
    mu_p: Option<f64>,
    branches: Option<usize>,
    rank: Option<usize>,
    preprocessor_len: Option<usize>,
    auto: Option<RawAuto>,
    selection: Option<SelectionRule>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawAuto {
    Flag(bool),
    Bounds(RawAutoBounds),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAutoBounds {
    d_min: Option<usize>,
    d_max: Option<usize>,
    i_min: Option<usize>,
    i_max: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    axis: AxisKind,
    values: Vec<f64>,
}

fn line_column(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map(|p| p + 1).unwrap_or(0) + 1;
    (line, column)
}

/// Reads and resolves a TOML experiment file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

/// Resolves a TOML experiment description, applying defaults for absent keys.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map(|s| line_column(text, s.start)).unwrap_or((0, 0));
        Error::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    resolve(raw)
}

fn resolve(raw: RawConfig) -> Result<ExperimentConfig> {
    let mut problems = Vec::new();

    let constellation = match raw.constellation.as_deref() {
        None => Constellation::bpsk(),
        Some(s) => parse_constellation(s).unwrap_or_else(|e| {
            problems.push(e.to_string());
            Constellation::bpsk()
        }),
    };
    let defaults = Defaults::for_constellation(&constellation);

    let ch = raw.channel.unwrap_or_default();
    let profile = match (ch.profile, ch.profile_db) {
        (Some(_), Some(_)) => {
            problems.push("channel: give either profile or profile_db, not both".into());
            profile_from_db(&VEHICULAR_A_DB)
        }
        (Some(p), None) => p,
        (None, Some(db)) => profile_from_db(&db),
        (None, None) => profile_from_db(&VEHICULAR_A_DB),
    };
    let channel = ChannelSpec {
        users: ch.users.unwrap_or(defaults.users),
        antennas: ch.antennas.unwrap_or(DEFAULT_ANTENNAS),
        window: ch.window.unwrap_or(DEFAULT_WINDOW),
        profile,
        doppler: ch.doppler.unwrap_or(defaults.doppler),
        snr_db: ch.snr_db.unwrap_or(defaults.snr_db),
        noise_variance: ch.noise_variance,
        normalization: ch.normalization.unwrap_or_default(),
        kernel_width: ch.kernel_width,
    };

    let raw_receivers = match (raw.receiver, raw.algorithm) {
        (Some(list), None) => list,
        (None, Some(alg)) => vec![RawReceiver {
            algorithm: Some(alg),
            ..Default::default()
        }],
        (Some(list), Some(_)) => {
            problems.push("give either a top-level algorithm or [[receiver]] tables, not both".into());
            list
        }
        (None, None) => {
            problems.push("no receiver configured: set algorithm or add [[receiver]] tables".into());
            Vec::new()
        }
    };
    let obs_len = channel.observation_len();
    let mut receivers = Vec::new();
    for (n, rr) in raw_receivers.into_iter().enumerate() {
        match resolve_receiver(rr, obs_len, &defaults) {
            Ok(spec) => receivers.push(spec),
            Err(Error::Validation(list)) => {
                problems.extend(list.into_iter().map(|m| format!("receiver[{n}]: {m}")))
            }
            Err(e) => problems.push(format!("receiver[{n}]: {e}")),
        }
    }
    let mut seen = std::collections::HashMap::new();
    for spec in receivers.iter_mut() {
        let count = seen.entry(spec.label.clone()).or_insert(0usize);
        *count += 1;
        if *count > 1 {
            spec.label = format!("{}#{}", spec.label, count);
        }
    }

    let sweep = raw.sweep.map(|s| SweepSpec {
        axis: s.axis,
        values: s.values,
    });

    let cfg = ExperimentConfig {
        seed: raw.seed.unwrap_or(1),
        runs: raw.runs.unwrap_or(DEFAULT_RUNS),
        symbols: raw.symbols.unwrap_or(DEFAULT_SYMBOLS),
        training: raw.training.unwrap_or(DEFAULT_TRAINING),
        workers: raw.workers.unwrap_or(1),
        constellation,
        channel,
        receivers,
        sweep,
    };
    problems.extend(cfg.problems());
    if problems.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Validation(problems))
    }
}

fn resolve_receiver(rr: RawReceiver, obs_len: usize, d: &Defaults) -> Result<ReceiverSpec> {
    let mut problems = Vec::new();
    let algorithm: Algorithm = match rr.algorithm.as_deref() {
        Some(s) => s.parse()?,
        None => return Err(Error::Config("algorithm missing".into())),
    };
    if !algorithm.is_simulated() {
        return Err(Error::Config(format!(
            "{algorithm} has no simulated receiver (complexity rows only)"
        )));
    }
    let full_rank_only = |name: &str, v: &Option<usize>, problems: &mut Vec<String>| {
        if v.is_some() {
            problems.push(format!("{name} applies only to MSER-JPDF"));
        }
    };
    let spec = match algorithm {
        Algorithm::MserJpdf => {
            let auto = match rr.auto {
                None | Some(RawAuto::Flag(false)) => None,
                Some(RawAuto::Flag(true)) => Some(d.auto),
                Some(RawAuto::Bounds(b)) => Some(AutoSelectConfig {
                    d_min: b.d_min.unwrap_or(d.auto.d_min),
                    d_max: b.d_max.unwrap_or(d.auto.d_max),
                    i_min: b.i_min.unwrap_or(d.auto.i_min),
                    i_max: b.i_max.unwrap_or(d.auto.i_max),
                }),
            };
            let mu = rr.mu.unwrap_or(if auto.is_some() { d.auto_mu } else { d.jpdf_mu });
            let (rank, pre_len) = match &auto {
                Some(a) => {
                    if rr.rank.is_some_and(|r| r != a.d_max) || rr.preprocessor_len.is_some_and(|i| i != a.i_max) {
                        problems.push("with auto selection, rank/preprocessor_len must equal d_max/i_max".into());
                    }
                    (a.d_max, a.i_max)
                }
                None => (rr.rank.unwrap_or(d.jpdf_rank), rr.preprocessor_len.unwrap_or(d.jpdf_pre_len)),
            };
            let branches = rr.branches.unwrap_or(d.branches);
            let suffix = match rr.selection {
                Some(SelectionRule::Decision) => "-dd-select",
                _ => "",
            };
            let label = rr.label.unwrap_or_else(|| match &auto {
                Some(_) => format!("MSER-JPDF-auto-B{branches}{}", suffix),
                None => format!("MSER-JPDF-B{branches}-D{rank}-I{pre_len}{}", suffix),
            });
            ReceiverSpec {
                label,
                algorithm,
                mu_w: rr.mu_w.unwrap_or(mu),
                mu_p: rr.mu_p.unwrap_or(mu),
                branches,
                rank,
                pre_len,
                auto,
                selection: rr.selection.unwrap_or_default(),
            }
        }
        _ => {
            full_rank_only("branches", &rr.branches, &mut problems);
            full_rank_only("rank", &rr.rank, &mut problems);
            full_rank_only("preprocessor_len", &rr.preprocessor_len, &mut problems);
            if rr.auto.is_some() {
                problems.push("auto applies only to MSER-JPDF".into());
            }
            if rr.selection.is_some() {
                problems.push("selection applies only to MSER-JPDF".into());
            }
            if rr.mu_p.is_some() {
                problems.push("mu_p applies only to MSER-JPDF".into());
            }
            let default_mu = match algorithm {
                Algorithm::FullRankLms => d.lms_mu,
                Algorithm::FullRankMser => d.mser_mu,
                _ => 0.0,
            };
            if algorithm == Algorithm::MatchedFilter && (rr.mu.is_some() || rr.mu_w.is_some()) {
                problems.push("the matched filter takes no step size".into());
            }
            ReceiverSpec {
                label: rr.label.unwrap_or_else(|| algorithm.id().to_string()),
                algorithm,
                mu_w: rr.mu_w.or(rr.mu).unwrap_or(default_mu),
                mu_p: 0.0,
                branches: 1,
                rank: obs_len,
                pre_len: 1,
                auto: None,
                selection: SelectionRule::default(),
            }
        }
    };
    if problems.is_empty() {
        Ok(spec)
    } else {
        Err(Error::Validation(problems))
    }
}

impl ExperimentConfig {
    /// Resolves a config from TOML text.
    pub fn from_toml(text: &str) -> Result<Self> {
        parse_config(text)
    }

    /// Semantic problems, empty when valid.
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        if self.runs == 0 {
            p.push("runs must be >= 1".into());
        }
        if self.symbols == 0 {
            p.push("symbols must be >= 1".into());
        }
        if self.training > self.symbols {
            p.push(format!(
                "training ({}) exceeds symbols per run ({})",
                self.training, self.symbols
            ));
        }
        if self.workers == 0 {
            p.push("workers must be >= 1".into());
        }
        let ch = &self.channel;
        if ch.users == 0 {
            p.push("channel.users must be >= 1".into());
        }
        if ch.antennas == 0 {
            p.push("channel.antennas must be >= 1".into());
        }
        if ch.window == 0 {
            p.push("channel.window must be >= 1".into());
        }
        if ch.profile.is_empty() || ch.profile.iter().any(|v| !(*v >= 0.0)) {
            p.push("channel profile must be non-empty with entries >= 0".into());
        } else if (ch.profile.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            p.push("channel profile must sum to 1".into());
        }
        if !(ch.doppler >= 0.0 && ch.doppler.is_finite()) {
            p.push("channel.doppler must be finite and >= 0".into());
        }
        if !ch.snr_db.is_finite() {
            p.push("channel.snr_db must be finite".into());
        }
        if ch.noise_variance.is_some_and(|v| !(v >= 0.0)) {
            p.push("channel.noise_variance must be >= 0".into());
        }
        if ch.kernel_width.is_some_and(|v| !(v > 0.0)) {
            p.push("channel.kernel_width must be > 0".into());
        }
        if self.receivers.is_empty() {
            p.push("at least one receiver is required".into());
        }
        for r in &self.receivers {
            p.extend(self.receiver_problems(r).into_iter().map(|m| format!("{}: {m}", r.label)));
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                p.push("sweep.values must not be empty".into());
            }
            if s.axis == AxisKind::Iterations {
                p.push("iterations is not a sweep axis; every run records the learning curve".into());
            }
            if s.values.iter().any(|v| !v.is_finite()) {
                p.push("sweep values must be finite".into());
            }
            if matches!(
                s.axis,
                AxisKind::Users | AxisKind::Rank | AxisKind::PreprocessorLen | AxisKind::Branches
            ) && s.values.iter().any(|v| !(*v >= 1.0 && v.fract() == 0.0))
            {
                p.push(format!("sweep over {} needs positive integers", s.axis.label()));
            }
        }
        p
    }

    fn receiver_problems(&self, r: &ReceiverSpec) -> Vec<String> {
        let mut p = Vec::new();
        let obs_len = self.channel.observation_len();
        if r.algorithm != Algorithm::MatchedFilter && !(r.mu_w > 0.0 && r.mu_w.is_finite()) {
            p.push(format!("mu_w must be > 0, got {}", r.mu_w));
        }
        if r.algorithm != Algorithm::MserJpdf {
            return p;
        }
        if !(r.mu_p >= 0.0 && r.mu_p.is_finite()) {
            p.push(format!("mu_p must be >= 0, got {}", r.mu_p));
        }
        if r.branches == 0 {
            p.push("branches must be >= 1".into());
        }
        if r.pre_len == 0 || (r.pre_len >= obs_len && obs_len > 1) {
            p.push(format!("preprocessor_len must be in 1..{obs_len}, got {}", r.pre_len));
        }
        if let Some(a) = &r.auto {
            if let Err(e) = a.validate() {
                p.push(e.to_string());
            }
        }
        if r.rank == 0 {
            p.push("rank must be >= 1".into());
        } else if obs_len > 0 {
            if let Some(l) = (0..r.branches).find(|&l| prestored_pattern(obs_len, r.rank, l).is_err()) {
                p.push(format!(
                    "rank {} with {} branches does not fit LP={obs_len} (branch {l} overflows)",
                    r.rank, r.branches
                ));
            }
        }
        p
    }

    pub fn noise_variance(&self) -> f64 {
        self.channel.noise_variance(&self.constellation)
    }

    pub fn kernel_width(&self) -> f64 {
        self.channel.kernel_width(&self.constellation)
    }

    /// Sweep coordinates, or the single SNR point when no sweep is set.
    pub fn points(&self) -> (AxisKind, Vec<f64>) {
        match &self.sweep {
            Some(s) => (s.axis, s.values.clone()),
            None => (AxisKind::SnrDb, vec![self.channel.snr_db]),
        }
    }

    /// Copy with the sweep axis set to `x`.
    pub fn at_point(&self, axis: AxisKind, x: f64) -> Result<Self> {
        let mut c = self.clone();
        c.sweep = None;
        match axis {
            AxisKind::SnrDb => c.channel.snr_db = x,
            AxisKind::Users => c.channel.users = x as usize,
            AxisKind::Doppler => c.channel.doppler = x,
            AxisKind::Rank | AxisKind::PreprocessorLen | AxisKind::Branches => {
                let v = x as usize;
                for r in c.receivers.iter_mut().filter(|r| r.algorithm == Algorithm::MserJpdf) {
                    match axis {
                        AxisKind::Branches => r.branches = v,
                        _ if r.auto.is_some() => {}
                        AxisKind::Rank => r.rank = v,
                        _ => r.pre_len = v,
                    }
                }
            }
            AxisKind::Iterations => {
                return Err(Error::Config("iterations is not a sweep axis".into()));
            }
        }
        let problems = c.problems();
        if problems.is_empty() {
            Ok(c)
        } else {
            Err(Error::Validation(problems))
        }
    }

    /// Resolved configuration as pretty JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
