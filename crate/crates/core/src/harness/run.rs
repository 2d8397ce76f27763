//! Seeded Monte Carlo execution.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, ReceiverSpec};
use crate::adapt::Mode;
use crate::channel::{AntennaStreams, ChannelConfig, ChannelRealization};
use crate::error::{Error, Result};
use crate::linalg::ZERO;
use crate::metrics::{binomial_halfwidth, mean_ci, Algorithm, AxisKind, SerCurve, SerPoint};
use crate::receiver::{receiver_adapt_config, FullRankKind, FullRankReceiver, JpdfReceiver, MatchedFilterReceiver, Receiver};
use crate::seeding::{trial_rng, StreamKind};
use crate::signal::draw_with;

/// Channel, symbols and received samples of one trial, shared by every
/// receiver under test.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub symbols: Vec<Vec<Complex64>>,
    pub realization: ChannelRealization,
    pub streams: AntennaStreams,
    window: usize,
}

impl TrialData {
    /// Instant at which the `n`-th processed symbol is detected.
    pub fn instant(&self, n: usize) -> usize {
        n + self.window - 1
    }

    pub fn observation(&self, n: usize, out: &mut [Complex64]) -> Result<()> {
        self.streams.window_into(self.instant(n), out)
    }

    pub fn desired_signature(&self, n: usize) -> Result<Vec<Complex64>> {
        self.realization.desired_signature(self.instant(n), self.window)
    }

    pub fn desired_symbol(&self, n: usize) -> Complex64 {
        self.symbols[0][self.instant(n)]
    }
}

pub fn channel_config(cfg: &ExperimentConfig) -> ChannelConfig {
    ChannelConfig {
        users: cfg.channel.users,
        antennas: cfg.channel.antennas,
        window: cfg.channel.window,
        profile: cfg.channel.profile.clone(),
        doppler: cfg.channel.doppler,
        noise_variance: cfg.noise_variance(),
        normalization: cfg.channel.normalization,
        seed: cfg.seed,
    }
}

/// Draws trial `trial` of sweep point `point`.
pub fn generate_trial(cfg: &ExperimentConfig, point: usize, trial: usize) -> Result<TrialData> {
    let ch = channel_config(cfg);
    ch.validate()?;
    let instants = cfg.symbols + ch.window - 1;
    let (t, p) = (trial as u64, point as u64);
    let mut rng = trial_rng(cfg.seed, t, StreamKind::Channel, p);
    let realization = ChannelRealization::generate_with(&ch, instants, &mut rng);
    let mut rng = trial_rng(cfg.seed, t, StreamKind::Symbols, p);
    let symbols: Vec<Vec<Complex64>> = (0..ch.users)
        .map(|_| draw_with(&cfg.constellation, instants, &mut rng))
        .collect();
    let mut rng = trial_rng(cfg.seed, t, StreamKind::Noise, p);
    let streams = AntennaStreams::synthesize(&realization, &symbols, ch.window, ch.noise_variance, &mut rng)?;
    Ok(TrialData {
        symbols,
        realization,
        streams,
        window: ch.window,
    })
}

pub fn build_receiver(spec: &ReceiverSpec, cfg: &ExperimentConfig) -> Result<Box<dyn Receiver + Send>> {
    let obs_len = cfg.channel.observation_len();
    let rho = cfg.kernel_width();
    let c = cfg.constellation.clone();
    Ok(match spec.algorithm {
        Algorithm::MserJpdf => {
            let adapt = receiver_adapt_config(spec.mu_w, spec.mu_p, rho, cfg.training)?;
            Box::new(
                JpdfReceiver::new(obs_len, spec.branches, spec.rank, spec.pre_len, adapt, spec.auto, c)?
                    .with_selection(spec.selection),
            )
        }
        Algorithm::FullRankLms => Box::new(FullRankReceiver::new(FullRankKind::Lms, obs_len, spec.mu_w, rho, c)?),
        Algorithm::FullRankMser => Box::new(FullRankReceiver::new(FullRankKind::Mser, obs_len, spec.mu_w, rho, c)?),
        Algorithm::MatchedFilter => Box::new(MatchedFilterReceiver::new(c)),
        other => {
            return Err(Error::Config(format!("{other} has no simulated receiver")));
        }
    })
}

/// Outcome of one receiver over one trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub label: String,
    /// Per-symbol error indicators, training included.
    pub errors: Vec<bool>,
    pub branches: Vec<usize>,
    pub final_filter_norms: Vec<f64>,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl RunResult {
    /// Error fraction over symbols `[from, to)`.
    pub fn ser_over(&self, from: usize, to: usize) -> f64 {
        let seg = &self.errors[from..to];
        seg.iter().filter(|e| **e).count() as f64 / seg.len() as f64
    }
}

/// Runs `spec` over the prepared `data`.
pub fn run_receiver_on(spec: &ReceiverSpec, cfg: &ExperimentConfig, data: &TrialData) -> Result<RunResult> {
    let start = Instant::now();
    let mut rx = build_receiver(spec, cfg)?;
    let mut r = vec![ZERO; cfg.channel.observation_len()];
    let mut errors = Vec::with_capacity(cfg.symbols);
    let mut branches = Vec::with_capacity(cfg.symbols);
    for n in 0..cfg.symbols {
        data.observation(n, &mut r)?;
        let h00 = data.desired_signature(n)?;
        let truth = data.desired_symbol(n);
        let mode = if n < cfg.training {
            Mode::Training
        } else {
            Mode::DecisionDirected
        };
        let out = rx.step(&r, &h00, truth, mode)?;
        errors.push(out.decision != truth);
        branches.push(out.branch);
    }
    Ok(RunResult {
        label: spec.label.clone(),
        errors,
        branches,
        final_filter_norms: rx.filter_norms(),
        elapsed: start.elapsed(),
    })
}

/// All receivers on trial `trial` of sweep point `point`.
pub fn run_trial(cfg: &ExperimentConfig, point: usize, trial: usize) -> Result<Vec<RunResult>> {
    let data = generate_trial(cfg, point, trial)?;
    cfg.receivers.iter().map(|s| run_receiver_on(s, cfg, &data)).collect()
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))
}

/// Every trial of one sweep point, in trial order: `[trial][receiver]`.
pub fn run_trials(cfg: &ExperimentConfig, point: usize) -> Result<Vec<Vec<RunResult>>> {
    pool(cfg.workers)?.install(|| {
        (0..cfg.runs)
            .into_par_iter()
            .map(|t| run_trial(cfg, point, t))
            .collect()
    })
}

/// Aggregate of one receiver at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReceiverSummary {
    pub label: String,
    pub x: f64,
    /// Post-training SER pooled over runs.
    pub ser: f64,
    pub ci_halfwidth: f64,
    pub run_ci_halfwidth: f64,
    /// SER over every symbol, training included.
    pub overall_ser: f64,
    /// Per-symbol error rate across runs.
    pub learning: Vec<f64>,
    pub mean_final_norm: f64,
    pub branch_usage: Vec<usize>,
}

pub fn summarize(cfg: &ExperimentConfig, x: f64, trials: &[Vec<RunResult>]) -> Vec<ReceiverSummary> {
    let runs = trials.len();
    let post = cfg.symbols - cfg.training;
    let mut out = Vec::with_capacity(cfg.receivers.len());
    for (k, spec) in cfg.receivers.iter().enumerate() {
        let mut post_errors = 0usize;
        let mut all_errors = 0usize;
        let mut per_run = Vec::with_capacity(runs);
        let mut learning = vec![0.0; cfg.symbols];
        let mut norm_sum = 0.0;
        let mut usage = vec![0usize; spec.branches];
        for t in trials {
            let rr = &t[k];
            let e_post = rr.errors[cfg.training..].iter().filter(|e| **e).count();
            post_errors += e_post;
            all_errors += rr.errors.iter().filter(|e| **e).count();
            if post > 0 {
                per_run.push(e_post as f64 / post as f64);
            }
            for (l, e) in learning.iter_mut().zip(&rr.errors) {
                if *e {
                    *l += 1.0;
                }
            }
            norm_sum += rr.final_filter_norms.iter().map(|v| v * v).sum::<f64>().sqrt();
            for &b in &rr.branches {
                if b < usage.len() {
                    usage[b] += 1;
                }
            }
        }
        for l in learning.iter_mut() {
            *l /= runs as f64;
        }
        let counted = runs * post;
        let ser = if counted > 0 {
            post_errors as f64 / counted as f64
        } else {
            f64::NAN
        };
        out.push(ReceiverSummary {
            label: spec.label.clone(),
            x,
            ser,
            ci_halfwidth: binomial_halfwidth(ser, counted),
            run_ci_halfwidth: mean_ci(&per_run).1,
            overall_ser: all_errors as f64 / (runs * cfg.symbols) as f64,
            learning,
            mean_final_norm: norm_sum / runs as f64,
            branch_usage: usage,
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub axis: AxisKind,
    /// One curve per receiver over the sweep axis.
    pub curves: Vec<SerCurve>,
    /// Per-symbol SER curves, recorded when no sweep is configured.
    pub learning: Vec<SerCurve>,
    pub summaries: Vec<Vec<ReceiverSummary>>,
}

/// Runs every sweep point; outputs depend only on the config, never on the
/// worker count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let problems = cfg.problems();
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    let (axis, xs) = cfg.points();
    let post = cfg.symbols - cfg.training;
    let mut curves: Vec<SerCurve> = cfg
        .receivers
        .iter()
        .map(|r| SerCurve {
            axis,
            algorithm: r.label.clone(),
            seed: cfg.seed,
            runs: cfg.runs,
            points: Vec::with_capacity(xs.len()),
        })
        .collect();
    let mut summaries = Vec::with_capacity(xs.len());
    for (pi, &x) in xs.iter().enumerate() {
        let point_cfg = if cfg.sweep.is_some() {
            cfg.at_point(axis, x)?
        } else {
            cfg.clone()
        };
        let trials = run_trials(&point_cfg, pi)?;
        let sums = summarize(&point_cfg, x, &trials);
        for (curve, s) in curves.iter_mut().zip(&sums) {
            curve.points.push(SerPoint {
                x,
                ser: s.ser,
                ci_halfwidth: s.ci_halfwidth,
                symbols: cfg.runs * post,
                run_ci_halfwidth: s.run_ci_halfwidth,
            });
        }
        summaries.push(sums);
    }
    let learning = if cfg.sweep.is_none() {
        summaries[0]
            .iter()
            .map(|s| SerCurve {
                axis: AxisKind::Iterations,
                algorithm: s.label.clone(),
                seed: cfg.seed,
                runs: cfg.runs,
                points: s
                    .learning
                    .iter()
                    .enumerate()
                    .map(|(n, &p)| SerPoint {
                        x: (n + 1) as f64,
                        ser: p,
                        ci_halfwidth: binomial_halfwidth(p, cfg.runs),
                        symbols: cfg.runs,
                        run_ci_halfwidth: binomial_halfwidth(p, cfg.runs),
                    })
                    .collect(),
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(ExperimentResult {
        axis,
        curves,
        learning,
        summaries,
    })
}
