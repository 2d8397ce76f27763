//! Minimum-SER stochastic-gradient adaptation of JPDF branches.
//!
//! Each branch minimizes a single-sample Parzen estimate of its symbol error
//! probability. For BPSK the estimate is
//! `½·erfc(Re[x]·sign(b₀) / (√2ρ))`; for square QAM it is the sum of the
//! real- and imaginary-axis terms `φ/2·erfc((Re[x] − ω(Re[b₀]−1)) / (√2ρ))`
//! (and likewise for `Im`), with `φ = (2√M − 2)/√M` and `ω = wᴴ T Pᴴ h₀₀`
//! the desired-symbol gain.
//!
//! Gradients are taken with respect to `w*` and `p*` and are twice the
//! formal Wirtinger derivative, i.e. exactly the real gradient
//! `∂f/∂Re + j·∂f/∂Im` of the objective.
//!
//! The preprocessor is always updated first with the current filter, then
//! the filter is updated with the new preprocessor.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jpdf::{self, Branch};
use crate::linalg::{dot_h, scale_in_place, sub_scaled, ONE, ZERO};
use crate::signal::{quantize_bpsk, Constellation};

/// `ρ = 1.06·σ`.
pub const KERNEL_WIDTH_FACTOR: f64 = 1.06;

pub fn kernel_width(noise_std: f64) -> f64 {
    KERNEL_WIDTH_FACTOR * noise_std
}

/// Training (known pilots) or decision-directed operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Training,
    DecisionDirected,
}

/// What to do when the desired-symbol gain vanishes and the QAM phase
/// rotation is undefined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RotationPolicy {
    /// Report [`Error::Degenerate`].
    #[default]
    Strict,
    /// Leave the vector unrotated for that step.
    SkipDegenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptConfig {
    pub mu_w: f64,
    pub mu_p: f64,
    /// Kernel width `ρ`.
    pub rho: f64,
    pub training_len: usize,
    pub rotation: RotationPolicy,
}

impl AdaptConfig {
    pub fn new(mu_w: f64, mu_p: f64, rho: f64, training_len: usize) -> Result<Self> {
        let cfg = Self {
            mu_w,
            mu_p,
            rho,
            training_len,
            rotation: RotationPolicy::Strict,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.mu_w >= 0.0 && self.mu_w.is_finite()) {
            problems.push(format!("mu_w must be finite and >= 0, got {}", self.mu_w));
        }
        if !(self.mu_p >= 0.0 && self.mu_p.is_finite()) {
            problems.push(format!("mu_p must be finite and >= 0, got {}", self.mu_p));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            problems.push(format!("kernel width must be > 0, got {}", self.rho));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    /// Mode in force for the `index`-th processed symbol (0-based).
    pub fn mode_at(&self, index: usize) -> Mode {
        if index < self.training_len {
            Mode::Training
        } else {
            Mode::DecisionDirected
        }
    }
}

/// Gradient pair with respect to `(w*, p*)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub w: Vec<Complex64>,
    pub p: Vec<Complex64>,
}

/// `φ = (2√M − 2)/√M`.
pub fn qam_phi(order: usize) -> f64 {
    let s = (order as f64).sqrt();
    (2.0 * s - 2.0) / s
}

#[inline]
fn sign(b0: Complex64) -> f64 {
    if b0.re >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// `½·erfc(Re[x]·sign(b₀) / (√2ρ))`.
pub fn ser_estimate_bpsk(x: Complex64, b0: Complex64, rho: f64) -> f64 {
    0.5 * libm::erfc(x.re * sign(b0) / (SQRT_2 * rho))
}

/// Real- plus imaginary-axis QAM error estimate for an output `x` with
/// desired-symbol gain `omega` (its real part is used).
pub fn ser_estimate_qam(x: Complex64, omega: Complex64, b0: Complex64, rho: f64, order: usize) -> f64 {
    let phi = qam_phi(order);
    let w = omega.re;
    let re = 0.5 * phi * libm::erfc((x.re - w * (b0.re - 1.0)) / (SQRT_2 * rho));
    let im = 0.5 * phi * libm::erfc((x.im - w * (b0.im - 1.0)) / (SQRT_2 * rho));
    re + im
}

/// BPSK objective of a branch on observation `r`.
pub fn branch_ser_bpsk(br: &Branch, r: &[Complex64], b0: Complex64, rho: f64) -> f64 {
    ser_estimate_bpsk(br.output(r), b0, rho)
}

/// QAM objective of a branch on observation `r`.
pub fn branch_ser_qam(br: &Branch, r: &[Complex64], h00: &[Complex64], b0: Complex64, rho: f64, order: usize) -> f64 {
    ser_estimate_qam(br.output(r), br.output(h00), b0, rho, order)
}

#[inline]
fn bpsk_factor(x: Complex64, b0: Complex64, rho: f64) -> f64 {
    -sign(b0) / ((2.0 * PI).sqrt() * rho) * (-(x.re * x.re) / (2.0 * rho * rho)).exp()
}

/// Coefficients `(α, β)` such that a QAM gradient is `α·(view of h₀₀) + β·(view of r)`.
#[inline]
fn qam_factors(x: Complex64, omega: f64, b0: Complex64, rho: f64, order: usize) -> (Complex64, Complex64) {
    let c = qam_phi(order) / ((2.0 * PI).sqrt() * rho);
    let two_rho2 = 2.0 * rho * rho;
    let (ar, ai) = (b0.re - 1.0, b0.im - 1.0);
    let ur = omega * ar - x.re;
    let ui = omega * ai - x.im;
    let er = c * (-(ur * ur) / two_rho2).exp();
    let ei = c * (-(ui * ui) / two_rho2).exp();
    (Complex64::new(er * ar + ei * ai, 0.0), Complex64::new(-er, ei))
}

fn combine(alpha: Complex64, h_view: &[Complex64], beta: Complex64, r_view: &[Complex64]) -> Vec<Complex64> {
    h_view.iter().zip(r_view).map(|(h, r)| alpha * h + beta * r).collect()
}

fn check_obs(br: &Branch, v: &[Complex64], what: &str) -> Result<()> {
    if v.len() != br.obs_len() {
        return Err(Error::Shape(format!(
            "{what} has {} entries, branch observes {}",
            v.len(),
            br.obs_len()
        )));
    }
    Ok(())
}

/// BPSK gradients at the branch's current `(w, p)`.
pub fn grad_bpsk(br: &Branch, r: &[Complex64], b0: Complex64, rho: f64) -> Result<Gradient> {
    check_obs(br, r, "observation")?;
    let a = br.project(r);
    let x = dot_h(&br.w, &a);
    let f = Complex64::new(bpsk_factor(x, b0, rho), 0.0);
    let mut v = br.preproc_view(r);
    let mut a = a;
    scale_in_place(&mut a, f);
    scale_in_place(&mut v, f);
    Ok(Gradient { w: a, p: v })
}

/// QAM gradients at the branch's current `(w, p)`; `ω` is recomputed from
/// `h00` and its real part used.
pub fn grad_qam(br: &Branch, r: &[Complex64], h00: &[Complex64], b0: Complex64, rho: f64, order: usize) -> Result<Gradient> {
    check_obs(br, r, "observation")?;
    check_obs(br, h00, "desired signature")?;
    let a = br.project(r);
    let ah = br.project(h00);
    let x = dot_h(&br.w, &a);
    let omega = dot_h(&br.w, &ah).re;
    let (alpha, beta) = qam_factors(x, omega, b0, rho, order);
    let v = br.preproc_view(r);
    let vh = br.preproc_view(h00);
    Ok(Gradient {
        w: combine(alpha, &ah, beta, &a),
        p: combine(alpha, &vh, beta, &v),
    })
}

/// Result of one adaptation step.
#[derive(Debug, Clone, PartialEq)]
pub struct Stepped {
    pub branch: Branch,
    /// Output of the updated branch on the same observation.
    pub output: Complex64,
    /// Desired-symbol gain after the step (QAM only; `1` for BPSK).
    pub gain: Complex64,
}

/// One BPSK iteration: `p ← p − μ_p·g_p(w, p)`, then `w ← w − μ_w·g_w(w, p_new)`.
pub fn update_bpsk(br: &Branch, r: &[Complex64], b0: Complex64, cfg: &AdaptConfig) -> Result<Stepped> {
    check_obs(br, r, "observation")?;
    let offsets = br.pattern.offsets();
    let mut p = br.p.clone();
    let mut w = br.w.clone();

    let v = jpdf::preproc_view(r, &w, offsets, p.len());
    let x = dot_h(&p, &v);
    let f = bpsk_factor(x, b0, cfg.rho);
    sub_scaled(&mut p, Complex64::new(cfg.mu_p * f, 0.0), &v);

    let a = jpdf::project(r, &p, offsets);
    let x = dot_h(&w, &a);
    let f = bpsk_factor(x, b0, cfg.rho);
    sub_scaled(&mut w, Complex64::new(cfg.mu_w * f, 0.0), &a);

    let output = dot_h(&w, &a);
    Ok(Stepped {
        branch: Branch {
            p,
            pattern: br.pattern.clone(),
            w,
        },
        output,
        gain: ONE,
    })
}

/// Which vector carries the phase rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RotateTarget {
    Filter,
    Preprocessor,
}

fn rotation_factor(omega: Complex64) -> Option<Complex64> {
    let mag = omega.norm();
    if mag > 0.0 && mag.is_finite() {
        Some(omega / mag)
    } else {
        None
    }
}

/// Scales `w` or `p` by `ω/|ω|` so the desired-symbol gain becomes real
/// positive; returns the rotated branch and the new gain.
pub fn qam_phase_rotate(br: &Branch, h00: &[Complex64], which: RotateTarget) -> Result<(Branch, f64)> {
    check_obs(br, h00, "desired signature")?;
    let omega = br.output(h00);
    let c = rotation_factor(omega).ok_or_else(|| {
        Error::Degenerate("desired-symbol gain is zero; phase rotation undefined".into())
    })?;
    let mut out = br.clone();
    match which {
        RotateTarget::Filter => scale_in_place(&mut out.w, c),
        RotateTarget::Preprocessor => scale_in_place(&mut out.p, c),
    }
    let w00 = out.output(h00).re;
    Ok((out, w00))
}

/// One QAM iteration: preprocessor update, gain recomputation and rotation of
/// `p`, filter update with the new `p`, gain recomputation and rotation of `w`.
pub fn update_qam(
    br: &Branch,
    r: &[Complex64],
    h00: &[Complex64],
    b0: Complex64,
    cfg: &AdaptConfig,
    order: usize,
) -> Result<Stepped> {
    check_obs(br, r, "observation")?;
    check_obs(br, h00, "desired signature")?;
    let offsets = br.pattern.offsets();
    let mut p = br.p.clone();
    let mut w = br.w.clone();
    let degenerate = || Error::Degenerate("desired-symbol gain is zero; phase rotation undefined".into());

    // preprocessor
    let v = jpdf::preproc_view(r, &w, offsets, p.len());
    let vh = jpdf::preproc_view(h00, &w, offsets, p.len());
    let x = dot_h(&p, &v);
    let omega = dot_h(&p, &vh).re;
    let (alpha, beta) = qam_factors(x, omega, b0, cfg.rho, order);
    for ((pj, hj), rj) in p.iter_mut().zip(&vh).zip(&v) {
        *pj -= cfg.mu_p * (alpha * hj + beta * rj);
    }
    match rotation_factor(dot_h(&p, &vh)) {
        Some(c) => scale_in_place(&mut p, c),
        None if cfg.rotation == RotationPolicy::SkipDegenerate => {}
        None => return Err(degenerate()),
    }

    // filter
    let a = jpdf::project(r, &p, offsets);
    let ah = jpdf::project(h00, &p, offsets);
    let x = dot_h(&w, &a);
    let omega = dot_h(&w, &ah).re;
    let (alpha, beta) = qam_factors(x, omega, b0, cfg.rho, order);
    for ((wd, hd), rd) in w.iter_mut().zip(&ah).zip(&a) {
        *wd -= cfg.mu_w * (alpha * hd + beta * rd);
    }
    match rotation_factor(dot_h(&w, &ah)) {
        Some(c) => scale_in_place(&mut w, c),
        None if cfg.rotation == RotationPolicy::SkipDegenerate => {}
        None => return Err(degenerate()),
    }

    let output = dot_h(&w, &a);
    let gain = dot_h(&w, &ah);
    Ok(Stepped {
        branch: Branch {
            p,
            pattern: br.pattern.clone(),
            w,
        },
        output,
        gain,
    })
}

/// Search rectangle for the automatic `(D, I)` selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AutoSelectConfig {
    pub d_min: usize,
    pub d_max: usize,
    pub i_min: usize,
    pub i_max: usize,
}

impl AutoSelectConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_min == 0 || self.i_min == 0 || self.d_min > self.d_max || self.i_min > self.i_max {
            return Err(Error::Config(format!(
                "empty (D, I) search rectangle: D in {}..={}, I in {}..={}",
                self.d_min, self.d_max, self.i_min, self.i_max
            )));
        }
        Ok(())
    }
}

/// Best prefix sizes of one branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrefixChoice {
    pub rank: usize,
    pub pre_len: usize,
    pub output: Complex64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutoSelection {
    pub per_branch: Vec<PrefixChoice>,
    pub best: usize,
    pub output: Complex64,
}

impl AutoSelection {
    pub fn choice(&self) -> PrefixChoice {
        self.per_branch[self.best]
    }
}

/// Outputs `x(D, I) = w^{(D)ᴴ} T^{(D)} R p^{(I)*}` for every prefix pair,
/// indexed `[D−1][I−1]`.
pub fn prefix_outputs(br: &Branch, r: &[Complex64]) -> Vec<Vec<Complex64>> {
    let offsets = br.pattern.offsets();
    let d_max = br.rank();
    let i_max = br.pre_len();
    let mut out = vec![vec![ZERO; i_max]; d_max];
    let mut row = vec![ZERO; i_max];
    let mut acc_rows = vec![ZERO; i_max];
    for d in 0..d_max {
        let v = offsets[d];
        let mut acc = ZERO;
        for j in 0..i_max {
            if v + j < r.len() {
                acc += r[v + j] * br.p[j].conj();
            }
            row[j] = acc;
        }
        let wc = br.w[d].conj();
        for j in 0..i_max {
            acc_rows[j] += wc * row[j];
            out[d][j] = acc_rows[j];
        }
    }
    out
}

/// Per-branch `(D, I)` minimizing `|b₀ − x(D, I)|` over the rectangle
/// (ties to smaller `D`, then smaller `I`), followed by the branch whose
/// optimum is nearest to `b₀` (ties to the lower index).
pub fn auto_select(branches: &[Branch], r: &[Complex64], b0: Complex64, cfg: &AutoSelectConfig) -> Result<AutoSelection> {
    cfg.validate()?;
    if branches.is_empty() {
        return Err(Error::Config("auto-selection needs at least one branch".into()));
    }
    let mut per_branch = Vec::with_capacity(branches.len());
    for br in branches {
        check_obs(br, r, "observation")?;
        if br.rank() < cfg.d_max || br.pre_len() < cfg.i_max {
            return Err(Error::Shape(format!(
                "branch carries D={}, I={}, search needs D_max={}, I_max={}",
                br.rank(),
                br.pre_len(),
                cfg.d_max,
                cfg.i_max
            )));
        }
        let table = prefix_outputs(br, r);
        let mut best: Option<PrefixChoice> = None;
        for d in cfg.d_min..=cfg.d_max {
            for i in cfg.i_min..=cfg.i_max {
                let x = table[d - 1][i - 1];
                let dist = (b0 - x).norm();
                if best.is_none_or(|b| dist < b.distance) {
                    best = Some(PrefixChoice {
                        rank: d,
                        pre_len: i,
                        output: x,
                        distance: dist,
                    });
                }
            }
        }
        per_branch.push(best.expect("non-empty rectangle"));
    }
    let mut best = 0;
    for (l, c) in per_branch.iter().enumerate() {
        if c.distance < per_branch[best].distance {
            best = l;
        }
    }
    let output = per_branch[best].output;
    Ok(AutoSelection {
        per_branch,
        best,
        output,
    })
}

/// Branch restricted to its first `rank` filter taps and `pre_len`
/// preprocessor taps.
pub fn prefix_branch(br: &Branch, rank: usize, pre_len: usize) -> Result<Branch> {
    if pre_len == 0 || pre_len > br.pre_len() {
        return Err(Error::Config(format!("prefix length {pre_len} outside 1..={}", br.pre_len())));
    }
    Ok(Branch {
        p: br.p[..pre_len].to_vec(),
        pattern: br.pattern.prefix(rank)?,
        w: br.w[..rank].to_vec(),
    })
}

/// Reference symbol for an update: the pilot in training mode, otherwise the
/// hard decision on `x`.
pub fn reference_symbol(
    mode: Mode,
    pilot: Complex64,
    x: Complex64,
    gain: Complex64,
    constellation: &Constellation,
) -> Result<Complex64> {
    match mode {
        Mode::Training => Ok(pilot),
        Mode::DecisionDirected if constellation.is_bpsk() => Ok(quantize_bpsk(x)),
        Mode::DecisionDirected => constellation.decide(x, gain),
    }
}
