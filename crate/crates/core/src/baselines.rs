//! Full-rank reference receivers: LMS, minimum-SER stochastic gradient and
//! the matched filter.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::adapt::{qam_phi, AdaptConfig, RotationPolicy};
use crate::error::{Error, Result};
use crate::linalg::{dot_h, norm_sqr, scale_in_place};
use crate::signal::Constellation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullRankFilter {
    pub w: Vec<Complex64>,
    pub mu: f64,
}

impl FullRankFilter {
    pub fn new(w: Vec<Complex64>, mu: f64) -> Self {
        Self { w, mu }
    }

    pub fn output(&self, r: &[Complex64]) -> Complex64 {
        dot_h(&self.w, r)
    }

    fn check(&self, r: &[Complex64]) -> Result<()> {
        if r.len() != self.w.len() {
            return Err(Error::Shape(format!(
                "observation has {} entries, filter has {}",
                r.len(),
                self.w.len()
            )));
        }
        Ok(())
    }
}

/// `e = b₀ − wᴴr`, `w ← w + μ·e*·r`.
pub fn lms_update(f: &FullRankFilter, r: &[Complex64], b0: Complex64) -> Result<FullRankFilter> {
    f.check(r)?;
    let e = b0 - f.output(r);
    let g = f.mu * e.conj();
    let w = f.w.iter().zip(r).map(|(w, r)| w + g * r).collect();
    Ok(FullRankFilter { w, mu: f.mu })
}

/// One full-rank minimum-SER step with step size `f.mu` and kernel `cfg.rho`.
///
/// For QAM the filter is rotated afterwards so that `wᴴh₀₀` is real positive;
/// `cfg.rotation` decides what happens when that gain vanishes.
pub fn mser_fullrank_update(
    f: &FullRankFilter,
    r: &[Complex64],
    h00: &[Complex64],
    b0: Complex64,
    cfg: &AdaptConfig,
    constellation: &Constellation,
) -> Result<FullRankFilter> {
    f.check(r)?;
    let rho = cfg.rho;
    let x = f.output(r);
    let mut w = f.w.clone();
    if constellation.is_bpsk() {
        let s = if b0.re >= 0.0 { 1.0 } else { -1.0 };
        let fac = -s / ((2.0 * std::f64::consts::PI).sqrt() * rho) * (-(x.re * x.re) / (2.0 * rho * rho)).exp();
        let step = f.mu * fac;
        for (wi, ri) in w.iter_mut().zip(r) {
            *wi -= step * ri;
        }
        return Ok(FullRankFilter { w, mu: f.mu });
    }
    if h00.len() != r.len() {
        return Err(Error::Shape("desired signature length does not match filter".into()));
    }
    let omega = dot_h(&f.w, h00).re;
    let c = qam_phi(constellation.order()) / ((2.0 * std::f64::consts::PI).sqrt() * rho);
    let two_rho2 = 2.0 * rho * rho;
    let (ar, ai) = (b0.re - 1.0, b0.im - 1.0);
    let ur = omega * ar - x.re;
    let ui = omega * ai - x.im;
    let er = c * (-(ur * ur) / two_rho2).exp();
    let ei = c * (-(ui * ui) / two_rho2).exp();
    let alpha = Complex64::new(er * ar + ei * ai, 0.0);
    let beta = Complex64::new(-er, ei);
    for ((wi, hi), ri) in w.iter_mut().zip(h00).zip(r) {
        *wi -= f.mu * (alpha * hi + beta * ri);
    }
    let gain = dot_h(&w, h00);
    let mag = gain.norm();
    if mag > 0.0 && mag.is_finite() {
        scale_in_place(&mut w, gain / mag);
    } else if cfg.rotation == RotationPolicy::Strict {
        return Err(Error::Degenerate("desired-symbol gain is zero; phase rotation undefined".into()));
    }
    Ok(FullRankFilter { w, mu: f.mu })
}

/// `h₀₀ᴴr / ‖h₀₀‖²`.
pub fn matched_filter(h00: &[Complex64], r: &[Complex64]) -> Result<Complex64> {
    if h00.len() != r.len() {
        return Err(Error::Shape("signature and observation lengths differ".into()));
    }
    let e = norm_sqr(h00);
    if !(e > 0.0) {
        return Err(Error::Degenerate("matched filter needs a non-zero signature".into()));
    }
    Ok(dot_h(h00, r) / e)
}
