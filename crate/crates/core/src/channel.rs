//! Time-varying multipath MIMO channel.
//!
//! Each gain `h_{k,ν,μ}(i)` is an independent Clarke (sum-of-sinusoids)
//! Rayleigh process scaled by the power-delay profile. The received signal at
//! antenna `ν` is `r_ν(i) = Σ_k Σ_μ h_{k,ν,μ}(i) b_k(i−μ) + n_ν(i)`, and the
//! receivers observe the stacked `LP × 1` window
//! `r(i) = [r_0ᵀ(i), …, r_{L−1}ᵀ(i)]ᵀ`, `r_ν(i) = [r_ν(i), …, r_ν(i−P+1)]ᵀ`.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, ZERO};
use crate::seeding::rng_from_seed;

/// Sinusoids per Clarke process.
pub const CLARKE_SINUSOIDS: usize = 64;

/// Power scaling of the tap gains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GainNormalization {
    /// `E|h_{k,ν,μ}|² = profile[μ]`: unit received power per user at every antenna.
    #[default]
    PerAntenna,
    /// `E|h_{k,ν,μ}|² = profile[μ] / L`: unit received power per user summed
    /// over the array.
    PerUser,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub users: usize,
    pub antennas: usize,
    pub window: usize,
    /// Linear relative tap powers; `paths = profile.len()`.
    pub profile: Vec<f64>,
    /// Normalized Doppler `f_d T_s` in cycles per symbol.
    pub doppler: f64,
    pub noise_variance: f64,
    pub normalization: GainNormalization,
    pub seed: u64,
}

impl ChannelConfig {
    pub fn paths(&self) -> usize {
        self.profile.len()
    }

    /// `LP`, the stacked observation length.
    pub fn observation_len(&self) -> usize {
        self.antennas * self.window
    }

    /// `P + L_p − 1`, the per-user symbol block length.
    pub fn block_len(&self) -> usize {
        self.window + self.paths() - 1
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.users == 0 {
            problems.push("channel.users must be >= 1".to_string());
        }
        if self.antennas == 0 {
            problems.push("channel.antennas must be >= 1".to_string());
        }
        if self.window == 0 {
            problems.push("channel.window must be >= 1".to_string());
        }
        if self.profile.is_empty() {
            problems.push("channel profile must have at least one tap".to_string());
        } else {
            if self.profile.iter().any(|p| !(*p >= 0.0)) {
                problems.push("channel profile entries must be >= 0".to_string());
            }
            let sum: f64 = self.profile.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                problems.push(format!("channel profile must sum to 1, sums to {sum}"));
            }
        }
        if !(self.doppler >= 0.0) {
            problems.push("channel.doppler must be >= 0".to_string());
        }
        if !(self.noise_variance >= 0.0) {
            problems.push("noise variance must be >= 0".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    fn gain_scale(&self) -> f64 {
        match self.normalization {
            GainNormalization::PerAntenna => 1.0,
            GainNormalization::PerUser => 1.0 / self.antennas as f64,
        }
    }
}

/// Relative powers (dB) of the leading symbol-spaced Vehicular A taps.
pub const VEHICULAR_A_DB: [f64; 3] = [0.0, -1.0, -9.0];

/// Converts dB tap powers to a linear profile summing to one.
pub fn profile_from_db(db: &[f64]) -> Vec<f64> {
    let lin: Vec<f64> = db.iter().map(|d| 10f64.powf(d / 10.0)).collect();
    let sum: f64 = lin.iter().sum();
    lin.iter().map(|v| v / sum).collect()
}

pub fn vehicular_a_profile() -> Vec<f64> {
    profile_from_db(&VEHICULAR_A_DB)
}

/// `σ² = E_s / SNR` for a linear SNR given in dB.
pub fn noise_variance_for_snr(snr_db: f64, symbol_energy: f64) -> f64 {
    symbol_energy / 10f64.powf(snr_db / 10.0)
}

/// One sum-of-sinusoids Clarke process.
///
/// Arrival angles are stratified: sinusoid `n` has angle
/// `(2πn + θ_n)/N` with `θ_n` uniform, so the angle set is uniformly
/// distributed on the circle while its empirical Doppler spectrum stays close
/// to the Jakes spectrum for a single realization.
#[derive(Debug, Clone)]
struct ClarkeProcess {
    phasors: Vec<Complex64>,
    steps: Vec<Complex64>,
    amplitude: f64,
}

impl ClarkeProcess {
    fn new<R: Rng + ?Sized>(doppler: f64, power: f64, rng: &mut R) -> Self {
        let n = CLARKE_SINUSOIDS;
        let mut phasors = Vec::with_capacity(n);
        let mut steps = Vec::with_capacity(n);
        for s in 0..n {
            let theta: f64 = rng.random_range(-PI..PI);
            let alpha = (2.0 * PI * s as f64 + theta) / n as f64;
            let phase: f64 = rng.random_range(0.0..2.0 * PI);
            phasors.push(Complex64::from_polar(1.0, phase));
            steps.push(Complex64::from_polar(1.0, 2.0 * PI * doppler * alpha.cos()));
        }
        Self {
            phasors,
            steps,
            amplitude: (power / n as f64).sqrt(),
        }
    }

    /// Current gain, then advance one symbol.
    #[inline]
    fn next_gain(&mut self) -> Complex64 {
        let mut acc = ZERO;
        for (p, s) in self.phasors.iter_mut().zip(&self.steps) {
            acc += *p;
            *p *= s;
        }
        acc * self.amplitude
    }
}

/// Unit-average-power Clarke fading series of length `n`.
pub fn clarke_gain_series(doppler: f64, n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = rng_from_seed(seed);
    let mut proc = ClarkeProcess::new(doppler, 1.0, &mut rng);
    (0..n).map(|_| proc.next_gain()).collect()
}

/// Tap gains `h_{k,ν,μ}(t)` for `t ∈ [0, instants)`.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    users: usize,
    antennas: usize,
    paths: usize,
    instants: usize,
    // [t][k][ν][μ]
    taps: Vec<Complex64>,
}

impl ChannelRealization {
    /// Draws a realization covering `instants` symbol times from `cfg.seed`.
    pub fn generate(cfg: &ChannelConfig, instants: usize) -> Result<Self> {
        cfg.validate()?;
        let mut rng = rng_from_seed(cfg.seed);
        Ok(Self::generate_with(cfg, instants, &mut rng))
    }

    pub fn generate_with<R: Rng + ?Sized>(cfg: &ChannelConfig, instants: usize, rng: &mut R) -> Self {
        let scale = cfg.gain_scale();
        let mut procs = Vec::with_capacity(cfg.users * cfg.antennas * cfg.paths());
        for _k in 0..cfg.users {
            for _nu in 0..cfg.antennas {
                for &pw in &cfg.profile {
                    procs.push(ClarkeProcess::new(cfg.doppler, pw * scale, rng));
                }
            }
        }
        let per = procs.len();
        let mut taps = Vec::with_capacity(per * instants);
        for _ in 0..instants {
            for p in procs.iter_mut() {
                taps.push(p.next_gain());
            }
        }
        Self {
            users: cfg.users,
            antennas: cfg.antennas,
            paths: cfg.paths(),
            instants,
            taps,
        }
    }

    /// Builds a realization from explicit gains, `f(t, k, ν, μ)`.
    pub fn from_fn(
        users: usize,
        antennas: usize,
        paths: usize,
        instants: usize,
        mut f: impl FnMut(usize, usize, usize, usize) -> Complex64,
    ) -> Self {
        let mut taps = Vec::with_capacity(users * antennas * paths * instants);
        for t in 0..instants {
            for k in 0..users {
                for nu in 0..antennas {
                    for mu in 0..paths {
                        taps.push(f(t, k, nu, mu));
                    }
                }
            }
        }
        Self {
            users,
            antennas,
            paths,
            instants,
            taps,
        }
    }

    pub fn instants(&self) -> usize {
        self.instants
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    #[inline]
    pub fn tap(&self, t: usize, k: usize, nu: usize, mu: usize) -> Complex64 {
        self.taps[((t * self.users + k) * self.antennas + nu) * self.paths + mu]
    }

    #[inline]
    fn instant(&self, t: usize) -> &[Complex64] {
        let per = self.users * self.antennas * self.paths;
        &self.taps[t * per..(t + 1) * per]
    }

    /// Multiplies every gain by `alpha`.
    pub fn scaled(&self, alpha: Complex64) -> Self {
        let mut out = self.clone();
        for t in out.taps.iter_mut() {
            *t *= alpha;
        }
        out
    }

    fn check_window(&self, i: usize, window: usize) -> Result<()> {
        if i + 1 < window || i >= self.instants {
            return Err(Error::Range {
                instant: i,
                first: window.saturating_sub(1),
                last: self.instants.saturating_sub(1),
            });
        }
        Ok(())
    }

    /// Column `c` of `[H_{0,k}ᵀ(i), …, H_{L−1,k}ᵀ(i)]ᵀ`, i.e. the
    /// `LP`-dim response to symbol `b_k(i−c)`.
    pub fn signature(&self, k: usize, c: usize, i: usize, window: usize) -> Result<Vec<Complex64>> {
        self.check_window(i, window)?;
        let mut out = vec![ZERO; self.antennas * window];
        for nu in 0..self.antennas {
            for p in 0..window {
                if c >= p && c - p < self.paths {
                    out[nu * window + p] = self.tap(i - p, k, nu, c - p);
                }
            }
        }
        Ok(out)
    }

    /// Desired user's main-path signature `h_{0,0}(i)`.
    pub fn desired_signature(&self, i: usize, window: usize) -> Result<Vec<Complex64>> {
        self.signature(0, 0, i, window)
    }

    /// Writes the tap series as CSV rows `t,k,nu,mu,re,im`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let mut emit = || -> std::io::Result<()> {
            writeln!(w, "t,k,nu,mu,re,im")?;
            for t in 0..self.instants {
                for k in 0..self.users {
                    for nu in 0..self.antennas {
                        for mu in 0..self.paths {
                            let h = self.tap(t, k, nu, mu);
                            writeln!(w, "{t},{k},{nu},{mu},{:e},{:e}", h.re, h.im)?;
                        }
                    }
                }
            }
            w.flush()
        };
        emit().map_err(|e| Error::io(path, e))
    }
}

/// The `LP × K(P+L_p−1)` block channel matrix `H(i)`.
///
/// Sub-block `H_{ν,k}` is `P × (P+L_p−1)` with row `p` holding
/// `[h_{k,ν,0}(i−p), …, h_{k,ν,L_p−1}(i−p)]` starting at column `p`.
pub fn build_channel_matrix(real: &ChannelRealization, i: usize, cfg: &ChannelConfig) -> Result<CMatrix> {
    if real.users != cfg.users || real.antennas != cfg.antennas || real.paths != cfg.paths() {
        return Err(Error::Shape("realization does not match channel config".into()));
    }
    real.check_window(i, cfg.window)?;
    let p_len = cfg.window;
    let blk = cfg.block_len();
    let mut h = CMatrix::zeros(cfg.observation_len(), cfg.users * blk);
    for nu in 0..cfg.antennas {
        for k in 0..cfg.users {
            for p in 0..p_len {
                for mu in 0..cfg.paths() {
                    h.set(nu * p_len + p, k * blk + p + mu, real.tap(i - p, k, nu, mu));
                }
            }
        }
    }
    Ok(h)
}

/// Stacked symbol vector `b(i) = [b_0ᵀ(i), …, b_{K−1}ᵀ(i)]ᵀ`,
/// `b_k(i) = [b_k(i), …, b_k(i−(P+L_p−2))]ᵀ`.
pub fn symbol_block(symbols: &[Vec<Complex64>], i: usize, block_len: usize) -> Result<Vec<Complex64>> {
    if i + 1 < block_len {
        return Err(Error::Range {
            instant: i,
            first: block_len - 1,
            last: usize::MAX,
        });
    }
    let mut out = Vec::with_capacity(symbols.len() * block_len);
    for s in symbols {
        for c in 0..block_len {
            out.push(*s.get(i - c).ok_or_else(|| Error::Range {
                instant: i,
                first: block_len - 1,
                last: s.len().saturating_sub(1),
            })?);
        }
    }
    Ok(out)
}

/// `LP`-dim observation at symbol index `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedBlock {
    pub r: Vec<Complex64>,
    pub i: usize,
}

/// Draws circular complex Gaussian samples with variance `σ²`.
pub fn complex_noise<R: Rng + ?Sized>(n: usize, variance: f64, rng: &mut R) -> Vec<Complex64> {
    let s = (variance / 2.0).sqrt();
    (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re * s, im * s)
        })
        .collect()
}

/// `r = H·b + n`, `n ~ CN(0, σ²I)`.
pub fn synthesize_received(h: &CMatrix, b: &[Complex64], noise_variance: f64, seed: u64, i: usize) -> Result<ReceivedBlock> {
    let mut r = h.mul_vec(b)?;
    if noise_variance > 0.0 {
        let mut rng = rng_from_seed(seed);
        for (ri, n) in r.iter_mut().zip(complex_noise(h.rows(), noise_variance, &mut rng)) {
            *ri += n;
        }
    }
    Ok(ReceivedBlock { r, i })
}

/// Per-antenna sample streams `r_ν(t)` for a whole trial.
///
/// Noise is drawn once per antenna sample, so consecutive windows share the
/// overlapping samples exactly as the physical receiver sees them.
#[derive(Debug, Clone)]
pub struct AntennaStreams {
    antennas: usize,
    window: usize,
    instants: usize,
    // [t][ν]
    samples: Vec<Complex64>,
}

impl AntennaStreams {
    /// `symbols[k][t]` must cover every instant of the realization.
    pub fn synthesize<R: Rng + ?Sized>(
        real: &ChannelRealization,
        symbols: &[Vec<Complex64>],
        window: usize,
        noise_variance: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if symbols.len() != real.users {
            return Err(Error::Shape(format!(
                "{} symbol streams for {} users",
                symbols.len(),
                real.users
            )));
        }
        if symbols.iter().any(|s| s.len() < real.instants) {
            return Err(Error::Shape("symbol stream shorter than realization".into()));
        }
        let (l, lp) = (real.antennas, real.paths);
        let mut samples = Vec::with_capacity(real.instants * l);
        for t in 0..real.instants {
            let taps = real.instant(t);
            for nu in 0..l {
                let mut acc = ZERO;
                for (k, s) in symbols.iter().enumerate() {
                    let base = (k * l + nu) * lp;
                    for mu in 0..lp.min(t + 1) {
                        acc += taps[base + mu] * s[t - mu];
                    }
                }
                samples.push(acc);
            }
        }
        if noise_variance > 0.0 {
            for (s, n) in samples.iter_mut().zip(complex_noise(real.instants * l, noise_variance, rng)) {
                *s += n;
            }
        }
        Ok(Self {
            antennas: l,
            window,
            instants: real.instants,
            samples,
        })
    }

    #[inline]
    pub fn sample(&self, t: usize, nu: usize) -> Complex64 {
        self.samples[t * self.antennas + nu]
    }

    /// Stacked window `r(i)`; needs `i ≥ P − 1`.
    pub fn window(&self, i: usize) -> Result<ReceivedBlock> {
        let mut r = vec![ZERO; self.antennas * self.window];
        self.window_into(i, &mut r)?;
        Ok(ReceivedBlock { r, i })
    }

    pub fn window_into(&self, i: usize, out: &mut [Complex64]) -> Result<()> {
        if i + 1 < self.window || i >= self.instants {
            return Err(Error::Range {
                instant: i,
                first: self.window - 1,
                last: self.instants - 1,
            });
        }
        for nu in 0..self.antennas {
            for p in 0..self.window {
                out[nu * self.window + p] = self.sample(i - p, nu);
            }
        }
        Ok(())
    }
}
