//! Symbol alphabets, symbol sources and hard-decision quantizers.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstellationKind {
    Bpsk,
    SquareQam,
}

/// BPSK or square M-QAM alphabet.
///
/// QAM points are the raw integer lattice `F_m + jF_n` with
/// `F_n = 2n − √M − 1`; the average symbol energy is kept in
/// [`Constellation::energy`] and applied where SNR is converted to a noise
/// variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constellation {
    kind: ConstellationKind,
    order: usize,
    side: usize,
    points: Vec<Complex64>,
}

impl Constellation {
    pub fn bpsk() -> Self {
        Self {
            kind: ConstellationKind::Bpsk,
            order: 2,
            side: 0,
            points: vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)],
        }
    }

    pub fn qam(order: usize) -> Result<Self> {
        let side = (order as f64).sqrt().round() as usize;
        if order < 4 || side * side != order {
            return Err(Error::Config(format!(
                "QAM order must be a perfect square >= 4, got {order}"
            )));
        }
        let levels = qam_levels(side);
        let mut points = Vec::with_capacity(order);
        for &re in &levels {
            for &im in &levels {
                points.push(Complex64::new(re, im));
            }
        }
        Ok(Self {
            kind: ConstellationKind::SquareQam,
            order,
            side,
            points,
        })
    }

    pub fn new(kind: ConstellationKind, order: usize) -> Result<Self> {
        match kind {
            ConstellationKind::Bpsk if order == 2 => Ok(Self::bpsk()),
            ConstellationKind::Bpsk => Err(Error::Config(format!(
                "BPSK has order 2, got {order}"
            ))),
            ConstellationKind::SquareQam => Self::qam(order),
        }
    }

    pub fn kind(&self) -> ConstellationKind {
        self.kind
    }

    pub fn is_bpsk(&self) -> bool {
        self.kind == ConstellationKind::Bpsk
    }

    /// Number of points `M`.
    pub fn order(&self) -> usize {
        self.order
    }

    /// `√M` for QAM.
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn name(&self) -> String {
        match self.kind {
            ConstellationKind::Bpsk => "BPSK".to_string(),
            ConstellationKind::SquareQam => format!("{}-QAM", self.order),
        }
    }

    /// Average symbol energy `E|b|²` of the raw alphabet.
    pub fn energy(&self) -> f64 {
        match self.kind {
            ConstellationKind::Bpsk => 1.0,
            ConstellationKind::SquareQam => 2.0 * (self.order as f64 - 1.0) / 3.0,
        }
    }

    pub fn contains(&self, b: Complex64) -> bool {
        self.points.contains(&b)
    }

    /// Hard decision on a filter output whose desired-symbol gain is `gain`.
    ///
    /// BPSK depends only on the sign of `Re[x]`. For QAM the output is first
    /// de-rotated by the phase of `gain` and then thresholded with `|gain|`;
    /// when `gain` is already real positive this is exactly the axis-wise rule.
    pub fn decide(&self, x: Complex64, gain: Complex64) -> Result<Complex64> {
        match self.kind {
            ConstellationKind::Bpsk => Ok(quantize_bpsk(x)),
            ConstellationKind::SquareQam => {
                let mag = gain.norm();
                if !(mag > 0.0) {
                    return Err(Error::Contract(
                        "QAM decision needs a non-zero desired-symbol gain".into(),
                    ));
                }
                let derotated = if gain.im == 0.0 { x } else { x * gain.conj() / mag };
                quantize_qam(derotated, mag, self.order)
            }
        }
    }
}

fn qam_levels(side: usize) -> Vec<f64> {
    (1..=side).map(|n| (2 * n) as f64 - side as f64 - 1.0).collect()
}

/// A user's symbol sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolStream {
    pub user: usize,
    pub values: Vec<Complex64>,
    pub seed: u64,
}

/// `n` i.i.d. uniformly drawn symbols, deterministic in `seed`.
pub fn draw_symbols(c: &Constellation, n: usize, seed: u64) -> SymbolStream {
    draw_user_symbols(c, 0, n, seed)
}

pub fn draw_user_symbols(c: &Constellation, user: usize, n: usize, seed: u64) -> SymbolStream {
    let mut rng = rng_from_seed(seed);
    SymbolStream {
        user,
        values: draw_with(c, n, &mut rng),
        seed,
    }
}

pub(crate) fn draw_with<R: Rng + ?Sized>(c: &Constellation, n: usize, rng: &mut R) -> Vec<Complex64> {
    let pts = c.points();
    (0..n).map(|_| pts[rng.random_range(0..pts.len())]).collect()
}

/// BPSK decision: `+1` if `Re[x] ≥ 0`, else `−1`.
pub fn quantize_bpsk(x: Complex64) -> Complex64 {
    if x.re >= 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        Complex64::new(-1.0, 0.0)
    }
}

/// Axis-wise square-QAM decision with thresholds `w00·(F_m ± 1)`.
///
/// A value lying exactly on `w00·(F_m + 1)` maps to `F_m`.
pub fn quantize_qam(x: Complex64, w00: f64, order: usize) -> Result<Complex64> {
    if !(w00 > 0.0) {
        return Err(Error::Contract(format!(
            "QAM threshold scale must be positive (phase rotation skipped?), got {w00}"
        )));
    }
    let side = (order as f64).sqrt().round() as usize;
    if order < 4 || side * side != order {
        return Err(Error::Config(format!(
            "QAM order must be a perfect square >= 4, got {order}"
        )));
    }
    Ok(Complex64::new(
        quantize_axis(x.re, w00, side),
        quantize_axis(x.im, w00, side),
    ))
}

fn quantize_axis(v: f64, w00: f64, side: usize) -> f64 {
    let s = side as f64;
    for m in 1..side {
        // F_m + 1 = 2m − √M
        let upper = w00 * (2.0 * m as f64 - s);
        if v <= upper {
            return 2.0 * m as f64 - s - 1.0;
        }
    }
    s - 1.0
}
