//! SER estimation, per-symbol arithmetic complexity and the PCR figure of merit.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::adapt::AutoSelectConfig;
use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "Full-Rank-LMS")]
    FullRankLms,
    #[serde(rename = "Full-Rank-MSER")]
    FullRankMser,
    #[serde(rename = "MSER-JIO")]
    MserJio,
    #[serde(rename = "MSER-MSWF")]
    MserMswf,
    #[serde(rename = "MSER-JPDF")]
    MserJpdf,
    #[serde(rename = "EIG")]
    Eig,
    #[serde(rename = "Matched-Filter")]
    MatchedFilter,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::FullRankLms,
        Algorithm::FullRankMser,
        Algorithm::MserJio,
        Algorithm::MserMswf,
        Algorithm::MserJpdf,
        Algorithm::Eig,
        Algorithm::MatchedFilter,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            Algorithm::FullRankLms => "Full-Rank-LMS",
            Algorithm::FullRankMser => "Full-Rank-MSER",
            Algorithm::MserJio => "MSER-JIO",
            Algorithm::MserMswf => "MSER-MSWF",
            Algorithm::MserJpdf => "MSER-JPDF",
            Algorithm::Eig => "EIG",
            Algorithm::MatchedFilter => "Matched-Filter",
        }
    }

    /// Whether a simulated receiver exists for this id.
    pub fn is_simulated(&self) -> bool {
        matches!(
            self,
            Algorithm::FullRankLms | Algorithm::FullRankMser | Algorithm::MserJpdf | Algorithm::MatchedFilter
        )
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['_', ' '], "-");
        Algorithm::ALL
            .into_iter()
            .find(|a| a.id().to_ascii_lowercase() == norm)
            .ok_or_else(|| {
                let known: Vec<_> = Algorithm::ALL.iter().map(|a| a.id()).collect();
                Error::Config(format!("unknown algorithm '{s}' (known: {})", known.join(", ")))
            })
    }
}

/// Arithmetic operations per received symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub algorithm: Algorithm,
    pub multiplications: f64,
    pub additions: f64,
    /// `true` when only the order of growth is known (EIG: `(LP)³`).
    pub order_only: bool,
    /// Extra search operations of the automatic `(D, I)` selection.
    pub search: Option<f64>,
}

/// Closed-form per-symbol operation counts for BPSK (`bpsk = true`) or QAM.
pub fn complexity(
    algorithm: Algorithm,
    l: usize,
    p: usize,
    d: usize,
    i: usize,
    b: usize,
    bpsk: bool,
) -> Result<ComplexityReport> {
    if l == 0 || p == 0 {
        return Err(Error::Config("complexity needs L, P >= 1".into()));
    }
    let lp = (l * p) as f64;
    let (d, i, b) = (d as f64, i as f64, b as f64);
    let needs = |ok: bool| -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("{algorithm} needs positive D, I, B")))
        }
    };
    let (m, a) = match (algorithm, bpsk) {
        (Algorithm::FullRankLms, _) => (2.0 * lp + 1.0, 2.0 * lp),
        (Algorithm::FullRankMser, true) => (3.0 * lp + 1.0, 2.0 * lp),
        (Algorithm::FullRankMser, false) => (6.0 * lp + 5.0, 5.0 * lp),
        (Algorithm::MserJio, true) => {
            needs(d > 0.0)?;
            (8.0 * lp * d + 7.0 * d + 2.0 * lp + 9.0, 7.0 * lp * d + 2.0 * lp - 1.0)
        }
        (Algorithm::MserJio, false) => {
            needs(d > 0.0)?;
            (10.0 * lp * d + 7.0 * d + 4.0 * lp + 17.0, 9.0 * lp * d + 4.0 * lp + 3.0)
        }
        (Algorithm::MserMswf, true) => {
            needs(d > 0.0)?;
            (
                d * lp * lp + 4.0 * lp * d + 5.0 * d + lp + 7.0,
                d * lp * lp + 5.0 * lp * d - 1.0,
            )
        }
        (Algorithm::MserMswf, false) => {
            needs(d > 0.0)?;
            (
                d * lp * lp + 5.0 * lp * d + 5.0 * d + 2.0 * lp + 11.0,
                d * lp * lp + 6.0 * lp * d + lp + 1.0,
            )
        }
        (Algorithm::MserJpdf, true) => {
            needs(d > 0.0 && i > 0.0 && b > 0.0)?;
            (
                b * i * (lp + 1.5) + b * d * (i + 2.0) + 6.0 * b - 0.5 * i * i * b,
                b * i * (lp + 0.5) + b * d * (i + 1.0) - 0.5 * i * i * b,
            )
        }
        (Algorithm::MserJpdf, false) => {
            needs(d > 0.0 && i > 0.0 && b > 0.0)?;
            (
                b * i * (2.0 * lp + 3.0) + 2.0 * b * d * (2.0 * i + 1.0) + 8.0 * b - b * i * i,
                2.0 * b * i * (lp + 1.0) + b * d * (4.0 * i - 1.0) + 2.0 * b * lp - b * i * i,
            )
        }
        (Algorithm::Eig, _) => {
            let c = lp * lp * lp;
            return Ok(ComplexityReport {
                algorithm,
                multiplications: c,
                additions: c,
                order_only: true,
                search: None,
            });
        }
        (Algorithm::MatchedFilter, _) => {
            return Err(Error::Config("no complexity row for Matched-Filter".into()));
        }
    };
    Ok(ComplexityReport {
        algorithm,
        multiplications: m,
        additions: a,
        order_only: false,
        search: None,
    })
}

/// JPDF with automatic selection: the fixed-size counts at `(D_max, I_max)`
/// plus a search of about `1.5(D_max − D_min)(I_max − I_min)` operations.
pub fn complexity_auto(l: usize, p: usize, auto: &AutoSelectConfig, b: usize, bpsk: bool) -> Result<ComplexityReport> {
    auto.validate()?;
    let mut rep = complexity(Algorithm::MserJpdf, l, p, auto.d_max, auto.i_max, b, bpsk)?;
    rep.search = Some(1.5 * (auto.d_max - auto.d_min) as f64 * (auto.i_max - auto.i_min) as f64);
    Ok(rep)
}

/// `(1 − ser)ⁿ / m`.
pub fn pcr(ser: f64, n: u32, m: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&ser) {
        return Err(Error::Contract(format!("SER {ser} outside [0, 1]")));
    }
    if n == 0 {
        return Err(Error::Contract("packet length must be >= 1".into()));
    }
    if !(m > 0.0) {
        return Err(Error::Contract(format!("multiplication count must be > 0, got {m}")));
    }
    Ok((1.0 - ser).powi(n as i32) / m)
}

/// 95% normal-approximation half-width of a binomial proportion.
pub fn binomial_halfwidth(p: f64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    Z95 * (p * (1.0 - p) / n as f64).sqrt()
}

/// Error fraction and its 95% half-width.
pub fn estimate_ser(decisions: &[Complex64], truth: &[Complex64]) -> Result<(f64, f64)> {
    if decisions.is_empty() {
        return Err(Error::Contract("SER estimate needs at least one symbol".into()));
    }
    if decisions.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} decisions for {} symbols",
            decisions.len(),
            truth.len()
        )));
    }
    let errors = decisions.iter().zip(truth).filter(|(a, b)| a != b).count();
    let p = errors as f64 / decisions.len() as f64;
    Ok((p, binomial_halfwidth(p, decisions.len())))
}

/// Mean and 95% half-width of per-run values (normal approximation with the
/// sample standard deviation).
pub fn mean_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, Z95 * (var / n as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AxisKind {
    Iterations,
    SnrDb,
    Users,
    Doppler,
    Rank,
    PreprocessorLen,
    Branches,
}

impl AxisKind {
    pub fn label(&self) -> &'static str {
        match self {
            AxisKind::Iterations => "iterations",
            AxisKind::SnrDb => "snr-db",
            AxisKind::Users => "users",
            AxisKind::Doppler => "doppler",
            AxisKind::Rank => "rank",
            AxisKind::PreprocessorLen => "preprocessor-len",
            AxisKind::Branches => "branches",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerPoint {
    pub x: f64,
    pub ser: f64,
    /// Binomial half-width over all counted symbols.
    pub ci_halfwidth: f64,
    pub symbols: usize,
    /// Half-width from the spread of per-run SERs.
    pub run_ci_halfwidth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerCurve {
    pub axis: AxisKind,
    pub algorithm: String,
    pub seed: u64,
    pub runs: usize,
    pub points: Vec<SerPoint>,
}

pub const SER_CSV_HEADER: &str = "x,ser,ci_halfwidth,runs,algorithm,seed";

impl SerCurve {
    /// CSV rows (without header).
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.x, p.ser, p.ci_halfwidth, self.runs, self.algorithm, self.seed
            ));
        }
        out
    }
}

/// CSV document for several curves sharing one header.
pub fn curves_csv(curves: &[SerCurve]) -> String {
    let mut out = String::from(SER_CSV_HEADER);
    out.push('\n');
    for c in curves {
        out.push_str(&c.csv_rows());
    }
    out
}

pub const COMPLEXITY_CSV_HEADER: &str = "algorithm,multiplications,additions,order_only,search";

pub fn complexity_csv(reports: &[ComplexityReport]) -> String {
    let mut out = String::from(COMPLEXITY_CSV_HEADER);
    out.push('\n');
    for r in reports {
        let search = r.search.map(|s| s.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.algorithm, r.multiplications, r.additions, r.order_only, search
        ));
    }
    out
}
