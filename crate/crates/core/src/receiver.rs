//! Symbol-by-symbol receivers driven by the harness.
//!
//! Every receiver follows the same schedule at instant `i`:
//! resolve the reference (the pilot while training, otherwise the hard
//! decision of the current filters), adapt, then decide on the output of the
//! adapted filters.
//!
//! JPDF branch selection compares branch outputs with a reference symbol.
//! Under [`SelectionRule::KnownSymbol`] that is the transmitted symbol at
//! every instant, as in the original algorithm description; under
//! [`SelectionRule::Decision`] it is the receiver's own adaptation reference,
//! so nothing outside the received signal is used after training.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::adapt::{self, AdaptConfig, AutoSelectConfig, Mode, RotationPolicy};
use crate::baselines::{self, FullRankFilter};
use crate::error::{Error, Result};
use crate::jpdf::{prestored_pattern, select_branch, Branch};
use crate::linalg::{dot_h, norm_sqr, ONE};
use crate::signal::Constellation;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutput {
    pub decision: Complex64,
    pub output: Complex64,
    /// Selected branch (`0` for single-filter receivers).
    pub branch: usize,
}

pub trait Receiver {
    fn name(&self) -> String;

    /// Processes observation `r` with desired signature `h00`. `symbol` is the
    /// transmitted symbol; outside training only receivers using
    /// [`SelectionRule::KnownSymbol`] look at it.
    fn step(&mut self, r: &[Complex64], h00: &[Complex64], symbol: Complex64, mode: Mode) -> Result<StepOutput>;

    /// Euclidean norms of the current filter vectors.
    fn filter_norms(&self) -> Vec<f64>;
}

fn decide(c: &Constellation, x: Complex64, gain: Complex64) -> Result<Complex64> {
    if c.is_bpsk() || gain.norm() > 0.0 {
        c.decide(x, gain)
    } else {
        c.decide(x, ONE)
    }
}

/// Reference used to pick the JPDF output branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionRule {
    /// Nearest branch to the transmitted symbol, in both modes.
    #[default]
    KnownSymbol,
    /// Nearest branch to the adaptation reference (pilot or past decision).
    Decision,
}

/// JPDF receiver with `B` pre-stored branches and optional automatic
/// `(D, I)` selection.
#[derive(Debug, Clone)]
pub struct JpdfReceiver {
    branches: Vec<Branch>,
    cfg: AdaptConfig,
    auto: Option<AutoSelectConfig>,
    constellation: Constellation,
    rule: SelectionRule,
    selected: usize,
    selected_dims: (usize, usize),
    initialized: bool,
}

impl JpdfReceiver {
    /// `rank` and `pre_len` are the (maximum) filter and preprocessor sizes.
    pub fn new(
        obs_len: usize,
        branches: usize,
        rank: usize,
        pre_len: usize,
        cfg: AdaptConfig,
        auto: Option<AutoSelectConfig>,
        constellation: Constellation,
    ) -> Result<Self> {
        cfg.validate()?;
        if branches == 0 {
            return Err(Error::Config("JPDF needs at least one branch".into()));
        }
        if let Some(a) = &auto {
            a.validate()?;
            if a.d_max != rank || a.i_max != pre_len {
                return Err(Error::Config(format!(
                    "auto-selection bounds D_max={}, I_max={} must equal the branch sizes D={rank}, I={pre_len}",
                    a.d_max, a.i_max
                )));
            }
        }
        let mut list = Vec::with_capacity(branches);
        let zeros = vec![Complex64::new(0.0, 0.0); obs_len];
        for l in 0..branches {
            let pattern = prestored_pattern(obs_len, rank, l)?;
            list.push(Branch::initialized(pattern, pre_len, &zeros)?);
        }
        Ok(Self::from_branches(list, cfg, auto, constellation))
    }

    /// Receiver over explicit branches; they are re-initialized from the
    /// first observed `h00` unless already marked initialized.
    pub fn from_branches(
        branches: Vec<Branch>,
        cfg: AdaptConfig,
        auto: Option<AutoSelectConfig>,
        constellation: Constellation,
    ) -> Self {
        let dims = (branches[0].rank(), branches[0].pre_len());
        Self {
            branches,
            cfg,
            auto,
            constellation,
            rule: SelectionRule::default(),
            selected: 0,
            selected_dims: dims,
            initialized: false,
        }
    }

    pub fn with_selection(mut self, rule: SelectionRule) -> Self {
        self.rule = rule;
        self
    }

    /// Keeps the supplied filters instead of initializing from `h00`.
    pub fn keep_initial_state(mut self) -> Self {
        self.initialized = true;
        self
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    fn initialize(&mut self, h00: &[Complex64]) -> Result<()> {
        for br in self.branches.iter_mut() {
            *br = Branch::initialized(br.pattern.clone(), br.pre_len(), h00)?;
        }
        self.initialized = true;
        Ok(())
    }

    fn selected_output(&self, r: &[Complex64], h00: &[Complex64]) -> Result<(Complex64, Complex64)> {
        let br = &self.branches[self.selected];
        let (d, i) = self.selected_dims;
        if d == br.rank() && i == br.pre_len() {
            return Ok((br.output(r), br.output(h00)));
        }
        let pb = adapt::prefix_branch(br, d, i)?;
        Ok((pb.output(r), pb.output(h00)))
    }

    /// Selects the branch (and prefix sizes) of the current filters nearest
    /// to `target`.
    fn pick(&mut self, r: &[Complex64], h00: &[Complex64], target: Complex64) -> Result<()> {
        let c = &self.constellation;
        let usable: Vec<usize> = (0..self.branches.len())
            .filter(|&l| c.is_bpsk() || self.branches[l].output(h00).norm() > 0.0)
            .collect();
        let candidates: Vec<usize> = if usable.is_empty() {
            (0..self.branches.len()).collect()
        } else {
            usable
        };
        match &self.auto {
            None => {
                let outs: Vec<Complex64> = candidates.iter().map(|&l| self.branches[l].output(r)).collect();
                let l = candidates[select_branch(&outs, target)];
                self.selected = l;
                self.selected_dims = (self.branches[l].rank(), self.branches[l].pre_len());
            }
            Some(a) => {
                let subset: Vec<Branch> = candidates.iter().map(|&l| self.branches[l].clone()).collect();
                let sel = adapt::auto_select(&subset, r, target, a)?;
                let ch = sel.choice();
                self.selected = candidates[sel.best];
                self.selected_dims = (ch.rank, ch.pre_len);
            }
        }
        Ok(())
    }
}

impl Receiver for JpdfReceiver {
    fn name(&self) -> String {
        if self.auto.is_some() {
            "MSER-JPDF-auto".into()
        } else {
            format!("MSER-JPDF-B{}", self.branches.len())
        }
    }

    fn step(&mut self, r: &[Complex64], h00: &[Complex64], symbol: Complex64, mode: Mode) -> Result<StepOutput> {
        if !self.initialized {
            self.initialize(h00)?;
        }
        let reference = match mode {
            Mode::Training => symbol,
            Mode::DecisionDirected => {
                if self.rule == SelectionRule::KnownSymbol {
                    self.pick(r, h00, symbol)?;
                }
                let (x, gain) = self.selected_output(r, h00)?;
                decide(&self.constellation, x, gain)?
            }
        };
        let target = match self.rule {
            SelectionRule::KnownSymbol => symbol,
            SelectionRule::Decision => reference,
        };
        let c = &self.constellation;

        let mut outputs = Vec::with_capacity(self.branches.len());
        let mut usable = Vec::with_capacity(self.branches.len());
        for br in self.branches.iter_mut() {
            let stepped = if c.is_bpsk() {
                adapt::update_bpsk(br, r, reference, &self.cfg)?
            } else {
                adapt::update_qam(br, r, h00, reference, &self.cfg, c.order())?
            };
            *br = stepped.branch;
            outputs.push(stepped.output);
            usable.push(c.is_bpsk() || stepped.gain.norm() > 0.0);
        }
        // QAM branches whose desired-symbol gain vanished cannot be
        // thresholded; they stay out of the selection while any other exists.
        let candidates: Vec<usize> = if usable.iter().any(|u| *u) {
            (0..outputs.len()).filter(|&l| usable[l]).collect()
        } else {
            (0..outputs.len()).collect()
        };

        let (best, output, dims) = match &self.auto {
            None => {
                let outs: Vec<Complex64> = candidates.iter().map(|&l| outputs[l]).collect();
                let k = select_branch(&outs, target);
                let l = candidates[k];
                (l, outputs[l], (self.branches[l].rank(), self.branches[l].pre_len()))
            }
            Some(a) => {
                let subset: Vec<Branch> = candidates.iter().map(|&l| self.branches[l].clone()).collect();
                let sel = adapt::auto_select(&subset, r, target, a)?;
                let ch = sel.choice();
                (candidates[sel.best], sel.output, (ch.rank, ch.pre_len))
            }
        };
        self.selected = best;
        self.selected_dims = dims;
        let gain = if c.is_bpsk() {
            ONE
        } else {
            self.selected_output(h00, h00)?.0
        };
        Ok(StepOutput {
            decision: decide(c, output, gain)?,
            output,
            branch: best,
        })
    }

    fn filter_norms(&self) -> Vec<f64> {
        self.branches
            .iter()
            .flat_map(|b| [norm_sqr(&b.w).sqrt(), norm_sqr(&b.p).sqrt()])
            .collect()
    }
}

/// AdaptConfig with the lenient rotation policy used inside receivers.
pub fn receiver_adapt_config(mu_w: f64, mu_p: f64, rho: f64, training_len: usize) -> Result<AdaptConfig> {
    let mut cfg = AdaptConfig::new(mu_w, mu_p, rho, training_len)?;
    cfg.rotation = RotationPolicy::SkipDegenerate;
    Ok(cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FullRankKind {
    Lms,
    Mser,
}

/// Full-rank LMS or MSER receiver, initialized to `w = h00` on first use.
#[derive(Debug, Clone)]
pub struct FullRankReceiver {
    kind: FullRankKind,
    filter: FullRankFilter,
    cfg: AdaptConfig,
    constellation: Constellation,
    initialized: bool,
}

impl FullRankReceiver {
    pub fn new(kind: FullRankKind, obs_len: usize, mu: f64, rho: f64, constellation: Constellation) -> Result<Self> {
        let cfg = receiver_adapt_config(mu, 0.0, rho, 0)?;
        Ok(Self {
            kind,
            filter: FullRankFilter::new(vec![Complex64::new(0.0, 0.0); obs_len], mu),
            cfg,
            constellation,
            initialized: false,
        })
    }

    pub fn filter(&self) -> &FullRankFilter {
        &self.filter
    }
}

impl Receiver for FullRankReceiver {
    fn name(&self) -> String {
        match self.kind {
            FullRankKind::Lms => "Full-Rank-LMS".into(),
            FullRankKind::Mser => "Full-Rank-MSER".into(),
        }
    }

    fn step(&mut self, r: &[Complex64], h00: &[Complex64], symbol: Complex64, mode: Mode) -> Result<StepOutput> {
        if !self.initialized {
            if h00.len() != self.filter.w.len() {
                return Err(Error::Shape("desired signature length does not match filter".into()));
            }
            self.filter.w = h00.to_vec();
            self.initialized = true;
        }
        let c = &self.constellation;
        let reference = match mode {
            Mode::Training => symbol,
            Mode::DecisionDirected => decide(c, self.filter.output(r), dot_h(&self.filter.w, h00))?,
        };
        self.filter = match self.kind {
            FullRankKind::Lms => baselines::lms_update(&self.filter, r, reference)?,
            FullRankKind::Mser => baselines::mser_fullrank_update(&self.filter, r, h00, reference, &self.cfg, c)?,
        };
        let output = self.filter.output(r);
        let gain = if c.is_bpsk() { ONE } else { dot_h(&self.filter.w, h00) };
        Ok(StepOutput {
            decision: decide(c, output, gain)?,
            output,
            branch: 0,
        })
    }

    fn filter_norms(&self) -> Vec<f64> {
        vec![norm_sqr(&self.filter.w).sqrt()]
    }
}

/// Non-adaptive matched filter.
#[derive(Debug, Clone)]
pub struct MatchedFilterReceiver {
    constellation: Constellation,
}

impl MatchedFilterReceiver {
    pub fn new(constellation: Constellation) -> Self {
        Self { constellation }
    }
}

impl Receiver for MatchedFilterReceiver {
    fn name(&self) -> String {
        "Matched-Filter".into()
    }

    fn step(&mut self, r: &[Complex64], h00: &[Complex64], _symbol: Complex64, _mode: Mode) -> Result<StepOutput> {
        let output = baselines::matched_filter(h00, r)?;
        Ok(StepOutput {
            decision: decide(&self.constellation, output, ONE)?,
            output,
            branch: 0,
        })
    }

    fn filter_norms(&self) -> Vec<f64> {
        Vec::new()
    }
}
