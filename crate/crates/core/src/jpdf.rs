//! Joint preprocessing, decimation and filtering branches.
//!
//! A branch maps the `LP`-dim observation `r` to a scalar through three
//! stages: the preprocessor `p` (length `I`, applied as the Toeplitz
//! convolution `Pᴴ r = R p*` with `R` the Hankel data matrix), a 0/1
//! decimation that keeps `D` samples, and the reduced-rank filter `w`.
//! The output is `x = wᴴ T R p* = pᴴ Dᴴ r`, where `D` is the Toeplitz matrix
//! built from the decimation-scattered weights.
//!
//! The decimation matrix is never formed on the fast path; it is a gather at
//! the pattern offsets, and every product below costs `O(D·I)`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, ONE, ZERO};

/// Row offsets of a decimation matrix `T_l`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecimationPattern {
    offsets: Vec<usize>,
    branch: usize,
    obs_len: usize,
}

impl DecimationPattern {
    /// Pattern from explicit offsets; they must be strictly increasing and
    /// below `obs_len`.
    pub fn from_offsets(offsets: Vec<usize>, branch: usize, obs_len: usize) -> Result<Self> {
        if offsets.is_empty() {
            return Err(Error::Config("decimation pattern needs at least one offset".into()));
        }
        if offsets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("decimation offsets must be strictly increasing".into()));
        }
        if *offsets.last().unwrap() >= obs_len {
            return Err(Error::Config(format!(
                "decimation offset {} exceeds observation length {obs_len}",
                offsets.last().unwrap()
            )));
        }
        Ok(Self {
            offsets,
            branch,
            obs_len,
        })
    }

    /// Keeps every sample (`D = LP`).
    pub fn identity(obs_len: usize) -> Self {
        Self {
            offsets: (0..obs_len).collect(),
            branch: 0,
            obs_len,
        }
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn rank(&self) -> usize {
        self.offsets.len()
    }

    pub fn branch(&self) -> usize {
        self.branch
    }

    pub fn obs_len(&self) -> usize {
        self.obs_len
    }

    /// First `rank` rows of this pattern.
    pub fn prefix(&self, rank: usize) -> Result<Self> {
        if rank == 0 || rank > self.rank() {
            return Err(Error::Config(format!(
                "prefix rank {rank} outside 1..={}",
                self.rank()
            )));
        }
        Ok(Self {
            offsets: self.offsets[..rank].to_vec(),
            branch: self.branch,
            obs_len: self.obs_len,
        })
    }

    /// `T x`.
    pub fn gather(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.offsets.iter().map(|&o| x[o]).collect()
    }

    /// `Tᴴ w`: scatters `w` into `LP` slots.
    pub fn scatter(&self, w: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![ZERO; self.obs_len];
        for (&o, v) in self.offsets.iter().zip(w) {
            out[o] = *v;
        }
        out
    }

    /// Explicit `D × LP` 0/1 matrix.
    pub fn matrix(&self) -> CMatrix {
        let mut t = CMatrix::zeros(self.rank(), self.obs_len);
        for (d, &o) in self.offsets.iter().enumerate() {
            t.set(d, o, ONE);
        }
        t
    }
}

/// Pre-stored decimation: `v_{l,d} = ⌊LP/D⌋·d + l`.
pub fn prestored_pattern(obs_len: usize, rank: usize, branch: usize) -> Result<DecimationPattern> {
    if rank == 0 {
        return Err(Error::Config("decimation rank must be >= 1".into()));
    }
    let spacing = obs_len / rank;
    let last = spacing * (rank - 1) + branch;
    if spacing == 0 || last >= obs_len {
        return Err(Error::Config(format!(
            "pre-stored pattern (LP={obs_len}, D={rank}, l={branch}) would reach offset {last} >= LP"
        )));
    }
    let offsets = (0..rank).map(|d| spacing * d + branch).collect();
    Ok(DecimationPattern {
        offsets,
        branch,
        obs_len,
    })
}

/// One JPDF branch: preprocessor, decimation pattern and reduced-rank filter.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub p: Vec<Complex64>,
    pub pattern: DecimationPattern,
    pub w: Vec<Complex64>,
}

impl Branch {
    pub fn new(p: Vec<Complex64>, pattern: DecimationPattern, w: Vec<Complex64>) -> Result<Self> {
        let br = Self { p, pattern, w };
        br.check()?;
        Ok(br)
    }

    /// Standard initialization `p = [1, 0, …, 0]ᵀ`, `w = T h`.
    pub fn initialized(pattern: DecimationPattern, pre_len: usize, h00: &[Complex64]) -> Result<Self> {
        if h00.len() != pattern.obs_len() {
            return Err(Error::Shape(format!(
                "initial signature has {} entries, expected {}",
                h00.len(),
                pattern.obs_len()
            )));
        }
        let mut p = vec![ZERO; pre_len];
        if pre_len > 0 {
            p[0] = ONE;
        }
        let w = pattern.gather(h00);
        Self::new(p, pattern, w)
    }

    pub fn check(&self) -> Result<()> {
        let lp = self.pattern.obs_len();
        if self.p.is_empty() || (self.p.len() >= lp && lp > 1) {
            return Err(Error::Shape(format!(
                "preprocessor length {} must be in 1..{lp}",
                self.p.len()
            )));
        }
        if self.w.len() != self.pattern.rank() {
            return Err(Error::Shape(format!(
                "filter length {} does not match decimation rank {}",
                self.w.len(),
                self.pattern.rank()
            )));
        }
        Ok(())
    }

    pub fn rank(&self) -> usize {
        self.w.len()
    }

    pub fn pre_len(&self) -> usize {
        self.p.len()
    }

    pub fn obs_len(&self) -> usize {
        self.pattern.obs_len()
    }

    /// `r̄ = T R p* = T Pᴴ r`.
    pub fn project(&self, r: &[Complex64]) -> Vec<Complex64> {
        project(r, &self.p, self.pattern.offsets())
    }

    /// `Dᴴ r`, the preprocessor-domain view of `r` under the current `w`.
    pub fn preproc_view(&self, r: &[Complex64]) -> Vec<Complex64> {
        preproc_view(r, &self.w, self.pattern.offsets(), self.p.len())
    }

    /// `x = wᴴ T Pᴴ r`.
    pub fn output(&self, r: &[Complex64]) -> Complex64 {
        output(r, &self.p, &self.w, self.pattern.offsets())
    }
}

/// `(T R p*)[d] = Σ_j r[v_d + j] p_j*`, truncated at `LP`.
#[inline]
pub fn project(r: &[Complex64], p: &[Complex64], offsets: &[usize]) -> Vec<Complex64> {
    offsets
        .iter()
        .map(|&v| {
            let tail = &r[v..];
            tail.iter().zip(p).map(|(ri, pj)| ri * pj.conj()).sum()
        })
        .collect()
}

/// `(Dᴴ r)[j] = Σ_d w_d* r[v_d + j]`, truncated at `LP`.
#[inline]
pub fn preproc_view(r: &[Complex64], w: &[Complex64], offsets: &[usize], pre_len: usize) -> Vec<Complex64> {
    let mut out = vec![ZERO; pre_len];
    for (&v, wd) in offsets.iter().zip(w) {
        let wc = wd.conj();
        for (o, ri) in out.iter_mut().zip(&r[v..]) {
            *o += wc * ri;
        }
    }
    out
}

#[inline]
pub fn output(r: &[Complex64], p: &[Complex64], w: &[Complex64], offsets: &[usize]) -> Complex64 {
    let mut x = ZERO;
    for (&v, wd) in offsets.iter().zip(w) {
        let proj: Complex64 = r[v..].iter().zip(p).map(|(ri, pj)| ri * pj.conj()).sum();
        x += wd.conj() * proj;
    }
    x
}

/// `LP × I` Hankel data matrix, `R[c, j] = r[c + j]` (zero past `LP`).
pub fn hankel_matrix(r: &[Complex64], pre_len: usize) -> Result<CMatrix> {
    if pre_len == 0 || (pre_len >= r.len() && r.len() > 1) {
        return Err(Error::Config(format!(
            "preprocessor length {pre_len} must be in 1..{}",
            r.len()
        )));
    }
    let n = r.len();
    Ok(CMatrix::from_fn(n, pre_len, |c, j| if c + j < n { r[c + j] } else { ZERO }))
}

/// `x = wᴴ T (R p*)` from an explicit Hankel matrix.
pub fn branch_output(br: &Branch, hankel: &CMatrix) -> Result<Complex64> {
    if hankel.rows() != br.obs_len() || hankel.cols() != br.pre_len() {
        return Err(Error::Shape(format!(
            "Hankel matrix is {}x{}, branch expects {}x{}",
            hankel.rows(),
            hankel.cols(),
            br.obs_len(),
            br.pre_len()
        )));
    }
    let pc: Vec<Complex64> = br.p.iter().map(|v| v.conj()).collect();
    let filtered = hankel.mul_vec(&pc)?;
    let reduced = br.pattern.gather(&filtered);
    Ok(crate::linalg::dot_h(&br.w, &reduced))
}

/// `LP × I` matrix with `D[m, j] = d[m − j]`, `d = Tᴴ w`.
pub fn equiv_d_matrix(w: &[Complex64], pattern: &DecimationPattern, obs_len: usize, pre_len: usize) -> Result<CMatrix> {
    if w.len() != pattern.rank() || obs_len != pattern.obs_len() {
        return Err(Error::Shape("filter/pattern/observation sizes disagree".into()));
    }
    let d = pattern.scatter(w);
    Ok(CMatrix::from_fn(obs_len, pre_len, |m, j| if m >= j { d[m - j] } else { ZERO }))
}

/// `argmin_l |b0 − x_l|`, lowest index on ties.
pub fn select_branch(outputs: &[Complex64], b0: Complex64) -> usize {
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (l, x) in outputs.iter().enumerate() {
        let d = (b0 - x).norm_sqr();
        if d < best_dist {
            best = l;
            best_dist = d;
        }
    }
    best
}

/// Explicit `LP × LP` Toeplitz preprocessing matrix `P_l` (first column
/// `[p_0, …, p_{I−1}, 0, …]ᵀ`).
pub fn preprocessor_matrix(p: &[Complex64], obs_len: usize) -> CMatrix {
    CMatrix::from_fn(obs_len, obs_len, |m, c| {
        if m >= c && m - c < p.len() {
            p[m - c]
        } else {
            ZERO
        }
    })
}
