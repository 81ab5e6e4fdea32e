//! Exact Gaussian sampling of the per-step noise quantities, and a fine-grid
//! record that can be aggregated to any coarser step with the same randomness.
//!
//! Every quantity is a Wiener integral `b_j ∫₀^h K(h − r) dβ_j(r)` of one
//! scalar Brownian motion per mode, so the joint law per mode is Gaussian
//! with covariance `b_j² ∫₀^h K_a(u) K_b(u) du`. All kernels are short sums
//! of terms `c u^p e^{−σu}`, which makes the covariances closed form.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::SpectralModel;
use crate::numerics::{kdd, m0, moment, phi1, SERIES_THRESHOLD};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("step size must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("covariance of mode {mode} could not be factorized even with jitter")]
    FactorizationFailed { mode: usize },
    #[error("substep count must be at least 1")]
    NoSubsteps,
    #[error("range {start}..{end} exceeds a record of {len} substeps")]
    OutOfRange { start: usize, end: usize, len: usize },
}

/// Which semigroup-weighted time integrals `I_kj` are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeIntegralMode {
    #[default]
    None,
    /// `I_jj` only; enough when `F'` is diagonal in the eigenbasis.
    Diagonal,
    /// Every `I_kj`.
    Full,
}

impl TimeIntegralMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(TimeIntegralMode::None),
            "diagonal" => Some(TimeIntegralMode::Diagonal),
            "full" => Some(TimeIntegralMode::Full),
            _ => None,
        }
    }
}

/// Kernels `K(u)`, `u = h − r`, of the quantities driven by mode `j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    /// `e^{−λ_j u}`: convolution increment `X_j`.
    Conv,
    /// `1`: Brownian increment `ΔW_j`.
    Increment,
    /// `(1 − e^{−λ_j u})/λ_j`: `Q_j = ∫₀^h X_j(s) ds`.
    Integral,
    /// `(e^{−λ_j u} − e^{−λ_k u})/(λ_k − λ_j)`: `I_kj`, 0-based `k`.
    TimeIntegral(usize),
    /// `e^{−μ u}`: OU increment with another rate, for exact references.
    Reference(f64),
}

#[derive(Debug, Clone, Copy)]
struct Term {
    c: f64,
    p: u32,
    sigma: f64,
}

fn kernel_terms(kernel: Kernel, lj: f64, lambdas: &[f64], h: f64) -> Vec<Term> {
    let t = |c, p, sigma| Term { c, p, sigma };
    match kernel {
        Kernel::Conv => vec![t(1.0, 0, lj)],
        Kernel::Increment => vec![t(1.0, 0, 0.0)],
        Kernel::Integral => {
            if (lj * h).abs() < SERIES_THRESHOLD {
                vec![t(1.0, 1, 0.0), t(-0.5 * lj, 2, 0.0)]
            } else {
                vec![t(1.0 / lj, 0, 0.0), t(-1.0 / lj, 0, lj)]
            }
        }
        Kernel::TimeIntegral(k) => {
            let d = lambdas[k] - lj;
            if (d * h).abs() < SERIES_THRESHOLD {
                vec![t(1.0, 1, lj), t(-0.5 * d, 2, lj)]
            } else {
                vec![t(1.0 / d, 0, lj), t(-1.0 / d, 0, lambdas[k])]
            }
        }
        Kernel::Reference(mu) => vec![t(1.0, 0, mu)],
    }
}

/// Pointwise value of a kernel, for checks against its closed-form pieces.
pub fn kernel_value(kernel: Kernel, lj: f64, lambdas: &[f64], u: f64) -> f64 {
    match kernel {
        Kernel::Conv => (-lj * u).exp(),
        Kernel::Increment => 1.0,
        Kernel::Integral => m0(lj, u),
        Kernel::TimeIntegral(k) => {
            let d = lambdas[k] - lj;
            if (d * u).abs() < SERIES_THRESHOLD {
                u * (-lj * u).exp() * (1.0 - 0.5 * d * u)
            } else {
                ((-lj * u).exp() - (-lambdas[k] * u).exp()) / d
            }
        }
        Kernel::Reference(mu) => (-mu * u).exp(),
    }
}

/// `∫₀^h K_a(u) K_b(u) du` for mode `j` with unit weight.
pub fn kernel_inner(a: Kernel, b: Kernel, lj: f64, lambdas: &[f64], h: f64) -> f64 {
    let ta = kernel_terms(a, lj, lambdas, h);
    let tb = kernel_terms(b, lj, lambdas, h);
    let mut s = 0.0;
    for x in &ta {
        for y in &tb {
            s += x.c * y.c * moment(x.p + y.p, x.sigma + y.sigma, h);
        }
    }
    s
}

/// `Var ∫₀^h e^{−λ(h−s)} b dβ(s) = b²(1 − e^{−2λh})/(2λ)`, `b²h` in the limit.
pub fn conv_variance(lambda: f64, b: f64, h: f64) -> f64 {
    b * b * m0(2.0 * lambda, h)
}

/// Per-mode covariance blocks and their factors for one step size.
#[derive(Debug, Clone)]
pub struct StepCovariance {
    pub h: f64,
    pub mode: TimeIntegralMode,
    pub with_reference: bool,
    blocks: Vec<ModeBlock>,
}

#[derive(Debug, Clone)]
pub struct ModeBlock {
    pub kernels: Vec<Kernel>,
    /// Row-major `m×m` covariance.
    pub cov: Vec<f64>,
    /// Row-major `m×rank` factor with `cov ≈ L Lᵀ`.
    pub factor: Vec<f64>,
    pub rank: usize,
}

impl ModeBlock {
    pub fn size(&self) -> usize {
        self.kernels.len()
    }
}

const PIVOT_TOL: f64 = 1e-13;
const RECONSTRUCTION_TOL: f64 = 1e-10;

/// Pivoted Cholesky on the correlation scale. Returns the factor and its rank,
/// or `None` if the reconstruction check fails.
fn pivoted_cholesky(cov: &[f64], m: usize) -> Option<(Vec<f64>, usize)> {
    let scale: Vec<f64> = (0..m).map(|i| cov[i * m + i].max(0.0).sqrt()).collect();
    let corr = |i: usize, j: usize| {
        if scale[i] == 0.0 || scale[j] == 0.0 {
            0.0
        } else {
            cov[i * m + j] / (scale[i] * scale[j])
        }
    };
    let mut resid: Vec<f64> = (0..m).map(|i| if scale[i] == 0.0 { 0.0 } else { 1.0 }).collect();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut used = vec![false; m];
    loop {
        let pivot = (0..m)
            .filter(|&i| !used[i])
            .max_by(|&a, &b| resid[a].total_cmp(&resid[b]));
        let Some(p) = pivot else { break };
        if resid[p] <= PIVOT_TOL {
            break;
        }
        used[p] = true;
        let piv = resid[p].sqrt();
        let mut col = vec![0.0; m];
        for i in 0..m {
            if used[i] && i != p {
                continue;
            }
            let mut v = corr(i, p);
            for c in &cols {
                v -= c[i] * c[p];
            }
            col[i] = v / piv;
        }
        col[p] = piv;
        for i in 0..m {
            if !used[i] {
                resid[i] -= col[i] * col[i];
            }
        }
        cols.push(col);
    }
    let rank = cols.len();
    let mut factor = vec![0.0; m * rank];
    for (r, c) in cols.iter().enumerate() {
        for i in 0..m {
            factor[i * rank + r] = c[i] * scale[i];
        }
    }
    let maxdiag = (0..m).map(|i| cov[i * m + i]).fold(0.0, f64::max);
    for i in 0..m {
        for j in 0..m {
            let llt: f64 = (0..rank).map(|r| factor[i * rank + r] * factor[j * rank + r]).sum();
            if (llt - cov[i * m + j]).abs() > RECONSTRUCTION_TOL * maxdiag {
                return None;
            }
        }
    }
    Some((factor, rank))
}

/// Factorizes with jitter `1e−12·trace` added on failure, doubling up to 3 times.
fn factorize(cov: &[f64], m: usize, mode: usize) -> Result<(Vec<f64>, usize), SamplerError> {
    if let Some(f) = pivoted_cholesky(cov, m) {
        return Ok(f);
    }
    let trace: f64 = (0..m).map(|i| cov[i * m + i]).sum();
    let mut jitter = 1e-12 * trace;
    for _ in 0..4 {
        let mut c = cov.to_vec();
        for i in 0..m {
            c[i * m + i] += jitter;
        }
        if let Some(f) = pivoted_cholesky(&c, m) {
            return Ok(f);
        }
        jitter *= 2.0;
    }
    Err(SamplerError::FactorizationFailed { mode })
}

impl StepCovariance {
    /// Covariances for step `h`. `reference_rates`, if given, adds an OU
    /// increment with rate `μ_j` per mode (driven by the same `β_j`).
    pub fn new(
        model: &SpectralModel,
        h: f64,
        mode: TimeIntegralMode,
        reference_rates: Option<&[f64]>,
    ) -> Result<Self, SamplerError> {
        if h <= 0.0 || !h.is_finite() {
            return Err(SamplerError::NonPositiveStep(h));
        }
        let n = model.dim();
        let lambdas = &model.lambdas;
        let blocks = (0..n)
            .map(|j| {
                let mut kernels = vec![Kernel::Conv, Kernel::Increment, Kernel::Integral];
                match mode {
                    TimeIntegralMode::None => {}
                    TimeIntegralMode::Diagonal => kernels.push(Kernel::TimeIntegral(j)),
                    TimeIntegralMode::Full => kernels.extend((0..n).map(Kernel::TimeIntegral)),
                }
                if let Some(mu) = reference_rates {
                    kernels.push(Kernel::Reference(mu[j]));
                }
                let m = kernels.len();
                let b2 = model.bs[j] * model.bs[j];
                let mut cov = vec![0.0; m * m];
                for a in 0..m {
                    for b in a..m {
                        let v = b2 * kernel_inner(kernels[a], kernels[b], lambdas[j], lambdas, h);
                        cov[a * m + b] = v;
                        cov[b * m + a] = v;
                    }
                }
                let (factor, rank) = factorize(&cov, m, j + 1)?;
                Ok(ModeBlock {
                    kernels,
                    cov,
                    factor,
                    rank,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(StepCovariance {
            h,
            mode,
            with_reference: reference_rates.is_some(),
            blocks,
        })
    }

    pub fn blocks(&self) -> &[ModeBlock] {
        &self.blocks
    }

    pub fn dim(&self) -> usize {
        self.blocks.len()
    }

    /// Number of standard normals consumed per step.
    pub fn draws_per_step(&self) -> usize {
        self.blocks.iter().map(|b| b.rank).sum()
    }

    /// Draws one joint sample per mode; `out[j]` holds the values in kernel order.
    fn draw<R: Rng>(&self, rng: &mut R, out: &mut [Vec<f64>]) {
        let mut z = Vec::new();
        for (blk, vals) in self.blocks.iter().zip(out.iter_mut()) {
            z.clear();
            z.extend((0..blk.rank).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let m = blk.size();
            vals.resize(m, 0.0);
            for (i, v) in vals.iter_mut().enumerate() {
                let row = &blk.factor[i * blk.rank..(i + 1) * blk.rank];
                *v = row.iter().zip(&z).map(|(a, b)| a * b).sum();
            }
        }
    }

    /// Exact joint sample for one step. `carried` is the convolution state
    /// entering the step and is advanced to `e^{−λh}·carried + X`.
    pub fn sample_step<R: Rng>(
        &self,
        model: &SpectralModel,
        rng: &mut R,
        carried: &mut [f64],
    ) -> NoiseBundle {
        let n = self.dim();
        let mut vals = vec![Vec::new(); n];
        self.draw(rng, &mut vals);
        let mut nb = NoiseBundle::zeros(n, self.mode, self.with_reference);
        nb.carried.copy_from_slice(carried);
        for j in 0..n {
            let v = &vals[j];
            nb.conv[j] = v[0];
            nb.increment[j] = v[1];
            nb.integral[j] = v[2];
            match &mut nb.time_integrals {
                TimeIntegrals::None => {}
                TimeIntegrals::Diagonal(d) => d[j] = v[3],
                TimeIntegrals::Full(f) => {
                    for k in 0..n {
                        f[k * n + j] = v[3 + k];
                    }
                }
            }
            if let Some(r) = &mut nb.reference {
                r[j] = *v.last().expect("reference kernel is last");
            }
        }
        for ((c, l), x) in carried.iter_mut().zip(&model.lambdas).zip(&nb.conv) {
            *c = (-l * self.h).exp() * *c + x;
        }
        nb
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TimeIntegrals {
    None,
    Diagonal(Vec<f64>),
    /// Row-major, entry `k*N + j` is `I_kj`.
    Full(Vec<f64>),
}

/// Noise quantities for one step, per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBundle {
    /// `X_j = ∫ e^{−λ_j(h−s)} b_j dβ_j`.
    pub conv: Vec<f64>,
    /// `ΔW_j = b_j Δβ_j`.
    pub increment: Vec<f64>,
    /// `Q_j = ∫₀^h X_j(s) ds`.
    pub integral: Vec<f64>,
    pub time_integrals: TimeIntegrals,
    /// Convolution state from time 0 entering the step.
    pub carried: Vec<f64>,
    /// OU increments with the reference rates, if requested.
    pub reference: Option<Vec<f64>>,
}

impl NoiseBundle {
    pub fn zeros(n: usize, mode: TimeIntegralMode, with_reference: bool) -> Self {
        NoiseBundle {
            conv: vec![0.0; n],
            increment: vec![0.0; n],
            integral: vec![0.0; n],
            time_integrals: match mode {
                TimeIntegralMode::None => TimeIntegrals::None,
                TimeIntegralMode::Diagonal => TimeIntegrals::Diagonal(vec![0.0; n]),
                TimeIntegralMode::Full => TimeIntegrals::Full(vec![0.0; n * n]),
            },
            carried: vec![0.0; n],
            reference: with_reference.then(|| vec![0.0; n]),
        }
    }

    pub fn dim(&self) -> usize {
        self.conv.len()
    }

    /// `I_kj` if sampled.
    pub fn time_integral(&self, k: usize, j: usize) -> Option<f64> {
        match &self.time_integrals {
            TimeIntegrals::None => None,
            TimeIntegrals::Diagonal(d) => (k == j).then(|| d[k]),
            TimeIntegrals::Full(f) => Some(f[k * self.dim() + j]),
        }
    }
}

/// Exact per-substep samples on a uniform fine grid, stored flat
/// (`[substep * N + mode]`).
#[derive(Debug, Clone)]
pub struct FineRecord {
    pub delta: f64,
    n: usize,
    len: usize,
    conv: Vec<f64>,
    increment: Vec<f64>,
    integral: Vec<f64>,
    /// Diagonal substep time integrals `ι_jj`.
    iota: Vec<f64>,
    reference: Option<Vec<f64>>,
}

impl FineRecord {
    /// Draws `substeps` exact substep samples from `cov`, which must have
    /// diagonal time integrals.
    pub fn generate<R: Rng>(
        cov: &StepCovariance,
        substeps: usize,
        rng: &mut R,
    ) -> Result<Self, SamplerError> {
        if substeps == 0 {
            return Err(SamplerError::NoSubsteps);
        }
        assert_eq!(
            cov.mode,
            TimeIntegralMode::Diagonal,
            "fine records need diagonal substep time integrals"
        );
        let n = cov.dim();
        let total = substeps * n;
        let mut rec = FineRecord {
            delta: cov.h,
            n,
            len: substeps,
            conv: Vec::with_capacity(total),
            increment: Vec::with_capacity(total),
            integral: Vec::with_capacity(total),
            iota: Vec::with_capacity(total),
            reference: cov.with_reference.then(|| Vec::with_capacity(total)),
        };
        let mut vals = vec![Vec::new(); n];
        for _ in 0..substeps {
            cov.draw(rng, &mut vals);
            for v in &vals {
                rec.conv.push(v[0]);
                rec.increment.push(v[1]);
                rec.integral.push(v[2]);
                rec.iota.push(v[3]);
                if let Some(r) = &mut rec.reference {
                    r.push(v[4]);
                }
            }
        }
        Ok(rec)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn conv(&self, m: usize) -> &[f64] {
        &self.conv[m * self.n..(m + 1) * self.n]
    }

    pub fn increment(&self, m: usize) -> &[f64] {
        &self.increment[m * self.n..(m + 1) * self.n]
    }

    /// Reference OU increments of substep `m`, if sampled.
    pub fn reference_increment(&self, m: usize) -> Option<&[f64]> {
        self.reference.as_ref().map(|r| &r[m * self.n..(m + 1) * self.n])
    }

    pub fn has_reference(&self) -> bool {
        self.reference.is_some()
    }

    /// Feeds the Brownian increments of substeps `range` into `hasher`.
    pub fn hash_increments(&self, start: usize, end: usize, hasher: &mut Sha256) {
        for x in &self.increment[start * self.n..end * self.n] {
            hasher.update(x.to_le_bytes());
        }
    }
}

impl FineRecord {
    /// Merges every `factor` consecutive substeps into one, exactly.
    pub fn coarsen(&self, agg: &Aggregator, factor: usize) -> Result<FineRecord, SamplerError> {
        if factor == 0 {
            return Err(SamplerError::NoSubsteps);
        }
        let len = self.len / factor;
        if len == 0 || len * factor != self.len {
            return Err(SamplerError::OutOfRange {
                start: 0,
                end: factor,
                len: self.len,
            });
        }
        let n = self.n;
        let mut out = FineRecord {
            delta: self.delta * factor as f64,
            n,
            len,
            conv: Vec::with_capacity(len * n),
            increment: Vec::with_capacity(len * n),
            integral: Vec::with_capacity(len * n),
            iota: Vec::with_capacity(len * n),
            // references survive only if the aggregator knows their rates
            reference: (self.reference.is_some() && agg.ref_decay.is_some())
                .then(|| Vec::with_capacity(len * n)),
        };
        for c in 0..len {
            let nb = agg.aggregate(self, c * factor, (c + 1) * factor, TimeIntegralMode::Diagonal, None)?;
            out.conv.extend_from_slice(&nb.conv);
            out.increment.extend_from_slice(&nb.increment);
            out.integral.extend_from_slice(&nb.integral);
            if let TimeIntegrals::Diagonal(d) = &nb.time_integrals {
                out.iota.extend_from_slice(d);
            }
            if let (Some(r), Some(src)) = (&mut out.reference, &nb.reference) {
                r.extend_from_slice(src);
            }
        }
        Ok(out)
    }
}

/// Per-substep constants for composing a fine record into coarse steps.
#[derive(Debug, Clone)]
pub struct Aggregator {
    n: usize,
    lambdas: Vec<f64>,
    decay: Vec<f64>,
    phi: Vec<f64>,
    /// Row-major `kdd(λ_j, λ_k; δ)` at `k*N + j`.
    kdd: Vec<f64>,
    ref_decay: Option<Vec<f64>>,
}

impl Aggregator {
    pub fn new(model: &SpectralModel, delta: f64, reference_rates: Option<&[f64]>) -> Self {
        let n = model.dim();
        let l = &model.lambdas;
        let mut k_mat = vec![0.0; n * n];
        for k in 0..n {
            for j in 0..n {
                k_mat[k * n + j] = kdd(l[j], l[k], delta);
            }
        }
        Aggregator {
            n,
            lambdas: l.clone(),
            decay: model.semigroup(delta),
            phi: l.iter().map(|&x| phi1(x, delta)).collect(),
            kdd: k_mat,
            ref_decay: reference_rates.map(|mu| mu.iter().map(|m| (-m * delta).exp()).collect()),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Composes substeps `start..end` into one bundle with `carried = 0`.
    ///
    /// Every quantity is an exact composition of the substep samples except
    /// the off-diagonal `I_kj`, whose within-substep part is approximated by
    /// the diagonal `ι_jj` (error `O(δ² |λ_k − λ_j|)` per substep).
    pub fn aggregate(
        &self,
        rec: &FineRecord,
        start: usize,
        end: usize,
        mode: TimeIntegralMode,
        hasher: Option<&mut Sha256>,
    ) -> Result<NoiseBundle, SamplerError> {
        if end > rec.len || start >= end {
            return Err(SamplerError::OutOfRange {
                start,
                end,
                len: rec.len,
            });
        }
        let n = self.n;
        let with_ref = self.ref_decay.is_some() && rec.has_reference();
        let mut nb = NoiseBundle::zeros(n, mode, with_ref);
        for m in start..end {
            let base = m * n;
            if let TimeIntegrals::Full(f) = &mut nb.time_integrals {
                for k in 0..n {
                    let dk = self.decay[k];
                    for j in 0..n {
                        let idx = k * n + j;
                        f[idx] = dk * f[idx] + self.kdd[idx] * nb.conv[j] + rec.iota[base + j];
                    }
                }
            }
            if let TimeIntegrals::Diagonal(d) = &mut nb.time_integrals {
                for j in 0..n {
                    d[j] = self.decay[j] * d[j]
                        + self.kdd[j * n + j] * nb.conv[j]
                        + rec.iota[base + j];
                }
            }
            for j in 0..n {
                nb.integral[j] += self.phi[j] * nb.conv[j] + rec.integral[base + j];
                nb.conv[j] = self.decay[j] * nb.conv[j] + rec.conv[base + j];
                nb.increment[j] += rec.increment[base + j];
            }
            if let (Some(r), Some(rd), Some(src)) =
                (&mut nb.reference, &self.ref_decay, &rec.reference)
            {
                for j in 0..n {
                    r[j] = rd[j] * r[j] + src[base + j];
                }
            }
        }
        if let Some(h) = hasher {
            rec.hash_increments(start, end, h);
        }
        Ok(nb)
    }
}

/// Deterministic RNG stream for one Monte Carlo path.
pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

/// Samples a fine record of `substeps` pieces of `h/substeps` and aggregates
/// it to one step of size `h`.
pub fn aggregate_step<R: Rng>(
    model: &SpectralModel,
    h: f64,
    substeps: usize,
    mode: TimeIntegralMode,
    rng: &mut R,
) -> Result<(NoiseBundle, FineRecord), SamplerError> {
    if substeps == 0 {
        return Err(SamplerError::NoSubsteps);
    }
    if h <= 0.0 {
        return Err(SamplerError::NonPositiveStep(h));
    }
    let delta = h / substeps as f64;
    let cov = StepCovariance::new(model, delta, TimeIntegralMode::Diagonal, None)?;
    let rec = FineRecord::generate(&cov, substeps, rng)?;
    let agg = Aggregator::new(model, delta, None);
    let nb = agg.aggregate(&rec, 0, substeps, mode, None)?;
    Ok((nb, rec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Nonlinearity, SmoothnessParams};
    use crate::numerics::gauss_legendre;
    use std::f64::consts::PI;

    fn heat(n: usize) -> SpectralModel {
        SpectralModel::heat_1d(n, Nonlinearity::Zero).unwrap()
    }

    fn quad(f: impl Fn(f64) -> f64, h: f64) -> f64 {
        let panels = 200;
        let w = h / panels as f64;
        (0..panels)
            .flat_map(|k| gauss_legendre(16, k as f64 * w, (k + 1) as f64 * w))
            .map(|(x, wt)| wt * f(x))
            .sum()
    }

    #[test]
    fn conv_variance_limits() {
        assert_eq!(conv_variance(0.0, 1.0, 0.1), 0.1);
        assert_eq!(conv_variance(3.0, 0.0, 0.1), 0.0);
        let l = PI * PI;
        let v = conv_variance(l, 1.0, 0.01);
        let f = (1.0 - (-2.0 * l * 0.01f64).exp()) / (2.0 * l);
        assert!((v - f).abs() <= 1e-14 * f);
    }

    #[test]
    fn inner_products_match_quadrature() {
        let m = SpectralModel::heat_1d(3, Nonlinearity::Zero).unwrap();
        let l = &m.lambdas;
        let h = 0.05;
        let kernels = [
            Kernel::Conv,
            Kernel::Increment,
            Kernel::Integral,
            Kernel::TimeIntegral(0),
            Kernel::TimeIntegral(1),
            Kernel::TimeIntegral(2),
            Kernel::Reference(l[1] - 0.5),
        ];
        for j in 0..3 {
            for a in kernels {
                for b in kernels {
                    let exact = quad(
                        |u| kernel_value(a, l[j], l, u) * kernel_value(b, l[j], l, u),
                        h,
                    );
                    let got = kernel_inner(a, b, l[j], l, h);
                    assert!(
                        (got - exact).abs() <= 1e-11 * exact.abs().max(1e-12),
                        "j={j} {a:?} {b:?}: {got} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn degenerate_kernel_limit() {
        let l = 7.0;
        let lambdas = [l, l + 1e-9];
        for &u in &[0.01, 0.05, 0.1] {
            let lim = kernel_value(Kernel::TimeIntegral(0), l, &lambdas[..1], u);
            let gen = kernel_value(Kernel::TimeIntegral(1), l, &lambdas, u);
            assert!((lim - u * (-l * u).exp()).abs() < 1e-16);
            assert!((gen - lim).abs() <= 1e-5 * lim);
        }
    }

    #[test]
    fn zero_noise_gives_zero_covariance_and_bundle() {
        let s = SmoothnessParams {
            gamma: 0.5,
            delta: 0.5,
            gamma_strict: false,
        };
        let m = SpectralModel::custom(vec![1.0, 4.0], vec![0.0, 0.0], 0.0, Nonlinearity::Zero, s)
            .unwrap();
        let cov = StepCovariance::new(&m, 0.1, TimeIntegralMode::Full, None).unwrap();
        assert!(cov.blocks().iter().all(|b| b.cov.iter().all(|&x| x == 0.0)));
        assert_eq!(cov.draws_per_step(), 0);
        let mut carried = vec![1.0, 2.0];
        let mut rng = path_rng(1, 0);
        let nb = cov.sample_step(&m, &mut rng, &mut carried);
        assert!(nb.conv.iter().all(|&x| x == 0.0));
        assert_eq!(nb.carried, vec![1.0, 2.0]);
        assert_eq!(carried, vec![(-0.1f64).exp(), 2.0 * (-0.4f64).exp()]);
    }

    #[test]
    fn rejects_nonpositive_step() {
        assert_eq!(
            StepCovariance::new(&heat(2), 0.0, TimeIntegralMode::None, None).unwrap_err(),
            SamplerError::NonPositiveStep(0.0)
        );
    }

    #[test]
    fn integral_is_rank_deficient() {
        // Q = (ΔW − X)/λ exactly, so three quantities span two dimensions.
        let cov = StepCovariance::new(&heat(2), 0.05, TimeIntegralMode::None, None).unwrap();
        assert!(cov.blocks().iter().all(|b| b.rank == 2));
        let sode = SpectralModel::sode(vec![1.0], Nonlinearity::Zero).unwrap();
        let c = StepCovariance::new(&sode, 0.05, TimeIntegralMode::Diagonal, None).unwrap();
        assert_eq!(c.blocks()[0].rank, 2);
    }

    #[test]
    fn same_seed_same_bundle() {
        let m = heat(4);
        let cov = StepCovariance::new(&m, 0.05, TimeIntegralMode::Full, None).unwrap();
        let mut c1 = vec![0.0; 4];
        let mut c2 = vec![0.0; 4];
        let a = cov.sample_step(&m, &mut path_rng(9, 3), &mut c1);
        let b = cov.sample_step(&m, &mut path_rng(9, 3), &mut c2);
        assert_eq!(a, b);
        let c = cov.sample_step(&m, &mut path_rng(9, 4), &mut vec![0.0; 4]);
        assert_ne!(a, c);
    }

    #[test]
    fn carried_state_semigroup_consistency() {
        let m = heat(3);
        let s = SmoothnessParams {
            gamma: 0.5,
            delta: 0.5,
            gamma_strict: false,
        };
        let quiet =
            SpectralModel::custom(m.lambdas.clone(), vec![0.0; 3], 0.0, Nonlinearity::Zero, s)
                .unwrap();
        let h = 0.01;
        let steps = 8;
        let small = StepCovariance::new(&quiet, h, TimeIntegralMode::None, None).unwrap();
        let big = StepCovariance::new(&quiet, h * steps as f64, TimeIntegralMode::None, None)
            .unwrap();
        let mut a = vec![1.0, -0.5, 0.25];
        let mut b = a.clone();
        let mut rng = path_rng(0, 0);
        for _ in 0..steps {
            small.sample_step(&quiet, &mut rng, &mut a);
        }
        big.sample_step(&quiet, &mut rng, &mut b);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-14 * y.abs());
        }
    }

    #[test]
    fn aggregation_telescopes() {
        let m = heat(3);
        let mut rng = path_rng(5, 0);
        let (_, rec) = aggregate_step(&m, 0.08, 16, TimeIntegralMode::Full, &mut rng).unwrap();
        let agg = Aggregator::new(&m, rec.delta, None);
        let whole = agg.aggregate(&rec, 0, 16, TimeIntegralMode::Full, None).unwrap();
        // two coarse halves composed by hand
        let a = agg.aggregate(&rec, 0, 8, TimeIntegralMode::None, None).unwrap();
        let b = agg.aggregate(&rec, 8, 16, TimeIntegralMode::None, None).unwrap();
        let half = 0.04;
        for j in 0..3 {
            let e = (-m.lambdas[j] * half).exp();
            let x = e * a.conv[j] + b.conv[j];
            assert!((x - whole.conv[j]).abs() < 1e-14);
            let w = a.increment[j] + b.increment[j];
            assert!((w - whole.increment[j]).abs() < 1e-14);
            let q = a.integral[j] + phi1(m.lambdas[j], half) * a.conv[j] + b.integral[j];
            assert!((q - whole.integral[j]).abs() < 1e-14);
        }
        // one substep is just the substep sample
        let one = agg.aggregate(&rec, 3, 4, TimeIntegralMode::Diagonal, None).unwrap();
        assert_eq!(one.conv, rec.conv(3));
        assert!(agg.aggregate(&rec, 10, 20, TimeIntegralMode::None, None).is_err());
    }

    /// Exact variance of the aggregated `I_kj` minus the closed form, from the
    /// piecewise kernel of the aggregation rule.
    fn aggregation_variance_gap(lk: f64, lj: f64, h: f64, substeps: usize) -> f64 {
        let delta = h / substeps as f64;
        let lambdas = [lk, lj];
        let mut gap = 0.0;
        for m in 0..substeps {
            let right = (m + 1) as f64 * delta;
            let prop = (-lk * (h - right)).exp();
            for (r, w) in gauss_legendre(16, m as f64 * delta, right) {
                let v = right - r;
                let exact = kernel_value(Kernel::TimeIntegral(0), lj, &lambdas, h - r);
                let diff = prop
                    * (kernel_value(Kernel::TimeIntegral(1), lj, &lambdas, v)
                        - kernel_value(Kernel::TimeIntegral(0), lj, &lambdas, v));
                gap += w * ((exact + diff).powi(2) - exact * exact);
            }
        }
        gap.abs()
    }

    #[test]
    fn aggregation_bias_shrinks_with_substeps() {
        let (lk, lj, h) = (PI * PI, 4.0 * PI * PI, 0.05);
        let g: Vec<f64> = [10, 100, 1000]
            .iter()
            .map(|&s| aggregation_variance_gap(lk, lj, h, s))
            .collect();
        // at least first order in the substep width
        assert!(g[0] / g[1] >= 8.0, "{g:?}");
        assert!(g[1] / g[2] >= 8.0, "{g:?}");
    }

    #[test]
    fn path_rng_is_keyed_by_seed_and_path() {
        let a: u64 = path_rng(1, 2).random();
        let b: u64 = path_rng(1, 2).random();
        let c: u64 = path_rng(1, 3).random();
        let d: u64 = path_rng(2, 2).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
