//! Monte Carlo strong-error experiments with coupled noise.
//!
//! Every path draws one fine record; all levels of the step ladder, all
//! schemes and the reference solution are computed from that same record.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::SpectralModel;
use crate::numerics::{dist2, pairwise_sum, phi1};
use crate::sampler::{path_rng, Aggregator, FineRecord, SamplerError, StepCovariance, TimeIntegralMode};
use crate::schemes::{mode_covers, RecordNoise, SchemeError, SchemeId, StepWorkspace, NoiseSource};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid step ladder: {0}")]
    InvalidLadder(String),
    #[error("{got} paths requested, at least {min} are needed")]
    TooFewPaths { got: usize, min: usize },
    #[error("initial state has {got} entries, model has {expected} modes")]
    InitialState { expected: usize, got: usize },
    #[error("{scheme}: slope confidence interval is {width:.3} wide (limit {limit}); more paths are needed")]
    InsufficientPaths {
        scheme: SchemeId,
        width: f64,
        limit: f64,
    },
    #[error("exact reference needs a constant linear nonlinearity, got {0}")]
    NotLinearConstant(String),
    #[error("expected {expected:?} mode, spec has {got:?}")]
    WrongMode { expected: Mode, got: Mode },
    #[error("{scheme} needs {needed:?} time integrals, experiment samples {have:?}")]
    TimeIntegrals {
        scheme: SchemeId,
        needed: TimeIntegralMode,
        have: TimeIntegralMode,
    },
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

pub const MIN_PATHS: usize = 100;
pub const MIN_LEVELS: usize = 3;
/// Slope confidence intervals wider than this are not trusted.
pub const MAX_CI_WIDTH: f64 = 0.2;
/// Fine-grid refinement of the exponential-Euler reference for nonlinear models.
pub const REFERENCE_SUBSTEPS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// One step from `t0 = 0`; error at `t* = h`.
    Local,
    /// `M` steps over `[0, T]`; error at `T`.
    Global,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Local => "local",
            Mode::Global => "global",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub model: SpectralModel,
    pub schemes: Vec<SchemeId>,
    /// Step counts `M` per level over the horizon, strictly increasing.
    pub ladder: Vec<usize>,
    pub paths: usize,
    pub seed: u64,
    pub mode: Mode,
    pub horizon: f64,
    pub u0: Vec<f64>,
    pub time_integrals: TimeIntegralMode,
    pub reference_substeps: usize,
    /// Hex digest of the configuration that produced the spec, if any.
    pub config_hash: String,
}

impl ExperimentSpec {
    pub fn new(model: SpectralModel, schemes: Vec<SchemeId>, ladder: Vec<usize>, mode: Mode) -> Self {
        let n = model.dim();
        let time_integrals = schemes
            .iter()
            .map(|s| s.required_time_integrals(&model))
            .max_by_key(|m| match m {
                TimeIntegralMode::None => 0,
                TimeIntegralMode::Diagonal => 1,
                TimeIntegralMode::Full => 2,
            })
            .unwrap_or_default();
        ExperimentSpec {
            model,
            schemes,
            ladder,
            paths: 1000,
            seed: 0,
            mode,
            horizon: 1.0,
            u0: vec![0.0; n],
            time_integrals,
            reference_substeps: REFERENCE_SUBSTEPS,
            config_hash: String::new(),
        }
    }

    fn validate(&self) -> Result<(), HarnessError> {
        let l = &self.ladder;
        if l.len() < MIN_LEVELS {
            return Err(HarnessError::InvalidLadder(format!(
                "regression needs at least {MIN_LEVELS} levels, got {}",
                l.len()
            )));
        }
        if l[0] == 0 || l.windows(2).any(|w| w[1] <= w[0]) {
            return Err(HarnessError::InvalidLadder(
                "step counts must be positive and strictly increasing".into(),
            ));
        }
        let finest = *l.last().expect("nonempty");
        if l.iter().any(|m| finest % m != 0) {
            return Err(HarnessError::InvalidLadder(
                "every step count must divide the finest one".into(),
            ));
        }
        if self.paths < MIN_PATHS {
            return Err(HarnessError::TooFewPaths {
                got: self.paths,
                min: MIN_PATHS,
            });
        }
        if self.u0.len() != self.model.dim() {
            return Err(HarnessError::InitialState {
                expected: self.model.dim(),
                got: self.u0.len(),
            });
        }
        if !(self.horizon > 0.0) {
            return Err(HarnessError::InvalidLadder("horizon must be positive".into()));
        }
        for &s in &self.schemes {
            let need = s.required_time_integrals(&self.model);
            if !mode_covers(self.time_integrals, need) {
                return Err(HarnessError::TimeIntegrals {
                    scheme: s,
                    needed: need,
                    have: self.time_integrals,
                });
            }
        }
        Ok(())
    }

    /// Step size of every level.
    pub fn step_sizes(&self) -> Vec<f64> {
        match self.mode {
            Mode::Local | Mode::Global => self.ladder.iter().map(|&m| self.horizon / m as f64).collect(),
        }
    }
}

/// Exact solution of `du = (−λ + α)u dt + b dβ` per mode on the coarse grid
/// `t_k = k · per_step · δ`, driven by the record's reference increments.
pub fn exact_linear_reference(
    model: &SpectralModel,
    u0: &[f64],
    rec: &FineRecord,
    per_step: usize,
    steps: usize,
) -> Result<Vec<Vec<f64>>, HarnessError> {
    let mu = model.reference_rates()
        .ok_or_else(|| HarnessError::NotLinearConstant(model.nonlinearity.to_string()))?;
    if !rec.has_reference() {
        return Err(HarnessError::NotLinearConstant(
            "record was drawn without reference increments".into(),
        ));
    }
    let agg = Aggregator::new(model, rec.delta, Some(&mu));
    let h = rec.delta * per_step as f64;
    let decay: Vec<f64> = mu.iter().map(|m| (-m * h).exp()).collect();
    let mut traj = vec![u0.to_vec()];
    for k in 0..steps {
        let nb = agg.aggregate(rec, k * per_step, (k + 1) * per_step, TimeIntegralMode::None, None)?;
        let r = nb.reference.as_ref().expect("reference requested");
        let prev = traj.last().expect("nonempty");
        traj.push((0..mu.len()).map(|j| decay[j] * prev[j] + r[j]).collect());
    }
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelStats {
    pub level: usize,
    pub steps: usize,
    pub h: f64,
    pub error: f64,
    pub stderr: f64,
    pub paths: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regression {
    pub slope: f64,
    pub intercept: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Slopes over the first and second half of the ladder.
    pub half_slopes: (f64, f64),
}

impl Regression {
    pub fn ci_width(&self) -> f64 {
        self.ci_high - self.ci_low
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub scheme: SchemeId,
    pub mode: Mode,
    pub levels: Vec<LevelStats>,
    /// `None` when some level has zero error.
    pub regression: Option<Regression>,
    /// Wood order predicted for the local error, at the smoothness suprema.
    pub theory: Option<f64>,
    pub seed: u64,
    pub config_hash: String,
    pub coupling_hash: String,
    pub coupling_consistent: bool,
}

impl ErrorReport {
    /// Errors never grow by more than two standard errors along the ladder.
    pub fn monotone(&self) -> bool {
        self.levels.windows(2).all(|w| {
            w[1].error <= w[0].error + 2.0 * w[0].stderr.max(w[1].stderr)
        })
    }

    pub fn check_precision(&self) -> Result<(), HarnessError> {
        if let Some(r) = &self.regression {
            if r.ci_width() > MAX_CI_WIDTH {
                return Err(HarnessError::InsufficientPaths {
                    scheme: self.scheme,
                    width: r.ci_width(),
                    limit: MAX_CI_WIDTH,
                });
            }
        }
        Ok(())
    }

    pub fn verdict(&self) -> &'static str {
        match (self.mode, self.theory, &self.regression) {
            (Mode::Local, Some(t), Some(r)) if r.slope >= t - 0.15 => "consistent with prediction",
            (Mode::Local, Some(_), Some(_)) => "below prediction",
            (Mode::Global, _, Some(_)) => "comparative only",
            _ => "no prediction",
        }
    }
}

struct PathResult {
    /// `‖Y − U‖²` indexed `[scheme * levels + level]`.
    sq_errors: Vec<f64>,
    hash: [u8; 32],
    consistent: bool,
}

/// Runs the experiment and returns one report per scheme. Results do not
/// depend on the size of the rayon pool.
pub fn run(spec: &ExperimentSpec) -> Result<Vec<ErrorReport>, HarnessError> {
    spec.validate()?;
    let model = &spec.model;
    let rates = model.reference_rates();
    let exact = rates.is_some();
    let finest = *spec.ladder.last().expect("validated");
    let coarsest = spec.ladder[0];
    let refine = if exact { 1 } else { spec.reference_substeps };
    let delta = spec.horizon / (finest * refine) as f64;
    let record_len = match spec.mode {
        Mode::Local => finest / coarsest * refine,
        Mode::Global => finest * refine,
    };
    let per_step: Vec<usize> = spec.ladder.iter().map(|m| finest / m * refine).collect();
    let cov = StepCovariance::new(model, delta, TimeIntegralMode::Diagonal, rates.as_deref())?;
    let agg = Aggregator::new(model, delta, rates.as_deref());
    let workspaces: Vec<StepWorkspace> = spec
        .step_sizes()
        .iter()
        .map(|&h| StepWorkspace::new(model, h))
        .collect::<Result<_, _>>()?;
    let fine_decay = model.semigroup(delta);
    let fine_phi: Vec<f64> = model.lambdas.iter().map(|&l| phi1(l, delta)).collect();

    let ctx = PathContext {
        spec,
        cov: &cov,
        agg: &agg,
        workspaces: &workspaces,
        per_step: &per_step,
        record_len,
        rates: rates.as_deref(),
        fine_decay: &fine_decay,
        fine_phi: &fine_phi,
    };
    let results: Vec<PathResult> = (0..spec.paths)
        .into_par_iter()
        .map(|p| ctx.run_path(p as u64))
        .collect::<Result<_, _>>()?;

    let mut hasher = Sha256::new();
    for r in &results {
        hasher.update(r.hash);
    }
    let coupling_hash = hex::encode(hasher.finalize());
    let consistent = results.iter().all(|r| r.consistent);
    let nlev = spec.ladder.len();
    let hs = spec.step_sizes();
    let (gamma, delta_s) = (model.smoothness.gamma, model.smoothness.delta);

    Ok(spec
        .schemes
        .iter()
        .enumerate()
        .map(|(s, &scheme)| {
            let columns: Vec<Vec<f64>> = (0..nlev)
                .map(|l| results.iter().map(|r| r.sq_errors[s * nlev + l]).collect())
                .collect();
            let levels = (0..nlev)
                .map(|l| level_stats(l, spec.ladder[l], hs[l], &columns[l]))
                .collect::<Vec<_>>();
            let regression = regress(&hs, &columns);
            ErrorReport {
                scheme,
                mode: spec.mode,
                levels,
                regression,
                theory: scheme
                    .wood()
                    .and_then(|w| w.order(gamma, delta_s).ok())
                    .map(|(v, _)| v),
                seed: spec.seed,
                config_hash: spec.config_hash.clone(),
                coupling_hash: coupling_hash.clone(),
                coupling_consistent: consistent,
            }
        })
        .collect())
}

/// Local-order experiment; fails if a slope is not resolved to the required
/// precision.
pub fn local_order(spec: &ExperimentSpec) -> Result<Vec<ErrorReport>, HarnessError> {
    ordered(spec, Mode::Local)
}

/// Global-order experiment at `T`, same checks as [`local_order`].
pub fn global_order(spec: &ExperimentSpec) -> Result<Vec<ErrorReport>, HarnessError> {
    ordered(spec, Mode::Global)
}

fn ordered(spec: &ExperimentSpec, mode: Mode) -> Result<Vec<ErrorReport>, HarnessError> {
    if spec.mode != mode {
        return Err(HarnessError::WrongMode {
            expected: mode,
            got: spec.mode,
        });
    }
    let reports = run(spec)?;
    for r in &reports {
        r.check_precision()?;
    }
    Ok(reports)
}

struct PathContext<'a> {
    spec: &'a ExperimentSpec,
    cov: &'a StepCovariance,
    agg: &'a Aggregator,
    workspaces: &'a [StepWorkspace],
    per_step: &'a [usize],
    record_len: usize,
    rates: Option<&'a [f64]>,
    fine_decay: &'a [f64],
    fine_phi: &'a [f64],
}

impl PathContext<'_> {
    fn run_path(&self, path: u64) -> Result<PathResult, HarnessError> {
        let spec = self.spec;
        let model = &spec.model;
        let mut rng = path_rng(spec.seed, path);
        let rec = FineRecord::generate(self.cov, self.record_len, &mut rng)?;
        let nlev = spec.ladder.len();
        let mut sq_errors = vec![0.0; spec.schemes.len() * nlev];
        let mut path_hash = Sha256::new();
        let mut consistent = true;

        // Fine-grid exponential Euler for nonlinear references.
        let fine_path = if self.rates.is_none() {
            let mut u = vec![spec.u0.clone()];
            for m in 0..rec.len() {
                let prev = u.last().expect("nonempty");
                let f = model.eval_f(prev);
                let x = rec.conv(m);
                let next = (0..model.dim())
                    .map(|k| self.fine_decay[k] * prev[k] + self.fine_phi[k] * f[k] + x[k])
                    .collect();
                u.push(next);
            }
            Some(u)
        } else {
            None
        };

        for l in 0..nlev {
            let ws = &self.workspaces[l];
            let per = self.per_step[l];
            let steps = match spec.mode {
                Mode::Local => 1,
                Mode::Global => spec.ladder[l],
            };
            let consumed = per * steps;

            let mut ref_hash = Sha256::new();
            rec.hash_increments(0, consumed, &mut ref_hash);
            let reference = match (&fine_path, self.rates) {
                (Some(u), _) => u[consumed].clone(),
                (None, Some(mu)) => {
                    let nb = self.agg.aggregate(&rec, 0, consumed, TimeIntegralMode::None, None)?;
                    let r = nb.reference.expect("reference kernel sampled");
                    let t = ws.h * steps as f64;
                    (0..mu.len())
                        .map(|j| (-mu[j] * t).exp() * spec.u0[j] + r[j])
                        .collect()
                }
                (None, None) => unreachable!("either rates or a fine path exist"),
            };

            let mut noise = RecordNoise::new(self.agg, &rec, per, spec.time_integrals).with_hasher();
            let mut states = vec![spec.u0.clone(); spec.schemes.len()];
            for _ in 0..steps {
                let nb = noise.next_bundle()?;
                for (y, &scheme) in states.iter_mut().zip(&spec.schemes) {
                    *y = ws.step(scheme, model, y, &nb)?;
                }
            }
            let scheme_hash = noise.finish_hash().expect("hasher attached");
            let ref_digest: [u8; 32] = ref_hash.finalize().into();
            consistent &= scheme_hash == ref_digest;
            path_hash.update(scheme_hash);

            for (s, y) in states.iter().enumerate() {
                let d = dist2(y, &reference);
                sq_errors[s * nlev + l] = d * d;
            }
        }
        Ok(PathResult {
            sq_errors,
            hash: path_hash.finalize().into(),
            consistent,
        })
    }
}

fn level_stats(level: usize, steps: usize, h: f64, sq: &[f64]) -> LevelStats {
    let p = sq.len() as f64;
    let mean = pairwise_sum(sq) / p;
    let dev: Vec<f64> = sq.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (p - 1.0);
    let error = mean.sqrt();
    let stderr = if error > 0.0 {
        (var / p).sqrt() / (2.0 * error)
    } else {
        0.0
    };
    LevelStats {
        level: level + 1,
        steps,
        h,
        error,
        stderr,
        paths: sq.len(),
    }
}

fn ols(x: &[f64], y: &[f64]) -> (f64, f64, Vec<f64>) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let w: Vec<f64> = x.iter().map(|a| (a - mx) / sxx).collect();
    let slope: f64 = w.iter().zip(y).map(|(a, b)| a * b).sum();
    (slope, my - slope * mx, w)
}

/// Least squares of `ln error` on `ln h`, with a delta-method 95% interval
/// built from the covariance of the per-path squared errors across levels.
pub fn regress(hs: &[f64], sq_columns: &[Vec<f64>]) -> Option<Regression> {
    let p = sq_columns[0].len() as f64;
    let means: Vec<f64> = sq_columns.iter().map(|c| pairwise_sum(c) / p).collect();
    if means.iter().any(|&m| !(m > 0.0)) {
        return None;
    }
    let x: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let y: Vec<f64> = means.iter().map(|m| 0.5 * m.ln()).collect();
    let (slope, intercept, w) = ols(&x, &y);
    let nlev = hs.len();
    let mut var = 0.0;
    for a in 0..nlev {
        for b in 0..nlev {
            let prods: Vec<f64> = sq_columns[a]
                .iter()
                .zip(&sq_columns[b])
                .map(|(u, v)| (u - means[a]) * (v - means[b]))
                .collect();
            let cov = pairwise_sum(&prods) / (p - 1.0) / p;
            var += w[a] * w[b] * cov / (4.0 * means[a] * means[b]);
        }
    }
    let half = 1.96 * var.max(0.0).sqrt();
    let mid = nlev / 2;
    let first = ols(&x[..mid.max(2)], &y[..mid.max(2)]).0;
    let lo = mid.min(nlev - 2);
    let second = ols(&x[lo..], &y[lo..]).0;
    Some(Regression {
        slope,
        intercept,
        ci_low: slope - half,
        ci_high: slope + half,
        half_slopes: (first, second),
    })
}

/// RMS difference at the coarsest local step between the fine exponential
/// Euler reference at `substeps` and `2·substeps` refinement.
pub fn reference_gap(spec: &ExperimentSpec, substeps: usize) -> Result<f64, HarnessError> {
    spec.validate()?;
    let model = &spec.model;
    let h = spec.horizon / spec.ladder[0] as f64;
    let fine_n = 2 * substeps;
    let delta = h / fine_n as f64;
    let cov = StepCovariance::new(model, delta, TimeIntegralMode::Diagonal, None)?;
    let agg = Aggregator::new(model, delta, None);
    let sq: Vec<f64> = (0..spec.paths)
        .into_par_iter()
        .map(|p| -> Result<f64, HarnessError> {
            let rec = FineRecord::generate(&cov, fine_n, &mut path_rng(spec.seed, p as u64))?;
            let coarse = rec.coarsen(&agg, 2)?;
            let a = fine_exp_euler(model, &spec.u0, &rec);
            let b = fine_exp_euler(model, &spec.u0, &coarse);
            Ok(dist2(&a, &b).powi(2))
        })
        .collect::<Result<_, _>>()?;
    Ok((pairwise_sum(&sq) / sq.len() as f64).sqrt())
}

fn fine_exp_euler(model: &SpectralModel, u0: &[f64], rec: &FineRecord) -> Vec<f64> {
    let decay = model.semigroup(rec.delta);
    let phi: Vec<f64> = model.lambdas.iter().map(|&l| phi1(l, rec.delta)).collect();
    let mut u = u0.to_vec();
    for m in 0..rec.len() {
        let f = model.eval_f(&u);
        let x = rec.conv(m);
        for k in 0..u.len() {
            u[k] = decay[k] * u[k] + phi[k] * f[k] + x[k];
        }
    }
    u
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `<scheme>_errors.csv`, `<scheme>_summary.txt` and
/// `<scheme>_loglog.svg` into `dir`.
pub fn emit(report: &ErrorReport, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let name = report.scheme.name();

    let csv_path = dir.join(format!("{name}_errors.csv"));
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| HarnessError::Io {
        path: csv_path.clone(),
        source: e.into(),
    })?;
    let csv_io = |e: csv::Error| HarnessError::Io {
        path: csv_path.clone(),
        source: e.into(),
    };
    w.write_record(["level", "M", "h", "error", "stderr", "paths", "seed"])
        .map_err(csv_io)?;
    for l in &report.levels {
        w.write_record([
            l.level.to_string(),
            l.steps.to_string(),
            l.h.to_string(),
            l.error.to_string(),
            l.stderr.to_string(),
            l.paths.to_string(),
            report.seed.to_string(),
        ])
        .map_err(csv_io)?;
    }
    w.flush().map_err(io_err(&csv_path))?;

    let summary_path = dir.join(format!("{name}_summary.txt"));
    fs::write(&summary_path, summary_text(report)).map_err(io_err(&summary_path))?;

    let svg_path = dir.join(format!("{name}_loglog.svg"));
    fs::write(&svg_path, svg_plot(report)).map_err(io_err(&svg_path))?;
    Ok(vec![csv_path, summary_path, svg_path])
}

pub fn summary_text(r: &ErrorReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scheme: {}", r.scheme);
    let _ = writeln!(s, "mode: {}", r.mode.name());
    let _ = writeln!(s, "seed: {}", r.seed);
    if !r.config_hash.is_empty() {
        let _ = writeln!(s, "config_hash: {}", r.config_hash);
    }
    let _ = writeln!(s, "coupling_hash: {}", r.coupling_hash);
    let _ = writeln!(s, "coupling_consistent: {}", r.coupling_consistent);
    match r.theory {
        Some(t) => {
            let _ = writeln!(s, "predicted_local_order: {t} (supremum)");
        }
        None => {
            let _ = writeln!(s, "predicted_local_order: none");
        }
    }
    match &r.regression {
        Some(g) => {
            let _ = writeln!(s, "slope: {:.4}", g.slope);
            let _ = writeln!(s, "slope_ci95: [{:.4}, {:.4}]", g.ci_low, g.ci_high);
            let _ = writeln!(
                s,
                "half_slopes: {:.4} {:.4}",
                g.half_slopes.0, g.half_slopes.1
            );
        }
        None => {
            let _ = writeln!(s, "slope: undefined (zero error on some level)");
        }
    }
    let _ = writeln!(s, "monotone: {}", r.monotone());
    let _ = writeln!(s, "verdict: {}", r.verdict());
    s
}

/// Static log–log plot of error against step size with the fitted line.
pub fn svg_plot(r: &ErrorReport) -> String {
    let (w, h, pad) = (480.0, 360.0, 50.0);
    let pts: Vec<(f64, f64)> = r
        .levels
        .iter()
        .filter(|l| l.error > 0.0)
        .map(|l| (l.h.log10(), l.error.log10()))
        .collect();
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{} ({})</text>"#,
        w / 2.0,
        r.scheme,
        r.mode.name()
    );
    if pts.is_empty() {
        s.push_str("</svg>\n");
        return s;
    }
    let (xmin, xmax) = bounds(pts.iter().map(|p| p.0));
    let (ymin, ymax) = bounds(pts.iter().map(|p| p.1));
    let sx = |x: f64| pad + (x - xmin) / (xmax - xmin) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - ymin) / (ymax - ymin) * (h - 2.0 * pad);
    let _ = writeln!(
        s,
        r#"<path d="M{pad} {pad} V{} H{}" fill="none" stroke="black"/>"#,
        h - pad,
        w - pad
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">log10 h</text>"#,
        w / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" font-size="12" transform="rotate(-90 14 {})" text-anchor="middle">log10 error</text>"#,
        h / 2.0,
        h / 2.0
    );
    for &(x, y) in &pts {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="steelblue"/>"#,
            sx(x),
            sy(y)
        );
    }
    if let Some(g) = &r.regression {
        // fit is in natural logs; slope is base independent
        let c = g.intercept / std::f64::consts::LN_10;
        let line = |x: f64| c + g.slope * x;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="firebrick" stroke-dasharray="6 3"/>"#,
            sx(xmin),
            sy(line(xmin)),
            sx(xmax),
            sy(line(xmax))
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12">slope {:.3}</text>"#,
            pad + 10.0,
            pad + 10.0,
            g.slope
        );
    }
    s.push_str("</svg>\n");
    s
}

fn bounds(it: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        let m = 0.05 * (hi - lo);
        (lo - m, hi + m)
    }
}
