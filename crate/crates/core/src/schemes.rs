//! One-step maps in the eigenbasis and trajectory integration.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::model::{ModelError, SpectralModel};
use crate::numerics::{gauss_legendre, kdd, phi1};
use crate::sampler::{Aggregator, FineRecord, NoiseBundle, SamplerError, StepCovariance, TimeIntegralMode};
use crate::trees::{named, SWood};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemeError {
    #[error("{scheme} needs time integrals {needed:?} but the noise bundle carries fewer")]
    MissingTimeIntegrals {
        scheme: SchemeId,
        needed: TimeIntegralMode,
    },
    #[error("at least one step is required")]
    NoSteps,
    #[error("closed-form step weights deviate from quadrature by {0:e} (relative)")]
    SelfTest(f64),
    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeId {
    ExpEuler,
    TaylorW2,
    TaylorW3,
    RungeKutta,
    ImplicitEuler,
}

impl SchemeId {
    pub const ALL: [SchemeId; 5] = [
        SchemeId::ExpEuler,
        SchemeId::TaylorW2,
        SchemeId::TaylorW3,
        SchemeId::RungeKutta,
        SchemeId::ImplicitEuler,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::ExpEuler => "exp_euler",
            SchemeId::TaylorW2 => "taylor_w2",
            SchemeId::TaylorW3 => "taylor_w3",
            SchemeId::RungeKutta => "rk",
            SchemeId::ImplicitEuler => "implicit_euler",
        }
    }

    /// Time integrals the scheme needs for `model`.
    pub fn required_time_integrals(self, model: &SpectralModel) -> TimeIntegralMode {
        match self {
            SchemeId::TaylorW3 if model.diagonal_derivative() => TimeIntegralMode::Diagonal,
            SchemeId::TaylorW3 => TimeIntegralMode::Full,
            _ => TimeIntegralMode::None,
        }
    }

    /// The wood whose inactive part the scheme's step map evaluates.
    pub fn wood(self) -> Option<SWood> {
        match self {
            SchemeId::ExpEuler => Some(named::wood(1)),
            SchemeId::TaylorW2 => Some(named::wood(2)),
            SchemeId::TaylorW3 | SchemeId::RungeKutta => Some(named::wood(3)),
            SchemeId::ImplicitEuler => None,
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = SchemeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SchemeId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| SchemeError::UnknownScheme(s.to_string()))
    }
}

pub fn mode_covers(have: TimeIntegralMode, need: TimeIntegralMode) -> bool {
    use TimeIntegralMode::*;
    matches!(
        (have, need),
        (_, None) | (Diagonal, Diagonal) | (Full, Diagonal) | (Full, Full)
    )
}

/// Per-`(model, h)` step weights.
#[derive(Debug, Clone)]
pub struct StepWorkspace {
    pub h: f64,
    pub decay: Vec<f64>,
    pub phi1: Vec<f64>,
    /// Row-major `D_kj = ∫₀^h e^{−λ_k(h−s)}(e^{−λ_j s} − 1) ds`.
    pub d: Vec<f64>,
    n: usize,
}

impl StepWorkspace {
    /// Builds the weights; for `N ≤ 16` they are checked against quadrature.
    pub fn new(model: &SpectralModel, h: f64) -> Result<Self, SchemeError> {
        if h <= 0.0 || !h.is_finite() {
            return Err(SamplerError::NonPositiveStep(h).into());
        }
        let l = &model.lambdas;
        let n = l.len();
        let p: Vec<f64> = l.iter().map(|&x| phi1(x, h)).collect();
        let mut d = vec![0.0; n * n];
        for k in 0..n {
            for j in 0..n {
                d[k * n + j] = kdd(l[j], l[k], h) - p[k];
            }
        }
        let ws = StepWorkspace {
            h,
            decay: model.semigroup(h),
            phi1: p,
            d,
            n,
        };
        if n <= 16 {
            let dev = ws.self_test(model);
            if dev > 1e-8 {
                return Err(SchemeError::SelfTest(dev));
            }
        }
        Ok(ws)
    }

    /// Largest relative deviation of `φ₁` and `D` from composite
    /// Gauss–Legendre quadrature.
    pub fn self_test(&self, model: &SpectralModel) -> f64 {
        let l = &model.lambdas;
        let h = self.h;
        let panels = 64;
        let w = h / panels as f64;
        let nodes: Vec<(f64, f64)> = (0..panels)
            .flat_map(|k| gauss_legendre(16, k as f64 * w, (k + 1) as f64 * w))
            .collect();
        let rel = |got: f64, exact: f64| {
            if exact == 0.0 {
                got.abs()
            } else {
                ((got - exact) / exact).abs()
            }
        };
        let mut worst = 0.0f64;
        for k in 0..self.n {
            let q: f64 = nodes.iter().map(|(s, wt)| wt * (-l[k] * s).exp()).sum();
            worst = worst.max(rel(self.phi1[k], q));
            for j in 0..self.n {
                let q: f64 = nodes
                    .iter()
                    .map(|(s, wt)| wt * (-l[k] * (h - s)).exp() * (-(l[j] * s)).exp_m1())
                    .sum();
                worst = worst.max(rel(self.d[k * self.n + j], q));
            }
        }
        worst
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn step(
        &self,
        scheme: SchemeId,
        model: &SpectralModel,
        y: &[f64],
        nb: &NoiseBundle,
    ) -> Result<Vec<f64>, SchemeError> {
        match scheme {
            SchemeId::ExpEuler => Ok(self.exp_euler_step(model, y, nb)),
            SchemeId::TaylorW2 => Ok(self.taylor_w2_step(model, y, nb)),
            SchemeId::TaylorW3 => self.taylor_w3_step(model, y, nb),
            SchemeId::RungeKutta => Ok(self.rk_step(model, y, nb)),
            SchemeId::ImplicitEuler => Ok(self.implicit_euler_step(model, y, nb)),
        }
    }

    /// `e^{−λ_k h} y_k + φ₁,k F(y)_k + X_k`.
    pub fn exp_euler_step(&self, model: &SpectralModel, y: &[f64], nb: &NoiseBundle) -> Vec<f64> {
        let f = model.eval_f(y);
        (0..self.n)
            .map(|k| self.decay[k] * y[k] + self.phi1[k] * f[k] + nb.conv[k])
            .collect()
    }

    /// Exponential Euler plus `Σ_j J_kj D_kj y_j`, `J = F'(y)`.
    pub fn taylor_w2_step(&self, model: &SpectralModel, y: &[f64], nb: &NoiseBundle) -> Vec<f64> {
        let mut out = self.exp_euler_step(model, y, nb);
        self.add_deterministic_correction(model, y, &mut out);
        out
    }

    /// Second-order Taylor step: `taylor_w2` plus `Σ_j J_kj I_kj`.
    pub fn taylor_w3_step(
        &self,
        model: &SpectralModel,
        y: &[f64],
        nb: &NoiseBundle,
    ) -> Result<Vec<f64>, SchemeError> {
        let n = self.n;
        let mut out = self.exp_euler_step(model, y, nb);
        match model.linear_constant() {
            Some(a) => {
                for k in 0..n {
                    out[k] += a * self.d[k * n + k] * y[k];
                }
                for k in 0..n {
                    let i_kk = nb.time_integral(k, k).ok_or(SchemeError::MissingTimeIntegrals {
                        scheme: SchemeId::TaylorW3,
                        needed: TimeIntegralMode::Diagonal,
                    })?;
                    out[k] += a * i_kk;
                }
            }
            None => {
                let jac = model.jacobian(y);
                let need = SchemeId::TaylorW3.required_time_integrals(model);
                let missing = SchemeError::MissingTimeIntegrals {
                    scheme: SchemeId::TaylorW3,
                    needed: need,
                };
                for k in 0..n {
                    let mut acc = 0.0;
                    for j in 0..n {
                        let jkj = jac[k * n + j];
                        acc += jkj * self.d[k * n + j] * y[j];
                        if jkj != 0.0 {
                            acc += jkj * nb.time_integral(k, j).ok_or_else(|| missing.clone())?;
                        }
                    }
                    out[k] += acc;
                }
            }
        }
        Ok(out)
    }

    /// `e^{−λh} y + h e^{−λh} F(y + Z) + X` with
    /// `Z_k = ((φ₁,k − h)·O_k + Q_k)/h`, `O` the carried convolution.
    pub fn rk_step(&self, model: &SpectralModel, y: &[f64], nb: &NoiseBundle) -> Vec<f64> {
        let h = self.h;
        let shifted: Vec<f64> = (0..self.n)
            .map(|k| y[k] + ((self.phi1[k] - h) * nb.carried[k] + nb.integral[k]) / h)
            .collect();
        let f = model.eval_f(&shifted);
        (0..self.n)
            .map(|k| self.decay[k] * y[k] + h * self.decay[k] * f[k] + nb.conv[k])
            .collect()
    }

    /// `(y_k + h F(y)_k + ΔW_k)/(1 + λ_k h)`.
    pub fn implicit_euler_step(
        &self,
        model: &SpectralModel,
        y: &[f64],
        nb: &NoiseBundle,
    ) -> Vec<f64> {
        let h = self.h;
        let f = model.eval_f(y);
        (0..self.n)
            .map(|k| (y[k] + h * f[k] + nb.increment[k]) / (1.0 + model.lambdas[k] * h))
            .collect()
    }

    fn add_deterministic_correction(&self, model: &SpectralModel, y: &[f64], out: &mut [f64]) {
        let n = self.n;
        match model.linear_constant() {
            Some(a) => {
                for k in 0..n {
                    out[k] += a * self.d[k * n + k] * y[k];
                }
            }
            None => {
                let jac = model.jacobian(y);
                for k in 0..n {
                    out[k] += (0..n).map(|j| jac[k * n + j] * self.d[k * n + j] * y[j]).sum::<f64>();
                }
            }
        }
    }
}

/// Supplies one noise bundle per step.
pub trait NoiseSource {
    fn step_size(&self) -> f64;
    fn next_bundle(&mut self) -> Result<NoiseBundle, SchemeError>;
}

/// Exact sampling from a precomputed step covariance.
pub struct ExactNoise<'a, R: Rng> {
    pub model: &'a SpectralModel,
    pub cov: &'a StepCovariance,
    pub rng: R,
    pub carried: Vec<f64>,
}

impl<'a, R: Rng> ExactNoise<'a, R> {
    pub fn new(model: &'a SpectralModel, cov: &'a StepCovariance, rng: R) -> Self {
        ExactNoise {
            model,
            cov,
            rng,
            carried: vec![0.0; model.dim()],
        }
    }
}

impl<R: Rng> NoiseSource for ExactNoise<'_, R> {
    fn step_size(&self) -> f64 {
        self.cov.h
    }

    fn next_bundle(&mut self) -> Result<NoiseBundle, SchemeError> {
        Ok(self.cov.sample_step(self.model, &mut self.rng, &mut self.carried))
    }
}

/// Coarse steps aggregated from a shared fine record.
pub struct RecordNoise<'a> {
    pub agg: &'a Aggregator,
    pub record: &'a FineRecord,
    pub per_step: usize,
    pub mode: TimeIntegralMode,
    cursor: usize,
    carried: Vec<f64>,
    decay: Vec<f64>,
    hasher: Option<sha2::Sha256>,
}

impl<'a> RecordNoise<'a> {
    pub fn new(
        agg: &'a Aggregator,
        record: &'a FineRecord,
        per_step: usize,
        mode: TimeIntegralMode,
    ) -> Self {
        let h = record.delta * per_step as f64;
        RecordNoise {
            agg,
            record,
            per_step,
            mode,
            cursor: 0,
            carried: vec![0.0; agg.dim()],
            decay: agg.lambdas().iter().map(|l| (-l * h).exp()).collect(),
            hasher: None,
        }
    }

    /// Hashes every consumed Brownian increment.
    pub fn with_hasher(mut self) -> Self {
        self.hasher = Some(sha2::Sha256::default());
        self
    }

    pub fn finish_hash(self) -> Option<[u8; 32]> {
        use sha2::Digest;
        self.hasher.map(|h| h.finalize().into())
    }
}

impl NoiseSource for RecordNoise<'_> {
    fn step_size(&self) -> f64 {
        self.record.delta * self.per_step as f64
    }

    fn next_bundle(&mut self) -> Result<NoiseBundle, SchemeError> {
        let end = self.cursor + self.per_step;
        let mut nb = self
            .agg
            .aggregate(self.record, self.cursor, end, self.mode, self.hasher.as_mut())?;
        self.cursor = end;
        nb.carried.copy_from_slice(&self.carried);
        for k in 0..self.carried.len() {
            self.carried[k] = self.decay[k] * self.carried[k] + nb.conv[k];
        }
        Ok(nb)
    }
}

/// Applies `scheme` for `steps` steps of the source's step size; returns the
/// states at all `steps + 1` grid points.
pub fn integrate(
    scheme: SchemeId,
    model: &SpectralModel,
    ws: &StepWorkspace,
    y0: &[f64],
    steps: usize,
    noise: &mut dyn NoiseSource,
) -> Result<Vec<Vec<f64>>, SchemeError> {
    if steps == 0 {
        return Err(SchemeError::NoSteps);
    }
    let mut traj = Vec::with_capacity(steps + 1);
    traj.push(y0.to_vec());
    for _ in 0..steps {
        let nb = noise.next_bundle()?;
        let next = ws.step(scheme, model, traj.last().expect("nonempty"), &nb)?;
        traj.push(next);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Nonlinearity, Pointwise, SmoothnessParams};
    use crate::sampler::path_rng;
    use std::f64::consts::PI;

    fn smooth() -> SmoothnessParams {
        SmoothnessParams {
            gamma: 0.5,
            delta: 0.5,
            gamma_strict: false,
        }
    }

    fn bundle(nb_conv: Vec<f64>, increment: Vec<f64>) -> NoiseBundle {
        let n = nb_conv.len();
        let mut nb = NoiseBundle::zeros(n, TimeIntegralMode::Full, false);
        nb.conv = nb_conv;
        nb.increment = increment;
        nb
    }

    #[test]
    fn scheme_names_round_trip() {
        for id in SchemeId::ALL {
            assert_eq!(id.name().parse::<SchemeId>().unwrap(), id);
        }
        assert!("milstein".parse::<SchemeId>().is_err());
    }

    #[test]
    fn workspace_self_test_passes_on_presets() {
        for m in [
            SpectralModel::heat_1d(16, Nonlinearity::Zero).unwrap(),
            SpectralModel::trace_class_3d(2, Nonlinearity::Zero).unwrap(),
            SpectralModel::sode(vec![1.0, 2.0], Nonlinearity::Zero).unwrap(),
        ] {
            for h in [0.1, 1.0 / 512.0] {
                let ws = StepWorkspace::new(&m, h).unwrap();
                assert!(ws.self_test(&m) < 1e-8);
            }
        }
    }

    #[test]
    fn sode_d_matrix_vanishes() {
        let m = SpectralModel::sode(vec![1.0], Nonlinearity::Zero).unwrap();
        let ws = StepWorkspace::new(&m, 0.3).unwrap();
        assert_eq!(ws.d, vec![0.0]);
        assert_eq!(ws.phi1, vec![0.3]);
        assert_eq!(ws.decay, vec![1.0]);
    }

    #[test]
    fn all_schemes_agree_without_noise_and_nonlinearity() {
        let m = SpectralModel::custom(
            vec![1.0, 9.0, 30.0],
            vec![0.0; 3],
            0.0,
            Nonlinearity::Zero,
            smooth(),
        )
        .unwrap();
        let ws = StepWorkspace::new(&m, 0.05).unwrap();
        let y = [1.0, -2.0, 0.5];
        let nb = bundle(vec![0.0; 3], vec![0.0; 3]);
        let exp = ws.exp_euler_step(&m, &y, &nb);
        for id in [SchemeId::TaylorW2, SchemeId::TaylorW3, SchemeId::RungeKutta] {
            assert_eq!(ws.step(id, &m, &y, &nb).unwrap(), exp, "{id}");
        }
        for k in 0..3 {
            assert_eq!(exp[k], (-m.lambdas[k] * 0.05).exp() * y[k]);
        }
    }

    #[test]
    fn euler_maruyama_for_sode() {
        let m = SpectralModel::sode(vec![1.0], Nonlinearity::Pointwise(Pointwise::Tanh)).unwrap();
        let h = 0.01;
        let ws = StepWorkspace::new(&m, h).unwrap();
        let y = [0.7];
        let dw = 0.123;
        let nb = bundle(vec![dw], vec![dw]);
        let got = ws.exp_euler_step(&m, &y, &nb);
        assert_eq!(got[0], y[0] + h * y[0].tanh() + dw);
        let imp = ws.implicit_euler_step(&m, &y, &nb);
        assert_eq!(imp[0], y[0] + h * y[0].tanh() + dw);
    }

    #[test]
    fn implicit_euler_direct_formula() {
        let m = SpectralModel::custom(vec![4.0], vec![1.0], 0.0, Nonlinearity::Zero, smooth())
            .unwrap();
        let ws = StepWorkspace::new(&m, 0.1).unwrap();
        let nb = bundle(vec![0.2], vec![0.3]);
        let got = ws.implicit_euler_step(&m, &[2.0], &nb);
        assert_eq!(got[0], (2.0 + 0.3) / 1.4);
    }

    #[test]
    fn taylor_w3_requires_time_integrals() {
        let m = SpectralModel::heat_1d(2, Nonlinearity::LinearConst(0.5)).unwrap();
        let ws = StepWorkspace::new(&m, 0.1).unwrap();
        let nb = NoiseBundle::zeros(2, TimeIntegralMode::None, false);
        assert!(matches!(
            ws.taylor_w3_step(&m, &[1.0, 1.0], &nb),
            Err(SchemeError::MissingTimeIntegrals { .. })
        ));
        let tanh = SpectralModel::heat_1d(2, Nonlinearity::Pointwise(Pointwise::Tanh)).unwrap();
        let diag = NoiseBundle::zeros(2, TimeIntegralMode::Diagonal, false);
        assert!(ws.taylor_w3_step(&tanh, &[0.3, 0.1], &diag).is_err());
    }

    #[test]
    fn linear_corrections_are_diagonal() {
        let a = 0.5;
        let m = SpectralModel::heat_1d(3, Nonlinearity::LinearConst(a)).unwrap();
        let ws = StepWorkspace::new(&m, 0.1).unwrap();
        let y = [1.0, 0.5, -0.25];
        let mut nb = bundle(vec![0.0; 3], vec![0.0; 3]);
        nb.time_integrals = crate::sampler::TimeIntegrals::Full(vec![
            0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9,
        ]);
        let ee = ws.exp_euler_step(&m, &y, &nb);
        let w2 = ws.taylor_w2_step(&m, &y, &nb);
        let w3 = ws.taylor_w3_step(&m, &y, &nb).unwrap();
        for k in 0..3 {
            assert!((w2[k] - ee[k] - a * ws.d[k * 3 + k] * y[k]).abs() < 1e-16);
            let ikk = nb.time_integral(k, k).unwrap();
            assert!((w3[k] - w2[k] - a * ikk).abs() < 1e-16);
        }
    }

    #[test]
    fn general_path_matches_linear_fast_path() {
        // A constant field goes through the dense Jacobian; it must agree.
        fn alpha(_: &[f64]) -> f64 {
            0.5
        }
        let field = SpectralModel::heat_1d(
            3,
            Nonlinearity::LinearField(crate::model::AlphaField {
                name: "half",
                f: alpha,
            }),
        )
        .unwrap();
        let konst = SpectralModel::heat_1d(3, Nonlinearity::LinearConst(0.5)).unwrap();
        let ws = StepWorkspace::new(&konst, 0.1).unwrap();
        let y = [1.0, 0.5, -0.25];
        let mut nb = bundle(vec![0.1, 0.0, 0.2], vec![0.0; 3]);
        nb.time_integrals =
            crate::sampler::TimeIntegrals::Full(vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]);
        let a = ws.taylor_w3_step(&field, &y, &nb).unwrap();
        let b = ws.taylor_w3_step(&konst, &y, &nb).unwrap();
        for k in 0..3 {
            assert!((a[k] - b[k]).abs() < 1e-13);
        }
    }

    #[test]
    fn linear_scalar_recursion_with_shifted_rate() {
        // Zero noise, constant α: exp-Euler per mode is e^{−λh}y + φ₁ α y.
        let a = 0.7;
        let m = SpectralModel::heat_1d(4, Nonlinearity::LinearConst(a)).unwrap();
        let h = 0.02;
        let ws = StepWorkspace::new(&m, h).unwrap();
        let y = [0.3, -0.2, 0.1, 0.05];
        let nb = bundle(vec![0.0; 4], vec![0.0; 4]);
        let got = ws.exp_euler_step(&m, &y, &nb);
        for k in 0..4 {
            let l = PI * PI * ((k + 1) * (k + 1)) as f64;
            let want = ((-l * h).exp() + a * (1.0 - (-l * h).exp()) / l) * y[k];
            assert!((got[k] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn rk_reduces_to_exponential_integrator_without_noise() {
        let m = SpectralModel::heat_1d(3, Nonlinearity::Pointwise(Pointwise::Tanh)).unwrap();
        let h = 0.05;
        let ws = StepWorkspace::new(&m, h).unwrap();
        let y = [0.4, 0.1, -0.2];
        let nb = bundle(vec![0.0; 3], vec![0.0; 3]);
        let got = ws.rk_step(&m, &y, &nb);
        let f = m.eval_f(&y);
        for k in 0..3 {
            let e = (-m.lambdas[k] * h).exp();
            assert_eq!(got[k], e * y[k] + h * e * f[k]);
        }
    }

    #[test]
    fn integrate_zero_noise_is_semigroup_decay() {
        let m = SpectralModel::custom(
            vec![1.0, 4.0],
            vec![0.0, 0.0],
            0.0,
            Nonlinearity::Zero,
            smooth(),
        )
        .unwrap();
        let h = 0.1;
        let ws = StepWorkspace::new(&m, h).unwrap();
        let cov = StepCovariance::new(&m, h, TimeIntegralMode::None, None).unwrap();
        let mut src = ExactNoise::new(&m, &cov, path_rng(0, 0));
        let y0 = [1.0, 2.0];
        let traj = integrate(SchemeId::ExpEuler, &m, &ws, &y0, 10, &mut src).unwrap();
        assert_eq!(traj.len(), 11);
        for (k, state) in traj.iter().enumerate() {
            let t = k as f64 * h;
            assert!((state[0] - (-t).exp()).abs() < 1e-14);
            assert!((state[1] - 2.0 * (-4.0 * t).exp()).abs() < 1e-14);
        }
        assert_eq!(
            integrate(SchemeId::ExpEuler, &m, &ws, &y0, 0, &mut src),
            Err(SchemeError::NoSteps)
        );
    }

    #[test]
    fn one_step_integration_is_one_step() {
        let m = SpectralModel::heat_1d(3, Nonlinearity::LinearConst(0.5)).unwrap();
        let h = 0.1;
        let ws = StepWorkspace::new(&m, h).unwrap();
        let cov = StepCovariance::new(&m, h, TimeIntegralMode::Diagonal, None).unwrap();
        let y0 = [0.2, 0.1, 0.0];
        let mut src = ExactNoise::new(&m, &cov, path_rng(3, 1));
        let traj = integrate(SchemeId::TaylorW3, &m, &ws, &y0, 1, &mut src).unwrap();
        let mut carried = vec![0.0; 3];
        let nb = cov.sample_step(&m, &mut path_rng(3, 1), &mut carried);
        assert_eq!(traj[1], ws.taylor_w3_step(&m, &y0, &nb).unwrap());
    }
}
