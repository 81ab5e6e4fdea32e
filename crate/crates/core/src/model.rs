//! Spectral Galerkin models with a diagonal linear part and diagonal noise.
//!
//! A model is given in the eigenbasis of `A`: eigenvalues `λ_i` of `−A`,
//! noise weights `b_i`, a shift `κ` and a nonlinearity `F`. States are
//! coefficient vectors in the retained modes.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("a model needs at least one mode")]
    NoModes,
    #[error("{lambdas} eigenvalues but {bs} noise weights")]
    LengthMismatch { lambdas: usize, bs: usize },
    #[error("κ + λ_{index} = {value} must be positive")]
    NotShiftedPositive { index: usize, value: f64 },
    #[error("derivative of order {order} requested, nonlinearity supports up to {max}")]
    DerivativeOrderExceeded { order: usize, max: usize },
    #[error("{expected} directions expected, {got} given")]
    DirectionCount { expected: usize, got: usize },
    #[error("state has length {got}, model has {expected} modes")]
    StateLength { expected: usize, got: usize },
    #[error("unknown nonlinearity `{0}`")]
    UnknownNonlinearity(String),
    #[error("unknown model preset `{0}`")]
    UnknownPreset(String),
}

/// Smoothness exponents of the noise. `gamma` is stored as a supremum when
/// `gamma_strict` is set: every `γ < gamma` is admissible, `gamma` itself is not.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessParams {
    pub gamma: f64,
    pub delta: f64,
    pub gamma_strict: bool,
}

impl fmt::Display for SmoothnessParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.gamma_strict {
            write!(f, "γ < {}, δ = {}", self.gamma, self.delta)
        } else {
            write!(f, "γ = {}, δ = {}", self.gamma, self.delta)
        }
    }
}

/// Scalar function applied pointwise on the physical grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pointwise {
    Tanh,
    /// `g(u) = −u³`. Its derivatives are unbounded, so it is outside the
    /// bounded-derivative setting; accepted for experimentation only.
    Cubic,
}

impl Pointwise {
    pub fn max_derivative(self) -> usize {
        match self {
            Pointwise::Tanh => 4,
            Pointwise::Cubic => usize::MAX,
        }
    }

    /// `g^{(order)}(u)`.
    pub fn derivative(self, order: usize, u: f64) -> f64 {
        match self {
            Pointwise::Tanh => {
                let t = u.tanh();
                let s = 1.0 - t * t;
                match order {
                    0 => t,
                    1 => s,
                    2 => -2.0 * t * s,
                    3 => s * (6.0 * t * t - 2.0),
                    4 => 8.0 * t * s * (2.0 - 3.0 * t * t),
                    _ => unreachable!("checked against max_derivative"),
                }
            }
            Pointwise::Cubic => match order {
                0 => -u * u * u,
                1 => -3.0 * u * u,
                2 => -6.0 * u,
                3 => -6.0,
                _ => 0.0,
            },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Pointwise::Tanh => "tanh",
            Pointwise::Cubic => "cubic",
        }
    }
}

/// Multiplication by a function of the spatial coordinate, `F(v)(x) = α(x) v(x)`.
#[derive(Clone, Copy)]
pub struct AlphaField {
    pub name: &'static str,
    pub f: fn(&[f64]) -> f64,
}

impl fmt::Debug for AlphaField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AlphaField({})", self.name)
    }
}

impl PartialEq for AlphaField {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Nonlinearity {
    Zero,
    LinearConst(f64),
    LinearField(AlphaField),
    Pointwise(Pointwise),
}

impl Nonlinearity {
    pub fn max_derivative(&self) -> usize {
        match self {
            Nonlinearity::Pointwise(g) => g.max_derivative(),
            _ => usize::MAX,
        }
    }

    /// Parses `zero`, `linear_mult:alpha=<value>` and `pointwise:g=tanh|cubic`.
    pub fn parse(s: &str) -> Result<Self, ModelError> {
        let s = s.trim();
        let bad = || ModelError::UnknownNonlinearity(s.to_string());
        if s == "zero" {
            return Ok(Nonlinearity::Zero);
        }
        let (kind, params) = s.split_once(':').ok_or_else(bad)?;
        let (key, value) = params.split_once('=').ok_or_else(bad)?;
        match (kind.trim(), key.trim(), value.trim()) {
            ("linear_mult", "alpha", v) => v
                .parse::<f64>()
                .map(Nonlinearity::LinearConst)
                .map_err(|_| bad()),
            ("pointwise", "g", "tanh") => Ok(Nonlinearity::Pointwise(Pointwise::Tanh)),
            ("pointwise", "g", "cubic") => Ok(Nonlinearity::Pointwise(Pointwise::Cubic)),
            _ => Err(bad()),
        }
    }

    /// True when the derivatives of `F` are unbounded.
    pub fn unbounded_derivatives(&self) -> bool {
        matches!(self, Nonlinearity::Pointwise(Pointwise::Cubic))
    }
}

impl fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Nonlinearity::Zero => write!(f, "zero"),
            Nonlinearity::LinearConst(a) => write!(f, "linear_mult:alpha={a}"),
            Nonlinearity::LinearField(a) => write!(f, "linear_mult:alpha={}", a.name),
            Nonlinearity::Pointwise(g) => write!(f, "pointwise:g={}", g.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Heat1d,
    Trace3d,
    Sode,
    Custom,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Heat1d => "heat1d",
            Preset::Trace3d => "trace3d",
            Preset::Sode => "sode",
            Preset::Custom => "custom",
        }
    }
}

/// Transform between sine coefficients on `(0,1)^d` and values on the interior
/// grid `x_m = m/(M+1)`, `M = 2n+1` points per axis.
///
/// With no spatial structure (`d = 0`) both directions are the identity, so
/// pointwise nonlinearities act on coefficients directly.
#[derive(Debug, Clone, PartialEq)]
pub struct Collocation {
    dims: usize,
    n: usize,
    points: usize,
    /// `√2 sin(iπ x_m)`, row `i−1`, column `m−1`.
    synth: Vec<f64>,
    coords: Vec<Vec<f64>>,
}

impl Collocation {
    pub fn identity(n: usize) -> Self {
        Collocation {
            dims: 0,
            n,
            points: n,
            synth: Vec::new(),
            coords: (1..=n).map(|k| vec![k as f64]).collect(),
        }
    }

    pub fn sine(dims: usize, n: usize) -> Self {
        let m = 2 * n + 1;
        let synth = (1..=n)
            .flat_map(|i| {
                (1..=m).map(move |j| {
                    2f64.sqrt() * (i as f64 * PI * j as f64 / (m + 1) as f64).sin()
                })
            })
            .collect();
        let axis: Vec<f64> = (1..=m).map(|j| j as f64 / (m + 1) as f64).collect();
        let total = m.pow(dims as u32);
        let coords = (0..total)
            .map(|flat| {
                let mut rest = flat;
                let mut x = vec![0.0; dims];
                for d in (0..dims).rev() {
                    x[d] = axis[rest % m];
                    rest /= m;
                }
                x
            })
            .collect();
        Collocation {
            dims,
            n,
            points: m,
            synth,
            coords,
        }
    }

    pub fn grid_len(&self) -> usize {
        self.coords.len()
    }

    /// Physical coordinates of the grid points, in flattening order.
    pub fn coords(&self) -> &[Vec<f64>] {
        &self.coords
    }

    pub fn to_grid(&self, c: &[f64]) -> Vec<f64> {
        if self.dims == 0 {
            return c.to_vec();
        }
        let (n, m) = (self.n, self.points);
        self.transform(c, n, m, |out, inp| self.synth[inp * m + out])
    }

    pub fn from_grid(&self, v: &[f64]) -> Vec<f64> {
        if self.dims == 0 {
            return v.to_vec();
        }
        let (n, m) = (self.n, self.points);
        // P = (1/(M+1)) Sᵀ along each axis, since Σ_m 2 sin sin = (M+1) δ.
        let scale = 1.0 / (m + 1) as f64;
        self.transform(v, m, n, |out, inp| scale * self.synth[out * m + inp])
    }

    /// Applies the same 1-D map (`from` → `to` points) along every axis.
    fn transform(
        &self,
        data: &[f64],
        from: usize,
        to: usize,
        entry: impl Fn(usize, usize) -> f64,
    ) -> Vec<f64> {
        let mut cur = data.to_vec();
        let mut shape = vec![from; self.dims];
        for axis in 0..self.dims {
            let inner: usize = shape[axis + 1..].iter().product();
            let outer: usize = shape[..axis].iter().product();
            let mut next = vec![0.0; outer * to * inner];
            for o in 0..outer {
                for a_in in 0..from {
                    let base_in = (o * from + a_in) * inner;
                    for a_out in 0..to {
                        let w = entry(a_out, a_in);
                        let base_out = (o * to + a_out) * inner;
                        for k in 0..inner {
                            next[base_out + k] += w * cur[base_in + k];
                        }
                    }
                }
            }
            shape[axis] = to;
            cur = next;
        }
        cur
    }
}

/// Report on the summability condition `Σ b_i² (κ + λ_i)^{2γ−1} < ∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct Assumption3Report {
    pub partial_sums: Vec<f64>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Converges,
    Diverges,
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralModel {
    pub lambdas: Vec<f64>,
    pub bs: Vec<f64>,
    pub kappa: f64,
    pub nonlinearity: Nonlinearity,
    pub preset: Preset,
    pub smoothness: SmoothnessParams,
    collocation: Arc<Collocation>,
}

impl SpectralModel {
    /// A model with no spatial structure; pointwise nonlinearities act on the
    /// coefficients directly.
    pub fn custom(
        lambdas: Vec<f64>,
        bs: Vec<f64>,
        kappa: f64,
        nonlinearity: Nonlinearity,
        smoothness: SmoothnessParams,
    ) -> Result<Self, ModelError> {
        let n = lambdas.len();
        Self::build(
            lambdas,
            bs,
            kappa,
            nonlinearity,
            Preset::Custom,
            smoothness,
            Collocation::identity(n),
        )
    }

    fn build(
        lambdas: Vec<f64>,
        bs: Vec<f64>,
        kappa: f64,
        nonlinearity: Nonlinearity,
        preset: Preset,
        smoothness: SmoothnessParams,
        collocation: Collocation,
    ) -> Result<Self, ModelError> {
        if lambdas.is_empty() {
            return Err(ModelError::NoModes);
        }
        if lambdas.len() != bs.len() {
            return Err(ModelError::LengthMismatch {
                lambdas: lambdas.len(),
                bs: bs.len(),
            });
        }
        for (i, &l) in lambdas.iter().enumerate() {
            if kappa + l <= 0.0 {
                return Err(ModelError::NotShiftedPositive {
                    index: i + 1,
                    value: kappa + l,
                });
            }
        }
        if nonlinearity.unbounded_derivatives() {
            log::warn!("nonlinearity {nonlinearity} has unbounded derivatives");
        }
        Ok(SpectralModel {
            lambdas,
            bs,
            kappa,
            nonlinearity,
            preset,
            smoothness,
            collocation: Arc::new(collocation),
        })
    }

    /// Stochastic heat equation on `(0,1)` driven by space–time white noise:
    /// `λ_n = π² n²`, `B = I`.
    pub fn heat_1d(n: usize, nonlinearity: Nonlinearity) -> Result<Self, ModelError> {
        if n == 0 {
            return Err(ModelError::NoModes);
        }
        let lambdas = (1..=n).map(|k| PI * PI * (k * k) as f64).collect();
        Self::build(
            lambdas,
            vec![1.0; n],
            0.0,
            nonlinearity,
            Preset::Heat1d,
            SmoothnessParams {
                gamma: 0.25,
                delta: 0.25,
                gamma_strict: true,
            },
            Collocation::sine(1, n),
        )
    }

    /// Heat equation on the unit cube with trace-class noise,
    /// `λ_i = π²|i|²`, `b_i = 1/(i₁ i₂ i₃)`, indices flattened lexicographically.
    pub fn trace_class_3d(n: usize, nonlinearity: Nonlinearity) -> Result<Self, ModelError> {
        if n == 0 {
            return Err(ModelError::NoModes);
        }
        let mut lambdas = Vec::with_capacity(n * n * n);
        let mut bs = Vec::with_capacity(n * n * n);
        for i1 in 1..=n {
            for i2 in 1..=n {
                for i3 in 1..=n {
                    lambdas.push(PI * PI * (i1 * i1 + i2 * i2 + i3 * i3) as f64);
                    bs.push(1.0 / (i1 * i2 * i3) as f64);
                }
            }
        }
        Self::build(
            lambdas,
            bs,
            0.0,
            nonlinearity,
            Preset::Trace3d,
            SmoothnessParams {
                gamma: 0.5,
                delta: 0.5,
                gamma_strict: true,
            },
            Collocation::sine(3, n),
        )
    }

    /// Finite-dimensional SDE: `A = 0`, `κ = 1`.
    pub fn sode(bs: Vec<f64>, nonlinearity: Nonlinearity) -> Result<Self, ModelError> {
        let d = bs.len();
        Self::build(
            vec![0.0; d],
            bs,
            1.0,
            nonlinearity,
            Preset::Sode,
            SmoothnessParams {
                gamma: 1.0,
                delta: 0.5,
                gamma_strict: true,
            },
            Collocation::identity(d),
        )
    }

    pub fn dim(&self) -> usize {
        self.lambdas.len()
    }

    pub fn collocation(&self) -> &Collocation {
        &self.collocation
    }

    /// `e^{−λ_k h}` per mode. Exactly 1 for `λ_k = 0`.
    pub fn semigroup(&self, h: f64) -> Vec<f64> {
        self.lambdas.iter().map(|l| (-l * h).exp()).collect()
    }

    /// `Some(α)` when `F(v) = α v` with constant `α`.
    pub fn linear_constant(&self) -> Option<f64> {
        match self.nonlinearity {
            Nonlinearity::LinearConst(a) => Some(a),
            _ => None,
        }
    }

    /// Per-mode rates `λ − α` of the exactly solvable linear model `F(v) = αv`
    /// (`α = 0` for `Zero`), `None` otherwise.
    pub fn reference_rates(&self) -> Option<Vec<f64>> {
        let alpha = match self.nonlinearity {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::LinearConst(a) => a,
            _ => return None,
        };
        Some(self.lambdas.iter().map(|l| l - alpha).collect())
    }

    /// True when every `F'(v)` is diagonal in the eigenbasis.
    pub fn diagonal_derivative(&self) -> bool {
        match &self.nonlinearity {
            Nonlinearity::Zero | Nonlinearity::LinearConst(_) => true,
            Nonlinearity::Pointwise(_) => self.collocation.dims == 0,
            Nonlinearity::LinearField(_) => false,
        }
    }

    fn check_len(&self, v: &[f64]) -> Result<(), ModelError> {
        if v.len() != self.dim() {
            return Err(ModelError::StateLength {
                expected: self.dim(),
                got: v.len(),
            });
        }
        Ok(())
    }

    pub fn eval_f(&self, v: &[f64]) -> Vec<f64> {
        self.apply_f(0, v, &[]).expect("order 0 is always available")
    }

    /// `F^{(order)}(v)(dirs[0], …, dirs[order−1])` in eigenbasis coordinates.
    pub fn apply_f(&self, order: usize, v: &[f64], dirs: &[&[f64]]) -> Result<Vec<f64>, ModelError> {
        if dirs.len() != order {
            return Err(ModelError::DirectionCount {
                expected: order,
                got: dirs.len(),
            });
        }
        let max = self.nonlinearity.max_derivative();
        if order > max {
            return Err(ModelError::DerivativeOrderExceeded { order, max });
        }
        self.check_len(v)?;
        for d in dirs {
            self.check_len(d)?;
        }
        let n = self.dim();
        Ok(match &self.nonlinearity {
            Nonlinearity::Zero => vec![0.0; n],
            Nonlinearity::LinearConst(a) => match order {
                0 => v.iter().map(|x| a * x).collect(),
                1 => dirs[0].iter().map(|x| a * x).collect(),
                _ => vec![0.0; n],
            },
            Nonlinearity::LinearField(field) => {
                let arg = match order {
                    0 => v,
                    1 => dirs[0],
                    _ => return Ok(vec![0.0; n]),
                };
                let grid = self.collocation.to_grid(arg);
                let prod: Vec<f64> = grid
                    .iter()
                    .zip(self.collocation.coords())
                    .map(|(g, x)| (field.f)(x) * g)
                    .collect();
                self.collocation.from_grid(&prod)
            }
            Nonlinearity::Pointwise(g) => {
                let u = self.collocation.to_grid(v);
                let mut acc: Vec<f64> = u.iter().map(|&x| g.derivative(order, x)).collect();
                for d in dirs {
                    let w = self.collocation.to_grid(d);
                    for (a, b) in acc.iter_mut().zip(&w) {
                        *a *= b;
                    }
                }
                self.collocation.from_grid(&acc)
            }
        })
    }

    /// Row-major `N×N` matrix `J_kj = [F'(v) e_j]_k`.
    pub fn jacobian(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut jac = vec![0.0; n * n];
        match &self.nonlinearity {
            Nonlinearity::Zero => {}
            Nonlinearity::LinearConst(a) => {
                for k in 0..n {
                    jac[k * n + k] = *a;
                }
            }
            _ => {
                let mut e = vec![0.0; n];
                for j in 0..n {
                    e[j] = 1.0;
                    let col = self.apply_f(1, v, &[&e]).expect("first derivative exists");
                    for k in 0..n {
                        jac[k * n + j] = col[k];
                    }
                    e[j] = 0.0;
                }
            }
        }
        jac
    }

    /// Partial sums of `b_i² (κ + λ_i)^{2γ−1}` and a convergence verdict.
    ///
    /// For the presets the summand follows the infinite family, not just the
    /// retained modes; term `k` of the 3-D family adds the shell of indices
    /// with `max(i) = k`.
    pub fn assumption3_report(&self, gamma: f64, terms: usize) -> Assumption3Report {
        let e = 2.0 * gamma - 1.0;
        let mut partial_sums = Vec::with_capacity(terms);
        let mut s = 0.0;
        let verdict = match self.preset {
            Preset::Heat1d => {
                for k in 1..=terms {
                    s += (self.kappa + PI * PI * (k * k) as f64).powf(e);
                    partial_sums.push(s);
                }
                // summand ~ n^{2(2γ−1)}
                if 2.0 * e < -1.0 {
                    Verdict::Converges
                } else {
                    Verdict::Diverges
                }
            }
            Preset::Trace3d => {
                for k in 1..=terms {
                    for i1 in 1..=k {
                        for i2 in 1..=k {
                            for i3 in 1..=k {
                                if i1.max(i2).max(i3) != k {
                                    continue;
                                }
                                let b = 1.0 / (i1 * i2 * i3) as f64;
                                let l = PI * PI * (i1 * i1 + i2 * i2 + i3 * i3) as f64;
                                s += b * b * (self.kappa + l).powf(e);
                            }
                        }
                    }
                    partial_sums.push(s);
                }
                // Along an axis the summand behaves like i^{−2} i^{2(2γ−1)}.
                if gamma < 0.75 {
                    Verdict::Converges
                } else {
                    Verdict::Diverges
                }
            }
            Preset::Sode | Preset::Custom => {
                for k in 1..=terms {
                    if k <= self.dim() {
                        let i = k - 1;
                        s += self.bs[i] * self.bs[i] * (self.kappa + self.lambdas[i]).powf(e);
                    }
                    partial_sums.push(s);
                }
                if self.preset == Preset::Sode || self.bs.iter().all(|&b| b == 0.0) {
                    Verdict::Converges
                } else {
                    Verdict::Unknown
                }
            }
        };
        Assumption3Report {
            partial_sums,
            verdict,
        }
    }

    /// Parses a preset name with its mode count parameter.
    pub fn from_preset(
        name: &str,
        modes: usize,
        nonlinearity: Nonlinearity,
        noise_weights: Option<Vec<f64>>,
    ) -> Result<Self, ModelError> {
        match name {
            "heat1d" => Self::heat_1d(modes, nonlinearity),
            "trace3d" => Self::trace_class_3d(modes, nonlinearity),
            "sode" => Self::sode(noise_weights.unwrap_or_else(|| vec![1.0; modes]), nonlinearity),
            other => Err(ModelError::UnknownPreset(other.to_string())),
        }
    }
}
