//! Kriging with exact observations: Gram matrices, conditional mean and
//! variance, the maximum-likelihood scale, discrete BLUEs and the
//! RKHS-membership diagnostic built on `N * sigma2_hat`.
//!
//! Every linear solve runs in MPFR arithmetic at escalating precision.
//! Gram matrices of smooth kernels on dense designs are far too
//! ill-conditioned for double precision.

use rug::Float;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::linalg::Cholesky;
use crate::scalar::{scalar_from_json, Scalar, DEFAULT_PRECISION, PRECISION_CEILING};

/// Relative tolerance for solution agreement and residuals in the solver.
pub const SOLVE_TOLERANCE: f64 = 1e-20;

/// Bits of headroom a Cholesky pivot needs above the rounding floor.
const PIVOT_MARGIN: i32 = 16;

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    pub precision_start: u32,
    pub precision_ceiling: u32,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            precision_start: DEFAULT_PRECISION,
            precision_ceiling: PRECISION_CEILING,
        }
    }
}

/// Point placement used when a design is generated from a domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignRule {
    /// `x_j = a + (j - 1)(b - a)/(N - 1)`, both endpoints included.
    Equispaced,
    /// `x_j = a + (j - 1)(b - a)/N`; designs for `N` and `2N` are nested.
    Nested,
}

/// Strictly increasing observation points.
#[derive(Clone, Debug, PartialEq)]
pub struct Design {
    points: Vec<Scalar>,
}

impl Design {
    pub fn new(points: Vec<Scalar>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Parameter("design needs at least one point".into()));
        }
        if let Some(w) = points.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Parameter(format!(
                "design points must be strictly increasing, got {} then {}",
                w[0], w[1]
            )));
        }
        Ok(Design { points })
    }

    /// Points inside `[a, b]` only.
    pub fn within(points: Vec<Scalar>, a: &Scalar, b: &Scalar) -> Result<Self> {
        let d = Self::new(points)?;
        if d.points.iter().any(|x| x < a || x > b) {
            return Err(Error::Parameter(format!("design points must lie in [{a}, {b}]")));
        }
        Ok(d)
    }

    pub fn equispaced(a: &Scalar, b: &Scalar, n: usize) -> Result<Self> {
        Self::generate(a, b, n, DesignRule::Equispaced)
    }

    pub fn nested(a: &Scalar, b: &Scalar, n: usize) -> Result<Self> {
        Self::generate(a, b, n, DesignRule::Nested)
    }

    pub fn generate(a: &Scalar, b: &Scalar, n: usize, rule: DesignRule) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("design needs N >= 1".into()));
        }
        if a >= b {
            return Err(Error::Parameter(format!("domain [{a}, {b}] is empty")));
        }
        let width = b - a;
        let steps = match rule {
            DesignRule::Equispaced if n == 1 => return Self::new(vec![a.clone()]),
            DesignRule::Equispaced => n - 1,
            DesignRule::Nested => n,
        };
        let h = &width / &Scalar::int(steps as i64);
        Self::new((0..n).map(|j| a + &(&h * &Scalar::int(j as i64))).collect())
    }

    pub fn points(&self) -> &[Scalar] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Uniform grid of `size` points on `[a, b]`, endpoints included.
pub fn uniform_grid(a: &Scalar, b: &Scalar, size: usize) -> Result<Vec<Scalar>> {
    if size < 2 {
        return Err(Error::Parameter("grid needs at least two points".into()));
    }
    Ok(Design::equispaced(a, b, size)?.points)
}

/// Observed functions of the numerical experiments.
#[derive(Clone, Debug, PartialEq)]
pub enum TestFunction {
    /// `exp(-2 (x - 1/3)^2)`.
    F1,
    /// `1 - 2 (x - 1/3)^2`.
    F2,
    /// `k(x - x0)` for the kernel's unit-variance correlation.
    Reproducing { x0: Scalar },
    /// `sum_k c_k x^k`.
    Poly(Vec<Scalar>),
}

impl TestFunction {
    pub fn eval(&self, x: &Float, kernel: &Kernel, prec: u32) -> Float {
        let shifted = || {
            let third = Float::with_val(prec, 1u32) / 3u32;
            Float::with_val(prec, x - &third)
        };
        match self {
            TestFunction::F1 => {
                let d = shifted();
                (-(d.square() * 2u32)).exp()
            }
            TestFunction::F2 => {
                let d = shifted();
                1u32 - d.square() * 2u32
            }
            TestFunction::Reproducing { x0 } => {
                let u = Float::with_val(prec, x - &x0.to_float(prec));
                kernel.correlation().eval(&u, prec)
            }
            TestFunction::Poly(c) => {
                let mut acc = Float::new(prec);
                for coeff in c.iter().rev() {
                    acc = Float::with_val(prec, &acc * x) + coeff.to_float(prec);
                }
                acc
            }
        }
    }

    /// `"f1"`, `"f2"`, `"repro:<x0>"` or `{"poly": [c0, c1, ...]}`.
    pub fn from_json(value: &Value) -> Result<Self> {
        match value {
            Value::String(s) => s.parse(),
            Value::Object(obj) => {
                crate::moments::reject_unknown(obj, &["poly"], "function")?;
                let coeffs = obj
                    .get("poly")
                    .and_then(Value::as_array)
                    .ok_or_else(|| Error::Parse("function object needs a \"poly\" array".into()))?;
                if coeffs.is_empty() {
                    return Err(Error::Parse("polynomial needs at least one coefficient".into()));
                }
                Ok(TestFunction::Poly(coeffs.iter().map(scalar_from_json).collect::<Result<_>>()?))
            }
            other => Err(Error::Parse(format!("unrecognised function specification {other}"))),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            TestFunction::Poly(c) => serde_json::json!({ "poly": c }),
            other => Value::String(other.to_string()),
        }
    }
}

impl std::str::FromStr for TestFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f1" => Ok(TestFunction::F1),
            "f2" => Ok(TestFunction::F2),
            _ => match s.strip_prefix("repro:") {
                Some(x0) => Ok(TestFunction::Reproducing {
                    x0: Scalar::parse_exact(x0.trim())?,
                }),
                None => Err(Error::Parse(format!("unknown function \"{s}\""))),
            },
        }
    }
}

impl std::fmt::Display for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TestFunction::F1 => write!(f, "f1"),
            TestFunction::F2 => write!(f, "f2"),
            TestFunction::Reproducing { x0 } => write!(f, "repro:{x0}"),
            TestFunction::Poly(c) => {
                let parts: Vec<String> = c.iter().map(Scalar::to_string).collect();
                write!(f, "poly[{}]", parts.join(", "))
            }
        }
    }
}

/// Observed data at the design points.
#[derive(Clone, Debug, PartialEq)]
pub enum Observations {
    Values(Vec<Scalar>),
    /// Evaluated at working precision inside the solver.
    Function(TestFunction),
}

impl Observations {
    fn at(&self, design: &Design, kernel: &Kernel, prec: u32) -> Result<Vec<Float>> {
        match self {
            Observations::Values(v) => {
                if v.len() != design.len() {
                    return Err(Error::Parameter(format!(
                        "{} observations for a {}-point design",
                        v.len(),
                        design.len()
                    )));
                }
                Ok(v.iter().map(|x| x.to_float(prec)).collect())
            }
            Observations::Function(f) => Ok(design
                .points
                .iter()
                .map(|x| f.eval(&x.to_float(prec), kernel, prec))
                .collect()),
        }
    }
}

impl From<Vec<Scalar>> for Observations {
    fn from(v: Vec<Scalar>) -> Self {
        Observations::Values(v)
    }
}

impl From<TestFunction> for Observations {
    fn from(f: TestFunction) -> Self {
        Observations::Function(f)
    }
}

fn lag(x: &Scalar, y: &Scalar, prec: u32) -> Float {
    match (x, y) {
        (Scalar::Exact(_), Scalar::Exact(_)) => (x - y).to_float(prec),
        _ => x.to_float(prec) - y.to_float(prec),
    }
}

fn gram(kernel: &Kernel, design: &Design, prec: u32) -> Vec<Vec<Float>> {
    let n = design.len();
    let mut k = vec![vec![Float::new(prec); n]; n];
    for i in 0..n {
        for j in 0..=i {
            let v = kernel.eval(&lag(&design.points[i], &design.points[j], prec), prec);
            k[j][i] = v.clone();
            k[i][j] = v;
        }
    }
    k
}

/// `K_N = (sigma^2 k(x_i - x_j))_{i,j}` at the default precision.
pub fn kernel_matrix(kernel: &Kernel, design: &Design) -> Vec<Vec<Scalar>> {
    gram(kernel, design, DEFAULT_PRECISION)
        .into_iter()
        .map(|r| r.into_iter().map(Scalar::from_float).collect())
        .collect()
}

struct Solved {
    chol: Cholesky,
    data: Vec<Float>,
    weights: Vec<Float>,
    prec: u32,
}

fn max_abs(v: &[Float], prec: u32) -> Float {
    v.iter()
        .map(|x| Float::with_val(prec, x.abs_ref()))
        .fold(Float::new(prec), |m, x| if x > m { x } else { m })
}

fn relative_residual(k: &[Vec<Float>], w: &[Float], f: &[Float], prec: u32) -> f64 {
    let r: Vec<Float> = k
        .iter()
        .zip(f)
        .map(|(row, fi)| {
            let mut s = Float::with_val(prec, -fi);
            for (a, b) in row.iter().zip(w) {
                s += Float::with_val(prec, a * b);
            }
            s
        })
        .collect();
    let scale = max_abs(f, prec);
    if scale.is_zero() {
        return max_abs(&r, prec).to_f64();
    }
    (max_abs(&r, prec) / scale).to_f64()
}

/// Factor `K_N` and solve `K_N w = F_N`, doubling the precision until the
/// solutions at two successive precisions agree and the residual is below
/// [`SOLVE_TOLERANCE`].
fn solve_escalating(kernel: &Kernel, design: &Design, obs: &Observations, opts: &SolveOptions) -> Result<Solved> {
    let mut prec = opts.precision_start.max(64);
    let mut previous: Option<Vec<Float>> = None;
    let mut factored_once = false;
    loop {
        if prec > opts.precision_ceiling {
            return Err(if factored_once {
                let prev = previous.as_ref().map(|w| max_abs(w, 64).to_string()).unwrap_or_default();
                Error::Precision {
                    ceiling: opts.precision_ceiling,
                    previous: prev.clone(),
                    current: prev,
                }
            } else {
                Error::Singular {
                    family: kernel.family().name().to_string(),
                }
            });
        }
        let k = gram(kernel, design, prec);
        let data = obs.at(design, kernel, prec)?;
        let Some(chol) = Cholesky::factor(&k, prec, PIVOT_MARGIN) else {
            previous = None;
            prec = prec.saturating_mul(2);
            continue;
        };
        factored_once = true;
        let w = chol.solve(&data);
        let agreed = previous.as_ref().is_some_and(|p| {
            let scale = max_abs(&w, prec);
            let diff: Vec<Float> = w.iter().zip(p).map(|(a, b)| Float::with_val(prec, a - b)).collect();
            let d = max_abs(&diff, prec);
            if scale.is_zero() {
                d.is_zero()
            } else {
                (d / scale).to_f64() < SOLVE_TOLERANCE
            }
        });
        if agreed && relative_residual(&k, &w, &data, prec) < SOLVE_TOLERANCE {
            return Ok(Solved {
                chol,
                data,
                weights: w,
                prec,
            });
        }
        previous = Some(w);
        prec = prec.saturating_mul(2);
    }
}

fn dot(a: &[Float], b: &[Float], prec: u32) -> Float {
    let mut s = Float::new(prec);
    for (x, y) in a.iter().zip(b) {
        s += Float::with_val(prec, x * y);
    }
    s
}

/// A solved kriging system; immutable and cheap to query.
#[derive(Clone, Debug)]
pub struct KrigingFit {
    pub design: Design,
    /// `K_N^{-1} F_N`.
    pub weights: Vec<Scalar>,
    /// `F_N^T R_N^{-1} F_N / N` with `R_N` the unit-variance Gram matrix.
    pub sigma2_hat: Scalar,
    pub solve_precision: u32,
    pub condition_estimate: f64,
    kernel: Kernel,
    chol: Cholesky,
    data: Vec<Float>,
    w: Vec<Float>,
}

impl KrigingFit {
    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn observations(&self) -> Vec<Scalar> {
        self.data.iter().cloned().map(Scalar::from_float).collect()
    }

    fn cross(&self, q: &Scalar) -> Vec<Float> {
        self.design
            .points
            .iter()
            .map(|x| self.kernel.eval(&lag(q, x, self.solve_precision), self.solve_precision))
            .collect()
    }

    /// `mu_N(q) = F_N^T K_N^{-1} b_N(q)`.
    pub fn mean(&self, q: &Scalar) -> Scalar {
        Scalar::from_float(dot(&self.w, &self.cross(q), self.solve_precision))
    }

    /// `C_N(q, q) = K(q, q) - b_N(q)^T K_N^{-1} b_N(q)`, clamped at zero.
    pub fn cond_var(&self, q: &Scalar) -> Scalar {
        Scalar::from_float(self.cond_var_float(&self.cross(q)))
    }

    fn cond_var_float(&self, b: &[Float]) -> Float {
        let prec = self.solve_precision;
        let y = self.chol.forward(b);
        let prior = self.kernel.eval(&Float::new(prec), prec);
        let v = prior - dot(&y, &y, prec);
        if v.is_sign_negative() {
            Float::new(prec)
        } else {
            v
        }
    }

    /// Cross covariance `C_N(q, r)`.
    pub fn cond_cov(&self, q: &Scalar, r: &Scalar) -> Scalar {
        let prec = self.solve_precision;
        let (bq, br) = (self.cross(q), self.cross(r));
        let (yq, yr) = (self.chol.forward(&bq), self.chol.forward(&br));
        let prior = self.kernel.eval(&lag(q, r, prec), prec);
        Scalar::from_float(prior - dot(&yq, &yr, prec))
    }

    pub fn predict(&self, queries: &[Scalar]) -> (Vec<Scalar>, Vec<Scalar>) {
        queries
            .iter()
            .map(|q| {
                let b = self.cross(q);
                (
                    Scalar::from_float(dot(&self.w, &b, self.solve_precision)),
                    Scalar::from_float(self.cond_var_float(&b)),
                )
            })
            .unzip()
    }
}

/// Conditional mean and variance at `queries` given exact observations.
pub fn krige(
    kernel: &Kernel,
    design: &Design,
    observations: &Observations,
    queries: &[Scalar],
) -> Result<(Vec<Scalar>, Vec<Scalar>, KrigingFit)> {
    krige_with(kernel, design, observations, queries, &SolveOptions::default())
}

pub fn krige_with(
    kernel: &Kernel,
    design: &Design,
    observations: &Observations,
    queries: &[Scalar],
    opts: &SolveOptions,
) -> Result<(Vec<Scalar>, Vec<Scalar>, KrigingFit)> {
    let fit = fit_with(kernel, design, observations, opts)?;
    let (mean, var) = fit.predict(queries);
    Ok((mean, var, fit))
}

/// Solve the kriging system without evaluating any query.
pub fn fit_with(
    kernel: &Kernel,
    design: &Design,
    observations: &Observations,
    opts: &SolveOptions,
) -> Result<KrigingFit> {
    let s = solve_escalating(kernel, design, observations, opts)?;
    let prec = s.prec;
    let quad = dot(&s.data, &s.weights, prec);
    let sigma2_hat = quad * kernel.sigma2().to_float(prec) / design.len() as u32;
    Ok(KrigingFit {
        design: design.clone(),
        weights: s.weights.iter().cloned().map(Scalar::from_float).collect(),
        sigma2_hat: Scalar::from_float(sigma2_hat),
        solve_precision: prec,
        condition_estimate: s.chol.condition_estimate().to_f64(),
        kernel: kernel.clone(),
        chol: s.chol,
        data: s.data,
        w: s.weights,
    })
}

/// `sigma2_hat_N = F_N^T R_N^{-1} F_N / N` with the unit-variance Gram matrix `R_N`.
pub fn mle_sigma2(kernel: &Kernel, design: &Design, observations: &Observations) -> Result<Scalar> {
    mle_sigma2_with(kernel, design, observations, &SolveOptions::default())
}

pub fn mle_sigma2_with(
    kernel: &Kernel,
    design: &Design,
    observations: &Observations,
    opts: &SolveOptions,
) -> Result<Scalar> {
    Ok(fit_with(&kernel.correlation(), design, observations, opts)?.sigma2_hat)
}

/// Gaussian log-likelihood of the scale,
/// `-N/2 log(2 pi sigma^2) - 1/2 log det R_N - F_N^T R_N^{-1} F_N / (2 sigma^2)`.
pub fn log_likelihood(
    kernel: &Kernel,
    design: &Design,
    observations: &Observations,
    sigma2: &Scalar,
) -> Result<Scalar> {
    if !sigma2.is_positive() {
        return Err(Error::Parameter(format!("sigma2 must be > 0, got {sigma2}")));
    }
    let s = solve_escalating(&kernel.correlation(), design, observations, &SolveOptions::default())?;
    let prec = s.prec;
    let n = design.len() as u32;
    let s2 = sigma2.to_float(prec);
    let two_pi = Float::with_val(prec, rug::float::Constant::Pi) * 2u32;
    let quad = dot(&s.data, &s.weights, prec);
    let ll = -(Float::with_val(prec, &two_pi * &s2).ln() * n) / 2u32 - s.chol.log_det() / 2u32 - quad / (s2 * 2u32);
    Ok(Scalar::from_float(ll))
}

/// Discrete BLUE of `theta` in `y(x) = theta F(x) + e(x)`: weights
/// `K_N^{-1} F_N / (F_N^T K_N^{-1} F_N)` and variance `1 / (F_N^T K_N^{-1} F_N)`.
pub fn blue_discrete(kernel: &Kernel, design: &Design, regressor: &Observations) -> Result<(Vec<Scalar>, Scalar)> {
    blue_discrete_with(kernel, design, regressor, &SolveOptions::default())
}

pub fn blue_discrete_with(
    kernel: &Kernel,
    design: &Design,
    regressor: &Observations,
    opts: &SolveOptions,
) -> Result<(Vec<Scalar>, Scalar)> {
    let s = solve_escalating(kernel, design, regressor, opts)?;
    if s.data.iter().all(Float::is_zero) {
        return Err(Error::Degenerate("regressor vanishes on the design".into()));
    }
    let quad = dot(&s.data, &s.weights, s.prec);
    let variance = Float::with_val(s.prec, quad.recip_ref());
    let weights = s
        .weights
        .iter()
        .map(|w| Scalar::from_float(Float::with_val(s.prec, w * &variance)))
        .collect();
    Ok((weights, Scalar::from_float(variance)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandVariant {
    /// Half-width `factor * sigma2_hat * C_N(q, q)`.
    #[default]
    Paper,
    /// Half-width `factor * sqrt(sigma2_hat * C_N(q, q))`.
    Standard,
}

impl std::str::FromStr for BandVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(BandVariant::Paper),
            "standard" => Ok(BandVariant::Standard),
            other => Err(Error::Parse(format!("band variant must be paper or standard, got \"{other}\""))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Band {
    pub x: Scalar,
    pub mean: Scalar,
    pub cond_var: Scalar,
    pub half_width: Scalar,
}

impl Band {
    pub fn lo(&self) -> Scalar {
        &self.mean - &self.half_width
    }

    pub fn hi(&self) -> Scalar {
        &self.mean + &self.half_width
    }
}

/// Confidence bands `mu_N(q) +/- half_width(q)` at every query.
pub fn confidence_bands(fit: &KrigingFit, queries: &[Scalar], factor: &Scalar, variant: BandVariant) -> Vec<Band> {
    let prec = fit.solve_precision;
    let s2 = fit.sigma2_hat.to_float(prec);
    let c = factor.to_float(prec);
    let (mean, var) = fit.predict(queries);
    queries
        .iter()
        .zip(mean.into_iter().zip(var))
        .map(|(x, (mean, cond_var))| {
            let v = cond_var.to_float(prec);
            let scaled = Float::with_val(prec, &s2 * &v);
            let hw = match variant {
                BandVariant::Paper => scaled * &c,
                BandVariant::Standard => scaled.sqrt() * &c,
            };
            Band {
                x: x.clone(),
                mean,
                cond_var,
                half_width: Scalar::from_float(hw),
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct BandRow {
    pub x: Scalar,
    pub f: Scalar,
    pub band: Band,
}

/// Deviation of the kriging mean from the truth against the band width.
#[derive(Clone, Debug, PartialEq)]
pub struct BandComparison {
    pub rows: Vec<BandRow>,
    /// mean |mu_N - f| over the grid divided by mean half-width.
    pub deviation_band_ratio: f64,
    /// Mean of pointwise |mu_N - f| / half-width over points with non-zero width.
    pub mean_pointwise_ratio: f64,
}

impl BandComparison {
    /// CSV with columns `(x, f, mu, cond_var, band_lo, band_hi)`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,f,mu,cond_var,band_lo,band_hi\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.x,
                r.f,
                r.band.mean,
                r.band.cond_var,
                r.band.lo(),
                r.band.hi()
            ));
        }
        out
    }
}

pub fn compare_bands(
    fit: &KrigingFit,
    truth: &TestFunction,
    grid: &[Scalar],
    factor: &Scalar,
    variant: BandVariant,
) -> BandComparison {
    let prec = fit.solve_precision;
    let bands = confidence_bands(fit, grid, factor, variant);
    let mut dev_sum = 0.0;
    let mut hw_sum = 0.0;
    let mut ratio_sum = 0.0;
    let mut ratio_count = 0usize;
    let rows: Vec<BandRow> = bands
        .into_iter()
        .map(|band| {
            let f = truth.eval(&band.x.to_float(prec), &fit.kernel, prec);
            let dev = Float::with_val(prec, &band.mean.to_float(prec) - &f).abs().to_f64();
            let hw = band.half_width.to_f64();
            dev_sum += dev;
            hw_sum += hw;
            if hw > 0.0 {
                ratio_sum += dev / hw;
                ratio_count += 1;
            }
            BandRow {
                x: band.x.clone(),
                f: Scalar::from_float(f),
                band,
            }
        })
        .collect();
    let n = rows.len().max(1) as f64;
    BandComparison {
        rows,
        deviation_band_ratio: if hw_sum > 0.0 { (dev_sum / n) / (hw_sum / n) } else { f64::INFINITY },
        mean_pointwise_ratio: if ratio_count > 0 { ratio_sum / ratio_count as f64 } else { f64::NAN },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MembershipVerdict {
    ConsistentWithMembership,
    ConsistentWithNonmembership,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MembershipEntry {
    pub n: usize,
    pub sigma2_hat: Scalar,
    pub n_sigma2_hat: Scalar,
    pub var_blue: Scalar,
    pub solve_precision: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MembershipDiagnostic {
    pub entries: Vec<MembershipEntry>,
    pub slope: f64,
    pub verdict: MembershipVerdict,
}

pub const MEMBERSHIP_SLOPE: f64 = 0.1;
pub const NONMEMBERSHIP_SLOPE: f64 = 0.5;
pub const PLATEAU_TOLERANCE: f64 = 0.05;
/// Increments of `N sigma2_hat` below this relative size count as converged.
pub const NEGLIGIBLE_INCREMENT: f64 = 1e-3;

#[derive(Clone, Copy, Debug)]
pub struct MembershipOptions {
    pub rule: DesignRule,
    pub solve: SolveOptions,
}

impl Default for MembershipOptions {
    fn default() -> Self {
        MembershipOptions {
            rule: DesignRule::Equispaced,
            solve: SolveOptions::default(),
        }
    }
}

/// `N sigma2_hat_N` over a schedule of designs on `[a, b]`.
///
/// `N sigma2_hat_N` is the squared RKHS norm of the minimum-norm interpolant,
/// so it stays bounded exactly when `f` belongs to the RKHS.
pub fn membership_diagnostic(
    kernel: &Kernel,
    f: &TestFunction,
    domain: (&Scalar, &Scalar),
    schedule: &[usize],
) -> Result<MembershipDiagnostic> {
    membership_diagnostic_with(kernel, f, domain, schedule, &MembershipOptions::default())
}

pub fn membership_diagnostic_with(
    kernel: &Kernel,
    f: &TestFunction,
    domain: (&Scalar, &Scalar),
    schedule: &[usize],
    opts: &MembershipOptions,
) -> Result<MembershipDiagnostic> {
    if schedule.len() < 2 {
        return Err(Error::Parameter("schedule needs at least two sizes".into()));
    }
    if schedule.windows(2).any(|w| w[0] >= w[1]) || schedule[0] == 0 {
        return Err(Error::Parameter("schedule must be strictly increasing and positive".into()));
    }
    let corr = kernel.correlation();
    let obs = Observations::Function(f.clone());
    let mut entries = Vec::with_capacity(schedule.len());
    for &n in schedule {
        let design = Design::generate(domain.0, domain.1, n, opts.rule)?;
        let fit = fit_with(&corr, &design, &obs, &opts.solve)?;
        let prec = fit.solve_precision;
        let quad = dot(&fit.data, &fit.w, prec);
        if quad.is_zero() {
            return Err(Error::Degenerate("test function vanishes on the design".into()));
        }
        entries.push(MembershipEntry {
            n,
            sigma2_hat: fit.sigma2_hat.clone(),
            n_sigma2_hat: Scalar::from_float(quad.clone()),
            var_blue: Scalar::from_float(quad.recip()),
            solve_precision: prec,
        });
    }
    let values: Vec<f64> = entries.iter().map(|e| e.n_sigma2_hat.to_f64()).collect();
    let (slope, verdict) = membership_verdict(schedule, &values);
    Ok(MembershipDiagnostic {
        entries,
        slope,
        verdict,
    })
}

/// Least-squares slope of `log v` against `log N` over the top half of the
/// schedule, and the verdict it supports.
///
/// Besides the slope thresholds, the increments of `N sigma2_hat` between
/// successive schedule entries are checked. Growth that does not slow down
/// signals non-membership even when the slope is still small, and a plateau
/// only counts once the increments are shrinking.
pub fn membership_verdict(schedule: &[usize], values: &[f64]) -> (f64, MembershipVerdict) {
    let len = values.len();
    let start = (len / 2).min(len.saturating_sub(2));
    let xs: Vec<f64> = schedule[start..].iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = values[start..].iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };

    let last = values[len - 1];
    let scale = last.abs().max(f64::MIN_POSITIVE);
    let increments: Option<(f64, f64)> =
        (len >= 3).then(|| (values[len - 2] - values[len - 3], values[len - 1] - values[len - 2]));
    let accelerating = increments.is_some_and(|(prev, cur)| cur >= prev && cur / scale > NEGLIGIBLE_INCREMENT);
    let settling = increments.is_none_or(|(prev, cur)| cur.abs() / scale < NEGLIGIBLE_INCREMENT || cur.abs() < 0.5 * prev.abs());
    let plateau = (last - values[len - 2]).abs() / scale < PLATEAU_TOLERANCE;

    let verdict = if slope > NONMEMBERSHIP_SLOPE || accelerating {
        MembershipVerdict::ConsistentWithNonmembership
    } else if slope < MEMBERSHIP_SLOPE && plateau && settling {
        MembershipVerdict::ConsistentWithMembership
    } else {
        MembershipVerdict::Inconclusive
    };
    (slope, verdict)
}

/// Parse a `[a, b]` JSON pair.
pub(crate) fn domain_from_json(value: &Value) -> Result<(Scalar, Scalar)> {
    let arr = value
        .as_array()
        .filter(|a| a.len() == 2)
        .ok_or_else(|| Error::Parse("domain must be a two-element array".into()))?;
    let a = scalar_from_json(&arr[0])?;
    let b = scalar_from_json(&arr[1])?;
    if a >= b {
        return Err(Error::Parameter(format!("domain [{a}, {b}] is empty")));
    }
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::SpectralFamily;

    fn q(n: i64, d: i64) -> Scalar {
        Scalar::ratio(n, d)
    }

    fn unit() -> (Scalar, Scalar) {
        (Scalar::zero(), Scalar::one())
    }

    #[test]
    fn designs() {
        let (a, b) = unit();
        let d = Design::equispaced(&a, &b, 3).unwrap();
        assert_eq!(d.points(), &[q(0, 1), q(1, 2), q(1, 1)]);
        let n = Design::nested(&a, &b, 4).unwrap();
        assert_eq!(n.points(), &[q(0, 1), q(1, 4), q(1, 2), q(3, 4)]);
        let n2 = Design::nested(&a, &b, 8).unwrap();
        assert!(n.points().iter().all(|p| n2.points().contains(p)));
        assert!(Design::new(vec![q(1, 2), q(1, 2)]).is_err());
        assert!(Design::new(vec![]).is_err());
        assert!(Design::within(vec![q(3, 2)], &a, &b).is_err());
        assert_eq!(Design::equispaced(&a, &b, 1).unwrap().len(), 1);
    }

    #[test]
    fn gram_examples() {
        let (a, b) = unit();
        let k = Kernel::gaussian(Scalar::int(15)).unwrap();
        let m = kernel_matrix(&k, &Design::equispaced(&a, &b, 3).unwrap());
        assert_eq!(m[0][0], Scalar::one());
        assert!((m[0][1].to_f64() - (-15.0f64 / 4.0).exp()).abs() < 1e-15);
        assert!((m[0][2].to_f64() - (-15.0f64).exp()).abs() < 1e-20);
        assert_eq!(m[1][2], m[0][1]);
        let scaled = k.with_sigma2(Scalar::int(3)).unwrap();
        let one = kernel_matrix(&scaled, &Design::new(vec![q(1, 5)]).unwrap());
        assert_eq!(one[0][0].to_f64(), 3.0);
    }

    #[test]
    fn single_point_formulas() {
        let k = Kernel::cauchy(Scalar::int(4)).unwrap().with_sigma2(q(5, 2)).unwrap();
        let d = Design::new(vec![q(1, 4)]).unwrap();
        let obs = Observations::Values(vec![q(3, 1)]);
        let queries = [q(3, 4)];
        let (mean, var, fit) = krige(&k, &d, &obs, &queries).unwrap();
        let kq = 1.0 / (1.0 + 4.0 * 0.25);
        assert!((mean[0].to_f64() - 3.0 * kq).abs() < 1e-15);
        assert!((var[0].to_f64() - 2.5 * (1.0 - kq * kq)).abs() < 1e-15);
        assert!((fit.sigma2_hat.to_f64() - 9.0).abs() < 1e-15);
        assert!((mle_sigma2(&k, &d, &obs).unwrap().to_f64() - 9.0).abs() < 1e-15);
        let (w, v) = blue_discrete(&k, &d, &Observations::Values(vec![Scalar::one()])).unwrap();
        assert!((v.to_f64() - 2.5).abs() < 1e-15);
        assert!((w[0].to_f64() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn interpolation_and_clamping() {
        let (a, b) = unit();
        let k = Kernel::gaussian(Scalar::int(2)).unwrap();
        let d = Design::equispaced(&a, &b, 9).unwrap();
        let (mean, var, fit) = krige(&k, &d, &TestFunction::F2.into(), d.points()).unwrap();
        for (x, (m, v)) in d.points().iter().zip(mean.iter().zip(&var)) {
            let f = TestFunction::F2.eval(&x.to_float(256), &k, 256).to_f64();
            assert!((m.to_f64() - f).abs() < 1e-15);
            assert!(v.to_f64() >= 0.0 && v.to_f64() < 1e-15);
        }
        assert!(fit.solve_precision >= 512);
    }

    #[test]
    fn zero_data_and_zero_regressor() {
        let k = Kernel::gaussian(Scalar::one()).unwrap();
        let d = Design::new(vec![q(0, 1), q(1, 2)]).unwrap();
        let zero = Observations::Values(vec![Scalar::zero(), Scalar::zero()]);
        assert!(mle_sigma2(&k, &d, &zero).unwrap().is_zero());
        assert!(matches!(blue_discrete(&k, &d, &zero), Err(Error::Degenerate(_))));
        let short = Observations::Values(vec![Scalar::one()]);
        assert!(matches!(krige(&k, &d, &short, &[]), Err(Error::Parameter(_))));
    }

    #[test]
    fn cosine_kernel_rank() {
        let k = Kernel::correlation_of(SpectralFamily::cosine(Scalar::int(3)).unwrap()).unwrap();
        let two = Design::new(vec![q(0, 1), q(1, 3)]).unwrap();
        assert!(krige(&k, &two, &Observations::Values(vec![q(1, 1), q(1, 2)]), &[]).is_ok());
        let three = Design::new(vec![q(0, 1), q(1, 3), q(2, 3)]).unwrap();
        let opts = SolveOptions {
            precision_ceiling: 2048,
            ..SolveOptions::default()
        };
        let err = krige_with(&k, &three, &Observations::Values(vec![Scalar::one(); 3]), &[], &opts).unwrap_err();
        assert_eq!(err, Error::Singular { family: "cosine".into() });
    }

    #[test]
    fn likelihood_is_maximised_at_mle() {
        let (a, b) = unit();
        let k = Kernel::gaussian(Scalar::int(15)).unwrap();
        let d = Design::equispaced(&a, &b, 6).unwrap();
        let obs: Observations = TestFunction::F1.into();
        let s = mle_sigma2(&k, &d, &obs).unwrap();
        let at = log_likelihood(&k, &d, &obs, &s).unwrap();
        for f in [q(9, 10), q(11, 10)] {
            assert!(at > log_likelihood(&k, &d, &obs, &(&s * &f)).unwrap());
        }
    }

    #[test]
    fn bands() {
        let (a, b) = unit();
        let k = Kernel::gaussian(Scalar::int(15)).unwrap();
        let d = Design::equispaced(&a, &b, 6).unwrap();
        let (_, _, fit) = krige(&k, &d, &TestFunction::F1.into(), &[]).unwrap();
        let at_design = confidence_bands(&fit, d.points(), &Scalar::int(3), BandVariant::Standard);
        assert!(at_design.iter().all(|b| b.half_width.to_f64() < 1e-7));
        let mid = [q(1, 10)];
        let zero = confidence_bands(&fit, &mid, &Scalar::zero(), BandVariant::Paper);
        assert_eq!(zero[0].lo(), zero[0].mean);
        let paper = confidence_bands(&fit, &mid, &Scalar::int(3), BandVariant::Paper)[0].half_width.to_f64();
        let standard = confidence_bands(&fit, &mid, &Scalar::int(3), BandVariant::Standard)[0].half_width.to_f64();
        let c = fit.cond_var(&mid[0]).to_f64() * fit.sigma2_hat.to_f64();
        assert!((paper - 3.0 * c).abs() <= 1e-12 * paper);
        assert!((standard - 3.0 * c.sqrt()).abs() <= 1e-12 * standard);
    }

    #[test]
    fn function_parsing() {
        assert_eq!("f1".parse::<TestFunction>().unwrap(), TestFunction::F1);
        assert_eq!(
            "repro:0.3".parse::<TestFunction>().unwrap(),
            TestFunction::Reproducing { x0: q(3, 10) }
        );
        let p = TestFunction::from_json(&serde_json::json!({"poly": [1, 0, "-2"]})).unwrap();
        assert_eq!(p, TestFunction::Poly(vec![q(1, 1), q(0, 1), q(-2, 1)]));
        assert!(TestFunction::from_json(&serde_json::json!({"poly": [1], "x": 2})).is_err());
        assert!("f3".parse::<TestFunction>().is_err());
        let k = Kernel::gaussian(Scalar::one()).unwrap();
        let x = Float::with_val(128, 0.5);
        assert_eq!(p.eval(&x, &k, 128).to_f64(), 0.5);
        assert_eq!(TestFunction::Reproducing { x0: q(1, 2) }.eval(&x, &k, 128).to_f64(), 1.0);
    }

    #[test]
    fn verdict_rules() {
        let sched = [8, 16, 32, 64];
        let (_, v) = membership_verdict(&sched, &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(v, MembershipVerdict::ConsistentWithMembership);
        let (s, v) = membership_verdict(&sched, &[1.8, 2.03, 3.7, 16.7]);
        assert!(s > 2.0);
        assert_eq!(v, MembershipVerdict::ConsistentWithNonmembership);
        let (s, v) = membership_verdict(&sched, &[1.593, 1.620, 1.669, 1.747]);
        assert!(s < 0.1);
        assert_eq!(v, MembershipVerdict::ConsistentWithNonmembership);
        let (_, v) = membership_verdict(&sched, &[0.5, 0.8, 0.95, 0.99]);
        assert_eq!(v, MembershipVerdict::ConsistentWithMembership);
        let (_, v) = membership_verdict(&sched, &[1.0, 1.2, 1.3, 1.39]);
        assert_eq!(v, MembershipVerdict::Inconclusive);
    }
}
