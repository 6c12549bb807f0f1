//! Translation-invariant covariance kernels `sigma^2 k(x - x')` matched to a
//! [`SpectralFamily`].

use rug::ops::Pow;
use rug::{Float, Rational};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::moments::{reject_unknown, SpectralFamily};
use crate::scalar::{factorial, scalar_from_json, Scalar, DEFAULT_PRECISION};

#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    family: SpectralFamily,
    sigma2: Scalar,
}

impl Kernel {
    pub fn new(family: SpectralFamily, sigma2: Scalar) -> Result<Self> {
        family.validate()?;
        if !sigma2.is_positive() {
            return Err(Error::Parameter(format!("sigma2 must be > 0, got {sigma2}")));
        }
        Ok(Kernel { family, sigma2 })
    }

    /// Unit-variance kernel of a family.
    pub fn correlation_of(family: SpectralFamily) -> Result<Self> {
        Self::new(family, Scalar::one())
    }

    /// `exp(-rate u^2)`.
    pub fn gaussian(rate: Scalar) -> Result<Self> {
        Self::correlation_of(SpectralFamily::gaussian_rate(rate)?)
    }

    /// `1 / (1 + rate u^2)`.
    pub fn cauchy(rate: Scalar) -> Result<Self> {
        Self::correlation_of(SpectralFamily::cauchy_rate(rate)?)
    }

    /// `gamma + (1 - gamma) k(u)` for this kernel's correlation `k`.
    pub fn with_atom(&self, gamma: Scalar) -> Result<Self> {
        Self::new(SpectralFamily::mixture(gamma, self.family.clone())?, self.sigma2.clone())
    }

    pub fn with_sigma2(&self, sigma2: Scalar) -> Result<Self> {
        Self::new(self.family.clone(), sigma2)
    }

    /// Same kernel with `sigma^2 = 1`.
    pub fn correlation(&self) -> Kernel {
        Kernel {
            family: self.family.clone(),
            sigma2: Scalar::one(),
        }
    }

    pub fn family(&self) -> &SpectralFamily {
        &self.family
    }

    pub fn sigma2(&self) -> &Scalar {
        &self.sigma2
    }

    /// `sigma^2 k(u)` at `prec` bits.
    pub fn eval(&self, u: &Float, prec: u32) -> Float {
        let k = correlation_value(&self.family, u, prec);
        if self.sigma2 == Scalar::one() {
            k
        } else {
            k * self.sigma2.to_float(prec)
        }
    }

    /// Taylor coefficients `a_j` of `k(x) = sum_j a_j x^{2j}` for `j = 0..=n_max`.
    pub fn series_coefficients(&self, n_max: usize) -> Result<Vec<Scalar>> {
        series(&self.family, n_max)
    }

    pub fn to_json(&self) -> Value {
        json!({ "family": self.family.to_json(), "sigma2": self.sigma2 })
    }

    /// Either a bare family object (`sigma2 = 1`) or `{"family": {...}, "sigma2": s}`.
    pub fn from_json(value: &Value) -> Result<Self> {
        match value.get("family") {
            Some(Value::Object(_)) => {
                let obj = value.as_object().expect("checked above");
                reject_unknown(obj, &["family", "sigma2"], "kernel")?;
                let fam = SpectralFamily::from_json(&obj["family"])?;
                let sigma2 = match obj.get("sigma2") {
                    Some(v) => scalar_from_json(v)?,
                    None => Scalar::one(),
                };
                Self::new(fam, sigma2)
            }
            _ => Self::correlation_of(SpectralFamily::from_json(value)?),
        }
    }
}

/// `sigma^2 k(u)` at the default precision.
pub fn kernel_eval(kernel: &Kernel, u: &Scalar) -> Scalar {
    let prec = u.precision().unwrap_or(DEFAULT_PRECISION).max(DEFAULT_PRECISION);
    Scalar::from_float(kernel.eval(&u.to_float(prec), prec))
}

fn correlation_value(family: &SpectralFamily, u: &Float, prec: u32) -> Float {
    let u2 = Float::with_val(prec, u.square_ref());
    match family {
        SpectralFamily::Gaussian { variance } => {
            let v = variance.to_float(prec);
            (-(u2 * v) / 2u32).exp()
        }
        SpectralFamily::Cauchy { rate } => {
            let r = rate.to_float(prec);
            (u2 * r + 1u32).recip()
        }
        SpectralFamily::SymmetricBeta { alpha } => beta_kernel(alpha, u, prec),
        SpectralFamily::CosineAtoms { lambda } => (lambda.to_float(prec) * u).cos(),
        SpectralFamily::FiniteSupport { points, weights } => {
            let mut acc = Float::new(prec);
            for (t, w) in points.iter().zip(weights) {
                let c = (t.to_float(prec) * u).cos();
                acc += c * w.to_float(prec) * 2u32;
            }
            acc
        }
        SpectralFamily::AtomMixture { gamma, inner } => {
            let g = gamma.to_float(prec);
            let k = correlation_value(inner, u, prec);
            let keep = Float::with_val(prec, 1u32 - &g);
            keep * k + g
        }
    }
}

fn beta_kernel(alpha: &Scalar, u: &Float, prec: u32) -> Float {
    if u.is_zero() {
        return Float::with_val(prec, 1u32);
    }
    let half = Scalar::ratio(1, 2);
    if *alpha == Scalar::zero() {
        // sin(u) / u
        let s = Float::with_val(prec, u.sin_ref());
        return s / u;
    }
    if *alpha == -&half {
        return Float::with_val(prec, u.j0_ref());
    }
    if *alpha == half {
        let j1 = Float::with_val(prec, u.j1_ref());
        return j1 * 2u32 / u;
    }
    // General alpha: k(u) = sum_j (-1)^j (u/2)^{2j} / (j! (alpha + 3/2)_j),
    // evaluated with guard bits against cancellation.
    let mag = u.clone().abs().to_f64();
    let work = prec + 64 + (1.5 * mag).ceil() as u32;
    let a = alpha.to_float(work) + Float::with_val(work, 1.5);
    let x = Float::with_val(work, u.square_ref()) / 4u32;
    let mut term = Float::with_val(work, 1u32);
    let mut sum = Float::with_val(work, 1u32);
    let eps = Float::with_val(work, Float::i_exp(1, -(work as i32)));
    let mut j = 0u32;
    loop {
        j += 1;
        let denom = Float::with_val(work, &a + (j - 1)) * j;
        term = -(term * &x) / denom;
        sum += &term;
        let small = Float::with_val(work, term.abs_ref()) <= Float::with_val(work, sum.abs_ref()) * &eps;
        if small && j as f64 > mag {
            break;
        }
    }
    Float::with_val(prec, sum)
}

fn series(family: &SpectralFamily, n_max: usize) -> Result<Vec<Scalar>> {
    let sign = |j: usize, v: Scalar| if j % 2 == 0 { v } else { -v };
    let out = match family {
        SpectralFamily::Gaussian { variance } => {
            // exp(-v x^2 / 2) = sum (-v/2)^j x^{2j} / j!
            let half_v = variance / &Scalar::int(2);
            (0..=n_max)
                .map(|j| {
                    let mag = &half_v.powu(j as u32)
                        / &Scalar::from(Rational::from(factorial(j as u32)));
                    sign(j, mag)
                })
                .collect()
        }
        SpectralFamily::Cauchy { rate } => {
            // 1 / (1 + r x^2) = sum (-r)^j x^{2j}
            (0..=n_max).map(|j| sign(j, rate.powu(j as u32))).collect()
        }
        SpectralFamily::SymmetricBeta { alpha } => {
            // (-1)^j / (4^j j! (alpha + 3/2)_j)
            let a = alpha + &Scalar::ratio(3, 2);
            let mut out = Vec::with_capacity(n_max + 1);
            let mut mag = Scalar::one();
            out.push(mag.clone());
            for j in 1..=n_max {
                let step = &Scalar::int(4 * j as i64) * &(&a + &Scalar::int(j as i64 - 1));
                mag = &mag / &step;
                out.push(sign(j, mag.clone()));
            }
            out
        }
        SpectralFamily::CosineAtoms { lambda } => (0..=n_max)
            .map(|j| {
                let mag = &lambda.powu(2 * j as u32)
                    / &Scalar::from(Rational::from(factorial(2 * j as u32)));
                sign(j, mag)
            })
            .collect(),
        SpectralFamily::FiniteSupport { points, weights } => (0..=n_max)
            .map(|j| {
                let fact = Scalar::from(Rational::from(factorial(2 * j as u32)));
                let mag = points.iter().zip(weights).fold(Scalar::zero(), |acc, (t, w)| {
                    acc + &(&Scalar::int(2) * w) * &t.powu(2 * j as u32)
                });
                sign(j, &mag / &fact)
            })
            .collect(),
        SpectralFamily::AtomMixture { gamma, inner } => {
            let keep = &Scalar::one() - gamma;
            series(inner, n_max)?
                .into_iter()
                .enumerate()
                .map(|(j, a)| if j == 0 { Scalar::one() } else { &keep * &a })
                .collect()
        }
    };
    Ok(out)
}

/// `2^x` for a float exponent; helper for closed forms with real powers of two.
pub(crate) fn pow2(x: &Float) -> Float {
    let two = Float::with_val(x.prec(), 2u32);
    two.pow(x)
}
