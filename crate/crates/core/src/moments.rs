//! Spectral families, their even-moment sequences, and determinacy
//! diagnostics.
//!
//! All families are symmetric probability measures on the real line, so only
//! the even moments `c_{2j}` carry information. They are stored as the
//! half-line sequence `b_j = c_{2j}` (the moments of the image of the
//! spectral measure under `t -> t^2`).

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::scalar::{
    factorial, odd_double_factorial, scalar_from_json, Scalar, ScalarKind, DEFAULT_PRECISION,
};

/// A symmetric spectral probability measure with a closed-form moment
/// sequence.
#[derive(Clone, Debug, PartialEq)]
pub enum SpectralFamily {
    /// Centred normal law with variance `variance`; kernel `exp(-variance x^2 / 2)`.
    Gaussian { variance: Scalar },
    /// Laplace law `(lambda/2) exp(-lambda |t|)` with `rate = 1/lambda^2`;
    /// kernel `1 / (1 + rate x^2)`.
    Cauchy { rate: Scalar },
    /// Density proportional to `(1 - t^2)^alpha` on `[-1, 1]`.
    SymmetricBeta { alpha: Scalar },
    /// Two atoms of mass 1/2 at `+-lambda`; kernel `cos(lambda x)`.
    CosineAtoms { lambda: Scalar },
    /// Atoms at `+-t_i` with mass `w_i` each; `sum 2 w_i = 1`.
    FiniteSupport {
        points: Vec<Scalar>,
        weights: Vec<Scalar>,
    },
    /// Mass `gamma` at zero plus `(1 - gamma)` times `inner`.
    AtomMixture {
        gamma: Scalar,
        inner: Box<SpectralFamily>,
    },
}

impl SpectralFamily {
    /// Gaussian family with spectral variance `lambda`, i.e. kernel `exp(-lambda x^2 / 2)`.
    pub fn gaussian(lambda: Scalar) -> Result<Self> {
        let f = SpectralFamily::Gaussian { variance: lambda };
        f.validate()?;
        Ok(f)
    }

    /// Gaussian family of the kernel `exp(-rate x^2)`.
    pub fn gaussian_rate(rate: Scalar) -> Result<Self> {
        Self::gaussian(&Scalar::int(2) * &rate)
    }

    /// Cauchy kernel `1 / (1 + x^2 / lambda^2)`.
    pub fn cauchy(lambda: Scalar) -> Result<Self> {
        if !lambda.is_positive() {
            return Err(Error::Parameter(format!("cauchy lambda must be > 0, got {lambda}")));
        }
        Self::cauchy_rate(lambda.powu(2).recip()?)
    }

    /// Cauchy kernel `1 / (1 + rate x^2)`.
    pub fn cauchy_rate(rate: Scalar) -> Result<Self> {
        let f = SpectralFamily::Cauchy { rate };
        f.validate()?;
        Ok(f)
    }

    pub fn symmetric_beta(alpha: Scalar) -> Result<Self> {
        let f = SpectralFamily::SymmetricBeta { alpha };
        f.validate()?;
        Ok(f)
    }

    pub fn cosine(lambda: Scalar) -> Result<Self> {
        let f = SpectralFamily::CosineAtoms { lambda };
        f.validate()?;
        Ok(f)
    }

    /// Finite symmetric support. `points` must be strictly increasing and
    /// positive; `weights` are per positive point and must satisfy `sum 2 w_i = 1`.
    pub fn finite(points: Vec<Scalar>, weights: Vec<Scalar>) -> Result<Self> {
        let f = SpectralFamily::FiniteSupport { points, weights };
        f.validate()?;
        Ok(f)
    }

    /// Finite support with equal weights `1 / (2m)` on `m` points.
    pub fn finite_uniform(points: Vec<Scalar>) -> Result<Self> {
        let m = points.len() as i64;
        if m == 0 {
            return Err(Error::Parameter("finite support needs at least one point".into()));
        }
        let w = Scalar::ratio(1, 2 * m);
        Self::finite(points, vec![w; m as usize])
    }

    pub fn mixture(gamma: Scalar, inner: SpectralFamily) -> Result<Self> {
        let f = SpectralFamily::AtomMixture {
            gamma,
            inner: Box::new(inner),
        };
        f.validate()?;
        Ok(f)
    }

    pub fn name(&self) -> &'static str {
        match self {
            SpectralFamily::Gaussian { .. } => "gaussian",
            SpectralFamily::Cauchy { .. } => "cauchy",
            SpectralFamily::SymmetricBeta { .. } => "beta",
            SpectralFamily::CosineAtoms { .. } => "cosine",
            SpectralFamily::FiniteSupport { .. } => "finite",
            SpectralFamily::AtomMixture { .. } => "mixture",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SpectralFamily::Gaussian { variance } => {
                if !variance.is_positive() {
                    return Err(Error::Parameter(format!(
                        "gaussian lambda must be > 0, got {variance}"
                    )));
                }
            }
            SpectralFamily::Cauchy { rate } => {
                if !rate.is_positive() {
                    return Err(Error::Parameter(format!("cauchy rate must be > 0, got {rate}")));
                }
            }
            SpectralFamily::SymmetricBeta { alpha } => {
                if *alpha <= Scalar::int(-1) {
                    return Err(Error::Parameter(format!("beta alpha must be > -1, got {alpha}")));
                }
            }
            SpectralFamily::CosineAtoms { lambda } => {
                if lambda.is_zero() {
                    return Err(Error::Parameter("cosine lambda must be nonzero".into()));
                }
            }
            SpectralFamily::FiniteSupport { points, weights } => {
                if points.is_empty() || points.len() != weights.len() {
                    return Err(Error::Parameter(
                        "finite support needs matching, non-empty points and weights".into(),
                    ));
                }
                if !points[0].is_positive() {
                    return Err(Error::Parameter("finite support points must be > 0".into()));
                }
                if points.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Parameter(
                        "finite support points must be strictly increasing".into(),
                    ));
                }
                if weights.iter().any(|w| !w.is_positive()) {
                    return Err(Error::Parameter("finite support weights must be > 0".into()));
                }
                let total = weights
                    .iter()
                    .fold(Scalar::zero(), |acc, w| acc + &Scalar::int(2) * w);
                let ok = if total.is_exact() {
                    total == Scalar::one()
                } else {
                    total.rel_diff(&Scalar::one(), DEFAULT_PRECISION) < 1e-30
                };
                if !ok {
                    return Err(Error::Parameter(format!(
                        "finite support total mass sum 2 w_i must be 1, got {total}"
                    )));
                }
            }
            SpectralFamily::AtomMixture { gamma, inner } => {
                if !(gamma.is_positive() && *gamma < Scalar::one()) {
                    return Err(Error::Parameter(format!("mixture gamma must be in (0,1), got {gamma}")));
                }
                if matches!(**inner, SpectralFamily::AtomMixture { .. }) {
                    return Err(Error::Parameter("nested atom mixtures are not supported".into()));
                }
                inner.validate()?;
            }
        }
        Ok(())
    }

    /// Number of positive support points, `None` for infinite support.
    pub fn atom_count(&self) -> Option<usize> {
        match self {
            SpectralFamily::CosineAtoms { .. } => Some(1),
            SpectralFamily::FiniteSupport { points, .. } => Some(points.len()),
            SpectralFamily::AtomMixture { inner, .. } => inner.atom_count().map(|m| m + 1),
            _ => None,
        }
    }

    pub fn has_infinite_support(&self) -> bool {
        self.atom_count().is_none()
    }

    /// Mass at the origin.
    pub fn atom_at_zero(&self) -> Scalar {
        match self {
            SpectralFamily::AtomMixture { gamma, .. } => gamma.clone(),
            _ => Scalar::zero(),
        }
    }

    pub fn to_json(&self) -> Value {
        let params = match self {
            SpectralFamily::Gaussian { variance } => json!({ "lambda": variance }),
            SpectralFamily::Cauchy { rate } => json!({ "rate": rate }),
            SpectralFamily::SymmetricBeta { alpha } => json!({ "alpha": alpha }),
            SpectralFamily::CosineAtoms { lambda } => json!({ "lambda": lambda }),
            SpectralFamily::FiniteSupport { points, weights } => {
                json!({ "points": points, "weights": weights })
            }
            SpectralFamily::AtomMixture { gamma, inner } => {
                json!({ "gamma": gamma, "inner": inner.to_json() })
            }
        };
        json!({ "family": self.name(), "params": params })
    }

    /// Parse `{"family": ..., "params": {...}}`. Unknown keys are rejected.
    pub fn from_json(value: &Value) -> Result<Self> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Parse("family must be a JSON object".into()))?;
        reject_unknown(obj, &["family", "params"], "family")?;
        let name = obj
            .get("family")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Parse("missing \"family\" name".into()))?;
        let empty = Map::new();
        let params = match obj.get("params") {
            Some(Value::Object(p)) => p,
            Some(_) => return Err(Error::Parse("\"params\" must be an object".into())),
            None => &empty,
        };
        let get = |key: &str| -> Result<Scalar> {
            params
                .get(key)
                .ok_or_else(|| Error::Parse(format!("{name}: missing parameter {key:?}")))
                .and_then(scalar_from_json)
        };
        match name {
            "gaussian" => {
                reject_unknown(params, &["lambda", "rate"], name)?;
                match (params.contains_key("lambda"), params.contains_key("rate")) {
                    (true, false) => Self::gaussian(get("lambda")?),
                    (false, true) => Self::gaussian_rate(get("rate")?),
                    _ => Err(Error::Parse(
                        "gaussian: give exactly one of \"lambda\" or \"rate\"".into(),
                    )),
                }
            }
            "cauchy" => {
                reject_unknown(params, &["lambda", "rate"], name)?;
                match (params.contains_key("lambda"), params.contains_key("rate")) {
                    (true, false) => Self::cauchy(get("lambda")?),
                    (false, true) => Self::cauchy_rate(get("rate")?),
                    _ => Err(Error::Parse(
                        "cauchy: give exactly one of \"lambda\" or \"rate\"".into(),
                    )),
                }
            }
            "beta" => {
                reject_unknown(params, &["alpha"], name)?;
                Self::symmetric_beta(get("alpha")?)
            }
            "cosine" => {
                reject_unknown(params, &["lambda"], name)?;
                Self::cosine(get("lambda")?)
            }
            "finite" => {
                reject_unknown(params, &["points", "weights"], name)?;
                let list = |key: &str| -> Result<Vec<Scalar>> {
                    params
                        .get(key)
                        .and_then(Value::as_array)
                        .ok_or_else(|| Error::Parse(format!("finite: {key:?} must be an array")))?
                        .iter()
                        .map(scalar_from_json)
                        .collect()
                };
                let points = list("points")?;
                if params.contains_key("weights") {
                    Self::finite(points, list("weights")?)
                } else {
                    Self::finite_uniform(points)
                }
            }
            "mixture" => {
                reject_unknown(params, &["gamma", "inner"], name)?;
                let inner = params
                    .get("inner")
                    .ok_or_else(|| Error::Parse("mixture: missing \"inner\"".into()))?;
                Self::mixture(get("gamma")?, Self::from_json(inner)?)
            }
            other => Err(Error::Parse(format!("unknown family {other:?}"))),
        }
    }
}

pub(crate) fn reject_unknown(obj: &Map<String, Value>, allowed: &[&str], ctx: &str) -> Result<()> {
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(Error::Parse(format!("{ctx}: unknown key {k:?}"))),
        None => Ok(()),
    }
}

impl Serialize for SpectralFamily {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SpectralFamily {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        SpectralFamily::from_json(&v).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for SpectralFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_json())
    }
}

/// Where a moment sequence came from.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Family(SpectralFamily),
    Derived,
}

/// Half-line moments `b_0, ..., b_n` with `b_j = c_{2j}`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentSequence {
    b: Vec<Scalar>,
    provenance: Provenance,
}

impl MomentSequence {
    /// A sequence not tied to a family. Requires `b_0 > 0`.
    pub fn derived(b: Vec<Scalar>) -> Result<Self> {
        Self::with_provenance(b, Provenance::Derived)
    }

    fn with_provenance(b: Vec<Scalar>, provenance: Provenance) -> Result<Self> {
        match b.first() {
            None => Err(Error::Length {
                needed: 1,
                available: 0,
            }),
            Some(b0) if !b0.is_positive() => {
                Err(Error::Domain(format!("b_0 must be > 0, got {b0}")))
            }
            _ => Ok(MomentSequence { b, provenance }),
        }
    }

    pub fn values(&self) -> &[Scalar] {
        &self.b
    }

    pub fn get(&self, j: usize) -> Option<&Scalar> {
        self.b.get(j)
    }

    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn family(&self) -> Option<&SpectralFamily> {
        match &self.provenance {
            Provenance::Family(f) => Some(f),
            Provenance::Derived => None,
        }
    }

    pub fn kind(&self) -> ScalarKind {
        if self.b.iter().all(Scalar::is_exact) {
            ScalarKind::Exact
        } else {
            ScalarKind::HighPrecision
        }
    }

    /// Fails with a length error unless `b_0..=b_last` are present.
    pub fn require(&self, last: usize) -> Result<()> {
        if self.b.len() <= last {
            Err(Error::Length {
                needed: last + 1,
                available: self.b.len(),
            })
        } else {
            Ok(())
        }
    }

    /// Replace `b_j` by `s^j b_j`, the moments of the dilated measure.
    pub fn scaled(&self, s: &Scalar) -> MomentSequence {
        let mut factor = Scalar::one();
        let b = self
            .b
            .iter()
            .map(|bj| {
                let v = bj * &factor;
                factor = &factor * s;
                v
            })
            .collect();
        MomentSequence {
            b,
            provenance: Provenance::Derived,
        }
    }

    /// Symmetric even moments `c_0, c_1 = 0, c_2, ...` up to `c_{2n}`.
    pub fn to_symmetric(&self) -> Vec<Scalar> {
        let mut c = Vec::with_capacity(2 * self.b.len());
        for (j, bj) in self.b.iter().enumerate() {
            if j > 0 {
                c.push(Scalar::zero());
            }
            c.push(bj.clone());
        }
        c
    }

    /// Inverse of [`MomentSequence::to_symmetric`]; odd moments must vanish.
    pub fn from_symmetric(c: &[Scalar]) -> Result<MomentSequence> {
        if let Some((k, _)) = c.iter().enumerate().find(|(k, v)| k % 2 == 1 && !v.is_zero()) {
            return Err(Error::Domain(format!(
                "odd moment c_{k} is nonzero; measure is not symmetric"
            )));
        }
        MomentSequence::derived(c.iter().step_by(2).cloned().collect())
    }

    /// CSV with `(j, b_j_numerator, b_j_denominator)` for exact sequences or
    /// `(j, b_j_decimal, precision_bits)` otherwise.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match self.kind() {
            ScalarKind::Exact => {
                out.push_str("j,b_j_numerator,b_j_denominator\n");
                for (j, bj) in self.b.iter().enumerate() {
                    let q = bj.as_rational().expect("exact sequence");
                    out.push_str(&format!("{j},{},{}\n", q.numer(), q.denom()));
                }
            }
            ScalarKind::HighPrecision => {
                out.push_str("j,b_j_decimal,precision_bits\n");
                for (j, bj) in self.b.iter().enumerate() {
                    let bits = bj.precision().unwrap_or(DEFAULT_PRECISION);
                    out.push_str(&format!("{j},{},{bits}\n", Scalar::from_float(bj.to_float(bits))));
                }
            }
        }
        out
    }
}

/// Moments `b_0..=b_{n_max}` of a spectral family.
pub fn even_moments(family: &SpectralFamily, n_max: usize) -> Result<MomentSequence> {
    family.validate()?;
    let b = family_moments(family, n_max);
    MomentSequence::with_provenance(b, Provenance::Family(family.clone()))
}

fn family_moments(family: &SpectralFamily, n_max: usize) -> Vec<Scalar> {
    let js = 0..=n_max as u32;
    match family {
        SpectralFamily::Gaussian { variance } => js
            .map(|j| &variance.powu(j) * &Scalar::from(rug::Rational::from(odd_double_factorial(j))))
            .collect(),
        SpectralFamily::Cauchy { rate } => js
            .map(|j| &rate.powu(j) * &Scalar::from(rug::Rational::from(factorial(2 * j))))
            .collect(),
        SpectralFamily::SymmetricBeta { alpha } => {
            // b_j = prod_{i<j} (i + 1/2) / (i + alpha + 3/2)
            let mut out = Vec::with_capacity(n_max + 1);
            let mut acc = Scalar::one();
            out.push(acc.clone());
            for i in 0..n_max as i64 {
                let num = Scalar::ratio(2 * i + 1, 2);
                let den = &Scalar::ratio(2 * i + 3, 2) + alpha;
                acc = &acc * &(&num / &den);
                out.push(acc.clone());
            }
            out
        }
        SpectralFamily::CosineAtoms { lambda } => js.map(|j| lambda.powu(2 * j)).collect(),
        SpectralFamily::FiniteSupport { points, weights } => js
            .map(|j| {
                points.iter().zip(weights).fold(Scalar::zero(), |acc, (t, w)| {
                    acc + &(&Scalar::int(2) * w) * &t.powu(2 * j)
                })
            })
            .collect(),
        SpectralFamily::AtomMixture { gamma, inner } => {
            let keep = &Scalar::one() - gamma;
            family_moments(inner, n_max)
                .into_iter()
                .enumerate()
                .map(|(j, bj)| if j == 0 { Scalar::one() } else { &keep * &bj })
                .collect()
        }
    }
}

/// Moments of the tilted measure `t^{2m} alpha(dt) / c_{2m}`:
/// `b'_j = b_{m+j} / b_m`.
pub fn shift_measure(b: &MomentSequence, m: usize) -> Result<MomentSequence> {
    if m == 0 {
        return Ok(b.clone());
    }
    b.require(m)?;
    let bm = &b.b[m];
    if !bm.is_positive() {
        return Err(Error::Domain(format!("b_{m} must be > 0 to tilt, got {bm}")));
    }
    let shifted = b.b[m..].iter().map(|v| v / bm).collect();
    MomentSequence::derived(shifted)
}

/// Add an atom of mass `gamma` at zero: `b~_0 = 1`, `b~_j = (1 - gamma) b_j`.
pub fn mix_atom(b: &MomentSequence, gamma: &Scalar) -> Result<MomentSequence> {
    if !(gamma.is_positive() && *gamma < Scalar::one()) {
        return Err(Error::Parameter(format!("gamma must be in (0,1), got {gamma}")));
    }
    let b0 = &b.b[0];
    let normalised = if b0.is_exact() {
        *b0 == Scalar::one()
    } else {
        b0.rel_diff(&Scalar::one(), DEFAULT_PRECISION) < 1e-30
    };
    if !normalised {
        return Err(Error::Domain(format!("mix_atom needs b_0 = 1, got {b0}")));
    }
    let keep = &Scalar::one() - gamma;
    let provenance = match &b.provenance {
        Provenance::Family(f) if !matches!(f, SpectralFamily::AtomMixture { .. }) => {
            Provenance::Family(SpectralFamily::AtomMixture {
                gamma: gamma.clone(),
                inner: Box::new(f.clone()),
            })
        }
        _ => Provenance::Derived,
    };
    let mixed = b
        .b
        .iter()
        .enumerate()
        .map(|(j, bj)| if j == 0 { Scalar::one() } else { &keep * bj })
        .collect();
    MomentSequence::with_provenance(mixed, provenance)
}

/// Partial sums `C_k = sum_{n=1}^{k} b_n^{-1/(2n)}` for `k = 1..=n`.
///
/// Terms are exact whenever `b_n` is a perfect `2n`-th power of a rational,
/// otherwise they are computed at 256 bits (or the sequence's own precision
/// when higher).
pub fn carleman_partial_sums(b: &MomentSequence, n: usize) -> Result<Vec<Scalar>> {
    b.require(n)?;
    let mut sums = Vec::with_capacity(n);
    let mut acc = Scalar::zero();
    for k in 1..=n {
        let bk = &b.b[k];
        if !bk.is_positive() {
            return Err(Error::Domain(format!("b_{k} must be > 0, got {bk}")));
        }
        let root = 2 * k as u32;
        let term = match bk.exact_root(root) {
            Some(r) => r.recip()?,
            None => {
                let prec = bk.precision().unwrap_or(DEFAULT_PRECISION).max(DEFAULT_PRECISION);
                let ln = bk.to_float(prec).ln();
                Scalar::from_float((-ln / root).exp())
            }
        };
        acc = &acc + &term;
        sums.push(acc.clone());
    }
    Ok(sums)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateLabel {
    #[serde(rename = "sqrt-N")]
    SqrtN,
    #[serde(rename = "log-N")]
    LogN,
    #[serde(rename = "linear-N")]
    LinearN,
    #[serde(rename = "undetermined")]
    Undetermined,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeterminacyVerdict {
    /// Partial sums of `c_{2n}^{-1/(2n)}` diverge.
    DeterminateByCarleman,
    /// `c_{2n}^{1/(2n)} / (2n)` stays bounded.
    DeterminateByRootGrowth,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct DeterminacyReport {
    pub carleman_partial_sums: Vec<Scalar>,
    pub carleman_rate_label: RateLabel,
    /// Relative RMS residual of each template fit, in the order sqrt, log, linear.
    pub template_residuals: [f64; 3],
    pub a4_sequence: Vec<f64>,
    pub a4_bounded: bool,
    pub verdict: DeterminacyVerdict,
}

/// Largest relative RMS residual still accepted as a rate match.
pub const RATE_FIT_THRESHOLD: f64 = 0.10;

/// Carleman growth-rate classification and root-growth boundedness test.
pub fn determinacy_indicators(b: &MomentSequence, n: usize) -> Result<DeterminacyReport> {
    if n < 16 {
        return Err(Error::Parameter(format!("determinacy needs N >= 16, got {n}")));
    }
    let sums = carleman_partial_sums(b, n)?;
    let values: Vec<f64> = sums.iter().map(Scalar::to_f64).collect();

    let lo = n / 2;
    let ks: Vec<f64> = (lo..=n).map(|k| k as f64).collect();
    let ys: Vec<f64> = (lo..=n).map(|k| values[k - 1]).collect();
    let templates: [fn(f64) -> f64; 3] = [f64::sqrt, f64::ln, |k| k];
    let mut residuals = [0.0; 3];
    for (slot, g) in residuals.iter_mut().zip(templates) {
        let xs: Vec<f64> = ks.iter().map(|&k| g(k)).collect();
        *slot = affine_fit_residual(&xs, &ys);
    }
    let (best, best_res) = residuals
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("three templates");
    let label = if best_res > RATE_FIT_THRESHOLD {
        RateLabel::Undetermined
    } else {
        [RateLabel::SqrtN, RateLabel::LogN, RateLabel::LinearN][best]
    };

    let a4: Vec<f64> = (1..=n)
        .map(|k| {
            let bk = &b.b[k];
            let prec = bk.precision().unwrap_or(DEFAULT_PRECISION).max(DEFAULT_PRECISION);
            let root = (bk.to_float(prec).ln() / (2 * k) as u32).exp();
            (root / (2 * k) as u32).to_f64()
        })
        .collect();
    let tail = &a4[n - n / 4..];
    let non_increasing = tail.windows(2).all(|w| w[1] <= w[0]);
    let mut sorted = a4.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let tail_max = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let a4_bounded = non_increasing || tail_max <= 2.0 * median;

    let verdict = if a4_bounded {
        DeterminacyVerdict::DeterminateByRootGrowth
    } else if label != RateLabel::Undetermined {
        DeterminacyVerdict::DeterminateByCarleman
    } else {
        DeterminacyVerdict::Inconclusive
    };
    Ok(DeterminacyReport {
        carleman_partial_sums: sums,
        carleman_rate_label: label,
        template_residuals: residuals,
        a4_sequence: a4,
        a4_bounded,
        verdict,
    })
}

/// Relative RMS residual of the least-squares fit `y ~ a x + c`.
fn affine_fit_residual(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let icpt = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (slope * x + icpt);
            r * r
        })
        .sum();
    let scale = ys.iter().map(|y| y.abs()).sum::<f64>() / n;
    (rss / n).sqrt() / scale
}

/// Moments read off the kernel's Taylor series at zero:
/// `b_j = (-1)^j k^{(2j)}(0) / sigma^2 = (-1)^j (2j)! a_j` where
/// `k(x) = sum a_j x^{2j}`.
pub fn kernel_taylor_moments(kernel: &Kernel, n_max: usize) -> Result<MomentSequence> {
    let coeffs = kernel.series_coefficients(n_max)?;
    let b = coeffs
        .into_iter()
        .enumerate()
        .map(|(j, a)| {
            let signed = if j % 2 == 0 { a } else { -a };
            &signed * &Scalar::from(rug::Rational::from(factorial(2 * j as u32)))
        })
        .collect();
    MomentSequence::with_provenance(b, Provenance::Family(kernel.family().clone()))
}
