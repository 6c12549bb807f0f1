//! Hankel determinants of half-line moment sequences and the variance of
//! the best linear unbiased estimator built from them.
//!
//! For a moment sequence `b` the two determinants are
//! `H_n = det(b_{i+j})_{i,j=0..n}` and `G_n = det(b_{i+j})_{i,j=1..n}`
//! (`G_0 = 1`), and the BLUE variance is `H_n / G_n`. The module offers
//! several independent routes to the same numbers: direct fraction-free
//! determinants, three-term-recurrence products, canonical-moment
//! products, closed forms, and a least-squares polynomial-approximation
//! oracle.

use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::pow2;
use crate::linalg::{
    bareiss_determinant, bareiss_leading_minors, clear_denominators, determinant,
    float_pivots, negative_inertia, solve,
};
use crate::moments::{MomentSequence, SpectralFamily};
use crate::scalar::{factorial, odd_double_factorial, Scalar, ScalarKind, DEFAULT_PRECISION, PRECISION_CEILING};

/// Relative agreement required between two successive precisions.
pub const ESCALATION_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComputePath {
    DirectDeterminant,
    RecurrenceProduct,
    CanonicalProduct,
    ClosedForm,
}

impl ComputePath {
    pub fn as_str(&self) -> &'static str {
        match self {
            ComputePath::DirectDeterminant => "direct-determinant",
            ComputePath::RecurrenceProduct => "recurrence-product",
            ComputePath::CanonicalProduct => "canonical-product",
            ComputePath::ClosedForm => "closed-form",
        }
    }
}

/// Which route [`blue_variance_seq_with`] should take.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathPreference {
    /// Always the direct determinants.
    Direct,
    /// Recurrence or canonical-moment products when the family has them
    /// (Gaussian, symmetric Beta), direct determinants otherwise.
    Analytic,
}

#[derive(Clone, Copy, Debug)]
pub struct HankelOptions {
    pub precision_start: u32,
    pub precision_ceiling: u32,
    pub path: PathPreference,
}

impl Default for HankelOptions {
    fn default() -> Self {
        HankelOptions {
            precision_start: DEFAULT_PRECISION,
            precision_ceiling: PRECISION_CEILING,
            path: PathPreference::Direct,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HankelPair {
    pub n: usize,
    pub h: Scalar,
    pub g: Scalar,
    pub path: ComputePath,
}

impl HankelPair {
    /// `H_n / G_n`; zero whenever `H_n` vanishes (finite support), even if
    /// `G_n` vanishes too.
    pub fn variance(&self) -> Scalar {
        if self.h.is_zero() {
            return match &self.h {
                Scalar::Exact(_) => Scalar::zero(),
                Scalar::Approx { value, .. } => Scalar::from_float(Float::new(value.prec())),
            };
        }
        &self.h / &self.g
    }
}

/// `H_n` and `G_n` by direct determinant evaluation.
pub fn hankel_pair(b: &MomentSequence, n: usize) -> Result<HankelPair> {
    hankel_pair_with(b, n, &HankelOptions::default())
}

pub fn hankel_pair_with(b: &MomentSequence, n: usize, opts: &HankelOptions) -> Result<HankelPair> {
    Ok(hankel_sequence(b, n, opts)?.pop().expect("n + 1 entries"))
}

/// `(H_k, G_k)` for every `k = 0..=n_max`, sharing one elimination per matrix.
pub fn hankel_sequence(
    b: &MomentSequence,
    n_max: usize,
    opts: &HankelOptions,
) -> Result<Vec<HankelPair>> {
    b.require(2 * n_max)?;
    match b.kind() {
        ScalarKind::Exact => Ok(exact_sequence(b, n_max)),
        ScalarKind::HighPrecision => escalate(opts, |prec| float_sequence(b, n_max, prec), |pairs| {
            pairs.iter().map(HankelPair::variance).collect()
        }),
    }
}

fn rationals(b: &MomentSequence, from: usize, to: usize) -> Vec<Rational> {
    b.values()[from..=to]
        .iter()
        .map(|v| v.as_rational().expect("exact sequence").clone())
        .collect()
}

/// Leading principal minors of the Hankel matrix `(m_{i+j})_{i,j<size}`.
fn exact_hankel_minors(m: &[Rational], size: usize) -> Vec<Rational> {
    if size == 0 {
        return Vec::new();
    }
    let matrix: Vec<Vec<Rational>> =
        (0..size).map(|i| (0..size).map(|j| m[i + j].clone()).collect()).collect();
    let (d, ints) = clear_denominators(&matrix);
    let mut minors = bareiss_leading_minors(ints.clone());
    // a vanishing pivot stops the unpivoted pass; finish with pivoted determinants
    for k in minors.len()..size {
        let sub: Vec<Vec<Integer>> = ints[..=k].iter().map(|r| r[..=k].to_vec()).collect();
        minors.push(bareiss_determinant(sub));
    }
    let mut scale = Integer::from(1);
    minors
        .into_iter()
        .map(|v| {
            scale *= &d;
            Rational::from((v, scale.clone()))
        })
        .collect()
}

fn exact_sequence(b: &MomentSequence, n_max: usize) -> Vec<HankelPair> {
    let full = rationals(b, 0, 2 * n_max);
    let hs = exact_hankel_minors(&full, n_max + 1);
    let gs = if n_max > 0 {
        exact_hankel_minors(&full[2..], n_max)
    } else {
        Vec::new()
    };
    (0..=n_max)
        .map(|n| HankelPair {
            n,
            h: Scalar::Exact(hs[n].clone()),
            g: if n == 0 { Scalar::one() } else { Scalar::Exact(gs[n - 1].clone()) },
            path: ComputePath::DirectDeterminant,
        })
        .collect()
}

fn float_hankel_minors(m: &[Float], size: usize, prec: u32) -> Vec<Float> {
    if size == 0 {
        return Vec::new();
    }
    let matrix: Vec<Vec<Float>> = (0..size)
        .map(|i| (0..size).map(|j| Float::with_val(prec, &m[i + j])).collect())
        .collect();
    let pivots = float_pivots(matrix.clone());
    let mut minors = Vec::with_capacity(size);
    let mut acc = Float::with_val(prec, 1u32);
    for p in &pivots {
        acc *= p;
        minors.push(acc.clone());
    }
    for k in minors.len()..size {
        let sub: Vec<Vec<Float>> = matrix[..=k].iter().map(|r| r[..=k].to_vec()).collect();
        minors.push(determinant(sub));
    }
    minors
}

fn float_sequence(b: &MomentSequence, n_max: usize, prec: u32) -> Result<Vec<HankelPair>> {
    let full: Vec<Float> = b.values()[..=2 * n_max].iter().map(|v| v.to_float(prec)).collect();
    let hs = float_hankel_minors(&full, n_max + 1, prec);
    let gs = if n_max > 0 {
        float_hankel_minors(&full[2..], n_max, prec)
    } else {
        Vec::new()
    };
    Ok((0..=n_max)
        .map(|n| HankelPair {
            n,
            h: Scalar::from_float(hs[n].clone()),
            g: if n == 0 {
                Scalar::from_float(Float::with_val(prec, 1u32))
            } else {
                Scalar::from_float(gs[n - 1].clone())
            },
            path: ComputePath::DirectDeterminant,
        })
        .collect())
}

/// Run `compute` at doubling precision until the watched quantities of two
/// successive runs agree to [`ESCALATION_TOLERANCE`].
pub(crate) fn escalate<T>(
    opts: &HankelOptions,
    mut compute: impl FnMut(u32) -> Result<T>,
    watch: impl Fn(&T) -> Vec<Scalar>,
) -> Result<T> {
    let mut prec = opts.precision_start.max(64);
    let mut previous = compute(prec)?;
    loop {
        let next_prec = prec.saturating_mul(2);
        if next_prec > opts.precision_ceiling {
            let prev = watch(&previous);
            return Err(Error::Precision {
                ceiling: opts.precision_ceiling,
                previous: prev.first().map(|v| v.to_string()).unwrap_or_default(),
                current: prev.last().map(|v| v.to_string()).unwrap_or_default(),
            });
        }
        let current = compute(next_prec)?;
        let a = watch(&previous);
        let b = watch(&current);
        let worst = a
            .iter()
            .zip(&b)
            .map(|(x, y)| x.rel_diff(y, 64).to_f64())
            .fold(0.0f64, f64::max);
        if worst < ESCALATION_TOLERANCE {
            return Ok(current);
        }
        if next_prec * 2 > opts.precision_ceiling {
            let (x, y) = a
                .iter()
                .zip(&b)
                .max_by(|p, q| p.0.rel_diff(p.1, 64).to_f64().total_cmp(&q.0.rel_diff(q.1, 64).to_f64()))
                .expect("non-empty watch list");
            return Err(Error::Precision {
                ceiling: opts.precision_ceiling,
                previous: x.to_string(),
                current: y.to_string(),
            });
        }
        previous = current;
        prec = next_prec;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitFlag {
    TendsToZero,
    BoundedAwayFromZero,
    DegenerateZero,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VarianceEntry {
    pub n: usize,
    pub variance: Scalar,
    pub path: ComputePath,
    pub closed_form: Option<Scalar>,
    pub abs_residual: Option<Scalar>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VarianceReport {
    pub entries: Vec<VarianceEntry>,
    pub limit_flag: LimitFlag,
    /// Extrapolated `lim var_n` from the last three dyadic indices, when available.
    pub extrapolated_limit: Option<f64>,
}

impl VarianceReport {
    pub fn variances(&self) -> Vec<Scalar> {
        self.entries.iter().map(|e| e.variance.clone()).collect()
    }

    pub fn kind(&self) -> ScalarKind {
        if self.entries.iter().all(|e| e.variance.is_exact()) {
            ScalarKind::Exact
        } else {
            ScalarKind::HighPrecision
        }
    }

    /// CSV with `(n, var_numer, var_denom, path, closed_form, abs_residual)`
    /// for exact reports and `(n, var_decimal, path, closed_form, abs_residual)` otherwise.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let exact = self.kind() == ScalarKind::Exact;
        if exact {
            out.push_str("n,var_numer,var_denom,path,closed_form,abs_residual\n");
        } else {
            out.push_str("n,var_decimal,path,closed_form,abs_residual\n");
        }
        for e in &self.entries {
            let value = match e.variance.as_rational() {
                Some(q) if exact => format!("{},{}", q.numer(), q.denom()),
                _ => e.variance.to_string(),
            };
            let opt = |v: &Option<Scalar>| v.as_ref().map(Scalar::to_string).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.n,
                value,
                e.path.as_str(),
                opt(&e.closed_form),
                opt(&e.abs_residual)
            ));
        }
        out
    }
}

/// `var_n = H_n / G_n` for `n = 0..=n_max` by direct determinants.
pub fn blue_variance_seq(b: &MomentSequence, n_max: usize) -> Result<VarianceReport> {
    blue_variance_seq_with(b, n_max, &HankelOptions::default())
}

pub fn blue_variance_seq_with(
    b: &MomentSequence,
    n_max: usize,
    opts: &HankelOptions,
) -> Result<VarianceReport> {
    let family = b.family().cloned();
    let analytic = match (&opts.path, &family, b.kind()) {
        (PathPreference::Analytic, Some(f @ SpectralFamily::Gaussian { .. }), _)
        | (PathPreference::Analytic, Some(f @ SpectralFamily::SymmetricBeta { .. }), _) => {
            Some(analytic_variances(f, n_max)?)
        }
        _ => None,
    };
    let (values, path) = match analytic {
        Some(v) => v,
        None => {
            let pairs = hankel_sequence(b, n_max, opts)?;
            (pairs.iter().map(HankelPair::variance).collect(), ComputePath::DirectDeterminant)
        }
    };
    let entries = values
        .into_iter()
        .enumerate()
        .map(|(n, variance)| {
            let closed_form = match &family {
                Some(f) if n >= 1 => closed_form_variance(f, n).ok(),
                Some(_) => Some(Scalar::one()),
                None => None,
            };
            let abs_residual = closed_form.as_ref().map(|c| (&variance - c).abs());
            VarianceEntry {
                n,
                variance,
                path,
                closed_form,
                abs_residual,
            }
        })
        .collect::<Vec<_>>();
    let (limit_flag, extrapolated_limit) = classify_limit(&entries);
    Ok(VarianceReport {
        entries,
        limit_flag,
        extrapolated_limit,
    })
}

fn analytic_variances(family: &SpectralFamily, n_max: usize) -> Result<(Vec<Scalar>, ComputePath)> {
    let (h, g_inner, b2, path) = match family {
        SpectralFamily::Gaussian { .. } => (
            hankel_sequence_from_recurrence(&laguerre_recurrence(&Scalar::ratio(-1, 2), n_max), n_max)?,
            hankel_sequence_from_recurrence(
                &laguerre_recurrence(&Scalar::ratio(3, 2), n_max.saturating_sub(1)),
                n_max.saturating_sub(1),
            )?,
            Scalar::ratio(3, 4),
            ComputePath::RecurrenceProduct,
        ),
        SpectralFamily::SymmetricBeta { alpha } => (
            hankel_sequence_from_canonical(&beta_canonical_moments(alpha, n_max)?, n_max)?,
            hankel_sequence_from_canonical(
                &jacobi_canonical_moments(alpha, &Scalar::ratio(3, 2), n_max.saturating_sub(1))?,
                n_max.saturating_sub(1),
            )?,
            beta_second_moment(alpha),
            ComputePath::CanonicalProduct,
        ),
        other => {
            return Err(Error::Unsupported(format!(
                "no product formula for the {} family",
                other.name()
            )))
        }
    };
    let mut scale = Scalar::one();
    let mut out = vec![Scalar::one()];
    for n in 1..=n_max {
        scale = &scale * &b2;
        out.push(&h[n] / &(&scale * &g_inner[n - 1]));
    }
    Ok((out, path))
}

/// `b_1 / b_0` of the half-line image of the symmetric Beta law, `3 / ((2a + 3)(2a + 5))`.
fn beta_second_moment(alpha: &Scalar) -> Scalar {
    let two_a = &Scalar::int(2) * alpha;
    &Scalar::int(3) / &(&(&two_a + &Scalar::int(3)) * &(&two_a + &Scalar::int(5)))
}

/// Limit classification. An exact (or float) zero marks a degenerate
/// sequence. Otherwise, for `n >= 8` and a contracting tail, the limit is
/// extrapolated from `v(n/4), v(n/2), v(n)` under `v = c + a m^{-p}`. A
/// limit below 5% of the last value counts as tending to zero and one above
/// half of it as bounded away from zero. The halving test
/// `v(n) < v(n/2)/2` and a 1% plateau over the last quarter are kept as
/// direct triggers.
fn classify_limit(entries: &[VarianceEntry]) -> (LimitFlag, Option<f64>) {
    if entries.iter().any(|e| e.variance.is_zero()) {
        return (LimitFlag::DegenerateZero, Some(0.0));
    }
    let n_max = entries.len() - 1;
    if n_max < 4 {
        return (LimitFlag::Inconclusive, None);
    }
    let v = |n: usize| entries[n].variance.to_f64();
    let last = v(n_max);
    let quarter = &entries[n_max - n_max / 4..];
    let (lo, hi) = quarter.iter().map(|e| e.variance.to_f64()).fold((f64::INFINITY, 0.0f64), |(l, h), x| {
        (l.min(x), h.max(x))
    });
    let plateau = (hi - lo) / hi < 0.01;
    let halving = last < v(n_max / 2) / 2.0;

    let (v1, v2, v3) = (v(n_max / 4), v(n_max / 2), last);
    let (d1, d2) = (v1 - v2, v2 - v3);
    // only extrapolate a clearly contracting tail
    let limit = (n_max >= 8 && d1 > 0.0 && d2 > 0.0 && d2 < 0.9 * d1).then(|| v3 - d2 * d2 / (d1 - d2));

    if halving || limit.is_some_and(|c| c <= 0.05 * last) {
        (LimitFlag::TendsToZero, limit)
    } else if plateau || limit.is_some_and(|c| c >= 0.5 * last) {
        (LimitFlag::BoundedAwayFromZero, limit)
    } else {
        (LimitFlag::Inconclusive, limit)
    }
}

/// Recurrence coefficients of a measure on the half line.
#[derive(Clone, Debug, PartialEq)]
pub enum RecurrenceCoefficients {
    /// `d_1, d_2, ..., d_{2n}` of
    /// `P_{l+1}(t) = (t - d_{2l} - d_{2l+1}) P_l(t) - d_{2l-1} d_{2l} P_{l-1}(t)`.
    ContinuedFraction(Vec<Scalar>),
    /// Canonical moments `p_1, ..., p_{2n}` of a measure on `[0, 1]`.
    Canonical(Vec<Scalar>),
}

impl RecurrenceCoefficients {
    pub fn values(&self) -> &[Scalar] {
        match self {
            RecurrenceCoefficients::ContinuedFraction(v) | RecurrenceCoefficients::Canonical(v) => v,
        }
    }
}

/// Monic Laguerre recurrence for the weight `y^alpha e^{-y}` (normalised to
/// unit mass): `d_{2k} = k`, `d_{2k-1} = k + alpha`.
pub fn laguerre_recurrence(alpha: &Scalar, n: usize) -> RecurrenceCoefficients {
    let mut d = Vec::with_capacity(2 * n);
    for k in 1..=n as i64 {
        d.push(&Scalar::int(k) + alpha);
        d.push(Scalar::int(k));
    }
    RecurrenceCoefficients::ContinuedFraction(d)
}

/// `H_n = prod_{i=1}^{n} (d_{2i-1} d_{2i})^{n-i+1}` for a unit-mass measure.
pub fn hankel_from_recurrence(d: &RecurrenceCoefficients, n: usize) -> Result<Scalar> {
    Ok(hankel_sequence_from_recurrence(d, n)?.pop().expect("n + 1 entries"))
}

/// `H_0, ..., H_{n_max}` from recurrence coefficients, sharing partial products.
pub fn hankel_sequence_from_recurrence(d: &RecurrenceCoefficients, n_max: usize) -> Result<Vec<Scalar>> {
    let RecurrenceCoefficients::ContinuedFraction(coeffs) = d else {
        return Err(Error::Parameter("expected continued-fraction coefficients".into()));
    };
    if coeffs.len() < 2 * n_max {
        return Err(Error::Length {
            needed: 2 * n_max,
            available: coeffs.len(),
        });
    }
    if let Some((i, c)) = coeffs[..2 * n_max].iter().enumerate().find(|(_, c)| !c.is_positive()) {
        return Err(Error::Domain(format!("recurrence coefficient d_{} = {c} must be > 0", i + 1)));
    }
    Ok(accumulate((1..=n_max).map(|i| &coeffs[2 * i - 2] * &coeffs[2 * i - 1])))
}

/// `H_n = prod_{i<=n} f_i^{n-i+1}`, i.e. `H_n = H_{n-1} prod_{i<=n} f_i`.
fn accumulate(factors: impl Iterator<Item = Scalar>) -> Vec<Scalar> {
    let mut out = vec![Scalar::one()];
    let mut partial = Scalar::one();
    for f in factors {
        partial = &partial * &f;
        let next = out.last().expect("non-empty") * &partial;
        out.push(next);
    }
    out
}

/// Canonical moments of the `Beta(alpha, beta)` law on `[0, 1]` with
/// density proportional to `t^beta (1 - t)^alpha`:
/// `p_{2j} = j / (2j + 1 + alpha + beta)`, `p_{2j-1} = (beta + j) / (2j + alpha + beta)`.
pub fn jacobi_canonical_moments(alpha: &Scalar, beta: &Scalar, n: usize) -> Result<RecurrenceCoefficients> {
    if *alpha <= Scalar::int(-1) || *beta <= Scalar::int(-1) {
        return Err(Error::Parameter(format!(
            "Beta parameters must be > -1, got alpha={alpha}, beta={beta}"
        )));
    }
    let ab = alpha + beta;
    let mut p = Vec::with_capacity(2 * n);
    for j in 1..=n as i64 {
        p.push(&(beta + &Scalar::int(j)) / &(&Scalar::int(2 * j) + &ab));
        p.push(&Scalar::int(j) / &(&Scalar::int(2 * j + 1) + &ab));
    }
    Ok(RecurrenceCoefficients::Canonical(p))
}

/// Canonical moments of the half-line image of the symmetric Beta law,
/// i.e. `Beta(alpha, -1/2)` on `[0, 1]`.
pub fn beta_canonical_moments(alpha: &Scalar, n: usize) -> Result<RecurrenceCoefficients> {
    jacobi_canonical_moments(alpha, &Scalar::ratio(-1, 2), n)
}

/// `H_n = prod_{i=1}^{n} (q_{2i-2} p_{2i-1} q_{2i-1} p_{2i})^{n+1-i}` with
/// `q_0 = 1`, `q_j = 1 - p_j`.
pub fn hankel_from_canonical(p: &RecurrenceCoefficients, n: usize) -> Result<Scalar> {
    Ok(hankel_sequence_from_canonical(p, n)?.pop().expect("n + 1 entries"))
}

/// `H_0, ..., H_{n_max}` from canonical moments, sharing partial products.
pub fn hankel_sequence_from_canonical(p: &RecurrenceCoefficients, n_max: usize) -> Result<Vec<Scalar>> {
    let RecurrenceCoefficients::Canonical(ps) = p else {
        return Err(Error::Parameter("expected canonical moments".into()));
    };
    if ps.len() < 2 * n_max {
        return Err(Error::Length {
            needed: 2 * n_max,
            available: ps.len(),
        });
    }
    if let Some((i, v)) = ps[..2 * n_max]
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.is_positive() && **v < Scalar::one()))
    {
        return Err(Error::Domain(format!("canonical moment p_{} = {v} outside (0,1)", i + 1)));
    }
    let q = |j: usize| if j == 0 { Scalar::one() } else { &Scalar::one() - &ps[j - 1] };
    Ok(accumulate(
        (1..=n_max).map(|i| &(&(&q(2 * i - 2) * &ps[2 * i - 2]) * &q(2 * i - 1)) * &ps[2 * i - 1]),
    ))
}

/// Closed form of `q_{2i-2} p_{2i-1} q_{2i-1} p_{2i}` for the symmetric
/// Beta family:
/// `4 i (i + a) (2i - 1 + 2a) (2i - 1) / ((4i + 1 + 2a) (4i - 1 + 2a)^2 (4i - 3 + 2a))`.
pub fn beta_canonical_factor(alpha: &Scalar, i: usize) -> Scalar {
    if i == 1 {
        // (1 + 2a) cancels between numerator and denominator
        let two_a = &Scalar::int(2) * alpha;
        let num = &Scalar::int(4) * &(&Scalar::one() + alpha);
        let den = &(&two_a + &Scalar::int(5)) * &(&two_a + &Scalar::int(3)).powu(2);
        return &num / &den;
    }
    let i = Scalar::int(i as i64);
    let two_a = &Scalar::int(2) * alpha;
    let two_i = &Scalar::int(2) * &i;
    let four_i = &Scalar::int(4) * &i;
    let num = &(&(&(&Scalar::int(4) * &i) * &(&i + alpha)) * &(&(&two_i - &Scalar::one()) + &two_a))
        * &(&two_i - &Scalar::one());
    let den = &(&(&(&four_i + &Scalar::one()) + &two_a) * &(&(&four_i - &Scalar::one()) + &two_a).powu(2))
        * &(&(&four_i - &Scalar::int(3)) + &two_a);
    &num / &den
}

/// Gaussian `var_n` through Laguerre recurrences:
/// `H_n[L^{(-1/2)}] / ((3/4)^n H_{n-1}[L^{(3/2)}])`.
pub fn gaussian_variance_by_recurrence(n: usize) -> Scalar {
    if n == 0 {
        return Scalar::one();
    }
    let h = hankel_from_recurrence(&laguerre_recurrence(&Scalar::ratio(-1, 2), n), n)
        .expect("positive Laguerre coefficients");
    let g_inner = hankel_from_recurrence(&laguerre_recurrence(&Scalar::ratio(3, 2), n - 1), n - 1)
        .expect("positive Laguerre coefficients");
    let g = &Scalar::ratio(3, 4).powu(n as u32) * &g_inner;
    &h / &g
}

/// Symmetric Beta `var_n` through canonical moments:
/// `H_n[Beta(a, -1/2)] / (b_2^n H_{n-1}[Beta(a, 3/2)])` with
/// `b_2 = 3 / ((2a + 3)(2a + 5))`.
pub fn beta_variance_by_canonical(alpha: &Scalar, n: usize) -> Result<Scalar> {
    if n == 0 {
        return Ok(Scalar::one());
    }
    let h = hankel_from_canonical(&beta_canonical_moments(alpha, n)?, n)?;
    let tilted = jacobi_canonical_moments(alpha, &Scalar::ratio(3, 2), n - 1)?;
    let g_inner = hankel_from_canonical(&tilted, n - 1)?;
    Ok(&h / &(&beta_second_moment(alpha).powu(n as u32) * &g_inner))
}

/// Precision used by the non-telescoping Beta closed form.
pub const CLOSED_FORM_PRECISION: u32 = 512;

/// Closed-form `var_n` for the Gaussian and symmetric Beta families (and
/// atom mixtures of them).
pub fn closed_form_variance(family: &SpectralFamily, n: usize) -> Result<Scalar> {
    closed_form_variance_at(family, n, CLOSED_FORM_PRECISION)
}

pub fn closed_form_variance_at(family: &SpectralFamily, n: usize, prec: u32) -> Result<Scalar> {
    if n == 0 {
        return Ok(Scalar::one());
    }
    let nu = n as u32;
    // (2n)!! / (2n+1)!! = 2^n n! / (2n+1)!!
    let even_over_odd = || {
        let num = Integer::from(Integer::u_pow_u(2, nu)) * factorial(nu);
        Scalar::Exact(Rational::from((num, odd_double_factorial(nu + 1))))
    };
    match family {
        SpectralFamily::Gaussian { .. } => Ok(even_over_odd()),
        SpectralFamily::SymmetricBeta { alpha } => {
            let twice = &Scalar::int(2) * alpha;
            let half_integer = twice.as_rational().is_some_and(|q| *q.denom() == 1);
            if half_integer {
                // sqrt(pi) Gamma(n+1+a) / (2^{2a+1} B(a+1,a+1) Gamma(n+3/2+a))
                // telescopes to prod_{i=1}^{n} (i + a) / (i + a + 1/2)
                let mut ratio = Scalar::one();
                for i in 1..=n as i64 {
                    let num = &Scalar::int(i) + alpha;
                    let den = &Scalar::ratio(2 * i + 1, 2) + alpha;
                    ratio = &ratio * &(&num / &den);
                }
                Ok(&even_over_odd() * &ratio)
            } else {
                let a = alpha.to_float(prec);
                let one = Float::with_val(prec, 1u32);
                let ap1 = Float::with_val(prec, &a + &one);
                let ln_beta = ln_gamma(&ap1) * 2u32
                    - ln_gamma(&Float::with_val(prec, &ap1 * 2u32));
                let two_a_p1 = Float::with_val(prec, &a * 2u32) + 1u32;
                let constant = Float::with_val(prec, rug::float::Constant::Pi).sqrt()
                    / pow2(&two_a_p1)
                    / ln_beta.exp();
                let n_f = Float::with_val(prec, nu);
                let lg1 = ln_gamma(&Float::with_val(prec, &n_f + &ap1));
                let lg2 = ln_gamma(&(Float::with_val(prec, &n_f + &a) + Float::with_val(prec, 1.5)));
                let gamma_ratio = (lg1 - lg2).exp();
                let v = constant * even_over_odd().to_float(prec) * gamma_ratio;
                Ok(Scalar::from_float(v))
            }
        }
        SpectralFamily::AtomMixture { gamma, inner } => {
            let v = closed_form_variance_at(inner, n, prec)?;
            Ok(gamma + &(&(&Scalar::one() - gamma) * &v))
        }
        other => Err(Error::Unsupported(format!(
            "no closed-form variance for the {} family",
            other.name()
        ))),
    }
}

fn ln_gamma(x: &Float) -> Float {
    x.clone().ln_gamma()
}

/// Leading-order asymptotics of `var_n`: Gaussian
/// `sqrt(pi) / (2 sqrt(n)) (1 - 3/(8n) + 25/(128 n^2))`, symmetric Beta
/// `pi / (2^{2a+2} B(a+1, a+1) n)`.
pub fn asymptotic_variance(family: &SpectralFamily, n: usize) -> Result<Scalar> {
    asymptotic_variance_at(family, n, DEFAULT_PRECISION)
}

pub fn asymptotic_variance_at(family: &SpectralFamily, n: usize, prec: u32) -> Result<Scalar> {
    if n == 0 {
        return Err(Error::Parameter("asymptotic variance needs n >= 1".into()));
    }
    let nf = Float::with_val(prec, n as u32);
    let pi = Float::with_val(prec, rug::float::Constant::Pi);
    match family {
        SpectralFamily::Gaussian { .. } => {
            let lead = Float::with_val(prec, pi.sqrt_ref()) / (Float::with_val(prec, nf.sqrt_ref()) * 2u32);
            let inv = Float::with_val(prec, nf.recip_ref());
            let inv2 = Float::with_val(prec, inv.square_ref());
            let bracket = Float::with_val(prec, 1u32) - inv * 3u32 / 8u32 + inv2 * 25u32 / 128u32;
            Ok(Scalar::from_float(lead * bracket))
        }
        SpectralFamily::SymmetricBeta { alpha } => {
            let a = alpha.to_float(prec);
            let ap1 = Float::with_val(prec, &a + 1u32);
            let ln_beta = ln_gamma(&ap1) * 2u32
                - ln_gamma(&Float::with_val(prec, &ap1 * 2u32));
            let exp2 = Float::with_val(prec, &a * 2u32) + 2u32;
            let v = pi / pow2(&exp2) / ln_beta.exp() / nf;
            Ok(Scalar::from_float(v))
        }
        other => Err(Error::Unsupported(format!(
            "no asymptotic variance for the {} family",
            other.name()
        ))),
    }
}

/// `min_a  b_0 - 2 sum a_i b_i + sum a_i a_j b_{i+j}` over `a_1..a_n`, by
/// solving the normal equations `(b_{i+j})_{i,j=1..n} a = (b_i)_{i=1..n}`.
/// Equal to `H_n / G_n` but computed without any determinant.
pub fn polyapprox_oracle(b: &MomentSequence, n: usize) -> Result<Scalar> {
    b.require(2 * n)?;
    let vals = b.values();
    if n == 0 {
        return Ok(vals[0].clone());
    }
    match b.kind() {
        ScalarKind::Exact => {
            let r = |k: usize| vals[k].as_rational().expect("exact").clone();
            let gram: Vec<Vec<Rational>> =
                (1..=n).map(|i| (1..=n).map(|j| r(i + j)).collect()).collect();
            let rhs: Vec<Rational> = (1..=n).map(r).collect();
            let a = solve(gram, rhs.clone()).ok_or_else(singular_gram)?;
            let fit: Rational = a.iter().zip(&rhs).map(|(x, y)| Rational::from(x * y)).sum();
            Ok(Scalar::Exact(r(0) - fit))
        }
        ScalarKind::HighPrecision => {
            let prec = vals
                .iter()
                .filter_map(Scalar::precision)
                .max()
                .unwrap_or(DEFAULT_PRECISION)
                .max(2 * DEFAULT_PRECISION);
            let r = |k: usize| vals[k].to_float(prec);
            let gram: Vec<Vec<Float>> = (1..=n).map(|i| (1..=n).map(|j| r(i + j)).collect()).collect();
            let rhs: Vec<Float> = (1..=n).map(r).collect();
            let a = solve(gram, rhs.clone()).ok_or_else(singular_gram)?;
            let mut v = r(0);
            for (x, y) in a.iter().zip(&rhs) {
                v -= Float::with_val(prec, x * y);
            }
            Ok(Scalar::from_float(v))
        }
    }
}

fn singular_gram() -> Error {
    Error::Degenerate("Gram matrix (b_{i+j})_{i,j>=1} is singular".into())
}

/// Smallest eigenvalue of `(b_{i+j})_{i,j=0..n}` by bisection on the
/// inertia of `C - mu I`, escalating from `bits` until two precisions agree.
pub fn smallest_eigenvalue_diag(b: &MomentSequence, n: usize, bits: u32) -> Result<Scalar> {
    b.require(2 * n)?;
    let opts = HankelOptions {
        precision_start: bits,
        ..HankelOptions::default()
    };
    escalate(&opts, |prec| Ok(smallest_eigenvalue_at(b, n, prec)), |v| vec![v.clone()])
}

fn smallest_eigenvalue_at(b: &MomentSequence, n: usize, prec: u32) -> Scalar {
    let vals: Vec<Float> = b.values()[..=2 * n].iter().map(|v| v.to_float(prec)).collect();
    let size = n + 1;
    let matrix: Vec<Vec<Float>> =
        (0..size).map(|i| (0..size).map(|j| vals[i + j].clone()).collect()).collect();
    let below = |mu: &Float| -> usize {
        let mut nudged = mu.clone();
        for _ in 0..8 {
            let shifted: Vec<Vec<Float>> = matrix
                .iter()
                .enumerate()
                .map(|(i, row)| {
                    let mut r = row.clone();
                    r[i] -= &nudged;
                    r
                })
                .collect();
            if let Some(c) = negative_inertia(shifted) {
                return c;
            }
            nudged *= Float::with_val(prec, 1u32) + Float::with_val(prec, Float::i_exp(1, -(prec as i32) / 2));
        }
        0
    };
    // 0 <= lambda_min <= b_0
    let mut lo = Float::new(prec);
    let mut hi = vals[0].clone();
    let rel = Float::with_val(prec, Float::i_exp(1, -(prec as i32) / 2));
    let abs = Float::with_val(prec, &vals[0] * Float::with_val(prec, Float::i_exp(1, -(prec as i32) + 8)));
    for _ in 0..4 * prec {
        let width = Float::with_val(prec, &hi - &lo);
        if width <= Float::with_val(prec, &hi * &rel) || width <= abs {
            break;
        }
        let mid = Float::with_val(prec, &lo + &hi) / 2u32;
        if below(&mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Scalar::from_float(Float::with_val(prec, &lo + &hi) / 2u32)
}
