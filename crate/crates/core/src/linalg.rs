//! Dense linear algebra over exact rationals, big integers and MPFR floats.

use std::cmp::Ordering;

use rug::{Float, Integer, Rational};

/// Field operations needed by the generic elimination routines.
pub(crate) trait Field: Clone {
    fn zero_like(&self) -> Self;
    fn is_zero(&self) -> bool;
    /// `|self| > |other|`
    fn abs_gt(&self, other: &Self) -> bool;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
}

impl Field for Rational {
    fn zero_like(&self) -> Self {
        Rational::new()
    }
    fn is_zero(&self) -> bool {
        self.cmp0() == Ordering::Equal
    }
    fn abs_gt(&self, other: &Self) -> bool {
        self.cmp_abs(other) == Ordering::Greater
    }
    fn sub(&self, o: &Self) -> Self {
        Rational::from(self - o)
    }
    fn mul(&self, o: &Self) -> Self {
        Rational::from(self * o)
    }
    fn div(&self, o: &Self) -> Self {
        Rational::from(self / o)
    }
}

impl Field for Float {
    fn zero_like(&self) -> Self {
        Float::new(self.prec())
    }
    fn is_zero(&self) -> bool {
        Float::is_zero(self)
    }
    fn abs_gt(&self, other: &Self) -> bool {
        self.cmp_abs(other) == Some(Ordering::Greater)
    }
    fn sub(&self, o: &Self) -> Self {
        Float::with_val(self.prec(), self - o)
    }
    fn mul(&self, o: &Self) -> Self {
        Float::with_val(self.prec(), self * o)
    }
    fn div(&self, o: &Self) -> Self {
        Float::with_val(self.prec(), self / o)
    }
}

/// Solve `A x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when a pivot column is exactly zero.
pub(crate) fn solve<T: Field>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    for k in 0..n {
        let mut p = k;
        for i in k + 1..n {
            if a[i][k].abs_gt(&a[p][k]) {
                p = i;
            }
        }
        if a[p][k].is_zero() {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            if a[i][k].is_zero() {
                continue;
            }
            let factor = a[i][k].div(&a[k][k]);
            for j in k..n {
                let t = factor.mul(&a[k][j]);
                a[i][j] = a[i][j].sub(&t);
            }
            let t = factor.mul(&b[k]);
            b[i] = b[i].sub(&t);
        }
    }
    let mut x: Vec<T> = b.clone();
    for k in (0..n).rev() {
        let mut acc = b[k].clone();
        for j in k + 1..n {
            acc = acc.sub(&a[k][j].mul(&x[j]));
        }
        x[k] = acc.div(&a[k][k]);
    }
    Some(x)
}

/// Determinant by elimination with partial pivoting.
pub(crate) fn determinant<T: Field>(mut a: Vec<Vec<T>>) -> T {
    let n = a.len();
    let mut det: Option<T> = None;
    let mut negate = false;
    for k in 0..n {
        let mut p = k;
        for i in k + 1..n {
            if a[i][k].abs_gt(&a[p][k]) {
                p = i;
            }
        }
        if a[p][k].is_zero() {
            return a[0][0].zero_like();
        }
        if p != k {
            a.swap(k, p);
            negate = !negate;
        }
        for i in k + 1..n {
            let factor = a[i][k].div(&a[k][k]);
            for j in k..n {
                let t = factor.mul(&a[k][j]);
                a[i][j] = a[i][j].sub(&t);
            }
        }
        det = Some(match det {
            None => a[k][k].clone(),
            Some(d) => d.mul(&a[k][k]),
        });
    }
    let d = det.expect("non-empty matrix");
    if negate {
        d.zero_like().sub(&d)
    } else {
        d
    }
}

/// Leading principal minors of an integer matrix by fraction-free (Bareiss)
/// elimination without pivoting. Entry `k` is the minor of order `k + 1`.
///
/// Stops early when a pivot vanishes; the returned vector is then shorter
/// than the matrix.
pub(crate) fn bareiss_leading_minors(mut m: Vec<Vec<Integer>>) -> Vec<Integer> {
    let n = m.len();
    let mut minors = Vec::with_capacity(n);
    if n == 0 {
        return minors;
    }
    minors.push(m[0][0].clone());
    let mut prev = Integer::from(1);
    for k in 0..n - 1 {
        if m[k][k].cmp0() == Ordering::Equal {
            break;
        }
        let (top, rest) = m.split_at_mut(k + 1);
        let pivot_row = &top[k];
        let pivot = &pivot_row[k];
        for row in rest.iter_mut() {
            let lead = row[k].clone();
            for j in k + 1..n {
                let mut v = Integer::from(&row[j] * pivot);
                v -= Integer::from(&lead * &pivot_row[j]);
                v.div_exact_mut(&prev);
                row[j] = v;
            }
        }
        prev = m[k][k].clone();
        minors.push(m[k + 1][k + 1].clone());
    }
    minors
}

/// Determinant of an integer matrix by Bareiss elimination with row pivoting.
pub(crate) fn bareiss_determinant(mut m: Vec<Vec<Integer>>) -> Integer {
    let n = m.len();
    if n == 0 {
        return Integer::from(1);
    }
    let mut prev = Integer::from(1);
    let mut negate = false;
    for k in 0..n - 1 {
        if m[k][k].cmp0() == Ordering::Equal {
            match (k + 1..n).find(|&i| m[i][k].cmp0() != Ordering::Equal) {
                Some(i) => {
                    m.swap(k, i);
                    negate = !negate;
                }
                None => return Integer::new(),
            }
        }
        let (top, rest) = m.split_at_mut(k + 1);
        let pivot_row = &top[k];
        let pivot = &pivot_row[k];
        for row in rest.iter_mut() {
            let lead = row[k].clone();
            for j in k + 1..n {
                let mut v = Integer::from(&row[j] * pivot);
                v -= Integer::from(&lead * &pivot_row[j]);
                v.div_exact_mut(&prev);
                row[j] = v;
            }
        }
        prev = m[k][k].clone();
    }
    let d = m[n - 1][n - 1].clone();
    if negate {
        -d
    } else {
        d
    }
}

/// Clear denominators of a rational matrix: returns `(D, D * A)` with `D`
/// the lcm of all denominators.
pub(crate) fn clear_denominators(a: &[Vec<Rational>]) -> (Integer, Vec<Vec<Integer>>) {
    let mut lcm = Integer::from(1);
    for row in a {
        for v in row {
            lcm.lcm_mut(v.denom());
        }
    }
    let m = a
        .iter()
        .map(|row| {
            row.iter()
                .map(|v| Integer::from(v.numer() * Integer::from(&lcm / v.denom())))
                .collect()
        })
        .collect();
    (lcm, m)
}

/// Pivots of LU elimination without pivoting on a float matrix; the
/// leading minor of order `k + 1` is the product of the first `k + 1` pivots.
/// Stops at the first zero pivot.
pub(crate) fn float_pivots(mut a: Vec<Vec<Float>>) -> Vec<Float> {
    let n = a.len();
    let mut pivots = Vec::with_capacity(n);
    for k in 0..n {
        let p = a[k][k].clone();
        if p.is_zero() {
            break;
        }
        for i in k + 1..n {
            let factor = a[i][k].div(&p);
            for j in k + 1..n {
                let t = factor.mul(&a[k][j]);
                a[i][j] = a[i][j].sub(&t);
            }
        }
        pivots.push(p);
    }
    pivots
}

/// Number of negative pivots in the symmetric elimination of `A`, which by
/// Sylvester's law of inertia is the number of negative eigenvalues.
/// `None` if a pivot is exactly zero.
pub(crate) fn negative_inertia(mut a: Vec<Vec<Float>>) -> Option<usize> {
    let n = a.len();
    let mut count = 0;
    for k in 0..n {
        let p = a[k][k].clone();
        if p.is_zero() {
            return None;
        }
        if p.is_sign_negative() {
            count += 1;
        }
        for i in k + 1..n {
            let factor = a[i][k].div(&p);
            for j in k + 1..n {
                let t = factor.mul(&a[k][j]);
                a[i][j] = a[i][j].sub(&t);
            }
        }
    }
    Some(count)
}

/// Lower-triangular Cholesky factor `A = L L^T` of a float matrix.
#[derive(Clone, Debug)]
pub(crate) struct Cholesky {
    l: Vec<Vec<Float>>,
    prec: u32,
}

impl Cholesky {
    /// Fails (returns `None`) when a pivot is not safely positive at this
    /// precision, i.e. below `2^(margin - prec)` times the largest diagonal.
    pub(crate) fn factor(a: &[Vec<Float>], prec: u32, margin: i32) -> Option<Cholesky> {
        let n = a.len();
        let diag_max = a
            .iter()
            .enumerate()
            .map(|(i, r)| Float::with_val(prec, r[i].abs_ref()))
            .fold(Float::new(prec), |m, v| if v > m { v } else { m });
        let floor = diag_max * Float::with_val(prec, Float::i_exp(1, margin - prec as i32));
        let mut l = vec![vec![Float::new(prec); n]; n];
        for j in 0..n {
            let mut d = Float::with_val(prec, &a[j][j]);
            for k in 0..j {
                d -= Float::with_val(prec, l[j][k].square_ref());
            }
            if d <= floor {
                return None;
            }
            let ljj = d.sqrt();
            for i in j + 1..n {
                let mut s = Float::with_val(prec, &a[i][j]);
                for k in 0..j {
                    s -= Float::with_val(prec, &l[i][k] * &l[j][k]);
                }
                l[i][j] = s / &ljj;
            }
            l[j][j] = ljj;
        }
        Some(Cholesky { l, prec })
    }

    pub(crate) fn dim(&self) -> usize {
        self.l.len()
    }

    /// Solve `L y = b`.
    pub(crate) fn forward(&self, b: &[Float]) -> Vec<Float> {
        let n = self.dim();
        let mut y: Vec<Float> = Vec::with_capacity(n);
        for i in 0..n {
            let mut s = Float::with_val(self.prec, &b[i]);
            for (k, yk) in y.iter().enumerate() {
                s -= Float::with_val(self.prec, &self.l[i][k] * yk);
            }
            y.push(s / &self.l[i][i]);
        }
        y
    }

    /// Solve `A x = b`.
    pub(crate) fn solve(&self, b: &[Float]) -> Vec<Float> {
        let n = self.dim();
        let y = self.forward(b);
        let mut x = vec![Float::new(self.prec); n];
        for i in (0..n).rev() {
            let mut s = y[i].clone();
            for k in i + 1..n {
                s -= Float::with_val(self.prec, &self.l[k][i] * &x[k]);
            }
            x[i] = s / &self.l[i][i];
        }
        x
    }

    /// `log det A`.
    pub(crate) fn log_det(&self) -> Float {
        let mut acc = Float::new(self.prec);
        for (i, row) in self.l.iter().enumerate() {
            acc += Float::with_val(self.prec, row[i].ln_ref());
        }
        acc * 2u32
    }

    /// `(max L_ii / min L_ii)^2`, a cheap lower bound on the 2-norm condition number.
    pub(crate) fn condition_estimate(&self) -> Float {
        let diag: Vec<&Float> = self.l.iter().enumerate().map(|(i, r)| &r[i]).collect();
        let max = diag.iter().fold(Float::new(self.prec), |m, v| if **v > m { (*v).clone() } else { m });
        let min = diag
            .iter()
            .fold(None::<Float>, |m, v| match m {
                Some(m) if m <= **v => Some(m),
                _ => Some((*v).clone()),
            })
            .unwrap_or_else(|| Float::with_val(self.prec, 1u32));
        let r = max / min;
        Float::with_val(self.prec, r.square_ref())
    }
}
