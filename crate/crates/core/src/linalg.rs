//! Small dense and banded complex linear algebra used throughout the crate.
//!
//! Everything here is sized for the walk: 2×2 coin and transfer matrices, and
//! banded systems whose half-bandwidths are at most a few entries.

use std::ops::{Index, IndexMut, Mul};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// A 2×2 complex matrix stored row-major.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub entries: [[C64; 2]; 2],
}

impl Mat2 {
    pub const fn new(a11: C64, a12: C64, a21: C64, a22: C64) -> Self {
        Self { entries: [[a11, a12], [a21, a22]] }
    }

    pub const fn identity() -> Self {
        Self::new(ONE, ZERO, ZERO, ONE)
    }

    pub fn from_real(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Self::new(a11.into(), a12.into(), a21.into(), a22.into())
    }

    pub fn diag(d1: C64, d2: C64) -> Self {
        Self::new(d1, ZERO, ZERO, d2)
    }

    /// The rotation `[[cos γ, −sin γ], [sin γ, cos γ]]`.
    pub fn rotation(gamma: f64) -> Self {
        let (s, c) = gamma.sin_cos();
        Self::from_real(c, -s, s, c)
    }

    pub fn det(&self) -> C64 {
        let [[a, b], [c, d]] = self.entries;
        a * d - b * c
    }

    pub fn adjoint(&self) -> Self {
        let [[a, b], [c, d]] = self.entries;
        Self::new(a.conj(), c.conj(), b.conj(), d.conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        let [[a, b], [c, d]] = self.entries;
        Self::new(a * s, b * s, c * s, d * s)
    }

    /// Inverse via the adjugate. Fails on a singular matrix.
    pub fn inverse(&self) -> Result<Self> {
        let det = self.det();
        if det.norm() == 0.0 {
            return Err(Error::invalid("singular 2x2 matrix has no inverse"));
        }
        let [[a, b], [c, d]] = self.entries;
        Ok(Self::new(d, -b, -c, a).scale(det.inv()))
    }

    /// `adj(A)`, the inverse when `det A = 1`.
    pub fn adjugate(&self) -> Self {
        let [[a, b], [c, d]] = self.entries;
        Self::new(d, -b, -c, a)
    }

    pub fn frobenius_sqr(&self) -> f64 {
        self.entries.iter().flatten().map(|e| e.norm_sqr()).sum()
    }

    /// Largest singular value, from the closed form
    /// `σ² = (‖A‖_F² ± sqrt(‖A‖_F⁴ − 4|det A|²)) / 2`.
    pub fn operator_norm(&self) -> f64 {
        let (hi, _) = self.singular_values();
        hi
    }

    /// `(σ_max, σ_min)` in closed form.
    pub fn singular_values(&self) -> (f64, f64) {
        let f = self.frobenius_sqr();
        let d = self.det().norm();
        let disc = (f * f - 4.0 * d * d).max(0.0).sqrt();
        let hi_sqr = 0.5 * (f + disc);
        let hi = hi_sqr.sqrt();
        // σ_min = |det| / σ_max avoids cancellation in (f − disc)
        let lo = if hi > 0.0 { d / hi } else { 0.0 };
        (hi, lo)
    }

    pub fn apply(&self, v: [C64; 2]) -> [C64; 2] {
        let [[a, b], [c, d]] = self.entries;
        [a * v[0] + b * v[1], c * v[0] + d * v[1]]
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.entries
            .iter()
            .flatten()
            .zip(other.entries.iter().flatten())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    /// Largest entrywise modulus of `A*A − I`.
    pub fn unitarity_defect(&self) -> f64 {
        (self.adjoint() * *self).max_abs_diff(&Self::identity())
    }
}

impl Default for Mat2 {
    fn default() -> Self {
        Self::identity()
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, rhs: Mat2) -> Mat2 {
        let [[a, b], [c, d]] = self.entries;
        let [[e, f], [g, h]] = rhs.entries;
        Mat2::new(a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h)
    }
}

impl Index<(usize, usize)> for Mat2 {
    type Output = C64;

    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.entries[r][c]
    }
}

impl IndexMut<(usize, usize)> for Mat2 {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.entries[r][c]
    }
}

/// Real 2×2 matrix, row-major. Used for hot loops where the complex
/// matrices are unitarily equivalent to real ones.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct RealMat2(pub [f64; 4]);

impl RealMat2 {
    pub const IDENTITY: RealMat2 = RealMat2([1.0, 0.0, 0.0, 1.0]);

    #[inline(always)]
    pub fn mul(&self, rhs: &RealMat2) -> RealMat2 {
        let [a, b, c, d] = self.0;
        let [e, f, g, h] = rhs.0;
        RealMat2([a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h])
    }

    #[inline(always)]
    pub fn frobenius_sqr(&self) -> f64 {
        let [a, b, c, d] = self.0;
        a * a + b * b + c * c + d * d
    }
}

/// Operator norm of a 2×2 matrix with `|det| = 1`, given `‖A‖_F²`.
#[inline]
pub(crate) fn unimodular_norm_from_frobenius(f: f64) -> f64 {
    (0.5 * (f + (f * f - 4.0).max(0.0).sqrt())).sqrt()
}

/// Square banded matrix with `kl` sub- and `ku` super-diagonals, stored in the
/// LAPACK `gbtrf` layout: `2·kl + ku + 1` rows per column, the extra `kl`
/// rows on top receiving fill-in from row interchanges.
#[derive(Clone, Debug)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    // column-major, column j occupies ab[j*ldab..(j+1)*ldab]
    ab: Vec<C64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        Self { n, kl, ku, ldab, ab: vec![ZERO; ldab * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && i + self.ku >= j && j + self.kl >= i
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        // row kl + ku + i − j of column j
        j * self.ldab + self.kl + self.ku + i - j
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        if self.in_band(i, j) {
            self.ab[self.slot(i, j)]
        } else {
            ZERO
        }
    }

    /// Sets entry `(i, j)`. Panics outside the declared band.
    pub fn set(&mut self, i: usize, j: usize, value: C64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band");
        let s = self.slot(i, j);
        self.ab[s] = value;
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![ZERO; self.n];
        for (j, xj) in x.iter().enumerate() {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for (i, yi) in y.iter_mut().enumerate().take(hi + 1).skip(lo) {
                *yi += self.ab[self.slot(i, j)] * xj;
            }
        }
        y
    }

    /// LU factorization with partial pivoting, consuming the matrix.
    pub fn factor(mut self) -> Result<BandedLu> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let kv = kl + ku;
        let mut pivots = vec![0usize; n];
        for j in 0..n {
            let last = (j + kl).min(n.saturating_sub(1));
            // pivot search in column j, rows j..=last
            let mut p = j;
            let mut best = self.ab[self.slot(j, j)].norm();
            for i in j + 1..=last {
                let v = self.ab[self.slot(i, j)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            pivots[j] = p;
            if best == 0.0 {
                return Err(Error::IllPosed(format!("banded matrix singular at column {j}")));
            }
            let ucol_end = (j + kv).min(n - 1);
            if p != j {
                for c in j..=ucol_end {
                    let (sp, sj) = (self.slot(p, c), self.slot(j, c));
                    self.ab.swap(sp, sj);
                }
            }
            let inv = self.ab[self.slot(j, j)].inv();
            for i in j + 1..=last {
                let s = self.slot(i, j);
                self.ab[s] *= inv;
            }
            for c in j + 1..=ucol_end {
                let u = self.ab[self.slot(j, c)];
                if u == ZERO {
                    continue;
                }
                for i in j + 1..=last {
                    let l = self.ab[self.slot(i, j)];
                    let s = self.slot(i, c);
                    self.ab[s] -= l * u;
                }
            }
        }
        Ok(BandedLu { lu: self, pivots })
    }
}

/// Factorized banded matrix ready for repeated solves.
#[derive(Clone, Debug)]
pub struct BandedLu {
    lu: BandedMatrix,
    pivots: Vec<usize>,
}

impl BandedLu {
    pub fn solve(&self, rhs: &[C64]) -> Vec<C64> {
        let a = &self.lu;
        let (n, kl) = (a.n, a.kl);
        let kv = a.kl + a.ku;
        assert_eq!(rhs.len(), n);
        let mut x = rhs.to_vec();
        for j in 0..n {
            let p = self.pivots[j];
            if p != j {
                x.swap(p, j);
            }
            let xj = x[j];
            if xj != ZERO {
                for i in j + 1..=(j + kl).min(n - 1) {
                    x[i] -= a.ab[a.slot(i, j)] * xj;
                }
            }
        }
        for j in (0..n).rev() {
            x[j] /= a.ab[a.slot(j, j)];
            let xj = x[j];
            for i in j.saturating_sub(kv)..j {
                x[i] -= a.ab[a.slot(i, j)] * xj;
            }
        }
        x
    }
}

/// Pairwise (cascade) summation. Result depends only on the input order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Composite trapezoidal rule on `[a, b]` for samples on `nodes + 1`
/// equispaced points including both endpoints.
pub fn trapezoid(samples: &[f64], a: f64, b: f64) -> f64 {
    match samples.len() {
        0 => 0.0,
        1 => 0.0,
        k => {
            let h = (b - a) / (k - 1) as f64;
            let mut weighted = samples.to_vec();
            weighted[0] *= 0.5;
            weighted[k - 1] *= 0.5;
            h * pairwise_sum(&weighted)
        }
    }
}
