//! Dense complex matrix kernel for few-qubit work.
//!
//! Every register in this crate has dimension 16 at most (four qubits), so the
//! representation is a row-major `Vec<Complex64>` and the algorithms are the
//! small-dense classics: direct matrix products, an explicit Kronecker
//! product, and a cyclic complex Jacobi eigensolver for Hermitian matrices.
//! Nothing here allocates beyond the output, and nothing is tuned; at these
//! sizes clarity wins every trade.
//!
//! Index convention: basis index bits read left to right, most significant
//! first, so `kron(a, b)` puts `a` on the high-order part of the index. A
//! four-qubit register ordered (input, 1, 2, 3) therefore has the input qubit
//! in the leftmost position of a ket label and in the leftmost Kronecker
//! factor.

use num_complex::Complex64;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::{tol, Error, Result};

/// Hard cap on either matrix dimension. Four qubits is the largest register
/// any protocol builds.
pub const MAX_DIM: usize = 16;

const JACOBI_MAX_SWEEPS: usize = 64;

/// Dense row-major complex matrix, at most [`MAX_DIM`] in each dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries.
    ///
    /// # Errors
    ///
    /// [`Error::DimensionMismatch`] when the entry count does not equal
    /// `rows * cols`, a dimension is zero, or a dimension exceeds [`MAX_DIM`].
    /// [`Error::NonFinite`] when any entry is NaN or infinite.
    pub fn new(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 || rows > MAX_DIM || cols > MAX_DIM {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} outside the supported 1..={MAX_DIM} envelope"
            )));
        }
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        Ok(Self { rows, cols, entries })
    }

    /// Builds a matrix by evaluating `f(row, col)` at every position.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Result<Self> {
        let mut entries = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                entries.push(f(r, c));
            }
        }
        Self::new(rows, cols, entries)
    }

    /// Zero matrix of the given shape.
    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![Complex64::new(0.0, 0.0); rows * cols])
    }

    /// Identity matrix of dimension `n`.
    pub fn identity(n: usize) -> Result<Self> {
        Self::from_fn(n, n, |r, c| {
            if r == c {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Entry at `(row, col)`. Panics on out-of-range indices, as slices do.
    pub fn at(&self, row: usize, col: usize) -> Complex64 {
        assert!(row < self.rows && col < self.cols, "index out of range");
        self.entries[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        assert!(row < self.rows && col < self.cols, "index out of range");
        self.entries[row * self.cols + col] = value;
    }

    /// Row-major entry slice.
    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// Matrix product `self * rhs`.
    ///
    /// # Errors
    ///
    /// [`Error::DimensionMismatch`] when the inner dimensions differ.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.rows * rhs.cols];
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.entries[i * self.cols + k];
                if aik == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[i * rhs.cols + j] += aik * rhs.entries[k * rhs.cols + j];
                }
            }
        }
        Self::new(self.rows, rhs.cols, out)
    }

    /// Applies the matrix to a column vector.
    pub fn apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix applied to a length-{} vector",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.rows];
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.entries[i * self.cols..(i + 1) * self.cols];
            *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
        Ok(out)
    }

    /// Kronecker product with `self` as the high-order (leftmost) factor.
    ///
    /// # Errors
    ///
    /// [`Error::DimensionMismatch`] when the product leaves the supported
    /// envelope.
    pub fn kron(&self, rhs: &Self) -> Result<Self> {
        let rows = self.rows * rhs.rows;
        let cols = self.cols * rhs.cols;
        Self::from_fn(rows, cols, |r, c| {
            let (ra, rb) = (r / rhs.rows, r % rhs.rows);
            let (ca, cb) = (c / rhs.cols, c % rhs.cols);
            self.at(ra, ca) * rhs.at(rb, cb)
        })
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        let mut entries = Vec::with_capacity(self.entries.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                entries.push(self.at(r, c).conj());
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            entries,
        }
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, |a, b| a - b)
    }

    fn zip_with(&self, rhs: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let entries = self
            .entries
            .iter()
            .zip(&rhs.entries)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::new(self.rows, self.cols, entries)
    }

    pub fn scale(&self, k: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|&z| k * z).collect(),
        }
    }

    /// Trace. Requires a square matrix.
    pub fn trace(&self) -> Result<Complex64> {
        self.require_square("trace")?;
        Ok((0..self.rows).map(|i| self.at(i, i)).sum())
    }

    /// Largest entrywise absolute difference from `rhs`.
    pub fn max_abs_diff(&self, rhs: &Self) -> Result<f64> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(self
            .entries
            .iter()
            .zip(&rhs.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Largest entrywise deviation from `A = A^dag`. Requires a square matrix.
    pub fn hermiticity_defect(&self) -> Result<f64> {
        self.require_square("hermiticity check")?;
        let mut worst: f64 = 0.0;
        for r in 0..self.rows {
            for c in r..self.cols {
                worst = worst.max((self.at(r, c) - self.at(c, r).conj()).norm());
            }
        }
        Ok(worst)
    }

    /// Largest entrywise deviation of `A^dag A` from the identity.
    pub fn unitarity_defect(&self) -> Result<f64> {
        self.require_square("unitarity check")?;
        let gram = self.dagger().matmul(self)?;
        gram.max_abs_diff(&Self::identity(self.rows)?)
    }

    fn require_square(&self, what: &str) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{what} requires a square matrix, got {}x{}",
                self.rows, self.cols
            )))
        }
    }

    /// Traces out every subsystem not listed in `keep`.
    ///
    /// `dims` factors the matrix dimension into subsystem dimensions, leftmost
    /// factor most significant (matching [`ComplexMatrix::kron`]). `keep`
    /// lists subsystem positions to retain, strictly increasing; the output is
    /// ordered by the same positions. An empty `keep` yields the 1x1 matrix
    /// holding the trace.
    ///
    /// # Errors
    ///
    /// [`Error::DimensionMismatch`] when `dims` does not factor the matrix
    /// dimension, or `keep` is not a strictly increasing list of valid
    /// positions.
    pub fn partial_trace(&self, dims: &[usize], keep: &[usize]) -> Result<Self> {
        self.require_square("partial trace")?;
        let total: usize = dims.iter().product();
        if dims.is_empty() || dims.contains(&0) || total != self.rows {
            return Err(Error::DimensionMismatch(format!(
                "subsystem dims {dims:?} do not factor dimension {}",
                self.rows
            )));
        }
        if keep.windows(2).any(|w| w[0] >= w[1]) || keep.iter().any(|&k| k >= dims.len()) {
            return Err(Error::DimensionMismatch(format!(
                "keep list {keep:?} is not strictly increasing within 0..{}",
                dims.len()
            )));
        }

        // stride[s]: index step of one unit in subsystem s.
        let mut stride = vec![1usize; dims.len()];
        for s in (0..dims.len().saturating_sub(1)).rev() {
            stride[s] = stride[s + 1] * dims[s + 1];
        }
        let traced: Vec<usize> = (0..dims.len()).filter(|s| !keep.contains(s)).collect();
        let dim_keep: usize = keep.iter().map(|&s| dims[s]).product();
        let dim_traced: usize = traced.iter().map(|&s| dims[s]).product();

        // Decodes a flat index over the listed subsystems into a full-matrix
        // offset, leftmost listed subsystem most significant.
        let offset = |subsystems: &[usize], mut flat: usize| -> usize {
            let mut off = 0;
            for &s in subsystems.iter().rev() {
                off += (flat % dims[s]) * stride[s];
                flat /= dims[s];
            }
            off
        };

        let mut out = Self::zeros(dim_keep.max(1), dim_keep.max(1))?;
        for i in 0..dim_keep {
            let oi = offset(keep, i);
            for j in 0..dim_keep {
                let oj = offset(keep, j);
                let mut acc = Complex64::new(0.0, 0.0);
                for t in 0..dim_traced {
                    let ot = offset(&traced, t);
                    acc += self.at_flat(oi + ot, oj + ot);
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }

    fn at_flat(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.cols + col]
    }

    /// Eigenvalues of a Hermitian matrix, ascending.
    ///
    /// Dimension 1 and 2 are solved in closed form; larger matrices go through
    /// a cyclic complex Jacobi iteration, which at dimension 16 converges in a
    /// handful of sweeps.
    ///
    /// # Errors
    ///
    /// [`Error::NotHermitian`] when the matrix deviates from its conjugate
    /// transpose by more than [`tol::HERMITICITY`] in any entry, and
    /// [`Error::DimensionMismatch`] for non-square input.
    pub fn eig_hermitian(&self) -> Result<Vec<f64>> {
        let defect = self.hermiticity_defect()?;
        if defect > tol::HERMITICITY {
            return Err(Error::NotHermitian { deviation: defect });
        }
        let n = self.rows;
        if n == 1 {
            return Ok(vec![self.at(0, 0).re]);
        }
        if n == 2 {
            let a = self.at(0, 0).re;
            let d = self.at(1, 1).re;
            let mid = 0.5 * (a + d);
            let radius = (0.25 * (a - d) * (a - d) + self.at(0, 1).norm_sqr()).sqrt();
            return Ok(vec![mid - radius, mid + radius]);
        }

        let mut a = self.clone();
        // Work on the exactly Hermitian part so rounding in the input cannot
        // feed the iteration a small anti-Hermitian component.
        for r in 0..n {
            a.set(r, r, Complex64::new(a.at(r, r).re, 0.0));
            for c in (r + 1)..n {
                let avg = 0.5 * (a.at(r, c) + a.at(c, r).conj());
                a.set(r, c, avg);
                a.set(c, r, avg.conj());
            }
        }

        let scale = a
            .entries
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
            .max(1.0);
        let stop = 1e-15 * scale;

        for _ in 0..JACOBI_MAX_SWEEPS {
            let mut off: f64 = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off = off.max(a.at(p, q).norm());
                }
            }
            if off <= stop {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    jacobi_rotate(&mut a, p, q);
                }
            }
        }

        let mut eigs: Vec<f64> = (0..n).map(|i| a.at(i, i).re).collect();
        eigs.sort_by(|x, y| x.partial_cmp(y).expect("eigenvalues are finite"));
        Ok(eigs)
    }

    /// Inverse of a 2x2 matrix by the adjugate formula.
    ///
    /// # Errors
    ///
    /// [`Error::NotInvertible`] when `|det|` falls below
    /// [`tol::SINGULARITY`], and [`Error::DimensionMismatch`] for any other
    /// shape.
    pub fn inverse_2x2(&self) -> Result<Self> {
        if self.rows != 2 || self.cols != 2 {
            return Err(Error::DimensionMismatch(format!(
                "inverse_2x2 requires 2x2, got {}x{}",
                self.rows, self.cols
            )));
        }
        let det = self.at(0, 0) * self.at(1, 1) - self.at(0, 1) * self.at(1, 0);
        if det.norm() < tol::SINGULARITY {
            return Err(Error::NotInvertible {
                determinant: det.norm(),
            });
        }
        let inv_det = det.inv();
        Self::new(
            2,
            2,
            vec![
                self.at(1, 1) * inv_det,
                -self.at(0, 1) * inv_det,
                -self.at(1, 0) * inv_det,
                self.at(0, 0) * inv_det,
            ],
        )
    }
}

/// One complex Jacobi rotation zeroing the `(p, q)` entry of a Hermitian
/// matrix in place. The phase of the entry is absorbed first so the remaining
/// 2x2 problem is real symmetric.
fn jacobi_rotate(a: &mut ComplexMatrix, p: usize, q: usize) {
    let apq = a.at(p, q);
    let mag = apq.norm();
    if mag == 0.0 {
        return;
    }
    let phase = apq / mag;
    let app = a.at(p, p).re;
    let aqq = a.at(q, q).re;

    let tau = (aqq - app) / (2.0 * mag);
    let t = if tau == 0.0 {
        1.0
    } else {
        tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    // Column rotation J: J[p][p] = c, J[p][q] = s,
    //                    J[q][p] = -s e^{-i phi}, J[q][q] = c e^{-i phi}.
    let jqp = -s * phase.conj();
    let jqq = c * phase.conj();

    let n = a.rows();
    for k in 0..n {
        let akp = a.at(k, p);
        let akq = a.at(k, q);
        a.set(k, p, akp * c + akq * jqp);
        a.set(k, q, akp * s + akq * jqq);
    }
    for k in 0..n {
        let apk = a.at(p, k);
        let aqk = a.at(q, k);
        a.set(p, k, apk * c + aqk * jqp.conj());
        a.set(q, k, apk * s + aqk * jqq.conj());
    }
    // The rotated entries are zero and the diagonal real by construction;
    // write that down exactly to keep rounding out of later pivots.
    a.set(p, q, Complex64::new(0.0, 0.0));
    a.set(q, p, Complex64::new(0.0, 0.0));
    a.set(p, p, Complex64::new(a.at(p, p).re, 0.0));
    a.set(q, q, Complex64::new(a.at(q, q).re, 0.0));
}

impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let entries: Vec<[f64; 2]> = self.entries.iter().map(|z| [z.re, z.im]).collect();
        let mut s = serializer.serialize_struct("ComplexMatrix", 3)?;
        s.serialize_field("rows", &self.rows)?;
        s.serialize_field("cols", &self.cols)?;
        s.serialize_field("entries", &entries)?;
        s.end()
    }
}
