//! Dense kernels shared by the pipeline.
//!
//! Two families live here:
//!
//! - [`matmul`] is an order-preserving product: every output entry is the
//!   left-to-right sum `((0 + a0*b0) + a1*b1) + ...` with separate multiply
//!   and add, exactly as a textbook triple loop computes it. Blocking and
//!   vectorization only change which entries are computed together, never the
//!   order of additions inside one entry, so results are bit-identical to the
//!   naive loop and independent of the thread count.
//! - Symmetric positive-definite helpers. [`SpdFactor`] and [`gram`] are
//!   backed by `faer` for large matrices; [`cholesky_lower`] is a plain
//!   row-oriented factorization used where an independent small-matrix route
//!   is wanted (oracles, the ridge learners).

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::llt::factor::{cholesky_in_place, cholesky_in_place_scratch};
use faer::linalg::matmul::triangular::{self, BlockStructure};
use faer::linalg::triangular_inverse::invert_lower_triangular;
use faer::{Accum, Mat, MatRef, Par};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};

const MR: usize = 4;
const NR: usize = 8;
const KC: usize = 256;
const NC: usize = 1024;
const ROWS_PER_TASK: usize = 64;

/// Order-preserving matrix product `a · b`.
///
/// Panics if the inner dimensions differ.
pub fn matmul(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    assert_eq!(a.ncols(), b.nrows(), "matmul: inner dimensions differ");
    let (m, k) = a.dim();
    let n = b.ncols();
    let mut c = Array2::<f64>::zeros((m, n));
    if m == 0 || n == 0 || k == 0 {
        return c;
    }
    let a = a.as_standard_layout();
    let b = b.as_standard_layout();
    let a = a.as_slice().expect("standard layout");
    let b = b.as_slice().expect("standard layout");
    let out = c.as_slice_mut().expect("fresh array is contiguous");
    out.par_chunks_mut(ROWS_PER_TASK * n)
        .enumerate()
        .for_each(|(task, chunk)| {
            let row0 = task * ROWS_PER_TASK;
            let rows = chunk.len() / n;
            block_product(&a[row0 * k..(row0 + rows) * k], b, chunk, rows, k, n);
        });
    c
}

fn block_product(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    #[cfg(target_arch = "x86_64")]
    if std::is_x86_feature_detected!("avx2") {
        // SAFETY: the CPU supports AVX2, checked above.
        unsafe { block_product_avx2(a, b, c, m, k, n) };
        return;
    }
    block_product_generic(a, b, c, m, k, n);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn block_product_avx2(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    block_product_generic(a, b, c, m, k, n);
}

#[inline(always)]
fn block_product_generic(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    let mut packed = vec![0.0f64; KC * NC];
    for jc in (0..n).step_by(NC) {
        let nc = NC.min(n - jc);
        let panels = nc / NR;
        for pc in (0..k).step_by(KC) {
            let kc = KC.min(k - pc);
            for p in 0..panels {
                let dst = &mut packed[p * kc * NR..(p + 1) * kc * NR];
                for l in 0..kc {
                    let src = &b[(pc + l) * n + jc + p * NR..][..NR];
                    dst[l * NR..(l + 1) * NR].copy_from_slice(src);
                }
            }
            let mut i = 0;
            while i + MR <= m {
                for p in 0..panels {
                    let panel = &packed[p * kc * NR..(p + 1) * kc * NR];
                    micro::<MR>(a, k, i, pc, kc, panel, c, n, jc + p * NR);
                }
                i += MR;
            }
            while i < m {
                for p in 0..panels {
                    let panel = &packed[p * kc * NR..(p + 1) * kc * NR];
                    micro::<1>(a, k, i, pc, kc, panel, c, n, jc + p * NR);
                }
                i += 1;
            }
            for j in jc + panels * NR..jc + nc {
                for i in 0..m {
                    let a_row = &a[i * k + pc..][..kc];
                    let mut s = c[i * n + j];
                    for (l, &av) in a_row.iter().enumerate() {
                        s = s + av * b[(pc + l) * n + j];
                    }
                    c[i * n + j] = s;
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
#[inline(always)]
fn micro<const R: usize>(
    a: &[f64],
    lda: usize,
    i: usize,
    pc: usize,
    kc: usize,
    panel: &[f64],
    c: &mut [f64],
    ldc: usize,
    j0: usize,
) {
    let mut acc = [[0.0f64; NR]; R];
    for (r, row) in acc.iter_mut().enumerate() {
        row.copy_from_slice(&c[(i + r) * ldc + j0..][..NR]);
    }
    let a_rows: [&[f64]; R] = std::array::from_fn(|r| &a[(i + r) * lda + pc..][..kc]);
    for (l, bv) in panel.chunks_exact(NR).enumerate() {
        let bv: &[f64; NR] = bv.try_into().expect("panel width");
        for r in 0..R {
            let av = a_rows[r][l];
            for j in 0..NR {
                acc[r][j] = acc[r][j] + av * bv[j];
            }
        }
    }
    for (r, row) in acc.iter().enumerate() {
        c[(i + r) * ldc + j0..][..NR].copy_from_slice(row);
    }
}

/// Matrix-vector product with the same left-to-right summation as [`matmul`].
pub fn matvec(a: ArrayView2<'_, f64>, x: ArrayView1<'_, f64>) -> Array1<f64> {
    assert_eq!(a.ncols(), x.len(), "matvec: dimensions differ");
    a.rows()
        .into_iter()
        .map(|row| row.iter().zip(x.iter()).fold(0.0, |s, (&w, &v)| s + w * v))
        .collect()
}

fn faer_view<'a>(m: &'a ArrayView2<'_, f64>) -> Option<MatRef<'a, f64>> {
    let s = m.as_slice()?;
    Some(MatRef::from_row_major_slice(s, m.nrows(), m.ncols()))
}

/// Lower triangle of `alpha · m · mᵀ` into a fresh faer matrix.
fn scaled_gram_lower(m: ArrayView2<'_, f64>, alpha: f64) -> Mat<f64> {
    let m = m.as_standard_layout();
    let view = m.view();
    let src = faer_view(&view).expect("standard layout");
    let p = m.nrows();
    let mut out = Mat::<f64>::zeros(p, p);
    triangular::matmul(
        out.as_mut(),
        BlockStructure::TriangularLower,
        Accum::Replace,
        src,
        BlockStructure::Rectangular,
        src.transpose(),
        BlockStructure::Rectangular,
        alpha,
        Par::Seq,
    );
    out
}

/// Feature Gram matrix `m · mᵀ` (rows are features), exactly symmetric.
pub fn gram(m: ArrayView2<'_, f64>) -> Array2<f64> {
    let lower = scaled_gram_lower(m, 1.0);
    let p = lower.nrows();
    Array2::from_shape_fn((p, p), |(i, j)| lower[(i.max(j), i.min(j))])
}

/// Lower triangle of a feature Gram `m · mᵀ`, kept so several shifted
/// copies `I + c · Gram` can be factored from one product.
pub struct GramLower {
    lower: Mat<f64>,
}

impl GramLower {
    pub fn new(m: ArrayView2<'_, f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Factorization("matrix has non-finite entries".into()));
        }
        Ok(Self { lower: scaled_gram_lower(m, 1.0) })
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    fn check_coef(coef: f64) -> Result<()> {
        if coef.is_finite() {
            Ok(())
        } else {
            Err(Error::Factorization(format!("non-finite Gram coefficient {coef}")))
        }
    }

    /// Factors `I + coef · Gram`, leaving `self` intact.
    pub fn shifted_factor(&self, coef: f64) -> Result<SpdFactor> {
        Self::check_coef(coef)?;
        let n = self.dim();
        let shifted = Mat::<f64>::from_fn(n, n, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Less => 0.0,
            std::cmp::Ordering::Equal => 1.0 + coef * self.lower[(i, j)],
            std::cmp::Ordering::Greater => coef * self.lower[(i, j)],
        });
        SpdFactor::factor(shifted)
    }

    /// Same as [`shifted_factor`](Self::shifted_factor), reusing the storage.
    pub fn into_shifted_factor(mut self, coef: f64) -> Result<SpdFactor> {
        Self::check_coef(coef)?;
        let n = self.dim();
        for j in 0..n {
            for i in j..n {
                self.lower[(i, j)] *= coef;
            }
            self.lower[(j, j)] += 1.0;
        }
        SpdFactor::factor(self.lower)
    }
}

/// Cholesky factor of a symmetric positive-definite matrix, large-matrix route.
///
/// Runs sequentially so results do not depend on the worker count.
pub struct SpdFactor {
    lower: Mat<f64>,
}

impl SpdFactor {
    pub fn new(a: ArrayView2<'_, f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Dimension(format!(
                "expected a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Factorization("matrix has non-finite entries".into()));
        }
        let n = a.nrows();
        let lower = Mat::<f64>::from_fn(n, n, |i, j| if j <= i { a[[i, j]] } else { 0.0 });
        Self::factor(lower)
    }

    /// Factors `I + coef · m · mᵀ` without materializing anything but its
    /// lower triangle.
    pub fn identity_plus_gram(m: ArrayView2<'_, f64>, coef: f64) -> Result<Self> {
        GramLower::new(m)?.into_shifted_factor(coef)
    }

    fn factor(mut lower: Mat<f64>) -> Result<Self> {
        let n = lower.nrows();
        let mut mem = MemBuffer::new(cholesky_in_place_scratch::<f64>(n, Par::Seq, Default::default()));
        cholesky_in_place(
            lower.as_mut(),
            Default::default(),
            Par::Seq,
            MemStack::new(&mut mem),
            Default::default(),
        )
        .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        for j in 1..n {
            for i in 0..j {
                lower[(i, j)] = 0.0;
            }
        }
        Ok(Self { lower })
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    /// Natural log-determinant from the factor diagonal.
    pub fn logdet(&self) -> f64 {
        2.0 * (0..self.dim()).map(|i| self.lower[(i, i)].ln()).sum::<f64>()
    }

    /// Diagonal of the inverse, `(A⁻¹)_ii = Σ_k (L⁻¹)_ki²`.
    pub fn inverse_diagonal(&self) -> Array1<f64> {
        let p = self.dim();
        let mut inv = Mat::<f64>::zeros(p, p);
        invert_lower_triangular(inv.as_mut(), self.lower.as_ref(), Par::Seq);
        // column i of the lower-triangular inverse has support on rows k >= i
        Array1::from_shape_fn(p, |i| {
            let col = inv.col(i);
            (i..p).map(|k| col[k] * col[k]).sum()
        })
    }
}

/// Plain Cholesky–Banachiewicz factorization; returns the lower factor.
pub fn cholesky_lower(a: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[[i, j]];
            for t in 0..j {
                s -= l[[i, t]] * l[[j, t]];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return Err(Error::Factorization(format!(
                        "matrix is not positive definite (pivot {i} = {s})"
                    )));
                }
                l[[i, i]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    Ok(l)
}

/// Log-determinant of an SPD matrix through [`cholesky_lower`].
pub fn logdet_spd_naive(a: ArrayView2<'_, f64>) -> Result<f64> {
    let l = cholesky_lower(a)?;
    Ok(2.0 * l.diag().iter().map(|v| v.ln()).sum::<f64>())
}

/// Solves `a x = b` for SPD `a` with [`cholesky_lower`]. `b` may hold several columns.
pub fn solve_spd(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let l = cholesky_lower(a)?;
    let n = l.nrows();
    if b.nrows() != n {
        return Err(Error::Dimension(format!(
            "right-hand side has {} rows, expected {n}",
            b.nrows()
        )));
    }
    let mut x = b.to_owned();
    for mut col in x.columns_mut() {
        for i in 0..n {
            let mut s = col[i];
            for t in 0..i {
                s -= l[[i, t]] * col[t];
            }
            col[i] = s / l[[i, i]];
        }
        for i in (0..n).rev() {
            let mut s = col[i];
            for t in i + 1..n {
                s -= l[[t, i]] * col[t];
            }
            col[i] = s / l[[i, i]];
        }
    }
    Ok(x)
}
