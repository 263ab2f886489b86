//! Structured linear algebra for the pencil estimator.
//!
//! Hankel blocks are never materialized on the fast path: products go
//! through FFT correlations and the leading singular triplets come from a
//! seeded randomized subspace iteration. Small problems, or requests for a
//! large fraction of the spectrum, fall back to a dense SVD.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftPlanner};

pub type CMatrix = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Below this many columns (or rows) a dense SVD is used.
pub const DENSE_LIMIT: usize = 96;
const OVERSAMPLE: usize = 10;
const POWER_ITERS: usize = 4;
const SKETCH_SEED: u64 = 0x5eed_0f9e_4c11;

pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `A x`
    fn apply(&self, x: &[Complex64]) -> Vec<Complex64>;
    /// `A^H y`
    fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64>;

    fn to_dense(&self) -> CMatrix {
        let (m, n) = (self.nrows(), self.ncols());
        let mut out = CMatrix::zeros(m, n);
        let mut e = vec![ZERO; n];
        for j in 0..n {
            e[j] = Complex64::new(1.0, 0.0);
            let col = self.apply(&e);
            out.column_mut(j).copy_from_slice(&col);
            e[j] = ZERO;
        }
        out
    }
}

impl LinearOperator for CMatrix {
    fn nrows(&self) -> usize {
        self.nrows()
    }

    fn ncols(&self) -> usize {
        self.ncols()
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let v = nalgebra::DVector::from_column_slice(x);
        (self * v).as_slice().to_vec()
    }

    fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        let v = nalgebra::DVector::from_column_slice(y);
        (self.ad_mul(&v)).as_slice().to_vec()
    }

    fn to_dense(&self) -> CMatrix {
        self.clone()
    }
}

/// `rows x cols` Hankel matrix `H[r][c] = data[r + c]`.
#[derive(Clone)]
pub struct Hankel {
    data: Vec<Complex64>,
    rows: usize,
    cols: usize,
    fft_len: usize,
    spectrum: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Hankel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Hankel")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .finish()
    }
}

impl Hankel {
    /// Hankel matrix with `cols` columns built from all of `data`.
    pub fn new(data: &[Complex64], cols: usize) -> Self {
        assert!(cols >= 1 && cols <= data.len(), "hankel: need 1 <= cols <= len");
        let rows = data.len() + 1 - cols;
        let fft_len = data.len().next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);
        let mut spectrum = vec![ZERO; fft_len];
        spectrum[..data.len()].copy_from_slice(data);
        forward.process(&mut spectrum);
        Self {
            data: data.to_vec(),
            rows,
            cols,
            fft_len,
            spectrum,
            forward,
            inverse,
        }
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r + c]
    }

    /// `y[r] = sum_{c < inner} data[r + c] * x[c]` for `r < outer`, i.e. the
    /// product with either the matrix (`inner = cols`) or its transpose.
    fn correlate(&self, x: &[Complex64], outer: usize) -> Vec<Complex64> {
        let inner = x.len();
        if inner * outer <= 4096 {
            return (0..outer)
                .map(|r| x.iter().enumerate().map(|(c, v)| self.data[r + c] * v).sum())
                .collect();
        }
        let mut buf = vec![ZERO; self.fft_len];
        for (c, v) in x.iter().enumerate() {
            buf[inner - 1 - c] = *v;
        }
        self.forward.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(&self.spectrum) {
            *b *= s;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.fft_len as f64;
        buf[inner - 1..inner - 1 + outer].iter().map(|v| v * scale).collect()
    }
}

impl LinearOperator for Hankel {
    fn nrows(&self) -> usize {
        self.rows
    }

    fn ncols(&self) -> usize {
        self.cols
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(x.len(), self.cols);
        self.correlate(x, self.rows)
    }

    fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(y.len(), self.rows);
        let conj: Vec<Complex64> = y.iter().map(|v| v.conj()).collect();
        self.correlate(&conj, self.cols).into_iter().map(|v| v.conj()).collect()
    }

    fn to_dense(&self) -> CMatrix {
        CMatrix::from_fn(self.rows, self.cols, |r, c| self.data[r + c])
    }
}

/// Vertical stack of operators sharing a column count.
#[derive(Debug, Clone)]
pub struct VStack<T> {
    blocks: Vec<T>,
    cols: usize,
}

impl<T: LinearOperator> VStack<T> {
    pub fn new(blocks: Vec<T>) -> Self {
        assert!(!blocks.is_empty(), "vstack: no blocks");
        let cols = blocks[0].ncols();
        assert!(blocks.iter().all(|b| b.ncols() == cols), "vstack: column mismatch");
        Self { blocks, cols }
    }

    pub fn blocks(&self) -> &[T] {
        &self.blocks
    }
}

impl<T: LinearOperator> LinearOperator for VStack<T> {
    fn nrows(&self) -> usize {
        self.blocks.iter().map(|b| b.nrows()).sum()
    }

    fn ncols(&self) -> usize {
        self.cols
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.blocks.iter().flat_map(|b| b.apply(x)).collect()
    }

    fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![ZERO; self.cols];
        let mut offset = 0;
        for b in &self.blocks {
            let part = b.apply_adjoint(&y[offset..offset + b.nrows()]);
            for (o, p) in out.iter_mut().zip(part) {
                *o += p;
            }
            offset += b.nrows();
        }
        out
    }

    fn to_dense(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.nrows(), self.cols);
        let mut offset = 0;
        for b in &self.blocks {
            let d = b.to_dense();
            out.view_mut((offset, 0), (d.nrows(), self.cols)).copy_from(&d);
            offset += d.nrows();
        }
        out
    }
}

/// Leading singular triplets, singular values in descending order.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub u: CMatrix,
    pub s: Vec<f64>,
    pub v: CMatrix,
}

fn dense_svd(a: &CMatrix, rank: usize) -> TruncatedSvd {
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("requested u");
    let v_t = svd.v_t.expect("requested v_t");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let rank = rank.min(order.len());
    let s = order[..rank].iter().map(|&i| svd.singular_values[i]).collect();
    let u = CMatrix::from_fn(u.nrows(), rank, |r, c| u[(r, order[c])]);
    let v = CMatrix::from_fn(v_t.ncols(), rank, |r, c| v_t[(order[c], r)].conj());
    TruncatedSvd { u, s, v }
}

fn orthonormalize(m: CMatrix) -> CMatrix {
    let cols = m.ncols();
    let q = m.qr().q();
    q.columns(0, cols).into_owned()
}

fn apply_block<A: LinearOperator + ?Sized>(a: &A, x: &CMatrix, adjoint: bool) -> CMatrix {
    let out_rows = if adjoint { a.ncols() } else { a.nrows() };
    let mut out = CMatrix::zeros(out_rows, x.ncols());
    for j in 0..x.ncols() {
        let col: Vec<Complex64> = x.column(j).iter().copied().collect();
        let y = if adjoint { a.apply_adjoint(&col) } else { a.apply(&col) };
        out.column_mut(j).copy_from_slice(&y);
    }
    out
}

fn use_dense(m: usize, n: usize, rank: usize) -> bool {
    let small = m.min(n);
    small <= DENSE_LIMIT || 2 * (rank + OVERSAMPLE) >= small
}

/// Rank-`rank` truncated SVD of `a`. Deterministic for fixed input.
pub fn truncated_svd<A: LinearOperator + ?Sized>(a: &A, rank: usize) -> TruncatedSvd {
    let (m, n) = (a.nrows(), a.ncols());
    let rank = rank.min(m).min(n);
    if use_dense(m, n, rank) {
        return dense_svd(&a.to_dense(), rank);
    }
    let width = rank + OVERSAMPLE;
    let mut rng = ChaCha8Rng::seed_from_u64(SKETCH_SEED);
    let omega = CMatrix::from_fn(n, width, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(re, im)
    });
    let mut q = orthonormalize(apply_block(a, &omega, false));
    for _ in 0..POWER_ITERS {
        let w = orthonormalize(apply_block(a, &q, true));
        q = orthonormalize(apply_block(a, &w, false));
    }
    // B = Q^H A, formed as (A^H Q)^H.
    let b = apply_block(a, &q, true).adjoint();
    let small = dense_svd(&b, rank);
    TruncatedSvd {
        u: &q * small.u,
        s: small.s,
        v: small.v,
    }
}

/// The `count` largest singular values of `a`, descending.
pub fn leading_singular_values<A: LinearOperator + ?Sized>(a: &A, count: usize) -> Vec<f64> {
    truncated_svd(a, count).s
}

/// All singular values of `a`, descending.
pub fn singular_values<A: LinearOperator + ?Sized>(a: &A) -> Vec<f64> {
    let k = a.nrows().min(a.ncols());
    dense_svd(&a.to_dense(), k).s
}

/// Minimum-norm least-squares solve of `a x = b` by SVD, discarding
/// singular values below `rel_tol * sigma_max`. Returns the solution and
/// the numerical rank.
pub fn lstsq(a: &CMatrix, b: &[Complex64], rel_tol: f64) -> (Vec<Complex64>, usize, f64) {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let smin = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let cutoff = rel_tol * smax;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    let rhs = nalgebra::DVector::from_column_slice(b);
    let x = svd.solve(&rhs, cutoff).expect("u and v_t computed");
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    (x.as_slice().to_vec(), rank, cond)
}

/// Eigenvalues of a small square complex matrix via the complex Schur form.
pub fn eigenvalues(m: &CMatrix) -> Vec<Complex64> {
    let t = m.clone().schur().unpack().1;
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}
