//! Small dense/sparse helpers shared by the operator and calculus layers.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, MatRef};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::C64;

/// Forces sequential dense kernels so repeated runs are bitwise identical.
pub fn init_determinism() {
    static ONCE: std::sync::Once = std::sync::Once::new();
    ONCE.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

pub fn norm2(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// `Σ conj(x_i) y_i`
pub fn dot(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(x: &[C64], y: &[C64]) -> Vec<C64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

pub fn add(x: &[C64], y: &[C64]) -> Vec<C64> {
    x.iter().zip(y).map(|(a, b)| a + b).collect()
}

pub fn scaled(alpha: C64, x: &[C64]) -> Vec<C64> {
    x.iter().map(|v| alpha * v).collect()
}

/// `‖x − y‖ / ‖y‖`, with the convention 0 when both vanish.
pub fn rel_diff(x: &[C64], y: &[C64]) -> f64 {
    let num = norm2(&sub(x, y));
    let den = norm2(y);
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

pub fn col_to_vec(m: MatRef<'_, C64>, j: usize) -> Vec<C64> {
    (0..m.nrows()).map(|i| m[(i, j)]).collect()
}

pub fn vec_to_col(v: &[C64]) -> Mat<C64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

pub fn cols_to_mat(cols: &[Vec<C64>]) -> Mat<C64> {
    let rows = cols.first().map_or(0, |c| c.len());
    Mat::from_fn(rows, cols.len(), |i, j| cols[j][i])
}

pub fn mat_to_cols(m: MatRef<'_, C64>) -> Vec<Vec<C64>> {
    (0..m.ncols()).map(|j| col_to_vec(m, j)).collect()
}

/// Deterministic complex vector with entries uniform in the unit square.
pub fn random_vector(dim: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

/// Compressed sparse row matrix over `C64`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        Self { nrows, ncols, indptr, indices, values }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, C64::new(1.0, 0.0))).collect())
    }

    /// Block diagonal matrix from equally sized dense blocks (row-major, `b×b`).
    pub fn block_diagonal(block: usize, blocks: &[Vec<C64>]) -> Self {
        let n = block * blocks.len();
        let mut trip = Vec::with_capacity(blocks.len() * block * block);
        for (k, blk) in blocks.iter().enumerate() {
            for i in 0..block {
                for j in 0..block {
                    let v = blk[i * block + j];
                    if v != C64::new(0.0, 0.0) {
                        trip.push((k * block + i, k * block + j, v));
                    }
                }
            }
        }
        Self::from_triplets(n, n, trip)
    }

    /// Block diagonal concatenation `diag(self, other)`.
    pub fn direct_sum(&self, other: &CsrMatrix) -> Self {
        let mut trip = self.triplets();
        trip.extend(other.triplets().into_iter().map(|(r, c, v)| (r + self.nrows, c + self.ncols, v)));
        Self::from_triplets(self.nrows + other.nrows, self.ncols + other.ncols, trip)
    }

    /// `[[a, b], [c, d]]` from four blocks; `None` is a zero block.
    pub fn from_blocks(rows: (usize, usize), cols: (usize, usize), blocks: [Option<&CsrMatrix>; 4]) -> Self {
        let offsets = [(0, 0), (0, cols.0), (rows.0, 0), (rows.0, cols.0)];
        let mut trip = Vec::new();
        for (blk, (ro, co)) in blocks.iter().zip(offsets) {
            if let Some(b) = blk {
                trip.extend(b.triplets().into_iter().map(|(r, c, v)| (r + ro, c + co, v)));
            }
        }
        Self::from_triplets(rows.0 + rows.1, cols.0 + cols.1, trip)
    }

    pub fn triplets(&self) -> Vec<(usize, usize, C64)> {
        let mut out = Vec::with_capacity(self.values.len());
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                out.push((r, self.indices[k], self.values[k]));
            }
        }
        out
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.ncols, "matvec dimension mismatch");
        (0..self.nrows)
            .map(|r| (self.indptr[r]..self.indptr[r + 1]).map(|k| self.values[k] * x[self.indices[k]]).sum())
            .collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(
            self.ncols,
            self.nrows,
            self.triplets().into_iter().map(|(r, c, v)| (c, r, v.conj())).collect(),
        )
    }

    pub fn scale(&self, alpha: C64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// `self + alpha·other`
    pub fn add_scaled(&self, alpha: C64, other: &CsrMatrix) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut trip = self.triplets();
        trip.extend(other.triplets().into_iter().map(|(r, c, v)| (r, c, alpha * v)));
        Self::from_triplets(self.nrows, self.ncols, trip)
    }

    /// Sparse product `self · other`.
    pub fn mul(&self, other: &CsrMatrix) -> Self {
        assert_eq!(self.ncols, other.nrows, "product dimension mismatch");
        let mut acc = vec![C64::new(0.0, 0.0); other.ncols];
        let mut marker = vec![usize::MAX; other.ncols];
        let mut trip = Vec::new();
        let mut touched = Vec::new();
        for r in 0..self.nrows {
            touched.clear();
            for k in self.indptr[r]..self.indptr[r + 1] {
                let (mid, av) = (self.indices[k], self.values[k]);
                for kk in other.indptr[mid]..other.indptr[mid + 1] {
                    let c = other.indices[kk];
                    if marker[c] != r {
                        marker[c] = r;
                        acc[c] = C64::new(0.0, 0.0);
                        touched.push(c);
                    }
                    acc[c] += av * other.values[kk];
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                trip.push((r, c, acc[c]));
            }
        }
        Self::from_triplets(self.nrows, other.ncols, trip)
    }

    pub fn to_dense(&self) -> Mat<C64> {
        let mut m = Mat::<C64>::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    /// Largest absolute entry; used for relative matrix comparisons.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Max-norm of `self − other`.
    pub fn max_abs_diff(&self, other: &CsrMatrix) -> f64 {
        self.add_scaled(C64::new(-1.0, 0.0), other).max_abs()
    }
}

/// Sparse LU factorization of a square matrix, with pivoting.
#[derive(Debug, Clone)]
pub struct SparseLu {
    lu: Lu<usize, C64>,
    dim: usize,
}

fn to_faer(a: &CsrMatrix) -> Result<SparseColMat<usize, C64>> {
    let trip: Vec<Triplet<usize, usize, C64>> =
        a.triplets().into_iter().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
    SparseColMat::try_new_from_triplets(a.nrows(), a.ncols(), &trip)
        .map_err(|e| Error::Numerical(format!("sparse assembly failed: {e:?}")))
}

impl SparseLu {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Dimension { expected: a.nrows(), found: a.ncols() });
        }
        let lu = to_faer(a)?.sp_lu().map_err(|e| Error::Numerical(format!("sparse LU failed: {e:?}")))?;
        Ok(Self { lu, dim: a.nrows() })
    }

    /// Factors `z·I − A`.
    pub fn shifted(a: &CsrMatrix, z: C64) -> Result<Self> {
        Self::new(&CsrMatrix::identity(a.nrows()).scale(z).add_scaled(C64::new(-1.0, 0.0), a))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn solve(&self, rhs: MatRef<'_, C64>) -> Result<Mat<C64>> {
        let mut x = rhs.to_owned();
        self.lu.solve_in_place(x.as_mut());
        finite(x)
    }

    pub fn solve_adjoint(&self, rhs: MatRef<'_, C64>) -> Result<Mat<C64>> {
        let mut x = rhs.to_owned();
        self.lu.solve_adjoint_in_place(x.as_mut());
        finite(x)
    }

    pub fn solve_vec(&self, rhs: &[C64]) -> Result<Vec<C64>> {
        Ok(col_to_vec(self.solve(vec_to_col(rhs).as_ref())?.as_ref(), 0))
    }

    pub fn solve_adjoint_vec(&self, rhs: &[C64]) -> Result<Vec<C64>> {
        Ok(col_to_vec(self.solve_adjoint(vec_to_col(rhs).as_ref())?.as_ref(), 0))
    }
}

fn finite(x: Mat<C64>) -> Result<Mat<C64>> {
    for j in 0..x.ncols() {
        for i in 0..x.nrows() {
            let v = x[(i, j)];
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::Numerical("linear solve produced non-finite values (singular system)".into()));
            }
        }
    }
    Ok(x)
}

/// Power iteration for `‖T‖₂` given `T` and `T^†`. Deterministic start vector.
pub fn operator_norm<F, G>(dim: usize, apply: F, apply_adjoint: G, max_iter: usize, tol: f64) -> Result<f64>
where
    F: Fn(&[C64]) -> Result<Vec<C64>>,
    G: Fn(&[C64]) -> Result<Vec<C64>>,
{
    let mut v = random_vector(dim, 0x5eed_0f_9043);
    let n0 = norm2(&v);
    v.iter_mut().for_each(|x| *x /= n0);
    let mut sigma = 0.0;
    for _ in 0..max_iter {
        let w = apply(&v)?;
        let u = apply_adjoint(&w)?;
        let un = norm2(&u);
        let next = un.sqrt();
        if un == 0.0 {
            return Ok(0.0);
        }
        v = u.into_iter().map(|x| x / un).collect();
        if (next - sigma).abs() <= tol * next {
            return Ok(next);
        }
        sigma = next;
    }
    Ok(sigma)
}
