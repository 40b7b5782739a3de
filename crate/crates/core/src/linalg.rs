//! Dense complex linear algebra used throughout the crate.
//!
//! Matrices are `nalgebra` column-major `DMatrix<Complex64>` values, so
//! [`vec`] is plain column stacking and agrees with the storage order. The
//! identities the receivers depend on all hold in this convention:
//!
//! - `vec(A·B·C) = (Cᵀ ⊗ A)·vec(B)`
//! - `(A ⊗ B)(C ⊗ D) = (A·C) ⊗ (B·D)`
//! - `vec(A·diag(x)·B) = (Bᵀ ⋄ A)·x`

use lax::{layout::MatrixLayout, JobSvd, Lapack};
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Relative singular-value cutoff used by [`pinv`] unless a caller overrides it.
pub const DEFAULT_PINV_REL_TOL: f64 = 1e-12;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn check_finite(a: &CMatrix, what: &'static str) -> Result<()> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Builds a matrix from row-major nested slices (test and doc convenience).
pub fn from_rows(rows: &[&[C64]]) -> CMatrix {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    CMatrix::from_fn(nrows, ncols, |i, j| rows[i][j])
}

/// Builds a real-valued complex matrix from row-major nested slices.
pub fn from_real_rows(rows: &[&[f64]]) -> CMatrix {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    CMatrix::from_fn(nrows, ncols, |i, j| C64::new(rows[i][j], 0.0))
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMatrix::zeros(ar * br, ac * bc);
    for j in 0..ac {
        for i in 0..ar {
            let s = a[(i, j)];
            if s == ZERO {
                continue;
            }
            let mut block = out.view_mut((i * br, j * bc), (br, bc));
            block.zip_apply(b, |o, v| *o = s * v);
        }
    }
    out
}

/// Column-wise Kronecker product: column `j` is `a[:, j] ⊗ b[:, j]`.
pub fn khatri_rao(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.ncols() != b.ncols() {
        return Err(Error::dim(
            "khatri_rao",
            format!("{} vs {} columns", a.ncols(), b.ncols()),
        ));
    }
    let (ar, br) = (a.nrows(), b.nrows());
    let mut out = CMatrix::zeros(ar * br, a.ncols());
    for j in 0..a.ncols() {
        for i in 0..ar {
            let s = a[(i, j)];
            for l in 0..br {
                out[(i * br + l, j)] = s * b[(l, j)];
            }
        }
    }
    Ok(out)
}

/// Column-major vectorization into an `(rows·cols) × 1` matrix.
pub fn vec(a: &CMatrix) -> CMatrix {
    CMatrix::from_column_slice(a.len(), 1, a.as_slice())
}

pub fn unvec(v: &CMatrix, rows: usize, cols: usize) -> Result<CMatrix> {
    if v.ncols() != 1 || v.nrows() != rows * cols {
        return Err(Error::dim(
            "unvec",
            format!(
                "cannot reshape {}x{} into {}x{}",
                v.nrows(),
                v.ncols(),
                rows,
                cols
            ),
        ));
    }
    Ok(CMatrix::from_column_slice(rows, cols, v.as_slice()))
}

/// `D_i(C)`: square diagonal matrix holding row `i` of `c`.
pub fn diag_from_row(c: &CMatrix, i: usize) -> Result<CMatrix> {
    if i >= c.nrows() {
        return Err(Error::Index {
            op: "diag_from_row",
            index: i,
            bound: c.nrows(),
        });
    }
    let n = c.ncols();
    let mut d = CMatrix::zeros(n, n);
    for k in 0..n {
        d[(k, k)] = c[(i, k)];
    }
    Ok(d)
}

/// Scales the columns of `a` by row `i` of `c`, i.e. `a · D_i(c)` without
/// forming the diagonal matrix.
pub(crate) fn scale_cols_by_row(a: &CMatrix, c: &CMatrix, i: usize) -> CMatrix {
    let mut out = a.clone();
    for (k, mut col) in out.column_iter_mut().enumerate() {
        col *= c[(i, k)];
    }
    out
}

/// Scales the rows of `a` by row `i` of `c`, i.e. `D_i(c) · a`.
pub(crate) fn scale_rows_by_row(c: &CMatrix, i: usize, a: &CMatrix) -> CMatrix {
    let mut out = a.clone();
    for (k, mut row) in out.row_iter_mut().enumerate() {
        row *= c[(i, k)];
    }
    out
}

/// Pseudo-inverse together with the number of singular values retained.
#[derive(Debug, Clone)]
pub struct Pinv {
    pub matrix: CMatrix,
    pub rank: usize,
}

/// Least-squares solution `pinv(a)·b` with the retained rank.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub solution: CMatrix,
    pub rank: usize,
}

struct TruncatedSvd {
    u: CMatrix,
    v_t: CMatrix,
    inv_s: Vec<f64>,
    rank: usize,
}

// nalgebra's complex SVD occasionally returns factors that do not recompose a
// rank-deficient input, and faer's fails to converge on the clustered singular
// values that selection matrices produce, so the decomposition goes to LAPACK.
fn truncated_svd(a: &CMatrix, rel_tol: f64) -> Result<TruncatedSvd> {
    let (rows, cols) = a.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Ok(TruncatedSvd {
            u: CMatrix::zeros(rows, 0),
            v_t: CMatrix::zeros(0, cols),
            inv_s: Vec::new(),
            rank: 0,
        });
    }
    if a.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::NonFinite("SVD input"));
    }
    // nalgebra storage is column-major, which is LAPACK's native layout.
    let mut buf = a.as_slice().to_vec();
    let layout = MatrixLayout::F {
        col: cols as i32,
        lda: rows as i32,
    };
    let svd = <C64 as Lapack>::svddc(layout, JobSvd::Some, &mut buf)
        .map_err(|e| Error::Degenerate(format!("SVD failed: {e}")))?;
    let (Some(u), Some(v_t)) = (svd.u, svd.vt) else {
        return Err(Error::Degenerate("SVD returned no singular vectors".into()));
    };
    let smax = svd.s.iter().cloned().fold(0.0_f64, f64::max);
    let cutoff = rel_tol * smax;
    let inv_s: Vec<f64> = svd
        .s
        .iter()
        .map(|&v| if smax > 0.0 && v > cutoff { 1.0 / v } else { 0.0 })
        .collect();
    let rank = inv_s.iter().filter(|&&v| v != 0.0).count();
    Ok(TruncatedSvd {
        u: CMatrix::from_column_slice(rows, k, &u),
        v_t: CMatrix::from_column_slice(k, cols, &v_t),
        inv_s,
        rank,
    })
}

/// Moore-Penrose pseudo-inverse via SVD. Singular values at or below
/// `rel_tol · σ_max` are treated as zero.
pub fn pinv(a: &CMatrix, rel_tol: f64) -> Result<Pinv> {
    let t = truncated_svd(a, rel_tol)?;
    // V · Σ⁺ · Uᴴ
    let mut v_scaled = t.v_t.adjoint();
    for (k, mut col) in v_scaled.column_iter_mut().enumerate() {
        col *= C64::new(t.inv_s[k], 0.0);
    }
    Ok(Pinv {
        matrix: v_scaled * t.u.adjoint(),
        rank: t.rank,
    })
}

/// Computes `pinv(a, rel_tol) · b` without materializing the pseudo-inverse.
pub fn lstsq(a: &CMatrix, b: &CMatrix, rel_tol: f64) -> Result<LeastSquares> {
    if a.nrows() != b.nrows() {
        return Err(Error::dim(
            "lstsq",
            format!("{} rows vs {} rows", a.nrows(), b.nrows()),
        ));
    }
    let t = truncated_svd(a, rel_tol)?;
    let mut proj = t.u.adjoint() * b;
    for (k, mut row) in proj.row_iter_mut().enumerate() {
        row *= C64::new(t.inv_s[k], 0.0);
    }
    Ok(LeastSquares {
        solution: t.v_t.adjoint() * proj,
        rank: t.rank,
    })
}

pub fn fro_norm(a: &CMatrix) -> f64 {
    fro_norm_sq(a).sqrt()
}

pub fn fro_norm_sq(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Vertical concatenation; all blocks must share a column count.
pub fn vstack(blocks: &[CMatrix]) -> Result<CMatrix> {
    let Some(first) = blocks.first() else {
        return Err(Error::dim("vstack", "no blocks"));
    };
    let cols = first.ncols();
    if let Some(b) = blocks.iter().find(|b| b.ncols() != cols) {
        return Err(Error::dim(
            "vstack",
            format!("{} vs {} columns", cols, b.ncols()),
        ));
    }
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), b.shape()).copy_from(b);
        r += b.nrows();
    }
    Ok(out)
}

/// Horizontal concatenation; all blocks must share a row count.
pub fn hstack(blocks: &[CMatrix]) -> Result<CMatrix> {
    let Some(first) = blocks.first() else {
        return Err(Error::dim("hstack", "no blocks"));
    };
    let rows = first.nrows();
    if let Some(b) = blocks.iter().find(|b| b.nrows() != rows) {
        return Err(Error::dim(
            "hstack",
            format!("{} vs {} rows", rows, b.nrows()),
        ));
    }
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        out.view_mut((0, c), b.shape()).copy_from(b);
        c += b.ncols();
    }
    Ok(out)
}

/// Third-order tensor stored as `d3` frontal slices of shape `d1 × d2`.
#[derive(Debug, Clone, PartialEq)]
pub struct CTensor3 {
    dims: (usize, usize, usize),
    slices: Vec<CMatrix>,
}

impl CTensor3 {
    pub fn from_slices(slices: Vec<CMatrix>) -> Result<Self> {
        let Some(first) = slices.first() else {
            return Err(Error::dim("CTensor3", "at least one slice required"));
        };
        let (d1, d2) = first.shape();
        if d1 == 0 || d2 == 0 {
            return Err(Error::dim("CTensor3", "empty slice"));
        }
        if let Some(s) = slices.iter().find(|s| s.shape() != (d1, d2)) {
            return Err(Error::dim(
                "CTensor3",
                format!("slice {:?} differs from {:?}", s.shape(), (d1, d2)),
            ));
        }
        for s in &slices {
            check_finite(s, "tensor slice")?;
        }
        Ok(Self {
            dims: (d1, d2, slices.len()),
            slices,
        })
    }

    pub fn zeros(d1: usize, d2: usize, d3: usize) -> Self {
        Self {
            dims: (d1, d2, d3),
            slices: vec![CMatrix::zeros(d1, d2); d3],
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.0 * self.dims.1 * self.dims.2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn slice(&self, k: usize) -> &CMatrix {
        &self.slices[k]
    }

    pub fn slices(&self) -> &[CMatrix] {
        &self.slices
    }

    pub(crate) fn slices_mut(&mut self) -> &mut [CMatrix] {
        &mut self.slices
    }

    pub fn fro_norm(&self) -> f64 {
        self.fro_norm_sq().sqrt()
    }

    pub fn fro_norm_sq(&self) -> f64 {
        self.slices.iter().map(fro_norm_sq).sum()
    }

    /// Entries in slice-major, then column-major order.
    pub fn iter(&self) -> impl Iterator<Item = &C64> {
        self.slices.iter().flat_map(|s| s.iter())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        crate::rng::complex_gaussian_matrix(rows, cols, 1.0, rng)
    }

    fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
        assert_eq!(a.shape(), b.shape());
        a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn kron_of_identities_is_identity() {
        let out = kron(&CMatrix::identity(2, 2), &CMatrix::identity(3, 3));
        assert_eq!(out, CMatrix::identity(6, 6));
    }

    #[test]
    fn kron_with_scalar_scales() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = random(3, 2, &mut rng);
        let two = from_real_rows(&[&[2.0]]);
        assert_eq!(kron(&two, &b), b.map(|z| z * 2.0));
    }

    #[test]
    fn kron_blocks_follow_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random(2, 3, &mut rng);
        let b = random(4, 2, &mut rng);
        let k = kron(&a, &b);
        assert_eq!(k.shape(), (8, 6));
        for i in 0..2 {
            for j in 0..3 {
                for r in 0..4 {
                    for s in 0..2 {
                        assert_eq!(k[(i * 4 + r, j * 2 + s)], a[(i, j)] * b[(r, s)]);
                    }
                }
            }
        }
    }

    #[test]
    fn mixed_product_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (a, b, cm, d) = (
            random(2, 2, &mut rng),
            random(2, 2, &mut rng),
            random(2, 2, &mut rng),
            random(2, 2, &mut rng),
        );
        let lhs = kron(&a, &b) * kron(&cm, &d);
        let rhs = kron(&(&a * &cm), &(&b * &d));
        assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn khatri_rao_identity_columns() {
        let out = khatri_rao(&CMatrix::identity(2, 2), &CMatrix::identity(2, 2)).unwrap();
        let expected = from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0], &[0.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(out, expected);
    }

    #[test]
    fn khatri_rao_single_column_is_kron() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random(3, 1, &mut rng);
        let b = random(2, 1, &mut rng);
        assert_eq!(khatri_rao(&a, &b).unwrap(), kron(&a, &b));
    }

    #[test]
    fn khatri_rao_rejects_column_mismatch() {
        let err = khatri_rao(&CMatrix::zeros(2, 2), &CMatrix::zeros(2, 3)).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
    }

    #[test]
    fn khatri_rao_vec_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random(3, 2, &mut rng);
        let b = random(2, 4, &mut rng);
        let x = random(2, 1, &mut rng);
        let lhs = vec(&(&a * CMatrix::from_diagonal(&x.column(0)) * &b));
        let rhs = khatri_rao(&b.transpose(), &a).unwrap() * &x;
        assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn vec_stacks_columns() {
        let a = from_real_rows(&[&[1.0, 3.0], &[2.0, 4.0]]);
        let v = vec(&a);
        let expected: Vec<C64> = [1.0, 2.0, 3.0, 4.0].iter().map(|&x| c(x, 0.0)).collect();
        assert_eq!(v.as_slice(), expected.as_slice());
        assert_eq!(v.shape(), (4, 1));
    }

    #[test]
    fn vec_kron_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random(2, 3, &mut rng);
        let b = random(3, 2, &mut rng);
        let cm = random(2, 4, &mut rng);
        let lhs = vec(&(&a * &b * &cm));
        let rhs = kron(&cm.transpose(), &a) * vec(&b);
        assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn unvec_inverts_vec() {
        let v = from_real_rows(&[&[1.0], &[2.0], &[3.0], &[4.0]]);
        let a = unvec(&v, 2, 2).unwrap();
        assert_eq!(a, from_real_rows(&[&[1.0, 3.0], &[2.0, 4.0]]));
        assert_eq!(vec(&a), v);

        let v6 = random(6, 1, &mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(vec(&unvec(&v6, 2, 3).unwrap()), v6);
    }

    #[test]
    fn unvec_rejects_wrong_length() {
        let v = CMatrix::zeros(5, 1);
        assert!(matches!(unvec(&v, 2, 3), Err(Error::Dimension { .. })));
        assert!(matches!(unvec(&CMatrix::zeros(3, 2), 2, 3), Err(Error::Dimension { .. })));
    }

    #[test]
    fn diag_from_row_examples() {
        let d = diag_from_row(&CMatrix::identity(3, 3), 0).unwrap();
        assert_eq!(d, from_real_rows(&[&[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0]]));

        let m = from_rows(&[&[c(1.0, 1.0), c(2.0, 0.0)], &[c(3.0, 0.0), c(0.0, 4.0)]]);
        let d1 = diag_from_row(&m, 1).unwrap();
        assert_eq!(d1, from_rows(&[&[c(3.0, 0.0), ZERO], &[ZERO, c(0.0, 4.0)]]));

        assert!(matches!(
            diag_from_row(&m, 2),
            Err(Error::Index { index: 2, bound: 2, .. })
        ));
    }

    #[test]
    fn diag_from_row_matches_loop_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random(3, 4, &mut rng);
        let cm = random(2, 4, &mut rng);
        let b = random(4, 2, &mut rng);
        let lhs = &a * diag_from_row(&cm, 1).unwrap() * &b;
        let mut rhs = CMatrix::zeros(3, 2);
        for k in 0..4 {
            for r in 0..3 {
                for s in 0..2 {
                    rhs[(r, s)] += a[(r, k)] * cm[(1, k)] * b[(k, s)];
                }
            }
        }
        assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
        assert_eq!(scale_cols_by_row(&a, &cm, 1), &a * diag_from_row(&cm, 1).unwrap());
    }

    #[test]
    fn pinv_of_identity_and_diagonal() {
        let p = pinv(&CMatrix::identity(4, 4), DEFAULT_PINV_REL_TOL).unwrap();
        assert!(max_abs_diff(&p.matrix, &CMatrix::identity(4, 4)) < 1e-14);
        assert_eq!(p.rank, 4);

        let d = from_real_rows(&[&[2.0, 0.0], &[0.0, 0.0]]);
        let p = pinv(&d, DEFAULT_PINV_REL_TOL).unwrap();
        assert!(max_abs_diff(&p.matrix, &from_real_rows(&[&[0.5, 0.0], &[0.0, 0.0]])) < 1e-14);
        assert_eq!(p.rank, 1);
    }

    #[test]
    fn pinv_reproduces_tall_full_rank() {
        let a = random(8, 3, &mut ChaCha8Rng::seed_from_u64(9));
        let p = pinv(&a, DEFAULT_PINV_REL_TOL).unwrap();
        assert!(max_abs_diff(&(&a * &p.matrix * &a), &a) < 1e-10);
        assert_eq!(p.rank, 3);
    }

    #[test]
    fn pinv_of_zero_is_zero() {
        let p = pinv(&CMatrix::zeros(3, 2), DEFAULT_PINV_REL_TOL).unwrap();
        assert_eq!(p.matrix, CMatrix::zeros(2, 3));
        assert_eq!(p.rank, 0);
    }

    #[test]
    fn lstsq_matches_pinv_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = random(9, 4, &mut rng);
        let b = random(9, 2, &mut rng);
        let ls = lstsq(&a, &b, DEFAULT_PINV_REL_TOL).unwrap();
        let via_pinv = pinv(&a, DEFAULT_PINV_REL_TOL).unwrap().matrix * &b;
        assert!(max_abs_diff(&ls.solution, &via_pinv) < 1e-12);
        assert_eq!(ls.rank, 4);
    }

    #[test]
    fn fro_norm_examples() {
        assert!((fro_norm(&CMatrix::identity(3, 3)) - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(fro_norm(&CMatrix::zeros(2, 5)), 0.0);
        let a = random(4, 3, &mut ChaCha8Rng::seed_from_u64(11));
        let mut acc = 0.0;
        for i in 0..4 {
            for j in 0..3 {
                acc += a[(i, j)].re * a[(i, j)].re + a[(i, j)].im * a[(i, j)].im;
            }
        }
        assert!((fro_norm(&a) - acc.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn all_ones_products_are_all_ones() {
        let ones = |r, c| CMatrix::from_element(r, c, ONE);
        assert_eq!(kron(&ones(2, 3), &ones(4, 1)), ones(8, 3));
        assert_eq!(khatri_rao(&ones(2, 3), &ones(5, 3)).unwrap(), ones(10, 3));
    }

    #[test]
    fn stacking_checks_shapes() {
        let a = CMatrix::zeros(2, 3);
        let b = CMatrix::zeros(1, 3);
        assert_eq!(vstack(&[a.clone(), b.clone()]).unwrap().shape(), (3, 3));
        assert!(hstack(&[a.clone(), b]).is_err());
        assert!(vstack(&[a, CMatrix::zeros(2, 2)]).is_err());
    }

    #[test]
    fn tensor_rejects_ragged_slices() {
        let ok = CTensor3::from_slices(vec![CMatrix::zeros(2, 3); 4]).unwrap();
        assert_eq!(ok.dims(), (2, 3, 4));
        assert!(CTensor3::from_slices(vec![CMatrix::zeros(2, 3), CMatrix::zeros(3, 2)]).is_err());
        assert!(CTensor3::from_slices(vec![]).is_err());
        let mut bad = CMatrix::zeros(1, 1);
        bad[(0, 0)] = C64::new(f64::NAN, 0.0);
        assert!(matches!(
            CTensor3::from_slices(vec![bad]),
            Err(Error::NonFinite(_))
        ));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn seeded(rows: usize, cols: usize, seed: u64) -> CMatrix {
            random(rows, cols, &mut ChaCha8Rng::seed_from_u64(seed))
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn vec_of_triple_product(m in 1usize..5, n in 1usize..5, p in 1usize..5, q in 1usize..5, seed in any::<u64>()) {
                let a = seeded(m, n, seed);
                let b = seeded(n, p, seed ^ 1);
                let c = seeded(p, q, seed ^ 2);
                let lhs = vec(&(&a * &b * &c));
                let rhs = kron(&c.transpose(), &a) * vec(&b);
                prop_assert!(max_abs_diff(&lhs, &rhs) <= 1e-10 * (1.0 + fro_norm(&lhs)));
            }

            #[test]
            fn vec_of_diagonal_sandwich(m in 1usize..5, r in 1usize..5, q in 1usize..5, seed in any::<u64>()) {
                let a = seeded(m, r, seed);
                let d = seeded(1, r, seed ^ 3);
                let b = seeded(r, q, seed ^ 4);
                let lhs = vec(&(&a * diag_from_row(&d, 0).unwrap() * &b));
                let rhs = khatri_rao(&b.transpose(), &a).unwrap() * d.transpose();
                prop_assert!(max_abs_diff(&lhs, &rhs) <= 1e-10 * (1.0 + fro_norm(&lhs)));
            }

            #[test]
            fn all_ones_shapes(i in 1usize..6, j in 1usize..6, k in 1usize..6, l in 1usize..6) {
                let ones = |r, c| CMatrix::from_element(r, c, ONE);
                prop_assert_eq!(kron(&ones(i, j), &ones(k, l)), ones(i * k, j * l));
                prop_assert_eq!(khatri_rao(&ones(i, j), &ones(k, j)).unwrap(), ones(i * k, j));
            }

            #[test]
            fn unvec_inverts_vec(r in 1usize..6, c in 1usize..6, seed in any::<u64>()) {
                let a = seeded(r, c, seed);
                prop_assert_eq!(unvec(&vec(&a), r, c).unwrap(), a);
            }

            #[test]
            fn pinv_satisfies_penrose(rows in 1usize..7, cols in 1usize..7, rank in 1usize..7, seed in any::<u64>()) {
                let rank = rank.min(rows).min(cols);
                let a = seeded(rows, rank, seed) * seeded(rank, cols, seed ^ 5);
                let pi = pinv(&a, 1e-10).unwrap();
                prop_assert_eq!(pi.rank, rank);
                let x = &pi.matrix;
                let scale = 1.0 + fro_norm(&a) * fro_norm(x);
                prop_assert!(max_abs_diff(&(&a * x * &a), &a) <= 1e-9 * scale * fro_norm(&a).max(1.0));
                prop_assert!(max_abs_diff(&(x * &a * x), x) <= 1e-9 * scale * fro_norm(x).max(1.0));
                let ax = &a * x;
                let xa = x * &a;
                prop_assert!(max_abs_diff(&ax.adjoint(), &ax) <= 1e-9 * scale);
                prop_assert!(max_abs_diff(&xa.adjoint(), &xa) <= 1e-9 * scale);
            }
        }
    }
}
