//! Dense linear-algebra kernels backed by the system LAPACK (OpenBLAS).
//!
//! All matrices use `ndarray`'s row-major layout. LAPACK is column-major, so
//! wrappers here exploit two standard tricks: a symmetric matrix has the same
//! buffer in either layout, and a row-major `(r, c)` matrix is the column-major
//! transpose `(c, r)`. Each wrapper documents which convention it uses.

use crate::error::{Error, Result};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use std::ffi::c_char;

mod ffi {
    use std::ffi::c_char;

    extern "C" {
        pub fn dpotrf_(uplo: *const c_char, n: *const i32, a: *mut f64, lda: *const i32, info: *mut i32);
        pub fn dpotrs_(
            uplo: *const c_char,
            n: *const i32,
            nrhs: *const i32,
            a: *const f64,
            lda: *const i32,
            b: *mut f64,
            ldb: *const i32,
            info: *mut i32,
        );
        pub fn dpotri_(uplo: *const c_char, n: *const i32, a: *mut f64, lda: *const i32, info: *mut i32);
        pub fn dtrtrs_(
            uplo: *const c_char,
            trans: *const c_char,
            diag: *const c_char,
            n: *const i32,
            nrhs: *const i32,
            a: *const f64,
            lda: *const i32,
            b: *mut f64,
            ldb: *const i32,
            info: *mut i32,
        );
        pub fn dsyevd_(
            jobz: *const c_char,
            uplo: *const c_char,
            n: *const i32,
            a: *mut f64,
            lda: *const i32,
            w: *mut f64,
            work: *mut f64,
            lwork: *const i32,
            iwork: *mut i32,
            liwork: *const i32,
            info: *mut i32,
        );
        pub fn openblas_set_num_threads(n: i32);
    }
}

/// Caps the number of threads OpenBLAS may use for factorizations.
pub fn set_blas_threads(n: usize) {
    unsafe { ffi::openblas_set_num_threads(n.max(1) as i32) }
}

const UPPER: c_char = b'U' as c_char;

fn as_mut_buf(a: &mut Array2<f64>) -> *mut f64 {
    a.as_slice_memory_order_mut()
        .expect("matrix must be contiguous")
        .as_mut_ptr()
}

/// Cholesky factorization `A = L Lᵀ` of a symmetric positive-definite matrix.
///
/// The factor buffer holds the column-major upper factor, which read row-major
/// is exactly the lower factor `L`; accessors below hide this.
#[derive(Debug, Clone)]
pub struct Cholesky {
    factor: Array2<f64>,
    n: usize,
}

impl Cholesky {
    pub fn new(a: &Array2<f64>) -> Result<Self> {
        Self::with_context(a, "Cholesky factorization")
    }

    pub fn with_context(a: &Array2<f64>, context: &str) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "Cholesky requires a square matrix, got {}x{}",
                n,
                a.ncols()
            )));
        }
        let mut factor = a.clone();
        let mut info = 0i32;
        unsafe {
            ffi::dpotrf_(&UPPER, &(n as i32), as_mut_buf(&mut factor), &(n as i32), &mut info);
        }
        if info > 0 {
            return Err(Error::NotPositiveDefinite {
                minor: info as usize,
                context: context.to_string(),
            });
        }
        assert!(info == 0, "dpotrf: invalid argument {}", -info);
        // Zero the (row-major) strict upper triangle so lower() is clean.
        for i in 0..n {
            for j in (i + 1)..n {
                factor[[i, j]] = 0.0;
            }
        }
        Ok(Self { factor, n })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Dense lower factor `L` with zeros above the diagonal.
    pub fn lower(&self) -> &Array2<f64> {
        &self.factor
    }

    pub fn log_det(&self) -> f64 {
        (0..self.n).map(|i| self.factor[[i, i]].ln()).sum::<f64>() * 2.0
    }

    /// Ratio of the smallest to largest Cholesky pivot. Optimized LAPACK
    /// kernels can push an exactly singular matrix through with a roundoff
    /// pivot, so rank checks compare this against a tolerance instead of
    /// relying on the factorization failing.
    pub fn pivot_ratio(&self) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for i in 0..self.n {
            let d = self.factor[[i, i]];
            lo = lo.min(d);
            hi = hi.max(d);
        }
        if hi <= 0.0 {
            0.0
        } else {
            lo / hi
        }
    }

    /// Solves `A x = b`.
    pub fn solve_vec(&self, b: &Array1<f64>) -> Array1<f64> {
        let mut x = b.clone();
        self.potrs(x.as_slice_mut().expect("contiguous"), 1);
        x
    }

    /// Solves `A xᵢ = bᵢ` for every row `bᵢ` of `rhs_rows`, in place.
    pub fn solve_rows_inplace(&self, rhs_rows: &mut Array2<f64>) {
        assert_eq!(rhs_rows.ncols(), self.n, "rhs row length mismatch");
        let nrhs = rhs_rows.nrows();
        self.potrs(
            rhs_rows.as_slice_memory_order_mut().expect("contiguous"),
            nrhs,
        );
    }

    fn potrs(&self, b: &mut [f64], nrhs: usize) {
        let mut info = 0i32;
        unsafe {
            ffi::dpotrs_(
                &UPPER,
                &(self.n as i32),
                &(nrhs as i32),
                self.factor.as_slice_memory_order().expect("contiguous").as_ptr(),
                &(self.n as i32),
                b.as_mut_ptr(),
                &(self.n as i32),
                &mut info,
            );
        }
        assert!(info == 0, "dpotrs: invalid argument {}", -info);
    }

    /// Solves `L x = b` (forward substitution).
    pub fn solve_lower_vec(&self, b: &Array1<f64>) -> Array1<f64> {
        let mut x = b.clone();
        self.trtrs(x.as_slice_mut().expect("contiguous"), 1, b'T');
        x
    }

    /// Solves `Lᵀ x = b` (back substitution).
    pub fn solve_lower_t_vec(&self, b: &Array1<f64>) -> Array1<f64> {
        let mut x = b.clone();
        self.trtrs(x.as_slice_mut().expect("contiguous"), 1, b'N');
        x
    }

    /// Solves `L xᵢ = bᵢ` for every row of `rhs_rows`, in place.
    pub fn solve_lower_rows_inplace(&self, rhs_rows: &mut Array2<f64>) {
        assert_eq!(rhs_rows.ncols(), self.n, "rhs row length mismatch");
        let nrhs = rhs_rows.nrows();
        self.trtrs(
            rhs_rows.as_slice_memory_order_mut().expect("contiguous"),
            nrhs,
            b'T',
        );
    }

    // The stored buffer is the column-major upper factor U with A = UᵀU and
    // L = Uᵀ, so solving L x = b means dtrtrs with trans='T' and vice versa.
    fn trtrs(&self, b: &mut [f64], nrhs: usize, trans: u8) {
        let mut info = 0i32;
        let trans = trans as c_char;
        let diag = b'N' as c_char;
        unsafe {
            ffi::dtrtrs_(
                &UPPER,
                &trans,
                &diag,
                &(self.n as i32),
                &(nrhs as i32),
                self.factor.as_slice_memory_order().expect("contiguous").as_ptr(),
                &(self.n as i32),
                b.as_mut_ptr(),
                &(self.n as i32),
                &mut info,
            );
        }
        assert!(info == 0, "dtrtrs: failed with info {}", info);
    }

    /// Full inverse `A⁻¹` (symmetric).
    pub fn inverse(&self) -> Array2<f64> {
        let mut inv = self.factor.clone();
        let mut info = 0i32;
        unsafe {
            ffi::dpotri_(&UPPER, &(self.n as i32), as_mut_buf(&mut inv), &(self.n as i32), &mut info);
        }
        assert!(info == 0, "dpotri: failed with info {}", info);
        // dpotri fills one triangle; mirror it.
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let lo = inv[[j, i]];
                let hi = inv[[i, j]];
                let v = if lo != 0.0 { lo } else { hi };
                inv[[j, i]] = v;
                inv[[i, j]] = v;
            }
        }
        inv
    }

    /// Draws `x ~ N(mean, A)` using `x = mean + L ε`.
    pub fn sample_mvn<R: Rng>(&self, mean: &Array1<f64>, rng: &mut R) -> Array1<f64> {
        let eps = standard_normal_vec(rng, self.n);
        mean + &self.factor.dot(&eps)
    }
}

/// Factorizes `a + jitter·I`, escalating jitter tenfold from `base_jitter` up
/// to `max_jitter` until the factorization succeeds.
pub fn cholesky_with_jitter(
    a: &Array2<f64>,
    base_jitter: f64,
    max_jitter: f64,
    context: &str,
) -> Result<(Cholesky, f64)> {
    let mut jitter = base_jitter;
    loop {
        let mut m = a.clone();
        for i in 0..m.nrows() {
            m[[i, i]] += jitter;
        }
        match Cholesky::with_context(&m, context) {
            Ok(f) => return Ok((f, jitter)),
            Err(e) => {
                if jitter * 10.0 > max_jitter {
                    return Err(match e {
                        Error::NotPositiveDefinite { minor, .. } => Error::NotPositiveDefinite {
                            minor,
                            context: format!(
                                "{context}: still indefinite at max jitter {max_jitter:.3e}"
                            ),
                        },
                        other => other,
                    });
                }
                jitter *= 10.0;
            }
        }
    }
}

/// Symmetric eigendecomposition `A = Σᵢ λᵢ qᵢ qᵢᵀ`.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Eigenvalues in ascending order.
    pub values: Array1<f64>,
    /// Row `i` holds the eigenvector for `values[i]`.
    pub vectors_rows: Array2<f64>,
}

impl SymEigen {
    pub fn new(a: &Array2<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "eigendecomposition requires a square matrix, got {}x{}",
                n,
                a.ncols()
            )));
        }
        let mut m = a.clone();
        let mut w = Array1::<f64>::zeros(n);
        let jobz = b'V' as c_char;
        let mut info = 0i32;
        // Workspace query, then the real call.
        let mut work_q = [0.0f64];
        let mut iwork_q = [0i32];
        let minus_one = -1i32;
        unsafe {
            ffi::dsyevd_(
                &jobz,
                &UPPER,
                &(n as i32),
                as_mut_buf(&mut m),
                &(n as i32),
                w.as_slice_mut().expect("contiguous").as_mut_ptr(),
                work_q.as_mut_ptr(),
                &minus_one,
                iwork_q.as_mut_ptr(),
                &minus_one,
                &mut info,
            );
        }
        if info != 0 {
            return Err(Error::EigenFailed { info });
        }
        let lwork = work_q[0] as i32;
        let liwork = iwork_q[0];
        let mut work = vec![0.0f64; lwork as usize];
        let mut iwork = vec![0i32; liwork as usize];
        unsafe {
            ffi::dsyevd_(
                &jobz,
                &UPPER,
                &(n as i32),
                as_mut_buf(&mut m),
                &(n as i32),
                w.as_slice_mut().expect("contiguous").as_mut_ptr(),
                work.as_mut_ptr(),
                &lwork,
                iwork.as_mut_ptr(),
                &liwork,
                &mut info,
            );
        }
        if info != 0 {
            return Err(Error::EigenFailed { info });
        }
        // Column-major eigenvector columns read row-major are rows.
        Ok(Self {
            values: w,
            vectors_rows: m,
        })
    }

    /// `Q v` where `Q` has the eigenvectors as columns.
    pub fn from_eigenbasis(&self, v: &Array1<f64>) -> Array1<f64> {
        self.vectors_rows.t().dot(v)
    }

    /// `Qᵀ v`: coordinates of `v` in the eigenbasis.
    pub fn to_eigenbasis(&self, v: &Array1<f64>) -> Array1<f64> {
        self.vectors_rows.dot(v)
    }
}

pub fn standard_normal_vec<R: Rng>(rng: &mut R, n: usize) -> Array1<f64> {
    Array1::from_iter((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

pub fn standard_normal_mat<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Array2<f64> {
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    Array2::from_shape_vec((rows, cols), data).expect("shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn spd_matrix(n: usize) -> Array2<f64> {
        let mut a = Array2::<f64>::eye(n);
        for i in 0..n {
            for j in 0..n {
                a[[i, j]] += 0.8 * (-((i as f64 - j as f64) / 2.0).powi(2)).exp();
            }
        }
        a
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = spd_matrix(12);
        let f = Cholesky::new(&a).unwrap();
        let l = f.lower();
        let diff = (&l.dot(&l.t()) - &a)
            .iter()
            .fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(diff < 1e-12, "reconstruction error {diff}");
    }

    #[test]
    fn solve_matches_direct() {
        let a = array![[4.0, 1.0], [1.0, 3.0]];
        let f = Cholesky::new(&a).unwrap();
        let b = array![1.0, 2.0];
        let x = f.solve_vec(&b);
        // Direct 2x2 inverse: det = 11.
        let expect = array![(3.0 - 2.0) / 11.0, (-1.0 + 8.0) / 11.0];
        assert!((&x - &expect).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn triangular_solves_roundtrip() {
        let a = spd_matrix(8);
        let f = Cholesky::new(&a).unwrap();
        let b = Array1::linspace(1.0, 8.0, 8);
        let y = f.solve_lower_vec(&b);
        let x = f.solve_lower_t_vec(&y);
        let direct = f.solve_vec(&b);
        assert!((&x - &direct).iter().all(|d| d.abs() < 1e-10));
    }

    #[test]
    fn solve_rows_matches_vector_solves() {
        let a = spd_matrix(6);
        let f = Cholesky::new(&a).unwrap();
        let mut rhs = standard_normal_mat(&mut rand_chacha::ChaCha8Rng::seed_from_u64(1), 4, 6);
        let expected: Vec<Array1<f64>> = rhs
            .rows()
            .into_iter()
            .map(|r| f.solve_vec(&r.to_owned()))
            .collect();
        f.solve_rows_inplace(&mut rhs);
        for (i, e) in expected.iter().enumerate() {
            let got = rhs.row(i);
            assert!(got
                .iter()
                .zip(e.iter())
                .all(|(g, w)| (g - w).abs() < 1e-12));
        }
    }

    #[test]
    fn inverse_matches_solve() {
        let a = spd_matrix(5);
        let f = Cholesky::new(&a).unwrap();
        let inv = f.inverse();
        let prod = a.dot(&inv);
        let eye = Array2::<f64>::eye(5);
        let diff = (&prod - &eye).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(diff < 1e-10, "A A^-1 deviates from I by {diff}");
    }

    #[test]
    fn eigen_reconstructs_and_sorts() {
        let a = spd_matrix(10);
        let e = SymEigen::new(&a).unwrap();
        for w in e.values.windows(2) {
            assert!(w[0] <= w[1]);
        }
        // A = R^T diag(w) R with R rows the eigenvectors.
        let lam = Array2::from_diag(&e.values);
        let rec = e.vectors_rows.t().dot(&lam).dot(&e.vectors_rows);
        let diff = (&rec - &a).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(diff < 1e-10, "eigen reconstruction error {diff}");
    }

    #[test]
    fn not_positive_definite_reports_minor() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        match Cholesky::new(&a) {
            Err(Error::NotPositiveDefinite { minor, .. }) => assert_eq!(minor, 2),
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
    }

    #[test]
    fn jitter_escalates_until_factorizable() {
        // Rank-one matrix: PSD but singular, so it needs jitter.
        let v = array![1.0, 2.0, 3.0];
        let a = v
            .view()
            .insert_axis(ndarray::Axis(1))
            .dot(&v.view().insert_axis(ndarray::Axis(0)));
        let (f, jitter) = cholesky_with_jitter(&a, 1e-12, 1e-2, "test").unwrap();
        assert!(jitter >= 1e-12);
        assert_eq!(f.dim(), 3);
    }

    use rand::SeedableRng;
}
