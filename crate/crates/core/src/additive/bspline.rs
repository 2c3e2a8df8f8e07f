//! Cubic B-spline bases on quantile-spaced knots with exact curvature
//! penalties.

use crate::error::{Error, Result};
use ndarray::{Array1, Array2};

/// A univariate B-spline basis. Evaluation clamps to the knot range so the
/// basis extends constantly to points outside the data used to build it.
#[derive(Debug, Clone)]
pub struct BSplineBasis {
    degree: usize,
    /// Full knot vector: boundary knots repeated degree+1 times.
    knots: Vec<f64>,
    dim: usize,
    lo: f64,
    hi: f64,
}

impl BSplineBasis {
    /// Builds a cubic basis with `basis_dim` functions using interior knots at
    /// quantiles of the distinct data values. If the data has too few distinct
    /// values, the dimension is reduced (with a warning) down to a floor of 4.
    pub fn from_data(values: &[f64], basis_dim: usize) -> Result<Self> {
        const DEGREE: usize = 3;
        if basis_dim < 4 {
            return Err(Error::InvalidInput(format!(
                "cubic basis needs basis_dim >= 4, got {basis_dim}"
            )));
        }
        let mut distinct: Vec<f64> = values.to_vec();
        distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
        distinct.dedup();
        if distinct.len() < 2 {
            return Err(Error::InvalidInput(
                "basis column is constant; drop the term instead".into(),
            ));
        }
        let mut dim = basis_dim;
        if distinct.len() < dim {
            log::warn!(
                "only {} distinct values; reducing basis dimension from {} to {}",
                distinct.len(),
                dim,
                distinct.len().max(4)
            );
            dim = distinct.len().max(4);
        }
        let lo = distinct[0];
        let hi = *distinct.last().unwrap();
        let n_interior = dim - DEGREE - 1;
        let mut interior = Vec::with_capacity(n_interior);
        for i in 1..=n_interior {
            let q = i as f64 / (n_interior + 1) as f64;
            interior.push(quantile_of_sorted(&distinct, q));
        }
        interior.dedup();
        if interior.len() < n_interior {
            log::warn!(
                "duplicate interior knots collapsed; basis dimension reduced to {}",
                interior.len() + DEGREE + 1
            );
            dim = interior.len() + DEGREE + 1;
        }
        let mut knots = Vec::with_capacity(dim + DEGREE + 1);
        knots.extend(std::iter::repeat(lo).take(DEGREE + 1));
        knots.extend(interior);
        knots.extend(std::iter::repeat(hi).take(DEGREE + 1));
        Ok(Self {
            degree: DEGREE,
            knots,
            dim,
            lo,
            hi,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Values of all basis functions at `x` (clamped to the knot range).
    pub fn eval(&self, x: f64) -> Vec<f64> {
        self.eval_deriv(x, 0)
    }

    /// Values of the order-th derivative of every basis function at `x`.
    pub fn eval_deriv(&self, x: f64, order: usize) -> Vec<f64> {
        let x = x.clamp(self.lo, self.hi);
        if order > self.degree {
            return vec![0.0; self.dim];
        }
        // Degree-0 seed for the reduced degree, then raise the degree through
        // the derivative ladder.
        let low_degree = self.degree - order;
        let count_at = |d: usize| self.knots.len() - d - 1;
        let mut vals = vec![0.0f64; count_at(0)];
        let span = self.find_span(x);
        vals[span] = 1.0;
        // Standard Cox-de Boor elevation to `low_degree`.
        for d in 1..=low_degree {
            let cnt = count_at(d);
            let mut next = vec![0.0f64; cnt];
            for i in 0..cnt {
                let mut v = 0.0;
                let den1 = self.knots[i + d] - self.knots[i];
                if den1 > 0.0 {
                    v += (x - self.knots[i]) / den1 * vals[i];
                }
                let den2 = self.knots[i + d + 1] - self.knots[i + 1];
                if den2 > 0.0 {
                    v += (self.knots[i + d + 1] - x) / den2 * vals[i + 1];
                }
                next[i] = v;
            }
            vals = next;
        }
        // Derivative ladder: values of degree-d functions give order+1-st
        // derivative of degree-(d+1) functions.
        for d in low_degree..self.degree {
            let cnt = count_at(d + 1);
            let mut next = vec![0.0f64; cnt];
            let factor = (d + 1) as f64;
            for i in 0..cnt {
                let mut v = 0.0;
                let den1 = self.knots[i + d + 1] - self.knots[i];
                if den1 > 0.0 {
                    v += vals[i] / den1;
                }
                let den2 = self.knots[i + d + 2] - self.knots[i + 1];
                if den2 > 0.0 {
                    v -= vals[i + 1] / den2;
                }
                next[i] = factor * v;
            }
            vals = next;
        }
        debug_assert_eq!(vals.len(), self.dim);
        vals
    }

    fn find_span(&self, x: f64) -> usize {
        // Last interval [t_i, t_{i+1}) containing x; the final nonempty
        // interval is treated as closed.
        let last = self.knots.len() - 1;
        if x >= self.hi {
            // Last index with knots[i] < hi.
            let mut i = last;
            while i > 0 && self.knots[i - 1] >= self.hi {
                i -= 1;
            }
            return i - 1;
        }
        let mut i = 0;
        while i + 1 <= last && !(self.knots[i] <= x && x < self.knots[i + 1]) {
            i += 1;
        }
        i
    }

    /// Design matrix of basis values at the given points.
    pub fn design(&self, xs: &Array1<f64>) -> Array2<f64> {
        let mut z = Array2::<f64>::zeros((xs.len(), self.dim));
        for (i, &x) in xs.iter().enumerate() {
            let row = self.eval(x);
            for (j, v) in row.into_iter().enumerate() {
                z[[i, j]] = v;
            }
        }
        z
    }

    /// Exact curvature penalty S[a,b] = ∫ B_a''(t) B_b''(t) dt over the knot
    /// range. Second derivatives of cubic splines are piecewise linear, so
    /// per-interval Gauss-Legendre with 3 points is exact.
    pub fn curvature_penalty(&self) -> Array2<f64> {
        let mut s = Array2::<f64>::zeros((self.dim, self.dim));
        // 3-point Gauss-Legendre nodes/weights on [-1, 1].
        let nodes = [-(0.6f64).sqrt(), 0.0, (0.6f64).sqrt()];
        let weights = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
        for w in self.knots.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            let mid = 0.5 * (a + b);
            let half = 0.5 * (b - a);
            for (t, wt) in nodes.iter().zip(weights.iter()) {
                let x = mid + half * t;
                let d2 = self.eval_deriv(x, 2);
                let scale = wt * half;
                for p in 0..self.dim {
                    if d2[p] == 0.0 {
                        continue;
                    }
                    for q in p..self.dim {
                        let v = scale * d2[p] * d2[q];
                        s[[p, q]] += v;
                        if p != q {
                            s[[q, p]] += v;
                        }
                    }
                }
            }
        }
        s
    }
}

fn quantile_of_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let pos = q * (n as f64 - 1.0);
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    }
}

pub fn kronecker(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let (m, n) = a.dim();
    let (p, q) = b.dim();
    let mut out = Array2::<f64>::zeros((m * p, n * q));
    for i in 0..m {
        for j in 0..n {
            let scale = a[[i, j]];
            if scale == 0.0 {
                continue;
            }
            let mut block = out.slice_mut(ndarray::s![i * p..(i + 1) * p, j * q..(j + 1) * q]);
            block.assign(&(b * scale));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;

    fn grid(n: usize, lo: f64, hi: f64) -> Array1<f64> {
        Array1::from_shape_fn(n, |i| lo + (hi - lo) * i as f64 / (n as f64 - 1.0))
    }

    #[test]
    fn partition_of_unity_and_linear_precision() {
        let xs = grid(200, -2.0, 2.0);
        let basis = BSplineBasis::from_data(xs.as_slice().unwrap(), 10).unwrap();
        let z = basis.design(&xs);
        for i in 0..xs.len() {
            let sum: f64 = z.row(i).sum();
            assert!((sum - 1.0).abs() < 1e-10, "partition of unity at {i}: {sum}");
        }
        // Cubic B-splines reproduce linear functions exactly: least squares
        // for u(x) = x leaves no residual.
        let gram = z.t().dot(&z);
        let rhs = z.t().dot(&xs);
        let coef = crate::linalg::Cholesky::new(&gram).unwrap().solve_vec(&rhs);
        let fit = z.dot(&coef);
        for i in 0..xs.len() {
            assert!((fit[i] - xs[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn requested_dimension_realized() {
        let xs = grid(500, 0.0, 1.0);
        for dim in [4, 6, 10, 15] {
            let basis = BSplineBasis::from_data(xs.as_slice().unwrap(), dim).unwrap();
            assert_eq!(basis.dim(), dim);
        }
    }

    #[test]
    fn few_distinct_values_reduce_dimension() {
        let xs = vec![0.0, 1.0, 2.0, 3.0, 4.0, 0.0, 1.0, 2.0];
        let basis = BSplineBasis::from_data(&xs, 10).unwrap();
        assert!(basis.dim() <= 5.max(4));
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let xs = grid(50, -1.0, 1.0);
        let basis = BSplineBasis::from_data(xs.as_slice().unwrap(), 8).unwrap();
        let h = 1e-6;
        for &x in [-0.7, -0.2, 0.31, 0.9].iter() {
            let d1 = basis.eval_deriv(x, 1);
            let up = basis.eval(x + h);
            let dn = basis.eval(x - h);
            for j in 0..basis.dim() {
                let fd = (up[j] - dn[j]) / (2.0 * h);
                assert!(
                    (d1[j] - fd).abs() < 1e-5,
                    "first derivative basis {j} at {x}: {} vs {fd}",
                    d1[j]
                );
            }
            let d2 = basis.eval_deriv(x, 2);
            let mid = basis.eval(x);
            for j in 0..basis.dim() {
                let fd = (up[j] - 2.0 * mid[j] + dn[j]) / (h * h);
                assert!(
                    (d2[j] - fd).abs() < 1e-3,
                    "second derivative basis {j} at {x}: {} vs {fd}",
                    d2[j]
                );
            }
        }
    }

    #[test]
    fn curvature_penalty_matches_quadratic_integral() {
        // Represent g(x) = a x^2 + b x + c in the basis; the quadratic form
        // must equal ∫ (2a)² dt over the range.
        let xs = grid(300, -1.5, 2.5);
        let basis = BSplineBasis::from_data(xs.as_slice().unwrap(), 12).unwrap();
        let (a, b, c) = (0.7, -0.3, 1.1);
        let g = xs.mapv(|x| a * x * x + b * x + c);
        let z = basis.design(&xs);
        let gram = z.t().dot(&z);
        let coef = crate::linalg::Cholesky::new(&gram)
            .unwrap()
            .solve_vec(&z.t().dot(&g));
        let s = basis.curvature_penalty();
        let quad = coef.dot(&s.dot(&coef));
        let expect = (2.0 * a) * (2.0 * a) * (2.5 - (-1.5));
        assert!(
            (quad - expect).abs() / expect < 0.02,
            "curvature {quad} vs integral {expect}"
        );
    }

    #[test]
    fn penalty_null_space_contains_linear_functions() {
        let xs = grid(100, 0.0, 4.0);
        let basis = BSplineBasis::from_data(xs.as_slice().unwrap(), 9).unwrap();
        let z = basis.design(&xs);
        let gram = z.t().dot(&z);
        let coef = crate::linalg::Cholesky::new(&gram)
            .unwrap()
            .solve_vec(&z.t().dot(&xs.mapv(|x| 2.0 * x - 1.0)));
        let s = basis.curvature_penalty();
        let quad = coef.dot(&s.dot(&coef));
        assert!(quad.abs() < 1e-8, "linear function has curvature {quad}");
    }

    #[test]
    fn kronecker_small_case() {
        let a = ndarray::array![[1.0, 2.0], [0.0, 1.0]];
        let b = ndarray::array![[0.0, 1.0], [1.0, 0.0]];
        let k = kronecker(&a, &b);
        assert_eq!(k.dim(), (4, 4));
        assert_eq!(k[[0, 1]], 1.0);
        assert_eq!(k[[0, 3]], 2.0);
        assert_eq!(k[[2, 3]], 1.0);
        assert_eq!(k[[3, 2]], 1.0);
        assert_eq!(k[[3, 3]], 0.0);
        assert_eq!(k[[2, 2]], 0.0);
        assert_eq!(k[[3, 0]], 0.0);
    }
}
