//! Additive and partially additive spline summaries: constrained basis
//! construction, penalized least-squares point fits with GCV smoothing
//! selection, and per-term projected posteriors through the influence matrix.

pub mod bspline;

use crate::data::PosteriorDraws;
use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use bspline::{kronecker, BSplineBasis};
use ndarray::{Array1, Array2, Axis};
use serde::Serialize;
use std::ops::Range;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TermKind {
    Univariate,
    Bivariate,
}

pub const DEFAULT_UNIVARIATE_DIM: usize = 10;
pub const DEFAULT_BIVARIATE_DIM: usize = 30;

#[derive(Debug, Clone)]
enum TermBasis {
    Uni(BSplineBasis),
    Tensor(BSplineBasis, BSplineBasis),
}

/// One smooth term of an additive summary: constrained basis evaluations over
/// the predictive locations, plus its curvature penalty.
#[derive(Debug, Clone)]
pub struct SmoothTerm {
    pub kind: TermKind,
    /// Covariate indices this term smooths over (one or two).
    pub columns: Vec<usize>,
    pub basis_dim: usize,
    /// ñ x q block of constrained basis values; every column sums to zero
    /// over the sample.
    pub z_block: Array2<f64>,
    /// q x q curvature penalty in the constrained parameterization.
    pub s_block: Array2<f64>,
    pub label: String,
    basis: TermBasis,
    /// Raw-to-constrained reparameterization (q_raw x q).
    transform: Array2<f64>,
    /// Covariate values over the locations, kept so interactions can be
    /// rebuilt and curves evaluated on fresh grids.
    col_values: Vec<Array1<f64>>,
}

impl SmoothTerm {
    pub fn q(&self) -> usize {
        self.z_block.ncols()
    }

    /// Constrained basis row for a new point (positions follow `columns`).
    pub fn basis_row(&self, coords: &[f64]) -> Array1<f64> {
        let raw = match &self.basis {
            TermBasis::Uni(b) => Array1::from(b.eval(coords[0])),
            TermBasis::Tensor(b1, b2) => {
                let r1 = b1.eval(coords[0]);
                let r2 = b2.eval(coords[1]);
                let mut out = Array1::<f64>::zeros(r1.len() * r2.len());
                for (i, v1) in r1.iter().enumerate() {
                    for (j, v2) in r2.iter().enumerate() {
                        out[i * r2.len() + j] = v1 * v2;
                    }
                }
                out
            }
        };
        self.transform.t().dot(&raw)
    }

    pub fn value_range(&self, which: usize) -> (f64, f64) {
        let vals = &self.col_values[which];
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

/// Householder reflector columns spanning the null space of the constraint
/// row `c`, so `Z_raw · Q` has exactly zero column sums.
fn sum_to_zero_transform(colsums: &Array1<f64>) -> Array2<f64> {
    let q = colsums.len();
    let norm = colsums.dot(colsums).sqrt();
    let mut v = colsums.clone();
    let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
    v[0] += sign * norm;
    let vtv = v.dot(&v);
    let mut h = Array2::<f64>::eye(q);
    if vtv > 0.0 {
        for i in 0..q {
            for j in 0..q {
                h[[i, j]] -= 2.0 * v[i] * v[j] / vtv;
            }
        }
    }
    h.slice(ndarray::s![.., 1..]).to_owned()
}

/// Splits a bivariate basis dimension into marginal dimensions (at least 4
/// each, product covering the request).
fn marginal_dims(basis_dim: usize) -> (usize, usize) {
    let m1 = ((basis_dim as f64).sqrt().round() as usize).max(4);
    let m2 = basis_dim.div_ceil(m1).max(4);
    (m1, m2)
}

/// Builds a smooth term over the given covariate values: a cubic B-spline
/// basis on quantile knots (univariate) or a tensor product of marginal bases
/// with the summed marginal curvature penalty (bivariate). The sum-to-zero
/// constraint is absorbed by reparameterization.
pub fn build_smooth(
    values: &[Array1<f64>],
    columns: &[usize],
    kind: TermKind,
    basis_dim: usize,
) -> Result<SmoothTerm> {
    match kind {
        TermKind::Univariate => {
            if values.len() != 1 || columns.len() != 1 {
                return Err(Error::InvalidInput("univariate term needs one column".into()));
            }
            if basis_dim < 4 {
                return Err(Error::InvalidInput("univariate basis_dim must be >= 4".into()));
            }
            let basis = BSplineBasis::from_data(values[0].as_slice().unwrap(), basis_dim)?;
            let z_raw = basis.design(&values[0]);
            let s_raw = basis.curvature_penalty();
            let colsums = z_raw.sum_axis(Axis(0));
            let transform = sum_to_zero_transform(&colsums);
            let z = z_raw.dot(&transform);
            let s = transform.t().dot(&s_raw).dot(&transform);
            Ok(SmoothTerm {
                kind,
                columns: columns.to_vec(),
                basis_dim,
                z_block: z,
                s_block: s,
                label: format!("s(x{})", columns[0] + 1),
                basis: TermBasis::Uni(basis),
                transform,
                col_values: values.to_vec(),
            })
        }
        TermKind::Bivariate => {
            if values.len() != 2 || columns.len() != 2 {
                return Err(Error::InvalidInput("bivariate term needs two columns".into()));
            }
            if basis_dim < 10 {
                return Err(Error::InvalidInput("bivariate basis_dim must be >= 10".into()));
            }
            let (m1, m2) = marginal_dims(basis_dim);
            let b1 = BSplineBasis::from_data(values[0].as_slice().unwrap(), m1)?;
            let b2 = BSplineBasis::from_data(values[1].as_slice().unwrap(), m2)?;
            let (m1, m2) = (b1.dim(), b2.dim());
            let n = values[0].len();
            let z1 = b1.design(&values[0]);
            let z2 = b2.design(&values[1]);
            let mut z_raw = Array2::<f64>::zeros((n, m1 * m2));
            for i in 0..n {
                for a in 0..m1 {
                    let v1 = z1[[i, a]];
                    if v1 == 0.0 {
                        continue;
                    }
                    for b in 0..m2 {
                        z_raw[[i, a * m2 + b]] = v1 * z2[[i, b]];
                    }
                }
            }
            // Isotropic summed marginal curvature: S1 ⊗ I + I ⊗ S2.
            let s1 = b1.curvature_penalty();
            let s2 = b2.curvature_penalty();
            let s_raw =
                kronecker(&s1, &Array2::eye(m2)) + kronecker(&Array2::eye(m1), &s2);
            let colsums = z_raw.sum_axis(Axis(0));
            let transform = sum_to_zero_transform(&colsums);
            let z = z_raw.dot(&transform);
            let s = transform.t().dot(&s_raw).dot(&transform);
            Ok(SmoothTerm {
                kind,
                columns: columns.to_vec(),
                basis_dim,
                z_block: z,
                s_block: s,
                label: format!("s(x{},x{})", columns[0] + 1, columns[1] + 1),
                basis: TermBasis::Tensor(b1, b2),
                transform,
                col_values: values.to_vec(),
            })
        }
    }
}

/// Replaces the univariate terms for the pair's columns with a single
/// bivariate term, leaving the rest of the additive structure unchanged.
pub fn add_interaction(
    terms: &[SmoothTerm],
    pair: (usize, usize),
    bivariate_dim: usize,
) -> Result<Vec<SmoothTerm>> {
    let (k, l) = pair;
    if k == l {
        return Err(Error::InvalidInput("interaction needs two distinct columns".into()));
    }
    for t in terms {
        if t.kind == TermKind::Bivariate && (t.columns.contains(&k) || t.columns.contains(&l)) {
            return Err(Error::InvalidInput(format!(
                "column {} or {} already belongs to the bivariate term {}",
                k, l, t.label
            )));
        }
    }
    let find = |col: usize| {
        terms
            .iter()
            .find(|t| t.kind == TermKind::Univariate && t.columns == [col])
            .ok_or_else(|| {
                Error::InvalidInput(format!("no univariate term for column {col} to merge"))
            })
    };
    let tk = find(k)?;
    let tl = find(l)?;
    let bivariate = build_smooth(
        &[tk.col_values[0].clone(), tl.col_values[0].clone()],
        &[k, l],
        TermKind::Bivariate,
        bivariate_dim,
    )?;
    let mut out: Vec<SmoothTerm> = terms
        .iter()
        .filter(|t| !(t.kind == TermKind::Univariate && (t.columns == [k] || t.columns == [l])))
        .cloned()
        .collect();
    out.push(bivariate);
    Ok(out)
}

#[derive(Debug, Clone)]
pub enum LambdaSelect {
    Gcv,
    Fixed(Vec<f64>),
}

/// A fitted additive summary. The influence map is kept in factored form
/// `P = Z · B` with `B = (ZᵀZ + Σ λ_j S_j)⁻¹ Zᵀ`; `P_j = Z_j · B_j` rows act
/// on draws without ever materializing ñ x ñ matrices.
#[derive(Debug, Clone)]
pub struct AdditiveSummaryFit {
    pub terms: Vec<SmoothTerm>,
    pub alpha: f64,
    pub delta_hat: Array1<f64>,
    pub lambdas: Vec<f64>,
    /// Fitted per-term vectors over the locations.
    pub point_terms: Vec<Array1<f64>>,
    /// Per-term M x ñ draw evaluations, filled by [`project_additive`].
    pub term_draws: Option<Vec<Array2<f64>>>,
    pub alpha_draws: Option<Array1<f64>>,
    /// M x q coefficient draws, filled by [`project_additive`].
    pub coef_draws: Option<Array2<f64>>,
    pub locations_id: String,
    pub gcv_score: f64,
    pub effective_dof: f64,
    design: Array2<f64>,
    projector: Array2<f64>,
    block_ranges: Vec<Range<usize>>,
}

impl AdditiveSummaryFit {
    pub fn n_locations(&self) -> usize {
        self.design.nrows()
    }

    pub fn q_total(&self) -> usize {
        self.design.ncols()
    }

    pub fn block_range(&self, j: usize) -> Range<usize> {
        self.block_ranges[j].clone()
    }

    /// alpha + sum of fitted terms.
    pub fn fitted_point(&self) -> Array1<f64> {
        let mut out = Array1::from_elem(self.n_locations(), self.alpha);
        for t in &self.point_terms {
            out += t;
        }
        out
    }

    /// Dense influence matrix P (ñ x ñ). Intended for verification on small
    /// problems; the fitted maps use the factored form.
    pub fn influence_matrix(&self) -> Array2<f64> {
        self.design.dot(&self.projector)
    }

    /// Dense per-term influence block P_j.
    pub fn term_influence(&self, j: usize) -> Array2<f64> {
        let r = self.block_ranges[j].clone();
        let zj = self.design.slice(ndarray::s![.., r.clone()]);
        let bj = self.projector.slice(ndarray::s![r, ..]);
        zj.dot(&bj)
    }

    /// Applies the summary map to an arbitrary target vector: returns
    /// (alpha, per-term fitted vectors).
    pub fn apply(&self, target: &Array1<f64>) -> (f64, Vec<Array1<f64>>) {
        let alpha = target.sum() / target.len() as f64;
        let coefs = self.projector.dot(target);
        let mut out = Vec::with_capacity(self.block_ranges.len());
        for r in &self.block_ranges {
            let zj = self.design.slice(ndarray::s![.., r.clone()]);
            let cj = coefs.slice(ndarray::s![r.clone()]).to_owned();
            out.push(zj.dot(&cj));
        }
        (alpha, out)
    }

    /// Summary evaluations for every projected draw (requires
    /// [`project_additive`]): gamma^(k) = alpha^(k) + Z c^(k).
    pub fn gamma_draws(&self) -> Result<Array2<f64>> {
        let coef = self
            .coef_draws
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("call project_additive first".into()))?;
        let alpha = self.alpha_draws.as_ref().expect("set with coef_draws");
        let mut g = coef.dot(&self.design.t());
        for (mut row, a) in g.rows_mut().into_iter().zip(alpha.iter()) {
            row += *a;
        }
        Ok(g)
    }

    /// Point curve and credible band for term `j` on a fresh grid.
    pub fn term_curve(&self, j: usize, n_grid: usize, level: f64) -> Result<TermCurve> {
        let term = &self.terms[j];
        let r = self.block_ranges[j].clone();
        let delta_j = self.delta_hat.slice(ndarray::s![r.clone()]).to_owned();
        let coef_draws = self
            .coef_draws
            .as_ref()
            .map(|c| c.slice(ndarray::s![.., r.clone()]).to_owned());

        let eval_points: Vec<Vec<f64>> = match term.kind {
            TermKind::Univariate => {
                let (lo, hi) = term.value_range(0);
                (0..n_grid)
                    .map(|i| vec![lo + (hi - lo) * i as f64 / (n_grid as f64 - 1.0)])
                    .collect()
            }
            TermKind::Bivariate => {
                let side = (n_grid as f64).sqrt().ceil() as usize;
                let (lo1, hi1) = term.value_range(0);
                let (lo2, hi2) = term.value_range(1);
                let mut pts = Vec::with_capacity(side * side);
                for i in 0..side {
                    for j2 in 0..side {
                        pts.push(vec![
                            lo1 + (hi1 - lo1) * i as f64 / (side as f64 - 1.0),
                            lo2 + (hi2 - lo2) * j2 as f64 / (side as f64 - 1.0),
                        ]);
                    }
                }
                pts
            }
        };

        let mut point = Vec::with_capacity(eval_points.len());
        let mut lo_band = Vec::with_capacity(eval_points.len());
        let mut hi_band = Vec::with_capacity(eval_points.len());
        let lo_q = (1.0 - level) / 2.0;
        for coords in &eval_points {
            let row = term.basis_row(coords);
            point.push(row.dot(&delta_j));
            if let Some(cd) = &coef_draws {
                let mut vals: Vec<f64> = cd.rows().into_iter().map(|c| row.dot(&c)).collect();
                vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
                lo_band.push(crate::diagnostics::quantile_sorted(&vals, lo_q));
                hi_band.push(crate::diagnostics::quantile_sorted(&vals, 1.0 - lo_q));
            }
        }
        Ok(TermCurve {
            label: self.terms[j].label.clone(),
            coords: eval_points,
            point,
            lo: lo_band,
            hi: hi_band,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TermCurve {
    pub label: String,
    pub coords: Vec<Vec<f64>>,
    pub point: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

struct GcvState<'a> {
    ztz: Array2<f64>,
    ztf: Array1<f64>,
    design: &'a Array2<f64>,
    f_centered: Array1<f64>,
    blocks: Vec<Range<usize>>,
    s_blocks: Vec<&'a Array2<f64>>,
    n: usize,
}

impl<'a> GcvState<'a> {
    /// Returns (gcv, delta, edf); gcv is +inf when the effective dof reaches n.
    fn evaluate(&self, lambdas: &[f64]) -> Result<(f64, Array1<f64>, f64)> {
        let q = self.ztz.nrows();
        let mut m = self.ztz.clone();
        for ((range, s), &lam) in self.blocks.iter().zip(&self.s_blocks).zip(lambdas) {
            for (bi, i) in range.clone().enumerate() {
                for (bj, j) in range.clone().enumerate() {
                    m[[i, j]] += lam * s[[bi, bj]];
                }
            }
        }
        let factor = Cholesky::with_context(&m, "penalized normal equations").map_err(|e| {
            if matches!(e, Error::NotPositiveDefinite { .. }) {
                Error::RankDeficient {
                    columns: vec![format!("additive design ({} columns)", q)],
                }
            } else {
                e
            }
        })?;
        let delta = factor.solve_vec(&self.ztf);
        let minv = factor.inverse();
        let tr_a = 1.0
            + minv
                .iter()
                .zip(self.ztz.iter())
                .map(|(a, b)| a * b)
                .sum::<f64>();
        let fit = self.design.dot(&delta);
        let rss: f64 = self
            .f_centered
            .iter()
            .zip(fit.iter())
            .map(|(f, g)| (f - g).powi(2))
            .sum();
        let denom = self.n as f64 - tr_a;
        let gcv = if denom <= 0.0 {
            f64::INFINITY
        } else {
            self.n as f64 * rss / (denom * denom)
        };
        Ok((gcv, delta, tr_a))
    }
}

const LOG_LAMBDA_RANGE: (f64, f64) = (-8.0, 8.0);
const GCV_CYCLES: usize = 3;

/// Penalized least-squares fit of `f_hat` by the additive structure in
/// `terms`, minimizing ‖f̂ − α − Zδ‖² + Σ_j λ_j δᵀS_jδ. Smoothing parameters
/// come from coordinate-wise golden-section search on the GCV score over
/// log-lambda in [-8, 8] (relative to a data-scaled unit per term), or are
/// fixed by the caller.
pub fn fit_additive(
    f_hat: &Array1<f64>,
    terms: Vec<SmoothTerm>,
    select: &LambdaSelect,
    locations_id: impl Into<String>,
) -> Result<AdditiveSummaryFit> {
    if terms.is_empty() {
        return Err(Error::InvalidInput("additive fit needs at least one term".into()));
    }
    let n = f_hat.len();
    for t in &terms {
        if t.z_block.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "term {} has {} rows for {} targets",
                t.label,
                t.z_block.nrows(),
                n
            )));
        }
    }
    let q_total: usize = terms.iter().map(|t| t.q()).sum();
    let mut design = Array2::<f64>::zeros((n, q_total));
    let mut blocks = Vec::with_capacity(terms.len());
    let mut off = 0usize;
    for t in &terms {
        let r = off..off + t.q();
        design.slice_mut(ndarray::s![.., r.clone()]).assign(&t.z_block);
        blocks.push(r);
        off += t.q();
    }

    let alpha = f_hat.sum() / n as f64;
    let f_centered = f_hat - alpha;
    let ztz = design.t().dot(&design);
    let ztf = design.t().dot(&f_centered);
    let state = GcvState {
        ztz,
        ztf,
        design: &design,
        f_centered: f_centered.clone(),
        blocks: blocks.clone(),
        s_blocks: terms.iter().map(|t| &t.s_block).collect(),
        n,
    };

    // Data-scaled unit lambda per term.
    let units: Vec<f64> = terms
        .iter()
        .map(|t| {
            let tz = (0..t.q()).map(|i| {
                let col = t.z_block.column(i);
                col.dot(&col)
            });
            let tr_z: f64 = tz.sum();
            let tr_s: f64 = (0..t.q()).map(|i| t.s_block[[i, i]]).sum();
            if tr_s > 0.0 {
                tr_z / tr_s
            } else {
                1.0
            }
        })
        .collect();

    let lambdas: Vec<f64> = match select {
        LambdaSelect::Fixed(ls) => {
            if ls.len() != terms.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} lambdas for {} terms",
                    ls.len(),
                    terms.len()
                )));
            }
            ls.clone()
        }
        LambdaSelect::Gcv => {
            let mut u = vec![0.0f64; terms.len()];
            for _cycle in 0..GCV_CYCLES {
                for j in 0..terms.len() {
                    u[j] = golden_section(
                        |uj| {
                            let mut trial: Vec<f64> = u
                                .iter()
                                .zip(units.iter())
                                .map(|(&ui, &unit)| ui.exp() * unit)
                                .collect();
                            trial[j] = uj.exp() * units[j];
                            state
                                .evaluate(&trial)
                                .map(|(g, _, _)| g)
                                .unwrap_or(f64::INFINITY)
                        },
                        LOG_LAMBDA_RANGE.0,
                        LOG_LAMBDA_RANGE.1,
                        1e-3,
                    );
                }
            }
            u.iter().zip(units.iter()).map(|(&ui, &unit)| ui.exp() * unit).collect()
        }
    };

    let (gcv_score, delta_hat, edf) = state.evaluate(&lambdas)?;
    if !gcv_score.is_finite() && matches!(select, LambdaSelect::Gcv) {
        return Err(Error::InvalidInput(
            "GCV denominator non-positive at every lambda; effective dof reaches ñ — raise the lambda floor or reduce basis dimensions".into(),
        ));
    }

    // Factored influence map B = (ZᵀZ + S_λ)⁻¹ Zᵀ.
    let mut m = state.ztz.clone();
    for ((range, t), &lam) in blocks.iter().zip(&terms).zip(&lambdas) {
        for (bi, i) in range.clone().enumerate() {
            for (bj, j) in range.clone().enumerate() {
                m[[i, j]] += lam * t.s_block[[bi, bj]];
            }
        }
    }
    let factor = Cholesky::with_context(&m, "penalized normal equations")?;
    let mut projector = design.t().to_owned();
    // Solve M B = Zᵀ column-block by treating rows of Zᵀ... dpotrs wants each
    // rhs contiguous; projector rows are q-long? We need M⁻¹ (q x q) times
    // (q x ñ): solve with rhs in row-major columns. Transposing twice keeps it
    // simple at these sizes.
    projector = {
        let mut rhs = projector.reversed_axes().as_standard_layout().to_owned(); // ñ x q
        factor.solve_rows_inplace(&mut rhs);
        rhs.reversed_axes().as_standard_layout().to_owned() // q x ñ
    };

    let point_terms: Vec<Array1<f64>> = blocks
        .iter()
        .map(|r| {
            let zj = design.slice(ndarray::s![.., r.clone()]);
            let dj = delta_hat.slice(ndarray::s![r.clone()]).to_owned();
            zj.dot(&dj)
        })
        .collect();

    Ok(AdditiveSummaryFit {
        terms,
        alpha,
        delta_hat,
        lambdas,
        point_terms,
        term_draws: None,
        alpha_draws: None,
        coef_draws: None,
        locations_id: locations_id.into(),
        gcv_score,
        effective_dof: edf,
        design,
        projector,
        block_ranges: blocks,
    })
}

fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        c
    } else {
        d
    }
}

/// Projects every posterior draw through the fitted influence map, holding
/// the smoothing parameters fixed at the point-fit values: h_j^(k) = P_j f^(k).
pub fn project_additive(draws: &PosteriorDraws, fit: &mut AdditiveSummaryFit) -> Result<()> {
    if draws.n_locations() != fit.n_locations() {
        return Err(Error::DimensionMismatch(format!(
            "draws cover {} locations, fit was built over {}",
            draws.n_locations(),
            fit.n_locations()
        )));
    }
    if draws.locations_id != fit.locations_id {
        return Err(Error::InvalidInput(format!(
            "draw locations {:?} do not match fit locations {:?}",
            draws.locations_id, fit.locations_id
        )));
    }
    let m = draws.m();
    // Per-draw intercepts are the draw means (1 ⊥ Z by the constraint).
    let alpha_draws = draws.f_draws.sum_axis(Axis(1)) / draws.n_locations() as f64;
    // Coefficient draws in one product: (M x ñ)(ñ x q).
    let coef_draws = draws.f_draws.dot(&fit.projector.t());
    let mut term_draws = Vec::with_capacity(fit.block_ranges.len());
    for r in &fit.block_ranges {
        let zj = fit.design.slice(ndarray::s![.., r.clone()]);
        let cj = coef_draws.slice(ndarray::s![.., r.clone()]);
        term_draws.push(cj.dot(&zj.t()));
    }
    debug_assert_eq!(alpha_draws.len(), m);
    fit.term_draws = Some(term_draws);
    fit.alpha_draws = Some(alpha_draws);
    fit.coef_draws = Some(coef_draws);
    Ok(())
}
