//! Summary-quality diagnostics: posterior samples of the summary R² and the
//! interval-inflation factor φ, summary residuals, and the residual
//! regression tree that flags unmodeled interactions.

use crate::data::{PosteriorDraws, PredictiveLocations};
use crate::error::{Error, Result};
use ndarray::{Array1, Array2};
use serde::Serialize;

/// Sorted-slice quantile with linear interpolation (type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let n = sorted.len();
    let pos = q.clamp(0.0, 1.0) * (n as f64 - 1.0);
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    }
}

pub fn quantiles_of(values: &[f64], probs: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    probs.iter().map(|&p| quantile_sorted(&v, p)).collect()
}

pub const REPORT_QUANTILES: [f64; 5] = [0.025, 0.25, 0.5, 0.75, 0.975];

/// Draw-wise summary R²: per draw k,
/// R² = 1 − Σᵢ(f^(k)ᵢ − γ^(k)ᵢ)² / Σᵢ(f^(k)ᵢ − f̄^(k))².
/// Draws with a constant fitted vector have no defined value and are
/// excluded, with the count reported.
#[derive(Debug, Clone)]
pub struct R2Draws {
    pub values: Vec<f64>,
    pub excluded: usize,
}

pub fn summary_r2(draws: &PosteriorDraws, gamma_draws: &Array2<f64>) -> Result<R2Draws> {
    if draws.f_draws.dim() != gamma_draws.dim() {
        return Err(Error::DimensionMismatch(format!(
            "f draws are {:?}, gamma draws are {:?}",
            draws.f_draws.dim(),
            gamma_draws.dim()
        )));
    }
    let n = draws.n_locations() as f64;
    let mut values = Vec::with_capacity(draws.m());
    let mut excluded = 0usize;
    for (f, g) in draws.f_draws.rows().into_iter().zip(gamma_draws.rows()) {
        let f_bar = f.sum() / n;
        let mut num = 0.0;
        let mut den = 0.0;
        for (fi, gi) in f.iter().zip(g.iter()) {
            num += (fi - gi).powi(2);
            den += (fi - f_bar).powi(2);
        }
        if den <= 0.0 {
            excluded += 1;
        } else {
            values.push(1.0 - num / den);
        }
    }
    if excluded > 0 {
        log::warn!("summary R² undefined for {excluded} constant draws; excluded");
    }
    Ok(R2Draws { values, excluded })
}

/// Observed responses at the predictive locations, or draw-matched rows from
/// the posterior predictive.
#[derive(Debug, Clone)]
pub enum PhiSource {
    Observed(Array1<f64>),
    PredictiveDraws(Array2<f64>),
}

impl PhiSource {
    /// Posterior-predictive draws ỹ^(k) = f^(k) + σ^(k) ε, seeded.
    pub fn predictive_from(draws: &PosteriorDraws, seed: u64) -> Self {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
        let mut out = draws.f_draws.clone();
        for (mut row, s2) in out.rows_mut().into_iter().zip(draws.sigma2_draws.iter()) {
            let sd = s2.sqrt();
            for v in row.iter_mut() {
                *v += sd * rng.sample::<f64, _>(rand_distr::StandardNormal);
            }
        }
        PhiSource::PredictiveDraws(out)
    }
}

/// Draw-wise interval-inflation factor:
/// φ^(k) = sqrt(ñ⁻¹ Σᵢ (ỹᵢ − γ^(k)ᵢ)²) / σ^(k) − 1.
pub fn phi_gamma(
    gamma_draws: &Array2<f64>,
    sigma2_draws: &Array1<f64>,
    y_tilde: &PhiSource,
) -> Result<Vec<f64>> {
    let m = gamma_draws.nrows();
    let n = gamma_draws.ncols();
    if sigma2_draws.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "{} sigma draws for {} gamma draws",
            sigma2_draws.len(),
            m
        )));
    }
    match y_tilde {
        PhiSource::Observed(y) if y.len() != n => {
            return Err(Error::DimensionMismatch(format!(
                "observed ỹ has {} entries for {} locations",
                y.len(),
                n
            )))
        }
        PhiSource::PredictiveDraws(yd) if yd.dim() != (m, n) => {
            return Err(Error::DimensionMismatch(format!(
                "predictive draws are {:?}, expected ({m}, {n})",
                yd.dim()
            )))
        }
        _ => {}
    }
    let mut out = Vec::with_capacity(m);
    for (k, g) in gamma_draws.rows().into_iter().enumerate() {
        let mut ss = 0.0;
        match y_tilde {
            PhiSource::Observed(y) => {
                for (yi, gi) in y.iter().zip(g.iter()) {
                    ss += (yi - gi).powi(2);
                }
            }
            PhiSource::PredictiveDraws(yd) => {
                for (yi, gi) in yd.row(k).iter().zip(g.iter()) {
                    ss += (yi - gi).powi(2);
                }
            }
        }
        let rmse = (ss / n as f64).sqrt();
        out.push(rmse / sigma2_draws[k].sqrt() - 1.0);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Residual regression tree
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct TreeNode {
    pub n_points: usize,
    pub mean_residual: f64,
    pub sse: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<Box<TreeSplit>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TreeSplit {
    pub column: usize,
    pub value: f64,
    pub sse_reduction: f64,
    pub left: TreeNode,
    pub right: TreeNode,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankedPair {
    pub columns: (usize, usize),
    pub score: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualTree {
    pub root: TreeNode,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Covariate pairs appearing in adjacent parent-child splits, ranked by
    /// their summed SSE reduction.
    pub candidate_pairs: Vec<RankedPair>,
}

pub fn default_min_leaf(n: usize) -> usize {
    10.max(n / 200)
}

pub const DEFAULT_TREE_DEPTH: usize = 4;

struct SplitChoice {
    column: usize,
    value: f64,
    sse_children: f64,
}

fn node_stats(residuals: &[f64], idx: &[usize]) -> (f64, f64) {
    let n = idx.len() as f64;
    let mean = idx.iter().map(|&i| residuals[i]).sum::<f64>() / n;
    let sse = idx.iter().map(|&i| (residuals[i] - mean).powi(2)).sum::<f64>();
    (mean, sse)
}

/// Best split over all columns and midpoints of adjacent distinct values,
/// minimizing the within-children SSE. Ties break to the lowest column, then
/// the lowest threshold.
fn best_split(
    residuals: &[f64],
    x: &Array2<f64>,
    idx: &[usize],
    min_leaf: usize,
) -> Option<SplitChoice> {
    let p = x.ncols();
    let mut best: Option<SplitChoice> = None;
    for col in 0..p {
        let mut order: Vec<usize> = idx.to_vec();
        order.sort_by(|&a, &b| {
            x[[a, col]]
                .partial_cmp(&x[[b, col]])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        // Prefix sums over the sorted order.
        let n = order.len();
        let mut prefix_sum = vec![0.0f64; n + 1];
        let mut prefix_sq = vec![0.0f64; n + 1];
        for (t, &i) in order.iter().enumerate() {
            prefix_sum[t + 1] = prefix_sum[t] + residuals[i];
            prefix_sq[t + 1] = prefix_sq[t] + residuals[i] * residuals[i];
        }
        let total_sum = prefix_sum[n];
        let total_sq = prefix_sq[n];
        for t in 1..n {
            // Split between sorted positions t-1 and t; requires distinct values.
            let lo = x[[order[t - 1], col]];
            let hi = x[[order[t], col]];
            if hi <= lo {
                continue;
            }
            if t < min_leaf || n - t < min_leaf {
                continue;
            }
            let left_n = t as f64;
            let right_n = (n - t) as f64;
            let left_sse = prefix_sq[t] - prefix_sum[t] * prefix_sum[t] / left_n;
            let right_sum = total_sum - prefix_sum[t];
            let right_sse = (total_sq - prefix_sq[t]) - right_sum * right_sum / right_n;
            let sse_children = left_sse + right_sse;
            let value = 0.5 * (lo + hi);
            let better = match &best {
                None => true,
                Some(b) => {
                    sse_children < b.sse_children - 1e-12
                        || ((sse_children - b.sse_children).abs() <= 1e-12
                            && (col < b.column || (col == b.column && value < b.value)))
                }
            };
            if better {
                best = Some(SplitChoice {
                    column: col,
                    value,
                    sse_children,
                });
            }
        }
    }
    best
}

fn grow(
    residuals: &[f64],
    x: &Array2<f64>,
    idx: Vec<usize>,
    depth: usize,
    max_depth: usize,
    min_leaf: usize,
) -> TreeNode {
    let (mean, sse) = node_stats(residuals, &idx);
    let mut node = TreeNode {
        n_points: idx.len(),
        mean_residual: mean,
        sse,
        split: None,
    };
    if depth >= max_depth || idx.len() < 2 * min_leaf || sse <= 1e-12 {
        return node;
    }
    if let Some(choice) = best_split(residuals, x, &idx, min_leaf) {
        let reduction = sse - choice.sse_children;
        // Every accepted split must strictly reduce the within-node SSE.
        if reduction <= 1e-12 {
            return node;
        }
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| x[[i, choice.column]] <= choice.value);
        let left = grow(residuals, x, left_idx, depth + 1, max_depth, min_leaf);
        let right = grow(residuals, x, right_idx, depth + 1, max_depth, min_leaf);
        node.split = Some(Box::new(TreeSplit {
            column: choice.column,
            value: choice.value,
            sse_reduction: reduction,
            left,
            right,
        }));
    }
    node
}

fn collect_pairs(node: &TreeNode, pairs: &mut std::collections::BTreeMap<(usize, usize), f64>) {
    if let Some(split) = &node.split {
        for child in [&split.left, &split.right] {
            if let Some(cs) = &child.split {
                if cs.column != split.column {
                    let key = (split.column.min(cs.column), split.column.max(cs.column));
                    *pairs.entry(key).or_insert(0.0) += split.sse_reduction + cs.sse_reduction;
                }
            }
            collect_pairs(child, pairs);
        }
    }
}

/// Greedy CART regression of the summary residuals on the covariates.
pub fn fit_residual_tree(
    residuals: &Array1<f64>,
    locations: &PredictiveLocations,
    max_depth: usize,
    min_leaf: usize,
) -> Result<ResidualTree> {
    let n = residuals.len();
    if locations.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} residuals for {} locations",
            n,
            locations.n()
        )));
    }
    if n < 2 * min_leaf {
        return Err(Error::InvalidInput(format!(
            "tree needs at least 2·min_leaf = {} points, got {n}",
            2 * min_leaf
        )));
    }
    let res: Vec<f64> = residuals.to_vec();
    let root = grow(
        &res,
        &locations.x_tilde,
        (0..n).collect(),
        0,
        max_depth,
        min_leaf,
    );
    let mut pair_map = std::collections::BTreeMap::new();
    collect_pairs(&root, &mut pair_map);
    let mut candidate_pairs: Vec<RankedPair> = pair_map
        .into_iter()
        .map(|(columns, score)| RankedPair { columns, score })
        .collect();
    candidate_pairs.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.columns.cmp(&b.columns))
    });
    Ok(ResidualTree {
        root,
        max_depth,
        min_leaf,
        candidate_pairs,
    })
}

// ---------------------------------------------------------------------------
// Report assembly
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct MetricSummary {
    pub probs: Vec<f64>,
    pub quantiles: Vec<f64>,
    pub mean: f64,
}

impl MetricSummary {
    pub fn from_draws(values: &[f64]) -> Self {
        let mean = if values.is_empty() {
            f64::NAN
        } else {
            values.iter().sum::<f64>() / values.len() as f64
        };
        Self {
            probs: REPORT_QUANTILES.to_vec(),
            quantiles: quantiles_of(values, &REPORT_QUANTILES),
            mean,
        }
    }

    pub fn median(&self) -> f64 {
        self.quantiles[2]
    }
}

/// Full diagnostics for one summary: metric posteriors, point residuals, and
/// the residual tree.
#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsReport {
    pub summary_id: String,
    pub r2: MetricSummary,
    pub r2_excluded: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<MetricSummary>,
    #[serde(skip)]
    pub r2_draws: Vec<f64>,
    #[serde(skip)]
    pub phi_draws: Option<Vec<f64>>,
    #[serde(skip)]
    pub residuals: Array1<f64>,
    pub tree: ResidualTree,
}

impl DiagnosticsReport {
    /// Assembles diagnostics from the model draws and the summary draws.
    pub fn build(
        summary_id: impl Into<String>,
        draws: &PosteriorDraws,
        gamma_draws: &Array2<f64>,
        gamma_point: &Array1<f64>,
        locations: &PredictiveLocations,
        y_tilde: Option<&PhiSource>,
        max_depth: usize,
        min_leaf: usize,
    ) -> Result<Self> {
        let r2 = summary_r2(draws, gamma_draws)?;
        let phi_draws = match y_tilde {
            Some(src) => Some(phi_gamma(gamma_draws, &draws.sigma2_draws, src)?),
            None => None,
        };
        let f_hat = draws.posterior_mean_fit();
        let residuals = &f_hat - gamma_point;
        let tree = fit_residual_tree(&residuals, locations, max_depth, min_leaf)?;
        Ok(Self {
            summary_id: summary_id.into(),
            r2: MetricSummary::from_draws(&r2.values),
            r2_excluded: r2.excluded,
            phi: phi_draws.as_ref().map(|p| MetricSummary::from_draws(p)),
            r2_draws: r2.values,
            phi_draws,
            residuals,
            tree,
        })
    }

    /// Long-format draw values for violin plots: metric,draw,value
    pub fn violin_csv(&self) -> String {
        let mut out = String::from("metric,draw,value\n");
        for (k, v) in self.r2_draws.iter().enumerate() {
            out.push_str(&format!("r2,{k},{v}\n"));
        }
        if let Some(phi) = &self.phi_draws {
            for (k, v) in phi.iter().enumerate() {
                out.push_str(&format!("phi,{k},{v}\n"));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{LocationOrigin, ModelTag};
    use ndarray::array;

    fn draws_from(f: Array2<f64>, sigma2: f64) -> PosteriorDraws {
        let m = f.nrows();
        PosteriorDraws::new(
            f,
            Array1::from_elem(m, sigma2),
            "t",
            ModelTag::External,
            0,
        )
        .unwrap()
    }

    #[test]
    fn r2_perfect_and_intercept_only() {
        let f = array![[1.0, 2.0, 3.0], [0.5, 1.0, 1.5]];
        let draws = draws_from(f.clone(), 1.0);
        let perfect = summary_r2(&draws, &f).unwrap();
        assert!(perfect.values.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        // gamma = per-draw mean.
        let g = array![[2.0, 2.0, 2.0], [1.0, 1.0, 1.0]];
        let zero = summary_r2(&draws, &g).unwrap();
        assert!(zero.values.iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn r2_direct_formula_case() {
        // f = [1,2,3], gamma = [1,2,2]: 1 − 1/2 = 0.5.
        let draws = draws_from(array![[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]], 1.0);
        let g = array![[1.0, 2.0, 2.0], [1.0, 2.0, 2.0]];
        let r2 = summary_r2(&draws, &g).unwrap();
        assert!((r2.values[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn r2_constant_draw_excluded_with_count() {
        let draws = draws_from(array![[1.0, 1.0, 1.0], [1.0, 2.0, 3.0]], 1.0);
        let g = array![[1.0, 1.0, 1.0], [1.0, 2.0, 3.0]];
        let r2 = summary_r2(&draws, &g).unwrap();
        assert_eq!(r2.excluded, 1);
        assert_eq!(r2.values.len(), 1);
    }

    #[test]
    fn r2_location_invariance() {
        let f = array![[1.0, 2.0, 4.0], [0.0, 1.0, 3.0]];
        let g = array![[1.1, 2.2, 3.6], [0.2, 0.9, 2.9]];
        let base = summary_r2(&draws_from(f.clone(), 1.0), &g).unwrap();
        let shifted = summary_r2(&draws_from(f + 7.5, 1.0), &(g + 7.5)).unwrap();
        for (a, b) in base.values.iter().zip(shifted.values.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn phi_trivial_cases_and_scale_contract() {
        let y = array![1.0, 2.0, 3.0];
        let g = array![[1.0, 2.0, 3.0]];
        // Exact match: phi = -1.
        let phi = phi_gamma(&g, &array![0.5], &PhiSource::Observed(y.clone())).unwrap();
        assert!((phi[0] + 1.0).abs() < 1e-15);
        // Residual RMSE equal to sigma: phi = 0.
        let g2 = array![[0.0, 2.0, 3.0]]; // SS = 1, rmse = sqrt(1/3)
        let sigma2 = array![1.0 / 3.0];
        let phi2 = phi_gamma(&g2, &sigma2, &PhiSource::Observed(y.clone())).unwrap();
        assert!(phi2[0].abs() < 1e-12);
        // Scaling residuals and sigma jointly leaves phi unchanged.
        let c = 3.7;
        let y_scaled = y.mapv(|v| v * c);
        let g_scaled = g2.mapv(|v| v * c);
        let phi3 = phi_gamma(
            &g_scaled,
            &sigma2.mapv(|v| v * c * c),
            &PhiSource::Observed(y_scaled),
        )
        .unwrap();
        assert!((phi3[0] - phi2[0]).abs() < 1e-12);
    }

    #[test]
    fn phi_predictive_rows_are_draw_matched() {
        let f = array![[1.0, 2.0], [3.0, 4.0]];
        let draws = draws_from(f.clone(), 0.25);
        let src = PhiSource::predictive_from(&draws, 5);
        if let PhiSource::PredictiveDraws(yd) = &src {
            assert_eq!(yd.dim(), (2, 2));
            // Deterministic under the seed.
            let src2 = PhiSource::predictive_from(&draws, 5);
            if let PhiSource::PredictiveDraws(yd2) = &src2 {
                assert_eq!(yd, yd2);
            }
        } else {
            panic!("expected predictive draws");
        }
        let phi = phi_gamma(&f, &draws.sigma2_draws, &src).unwrap();
        assert_eq!(phi.len(), 2);
    }

    #[test]
    fn zero_residuals_give_single_node_tree() {
        let x = Array2::from_shape_fn((40, 2), |(i, j)| (i * (j + 1)) as f64);
        let loc = PredictiveLocations::new(x, LocationOrigin::Synthetic, "t").unwrap();
        let res = Array1::<f64>::zeros(40);
        let tree = fit_residual_tree(&res, &loc, 4, 5).unwrap();
        assert!(tree.root.split.is_none());
        assert!(tree.candidate_pairs.is_empty());
    }

    #[test]
    fn signum_interaction_detected_on_grid() {
        // residuals = sign(x1)·sign(x2) on a 16-point grid with unbalanced
        // sign counts (a perfectly balanced grid has zero marginal SSE gain,
        // so no strictly improving split exists): the root splits one of the
        // two columns, both children split the other, and (0,1) ranks first.
        let va: [f64; 4] = [-1.5, 0.5, 1.0, 1.5];
        let vb: [f64; 4] = [-1.0, 0.5, 1.0, 2.0];
        let mut rows = Vec::new();
        for &a in &va {
            for &b in &vb {
                rows.push((a, b));
            }
        }
        let x = Array2::from_shape_fn((16, 2), |(i, j)| if j == 0 { rows[i].0 } else { rows[i].1 });
        let res = Array1::from_shape_fn(16, |i| rows[i].0.signum() * rows[i].1.signum());
        let loc = PredictiveLocations::new(x.clone(), LocationOrigin::Synthetic, "t").unwrap();
        let tree = fit_residual_tree(&res, &loc, 2, 1).unwrap();
        let root_split = tree.root.split.as_ref().expect("root must split");
        assert_eq!(root_split.column, 0, "tie on SSE breaks to the lowest column");
        assert!((root_split.value - (-0.5)).abs() < 1e-12);
        assert!((root_split.sse_reduction - 3.0).abs() < 1e-12);
        let lc = root_split.left.split.as_ref().expect("left child splits");
        let rc = root_split.right.split.as_ref().expect("right child splits");
        assert_eq!(lc.column, 1);
        assert_eq!(rc.column, 1);
        assert!((lc.sse_reduction - 3.0).abs() < 1e-12);
        assert!((rc.sse_reduction - 9.0).abs() < 1e-12);
        assert_eq!(tree.candidate_pairs[0].columns, (0, 1));
        assert!((tree.candidate_pairs[0].score - 18.0).abs() < 1e-12);

        // Exhaustive root oracle: no (column, threshold) pairing beats the
        // greedy choice.
        let best_greedy = root_split.sse_reduction;
        let mut best_exhaustive = 0.0f64;
        for col in 0..2 {
            let vals = if col == 0 { &va } else { &vb };
            for t in 0..3 {
                let thr = (vals[t] + vals[t + 1]) / 2.0;
                let (l, r): (Vec<usize>, Vec<usize>) =
                    (0..16).partition(|&i| x[[i, col]] <= thr);
                let sse = |idx: &[usize]| {
                    let m = idx.iter().map(|&i| res[i]).sum::<f64>() / idx.len() as f64;
                    idx.iter().map(|&i| (res[i] - m).powi(2)).sum::<f64>()
                };
                let total = sse(&(0..16).collect::<Vec<_>>());
                let red = total - sse(&l) - sse(&r);
                best_exhaustive = best_exhaustive.max(red);
            }
        }
        assert!(
            (best_greedy - best_exhaustive).abs() < 1e-12,
            "greedy {best_greedy} vs exhaustive {best_exhaustive}"
        );
    }

    #[test]
    fn splits_strictly_reduce_sse_and_leaves_respect_min_leaf() {
        let mut rng = {
            use rand::SeedableRng;
            rand_chacha::ChaCha20Rng::seed_from_u64(8)
        };
        use rand::Rng;
        let n = 300;
        let x: Array2<f64> = Array2::from_shape_fn((n, 3), |_| rng.gen_range(-2.0..2.0));
        let res = Array1::from_shape_fn(n, |i| {
            (x[[i, 0]] * x[[i, 1]]).tanh() + 0.1 * rng.gen_range(-1.0..1.0)
        });
        let loc = PredictiveLocations::new(x, LocationOrigin::Synthetic, "t").unwrap();
        let min_leaf = 15;
        let tree = fit_residual_tree(&res, &loc, 4, min_leaf).unwrap();
        fn walk(node: &TreeNode, min_leaf: usize) {
            if let Some(s) = &node.split {
                assert!(s.sse_reduction > 0.0);
                assert!(s.left.n_points >= min_leaf);
                assert!(s.right.n_points >= min_leaf);
                assert!(s.left.n_points + s.right.n_points == node.n_points);
                walk(&s.left, min_leaf);
                walk(&s.right, min_leaf);
            } else {
                assert!(node.n_points >= min_leaf);
            }
        }
        walk(&tree.root, min_leaf);
    }

    #[test]
    fn tree_is_deterministic() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(10);
        let n = 120;
        let x = Array2::from_shape_fn((n, 2), |_| rng.gen_range(-1.0..1.0));
        let res = Array1::from_shape_fn(n, |i| x[[i, 0]] * x[[i, 1]]);
        let loc = PredictiveLocations::new(x, LocationOrigin::Synthetic, "t").unwrap();
        let t1 = fit_residual_tree(&res, &loc, 4, 10).unwrap();
        let t2 = fit_residual_tree(&res, &loc, 4, 10).unwrap();
        assert_eq!(
            serde_json::to_string(&t1).unwrap(),
            serde_json::to_string(&t2).unwrap()
        );
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [4.0, 1.0, 3.0, 2.0];
        let q = quantiles_of(&v, &[0.0, 0.5, 1.0]);
        assert_eq!(q, vec![1.0, 2.5, 4.0]);
    }
}
