//! Iterative summary refinement: linear → additive → partially additive
//! escalation with diagnostics at every round, exhaustive two-way interaction
//! ranking, and local linear summaries over synthetic predictive locations.

use crate::additive::{
    add_interaction, build_smooth, fit_additive, project_additive, AdditiveSummaryFit,
    LambdaSelect, SmoothTerm, TermKind, DEFAULT_BIVARIATE_DIM, DEFAULT_UNIVARIATE_DIM,
};
use crate::data::{Dataset, LocationOrigin, PosteriorDraws, PredictiveLocations};
use crate::diagnostics::{
    DiagnosticsReport, MetricSummary, PhiSource, DEFAULT_TREE_DEPTH,
};
use crate::error::{Error, Result};
use crate::gp::{sample_posterior, GpHyperparameters, GpSamplerOptions};
use crate::linear::{interval_per_column, project_draws, InclusionVector, LinearSummaryFit};
use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

// ---------------------------------------------------------------------------
// Linear summaries with an intercept (for draws that are not centered)
// ---------------------------------------------------------------------------

/// A linear summary gamma(x) = alpha + x'beta fitted by projection onto the
/// centered columns; the intercept is the draw mean.
#[derive(Debug, Clone)]
pub struct CenteredLinearSummary {
    pub fit: LinearSummaryFit,
    pub alpha_point: f64,
    pub alpha_draws: Array1<f64>,
    pub column_means: Array1<f64>,
}

impl CenteredLinearSummary {
    pub fn gamma_draws(&self, locations: &PredictiveLocations) -> Array2<f64> {
        let centered = centered_locations(locations, &self.column_means, &self.fit.eta);
        let mut g = self.fit.projected_draws.dot(&centered.t());
        for (mut row, a) in g.rows_mut().into_iter().zip(self.alpha_draws.iter()) {
            row += *a;
        }
        g
    }

    pub fn gamma_point(&self, locations: &PredictiveLocations) -> Array1<f64> {
        let centered = centered_locations(locations, &self.column_means, &self.fit.eta);
        centered.dot(&self.fit.point) + self.alpha_point
    }
}

fn centered_locations(
    locations: &PredictiveLocations,
    means: &Array1<f64>,
    eta: &InclusionVector,
) -> Array2<f64> {
    let cols = eta.indices();
    let mut x = locations.x_tilde.select(Axis(1), &cols);
    for (mut col, &j) in x.columns_mut().into_iter().zip(cols.iter()) {
        col -= means[j];
    }
    x
}

/// Projects draws onto span{1, X̃_eta} by centering the columns; the
/// intercept draw is the per-draw mean over the locations.
pub fn linear_summary_with_intercept(
    draws: &PosteriorDraws,
    locations: &PredictiveLocations,
    eta: &InclusionVector,
) -> Result<CenteredLinearSummary> {
    let n = locations.n() as f64;
    let column_means = locations.x_tilde.sum_axis(Axis(0)) / n;
    let mut centered = PredictiveLocations {
        x_tilde: locations.x_tilde.clone(),
        weights: locations.weights.clone(),
        origin: locations.origin,
        id: locations.id.clone(),
    };
    for (mut col, mu) in centered.x_tilde.columns_mut().into_iter().zip(column_means.iter()) {
        col -= *mu;
    }
    let fit = project_draws(draws, &centered, eta)?;
    let alpha_draws = draws.f_draws.sum_axis(Axis(1)) / draws.n_locations() as f64;
    let alpha_point = alpha_draws.sum() / alpha_draws.len() as f64;
    Ok(CenteredLinearSummary {
        fit,
        alpha_point,
        alpha_draws,
        column_means,
    })
}

// ---------------------------------------------------------------------------
// Interaction search
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct PairResult {
    pub pair: (usize, usize),
    pub r2_median: f64,
    pub delta_vs_base: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct InteractionSearchConfig {
    pub bivariate_dim: usize,
}

impl Default for InteractionSearchConfig {
    fn default() -> Self {
        Self {
            bivariate_dim: DEFAULT_BIVARIATE_DIM,
        }
    }
}

/// Fits the partial-additive summary for every candidate pair and ranks the
/// pairs by the posterior median of the summary R². Fit failures are recorded
/// per pair and rank last. The ranking does not depend on candidate order.
pub fn interaction_search(
    draws: &PosteriorDraws,
    base_terms: &[SmoothTerm],
    base_r2_median: f64,
    candidates: &[(usize, usize)],
    cfg: &InteractionSearchConfig,
) -> Result<Vec<PairResult>> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("interaction search needs candidates".into()));
    }
    let f_hat = draws.posterior_mean_fit();
    let locations_id = draws.locations_id.clone();
    let mut results: Vec<PairResult> = candidates
        .par_iter()
        .map(|&(k, l)| {
            let pair = (k.min(l), k.max(l));
            let run = || -> Result<f64> {
                let terms = add_interaction(base_terms, pair, cfg.bivariate_dim)?;
                let mut fit = fit_additive(&f_hat, terms, &LambdaSelect::Gcv, locations_id.clone())?;
                project_additive(draws, &mut fit)?;
                let gamma = fit.gamma_draws()?;
                let r2 = crate::diagnostics::summary_r2(draws, &gamma)?;
                Ok(MetricSummary::from_draws(&r2.values).median())
            };
            match run() {
                Ok(med) => PairResult {
                    pair,
                    r2_median: med,
                    delta_vs_base: med - base_r2_median,
                    error: None,
                },
                Err(e) => {
                    log::warn!("interaction candidate {pair:?} failed: {e}");
                    PairResult {
                        pair,
                        r2_median: f64::NEG_INFINITY,
                        delta_vs_base: f64::NEG_INFINITY,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect();
    results.sort_by(|a, b| {
        b.r2_median
            .partial_cmp(&a.r2_median)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.pair.cmp(&b.pair))
    });
    Ok(results)
}

/// Candidate pool: all p(p−1)/2 pairs while p is small; beyond that, pairs
/// flagged by the residual tree plus pairs among the columns with the largest
/// fitted-term variance.
pub fn candidate_pairs(
    p: usize,
    tree_pairs: &[(usize, usize)],
    fit: &AdditiveSummaryFit,
) -> Vec<(usize, usize)> {
    if p <= 12 {
        let mut all = Vec::with_capacity(p * (p - 1) / 2);
        for k in 0..p {
            for l in (k + 1)..p {
                all.push((k, l));
            }
        }
        return all;
    }
    let mut set: std::collections::BTreeSet<(usize, usize)> = tree_pairs.iter().cloned().collect();
    // Top-8 columns by fitted-term variance.
    let mut var_by_col: Vec<(f64, usize)> = fit
        .terms
        .iter()
        .zip(fit.point_terms.iter())
        .filter(|(t, _)| t.kind == TermKind::Univariate)
        .map(|(t, v)| {
            let m = v.sum() / v.len() as f64;
            let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64;
            (var, t.columns[0])
        })
        .collect();
    var_by_col.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let top: Vec<usize> = var_by_col.iter().take(8).map(|&(_, c)| c).collect();
    for (i, &a) in top.iter().enumerate() {
        for &b in &top[i + 1..] {
            set.insert((a.min(b), a.max(b)));
        }
    }
    set.into_iter().collect()
}

// ---------------------------------------------------------------------------
// Algorithm-level summary search
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, PartialEq)]
#[serde(tag = "class", rename_all = "kebab-case")]
pub enum SummarySpec {
    Linear,
    SparseLinear {
        support: Vec<usize>,
    },
    Additive {
        basis_dim: usize,
    },
    PartialAdditive {
        pair: (usize, usize),
        basis_dim: usize,
        bivariate_dim: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Accepted,
    Exhausted,
    Budget,
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    pub spec: SummarySpec,
    pub diagnostics: DiagnosticsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ranked_pairs: Option<Vec<PairResult>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchState {
    pub history: Vec<RoundRecord>,
    pub stop_reason: StopReason,
    pub r2_threshold: f64,
}

#[derive(Debug, Clone)]
pub struct SearchPolicy {
    /// Accept once the posterior-median summary R² reaches this level.
    pub r2_threshold: f64,
    /// Summary classes to try, in escalation order; at most 3 are defined.
    pub max_rounds: usize,
    pub basis_dim: usize,
    pub bivariate_dim: usize,
    pub tree_depth: usize,
    pub min_leaf: Option<usize>,
    /// Observed responses (or predictive draws) for φ; omitted when the
    /// locations carry no observations.
    pub phi_source: Option<PhiSource>,
}

impl Default for SearchPolicy {
    fn default() -> Self {
        Self {
            r2_threshold: 0.9,
            max_rounds: 3,
            basis_dim: DEFAULT_UNIVARIATE_DIM,
            bivariate_dim: DEFAULT_BIVARIATE_DIM,
            tree_depth: DEFAULT_TREE_DEPTH,
            min_leaf: None,
            phi_source: None,
        }
    }
}

fn univariate_terms(locations: &PredictiveLocations, basis_dim: usize) -> Result<Vec<SmoothTerm>> {
    let mut terms = Vec::with_capacity(locations.p());
    for j in 0..locations.p() {
        let col = locations.x_tilde.column(j).to_owned();
        match build_smooth(&[col], &[j], TermKind::Univariate, basis_dim) {
            Ok(t) => terms.push(t),
            Err(e) => {
                // Near-constant columns drop to the intercept.
                log::warn!("dropping term for column {j}: {e}");
            }
        }
    }
    if terms.is_empty() {
        return Err(Error::InvalidInput("no usable columns for additive terms".into()));
    }
    Ok(terms)
}

/// Runs the iterative summary search: a linear summary first, then an
/// additive summary, then a tree-guided partially additive summary. Every
/// intermediate summary keeps its full diagnostics in the history; all of
/// them have valid projected posteriors.
pub fn run_summary_search(
    draws: &PosteriorDraws,
    locations: &PredictiveLocations,
    policy: &SearchPolicy,
) -> Result<SearchState> {
    if draws.n_locations() != locations.n() {
        return Err(Error::DimensionMismatch(format!(
            "draws cover {} locations, X̃ has {} rows",
            draws.n_locations(),
            locations.n()
        )));
    }
    let min_leaf = policy
        .min_leaf
        .unwrap_or_else(|| crate::diagnostics::default_min_leaf(locations.n()));
    let mut history: Vec<RoundRecord> = Vec::new();
    let mut stop_reason = StopReason::Budget;

    let accepted = |rec: &RoundRecord, threshold: f64| rec.diagnostics.r2.median() >= threshold;

    // Round 1: linear.
    if policy.max_rounds >= 1 {
        let lin = linear_summary_with_intercept(draws, locations, &InclusionVector::all(locations.p()))?;
        let gamma_draws = lin.gamma_draws(locations);
        let gamma_point = lin.gamma_point(locations);
        let diagnostics = DiagnosticsReport::build(
            "linear",
            draws,
            &gamma_draws,
            &gamma_point,
            locations,
            policy.phi_source.as_ref(),
            policy.tree_depth,
            min_leaf,
        )?;
        let rec = RoundRecord {
            round: 1,
            spec: SummarySpec::Linear,
            diagnostics,
            ranked_pairs: None,
        };
        let done = accepted(&rec, policy.r2_threshold);
        history.push(rec);
        if done {
            return Ok(SearchState {
                history,
                stop_reason: StopReason::Accepted,
                r2_threshold: policy.r2_threshold,
            });
        }
    }

    // Round 2: additive.
    let mut base_fit: Option<AdditiveSummaryFit> = None;
    if policy.max_rounds >= 2 {
        let terms = univariate_terms(locations, policy.basis_dim)?;
        let f_hat = draws.posterior_mean_fit();
        let mut fit = fit_additive(&f_hat, terms, &LambdaSelect::Gcv, locations.id.clone())?;
        project_additive(draws, &mut fit)?;
        let gamma_draws = fit.gamma_draws()?;
        let gamma_point = fit.fitted_point();
        let diagnostics = DiagnosticsReport::build(
            "additive",
            draws,
            &gamma_draws,
            &gamma_point,
            locations,
            policy.phi_source.as_ref(),
            policy.tree_depth,
            min_leaf,
        )?;
        let rec = RoundRecord {
            round: 2,
            spec: SummarySpec::Additive {
                basis_dim: policy.basis_dim,
            },
            diagnostics,
            ranked_pairs: None,
        };
        let done = accepted(&rec, policy.r2_threshold);
        history.push(rec);
        if done {
            return Ok(SearchState {
                history,
                stop_reason: StopReason::Accepted,
                r2_threshold: policy.r2_threshold,
            });
        }
        base_fit = Some(fit);
    }

    // Round 3: partially additive with the best-ranked interaction.
    if policy.max_rounds >= 3 {
        let fit = base_fit.expect("round 2 ran");
        let base_median = history.last().expect("round 2 recorded").diagnostics.r2.median();
        let tree_pairs: Vec<(usize, usize)> = history
            .last()
            .unwrap()
            .diagnostics
            .tree
            .candidate_pairs
            .iter()
            .map(|rp| rp.columns)
            .collect();
        let candidates = candidate_pairs(locations.p(), &tree_pairs, &fit);
        if candidates.is_empty() {
            return Ok(SearchState {
                history,
                stop_reason: StopReason::Exhausted,
                r2_threshold: policy.r2_threshold,
            });
        }
        let ranked = interaction_search(
            draws,
            &fit.terms,
            base_median,
            &candidates,
            &InteractionSearchConfig {
                bivariate_dim: policy.bivariate_dim,
            },
        )?;
        let best = ranked[0].pair;
        let terms = add_interaction(&fit.terms, best, policy.bivariate_dim)?;
        let f_hat = draws.posterior_mean_fit();
        let mut best_fit = fit_additive(&f_hat, terms, &LambdaSelect::Gcv, locations.id.clone())?;
        project_additive(draws, &mut best_fit)?;
        let gamma_draws = best_fit.gamma_draws()?;
        let gamma_point = best_fit.fitted_point();
        let diagnostics = DiagnosticsReport::build(
            format!("partial-additive({},{})", best.0, best.1),
            draws,
            &gamma_draws,
            &gamma_point,
            locations,
            policy.phi_source.as_ref(),
            policy.tree_depth,
            min_leaf,
        )?;
        let rec = RoundRecord {
            round: 3,
            spec: SummarySpec::PartialAdditive {
                pair: best,
                basis_dim: policy.basis_dim,
                bivariate_dim: policy.bivariate_dim,
            },
            diagnostics,
            ranked_pairs: Some(ranked),
        };
        let done = accepted(&rec, policy.r2_threshold);
        history.push(rec);
        stop_reason = if done {
            StopReason::Accepted
        } else {
            StopReason::Exhausted
        };
    }

    Ok(SearchState {
        history,
        stop_reason,
        r2_threshold: policy.r2_threshold,
    })
}

// ---------------------------------------------------------------------------
// Local linear summaries
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RegionKind {
    /// Uniform sampling of the geographic columns inside a box.
    Box { bounds: Vec<(usize, f64, f64)> },
    /// All geographic columns pinned at one anchor point.
    Point { anchor: Vec<(usize, f64)> },
    /// Observed rows falling inside the box; nothing is synthesized.
    ObservedSubset { bounds: Vec<(usize, f64, f64)> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovariateModel {
    /// Non-geographic columns drawn from a Gaussian with the empirical
    /// moments of the reference data restricted to the enclosing region.
    EmpiricalGaussian,
    /// Non-geographic columns fixed at the empirical means.
    Fixed,
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalRegion {
    pub name: String,
    pub kind: RegionKind,
    pub n_tilde: usize,
    pub covariate_model: CovariateModel,
    pub seed: u64,
    /// Optional larger box for the empirical moments (the enclosing named
    /// region); defaults to the region itself, or the whole reference for
    /// point regions.
    pub moment_bounds: Option<Vec<(usize, f64, f64)>>,
}

fn rows_in_box(data: &Dataset, bounds: &[(usize, f64, f64)]) -> Vec<usize> {
    (0..data.n())
        .filter(|&i| {
            bounds
                .iter()
                .all(|&(col, lo, hi)| data.x[[i, col]] >= lo && data.x[[i, col]] <= hi)
        })
        .collect()
}

/// Synthesizes predictive locations for a local region: geographic columns
/// sampled uniformly in the box (or pinned at the anchor), the remaining
/// columns drawn from the empirical Gaussian of the reference data inside
/// the enclosing region. Seeded and reproducible.
pub fn generate_local_locations(
    region: &LocalRegion,
    reference: &Dataset,
    geo_columns: &[usize],
) -> Result<PredictiveLocations> {
    if region.n_tilde < 1 {
        return Err(Error::InvalidInput("n_tilde must be at least 1".into()));
    }
    let p = reference.p();
    for &g in geo_columns {
        if g >= p {
            return Err(Error::InvalidInput(format!("geo column {g} out of range")));
        }
    }
    let non_geo: Vec<usize> = (0..p).filter(|j| !geo_columns.contains(j)).collect();

    if let RegionKind::ObservedSubset { bounds } = &region.kind {
        let rows = rows_in_box(reference, bounds);
        if rows.is_empty() {
            return Err(Error::InvalidInput(format!(
                "region {} contains no observed rows",
                region.name
            )));
        }
        let x = reference.x.select(Axis(0), &rows);
        return PredictiveLocations::new(x, LocationOrigin::ObservedSubset, region.name.clone());
    }

    // Moment reference: rows inside the enclosing region.
    let moment_rows = match (&region.moment_bounds, &region.kind) {
        (Some(b), _) => rows_in_box(reference, b),
        (None, RegionKind::Box { bounds }) => rows_in_box(reference, bounds),
        (None, _) => (0..reference.n()).collect(),
    };
    if moment_rows.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "region {}: need at least 2 reference rows inside the moment region, found {}",
            region.name,
            moment_rows.len()
        )));
    }

    let mut rng = ChaCha20Rng::seed_from_u64(region.seed);
    let n = region.n_tilde;
    let mut x = Array2::<f64>::zeros((n, p));

    // Geographic columns.
    match &region.kind {
        RegionKind::Box { bounds } => {
            for &(col, lo, hi) in bounds {
                if !geo_columns.contains(&col) {
                    return Err(Error::InvalidInput(format!(
                        "box bound on column {col} which is not a geographic column"
                    )));
                }
                if !(hi > lo) {
                    return Err(Error::InvalidInput("box bounds must have hi > lo".into()));
                }
                for i in 0..n {
                    x[[i, col]] = rng.gen_range(lo..hi);
                }
            }
        }
        RegionKind::Point { anchor } => {
            for &(col, v) in anchor {
                for i in 0..n {
                    x[[i, col]] = v;
                }
            }
        }
        RegionKind::ObservedSubset { .. } => unreachable!(),
    }

    // Non-geographic columns.
    if !non_geo.is_empty() {
        let k = non_geo.len();
        let mut mean = Array1::<f64>::zeros(k);
        for (a, &j) in non_geo.iter().enumerate() {
            mean[a] = moment_rows.iter().map(|&i| reference.x[[i, j]]).sum::<f64>()
                / moment_rows.len() as f64;
        }
        match region.covariate_model {
            CovariateModel::Fixed => {
                for i in 0..n {
                    for (a, &j) in non_geo.iter().enumerate() {
                        x[[i, j]] = mean[a];
                    }
                }
            }
            CovariateModel::EmpiricalGaussian => {
                let mut cov = Array2::<f64>::zeros((k, k));
                for &i in &moment_rows {
                    for a in 0..k {
                        for b in 0..k {
                            cov[[a, b]] += (reference.x[[i, non_geo[a]]] - mean[a])
                                * (reference.x[[i, non_geo[b]]] - mean[b]);
                        }
                    }
                }
                cov.mapv_inplace(|v| v / (moment_rows.len() as f64 - 1.0));
                // Symmetrize, then shrink toward the diagonal until it
                // factorizes.
                let cov = (&cov + &cov.t()).mapv(|v| v / 2.0);
                let mut shrink = 0.0f64;
                let factor = loop {
                    let mut trial = cov.clone();
                    if shrink > 0.0 {
                        for a in 0..k {
                            for b in 0..k {
                                if a != b {
                                    trial[[a, b]] *= 1.0 - shrink;
                                }
                            }
                        }
                    }
                    for a in 0..k {
                        trial[[a, a]] += 1e-10 + 1e-10 * trial[[a, a]].abs();
                    }
                    match crate::linalg::Cholesky::new(&trial) {
                        Ok(f) => {
                            if shrink > 0.0 {
                                log::warn!(
                                    "region {}: covariance shrunk toward its diagonal by {shrink:.2} to factorize",
                                    region.name
                                );
                            }
                            break f;
                        }
                        Err(_) if shrink < 1.0 => {
                            shrink = if shrink == 0.0 { 0.05 } else { (shrink * 2.0).min(1.0) };
                        }
                        Err(e) => return Err(e),
                    }
                };
                for i in 0..n {
                    let eps = crate::linalg::standard_normal_vec(&mut rng, k);
                    let draw = factor.lower().dot(&eps) + &mean;
                    for (a, &j) in non_geo.iter().enumerate() {
                        x[[i, j]] = draw[a];
                    }
                }
            }
        }
    }

    PredictiveLocations::new(x, LocationOrigin::Synthetic, region.name.clone())
}

#[derive(Debug, Clone)]
pub struct LocalSummaryConfig {
    pub m: usize,
    pub seed: u64,
    pub sampler: GpSamplerOptions,
    /// Columns whose variance over the region falls below this are dropped
    /// from the projection.
    pub constant_tol: f64,
    /// Report φ from posterior-predictive draws (off by default: no
    /// observations exist at synthetic locations).
    pub phi_from_predictive: bool,
}

impl Default for LocalSummaryConfig {
    fn default() -> Self {
        Self {
            m: 1000,
            seed: 0,
            sampler: GpSamplerOptions::default(),
            constant_tol: 1e-10,
            phi_from_predictive: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalSummaryReport {
    pub region: String,
    pub kept_columns: Vec<usize>,
    pub dropped_columns: Vec<usize>,
    pub alpha_point: f64,
    pub coefficients: Vec<f64>,
    pub intervals95: Vec<(f64, f64)>,
    pub r2: MetricSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<MetricSummary>,
    #[serde(skip)]
    pub summary: Option<CenteredLinearSummary>,
    #[serde(skip)]
    pub r2_draws: Vec<f64>,
}

/// Local linear summary: synthesize locations in the region, extend the GP
/// posterior there, and project each draw onto the local design. φ is
/// omitted unless posterior-predictive draws are requested.
pub fn local_linear_summary(
    data: &Dataset,
    hyper: &GpHyperparameters,
    region: &LocalRegion,
    geo_columns: &[usize],
    cfg: &LocalSummaryConfig,
) -> Result<LocalSummaryReport> {
    let locations = generate_local_locations(region, data, geo_columns)?;
    let draws = sample_posterior(data, hyper, &locations, cfg.m, cfg.seed, &cfg.sampler)?;
    local_linear_summary_of_draws(&draws, &locations, region, cfg)
}

/// Same as [`local_linear_summary`] but with the draws already extended to
/// the region's locations.
pub fn local_linear_summary_of_draws(
    draws: &PosteriorDraws,
    locations: &PredictiveLocations,
    region: &LocalRegion,
    cfg: &LocalSummaryConfig,
) -> Result<LocalSummaryReport> {
    let p = locations.p();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..p {
        let col = locations.x_tilde.column(j);
        let mu = col.sum() / col.len() as f64;
        let var = col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / col.len() as f64;
        if var <= cfg.constant_tol {
            dropped.push(j);
        } else {
            kept.push(j);
        }
    }
    if !dropped.is_empty() {
        log::warn!(
            "region {}: columns {dropped:?} are constant over the locations; dropped from the projection",
            region.name
        );
    }
    if kept.is_empty() {
        return Err(Error::InvalidInput(format!(
            "region {}: every column is constant; no linear summary exists",
            region.name
        )));
    }
    let eta = InclusionVector::from_indices(p, &kept)?;
    let summary = linear_summary_with_intercept(draws, locations, &eta)?;
    let gamma_draws = summary.gamma_draws(locations);
    let r2 = crate::diagnostics::summary_r2(draws, &gamma_draws)?;
    let phi = if cfg.phi_from_predictive {
        let src = PhiSource::predictive_from(draws, cfg.seed ^ 0x9e37_79b9);
        Some(crate::diagnostics::phi_gamma(
            &gamma_draws,
            &draws.sigma2_draws,
            &src,
        )?)
    } else {
        None
    };
    Ok(LocalSummaryReport {
        region: region.name.clone(),
        kept_columns: kept,
        dropped_columns: dropped,
        alpha_point: summary.alpha_point,
        coefficients: summary.fit.point.to_vec(),
        intervals95: interval_per_column(&summary.fit.projected_draws, 0.95),
        r2: MetricSummary::from_draws(&r2.values),
        phi: phi.as_ref().map(|p| MetricSummary::from_draws(p)),
        r2_draws: r2.values,
        summary: Some(summary),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ModelTag;

    fn synthetic_draws(
        n: usize,
        m: usize,
        seed: u64,
        f: impl Fn(f64, f64) -> f64,
    ) -> (PosteriorDraws, PredictiveLocations) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, 2), |_| rng.gen_range(-2.0..2.0));
        let f_draws = Array2::from_shape_fn((m, n), |(_, i)| {
            f(x[[i, 0]], x[[i, 1]]) + 0.02 * rng.gen_range(-1.0..1.0)
        });
        let loc = PredictiveLocations::new(x, LocationOrigin::ObservedSubset, "test").unwrap();
        let draws = PosteriorDraws::new(
            f_draws,
            Array1::from_elem(m, 0.25),
            "test",
            ModelTag::External,
            seed,
        )
        .unwrap();
        (draws, loc)
    }

    #[test]
    fn linear_target_stops_at_round_one() {
        let (draws, loc) = synthetic_draws(150, 40, 1, |a, b| 2.0 * a - b + 0.5);
        let state = run_summary_search(&draws, &loc, &SearchPolicy::default()).unwrap();
        assert_eq!(state.history.len(), 1);
        assert_eq!(state.stop_reason, StopReason::Accepted);
        assert!(state.history[0].diagnostics.r2.median() > 0.99);
    }

    #[test]
    fn unreachable_threshold_exhausts() {
        let (draws, loc) = synthetic_draws(150, 30, 2, |a, b| (a * b).tanh());
        let policy = SearchPolicy {
            r2_threshold: 1.01,
            ..Default::default()
        };
        let state = run_summary_search(&draws, &loc, &policy).unwrap();
        assert_eq!(state.stop_reason, StopReason::Exhausted);
        assert_eq!(state.history.len(), 3);
        // History entries differ from their predecessors.
        for w in state.history.windows(2) {
            assert_ne!(w[0].spec, w[1].spec);
        }
    }

    #[test]
    fn additive_round_is_at_least_linear() {
        let (draws, loc) = synthetic_draws(200, 30, 3, |a, b| (1.3 * a).sin() + 0.3 * b * b);
        let policy = SearchPolicy {
            r2_threshold: 1.01,
            max_rounds: 2,
            ..Default::default()
        };
        let state = run_summary_search(&draws, &loc, &policy).unwrap();
        assert_eq!(state.stop_reason, StopReason::Budget);
        let lin = state.history[0].diagnostics.r2.median();
        let add = state.history[1].diagnostics.r2.median();
        assert!(
            add >= lin - 1e-8,
            "additive median {add} below linear {lin}"
        );
    }

    #[test]
    fn search_json_reproducible() {
        let (draws, loc) = synthetic_draws(120, 20, 4, |a, b| (a * b).tanh() + a * 0.2);
        let policy = SearchPolicy {
            r2_threshold: 0.97,
            ..Default::default()
        };
        let s1 = run_summary_search(&draws, &loc, &policy).unwrap();
        let s2 = run_summary_search(&draws, &loc, &policy).unwrap();
        assert_eq!(
            serde_json::to_string(&s1).unwrap(),
            serde_json::to_string(&s2).unwrap()
        );
    }

    #[test]
    fn interaction_ranking_finds_generating_pair_and_ignores_order() {
        let (draws, loc) = synthetic_draws(250, 25, 5, |a, b| 1.0 / (1.0 + (-2.0 * a * b).exp()));
        let f_hat = draws.posterior_mean_fit();
        let terms = univariate_terms(&loc, 8).unwrap();
        let mut fit = fit_additive(&f_hat, terms, &LambdaSelect::Gcv, "test").unwrap();
        project_additive(&draws, &mut fit).unwrap();
        let gamma = fit.gamma_draws().unwrap();
        let base = crate::diagnostics::summary_r2(&draws, &gamma).unwrap();
        let base_med = MetricSummary::from_draws(&base.values).median();

        let r1 = interaction_search(
            &draws,
            &fit.terms,
            base_med,
            &[(0, 1)],
            &InteractionSearchConfig::default(),
        )
        .unwrap();
        assert!(r1[0].delta_vs_base > 0.0, "true pair must improve R²");

        // With only one real interaction, the true pair ranks first whatever
        // the candidate order.
        let (d2, l2) = {
            let mut rng = ChaCha20Rng::seed_from_u64(6);
            let x: Array2<f64> = Array2::from_shape_fn((250, 3), |_| rng.gen_range(-2.0..2.0));
            let f_draws = Array2::from_shape_fn((25, 250), |(_, i)| {
                (x[[i, 0]] * x[[i, 1]]).tanh() + 0.3 * x[[i, 2]] + 0.02 * rng.gen_range(-1.0..1.0)
            });
            let loc = PredictiveLocations::new(x, LocationOrigin::ObservedSubset, "t3").unwrap();
            let draws = PosteriorDraws::new(
                f_draws,
                Array1::from_elem(25, 0.25),
                "t3",
                ModelTag::External,
                6,
            )
            .unwrap();
            (draws, loc)
        };
        let f_hat2 = d2.posterior_mean_fit();
        let terms2 = univariate_terms(&l2, 8).unwrap();
        let mut fit2 = fit_additive(&f_hat2, terms2, &LambdaSelect::Gcv, "t3").unwrap();
        project_additive(&d2, &mut fit2).unwrap();
        let orders: [&[(usize, usize)]; 2] = [&[(0, 1), (0, 2), (1, 2)], &[(1, 2), (0, 2), (0, 1)]];
        let mut rankings = Vec::new();
        for cands in orders {
            let r = interaction_search(&d2, &fit2.terms, 0.0, cands, &InteractionSearchConfig::default())
                .unwrap();
            assert_eq!(r[0].pair, (0, 1), "generating pair must rank first");
            rankings.push(
                r.iter()
                    .map(|pr| (pr.pair, pr.r2_median))
                    .collect::<Vec<_>>(),
            );
        }
        assert_eq!(rankings[0], rankings[1], "ranking depends on candidate order");
    }

    #[test]
    fn local_locations_point_and_box() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let x = Array2::from_shape_fn((300, 4), |(_, j)| rng.gen_range(-1.0..1.0) + j as f64);
        let y = Array1::from_shape_fn(300, |i| x[[i, 0]]);
        let data = Dataset::new(x, y, (0..4).map(|j| format!("c{j}")).collect()).unwrap();

        // Point region: geographic coordinates identical across rows.
        let point = LocalRegion {
            name: "pt".into(),
            kind: RegionKind::Point {
                anchor: vec![(0, 0.3), (1, 1.2)],
            },
            n_tilde: 50,
            covariate_model: CovariateModel::EmpiricalGaussian,
            seed: 11,
            moment_bounds: None,
        };
        let loc = generate_local_locations(&point, &data, &[0, 1]).unwrap();
        assert_eq!(loc.n(), 50);
        for i in 0..50 {
            assert_eq!(loc.x_tilde[[i, 0]], 0.3);
            assert_eq!(loc.x_tilde[[i, 1]], 1.2);
        }

        // Box region: geo columns inside bounds, non-geo means near empirical.
        let boxr = LocalRegion {
            name: "box".into(),
            kind: RegionKind::Box {
                bounds: vec![(0, -0.5, 0.5), (1, 0.5, 1.5)],
            },
            n_tilde: 1000,
            covariate_model: CovariateModel::EmpiricalGaussian,
            seed: 12,
            moment_bounds: None,
        };
        let loc2 = generate_local_locations(&boxr, &data, &[0, 1]).unwrap();
        for i in 0..1000 {
            assert!(loc2.x_tilde[[i, 0]] >= -0.5 && loc2.x_tilde[[i, 0]] <= 0.5);
            assert!(loc2.x_tilde[[i, 1]] >= 0.5 && loc2.x_tilde[[i, 1]] <= 1.5);
        }
        // CLT bound on the synthesized non-geo mean: within 4 standard errors
        // of the empirical mean of the enclosing region.
        let rows = rows_in_box(&data, &[(0, -0.5, 0.5), (1, 0.5, 1.5)]);
        for j in [2usize, 3] {
            let emp_mean =
                rows.iter().map(|&i| data.x[[i, j]]).sum::<f64>() / rows.len() as f64;
            let emp_var = rows
                .iter()
                .map(|&i| (data.x[[i, j]] - emp_mean).powi(2))
                .sum::<f64>()
                / (rows.len() as f64 - 1.0);
            let syn_mean = loc2.x_tilde.column(j).sum() / 1000.0;
            let se = (emp_var / 1000.0).sqrt();
            assert!(
                (syn_mean - emp_mean).abs() < 4.0 * se,
                "column {j}: synthesized mean {syn_mean} vs empirical {emp_mean} (se {se})"
            );
        }

        // Determinism.
        let again = generate_local_locations(&boxr, &data, &[0, 1]).unwrap();
        assert_eq!(loc2.x_tilde, again.x_tilde);
    }

    #[test]
    fn local_summary_drops_constant_columns() {
        let (draws, _) = synthetic_draws(100, 20, 8, |a, b| a + b);
        // Locations with one constant column.
        let mut x = Array2::from_shape_fn((100, 2), |(i, _)| (i as f64 / 50.0) - 1.0);
        x.column_mut(1).fill(0.7);
        let loc = PredictiveLocations::new(x, LocationOrigin::Synthetic, "test").unwrap();
        let region = LocalRegion {
            name: "r".into(),
            kind: RegionKind::Point {
                anchor: vec![(1, 0.7)],
            },
            n_tilde: 100,
            covariate_model: CovariateModel::Fixed,
            seed: 0,
            moment_bounds: None,
        };
        let report =
            local_linear_summary_of_draws(&draws, &loc, &region, &LocalSummaryConfig::default())
                .unwrap();
        assert_eq!(report.dropped_columns, vec![1]);
        assert_eq!(report.kept_columns, vec![0]);
        assert!(report.phi.is_none(), "phi omitted by default for local summaries");
    }
}
