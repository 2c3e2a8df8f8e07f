//! Linear and sparse-linear summaries: weighted-lasso point estimates on the
//! posterior-mean fit, and projected posteriors for any inclusion set.
//!
//! Projection maps the fitted-value draws of the full model onto the column
//! space of the selected covariates; applying it draw by draw gives the
//! projected posterior of the low-dimensional linear representation.

use crate::data::{Dataset, PosteriorDraws, PredictiveLocations};
use crate::error::{Error, Result};
use crate::linalg::{standard_normal_vec, Cholesky};
use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

/// Which covariates a sparse summary keeps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InclusionVector {
    eta: Vec<bool>,
}

impl InclusionVector {
    pub fn new(eta: Vec<bool>) -> Result<Self> {
        if !eta.iter().any(|&b| b) {
            return Err(Error::InvalidInput("inclusion vector selects no columns".into()));
        }
        Ok(Self { eta })
    }

    pub fn all(p: usize) -> Self {
        Self { eta: vec![true; p] }
    }

    pub fn from_indices(p: usize, indices: &[usize]) -> Result<Self> {
        let mut eta = vec![false; p];
        for &j in indices {
            if j >= p {
                return Err(Error::InvalidInput(format!("column index {j} out of range")));
            }
            eta[j] = true;
        }
        Self::new(eta)
    }

    pub fn from_nonzero(coefs: &Array1<f64>) -> Result<Self> {
        Self::new(coefs.iter().map(|&c| c != 0.0).collect())
    }

    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    pub fn k(&self) -> usize {
        self.eta.iter().filter(|&&b| b).count()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.eta[j]
    }

    pub fn indices(&self) -> Vec<usize> {
        self.eta
            .iter()
            .enumerate()
            .filter_map(|(j, &b)| b.then_some(j))
            .collect()
    }
}

/// A sparse linear summary: point coefficients on the included columns and
/// the projected coefficient draws.
#[derive(Debug, Clone)]
pub struct LinearSummaryFit {
    pub eta: InclusionVector,
    /// Point coefficients, one per included column (projection of the
    /// posterior-mean fit).
    pub point: Array1<f64>,
    /// M x k matrix of projected coefficient draws.
    pub projected_draws: Array2<f64>,
    pub locations_id: String,
}

impl LinearSummaryFit {
    /// Summary evaluations gamma^(k)(x̃) for all draws: M x ñ.
    pub fn gamma_draws(&self, locations: &PredictiveLocations) -> Array2<f64> {
        let cols = self.eta.indices();
        let x_eta = locations.x_tilde.select(Axis(1), &cols);
        self.projected_draws.dot(&x_eta.t())
    }

    pub fn gamma_point(&self, locations: &PredictiveLocations) -> Array1<f64> {
        let cols = self.eta.indices();
        let x_eta = locations.x_tilde.select(Axis(1), &cols);
        x_eta.dot(&self.point)
    }

    /// Central credible interval per coefficient at the given level.
    pub fn intervals(&self, level: f64) -> Vec<(f64, f64)> {
        interval_per_column(&self.projected_draws, level)
    }
}

/// Central credible-interval widths per column of a draw matrix.
pub fn interval_widths(draws: &Array2<f64>, level: f64) -> Vec<f64> {
    interval_per_column(draws, level)
        .into_iter()
        .map(|(lo, hi)| hi - lo)
        .collect()
}

pub(crate) fn interval_per_column(draws: &Array2<f64>, level: f64) -> Vec<(f64, f64)> {
    let lo_q = (1.0 - level) / 2.0;
    let hi_q = 1.0 - lo_q;
    draws
        .columns()
        .into_iter()
        .map(|col| {
            let mut v: Vec<f64> = col.to_vec();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            (
                crate::diagnostics::quantile_sorted(&v, lo_q),
                crate::diagnostics::quantile_sorted(&v, hi_q),
            )
        })
        .collect()
}

fn weighted_gram(
    x_eta: &Array2<f64>,
    weights: Option<&Array1<f64>>,
) -> (Array2<f64>, Array2<f64>) {
    // Returns (X'WX, (WX)') for the selected columns.
    match weights {
        Some(w) => {
            let mut wx = x_eta.clone();
            for (mut row, wi) in wx.rows_mut().into_iter().zip(w.iter()) {
                row *= *wi;
            }
            (x_eta.t().dot(&wx), wx.reversed_axes())
        }
        None => (x_eta.t().dot(x_eta), x_eta.t().to_owned()),
    }
}

fn collinear_column_names(x_eta: &Array2<f64>, names: &[String]) -> Vec<String> {
    // Report pairs with |correlation| ~ 1 to make rank errors actionable.
    let k = x_eta.ncols();
    let mut flagged = Vec::new();
    for i in 0..k {
        for j in (i + 1)..k {
            let a = x_eta.column(i);
            let b = x_eta.column(j);
            let (ma, mb) = (a.sum() / a.len() as f64, b.sum() / b.len() as f64);
            let mut num = 0.0;
            let mut da = 0.0;
            let mut db = 0.0;
            for t in 0..a.len() {
                num += (a[t] - ma) * (b[t] - mb);
                da += (a[t] - ma).powi(2);
                db += (b[t] - mb).powi(2);
            }
            let denom = (da * db).sqrt();
            if denom == 0.0 || (num / denom).abs() > 0.9999 {
                flagged.push(names[i].clone());
                flagged.push(names[j].clone());
            }
        }
    }
    if flagged.is_empty() {
        flagged = names.to_vec();
    }
    flagged.dedup();
    flagged
}

/// Projects every posterior draw onto the column space of the included
/// covariates: beta_eta^(k) = (X̃'W X̃)⁻¹ X̃'W f^(k). The point estimate is the
/// same map applied to the posterior-mean fit.
pub fn project_draws(
    draws: &PosteriorDraws,
    locations: &PredictiveLocations,
    eta: &InclusionVector,
) -> Result<LinearSummaryFit> {
    if eta.len() != locations.p() {
        return Err(Error::DimensionMismatch(format!(
            "inclusion vector has {} entries, locations have {} columns",
            eta.len(),
            locations.p()
        )));
    }
    if draws.n_locations() != locations.n() {
        return Err(Error::DimensionMismatch(format!(
            "draws cover {} locations, X̃ has {} rows",
            draws.n_locations(),
            locations.n()
        )));
    }
    let cols = eta.indices();
    let x_eta = locations.x_tilde.select(Axis(1), &cols);
    let (gram, xtw) = weighted_gram(&x_eta, locations.weights.as_ref());
    let rank_error = || {
        let names: Vec<String> = cols.iter().map(|&j| format!("col{j}")).collect();
        Error::RankDeficient {
            columns: collinear_column_names(&x_eta, &names),
        }
    };
    let factor = Cholesky::with_context(&gram, "projection normal equations")
        .map_err(|_| rank_error())?;
    if factor.pivot_ratio() < 1e-7 {
        return Err(rank_error());
    }

    // One GEMM for all draws: (M x ñ) (ñ x k), then k x k solves.
    let mut projected = draws.f_draws.dot(&xtw.t());
    factor.solve_rows_inplace(&mut projected);

    let f_hat = draws.posterior_mean_fit();
    let point = factor.solve_vec(&xtw.dot(&f_hat));

    Ok(LinearSummaryFit {
        eta: eta.clone(),
        point,
        projected_draws: projected,
        locations_id: locations.id.clone(),
    })
}

/// Lambda grid for the sparse-summary path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum LambdaGrid {
    /// `points` log-spaced values over [ratio·λ_max, λ_max].
    Auto { points: usize, ratio: f64 },
    Explicit(Vec<f64>),
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid::Auto {
            points: 100,
            ratio: 1e-4,
        }
    }
}

/// Solution path of the weighted-l1 summary objective
/// ñ⁻¹‖f̂ − X̃β‖²_W + λ Σ_j w_j⁻¹|β_j|.
#[derive(Debug, Clone)]
pub struct LassoPath {
    /// Decreasing penalty levels.
    pub lambdas: Vec<f64>,
    /// Dense coefficient vector per lambda (zeros outside the support).
    pub coefs: Vec<Array1<f64>>,
    pub inclusions: Vec<Option<InclusionVector>>,
    pub weights: Array1<f64>,
    /// Columns excluded up front because their adaptive weight was zero.
    pub excluded: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PathPoint {
    pub lambda: f64,
    pub support: Vec<usize>,
    pub point_coefs: Vec<f64>,
}

impl LassoPath {
    /// Smallest lambda achieving each distinct support size; the projected
    /// posterior depends only on the support, and the smaller lambda is the
    /// less shrunk point estimate.
    pub fn distinct_supports(&self) -> Vec<PathPoint> {
        let mut by_support: Vec<PathPoint> = Vec::new();
        for (i, coef) in self.coefs.iter().enumerate() {
            let support: Vec<usize> = coef
                .iter()
                .enumerate()
                .filter_map(|(j, &c)| (c != 0.0).then_some(j))
                .collect();
            if support.is_empty() {
                continue;
            }
            match by_support.iter_mut().find(|p| p.support == support) {
                // Path iterates lambdas in decreasing order, so later hits
                // have smaller lambda.
                Some(existing) => {
                    existing.lambda = self.lambdas[i];
                    existing.point_coefs = support.iter().map(|&j| coef[j]).collect();
                }
                None => by_support.push(PathPoint {
                    lambda: self.lambdas[i],
                    support: support.clone(),
                    point_coefs: support.iter().map(|&j| coef[j]).collect(),
                }),
            }
        }
        by_support
    }

    /// First path point whose support has exactly `k` columns.
    pub fn support_of_size(&self, k: usize) -> Option<PathPoint> {
        self.distinct_supports().into_iter().find(|p| p.support.len() == k)
    }

    /// Unpenalized discrepancy ñ⁻¹‖f̂ − X̃β‖²_W at each path point.
    pub fn discrepancies(
        &self,
        f_hat: &Array1<f64>,
        locations: &PredictiveLocations,
    ) -> Vec<f64> {
        self.coefs
            .iter()
            .map(|beta| {
                let fit = locations.x_tilde.dot(beta);
                weighted_mse(f_hat, &fit, locations.weights.as_ref())
            })
            .collect()
    }
}

fn weighted_mse(y: &Array1<f64>, fit: &Array1<f64>, w: Option<&Array1<f64>>) -> f64 {
    let n = y.len() as f64;
    match w {
        Some(w) => {
            y.iter()
                .zip(fit.iter())
                .zip(w.iter())
                .map(|((a, b), wi)| wi * (a - b).powi(2))
                .sum::<f64>()
                / n
        }
        None => y.iter().zip(fit.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n,
    }
}

/// The smallest lambda with an all-zero solution, from the KKT subgradient
/// condition of the weighted objective: λ_max = max_j w_j · (2/ñ)|X̃_j' W f̂|.
pub fn lambda_max(
    f_hat: &Array1<f64>,
    locations: &PredictiveLocations,
    weights: &Array1<f64>,
) -> f64 {
    let n = locations.n() as f64;
    let mut best = 0.0f64;
    for j in 0..locations.p() {
        if weights[j] <= 0.0 {
            continue;
        }
        let col = locations.x_tilde.column(j);
        let dot = match &locations.weights {
            Some(w) => col
                .iter()
                .zip(f_hat.iter())
                .zip(w.iter())
                .map(|((x, f), wi)| wi * x * f)
                .sum::<f64>(),
            None => col.dot(f_hat),
        };
        best = best.max(weights[j] * (2.0 / n * dot).abs());
    }
    best
}

const CD_TOL: f64 = 1e-8;
const CD_MAX_SWEEPS: usize = 10_000;

/// Coordinate descent over a decreasing lambda grid with warm starts.
/// Zero-weight columns are dropped from the path with a warning (their
/// penalty is infinite).
pub fn adaptive_lasso_path(
    f_hat: &Array1<f64>,
    locations: &PredictiveLocations,
    weights: &Array1<f64>,
    grid: &LambdaGrid,
) -> Result<LassoPath> {
    let n = locations.n();
    let p = locations.p();
    if f_hat.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "f_hat has {} entries for {} locations",
            f_hat.len(),
            n
        )));
    }
    if weights.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "{} adaptive weights for {} columns",
            weights.len(),
            p
        )));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidInput("adaptive weights must be finite and nonnegative".into()));
    }
    let excluded: Vec<usize> = (0..p).filter(|&j| weights[j] == 0.0).collect();
    if !excluded.is_empty() {
        log::warn!(
            "columns {excluded:?} have zero adaptive weight (infinite penalty); excluded from the path"
        );
    }
    let active: Vec<usize> = (0..p).filter(|&j| weights[j] > 0.0).collect();
    if active.is_empty() {
        return Err(Error::InvalidInput("all adaptive weights are zero".into()));
    }

    let lmax = lambda_max(f_hat, locations, weights);
    let lambdas: Vec<f64> = match grid {
        LambdaGrid::Auto { points, ratio } => {
            let lo = (lmax * ratio).max(f64::MIN_POSITIVE);
            let hi = lmax;
            (0..*points)
                .map(|i| {
                    let t = i as f64 / (*points as f64 - 1.0).max(1.0);
                    (hi.ln() + t * (lo.ln() - hi.ln())).exp()
                })
                .collect()
        }
        LambdaGrid::Explicit(values) => {
            let mut v = values.clone();
            v.sort_by(|a, b| b.partial_cmp(a).unwrap());
            v
        }
    };

    // Precompute weighted column inner products and the residual machinery.
    let w_loc = locations.weights.as_ref();
    let col_norm2: Vec<f64> = (0..p)
        .map(|j| {
            let col = locations.x_tilde.column(j);
            match w_loc {
                Some(w) => col.iter().zip(w.iter()).map(|(x, wi)| wi * x * x).sum(),
                None => col.dot(&col),
            }
        })
        .collect();

    let mut beta = Array1::<f64>::zeros(p);
    let mut resid = f_hat.clone(); // f_hat - X beta, beta = 0 initially
    let mut coefs = Vec::with_capacity(lambdas.len());
    let mut inclusions = Vec::with_capacity(lambdas.len());

    for &lam in &lambdas {
        for _sweep in 0..CD_MAX_SWEEPS {
            let mut max_change = 0.0f64;
            for &j in &active {
                if col_norm2[j] <= 0.0 {
                    continue;
                }
                let col = locations.x_tilde.column(j);
                let old = beta[j];
                // z = X_j' W (resid + X_j beta_j)
                let dot_r = match w_loc {
                    Some(w) => col
                        .iter()
                        .zip(resid.iter())
                        .zip(w.iter())
                        .map(|((x, r), wi)| wi * x * r)
                        .sum::<f64>(),
                    None => col.dot(&resid),
                };
                let z = dot_r + col_norm2[j] * old;
                let threshold = lam * n as f64 / (2.0 * weights[j]);
                let new = soft_threshold(z, threshold) / col_norm2[j];
                if new != old {
                    let delta = old - new;
                    ndarray::Zip::from(&mut resid).and(&col).for_each(|r, x| *r += delta * x);
                    beta[j] = new;
                    max_change = max_change.max((new - old).abs());
                }
            }
            if max_change < CD_TOL {
                break;
            }
        }
        coefs.push(beta.clone());
        inclusions.push(InclusionVector::from_nonzero(&beta).ok());
    }

    Ok(LassoPath {
        lambdas,
        coefs,
        inclusions,
        weights: weights.clone(),
        excluded,
    })
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Flat-prior posterior draws for the restricted linear model refit to the
/// observed response. Comparison-only: this double-dips into the data and is
/// produced solely to contrast with the projected posterior.
pub fn refit_posterior(
    data: &Dataset,
    eta: &InclusionVector,
    m: usize,
    seed: u64,
) -> Result<Array2<f64>> {
    if eta.len() != data.p() {
        return Err(Error::DimensionMismatch(format!(
            "inclusion vector has {} entries for {} columns",
            eta.len(),
            data.p()
        )));
    }
    let cols = eta.indices();
    let k = cols.len();
    let n = data.n();
    if n <= k + 1 {
        return Err(Error::InvalidInput(format!(
            "flat-prior refit needs n > k+1 (n={n}, k={k})"
        )));
    }
    let x_eta = data.x.select(Axis(1), &cols);
    let gram = x_eta.t().dot(&x_eta);
    let rank_error = || {
        let names: Vec<String> = cols.iter().map(|&j| format!("col{j}")).collect();
        Error::RankDeficient {
            columns: collinear_column_names(&x_eta, &names),
        }
    };
    let factor =
        Cholesky::with_context(&gram, "refit normal equations").map_err(|_| rank_error())?;
    if factor.pivot_ratio() < 1e-7 {
        return Err(rank_error());
    }
    let beta_hat = factor.solve_vec(&x_eta.t().dot(&data.y));
    let fitted = x_eta.dot(&beta_hat);
    let rss: f64 = data
        .y
        .iter()
        .zip(fitted.iter())
        .map(|(y, f)| (y - f).powi(2))
        .sum();

    // sigma2 | y ~ InvGamma((n-k)/2, RSS/2); beta | sigma2 ~ N(beta_hat,
    // sigma2 (X'X)^-1).
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let shape = (n - k) as f64 / 2.0;
    let mut draws = Array2::<f64>::zeros((m, k));
    for r in 0..m {
        let g = Gamma::new(shape, 2.0 / rss)
            .map_err(|e| Error::SamplerOverflow(format!("refit gamma: {e}")))?;
        let sigma2 = 1.0 / g.sample(&mut rng);
        let eps = standard_normal_vec(&mut rng, k);
        let z = factor.solve_lower_t_vec(&eps);
        let beta = &beta_hat + &(z * sigma2.sqrt());
        draws.row_mut(r).assign(&beta);
    }
    Ok(draws)
}
