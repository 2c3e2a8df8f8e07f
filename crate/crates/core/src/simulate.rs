//! Seeded generators and a replication harness for the two bundled
//! simulation studies: a bivariate nonadditive surface observed on a regular
//! grid, and an interaction-detection study with collinear noise covariates.

use crate::additive::{fit_additive, project_additive, LambdaSelect};
use crate::data::{Dataset, PredictiveLocations};
use crate::diagnostics::MetricSummary;
use crate::error::{Error, Result};
use crate::gp::{default_init, optimize_hyperparameters, sample_posterior, EbOptions, GpSamplerOptions};
use crate::linalg::{standard_normal_vec, Cholesky, SymEigen};
use crate::search::{interaction_search, InteractionSearchConfig};
use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Study {
    SigmoidGrid,
    InteractionCollinear,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimSpec {
    pub study: Study,
    pub n: usize,
    /// Noise variance; zero is allowed as the degenerate noiseless case.
    pub sigma2: f64,
    /// Correlation parameter of the covariate Gaussian (interaction study).
    pub rho: f64,
    /// Grid range for the sigmoid study.
    pub grid_range: (f64, f64),
    pub replications: usize,
    pub base_seed: u64,
}

impl SimSpec {
    pub fn sigmoid_grid() -> Self {
        Self {
            study: Study::SigmoidGrid,
            n: 2500,
            sigma2: 0.25,
            rho: 0.0,
            grid_range: (-2.0, 2.0),
            replications: 1,
            base_seed: 0,
        }
    }

    pub fn interaction_collinear() -> Self {
        Self {
            study: Study::InteractionCollinear,
            n: 400,
            sigma2: 0.50,
            rho: 0.5,
            grid_range: (0.0, 0.0),
            replications: 1,
            base_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidInput("n must be positive".into()));
        }
        if self.sigma2 < 0.0 {
            return Err(Error::InvalidInput("sigma2 must be nonnegative".into()));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::InvalidInput("rho must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

/// The bivariate surface: two crossed sigmoids.
pub fn sigmoid_surface(x1: f64, x2: f64) -> f64 {
    sigmoid(2.0 * x1 + 2.0 * x2) + sigmoid(x1 - 4.0 * x2)
}

/// Analytic partial derivatives of the surface.
pub fn sigmoid_surface_partials(x1: f64, x2: f64) -> (f64, f64) {
    let s1 = sigmoid(2.0 * x1 + 2.0 * x2);
    let s2 = sigmoid(x1 - 4.0 * x2);
    let d1 = s1 * (1.0 - s1);
    let d2 = s2 * (1.0 - s2);
    (2.0 * d1 + d2, 2.0 * d1 - 4.0 * d2)
}

#[derive(Debug, Clone)]
pub struct SigmoidTruth {
    pub f: Array1<f64>,
    pub df_dx1: Array1<f64>,
    pub df_dx2: Array1<f64>,
}

/// Regular side x side grid over the range with y = f + N(0, sigma2).
/// The grid side is the square root of `n` (n must be a perfect square).
pub fn generate_sigmoid_grid(spec: &SimSpec) -> Result<(Dataset, SigmoidTruth)> {
    spec.validate()?;
    if spec.study != Study::SigmoidGrid {
        return Err(Error::InvalidInput("spec is not a sigmoid-grid study".into()));
    }
    let side = (spec.n as f64).sqrt().round() as usize;
    if side * side != spec.n {
        return Err(Error::InvalidInput(format!(
            "grid study needs a perfect-square n, got {}",
            spec.n
        )));
    }
    let (lo, hi) = spec.grid_range;
    if !(hi > lo) {
        return Err(Error::InvalidInput("grid range must have hi > lo".into()));
    }
    let n = spec.n;
    let mut x = Array2::<f64>::zeros((n, 2));
    let mut f = Array1::<f64>::zeros(n);
    let mut d1 = Array1::<f64>::zeros(n);
    let mut d2 = Array1::<f64>::zeros(n);
    for i in 0..side {
        for j in 0..side {
            let r = i * side + j;
            let x1 = lo + (hi - lo) * i as f64 / (side as f64 - 1.0);
            let x2 = lo + (hi - lo) * j as f64 / (side as f64 - 1.0);
            x[[r, 0]] = x1;
            x[[r, 1]] = x2;
            f[r] = sigmoid_surface(x1, x2);
            let (p1, p2) = sigmoid_surface_partials(x1, x2);
            d1[r] = p1;
            d2[r] = p2;
        }
    }
    let mut rng = ChaCha20Rng::seed_from_u64(spec.base_seed);
    let noise = standard_normal_vec(&mut rng, n) * spec.sigma2.sqrt();
    let y = &f + &noise;
    let data = Dataset::new(x, y, vec!["x1".into(), "x2".into()])?;
    Ok((
        data,
        SigmoidTruth {
            f,
            df_dx1: d1,
            df_dx2: d2,
        },
    ))
}

/// The 6x6 covariate covariance of the interaction study: unit diagonal,
/// the interacting pair uncorrelated, both correlated 0.5 with the cubic
/// signal column, and noise columns tied to everything at powers of rho.
pub fn interaction_covariance(rho: f64) -> Array2<f64> {
    let mut s = Array2::<f64>::eye(6);
    s[[0, 2]] = 0.5;
    s[[1, 2]] = 0.5;
    for row in 0..3 {
        s[[row, 3]] = rho;
        s[[row, 4]] = rho * rho;
        s[[row, 5]] = rho * rho * rho;
    }
    s[[3, 4]] = rho;
    s[[3, 5]] = rho * rho;
    s[[4, 5]] = rho;
    // Symmetric completion.
    for i in 0..6 {
        for j in 0..i {
            s[[i, j]] = s[[j, i]];
        }
    }
    s
}

/// The interaction-study regression surface.
pub fn interaction_surface(x: &[f64]) -> f64 {
    sigmoid(2.0 * x[0] * x[1]) + (x[2] / 3.0).powi(3)
}

/// Draws n covariate vectors from N(0, Σ(rho)) and responses
/// y = f(x) + N(0, sigma2). Returns the dataset and the true surface values.
pub fn generate_interaction_study(spec: &SimSpec) -> Result<(Dataset, Array1<f64>)> {
    spec.validate()?;
    if spec.study != Study::InteractionCollinear {
        return Err(Error::InvalidInput("spec is not an interaction study".into()));
    }
    let sigma = interaction_covariance(spec.rho);
    let factor = Cholesky::with_context(&sigma, "interaction covariance").map_err(|_| {
        let eig = SymEigen::new(&sigma)
            .map(|e| e.values.to_vec())
            .unwrap_or_default();
        Error::InvalidInput(format!(
            "covariance not positive definite at rho={}; eigenvalues {eig:?}",
            spec.rho
        ))
    })?;
    let n = spec.n;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.base_seed);
    let mut x = Array2::<f64>::zeros((n, 6));
    let mut f = Array1::<f64>::zeros(n);
    for i in 0..n {
        let eps = standard_normal_vec(&mut rng, 6);
        let row = factor.lower().dot(&eps);
        for j in 0..6 {
            x[[i, j]] = row[j];
        }
        f[i] = interaction_surface(row.as_slice().unwrap());
    }
    let noise = standard_normal_vec(&mut rng, n) * spec.sigma2.sqrt();
    let y = &f + &noise;
    let data = Dataset::new(x, y, (1..=6).map(|j| format!("x{j}")).collect())?;
    Ok((data, f))
}

// ---------------------------------------------------------------------------
// Replication harness
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ReplicateConfig {
    pub m: usize,
    pub burn_in: usize,
    pub eb: EbOptions,
    pub basis_dim: usize,
    pub bivariate_dim: usize,
}

impl Default for ReplicateConfig {
    fn default() -> Self {
        Self {
            m: 1000,
            burn_in: 100,
            eb: EbOptions {
                budget: 250,
                multi_starts: 2,
                ..Default::default()
            },
            basis_dim: crate::additive::DEFAULT_UNIVARIATE_DIM,
            bivariate_dim: crate::additive::DEFAULT_BIVARIATE_DIM,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplicateRow {
    pub replicate: usize,
    pub seed: u64,
    pub r2_additive: f64,
    pub r2_best_pair: f64,
    pub best_pair: Option<(usize, usize)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn replicate_one(spec: &SimSpec, cfg: &ReplicateConfig, index: usize) -> ReplicateRow {
    let seed = spec.base_seed + index as u64;
    let mut row = ReplicateRow {
        replicate: index,
        seed,
        r2_additive: f64::NAN,
        r2_best_pair: f64::NAN,
        best_pair: None,
        error: None,
    };
    let run = || -> Result<(f64, f64, (usize, usize))> {
        let mut rep_spec = spec.clone();
        rep_spec.base_seed = seed;
        let data = match spec.study {
            Study::InteractionCollinear => generate_interaction_study(&rep_spec)?.0,
            Study::SigmoidGrid => generate_sigmoid_grid(&rep_spec)?.0,
        };
        // Stage 1: GP fit with empirical-Bayes hyperparameters.
        let init = default_init(&data, false);
        let (hyper, _) = optimize_hyperparameters(&data, &init, &cfg.eb)?;
        let locations = PredictiveLocations::from_dataset(&data, format!("rep{index}"));
        let draws = sample_posterior(
            &data,
            &hyper,
            &locations,
            cfg.m,
            seed,
            &GpSamplerOptions {
                burn_in: cfg.burn_in,
                fix_sigma2: None,
            },
        )?;
        // Stage 2: additive summary plus exhaustive pair ranking.
        let f_hat = draws.posterior_mean_fit();
        let mut terms = Vec::new();
        for j in 0..data.p() {
            terms.push(crate::additive::build_smooth(
                &[data.x.column(j).to_owned()],
                &[j],
                crate::additive::TermKind::Univariate,
                cfg.basis_dim,
            )?);
        }
        let mut fit = fit_additive(&f_hat, terms, &LambdaSelect::Gcv, locations.id.clone())?;
        project_additive(&draws, &mut fit)?;
        let gamma = fit.gamma_draws()?;
        let r2 = crate::diagnostics::summary_r2(&draws, &gamma)?;
        let r2_add = MetricSummary::from_draws(&r2.values).median();

        let p = data.p();
        let mut candidates = Vec::new();
        for k in 0..p {
            for l in (k + 1)..p {
                candidates.push((k, l));
            }
        }
        let ranked = interaction_search(
            &draws,
            &fit.terms,
            r2_add,
            &candidates,
            &InteractionSearchConfig {
                bivariate_dim: cfg.bivariate_dim,
            },
        )?;
        Ok((r2_add, ranked[0].r2_median, ranked[0].pair))
    };
    match run() {
        Ok((r2_add, r2_best, pair)) => {
            row.r2_additive = r2_add;
            row.r2_best_pair = r2_best;
            row.best_pair = Some(pair);
        }
        Err(e) => {
            log::warn!("replicate {index} failed: {e}");
            row.error = Some(e.to_string());
        }
    }
    row
}

/// Runs the study `spec.replications` times with seeds base_seed + index,
/// in parallel. Per-replicate failures are recorded, not fatal.
pub fn replicate(spec: &SimSpec, cfg: &ReplicateConfig) -> Result<Vec<ReplicateRow>> {
    spec.validate()?;
    if spec.replications < 1 {
        return Err(Error::InvalidInput("need at least one replication".into()));
    }
    let mut rows: Vec<ReplicateRow> = (0..spec.replications)
        .into_par_iter()
        .map(|i| replicate_one(spec, cfg, i))
        .collect();
    rows.sort_by_key(|r| r.replicate);
    Ok(rows)
}

pub fn replicate_table_csv(rows: &[ReplicateRow]) -> String {
    let mut out = String::from("replicate,seed,r2_additive,r2_best_pair,best_pair,error\n");
    for r in rows {
        let pair = r
            .best_pair
            .map(|(a, b)| format!("x{}:x{}", a + 1, b + 1))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.replicate,
            r.seed,
            r.r2_additive,
            r.r2_best_pair,
            pair,
            r.error.clone().unwrap_or_default()
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_surface_values() {
        // f(0,0) = 0.5 + 0.5.
        assert!((sigmoid_surface(0.0, 0.0) - 1.0).abs() < 1e-15);
        // f(2,2) = 1/(1+e^-8) + 1/(1+e^6), frozen from direct evaluation.
        let expect = 1.0 / (1.0 + (-8.0f64).exp()) + 1.0 / (1.0 + (6.0f64).exp());
        assert!((sigmoid_surface(2.0, 2.0) - expect).abs() < 1e-15);
        assert!((expect - 1.002_137_273_026_169_2).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_partials_match_finite_differences() {
        let h = 1e-6;
        for &(a, b) in &[(0.3, -0.7), (-1.2, 0.4), (1.9, 1.9)] {
            let (d1, d2) = sigmoid_surface_partials(a, b);
            let fd1 = (sigmoid_surface(a + h, b) - sigmoid_surface(a - h, b)) / (2.0 * h);
            let fd2 = (sigmoid_surface(a, b + h) - sigmoid_surface(a, b - h)) / (2.0 * h);
            assert!((d1 - fd1).abs() < 1e-8);
            assert!((d2 - fd2).abs() < 1e-8);
        }
    }

    #[test]
    fn grid_has_expected_shape_and_span() {
        let spec = SimSpec::sigmoid_grid();
        let (data, truth) = generate_sigmoid_grid(&spec).unwrap();
        assert_eq!(data.n(), 2500);
        assert_eq!(data.p(), 2);
        for j in 0..2 {
            let col = data.x.column(j);
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(lo, -2.0);
            assert_eq!(hi, 2.0);
        }
        assert_eq!(truth.f.len(), 2500);
        // Seeded determinism, bitwise.
        let (data2, _) = generate_sigmoid_grid(&spec).unwrap();
        assert_eq!(data.x, data2.x);
        assert_eq!(data.y, data2.y);
    }

    #[test]
    fn interaction_covariance_positive_definite_and_surface_value() {
        let s = interaction_covariance(0.5);
        let eig = SymEigen::new(&s).unwrap();
        assert!(
            eig.values[0] > 0.0,
            "smallest eigenvalue {} must be positive",
            eig.values[0]
        );
        // f at x = (0, 0, 3, ...) -> 0.5 + 1.
        assert!((interaction_surface(&[0.0, 0.0, 3.0, 0.0, 0.0, 0.0]) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn interacting_pair_nearly_uncorrelated_in_sample() {
        let spec = SimSpec::interaction_collinear();
        let (data, _) = generate_interaction_study(&spec).unwrap();
        assert_eq!(data.n(), 400);
        assert_eq!(data.p(), 6);
        let a = data.x.column(0);
        let b = data.x.column(1);
        let (ma, mb) = (a.sum() / 400.0, b.sum() / 400.0);
        let mut num = 0.0;
        let mut va = 0.0;
        let mut vb = 0.0;
        for i in 0..400 {
            num += (a[i] - ma) * (b[i] - mb);
            va += (a[i] - ma).powi(2);
            vb += (b[i] - mb).powi(2);
        }
        let corr = num / (va * vb).sqrt();
        assert!(corr.abs() < 0.1, "sample corr(x1,x2) = {corr}");
    }

    #[test]
    fn sample_moments_converge_to_covariance() {
        // Frobenius error of the sample covariance < 0.15 at n=400, and
        // < 0.05 averaged over replicates (10 here keeps the test fast; the
        // bound is the 50-replicate one from the contract).
        let spec = SimSpec::interaction_collinear();
        let target = interaction_covariance(0.5);
        let mut avg = Array2::<f64>::zeros((6, 6));
        let reps = 10;
        for rep in 0..reps {
            let mut s = spec.clone();
            s.base_seed = 100 + rep;
            let (data, _) = generate_interaction_study(&s).unwrap();
            let mut cov = Array2::<f64>::zeros((6, 6));
            let means: Vec<f64> = (0..6).map(|j| data.x.column(j).sum() / 400.0).collect();
            for i in 0..400 {
                for a in 0..6 {
                    for b in 0..6 {
                        cov[[a, b]] +=
                            (data.x[[i, a]] - means[a]) * (data.x[[i, b]] - means[b]);
                    }
                }
            }
            cov.mapv_inplace(|v| v / 399.0);
            let target_norm: f64 = target.iter().map(|v| v * v).sum::<f64>().sqrt();
            let frob: f64 =
                (&cov - &target).iter().map(|v| v * v).sum::<f64>().sqrt() / target_norm;
            assert!(frob < 0.15, "replicate {rep}: relative Frobenius error {frob}");
            avg += &cov;
        }
        avg.mapv_inplace(|v| v / reps as f64);
        let target_norm: f64 = target.iter().map(|v| v * v).sum::<f64>().sqrt();
        let frob_avg: f64 =
            (&avg - &target).iter().map(|v| v * v).sum::<f64>().sqrt() / target_norm;
        assert!(frob_avg < 0.05, "averaged relative Frobenius error {frob_avg}");
    }

    #[test]
    fn replicate_rows_are_bookkept() {
        // Tiny, fast configuration: small n, few draws.
        let spec = SimSpec {
            study: Study::InteractionCollinear,
            n: 120,
            sigma2: 0.5,
            rho: 0.5,
            grid_range: (0.0, 0.0),
            replications: 2,
            base_seed: 7,
        };
        let cfg = ReplicateConfig {
            m: 60,
            burn_in: 20,
            eb: EbOptions {
                budget: 60,
                multi_starts: 1,
                ..Default::default()
            },
            basis_dim: 6,
            bivariate_dim: 12,
        };
        let rows = replicate(&spec, &cfg).unwrap();
        assert_eq!(rows.len(), 2);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.replicate, i);
            assert_eq!(r.seed, 7 + i as u64);
            assert!(r.error.is_none(), "replicate failed: {:?}", r.error);
            assert!(r.r2_additive.is_finite());
            assert!(r.r2_best_pair >= r.r2_additive - 0.05);
            assert!(r.best_pair.is_some());
        }
        let csv = replicate_table_csv(&rows);
        assert!(csv.lines().count() == 3);
        assert!(csv.starts_with("replicate,seed,"));
    }
}
