//! Bayesian linear regression with a horseshoe prior on the coefficients.
//!
//! Every conditional in the Gibbs sampler is a standard draw thanks to the
//! inverse-gamma auxiliary-variable representation of the half-Cauchy scales:
//! no rejection or tuning steps anywhere.

use crate::data::{Dataset, ModelTag, PosteriorDraws};
use crate::error::{Error, Result};
use crate::linalg::{standard_normal_vec, Cholesky};
use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Coefficient and noise-variance draws from the linear-model posterior.
#[derive(Debug, Clone)]
pub struct LinearPosterior {
    pub beta_draws: Array2<f64>,
    pub sigma2_draws: Array1<f64>,
    pub alpha_draws: Array1<f64>,
    /// Posterior mean of beta; equals the column mean of `beta_draws`.
    pub beta_bar: Array1<f64>,
    pub seed: u64,
}

impl LinearPosterior {
    fn from_draws(
        beta_draws: Array2<f64>,
        sigma2_draws: Array1<f64>,
        alpha_draws: Array1<f64>,
        seed: u64,
    ) -> Self {
        let beta_bar = beta_draws.mean_axis(Axis(0)).expect("nonempty");
        Self {
            beta_draws,
            sigma2_draws,
            alpha_draws,
            beta_bar,
            seed,
        }
    }

    pub fn m(&self) -> usize {
        self.beta_draws.nrows()
    }

    pub fn p(&self) -> usize {
        self.beta_draws.ncols()
    }

    /// Fitted-value draws alpha + X beta at the given locations, assembled
    /// into a draw artifact for the diagnostics pipeline.
    pub fn fitted_value_draws(
        &self,
        x: &Array2<f64>,
        locations_id: impl Into<String>,
    ) -> Result<PosteriorDraws> {
        if x.ncols() != self.p() {
            return Err(Error::DimensionMismatch(format!(
                "locations have {} columns, posterior has {}",
                x.ncols(),
                self.p()
            )));
        }
        let mut f = self.beta_draws.dot(&x.t());
        for (mut row, a) in f.rows_mut().into_iter().zip(self.alpha_draws.iter()) {
            row += *a;
        }
        PosteriorDraws::new(
            f,
            self.sigma2_draws.clone(),
            locations_id,
            ModelTag::Horseshoe,
            self.seed,
        )
    }
}

#[derive(Debug, Clone)]
pub struct HorseshoeOptions {
    /// Replace the horseshoe with a fixed Gaussian prior of this variance
    /// (times sigma2) on each coefficient. Debug mode for oracle checks.
    pub fixed_gaussian_prior: Option<f64>,
}

impl Default for HorseshoeOptions {
    fn default() -> Self {
        Self {
            fixed_gaussian_prior: None,
        }
    }
}

pub const DEFAULT_BURN_IN: usize = 1000;
pub const DEFAULT_DRAWS: usize = 5000;

fn inverse_gamma<R: Rng>(rng: &mut R, shape: f64, rate: f64) -> Result<f64> {
    let g = Gamma::new(shape, 1.0 / rate)
        .map_err(|e| Error::SamplerOverflow(format!("gamma({shape}, rate {rate}): {e}")))?;
    Ok(1.0 / g.sample(rng))
}

/// Gibbs sampler for the horseshoe linear model. The intercept carries a flat
/// prior; covariates are expected centered and scaled (a warning is emitted
/// otherwise). Deterministic given the seed.
pub fn sample_horseshoe(
    data: &Dataset,
    m: usize,
    burn_in: usize,
    seed: u64,
    opts: &HorseshoeOptions,
) -> Result<LinearPosterior> {
    if data.n() < 3 {
        return Err(Error::InvalidInput("horseshoe sampler needs n >= 3".into()));
    }
    if m < 2 {
        return Err(Error::InvalidInput("need M >= 2 retained draws".into()));
    }
    if !data.is_standardized() {
        log::warn!("dataset is not standardized; horseshoe shrinkage assumes comparable scales");
    }
    let n = data.n();
    let p = data.p();
    let x = &data.x;
    let y = &data.y;

    let xtx = x.t().dot(x);
    let xty = x.t().dot(y);
    let xt1 = x.t().dot(&Array1::<f64>::ones(n));

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let var_y = {
        let mu = y.sum() / n as f64;
        y.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n as f64 - 1.0)
    };

    let mut alpha = y.sum() / n as f64;
    let mut sigma2 = var_y.max(1e-12);
    let mut lambda2 = Array1::<f64>::ones(p);
    let mut nu = Array1::<f64>::ones(p);
    let mut tau2 = 1.0f64;
    let mut xi = 1.0f64;

    let mut beta_draws = Array2::<f64>::zeros((m, p));
    let mut sigma2_draws = Array1::<f64>::zeros(m);
    let mut alpha_draws = Array1::<f64>::zeros(m);

    let overflow_check = |iter: usize,
                          lambda2: &Array1<f64>,
                          tau2: f64,
                          sigma2: f64|
     -> Result<()> {
        let bad = !tau2.is_finite()
            || !sigma2.is_finite()
            || tau2 > 1e100
            || sigma2 > 1e100
            || lambda2.iter().any(|v| !v.is_finite() || *v > 1e100);
        if bad {
            return Err(Error::SamplerOverflow(format!(
                "iteration {iter}: tau2={tau2:.3e}, sigma2={sigma2:.3e}, max lambda2={:.3e}",
                lambda2.iter().cloned().fold(f64::NAN, f64::max)
            )));
        }
        Ok(())
    };

    for iter in 0..(burn_in + m) {
        // beta | rest ~ N(A^-1 X'r, sigma2 A^-1), A = X'X + D^-1.
        let mut a = xtx.clone();
        for j in 0..p {
            let prior_var = match opts.fixed_gaussian_prior {
                Some(c) => c,
                None => tau2 * lambda2[j],
            };
            a[[j, j]] += 1.0 / prior_var;
        }
        let factor = Cholesky::with_context(&a, "horseshoe beta conditional")?;
        let xtr = &xty - &(&xt1 * alpha);
        let mu = factor.solve_vec(&xtr);
        let eps = standard_normal_vec(&mut rng, p);
        let z = factor.solve_lower_t_vec(&eps);
        let beta = &mu + &(z * sigma2.sqrt());

        // alpha | rest: flat prior Gaussian conditional.
        let xb = x.dot(&beta);
        let resid_mean = (y - &xb).sum() / n as f64;
        alpha = resid_mean + (sigma2 / n as f64).sqrt() * rng.sample::<f64, _>(rand_distr::StandardNormal);

        if opts.fixed_gaussian_prior.is_none() {
            // Local scales and their auxiliaries.
            for j in 0..p {
                let rate = 1.0 / nu[j] + beta[j] * beta[j] / (2.0 * tau2 * sigma2);
                lambda2[j] = inverse_gamma(&mut rng, 1.0, rate)?;
                nu[j] = inverse_gamma(&mut rng, 1.0, 1.0 + 1.0 / lambda2[j])?;
            }
            // Global scale and its auxiliary.
            let sum_ratio: f64 = (0..p).map(|j| beta[j] * beta[j] / lambda2[j]).sum();
            tau2 = inverse_gamma(
                &mut rng,
                (p as f64 + 1.0) / 2.0,
                1.0 / xi + sum_ratio / (2.0 * sigma2),
            )?;
            xi = inverse_gamma(&mut rng, 1.0, 1.0 + 1.0 / tau2)?;
        }

        // sigma2 | rest under Jeffreys' prior, including the scale-mixture
        // contribution of beta.
        let mut rss = 0.0;
        for i in 0..n {
            let r = y[i] - alpha - xb[i];
            rss += r * r;
        }
        let prior_term: f64 = match opts.fixed_gaussian_prior {
            Some(c) => (0..p).map(|j| beta[j] * beta[j] / c).sum(),
            None => (0..p).map(|j| beta[j] * beta[j] / (tau2 * lambda2[j])).sum(),
        };
        sigma2 = inverse_gamma(
            &mut rng,
            (n as f64 + p as f64) / 2.0,
            (rss + prior_term) / 2.0,
        )?;

        overflow_check(iter, &lambda2, tau2, sigma2)?;

        if iter >= burn_in {
            let r = iter - burn_in;
            beta_draws.row_mut(r).assign(&beta);
            sigma2_draws[r] = sigma2;
            alpha_draws[r] = alpha;
        }
    }

    Ok(LinearPosterior::from_draws(
        beta_draws,
        sigma2_draws,
        alpha_draws,
        seed,
    ))
}

// ---------------------------------------------------------------------------
// Artifact I/O
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearPosteriorMeta {
    pub schema_version: u32,
    pub n: usize,
    pub p: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub column_names: Vec<String>,
    pub prior: String,
}

pub fn save_linear_posterior(
    dir: &Path,
    posterior: &LinearPosterior,
    meta: &LinearPosteriorMeta,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(
        dir.join("meta.json"),
        serde_json::to_string_pretty(meta)? + "\n",
    )?;
    crate::data::write_matrix_csv(&dir.join("beta_draws.csv"), &posterior.beta_draws)?;
    crate::data::write_matrix_csv(
        &dir.join("sigma2_draws.csv"),
        &posterior.sigma2_draws.view().insert_axis(Axis(1)).to_owned(),
    )?;
    crate::data::write_matrix_csv(
        &dir.join("alpha_draws.csv"),
        &posterior.alpha_draws.view().insert_axis(Axis(1)).to_owned(),
    )?;
    Ok(())
}

pub fn load_linear_posterior(dir: &Path) -> Result<(LinearPosterior, LinearPosteriorMeta)> {
    let meta: LinearPosteriorMeta =
        serde_json::from_str(&std::fs::read_to_string(dir.join("meta.json"))?)?;
    let beta = crate::data::read_matrix_csv(&dir.join("beta_draws.csv"))?;
    let sigma2 = crate::data::read_matrix_csv(&dir.join("sigma2_draws.csv"))?;
    let alpha = crate::data::read_matrix_csv(&dir.join("alpha_draws.csv"))?;
    let lp = LinearPosterior::from_draws(
        beta,
        sigma2.column(0).to_owned(),
        alpha.column(0).to_owned(),
        meta.seed,
    );
    Ok((lp, meta))
}

/// Kernel-density local-maxima count, used to flag bimodal marginals.
pub fn kde_mode_count(samples: &[f64], grid_points: usize) -> usize {
    let n = samples.len();
    if n < 10 {
        return 1;
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let sd = (samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
    let mut sorted: Vec<f64> = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let iqr = sorted[(0.75 * n as f64) as usize] - sorted[(0.25 * n as f64) as usize];
    // Silverman's rule on the smaller of sd and IQR/1.34.
    let spread = sd.min(iqr / 1.34).max(1e-12);
    let h = 0.9 * spread * (n as f64).powf(-0.2);
    let lo = sorted[0] - 3.0 * h;
    let hi = sorted[n - 1] + 3.0 * h;
    let step = (hi - lo) / (grid_points as f64 - 1.0);
    let dens: Vec<f64> = (0..grid_points)
        .map(|g| {
            let xg = lo + g as f64 * step;
            samples
                .iter()
                .map(|&s| (-(0.5) * ((xg - s) / h).powi(2)).exp())
                .sum::<f64>()
        })
        .collect();
    let mut modes = 0;
    for i in 1..grid_points - 1 {
        if dens[i] > dens[i - 1] && dens[i] >= dens[i + 1] {
            modes += 1;
        }
    }
    modes.max(1)
}
