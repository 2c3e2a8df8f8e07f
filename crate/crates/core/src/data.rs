//! Shared data model: datasets, posterior-draw artifacts, predictive
//! locations, and the summary-loss configuration consumed by the summary
//! modules. All types are immutable after construction.

use crate::error::{Error, Result};
use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

pub const ARTIFACT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResponseTransform {
    None,
    Log,
}

/// Per-column `(shift, scale)` pairs recorded when a dataset is standardized.
/// Standardization is recorded, not destructive: coefficients can be mapped
/// back to the original scale with [`Dataset::unstandardize_coef`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StandardizationRecord {
    pub covariates: Vec<(f64, f64)>,
    pub response: Option<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub column_names: Vec<String>,
    pub standardization: Option<StandardizationRecord>,
    pub response_transform: ResponseTransform,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Array1<f64>, column_names: Vec<String>) -> Result<Self> {
        let ds = Self {
            x,
            y,
            column_names,
            standardization: None,
            response_transform: ResponseTransform::None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n() < 2 {
            return Err(Error::InvalidInput("dataset needs n >= 2 rows".into()));
        }
        if self.p() < 1 {
            return Err(Error::InvalidInput("dataset needs p >= 1 columns".into()));
        }
        if self.y.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "y has {} entries for {} rows",
                self.y.len(),
                self.n()
            )));
        }
        if self.column_names.len() != self.p() {
            return Err(Error::DimensionMismatch(format!(
                "{} column names for {} columns",
                self.column_names.len(),
                self.p()
            )));
        }
        for (i, name) in self.column_names.iter().enumerate() {
            if self.column_names[..i].contains(name) {
                return Err(Error::InvalidInput(format!("duplicate column name {name:?}")));
            }
        }
        if self.x.iter().any(|v| !v.is_finite()) || self.y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite entry in dataset".into()));
        }
        if let Some(rec) = &self.standardization {
            if rec.covariates.iter().any(|&(_, s)| s <= 0.0)
                || rec.response.is_some_and(|(_, s)| s <= 0.0)
            {
                return Err(Error::InvalidInput("recorded scale must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.column_names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    /// Whether covariates look centered and scaled (used to warn, not to fail).
    pub fn is_standardized(&self) -> bool {
        self.standardization.is_some()
    }

    /// Maps a coefficient for standardized column `j` back to the original scale.
    pub fn unstandardize_coef(&self, j: usize, coef: f64) -> f64 {
        match &self.standardization {
            Some(rec) => {
                let (_, sx) = rec.covariates[j];
                let sy = rec.response.map_or(1.0, |(_, s)| s);
                coef * sy / sx
            }
            None => coef,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Columns to log-transform before any centering/scaling. May include the
    /// response column.
    pub log_columns: Vec<String>,
    /// Center and scale every covariate column and the response.
    pub standardize: bool,
}

/// Loads a dataset from a headered CSV file. Transform order is log first,
/// then center/scale, with the applied shifts and scales recorded.
pub fn load_dataset(path: &Path, response_column: &str, opts: &LoadOptions) -> Result<Dataset> {
    let (header, rows) = read_csv_table(path)?;
    dataset_from_table(header, rows, response_column, opts)
}

fn read_csv_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(header.len());
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::NonNumericCell {
                row: i,
                column: header.get(j).cloned().unwrap_or_default(),
                value: cell.to_string(),
            })?;
            row.push(v);
        }
        if row.len() != header.len() {
            return Err(Error::InvalidInput(format!(
                "row {i} has {} cells, header has {}",
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

fn dataset_from_table(
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
    response_column: &str,
    opts: &LoadOptions,
) -> Result<Dataset> {
    let resp_idx = header
        .iter()
        .position(|c| c == response_column)
        .ok_or_else(|| Error::MissingColumn(response_column.to_string()))?;
    for name in &opts.log_columns {
        if !header.contains(name) {
            return Err(Error::MissingColumn(name.clone()));
        }
    }
    let n = rows.len();
    let p = header.len() - 1;
    let covariate_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != resp_idx)
        .map(|(_, c)| c.clone())
        .collect();

    let mut x = Array2::<f64>::zeros((n, p));
    let mut y = Array1::<f64>::zeros(n);
    for (i, row) in rows.iter().enumerate() {
        let mut k = 0;
        for (j, &v) in row.iter().enumerate() {
            if j == resp_idx {
                y[i] = v;
            } else {
                x[[i, k]] = v;
                k += 1;
            }
        }
    }

    // Log transforms first.
    let mut response_transform = ResponseTransform::None;
    for name in &opts.log_columns {
        if name == response_column {
            apply_log(&mut y.view_mut(), name)?;
            response_transform = ResponseTransform::Log;
        } else {
            let j = covariate_names.iter().position(|c| c == name).unwrap();
            apply_log(&mut x.column_mut(j), name)?;
        }
    }

    // Then center/scale, recording shift and scale per column.
    let standardization = if opts.standardize {
        let mut cov = Vec::with_capacity(p);
        for j in 0..p {
            let (shift, scale) = standardize_column(&mut x.column_mut(j))
                .ok_or_else(|| Error::ZeroVariance(covariate_names[j].clone()))?;
            cov.push((shift, scale));
        }
        let resp = standardize_column(&mut y.view_mut())
            .ok_or_else(|| Error::ZeroVariance(response_column.to_string()))?;
        Some(StandardizationRecord {
            covariates: cov,
            response: Some(resp),
        })
    } else {
        None
    };

    let mut ds = Dataset::new(x, y, covariate_names)?;
    ds.standardization = standardization;
    ds.response_transform = response_transform;
    ds.validate()?;
    Ok(ds)
}

fn apply_log(col: &mut ndarray::ArrayViewMut1<f64>, name: &str) -> Result<()> {
    for (i, v) in col.iter_mut().enumerate() {
        if *v <= 0.0 {
            return Err(Error::NonPositiveUnderLog {
                column: name.to_string(),
                value: *v,
                row: i,
            });
        }
        *v = v.ln();
    }
    Ok(())
}

/// Centers to mean zero and scales to unit sample standard deviation
/// (denominator n-1). Returns `None` for zero-variance columns.
fn standardize_column(col: &mut ndarray::ArrayViewMut1<f64>) -> Option<(f64, f64)> {
    let n = col.len() as f64;
    let mean = col.sum() / n;
    let ss: f64 = col.iter().map(|v| (v - mean).powi(2)).sum();
    let sd = (ss / (n - 1.0)).sqrt();
    if sd <= 0.0 || !sd.is_finite() {
        return None;
    }
    col.mapv_inplace(|v| (v - mean) / sd);
    Some((mean, sd))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelTag {
    Gp,
    Horseshoe,
    External,
}

/// Posterior draws of fitted values at a fixed set of locations, plus matched
/// draws of the noise variance.
#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    /// Row k holds the fitted values of draw k at the n locations.
    pub f_draws: Array2<f64>,
    pub sigma2_draws: Array1<f64>,
    pub locations_id: String,
    pub model_tag: ModelTag,
    pub seed: u64,
}

impl PosteriorDraws {
    pub fn new(
        f_draws: Array2<f64>,
        sigma2_draws: Array1<f64>,
        locations_id: impl Into<String>,
        model_tag: ModelTag,
        seed: u64,
    ) -> Result<Self> {
        let d = Self {
            f_draws,
            sigma2_draws,
            locations_id: locations_id.into(),
            model_tag,
            seed,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn m(&self) -> usize {
        self.f_draws.nrows()
    }

    pub fn n_locations(&self) -> usize {
        self.f_draws.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.m() == 0 {
            return Err(Error::InvalidInput("draw matrix has no rows".into()));
        }
        if self.m() < 2 {
            log::warn!("posterior draw artifact has M < 2; uncertainty summaries are disabled");
        }
        if self.sigma2_draws.len() != self.m() {
            return Err(Error::DimensionMismatch(format!(
                "{} sigma2 draws for {} f draws",
                self.sigma2_draws.len(),
                self.m()
            )));
        }
        if self.f_draws.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite fitted-value draw".into()));
        }
        if self.sigma2_draws.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidInput("sigma2 draws must be positive".into()));
        }
        Ok(())
    }

    /// Column-wise mean of the fitted-value draws (the posterior mean fit).
    pub fn posterior_mean_fit(&self) -> Array1<f64> {
        if self.m() < 2 {
            log::warn!("posterior mean over M < 2 draws carries no uncertainty");
        }
        self.f_draws.mean_axis(Axis(0)).expect("nonempty")
    }
}

/// Standalone form of [`PosteriorDraws::posterior_mean_fit`].
pub fn posterior_mean_fit(draws: &PosteriorDraws) -> Array1<f64> {
    draws.posterior_mean_fit()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocationOrigin {
    ObservedSubset,
    Synthetic,
}

/// Covariate locations at which summaries are fitted and evaluated.
#[derive(Debug, Clone)]
pub struct PredictiveLocations {
    pub x_tilde: Array2<f64>,
    /// Optional nonnegative weights for the discrepancy; default uniform.
    pub weights: Option<Array1<f64>>,
    pub origin: LocationOrigin,
    pub id: String,
}

impl PredictiveLocations {
    pub fn new(x_tilde: Array2<f64>, origin: LocationOrigin, id: impl Into<String>) -> Result<Self> {
        let loc = Self {
            x_tilde,
            weights: None,
            origin,
            id: id.into(),
        };
        loc.validate()?;
        Ok(loc)
    }

    pub fn from_dataset(data: &Dataset, id: impl Into<String>) -> Self {
        Self {
            x_tilde: data.x.clone(),
            weights: None,
            origin: LocationOrigin::ObservedSubset,
            id: id.into(),
        }
    }

    pub fn with_weights(mut self, weights: Array1<f64>) -> Result<Self> {
        self.weights = Some(weights);
        self.validate()?;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.x_tilde.nrows()
    }

    pub fn p(&self) -> usize {
        self.x_tilde.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n() < 1 {
            return Err(Error::InvalidInput("predictive locations are empty".into()));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.n() {
                return Err(Error::DimensionMismatch(format!(
                    "{} weights for {} locations",
                    w.len(),
                    self.n()
                )));
            }
            if w.iter().any(|&v| v < 0.0 || !v.is_finite()) {
                return Err(Error::InvalidInput("weights must be nonnegative".into()));
            }
            if w.sum() <= 0.0 {
                return Err(Error::InvalidInput("weights must sum to a positive value".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Discrepancy {
    SquaredError,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "family")]
pub enum PenaltySpec {
    None,
    /// Weighted L1 penalty on linear coefficients over a lambda grid.
    AdaptiveL1 { grid_points: usize, grid_ratio: f64 },
    /// Curvature penalty on additive terms, lambda chosen by GCV.
    Smoothness { gcv: bool },
}

/// Summary loss = discrepancy over the predictive locations plus at most one
/// penalty family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryLossConfig {
    pub discrepancy: Discrepancy,
    pub penalty: PenaltySpec,
}

impl Default for SummaryLossConfig {
    fn default() -> Self {
        Self {
            discrepancy: Discrepancy::SquaredError,
            penalty: PenaltySpec::None,
        }
    }
}

// ---------------------------------------------------------------------------
// Draw artifact I/O: a directory holding meta.json, f_draws.csv (M x n) and
// sigma2_draws.csv (M x 1). CSV keeps the artifact auditable across languages;
// floats are written in Rust's shortest round-trip form so save/load is
// bit-exact.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DrawMeta {
    pub schema_version: u32,
    pub model_tag: ModelTag,
    pub n: usize,
    pub p: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub seed: u64,
    pub column_names: Vec<String>,
    pub hyperparameters: serde_json::Value,
    pub locations_id: String,
}

pub fn write_matrix_csv(path: &Path, m: &Array2<f64>) -> Result<()> {
    let mut out = String::new();
    for row in m.rows() {
        let mut first = true;
        for v in row.iter() {
            if !first {
                out.push(',');
            }
            write!(out, "{v}").expect("write to string");
            first = false;
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<Array2<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut data = Vec::new();
    let mut ncols = None;
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|c| {
                c.trim().parse::<f64>().map_err(|_| Error::NonNumericCell {
                    row: i,
                    column: String::new(),
                    value: c.to_string(),
                })
            })
            .collect::<Result<_>>()?;
        match ncols {
            None => ncols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(Error::Artifact(format!(
                    "ragged CSV at {path:?}: row {i} has {} cells, expected {c}",
                    row.len()
                )))
            }
            _ => {}
        }
        data.extend(row);
    }
    let ncols = ncols.ok_or_else(|| Error::Artifact(format!("empty CSV at {path:?}")))?;
    let nrows = data.len() / ncols;
    Ok(Array2::from_shape_vec((nrows, ncols), data).expect("shape"))
}

pub fn save_draws(dir: &Path, draws: &PosteriorDraws, meta: &DrawMeta) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let meta_json = serde_json::to_string_pretty(meta)?;
    std::fs::write(dir.join("meta.json"), meta_json + "\n")?;
    write_matrix_csv(&dir.join("f_draws.csv"), &draws.f_draws)?;
    let sig = draws
        .sigma2_draws
        .view()
        .insert_axis(Axis(1))
        .to_owned();
    write_matrix_csv(&dir.join("sigma2_draws.csv"), &sig)?;
    Ok(())
}

pub fn load_draws(dir: &Path) -> Result<(PosteriorDraws, DrawMeta)> {
    let meta: DrawMeta = serde_json::from_str(&std::fs::read_to_string(dir.join("meta.json"))?)?;
    if meta.schema_version != ARTIFACT_SCHEMA_VERSION {
        return Err(Error::Artifact(format!(
            "unsupported schema_version {} (expected {})",
            meta.schema_version, ARTIFACT_SCHEMA_VERSION
        )));
    }
    let f_draws = read_matrix_csv(&dir.join("f_draws.csv"))?;
    let sig = read_matrix_csv(&dir.join("sigma2_draws.csv"))?;
    if sig.ncols() != 1 {
        return Err(Error::Artifact("sigma2_draws.csv must have one column".into()));
    }
    if f_draws.nrows() != meta.m || f_draws.ncols() != meta.n {
        return Err(Error::Artifact(format!(
            "f_draws.csv is {}x{}, meta says {}x{}",
            f_draws.nrows(),
            f_draws.ncols(),
            meta.m,
            meta.n
        )));
    }
    let draws = PosteriorDraws::new(
        f_draws,
        sig.column(0).to_owned(),
        meta.locations_id.clone(),
        meta.model_tag,
        meta.seed,
    )?;
    Ok((draws, meta))
}

/// Writes predictive locations (or a covariate matrix) with a header row.
pub fn save_locations_csv(path: &Path, x: &Array2<f64>, names: &[String]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&names.join(","));
    out.push('\n');
    let body = {
        let mut s = String::new();
        for row in x.rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    };
    out.push_str(&body);
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_locations_csv(path: &Path) -> Result<(Array2<f64>, Vec<String>)> {
    let (header, rows) = read_csv_table(path)?;
    let n = rows.len();
    let p = header.len();
    let mut x = Array2::<f64>::zeros((n, p));
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            x[[i, j]] = v;
        }
    }
    Ok((x, header))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn write_temp_csv(content: &str) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn three_row_standardization_hand_check() {
        let f = write_temp_csv("x,y\n1,10\n2,20\n3,30\n");
        let ds = load_dataset(
            f.path(),
            "y",
            &LoadOptions {
                log_columns: vec![],
                standardize: true,
            },
        )
        .unwrap();
        // {1,2,3}: mean 2, sample sd 1 -> shift=2, scale=1, column mean 0, sd 1.
        let rec = ds.standardization.as_ref().unwrap();
        assert!((rec.covariates[0].0 - 2.0).abs() < 1e-12);
        assert!((rec.covariates[0].1 - 1.0).abs() < 1e-12);
        let col = ds.x.column(0);
        assert!(col.sum().abs() < 1e-12);
        let ss: f64 = col.iter().map(|v| v * v).sum();
        assert!((ss / 2.0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_column_rejected() {
        let f = write_temp_csv("x,y\n5,1\n5,2\n5,3\n");
        let err = load_dataset(
            f.path(),
            "y",
            &LoadOptions {
                log_columns: vec![],
                standardize: true,
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::ZeroVariance(c) if c == "x"));
    }

    #[test]
    fn missing_column_and_bad_cell() {
        let f = write_temp_csv("x,y\n1,2\n3,4\n");
        assert!(matches!(
            load_dataset(f.path(), "z", &LoadOptions::default()),
            Err(Error::MissingColumn(_))
        ));
        let g = write_temp_csv("x,y\n1,2\nfoo,4\n");
        assert!(matches!(
            load_dataset(g.path(), "y", &LoadOptions::default()),
            Err(Error::NonNumericCell { .. })
        ));
    }

    #[test]
    fn log_transform_rejects_nonpositive_and_orders_before_scaling() {
        let f = write_temp_csv("x,y\n1,1\n0,2\n3,3\n");
        let err = load_dataset(
            f.path(),
            "y",
            &LoadOptions {
                log_columns: vec!["x".into()],
                standardize: false,
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonPositiveUnderLog { .. }));

        let g = write_temp_csv("x,y\n1,1\n2,2\n4,3\n");
        let ds = load_dataset(
            g.path(),
            "y",
            &LoadOptions {
                log_columns: vec!["x".into()],
                standardize: true,
            },
        )
        .unwrap();
        // Shift recorded on the log scale: mean of {0, ln2, ln4}.
        let expect_shift = (0.0 + 2f64.ln() + 4f64.ln()) / 3.0;
        let rec = ds.standardization.as_ref().unwrap();
        assert!((rec.covariates[0].0 - expect_shift).abs() < 1e-12);
    }

    #[test]
    fn crime_data_dimensions() {
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../../data/uscrime.csv");
        let log_cols: Vec<String> = [
            "M", "Ed", "Po1", "Po2", "LF", "M.F", "Pop", "NW", "U1", "U2", "GDP", "Ineq", "Prob",
            "Time", "y",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let ds = load_dataset(
            &path,
            "y",
            &LoadOptions {
                log_columns: log_cols,
                standardize: true,
            },
        )
        .unwrap();
        assert_eq!(ds.n(), 47);
        assert_eq!(ds.p(), 15);
    }

    #[test]
    fn posterior_mean_fit_is_columnwise_mean() {
        let draws = PosteriorDraws::new(
            array![[1.0, 3.0], [3.0, 5.0]],
            array![1.0, 1.0],
            "loc",
            ModelTag::External,
            0,
        )
        .unwrap();
        let mean = draws.posterior_mean_fit();
        assert_eq!(mean, array![2.0, 4.0]);
    }

    #[test]
    fn posterior_mean_fit_single_draw_passthrough() {
        // M=1 is allowed for external artifacts, with a warning.
        let draws = PosteriorDraws {
            f_draws: array![[1.5, 2.5, 3.5]],
            sigma2_draws: array![0.7],
            locations_id: "loc".into(),
            model_tag: ModelTag::External,
            seed: 0,
        };
        assert_eq!(draws.posterior_mean_fit(), array![1.5, 2.5, 3.5]);
    }

    #[test]
    fn posterior_mean_fit_permutation_equivariant() {
        let d1 = PosteriorDraws::new(
            array![[1.0, 2.0], [5.0, 6.0], [9.0, 1.0]],
            array![1.0, 1.0, 1.0],
            "loc",
            ModelTag::External,
            0,
        )
        .unwrap();
        let d2 = PosteriorDraws::new(
            array![[9.0, 1.0], [1.0, 2.0], [5.0, 6.0]],
            array![1.0, 1.0, 1.0],
            "loc",
            ModelTag::External,
            0,
        )
        .unwrap();
        let a = d1.posterior_mean_fit();
        let b = d2.posterior_mean_fit();
        assert!((&a - &b).iter().all(|d| d.abs() < 1e-15));
    }

    #[test]
    fn draw_artifact_roundtrip_bit_identical() {
        let draws = PosteriorDraws::new(
            array![
                [1.0 / 3.0, 2.0f64.sqrt(), -1.2345678901234567e-8],
                [std::f64::consts::PI, 1e300, 5.0e-324]
            ],
            array![0.25, 1.0 / 7.0],
            "loc-x",
            ModelTag::Gp,
            42,
        )
        .unwrap();
        let meta = DrawMeta {
            schema_version: ARTIFACT_SCHEMA_VERSION,
            model_tag: ModelTag::Gp,
            n: 3,
            p: 2,
            m: 2,
            seed: 42,
            column_names: vec!["a".into(), "b".into()],
            hyperparameters: serde_json::json!({"tau2": 1.0}),
            locations_id: "loc-x".into(),
        };
        let dir = tempfile::tempdir().unwrap();
        save_draws(dir.path(), &draws, &meta).unwrap();
        let (loaded, meta2) = load_draws(dir.path()).unwrap();
        assert_eq!(loaded.f_draws, draws.f_draws);
        assert_eq!(loaded.sigma2_draws, draws.sigma2_draws);
        assert_eq!(meta2.seed, meta.seed);

        // Saving the loaded artifact again reproduces the bytes exactly.
        let dir2 = tempfile::tempdir().unwrap();
        save_draws(dir2.path(), &loaded, &meta2).unwrap();
        for f in ["f_draws.csv", "sigma2_draws.csv", "meta.json"] {
            let a = std::fs::read(dir.path().join(f)).unwrap();
            let b = std::fs::read(dir2.path().join(f)).unwrap();
            assert_eq!(a, b, "{f} not byte-identical");
        }
    }

    #[test]
    fn weights_must_be_valid() {
        let x = array![[1.0], [2.0]];
        let loc = PredictiveLocations::new(x.clone(), LocationOrigin::Synthetic, "t").unwrap();
        assert!(loc.clone().with_weights(array![1.0, -1.0]).is_err());
        assert!(loc.clone().with_weights(array![0.0, 0.0]).is_err());
        assert!(loc.with_weights(array![0.0, 2.0]).is_ok());
    }
}
