//! Classification on top of OAVI: min-max scaling, one generator model per
//! class, the feature map `z -> (|g_1(z)|, ..., |g_N(z)|)`, and a one-vs-rest
//! linear model with squared hinge loss over an l1 ball, trained with BPCG.

use std::time::Instant;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::data::{self, Dataset};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, Columns};
use crate::oavi::{oavi_fit_report, FitReport, GeneratorModel, ModelWire, OaviConfig, Polynomial};
use crate::par;
use crate::solvers::{
    self, BiasVertex, L1BallWithBias, L1Vertex, Objective, Polytope, SolveOptions,
};

pub const PIPELINE_SCHEMA: &str = "vanish-kit/pipeline/v1";

/// Coefficients with magnitude at most this count as zero for sparsity.
pub const ZERO_TOLERANCE: f64 = 1e-10;

/// Grid defaults.
pub const PSI_GRID: [f64; 7] = [0.1, 0.05, 0.01, 0.005, 0.001, 0.0005, 0.0001];
pub const RADIUS_GRID: [f64; 3] = [0.1, 1.0, 10.0];

/// Per-feature affine map onto `[0, 1]` fitted on training data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Scaler {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyDataset)?;
        let mut min = first.clone();
        let mut max = first.clone();
        for row in rows {
            check_dim(min.len(), row.len())?;
            for ((lo, hi), &v) in min.iter_mut().zip(max.iter_mut()).zip(row) {
                *lo = lo.min(v);
                *hi = hi.max(v);
            }
        }
        Ok(Scaler { min, max })
    }

    pub fn num_features(&self) -> usize {
        self.min.len()
    }

    /// Constant training features map to 0; values outside the training
    /// range are clamped.
    pub fn apply_value(&self, i: usize, v: f64) -> f64 {
        let span = self.max[i] - self.min[i];
        if span > 0.0 {
            ((v - self.min[i]) / span).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    pub fn apply(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter()
            .map(|row| {
                check_dim(self.num_features(), row.len())?;
                Ok(row
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| self.apply_value(i, v))
                    .collect())
            })
            .collect()
    }

    pub fn apply_columns(&self, rows: &[Vec<f64>]) -> Result<Columns> {
        let scaled = self.apply(rows)?;
        if scaled.is_empty() {
            return Columns::from_columns(vec![Vec::new(); self.num_features()]);
        }
        Columns::from_rows(&scaled)
    }
}

/// `|g(z)|` for every generator of every model, models in the given order:
/// one row per sample of `z`.
pub fn transform(models: &[GeneratorModel], z: &Columns) -> Result<Vec<Vec<f64>>> {
    let mut blocks = Vec::with_capacity(models.len());
    for model in models {
        blocks.extend(model.evaluate(z)?);
    }
    Ok((0..z.num_rows())
        .map(|r| blocks.iter().map(|col| col[r].abs()).collect())
        .collect())
}

/// Fraction of zero non-leading coefficients over all generators.
pub fn sparsity<'a>(generators: impl IntoIterator<Item = &'a Polynomial>) -> Result<f64> {
    let (mut zeros, mut entries) = (0usize, 0usize);
    for g in generators {
        entries += g.basis_len();
        zeros += g
            .coeffs()
            .iter()
            .filter(|c| c.abs() <= ZERO_TOLERANCE)
            .count();
    }
    if entries == 0 {
        return Err(Error::Input(
            "sparsity is undefined without non-leading coefficients".into(),
        ));
    }
    Ok(zeros as f64 / entries as f64)
}

/// `(1/q) sum_i max(0, 1 - s_i (w^T f_i + beta))^2` on `(w, beta)` with
/// `s_i = +-1`.
#[derive(Clone, Debug)]
pub struct SquaredHinge<'a> {
    features: &'a [Vec<f64>],
    signs: Vec<f64>,
    p: usize,
}

impl<'a> SquaredHinge<'a> {
    pub fn new(features: &'a [Vec<f64>], signs: Vec<f64>) -> Result<Self> {
        check_dim(features.len(), signs.len())?;
        if features.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let p = features[0].len();
        for f in features {
            check_dim(p, f.len())?;
        }
        Ok(SquaredHinge { features, signs, p })
    }

    fn score(&self, y: &[f64], i: usize) -> f64 {
        dot(&y[..self.p], &self.features[i]) + y[self.p]
    }

    fn direction(&self, d: &[f64], i: usize) -> f64 {
        self.signs[i] * self.score(d, i)
    }
}

impl Objective for SquaredHinge<'_> {
    fn dim(&self) -> usize {
        self.p + 1
    }

    fn value(&self, y: &[f64]) -> f64 {
        let q = self.features.len() as f64;
        (0..self.features.len())
            .map(|i| (1.0 - self.signs[i] * self.score(y, i)).max(0.0).powi(2))
            .sum::<f64>()
            / q
    }

    fn gradient(&self, y: &[f64]) -> Vec<f64> {
        self.value_and_gradient(y).1
    }

    fn value_and_gradient(&self, y: &[f64]) -> (f64, Vec<f64>) {
        let q = self.features.len() as f64;
        let mut value = 0.0;
        let mut grad = vec![0.0; self.p + 1];
        for (i, f) in self.features.iter().enumerate() {
            let slack = 1.0 - self.signs[i] * self.score(y, i);
            if slack > 0.0 {
                value += slack * slack;
                let c = -2.0 * self.signs[i] * slack / q;
                for (g, fj) in grad.iter_mut().zip(f) {
                    *g += c * fj;
                }
                grad[self.p] += c;
            }
        }
        (value / q, grad)
    }

    /// `phi(gamma) = f(y + gamma d)` is convex and piecewise quadratic; its
    /// derivative is monotone, so bisect on the sign of `phi'`.
    fn line_search(&self, y: &[f64], _grad: &[f64], d: &[f64], gamma_max: f64) -> f64 {
        let n = self.features.len();
        let slack: Vec<f64> = (0..n)
            .map(|i| 1.0 - self.signs[i] * self.score(y, i))
            .collect();
        let delta: Vec<f64> = (0..n).map(|i| self.direction(d, i)).collect();
        let slope = |gamma: f64| -> f64 {
            slack
                .iter()
                .zip(&delta)
                .map(|(s, dl)| -dl * (s - gamma * dl).max(0.0))
                .sum()
        };
        if slope(0.0) >= 0.0 || gamma_max <= 0.0 {
            return 0.0;
        }
        if slope(gamma_max) <= 0.0 {
            return gamma_max;
        }
        let (mut lo, mut hi) = (0.0, gamma_max);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if slope(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * gamma_max.max(1.0) {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Weights and bias of one one-vs-rest scorer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn score(&self, f: &[f64]) -> f64 {
        dot(&self.weights, f) + self.bias
    }
}

/// Train one scorer per class (`+1` for the class, `-1` for the rest) with
/// `||w||_1 <= radius`. The bias is confined to `[-b, b]` with
/// `b = 1 + radius * max |f|`, wide enough to never bind at the optimum.
pub fn fit_linear_classifier(
    features: &[Vec<f64>],
    labels: &[usize],
    radius: f64,
) -> Result<Vec<LinearModel>> {
    check_dim(features.len(), labels.len())?;
    if !(radius >= 0.0) || !radius.is_finite() {
        return Err(Error::Parameter(format!(
            "classifier radius must be nonnegative, got {radius}"
        )));
    }
    let k = labels.iter().max().map_or(0, |&c| c + 1);
    let present = (0..k).filter(|c| labels.contains(c)).count();
    if present < 2 {
        return Err(Error::Input(
            "classification needs at least two classes".into(),
        ));
    }
    let p = features.first().map_or(0, Vec::len);
    let fmax = features
        .iter()
        .flatten()
        .fold(0.0f64, |a, v| a.max(v.abs()));
    let ball = L1BallWithBias {
        weights: p,
        radius,
        bias_radius: 1.0 + radius * fmax,
    };
    let classes: Vec<usize> = (0..k).collect();
    let results = par::map_jobs(&classes, |&c| -> Result<LinearModel> {
        let signs: Vec<f64> = labels
            .iter()
            .map(|&l| if l == c { 1.0 } else { -1.0 })
            .collect();
        let objective = SquaredHinge::new(features, signs)?;
        let start = BiasVertex {
            weight: L1Vertex::new(0, 1),
            bias_sign: 1,
        };
        let start = ball.lmo(&objective.gradient(&ball.vertex_point(start)));
        let sol = solvers::solve_bpcg(
            &objective,
            &ball,
            start,
            SolveOptions::accuracy(1e-7, 5_000),
        )?;
        let y = sol.result.y;
        Ok(LinearModel {
            weights: y[..p].to_vec(),
            bias: y[p],
        })
    });
    results.into_iter().collect()
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub oavi: OaviConfig,
    pub classifier_radius: f64,
}

/// Scaler, per-class generators and one-vs-rest scorers.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierModel {
    pub psi: f64,
    pub tau: f64,
    pub classifier_radius: f64,
    pub feature_names: Vec<String>,
    pub label_names: Vec<String>,
    pub scaler: Scaler,
    /// Indexed by label.
    pub class_models: Vec<GeneratorModel>,
    /// Divisor applied to each transformed column before scoring: its
    /// largest training value, or 1 for an all-zero column.
    pub feature_scale: Vec<f64>,
    pub classifiers: Vec<LinearModel>,
}

/// A trained pipeline plus what it cost.
#[derive(Clone, Debug)]
pub struct FittedPipeline {
    pub model: ClassifierModel,
    pub reports: Vec<FitReport>,
    /// Wall-clock seconds of each class's OAVI fit.
    pub fit_seconds: Vec<f64>,
}

/// Fit OAVI on the rows of `x` (already in `[0, 1]`) for each class, in
/// parallel, timing each fit.
pub fn fit_class_models(classes: &[Columns], config: &OaviConfig) -> Result<Vec<(FitReport, f64)>> {
    par::map_jobs(classes, |x| {
        let start = Instant::now();
        let report = oavi_fit_report(x, config)?;
        Ok((report, start.elapsed().as_secs_f64()))
    })
    .into_iter()
    .collect()
}

pub fn fit_pipeline(train: &Dataset, config: &PipelineConfig) -> Result<FittedPipeline> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let k = train.num_classes();
    if k < 2 {
        return Err(Error::Input(
            "classification needs at least two classes".into(),
        ));
    }
    let scaler = Scaler::fit(&train.x)?;
    let mut classes = Vec::with_capacity(k);
    for c in 0..k {
        let rows = train.class_rows(c);
        if rows.is_empty() {
            return Err(Error::Input(format!(
                "class '{}' has no training rows",
                train.label_names[c]
            )));
        }
        classes.push(scaler.apply_columns(&rows)?);
    }
    let fits = fit_class_models(&classes, &config.oavi)?;
    let (reports, fit_seconds): (Vec<FitReport>, Vec<f64>) = fits.into_iter().unzip();
    let class_models: Vec<GeneratorModel> = reports.iter().map(|r| r.model.clone()).collect();

    let z = scaler.apply_columns(&train.x)?;
    let raw = transform(&class_models, &z)?;
    let width = raw.first().map_or(0, Vec::len);
    let feature_scale: Vec<f64> = (0..width)
        .map(|j| {
            let m = raw.iter().fold(0.0f64, |a, r| a.max(r[j]));
            if m > 0.0 && m.is_finite() {
                m
            } else {
                1.0
            }
        })
        .collect();
    let features = rescale(&raw, &feature_scale);
    let classifiers = fit_linear_classifier(&features, &train.y, config.classifier_radius)?;
    Ok(FittedPipeline {
        model: ClassifierModel {
            psi: config.oavi.psi,
            tau: config.oavi.tau,
            classifier_radius: config.classifier_radius,
            feature_names: train.feature_names.clone(),
            label_names: train.label_names.clone(),
            scaler,
            class_models,
            feature_scale,
            classifiers,
        },
        reports,
        fit_seconds,
    })
}

fn rescale(raw: &[Vec<f64>], scale: &[f64]) -> Vec<Vec<f64>> {
    raw.iter()
        .map(|r| r.iter().zip(scale).map(|(v, s)| v / s).collect())
        .collect()
}

impl ClassifierModel {
    pub fn num_features(&self) -> usize {
        self.scaler.num_features()
    }

    pub fn num_generators(&self) -> usize {
        self.class_models.iter().map(|m| m.g.len()).sum()
    }

    /// The raw feature map of `rows` (before scaling by `feature_scale`).
    pub fn transform(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let z = self.scaler.apply_columns(rows)?;
        transform(&self.class_models, &z)
    }

    pub fn scores(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let features = rescale(&self.transform(rows)?, &self.feature_scale);
        Ok(features
            .iter()
            .map(|f| self.classifiers.iter().map(|c| c.score(f)).collect())
            .collect())
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>> {
        Ok(self.scores(rows)?.iter().map(|s| argmax(s)).collect())
    }

    /// Misclassification rate on `(rows, labels)`.
    pub fn evaluate(&self, rows: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
        check_dim(rows.len(), labels.len())?;
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let predicted = self.predict(rows)?;
        let wrong = predicted.iter().zip(labels).filter(|(p, l)| p != l).count();
        Ok(wrong as f64 / rows.len() as f64)
    }

    /// Sparsity over the generators of all classes.
    pub fn sparsity(&self) -> Result<f64> {
        sparsity(self.class_models.iter().flat_map(|m| &m.g))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Serialize, Deserialize)]
struct PipelineWire {
    schema: String,
    psi: f64,
    tau: f64,
    classifier_radius: f64,
    feature_names: Vec<String>,
    label_names: Vec<String>,
    scaler: Scaler,
    class_models: Vec<ModelWire>,
    feature_scale: Vec<f64>,
    classifiers: Vec<LinearModel>,
}

impl Serialize for ClassifierModel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PipelineWire {
            schema: PIPELINE_SCHEMA.to_string(),
            psi: self.psi,
            tau: self.tau,
            classifier_radius: self.classifier_radius,
            feature_names: self.feature_names.clone(),
            label_names: self.label_names.clone(),
            scaler: self.scaler.clone(),
            class_models: self.class_models.iter().map(ModelWire::from).collect(),
            feature_scale: self.feature_scale.clone(),
            classifiers: self.classifiers.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ClassifierModel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let w = PipelineWire::deserialize(d)?;
        if w.schema != PIPELINE_SCHEMA {
            return Err(D::Error::custom(format!(
                "unsupported pipeline schema '{}', expected '{PIPELINE_SCHEMA}'",
                w.schema
            )));
        }
        let class_models = w
            .class_models
            .into_iter()
            .map(GeneratorModel::try_from)
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        let n = w.scaler.num_features();
        let width: usize = class_models.iter().map(|m| m.g.len()).sum();
        let consistent = w.scaler.max.len() == n
            && class_models.iter().all(|m| m.n == n)
            && w.feature_scale.len() == width
            && w.classifiers.len() == class_models.len()
            && w.classifiers.iter().all(|c| c.weights.len() == width)
            && w.label_names.len() == class_models.len();
        if !consistent {
            return Err(D::Error::custom(
                "pipeline parts have inconsistent dimensions",
            ));
        }
        Ok(ClassifierModel {
            psi: w.psi,
            tau: w.tau,
            classifier_radius: w.classifier_radius,
            feature_names: w.feature_names,
            label_names: w.label_names,
            scaler: w.scaler,
            class_models,
            feature_scale: w.feature_scale,
            classifiers: w.classifiers,
        })
    }
}

/// Cross-validated error of one grid point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridPoint {
    pub psi: f64,
    pub classifier_radius: f64,
    pub cv_error: f64,
}

/// Every grid point's mean validation error; the best is the first point
/// with the smallest error (grid order: psi-major).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridResult {
    pub points: Vec<GridPoint>,
    pub best: GridPoint,
}

/// `k`-fold cross-validation over `psis x radii`, other settings from `base`.
pub fn grid_search(
    ds: &Dataset,
    base: &OaviConfig,
    psis: &[f64],
    radii: &[f64],
    k: usize,
    seed: u64,
) -> Result<GridResult> {
    if psis.is_empty() || radii.is_empty() || k < 2 {
        return Err(Error::Parameter(
            "grid search needs psi and radius values and at least two folds".into(),
        ));
    }
    let folds = data::folds(ds.len(), k, seed);
    let splits: Vec<(Dataset, Dataset)> = (0..k)
        .map(|f| {
            let train: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|(g, _)| *g != f)
                .flat_map(|(_, idx)| idx.iter().copied())
                .collect();
            (ds.subset(&train), ds.subset(&folds[f]))
        })
        .collect();
    let mut points = Vec::new();
    for &psi in psis {
        let oavi = OaviConfig {
            psi,
            ..base.clone()
        };
        for &classifier_radius in radii {
            let config = PipelineConfig {
                oavi: oavi.clone(),
                classifier_radius,
            };
            let mut total = 0.0;
            for (train, test) in &splits {
                let fitted = fit_pipeline(train, &config)?;
                total += fitted.model.evaluate(&test.x, &test.y)?;
            }
            points.push(GridPoint {
                psi,
                classifier_radius,
                cv_error: total / k as f64,
            });
        }
    }
    let best = points
        .iter()
        .fold(None::<&GridPoint>, |best, p| match best {
            Some(b) if b.cv_error <= p.cv_error => Some(b),
            _ => Some(p),
        })
        .cloned()
        .expect("non-empty grid");
    Ok(GridResult { points, best })
}
