//! Soft-margin RBF-kernel support vector machine.
//!
//! Training solves the dual problem with SMO to a KKT tolerance. Samples are
//! put into a canonical order before solving, so the trained model does not
//! depend on the order the caller supplies them in.

mod cv;
mod gram;
mod solver;

pub use cv::{
    default_grid, grid_search_cv, stratified_folds, GridCell, GridSearch, GridSearchResult,
};

use alloc::vec::Vec;
use core::cmp::Ordering;
use gram::{CachedGram, DenseGram};
use thiserror::Error;

/// Dual coefficients at or below this magnitude are not support vectors.
pub const SUPPORT_THRESHOLD: f64 = 1e-9;

/// Allowed violation of `sum(alpha_i y_i) = 0` in a stored model.
pub const DUAL_BALANCE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SvmError {
    #[error("training data must contain both classes (got {positive} fake, {negative} real)")]
    SingleClass { positive: usize, negative: usize },
    #[error("sample {0} has a non-finite feature")]
    NonFinite(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid hyperparameters: c and gamma must be positive and finite")]
    InvalidParams,
    #[error("invalid label {0}: expected +1 or -1")]
    InvalidLabel(f64),
    #[error("need at least 2 folds, got {0}")]
    TooFewFolds(usize),
    #[error("cannot build {folds} folds: a class has only {available} units")]
    FoldConstruction { folds: usize, available: usize },
    #[error("empty hyperparameter grid")]
    EmptyGrid,
    #[error("invalid model: {0}")]
    InvalidModel(&'static str),
}

/// A training sample; `y = +1` is fake, `y = -1` real.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub x: Vec<f64>,
    pub y: f64,
}

impl LabeledSample {
    pub fn new(x: Vec<f64>, fake: bool) -> Self {
        Self {
            x,
            y: if fake { 1.0 } else { -1.0 },
        }
    }

    pub fn is_fake(&self) -> bool {
        self.y > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: f64,
}

impl SvmParams {
    pub fn new(c: f64, gamma: f64) -> Result<Self, SvmError> {
        let p = Self { c, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), SvmError> {
        let ok = self.c.is_finite() && self.gamma.is_finite() && self.c > 0.0 && self.gamma > 0.0;
        if ok {
            Ok(())
        } else {
            Err(SvmError::InvalidParams)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    /// Stop once the maximal KKT violation gap falls below this.
    pub tolerance: f64,
    /// `None` means `max(10^7, 100 n)`.
    pub max_iterations: Option<usize>,
    /// Multiplier on `c` for the fake (+1) class.
    pub fake_weight: f64,
    /// Memory budget above which kernel rows are computed on demand.
    pub kernel_cache_bytes: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-3,
            max_iterations: None,
            fake_weight: 1.0,
            kernel_cache_bytes: 256 << 20,
        }
    }
}

impl TrainOptions {
    fn box_for(&self, params: &SvmParams, y: f64) -> f64 {
        if y > 0.0 {
            params.c * self.fake_weight
        } else {
            params.c
        }
    }

    fn iteration_cap(&self, n: usize) -> usize {
        self.max_iterations
            .unwrap_or_else(|| (100 * n).max(10_000_000))
    }
}

/// Solver diagnostics for one training run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainStats {
    pub iterations: usize,
    pub kkt_gap: f64,
    pub converged: bool,
}

/// `f(x) = sum_i coef_i K(sv_i, x) + bias`, with `coef_i = alpha_i y_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    support_vectors: Vec<Vec<f64>>,
    dual_coefs: Vec<f64>,
    bias: f64,
    params: SvmParams,
    fake_weight: f64,
}

impl SvmModel {
    /// Rebuilds a model from stored parts, checking every invariant.
    pub fn from_parts(
        support_vectors: Vec<Vec<f64>>,
        dual_coefs: Vec<f64>,
        bias: f64,
        params: SvmParams,
        fake_weight: f64,
    ) -> Result<Self, SvmError> {
        params.validate()?;
        if support_vectors.is_empty() {
            return Err(SvmError::InvalidModel("no support vectors"));
        }
        if support_vectors.len() != dual_coefs.len() {
            return Err(SvmError::InvalidModel(
                "support vector and coefficient counts differ",
            ));
        }
        let dim = support_vectors[0].len();
        if support_vectors.iter().any(|sv| sv.len() != dim) {
            return Err(SvmError::InvalidModel(
                "support vectors have different dimensions",
            ));
        }
        if !bias.is_finite() || support_vectors.iter().flatten().any(|v| !v.is_finite()) {
            return Err(SvmError::InvalidModel("non-finite value"));
        }
        if !(fake_weight > 0.0 && fake_weight.is_finite()) {
            return Err(SvmError::InvalidModel("class weight must be positive"));
        }
        let bound = params.c * fake_weight.max(1.0) * (1.0 + 1e-12);
        if dual_coefs
            .iter()
            .any(|a| !(a.abs() > SUPPORT_THRESHOLD && a.abs() <= bound))
        {
            return Err(SvmError::InvalidModel("dual coefficient outside (0, c]"));
        }
        if dual_coefs.iter().sum::<f64>().abs() > DUAL_BALANCE_TOL {
            return Err(SvmError::InvalidModel(
                "dual coefficients do not sum to zero",
            ));
        }
        Ok(Self {
            support_vectors,
            dual_coefs,
            bias,
            params,
            fake_weight,
        })
    }

    pub fn support_vectors(&self) -> &[Vec<f64>] {
        &self.support_vectors
    }

    pub fn dual_coefs(&self) -> &[f64] {
        &self.dual_coefs
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn params(&self) -> SvmParams {
        self.params
    }

    pub fn fake_weight(&self) -> f64 {
        self.fake_weight
    }

    pub fn dimension(&self) -> usize {
        self.support_vectors[0].len()
    }

    /// Signed decision value; positive means fake.
    pub fn decision_function(&self, x: &[f64]) -> Result<f64, SvmError> {
        if x.len() != self.dimension() {
            return Err(SvmError::DimensionMismatch {
                expected: self.dimension(),
                got: x.len(),
            });
        }
        let gamma = self.params.gamma;
        let sum: f64 = self
            .support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, a)| a * rbf_unchecked(sv, x, gamma))
            .sum();
        Ok(sum + self.bias)
    }
}

/// `exp(-gamma |a - b|^2)`.
pub fn rbf_kernel(a: &[f64], b: &[f64], gamma: f64) -> Result<f64, SvmError> {
    if a.len() != b.len() {
        return Err(SvmError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(SvmError::InvalidParams);
    }
    Ok(rbf_unchecked(a, b, gamma))
}

#[inline]
pub(crate) fn rbf_unchecked(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    libm::exp(-gamma * gram::squared_distance(a, b))
}

pub fn train(data: &[LabeledSample], params: SvmParams) -> Result<SvmModel, SvmError> {
    train_with(data, params, &TrainOptions::default()).map(|(m, _)| m)
}

pub fn train_with(
    data: &[LabeledSample],
    params: SvmParams,
    options: &TrainOptions,
) -> Result<(SvmModel, TrainStats), SvmError> {
    params.validate()?;
    validate_samples(data)?;
    let order = canonical_order(data);
    let xs: Vec<&[f64]> = order.iter().map(|&i| data[i].x.as_slice()).collect();
    let y: Vec<f64> = order.iter().map(|&i| data[i].y).collect();
    let c: Vec<f64> = y.iter().map(|&yi| options.box_for(&params, yi)).collect();
    let n = xs.len();
    let cap = options.iteration_cap(n);

    let sol = if n.saturating_mul(n).saturating_mul(8) <= options.kernel_cache_bytes {
        let mut gram = DenseGram::from_samples(&xs, params.gamma);
        solver::solve(&mut gram, &y, &c, options.tolerance, cap)
    } else {
        let mut gram = CachedGram::new(xs.clone(), params.gamma, options.kernel_cache_bytes);
        solver::solve(&mut gram, &y, &c, options.tolerance, cap)
    };
    let model = assemble(&xs, &y, &sol, params, options.fake_weight)?;
    Ok((
        model,
        TrainStats {
            iterations: sol.iterations,
            kkt_gap: sol.kkt_gap,
            converged: sol.converged,
        },
    ))
}

pub(crate) fn validate_samples(data: &[LabeledSample]) -> Result<(), SvmError> {
    let dim = data.first().map_or(0, |s| s.x.len());
    let (mut positive, mut negative) = (0, 0);
    for (i, s) in data.iter().enumerate() {
        if s.y == 1.0 {
            positive += 1;
        } else if s.y == -1.0 {
            negative += 1;
        } else {
            return Err(SvmError::InvalidLabel(s.y));
        }
        if s.x.len() != dim {
            return Err(SvmError::DimensionMismatch {
                expected: dim,
                got: s.x.len(),
            });
        }
        if s.x.iter().any(|v| !v.is_finite()) {
            return Err(SvmError::NonFinite(i));
        }
    }
    if positive == 0 || negative == 0 {
        return Err(SvmError::SingleClass { positive, negative });
    }
    Ok(())
}

/// Indices sorted by label, then lexicographically by features.
fn canonical_order(data: &[LabeledSample]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| compare_samples(&data[a], &data[b]).then(a.cmp(&b)));
    order
}

fn compare_samples(a: &LabeledSample, b: &LabeledSample) -> Ordering {
    a.y.total_cmp(&b.y).then_with(|| {
        a.x.iter()
            .zip(&b.x)
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

pub(crate) fn assemble(
    xs: &[&[f64]],
    y: &[f64],
    sol: &solver::Solution,
    params: SvmParams,
    fake_weight: f64,
) -> Result<SvmModel, SvmError> {
    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    for (k, &a) in sol.alpha.iter().enumerate() {
        if a > SUPPORT_THRESHOLD {
            support_vectors.push(xs[k].to_vec());
            dual_coefs.push(a * y[k]);
        }
    }
    SvmModel::from_parts(support_vectors, dual_coefs, -sol.rho, params, fake_weight)
}

/// Largest KKT violation gap `max_{I_up} -y G - min_{I_low} -y G` of a model
/// on its own training data, recomputed from scratch.
pub fn kkt_gap(model: &SvmModel, data: &[LabeledSample]) -> f64 {
    // alpha_i from the stored coefficient of the matching support vector
    let gamma = model.params.gamma;
    let alphas: Vec<f64> = data
        .iter()
        .map(|s| {
            model
                .support_vectors
                .iter()
                .zip(&model.dual_coefs)
                .find(|(sv, _)| sv.as_slice() == s.x.as_slice())
                .map_or(0.0, |(_, a)| a * s.y)
        })
        .collect();
    let (mut up, mut low) = (f64::NEG_INFINITY, f64::INFINITY);
    for (s, &a) in data.iter().zip(&alphas) {
        let c = if s.y > 0.0 {
            model.params.c * model.fake_weight
        } else {
            model.params.c
        };
        // G_t = y_t f_nobias(x_t) - 1
        let f: f64 = model
            .support_vectors
            .iter()
            .zip(&model.dual_coefs)
            .map(|(sv, coef)| coef * rbf_unchecked(sv, &s.x, gamma))
            .sum();
        let v = -s.y * (s.y * f - 1.0);
        let is_up = if s.y > 0.0 { a < c } else { a > 0.0 };
        let is_low = if s.y > 0.0 { a > 0.0 } else { a < c };
        if is_up {
            up = up.max(v);
        }
        if is_low {
            low = low.min(v);
        }
    }
    (up - low).max(0.0)
}
