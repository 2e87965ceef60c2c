//! First-order Sugeno systems built by grid partition and trained with the
//! hybrid rule: a ridge-damped least-squares fit of the linear consequents
//! followed by one batch gradient step on the premise parameters per epoch.
//!
//! Rule `k = i * n2 + j` pairs term `i` of input 1 with term `j` of input 2.
//! Firing strength is the product of the two memberships; the rule output is
//! `p * x1 + q * x2 + r`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fuzzy::{MembershipFunction, GRAY_DOMAIN};

pub const DEFAULT_RIDGE: f64 = 1e-9;
pub const MIN_WIDTH: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnfisError {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("training set contains a non-finite value at row {0}")]
    NonFiniteData(usize),
    #[error("least-squares system is singular")]
    SingularSystem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PremiseShape {
    Gbell,
    Gaussian,
}

impl PremiseShape {
    fn params_per_term(self) -> usize {
        match self {
            PremiseShape::Gbell => 3,
            PremiseShape::Gaussian => 2,
        }
    }

    fn matches(self, mf: &MembershipFunction) -> bool {
        matches!(
            (self, mf),
            (
                PremiseShape::Gbell,
                MembershipFunction::GeneralizedBell { .. }
            ) | (PremiseShape::Gaussian, MembershipFunction::Gaussian { .. })
        )
    }
}

impl std::str::FromStr for PremiseShape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gbell" => Ok(Self::Gbell),
            "gaussian" | "gauss" => Ok(Self::Gaussian),
            other => Err(format!("unknown premise shape `{other}`")),
        }
    }
}

/// Linear consequent `p * x1 + q * x2 + r`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Consequent {
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

impl Consequent {
    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        self.p * x1 + self.q * x2 + self.r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SugenoFis {
    shape: PremiseShape,
    domain: [f64; 2],
    premises: [Vec<MembershipFunction>; 2],
    consequents: Vec<Consequent>,
}

/// Result of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub output: f64,
    pub strengths: Vec<f64>,
    pub normalized: Vec<f64>,
    /// Set when every rule has zero firing strength; `output` is then 0.
    pub all_rules_silent: bool,
}

impl SugenoFis {
    pub fn new(
        shape: PremiseShape,
        domain: [f64; 2],
        premises: [Vec<MembershipFunction>; 2],
        consequents: Vec<Consequent>,
    ) -> Result<Self, AnfisError> {
        let model = Self {
            shape,
            domain,
            premises,
            consequents,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), AnfisError> {
        let invalid = |m: String| Err(AnfisError::InvalidParameters(m));
        let [lo, hi] = self.domain;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return invalid(format!("empty domain [{lo}, {hi}]"));
        }
        for terms in &self.premises {
            if terms.is_empty() {
                return invalid("input without premise terms".into());
            }
            for mf in terms {
                if !self.shape.matches(mf) {
                    return invalid(format!("{mf:?} is not a {:?} term", self.shape));
                }
                mf.validate()
                    .map_err(|e| AnfisError::InvalidParameters(e.to_string()))?;
            }
        }
        if self.consequents.len() != self.rule_count() {
            return invalid(format!(
                "{} consequents for {} rules",
                self.consequents.len(),
                self.rule_count()
            ));
        }
        if self
            .consequents
            .iter()
            .any(|c| !(c.p.is_finite() && c.q.is_finite() && c.r.is_finite()))
        {
            return invalid("non-finite consequent".into());
        }
        Ok(())
    }

    pub fn shape(&self) -> PremiseShape {
        self.shape
    }

    pub fn domain(&self) -> [f64; 2] {
        self.domain
    }

    pub fn premises(&self) -> &[Vec<MembershipFunction>; 2] {
        &self.premises
    }

    pub fn consequents(&self) -> &[Consequent] {
        &self.consequents
    }

    pub fn set_consequents(&mut self, consequents: Vec<Consequent>) -> Result<(), AnfisError> {
        if consequents.len() != self.rule_count() {
            return Err(AnfisError::InvalidParameters(format!(
                "{} consequents for {} rules",
                consequents.len(),
                self.rule_count()
            )));
        }
        self.consequents = consequents;
        Ok(())
    }

    pub fn rule_count(&self) -> usize {
        self.premises[0].len() * self.premises[1].len()
    }

    /// Premise parameters flattened input-major, then term-major; gbell terms
    /// contribute `(a, b, c)`, gaussian terms `(mean, sigma)`.
    pub fn premise_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.premise_param_count());
        for mf in self.premises.iter().flatten() {
            match *mf {
                MembershipFunction::GeneralizedBell { a, b, c } => out.extend([a, b, c]),
                MembershipFunction::Gaussian { mean, sigma } => out.extend([mean, sigma]),
                _ => unreachable!("validated premise shape"),
            }
        }
        out
    }

    pub fn premise_param_count(&self) -> usize {
        (self.premises[0].len() + self.premises[1].len()) * self.shape.params_per_term()
    }

    /// Overwrites the premise parameters without width clamping.
    pub fn set_premise_params(&mut self, params: &[f64]) -> Result<(), AnfisError> {
        if params.len() != self.premise_param_count() {
            return Err(AnfisError::InvalidParameters(format!(
                "expected {} premise parameters, got {}",
                self.premise_param_count(),
                params.len()
            )));
        }
        let per = self.shape.params_per_term();
        let shape = self.shape;
        for (mf, chunk) in self
            .premises
            .iter_mut()
            .flatten()
            .zip(params.chunks_exact(per))
        {
            *mf = match shape {
                PremiseShape::Gbell => MembershipFunction::GeneralizedBell {
                    a: chunk[0],
                    b: chunk[1],
                    c: chunk[2],
                },
                PremiseShape::Gaussian => MembershipFunction::Gaussian {
                    mean: chunk[0],
                    sigma: chunk[1],
                },
            };
        }
        Ok(())
    }

    fn clamp_widths(&mut self) {
        for mf in self.premises.iter_mut().flatten() {
            match mf {
                MembershipFunction::GeneralizedBell { a, b, .. } => {
                    *a = a.max(MIN_WIDTH);
                    *b = b.max(MIN_WIDTH);
                }
                MembershipFunction::Gaussian { sigma, .. } => *sigma = sigma.max(MIN_WIDTH),
                _ => {}
            }
        }
    }

    pub fn forward(&self, x1: f64, x2: f64) -> Forward {
        let mu1: Vec<f64> = self.premises[0].iter().map(|mf| mf.degree(x1)).collect();
        let mu2: Vec<f64> = self.premises[1].iter().map(|mf| mf.degree(x2)).collect();
        let strengths: Vec<f64> = mu1
            .iter()
            .flat_map(|&a| mu2.iter().map(move |&b| a * b))
            .collect();
        let total: f64 = strengths.iter().sum();
        if total <= 0.0 || !total.is_finite() {
            return Forward {
                output: 0.0,
                normalized: vec![0.0; strengths.len()],
                strengths,
                all_rules_silent: true,
            };
        }
        let normalized: Vec<f64> = strengths.iter().map(|w| w / total).collect();
        let output = normalized
            .iter()
            .zip(&self.consequents)
            .map(|(w, c)| w * c.eval(x1, x2))
            .sum();
        Forward {
            output,
            strengths,
            normalized,
            all_rules_silent: false,
        }
    }

    pub fn output(&self, x1: f64, x2: f64) -> f64 {
        self.forward(x1, x2).output
    }
}

/// Evenly spaced premise terms on both inputs, crossing at membership 0.5,
/// with all consequents zero.
pub fn grid_partition(
    n_mfs: usize,
    shape: PremiseShape,
    domain: [f64; 2],
) -> Result<SugenoFis, AnfisError> {
    if n_mfs < 2 {
        return Err(AnfisError::InvalidParameters(format!(
            "grid partition needs at least 2 terms per input, got {n_mfs}"
        )));
    }
    let [lo, hi] = domain;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(AnfisError::InvalidParameters(format!(
            "empty domain [{lo}, {hi}]"
        )));
    }
    let spacing = (hi - lo) / (n_mfs - 1) as f64;
    let half = spacing / 2.0;
    let terms: Vec<MembershipFunction> = (0..n_mfs)
        .map(|i| {
            let center = if i == n_mfs - 1 {
                hi
            } else {
                lo + spacing * i as f64
            };
            match shape {
                PremiseShape::Gbell => MembershipFunction::GeneralizedBell {
                    a: half,
                    b: 2.0,
                    c: center,
                },
                PremiseShape::Gaussian => MembershipFunction::Gaussian {
                    mean: center,
                    sigma: half / (2.0 * std::f64::consts::LN_2).sqrt(),
                },
            }
        })
        .collect();
    SugenoFis::new(
        shape,
        domain,
        [terms.clone(), terms],
        vec![Consequent::default(); n_mfs * n_mfs],
    )
}

/// Rows of `(x1, x2, target)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    rows: Vec<[f64; 3]>,
}

impl TrainingSet {
    pub fn new(rows: Vec<[f64; 3]>) -> Result<Self, AnfisError> {
        if rows.is_empty() {
            return Err(AnfisError::EmptyTrainingSet);
        }
        if let Some(i) = rows.iter().position(|r| r.iter().any(|v| !v.is_finite())) {
            return Err(AnfisError::NonFiniteData(i));
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[[f64; 3]] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainingTarget {
    Identity,
    Mean,
    Max,
}

impl std::str::FromStr for TrainingTarget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "identity" => Ok(Self::Identity),
            "mean" => Ok(Self::Mean),
            "max" => Ok(Self::Max),
            other => Err(format!("unknown training target `{other}`")),
        }
    }
}

/// Gray levels 0, 16, ..., 240, 255.
fn coarse_levels() -> Vec<f64> {
    (0..16).map(|k| f64::from(k * 16)).chain([255.0]).collect()
}

pub fn default_training_data(target: TrainingTarget) -> TrainingSet {
    let rows = match target {
        TrainingTarget::Identity => (0..256)
            .map(|k| {
                let k = f64::from(k);
                [k, k, k]
            })
            .collect(),
        TrainingTarget::Mean | TrainingTarget::Max => {
            let levels = coarse_levels();
            let mut rows = Vec::with_capacity(levels.len() * levels.len());
            for &i in &levels {
                for &j in &levels {
                    let z = match target {
                        TrainingTarget::Mean => 0.5 * (i + j),
                        _ => i.max(j),
                    };
                    rows.push([i, j, z]);
                }
            }
            rows
        }
    };
    TrainingSet { rows }
}

fn sse(model: &SugenoFis, data: &TrainingSet) -> f64 {
    data.rows
        .iter()
        .map(|&[x1, x2, t]| {
            let e = t - model.output(x1, x2);
            e * e
        })
        .sum()
}

pub fn rmse(model: &SugenoFis, data: &TrainingSet) -> f64 {
    (sse(model, data) / data.len() as f64).sqrt()
}

/// Least-squares consequents for frozen premises, solved through the
/// ridge-damped normal equations. Inputs are scaled by the domain width
/// inside the solve to keep the system well conditioned.
pub fn lse_consequents(
    model: &SugenoFis,
    data: &TrainingSet,
    ridge: f64,
) -> Result<Vec<Consequent>, AnfisError> {
    if data.is_empty() {
        return Err(AnfisError::EmptyTrainingSet);
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(AnfisError::InvalidParameters(format!("ridge {ridge}")));
    }
    let scale = model.domain[1] - model.domain[0];
    let n = 3 * model.rule_count();
    let mut ata = vec![0.0; n * n];
    let mut aty = vec![0.0; n];
    let mut row = vec![0.0; n];
    for &[x1, x2, t] in &data.rows {
        let fwd = model.forward(x1, x2);
        for (k, w) in fwd.normalized.iter().enumerate() {
            row[3 * k] = w * x1 / scale;
            row[3 * k + 1] = w * x2 / scale;
            row[3 * k + 2] = *w;
        }
        for i in 0..n {
            let ri = row[i];
            if ri == 0.0 {
                continue;
            }
            aty[i] += ri * t;
            for j in 0..=i {
                ata[i * n + j] += ri * row[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            ata[j * n + i] = ata[i * n + j];
        }
        ata[i * n + i] += ridge;
    }
    let theta = solve_spd(ata, aty, n).ok_or(AnfisError::SingularSystem)?;
    Ok(theta
        .chunks_exact(3)
        .map(|c| Consequent {
            p: c[0] / scale,
            q: c[1] / scale,
            r: c[2],
        })
        .collect())
}

/// Cholesky solve of a symmetric positive definite system stored row-major.
fn solve_spd(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    let max_diag = (0..n).map(|i| a[i * n + i]).fold(0.0, f64::max);
    let tol = max_diag * f64::EPSILON * n as f64;
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if d.is_nan() || d <= tol {
            return None;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * n + k] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= a[k * n + i] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    Some(b)
}

/// Degree and its partial derivatives with respect to the term parameters,
/// in [`SugenoFis::premise_params`] order.
fn degree_with_grad(mf: &MembershipFunction, x: f64) -> (f64, [f64; 3]) {
    match *mf {
        MembershipFunction::GeneralizedBell { a, b, c } => {
            let u = (x - c) / a;
            let au = u.abs();
            let t = au.powf(2.0 * b);
            let mu = 1.0 / (1.0 + t);
            let dmu_dt = -mu * mu;
            let (dt_db, dt_dc) = if au > 0.0 {
                (2.0 * t * au.ln(), -2.0 * b * t / (u * a))
            } else {
                (0.0, 0.0)
            };
            let dt_da = -2.0 * b * t / a;
            (mu, [dmu_dt * dt_da, dmu_dt * dt_db, dmu_dt * dt_dc])
        }
        MembershipFunction::Gaussian { mean, sigma } => {
            let d = x - mean;
            let mu = (-0.5 * d * d / (sigma * sigma)).exp();
            let s2 = sigma * sigma;
            (mu, [mu * d / s2, mu * d * d / (s2 * sigma), 0.0])
        }
        _ => unreachable!("validated premise shape"),
    }
}

/// Sum of squared errors and its analytic gradient with respect to the
/// premise parameters, consequents held fixed.
#[allow(clippy::needless_range_loop)]
pub fn sse_gradient(model: &SugenoFis, data: &TrainingSet) -> (f64, Vec<f64>) {
    let per = model.shape.params_per_term();
    let n1 = model.premises[0].len();
    let n2 = model.premises[1].len();
    let mut grad = vec![0.0; model.premise_param_count()];
    let mut total_sse = 0.0;
    let mut g1 = vec![[0.0; 3]; n1];
    let mut g2 = vec![[0.0; 3]; n2];
    let mut mu1 = vec![0.0; n1];
    let mut mu2 = vec![0.0; n2];

    for &[x1, x2, t] in &data.rows {
        for (i, mf) in model.premises[0].iter().enumerate() {
            (mu1[i], g1[i]) = degree_with_grad(mf, x1);
        }
        for (j, mf) in model.premises[1].iter().enumerate() {
            (mu2[j], g2[j]) = degree_with_grad(mf, x2);
        }
        let mut total = 0.0;
        let mut weighted = 0.0;
        for i in 0..n1 {
            for j in 0..n2 {
                let w = mu1[i] * mu2[j];
                total += w;
                weighted += w * model.consequents[i * n2 + j].eval(x1, x2);
            }
        }
        if total <= 0.0 || !total.is_finite() {
            total_sse += t * t;
            continue;
        }
        let out = weighted / total;
        let err = t - out;
        total_sse += err * err;
        // dE/dout = -2 err; dout/dw_k = (f_k - out) / total
        let scale = -2.0 * err / total;
        for i in 0..n1 {
            let mut s = 0.0;
            for j in 0..n2 {
                s += (model.consequents[i * n2 + j].eval(x1, x2) - out) * mu2[j];
            }
            for (p, g) in g1[i].iter().take(per).enumerate() {
                grad[i * per + p] += scale * s * g;
            }
        }
        let off = n1 * per;
        for j in 0..n2 {
            let mut s = 0.0;
            for i in 0..n1 {
                s += (model.consequents[i * n2 + j].eval(x1, x2) - out) * mu1[i];
            }
            for (p, g) in g2[j].iter().take(per).enumerate() {
                grad[off + j * per + p] += scale * s * g;
            }
        }
    }
    (total_sse, grad)
}

/// One batch descent step on the premises: `p -= step_size * grad / rows`,
/// so the step size does not depend on the training set size. Widths are
/// clamped to at least [`MIN_WIDTH`] afterwards.
pub fn premise_gradient_step(
    model: &SugenoFis,
    data: &TrainingSet,
    step_size: f64,
) -> Result<SugenoFis, AnfisError> {
    if data.is_empty() {
        return Err(AnfisError::EmptyTrainingSet);
    }
    if !(step_size >= 0.0 && step_size.is_finite()) {
        return Err(AnfisError::InvalidParameters(format!(
            "step size {step_size}"
        )));
    }
    let mut next = model.clone();
    if step_size == 0.0 {
        return Ok(next);
    }
    let (_, grad) = sse_gradient(model, data);
    if grad.iter().any(|g| !g.is_finite()) {
        return Ok(next);
    }
    let scale = step_size / data.len() as f64;
    let params: Vec<f64> = model
        .premise_params()
        .iter()
        .zip(&grad)
        .map(|(p, g)| p - scale * g)
        .collect();
    next.set_premise_params(&params)?;
    next.clamp_widths();
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub epochs: usize,
    pub step_size: f64,
    pub ridge: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 50,
            step_size: 0.01,
            ridge: DEFAULT_RIDGE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub epochs_run: usize,
    pub rmse_history: Vec<f64>,
    /// RMSE of the returned model; NaN when no epoch ran.
    pub final_rmse: f64,
    pub final_step_size: f64,
}

/// Hybrid training. Each epoch refits the consequents by least squares, takes
/// one premise gradient step, and records the RMSE of the updated model.
/// The step size shrinks by 0.9 after an epoch whose RMSE went up and grows
/// by 1.1 after two consecutive decreases.
pub fn train_hybrid(
    model: &SugenoFis,
    data: &TrainingSet,
    opts: TrainOptions,
) -> Result<(SugenoFis, TrainingReport), AnfisError> {
    if data.is_empty() {
        return Err(AnfisError::EmptyTrainingSet);
    }
    if !(opts.step_size >= 0.0 && opts.step_size.is_finite()) {
        return Err(AnfisError::InvalidParameters(format!(
            "step size {}",
            opts.step_size
        )));
    }
    let mut current = model.clone();
    let mut step = opts.step_size;
    let mut history = Vec::with_capacity(opts.epochs);
    let mut decreases = 0;
    for epoch in 0..opts.epochs {
        let consequents = lse_consequents(&current, data, opts.ridge)?;
        current.set_consequents(consequents)?;
        current = premise_gradient_step(&current, data, step)?;
        let err = rmse(&current, data);
        if let Some(&prev) = history.last() {
            if err > prev {
                step *= 0.9;
                decreases = 0;
            } else if err < prev {
                decreases += 1;
                if decreases == 2 {
                    step *= 1.1;
                    decreases = 0;
                }
            }
        }
        log::debug!("epoch {epoch}: rmse {err:.6} step {step:.6}");
        history.push(err);
    }
    let report = TrainingReport {
        epochs_run: opts.epochs,
        final_rmse: history.last().copied().unwrap_or(f64::NAN),
        rmse_history: history,
        final_step_size: step,
    };
    Ok((current, report))
}

/// Elementwise forward pass; outputs are not clamped.
pub fn predict(model: &SugenoFis, pairs: &[(f64, f64)]) -> Vec<f64> {
    pairs
        .par_iter()
        .map(|&(x1, x2)| model.output(x1, x2))
        .collect()
}

/// Hyperparameters for the neuro-fuzzy pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnfisHyper {
    #[serde(default = "default_mfs")]
    pub mfs: usize,
    #[serde(default = "default_shape")]
    pub shape: PremiseShape,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_step")]
    pub step_size: f64,
    #[serde(default = "default_target")]
    pub target: TrainingTarget,
    #[serde(default = "default_ridge")]
    pub ridge: f64,
}

fn default_mfs() -> usize {
    3
}
fn default_shape() -> PremiseShape {
    PremiseShape::Gbell
}
fn default_epochs() -> usize {
    50
}
fn default_step() -> f64 {
    0.01
}
fn default_target() -> TrainingTarget {
    TrainingTarget::Identity
}
fn default_ridge() -> f64 {
    DEFAULT_RIDGE
}

impl Default for AnfisHyper {
    fn default() -> Self {
        Self {
            mfs: default_mfs(),
            shape: default_shape(),
            epochs: default_epochs(),
            step_size: default_step(),
            target: default_target(),
            ridge: default_ridge(),
        }
    }
}

impl AnfisHyper {
    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            epochs: self.epochs,
            step_size: self.step_size,
            ridge: self.ridge,
        }
    }

    /// Grid-partitions a fresh model and trains it on the preset data.
    pub fn train(&self) -> Result<(SugenoFis, TrainingReport), AnfisError> {
        let model = grid_partition(self.mfs, self.shape, GRAY_DOMAIN)?;
        let data = default_training_data(self.target);
        train_hybrid(&model, &data, self.train_options())
    }
}

pub const MODEL_FORMAT: &str = "fusecraft-anfis-model";

/// A trained model with the settings that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub format: String,
    pub version: u32,
    pub hyper: Option<AnfisHyper>,
    pub model: SugenoFis,
    pub training: Option<TrainingReport>,
}

impl ModelDocument {
    pub fn new(
        model: SugenoFis,
        hyper: Option<AnfisHyper>,
        training: Option<TrainingReport>,
    ) -> Self {
        Self {
            format: MODEL_FORMAT.to_string(),
            version: 1,
            hyper,
            model,
            training,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let doc: Self = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if doc.format != MODEL_FORMAT {
            return Err(format!("unexpected format tag `{}`", doc.format));
        }
        doc.model.validate().map_err(|e| e.to_string())?;
        Ok(doc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn consts(model: &SugenoFis, c: Consequent) -> SugenoFis {
        let mut m = model.clone();
        m.set_consequents(vec![c; m.rule_count()]).unwrap();
        m
    }

    #[test]
    fn grid_partition_layout() {
        let m = grid_partition(3, PremiseShape::Gbell, GRAY_DOMAIN).unwrap();
        assert_eq!(m.rule_count(), 9);
        let m2 = grid_partition(2, PremiseShape::Gbell, GRAY_DOMAIN).unwrap();
        let centers: Vec<f64> = m2.premises()[0]
            .iter()
            .map(|mf| match mf {
                MembershipFunction::GeneralizedBell { c, .. } => *c,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(centers, vec![0.0, 255.0]);
        assert!(m2.consequents().iter().all(|c| *c == Consequent::default()));
        assert_eq!(m2.output(12.0, 200.0), 0.0);
        assert!(matches!(
            grid_partition(1, PremiseShape::Gbell, GRAY_DOMAIN),
            Err(AnfisError::InvalidParameters(_))
        ));
    }

    #[test]
    fn adjacent_terms_cross_at_half() {
        for shape in [PremiseShape::Gbell, PremiseShape::Gaussian] {
            let m = grid_partition(3, shape, GRAY_DOMAIN).unwrap();
            let t = &m.premises()[0];
            for (l, r) in [(0, 1), (1, 2)] {
                let mid = 63.75 + 127.5 * l as f64;
                assert!((t[l].degree(mid) - 0.5).abs() < 1e-12);
                assert!((t[r].degree(mid) - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_rule_constant_output() {
        let bell = MembershipFunction::GeneralizedBell {
            a: 50.0,
            b: 2.0,
            c: 100.0,
        };
        let m = SugenoFis::new(
            PremiseShape::Gbell,
            GRAY_DOMAIN,
            [vec![bell], vec![bell]],
            vec![Consequent {
                p: 0.0,
                q: 0.0,
                r: 42.0,
            }],
        )
        .unwrap();
        for (x1, x2) in [(0.0, 0.0), (100.0, 3.0), (255.0, 255.0)] {
            assert!((m.output(x1, x2) - 42.0).abs() < 1e-12);
        }
    }

    #[test]
    fn averaging_consequents_give_the_mean() {
        let m = grid_partition(3, PremiseShape::Gaussian, GRAY_DOMAIN).unwrap();
        let m = consts(
            &m,
            Consequent {
                p: 0.5,
                q: 0.5,
                r: 0.0,
            },
        );
        for (x1, x2) in [(0.0, 255.0), (10.0, 20.0), (200.0, 77.0)] {
            assert!((m.output(x1, x2) - 0.5 * (x1 + x2)).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_premises_normalize_evenly() {
        let m = grid_partition(2, PremiseShape::Gbell, GRAY_DOMAIN).unwrap();
        let fwd = m.forward(127.5, 127.5);
        for w in fwd.normalized {
            assert!((w - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn silent_rules_flagged() {
        let narrow = MembershipFunction::Gaussian {
            mean: 0.0,
            sigma: 1e-3,
        };
        let m = SugenoFis::new(
            PremiseShape::Gaussian,
            GRAY_DOMAIN,
            [vec![narrow], vec![narrow]],
            vec![Consequent {
                p: 0.0,
                q: 0.0,
                r: 9.0,
            }],
        )
        .unwrap();
        let fwd = m.forward(200.0, 200.0);
        assert!(fwd.all_rules_silent);
        assert_eq!(fwd.output, 0.0);
    }

    #[test]
    fn lse_recovers_known_consequents() {
        let mut m = grid_partition(2, PremiseShape::Gbell, GRAY_DOMAIN).unwrap();
        let truth = vec![
            Consequent {
                p: 0.3,
                q: 0.1,
                r: 5.0,
            },
            Consequent {
                p: -0.2,
                q: 0.9,
                r: 1.0,
            },
            Consequent {
                p: 1.1,
                q: 0.0,
                r: -3.0,
            },
            Consequent {
                p: 0.25,
                q: 0.5,
                r: 12.0,
            },
        ];
        m.set_consequents(truth.clone()).unwrap();
        let rows = (0..15)
            .flat_map(|i| (0..15).map(move |j| (f64::from(i) * 17.0, f64::from(j) * 17.0)))
            .map(|(a, b)| [a, b, m.output(a, b)])
            .collect();
        let data = TrainingSet::new(rows).unwrap();
        let fitted = lse_consequents(&m, &data, 0.0).unwrap();
        for (f, t) in fitted.iter().zip(&truth) {
            assert!((f.p - t.p).abs() < 1e-8, "{f:?} vs {t:?}");
            assert!((f.q - t.q).abs() < 1e-8, "{f:?} vs {t:?}");
            assert!((f.r - t.r).abs() < 1e-6, "{f:?} vs {t:?}");
        }
        // the default damping only perturbs the fit slightly
        let damped = lse_consequents(&m, &data, DEFAULT_RIDGE).unwrap();
        for (f, t) in damped.iter().zip(&truth) {
            assert!((f.r - t.r).abs() < 1e-4, "{f:?} vs {t:?}");
        }
    }

    #[test]
    fn lse_single_rule_degenerate_data() {
        let bell = MembershipFunction::GeneralizedBell {
            a: 50.0,
            b: 2.0,
            c: 0.0,
        };
        let m = SugenoFis::new(
            PremiseShape::Gbell,
            GRAY_DOMAIN,
            [vec![bell], vec![bell]],
            vec![Consequent::default()],
        )
        .unwrap();
        let data = TrainingSet::new(vec![[0.0, 0.0, 10.0], [0.0, 0.0, 10.0]]).unwrap();
        let c = lse_consequents(&m, &data, DEFAULT_RIDGE).unwrap()[0];
        assert!((c.r - 10.0).abs() < 1e-6);
        assert_eq!((c.p, c.q), (0.0, 0.0));
        assert_eq!(
            lse_consequents(&m, &data, 0.0),
            Err(AnfisError::SingularSystem)
        );
    }

    #[test]
    fn empty_training_set_rejected() {
        assert_eq!(TrainingSet::new(vec![]), Err(AnfisError::EmptyTrainingSet));
        assert_eq!(
            TrainingSet::new(vec![[0.0, f64::NAN, 1.0]]),
            Err(AnfisError::NonFiniteData(0))
        );
    }

    #[test]
    fn lse_is_locally_optimal() {
        let m = grid_partition(3, PremiseShape::Gbell, GRAY_DOMAIN).unwrap();
        let data = default_training_data(TrainingTarget::Max);
        let fitted = lse_consequents(&m, &data, DEFAULT_RIDGE).unwrap();
        let mut best = m.clone();
        best.set_consequents(fitted.clone()).unwrap();
        let base = sse(&best, &data);
        for k in 0..fitted.len() {
            for field in 0..3 {
                for delta in [-1e-3, 1e-3] {
                    let mut c = fitted.clone();
                    match field {
                        0 => c[k].p += delta,
                        1 => c[k].q += delta,
                        _ => c[k].r += delta,
                    }
                    let mut probe = m.clone();
                    probe.set_consequents(c).unwrap();
                    assert!(sse(&probe, &data) >= base * (1.0 - 1e-12));
                }
            }
        }
    }

    #[test]
    fn zero_step_is_identity() {
        let m = grid_partition(3, PremiseShape::Gbell, GRAY_DOMAIN).unwrap();
        let data = default_training_data(TrainingTarget::Mean);
        assert_eq!(premise_gradient_step(&m, &data, 0.0).unwrap(), m);
        assert!(premise_gradient_step(&m, &data, -1.0).is_err());
    }

    #[test]
    fn gradient_vanishes_at_perfect_fit() {
        let m = grid_partition(2, PremiseShape::Gbell, GRAY_DOMAIN).unwrap();
        let m = consts(
            &m,
            Consequent {
                p: 0.2,
                q: 0.7,
                r: 3.0,
            },
        );
        let rows = [(10.0, 50.0), (100.0, 200.0), (250.0, 3.0)]
            .iter()
            .map(|&(a, b)| [a, b, m.output(a, b)])
            .collect();
        let (e, g) = sse_gradient(&m, &TrainingSet::new(rows).unwrap());
        assert!(e < 1e-20, "{e}");
        assert!(g.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn epochs_zero_is_a_no_op() {
        let m = grid_partition(3, PremiseShape::Gbell, GRAY_DOMAIN).unwrap();
        let data = default_training_data(TrainingTarget::Identity);
        let opts = TrainOptions {
            epochs: 0,
            ..Default::default()
        };
        let (out, report) = train_hybrid(&m, &data, opts).unwrap();
        assert_eq!(out, m);
        assert!(report.rmse_history.is_empty());
        assert_eq!(report.epochs_run, 0);
    }

    #[test]
    fn identity_training_and_prediction() {
        let hyper = AnfisHyper::default();
        let (model, report) = hyper.train().unwrap();
        assert_eq!(report.rmse_history.len(), 50);
        assert!(report.final_rmse < 1.0, "{}", report.final_rmse);
        assert!(report.final_rmse <= report.rmse_history[0]);
        assert!((model.output(100.0, 100.0) - 100.0).abs() < 1.0);
        assert!(predict(&model, &[]).is_empty());
        let pairs = [(3.0, 9.0), (100.0, 100.0), (255.0, 0.0)];
        let batch = predict(&model, &pairs);
        for (&(a, b), y) in pairs.iter().zip(batch) {
            assert_eq!(y, model.output(a, b));
        }
    }

    #[test]
    fn mean_target_two_mfs() {
        let m = grid_partition(2, PremiseShape::Gbell, GRAY_DOMAIN).unwrap();
        let data = default_training_data(TrainingTarget::Mean);
        let (_, report) = train_hybrid(&m, &data, TrainOptions::default()).unwrap();
        assert!(report.final_rmse < 0.5, "{}", report.final_rmse);
    }

    #[test]
    fn training_data_presets() {
        let id = default_training_data(TrainingTarget::Identity);
        assert_eq!(id.len(), 256);
        assert_eq!(id.rows()[10], [10.0, 10.0, 10.0]);
        let max = default_training_data(TrainingTarget::Max);
        assert_eq!(max.len(), 17 * 17);
        assert!(max.rows().contains(&[0.0, 255.0, 255.0]));
        let mean = default_training_data(TrainingTarget::Mean);
        assert!(mean.rows().contains(&[16.0, 255.0, 135.5]));
    }

    #[test]
    fn training_is_deterministic() {
        let hyper = AnfisHyper {
            epochs: 10,
            target: TrainingTarget::Max,
            ..Default::default()
        };
        let (a, ra) = hyper.train().unwrap();
        let (b, rb) = hyper.train().unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
    }

    #[test]
    fn model_document_round_trip() {
        let hyper = AnfisHyper {
            epochs: 3,
            ..Default::default()
        };
        let (model, report) = hyper.train().unwrap();
        let doc = ModelDocument::new(model, Some(hyper), Some(report));
        let back = ModelDocument::from_json(&doc.to_json()).unwrap();
        assert_eq!(back, doc);
        assert!(ModelDocument::from_json("{}").is_err());
    }

    proptest! {
        #[test]
        fn normalized_weights_sum_to_one(
            n in 2usize..5,
            gauss in any::<bool>(),
            x1 in 0.0f64..255.0,
            x2 in 0.0f64..255.0,
        ) {
            let shape = if gauss { PremiseShape::Gaussian } else { PremiseShape::Gbell };
            let m = grid_partition(n, shape, GRAY_DOMAIN).unwrap();
            let fwd = m.forward(x1, x2);
            prop_assert!(!fwd.all_rules_silent);
            let s: f64 = fwd.normalized.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
