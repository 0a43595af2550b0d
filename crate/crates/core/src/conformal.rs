//! Split conformal prediction: binary prediction sets, locally weighted
//! conformal prediction (LWCP) intervals, conformalized quantile regression
//! (CQR), and coverage audits.
//!
//! Calibration takes the `ceil((1 - alpha) * (n + 1))`-th order statistic of
//! the non-conformity scores; when that index exceeds `n` the quantile is
//! the `+inf` sentinel and prediction sets/intervals become maximal. The
//! classification score is `1 - p_hat(true class)`. LWCP intervals are
//! `mu(x) +/- rho(x) * d_alpha` with the dispersion prediction floored at
//! [`RHO_FLOOR`]; CQR intervals may cross, and crossing is reported rather
//! than repaired.

use serde::Serialize;
use thiserror::Error;

use crate::gbt::{fit_regression, GbtModel, Hyperparams, Loss};
use crate::parallel::maybe_par_map;
use crate::tabular::{FeatureSchema, Instance, LabeledDataset};

/// Lower clamp on dispersion predictions, keeping weighted residuals finite
/// on regions where the dispersion model fits its targets exactly.
pub const RHO_FLOOR: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ConformalError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Gbt(#[from] crate::gbt::GbtError),

    #[error(transparent)]
    Tabular(#[from] crate::tabular::TabularError),
}

pub type Result<T> = std::result::Result<T, ConformalError>;

/// Sorted (ascending) non-conformity scores from a calibration split.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationScores {
    scores: Vec<f64>,
}

impl CalibrationScores {
    pub fn new(mut scores: Vec<f64>) -> Result<Self> {
        if scores.is_empty() {
            return Err(ConformalError::InvalidArgument("empty calibration scores".into()));
        }
        if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
            return Err(ConformalError::InvalidArgument(format!(
                "non-finite calibration score {bad}"
            )));
        }
        scores.sort_unstable_by(f64::total_cmp);
        Ok(CalibrationScores { scores })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// `ceil((1 - alpha) * (n + 1))`, guarded against the product landing a
/// hair above an exact integer in floating point.
fn quantile_index(alpha: f64, n: usize) -> usize {
    let x = (1.0 - alpha) * (n as f64 + 1.0);
    let rounded = x.round();
    let ix = if (x - rounded).abs() < 1e-9 { rounded } else { x.ceil() };
    ix as usize
}

/// The calibrated score quantile: the `ceil((1-alpha)(n+1))`-th order
/// statistic, or `+inf` when the index exceeds `n`.
pub fn calibrate_quantile(scores: &CalibrationScores, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ConformalError::InvalidArgument(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let n = scores.len();
    let ix = quantile_index(alpha, n);
    if ix > n {
        Ok(f64::INFINITY)
    } else {
        Ok(scores.scores[ix - 1])
    }
}

/// A binary prediction set: a subset of {0, 1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PredictionSet {
    pub contains_zero: bool,
    pub contains_one: bool,
}

impl PredictionSet {
    pub fn size(&self) -> usize {
        self.contains_zero as usize + self.contains_one as usize
    }

    pub fn contains(&self, label: u8) -> bool {
        match label {
            0 => self.contains_zero,
            _ => self.contains_one,
        }
    }
}

/// Non-conformity scores `1 - p_hat(Y_i | X_i)` for a calibration split:
/// `1 - p` for label 1 and `p` for label 0.
pub fn classification_scores(model: &GbtModel, calib: &LabeledDataset) -> Result<CalibrationScores> {
    if calib.is_empty() {
        return Err(ConformalError::InvalidArgument("empty calibration set".into()));
    }
    let probs: Vec<f64> = model.predict_rows(&calib.to_numeric_rows()?);
    let scores: Vec<f64> = probs
        .iter()
        .zip(calib.labels())
        .map(|(&p, &y)| if y == 1 { 1.0 - p } else { p })
        .collect();
    CalibrationScores::new(scores)
}

/// A calibrated conformal classifier producing prediction sets.
#[derive(Debug, Clone)]
pub struct ClassificationConformal {
    model: GbtModel,
    qhat: f64,
    alpha: f64,
}

impl ClassificationConformal {
    /// Calibrates on held-out labeled rows.
    pub fn calibrate(model: GbtModel, calib: &LabeledDataset, alpha: f64) -> Result<Self> {
        let scores = classification_scores(&model, calib)?;
        let qhat = calibrate_quantile(&scores, alpha)?;
        Ok(ClassificationConformal { model, qhat, alpha })
    }

    /// Assembles a calibrated classifier from a known quantile.
    pub fn from_parts(model: GbtModel, qhat: f64, alpha: f64) -> Self {
        ClassificationConformal { model, qhat, alpha }
    }

    pub fn qhat(&self) -> f64 {
        self.qhat
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `{y : S(x, y) <= qhat}`.
    pub fn prediction_set(&self, x: &Instance) -> Result<PredictionSet> {
        let p = self.model.predict_proba(x)?;
        Ok(PredictionSet {
            contains_zero: p <= self.qhat,
            contains_one: (1.0 - p) <= self.qhat,
        })
    }

    pub fn prediction_set_row(&self, row: &[f64]) -> PredictionSet {
        let p = self.model.predict_row(row);
        PredictionSet {
            contains_zero: p <= self.qhat,
            contains_one: (1.0 - p) <= self.qhat,
        }
    }
}

/// A prediction interval. For LWCP `crossed` is always false and the width
/// non-negative; CQR preserves negative widths and flags them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PredictionInterval {
    pub lo: f64,
    pub hi: f64,
    pub width: f64,
    pub crossed: bool,
}

impl PredictionInterval {
    /// Closed-endpoint membership; a crossed interval covers nothing.
    pub fn covers(&self, y: f64) -> bool {
        self.lo <= y && y <= self.hi
    }
}

/// Calibrated LWCP state: mean model, dispersion model, and the calibrated
/// weighted-residual quantile.
#[derive(Debug, Clone)]
pub struct IntervalModel {
    mu: GbtModel,
    rho: GbtModel,
    d_alpha: f64,
    alpha: f64,
}

impl IntervalModel {
    pub fn from_parts(mu: GbtModel, rho: GbtModel, d_alpha: f64, alpha: f64) -> Result<Self> {
        if !(d_alpha >= 0.0) {
            return Err(ConformalError::InvalidArgument(format!(
                "d_alpha must be >= 0, got {d_alpha}"
            )));
        }
        Ok(IntervalModel { mu, rho, d_alpha, alpha })
    }

    pub fn mu(&self) -> &GbtModel {
        &self.mu
    }

    pub fn rho(&self) -> &GbtModel {
        &self.rho
    }

    pub fn d_alpha(&self) -> f64 {
        self.d_alpha
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `[mu(x) - rho(x) d_alpha, mu(x) + rho(x) d_alpha]` on a dense row.
    pub fn interval_row(&self, row: &[f64]) -> PredictionInterval {
        let center = self.mu.predict_row(row);
        let spread = self.rho.predict_row(row).max(RHO_FLOOR) * self.d_alpha;
        PredictionInterval {
            lo: center - spread,
            hi: center + spread,
            width: 2.0 * spread,
            crossed: false,
        }
    }

    /// Checked instance variant of [`IntervalModel::interval_row`].
    pub fn interval(&self, x: &Instance) -> Result<PredictionInterval> {
        let row = x.as_numeric_row().ok_or_else(|| {
            ConformalError::InvalidArgument("interval queries take continuous rows".into())
        })?;
        if row.len() != self.mu.n_features() {
            return Err(ConformalError::InvalidArgument(format!(
                "instance has {} features, model expects {}",
                row.len(),
                self.mu.n_features()
            )));
        }
        Ok(self.interval_row(&row))
    }
}

/// Fits LWCP: trains the dispersion model on the absolute residuals of `mu`
/// over one row set, then calibrates `d_alpha` from weighted residuals on a
/// disjoint calibration set.
#[allow(clippy::too_many_arguments)]
pub fn fit_lwcp(
    mu: GbtModel,
    schema: &FeatureSchema,
    rho_instances: &[Instance],
    rho_targets: &[f64],
    calib_instances: &[Instance],
    calib_targets: &[f64],
    alpha: f64,
    hp: &Hyperparams,
    seed: u64,
) -> Result<IntervalModel> {
    if calib_instances.is_empty() {
        return Err(ConformalError::InvalidArgument("empty calibration set".into()));
    }
    if rho_instances.len() != rho_targets.len() || calib_instances.len() != calib_targets.len() {
        return Err(ConformalError::InvalidArgument(
            "instance/target length mismatch".into(),
        ));
    }
    let abs_residuals: Vec<f64> = rho_instances
        .iter()
        .zip(rho_targets)
        .map(|(inst, &y)| Ok((y - mu.predict(inst)?).abs()))
        .collect::<Result<_>>()?;
    let rho = fit_regression(schema, rho_instances, &abs_residuals, Loss::Squared, hp, seed)?;

    let weighted: Vec<f64> = calib_instances
        .iter()
        .zip(calib_targets)
        .map(|(inst, &y)| {
            let err = (y - mu.predict(inst)?).abs();
            Ok(err / rho.predict(inst)?.max(RHO_FLOOR))
        })
        .collect::<Result<_>>()?;
    let d_alpha = calibrate_quantile(&CalibrationScores::new(weighted)?, alpha)?;
    IntervalModel::from_parts(mu, rho, d_alpha, alpha)
}

/// Calibrated CQR state: lower/upper quantile models plus the conformal
/// correction.
#[derive(Debug, Clone)]
pub struct CqrModel {
    q_lo: GbtModel,
    q_hi: GbtModel,
    correction: f64,
    alpha: f64,
}

impl CqrModel {
    pub fn from_parts(q_lo: GbtModel, q_hi: GbtModel, correction: f64, alpha: f64) -> Self {
        CqrModel { q_lo, q_hi, correction, alpha }
    }

    pub fn correction(&self) -> f64 {
        self.correction
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `[q_lo(x) - correction, q_hi(x) + correction]`; a negative width is
    /// preserved and flagged as crossing.
    pub fn interval_row(&self, row: &[f64]) -> PredictionInterval {
        let lo = self.q_lo.predict_row(row) - self.correction;
        let hi = self.q_hi.predict_row(row) + self.correction;
        PredictionInterval { lo, hi, width: hi - lo, crossed: hi < lo }
    }

    pub fn interval(&self, x: &Instance) -> Result<PredictionInterval> {
        let row = x.as_numeric_row().ok_or_else(|| {
            ConformalError::InvalidArgument("interval queries take continuous rows".into())
        })?;
        Ok(self.interval_row(&row))
    }
}

/// Fits CQR: pinball models at `alpha/2` and `1 - alpha/2` on the fit
/// split, then calibrates the correction from conformity scores
/// `max(q_lo(x) - y, y - q_hi(x))` on the calibration split.
#[allow(clippy::too_many_arguments)]
pub fn fit_cqr(
    schema: &FeatureSchema,
    fit_instances: &[Instance],
    fit_targets: &[f64],
    calib_instances: &[Instance],
    calib_targets: &[f64],
    alpha: f64,
    hp: &Hyperparams,
    seed: u64,
) -> Result<CqrModel> {
    if fit_instances.is_empty() || calib_instances.is_empty() {
        return Err(ConformalError::InvalidArgument("empty split".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ConformalError::InvalidArgument(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let q_lo = fit_regression(
        schema,
        fit_instances,
        fit_targets,
        Loss::Pinball { tau: alpha / 2.0 },
        hp,
        crate::rng::derive_seed(seed, "cqr-lo", &[]),
    )?;
    let q_hi = fit_regression(
        schema,
        fit_instances,
        fit_targets,
        Loss::Pinball { tau: 1.0 - alpha / 2.0 },
        hp,
        crate::rng::derive_seed(seed, "cqr-hi", &[]),
    )?;
    let conformity: Vec<f64> = calib_instances
        .iter()
        .zip(calib_targets)
        .map(|(inst, &y)| {
            let lo = q_lo.predict(inst)?;
            let hi = q_hi.predict(inst)?;
            Ok((lo - y).max(y - hi))
        })
        .collect::<Result<_>>()?;
    let correction = calibrate_quantile(&CalibrationScores::new(conformity)?, alpha)?;
    Ok(CqrModel { q_lo, q_hi, correction, alpha })
}

/// Fraction of truths inside their interval (closed endpoints).
pub fn interval_coverage(intervals: &[PredictionInterval], truths: &[f64]) -> Result<f64> {
    if intervals.len() != truths.len() {
        return Err(ConformalError::InvalidArgument(format!(
            "{} intervals but {} truths",
            intervals.len(),
            truths.len()
        )));
    }
    if intervals.is_empty() {
        return Err(ConformalError::InvalidArgument("empty inputs".into()));
    }
    let covered = intervals
        .iter()
        .zip(truths)
        .filter(|(iv, &y)| iv.covers(y))
        .count();
    Ok(covered as f64 / truths.len() as f64)
}

/// Fraction of truths inside their prediction set.
pub fn set_coverage(sets: &[PredictionSet], truths: &[u8]) -> Result<f64> {
    if sets.len() != truths.len() {
        return Err(ConformalError::InvalidArgument(format!(
            "{} sets but {} truths",
            sets.len(),
            truths.len()
        )));
    }
    if sets.is_empty() {
        return Err(ConformalError::InvalidArgument("empty inputs".into()));
    }
    let covered = sets.iter().zip(truths).filter(|(s, &y)| s.contains(y)).count();
    Ok(covered as f64 / truths.len() as f64)
}

/// Batch LWCP widths over dense rows; parallel when enabled.
pub fn interval_widths(model: &IntervalModel, rows: &[Vec<f64>]) -> Vec<f64> {
    maybe_par_map(rows, |row| model.interval_row(row).width)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbt::TreeNode;
    use crate::tabular::{FeatureSpec, FeatureValue};
    use rand::Rng as _;

    fn scores(values: &[f64]) -> CalibrationScores {
        CalibrationScores::new(values.to_vec()).unwrap()
    }

    fn unit_schema() -> FeatureSchema {
        FeatureSchema::new(vec![FeatureSpec::continuous("x", -5.0, 5.0)]).unwrap()
    }

    /// A logistic model that predicts the same probability everywhere.
    fn constant_proba_model(p: f64) -> GbtModel {
        let base = (p / (1.0 - p)).ln();
        GbtModel::from_parts(
            Loss::Logistic,
            1.0,
            base,
            vec![TreeNode::Leaf { value: 0.0 }],
            1,
            unit_schema().fingerprint(),
            vec![],
        )
        .unwrap()
    }

    /// A squared-loss model that predicts a constant.
    fn constant_regression_model(c: f64) -> GbtModel {
        GbtModel::from_parts(
            Loss::Squared,
            1.0,
            c,
            vec![TreeNode::Leaf { value: 0.0 }],
            1,
            unit_schema().fingerprint(),
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn quantile_worked_examples() {
        let s9 = scores(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        assert_eq!(calibrate_quantile(&s9, 0.1).unwrap(), 9.0);

        let s19: Vec<f64> = (1..=19).map(|i| i as f64).collect();
        assert_eq!(calibrate_quantile(&scores(&s19), 0.1).unwrap(), 18.0);

        let s4 = scores(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(calibrate_quantile(&s4, 0.1).unwrap(), f64::INFINITY);
    }

    #[test]
    fn quantile_matches_brute_force_scan() {
        // Oracle: smallest score q with #{S_i <= q} >= i, where i is
        // computed with exact integer arithmetic on rational alpha.
        let alphas = [(1u64, 20u64), (1, 10), (1, 5), (1, 2)];
        let mut rng = crate::rng::rng_from_seed(31);
        for n in 1..=50usize {
            let values: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let cal = scores(&values);
            for &(p, q) in &alphas {
                let alpha = p as f64 / q as f64;
                let ix = ((q - p) * (n as u64 + 1)).div_ceil(q) as usize;
                let want = if ix > n {
                    f64::INFINITY
                } else {
                    let mut sorted = values.clone();
                    sorted.sort_unstable_by(f64::total_cmp);
                    *sorted
                        .iter()
                        .find(|&&candidate| {
                            sorted.iter().filter(|&&s| s <= candidate).count() >= ix
                        })
                        .unwrap()
                };
                let got = calibrate_quantile(&cal, alpha).unwrap();
                assert_eq!(got, want, "n={n} alpha={alpha}");
            }
        }
    }

    #[test]
    fn quantile_monotone_in_alpha() {
        let s: Vec<f64> = (1..=37).map(|i| (i as f64).sqrt()).collect();
        let cal = scores(&s);
        let mut last = f64::INFINITY;
        for alpha in [0.05, 0.1, 0.2, 0.5] {
            let d = calibrate_quantile(&cal, alpha).unwrap();
            assert!(d <= last, "alpha {alpha}: {d} > {last}");
            last = d;
        }
    }

    #[test]
    fn empty_scores_rejected() {
        assert!(CalibrationScores::new(vec![]).is_err());
    }

    #[test]
    fn classification_score_definition() {
        let schema = unit_schema();
        let model = constant_proba_model(0.9);
        let x = Instance::new(&schema, vec![FeatureValue::Num(0.0)]).unwrap();
        let ds1 = LabeledDataset::new(schema.clone(), vec![x.clone()], vec![1]).unwrap();
        let ds0 = LabeledDataset::new(schema.clone(), vec![x], vec![0]).unwrap();
        let s1 = classification_scores(&model, &ds1).unwrap();
        let s0 = classification_scores(&model, &ds0).unwrap();
        assert!((s1.scores()[0] - 0.1).abs() < 1e-12);
        assert!((s0.scores()[0] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn perfect_classifier_scores_are_zero() {
        let schema = unit_schema();
        let x = Instance::new(&schema, vec![FeatureValue::Num(0.0)]).unwrap();
        // Saturated raw scores produce p of exactly 1.0/0.0 in floats.
        let confident_one = GbtModel::from_parts(
            Loss::Logistic,
            1.0,
            1000.0,
            vec![TreeNode::Leaf { value: 0.0 }],
            1,
            schema.fingerprint(),
            vec![],
        )
        .unwrap();
        let ds = LabeledDataset::new(schema, vec![x], vec![1]).unwrap();
        let scores = classification_scores(&confident_one, &ds).unwrap();
        assert_eq!(scores.scores(), &[0.0]);
    }

    #[test]
    fn prediction_set_examples() {
        let schema = unit_schema();
        let x = Instance::new(&schema, vec![FeatureValue::Num(0.0)]).unwrap();

        let cc = ClassificationConformal::from_parts(constant_proba_model(0.5), 0.6, 0.1);
        let set = cc.prediction_set(&x).unwrap();
        assert_eq!((set.contains_zero, set.contains_one), (true, true));

        let cc = ClassificationConformal::from_parts(constant_proba_model(0.3), f64::INFINITY, 0.1);
        assert_eq!(cc.prediction_set(&x).unwrap().size(), 2);

        let cc = ClassificationConformal::from_parts(constant_proba_model(0.99), 0.05, 0.1);
        let set = cc.prediction_set(&x).unwrap();
        assert_eq!((set.contains_zero, set.contains_one), (false, true));
    }

    #[test]
    fn lwcp_interval_worked_example() {
        let im = IntervalModel::from_parts(
            constant_regression_model(0.5),
            constant_regression_model(0.1),
            0.2,
            0.1,
        )
        .unwrap();
        let iv = im.interval_row(&[0.0]);
        assert!((iv.lo - 0.48).abs() < 1e-12);
        assert!((iv.hi - 0.52).abs() < 1e-12);
        assert!((iv.width - 0.04).abs() < 1e-12);
        assert!(!iv.crossed);
    }

    #[test]
    fn lwcp_zero_quantile_degenerates_to_points() {
        let im = IntervalModel::from_parts(
            constant_regression_model(0.7),
            constant_regression_model(0.3),
            0.0,
            0.1,
        )
        .unwrap();
        let iv = im.interval_row(&[0.0]);
        assert_eq!((iv.lo, iv.hi, iv.width), (0.7, 0.7, 0.0));
    }

    #[test]
    fn lwcp_widths_are_symmetric_about_mu() {
        let im = IntervalModel::from_parts(
            constant_regression_model(1.25),
            constant_regression_model(0.4),
            0.7,
            0.1,
        )
        .unwrap();
        let iv = im.interval_row(&[0.3]);
        assert_eq!(iv.hi - 1.25, 1.25 - iv.lo);
    }

    fn regression_hp() -> Hyperparams {
        Hyperparams {
            n_estimators: 40,
            max_depth: 3,
            learning_rate: 0.1,
            min_child_weight: 1.0,
            subsample: 1.0,
            colsample_bytree: 1.0,
        }
    }

    #[test]
    fn exact_mu_on_calibration_gives_zero_d_alpha() {
        let schema = unit_schema();
        let mu = constant_regression_model(2.0);
        let instances: Vec<Instance> = (0..30)
            .map(|i| Instance::from_numeric(&schema, &[i as f64 / 10.0 - 1.5]).unwrap())
            .collect();
        let targets = vec![2.0; 30]; // mu is exact everywhere
        let im = fit_lwcp(
            mu,
            &schema,
            &instances,
            &targets,
            &instances,
            &targets,
            0.1,
            &regression_hp(),
            0,
        )
        .unwrap();
        assert_eq!(im.d_alpha(), 0.0);
        assert_eq!(im.interval_row(&[0.0]).width, 0.0);
    }

    #[test]
    fn constant_dispersion_reduces_to_split_conformal() {
        // With rho == c everywhere, every interval has half-width
        // c * d_alpha, and d_alpha equals the plain residual quantile / c.
        let mut rng = crate::rng::rng_from_seed(17);
        let mu = constant_regression_model(0.0);
        let calib_y: Vec<f64> = (0..200).map(|_| rng.random_range(-1.0..1.0)).collect();

        let c = 0.25;
        let rho = constant_regression_model(c);
        let weighted: Vec<f64> = calib_y.iter().map(|y| y.abs() / c).collect();
        let d = calibrate_quantile(&CalibrationScores::new(weighted).unwrap(), 0.1).unwrap();
        let im = IntervalModel::from_parts(mu, rho, d, 0.1).unwrap();

        let iv = im.interval_row(&[0.33]);
        assert!((iv.width - 2.0 * c * d).abs() < 1e-12);
        // The same interval as unweighted split conformal on |y|.
        let plain = calibrate_quantile(
            &CalibrationScores::new(calib_y.iter().map(|y| y.abs()).collect()).unwrap(),
            0.1,
        )
        .unwrap();
        assert!((iv.hi - plain).abs() < 1e-9);
    }

    #[test]
    fn heteroscedastic_noise_widens_intervals_locally() {
        // Noise scale proportional to |x|: intervals on |x| > 2 should be
        // wider on average than on |x| < 0.5.
        let schema = FeatureSchema::new(vec![FeatureSpec::continuous("x", -3.0, 3.0)]).unwrap();
        let mut rng = crate::rng::rng_from_seed(23);
        let sample = |rng: &mut crate::rng::Rng, n: usize| -> (Vec<Instance>, Vec<f64>) {
            let mut insts = Vec::with_capacity(n);
            let mut ys = Vec::with_capacity(n);
            for _ in 0..n {
                let x: f64 = rng.random_range(-3.0..3.0);
                let noise: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal);
                insts.push(Instance::from_numeric(&schema, &[x]).unwrap());
                ys.push(x.abs() * noise);
            }
            (insts, ys)
        };
        let (train_inst, train_y) = sample(&mut rng, 1500);
        let (calib_inst, calib_y) = sample(&mut rng, 1000);
        let mu = fit_regression(&schema, &train_inst, &train_y, Loss::Squared, &regression_hp(), 1)
            .unwrap();
        let im = fit_lwcp(
            mu,
            &schema,
            &train_inst,
            &train_y,
            &calib_inst,
            &calib_y,
            0.1,
            &regression_hp(),
            2,
        )
        .unwrap();

        let mean_width = |lo: f64, hi: f64| {
            let points = 50;
            let mut total = 0.0;
            for i in 0..points {
                let x = lo + (hi - lo) * i as f64 / (points - 1) as f64;
                total += im.interval_row(&[x]).width;
            }
            total / points as f64
        };
        let wide = (mean_width(-3.0, -2.0) + mean_width(2.0, 3.0)) / 2.0;
        let narrow = mean_width(-0.5, 0.5);
        assert!(wide > narrow, "wide {wide} <= narrow {narrow}");
    }

    #[test]
    fn cqr_interval_worked_example() {
        let cm = CqrModel::from_parts(
            constant_regression_model(0.6),
            constant_regression_model(0.4),
            0.05,
            0.1,
        );
        let iv = cm.interval_row(&[0.0]);
        assert!((iv.lo - 0.55).abs() < 1e-12);
        assert!((iv.hi - 0.45).abs() < 1e-12);
        assert!(iv.crossed);
        assert!((iv.width + 0.10).abs() < 1e-12);
    }

    #[test]
    fn cqr_width_is_nondecreasing_in_correction() {
        let q_lo = constant_regression_model(0.2);
        let q_hi = constant_regression_model(0.8);
        let mut last = f64::NEG_INFINITY;
        for corr in [0.0, 0.1, 0.5, 1.0] {
            let cm = CqrModel::from_parts(q_lo.clone(), q_hi.clone(), corr, 0.1);
            let w = cm.interval_row(&[0.0]).width;
            assert!(w >= last);
            last = w;
        }
    }

    #[test]
    fn cqr_zero_scores_give_degenerate_correction() {
        // Quantile models that are exact and equal on calibration rows:
        // conformity scores are all y - y = 0, so the correction is 0.
        let schema = unit_schema();
        let instances: Vec<Instance> = (0..20)
            .map(|i| Instance::from_numeric(&schema, &[i as f64 / 10.0]).unwrap())
            .collect();
        let targets = vec![1.5; 20];
        let q = constant_regression_model(1.5);
        let conformity: Vec<f64> = instances
            .iter()
            .zip(&targets)
            .map(|(inst, &y)| {
                let v = q.predict(inst).unwrap();
                (v - y).max(y - v)
            })
            .collect();
        let correction =
            calibrate_quantile(&CalibrationScores::new(conformity).unwrap(), 0.1).unwrap();
        assert_eq!(correction, 0.0);
    }

    #[test]
    fn coverage_extremes() {
        let maximal = PredictionSet { contains_zero: true, contains_one: true };
        let empty = PredictionSet { contains_zero: false, contains_one: false };
        assert_eq!(set_coverage(&[maximal; 5], &[0, 1, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(set_coverage(&[empty; 3], &[0, 1, 0]).unwrap(), 0.0);
        assert!(set_coverage(&[maximal], &[0, 1]).is_err());
    }

    #[test]
    fn crossed_interval_covers_nothing() {
        let iv = PredictionInterval { lo: 0.6, hi: 0.4, width: -0.2, crossed: true };
        assert!(!iv.covers(0.5));
    }

    #[test]
    fn set_shrinkage_when_ceiling_index_is_stable() {
        // Appending an opposite-label score for a point whose set is {0,1}
        // never raises qhat when the ceiling index is unchanged, so no
        // prediction set grows.
        let mut rng = crate::rng::rng_from_seed(41);
        let mut tested = 0;
        'outer: while tested < 100 {
            let n = rng.random_range(8..=40);
            let alpha = [0.05, 0.1, 0.2][rng.random_range(0..3)];
            if quantile_index(alpha, n + 1) != quantile_index(alpha, n) {
                continue;
            }
            let probs: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..0.95)).collect();
            let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2) as u8).collect();
            let raw: Vec<f64> = probs
                .iter()
                .zip(&labels)
                .map(|(&p, &y)| if y == 1 { 1.0 - p } else { p })
                .collect();
            let qhat = calibrate_quantile(&CalibrationScores::new(raw.clone()).unwrap(), alpha)
                .unwrap();
            if !qhat.is_finite() {
                continue;
            }
            // Find a calibration point whose prediction set is {0, 1}.
            for (i, &p) in probs.iter().enumerate() {
                if p <= qhat && (1.0 - p) <= qhat {
                    let opposite = 1 - labels[i];
                    let new_score = if opposite == 1 { 1.0 - p } else { p };
                    let mut extended = raw.clone();
                    extended.push(new_score);
                    let qhat2 = calibrate_quantile(
                        &CalibrationScores::new(extended).unwrap(),
                        alpha,
                    )
                    .unwrap();
                    assert!(
                        qhat2 <= qhat,
                        "qhat grew: {qhat} -> {qhat2} (n={n}, alpha={alpha})"
                    );
                    // Set sizes are monotone in qhat, so no set grows.
                    let size = |q: f64, pr: f64| {
                        (pr <= q) as usize + ((1.0 - pr) <= q) as usize
                    };
                    for &pr in &probs {
                        assert!(size(qhat2, pr) <= size(qhat, pr));
                    }
                    tested += 1;
                    continue 'outer;
                }
            }
        }
    }
}
