//! Accuracy, region parsing error, robustness and consistency measures over
//! angle-indexed probability series.

mod filter;

pub use filter::{design_lowpass, lowpass_circular, ButterworthConfig, Section};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{lambda_cos, lambda_hemi, wrap_degrees, Boundary, DeviationAngle};

/// Angles closer than this are treated as the same grid point.
pub const ANGLE_TOL: f64 = 1e-6;

/// Minimum sweep length for the noise metric.
pub const MIN_NOISE_SAMPLES: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("both Yes and No masses are zero")]
    ZeroMass,
    #[error("probability mass must be finite and non-negative")]
    NegativeMass,
    #[error("no input")]
    EmptyInput,
    #[error("series are not defined on the same angle grid")]
    GridMismatch,
    #[error("series has {len} samples, need at least {min}")]
    SeriesTooShort { len: usize, min: usize },
    #[error("angle {0}° has no mirrored partner in the series")]
    AsymmetricGrid(f64),
    #[error("probe labels need at least one positive and one negative")]
    DegenerateLabels,
    #[error("invalid series: {0}")]
    InvalidSeries(String),
}

/// Probabilities indexed by strictly increasing angles (degrees).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbSeries {
    angles: Vec<f64>,
    values: Vec<f64>,
}

impl ProbSeries {
    pub fn new(angles: Vec<f64>, values: Vec<f64>) -> Result<Self, MetricsError> {
        if angles.len() != values.len() {
            return Err(MetricsError::InvalidSeries(
                "angle and value counts differ".into(),
            ));
        }
        if angles.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(MetricsError::InvalidSeries(
                "angles must be strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(MetricsError::InvalidSeries(
                "probabilities must lie in [0, 1]".into(),
            ));
        }
        Ok(Self { angles, values })
    }

    /// Sorts `(angle, probability)` pairs by angle before validating.
    pub fn from_pairs(mut pairs: Vec<(f64, f64)>) -> Result<Self, MetricsError> {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (angles, values) = pairs.into_iter().unzip();
        Self::new(angles, values)
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.angles.iter().copied().zip(self.values.iter().copied())
    }

    /// Same angles, new values. Values are not range-checked.
    fn with_values(&self, values: Vec<f64>) -> Self {
        Self {
            angles: self.angles.clone(),
            values,
        }
    }

    /// Mirror image θ → −θ, re-sorted.
    pub fn reflected(&self) -> Self {
        let pairs = self.iter().map(|(a, v)| (wrap_degrees(-a), v)).collect();
        Self::from_pairs(pairs).expect("reflection preserves validity")
    }

    fn same_grid(&self, other: &ProbSeries) -> bool {
        self.len() == other.len()
            && self
                .angles
                .iter()
                .zip(&other.angles)
                .all(|(a, b)| (a - b).abs() <= ANGLE_TOL)
    }

    fn find(&self, angle: f64) -> Option<usize> {
        let idx = self.angles.partition_point(|a| *a < angle - ANGLE_TOL);
        (idx < self.len() && (self.angles[idx] - angle).abs() <= ANGLE_TOL).then_some(idx)
    }
}

/// `P(Yes) / (P(Yes) + P(No))`.
pub fn local_prob(p_yes: f64, p_no: f64) -> Result<f64, MetricsError> {
    if !(p_yes >= 0.0 && p_no >= 0.0) || !p_yes.is_finite() || !p_no.is_finite() {
        return Err(MetricsError::NegativeMass);
    }
    let total = p_yes + p_no;
    if total == 0.0 {
        return Err(MetricsError::ZeroMass);
    }
    Ok(p_yes / total)
}

/// Min-max scaling fitted on one population of probabilities and applied to any of them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

impl MinMax {
    pub fn fit(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        values.into_iter().fold(None, |acc, v| match acc {
            None => Some(MinMax { min: v, max: v }),
            Some(m) => Some(MinMax {
                min: m.min.min(v),
                max: m.max.max(v),
            }),
        })
    }

    /// A constant population maps to 1.0.
    pub fn apply(&self, v: f64) -> f64 {
        let span = self.max - self.min;
        if span > 0.0 {
            ((v - self.min) / span).clamp(0.0, 1.0)
        } else {
            1.0
        }
    }
}

pub fn normalize(series: &ProbSeries) -> ProbSeries {
    match MinMax::fit(series.values.iter().copied()) {
        Some(mm) => series.with_values(series.values.iter().map(|v| mm.apply(*v)).collect()),
        None => series.clone(),
    }
}

/// Fraction of cases whose raw probability sits on the correct side of 0.5. Ties count
/// as "No".
pub fn accuracy(cases: &[(DeviationAngle, f64)], boundary: Boundary) -> Result<f64, MetricsError> {
    if cases.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let correct = cases
        .iter()
        .filter(|(theta, p)| crate::geometry::in_acceptance_region(*theta, boundary) == (*p > 0.5))
        .count();
    Ok(correct as f64 / cases.len() as f64)
}

/// Reference acceptance curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reference {
    Hemi(Boundary),
    Cos,
}

impl Reference {
    pub fn at(self, theta: DeviationAngle) -> f64 {
        match self {
            Reference::Hemi(b) => lambda_hemi(theta, b),
            Reference::Cos => lambda_cos(theta),
        }
    }
}

/// RMSE between a normalized series (indexed by deviation angle) and a reference curve.
pub fn region_parsing_error(
    series_hat: &ProbSeries,
    reference: Reference,
) -> Result<f64, MetricsError> {
    if series_hat.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let sum: f64 = series_hat
        .iter()
        .map(|(a, p)| (p - reference.at(DeviationAngle::new(a))).powi(2))
        .sum();
    Ok((sum / series_hat.len() as f64).sqrt())
}

/// Mean over angles of the population standard deviation across variant series.
pub fn std_dev(variant_series: &[ProbSeries]) -> Result<f64, MetricsError> {
    let Some(first) = variant_series.first() else {
        return Err(MetricsError::EmptyInput);
    };
    if variant_series.len() < 2 {
        return Err(MetricsError::InvalidSeries(
            "need at least two variants".into(),
        ));
    }
    if first.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if variant_series.iter().any(|s| !s.same_grid(first)) {
        return Err(MetricsError::GridMismatch);
    }
    let k = variant_series.len() as f64;
    let total: f64 = (0..first.len())
        .map(|i| {
            let mean = variant_series.iter().map(|s| s.values[i]).sum::<f64>() / k;
            let var = variant_series
                .iter()
                .map(|s| (s.values[i] - mean).powi(2))
                .sum::<f64>()
                / k;
            var.sqrt()
        })
        .sum();
    Ok(total / first.len() as f64)
}

/// RMSE between a normalized sweep and its low-pass filtered version.
pub fn noise(series_hat: &ProbSeries, filter: &ButterworthConfig) -> Result<f64, MetricsError> {
    if series_hat.len() < MIN_NOISE_SAMPLES {
        return Err(MetricsError::SeriesTooShort {
            len: series_hat.len(),
            min: MIN_NOISE_SAMPLES,
        });
    }
    let smooth = lowpass_circular(series_hat.values(), filter);
    let sum: f64 = series_hat
        .values
        .iter()
        .zip(&smooth)
        .map(|(p, s)| (p - s).powi(2))
        .sum();
    Ok((sum / series_hat.len() as f64).sqrt())
}

/// Root mean squared difference over mirrored pairs {θ, −θ}; 0° and 180° pair with
/// themselves and are skipped.
pub fn sym_consistency(series_hat: &ProbSeries) -> Result<f64, MetricsError> {
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for (i, (a, p)) in series_hat.iter().enumerate() {
        let mirror = wrap_degrees(-a);
        if (wrap_degrees(mirror - a)).abs() <= ANGLE_TOL {
            continue;
        }
        let j = series_hat
            .find(mirror)
            .ok_or(MetricsError::AsymmetricGrid(a))?;
        if j > i {
            sum += (p - series_hat.values[j]).powi(2);
            pairs += 1;
        }
    }
    if pairs == 0 {
        return Err(MetricsError::EmptyInput);
    }
    Ok((sum / pairs as f64).sqrt())
}

/// RMS deviation of `p̂_r + p̂_opp(r)` from 1, pairing entries at the same index angle.
pub fn opp_consistency(
    series_r: &ProbSeries,
    series_opp: &ProbSeries,
) -> Result<f64, MetricsError> {
    if series_r.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if !series_r.same_grid(series_opp) {
        return Err(MetricsError::GridMismatch);
    }
    let sum: f64 = series_r
        .values
        .iter()
        .zip(&series_opp.values)
        .map(|(a, b)| (a + b - 1.0).powi(2))
        .sum();
    Ok((sum / series_r.len() as f64).sqrt())
}

/// Binary F1 with "object present" as the positive class. Each item is
/// `(truth, predicted)`.
pub fn hallucination_f1(probe_results: &[(bool, bool)]) -> Result<f64, MetricsError> {
    let positives = probe_results.iter().filter(|(t, _)| *t).count();
    if positives == 0 || positives == probe_results.len() {
        return Err(MetricsError::DegenerateLabels);
    }
    let tp = probe_results.iter().filter(|(t, p)| *t && *p).count() as f64;
    let fp = probe_results.iter().filter(|(t, p)| !*t && *p).count() as f64;
    let fn_ = probe_results.iter().filter(|(t, p)| *t && !*p).count() as f64;
    if tp == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * tp / (2.0 * tp + fp + fn_))
}

/// Pools per-part RMS values, weighting each by its sample count.
pub fn rms_pool(parts: &[(f64, usize)]) -> Option<f64> {
    let n: usize = parts.iter().map(|(_, k)| k).sum();
    (n > 0).then(|| (parts.iter().map(|(v, k)| v * v * *k as f64).sum::<f64>() / n as f64).sqrt())
}

/// Metric suite for one evaluation group. Absent fields could not be computed for the
/// group (too few variants, incomplete sweep, no probes, no opposite relation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub acc: f64,
    pub eps_hemi: f64,
    pub eps_cos: f64,
    pub sigma: Option<f64>,
    pub eta: Option<f64>,
    pub c_sym: Option<f64>,
    pub c_opp: Option<f64>,
    pub obj_f1: Option<f64>,
    pub n_cases: usize,
}

impl MetricReport {
    /// `(name, value)` for every metric, in display order.
    pub fn fields(&self) -> [(&'static str, Option<f64>); 8] {
        [
            ("obj_f1", self.obj_f1),
            ("acc", Some(self.acc)),
            ("eps_cos", Some(self.eps_cos)),
            ("eps_hemi", Some(self.eps_hemi)),
            ("sigma", self.sigma),
            ("eta", self.eta),
            ("c_sym", self.c_sym),
            ("c_opp", self.c_opp),
        ]
    }

    pub fn in_range(&self) -> bool {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        unit(self.acc)
            && unit(self.eps_hemi)
            && unit(self.eps_cos)
            && self.sigma.is_none_or(|s| (0.0..=0.5).contains(&s))
            && self.eta.is_none_or(|v| v >= 0.0)
            && self.c_sym.is_none_or(|v| v >= 0.0)
            && self.c_opp.is_none_or(|v| v >= 0.0)
            && self.obj_f1.is_none_or(unit)
    }

    /// Unweighted mean of each field over `reports`; a field is present only when every
    /// report has it.
    pub fn mean(reports: &[&MetricReport]) -> Option<MetricReport> {
        if reports.is_empty() {
            return None;
        }
        let k = reports.len() as f64;
        let avg = |f: fn(&MetricReport) -> f64| reports.iter().map(|r| f(r)).sum::<f64>() / k;
        let avg_opt = |f: fn(&MetricReport) -> Option<f64>| {
            reports
                .iter()
                .map(|r| f(r))
                .sum::<Option<f64>>()
                .map(|s| s / k)
        };
        Some(MetricReport {
            acc: avg(|r| r.acc),
            eps_hemi: avg(|r| r.eps_hemi),
            eps_cos: avg(|r| r.eps_cos),
            sigma: avg_opt(|r| r.sigma),
            eta: avg_opt(|r| r.eta),
            c_sym: avg_opt(|r| r.c_sym),
            c_opp: avg_opt(|r| r.c_opp),
            obj_f1: avg_opt(|r| r.obj_f1),
            n_cases: reports.iter().map(|r| r.n_cases).sum(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn grid36() -> Vec<f64> {
        (-17..=18).map(|k| k as f64 * 10.0).collect()
    }

    fn series(f: impl Fn(f64) -> f64) -> ProbSeries {
        let g = grid36();
        let v = g.iter().map(|a| f(*a)).collect();
        ProbSeries::new(g, v).unwrap()
    }

    fn lcos(a: f64) -> f64 {
        lambda_cos(DeviationAngle::new(a))
    }

    #[test]
    fn local_probability() {
        assert_abs_diff_eq!(local_prob(0.6, 0.2).unwrap(), 0.75, epsilon = 1e-15);
        assert_eq!(local_prob(0.5, 0.5).unwrap(), 0.5);
        assert_eq!(local_prob(0.0, 0.3).unwrap(), 0.0);
        assert_eq!(local_prob(0.0, 0.0), Err(MetricsError::ZeroMass));
        assert_eq!(local_prob(-0.1, 0.3), Err(MetricsError::NegativeMass));
    }

    #[test]
    fn normalization_examples() {
        let s = ProbSeries::new(vec![0.0, 10.0, 20.0], vec![0.2, 0.5, 0.8]).unwrap();
        let n = normalize(&s);
        for (got, want) in n.values().iter().zip([0.0, 0.5, 1.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
        let full = ProbSeries::new(vec![0.0, 10.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(normalize(&full), full);
        let flat = ProbSeries::new(vec![0.0, 10.0, 20.0], vec![0.3; 3]).unwrap();
        assert_eq!(normalize(&flat).values(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn series_validation() {
        assert!(ProbSeries::new(vec![0.0, 0.0], vec![0.1, 0.2]).is_err());
        assert!(ProbSeries::new(vec![0.0], vec![1.5]).is_err());
        assert!(ProbSeries::new(vec![0.0], vec![]).is_err());
    }

    #[test]
    fn accuracy_of_constant_responders() {
        let cases = |p: f64| -> Vec<(DeviationAngle, f64)> {
            grid36()
                .into_iter()
                .map(|a| (DeviationAngle::new(a), p))
                .collect()
        };
        assert_abs_diff_eq!(accuracy(&cases(1.0), Boundary::Open).unwrap(), 17.0 / 36.0);
        assert_abs_diff_eq!(accuracy(&cases(0.0), Boundary::Open).unwrap(), 19.0 / 36.0);
        // exactly 0.5 counts as "No"
        assert_abs_diff_eq!(accuracy(&cases(0.5), Boundary::Open).unwrap(), 19.0 / 36.0);
        let ideal: Vec<_> = grid36()
            .into_iter()
            .map(|a| {
                let t = DeviationAngle::new(a);
                (t, lambda_hemi(t, Boundary::Open))
            })
            .collect();
        assert_eq!(accuracy(&ideal, Boundary::Open).unwrap(), 1.0);
        assert_eq!(accuracy(&[], Boundary::Open), Err(MetricsError::EmptyInput));
    }

    #[test]
    fn region_parsing_closed_forms() {
        assert_abs_diff_eq!(
            region_parsing_error(&series(lcos), Reference::Cos).unwrap(),
            0.0
        );
        let ones = series(|_| 1.0);
        assert_abs_diff_eq!(
            region_parsing_error(&ones, Reference::Cos).unwrap(),
            (3.0f64 / 8.0).sqrt(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            region_parsing_error(&series(|_| 0.5), Reference::Cos).unwrap(),
            (1.0f64 / 8.0).sqrt(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            region_parsing_error(&ones, Reference::Hemi(Boundary::Closed)).unwrap(),
            (17.0f64 / 36.0).sqrt(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            region_parsing_error(&ones, Reference::Hemi(Boundary::Open)).unwrap(),
            (19.0f64 / 36.0).sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn std_dev_examples() {
        let a = series(lcos);
        assert_eq!(std_dev(&[a.clone(), a.clone()]).unwrap(), 0.0);
        let zeros = series(|_| 0.0);
        let ones = series(|_| 1.0);
        assert_abs_diff_eq!(std_dev(&[zeros.clone(), ones]).unwrap(), 0.5);
        let short = ProbSeries::new(vec![0.0], vec![0.0]).unwrap();
        assert_eq!(std_dev(&[zeros, short]), Err(MetricsError::GridMismatch));
    }

    #[test]
    fn noise_examples() {
        let cfg = ButterworthConfig::default();
        assert!(noise(&series(|_| 1.0), &cfg).unwrap() < 1e-12);
        assert!(noise(&series(lcos), &cfg).unwrap() < 0.02);
        let short = ProbSeries::new(vec![0.0, 90.0, 180.0], vec![0.1, 0.2, 0.3]).unwrap();
        assert!(matches!(
            noise(&short, &cfg),
            Err(MetricsError::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn symmetry_examples() {
        assert_eq!(sym_consistency(&series(lcos)).unwrap(), 0.0);
        assert_eq!(sym_consistency(&series(|_| 1.0)).unwrap(), 0.0);
        let bumped = series(|a| {
            if a == 10.0 {
                1.0
            } else if a == -10.0 {
                0.0
            } else {
                0.4
            }
        });
        assert_abs_diff_eq!(
            sym_consistency(&bumped).unwrap(),
            (2.0f64 / 34.0).sqrt(),
            epsilon = 1e-12
        );
        let lopsided = ProbSeries::new(vec![0.0, 10.0, 20.0, 180.0], vec![0.0; 4]).unwrap();
        assert_eq!(
            sym_consistency(&lopsided),
            Err(MetricsError::AsymmetricGrid(10.0))
        );
    }

    #[test]
    fn opposition_examples() {
        let r = series(lcos);
        let opp = series(|a| lcos(a + 180.0));
        assert!(opp_consistency(&r, &opp).unwrap() < 1e-12);
        let ones = series(|_| 1.0);
        assert_abs_diff_eq!(opp_consistency(&ones, &ones).unwrap(), 1.0);
        assert_abs_diff_eq!(opp_consistency(&ones, &series(|_| 0.5)).unwrap(), 0.5);
        let short = ProbSeries::new(vec![0.0], vec![0.0]).unwrap();
        assert_eq!(
            opp_consistency(&ones, &short),
            Err(MetricsError::GridMismatch)
        );
    }

    #[test]
    fn f1_examples() {
        let perfect = [(true, true), (false, false), (true, true), (false, false)];
        assert_eq!(hallucination_f1(&perfect).unwrap(), 1.0);
        let always_yes = [(true, true), (false, true)];
        assert_abs_diff_eq!(hallucination_f1(&always_yes).unwrap(), 2.0 / 3.0);
        let always_no = [(true, false), (false, false)];
        assert_eq!(hallucination_f1(&always_no).unwrap(), 0.0);
        assert_eq!(
            hallucination_f1(&[(true, true), (true, false)]),
            Err(MetricsError::DegenerateLabels)
        );
    }

    #[test]
    fn random_probe_answers_average_half() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let trials = 400;
        let mean: f64 = (0..trials)
            .map(|_| {
                let probes: Vec<(bool, bool)> = (0..200)
                    .map(|i| (i % 2 == 0, rng.random::<f64>() > 0.5))
                    .collect();
                hallucination_f1(&probes).unwrap()
            })
            .sum::<f64>()
            / trials as f64;
        assert!((mean - 0.5).abs() < 0.02, "{mean}");
    }

    #[test]
    fn pooling_weights_by_count() {
        assert_eq!(rms_pool(&[]), None);
        assert_abs_diff_eq!(rms_pool(&[(1.0, 1), (0.0, 3)]).unwrap(), 0.5);
    }

    fn arb_series() -> impl Strategy<Value = ProbSeries> {
        prop::collection::vec(0.0f64..=1.0, 36).prop_map(|v| ProbSeries::new(grid36(), v).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn normalize_is_idempotent(s in arb_series()) {
            let once = normalize(&s);
            let twice = normalize(&once);
            for (a, b) in once.values().iter().zip(twice.values()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn normalize_ignores_positive_affine_maps(
            s in arb_series(), scale in 0.01f64..1.0, shift in 0.0f64..0.5,
        ) {
            let moved: Vec<f64> = s.values().iter().map(|v| (v * scale + shift).min(1.0)).collect();
            prop_assume!(s.values().iter().all(|v| v * scale + shift <= 1.0));
            let moved = ProbSeries::new(s.angles().to_vec(), moved).unwrap();
            for (a, b) in normalize(&s).values().iter().zip(normalize(&moved).values()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn metrics_stay_in_range(a in arb_series(), b in arb_series(), c in arb_series()) {
            let (na, nb, nc) = (normalize(&a), normalize(&b), normalize(&c));
            let unit = |v: f64| (0.0..=1.0).contains(&v);
            prop_assert!(unit(region_parsing_error(&na, Reference::Cos).unwrap()));
            prop_assert!(unit(region_parsing_error(&na, Reference::Hemi(Boundary::Open)).unwrap()));
            prop_assert!(unit(sym_consistency(&na).unwrap()));
            prop_assert!(unit(opp_consistency(&na, &nb).unwrap()));
            prop_assert!(unit(noise(&na, &ButterworthConfig::default()).unwrap()));
            let sigma = std_dev(&[na.clone(), nb.clone(), nc]).unwrap();
            prop_assert!((0.0..=0.5).contains(&sigma));
        }

        #[test]
        fn opposition_is_symmetric(a in arb_series(), b in arb_series()) {
            prop_assert_eq!(opp_consistency(&a, &b).unwrap(), opp_consistency(&b, &a).unwrap());
        }

        #[test]
        fn symmetry_ignores_reflection(a in arb_series()) {
            let r = a.reflected();
            prop_assert!((sym_consistency(&a).unwrap() - sym_consistency(&r).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn constant_series_have_no_noise(v in 0.0f64..=1.0) {
            let s = series(|_| v);
            prop_assert!(noise(&s, &ButterworthConfig::default()).unwrap() < 1e-12);
        }

        #[test]
        fn accuracy_complements_under_negation(vals in prop::collection::vec(0.0f64..=1.0, 36)) {
            let g = grid36();
            let cases: Vec<_> = g.iter().zip(&vals).map(|(a, p)| (DeviationAngle::new(*a), *p)).collect();
            let acc = accuracy(&cases, Boundary::Open).unwrap();
            // negation with the 0.5 tie broken the other way: p > 0.5 ⇔ not (1 - p >= 0.5)
            let flipped = cases
                .iter()
                .filter(|(t, p)| crate::geometry::in_acceptance_region(*t, Boundary::Open) == (1.0 - p >= 0.5))
                .count() as f64 / cases.len() as f64;
            prop_assert!((acc + flipped - 1.0).abs() < 1e-12);
        }
    }
}
