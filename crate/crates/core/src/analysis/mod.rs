//! Joins responses with scene geometry, computes metric reports per group and candidate
//! frame, decides preferences and writes reports.

mod preference;
mod report;

pub use preference::{
    decide, perspective_delta, preference_calls, preferred_for, preferred_transform, DeltaRow,
    Dimension, PreferenceCall, Scope, DEFAULT_THRESHOLD,
};
pub use report::{emit_report, ReportDocument, ReportFormat, REPORT_SCHEMA_VERSION};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, Execution};
use crate::geometry::{
    deviation_angle, lambda_cos, lambda_hemi, resolve_frame, wrap_degrees, Boundary,
    DeviationAngle, ForSpec, GeometryError, Relation,
};
use crate::harness::ResponseRecord;
use crate::metrics::{
    self, accuracy, hallucination_f1, noise, opp_consistency, region_parsing_error, rms_pool,
    std_dev, sym_consistency, ButterworthConfig, MetricReport, MetricsError, MinMax, ProbSeries,
    Reference, ANGLE_TOL,
};
use crate::testgen::{Manifest, Perspective, SceneSpec, Split, TestCase, Variant};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("response `{0}` matches no case or probe in the manifest")]
    OrphanResponse(String),
    #[error("candidate {0} was not evaluated")]
    MissingCandidate(String),
    #[error("mismatched cases: {0}")]
    MismatchedCases(String),
    #[error("nothing to report")]
    EmptyReport,
    #[error("cannot write report: {0}")]
    UnwritableOutput(#[from] std::io::Error),
    #[error("report file: {0}")]
    ReportFile(String),
    #[error("response {case_id}: {source}")]
    Metrics {
        case_id: String,
        source: MetricsError,
    },
    #[error(transparent)]
    Series(#[from] MetricsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationKey {
    One(Relation),
    /// Unweighted mean over the relations of the group.
    Aggregated,
}

impl fmt::Display for RelationKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RelationKey::One(r) => write!(f, "{r}"),
            RelationKey::Aggregated => f.write_str("aggregated"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupKey {
    pub model: String,
    pub split: Split,
    pub perspective: Perspective,
    pub relation: RelationKey,
    pub language: String,
    /// Frame in which deviation angles were measured.
    pub reference: ForSpec,
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}/{}/{}/{}/{}",
            self.model, self.split, self.perspective, self.relation, self.language, self.reference
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    pub candidates: Vec<ForSpec>,
    /// Boundary of the acceptance region used for accuracy.
    pub acc_boundary: Boundary,
    /// Boundary of the hemisphere reference used for ε^hemi.
    pub hemi_boundary: Boundary,
    pub filter: ButterworthConfig,
    pub exec: Execution,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            candidates: ForSpec::all(),
            acc_boundary: Boundary::Open,
            hemi_boundary: Boundary::Open,
            filter: ButterworthConfig::default(),
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EvalWarning {
    /// Some sweeps of the group lack angles; η and c^sym are left out.
    IncompleteSweep {
        group: String,
        expected: usize,
        shortest: usize,
    },
    /// Sweeps too short for the noise filter.
    ShortSweep { group: String, len: usize },
    /// The candidate frame cannot be resolved on this split's scenes.
    UnresolvableCandidate {
        split: Split,
        reference: ForSpec,
        reason: String,
    },
    /// A second response for the same id was ignored.
    DuplicateResponse { id: String },
    /// Aggregate built from fewer than four relations.
    PartialAggregate { group: String, relations: usize },
}

impl fmt::Display for EvalWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalWarning::IncompleteSweep { group, expected, shortest } => write!(
                f,
                "incomplete sweep in {group}: {shortest} of {expected} angles; eta and c_sym omitted"
            ),
            EvalWarning::ShortSweep { group, len } => {
                write!(f, "sweep of {len} angles in {group} is too short for eta")
            }
            EvalWarning::UnresolvableCandidate { split, reference, reason } => {
                write!(f, "{reference} cannot be evaluated on {split}: {reason}")
            }
            EvalWarning::DuplicateResponse { id } => write!(f, "duplicate response for {id} ignored"),
            EvalWarning::PartialAggregate { group, relations } => {
                write!(f, "aggregate for {group} covers only {relations} relations")
            }
        }
    }
}

/// One point of a mean response curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub theta: f64,
    /// Mean raw local probability.
    pub p: f64,
    /// Mean normalized probability.
    pub p_hat: f64,
    pub lambda_hemi: f64,
    pub lambda_cos: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Evaluation {
    pub reports: BTreeMap<GroupKey, MetricReport>,
    /// Per single-relation group, ordered by angle.
    pub curves: BTreeMap<GroupKey, Vec<CurvePoint>>,
    pub warnings: Vec<EvalWarning>,
}

/// Normalization scope: everything but the angle and the scene variant.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct BaseKey<'a> {
    model: &'a str,
    split: Split,
    perspective: Perspective,
    relation: Relation,
    language: &'a str,
}

#[derive(Debug, Clone, Copy)]
struct Obs<'a> {
    case: &'a TestCase,
    scene: &'a SceneSpec,
    p: f64,
    p_hat: f64,
}

/// Scene identity within a base group, shared by a relation and its opposite.
type SceneSlot = (u32, Variant, u32);

fn slot(case: &TestCase) -> SceneSlot {
    (case.scene.combo, case.scene.variant, case.scene.sweep_angle)
}

fn prob(record: &ResponseRecord) -> Result<f64, AnalysisError> {
    metrics::local_prob(record.p_yes, record.p_no).map_err(|source| AnalysisError::Metrics {
        case_id: record.case_id.clone(),
        source,
    })
}

struct Task<'a> {
    base: BaseKey<'a>,
    reference: ForSpec,
}

struct TaskOutput {
    key: GroupKey,
    report: MetricReport,
    curve: Vec<CurvePoint>,
    warnings: Vec<EvalWarning>,
}

/// Evaluates `responses` against the geometry of `manifest` for every candidate frame.
pub fn evaluate(
    responses: &[ResponseRecord],
    manifest: &Manifest,
    options: &EvalOptions,
) -> Result<Evaluation, AnalysisError> {
    let cases: HashMap<&str, &TestCase> =
        manifest.cases.iter().map(|c| (c.id.as_str(), c)).collect();
    let probes: HashMap<&str, _> = manifest.probes.iter().map(|p| (p.id.as_str(), p)).collect();
    let scenes = manifest.scene_index();
    let mut warnings = Vec::new();
    let mut seen = BTreeSet::new();

    let mut groups: BTreeMap<BaseKey, Vec<Obs>> = BTreeMap::new();
    let mut probe_results: BTreeMap<(&str, Split, &str), Vec<(bool, bool)>> = BTreeMap::new();
    for record in responses {
        if !seen.insert(record.case_id.as_str()) {
            warnings.push(EvalWarning::DuplicateResponse {
                id: record.case_id.clone(),
            });
            continue;
        }
        if let Some(case) = cases.get(record.case_id.as_str()) {
            let scene_id = case.scene.id();
            let scene = scenes
                .get(scene_id.as_str())
                .ok_or_else(|| AnalysisError::OrphanResponse(record.case_id.clone()))?;
            let p = prob(record)?;
            groups
                .entry(BaseKey {
                    model: &record.model_id,
                    split: case.scene.split,
                    perspective: case.perspective,
                    relation: case.relation,
                    language: &case.language,
                })
                .or_default()
                .push(Obs {
                    case,
                    scene,
                    p,
                    p_hat: p,
                });
        } else if let Some(probe) = probes.get(record.case_id.as_str()) {
            let split = scenes
                .get(probe.scene_id.as_str())
                .map(|s| s.key.split)
                .ok_or_else(|| AnalysisError::OrphanResponse(record.case_id.clone()))?;
            probe_results
                .entry((&record.model_id, split, &probe.language))
                .or_default()
                .push((probe.present, prob(record)? > 0.5));
        } else {
            return Err(AnalysisError::OrphanResponse(record.case_id.clone()));
        }
    }
    if groups.is_empty() {
        return Err(AnalysisError::EmptyReport);
    }

    for obs in groups.values_mut() {
        obs.sort_by_key(|o| slot(o.case));
        let mm = MinMax::fit(obs.iter().map(|o| o.p)).expect("groups are non-empty");
        for o in obs.iter_mut() {
            o.p_hat = mm.apply(o.p);
        }
    }
    let obj_f1: BTreeMap<(&str, Split, &str), f64> = probe_results
        .iter()
        .filter_map(|(k, v)| hallucination_f1(v).ok().map(|f| (*k, f)))
        .collect();

    // candidates that cannot be resolved on a split are reported once and skipped
    let mut usable: BTreeMap<Split, Vec<ForSpec>> = BTreeMap::new();
    for split in groups.keys().map(|k| k.split).collect::<BTreeSet<_>>() {
        let sample = groups
            .iter()
            .find(|(k, _)| k.split == split)
            .map(|(_, v)| v[0].scene)
            .expect("split has a group");
        for &reference in &options.candidates {
            match resolve_frame(&sample.geometry(), reference) {
                Ok(_) => usable.entry(split).or_default().push(reference),
                Err(e) => warnings.push(EvalWarning::UnresolvableCandidate {
                    split,
                    reference,
                    reason: e.to_string(),
                }),
            }
        }
    }

    let tasks: Vec<Task> = groups
        .keys()
        .flat_map(|base| {
            usable
                .get(&base.split)
                .into_iter()
                .flatten()
                .map(move |&reference| Task {
                    base: base.clone(),
                    reference,
                })
        })
        .collect();
    let expected = manifest.config.sweep_angles().len();
    let outputs = exec::try_map(options.exec, &tasks, |task| {
        evaluate_group(task, &groups, &obj_f1, expected, options)
    })?;

    let mut evaluation = Evaluation::default();
    for out in outputs {
        evaluation.warnings.extend(out.warnings);
        evaluation.curves.insert(out.key.clone(), out.curve);
        evaluation.reports.insert(out.key, out.report);
    }
    let mut buckets: BTreeMap<GroupKey, Vec<&MetricReport>> = BTreeMap::new();
    for (key, report) in &evaluation.reports {
        let agg = GroupKey {
            relation: RelationKey::Aggregated,
            ..key.clone()
        };
        buckets.entry(agg).or_default().push(report);
    }
    let mut aggregates = Vec::with_capacity(buckets.len());
    for (key, parts) in buckets {
        if parts.len() < Relation::ALL.len() {
            warnings.push(EvalWarning::PartialAggregate {
                group: key.to_string(),
                relations: parts.len(),
            });
        }
        if let Some(mean) = MetricReport::mean(&parts) {
            aggregates.push((key, mean));
        }
    }
    evaluation.reports.extend(aggregates);
    warnings.extend(std::mem::take(&mut evaluation.warnings));
    warnings.sort();
    warnings.dedup();
    evaluation.warnings = warnings;
    Ok(evaluation)
}

fn snapped_deviation(
    scene: &SceneSpec,
    relation: Relation,
    reference: ForSpec,
) -> Result<DeviationAngle, GeometryError> {
    let geometry = scene.geometry();
    let frame = resolve_frame(&geometry, reference)?;
    Ok(deviation_angle(&geometry, relation, &frame)?.snapped(1.0, ANGLE_TOL))
}

/// Mirrored pairs in a series, excluding self-paired angles.
fn mirrored_pairs(series: &ProbSeries) -> usize {
    series
        .angles()
        .iter()
        .filter(|a| wrap_degrees(-2.0 * **a).abs() > ANGLE_TOL)
        .count()
        / 2
}

fn evaluate_group(
    task: &Task,
    groups: &BTreeMap<BaseKey, Vec<Obs>>,
    obj_f1: &BTreeMap<(&str, Split, &str), f64>,
    expected: usize,
    options: &EvalOptions,
) -> Result<TaskOutput, AnalysisError> {
    let base = &task.base;
    let obs = &groups[base];
    let key = GroupKey {
        model: base.model.to_string(),
        split: base.split,
        perspective: base.perspective,
        relation: RelationKey::One(base.relation),
        language: base.language.to_string(),
        reference: task.reference,
    };
    let mut warnings = Vec::new();
    let opposite: Option<HashMap<SceneSlot, f64>> = groups
        .get(&BaseKey {
            relation: base.relation.opposite(),
            ..base.clone()
        })
        .map(|o| o.iter().map(|o| (slot(o.case), o.p_hat)).collect());

    let mut thetas = Vec::with_capacity(obs.len());
    for o in obs {
        let theta = snapped_deviation(o.scene, base.relation, task.reference)
            .map_err(|e| AnalysisError::MismatchedCases(format!("{}: {e}", o.case.id)))?;
        thetas.push(theta);
    }

    let acc_input: Vec<(DeviationAngle, f64)> =
        thetas.iter().zip(obs).map(|(t, o)| (*t, o.p)).collect();
    let acc = accuracy(&acc_input, options.acc_boundary)?;

    // one sweep per (combo, variant)
    let mut sweeps: BTreeMap<(u32, Variant), Vec<(f64, f64, Option<f64>)>> = BTreeMap::new();
    for (theta, o) in thetas.iter().zip(obs) {
        let opp = opposite
            .as_ref()
            .and_then(|m| m.get(&slot(o.case)).copied());
        sweeps
            .entry((o.case.scene.combo, o.case.scene.variant))
            .or_default()
            .push((theta.degrees(), o.p_hat, opp));
    }
    let mut eps_cos_parts = Vec::new();
    let mut eps_hemi_parts = Vec::new();
    let mut eta_parts = Vec::new();
    let mut sym_parts = Vec::new();
    let mut opp_parts = Vec::new();
    let mut opp_complete = opposite.is_some();
    let mut by_combo: BTreeMap<u32, Vec<ProbSeries>> = BTreeMap::new();
    let mut shortest = usize::MAX;
    let mut too_short = None;
    for ((combo, _), points) in &sweeps {
        let series = ProbSeries::from_pairs(points.iter().map(|(a, p, _)| (*a, *p)).collect())?;
        let n = series.len();
        shortest = shortest.min(n);
        eps_cos_parts.push((region_parsing_error(&series, Reference::Cos)?, n));
        eps_hemi_parts.push((
            region_parsing_error(&series, Reference::Hemi(options.hemi_boundary))?,
            n,
        ));
        match noise(&series, &options.filter) {
            Ok(v) => eta_parts.push((v, n)),
            Err(MetricsError::SeriesTooShort { len, .. }) => too_short = Some(len),
            Err(e) => return Err(e.into()),
        }
        if let Ok(v) = sym_consistency(&series) {
            sym_parts.push((v, mirrored_pairs(&series)));
        }
        if points.iter().all(|(_, _, q)| q.is_some()) {
            let opp = ProbSeries::from_pairs(
                points
                    .iter()
                    .map(|(a, _, q)| (*a, q.expect("checked")))
                    .collect(),
            )?;
            opp_parts.push((opp_consistency(&series, &opp)?, n));
        } else {
            opp_complete = false;
        }
        by_combo.entry(*combo).or_default().push(series);
    }

    let complete = shortest >= expected;
    if !complete {
        warnings.push(EvalWarning::IncompleteSweep {
            group: key.to_string(),
            expected,
            shortest,
        });
    }
    if let Some(len) = too_short {
        warnings.push(EvalWarning::ShortSweep {
            group: key.to_string(),
            len,
        });
    }
    let sigmas: Option<Vec<f64>> = by_combo
        .values()
        .map(|variants| std_dev(variants).ok())
        .collect();
    let sigma = sigmas.map(|s| s.iter().sum::<f64>() / s.len() as f64);
    let pooled = |parts: &[(f64, usize)], ok: bool| if ok { rms_pool(parts) } else { None };

    let report = MetricReport {
        acc,
        eps_hemi: rms_pool(&eps_hemi_parts).expect("non-empty"),
        eps_cos: rms_pool(&eps_cos_parts).expect("non-empty"),
        sigma,
        eta: pooled(&eta_parts, complete && too_short.is_none()),
        c_sym: pooled(&sym_parts, complete && sym_parts.len() == sweeps.len()),
        c_opp: pooled(&opp_parts, opp_complete),
        obj_f1: obj_f1
            .get(&(base.model, base.split, base.language))
            .copied(),
        n_cases: obs.len(),
    };

    let mut buckets: BTreeMap<i64, (f64, f64, f64, usize)> = BTreeMap::new();
    for (theta, o) in thetas.iter().zip(obs) {
        let k = (theta.degrees() / ANGLE_TOL).round() as i64;
        let e = buckets.entry(k).or_insert((theta.degrees(), 0.0, 0.0, 0));
        e.1 += o.p;
        e.2 += o.p_hat;
        e.3 += 1;
    }
    let curve = buckets
        .into_values()
        .map(|(theta, p, p_hat, n)| {
            let t = DeviationAngle::new(theta);
            CurvePoint {
                theta,
                p: p / n as f64,
                p_hat: p_hat / n as f64,
                lambda_hemi: lambda_hemi(t, options.hemi_boundary),
                lambda_cos: lambda_cos(t),
            }
        })
        .collect();
    Ok(TaskOutput {
        key,
        report,
        curve,
        warnings,
    })
}
