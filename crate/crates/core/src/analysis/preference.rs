use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{AnalysisError, GroupKey, RelationKey};
use crate::geometry::{ForSpec, Transform};
use crate::metrics::MetricReport;
use crate::testgen::{Perspective, Split};

/// Minimum gap in aggregated ε^cos between the best and second-best candidate.
pub const DEFAULT_THRESHOLD: f64 = 0.05;

// guards exact-threshold gaps against rounding
const GAP_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dimension {
    Transform,
    FrameOfReference,
}

/// The reports a preference is decided over.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Scope {
    pub model: String,
    pub split: Split,
    pub perspective: Perspective,
    pub language: String,
}

impl Scope {
    fn key(&self, relation: RelationKey, reference: ForSpec) -> GroupKey {
        GroupKey {
            model: self.model.clone(),
            split: self.split,
            perspective: self.perspective,
            relation,
            language: self.language.clone(),
            reference,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceCall {
    pub dimension: Dimension,
    pub scope: Scope,
    /// Candidate name to aggregated ε^cos.
    pub scores: BTreeMap<String, f64>,
    pub winner: Option<String>,
    /// Second-best minus best.
    pub margin: f64,
    pub threshold: f64,
}

/// Picks the lowest score when it beats the runner-up by at least `threshold`.
pub fn decide(
    dimension: Dimension,
    scope: Scope,
    scores: BTreeMap<String, f64>,
    threshold: f64,
) -> PreferenceCall {
    let mut ranked: Vec<(&String, f64)> = scores.iter().map(|(k, v)| (k, *v)).collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(b.0)));
    let margin = match ranked.as_slice() {
        [best, second, ..] => second.1 - best.1,
        _ => 0.0,
    };
    let winner = (ranked.len() >= 2 && margin + GAP_EPS >= threshold).then(|| ranked[0].0.clone());
    PreferenceCall {
        dimension,
        scope,
        scores,
        winner,
        margin,
        threshold,
    }
}

fn scores(
    reports: &BTreeMap<GroupKey, MetricReport>,
    scope: &Scope,
    candidates: &[(&str, ForSpec)],
) -> Result<BTreeMap<String, f64>, AnalysisError> {
    candidates
        .iter()
        .map(|(name, spec)| {
            reports
                .get(&scope.key(RelationKey::Aggregated, *spec))
                .map(|r| (name.to_string(), r.eps_cos))
                .ok_or_else(|| {
                    AnalysisError::MissingCandidate(format!("{spec} for {}", scope.model))
                })
        })
        .collect()
}

fn check_matched(
    reports: &BTreeMap<GroupKey, MetricReport>,
    scope: &Scope,
    candidates: &[(&str, ForSpec)],
) -> Result<(), AnalysisError> {
    let counts: BTreeSet<usize> = candidates
        .iter()
        .filter_map(|(_, s)| reports.get(&scope.key(RelationKey::Aggregated, *s)))
        .map(|r| r.n_cases)
        .collect();
    if counts.len() > 1 {
        return Err(AnalysisError::MismatchedCases(format!(
            "candidates for {} cover different case counts {counts:?}",
            scope.model
        )));
    }
    Ok(())
}

const TRANSFORMS: [(&str, ForSpec); 3] = [
    (
        "translated",
        ForSpec::Camera {
            transform: Transform::Translated,
        },
    ),
    (
        "rotated",
        ForSpec::Camera {
            transform: Transform::Rotated,
        },
    ),
    (
        "reflected",
        ForSpec::Camera {
            transform: Transform::Reflected,
        },
    ),
];

const FRAMES: [(&str, ForSpec); 3] = [
    ("egocentric", ForSpec::EGOCENTRIC),
    ("intrinsic", ForSpec::INTRINSIC),
    ("addressee", ForSpec::ADDRESSEE),
];

/// Preferred camera-to-relatum transform over the aggregated camera-origin reports.
pub fn preferred_transform(
    reports: &BTreeMap<GroupKey, MetricReport>,
    scope: &Scope,
    threshold: f64,
) -> Result<PreferenceCall, AnalysisError> {
    let s = scores(reports, scope, &TRANSFORMS)?;
    check_matched(reports, scope, &TRANSFORMS)?;
    Ok(decide(Dimension::Transform, scope.clone(), s, threshold))
}

/// Preferred frame among egocentric, intrinsic and addressee-centred, with the relative
/// frames under the reflected transform.
pub fn preferred_for(
    reports: &BTreeMap<GroupKey, MetricReport>,
    scope: &Scope,
    threshold: f64,
) -> Result<PreferenceCall, AnalysisError> {
    let s = scores(reports, scope, &FRAMES)?;
    check_matched(reports, scope, &FRAMES)?;
    Ok(decide(
        Dimension::FrameOfReference,
        scope.clone(),
        s,
        threshold,
    ))
}

/// Every call the reports support: transform preferences on camera-perspective prompts and
/// frame preferences on prompts without a perspective.
pub fn preference_calls(
    reports: &BTreeMap<GroupKey, MetricReport>,
    threshold: f64,
) -> Vec<PreferenceCall> {
    let scopes: BTreeSet<Scope> = reports
        .keys()
        .map(|k| Scope {
            model: k.model.clone(),
            split: k.split,
            perspective: k.perspective,
            language: k.language.clone(),
        })
        .collect();
    let mut calls = Vec::new();
    for scope in scopes {
        let call = match scope.perspective {
            Perspective::Cam => preferred_transform(reports, &scope, threshold),
            Perspective::Nop => preferred_for(reports, &scope, threshold),
            _ => continue,
        };
        if let Ok(call) = call {
            calls.push(call);
        }
    }
    calls
}

/// One metric of a perspective prompt next to the same metric without a perspective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub perspective: Perspective,
    pub reference: ForSpec,
    pub metric: String,
    pub value: f64,
    pub delta: f64,
}

fn matched_reference(p: Perspective) -> Option<ForSpec> {
    match p {
        Perspective::Cam => Some(ForSpec::EGOCENTRIC),
        Perspective::Rel => Some(ForSpec::INTRINSIC),
        Perspective::Add => Some(ForSpec::ADDRESSEE),
        Perspective::Nop => None,
    }
}

/// Each explicit-perspective report, measured in the frame the prompt names, against the
/// unprompted report in that same frame. Metrics absent on either side are skipped.
pub fn perspective_delta(
    reports: &BTreeMap<GroupKey, MetricReport>,
    model: &str,
    split: Split,
    language: &str,
    relation: RelationKey,
) -> Result<Vec<DeltaRow>, AnalysisError> {
    let mut rows = Vec::new();
    for perspective in [Perspective::Cam, Perspective::Rel, Perspective::Add] {
        let reference = matched_reference(perspective).expect("explicit perspective");
        let key = |p| GroupKey {
            model: model.to_string(),
            split,
            perspective: p,
            relation,
            language: language.to_string(),
            reference,
        };
        let Some(with) = reports.get(&key(perspective)) else {
            continue;
        };
        let without = reports.get(&key(Perspective::Nop)).ok_or_else(|| {
            AnalysisError::MismatchedCases(format!(
                "no {} counterpart for {perspective} in {reference}",
                Perspective::Nop
            ))
        })?;
        if with.n_cases != without.n_cases {
            return Err(AnalysisError::MismatchedCases(format!(
                "{perspective} has {} cases, {} has {}",
                with.n_cases,
                Perspective::Nop,
                without.n_cases
            )));
        }
        for ((metric, value), (_, base)) in with.fields().into_iter().zip(without.fields()) {
            if let (Some(v), Some(b)) = (value, base) {
                rows.push(DeltaRow {
                    perspective,
                    reference,
                    metric: metric.to_string(),
                    value: v,
                    delta: v - b,
                });
            }
        }
    }
    if rows.is_empty() {
        return Err(AnalysisError::MismatchedCases(format!(
            "no explicit-perspective reports for {model}"
        )));
    }
    Ok(rows)
}
