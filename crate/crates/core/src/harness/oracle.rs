use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{AnswerSource, HarnessError, ResponseRecord};
use crate::geometry::{deviation_angle, lambda_cos, lambda_hemi, resolve_frame, Boundary, ForSpec};
use crate::testgen::{Probe, SceneSpec, TestCase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleShape {
    Cosine,
    Hemisphere,
}

impl OracleShape {
    fn label(self) -> &'static str {
        match self {
            OracleShape::Cosine => "cos",
            OracleShape::Hemisphere => "hemi",
        }
    }
}

/// A synthetic responder that answers as an ideal model committed to one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub for_spec: ForSpec,
    pub shape: OracleShape,
    pub noise_std: f64,
    pub seed: u64,
}

impl OracleConfig {
    pub fn noiseless(for_spec: ForSpec, shape: OracleShape) -> Self {
        Self {
            for_spec,
            shape,
            noise_std: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(0.0..0.5).contains(&self.noise_std) {
            return Err(HarnessError::InvalidConfig(format!(
                "oracle noise std {} outside [0, 0.5)",
                self.noise_std
            )));
        }
        Ok(())
    }

    pub fn model_id(&self) -> String {
        format!("oracle:{}-{}", self.for_spec, self.shape.label())
    }
}

/// Reference responders used as baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Baseline {
    AlwaysYes,
    /// `P(Yes)` drawn uniformly from [0, 1] per query.
    Uniform {
        seed: u64,
    },
}

impl Baseline {
    pub fn model_id(&self) -> String {
        match self {
            Baseline::AlwaysYes => "baseline:always-yes".into(),
            Baseline::Uniform { .. } => "baseline:random".into(),
        }
    }
}

/// Per-query generator, independent of evaluation order.
fn query_rng(seed: u64, id: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ crate::fnv1a(id.as_bytes()))
}

fn synthetic(id: &str, model_id: String, p_yes: f64) -> ResponseRecord {
    ResponseRecord {
        case_id: id.to_string(),
        model_id,
        p_yes,
        p_no: 1.0 - p_yes,
        raw_text: if p_yes > 0.5 {
            "Yes".into()
        } else {
            "No".into()
        },
        answer_source: AnswerSource::Oracle,
        timestamp: None,
        attempts: 1,
    }
}

/// Answers `case` with the oracle's response shape evaluated at the case's deviation angle
/// under the oracle's frame, plus optional Gaussian noise.
pub fn oracle_respond(
    case: &TestCase,
    scene: &SceneSpec,
    oracle: &OracleConfig,
) -> Result<ResponseRecord, HarnessError> {
    oracle.validate()?;
    let geometry = scene.geometry();
    let frame = resolve_frame(&geometry, oracle.for_spec)?;
    let theta =
        deviation_angle(&geometry, case.relation, &frame)?.snapped(1.0, crate::metrics::ANGLE_TOL);
    let clean = match oracle.shape {
        OracleShape::Cosine => lambda_cos(theta),
        OracleShape::Hemisphere => lambda_hemi(theta, Boundary::Open),
    };
    let p = if oracle.noise_std > 0.0 {
        let normal = Normal::new(0.0, oracle.noise_std).expect("validated std");
        (clean + normal.sample(&mut query_rng(oracle.seed, &case.id))).clamp(0.0, 1.0)
    } else {
        clean
    };
    Ok(synthetic(&case.id, oracle.model_id(), p))
}

/// The oracle sees every object correctly.
pub fn probe_oracle_respond(probe: &Probe, oracle: &OracleConfig) -> ResponseRecord {
    synthetic(
        &probe.id,
        oracle.model_id(),
        if probe.present { 1.0 } else { 0.0 },
    )
}

/// Baseline answer for any query id.
pub fn baseline_respond(id: &str, baseline: &Baseline) -> ResponseRecord {
    let p = match baseline {
        Baseline::AlwaysYes => 1.0,
        Baseline::Uniform { seed } => query_rng(*seed, id).random::<f64>(),
    };
    synthetic(id, baseline.model_id(), p)
}
