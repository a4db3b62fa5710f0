use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};

use super::endpoint::{query_model, EndpointClient, EndpointConfig};
use super::oracle::{
    baseline_respond, oracle_respond, probe_oracle_respond, Baseline, OracleConfig,
};
use super::store::{read_responses, ResponseWriter};
use super::{HarnessError, ResponseRecord};
use crate::exec::{self, Execution};
use crate::testgen::{render_prompt, Manifest, Probe, SceneSpec, TestCase, Translations};

/// Where answers come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Responder {
    Endpoint(EndpointConfig),
    Oracle(OracleConfig),
    Baseline(Baseline),
    /// Copies records from a previously written response file.
    Replay {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteOptions {
    /// Keep records already in the output file and only answer the rest.
    pub resume: bool,
    /// Directory holding `<scene id>.png`; without it endpoint queries are text-only.
    pub image_dir: Option<PathBuf>,
    pub exec: Execution,
    /// Also answer the object-existence probes.
    pub include_probes: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            resume: false,
            image_dir: None,
            exec: Execution::default(),
            include_probes: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteSummary {
    /// Queries in the suite, cases plus probes.
    pub total: usize,
    pub written: usize,
    /// Already present in the output when resuming.
    pub skipped: usize,
    /// Failed queries by error class.
    pub errors: BTreeMap<String, usize>,
}

impl SuiteSummary {
    pub fn error_count(&self) -> usize {
        self.errors.values().sum()
    }
}

enum Item<'a> {
    Case(&'a TestCase, &'a SceneSpec),
    Probe(&'a Probe),
}

struct Query<'a> {
    id: &'a str,
    scene_id: &'a str,
    language: &'a str,
    prompt: String,
    item: Item<'a>,
}

fn collect_queries<'a>(
    manifest: &'a Manifest,
    translations: &Translations,
    include_probes: bool,
) -> Result<Vec<Query<'a>>, HarnessError> {
    let scenes = manifest.scene_index();
    let mut out = Vec::with_capacity(manifest.cases.len() + manifest.probes.len());
    for case in &manifest.cases {
        let scene_id = case.scene.id();
        let scene = *scenes
            .get(scene_id.as_str())
            .ok_or(HarnessError::UnknownScene(scene_id))?;
        let prompt = render_prompt(case, scene, translations.get(&case.language)?)?;
        out.push(Query {
            id: &case.id,
            scene_id: &scene.id,
            language: &case.language,
            prompt,
            item: Item::Case(case, scene),
        });
    }
    if include_probes {
        for probe in &manifest.probes {
            out.push(Query {
                id: &probe.id,
                scene_id: &probe.scene_id,
                language: &probe.language,
                prompt: probe.prompt.clone(),
                item: Item::Probe(probe),
            });
        }
    }
    Ok(out)
}

/// Answers every case (and probe) of `manifest`, appending records to `output`.
///
/// Per-query failures are counted in the summary; the run aborts only on an
/// authentication failure or when the output cannot be written.
pub fn run_suite(
    manifest: &Manifest,
    translations: &Translations,
    responder: &Responder,
    output: &Path,
    options: &SuiteOptions,
) -> Result<SuiteSummary, HarnessError> {
    let queries = collect_queries(manifest, translations, options.include_probes)?;
    let mut done: HashSet<String> = HashSet::new();
    let mut writer = if options.resume && output.exists() {
        done.extend(read_responses(output)?.into_iter().map(|r| r.case_id));
        ResponseWriter::append(output)?
    } else {
        ResponseWriter::create(output)?
    };
    let mut seen = HashSet::new();
    let pending: Vec<&Query> = queries
        .iter()
        .filter(|q| !done.contains(q.id) && seen.insert(q.id))
        .collect();
    let mut summary = SuiteSummary {
        total: queries.len(),
        skipped: queries.len() - pending.len(),
        ..Default::default()
    };
    let mut record = |summary: &mut SuiteSummary, result: Result<ResponseRecord, HarnessError>| {
        match result {
            Ok(r) => {
                writer.write(&r)?;
                summary.written += 1;
            }
            Err(e) => *summary.errors.entry(e.kind().to_string()).or_default() += 1,
        }
        Ok::<(), HarnessError>(())
    };

    match responder {
        Responder::Endpoint(config) => {
            let client = EndpointClient::new(config.clone())?;
            run_endpoint(&client, &pending, translations, options, |result| {
                record(&mut summary, result)
            })?;
        }
        Responder::Oracle(oracle) => {
            oracle.validate()?;
            let answers = exec::map(options.exec, &pending, |q| match q.item {
                Item::Case(case, scene) => oracle_respond(case, scene, oracle),
                Item::Probe(probe) => Ok(probe_oracle_respond(probe, oracle)),
            });
            for a in answers {
                record(&mut summary, a)?;
            }
        }
        Responder::Baseline(baseline) => {
            let answers = exec::map(options.exec, &pending, |q| {
                Ok(baseline_respond(q.id, baseline))
            });
            for a in answers {
                record(&mut summary, a)?;
            }
        }
        Responder::Replay { path } => {
            let mut recorded: HashMap<String, ResponseRecord> = HashMap::new();
            for r in read_responses(path)? {
                recorded.entry(r.case_id.clone()).or_insert(r);
            }
            for q in &pending {
                let answer = recorded
                    .remove(q.id)
                    .ok_or_else(|| HarnessError::NotInReplay(q.id.to_string()));
                record(&mut summary, answer)?;
            }
        }
    }
    Ok(summary)
}

/// Bounded worker pool feeding a single writer over a channel.
fn run_endpoint(
    client: &EndpointClient,
    pending: &[&Query],
    translations: &Translations,
    options: &SuiteOptions,
    mut sink: impl FnMut(Result<ResponseRecord, HarnessError>) -> Result<(), HarnessError>,
) -> Result<(), HarnessError> {
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let workers = client.config().concurrency.min(pending.len().max(1));
    std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel();
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, stop) = (&next, &stop);
            scope.spawn(move || loop {
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(q) = pending.get(i) else { break };
                let result = translations
                    .get(q.language)
                    .map_err(HarnessError::from)
                    .and_then(|bundle| {
                        let image = options
                            .image_dir
                            .as_ref()
                            .map(|d| d.join(format!("{}.png", q.scene_id)));
                        query_model(client, q.id, &q.prompt, image.as_deref(), bundle)
                    });
                if matches!(result, Err(HarnessError::AuthFailure(_))) {
                    stop.store(true, Ordering::Relaxed);
                }
                if tx.send(result).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut fatal = None;
        for result in rx {
            if fatal.is_some() {
                continue;
            }
            match result {
                Err(e @ HarnessError::AuthFailure(_)) => {
                    stop.store(true, Ordering::Relaxed);
                    fatal = Some(e);
                }
                other => {
                    if let Err(e) = sink(other) {
                        stop.store(true, Ordering::Relaxed);
                        fatal = Some(e);
                    }
                }
            }
        }
        fatal.map_or(Ok(()), Err)
    })
}

#[cfg(test)]
mod tests {
    use super::super::endpoint::mock::{completion, serve};
    use super::*;
    use crate::geometry::ForSpec;
    use crate::harness::OracleShape;
    use crate::testgen::{GenerationConfig, Split, Variant};

    fn small() -> Manifest {
        let config = GenerationConfig {
            angle_step: 90,
            variants: Some(vec![Variant::Base]),
            ..GenerationConfig::new(Split::Ball)
        };
        Manifest::generate(&config, &Translations::builtin()).unwrap()
    }

    fn oracle() -> Responder {
        Responder::Oracle(OracleConfig::noiseless(
            ForSpec::EGOCENTRIC,
            OracleShape::Cosine,
        ))
    }

    #[test]
    fn oracle_suite_is_complete_and_deterministic() {
        let m = small();
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
        let opts = SuiteOptions::default();
        let s = run_suite(&m, &Translations::builtin(), &oracle(), &a, &opts).unwrap();
        assert_eq!(s.total, 16 + 8);
        assert_eq!(s.written, 24);
        assert_eq!(s.error_count(), 0);
        let seq = SuiteOptions {
            exec: Execution::Sequential,
            ..opts
        };
        run_suite(&m, &Translations::builtin(), &oracle(), &b, &seq).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn resume_skips_completed_cases() {
        let m = small();
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("r.jsonl");
        let opts = SuiteOptions {
            include_probes: false,
            ..Default::default()
        };
        run_suite(&m, &Translations::builtin(), &oracle(), &out, &opts).unwrap();
        let resumed = SuiteOptions {
            resume: true,
            ..opts
        };
        let s = run_suite(&m, &Translations::builtin(), &oracle(), &out, &resumed).unwrap();
        assert_eq!((s.written, s.skipped), (0, 16));
        assert_eq!(read_responses(&out).unwrap().len(), 16);
    }

    #[test]
    fn replay_is_byte_identical_and_fills_only_missing() {
        let m = small();
        let dir = tempfile::tempdir().unwrap();
        let first = dir.path().join("first.jsonl");
        let copy = dir.path().join("copy.jsonl");
        run_suite(
            &m,
            &Translations::builtin(),
            &oracle(),
            &first,
            &SuiteOptions::default(),
        )
        .unwrap();
        let replay = Responder::Replay {
            path: first.clone(),
        };
        let s = run_suite(
            &m,
            &Translations::builtin(),
            &replay,
            &copy,
            &SuiteOptions::default(),
        )
        .unwrap();
        assert_eq!(s.error_count(), 0);
        assert_eq!(
            std::fs::read(&first).unwrap(),
            std::fs::read(&copy).unwrap()
        );

        // a superset manifest: the replayed file lacks the new cases
        let bigger = Manifest::generate(
            &GenerationConfig {
                angle_step: 45,
                variants: Some(vec![Variant::Base]),
                ..GenerationConfig::new(Split::Ball)
            },
            &Translations::builtin(),
        )
        .unwrap();
        let opts = SuiteOptions {
            include_probes: false,
            ..Default::default()
        };
        let out = dir.path().join("partial.jsonl");
        let s = run_suite(&bigger, &Translations::builtin(), &replay, &out, &opts).unwrap();
        assert_eq!(s.written, 16);
        assert_eq!(s.errors["not-in-replay"], 16);
    }

    #[test]
    fn baseline_suite() {
        let m = small();
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("r.jsonl");
        let s = run_suite(
            &m,
            &Translations::builtin(),
            &Responder::Baseline(Baseline::AlwaysYes),
            &out,
            &SuiteOptions::default(),
        )
        .unwrap();
        assert_eq!(s.written, 24);
        assert!(read_responses(&out).unwrap().iter().all(|r| r.p_yes == 1.0));
    }

    fn endpoint(url: &str, concurrency: usize) -> Responder {
        Responder::Endpoint(EndpointConfig {
            auth_env: "FRAME_EVAL_TEST_UNSET_TOKEN".into(),
            backoff_base_ms: 1,
            backoff_cap_ms: 2,
            max_retries: 3,
            concurrency,
            ..EndpointConfig::new(url, "mock")
        })
    }

    #[test]
    fn endpoint_suite_survives_transient_failures() {
        let m = small();
        let mut script = vec![(503, "{}".to_string()); 3];
        script.push((200, completion(&[("Yes", -0.2), ("No", -1.7)], "Yes")));
        let server = serve(script);
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("r.jsonl");
        let opts = SuiteOptions {
            include_probes: false,
            ..Default::default()
        };
        let s = run_suite(
            &m,
            &Translations::builtin(),
            &endpoint(&server.url, 1),
            &out,
            &opts,
        )
        .unwrap();
        assert_eq!((s.written, s.error_count()), (16, 0));
        let records = read_responses(&out).unwrap();
        assert_eq!(records[0].attempts, 4);
        assert!(records[1..].iter().all(|r| r.attempts == 1));
        assert!(records.iter().all(|r| r.timestamp.is_some()));
    }

    #[test]
    fn endpoint_suite_counts_errors_and_aborts_on_auth() {
        let m = small();
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("r.jsonl");
        let server = serve(vec![(200, completion(&[], "Perhaps"))]);
        let opts = SuiteOptions::default();
        let s = run_suite(
            &m,
            &Translations::builtin(),
            &endpoint(&server.url, 8),
            &out,
            &opts,
        )
        .unwrap();
        assert_eq!(s.errors["answer-unrecognized"], 24);
        assert_eq!(s.written, 0);

        let server = serve(vec![(403, "{}".to_string())]);
        let e = run_suite(
            &m,
            &Translations::builtin(),
            &endpoint(&server.url, 2),
            &out,
            &opts,
        )
        .unwrap_err();
        assert!(matches!(e, HarnessError::AuthFailure(_)));
        assert!(server.requests.lock().unwrap().len() <= 2);
    }

    #[test]
    fn missing_images_are_per_case_errors() {
        let m = small();
        let dir = tempfile::tempdir().unwrap();
        let server = serve(vec![(200, completion(&[("Yes", -0.1)], "Yes"))]);
        let opts = SuiteOptions {
            image_dir: Some(dir.path().join("renders")),
            include_probes: false,
            ..Default::default()
        };
        let s = run_suite(
            &m,
            &Translations::builtin(),
            &endpoint(&server.url, 2),
            &dir.path().join("r.jsonl"),
            &opts,
        )
        .unwrap();
        assert_eq!(s.errors["missing-image"], 16);
    }
}
