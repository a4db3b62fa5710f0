//! Acceptance suite. Runs every primary criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use frame_eval::analysis::{
    decide, evaluate, preference_calls, preferred_for, preferred_transform, Dimension, EvalOptions,
    GroupKey, PreferenceCall, RelationKey, Scope, DEFAULT_THRESHOLD,
};
use frame_eval::geometry::{lambda_cos, Boundary, DeviationAngle, ForSpec, Transform};
use frame_eval::harness::{
    read_responses, run_suite, Baseline, OracleConfig, OracleShape, Responder, ResponseRecord,
    SuiteOptions,
};
use frame_eval::metrics::{
    self, normalize, opp_consistency, region_parsing_error, std_dev, sym_consistency,
    ButterworthConfig, MetricReport, ProbSeries, Reference,
};
use frame_eval::testgen::{
    enumerate_cases, AngleMode, GenerationConfig, Manifest, Perspective, Split, Translations,
    Variant,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn near(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol
}

fn x100(v: f64) -> f64 {
    v * 100.0
}

fn respond(
    manifest: &Manifest,
    responder: &Responder,
    dir: &Path,
    name: &str,
) -> Vec<ResponseRecord> {
    let out = dir.join(name);
    run_suite(
        manifest,
        &Translations::builtin(),
        responder,
        &out,
        &SuiteOptions::default(),
    )
    .expect("suite runs");
    read_responses(&out).expect("responses readable")
}

fn ball_cam_aggregate(reports: &BTreeMap<GroupKey, MetricReport>, model: &str) -> MetricReport {
    reports[&GroupKey {
        model: model.into(),
        split: Split::Ball,
        perspective: Perspective::Cam,
        relation: RelationKey::Aggregated,
        language: "en".into(),
        reference: ForSpec::EGOCENTRIC,
    }]
        .clone()
}

fn ball_manifest() -> Manifest {
    Manifest::generate(
        &GenerationConfig::new(Split::Ball),
        &Translations::builtin(),
    )
    .unwrap()
}

fn always_yes() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let manifest = ball_manifest();
    let start = Instant::now();
    let responses = respond(
        &manifest,
        &Responder::Baseline(Baseline::AlwaysYes),
        dir.path(),
        "yes.jsonl",
    );
    let base = EvalOptions {
        candidates: vec![ForSpec::EGOCENTRIC],
        ..Default::default()
    };
    let open = evaluate(&responses, &manifest, &base).unwrap();
    let closed = evaluate(
        &responses,
        &manifest,
        &EvalOptions {
            hemi_boundary: Boundary::Closed,
            ..base
        },
    )
    .unwrap();
    let elapsed = start.elapsed();
    let r = ball_cam_aggregate(&open.reports, "baseline:always-yes");
    let hemi = ball_cam_aggregate(&closed.reports, "baseline:always-yes").eps_hemi;
    let got = [
        ("acc", x100(r.acc), 47.2),
        ("eps_cos", x100(r.eps_cos), 61.2),
        ("sigma", x100(r.sigma.unwrap_or(f64::NAN)), 0.0),
        ("eta", x100(r.eta.unwrap_or(f64::NAN)), 0.0),
        ("c_sym", x100(r.c_sym.unwrap_or(f64::NAN)), 0.0),
        ("c_opp", x100(r.c_opp.unwrap_or(f64::NAN)), 100.0),
        ("eps_hemi(closed)", x100(hemi), 68.7),
    ];
    let ok = got.iter().all(|(_, g, w)| near(*g, *w, 0.1)) && elapsed < Duration::from_secs(1);
    let detail = got
        .iter()
        .map(|(n, g, _)| format!("{n}={g:.2}"))
        .chain([
            format!("obj_f1={:.1}", x100(r.obj_f1.unwrap_or(f64::NAN))),
            format!("{elapsed:.2?}"),
        ])
        .collect::<Vec<_>>()
        .join(" ");
    check(ok, detail)
}

fn random_baseline() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let manifest = ball_manifest();
    let opts = EvalOptions {
        candidates: vec![ForSpec::EGOCENTRIC],
        ..Default::default()
    };
    let start = Instant::now();
    let mut rows = Vec::new();
    for seed in 0..30u64 {
        let responses = respond(
            &manifest,
            &Responder::Baseline(Baseline::Uniform { seed }),
            dir.path(),
            &format!("random-{seed}.jsonl"),
        );
        let ev = evaluate(&responses, &manifest, &opts).unwrap();
        rows.push(ball_cam_aggregate(&ev.reports, "baseline:random"));
    }
    let elapsed = start.elapsed();
    let refs: Vec<&MetricReport> = rows.iter().collect();
    let mean = MetricReport::mean(&refs).unwrap();
    let got = [
        ("acc", x100(mean.acc), 50.9),
        ("eps_cos", x100(mean.eps_cos), 46.3),
        ("eps_hemi", x100(mean.eps_hemi), 58.7),
        ("sigma", x100(mean.sigma.unwrap_or(f64::NAN)), 28.3),
        ("c_sym", x100(mean.c_sym.unwrap_or(f64::NAN)), 42.5),
        ("c_opp", x100(mean.c_opp.unwrap_or(f64::NAN)), 44.2),
    ];
    let ok = got.iter().all(|(_, g, w)| near(*g, *w, 5.0)) && elapsed < Duration::from_secs(10);
    let detail = got
        .iter()
        .map(|(n, g, w)| format!("{n}={g:.1}(ref {w})"))
        .chain([
            format!("eta={:.1}", x100(mean.eta.unwrap_or(f64::NAN))),
            format!("obj_f1={:.1}", x100(mean.obj_f1.unwrap_or(f64::NAN))),
            format!("{elapsed:.2?}"),
        ])
        .collect::<Vec<_>>()
        .join(" ");
    check(ok, detail)
}

struct OracleRun {
    ego_eps_cos: f64,
    transform: PreferenceCall,
    frame: PreferenceCall,
}

/// generate -> write manifest -> query -> read back -> eval -> preference calls
fn oracle_pipeline(noise_std: f64, seed: u64, dir: &Path) -> OracleRun {
    let oracle = Responder::Oracle(OracleConfig {
        for_spec: ForSpec::EGOCENTRIC,
        shape: OracleShape::Cosine,
        noise_std,
        seed,
    });
    let configs = [
        GenerationConfig::new(Split::Ball),
        GenerationConfig {
            variants: Some(vec![Variant::Base, Variant::Jitter(1)]),
            perspectives: Some(vec![Perspective::Nop]),
            ..GenerationConfig::new(Split::Car)
        },
    ];
    let mut reports = BTreeMap::new();
    for (i, config) in configs.iter().enumerate() {
        let path = dir.join(format!("manifest-{i}.json"));
        Manifest::generate(config, &Translations::builtin())
            .unwrap()
            .write(&path)
            .unwrap();
        let manifest = Manifest::read(&path).unwrap();
        let responses = respond(&manifest, &oracle, dir, &format!("oracle-{i}-{seed}.jsonl"));
        reports.extend(
            evaluate(&responses, &manifest, &EvalOptions::default())
                .unwrap()
                .reports,
        );
    }
    let model = match &oracle {
        Responder::Oracle(o) => o.model_id(),
        _ => unreachable!(),
    };
    let scope = |split, perspective| Scope {
        model: model.clone(),
        split,
        perspective,
        language: "en".into(),
    };
    let ego_eps_cos = reports
        .iter()
        .filter(|(k, _)| k.reference == ForSpec::EGOCENTRIC && k.perspective == Perspective::Cam)
        .map(|(_, r)| r.eps_cos)
        .fold(0.0, f64::max);
    OracleRun {
        ego_eps_cos,
        transform: preferred_transform(
            &reports,
            &scope(Split::Ball, Perspective::Cam),
            DEFAULT_THRESHOLD,
        )
        .unwrap(),
        frame: preferred_for(
            &reports,
            &scope(Split::Car, Perspective::Nop),
            DEFAULT_THRESHOLD,
        )
        .unwrap(),
    }
}

fn oracle_recovery() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let clean = oracle_pipeline(0.0, 0, dir.path());
    let winners = |r: &OracleRun| (r.transform.winner.clone(), r.frame.winner.clone());
    let want = (
        Some("reflected".to_string()),
        Some("egocentric".to_string()),
    );
    let mut ok = x100(clean.ego_eps_cos) < 1.0 && winners(&clean) == want;
    let mut stable = 0;
    for seed in 1..=10 {
        let noisy = oracle_pipeline(0.1, seed, dir.path());
        if winners(&noisy) == want {
            stable += 1;
        }
    }
    ok &= stable == 10;
    check(
        ok,
        format!(
            "eps_cos={:.2e} transform={:?} (margin {:.1}) frame={:?} (margin {:.1}) noisy-stable={stable}/10",
            x100(clean.ego_eps_cos),
            clean.transform.winner,
            x100(clean.transform.margin),
            clean.frame.winner,
            x100(clean.frame.margin),
        ),
    )
}

fn reference_calls() -> Outcome {
    let transform: [([f64; 3], Option<&str>); 9] = [
        ([40.5, 44.2, 43.9], None),
        ([44.0, 42.3, 43.0], None),
        ([52.3, 50.5, 52.1], None),
        ([39.5, 47.9, 33.0], Some("reflected")),
        ([34.5, 49.0, 20.7], Some("reflected")),
        ([43.4, 43.2, 25.7], Some("reflected")),
        ([47.3, 50.1, 20.0], Some("reflected")),
        ([44.0, 49.1, 22.4], Some("reflected")),
        ([49.7, 55.5, 27.4], Some("reflected")),
    ];
    let frame: [([f64; 3], Option<&str>); 9] = [
        ([41.8, 42.3, 42.3], None),
        ([43.5, 41.7, 41.8], None),
        ([47.7, 48.4, 47.1], None),
        ([21.4, 49.8, 44.4], Some("egocentric")),
        ([20.8, 45.7, 43.1], Some("egocentric")),
        ([24.0, 51.1, 48.9], Some("egocentric")),
        ([15.8, 54.3, 51.4], Some("egocentric")),
        ([26.7, 51.5, 51.3], Some("egocentric")),
        ([35.1, 50.9, 51.3], Some("egocentric")),
    ];
    let report = |eps: f64| MetricReport {
        acc: 0.5,
        eps_hemi: 0.5,
        eps_cos: eps / 100.0,
        sigma: None,
        eta: None,
        c_sym: None,
        c_opp: None,
        obj_f1: None,
        n_cases: 1,
    };
    let mut matched = 0;
    let mut total = 0;
    for (rows, dim) in [
        (transform, Dimension::Transform),
        (frame, Dimension::FrameOfReference),
    ] {
        for (i, (v, want)) in rows.iter().enumerate() {
            let scope = Scope {
                model: format!("row{i}"),
                split: Split::Ball,
                perspective: if dim == Dimension::Transform {
                    Perspective::Cam
                } else {
                    Perspective::Nop
                },
                language: "en".into(),
            };
            let specs = match dim {
                Dimension::Transform => Transform::ALL.map(|t| ForSpec::Camera { transform: t }),
                Dimension::FrameOfReference => {
                    [ForSpec::EGOCENTRIC, ForSpec::INTRINSIC, ForSpec::ADDRESSEE]
                }
            };
            let reports: BTreeMap<GroupKey, MetricReport> = specs
                .iter()
                .zip(v)
                .map(|(spec, eps)| {
                    (
                        GroupKey {
                            model: scope.model.clone(),
                            split: scope.split,
                            perspective: scope.perspective,
                            relation: RelationKey::Aggregated,
                            language: "en".into(),
                            reference: *spec,
                        },
                        report(*eps),
                    )
                })
                .collect();
            let call = match dim {
                Dimension::Transform => preferred_transform(&reports, &scope, DEFAULT_THRESHOLD),
                Dimension::FrameOfReference => preferred_for(&reports, &scope, DEFAULT_THRESHOLD),
            }
            .unwrap();
            total += 1;
            if call.winner.as_deref() == *want {
                matched += 1;
            }
            // the sweep over all scopes must produce the same call
            let swept = preference_calls(&reports, DEFAULT_THRESHOLD);
            if swept.len() != 1 || swept[0].winner != call.winner {
                matched -= 1;
            }
        }
    }
    // sanity of the bare rule on equal scores
    let equal = decide(
        Dimension::Transform,
        Scope {
            model: "eq".into(),
            split: Split::Ball,
            perspective: Perspective::Cam,
            language: "en".into(),
        },
        [("a", 0.3), ("b", 0.3), ("c", 0.3)]
            .map(|(k, v)| (k.to_string(), v))
            .into(),
        DEFAULT_THRESHOLD,
    );
    check(
        matched == 18 && total == 18 && equal.winner.is_none(),
        format!("{matched}/{total} calls reproduced"),
    )
}

fn grid36() -> Vec<f64> {
    (-17..=18).map(|k| k as f64 * 10.0).collect()
}

fn closed_forms() -> Outcome {
    let g = grid36();
    let constant = |v: f64| ProbSeries::new(g.clone(), vec![v; g.len()]).unwrap();
    let half = region_parsing_error(&constant(0.5), Reference::Cos).unwrap();
    let one = region_parsing_error(&constant(1.0), Reference::Cos).unwrap();
    let mut identity = 0.0f64;
    for k in 0..3600 {
        let t = k as f64 / 10.0 - 180.0;
        let s = lambda_cos(DeviationAngle::new(t)) + lambda_cos(DeviationAngle::new(t + 180.0));
        identity = identity.max((s - 1.0).abs());
    }
    let ideal = ProbSeries::new(
        g.clone(),
        g.iter()
            .map(|a| lambda_cos(DeviationAngle::new(*a)))
            .collect(),
    )
    .unwrap();
    let opposite = ProbSeries::new(
        g.clone(),
        g.iter()
            .map(|a| lambda_cos(DeviationAngle::new(a + 180.0)))
            .collect(),
    )
    .unwrap();
    let c_opp = opp_consistency(&ideal, &opposite).unwrap();
    let ok = near(half, (1.0f64 / 8.0).sqrt(), 1e-9)
        && near(one, (3.0f64 / 8.0).sqrt(), 1e-9)
        && identity <= 1e-15
        && c_opp <= 1e-12;
    check(
        ok,
        format!("eps_cos(0.5)={half:.12} eps_cos(1)={one:.12} opposition-residual={identity:.1e} c_opp={c_opp:.1e}"),
    )
}

fn enumeration() -> Outcome {
    let ball = enumerate_cases(&GenerationConfig::new(Split::Ball))
        .unwrap()
        .len();
    let car = enumerate_cases(&GenerationConfig::new(Split::Car))
        .unwrap()
        .len();
    let multi = GenerationConfig {
        languages: vec!["en".into(), "ta".into(), "ha".into()],
        ..GenerationConfig::new(Split::Car)
    };
    let multi_n = enumerate_cases(&multi).unwrap().len();
    let angles = multi.sweep_angles();
    let dims =
        3 * multi.combos() as usize * multi.variants().len() * 4 * multi.perspectives().len();
    let forced = GenerationConfig {
        angle_mode: AngleMode::Prototypical,
        ..GenerationConfig::new(Split::Ball)
    };
    let forced_n = enumerate_cases(&forced).unwrap().len();
    let ok = ball == 720
        && car == 57_600
        && angles == [0, 90, 180, 270]
        && multi_n == 4 * dims
        && forced_n == 4 * 5 * 4;
    check(
        ok,
        format!("ball={ball} car={car} multilingual={multi_n} (4 angles x {dims}) prototypical-ball={forced_n}"),
    )
}

fn properties() -> Outcome {
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    let strategy = (2usize..=36)
        .prop_flat_map(|half| {
            (
                proptest::collection::vec(0.0f64..=1.0, 2 * half),
                proptest::collection::vec(0.0f64..=1.0, 2 * half),
                0.01f64..10.0,
                -5.0f64..5.0,
            )
        })
        .prop_map(|(a, b, scale, shift)| (a, b, scale, shift));
    let filter = ButterworthConfig::default();
    let result = runner.run(&strategy, |(a, b, scale, shift)| {
        let n = a.len();
        let step = 360.0 / n as f64;
        let grid: Vec<f64> = (0..n).map(|k| -180.0 + step * (k + 1) as f64).collect();
        let s = ProbSeries::new(grid.clone(), a.clone()).unwrap();
        let t = ProbSeries::new(grid.clone(), b).unwrap();
        let hat = normalize(&s);
        let again = normalize(&hat);
        prop_assert_eq!(again.values(), hat.values());
        let affine: Vec<f64> = a.iter().map(|v| v * scale + shift).collect();
        let ns = normalize(&ProbSeries::new(grid.clone(), a.clone()).unwrap());
        let na = metrics::MinMax::fit(affine.iter().copied()).unwrap();
        for (x, y) in affine.iter().map(|v| na.apply(*v)).zip(ns.values()) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        let that = normalize(&t);
        let c1 = opp_consistency(&hat, &that).unwrap();
        let c2 = opp_consistency(&that, &hat).unwrap();
        prop_assert!((c1 - c2).abs() < 1e-15);
        let sym = sym_consistency(&hat).unwrap();
        let sym_r = sym_consistency(&hat.reflected()).unwrap();
        prop_assert!((sym - sym_r).abs() < 1e-12);
        let flat = ProbSeries::new(grid.clone(), vec![a[0]; n]).unwrap();
        if n >= metrics::MIN_NOISE_SAMPLES {
            prop_assert!(metrics::noise(&flat, &filter).unwrap() < 1e-12);
            let eta = metrics::noise(&hat, &filter).unwrap();
            prop_assert!((0.0..=1.0).contains(&eta));
        }
        for v in [
            region_parsing_error(&hat, Reference::Cos).unwrap(),
            region_parsing_error(&hat, Reference::Hemi(Boundary::Open)).unwrap(),
            sym,
            c1,
            std_dev(&[hat.clone(), that.clone()]).unwrap(),
        ] {
            prop_assert!((0.0..=1.0).contains(&v), "out of range: {}", v);
        }
        Ok(())
    });
    check(
        result.is_ok(),
        match result {
            Ok(()) => "1000 fuzzed series".into(),
            Err(e) => e.to_string(),
        },
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("1 always-yes baseline row", always_yes),
        ("2 random baseline, 30 seeds", random_baseline),
        ("3 oracle recovery", oracle_recovery),
        ("4 reference preference calls", reference_calls),
        ("5 closed-form metric values", closed_forms),
        ("6 enumeration counts", enumeration),
        ("7 metric property suite", properties),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        match run() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
