use std::fs;

use quick_xml::events::Event;
use quick_xml::Reader;
use spde_taylor::harness::{self, ErrorReport, ExperimentSpec, Mode};
use spde_taylor::model::{Nonlinearity, Pointwise, SpectralModel};
use spde_taylor::schemes::SchemeId;

const LADDER: [usize; 6] = [16, 32, 64, 128, 256, 512];

fn spec(model: SpectralModel, schemes: Vec<SchemeId>, paths: usize, mode: Mode) -> ExperimentSpec {
    let mut s = ExperimentSpec::new(model, schemes, LADDER.to_vec(), mode);
    s.paths = paths;
    s.seed = 11;
    s
}

fn small_report() -> ErrorReport {
    let m = SpectralModel::heat_1d(8, Nonlinearity::LinearConst(0.5)).unwrap();
    harness::run(&spec(m, vec![SchemeId::TaylorW2], 100, Mode::Local))
        .unwrap()
        .remove(0)
}

#[test]
fn emit_writes_one_csv_row_per_level() {
    let dir = tempfile::tempdir().unwrap();
    let report = small_report();
    let files = harness::emit(&report, dir.path()).unwrap();
    assert_eq!(files.len(), 3);
    let csv = fs::read_to_string(dir.path().join("taylor_w2_errors.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("level,M,h,error,stderr,paths,seed"));
    assert_eq!(lines.count(), LADDER.len());
    let summary = fs::read_to_string(dir.path().join("taylor_w2_summary.txt")).unwrap();
    assert!(summary.contains("predicted_local_order: 1.25"));
    assert!(summary.contains("slope: "));
}

#[test]
fn emit_is_byte_identical_on_rerun() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    harness::emit(&small_report(), a.path()).unwrap();
    harness::emit(&small_report(), b.path()).unwrap();
    for f in ["taylor_w2_errors.csv", "taylor_w2_summary.txt", "taylor_w2_loglog.svg"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn svg_is_well_formed_xml() {
    let svg = harness::svg_plot(&small_report());
    let mut reader = Reader::from_str(&svg);
    let (mut depth, mut circles, mut lines) = (0i32, 0, 0);
    loop {
        match reader.read_event().expect("well-formed XML") {
            Event::Start(_) => depth += 1,
            Event::End(_) => depth -= 1,
            Event::Empty(e) => {
                let name = e.name();
                if name.as_ref() == "circle" {
                    circles += 1;
                } else if name.as_ref() == "line" {
                    lines += 1;
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    assert_eq!(depth, 0);
    assert_eq!(circles, LADDER.len());
    assert_eq!(lines, 1);
}

#[test]
fn emit_reports_unwritable_path() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let err = harness::emit(&small_report(), &blocker.join("out")).unwrap_err();
    assert!(err.to_string().contains("file"), "{err}");
}

#[test]
fn coupling_hash_is_shared_by_all_schemes() {
    let m = SpectralModel::heat_1d(8, Nonlinearity::Pointwise(Pointwise::Tanh)).unwrap();
    let schemes = vec![SchemeId::ExpEuler, SchemeId::RungeKutta, SchemeId::ImplicitEuler];
    let mut s = spec(m, schemes, 100, Mode::Global);
    s.ladder = vec![4, 8, 16];
    let reports = harness::run(&s).unwrap();
    assert!(reports.iter().all(|r| r.coupling_consistent));
    assert!(reports.windows(2).all(|w| w[0].coupling_hash == w[1].coupling_hash));
    s.seed += 1;
    assert_ne!(harness::run(&s).unwrap()[0].coupling_hash, reports[0].coupling_hash);
}

#[test]
fn doubling_paths_shrinks_the_interval_by_about_sqrt2() {
    let m = SpectralModel::heat_1d(16, Nonlinearity::LinearConst(0.5)).unwrap();
    let mut s = spec(m, vec![SchemeId::ExpEuler], 1000, Mode::Local);
    let w1 = harness::run(&s).unwrap()[0].regression.unwrap().ci_width();
    s.paths = 2000;
    let w2 = harness::run(&s).unwrap()[0].regression.unwrap().ci_width();
    let ratio = w1 / w2;
    assert!((1.2..1.65).contains(&ratio), "ratio {ratio}");
}

#[test]
fn local_order_demands_a_tight_interval() {
    let m = SpectralModel::heat_1d(8, Nonlinearity::LinearConst(0.5)).unwrap();
    let mut s = spec(m, vec![SchemeId::ImplicitEuler], 100, Mode::Local);
    s.ladder = vec![16, 32, 64];
    match harness::local_order(&s) {
        Err(harness::HarnessError::InsufficientPaths { width, .. }) => assert!(width > 0.2),
        Ok(r) => assert!(r[0].regression.unwrap().ci_width() <= 0.2),
        Err(e) => panic!("{e}"),
    }
    assert!(matches!(
        harness::global_order(&s),
        Err(harness::HarnessError::WrongMode { .. })
    ));
}

#[test]
fn reference_is_self_consistent_under_refinement() {
    let m = SpectralModel::heat_1d(64, Nonlinearity::Pointwise(Pointwise::Tanh)).unwrap();
    let mut s = spec(m, vec![SchemeId::ExpEuler, SchemeId::TaylorW3], 200, Mode::Local);
    s.u0 = (1..=64).map(|k| 1.0 / k as f64).collect();
    let gap = harness::reference_gap(&s, 64).unwrap();
    let reports = harness::run(&s).unwrap();
    let coarsest = reports
        .iter()
        .map(|r| r.levels[0].error)
        .fold(f64::INFINITY, f64::min);
    assert!(gap < 0.1 * coarsest, "gap {gap:e}, coarsest error {coarsest:e}");
}

#[test]
fn errors_refine_monotonically_on_presets() {
    let presets = [
        SpectralModel::heat_1d(64, Nonlinearity::LinearConst(0.5)).unwrap(),
        SpectralModel::heat_1d(16, Nonlinearity::Pointwise(Pointwise::Tanh)).unwrap(),
        SpectralModel::trace_class_3d(4, Nonlinearity::LinearConst(0.5)).unwrap(),
    ];
    for m in presets {
        let mut s = spec(m, SchemeId::ALL.to_vec(), 200, Mode::Local);
        s.time_integrals = spde_taylor::sampler::TimeIntegralMode::Full;
        for r in harness::run(&s).unwrap() {
            assert!(r.monotone(), "{}: {:?}", r.scheme, r.levels);
        }
    }
}

/// Half-ladder slopes must agree to 0.2 on the acceptance presets.
#[test]
fn slopes_are_stable_across_the_ladder() {
    let cases = [
        (
            "heat_1d",
            SpectralModel::heat_1d(64, Nonlinearity::LinearConst(0.5)).unwrap(),
            vec![SchemeId::ExpEuler],
        ),
        (
            "trace3d",
            SpectralModel::trace_class_3d(4, Nonlinearity::LinearConst(0.5)).unwrap(),
            vec![SchemeId::ExpEuler, SchemeId::TaylorW3],
        ),
    ];
    let mut bad = Vec::new();
    for (name, m, schemes) in cases {
        for r in harness::run(&spec(m, schemes, 2000, Mode::Local)).unwrap() {
            let (a, b) = r.regression.unwrap().half_slopes;
            println!("{name} {}: half slopes {a:.3} {b:.3}", r.scheme);
            if (a - b).abs() >= 0.2 {
                bad.push(format!("{name} {}: {a:.3} vs {b:.3}", r.scheme));
            }
        }
    }
    assert!(bad.is_empty(), "unstable slopes: {}", bad.join(", "));
}
