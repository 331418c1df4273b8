use std::path::Path;

use num_complex::Complex64;
use tempfile::tempdir;

use sparse_dfrc::array::{pattern_at, ArrayGeometry};
use sparse_dfrc::scenario::{parse_scenario_str, Scenario};
use sparse_dfrc::workflow::{
    read_selection, read_weights, run_ber, run_design, run_oracle, run_pattern, run_restart_histogram, sha256_file,
    RunOptions,
};
use sparse_dfrc::Error;

const SMALL: &str = r#"{
  "name": "small",
  "geometry": { "candidates": 10, "spacing": 0.5 },
  "design": {
    "kind": "single", "budget": 6, "beam": "focused", "target": 0.0,
    "comm_direction": -40.0, "sidelobe_db": -10.0
  },
  "grid": { "mainlobe": [-10.0, 10.0], "transition": 5.0, "comm_exclusion": 2.0 },
  "dictionary": { "scheme": "am", "levels": [0.1, 0.05] },
  "selection": { "restarts": 2, "seed": 3 },
  "ber": {
    "dictionary": { "scheme": "ask2", "levels": [0.1, 0.05] },
    "snr_db": [20.0, 40.0, 5.0], "trials": 2000, "waveforms": [1, 2],
    "angles": [-60.0, -20.0, 10.0], "angle_snr_db": 40.0, "seed": 1
  }
}"#;

fn small() -> Scenario {
    parse_scenario_str(SMALL).unwrap()
}

fn with(edit: impl FnOnce(&mut serde_json::Value)) -> Result<Scenario, Error> {
    let mut v: serde_json::Value = serde_json::from_str(SMALL).unwrap();
    edit(&mut v);
    parse_scenario_str(&v.to_string())
}

fn manifest_files(dir: &Path, name: &str) -> Vec<(String, String)> {
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap();
    v["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| {
            (
                f["path"].as_str().unwrap().to_string(),
                f["sha256"].as_str().unwrap().to_string(),
            )
        })
        .collect()
}

#[test]
fn design_writes_every_artifact_and_hashes_it() {
    let dir = tempdir().unwrap();
    let o = run_design(&small(), dir.path()).unwrap();
    let files = manifest_files(dir.path(), "manifest.json");
    let names: Vec<&str> = files.iter().map(|(p, _)| p.as_str()).collect();
    for f in [
        "selection.txt",
        "weights.csv",
        "pattern_symbol0.csv",
        "pattern_symbol1.csv",
        "trace.csv",
        "starts.csv",
        "metrics.json",
    ] {
        assert!(names.contains(&f), "{f} missing from {names:?}");
    }
    for (p, h) in &files {
        assert_eq!(&sha256_file(&dir.path().join(p)).unwrap(), h, "{p}");
    }
    assert_eq!(read_selection(dir.path()).unwrap(), o.result.selection);
    let w = read_weights(&dir.path().join("weights.csv")).unwrap();
    assert_eq!(w.len(), 2);
    for ((label, b), beam) in w.iter().zip(&o.beams) {
        assert_eq!(label, &beam.label);
        assert_eq!(b.weights(), beam.beamformer.weights());
    }
}

#[test]
fn symbol_bank_delivers_each_symbol() {
    let dir = tempdir().unwrap();
    let s = small();
    let o = run_design(&s, dir.path()).unwrap();
    let g = s.geometry().unwrap();
    for (beam, level) in o.beams.iter().zip([0.1, 0.05]) {
        let gain = pattern_at(beam.beamformer.weights(), &g, -40.0).unwrap();
        assert!((gain - Complex64::new(level, 0.0)).norm() < 1e-5, "{gain}");
        // only selected antennas carry weight
        for i in o.result.selection.unselected_indices() {
            assert_eq!(beam.beamformer.weights()[i], Complex64::new(0.0, 0.0));
        }
    }
}

#[test]
fn same_seed_gives_identical_files() {
    let (a, b) = (tempdir().unwrap(), tempdir().unwrap());
    run_design(&small(), a.path()).unwrap();
    run_design(&small(), b.path()).unwrap();
    let fa = manifest_files(a.path(), "manifest.json");
    let fb = manifest_files(b.path(), "manifest.json");
    assert_eq!(fa, fb);

    let (ca, _) = run_ber(&small(), a.path()).unwrap();
    let (cb, _) = run_ber(&small(), b.path()).unwrap();
    assert_eq!(ca, cb);
    assert_eq!(
        std::fs::read(a.path().join("ber_2bits.csv")).unwrap(),
        std::fs::read(b.path().join("ber_2bits.csv")).unwrap()
    );
}

#[test]
fn full_budget_skips_the_search() {
    let s = with(|v| v["design"]["budget"] = 10.into()).unwrap();
    let dir = tempdir().unwrap();
    let o = run_design(&s, dir.path()).unwrap();
    assert_eq!(o.result.selection.to_bit_string(), "1111111111");
    assert_eq!(o.result.iterations, 0);
    assert!(o.converged());
}

#[test]
fn pattern_and_ber_read_stored_design() {
    let dir = tempdir().unwrap();
    let s = small();
    run_design(&s, dir.path()).unwrap();
    let m = run_pattern(&s, dir.path(), 0.5).unwrap();
    assert_eq!(m.files.len(), 2);
    let text = std::fs::read_to_string(dir.path().join(&m.files[0].path)).unwrap();
    assert_eq!(text.lines().count(), 1 + 361);

    let (curves, _) = run_ber(&s, dir.path()).unwrap();
    assert_eq!(curves.len(), 2);
    assert_eq!(curves[1].bits_per_pulse, 2);
    assert_eq!(curves[0].x, vec![20.0, 25.0, 30.0, 35.0, 40.0]);
}

#[test]
fn downstream_commands_need_a_design() {
    let dir = tempdir().unwrap();
    assert!(matches!(run_pattern(&small(), dir.path(), 0.5), Err(Error::Config(_))));
    assert!(matches!(run_ber(&small(), dir.path()), Err(Error::Config(_))));
}

#[test]
fn stored_weights_must_match_the_grid() {
    let dir = tempdir().unwrap();
    run_design(&small(), dir.path()).unwrap();
    let s = with(|v| v["geometry"]["candidates"] = 12.into()).unwrap();
    assert!(matches!(run_pattern(&s, dir.path(), 0.5), Err(Error::Config(_))));
}

#[test]
fn histogram_with_two_starts() {
    let dir = tempdir().unwrap();
    let (h, m) = run_restart_histogram(&small(), 2, dir.path()).unwrap();
    assert_eq!(h.swap.len(), 2);
    assert_eq!(h.plain.len(), 2);
    assert!(h.swap_spread() >= 0.0);
    let total: usize = h.bins().iter().map(|b| b.1).sum();
    assert_eq!(total, 2);
    assert_eq!(m.files.len(), 2);
    assert!(run_restart_histogram(&small(), 1, dir.path()).is_err());
}

#[test]
fn oracle_writes_best_subset() {
    let dir = tempdir().unwrap();
    let (b, _) = run_oracle(&small(), dir.path()).unwrap();
    assert_eq!(b.subsets, 210);
    let text = std::fs::read_to_string(dir.path().join("oracle.csv")).unwrap();
    assert!(text.contains(&b.selection.to_bit_string()));
}

type Edit = Box<dyn FnOnce(&mut serde_json::Value)>;

#[test]
fn invalid_scenarios_name_the_field() {
    let cases: [(&str, Edit); 4] = [
        ("design.budget", Box::new(|v| v["design"]["budget"] = 11.into())),
        ("ber.trials", Box::new(|v| v["ber"]["trials"] = 0.into())),
        (
            "geometry.spacing",
            Box::new(|v| v["geometry"]["spacing"] = (-0.5).into()),
        ),
        ("unknown", Box::new(|v| v["design"]["colour"] = "red".into())),
    ];
    for (field, edit) in cases {
        let e = with(edit).unwrap_err();
        assert!(matches!(e, Error::Config(_) | Error::Json(_)), "{e:?}");
        if field != "unknown" {
            assert!(e.to_string().contains(field), "{field}: {e}");
        }
    }
}

#[test]
fn overrides_are_validated() {
    let zero = RunOptions {
        trials: Some(0),
        ..Default::default()
    };
    assert!(zero.apply(&small()).is_err());
    let s = RunOptions {
        seed: Some(9),
        starts: Some(5),
        trials: Some(10),
    }
    .apply(&small())
    .unwrap();
    assert_eq!(
        (s.selection.seed, s.selection.restarts, s.ber.trials, s.ber.seed),
        (9, 5, 10, 9)
    );
}

#[test]
fn shared_aperture_splits_the_grid() {
    let s = with(|v| {
        v["geometry"]["candidates"] = 16.into();
        v["design"] = serde_json::json!({
            "kind": "shared", "budget": 10, "target": 0.0,
            "comm_direction": -30.0, "sidelobe_db": -8.0
        });
        v["grid"] = serde_json::json!({
            "mainlobe": [-8.0, 8.0], "transition": 4.0, "comm_exclusion": 0.0,
            "comm_mainlobe": 8.0, "comm_transition": 4.0
        });
        v.as_object_mut().unwrap().remove("dictionary");
        v["ber"].as_object_mut().unwrap().remove("dictionary");
    })
    .unwrap();
    let dir = tempdir().unwrap();
    let o = run_design(&s, dir.path()).unwrap();
    let radar = o.beams[0].beamformer.weights();
    let comm = o.beams[1].beamformer.weights();
    for i in 0..16 {
        let on = o.result.selection.is_selected(i);
        if on {
            assert_eq!(comm[i], Complex64::new(0.0, 0.0), "antenna {i}");
        } else {
            assert_eq!(radar[i], Complex64::new(0.0, 0.0), "antenna {i}");
        }
    }
    assert_eq!(o.result.selection.selected_indices().len(), 10);
    let g = ArrayGeometry::ula(16, 0.5).unwrap();
    assert!((pattern_at(radar, &g, 0.0).unwrap() - 1.0).norm() < 1e-5);
    assert!((pattern_at(comm, &g, -30.0).unwrap() - 1.0).norm() < 1e-5);
}
