use std::path::PathBuf;

use coded_consensus::consensus::DecisionPath;
use coded_consensus::simnet::{run_scenario, Scenario};

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn load(name: &str) -> Scenario {
    Scenario::load(&dir().join(name)).unwrap()
}

#[test]
fn every_shipped_scenario_runs_clean() {
    let mut count = 0;
    for entry in std::fs::read_dir(dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "toml") {
            continue;
        }
        let s = Scenario::load(&path).unwrap();
        assert!(!s.name.is_empty());
        let run = run_scenario(&s).unwrap();
        assert!(run.passed(), "{}: {:?}", path.display(), run.violations);
        assert_eq!(Scenario::from_toml(&s.to_toml()).unwrap(), s);
        count += 1;
    }
    assert!(count >= 5);
}

#[test]
fn split_inputs_decide_default() {
    let run = run_scenario(&load("split-inputs-n4.toml")).unwrap();
    assert!(run.generations.iter().all(|g| g.path == DecisionPath::Default && g.x.is_none()));
    assert!(run.decisions.values().all(|d| d == "0000"));
}

#[test]
fn common_hex_input_is_decided() {
    let run = run_scenario(&load("fault-free-n4.toml")).unwrap();
    assert!(run.decisions.values().all(|d| d == "0123456789abcdef"));
}

#[test]
fn alarm_isolates_in_one_fallback() {
    let run = run_scenario(&load("corrupt-and-alarm-n4.toml")).unwrap();
    assert_eq!(run.fallbacks(), 1);
    assert!(run.diagnosis.is_isolated(2));
    assert_eq!(run.generations[0].path, DecisionPath::Fallback);
}

#[test]
fn slow_burn_file_matches_generator() {
    let file = load("slow-burn-n7.toml");
    let run = run_scenario(&file).unwrap();
    assert_eq!(run.fallbacks(), 5);
    let isolated: Vec<_> = run.diagnosis.isolated().iter().copied().collect();
    assert_eq!(isolated, vec![5, 6]);
}
