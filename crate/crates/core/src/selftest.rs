//! Fast built-in checks, small enough to run from the command line.

use serde::{Deserialize, Serialize};

use crate::code::{oracle, CodeSpec, FieldSpec};
use crate::metrics::{predict, Status};
use crate::simnet::library::{random_scenario, slow_burn};
use crate::simnet::{run_scenario, sweep, Scenario};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfCheck {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

impl SelfCheck {
    fn new(name: &str, ok: bool, detail: String) -> Self {
        SelfCheck {
            name: name.into(),
            status: if ok { Status::Pass } else { Status::Fail },
            detail,
        }
    }
}

fn code_distance() -> SelfCheck {
    let mut parts = Vec::new();
    let mut ok = true;
    for w in [3, 4] {
        let d = FieldSpec::new(w, 4)
            .and_then(|f| CodeSpec::new(f, 2))
            .and_then(|c| oracle::min_distance_exhaustive(&c));
        match d {
            Ok(d) => {
                ok &= d == 3;
                parts.push(format!("GF(2^{w}) d={d}"));
            }
            Err(e) => {
                ok = false;
                parts.push(e.to_string());
            }
        }
    }
    SelfCheck::new("(4,2) minimum distance", ok, parts.join(", "))
}

fn fast_path() -> SelfCheck {
    let run = run_scenario(&Scenario::fault_free(4, 1, 8, 8));
    let pred = predict(4, 1, 8, 8, 12);
    match (run, pred) {
        (Ok(run), Ok(p)) => {
            let g = &run.generations[0].bits;
            let ok = g.step1 == p.step1 && g.step5 == p.step5 && run.passed();
            SelfCheck::new(
                "fast path bits",
                ok,
                format!("step1 {} of {}, step5 {} of {}", g.step1, p.step1, g.step5, p.step5),
            )
        }
        (r, p) => SelfCheck::new("fast path bits", false, format!("{:?} {:?}", r.err(), p.err())),
    }
}

fn fallback_bound() -> SelfCheck {
    match run_scenario(&slow_burn(4, 1, 8, 4)) {
        Ok(run) => {
            let ok = run.passed() && run.fallbacks() <= 2 && run.diagnosis.is_isolated(3);
            SelfCheck::new("fallback bound", ok, format!("{} fallbacks, bound 2", run.fallbacks()))
        }
        Err(e) => SelfCheck::new("fallback bound", false, e.to_string()),
    }
}

fn random_runs(per_n: u64) -> SelfCheck {
    let scenarios = (4..=7).flat_map(|n| (0..per_n).map(move |s| random_scenario(n, s))).collect();
    let out = sweep(scenarios);
    let bad: Vec<String> = out
        .iter()
        .filter(|o| o.result.as_ref().map_or(true, |r| !r.passed()))
        .map(|o| o.scenario.name.clone())
        .collect();
    SelfCheck::new(
        "random scenarios",
        bad.is_empty(),
        format!("{} runs, {} failing {}", out.len(), bad.len(), bad.join(" ")),
    )
}

fn determinism() -> SelfCheck {
    let mut s = random_scenario(7, 1);
    s.trace = true;
    let a = run_scenario(&s).map(|r| r.log_json());
    let b = run_scenario(&s).map(|r| r.log_json());
    let ok = matches!((&a, &b), (Ok(x), Ok(y)) if x == y);
    SelfCheck::new("deterministic logs", ok, String::new())
}

/// Run every check with `per_n` random scenarios for each `n` in 4..=7.
pub fn run(per_n: u64) -> Vec<SelfCheck> {
    vec![code_distance(), fast_path(), fallback_bound(), random_runs(per_n), determinism()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selftest_passes() {
        for c in run(5) {
            assert_eq!(c.status, Status::Pass, "{}: {}", c.name, c.detail);
        }
    }
}
