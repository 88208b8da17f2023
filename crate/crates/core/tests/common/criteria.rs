//! Checks for the end-to-end behaviour of the fixtures. Each returns a
//! description of the first mismatch.

use std::collections::BTreeSet;
use std::sync::Arc;

use iasm::eval::{eval_program, Verdict};
use iasm::history::{is_attainable, is_coherent, issued, pending, History, QuerySet};
use iasm::origins::origins;
use iasm::runtime::enumerate::{enumerate_attainable, Bounds};
use iasm::runtime::{run, Environment, Event, Limits, Machine, Phase, RandomEnv, RunEnd, ScenarioEnv, StepVerdict};
use iasm::structures::{Element, Location, State};
use iasm::syntax::{Head, NodeId, Program};

use super::{fixture, hist, load, q, scenario};

pub type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn qs(labels: &[&str]) -> QuerySet {
    labels.iter().map(|l| q(l)).collect()
}

fn occurrences(program: &Program, name: &str) -> BTreeSet<NodeId> {
    let mut out = BTreeSet::new();
    program.rule().for_each_term(&mut |t| {
        t.walk(&mut |s| {
            if s.head == Head::External(name.to_string()) {
                out.insert(s.id);
            }
        })
    });
    out
}

fn final_with_pending(p: &Program, s: &State, h: &History, want: &[&str]) -> Check {
    let o = eval_program(p, s, h);
    ensure!(o.is_final(), "{} is not final", h.render_compact());
    let got = pending(p, s, h);
    ensure!(
        got == qs(want),
        "{}: pending {:?}, want {:?}",
        h.render_compact(),
        got,
        want
    );
    Ok(())
}

pub fn timing() -> Check {
    let (p, s) = load("timing", "empty");
    let eps = History::empty();
    ensure!(
        issued(&p, &s, &eps) == qs(&["a", "b"]),
        "issued(ε) = {:?}",
        issued(&p, &s, &eps)
    );
    for v in [Element::Int(0), Element::Int(1), Element::True] {
        final_with_pending(&p, &s, &hist(&[&[("a", v)]]), &["b"])?;
    }
    let b = occurrences(&p, "b");
    ensure!(b.len() == 1, "expected one b occurrence, found {}", b.len());
    let got = origins(&p, &q("b"), &s, &eps);
    ensure!(got == b, "origins(<b>) = {:?}, want {:?}", got, b);
    Ok(())
}

pub fn kleene() -> Check {
    let (p, s) = load("kleene", "empty");
    let eps = History::empty();
    let caused = eval_program(&p, &s, &eps).caused;
    ensure!(caused == qs(&["a", "b", "c"]), "ε causes {:?}", caused);
    final_with_pending(
        &p,
        &s,
        &hist(&[&[("a", Element::Int(1)), ("b", Element::Int(2))]]),
        &["c"],
    )?;
    let o = eval_program(&p, &s, &hist(&[&[("a", Element::Int(1)), ("b", Element::Int(2))]]));
    ensure!(o.verdict == Verdict::Success, "verdict {}", o.verdict);
    ensure!(
        o.updates.iter().map(ToString::to_string).collect::<Vec<_>>() == ["x:=2"],
        "updates {:?}",
        o.updates
    );

    let (p, s) = load("kleene-or", "empty");
    let caused = eval_program(&p, &s, &eps).caused;
    ensure!(caused == qs(&["a", "b", "c"]), "or: ε causes {:?}", caused);
    let h = hist(&[&[("a", Element::Int(1)), ("b", Element::Int(1))]]);
    final_with_pending(&p, &s, &h, &["c"])?;
    let o = eval_program(&p, &s, &h);
    ensure!(
        o.updates.iter().map(ToString::to_string).collect::<Vec<_>>() == ["x:=1"],
        "or: updates {:?}",
        o.updates
    );
    // unequal replies settle nothing on their own
    let h = hist(&[&[("a", Element::Int(1)), ("b", Element::Int(2))]]);
    ensure!(
        !eval_program(&p, &s, &h).is_final(),
        "or: unequal replies should not be final"
    );
    Ok(())
}

pub fn issue() -> Check {
    let (p, s) = load("issue", "empty");
    let eps = History::empty();
    let o = eval_program(&p, &s, &eps);
    ensure!(o.verdict == Verdict::Success, "verdict {}", o.verdict);
    ensure!(o.updates.is_empty(), "updates {:?}", o.updates);
    final_with_pending(&p, &s, &eps, &["a"])
}

fn scripted(name: &str, state: &str) -> iasm::runtime::RunReport {
    let (p, s) = load(name, state);
    let mut env = ScenarioEnv::new(scenario(name, &s));
    run(p, s, &mut env, Limits::default()).expect("fixture runs")
}

fn lines(report: &iasm::runtime::RunReport) -> Vec<String> {
    report.trace.events.iter().map(ToString::to_string).collect()
}

fn position(lines: &[String], want: &str) -> Result<usize, String> {
    lines
        .iter()
        .position(|l| l == want)
        .ok_or_else(|| format!("no line `{want}`"))
}

pub fn broker() -> Check {
    let report = scripted("broker", "broker");
    let text = report.trace.render();
    ensure!(
        text == fixture("broker.trace"),
        "trace differs from golden file:\n{text}"
    );
    let l = lines(&report);
    ensure!(
        l[..position(&l, "STEP 2 BEGIN")?].contains(&"STEP 1 END success; updates: s0:=true".to_string()),
        "step 1 does not set s0"
    );
    let late = position(&l, "LATE <q1> -> a1 = true")?;
    let step4 = position(&l, "STEP 4 BEGIN")?;
    ensure!(late < step4, "a1 written after step 4 began");
    let issued_l1 = position(&l, "ISSUED <l1>")?;
    ensure!(
        issued_l1 > step4 && l[step4..issued_l1].iter().all(|x| !x.starts_with("STEP 4 END")),
        "l1 not issued in step 4"
    );
    let fs = &report.final_state;
    ensure!(
        fs.location_value(&Location::new("Halt", vec![])) == Ok(Element::True),
        "Halt not set"
    );
    ensure!(
        fs.location_value(&Location::new("s0", vec![])) == Ok(Element::True),
        "s0 not set"
    );
    ensure!(report.end() == RunEnd::Halted, "run ended {}", report.end());
    Ok(())
}

pub fn pollster() -> Check {
    let report = scripted("pollster", "pollster");
    ensure!(
        report.trace.render() == fixture("pollster.trace"),
        "trace differs from golden file"
    );
    ensure!(report.end() == RunEnd::Halted, "run ended {}", report.end());
    let sum = report.final_state.location_value(&Location::new("sum", vec![]));
    ensure!(sum == Ok(Element::Int(60)), "sum = {:?}", sum);
    let mut step = 0;
    let mut asked = Vec::new();
    for e in &report.trace.events {
        match e {
            Event::StepStart { step: s } => step = *s,
            Event::Issued { query, .. } if query.to_string().starts_with("<q ") => {
                asked.push((step, query.to_string()))
            }
            _ => {}
        }
    }
    let want = vec![
        (1, "<q 0>".to_string()),
        (2, "<q 1>".to_string()),
        (3, "<q 2>".to_string()),
    ];
    ensure!(asked == want, "questionnaire queries {:?}", asked);
    Ok(())
}

/// Fixture, state, alphabet of at most two values.
pub const ORACLE_FIXTURES: &[(&str, &str, &[&str])] = &[
    ("timing", "empty", &["0", "1"]),
    ("kleene", "empty", &["1", "2"]),
    ("kleene-or", "empty", &["1", "2"]),
    ("issue", "empty", &["0", "1"]),
    ("broker", "broker", &["true", "false"]),
    ("pollster", "pollster", &["10", "20"]),
];

const ORACLE_BOUNDS: Bounds = Bounds {
    max_rounds: 3,
    max_width: usize::MAX,
    max_nodes: 1_000_000,
};

/// Steps every scripted and random run of a fixture, checking each final
/// step history against the enumerator started from the same state.
/// Returns the number of step results compared.
pub fn oracle(name: &str, state: &str, alphabet: &[&str]) -> Result<usize, String> {
    let (p, s) = load(name, state);
    let alpha: Vec<Element> = alphabet
        .iter()
        .map(|v| iasm::parser::parse_literal(v).unwrap())
        .collect();
    let mut envs: Vec<Box<dyn Environment>> = vec![Box::new(ScenarioEnv::new(scenario(name, &s)))];
    for seed in 0..8 {
        envs.push(Box::new(RandomEnv::new(seed, alpha.clone())));
    }
    let mut compared = 0;
    let mut seen_starts = Vec::<State>::new();
    for mut env in envs {
        let mut m = Machine::new(
            Arc::clone(&p),
            s.clone(),
            Limits {
                max_steps: 12,
                max_rounds: 3,
            },
        );
        loop {
            let start = m.state().clone();
            let before = m.steps().len();
            m.run_step(env.as_mut()).map_err(|e| e.to_string())?;
            if let Some(r) = m.steps().get(before) {
                if r.verdict != StepVerdict::Stuck {
                    let found = enumerate_attainable(&p, &start, &alpha, ORACLE_BOUNDS).map_err(|e| e.to_string())?;
                    if !seen_starts.contains(&start) {
                        for e in &found {
                            ensure!(is_coherent(&p, &start, &e.history), "{name}: incoherent {}", e);
                            ensure!(is_attainable(&p, &start, &e.history), "{name}: unattainable {}", e);
                        }
                        seen_starts.push(start.clone());
                    }
                    let verdict = match r.verdict {
                        StepVerdict::Success => Verdict::Success,
                        _ => Verdict::Fail,
                    };
                    let hit = found
                        .iter()
                        .any(|e| e.history == r.final_history && e.verdict == verdict && e.updates == r.updates);
                    ensure!(
                        hit,
                        "{name} step {}: {} {} {:?} not enumerated",
                        r.step,
                        r.final_history.render_compact(),
                        verdict,
                        r.updates
                    );
                    compared += 1;
                }
            }
            if matches!(m.phase(), Phase::Ended(_)) {
                break;
            }
            m.deliver_late_replies(env.as_mut()).map_err(|e| e.to_string())?;
        }
    }
    Ok(compared)
}

/// Runs of the same inputs render the same bytes.
pub fn determinism(reps: usize) -> Check {
    for (name, state) in [("broker", "broker"), ("pollster", "pollster")] {
        let first = scripted(name, state).trace.render();
        for _ in 1..reps {
            ensure!(scripted(name, state).trace.render() == first, "{name}: traces differ");
        }
    }
    let random = |seed| {
        let (p, s) = load("broker", "broker");
        let mut env = RandomEnv::new(seed, vec![Element::True, Element::False]);
        run(p, s, &mut env, Limits::default()).unwrap().trace.to_json()
    };
    let first = random(11);
    for _ in 1..reps {
        ensure!(random(11) == first, "random broker: traces differ");
    }
    Ok(())
}
