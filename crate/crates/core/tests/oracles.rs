//! Groundings and optima checked against independently built references.

mod common;

use std::path::PathBuf;
use std::process::Command;

use common::*;
use rlplift::ground::GroundLp;
use rlplift::lp::export::ExportFormat;
use rlplift::pipeline::{Mode, SolverChoice};
use rlplift::rlp::Rel;
use rlplift::Rational;

type Row = (Vec<(String, Rational)>, Rel, Rational);

fn row(terms: &[(String, Rational)], rel: Rel, rhs: Rational) -> Row {
    let mut merged: Vec<(String, Rational)> = Vec::new();
    for (name, a) in terms {
        match merged.iter_mut().find(|(n, _)| n == name) {
            Some((_, b)) => *b += a,
            None => merged.push((name.clone(), a.clone())),
        }
    }
    merged.retain(|(_, a)| *a != int(0));
    merged.sort();
    (merged, rel, rhs)
}

fn sorted(mut rows: Vec<Row>) -> Vec<Row> {
    rows.sort();
    rows
}

fn decimal(text: &str) -> Rational {
    rlplift::scalar::parse_decimal(text).unwrap()
}

#[test]
fn flow_grounding_matches_hand_expansion() {
    let caps = capacities(&read("flow_fig4.lkb"));
    let f = |u: &str, v: &str| format!("flow({u},{v})");
    let mut vertices: Vec<&str> = caps.iter().flat_map(|(u, v, _)| [u.as_str(), v.as_str()]).collect();
    vertices.sort();
    vertices.dedup();
    let mut rows = Vec::new();
    for v in vertices.iter().filter(|v| !["s", "t"].contains(v)) {
        let mut terms = Vec::new();
        for (a, b, _) in &caps {
            if a == v {
                terms.push((f(a, b), int(1)));
            }
            if b == v {
                terms.push((f(a, b), int(-1)));
            }
        }
        rows.push(row(&terms, Rel::Eq, int(0)));
    }
    for (u, v, c) in &caps {
        rows.push(row(&[(f(u, v), int(-1))], Rel::Ge, int(-c)));
        rows.push(row(&[(f(u, v), int(1))], Rel::Ge, int(0)));
    }
    let ground: GroundLp = compile("flow", "flow_fig4").ground;
    assert_eq!(ground.canonical_rows(), sorted(rows));
    let objective: Vec<(String, Rational)> = caps
        .iter()
        .filter(|(u, _, _)| u == "s")
        .map(|(u, v, _)| (f(u, v), int(1)))
        .collect();
    assert_eq!(ground.named_objective(), objective.into_iter().collect());
}

#[test]
fn gridworld_grounding_matches_hand_expansion() {
    let n = 5i64;
    let gamma = decimal("0.9");
    let value = |(x, y): (i64, i64)| format!("value(state({x},{y}))");
    let mut rows = Vec::new();
    for x in 1..=n {
        for y in 1..=n {
            if (x, y) == (n, n) {
                rows.push(row(&[(value((x, y)), int(1) - &gamma)], Rel::Le, int(0)));
                continue;
            }
            for (dx, dy) in [(0, 1), (0, -1), (1, 0), (-1, 0)] {
                let t = ((x + dx).clamp(1, n), (y + dy).clamp(1, n));
                let reward = if t == (n, n) { int(100) } else { int(-1) };
                let terms = [(value((x, y)), int(1)), (value(t), -gamma.clone())];
                rows.push(row(&terms, Rel::Le, reward));
            }
        }
    }
    let ground = compile("mdp", "grid5_1goal").ground;
    assert_eq!(ground.canonical_rows(), sorted(rows));
    assert_eq!(ground.var_names.len(), 25);
}

#[test]
fn mckay_degrees_equal_neighbour_counts() {
    let kb = compile("svm", "mckay").kb;
    let q = rlplift::logkb::parse_query("sim_edge(X, _)").unwrap();
    let counts = kb.query_counts_bound(&q, &Default::default()).unwrap();
    assert_eq!(counts.len(), 8);
    for (sub, count) in counts {
        let node = sub.values().next().unwrap().to_string();
        let atom = kb
            .atoms()
            .into_iter()
            .find(|(a, _)| a.to_string() == format!("attribute({node},degree)"))
            .unwrap();
        assert_eq!(atom.1.unwrap(), int(count as i64), "{node}");
    }
}

#[test]
fn exact_and_float_solvers_agree_on_small_fixtures() {
    for (model, kb) in [("toy", "toy"), ("flow", "flow_fig4"), ("frucht", "frucht"), ("svm", "mckay"), ("tc_svm", "mckay")] {
        let exact = run(model, kb, Mode::Ground, SolverChoice::Rational);
        for solver in [SolverChoice::Float, SolverChoice::Minilp] {
            for mode in [Mode::Ground, Mode::Lift] {
                let other = run(model, kb, mode, solver.clone());
                let (a, b) = (exact.objective_f64.unwrap(), other.objective_f64.unwrap());
                assert!((a - b).abs() <= 1e-6 * (1.0 + a.abs()), "{model}+{kb} {solver} {mode:?}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn ground_and_lifted_runs_agree_on_every_fixture() {
    for (model, kb) in FIXTURES {
        let ground = run(model, kb, Mode::Ground, SolverChoice::Auto);
        let lift = run(model, kb, Mode::Lift, SolverChoice::Auto);
        assert_eq!(ground.status, lift.status, "{model}+{kb}");
        let (a, b) = (ground.objective_f64.unwrap(), lift.objective_f64.unwrap());
        assert!((a - b).abs() <= 1e-6 * (1.0 + a.abs()), "{model}+{kb}: {a} vs {b}");
        assert_eq!(lift.names, ground.names, "{model}+{kb}");
    }
}

fn scipy_solver() -> Option<PathBuf> {
    let ok = Command::new("python3")
        .args(["-c", "import scipy.optimize, scipy.sparse"])
        .output()
        .is_ok_and(|o| o.status.success());
    ok.then(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/support/scipy_solver.py"))
}

#[test]
fn external_solver_matches_internal() {
    let Some(cmd) = scipy_solver() else {
        eprintln!("skipped: python3 with scipy not available");
        return;
    };
    for (model, kb) in [("flow", "flow_fig4"), ("mdp", "grid5_4goal"), ("map_pairwise", "smokers_grid5"), ("svm", "cora_sample")] {
        let internal = run(model, kb, Mode::Ground, SolverChoice::Auto);
        for mode in [Mode::Ground, Mode::Lift] {
            let external = run(model, kb, mode, SolverChoice::External { cmd: cmd.clone(), format: ExportFormat::Mps });
            let (a, b) = (internal.objective_f64.unwrap(), external.objective_f64.unwrap());
            assert!((a - b).abs() <= 1e-6 * (1.0 + a.abs()), "{model}+{kb} {mode:?}: {a} vs {b}");
        }
    }
}
