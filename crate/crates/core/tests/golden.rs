use std::time::Instant;

use gridmind_core::cogmap::{
    build_search_trace, parse_plan, serialize_thought, CotVariant, Fidelity, Verbosity,
};
use gridmind_core::grid::reference_env;
use gridmind_core::harness::{run_reachable, DfsAgent, DfsChoice, Outcome};
use gridmind_core::paths::optimal_path;
use gridmind_core::text::render_instruction;

fn unescape(s: &str) -> String {
    s.trim_end_matches('\n').replace("\\n", "\n")
}

fn fixture(name: &str) -> Option<&'static str> {
    Some(match name {
        "fwd-cot" => include_str!("fixtures/thoughts/fwd-cot.txt"),
        "fwd-wo-all-backtrack" => include_str!("fixtures/thoughts/fwd-wo-all-backtrack.txt"),
        "fwd-wo-all" => include_str!("fixtures/thoughts/fwd-wo-all.txt"),
        "fwd-unmark-wo-backtrack" => include_str!("fixtures/thoughts/fwd-unmark-wo-backtrack.txt"),
        "fwd-unmark" => include_str!("fixtures/thoughts/fwd-unmark.txt"),
        "fwd-mark-wo-backtrack" => include_str!("fixtures/thoughts/fwd-mark-wo-backtrack.txt"),
        "fwd-mark" => include_str!("fixtures/thoughts/fwd-mark.txt"),
        "bwd-cot" => include_str!("fixtures/thoughts/bwd-cot.txt"),
        "bwd-wo-all-backtrack" => include_str!("fixtures/thoughts/bwd-wo-all-backtrack.txt"),
        "bwd-wo-all" => include_str!("fixtures/thoughts/bwd-wo-all.txt"),
        "bwd-unmark-wo-backtrack" => include_str!("fixtures/thoughts/bwd-unmark-wo-backtrack.txt"),
        "bwd-unmark" => include_str!("fixtures/thoughts/bwd-unmark.txt"),
        "bwd-mark-wo-backtrack" => include_str!("fixtures/thoughts/bwd-mark-wo-backtrack.txt"),
        "bwd-mark" => include_str!("fixtures/thoughts/bwd-mark.txt"),
        _ => return None,
    })
}

fn thought(variant: CotVariant, fidelity: Fidelity) -> String {
    let trace = build_search_trace(&reference_env(), variant.direction);
    serialize_thought(&trace, variant, fidelity).unwrap()
}

#[test]
fn all_fourteen_rows_strict() {
    let started = Instant::now();
    let mut checked = 0;
    for variant in CotVariant::all() {
        let Some(expected) = fixture(&variant.name()) else {
            continue;
        };
        assert_eq!(
            thought(variant, Fidelity::Strict),
            unescape(expected),
            "{variant}"
        );
        checked += 1;
    }
    assert_eq!(checked, 14);
    assert!(started.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn uniform_differs_only_in_first_forward_entry() {
    for variant in CotVariant::all() {
        let Some(expected) = fixture(&variant.name()) else {
            continue;
        };
        let expected = unescape(expected);
        let uniform = thought(variant, Fidelity::Uniform);
        if expected.contains("Backtrack:\n(3, 2)up\n") {
            assert_eq!(
                uniform,
                expected.replacen("Backtrack:\n(3, 2)up\n", "Backtrack:\n(3, 2)\nup\n", 1),
                "{variant}"
            );
        } else {
            assert_eq!(uniform, expected, "{variant}");
        }
    }
}

#[test]
fn only_plan_only_variants_lack_a_row() {
    let missing: Vec<String> = CotVariant::all()
        .into_iter()
        .filter(|v| fixture(&v.name()).is_none())
        .map(|v| v.name())
        .collect();
    assert_eq!(missing, ["fwd-none", "bwd-none"]);
    for v in CotVariant::all()
        .into_iter()
        .filter(|v| v.verbosity == Verbosity::None)
    {
        assert_eq!(thought(v, Fidelity::Strict), "");
    }
}

#[test]
fn golden_rows_parse_back_to_the_optimal_plan() {
    let k = optimal_path(&reference_env()).actions();
    for variant in CotVariant::all() {
        let Some(text) = fixture(&variant.name()) else {
            continue;
        };
        let text = unescape(text);
        if !variant.backtrack {
            continue;
        }
        let plan = parse_plan(&text).unwrap_or_else(|e| panic!("{variant}: {e}"));
        assert_eq!(plan.actions, k, "{variant}");
    }
}

#[test]
fn prompt_turns_match_reference() {
    let turns: Vec<String> = render_instruction(&reference_env())
        .iter()
        .map(|t| t.to_string())
        .collect();
    let expected: Vec<String> = include_str!("fixtures/prompt.txt")
        .lines()
        .map(unescape)
        .collect();
    assert_eq!(turns, expected);
}

#[test]
fn depth_first_transcript_matches_reference() {
    let env = reference_env();
    let r = run_reachable(&env, &mut DfsAgent::new(DfsChoice::First), 200).unwrap();
    assert_eq!(r.outcome, Outcome::Success);
    let got: Vec<String> = r.transcript[3..].iter().map(|t| t.to_string()).collect();
    let expected: Vec<String> = include_str!("fixtures/dfs_transcript.txt")
        .lines()
        .map(unescape)
        .collect();
    assert_eq!(got, expected);
    assert_eq!(r.steps, 11);
}
