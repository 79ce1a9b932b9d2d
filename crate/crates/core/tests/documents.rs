mod common;

use branchgraph::graph::{emit, validate, validate_document, GraphError};
use branchgraph::simulate::{parse_script, simulate, Cause, PlaythroughTrace, Policy, ScriptEntry};

fn messages(g: &branchgraph::graph::BranchGraph) -> Vec<String> {
    validate(g).iter().map(ToString::to_string).collect()
}

#[test]
fn valid_graph_emits_canonically() {
    let g = common::desk_graph();
    let text = emit(&g).unwrap();
    assert!(text.ends_with("}\n"));
    assert_eq!(emit(&g).unwrap(), text);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert!(validate_document(&text).is_ok());
}

#[test]
fn dangling_branch_point_is_reported() {
    let mut g = common::desk_graph();
    g.scenes[2].span.start_point = Some(9);
    let m = messages(&g);
    assert!(
        m.iter()
            .any(|s| s.contains("branch point id 9 does not exist")),
        "{m:?}"
    );
    assert!(matches!(emit(&g), Err(GraphError::Invalid(_))));
}

#[test]
fn default_branch_out_of_range_is_reported() {
    let mut g = common::desk_graph();
    g.scenes[0].default_branch = 7;
    let m = messages(&g);
    assert!(
        m.iter()
            .any(|s| s.contains("default_branch 7 out of range for 2 branches")),
        "{m:?}"
    );
}

#[test]
fn path_gap_is_reported() {
    let mut g = common::desk_graph();
    g.scenes[1].branches[0].path.remove(3);
    g.scenes[1].branches[0].captions.remove(3);
    let m = messages(&g);
    assert!(m.iter().any(|s| s.contains("missing frame 48")), "{m:?}");
}

#[test]
fn too_close_branch_points_are_reported() {
    let mut g = common::desk_graph();
    g.branch_points[1].time = 60.0;
    let m = messages(&g);
    assert!(m.iter().any(|s| s.starts_with("branch_points[1]")), "{m:?}");
}

#[test]
fn narration_over_budget_is_reported() {
    let mut g = common::desk_graph();
    let budget = g.scenes[0].branches[0].narration.word_budget;
    g.scenes[0].branches[0].narration.text = Some(vec!["w"; budget + 1].join(" "));
    let m = messages(&g);
    assert!(m.iter().any(|s| s.contains("exceed budget")), "{m:?}");
}

#[test]
fn missing_cue_is_reported() {
    let mut g = common::desk_graph();
    g.cues.pop();
    let m = messages(&g);
    assert!(m.iter().any(|s| s.starts_with("cues:")), "{m:?}");
}

#[test]
fn malformed_document_is_a_parse_issue() {
    let issues = validate_document("{\"version\": 3}").unwrap_err();
    assert_eq!(issues.len(), 1);
    assert_eq!(issues[0].path, "$");
}

#[test]
fn cue_formats() {
    let g = common::desk_graph();
    let cue = g.cue(1, 1).unwrap();
    assert_eq!(
        cue.announcement(),
        format!(
            "[Scene 2 of 3] {}; [Branch 2 of 2] {}",
            g.scenes[1].title, g.scenes[1].branches[1].title
        )
    );
    assert_eq!(
        cue.recap_line().unwrap(),
        format!(
            "[Previously] {}; [Now] {}",
            g.scenes[0].title, g.scenes[1].title
        )
    );
    assert!(g.cue(0, 0).unwrap().recap_line().is_none());
}

#[test]
fn default_only_times_out_everywhere() {
    let g = common::desk_graph();
    let t = simulate(&g, &Policy::DefaultOnly).unwrap();
    assert_eq!(t.events.len(), 2);
    assert!(t
        .events
        .iter()
        .all(|e| e.cause == Cause::DefaultTimeout && e.branch == 0));
    assert_eq!(
        t.events.iter().map(|e| e.time).collect::<Vec<_>>(),
        vec![45.0, 80.0]
    );
}

#[test]
fn scripted_choices_and_invalid_indices() {
    let g = common::desk_graph();
    let t = simulate(&g, &Policy::Script(parse_script("1\n5\n").unwrap())).unwrap();
    assert_eq!(
        (t.events[0].branch, t.events[0].cause),
        (1, Cause::UserChoice)
    );
    assert_eq!(
        (t.events[1].branch, t.events[1].cause),
        (0, Cause::DefaultTimeout)
    );
    assert_eq!(t.events[1].requested, Some(5));
    assert!(t.events[1].error.is_some());
    assert_eq!(t.events[0].cue, g.cue(1, 1).unwrap().announcement());
}

#[test]
fn replaying_a_trace_reproduces_it() {
    let g = common::desk_graph();
    for policy in [
        Policy::DefaultOnly,
        Policy::SocialArgmax,
        Policy::Script(vec![ScriptEntry::Choose(1), ScriptEntry::Choose(9)]),
        Policy::Script(vec![ScriptEntry::Default, ScriptEntry::Choose(1)]),
    ] {
        let first = simulate(&g, &policy).unwrap().to_json();
        let parsed = PlaythroughTrace::from_json(&first).unwrap();
        let replay = simulate(&g, &Policy::Script(parsed.to_script()))
            .unwrap()
            .to_json();
        assert_eq!(first, replay);
        assert_eq!(first, simulate(&g, &policy).unwrap().to_json());
    }
}

#[test]
fn empty_graph_cannot_be_simulated() {
    let mut g = common::desk_graph();
    g.scenes.clear();
    assert!(simulate(&g, &Policy::DefaultOnly).is_err());
    assert!(messages(&g).iter().any(|m| m.contains("no scenes")));
}
