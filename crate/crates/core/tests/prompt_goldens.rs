//! Golden-file checks: every prompt renders byte-identically across runs and
//! carries its anchor text. Regenerate with `UPDATE_GOLDENS=1 cargo test`.

use std::fs;
use std::path::PathBuf;

use grounding_core::corpus::Proposition;
use grounding_core::planning::{render_prompt, PlannerKind, RetrievalHistory};
use grounding_core::templates;
use grounding_core::verification::{
    render_ensemble_prompt, render_verify_prompt, PromptStyle, VerdictLabel,
};

fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/goldens")
        .join(name)
}

fn check(name: &str, rendered: &str) {
    let path = golden_path(name);
    if std::env::var_os("UPDATE_GOLDENS").is_some() {
        fs::write(&path, rendered).unwrap();
    }
    let expected = fs::read_to_string(&path)
        .unwrap_or_else(|_| panic!("missing golden {name}; run with UPDATE_GOLDENS=1"));
    assert_eq!(rendered, expected, "golden mismatch for {name}");
}

fn fixture_evidence() -> Vec<Proposition> {
    vec![
        Proposition::new("e0", "Panels absorb sunlight.").unwrap(),
        Proposition::new("e1", "Absorbed sunlight becomes electricity.").unwrap(),
    ]
}

const HYPOTHESIS: &str = "Solar panels convert sunlight into electricity.";

#[test]
fn hypothesis_generation_prompt_matches_golden() {
    let rendered = templates::render(
        templates::HYPOTHESIS_GENERATION,
        &[
            ("question", "What do solar panels convert sunlight into?"),
            ("answer", "electricity"),
        ],
    )
    .unwrap();
    assert!(rendered.contains("Paraphrase the given question and answer pair"));
    // In-context example survives substitution verbatim.
    assert!(rendered.contains("the manufacturer of Toyopet Master"));
    check("hypothesis_generation.golden.txt", &rendered);
}

#[test]
fn verification_prompts_match_goldens() {
    let owned = fixture_evidence();
    let evidence: Vec<&Proposition> = owned.iter().collect();
    for style in PromptStyle::ALL {
        let rendered = render_verify_prompt(&evidence, HYPOTHESIS, style).unwrap();
        assert!(rendered.contains("{Entailment, Not entailment}"));
        check(&format!("verify_{style}.golden.txt"), &rendered);
        // Re-render: byte identity.
        assert_eq!(rendered, render_verify_prompt(&evidence, HYPOTHESIS, style).unwrap());
    }
    assert!(render_verify_prompt(&evidence, HYPOTHESIS, PromptStyle::Basic)
        .unwrap()
        .contains("classify a hypothesis with {Entailment, Not entailment} based solely on a set of evidence"));
}

#[test]
fn ensemble_prompt_matches_golden() {
    let owned = fixture_evidence();
    let evidence: Vec<&Proposition> = owned.iter().collect();
    let rendered =
        render_ensemble_prompt(&evidence, HYPOTHESIS, VerdictLabel::NotEntailment).unwrap();
    assert!(rendered.contains("For your reference, an external supervised"));
    assert!(rendered.contains("Natural Language Inference model's prediction is: Not entailment."));
    check("verify_ensemble.golden.txt", &rendered);
}

#[test]
fn planner_prompts_match_goldens() {
    let anchors = [
        (
            PlannerKind::QueryExpansion,
            "Please write a passage to support/refute the claim.",
        ),
        (
            PlannerKind::AtomicFactDecomposition,
            "Please breakdown the following sentence into independent facts",
        ),
        (
            PlannerKind::PropositionDecomposition,
            "tell me what claims they are making",
        ),
        (
            PlannerKind::PremiseAbduction,
            "generate a set of premises that can prove the hypothesis",
        ),
    ];
    for (kind, anchor) in anchors {
        let rendered = render_prompt(kind, HYPOTHESIS, None).unwrap();
        assert!(rendered.contains(anchor), "{kind} lacks anchor");
        check(&format!("plan_{kind}.golden.txt"), &rendered);
    }
}

#[test]
fn reflection_prompt_matches_golden() {
    let history = RetrievalHistory {
        queries: vec!["prior query one".into(), "prior query two".into()],
        evidence: vec![Proposition::new("e9", "a previously found fact").unwrap()],
    };
    let rendered = render_prompt(PlannerKind::Reflection, HYPOTHESIS, Some(&history)).unwrap();
    assert!(rendered.contains("Generate targeted search queries"));
    assert!(rendered.contains("Previous search results:"));
    assert!(rendered.contains("Generate 3-5 refined search queries"));
    check("plan_reflection.golden.txt", &rendered);
}

#[test]
fn decomposition_prompts_keep_in_context_examples() {
    let pd = render_prompt(PlannerKind::PropositionDecomposition, HYPOTHESIS, None).unwrap();
    assert!(pd.contains("The Andy Warhol Museum is in Pittsburgh."));
    let pa = render_prompt(PlannerKind::PremiseAbduction, HYPOTHESIS, None).unwrap();
    assert!(pa.contains("Leo is a kind of constellation."));
    let fd = render_prompt(PlannerKind::AtomicFactDecomposition, HYPOTHESIS, None).unwrap();
    assert!(fd.contains("Collins became one of the third group of astronauts"));
}
