use proptest::prelude::*;

use rtm_eval::synthetic::{generate_corpus, template_summary, CorruptionPlan, ScenarioSpec};
use rtm_eval::{aggregate, evaluate_day, Averaging, FactSet, Lexicon, Summary, ThresholdConfig};

fn day(seed: u64, pick: usize) -> (FactSet, Summary) {
    let spec = ScenarioSpec {
        seed,
        n_days: 6,
        n_patients: 2,
        corruption: CorruptionPlan { omit: 0.2, misstate_value: 0.2, misstate_time: 0.2, hallucinate: 0.3, deny: 0.1 },
        ..ScenarioSpec::default()
    };
    let c = generate_corpus(&spec, &ThresholdConfig::default()).unwrap();
    let i = pick % c.fact_sets.len();
    (c.fact_sets[i].clone(), c.summaries[i].clone())
}

fn with_text(s: &Summary, lines: &[String]) -> Summary {
    Summary { text: lines.join("\n"), ..s.clone() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metrics_stay_in_bounds(seed in 0u64..10_000, pick in 0usize..6) {
        let (fs, s) = day(seed, pick);
        let e = evaluate_day(&fs, &s, &Lexicon::default()).unwrap();
        for t in [e.abnormality, e.duration, e.coverage] {
            prop_assert!(t.matched <= t.total);
        }
        for f in [e.abnormality_recall, e.duration_recall, e.coverage_fraction].into_iter().flatten() {
            prop_assert!((0.0..=1.0).contains(&f));
        }
        prop_assert!(e.hallucinated.len() <= e.abnormal_claims);
        prop_assert_eq!(e.matched.len() + e.missed.len(), fs.facts.len());
    }

    #[test]
    fn sentence_order_is_irrelevant(seed in 0u64..10_000, pick in 0usize..6, rot in 0usize..8) {
        let (fs, s) = day(seed, pick);
        let lex = Lexicon::default();
        let mut lines: Vec<String> = s.text.lines().map(str::to_string).collect();
        let base = evaluate_day(&fs, &s, &lex).unwrap();
        lines.reverse();
        let n = lines.len();
        lines.rotate_left(rot % n);
        let e = evaluate_day(&fs, &with_text(&s, &lines), &lex).unwrap();
        prop_assert_eq!((e.abnormality, e.duration, e.coverage), (base.abnormality, base.duration, base.coverage));
        prop_assert_eq!(e.hallucinated.len(), base.hallucinated.len());
        prop_assert_eq!(e.misclassified.len(), base.misclassified.len());
    }

    #[test]
    fn adding_a_perfect_summary_never_lowers_recall(seed in 0u64..10_000, pick in 0usize..6) {
        let (fs, s) = day(seed, pick);
        let lex = Lexicon::default();
        let base = evaluate_day(&fs, &s, &lex).unwrap();
        let mut lines: Vec<String> = s.text.lines().map(str::to_string).collect();
        lines.extend(template_summary(&fs).lines().map(str::to_string));
        let e = evaluate_day(&fs, &with_text(&s, &lines), &lex).unwrap();
        prop_assert!(e.abnormality.matched >= base.abnormality.matched);
        prop_assert!(e.duration.matched >= base.duration.matched);
        prop_assert_eq!(e.abnormality.matched, e.abnormality.total);
        prop_assert_eq!(e.coverage.matched, e.coverage.total);
    }

    #[test]
    fn micro_and_macro_agree_on_a_single_day(seed in 0u64..10_000, pick in 0usize..6) {
        let (fs, s) = day(seed, pick);
        let e = evaluate_day(&fs, &s, &Lexicon::default()).unwrap();
        let micro = aggregate(std::slice::from_ref(&e), Averaging::Micro).unwrap();
        let macro_ = aggregate(&[e], Averaging::Macro).unwrap();
        prop_assert_eq!(micro.pipelines[0].abnormality_recall, macro_.pipelines[0].abnormality_recall);
        prop_assert_eq!(micro.pipelines[0].coverage_percent, macro_.pipelines[0].coverage_percent);
    }
}
