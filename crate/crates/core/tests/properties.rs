use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde_json::{json, Map, Value};

use emagent_core::corpus::{chunk_document, normalize_entities, tokenize, ChunkParams, DocType, DocumentRecord, Language};
use emagent_core::efrec::{complete_query, composite_score, Attribute, Completion, EfQuery, Grade, GradeWeights, QualityGrades};
use emagent_core::evalkit::{aggregate_scores, pairwise_win_rates, Category, EvalItem, ExpertScore, MetricScores};
use emagent_core::inventory::{FilterSpec, GroupKey, InventoryRecord, InventoryStore};
use emagent_core::providers::{ModelProvider, StubProvider};
use emagent_core::retrieval::cosine_similarity;
use emagent_core::toolchain::{validate_arguments, ViolationKind};
use emagent_core::tools::aggregate_emissions_spec;
use emagent_core::Species;

fn text_strategy() -> impl Strategy<Value = String> {
    let word = prop_oneof![
        Just("NOx".to_string()),
        Just("nox".to_string()),
        Just("PM₂.₅".to_string()),
        Just("so2".to_string()),
        Just("co-benefits".to_string()),
        Just("排放".to_string()),
        Just("。".to_string()),
        Just("vehicle.".to_string()),
        "[a-z]{1,8}",
        "[A-Z0-9]{1,4}",
    ];
    prop::collection::vec((word, prop_oneof![Just(" "), Just("  "), Just("\n"), Just("")]), 1..400)
        .prop_map(|parts| parts.into_iter().map(|(w, s)| format!("{w}{s}")).collect())
}

fn grade() -> impl Strategy<Value = Grade> {
    prop::sample::select(Grade::ALL.to_vec())
}

proptest! {
    #[test]
    fn normalization_is_idempotent(text in text_strategy()) {
        let once = normalize_entities(&text);
        prop_assert_eq!(normalize_entities(&once), once);
    }

    #[test]
    fn tokens_cover_all_non_whitespace(text in text_strategy()) {
        let joined: String = tokenize(&text).concat();
        let stripped: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        prop_assert_eq!(joined, stripped);
    }

    #[test]
    fn chunks_respect_limits(text in text_strategy(), max_tokens in 16usize..300, overlap_frac in 0.0f64..0.9) {
        prop_assume!(!text.trim().is_empty());
        let overlap = ((max_tokens as f64) * overlap_frac) as usize;
        let doc = DocumentRecord::new("doc", DocType::Report, "t", Language::Mixed, text).unwrap();
        let chunks = chunk_document(&doc, ChunkParams { max_tokens, overlap }).unwrap();
        prop_assert!(!chunks.is_empty());
        for (i, c) in chunks.iter().enumerate() {
            prop_assert!(c.token_count >= 1 && c.token_count <= max_tokens);
            prop_assert_eq!(c.seq, i);
            prop_assert_eq!(&c.chunk_id, &format!("doc#{i}"));
            prop_assert_eq!(&c.index_text, &normalize_entities(&c.display_text));
        }
    }

    #[test]
    fn cosine_is_bounded_and_symmetric(a in text_strategy(), b in text_strategy()) {
        let stub = StubProvider::default();
        let (Ok(va), Ok(vb)) = (stub.embed_text(&a), stub.embed_text(&b)) else { return Ok(()) };
        let ab = cosine_similarity(&va, &vb).unwrap();
        let ba = cosine_similarity(&vb, &va).unwrap();
        prop_assert!((-1.0..=1.0).contains(&ab));
        prop_assert_eq!(ab.to_bits(), ba.to_bits());
    }

    #[test]
    fn composite_is_bounded_and_monotone(g in prop::array::uniform4(grade()), dim in 0usize..4) {
        let w = GradeWeights::default();
        let to = |g: [Grade; 4]| QualityGrades::new(g[0], g[1], g[2], g[3]);
        let s = composite_score(&to(g), &w);
        prop_assert!((1.0 - 1e-9..=4.0 + 1e-9).contains(&s));
        if g[dim] != Grade::A {
            let mut better = g;
            better[dim] = Grade::ALL[Grade::ALL.iter().position(|x| *x == g[dim]).unwrap() - 1];
            prop_assert!(composite_score(&to(better), &w) > s);
        }
    }

    #[test]
    fn missing_attributes_are_listed_in_order(mask in prop::array::uniform4(any::<bool>())) {
        let field = |present: bool, v: &str| present.then(|| v.to_string());
        let q = EfQuery {
            vehicle_type: field(mask[0], "bus"),
            fuel_type: field(mask[1], "diesel"),
            emission_standard: field(mask[2], "China V"),
            region: field(mask[3], "Guangdong"),
        };
        let order = [Attribute::VehicleType, Attribute::FuelType, Attribute::EmissionStandard, Attribute::Region];
        let want: Vec<Attribute> = order.iter().zip(mask).filter(|(_, m)| !m).map(|(a, _)| *a).collect();
        match complete_query(&q) {
            Completion::Complete(_) => prop_assert!(want.is_empty()),
            Completion::Missing(got) => prop_assert_eq!(got, want),
        }
    }
}

#[derive(Debug, Clone)]
enum ArgState {
    Absent,
    Valid,
    WrongType,
}

fn arg_state() -> impl Strategy<Value = ArgState> {
    prop_oneof![Just(ArgState::Absent), Just(ArgState::Valid), Just(ArgState::WrongType)]
}

proptest! {
    #[test]
    fn every_fault_is_reported(
        states in prop::collection::vec(arg_state(), 5),
        bad_enum in any::<bool>(),
        extras in prop::collection::btree_set("[a-z]{3,6}_x", 0..3),
    ) {
        let spec = aggregate_emissions_spec();
        let valid: [(&str, Value); 5] = [
            ("pollutant", json!("NOx")),
            ("year", json!(2020)),
            ("group_by", json!("sector")),
            ("region", json!("Guangdong")),
            ("sector", json!("mobile")),
        ];
        let mut args = Map::new();
        let mut expected: BTreeSet<(String, ViolationKind)> = BTreeSet::new();
        for ((name, good), state) in valid.iter().zip(&states) {
            let required = spec.param(name).unwrap().required;
            match state {
                ArgState::Absent if required => {
                    expected.insert((name.to_string(), ViolationKind::MissingRequired));
                }
                ArgState::Absent => {}
                ArgState::Valid => {
                    args.insert(name.to_string(), good.clone());
                }
                ArgState::WrongType => {
                    args.insert(name.to_string(), json!([1, 2]));
                    expected.insert((name.to_string(), ViolationKind::TypeMismatch));
                }
            }
        }
        if bad_enum && matches!(states[0], ArgState::Valid) {
            args.insert("pollutant".into(), json!("XYZ"));
            expected.insert(("pollutant".into(), ViolationKind::EnumMismatch));
        }
        for extra in &extras {
            args.insert(extra.clone(), json!(1));
            expected.insert((extra.clone(), ViolationKind::UnknownParam));
        }
        let got: BTreeSet<(String, ViolationKind)> =
            validate_arguments(&args, &spec).iter().map(|v| (v.path.clone(), v.kind())).collect();
        prop_assert_eq!(got, expected);
    }
}

fn species() -> impl Strategy<Value = Species> {
    prop::sample::select(vec![Species::Nox, Species::So2, Species::Co, Species::Voc])
}

fn record() -> impl Strategy<Value = InventoryRecord> {
    (
        prop::sample::select(vec!["GD", "GX"]),
        2015i32..2023,
        prop::sample::select(vec!["mobile", "industry", "residential"]),
        prop::sample::select(vec!["a", "b", "c"]),
        species(),
        0.0f64..1e5,
    )
        .prop_map(|(r, y, s, sub, p, a)| InventoryRecord::new(r, y, s, sub, p, a).unwrap())
}

proptest! {
    #[test]
    fn aggregate_conserves_mass(records in prop::collection::vec(record(), 0..200), key_idx in 0usize..4, pollutant in prop::option::of(species())) {
        let store = InventoryStore::new(records.clone());
        let filters = FilterSpec { pollutant, ..FilterSpec::default() };
        let table = store.aggregate(&filters, GroupKey::ALL[key_idx]).unwrap();
        let want: f64 = records.iter().filter(|r| pollutant.is_none_or(|p| p == r.pollutant)).map(|r| r.amount).sum();
        let got: f64 = table.rows.iter().map(|r| r.total).sum();
        prop_assert!((got - want).abs() <= 1e-6 * want.max(1.0));
        for w in table.rows.windows(2) {
            prop_assert!(w[0].total > w[1].total || (w[0].total == w[1].total && w[0].key < w[1].key));
        }
        prop_assert!(table.rows.iter().all(|r| (0.0..=1.0 + 1e-12).contains(&r.share)));
    }

    #[test]
    fn chart_from_trend_satisfies_invariants(records in prop::collection::vec(record(), 1..100), from in 2015i32..2019, span in 0i32..5) {
        let store = InventoryStore::new(records);
        let tab = store.trend(&FilterSpec::default(), from, from + span, GroupKey::Subsector).unwrap();
        if let Ok(chart) = emagent_core::inventory::make_chart(
            emagent_core::inventory::ChartSource::CrossTab(&tab),
            emagent_core::ChartKind::StackedBar,
            "t",
            "t/yr",
        ) {
            prop_assert!(chart.check_invariants().is_ok());
            prop_assert_eq!(chart.categories.len(), (span + 1) as usize);
        }
    }
}

fn metric_scores() -> impl Strategy<Value = MetricScores> {
    prop::array::uniform6(0.0f64..=1.0).prop_map(MetricScores::from_array)
}

fn eval_runs() -> impl Strategy<Value = Vec<(EvalItem, MetricScores)>> {
    prop::collection::vec((0usize..4, 1u8..=3, metric_scores()), 1..30).prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (c, d, s))| {
                let item = EvalItem {
                    item_id: format!("q{i:03}"),
                    question: "q".into(),
                    reference_answer: "r".into(),
                    gold_contexts: vec!["d#0".into()],
                    category: Category::ALL[c],
                    difficulty: d,
                    context_free: false,
                };
                (item, s)
            })
            .collect()
    })
}

fn expert_rows() -> impl Strategy<Value = Vec<ExpertScore>> {
    prop::collection::vec((0usize..6, 0usize..2, prop::array::uniform5(0u8..=5)), 1..40).prop_map(|rows| {
        rows.into_iter()
            .map(|(q, m, v)| ExpertScore {
                question_id: format!("q{q}"),
                model_id: ["A", "B"][m].into(),
                relevance: v[0],
                accuracy: v[1],
                specification: v[2],
                citation_authority: v[3],
                overall: v[4],
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn aggregation_is_order_invariant(runs in eval_runs(), seed in any::<u64>()) {
        let mut shuffled = runs.clone();
        shuffled.shuffle(&mut StdRng::seed_from_u64(seed));
        let a = serde_json::to_string(&aggregate_scores(&runs).unwrap()).unwrap();
        let b = serde_json::to_string(&aggregate_scores(&shuffled).unwrap()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn strata_stats_are_ordered(runs in eval_runs()) {
        let report = aggregate_scores(&runs).unwrap();
        for stratum in std::iter::once(&report.overall).chain(&report.by_category).chain(&report.by_difficulty) {
            for name in MetricScores::NAMES {
                let s = stratum.stats(name).unwrap();
                prop_assert!(s.min <= s.mean + 1e-12 && s.mean <= s.max + 1e-12);
                prop_assert!((0.0..=1.0).contains(&s.min) && (0.0..=1.0).contains(&s.max));
            }
        }
        let total: usize = report.by_category.iter().map(|s| s.count).sum();
        prop_assert_eq!(total, runs.len());
    }

    #[test]
    fn pairwise_counts_cover_common_questions(rows in expert_rows(), seed in any::<u64>()) {
        let Ok(report) = pairwise_win_rates(&rows, "A", "B") else { return Ok(()) };
        for d in &report.dimensions {
            prop_assert_eq!(d.wins_a + d.ties + d.wins_b, report.common_questions);
        }
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut StdRng::seed_from_u64(seed));
        prop_assert_eq!(pairwise_win_rates(&shuffled, "A", "B").unwrap(), report.clone());
        let swapped = pairwise_win_rates(&rows, "B", "A").unwrap();
        for (x, y) in report.dimensions.iter().zip(&swapped.dimensions) {
            prop_assert_eq!((x.wins_a, x.ties, x.wins_b), (y.wins_b, y.ties, y.wins_a));
        }
    }
}
