mod support;

use privflow_core::assessment::{flow_risk, noisy_or, service_risk};
use privflow_core::inference::{infer_flows, InferenceConfig};
use privflow_core::kb::{EntityId, KnowledgeBase, RelationKind};
use privflow_core::nudge::{nudge_stats, record_action, BehaviorLog, Nudge, NudgeScope, NudgeSubject, Template};
use privflow_core::preference::{adapt, Action, AdaptConfig, BehaviorEvent, BehaviorKind, NudgeRef, PreferenceProfile, Segment};
use privflow_core::kb::DataCategory;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use support::gen::{generate, random_relation, rng};

/// Max sensitivity over items "me" owns in the package, read straight off relations.
fn impact(kb: &KnowledgeBase, package: EntityId) -> f64 {
    let me = kb.me().unwrap();
    let owned: Vec<EntityId> = kb
        .relations()
        .filter(|r| r.kind == RelationKind::OwnsData && r.src == me)
        .map(|r| r.dst)
        .collect();
    kb.relations()
        .filter(|r| r.kind == RelationKind::Contains && r.src == package && owned.contains(&r.dst))
        .filter_map(|r| kb.data_item(r.dst))
        .map(|d| d.sensitivity)
        .fold(0.0, f64::max)
}

#[test]
fn adding_a_relation_never_shrinks_flows_or_risk() {
    let config = InferenceConfig::default();
    let mut pairs = 0;
    for seed in 0..150u64 {
        let g = generate(seed);
        let mut grown = g.kb.clone();
        let mut r = rng(seed ^ 0x5eed);
        if !(0..50).any(|_| random_relation(&mut r, &mut grown)) {
            continue;
        }
        pairs += 1;
        let before = infer_flows(&g.kb, &g.events, &config).unwrap();
        let after = infer_flows(&grown, &g.events, &config).unwrap();
        let after_facts = after.facts();
        for (key, likelihood) in before.facts() {
            let grown_l = after_facts.get(&key).copied().unwrap_or(0.0);
            assert!(grown_l >= likelihood, "seed {seed}: {key:?} fell from {likelihood} to {grown_l}");
        }
        for e in &g.events {
            let a = service_risk(e.service, &before, &g.kb).score;
            let b = service_risk(e.service, &after, &grown).score;
            assert!(b >= a, "seed {seed}: service risk fell from {a} to {b}");
        }
    }
    assert!(pairs >= 100, "only {pairs} pairs");
}

#[test]
fn score_algebra_matches_direct_recomputation() {
    let mut checks = 0;
    for seed in 0..200u64 {
        let g = generate(seed);
        let flows = infer_flows(&g.kb, &g.events, &InferenceConfig::default()).unwrap();
        for flow in &flows.flows {
            let risk = flow_risk(flow, &g.kb);
            let expected = impact(&g.kb, flow.payload) * flow.likelihood;
            assert!((risk.score - expected).abs() <= 1e-12, "seed {seed}");
            checks += 1;
        }
        let mut services: Vec<EntityId> = g.events.iter().map(|e| e.service).collect();
        services.dedup();
        for s in services {
            let roots: Vec<_> = g.events.iter().filter(|e| e.service == s).map(|e| e.id).collect();
            let product: f64 = flows
                .flows
                .iter()
                .filter(|f| roots.contains(&f.root))
                .map(|f| 1.0 - impact(&g.kb, f.payload) * f.likelihood)
                .product();
            let score = service_risk(s, &flows, &g.kb).score;
            assert!((score - (1.0 - product)).abs() <= 1e-12, "seed {seed}");
            checks += 1;
        }
    }
    let mut r = rng(42);
    for _ in 0..1000 {
        let n = r.gen_range(0..8);
        let ps: Vec<f64> = (0..n).map(|_| r.gen::<f64>()).collect();
        let direct = 1.0 - ps.iter().map(|p| 1.0 - p).product::<f64>();
        assert!((noisy_or(ps.iter().copied()) - direct).abs() <= 1e-12);
        checks += 1;
    }
    assert!(checks >= 1000);
}

fn event(id: u64, action: Action, category: DataCategory, nudged: bool) -> BehaviorEvent {
    BehaviorEvent {
        id,
        timestamp: id as i64,
        kind: if nudged { BehaviorKind::Internal } else { BehaviorKind::External },
        action,
        nudge: nudged.then(|| NudgeRef {
            id: format!("n{id}"),
            template: Template::IssueDetail,
        }),
        category: Some(category),
        service: None,
        control: None,
    }
}

fn arb_event() -> impl Strategy<Value = BehaviorEvent> {
    (
        0u64..1000,
        prop::sample::select(vec![Action::Keep, Action::More, Action::Delete, Action::DisableSharing, Action::Ignore]),
        prop::sample::select(DataCategory::ALL.to_vec()),
        any::<bool>(),
    )
        .prop_map(|(id, a, c, n)| event(id, a, c, n))
}

fn level2(id: usize) -> Nudge {
    Nudge {
        id: format!("l2-{id}"),
        level: 2,
        template: if id.is_multiple_of(2) { Template::IssueDetail } else { Template::ActionMenu },
        subject: NudgeSubject::Issue { issue: format!("i{id}") },
        body: vec![],
        options: vec![Action::Keep, Action::Delete, Action::DisableSharing],
        created_at: 0,
        parent: None,
        service: None,
        category: None,
        scope: NudgeScope::default(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn document_round_trip(seed in 0u64..10_000) {
        let g = generate(seed);
        let back = KnowledgeBase::from_json(&g.kb.to_json()).unwrap();
        prop_assert_eq!(back, g.kb);
    }

    #[test]
    fn adapt_stays_in_bounds(
        segment in prop::sample::select(vec![Segment::Fundamentalist, Segment::Pragmatist, Segment::Unconcerned]),
        rounds in prop::collection::vec(prop::collection::vec(arb_event(), 0..12), 1..8),
    ) {
        let config = AdaptConfig::default();
        let mut profile = PreferenceProfile::for_segment(segment);
        for window in &rounds {
            let next = adapt(&profile, window, &config);
            for w in next.category_weights.values() {
                prop_assert!(*w >= config.floor - 1e-12 && *w <= config.cap + 1e-12);
            }
            prop_assert!(next.version == profile.version || next.version == profile.version + 1);
            profile = next;
        }
        prop_assert_eq!(adapt(&profile, &[], &config), profile);
    }

    #[test]
    fn stats_ignore_record_order(
        actions in prop::collection::vec((0usize..6, prop::sample::select(vec![Action::Keep, Action::Delete, Action::DisableSharing])), 0..20),
        seed in any::<u64>(),
    ) {
        let nudges: Vec<Nudge> = (0..6).map(level2).collect();
        let mut ops: Vec<(usize, Option<Action>)> = (0..6).map(|i| (i, None)).collect();
        ops.extend(actions.iter().map(|(i, a)| (*i, Some(*a))));
        let run = |ops: &[(usize, Option<Action>)]| {
            let mut log = BehaviorLog::new();
            for (i, op) in ops {
                match op {
                    None => { log.mark_shown(&nudges[*i], 0); }
                    Some(a) => { record_action(&mut log, &nudges[*i], *a, 0).unwrap(); }
                }
            }
            nudge_stats(&log)
        };
        let first = run(&ops);
        let mut shuffled = ops.clone();
        shuffled.shuffle(&mut rng(seed));
        prop_assert_eq!(&run(&shuffled), &first);
        for s in &first {
            prop_assert!((0.0..=1.0).contains(&s.protective_rate));
        }
    }
}

#[test]
fn adapt_counts_only_nudged_leniency() {
    let profile = PreferenceProfile::for_segment(Segment::Pragmatist);
    let window: Vec<_> = (0..3).map(|i| event(i, Action::Keep, DataCategory::Location, false)).collect();
    assert_eq!(adapt(&profile, &window, &AdaptConfig::default()), profile);
}
