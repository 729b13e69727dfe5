mod support;

use privflow_core::inference::{infer_flows, replay_witness, FlowEdgeKind, InferenceConfig};
use privflow_core::kb::{validate, KnowledgeBase};
use support::gen::{generate, MAX_ENTITIES, MAX_EVENTS, MAX_RELATIONS};
use support::oracle::oracle_facts;

#[test]
fn generated_kbs_are_valid_and_within_bounds() {
    for seed in 0..300 {
        let g = generate(seed);
        assert!(validate(&g.kb).is_clean(), "seed {seed}: {}", validate(&g.kb));
        assert!(g.kb.entity_count() <= MAX_ENTITIES, "seed {seed}");
        assert!(g.kb.relation_count() <= MAX_RELATIONS, "seed {seed}");
        assert!(!g.events.is_empty() && g.events.len() <= MAX_EVENTS);
    }
}

#[test]
fn inference_matches_oracle() {
    let mut nontrivial = 0;
    for seed in 0..300 {
        let g = generate(seed);
        let flows = infer_flows(&g.kb, &g.events, &InferenceConfig::default()).unwrap();
        let expected = oracle_facts(&g.kb, &g.events, 0.5);
        let facts = flows.facts();
        assert_eq!(facts.len(), flows.flows.len(), "seed {seed}: duplicate (root, recipient)");
        assert_eq!(facts, expected, "seed {seed}");
        if flows.flows.len() > g.events.len() {
            nontrivial += 1;
        }
    }
    assert!(nontrivial > 100, "generator too sparse: {nontrivial}");
}

#[test]
fn other_discretionary_factors_match_oracle() {
    for (seed, factor) in (1000..1100).zip([0.3, 0.9, 1.0, 0.125].into_iter().cycle()) {
        let g = generate(seed);
        let config = InferenceConfig {
            discretionary_factor: factor,
        };
        let flows = infer_flows(&g.kb, &g.events, &config).unwrap();
        assert_eq!(flows.facts(), oracle_facts(&g.kb, &g.events, factor), "seed {seed}");
    }
}

#[test]
fn every_witness_replays() {
    let config = InferenceConfig::default();
    for seed in 0..200 {
        let g = generate(seed);
        let flows = infer_flows(&g.kb, &g.events, &config).unwrap();
        for flow in &flows.flows {
            let path = flows.witness_path(flow.id);
            assert_eq!(path[0].kind, FlowEdgeKind::E1);
            let event = flows.event(flow.root).unwrap();
            let (payload, recipient, likelihood) =
                replay_witness(&g.kb, event, &path, &config).unwrap();
            assert_eq!((payload, recipient), (flow.payload, flow.recipient), "seed {seed}");
            assert_eq!(likelihood, flow.likelihood, "seed {seed}");
        }
    }
}

#[test]
fn inference_is_deterministic_and_survives_reload() {
    for seed in 0..50 {
        let g = generate(seed);
        let a = infer_flows(&g.kb, &g.events, &InferenceConfig::default()).unwrap();
        let reloaded = KnowledgeBase::from_json(&g.kb.to_json()).unwrap();
        let b = infer_flows(&reloaded, &g.events, &InferenceConfig::default()).unwrap();
        assert_eq!(a, b, "seed {seed}");
    }
}
