//! Byte accounting checks for the flow simulator.

use foglet_core::config::EngineConfig;
use foglet_core::flowsim::FlowState;
use foglet_core::model::{LinkId, Millibits, RequestDoc};
use foglet_core::topology::{LinkStatus, Topology};
use foglet_core::{Engine, Orchestrator};
use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn doc(yaml: &str) -> RequestDoc {
    RequestDoc::from_yaml(yaml).unwrap()
}

pub fn check_counters(sys: &Orchestrator) -> Result<(), TestCaseError> {
    let elapsed = sys.now().millis();
    for f in sys.flows().flows() {
        let c = f.counters;
        prop_assert_eq!(c.sourced, c.delivered + c.cached + c.lost, "flow {}", f.id);
        // every flow here starts at time zero and sources continuously
        prop_assert_eq!(c.sourced, Millibits::of(f.rate, elapsed), "flow {}", f.id);
        prop_assert!(c.cached <= f.cached_peak);
        if f.state == FlowState::Stalled {
            prop_assert_eq!(c.cached, Millibits::ZERO);
        }
    }
    for cache in sys
        .topology()
        .nodes()
        .filter_map(|n| sys.flows().cache(&n.id))
    {
        let held: u64 = sys
            .flows()
            .flows()
            .filter(|f| f.cache_node.as_ref() == Some(&cache.node))
            .map(|f| f.counters.cached.0)
            .sum();
        prop_assert_eq!(held, cache.occupied.0);
        prop_assert!(cache.occupied <= cache.capacity);
    }
    sys.check_invariants().map_err(TestCaseError::fail)?;
    Ok(())
}

/// Places a few random requests plus a producer/consumer pair on a random
/// topology, then applies `events` random link flips and clock advances,
/// checking the counters after each. Returns the number of checks made.
pub fn random_faults(seed: u64, events: usize) -> Result<usize, TestCaseError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=7);
    let topo = Topology::from_doc(&super::random_topology(&mut rng, n, false)).unwrap();
    let mut engine = Engine::new(topo, EngineConfig::default());
    let count = rng.random_range(1..=5);
    for i in 0..count {
        let req = super::random_request(
            &mut rng,
            engine.topology(),
            &format!("p{i}"),
            &format!("c{i}"),
        );
        engine.submit(&req.to_doc()).unwrap();
    }
    let rate = rng.random_range(1..=8) as f64 / 4.0;
    engine
        .submit(&doc(&format!(
            "{{id: up, component: {{name: up, flows: [{{to: {{component: down}}, rate_mbps: {rate}}}]}}}}"
        )))
        .unwrap();
    engine.submit(&doc("{id: down, component: down}")).unwrap();
    engine.process_queue();
    check_counters(engine.system())?;

    let links: Vec<LinkId> = engine.topology().links().map(|l| l.id.clone()).collect();
    for _ in 0..events {
        if rng.random_bool(0.4) {
            let l = links.choose(&mut rng).unwrap();
            let status = if rng.random_bool(0.5) {
                LinkStatus::Up
            } else {
                LinkStatus::Down
            };
            engine.set_link_state(l, status).unwrap();
        } else {
            engine.advance(rng.random_range(1..=20_000));
        }
        check_counters(engine.system())?;
    }
    Ok(events + 1)
}
