//! One scheduler-versus-oracle comparison on a partly loaded random system.

use foglet_core::config::EngineConfig;
use foglet_core::model::{LinkId, NetworkReservation};
use foglet_core::negotiator::{run_queue, transact};
use foglet_core::scheduler::{self, Execution};
use foglet_core::topology::{LinkStatus, Topology};
use foglet_core::Orchestrator;
use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{oracle_choice, oracle_scores, random_request, random_topology};

/// A random topology of at most eight nodes with a few components already
/// placed and possibly a link failed afterwards.
fn loaded_system(rng: &mut ChaCha8Rng) -> Orchestrator {
    let n = rng.random_range(1..=8);
    let topo = Topology::from_doc(&random_topology(rng, n, false)).unwrap();
    let mut sys = Orchestrator::new(topo, EngineConfig::default());
    let prior: Vec<_> = (0..rng.random_range(0..6))
        .map(|i| random_request(rng, sys.topology(), &format!("p{i}"), &format!("c{i}")))
        .collect();
    run_queue(&mut sys, prior);
    let links: Vec<LinkId> = sys.topology().links().map(|l| l.id.clone()).collect();
    if let Some(l) = links.choose(rng) {
        if rng.random_bool(0.3) {
            sys.set_link_state(l, LinkStatus::Down).unwrap();
        }
    }
    sys
}

fn footprint_of(bookings: &[NetworkReservation]) -> Vec<(String, u64)> {
    bookings
        .iter()
        .map(|b| (b.flow.as_str().to_owned(), b.bandwidth.bps()))
        .collect()
}

/// Returns whether the request was placed.
pub fn oracle_case(seed: u64) -> Result<bool, TestCaseError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sys = loaded_system(&mut rng);
    let req = random_request(&mut rng, sys.topology(), "t", "target");

    let expected = oracle_scores(sys.topology(), sys.inventory().state(), sys.config(), &req);
    let view = sys.snapshot();
    let ctx = sys.context(&view);
    let seq = scheduler::rank(&ctx, &req, Execution::Sequential);
    prop_assert_eq!(&seq, &scheduler::rank(&ctx, &req, Execution::Parallel));
    let got: Vec<_> = seq.iter().filter_map(|e| e.scored.clone()).collect();
    prop_assert_eq!(got.len(), expected.len());
    for (g, e) in got.iter().zip(&expected) {
        prop_assert_eq!(&g.node, &e.node);
        prop_assert!(
            (g.score - e.score).abs() < 1e-12,
            "{} vs {}",
            g.score,
            e.score
        );
    }

    let decision = transact(&mut sys, &req, |_, _| {});
    let placed = decision.placement.as_ref().map(|p| p.node_id.clone());
    prop_assert_eq!(&placed, &oracle_choice(&expected));
    sys.check_invariants().map_err(TestCaseError::fail)?;

    // Evicting a lone placement restores the inventory it was chosen
    // from, so re-scheduling must pick the same node.
    if let Some(p) = &decision.placement {
        let alone = sys
            .inventory()
            .state()
            .running_placements()
            .filter(|q| q.node_id == p.node_id)
            .count()
            == 1;
        if alone {
            sys.evict_node(&p.node_id).unwrap();
            let again = transact(&mut sys, &req, |_, _| {}).placement.unwrap();
            prop_assert_eq!(&again.node_id, &p.node_id);
            prop_assert_eq!(
                footprint_of(&again.network_reservations),
                footprint_of(&p.network_reservations)
            );
        }
    }
    Ok(decision.placement.is_some())
}
