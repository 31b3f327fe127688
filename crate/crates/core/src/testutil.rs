use crate::config::EngineConfig;
use crate::model::{
    validate_request, AnyReference, DeploymentRequest, RequestDoc, RequestId, SimTime,
};
use crate::orchestrator::Orchestrator;
use crate::topology::Topology;

pub const REFERENCE: &str = include_str!("../../../scenarios/reference_topology.yaml");

pub fn reference() -> Topology {
    Topology::from_yaml(REFERENCE).unwrap()
}

pub fn system() -> Orchestrator {
    Orchestrator::new(reference(), EngineConfig::default())
}

pub fn request(yaml: &str) -> DeploymentRequest {
    let doc: RequestDoc = serde_yaml::from_str(yaml).unwrap();
    validate_request(
        &doc,
        &AnyReference,
        EngineConfig::default().default_footprint,
        &RequestId::new("r"),
        SimTime::ZERO,
    )
    .unwrap()
}
