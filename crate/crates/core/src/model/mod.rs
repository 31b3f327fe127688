//! Domain types shared by every other module.

mod request;
mod units;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use request::{
    validate_request, AccessRightsDoc, AnyReference, ComponentDoc, ComponentSpecDoc, ComputeDoc,
    FlowDoc, LocationDoc, NetworkDoc, PeerDoc, ReferenceCatalog, RequestDoc, RequirementDoc,
    ValidationError, ValidationErrorKind, DEFAULT_TENANT,
};
pub use units::{
    secs_to_millis, Bandwidth, EndpointId, FlowId, LinkId, Millibits, NodeId, RegionId, RequestId,
    ReservationId, ResourceVector, SimTime, TenantId,
};

use crate::topology::Path;

/// Infrastructure tier. Only the first three tiers host components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tier {
    #[serde(alias = "cloud")]
    Cloud,
    #[serde(alias = "edge_cloudlet")]
    EdgeCloudlet,
    #[serde(alias = "edge_gateway")]
    EdgeGateway,
    #[serde(alias = "swarm_of_things")]
    SwarmOfThings,
}

impl Tier {
    pub fn hosts_workloads(self) -> bool {
        !matches!(self, Tier::SwarmOfThings)
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tier::Cloud => "Cloud",
            Tier::EdgeCloudlet => "EdgeCloudlet",
            Tier::EdgeGateway => "EdgeGateway",
            Tier::SwarmOfThings => "SwarmOfThings",
        };
        f.write_str(s)
    }
}

/// Usage profile attached to a compute requirement. Shapes ranking only.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum ComputeProfile {
    #[default]
    GeneralPurpose,
    ComputeOptimized,
    MemoryOptimized,
    StorageOptimized,
}

impl ComputeProfile {
    /// Weights applied to the (vcpu, ram, disk) free-capacity fractions.
    pub fn weights(self) -> [f64; 3] {
        match self {
            ComputeProfile::GeneralPurpose => [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            ComputeProfile::ComputeOptimized => [0.6, 0.2, 0.2],
            ComputeProfile::MemoryOptimized => [0.2, 0.6, 0.2],
            ComputeProfile::StorageOptimized => [0.2, 0.2, 0.6],
        }
    }
}

impl FromStr for ComputeProfile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match normalize_name(s).as_str() {
            "generalpurpose" => Ok(ComputeProfile::GeneralPurpose),
            "computeoptimized" => Ok(ComputeProfile::ComputeOptimized),
            "memoryoptimized" => Ok(ComputeProfile::MemoryOptimized),
            "storageoptimized" => Ok(ComputeProfile::StorageOptimized),
            _ => Err(format!("unknown compute profile `{s}`")),
        }
    }
}

impl fmt::Display for ComputeProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Usage profile attached to a network requirement.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum NetworkProfile {
    #[default]
    BestEffort,
    InteractiveApplication,
    SignalingAndVideoStreaming,
    InteractiveRealTimeVideo,
}

impl NetworkProfile {
    pub const ALL: [NetworkProfile; 4] = [
        NetworkProfile::BestEffort,
        NetworkProfile::InteractiveApplication,
        NetworkProfile::SignalingAndVideoStreaming,
        NetworkProfile::InteractiveRealTimeVideo,
    ];
}

impl FromStr for NetworkProfile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match normalize_name(s).as_str() {
            "besteffort" => Ok(NetworkProfile::BestEffort),
            "interactiveapplication" => Ok(NetworkProfile::InteractiveApplication),
            "signalingandvideostreaming" => Ok(NetworkProfile::SignalingAndVideoStreaming),
            "interactiverealtimevideo" | "interactiveandrealtimevideo" => {
                Ok(NetworkProfile::InteractiveRealTimeVideo)
            }
            _ => Err(format!("unknown network profile `{s}`")),
        }
    }
}

impl fmt::Display for NetworkProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

fn normalize_name(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

/// Path quality bounds for one network profile. `None` imposes nothing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub min_bandwidth: Option<Bandwidth>,
    pub max_latency_ms: Option<f64>,
    pub max_jitter_ms: Option<f64>,
}

/// One threshold row per network profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileThresholds {
    rows: BTreeMap<NetworkProfile, Threshold>,
}

impl ProfileThresholds {
    pub fn get(&self, profile: NetworkProfile) -> Threshold {
        self.rows.get(&profile).copied().unwrap_or_default()
    }

    pub fn set(&mut self, profile: NetworkProfile, threshold: Threshold) {
        self.rows.insert(profile, threshold);
    }

    pub fn iter(&self) -> impl Iterator<Item = (NetworkProfile, Threshold)> + '_ {
        self.rows.iter().map(|(p, t)| (*p, *t))
    }
}

impl std::ops::Index<NetworkProfile> for ProfileThresholds {
    type Output = Threshold;

    fn index(&self, profile: NetworkProfile) -> &Threshold {
        const NONE: Threshold = Threshold {
            min_bandwidth: None,
            max_latency_ms: None,
            max_jitter_ms: None,
        };
        self.rows.get(&profile).unwrap_or(&NONE)
    }
}

impl Default for ProfileThresholds {
    fn default() -> Self {
        default_thresholds()
    }
}

/// The built-in threshold table. Every value can be overridden from config.
pub fn default_thresholds() -> ProfileThresholds {
    let mbps = |v: f64| Bandwidth::from_mbps(v);
    let mut rows = BTreeMap::new();
    rows.insert(NetworkProfile::BestEffort, Threshold::default());
    rows.insert(
        NetworkProfile::InteractiveApplication,
        Threshold {
            min_bandwidth: mbps(1.0),
            max_latency_ms: Some(100.0),
            max_jitter_ms: None,
        },
    );
    rows.insert(
        NetworkProfile::SignalingAndVideoStreaming,
        Threshold {
            min_bandwidth: mbps(4.0),
            max_latency_ms: Some(300.0),
            max_jitter_ms: None,
        },
    );
    rows.insert(
        NetworkProfile::InteractiveRealTimeVideo,
        Threshold {
            min_bandwidth: mbps(4.0),
            max_latency_ms: Some(50.0),
            max_jitter_ms: Some(10.0),
        },
    );
    ProfileThresholds { rows }
}

/// Which side of a flow the declaring component sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FlowDirection {
    /// The peer sends to the component.
    Inbound,
    /// The component sends to the peer.
    Outbound,
}

/// The other end of a declared flow.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FlowPeer {
    Endpoint(EndpointId),
    /// Another component of the same tenant, by name.
    Component(String),
}

impl fmt::Display for FlowPeer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlowPeer::Endpoint(e) => write!(f, "endpoint {e}"),
            FlowPeer::Component(c) => write!(f, "component {c}"),
        }
    }
}

/// A constant-rate traffic template declared by a component.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FlowSpec {
    pub peer: FlowPeer,
    pub direction: FlowDirection,
    pub rate: Bandwidth,
}

/// An independently deployable unit of software. The image reference is
/// opaque.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ApplicationComponent {
    pub name: String,
    pub image: String,
    pub flows: Vec<FlowSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Requirement {
    Compute {
        profile: ComputeProfile,
        request: ResourceVector,
    },
    Network {
        profile: NetworkProfile,
        endpoint: EndpointId,
    },
    Location {
        region: RegionId,
    },
    AccessRights {
        label: String,
    },
}

impl fmt::Display for Requirement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Requirement::Compute { profile, request } => write!(f, "compute({profile}, {request})"),
            Requirement::Network { profile, endpoint } => {
                write!(f, "network({profile} to {endpoint})")
            }
            Requirement::Location { region } => write!(f, "location({region})"),
            Requirement::AccessRights { label } => write!(f, "access_rights({label})"),
        }
    }
}

/// A validated tenant submission: one component plus its requirements.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeploymentRequest {
    pub id: RequestId,
    pub tenant: TenantId,
    pub component: ApplicationComponent,
    pub requirements: Vec<Requirement>,
    pub submitted_at: SimTime,
}

impl DeploymentRequest {
    pub fn compute_requirement(&self) -> Option<(ComputeProfile, ResourceVector)> {
        self.requirements.iter().find_map(|r| match r {
            Requirement::Compute { profile, request } => Some((*profile, *request)),
            _ => None,
        })
    }

    pub fn network_requirements(&self) -> impl Iterator<Item = (NetworkProfile, &EndpointId)> {
        self.requirements.iter().filter_map(|r| match r {
            Requirement::Network { profile, endpoint } => Some((*profile, endpoint)),
            _ => None,
        })
    }

    /// Requests that carry a network requirement with a non-default profile
    /// get all of their traffic admission-controlled; everything else is
    /// best effort.
    pub fn traffic_class(&self) -> TrafficClass {
        if self
            .network_requirements()
            .any(|(p, _)| p != NetworkProfile::BestEffort)
        {
            TrafficClass::Guaranteed
        } else {
            TrafficClass::BestEffort
        }
    }
}

/// Whether a flow's bandwidth is reserved (and admission-checked) or only
/// booked as best-effort load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TrafficClass {
    Guaranteed,
    BestEffort,
}

/// One end of a simulated flow.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FlowEnd {
    Endpoint(EndpointId),
    Component { request: RequestId, name: String },
}

impl FlowEnd {
    pub fn request(&self) -> Option<&RequestId> {
        match self {
            FlowEnd::Component { request, .. } => Some(request),
            FlowEnd::Endpoint(_) => None,
        }
    }

    pub fn label(&self) -> &str {
        match self {
            FlowEnd::Endpoint(e) => e.as_str(),
            FlowEnd::Component { name, .. } => name,
        }
    }
}

/// Bandwidth booked for one flow along its path.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetworkReservation {
    pub flow: FlowId,
    pub source: FlowEnd,
    pub sink: FlowEnd,
    pub path: Path,
    pub bandwidth: Bandwidth,
    pub class: TrafficClass,
    /// The already-placed component on the other end of the flow, if any.
    pub counterpart: Option<RequestId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PlacementState {
    Running,
    Evicted,
}

/// A committed binding of a component to a node.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Placement {
    pub request_id: RequestId,
    pub tenant: TenantId,
    pub component: ApplicationComponent,
    pub traffic_class: TrafficClass,
    pub node_id: NodeId,
    pub allocated: ResourceVector,
    pub network_reservations: Vec<NetworkReservation>,
    pub state: PlacementState,
}

/// Builds the stable identifier of a flow between two ends for a tenant.
pub fn flow_id(tenant: &TenantId, source: &FlowEnd, sink: &FlowEnd) -> FlowId {
    FlowId::new(format!("{tenant}/{}->{}", source.label(), sink.label()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn best_effort_row_imposes_nothing() {
        let t = default_thresholds();
        assert_eq!(t[NetworkProfile::BestEffort], Threshold::default());
    }

    #[test]
    fn default_threshold_values() {
        let t = default_thresholds();
        let svs = t[NetworkProfile::SignalingAndVideoStreaming];
        assert_eq!(svs.min_bandwidth, Bandwidth::from_mbps(4.0));
        assert_eq!(svs.max_latency_ms, Some(300.0));
        let ia = t[NetworkProfile::InteractiveApplication];
        assert_eq!(ia.min_bandwidth, Bandwidth::from_mbps(1.0));
        assert_eq!(ia.max_latency_ms, Some(100.0));
        let rtv = t[NetworkProfile::InteractiveRealTimeVideo];
        assert_eq!(rtv.max_jitter_ms, Some(10.0));
        assert_eq!(rtv.max_latency_ms, Some(50.0));
    }

    #[test]
    fn profile_names_parse_loosely() {
        assert_eq!(
            "SignalingAndVideoStreaming".parse::<NetworkProfile>(),
            Ok(NetworkProfile::SignalingAndVideoStreaming)
        );
        assert_eq!(
            "signaling_and_video_streaming".parse::<NetworkProfile>(),
            Ok(NetworkProfile::SignalingAndVideoStreaming)
        );
        assert_eq!(
            "compute-optimized".parse::<ComputeProfile>(),
            Ok(ComputeProfile::ComputeOptimized)
        );
        assert!("Turbo".parse::<ComputeProfile>().is_err());
    }

    #[test]
    fn swarm_tier_never_hosts() {
        assert!(!Tier::SwarmOfThings.hosts_workloads());
        assert!(Tier::EdgeGateway.hosts_workloads());
    }

    #[test]
    fn profile_weights_sum_to_one() {
        for p in [
            ComputeProfile::GeneralPurpose,
            ComputeProfile::ComputeOptimized,
            ComputeProfile::MemoryOptimized,
            ComputeProfile::StorageOptimized,
        ] {
            let s: f64 = p.weights().iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
