//! The external request document and its validation into a
//! [`DeploymentRequest`].

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::units::vcpus_to_millis;
use super::{
    ApplicationComponent, Bandwidth, ComputeProfile, DeploymentRequest, EndpointId, FlowDirection,
    FlowPeer, FlowSpec, NetworkProfile, RegionId, RequestId, Requirement, ResourceVector, SimTime,
    TenantId,
};

/// Raw request document, as submitted over HTTP or read from a file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tenant: Option<String>,
    pub component: ComponentDoc,
    #[serde(default, with = "serde_yaml::with::singleton_map_recursive")]
    pub requirements: Vec<RequirementDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub submitted_at_ms: Option<u64>,
}

impl RequestDoc {
    /// Parses a YAML (or JSON) request document.
    pub fn from_yaml(text: &str) -> Result<RequestDoc, ValidationError> {
        serde_yaml::from_str(text).map_err(|e| ValidationError::invalid("document", e.to_string()))
    }
}

/// Either a bare component name or a full component description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComponentDoc {
    Name(String),
    Spec(ComponentSpecDoc),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpecDoc {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    #[serde(
        default,
        skip_serializing_if = "Vec::is_empty",
        with = "serde_yaml::with::singleton_map_recursive"
    )]
    pub flows: Vec<FlowDoc>,
}

/// A declared flow: exactly one of `from` (inbound) or `to` (outbound).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<PeerDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<PeerDoc>,
    pub rate_mbps: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeerDoc {
    Endpoint(String),
    Component(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequirementDoc {
    Compute(ComputeDoc),
    Network(NetworkDoc),
    Location(LocationDoc),
    AccessRights(AccessRightsDoc),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComputeDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vcpus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ram_mib: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disk_gib: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    pub endpoint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocationDoc {
    pub region: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccessRightsDoc {
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ValidationErrorKind {
    /// The document is structurally invalid.
    Invalid,
    /// The document names an endpoint or region the topology does not know.
    UnknownReference,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("invalid request field `{field}`: {reason}")]
pub struct ValidationError {
    pub field: String,
    pub reason: String,
    pub kind: ValidationErrorKind,
}

impl ValidationError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ValidationError {
            field: field.into(),
            reason: reason.into(),
            kind: ValidationErrorKind::Invalid,
        }
    }

    pub fn unknown(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ValidationError {
            field: field.into(),
            reason: reason.into(),
            kind: ValidationErrorKind::UnknownReference,
        }
    }
}

/// Resolves the endpoint and region names a request may mention.
pub trait ReferenceCatalog {
    fn has_endpoint(&self, id: &str) -> bool;
    fn has_region(&self, id: &str) -> bool;
}

/// Accepts every reference; for purely structural validation.
#[derive(Debug, Clone, Copy, Default)]
pub struct AnyReference;

impl ReferenceCatalog for AnyReference {
    fn has_endpoint(&self, _: &str) -> bool {
        true
    }

    fn has_region(&self, _: &str) -> bool {
        true
    }
}

pub const DEFAULT_TENANT: &str = "default";

fn check_identifier(field: &str, value: &str) -> Result<(), ValidationError> {
    if value.is_empty() {
        return Err(ValidationError::invalid(field, "empty"));
    }
    if !value
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
    {
        return Err(ValidationError::invalid(
            field,
            "must contain only ASCII letters, digits, `_` or `-`",
        ));
    }
    Ok(())
}

fn quantity(field: String, v: Option<f64>, integral: bool) -> Result<Option<f64>, ValidationError> {
    let Some(v) = v else { return Ok(None) };
    if !v.is_finite() {
        return Err(ValidationError::invalid(field, "not a finite number"));
    }
    if v < 0.0 {
        return Err(ValidationError::invalid(field, "negative"));
    }
    if integral && v.fract() != 0.0 {
        return Err(ValidationError::invalid(field, "not an integer"));
    }
    Ok(Some(v))
}

/// Validates a raw document and applies defaults.
///
/// `default_footprint` fills compute quantities the document leaves out;
/// `fallback_id` and `now` are used when the document carries no id or
/// submission time.
pub fn validate_request(
    raw: &RequestDoc,
    refs: &dyn ReferenceCatalog,
    default_footprint: ResourceVector,
    fallback_id: &RequestId,
    now: SimTime,
) -> Result<DeploymentRequest, ValidationError> {
    let id = match &raw.id {
        Some(id) => {
            check_identifier("id", id)?;
            RequestId::new(id.clone())
        }
        None => fallback_id.clone(),
    };
    let tenant = match &raw.tenant {
        Some(t) => {
            check_identifier("tenant", t)?;
            TenantId::new(t.clone())
        }
        None => TenantId::new(DEFAULT_TENANT),
    };

    let component = match &raw.component {
        ComponentDoc::Name(name) => {
            check_identifier("component.name", name)?;
            ApplicationComponent {
                name: name.clone(),
                image: name.clone(),
                flows: Vec::new(),
            }
        }
        ComponentDoc::Spec(spec) => validate_component(spec, refs)?,
    };

    let mut requirements = Vec::with_capacity(raw.requirements.len());
    let mut seen_compute = false;
    let mut seen_location = false;
    let mut endpoints = BTreeSet::new();
    for (i, req) in raw.requirements.iter().enumerate() {
        let at = |f: &str| format!("requirements[{i}].{f}");
        let parsed = match req {
            RequirementDoc::Compute(c) => {
                if seen_compute {
                    return Err(ValidationError::invalid(
                        format!("requirements[{i}]"),
                        "duplicate compute requirement",
                    ));
                }
                seen_compute = true;
                let profile = match &c.profile {
                    Some(p) => p
                        .parse::<ComputeProfile>()
                        .map_err(|e| ValidationError::invalid(at("compute.profile"), e))?,
                    None => ComputeProfile::GeneralPurpose,
                };
                let vcpus = quantity(at("compute.vcpus"), c.vcpus, false)?;
                let ram = quantity(at("compute.ram_mib"), c.ram_mib, true)?;
                let disk = quantity(at("compute.disk_gib"), c.disk_gib, true)?;
                let millicpus = match vcpus {
                    Some(v) => vcpus_to_millis(v).ok_or_else(|| {
                        ValidationError::invalid(at("compute.vcpus"), "finer than a millicore")
                    })?,
                    None => default_footprint.millicpus,
                };
                let request = ResourceVector {
                    millicpus,
                    ram_mib: ram.map_or(default_footprint.ram_mib, |v| v as u64),
                    disk_gib: disk.map_or(default_footprint.disk_gib, |v| v as u64),
                };
                Requirement::Compute { profile, request }
            }
            RequirementDoc::Network(n) => {
                let profile = match &n.profile {
                    Some(p) => p
                        .parse::<NetworkProfile>()
                        .map_err(|e| ValidationError::invalid(at("network.profile"), e))?,
                    None => NetworkProfile::BestEffort,
                };
                if n.endpoint.is_empty() {
                    return Err(ValidationError::invalid(at("network.endpoint"), "empty"));
                }
                if !refs.has_endpoint(&n.endpoint) {
                    return Err(ValidationError::unknown(
                        at("network.endpoint"),
                        format!("unknown endpoint `{}`", n.endpoint),
                    ));
                }
                if !endpoints.insert(n.endpoint.clone()) {
                    return Err(ValidationError::invalid(
                        at("network.endpoint"),
                        format!("duplicate network requirement for `{}`", n.endpoint),
                    ));
                }
                Requirement::Network {
                    profile,
                    endpoint: EndpointId::new(n.endpoint.clone()),
                }
            }
            RequirementDoc::Location(l) => {
                if seen_location {
                    return Err(ValidationError::invalid(
                        format!("requirements[{i}]"),
                        "duplicate location requirement",
                    ));
                }
                seen_location = true;
                if l.region.is_empty() {
                    return Err(ValidationError::invalid(at("location.region"), "empty"));
                }
                if !refs.has_region(&l.region) {
                    return Err(ValidationError::unknown(
                        at("location.region"),
                        format!("unknown region `{}`", l.region),
                    ));
                }
                Requirement::Location {
                    region: RegionId::new(l.region.clone()),
                }
            }
            RequirementDoc::AccessRights(a) => {
                if a.label.is_empty() {
                    return Err(ValidationError::invalid(at("access_rights.label"), "empty"));
                }
                Requirement::AccessRights {
                    label: a.label.clone(),
                }
            }
        };
        requirements.push(parsed);
    }

    Ok(DeploymentRequest {
        id,
        tenant,
        component,
        requirements,
        submitted_at: raw.submitted_at_ms.map(SimTime::from_millis).unwrap_or(now),
    })
}

fn validate_component(
    spec: &ComponentSpecDoc,
    refs: &dyn ReferenceCatalog,
) -> Result<ApplicationComponent, ValidationError> {
    check_identifier("component.name", &spec.name)?;
    let mut flows = Vec::with_capacity(spec.flows.len());
    for (i, f) in spec.flows.iter().enumerate() {
        let field = format!("component.flows[{i}]");
        let (peer, direction) = match (&f.from, &f.to) {
            (Some(p), None) => (p, FlowDirection::Inbound),
            (None, Some(p)) => (p, FlowDirection::Outbound),
            _ => {
                return Err(ValidationError::invalid(
                    field,
                    "exactly one of `from` or `to` is required",
                ))
            }
        };
        let peer = match peer {
            PeerDoc::Endpoint(e) => {
                if !refs.has_endpoint(e) {
                    return Err(ValidationError::unknown(
                        field,
                        format!("unknown endpoint `{e}`"),
                    ));
                }
                FlowPeer::Endpoint(EndpointId::new(e.clone()))
            }
            PeerDoc::Component(c) => {
                check_identifier(&format!("{field}.component"), c)?;
                if *c == spec.name {
                    return Err(ValidationError::invalid(field, "flow to itself"));
                }
                FlowPeer::Component(c.clone())
            }
        };
        let rate = quantity(format!("{field}.rate_mbps"), Some(f.rate_mbps), false)?
            .and_then(Bandwidth::from_mbps)
            .ok_or_else(|| {
                ValidationError::invalid(format!("{field}.rate_mbps"), "out of range")
            })?;
        let spec = FlowSpec {
            peer,
            direction,
            rate,
        };
        if flows.contains(&spec) {
            return Err(ValidationError::invalid(field, "duplicate flow"));
        }
        flows.push(spec);
    }
    Ok(ApplicationComponent {
        name: spec.name.clone(),
        image: spec.image.clone().unwrap_or_else(|| spec.name.clone()),
        flows,
    })
}

impl DeploymentRequest {
    /// Renders the request back into a fully explicit document.
    pub fn to_doc(&self) -> RequestDoc {
        let flows = self
            .component
            .flows
            .iter()
            .map(|f| {
                let peer = match &f.peer {
                    FlowPeer::Endpoint(e) => PeerDoc::Endpoint(e.to_string()),
                    FlowPeer::Component(c) => PeerDoc::Component(c.clone()),
                };
                let (from, to) = match f.direction {
                    FlowDirection::Inbound => (Some(peer), None),
                    FlowDirection::Outbound => (None, Some(peer)),
                };
                FlowDoc {
                    from,
                    to,
                    rate_mbps: f.rate.mbps(),
                }
            })
            .collect();
        let requirements = self
            .requirements
            .iter()
            .map(|r| match r {
                Requirement::Compute { profile, request } => RequirementDoc::Compute(ComputeDoc {
                    profile: Some(profile.to_string()),
                    vcpus: Some(request.vcpus()),
                    ram_mib: Some(request.ram_mib as f64),
                    disk_gib: Some(request.disk_gib as f64),
                }),
                Requirement::Network { profile, endpoint } => RequirementDoc::Network(NetworkDoc {
                    profile: Some(profile.to_string()),
                    endpoint: endpoint.to_string(),
                }),
                Requirement::Location { region } => RequirementDoc::Location(LocationDoc {
                    region: region.to_string(),
                }),
                Requirement::AccessRights { label } => {
                    RequirementDoc::AccessRights(AccessRightsDoc {
                        label: label.clone(),
                    })
                }
            })
            .collect();
        RequestDoc {
            id: Some(self.id.to_string()),
            tenant: Some(self.tenant.to_string()),
            component: ComponentDoc::Spec(ComponentSpecDoc {
                name: self.component.name.clone(),
                image: Some(self.component.image.clone()),
                flows,
            }),
            requirements,
            submitted_at_ms: Some(self.submitted_at.millis()),
        }
    }
}

impl fmt::Display for DeploymentRequest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}", self.component.name)?;
        for r in &self.requirements {
            write!(f, ", {r}")?;
        }
        f.write_str("}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn footprint() -> ResourceVector {
        ResourceVector::new(500, 512, 1)
    }

    fn parse(yaml: &str) -> RequestDoc {
        serde_yaml::from_str(yaml).unwrap()
    }

    fn validate(doc: &RequestDoc) -> Result<DeploymentRequest, ValidationError> {
        validate_request(
            doc,
            &AnyReference,
            footprint(),
            &RequestId::new("r0"),
            SimTime::ZERO,
        )
    }

    struct Refs;

    impl ReferenceCatalog for Refs {
        fn has_endpoint(&self, id: &str) -> bool {
            id == "camera-1"
        }

        fn has_region(&self, id: &str) -> bool {
            id == "region-A"
        }
    }

    #[test]
    fn requirement_free_request() {
        let req = validate(&parse("{component: face_detection, requirements: []}")).unwrap();
        assert!(req.requirements.is_empty());
        assert_eq!(req.component.name, "face_detection");
        assert_eq!(req.tenant.as_str(), DEFAULT_TENANT);
        assert_eq!(req.id.as_str(), "r0");
    }

    #[test]
    fn negative_vcpus_rejected() {
        let err = validate(&parse(
            "{component: x, requirements: [{compute: {vcpus: -1}}]}",
        ))
        .unwrap_err();
        assert!(err.field.ends_with("vcpus"), "{}", err.field);
        assert_eq!(err.reason, "negative");
        assert_eq!(err.kind, ValidationErrorKind::Invalid);
    }

    #[test]
    fn network_requirement_parsed() {
        let doc = parse(
            "{component: face_detection, requirements: [{network: {profile: SignalingAndVideoStreaming, endpoint: camera-1}}]}",
        );
        let req = validate_request(
            &doc,
            &Refs,
            footprint(),
            &RequestId::new("r1"),
            SimTime::ZERO,
        )
        .unwrap();
        assert_eq!(
            req.requirements,
            vec![Requirement::Network {
                profile: NetworkProfile::SignalingAndVideoStreaming,
                endpoint: EndpointId::new("camera-1"),
            }]
        );
    }

    #[test]
    fn defaults_applied() {
        let doc = parse(
            "{component: c, requirements: [{compute: {vcpus: 2}}, {network: {endpoint: camera-1}}]}",
        );
        let req = validate(&doc).unwrap();
        assert_eq!(
            req.requirements[0],
            Requirement::Compute {
                profile: ComputeProfile::GeneralPurpose,
                request: ResourceVector::new(2000, 512, 1),
            }
        );
        assert_eq!(
            req.requirements[1],
            Requirement::Network {
                profile: NetworkProfile::BestEffort,
                endpoint: EndpointId::new("camera-1"),
            }
        );
    }

    #[test]
    fn duplicate_compute_rejected() {
        let doc =
            parse("{component: c, requirements: [{compute: {vcpus: 1}}, {compute: {vcpus: 2}}]}");
        let err = validate(&doc).unwrap_err();
        assert!(err.reason.contains("duplicate compute"));
    }

    #[test]
    fn unknown_profile_rejected() {
        let doc =
            parse("{component: c, requirements: [{network: {profile: Warp, endpoint: camera-1}}]}");
        let err = validate(&doc).unwrap_err();
        assert_eq!(err.field, "requirements[0].network.profile");
        assert_eq!(err.kind, ValidationErrorKind::Invalid);
    }

    #[test]
    fn unknown_references_flagged() {
        let doc = parse("{component: c, requirements: [{network: {endpoint: camera-9}}]}");
        let err = validate_request(
            &doc,
            &Refs,
            footprint(),
            &RequestId::new("r"),
            SimTime::ZERO,
        )
        .unwrap_err();
        assert_eq!(err.kind, ValidationErrorKind::UnknownReference);
        let doc = parse("{component: c, requirements: [{location: {region: mars}}]}");
        let err = validate_request(
            &doc,
            &Refs,
            footprint(),
            &RequestId::new("r"),
            SimTime::ZERO,
        )
        .unwrap_err();
        assert_eq!(err.kind, ValidationErrorKind::UnknownReference);
    }

    #[test]
    fn duplicate_network_endpoint_rejected() {
        let doc = parse(
            "{component: c, requirements: [{network: {endpoint: camera-1}}, {network: {endpoint: camera-1}}]}",
        );
        assert!(validate(&doc).is_err());
    }

    #[test]
    fn flows_need_exactly_one_direction() {
        let doc = parse("{component: {name: c, flows: [{rate_mbps: 1}]}}");
        assert!(validate(&doc).is_err());
        let doc = parse(
            "{component: {name: c, flows: [{from: {endpoint: camera-1}, to: {component: d}, rate_mbps: 1}]}}",
        );
        assert!(validate(&doc).is_err());
        let doc = parse("{component: {name: c, flows: [{to: {component: c}, rate_mbps: 1}]}}");
        assert!(validate(&doc).is_err());
    }

    #[test]
    fn round_trip_is_identity() {
        let doc = parse(
            r#"
id: r7
tenant: video
component:
  name: face_detection
  image: registry.local/fd:1
  flows:
    - from: {endpoint: camera-1}
      rate_mbps: 4
    - to: {component: face_store}
      rate_mbps: 0.2
requirements:
  - compute: {profile: ComputeOptimized, vcpus: 1.5, ram_mib: 2048}
  - network: {profile: SignalingAndVideoStreaming, endpoint: camera-1}
  - location: {region: region-A}
  - access_rights: {label: cctv}
"#,
        );
        let req = validate(&doc).unwrap();
        let again = validate(&req.to_doc()).unwrap();
        assert_eq!(req, again);
        // Defaulting is idempotent.
        assert_eq!(again.to_doc(), req.to_doc());
    }
}
