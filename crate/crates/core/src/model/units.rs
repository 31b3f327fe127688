//! Identifiers and physical quantities shared by every module.
//!
//! All quantities that take part in conservation checks are stored as
//! integers: CPU in millicores, bandwidth in bit/s, simulated time in
//! milliseconds and traffic volume in millibits (bit/s × ms). Floating point
//! only appears at the document boundary.

use std::fmt;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }

        impl std::borrow::Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }
    };
}

string_id!(
    /// Infrastructure node identifier.
    NodeId
);
string_id!(
    /// Link identifier.
    LinkId
);
string_id!(
    /// Service endpoint identifier (a camera stream, a sensor feed).
    EndpointId
);
string_id!(
    /// Geographic region identifier.
    RegionId
);
string_id!(
    /// Deployment request identifier.
    RequestId
);
string_id!(
    /// Tenant (application provider) identifier.
    TenantId
);
string_id!(
    /// Simulated flow identifier.
    FlowId
);

/// Identifier of a reservation created by the negotiator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReservationId(pub u64);

impl fmt::Display for ReservationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "res-{}", self.0)
    }
}

/// Virtual clock instant, in milliseconds since the start of the run.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_millis(ms: u64) -> Self {
        SimTime(ms)
    }

    pub fn millis(self) -> u64 {
        self.0
    }

    pub fn plus_millis(self, ms: u64) -> Self {
        SimTime(self.0.saturating_add(ms))
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ms", self.0)
    }
}

/// Converts a duration in seconds to whole milliseconds, rejecting values that
/// are negative, non-finite or finer than one millisecond.
pub fn secs_to_millis(secs: f64) -> Option<u64> {
    if !secs.is_finite() || secs < 0.0 {
        return None;
    }
    let ms = secs * 1000.0;
    let rounded = ms.round();
    if (ms - rounded).abs() > 1e-6 || rounded > u64::MAX as f64 {
        return None;
    }
    Some(rounded as u64)
}

/// Link or flow bandwidth in bit/s. `Bandwidth::INFINITE` is the sentinel for
/// an empty path.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Bandwidth(u64);

impl Bandwidth {
    pub const ZERO: Bandwidth = Bandwidth(0);
    pub const INFINITE: Bandwidth = Bandwidth(u64::MAX);

    pub const fn from_bps(bps: u64) -> Self {
        Bandwidth(bps)
    }

    /// Rounds to the nearest bit/s. Returns `None` for negative or
    /// non-finite input.
    pub fn from_mbps(mbps: f64) -> Option<Self> {
        if !mbps.is_finite() || mbps < 0.0 {
            return None;
        }
        let bps = (mbps * 1e6).round();
        if bps >= u64::MAX as f64 {
            return None;
        }
        Some(Bandwidth(bps as u64))
    }

    pub fn bps(self) -> u64 {
        self.0
    }

    pub fn mbps(self) -> f64 {
        if self.is_infinite() {
            f64::INFINITY
        } else {
            self.0 as f64 / 1e6
        }
    }

    pub fn is_infinite(self) -> bool {
        self.0 == u64::MAX
    }

    pub fn saturating_sub(self, other: Bandwidth) -> Bandwidth {
        if self.is_infinite() {
            return self;
        }
        Bandwidth(self.0.saturating_sub(other.0))
    }

    pub fn saturating_add(self, other: Bandwidth) -> Bandwidth {
        Bandwidth(self.0.saturating_add(other.0))
    }
}

impl Add for Bandwidth {
    type Output = Bandwidth;

    fn add(self, rhs: Bandwidth) -> Bandwidth {
        self.saturating_add(rhs)
    }
}

impl AddAssign for Bandwidth {
    fn add_assign(&mut self, rhs: Bandwidth) {
        *self = self.saturating_add(rhs);
    }
}

impl fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{} Mbit/s", self.mbps())
        }
    }
}

/// Traffic volume in millibits: the exact product of a bit/s rate and a
/// millisecond duration.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Millibits(pub u64);

impl Millibits {
    pub const ZERO: Millibits = Millibits(0);

    /// Volume produced by `rate` over `dt_ms` milliseconds.
    pub fn of(rate: Bandwidth, dt_ms: u64) -> Millibits {
        let v = rate.bps() as u128 * dt_ms as u128;
        Millibits(v.min(u64::MAX as u128) as u64)
    }

    pub fn from_mib(mib: u64) -> Millibits {
        Millibits(mib.saturating_mul(1024 * 1024 * 8 * 1000))
    }

    pub fn from_bytes(bytes: u64) -> Millibits {
        Millibits(bytes.saturating_mul(8000))
    }

    pub fn bytes(self) -> f64 {
        self.0 as f64 / 8000.0
    }

    pub fn saturating_sub(self, other: Millibits) -> Millibits {
        Millibits(self.0.saturating_sub(other.0))
    }
}

impl Add for Millibits {
    type Output = Millibits;

    fn add(self, rhs: Millibits) -> Millibits {
        Millibits(self.0.saturating_add(rhs.0))
    }
}

impl AddAssign for Millibits {
    fn add_assign(&mut self, rhs: Millibits) {
        self.0 = self.0.saturating_add(rhs.0);
    }
}

/// Compute resources: CPU in millicores, RAM in MiB, disk in GiB.
///
/// The partial order is componentwise: `a.fits_within(&b)` iff every field of
/// `a` is at most the corresponding field of `b`.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct ResourceVector {
    pub millicpus: u64,
    pub ram_mib: u64,
    pub disk_gib: u64,
}

impl ResourceVector {
    pub const ZERO: ResourceVector = ResourceVector {
        millicpus: 0,
        ram_mib: 0,
        disk_gib: 0,
    };

    pub const fn new(millicpus: u64, ram_mib: u64, disk_gib: u64) -> Self {
        ResourceVector {
            millicpus,
            ram_mib,
            disk_gib,
        }
    }

    /// Builds a vector from a fractional core count. Returns `None` when the
    /// core count is negative, non-finite or finer than a millicore.
    pub fn from_vcpus(vcpus: f64, ram_mib: u64, disk_gib: u64) -> Option<Self> {
        let millicpus = vcpus_to_millis(vcpus)?;
        Some(ResourceVector::new(millicpus, ram_mib, disk_gib))
    }

    pub fn vcpus(&self) -> f64 {
        self.millicpus as f64 / 1000.0
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::ZERO
    }

    pub fn fits_within(&self, other: &ResourceVector) -> bool {
        self.millicpus <= other.millicpus
            && self.ram_mib <= other.ram_mib
            && self.disk_gib <= other.disk_gib
    }

    pub fn checked_sub(&self, other: &ResourceVector) -> Option<ResourceVector> {
        Some(ResourceVector {
            millicpus: self.millicpus.checked_sub(other.millicpus)?,
            ram_mib: self.ram_mib.checked_sub(other.ram_mib)?,
            disk_gib: self.disk_gib.checked_sub(other.disk_gib)?,
        })
    }

    pub fn saturating_sub(&self, other: &ResourceVector) -> ResourceVector {
        ResourceVector {
            millicpus: self.millicpus.saturating_sub(other.millicpus),
            ram_mib: self.ram_mib.saturating_sub(other.ram_mib),
            disk_gib: self.disk_gib.saturating_sub(other.disk_gib),
        }
    }

    pub fn checked_add(&self, other: &ResourceVector) -> Option<ResourceVector> {
        Some(ResourceVector {
            millicpus: self.millicpus.checked_add(other.millicpus)?,
            ram_mib: self.ram_mib.checked_add(other.ram_mib)?,
            disk_gib: self.disk_gib.checked_add(other.disk_gib)?,
        })
    }
}

impl Add for ResourceVector {
    type Output = ResourceVector;

    /// Saturating componentwise addition.
    fn add(self, rhs: ResourceVector) -> ResourceVector {
        ResourceVector {
            millicpus: self.millicpus.saturating_add(rhs.millicpus),
            ram_mib: self.ram_mib.saturating_add(rhs.ram_mib),
            disk_gib: self.disk_gib.saturating_add(rhs.disk_gib),
        }
    }
}

impl AddAssign for ResourceVector {
    fn add_assign(&mut self, rhs: ResourceVector) {
        *self = *self + rhs;
    }
}

impl fmt::Display for ResourceVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{{vcpus: {}, ram: {} MiB, disk: {} GiB}}",
            self.vcpus(),
            self.ram_mib,
            self.disk_gib
        )
    }
}

pub(crate) fn vcpus_to_millis(vcpus: f64) -> Option<u64> {
    if !vcpus.is_finite() || vcpus < 0.0 {
        return None;
    }
    let m = vcpus * 1000.0;
    let r = m.round();
    if (m - r).abs() > 1e-6 || r >= u64::MAX as f64 {
        return None;
    }
    Some(r as u64)
}
