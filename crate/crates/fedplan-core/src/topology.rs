//! Cloud sites, the central ETL engine, capability profiles, and the rate
//! card behind every cost and time estimate.
//!
//! A topology is a complete directed graph over its sites: every ordered pair
//! of distinct sites has exactly one link. Intra-site movement is free and
//! instantaneous by definition and has no link.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::cost::SelectivityConfig;
use crate::ir::{Transform, TransformKind};
use crate::money::Money;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SiteKind {
    DatabaseEngine,
    CentralEtl,
}

/// What a site can execute natively.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapabilityProfile {
    pub supported_kinds: BTreeSet<TransformKind>,
    pub supported_functions: BTreeSet<String>,
    pub supports_federation: bool,
}

impl CapabilityProfile {
    /// Profile covering every transform kind and every catalog function.
    /// The central ETL engine always carries this: it is the universal
    /// fallback.
    pub fn universal(supports_federation: bool) -> CapabilityProfile {
        CapabilityProfile {
            supported_kinds: TransformKind::ALL.iter().copied().collect(),
            supported_functions: crate::dialect::function_catalog()
                .iter()
                .map(|sig| sig.name.to_string())
                .collect(),
            supports_federation,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Site {
    pub id: String,
    pub provider_label: String,
    pub kind: SiteKind,
    /// Dialect id; database engines only.
    pub dialect: Option<String>,
    pub capabilities: CapabilityProfile,
    /// Money per GB processed.
    pub compute_rate: Money,
    /// GB per second.
    pub compute_throughput: f64,
    /// Money per GB of materialized intermediate, charged once per run.
    pub storage_rate: Money,
    /// Money per GB scanned remotely; 0 if federation is unsupported.
    pub federated_scan_rate: Money,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub src: String,
    pub dst: String,
    /// Money per GB moved out of `src` toward `dst`.
    pub egress_rate: Money,
    /// GB per second.
    pub bandwidth: f64,
    /// Seconds of fixed overhead per transfer.
    pub latency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    sites: BTreeMap<String, Site>,
    links: BTreeMap<(String, String), Link>,
    central_id: String,
    pub selectivity: SelectivityConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TopologyError {
    NoSites,
    DuplicateSite(String),
    NoCentralSite,
    MultipleCentralSites(String, String),
    MissingDialect(String),
    DialectOnCentral(String),
    NegativeRate { site_or_link: String, field: &'static str },
    NonPositive { site_or_link: String, field: &'static str },
    MissingLink { src: String, dst: String },
    DuplicateLink { src: String, dst: String },
    UnknownLinkEndpoint { src: String, dst: String },
    SelfLink(String),
    CentralNotUniversal(String),
}

impl fmt::Display for TopologyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologyError::NoSites => f.write_str("topology has no sites"),
            TopologyError::DuplicateSite(id) => write!(f, "duplicate site {id:?}"),
            TopologyError::NoCentralSite => {
                f.write_str("topology must declare exactly one CentralEtl site")
            }
            TopologyError::MultipleCentralSites(a, b) => {
                write!(f, "multiple CentralEtl sites: {a:?} and {b:?}")
            }
            TopologyError::MissingDialect(id) => {
                write!(f, "database engine site {id:?} must name a dialect")
            }
            TopologyError::DialectOnCentral(id) => {
                write!(f, "central site {id:?} must not name a dialect")
            }
            TopologyError::NegativeRate { site_or_link, field } => {
                write!(f, "{site_or_link}: {field} must be non-negative")
            }
            TopologyError::NonPositive { site_or_link, field } => {
                write!(f, "{site_or_link}: {field} must be positive and finite")
            }
            TopologyError::MissingLink { src, dst } => {
                write!(f, "missing link {src:?} -> {dst:?}; topologies are complete digraphs")
            }
            TopologyError::DuplicateLink { src, dst } => {
                write!(f, "duplicate link {src:?} -> {dst:?}")
            }
            TopologyError::UnknownLinkEndpoint { src, dst } => {
                write!(f, "link {src:?} -> {dst:?} references an unknown site")
            }
            TopologyError::SelfLink(id) => {
                write!(f, "self link on {id:?}; intra-site movement is free by definition")
            }
            TopologyError::CentralNotUniversal(id) => write!(
                f,
                "central site {id:?} must support all transform kinds and catalog functions"
            ),
        }
    }
}

impl Topology {
    pub fn new(
        sites: Vec<Site>,
        links: Vec<Link>,
        selectivity: SelectivityConfig,
    ) -> Result<Topology, TopologyError> {
        if sites.is_empty() {
            return Err(TopologyError::NoSites);
        }
        let mut site_map = BTreeMap::new();
        let mut central_id: Option<String> = None;
        for site in sites {
            if site.compute_rate.is_negative() {
                return Err(TopologyError::NegativeRate {
                    site_or_link: site.id.clone(),
                    field: "compute_rate",
                });
            }
            if site.storage_rate.is_negative() {
                return Err(TopologyError::NegativeRate {
                    site_or_link: site.id.clone(),
                    field: "storage_rate",
                });
            }
            if site.federated_scan_rate.is_negative() {
                return Err(TopologyError::NegativeRate {
                    site_or_link: site.id.clone(),
                    field: "federated_scan_rate",
                });
            }
            if !(site.compute_throughput > 0.0 && site.compute_throughput.is_finite()) {
                return Err(TopologyError::NonPositive {
                    site_or_link: site.id.clone(),
                    field: "compute_throughput",
                });
            }
            match site.kind {
                SiteKind::CentralEtl => {
                    if site.dialect.is_some() {
                        return Err(TopologyError::DialectOnCentral(site.id.clone()));
                    }
                    let universal =
                        CapabilityProfile::universal(site.capabilities.supports_federation);
                    if site.capabilities != universal {
                        return Err(TopologyError::CentralNotUniversal(site.id.clone()));
                    }
                    if let Some(existing) = &central_id {
                        return Err(TopologyError::MultipleCentralSites(
                            existing.clone(),
                            site.id.clone(),
                        ));
                    }
                    central_id = Some(site.id.clone());
                }
                SiteKind::DatabaseEngine => {
                    if site.dialect.is_none() {
                        return Err(TopologyError::MissingDialect(site.id.clone()));
                    }
                }
            }
            let id = site.id.clone();
            if site_map.insert(id.clone(), site).is_some() {
                return Err(TopologyError::DuplicateSite(id));
            }
        }
        let central_id = central_id.ok_or(TopologyError::NoCentralSite)?;

        let mut link_map = BTreeMap::new();
        for link in links {
            if link.src == link.dst {
                return Err(TopologyError::SelfLink(link.src));
            }
            if !site_map.contains_key(&link.src) || !site_map.contains_key(&link.dst) {
                return Err(TopologyError::UnknownLinkEndpoint {
                    src: link.src,
                    dst: link.dst,
                });
            }
            if link.egress_rate.is_negative() {
                return Err(TopologyError::NegativeRate {
                    site_or_link: format_link(&link.src, &link.dst),
                    field: "egress_rate",
                });
            }
            if !(link.bandwidth > 0.0) {
                return Err(TopologyError::NonPositive {
                    site_or_link: format_link(&link.src, &link.dst),
                    field: "bandwidth",
                });
            }
            if !(link.latency >= 0.0 && link.latency.is_finite()) {
                return Err(TopologyError::NegativeRate {
                    site_or_link: format_link(&link.src, &link.dst),
                    field: "latency",
                });
            }
            let key = (link.src.clone(), link.dst.clone());
            if link_map.insert(key.clone(), link).is_some() {
                return Err(TopologyError::DuplicateLink {
                    src: key.0,
                    dst: key.1,
                });
            }
        }
        for src in site_map.keys() {
            for dst in site_map.keys() {
                if src != dst && !link_map.contains_key(&(src.clone(), dst.clone())) {
                    return Err(TopologyError::MissingLink {
                        src: src.clone(),
                        dst: dst.clone(),
                    });
                }
            }
        }

        Ok(Topology {
            sites: site_map,
            links: link_map,
            central_id,
            selectivity,
        })
    }

    pub fn site(&self, id: &str) -> Option<&Site> {
        self.sites.get(id)
    }

    pub fn sites(&self) -> impl Iterator<Item = &Site> {
        self.sites.values()
    }

    /// Engine sites in ascending id order.
    pub fn engine_sites(&self) -> impl Iterator<Item = &Site> {
        self.sites
            .values()
            .filter(|s| s.kind == SiteKind::DatabaseEngine)
    }

    pub fn central(&self) -> &Site {
        &self.sites[&self.central_id]
    }

    /// The link from `src` to `dst`; `None` when `src == dst`.
    pub fn link(&self, src: &str, dst: &str) -> Option<&Link> {
        self.links.get(&(src.to_string(), dst.to_string()))
    }

    pub fn links(&self) -> impl Iterator<Item = &Link> {
        self.links.values()
    }

    /// Returns a copy with every money rate multiplied by `factor`.
    pub fn scale_rates(&self, factor: i64) -> Topology {
        let mut scaled = self.clone();
        for site in scaled.sites.values_mut() {
            site.compute_rate = Money::from_micros(site.compute_rate.micros() * factor);
            site.storage_rate = Money::from_micros(site.storage_rate.micros() * factor);
            site.federated_scan_rate =
                Money::from_micros(site.federated_scan_rate.micros() * factor);
        }
        for link in scaled.links.values_mut() {
            link.egress_rate = Money::from_micros(link.egress_rate.micros() * factor);
        }
        scaled
    }
}

fn format_link(src: &str, dst: &str) -> String {
    let mut s = String::from("link ");
    s.push_str(src);
    s.push_str(" -> ");
    s.push_str(dst);
    s
}

/// True when `site` can execute `transform` natively: the transform kind and
/// every function it references are in the site's capability profile. The
/// central ETL engine accepts everything.
pub fn is_pushable(transform: &Transform, site: &Site) -> bool {
    if site.kind == SiteKind::CentralEtl {
        return true;
    }
    if !site.capabilities.supported_kinds.contains(&transform.kind) {
        return false;
    }
    match transform.referenced_functions() {
        Ok(functions) => functions
            .iter()
            .all(|f| site.capabilities.supported_functions.contains(f)),
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::TransformParams;
    use alloc::vec;

    pub(crate) fn engine(id: &str) -> Site {
        Site {
            id: id.to_string(),
            provider_label: "cloud".to_string(),
            kind: SiteKind::DatabaseEngine,
            dialect: Some("identity".to_string()),
            capabilities: CapabilityProfile::universal(false),
            compute_rate: Money::parse("0.05").unwrap(),
            compute_throughput: 1.0,
            storage_rate: Money::parse("0.01").unwrap(),
            federated_scan_rate: Money::ZERO,
        }
    }

    pub(crate) fn central() -> Site {
        Site {
            id: "central".to_string(),
            provider_label: "etl".to_string(),
            kind: SiteKind::CentralEtl,
            dialect: None,
            capabilities: CapabilityProfile::universal(false),
            compute_rate: Money::parse("0.1").unwrap(),
            compute_throughput: 1.0,
            storage_rate: Money::parse("0.02").unwrap(),
            federated_scan_rate: Money::ZERO,
        }
    }

    pub(crate) fn full_links(ids: &[&str]) -> Vec<Link> {
        let mut links = Vec::new();
        for src in ids {
            for dst in ids {
                if src != dst {
                    links.push(Link {
                        src: src.to_string(),
                        dst: dst.to_string(),
                        egress_rate: Money::parse("0.05").unwrap(),
                        bandwidth: 1.0,
                        latency: 0.0,
                    });
                }
            }
        }
        links
    }

    #[test]
    fn minimal_complete_topology_is_valid() {
        let topo = Topology::new(
            vec![engine("a"), engine("b"), central()],
            full_links(&["a", "b", "central"]),
            SelectivityConfig::default(),
        )
        .unwrap();
        assert_eq!(topo.central().id, "central");
        assert_eq!(topo.links().count(), 6);
    }

    #[test]
    fn zero_central_sites_is_an_error() {
        let err = Topology::new(
            vec![engine("a"), engine("b")],
            full_links(&["a", "b"]),
            SelectivityConfig::default(),
        )
        .unwrap_err();
        assert_eq!(err, TopologyError::NoCentralSite);
    }

    #[test]
    fn zero_bandwidth_is_an_error() {
        let mut links = full_links(&["a", "central"]);
        links[0].bandwidth = 0.0;
        let err = Topology::new(
            vec![engine("a"), central()],
            links,
            SelectivityConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, TopologyError::NonPositive { field: "bandwidth", .. }));
    }

    #[test]
    fn missing_link_is_an_error() {
        let mut links = full_links(&["a", "b", "central"]);
        links.pop();
        let err = Topology::new(
            vec![engine("a"), engine("b"), central()],
            links,
            SelectivityConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, TopologyError::MissingLink { .. }));
    }

    #[test]
    fn pushability_checks_kinds_and_functions() {
        let transform = Transform {
            id: "t".to_string(),
            kind: TransformKind::Recursive,
            inputs: vec!["d".to_string()],
            params: TransformParams {
                parent_key: Some("p".to_string()),
                child_key: Some("c".to_string()),
                anchor: Some("p = 'root'".to_string()),
                ..TransformParams::default()
            },
        };
        let mut site = engine("a");
        assert!(is_pushable(&transform, &site));
        site.capabilities.supported_kinds.remove(&TransformKind::Recursive);
        assert!(!is_pushable(&transform, &site));
        // the central fallback accepts everything
        assert!(is_pushable(&transform, &central()));
    }

    #[test]
    fn pushability_checks_referenced_functions() {
        let transform = Transform {
            id: "t".to_string(),
            kind: TransformKind::Filter,
            inputs: vec!["d".to_string()],
            params: TransformParams {
                predicate: Some("LENGTH(name) > 3".to_string()),
                ..TransformParams::default()
            },
        };
        let mut site = engine("a");
        assert!(is_pushable(&transform, &site));
        site.capabilities.supported_functions.remove("LENGTH");
        assert!(!is_pushable(&transform, &site));
    }

    #[test]
    fn scaling_rates_multiplies_every_money_field() {
        let topo = Topology::new(
            vec![engine("a"), central()],
            full_links(&["a", "central"]),
            SelectivityConfig::default(),
        )
        .unwrap();
        let scaled = topo.scale_rates(10);
        assert_eq!(
            scaled.site("a").unwrap().compute_rate,
            Money::parse("0.5").unwrap()
        );
        assert_eq!(
            scaled.link("a", "central").unwrap().egress_rate,
            Money::parse("0.5").unwrap()
        );
    }
}
