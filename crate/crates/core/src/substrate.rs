//! Layered space/air/ground substrate network and its resource ledger.
//!
//! Compute and bandwidth are integral resource units so that allocate and
//! release are exact inverses; link delay is a real number of milliseconds.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::embedder::Embedding;
use crate::vnr::Vnr;
use crate::{LinkId, NodeId, Units, VnrId};

pub(crate) mod format;
mod generate;

pub use format::FormatError;
pub use generate::{generate_substrate, DomainConfig, GenerateError, SubstrateConfig};

/// Segment of the layered network a node belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Domain {
    Space,
    Air,
    Ground,
}

impl Domain {
    pub const ALL: [Domain; 3] = [Domain::Space, Domain::Air, Domain::Ground];

    pub fn index(self) -> usize {
        match self {
            Domain::Space => 0,
            Domain::Air => 1,
            Domain::Ground => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Space => "space",
            Domain::Air => "air",
            Domain::Ground => "ground",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "space" | "satellite" => Ok(Domain::Space),
            "air" | "aerial" => Ok(Domain::Air),
            "ground" | "terrestrial" => Ok(Domain::Ground),
            other => Err(format!("unknown domain `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubstrateNode {
    pub id: NodeId,
    pub domain: Domain,
    pub cpu_capacity: Units,
    pub cpu_available: Units,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubstrateLink {
    pub id: LinkId,
    pub endpoints: (NodeId, NodeId),
    pub bw_capacity: Units,
    pub bw_available: Units,
    pub delay: f64,
    pub inter_domain: bool,
}

impl SubstrateLink {
    /// The endpoint opposite `node`, or `None` if the link is not incident to it.
    pub fn opposite(&self, node: NodeId) -> Option<NodeId> {
        match self.endpoints {
            (a, b) if a == node => Some(b),
            (a, b) if b == node => Some(a),
            _ => None,
        }
    }

    pub fn touches(&self, node: NodeId) -> bool {
        self.endpoints.0 == node || self.endpoints.1 == node
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LedgerError {
    #[error("unknown substrate node {0}")]
    UnknownNode(NodeId),
    #[error("unknown substrate link {0}")]
    UnknownLink(LinkId),
    #[error("node {node}: requested {requested} compute units but only {available} available")]
    InsufficientCpu {
        node: NodeId,
        requested: Units,
        available: Units,
    },
    #[error("link {link}: requested {requested} bandwidth units but only {available} available")]
    InsufficientBandwidth {
        link: LinkId,
        requested: Units,
        available: Units,
    },
    #[error("node {0}: release exceeds capacity")]
    CpuOverRelease(NodeId),
    #[error("link {0}: release exceeds capacity")]
    BandwidthOverRelease(LinkId),
    #[error("embedding of VNR {0} is not active (double release?)")]
    NotActive(VnrId),
    #[error("embedding of VNR {0} is already active")]
    AlreadyActive(VnrId),
    #[error("embedding does not match VNR {0}")]
    Mismatch(VnrId),
    #[error("invalid link: {0}")]
    InvalidLink(String),
}

/// Resources held by one applied embedding.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ResourceClaim {
    pub cpu: Vec<(NodeId, Units)>,
    pub bandwidth: Vec<(LinkId, Units)>,
}

impl ResourceClaim {
    /// Demands of `vnr` laid out along the node and link mapping of `emb`.
    pub fn of(vnr: &Vnr, emb: &Embedding) -> Result<Self, LedgerError> {
        if emb.nodes.len() != vnr.vnodes.len() || emb.links.len() != vnr.vlinks.len() {
            return Err(LedgerError::Mismatch(vnr.id));
        }
        let cpu = vnr
            .vnodes
            .iter()
            .map(|v| (emb.nodes.host(v.id), v.cpu_demand))
            .collect();
        let bandwidth = vnr
            .vlinks
            .iter()
            .flat_map(|vl| emb.links.path(vl.id).iter().map(move |&l| (l, vl.bw_demand)))
            .collect();
        Ok(Self { cpu, bandwidth })
    }
}

/// Undirected layered substrate graph with a per-node CPU ledger and a
/// per-link bandwidth ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct SubstrateNetwork {
    nodes: Vec<SubstrateNode>,
    links: Vec<SubstrateLink>,
    /// Incident `(neighbor, link)` pairs, sorted by neighbor id then link id.
    adjacency: Vec<Vec<(NodeId, LinkId)>>,
    boundary: BTreeSet<NodeId>,
    active: BTreeMap<VnrId, ResourceClaim>,
}

impl Default for SubstrateNetwork {
    fn default() -> Self {
        Self::new()
    }
}

impl SubstrateNetwork {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            links: Vec::new(),
            adjacency: Vec::new(),
            boundary: BTreeSet::new(),
            active: BTreeMap::new(),
        }
    }

    pub fn add_node(&mut self, domain: Domain, cpu: Units) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(SubstrateNode {
            id,
            domain,
            cpu_capacity: cpu,
            cpu_available: cpu,
        });
        self.adjacency.push(Vec::new());
        id
    }

    /// Adds an undirected link. Parallel links are accepted so that
    /// degenerate layered graphs (one node per domain, several inter-domain
    /// links) remain expressible; the generator avoids them otherwise.
    pub fn add_link(
        &mut self,
        u: NodeId,
        v: NodeId,
        bw: Units,
        delay: f64,
    ) -> Result<LinkId, LedgerError> {
        if u >= self.nodes.len() {
            return Err(LedgerError::UnknownNode(u));
        }
        if v >= self.nodes.len() {
            return Err(LedgerError::UnknownNode(v));
        }
        if u == v {
            return Err(LedgerError::InvalidLink(format!("self-loop on node {u}")));
        }
        if !(delay.is_finite() && delay > 0.0) {
            return Err(LedgerError::InvalidLink(format!(
                "delay must be positive, got {delay}"
            )));
        }
        let id = self.links.len();
        let inter_domain = self.nodes[u].domain != self.nodes[v].domain;
        self.links.push(SubstrateLink {
            id,
            endpoints: (u.min(v), u.max(v)),
            bw_capacity: bw,
            bw_available: bw,
            delay,
            inter_domain,
        });
        for (a, b) in [(u, v), (v, u)] {
            let adj = &mut self.adjacency[a];
            let pos = adj.partition_point(|&entry| entry < (b, id));
            adj.insert(pos, (b, id));
        }
        if inter_domain {
            self.boundary.insert(u);
            self.boundary.insert(v);
        }
        Ok(id)
    }

    pub fn nodes(&self) -> &[SubstrateNode] {
        &self.nodes
    }

    pub fn links(&self) -> &[SubstrateLink] {
        &self.links
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn node(&self, id: NodeId) -> Result<&SubstrateNode, LedgerError> {
        self.nodes.get(id).ok_or(LedgerError::UnknownNode(id))
    }

    pub fn link(&self, id: LinkId) -> Result<&SubstrateLink, LedgerError> {
        self.links.get(id).ok_or(LedgerError::UnknownLink(id))
    }

    /// Incident `(neighbor, link)` pairs in ascending neighbor order.
    pub fn neighbors(&self, id: NodeId) -> &[(NodeId, LinkId)] {
        &self.adjacency[id]
    }

    pub fn boundary_nodes(&self) -> &BTreeSet<NodeId> {
        &self.boundary
    }

    pub fn domain_nodes(&self, domain: Domain) -> impl Iterator<Item = &SubstrateNode> + '_ {
        self.nodes.iter().filter(move |n| n.domain == domain)
    }

    pub fn link_between(&self, u: NodeId, v: NodeId) -> Option<LinkId> {
        self.adjacency
            .get(u)?
            .iter()
            .find(|&&(n, _)| n == v)
            .map(|&(_, l)| l)
    }

    pub fn allocate_node(&mut self, node: NodeId, amount: Units) -> Result<(), LedgerError> {
        let n = self.nodes.get_mut(node).ok_or(LedgerError::UnknownNode(node))?;
        if amount > n.cpu_available {
            return Err(LedgerError::InsufficientCpu {
                node,
                requested: amount,
                available: n.cpu_available,
            });
        }
        n.cpu_available -= amount;
        Ok(())
    }

    pub fn release_node(&mut self, node: NodeId, amount: Units) -> Result<(), LedgerError> {
        let n = self.nodes.get_mut(node).ok_or(LedgerError::UnknownNode(node))?;
        if n.cpu_available + amount > n.cpu_capacity {
            return Err(LedgerError::CpuOverRelease(node));
        }
        n.cpu_available += amount;
        Ok(())
    }

    /// Reserves `amount` on every link of `path`. Nothing is modified unless
    /// every link can carry it; a link repeated in the path is charged once
    /// per occurrence.
    pub fn allocate_path(&mut self, path: &[LinkId], amount: Units) -> Result<(), LedgerError> {
        let mut demand: BTreeMap<LinkId, Units> = BTreeMap::new();
        for &l in path {
            let link = self.link(l)?;
            let d = demand.entry(l).or_insert(0);
            *d += amount;
            if *d > link.bw_available {
                return Err(LedgerError::InsufficientBandwidth {
                    link: l,
                    requested: *d,
                    available: link.bw_available,
                });
            }
        }
        for &l in path {
            self.links[l].bw_available -= amount;
        }
        Ok(())
    }

    pub fn release_path(&mut self, path: &[LinkId], amount: Units) -> Result<(), LedgerError> {
        let mut credit: BTreeMap<LinkId, Units> = BTreeMap::new();
        for &l in path {
            let link = self.link(l)?;
            let c = credit.entry(l).or_insert(0);
            *c += amount;
            if link.bw_available + *c > link.bw_capacity {
                return Err(LedgerError::BandwidthOverRelease(l));
            }
        }
        for &l in path {
            self.links[l].bw_available += amount;
        }
        Ok(())
    }

    fn check_claim(&self, claim: &ResourceClaim) -> Result<(), LedgerError> {
        let mut cpu: BTreeMap<NodeId, Units> = BTreeMap::new();
        for &(n, amount) in &claim.cpu {
            let node = self.node(n)?;
            let c = cpu.entry(n).or_insert(0);
            *c += amount;
            if *c > node.cpu_available {
                return Err(LedgerError::InsufficientCpu {
                    node: n,
                    requested: *c,
                    available: node.cpu_available,
                });
            }
        }
        let mut bw: BTreeMap<LinkId, Units> = BTreeMap::new();
        for &(l, amount) in &claim.bandwidth {
            let link = self.link(l)?;
            let b = bw.entry(l).or_insert(0);
            *b += amount;
            if *b > link.bw_available {
                return Err(LedgerError::InsufficientBandwidth {
                    link: l,
                    requested: *b,
                    available: link.bw_available,
                });
            }
        }
        Ok(())
    }

    /// Allocates every resource of `emb` at once and records it as active.
    /// Either all of it is applied or the ledger is left untouched.
    pub fn apply_embedding(&mut self, vnr: &Vnr, emb: &Embedding) -> Result<(), LedgerError> {
        if emb.vnr_id != vnr.id {
            return Err(LedgerError::Mismatch(vnr.id));
        }
        if self.active.contains_key(&vnr.id) {
            return Err(LedgerError::AlreadyActive(vnr.id));
        }
        let claim = ResourceClaim::of(vnr, emb)?;
        self.check_claim(&claim)?;
        for &(n, amount) in &claim.cpu {
            self.nodes[n].cpu_available -= amount;
        }
        for &(l, amount) in &claim.bandwidth {
            self.links[l].bw_available -= amount;
        }
        self.active.insert(vnr.id, claim);
        Ok(())
    }

    /// Records resources that were already allocated piecewise as belonging
    /// to the embedding of `vnr_id`.
    pub(crate) fn register_claim(
        &mut self,
        vnr_id: VnrId,
        claim: ResourceClaim,
    ) -> Result<(), LedgerError> {
        if self.active.contains_key(&vnr_id) {
            return Err(LedgerError::AlreadyActive(vnr_id));
        }
        self.active.insert(vnr_id, claim);
        Ok(())
    }

    /// Returns every resource held by `emb` to the ledger.
    pub fn release_embedding(&mut self, emb: &Embedding) -> Result<(), LedgerError> {
        let claim = self
            .active
            .remove(&emb.vnr_id)
            .ok_or(LedgerError::NotActive(emb.vnr_id))?;
        for &(n, amount) in &claim.cpu {
            let node = &mut self.nodes[n];
            node.cpu_available += amount;
            debug_assert!(node.cpu_available <= node.cpu_capacity);
        }
        for &(l, amount) in &claim.bandwidth {
            let link = &mut self.links[l];
            link.bw_available += amount;
            debug_assert!(link.bw_available <= link.bw_capacity);
        }
        Ok(())
    }

    pub fn active_embeddings(&self) -> impl Iterator<Item = (VnrId, &ResourceClaim)> + '_ {
        self.active.iter().map(|(&id, c)| (id, c))
    }

    pub fn is_active(&self, vnr_id: VnrId) -> bool {
        self.active.contains_key(&vnr_id)
    }

    /// True when every node and link ledger is back at full capacity.
    pub fn is_fully_released(&self) -> bool {
        self.nodes.iter().all(|n| n.cpu_available == n.cpu_capacity)
            && self.links.iter().all(|l| l.bw_available == l.bw_capacity)
    }

    /// Checks that `capacity - available` equals the sum of active claims on
    /// every node and link.
    pub fn ledger_is_conserved(&self) -> bool {
        let mut cpu = vec![0; self.nodes.len()];
        let mut bw = vec![0; self.links.len()];
        for claim in self.active.values() {
            for &(n, a) in &claim.cpu {
                cpu[n] += a;
            }
            for &(l, a) in &claim.bandwidth {
                bw[l] += a;
            }
        }
        self.nodes
            .iter()
            .all(|n| n.cpu_capacity - n.cpu_available == cpu[n.id])
            && self
                .links
                .iter()
                .all(|l| l.bw_capacity - l.bw_available == bw[l.id])
    }

    /// A copy with every ledger reset to capacity and no active embeddings.
    pub fn pristine(&self) -> Self {
        let mut net = self.clone();
        for n in &mut net.nodes {
            n.cpu_available = n.cpu_capacity;
        }
        for l in &mut net.links {
            l.bw_available = l.bw_capacity;
        }
        net.active.clear();
        net
    }

    /// Keeps only the listed nodes (renumbered in the given order) and the
    /// links among them. Ledgers are copied as they stand.
    pub fn induced_subgraph(&self, keep: &[NodeId]) -> Result<Self, LedgerError> {
        let mut net = SubstrateNetwork::new();
        let mut remap = vec![None; self.nodes.len()];
        for &old in keep {
            let n = self.node(old)?;
            let id = net.add_node(n.domain, n.cpu_capacity);
            net.nodes[id].cpu_available = n.cpu_available;
            remap[old] = Some(id);
        }
        for l in &self.links {
            if let (Some(u), Some(v)) = (remap[l.endpoints.0], remap[l.endpoints.1]) {
                let id = net.add_link(u, v, l.bw_capacity, l.delay)?;
                net.links[id].bw_available = l.bw_available;
            }
        }
        Ok(net)
    }

    /// Whether the intra-domain subgraph of `domain` is connected.
    pub fn domain_connected(&self, domain: Domain) -> bool {
        let members: Vec<NodeId> = self.domain_nodes(domain).map(|n| n.id).collect();
        let Some(&start) = members.first() else {
            return true;
        };
        let mut seen = vec![false; self.nodes.len()];
        seen[start] = true;
        let mut stack = vec![start];
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &(v, _) in &self.adjacency[u] {
                if !seen[v] && self.nodes[v].domain == domain {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == members.len()
    }
}
