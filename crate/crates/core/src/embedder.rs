//! Executing and validating complete VNR embeddings.
//!
//! Node mapping places virtual nodes one at a time through a
//! [`NodeSelector`], reserving compute immediately. Link mapping then routes
//! each virtual link over a minimum-hop substrate path that has enough
//! available bandwidth on every link and a total delay within the virtual
//! link's bound. Any failure rolls the ledger back to its state before the
//! call.

use std::fmt;

use rand::RngCore;
use thiserror::Error;

use crate::features::FeatureExtractor;
use crate::metrics::{embedding_cost, embedding_revenue};
use crate::policy::{self, Decision, PolicyParams, Selection};
use crate::substrate::{ResourceClaim, SubstrateNetwork};
use crate::vnr::{VirtualNode, Vnr};
use crate::{LinkId, NodeId, Units, VnrId};

/// Host of each virtual node, indexed by virtual node id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NodeMapping(pub Vec<NodeId>);

impl NodeMapping {
    pub fn host(&self, vnode: usize) -> NodeId {
        self.0[vnode]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Substrate path of each virtual link, indexed by virtual link id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LinkMapping(pub Vec<Vec<LinkId>>);

impl LinkMapping {
    pub fn path(&self, vlink: usize) -> &[LinkId] {
        &self.0[vlink]
    }

    pub fn hops(&self, vlink: usize) -> usize {
        self.0[vlink].len()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Embedding {
    pub vnr_id: VnrId,
    pub nodes: NodeMapping,
    pub links: LinkMapping,
    pub revenue: Units,
    pub cost: Units,
}

impl Embedding {
    /// Builds an embedding from explicit mappings, computing revenue and cost.
    pub fn new(vnr: &Vnr, nodes: NodeMapping, links: LinkMapping) -> Self {
        let revenue = embedding_revenue(vnr);
        let cost = if links.len() == vnr.vlinks.len() {
            embedding_cost(vnr, &links)
        } else {
            0
        };
        Self {
            vnr_id: vnr.id,
            nodes,
            links,
            revenue,
            cost,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EmbedFailure {
    #[error("virtual node {vnode} has no feasible substrate host")]
    NodeMapping { vnode: usize },
    #[error("virtual link {vlink} has no feasible substrate path")]
    LinkMapping { vlink: usize },
}

/// What a selector sees when placing one virtual node.
pub struct SelectionContext<'a> {
    pub net: &'a SubstrateNetwork,
    pub vnr: &'a Vnr,
    pub vnode: &'a VirtualNode,
    /// Feasible hosts in ascending id order; never empty.
    pub candidates: &'a [NodeId],
    /// `hosting[i]` is true when substrate node `i` already hosts a node of
    /// this request.
    pub hosting: &'a [bool],
}

pub trait NodeSelector {
    fn select(&mut self, ctx: &SelectionContext<'_>) -> NodeId;
}

/// Substrate nodes that can host `vnode`: in its target domain, with enough
/// available compute, and not already hosting a node of the same request.
pub fn candidate_hosts(net: &SubstrateNetwork, vnode: &VirtualNode, hosting: &[bool]) -> Vec<NodeId> {
    net.nodes()
        .iter()
        .filter(|n| {
            n.domain == vnode.target_domain && n.cpu_available >= vnode.cpu_demand && !hosting[n.id]
        })
        .map(|n| n.id)
        .collect()
}

/// Order in which virtual nodes are placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeOrder {
    /// Descending compute demand, lower id first on ties.
    DescendingCpu,
    /// Descending `cpu_demand * sum of incident bandwidth demand`.
    DescendingResourceMetric,
    /// As listed.
    Id,
}

/// Order in which virtual links are routed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkOrder {
    /// Links whose endpoints share a segment first, then cross-segment
    /// links, each class by ascending id.
    IntraDomainFirst,
    /// Descending bandwidth demand, lower id first on ties.
    DescendingBandwidth,
}

/// Tie-breaking among minimum-hop feasible paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathRule {
    /// First path found expanding neighbors in ascending id.
    MinHop,
    /// Prefer the largest bottleneck available bandwidth.
    MinHopWidest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmbeddingPlan {
    pub node_order: NodeOrder,
    pub link_order: LinkOrder,
    pub path_rule: PathRule,
}

impl EmbeddingPlan {
    pub const POLICY: Self = Self {
        node_order: NodeOrder::DescendingCpu,
        link_order: LinkOrder::IntraDomainFirst,
        path_rule: PathRule::MinHop,
    };
}

pub fn node_order(vnr: &Vnr, order: NodeOrder) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..vnr.vnodes.len()).collect();
    match order {
        NodeOrder::Id => {}
        NodeOrder::DescendingCpu => {
            ids.sort_by_key(|&v| (std::cmp::Reverse(vnr.vnodes[v].cpu_demand), v));
        }
        NodeOrder::DescendingResourceMetric => {
            let metric = |v: usize| {
                let bw: Units = vnr.incident_links(v).map(|l| l.bw_demand).sum();
                vnr.vnodes[v].cpu_demand * bw
            };
            ids.sort_by_key(|&v| (std::cmp::Reverse(metric(v)), v));
        }
    }
    ids
}

pub fn link_order(vnr: &Vnr, order: LinkOrder) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..vnr.vlinks.len()).collect();
    match order {
        LinkOrder::IntraDomainFirst => {
            ids.sort_by_key(|&l| (!vnr.is_intra_domain(&vnr.vlinks[l]), l));
        }
        LinkOrder::DescendingBandwidth => {
            ids.sort_by_key(|&l| (std::cmp::Reverse(vnr.vlinks[l].bw_demand), l));
        }
    }
    ids
}

/// Places every virtual node in `order`, allocating compute as it goes.
/// On failure all compute taken by this call is returned.
pub fn map_nodes(
    net: &mut SubstrateNetwork,
    vnr: &Vnr,
    order: &[usize],
    selector: &mut dyn NodeSelector,
) -> Result<NodeMapping, EmbedFailure> {
    let mut hosting = vec![false; net.node_count()];
    let mut hosts: Vec<Option<NodeId>> = vec![None; vnr.vnodes.len()];
    for &v in order {
        let vnode = &vnr.vnodes[v];
        let candidates = candidate_hosts(net, vnode, &hosting);
        if candidates.is_empty() {
            rollback_nodes(net, vnr, &hosts);
            return Err(EmbedFailure::NodeMapping { vnode: v });
        }
        let host = selector.select(&SelectionContext {
            net,
            vnr,
            vnode,
            candidates: &candidates,
            hosting: &hosting,
        });
        debug_assert!(candidates.contains(&host), "selector left the candidate set");
        net.allocate_node(host, vnode.cpu_demand)
            .expect("candidates have enough compute");
        hosting[host] = true;
        hosts[v] = Some(host);
    }
    Ok(NodeMapping(
        hosts.into_iter().map(|h| h.expect("every virtual node placed")).collect(),
    ))
}

fn rollback_nodes(net: &mut SubstrateNetwork, vnr: &Vnr, hosts: &[Option<NodeId>]) {
    for (v, host) in hosts.iter().enumerate() {
        if let Some(h) = host {
            net.release_node(*h, vnr.vnodes[v].cpu_demand)
                .expect("rollback returns what was taken");
        }
    }
}

/// Minimum-hop path from `src` to `dst` over links with at least `bw_demand`
/// available bandwidth and total delay within `delay_budget`.
///
/// Expands hop layer by hop layer, keeping for every node the least delay
/// reachable within that many hops. The first layer at which `dst` is
/// within budget gives the minimum hop count, and the path reconstructed
/// there is necessarily simple. Neighbors are expanded in ascending id and
/// only strict improvements replace a label, so ties resolve
/// deterministically.
pub fn bfs_shortest_feasible_path(
    net: &SubstrateNetwork,
    src: NodeId,
    dst: NodeId,
    bw_demand: Units,
    delay_budget: f64,
) -> Option<Vec<LinkId>> {
    layered_search(net, src, dst, bw_demand, delay_budget, None)
}

/// Like [`bfs_shortest_feasible_path`], restricted to paths of at most
/// `max_hops` links.
fn layered_search(
    net: &SubstrateNetwork,
    src: NodeId,
    dst: NodeId,
    bw_demand: Units,
    delay_budget: f64,
    max_hops: Option<usize>,
) -> Option<Vec<LinkId>> {
    let n = net.node_count();
    if src >= n || dst >= n {
        return None;
    }
    if src == dst {
        return Some(Vec::new());
    }
    let max_hops = max_hops.unwrap_or(n - 1).min(n - 1);
    let mut delay = vec![f64::INFINITY; n];
    delay[src] = 0.0;
    // parents[h][v]: predecessor and link if v improved at layer h + 1.
    let mut parents: Vec<Vec<Option<(NodeId, LinkId)>>> = Vec::new();
    let mut frontier = vec![src];
    for _layer in 1..=max_hops {
        let mut next = delay.clone();
        let mut parent = vec![None; n];
        let mut improved = Vec::new();
        for &u in &frontier {
            for &(v, l) in net.neighbors(u) {
                let link = &net.links()[l];
                if link.bw_available < bw_demand {
                    continue;
                }
                let d = delay[u] + link.delay;
                if d <= delay_budget && d < next[v] {
                    if parent[v].is_none() {
                        improved.push(v);
                    }
                    next[v] = d;
                    parent[v] = Some((u, l));
                }
            }
        }
        if improved.is_empty() {
            return None;
        }
        delay = next;
        parents.push(parent);
        if delay[dst] <= delay_budget {
            return Some(reconstruct(&parents, src, dst));
        }
        improved.sort_unstable();
        frontier = improved;
    }
    None
}

fn reconstruct(parents: &[Vec<Option<(NodeId, LinkId)>>], src: NodeId, dst: NodeId) -> Vec<LinkId> {
    let mut path = Vec::new();
    let mut node = dst;
    let mut layer = parents.len();
    while node != src {
        while parents[layer - 1][node].is_none() {
            layer -= 1;
        }
        let (prev, link) = parents[layer - 1][node].expect("label has a parent");
        path.push(link);
        node = prev;
        layer -= 1;
    }
    path.reverse();
    path
}

/// Minimum-hop feasible path whose narrowest link has the most available
/// bandwidth among all minimum-hop feasible paths.
pub fn widest_shortest_feasible_path(
    net: &SubstrateNetwork,
    src: NodeId,
    dst: NodeId,
    bw_demand: Units,
    delay_budget: f64,
) -> Option<Vec<LinkId>> {
    let base = layered_search(net, src, dst, bw_demand, delay_budget, None)?;
    let hops = base.len();
    let mut thresholds: Vec<Units> = net
        .links()
        .iter()
        .map(|l| l.bw_available)
        .filter(|&b| b >= bw_demand)
        .collect();
    thresholds.sort_unstable();
    thresholds.dedup();
    // Feasibility within `hops` is monotone in the threshold; `lo` stays
    // feasible (the base path clears thresholds[0]) and `hi` infeasible.
    let (mut lo, mut hi) = (0usize, thresholds.len());
    let mut best = base;
    while lo + 1 < hi {
        let mid = (lo + hi) / 2;
        match layered_search(net, src, dst, thresholds[mid], delay_budget, Some(hops)) {
            Some(p) => {
                best = p;
                lo = mid;
            }
            None => hi = mid,
        }
    }
    Some(best)
}

fn find_path(
    net: &SubstrateNetwork,
    rule: PathRule,
    src: NodeId,
    dst: NodeId,
    bw: Units,
    budget: f64,
) -> Option<Vec<LinkId>> {
    match rule {
        PathRule::MinHop => bfs_shortest_feasible_path(net, src, dst, bw, budget),
        PathRule::MinHopWidest => widest_shortest_feasible_path(net, src, dst, bw, budget),
    }
}

/// Routes every virtual link in `order`, reserving bandwidth as it goes.
/// On failure all bandwidth taken by this call is returned.
pub fn map_links(
    net: &mut SubstrateNetwork,
    vnr: &Vnr,
    nodes: &NodeMapping,
    order: &[usize],
    rule: PathRule,
) -> Result<LinkMapping, EmbedFailure> {
    let mut paths: Vec<Option<Vec<LinkId>>> = vec![None; vnr.vlinks.len()];
    for &l in order {
        let vl = &vnr.vlinks[l];
        let (a, b) = (nodes.host(vl.endpoints.0), nodes.host(vl.endpoints.1));
        let found = find_path(net, rule, a, b, vl.bw_demand, vl.delay_bound)
            .filter(|p| net.allocate_path(p, vl.bw_demand).is_ok());
        match found {
            Some(p) => paths[l] = Some(p),
            None => {
                for (i, p) in paths.iter().enumerate() {
                    if let Some(p) = p {
                        net.release_path(p, vnr.vlinks[i].bw_demand)
                            .expect("rollback returns what was taken");
                    }
                }
                return Err(EmbedFailure::LinkMapping { vlink: l });
            }
        }
    }
    Ok(LinkMapping(
        paths.into_iter().map(|p| p.expect("every virtual link routed")).collect(),
    ))
}

/// Maps nodes then links following `plan`, and registers the result as an
/// active embedding. The ledger is unchanged on failure.
pub fn embed_with_plan(
    net: &mut SubstrateNetwork,
    vnr: &Vnr,
    plan: EmbeddingPlan,
    selector: &mut dyn NodeSelector,
) -> Result<Embedding, EmbedFailure> {
    let nodes = map_nodes(net, vnr, &node_order(vnr, plan.node_order), selector)?;
    let links = match map_links(net, vnr, &nodes, &link_order(vnr, plan.link_order), plan.path_rule) {
        Ok(links) => links,
        Err(e) => {
            let hosts: Vec<Option<NodeId>> = nodes.0.iter().copied().map(Some).collect();
            rollback_nodes(net, vnr, &hosts);
            return Err(e);
        }
    };
    let emb = Embedding::new(vnr, nodes, links);
    let claim = ResourceClaim::of(vnr, &emb).expect("mapping covers the request");
    net.register_claim(vnr.id, claim)
        .expect("request ids are unique among active embeddings");
    Ok(emb)
}

/// Embeds `vnr` with the learned-policy pipeline: nodes by descending
/// compute demand, intra-domain links before cross-domain links, plain
/// minimum-hop routing.
pub fn embed_vnr(
    net: &mut SubstrateNetwork,
    vnr: &Vnr,
    selector: &mut dyn NodeSelector,
) -> Result<Embedding, EmbedFailure> {
    embed_with_plan(net, vnr, EmbeddingPlan::POLICY, selector)
}

/// Node selection through the policy network.
pub struct PolicySelector<'a> {
    pub params: &'a PolicyParams,
    pub extractor: &'a FeatureExtractor,
    /// Sample from the distribution when set, otherwise greedy.
    pub rng: Option<&'a mut dyn RngCore>,
    /// Receives one record per placement when set.
    pub trace: Option<&'a mut Vec<Decision>>,
}

impl<'a> PolicySelector<'a> {
    pub fn greedy(params: &'a PolicyParams, extractor: &'a FeatureExtractor) -> Self {
        Self {
            params,
            extractor,
            rng: None,
            trace: None,
        }
    }

    pub fn sampling(
        params: &'a PolicyParams,
        extractor: &'a FeatureExtractor,
        rng: &'a mut dyn RngCore,
        trace: &'a mut Vec<Decision>,
    ) -> Self {
        Self {
            params,
            extractor,
            rng: Some(rng),
            trace: Some(trace),
        }
    }
}

impl NodeSelector for PolicySelector<'_> {
    fn select(&mut self, ctx: &SelectionContext<'_>) -> NodeId {
        let unembedded: Vec<bool> = ctx.hosting.iter().map(|h| !h).collect();
        let matrix = self.extractor.extract(ctx.net, &unembedded);
        let mut mask = vec![false; ctx.net.node_count()];
        for &c in ctx.candidates {
            mask[c] = true;
        }
        let dist = policy::forward(self.params, &matrix, &mask).expect("candidate set is non-empty");
        let chosen = match self.rng.as_deref_mut() {
            Some(rng) => policy::select_node(&dist, Selection::Sample(rng)),
            None => policy::select_node(&dist, Selection::Greedy),
        };
        if let Some(trace) = self.trace.as_deref_mut() {
            trace.push(Decision {
                log_prob: dist.prob(chosen).ln(),
                matrix,
                candidates: mask,
                chosen,
            });
        }
        chosen
    }
}

/// A violated embedding constraint.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Mapping sizes or ids do not fit the request or substrate.
    Malformed(String),
    /// Two virtual nodes of one request share a host.
    SharedHost { host: NodeId, vnodes: (usize, usize) },
    /// Host lies outside the virtual node's target segment.
    WrongDomain { vnode: usize, host: NodeId },
    /// Host lacks compute for the request's demand on it.
    Cpu { host: NodeId, demand: Units, available: Units },
    /// Link lacks bandwidth for the request's demand on it.
    Bandwidth { link: LinkId, demand: Units, available: Units },
    /// Path delay exceeds the virtual link's bound.
    Delay { vlink: usize, delay: f64, bound: f64 },
    /// Path does not carry a unit flow from source host to sink host.
    FlowConservation { vlink: usize, reason: String },
    /// Stored revenue or cost disagrees with the mapping.
    Accounting,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Checks `emb` against the ledger state `snapshot` had before `emb` was
/// applied: one host per virtual node of the request, target segments,
/// compute and bandwidth sums, cumulative path delay, and flow conservation
/// of every path.
pub fn validate_embedding(
    snapshot: &SubstrateNetwork,
    vnr: &Vnr,
    emb: &Embedding,
) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    if emb.vnr_id != vnr.id
        || emb.nodes.len() != vnr.vnodes.len()
        || emb.links.len() != vnr.vlinks.len()
    {
        return Err(vec![Violation::Malformed(
            "mapping does not match the request".to_string(),
        )]);
    }
    if let Some(&bad) = emb.nodes.0.iter().find(|&&h| h >= snapshot.node_count()) {
        return Err(vec![Violation::Malformed(format!("unknown host {bad}"))]);
    }
    if let Some(&bad) = emb.links.0.iter().flatten().find(|&&l| l >= snapshot.link_count()) {
        return Err(vec![Violation::Malformed(format!("unknown link {bad}"))]);
    }

    let mut first_on: Vec<Option<usize>> = vec![None; snapshot.node_count()];
    let mut cpu = vec![0; snapshot.node_count()];
    for v in &vnr.vnodes {
        let host = emb.nodes.host(v.id);
        if let Some(other) = first_on[host] {
            out.push(Violation::SharedHost { host, vnodes: (other, v.id) });
        } else {
            first_on[host] = Some(v.id);
        }
        if snapshot.nodes()[host].domain != v.target_domain {
            out.push(Violation::WrongDomain { vnode: v.id, host });
        }
        cpu[host] += v.cpu_demand;
    }
    for (host, &demand) in cpu.iter().enumerate() {
        let available = snapshot.nodes()[host].cpu_available;
        if demand > available {
            out.push(Violation::Cpu { host, demand, available });
        }
    }

    let mut bw = vec![0; snapshot.link_count()];
    for vl in &vnr.vlinks {
        let path = emb.links.path(vl.id);
        let (src, dst) = (emb.nodes.host(vl.endpoints.0), emb.nodes.host(vl.endpoints.1));
        if let Err(reason) = check_flow(snapshot, path, src, dst) {
            out.push(Violation::FlowConservation { vlink: vl.id, reason });
        }
        let delay: f64 = path.iter().map(|&l| snapshot.links()[l].delay).sum();
        if delay > vl.delay_bound {
            out.push(Violation::Delay { vlink: vl.id, delay, bound: vl.delay_bound });
        }
        for &l in path {
            bw[l] += vl.bw_demand;
        }
    }
    for (link, &demand) in bw.iter().enumerate() {
        let available = snapshot.links()[link].bw_available;
        if demand > available {
            out.push(Violation::Bandwidth { link, demand, available });
        }
    }

    if emb.revenue != embedding_revenue(vnr) || emb.cost != embedding_cost(vnr, &emb.links) {
        out.push(Violation::Accounting);
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Orients `path` from `src` and checks it is a contiguous simple walk
/// ending at `dst`: net outflow +1 at `src`, -1 at `dst`, 0 elsewhere.
fn check_flow(net: &SubstrateNetwork, path: &[LinkId], src: NodeId, dst: NodeId) -> Result<(), String> {
    let mut balance = vec![0i64; net.node_count()];
    let mut visited = vec![false; net.node_count()];
    let mut at = src;
    visited[src] = true;
    for &l in path {
        let next = net.links()[l]
            .opposite(at)
            .ok_or_else(|| format!("link {l} does not continue from node {at}"))?;
        if visited[next] {
            return Err(format!("path revisits node {next}"));
        }
        visited[next] = true;
        balance[at] += 1;
        balance[next] -= 1;
        at = next;
    }
    if at != dst {
        return Err(format!("path ends at {at}, expected {dst}"));
    }
    for (node, &b) in balance.iter().enumerate() {
        let expected = if src == dst {
            0
        } else if node == src {
            1
        } else if node == dst {
            -1
        } else {
            0
        };
        if b != expected {
            return Err(format!("node {node} has net outflow {b}"));
        }
    }
    Ok(())
}
