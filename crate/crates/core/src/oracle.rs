//! Exhaustive feasibility check for tiny instances.
//!
//! Enumerates every injective, domain-respecting node assignment with
//! enough compute, then every combination of simple substrate paths for the
//! virtual links, charging bandwidth jointly across links that share a
//! substrate link. Exact, and exponential.

use thiserror::Error;

use crate::embedder::{Embedding, LinkMapping, NodeMapping};
use crate::substrate::SubstrateNetwork;
use crate::vnr::Vnr;
use crate::{LinkId, NodeId, Units};

pub const MAX_SUBSTRATE_NODES: usize = 10;
pub const MAX_VIRTUAL_NODES: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("instance too large for exhaustive search: {substrate} substrate nodes, {virtual_nodes} virtual nodes")]
    TooLarge { substrate: usize, virtual_nodes: usize },
}

/// A feasible embedding against the current ledger, or `None` if none exists.
pub fn brute_force_feasible(net: &SubstrateNetwork, vnr: &Vnr) -> Result<Option<Embedding>, OracleError> {
    if net.node_count() > MAX_SUBSTRATE_NODES || vnr.vnodes.len() > MAX_VIRTUAL_NODES {
        return Err(OracleError::TooLarge {
            substrate: net.node_count(),
            virtual_nodes: vnr.vnodes.len(),
        });
    }
    let mut search = Search {
        net,
        vnr,
        hosts: Vec::with_capacity(vnr.vnodes.len()),
        used: vec![false; net.node_count()],
        residual: net.links().iter().map(|l| l.bw_available).collect(),
        paths: Vec::with_capacity(vnr.vlinks.len()),
    };
    Ok(search.assign_nodes().then(|| {
        Embedding::new(
            vnr,
            NodeMapping(search.hosts.clone()),
            LinkMapping(search.paths.clone()),
        )
    }))
}

struct Search<'a> {
    net: &'a SubstrateNetwork,
    vnr: &'a Vnr,
    hosts: Vec<NodeId>,
    used: Vec<bool>,
    residual: Vec<Units>,
    paths: Vec<Vec<LinkId>>,
}

impl Search<'_> {
    fn assign_nodes(&mut self) -> bool {
        let v = self.hosts.len();
        if v == self.vnr.vnodes.len() {
            return self.route_links();
        }
        let vnode = &self.vnr.vnodes[v];
        for n in self.net.nodes() {
            if self.used[n.id] || n.domain != vnode.target_domain || n.cpu_available < vnode.cpu_demand {
                continue;
            }
            self.used[n.id] = true;
            self.hosts.push(n.id);
            if self.assign_nodes() {
                return true;
            }
            self.hosts.pop();
            self.used[n.id] = false;
        }
        false
    }

    fn route_links(&mut self) -> bool {
        let l = self.paths.len();
        if l == self.vnr.vlinks.len() {
            return true;
        }
        let vl = &self.vnr.vlinks[l];
        let (src, dst) = (self.hosts[vl.endpoints.0], self.hosts[vl.endpoints.1]);
        let mut candidates = Vec::new();
        let mut visited = vec![false; self.net.node_count()];
        visited[src] = true;
        self.simple_paths(src, dst, vl.bw_demand, vl.delay_bound, 0.0, &mut visited, &mut Vec::new(), &mut candidates);
        for path in candidates {
            for &link in &path {
                self.residual[link] -= vl.bw_demand;
            }
            self.paths.push(path);
            if self.route_links() {
                return true;
            }
            let path = self.paths.pop().expect("pushed above");
            for &link in &path {
                self.residual[link] += vl.bw_demand;
            }
        }
        false
    }

    /// Every simple path from `at` to `dst` whose links each have `bw`
    /// residual bandwidth and whose delay stays within `budget`.
    #[allow(clippy::too_many_arguments)]
    fn simple_paths(
        &self,
        at: NodeId,
        dst: NodeId,
        bw: Units,
        budget: f64,
        delay: f64,
        visited: &mut [bool],
        prefix: &mut Vec<LinkId>,
        out: &mut Vec<Vec<LinkId>>,
    ) {
        if at == dst {
            out.push(prefix.clone());
            return;
        }
        for &(next, link) in self.net.neighbors(at) {
            let d = delay + self.net.links()[link].delay;
            if visited[next] || self.residual[link] < bw || d > budget {
                continue;
            }
            visited[next] = true;
            prefix.push(link);
            self.simple_paths(next, dst, bw, budget, d, visited, prefix, out);
            prefix.pop();
            visited[next] = false;
        }
    }
}
