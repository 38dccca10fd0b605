//! Per-node observation features and the normalized feature matrix.
//!
//! Each substrate node contributes four raw attributes: available compute,
//! the summed available bandwidth and summed delay of its intra-domain
//! links, and its average in-domain hop distance to nodes not yet used by
//! the request being embedded. Columns are min-max normalized.

use std::collections::VecDeque;

use crate::substrate::{LedgerError, SubstrateNetwork};
use crate::NodeId;

pub const FEATURE_COUNT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FeatureVector {
    pub cpu: f64,
    pub sum_bw: f64,
    pub sum_delay: f64,
    pub avg_dist: f64,
}

impl FeatureVector {
    pub fn to_array(self) -> [f64; FEATURE_COUNT] {
        [self.cpu, self.sum_bw, self.sum_delay, self.avg_dist]
    }
}

/// One row per substrate node, in node-id order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: Vec<[f64; FEATURE_COUNT]>,
}

impl FeatureMatrix {
    pub fn from_rows(rows: Vec<[f64; FEATURE_COUNT]>) -> Self {
        Self { rows }
    }

    pub fn rows(&self) -> &[[f64; FEATURE_COUNT]] {
        &self.rows
    }

    pub fn row(&self, node: NodeId) -> &[f64; FEATURE_COUNT] {
        &self.rows[node]
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Min-max normalizes each column in place; constant columns become 0.
    pub fn normalize(&mut self) {
        for c in 0..FEATURE_COUNT {
            let (lo, hi) = self
                .rows
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                    (lo.min(r[c]), hi.max(r[c]))
                });
            let span = hi - lo;
            for r in &mut self.rows {
                r[c] = if span > 0.0 { (r[c] - lo) / span } else { 0.0 };
            }
        }
    }

    /// CSV with header `node,cpu,sum_bw,sum_delay,avg_dist`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node,cpu,sum_bw,sum_delay,avg_dist\n");
        for (i, r) in self.rows.iter().enumerate() {
            out.push_str(&format!("{i},{},{},{},{}\n", r[0], r[1], r[2], r[3]));
        }
        out
    }
}

/// Sum of available bandwidth over the intra-domain links incident to `node`.
pub fn sum_adjacent_bandwidth(net: &SubstrateNetwork, node: NodeId) -> Result<f64, LedgerError> {
    net.node(node)?;
    Ok(net
        .neighbors(node)
        .iter()
        .map(|&(_, l)| &net.links()[l])
        .filter(|l| !l.inter_domain)
        .map(|l| l.bw_available as f64)
        .sum())
}

/// Sum of delay over the intra-domain links incident to `node`.
pub fn sum_adjacent_delay(net: &SubstrateNetwork, node: NodeId) -> Result<f64, LedgerError> {
    net.node(node)?;
    Ok(net
        .neighbors(node)
        .iter()
        .map(|&(_, l)| &net.links()[l])
        .filter(|l| !l.inter_domain)
        .map(|l| l.delay)
        .sum())
}

/// Hop distances from `source` to every node of its domain, walking only
/// intra-domain links. Other-domain and unreachable entries are `None`.
fn domain_bfs(net: &SubstrateNetwork, source: NodeId) -> Vec<Option<u32>> {
    let domain = net.nodes()[source].domain;
    let mut dist = vec![None; net.node_count()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].expect("queued nodes have a distance");
        for &(v, _) in net.neighbors(u) {
            if dist[v].is_none() && net.nodes()[v].domain == domain {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Sum of in-domain hop distances from `node` to every other unembedded
/// node of its domain, divided by that set's size plus one. Unreachable
/// nodes count as the domain's node count.
///
/// `unembedded[i]` is true when substrate node `i` hosts no virtual node of
/// the request being embedded.
pub fn avg_distance_to_unembedded(
    net: &SubstrateNetwork,
    node: NodeId,
    unembedded: &[bool],
) -> Result<f64, LedgerError> {
    let domain = net.node(node)?.domain;
    let penalty = net.domain_nodes(domain).count() as f64;
    let dist = domain_bfs(net, node);
    let (mut total, mut count) = (0.0, 0usize);
    for other in net.domain_nodes(domain) {
        if other.id != node && unembedded[other.id] {
            total += dist[other.id].map_or(penalty, f64::from);
            count += 1;
        }
    }
    Ok(total / (count as f64 + 1.0))
}

/// Builds feature matrices against a fixed topology. In-domain hop
/// distances depend only on topology, so they are computed once here and
/// reused for every extraction while the ledgers change.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    /// Per node: `(peer, hops)` for every other node of the same domain.
    peers: Vec<Vec<(NodeId, f64)>>,
}

impl FeatureExtractor {
    pub fn new(net: &SubstrateNetwork) -> Self {
        let peers = net
            .nodes()
            .iter()
            .map(|n| {
                let penalty = net.domain_nodes(n.domain).count() as f64;
                let dist = domain_bfs(net, n.id);
                net.domain_nodes(n.domain)
                    .filter(|p| p.id != n.id)
                    .map(|p| (p.id, dist[p.id].map_or(penalty, f64::from)))
                    .collect()
            })
            .collect();
        Self { peers }
    }

    pub fn raw_vector(&self, net: &SubstrateNetwork, node: NodeId, unembedded: &[bool]) -> FeatureVector {
        let (mut sum_bw, mut sum_delay) = (0.0, 0.0);
        for &(_, l) in net.neighbors(node) {
            let link = &net.links()[l];
            if !link.inter_domain {
                sum_bw += link.bw_available as f64;
                sum_delay += link.delay;
            }
        }
        let (mut total, mut count) = (0.0, 0usize);
        for &(peer, hops) in &self.peers[node] {
            if unembedded[peer] {
                total += hops;
                count += 1;
            }
        }
        FeatureVector {
            cpu: net.nodes()[node].cpu_available as f64,
            sum_bw,
            sum_delay,
            avg_dist: total / (count as f64 + 1.0),
        }
    }

    /// Unnormalized matrix.
    pub fn raw_matrix(&self, net: &SubstrateNetwork, unembedded: &[bool]) -> FeatureMatrix {
        FeatureMatrix::from_rows(
            (0..net.node_count())
                .map(|n| self.raw_vector(net, n, unembedded).to_array())
                .collect(),
        )
    }

    pub fn extract(&self, net: &SubstrateNetwork, unembedded: &[bool]) -> FeatureMatrix {
        let mut m = self.raw_matrix(net, unembedded);
        m.normalize();
        m
    }
}

/// One-shot extraction; prefer a cached [`FeatureExtractor`] in loops.
pub fn extract_feature_matrix(net: &SubstrateNetwork, unembedded: &[bool]) -> FeatureMatrix {
    FeatureExtractor::new(net).extract(net, unembedded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::substrate::{generate_substrate, Domain, SubstrateConfig};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn path3() -> SubstrateNetwork {
        let mut net = SubstrateNetwork::new();
        for _ in 0..3 {
            net.add_node(Domain::Air, 10);
        }
        net.add_link(0, 1, 50, 10.0).unwrap();
        net.add_link(1, 2, 70, 15.0).unwrap();
        net
    }

    /// Floyd-Warshall over intra-domain links.
    fn all_pairs(net: &SubstrateNetwork) -> Vec<Vec<f64>> {
        let n = net.node_count();
        let mut d = vec![vec![f64::INFINITY; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        for l in net.links().iter().filter(|l| !l.inter_domain) {
            let (a, b) = l.endpoints;
            d[a][b] = 1.0;
            d[b][a] = 1.0;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if d[i][k] + d[k][j] < d[i][j] {
                        d[i][j] = d[i][k] + d[k][j];
                    }
                }
            }
        }
        d
    }

    #[test]
    fn isolated_node_sums_are_zero() {
        let mut net = SubstrateNetwork::new();
        net.add_node(Domain::Ground, 5);
        assert_eq!(sum_adjacent_bandwidth(&net, 0).unwrap(), 0.0);
        assert_eq!(sum_adjacent_delay(&net, 0).unwrap(), 0.0);
        assert!(sum_adjacent_bandwidth(&net, 3).is_err());
    }

    #[test]
    fn inter_domain_links_excluded() {
        let mut net = path3();
        let g = net.add_node(Domain::Ground, 10);
        net.add_link(1, g, 90, 50.0).unwrap();
        assert_eq!(sum_adjacent_bandwidth(&net, 1).unwrap(), 120.0);
        assert_eq!(sum_adjacent_delay(&net, 1).unwrap(), 25.0);
    }

    #[test]
    fn average_distance_on_path() {
        let net = path3();
        assert_eq!(avg_distance_to_unembedded(&net, 0, &[true; 3]).unwrap(), 1.0);
        assert_eq!(avg_distance_to_unembedded(&net, 0, &[false; 3]).unwrap(), 0.0);
        let ex = FeatureExtractor::new(&net);
        assert_eq!(ex.raw_vector(&net, 0, &[true; 3]).avg_dist, 1.0);
    }

    #[test]
    fn unreachable_peer_gets_domain_size_penalty() {
        let mut net = path3();
        net.add_node(Domain::Air, 10);
        // node 3 is cut off: hops {1, 2, 4}
        assert_eq!(avg_distance_to_unembedded(&net, 0, &[true; 4]).unwrap(), 7.0 / 4.0);
    }

    #[test]
    fn degenerate_and_endpoint_normalization() {
        let mut net = SubstrateNetwork::new();
        net.add_node(Domain::Space, 20);
        assert_eq!(extract_feature_matrix(&net, &[true]).rows(), &[[0.0; 4]]);
        net.add_node(Domain::Space, 40);
        let m = extract_feature_matrix(&net, &[true, true]);
        assert_eq!(m.row(0)[0], 0.0);
        assert_eq!(m.row(1)[0], 1.0);
    }

    #[test]
    fn default_network_matrix_shape() {
        let net = generate_substrate(&SubstrateConfig::default(), &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let m = extract_feature_matrix(&net, &vec![true; net.node_count()]);
        assert_eq!(m.len(), 100);
        assert!(m.rows().iter().flatten().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn cpu_feature_monotone_under_allocation() {
        let mut net = path3();
        let ex = FeatureExtractor::new(&net);
        let before = ex.raw_vector(&net, 1, &[true; 3]).cpu;
        net.allocate_node(1, 4).unwrap();
        assert!(ex.raw_vector(&net, 1, &[true; 3]).cpu <= before);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn matches_naive_oracles(seed in any::<u64>(), mask_seed in any::<u64>()) {
            let mut cfg = SubstrateConfig::default();
            cfg.domains[0].nodes = 4; cfg.domains[0].links = 4;
            cfg.domains[1].nodes = 6; cfg.domains[1].links = 8;
            cfg.domains[2].nodes = 8; cfg.domains[2].links = 12;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut net = generate_substrate(&cfg, &mut rng).unwrap();
            // drain some bandwidth so available differs from capacity
            for l in 0..net.link_count() {
                if l % 3 == 0 {
                    net.allocate_path(&[l], 7).unwrap();
                }
            }
            let mut mrng = ChaCha8Rng::seed_from_u64(mask_seed);
            let mask: Vec<bool> = (0..net.node_count()).map(|_| rand::Rng::random_bool(&mut mrng, 0.6)).collect();
            let d = all_pairs(&net);
            let ex = FeatureExtractor::new(&net);
            for (node, dist) in d.iter().enumerate() {
                let mut bw = 0.0;
                let mut delay = 0.0;
                for l in net.links() {
                    if l.touches(node) && !l.inter_domain {
                        bw += l.bw_available as f64;
                        delay += l.delay;
                    }
                }
                prop_assert_eq!(sum_adjacent_bandwidth(&net, node).unwrap(), bw);
                prop_assert!((sum_adjacent_delay(&net, node).unwrap() - delay).abs() < 1e-9);

                let dom = net.nodes()[node].domain;
                let peers: Vec<usize> = (0..net.node_count())
                    .filter(|&u| u != node && mask[u] && net.nodes()[u].domain == dom)
                    .collect();
                let expected = peers.iter().map(|&u| dist[u]).sum::<f64>() / (peers.len() as f64 + 1.0);
                prop_assert!((avg_distance_to_unembedded(&net, node, &mask).unwrap() - expected).abs() < 1e-12);
                prop_assert!((ex.raw_vector(&net, node, &mask).avg_dist - expected).abs() < 1e-12);
            }
            let m = ex.extract(&net, &mask);
            prop_assert!(m.rows().iter().flatten().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
