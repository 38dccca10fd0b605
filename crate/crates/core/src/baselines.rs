//! Ranking heuristics used as comparison points for the learned embedder.
//!
//! NRM-VNE ranks virtual nodes by `cpu * incident bandwidth demand` and
//! substrate nodes by `available cpu * intra-domain available bandwidth`,
//! pairing them greedily. RCR-VNE places virtual nodes in id order on the
//! feasible host with the most available compute. Both route virtual links
//! in descending bandwidth demand.

use crate::embedder::{
    embed_with_plan, EmbedFailure, Embedding, EmbeddingPlan, LinkOrder, NodeOrder, NodeSelector,
    PathRule, SelectionContext,
};
use crate::features::sum_adjacent_bandwidth;
use crate::substrate::{LedgerError, SubstrateNetwork};
use crate::vnr::Vnr;
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeMetric {
    pub node: NodeId,
    pub score: f64,
}

/// `cpu_available * sum of available intra-domain incident bandwidth`.
pub fn nrm_score(net: &SubstrateNetwork, node: NodeId) -> Result<f64, LedgerError> {
    let cpu = net.node(node)?.cpu_available as f64;
    Ok(cpu * sum_adjacent_bandwidth(net, node)?)
}

/// All substrate nodes by descending score, lower id first on ties.
pub fn rank_nodes(net: &SubstrateNetwork) -> Vec<NodeMetric> {
    let mut ranked: Vec<NodeMetric> = (0..net.node_count())
        .map(|node| NodeMetric {
            node,
            score: nrm_score(net, node).expect("node exists"),
        })
        .collect();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.node.cmp(&b.node)));
    ranked
}

/// Picks the candidate with the best `key`, lowest id on ties.
fn best_by(ctx: &SelectionContext<'_>, key: impl Fn(NodeId) -> f64) -> NodeId {
    let mut best = ctx.candidates[0];
    let mut best_key = key(best);
    for &c in &ctx.candidates[1..] {
        let k = key(c);
        if k > best_key {
            best = c;
            best_key = k;
        }
    }
    best
}

pub struct NrmSelector;

impl NodeSelector for NrmSelector {
    fn select(&mut self, ctx: &SelectionContext<'_>) -> NodeId {
        best_by(ctx, |n| nrm_score(ctx.net, n).expect("candidate exists"))
    }
}

pub struct RcrSelector;

impl NodeSelector for RcrSelector {
    fn select(&mut self, ctx: &SelectionContext<'_>) -> NodeId {
        best_by(ctx, |n| ctx.net.nodes()[n].cpu_available as f64)
    }
}

pub const NRM_PLAN: EmbeddingPlan = EmbeddingPlan {
    node_order: NodeOrder::DescendingResourceMetric,
    link_order: LinkOrder::DescendingBandwidth,
    path_rule: PathRule::MinHopWidest,
};

pub const RCR_PLAN: EmbeddingPlan = EmbeddingPlan {
    node_order: NodeOrder::Id,
    link_order: LinkOrder::DescendingBandwidth,
    path_rule: PathRule::MinHop,
};

pub fn nrm_vne_embed(net: &mut SubstrateNetwork, vnr: &Vnr) -> Result<Embedding, EmbedFailure> {
    embed_with_plan(net, vnr, NRM_PLAN, &mut NrmSelector)
}

pub fn rcr_vne_embed(net: &mut SubstrateNetwork, vnr: &Vnr) -> Result<Embedding, EmbedFailure> {
    embed_with_plan(net, vnr, RCR_PLAN, &mut RcrSelector)
}
