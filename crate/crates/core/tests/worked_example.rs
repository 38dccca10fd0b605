mod common;

use common::*;
use sagin_vne::baselines::{nrm_vne_embed, rcr_vne_embed};
use sagin_vne::embedder::{LinkMapping, NodeMapping, PolicySelector};
use sagin_vne::oracle::brute_force_feasible;
use sagin_vne::{embed_vnr, validate_embedding, Embedding, FeatureExtractor, PolicyParams, Violation};

fn link(net: &sagin_vne::SubstrateNetwork, u: usize, v: usize) -> usize {
    net.link_between(u, v).unwrap()
}

#[test]
fn oracle_finds_the_unique_placement() {
    let net = worked_substrate();
    let vnr = worked_request();
    let witness = brute_force_feasible(&net, &vnr).unwrap().expect("feasible");
    assert_eq!(witness.nodes.0, vec![B, D, G]);
    assert_eq!(witness.links.path(0), &[link(&net, B, D)]);
    assert_eq!(witness.links.path(1), &[link(&net, B, G)]);
    assert_eq!(witness.links.path(2), &[link(&net, D, G)]);
    assert!(validate_embedding(&net, &vnr, &witness).is_ok());
    assert_eq!(witness.revenue, 30 + 25);
    assert_eq!(witness.cost, 30 + 25);
}

#[test]
fn placement_through_a_breaks_delay_bounds() {
    let net = worked_substrate();
    let vnr = worked_request();
    let bad = Embedding::new(
        &vnr,
        NodeMapping(vec![A, C, F]),
        LinkMapping(vec![
            vec![link(&net, A, C)],
            vec![link(&net, A, F)],
            vec![link(&net, A, C), link(&net, A, F)],
        ]),
    );
    let violations = validate_embedding(&net, &vnr, &bad).unwrap_err();
    let delayed: Vec<usize> = violations
        .iter()
        .filter_map(|v| match v {
            Violation::Delay { vlink, .. } => Some(*vlink),
            _ => None,
        })
        .collect();
    assert_eq!(delayed, vec![0, 1, 2]);
}

#[test]
fn restricted_to_a_c_f_is_infeasible() {
    let net = worked_substrate().induced_subgraph(&[A, C, F]).unwrap();
    let vnr = worked_request();
    assert_eq!(brute_force_feasible(&net, &vnr).unwrap(), None);
    let extractor = FeatureExtractor::new(&net);
    let params = PolicyParams::zeros(0.0);
    let mut n = net.clone();
    assert!(embed_vnr(&mut n, &vnr, &mut PolicySelector::greedy(&params, &extractor)).is_err());
    assert!(nrm_vne_embed(&mut n, &vnr).is_err());
    assert!(rcr_vne_embed(&mut n, &vnr).is_err());
    assert_eq!(n, net);
}

#[test]
fn embedders_either_match_the_witness_or_reject() {
    let net = worked_substrate();
    let vnr = worked_request();
    let extractor = FeatureExtractor::new(&net);
    let mut rng = rng(0);
    let mut accepted = 0;
    for _ in 0..50 {
        let params = PolicyParams::random(&mut rng, 0.0);
        let mut n = net.clone();
        if let Ok(emb) = embed_vnr(&mut n, &vnr, &mut PolicySelector::greedy(&params, &extractor)) {
            assert_eq!(emb.nodes.0, vec![B, D, G]);
            accepted += 1;
        }
    }
    for embed in [nrm_vne_embed, rcr_vne_embed] {
        let mut n = net.clone();
        if let Ok(emb) = embed(&mut n, &vnr) {
            assert_eq!(emb.nodes.0, vec![B, D, G]);
        }
    }
    // With A and B ranked by learned scores, some parameter draws prefer B.
    assert!(accepted > 0);
}
