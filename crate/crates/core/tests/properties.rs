mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;

use common::*;
use sagin_vne::baselines::{nrm_vne_embed, rcr_vne_embed};
use sagin_vne::embedder::{bfs_shortest_feasible_path, widest_shortest_feasible_path, PolicySelector};
use sagin_vne::harness::{simulate, Algorithm, Fixtures, SimulationConfig};
use sagin_vne::oracle::brute_force_feasible;
use sagin_vne::policy::Decision;
use sagin_vne::substrate::LedgerError;
use sagin_vne::{
    embed_vnr, validate_embedding, Domain, EmbedFailure, Embedding, FeatureExtractor, PolicyParams,
    SubstrateNetwork, Vnr,
};

type Embedder<'a> = Box<dyn FnMut(&mut SubstrateNetwork, &Vnr) -> Result<Embedding, EmbedFailure> + 'a>;

fn embedders<'a>(params: &'a PolicyParams, extractor: &'a FeatureExtractor) -> Vec<(&'static str, Embedder<'a>)> {
    vec![
        (
            "drl",
            Box::new(move |n: &mut SubstrateNetwork, v: &Vnr| {
                embed_vnr(n, v, &mut PolicySelector::greedy(params, extractor))
            }),
        ),
        ("nrm", Box::new(nrm_vne_embed)),
        ("rcr", Box::new(rcr_vne_embed)),
    ]
}

#[test]
fn heuristic_acceptance_implies_oracle_feasibility() {
    let (mut accepted, mut infeasible) = (0, 0);
    for seed in 0..250 {
        let (mut net, vnrs) = tiny_instance(seed, 3);
        // Load the ledger with the first request so later checks see residual state.
        let _ = rcr_vne_embed(&mut net, &vnrs[0]);
        let extractor = FeatureExtractor::new(&net);
        let params = PolicyParams::random(&mut rng(seed), 0.0);
        for vnr in &vnrs[1..] {
            let witness = brute_force_feasible(&net, vnr).unwrap();
            if let Some(w) = &witness {
                assert!(validate_embedding(&net, vnr, w).is_ok(), "seed {seed}: bad witness");
            } else {
                infeasible += 1;
            }
            for (name, mut embed) in embedders(&params, &extractor) {
                let mut n = net.clone();
                if let Ok(emb) = embed(&mut n, vnr) {
                    accepted += 1;
                    assert!(witness.is_some(), "seed {seed}: {name} accepted an infeasible request");
                    assert!(validate_embedding(&net, vnr, &emb).is_ok());
                } else {
                    assert_eq!(n, net, "seed {seed}: {name} left residue after failing");
                }
            }
        }
    }
    assert!(accepted > 100 && infeasible > 20, "accepted {accepted}, infeasible {infeasible}");
}

fn all_paths(net: &SubstrateNetwork, src: usize, dst: usize, bw: u64, budget: f64) -> Vec<(Vec<usize>, f64)> {
    #[allow(clippy::too_many_arguments)]
    fn walk(
        net: &SubstrateNetwork,
        at: usize,
        dst: usize,
        bw: u64,
        budget: f64,
        seen: &mut Vec<bool>,
        path: &mut Vec<usize>,
        delay: f64,
        out: &mut Vec<(Vec<usize>, f64)>,
    ) {
        if at == dst {
            out.push((path.clone(), delay));
            return;
        }
        for &(next, link) in net.neighbors(at) {
            let l = net.link(link).unwrap();
            if seen[next] || l.bw_available < bw || delay + l.delay > budget {
                continue;
            }
            seen[next] = true;
            path.push(link);
            walk(net, next, dst, bw, budget, seen, path, delay + l.delay, out);
            path.pop();
            seen[next] = false;
        }
    }
    let mut seen = vec![false; net.node_count()];
    seen[src] = true;
    let mut out = Vec::new();
    walk(net, src, dst, bw, budget, &mut seen, &mut Vec::new(), 0.0, &mut out);
    out
}

fn check_path(net: &SubstrateNetwork, path: &[usize], src: usize, dst: usize, bw: u64, budget: f64) {
    let mut at = src;
    let mut visited = vec![src];
    let mut delay = 0.0;
    for &id in path {
        let l = net.link(id).unwrap();
        at = l.opposite(at).expect("contiguous path");
        assert!(!visited.contains(&at), "path revisits node {at}");
        visited.push(at);
        assert!(l.bw_available >= bw);
        delay += l.delay;
    }
    assert_eq!(at, dst);
    assert!(delay <= budget + 1e-9);
}

fn small_graph() -> impl Strategy<Value = SubstrateNetwork> {
    (2usize..=8).prop_flat_map(|n| {
        prop::collection::vec((0..n, 0..n, 0u64..30, 1.0f64..30.0), 1..20).prop_map(move |edges| {
            let mut net = SubstrateNetwork::new();
            for _ in 0..n {
                net.add_node(Domain::Ground, 10);
            }
            for (u, v, bw, delay) in edges {
                if u != v && net.link_between(u, v).is_none() {
                    net.add_link(u, v, bw, delay.round()).unwrap();
                }
            }
            net
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn path_search_is_minimum_hop(net in small_graph(), s in 0usize..8, t in 0usize..8, bw in 0u64..30, budget in 0.0f64..90.0) {
        let (src, dst) = (s % net.node_count(), t % net.node_count());
        let paths = all_paths(&net, src, dst, bw, budget);
        let best = paths.iter().map(|(p, _)| p.len()).min();
        let found = bfs_shortest_feasible_path(&net, src, dst, bw, budget);
        prop_assert_eq!(found.as_ref().map(Vec::len), best);
        if let Some(p) = &found {
            check_path(&net, p, src, dst, bw, budget);
        }
        let widest = widest_shortest_feasible_path(&net, src, dst, bw, budget);
        prop_assert_eq!(widest.as_ref().map(Vec::len), best);
        if let Some(p) = &widest {
            check_path(&net, p, src, dst, bw, budget);
            let bottleneck = |p: &[usize]| p.iter().map(|&l| net.link(l).unwrap().bw_available).min().unwrap_or(u64::MAX);
            let widest_possible = paths
                .iter()
                .filter(|(q, _)| Some(q.len()) == best)
                .map(|(q, _)| bottleneck(q))
                .max()
                .unwrap();
            prop_assert_eq!(bottleneck(p), widest_possible);
        }
    }
}

#[test]
fn thousand_request_replay_closes_every_ledger() {
    let mut cfg = SimulationConfig::default();
    cfg.vnr.count = 1001;
    cfg.train_count = 1;
    cfg.batch_size = 1;
    let f = Fixtures::generate(&cfg, 50.0).unwrap();
    assert_eq!(f.test.len(), 1000);
    let extractor = FeatureExtractor::new(&f.substrate);
    let params = PolicyParams::random(&mut rng(5), 0.0);
    for algorithm in Algorithm::ALL {
        let mut net = f.substrate.pristine();
        let mut checks = 0;
        simulate(&mut net, &f.test, 100.0, |n, v| {
            assert!(n.ledger_is_conserved());
            checks += 1;
            sagin_vne::harness::embed_one(algorithm, n, v, &params, &extractor)
        })
        .unwrap();
        assert_eq!(checks, 1000);
        assert!(net.is_fully_released(), "{algorithm}");
        assert_eq!(net, f.substrate.pristine(), "{algorithm}");
    }
}

#[test]
fn release_order_does_not_matter() {
    let mut cfg = SimulationConfig::default();
    cfg.vnr.count = 400;
    cfg.train_count = 1;
    cfg.batch_size = 1;
    let f = Fixtures::generate(&cfg, 50.0).unwrap();
    let mut net = f.substrate.pristine();
    let mut held: Vec<Embedding> = f.test.iter().filter_map(|v| rcr_vne_embed(&mut net, v).ok()).collect();
    assert!(held.len() > 20);
    assert!(net.ledger_is_conserved());
    held.shuffle(&mut rng(1));
    for (i, emb) in held.iter().enumerate() {
        net.release_embedding(emb).unwrap();
        if i % 7 == 0 {
            assert!(net.ledger_is_conserved());
        }
    }
    assert_eq!(net, f.substrate.pristine());
    assert!(matches!(net.release_embedding(&held[0]), Err(LedgerError::NotActive(_))));
}

#[test]
fn sampled_and_greedy_embeddings_are_sound() {
    let mut cfg = SimulationConfig::default();
    cfg.vnr.count = 601;
    cfg.train_count = 1;
    cfg.batch_size = 1;
    let f = Fixtures::generate(&cfg, 30.0).unwrap();
    let extractor = FeatureExtractor::new(&f.substrate);
    let mut r = rng(9);
    let params = PolicyParams::random(&mut r, 0.0);
    let mut net = f.substrate.pristine();
    let mut accepted = 0;
    for (i, vnr) in f.test.iter().enumerate() {
        let snapshot = net.clone();
        let mut trace: Vec<Decision> = Vec::new();
        let result = if i % 2 == 0 {
            embed_vnr(&mut net, vnr, &mut PolicySelector::sampling(&params, &extractor, &mut r, &mut trace))
        } else {
            nrm_vne_embed(&mut net, vnr)
        };
        match result {
            Ok(emb) => {
                accepted += 1;
                if let Err(v) = validate_embedding(&snapshot, vnr, &emb) {
                    panic!("request {}: {v:?}", vnr.id);
                }
            }
            Err(_) => assert_eq!(net, snapshot),
        }
    }
    assert!(accepted > 0);
}
