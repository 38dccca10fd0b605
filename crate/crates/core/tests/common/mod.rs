#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sagin_vne::substrate::{generate_substrate, DomainConfig};
use sagin_vne::vnr::{generate_vnr_set, VirtualLink, VirtualNode};
use sagin_vne::{Bounds, Domain, SubstrateConfig, SubstrateNetwork, Vnr, VnrConfig};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Three segments of three nodes each, scarce enough that both outcomes occur.
pub fn tiny_substrate_config() -> SubstrateConfig {
    let domain = |cpu: (u64, u64), delay: (f64, f64)| DomainConfig {
        nodes: 3,
        links: 3,
        cpu: Bounds::new(cpu.0, cpu.1),
        bw: Bounds::new(5, 30),
        delay: Bounds::new(delay.0, delay.1),
    };
    SubstrateConfig {
        domains: [
            domain((5, 20), (20.0, 40.0)),
            domain((5, 20), (10.0, 30.0)),
            domain((10, 30), (1.0, 20.0)),
        ],
        inter_links_per_pair: 2,
        inter_bw: Bounds::new(5, 30),
        inter_delay: Bounds::new(20.0, 45.0),
    }
}

pub fn tiny_vnr_config(count: usize) -> VnrConfig {
    VnrConfig {
        count,
        nodes: Bounds::new(2, 4),
        delay_cap: 80.0,
        ..VnrConfig::default()
    }
}

/// A tiny substrate and request batch drawn from `seed`.
pub fn tiny_instance(seed: u64, requests: usize) -> (SubstrateNetwork, Vec<Vnr>) {
    let mut r = rng(seed);
    let net = generate_substrate(&tiny_substrate_config(), &mut r).unwrap();
    let vnrs = generate_vnr_set(&tiny_vnr_config(requests), &mut r).unwrap();
    (net, vnrs)
}

pub const A: usize = 0;
pub const B: usize = 1;
pub const C: usize = 2;
pub const D: usize = 3;
pub const E: usize = 4;
pub const F: usize = 5;
pub const G: usize = 6;
pub const H: usize = 7;

/// Two satellites, three aerial nodes and three ground nodes; the only
/// placement meeting every delay bound of [`worked_request`] is a->B, b->D,
/// c->G, because the links leaving A exceed the bounds.
pub fn worked_substrate() -> SubstrateNetwork {
    let mut net = SubstrateNetwork::new();
    for (domain, cpu) in [
        (Domain::Space, 30),
        (Domain::Space, 25),
        (Domain::Air, 20),
        (Domain::Air, 15),
        (Domain::Air, 5),
        (Domain::Ground, 20),
        (Domain::Ground, 30),
        (Domain::Ground, 20),
    ] {
        net.add_node(domain, cpu);
    }
    for (u, v, delay) in [
        (A, B, 25.0),
        (C, D, 15.0),
        (D, E, 15.0),
        (F, G, 8.0),
        (G, H, 8.0),
        (A, C, 55.0),
        (A, F, 58.0),
        (B, D, 42.0),
        (B, G, 44.0),
        (D, G, 41.0),
    ] {
        net.add_link(u, v, 20, delay).unwrap();
    }
    net
}

pub fn worked_request() -> Vnr {
    let node = |id, cpu_demand, target_domain| VirtualNode { id, cpu_demand, target_domain };
    let link = |id, endpoints, bw_demand, delay_bound| VirtualLink { id, endpoints, bw_demand, delay_bound };
    Vnr {
        id: 0,
        vnodes: vec![
            node(0, 10, Domain::Space),
            node(1, 8, Domain::Air),
            node(2, 12, Domain::Ground),
        ],
        vlinks: vec![
            link(0, (0, 1), 10, 50.0),
            link(1, (0, 2), 10, 50.0),
            link(2, (1, 2), 5, 45.0),
        ],
        arrival_time: 0.0,
        lifetime: 100.0,
    }
}
