use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use super::{Domain, SubstrateNetwork};
use crate::{Bounds, NodeId, Units};

/// Size and attribute ranges of one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainConfig {
    pub nodes: usize,
    /// Target number of intra-domain links, spanning tree included.
    pub links: usize,
    pub cpu: Bounds<Units>,
    pub bw: Bounds<Units>,
    pub delay: Bounds<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubstrateConfig {
    /// Indexed by [`Domain::index`].
    pub domains: [DomainConfig; 3],
    /// Links joining each pair of segments.
    pub inter_links_per_pair: usize,
    pub inter_bw: Bounds<Units>,
    pub inter_delay: Bounds<f64>,
}

impl Default for SubstrateConfig {
    fn default() -> Self {
        let bw = Bounds::new(50, 100);
        Self {
            domains: [
                DomainConfig {
                    nodes: 10,
                    links: 30,
                    cpu: Bounds::new(20, 40),
                    bw,
                    delay: Bounds::new(20.0, 40.0),
                },
                DomainConfig {
                    nodes: 30,
                    links: 140,
                    cpu: Bounds::new(20, 40),
                    bw,
                    delay: Bounds::new(10.0, 30.0),
                },
                DomainConfig {
                    nodes: 60,
                    links: 424,
                    cpu: Bounds::new(50, 100),
                    bw,
                    delay: Bounds::new(1.0, 20.0),
                },
            ],
            inter_links_per_pair: 2,
            inter_bw: bw,
            inter_delay: Bounds::new(40.0, 60.0),
        }
    }
}

impl SubstrateConfig {
    pub fn domain(&self, domain: Domain) -> &DomainConfig {
        &self.domains[domain.index()]
    }

    pub fn domain_mut(&mut self, domain: Domain) -> &mut DomainConfig {
        &mut self.domains[domain.index()]
    }

    pub fn total_nodes(&self) -> usize {
        self.domains.iter().map(|d| d.nodes).sum()
    }

    /// Multiplies node and intra-domain link counts by `factor`, keeping
    /// average degree per segment roughly constant.
    pub fn scaled(&self, factor: usize) -> Self {
        let mut cfg = self.clone();
        for d in &mut cfg.domains {
            d.nodes *= factor;
            d.links *= factor;
        }
        cfg
    }

    pub fn validate(&self) -> Result<(), GenerateError> {
        for domain in Domain::ALL {
            let d = self.domain(domain);
            if d.nodes == 0 {
                return Err(GenerateError::EmptyDomain(domain));
            }
            if !(d.cpu.is_valid() && d.bw.is_valid() && d.delay.is_valid()) {
                return Err(GenerateError::InvalidRange(domain.as_str().to_string()));
            }
            if d.delay.min <= 0.0 {
                return Err(GenerateError::InvalidRange(format!("{domain} delay")));
            }
            if d.links + 1 < d.nodes {
                return Err(GenerateError::TooFewLinks {
                    domain,
                    links: d.links,
                    nodes: d.nodes,
                });
            }
            let pairs = d.nodes * (d.nodes - 1) / 2;
            if d.links > pairs {
                return Err(GenerateError::TooManyLinks {
                    domain,
                    links: d.links,
                    pairs,
                });
            }
        }
        if !(self.inter_bw.is_valid() && self.inter_delay.is_valid()) || self.inter_delay.min <= 0.0
        {
            return Err(GenerateError::InvalidRange("inter-domain".to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenerateError {
    #[error("domain {0} has no nodes")]
    EmptyDomain(Domain),
    #[error("invalid attribute range for {0}")]
    InvalidRange(String),
    #[error("domain {domain}: {links} links cannot connect {nodes} nodes")]
    TooFewLinks {
        domain: Domain,
        links: usize,
        nodes: usize,
    },
    #[error("domain {domain}: {links} links exceed the {pairs} available node pairs")]
    TooManyLinks {
        domain: Domain,
        links: usize,
        pairs: usize,
    },
}

/// Draws a layered substrate: nodes per segment, a random spanning tree per
/// segment topped up with uniformly chosen extra pairs, then the
/// inter-domain links between random endpoints.
pub fn generate_substrate<R: Rng + ?Sized>(
    cfg: &SubstrateConfig,
    rng: &mut R,
) -> Result<SubstrateNetwork, GenerateError> {
    cfg.validate()?;
    let mut net = SubstrateNetwork::new();
    let mut members: [Vec<NodeId>; 3] = Default::default();
    for domain in Domain::ALL {
        let d = cfg.domain(domain);
        for _ in 0..d.nodes {
            let id = net.add_node(domain, d.cpu.sample(rng));
            members[domain.index()].push(id);
        }
    }

    for domain in Domain::ALL {
        let d = cfg.domain(domain);
        let ids = &members[domain.index()];
        let k = ids.len();
        let mut linked = vec![false; k * k];
        let mut order: Vec<usize> = (0..k).collect();
        order.shuffle(rng);
        for i in 1..k {
            let j = rng.random_range(0..i);
            let (a, b) = (order[i], order[j]);
            linked[a * k + b] = true;
            linked[b * k + a] = true;
            add(&mut net, ids[a], ids[b], d.bw.sample(rng), d.delay.sample(rng));
        }
        let mut spare: Vec<(usize, usize)> = (0..k)
            .flat_map(|a| (a + 1..k).map(move |b| (a, b)))
            .filter(|&(a, b)| !linked[a * k + b])
            .collect();
        let extra = d.links - (k - 1);
        let (chosen, _) = spare.partial_shuffle(rng, extra);
        let mut chosen = chosen.to_vec();
        chosen.sort_unstable();
        for (a, b) in chosen {
            add(&mut net, ids[a], ids[b], d.bw.sample(rng), d.delay.sample(rng));
        }
    }

    for (x, y) in [
        (Domain::Space, Domain::Air),
        (Domain::Space, Domain::Ground),
        (Domain::Air, Domain::Ground),
    ] {
        let (xs, ys) = (&members[x.index()], &members[y.index()]);
        let distinct = xs.len() * ys.len() >= cfg.inter_links_per_pair;
        for _ in 0..cfg.inter_links_per_pair {
            let (u, v) = loop {
                let u = xs[rng.random_range(0..xs.len())];
                let v = ys[rng.random_range(0..ys.len())];
                if !distinct || net.link_between(u, v).is_none() {
                    break (u, v);
                }
            };
            add(
                &mut net,
                u,
                v,
                cfg.inter_bw.sample(rng),
                cfg.inter_delay.sample(rng),
            );
        }
    }
    Ok(net)
}

fn add(net: &mut SubstrateNetwork, u: NodeId, v: NodeId, bw: Units, delay: f64) {
    net.add_link(u, v, bw, delay)
        .expect("generator only produces valid links");
}
