//! Virtual network requests and the arrival/departure event stream.

use std::cmp::Ordering;
use std::fmt::Write as _;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Exp;
use thiserror::Error;

use crate::substrate::format::{content_lines, expect_keyword, field};
use crate::substrate::{Domain, FormatError};
use crate::{Bounds, Units, VnrId};

#[derive(Debug, Clone, PartialEq)]
pub struct VirtualNode {
    /// Index within the owning VNR.
    pub id: usize,
    pub cpu_demand: Units,
    pub target_domain: Domain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VirtualLink {
    /// Index within the owning VNR.
    pub id: usize,
    pub endpoints: (usize, usize),
    pub bw_demand: Units,
    pub delay_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vnr {
    pub id: VnrId,
    pub vnodes: Vec<VirtualNode>,
    pub vlinks: Vec<VirtualLink>,
    pub arrival_time: f64,
    pub lifetime: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VnrError {
    #[error("VNR {0}: virtual graph is not connected")]
    Disconnected(VnrId),
    #[error("VNR {id}: {message}")]
    Invalid { id: VnrId, message: String },
    #[error("invalid VNR configuration: {0}")]
    Config(String),
}

impl Vnr {
    /// Whether every virtual node is reachable from node 0 over virtual links.
    pub fn is_connected(&self) -> bool {
        let n = self.vnodes.len();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut stack = vec![0];
        while let Some(u) = stack.pop() {
            for vl in &self.vlinks {
                let v = match vl.endpoints {
                    (a, b) if a == u => b,
                    (a, b) if b == u => a,
                    _ => continue,
                };
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Structural checks: dense ids, in-range endpoints, positive demands
    /// and lifetime, connectivity.
    pub fn validate(&self) -> Result<(), VnrError> {
        let invalid = |message: String| VnrError::Invalid {
            id: self.id,
            message,
        };
        for (i, v) in self.vnodes.iter().enumerate() {
            if v.id != i {
                return Err(invalid(format!("virtual node {i} has id {}", v.id)));
            }
            if v.cpu_demand == 0 {
                return Err(invalid(format!("virtual node {i} demands no compute")));
            }
        }
        for (i, l) in self.vlinks.iter().enumerate() {
            if l.id != i {
                return Err(invalid(format!("virtual link {i} has id {}", l.id)));
            }
            let (a, b) = l.endpoints;
            if a >= self.vnodes.len() || b >= self.vnodes.len() || a == b {
                return Err(invalid(format!("virtual link {i} has bad endpoints")));
            }
            if l.bw_demand == 0 || l.delay_bound.is_nan() || l.delay_bound <= 0.0 {
                return Err(invalid(format!("virtual link {i} has non-positive demand")));
            }
        }
        if self.lifetime.is_nan() || self.lifetime <= 0.0 {
            return Err(invalid("lifetime must be positive".to_string()));
        }
        if !self.is_connected() {
            return Err(VnrError::Disconnected(self.id));
        }
        Ok(())
    }

    pub fn departure_time(&self) -> f64 {
        self.arrival_time + self.lifetime
    }

    /// Virtual links incident to virtual node `v`.
    pub fn incident_links(&self, v: usize) -> impl Iterator<Item = &VirtualLink> + '_ {
        self.vlinks
            .iter()
            .filter(move |l| l.endpoints.0 == v || l.endpoints.1 == v)
    }

    /// Whether both endpoints of `link` target the same segment.
    pub fn is_intra_domain(&self, link: &VirtualLink) -> bool {
        self.vnodes[link.endpoints.0].target_domain == self.vnodes[link.endpoints.1].target_domain
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VnrConfig {
    pub count: usize,
    pub nodes: Bounds<usize>,
    pub cpu: Bounds<Units>,
    pub bw: Bounds<Units>,
    /// Lower end of the delay-bound draw; the upper end is `delay_cap`.
    pub delay_min: f64,
    pub delay_cap: f64,
    /// Poisson arrivals per time unit.
    pub arrival_rate: f64,
    pub mean_lifetime: f64,
    /// Probability of linking each pair not already joined by the spanning tree.
    pub link_probability: f64,
    /// Relative weight of each segment when drawing a target domain,
    /// indexed by [`Domain::index`].
    pub domain_weights: [f64; 3],
}

impl Default for VnrConfig {
    fn default() -> Self {
        Self {
            count: 2000,
            nodes: Bounds::new(2, 10),
            cpu: Bounds::new(1, 20),
            bw: Bounds::new(1, 20),
            delay_min: 1.0,
            delay_cap: 50.0,
            arrival_rate: 4.0 / 100.0,
            mean_lifetime: 1000.0,
            link_probability: 0.5,
            domain_weights: [10.0, 30.0, 60.0],
        }
    }
}

impl VnrConfig {
    pub fn validate(&self) -> Result<(), VnrError> {
        let bad = |m: &str| Err(VnrError::Config(m.to_string()));
        if !self.nodes.is_valid() || self.nodes.min < 2 {
            return bad("virtual node count range must be valid and start at 2 or more");
        }
        if !self.cpu.is_valid() || self.cpu.min == 0 {
            return bad("compute demand range must be valid and positive");
        }
        if !self.bw.is_valid() || self.bw.min == 0 {
            return bad("bandwidth demand range must be valid and positive");
        }
        if !(self.delay_min > 0.0 && self.delay_min <= self.delay_cap) {
            return bad("delay range must be positive with min <= cap");
        }
        if !(self.arrival_rate > 0.0 && self.mean_lifetime > 0.0) {
            return bad("arrival rate and mean lifetime must be positive");
        }
        if !(0.0..=1.0).contains(&self.link_probability) {
            return bad("link probability must lie in [0, 1]");
        }
        if self.domain_weights.iter().any(|w| w.is_nan() || *w < 0.0) || self.domain_weights.iter().sum::<f64>() <= 0.0 {
            return bad("domain weights must be non-negative with a positive sum");
        }
        Ok(())
    }
}

/// Draws `cfg.count` requests with cumulative Poisson arrival times.
///
/// The random stream consumed per request does not depend on `delay_cap`,
/// so sets drawn from the same seed under different caps share topology,
/// demands and timing and differ only in their (monotonically scaled)
/// delay bounds.
pub fn generate_vnr_set<R: Rng + ?Sized>(cfg: &VnrConfig, rng: &mut R) -> Result<Vec<Vnr>, VnrError> {
    cfg.validate()?;
    let inter_arrival = Exp::new(cfg.arrival_rate).map_err(|e| VnrError::Config(e.to_string()))?;
    let lifetime = Exp::new(1.0 / cfg.mean_lifetime).map_err(|e| VnrError::Config(e.to_string()))?;
    let domains =
        WeightedIndex::new(cfg.domain_weights).map_err(|e| VnrError::Config(e.to_string()))?;
    let delay = Bounds::new(cfg.delay_min, cfg.delay_cap);

    let mut clock = 0.0;
    let mut out = Vec::with_capacity(cfg.count);
    for id in 0..cfg.count as VnrId {
        clock += inter_arrival.sample(rng);
        let life = lifetime.sample(rng).max(f64::MIN_POSITIVE);
        let n = cfg.nodes.sample(rng);
        let vnodes: Vec<VirtualNode> = (0..n)
            .map(|i| VirtualNode {
                id: i,
                cpu_demand: cfg.cpu.sample(rng),
                target_domain: Domain::ALL[domains.sample(rng)],
            })
            .collect();

        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut joined = vec![false; n * n];
        let mut pairs = Vec::new();
        for i in 1..n {
            let j = rng.random_range(0..i);
            let (a, b) = (order[i].min(order[j]), order[i].max(order[j]));
            joined[a * n + b] = true;
            pairs.push((a, b));
        }
        for a in 0..n {
            for b in a + 1..n {
                if !joined[a * n + b] && rng.random_bool(cfg.link_probability) {
                    pairs.push((a, b));
                }
            }
        }
        pairs.sort_unstable();
        let vlinks = pairs
            .into_iter()
            .enumerate()
            .map(|(i, endpoints)| VirtualLink {
                id: i,
                endpoints,
                bw_demand: cfg.bw.sample(rng),
                delay_bound: delay.sample(rng),
            })
            .collect();
        out.push(Vnr {
            id,
            vnodes,
            vlinks,
            arrival_time: clock,
            lifetime: life,
        });
    }
    Ok(out)
}

/// Copies of `vnrs` with arrival times shifted so the set starts at the
/// given origin (the arrival preceding the set, or zero).
pub fn rebase_arrivals(vnrs: &[Vnr], origin: f64) -> Vec<Vnr> {
    vnrs.iter()
        .map(|v| Vnr {
            arrival_time: v.arrival_time - origin,
            ..v.clone()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    /// Ordered first so resources are freed before same-time arrivals.
    Departure,
    Arrival,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub vnr_id: VnrId,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.kind.cmp(&other.kind))
            .then(self.vnr_id.cmp(&other.vnr_id))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Time-ordered arrivals plus a departure for every accepted request.
/// `accepted[i]` is the outcome of `vnrs[i]`.
pub fn build_event_stream(vnrs: &[Vnr], accepted: &[bool]) -> Vec<Event> {
    let mut events: Vec<Event> = vnrs
        .iter()
        .zip(accepted.iter().copied().chain(std::iter::repeat(false)))
        .flat_map(|(v, ok)| {
            let arrival = Event {
                time: v.arrival_time,
                kind: EventKind::Arrival,
                vnr_id: v.id,
            };
            let departure = ok.then(|| Event {
                time: v.departure_time(),
                kind: EventKind::Departure,
                vnr_id: v.id,
            });
            std::iter::once(arrival).chain(departure)
        })
        .collect();
    events.sort();
    events
}

/// Encodes a request set:
///
/// ```text
/// vnrs <count>
/// vnr <id> <arrival> <lifetime> <nodes> <links>
/// vnode <id> <domain> <cpu>
/// vlink <u> <v> <bw> <delay_bound>
/// ```
pub fn write_vnr_text(vnrs: &[Vnr]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "vnrs {}", vnrs.len());
    for v in vnrs {
        let _ = writeln!(
            out,
            "vnr {} {} {} {} {}",
            v.id,
            v.arrival_time,
            v.lifetime,
            v.vnodes.len(),
            v.vlinks.len()
        );
        for n in &v.vnodes {
            let _ = writeln!(out, "vnode {} {} {}", n.id, n.target_domain, n.cpu_demand);
        }
        for l in &v.vlinks {
            let _ = writeln!(
                out,
                "vlink {} {} {} {}",
                l.endpoints.0, l.endpoints.1, l.bw_demand, l.delay_bound
            );
        }
    }
    out
}

pub fn parse_vnr_text(text: &str) -> Result<Vec<Vnr>, FormatError> {
    let mut lines = content_lines(text);
    let (line, header) = lines
        .next()
        .ok_or_else(|| FormatError::new(0, "empty VNR file"))?;
    expect_keyword(&header, "vnrs", 2, line)?;
    let count: usize = field(&header, 1, line, "VNR count")?;
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| FormatError::new(0, format!("unexpected end of file, expected {what}")))
    };
    let mut out = Vec::with_capacity(count);
    let mut seen = std::collections::BTreeSet::new();
    for _ in 0..count {
        let (line, t) = next("`vnr`")?;
        expect_keyword(&t, "vnr", 6, line)?;
        let id: VnrId = field(&t, 1, line, "VNR id")?;
        let arrival_time: f64 = field(&t, 2, line, "arrival time")?;
        let lifetime: f64 = field(&t, 3, line, "lifetime")?;
        let n: usize = field(&t, 4, line, "node count")?;
        let m: usize = field(&t, 5, line, "link count")?;
        let mut vnodes = Vec::with_capacity(n);
        for i in 0..n {
            let (line, t) = next("`vnode`")?;
            expect_keyword(&t, "vnode", 4, line)?;
            let vid: usize = field(&t, 1, line, "virtual node id")?;
            if vid != i {
                return Err(FormatError::new(line, format!("expected virtual node {i}")));
            }
            let target_domain: Domain =
                t[2].parse().map_err(|e: String| FormatError::new(line, e))?;
            vnodes.push(VirtualNode {
                id: i,
                cpu_demand: field(&t, 3, line, "cpu demand")?,
                target_domain,
            });
        }
        let mut vlinks = Vec::with_capacity(m);
        for i in 0..m {
            let (line, t) = next("`vlink`")?;
            expect_keyword(&t, "vlink", 5, line)?;
            vlinks.push(VirtualLink {
                id: i,
                endpoints: (field(&t, 1, line, "endpoint")?, field(&t, 2, line, "endpoint")?),
                bw_demand: field(&t, 3, line, "bandwidth demand")?,
                delay_bound: field(&t, 4, line, "delay bound")?,
            });
        }
        let vnr = Vnr {
            id,
            vnodes,
            vlinks,
            arrival_time,
            lifetime,
        };
        vnr.validate()
            .map_err(|e| FormatError::new(line, e.to_string()))?;
        if !seen.insert(id) {
            return Err(FormatError::new(line, format!("duplicate VNR id {id}")));
        }
        out.push(vnr);
    }
    if let Some((line, _)) = lines.next() {
        return Err(FormatError::new(line, "trailing content"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn simple(id: VnrId, arrival: f64, lifetime: f64) -> Vnr {
        Vnr {
            id,
            vnodes: vec![
                VirtualNode { id: 0, cpu_demand: 1, target_domain: Domain::Ground },
                VirtualNode { id: 1, cpu_demand: 1, target_domain: Domain::Ground },
            ],
            vlinks: vec![VirtualLink { id: 0, endpoints: (0, 1), bw_demand: 1, delay_bound: 10.0 }],
            arrival_time: arrival,
            lifetime,
        }
    }

    #[test]
    fn default_set_respects_ranges() {
        let cfg = VnrConfig::default();
        let vnrs = generate_vnr_set(&cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(vnrs.len(), 2000);
        let mut last = 0.0;
        for v in &vnrs {
            v.validate().unwrap();
            assert!((2..=10).contains(&v.vnodes.len()));
            assert!(v.vnodes.iter().all(|n| (1..=20).contains(&n.cpu_demand)));
            assert!(v.vlinks.iter().all(|l| (1..=20).contains(&l.bw_demand)));
            assert!(v.vlinks.iter().all(|l| (1.0..=50.0).contains(&l.delay_bound)));
            assert!(v.arrival_time >= last);
            last = v.arrival_time;
        }
    }

    #[test]
    fn empty_and_capped_sets() {
        let cfg = VnrConfig { count: 0, ..VnrConfig::default() };
        assert!(generate_vnr_set(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap().is_empty());
        let cfg = VnrConfig { count: 300, delay_cap: 20.0, ..VnrConfig::default() };
        let vnrs = generate_vnr_set(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(vnrs.iter().flat_map(|v| &v.vlinks).all(|l| l.delay_bound <= 20.0));
    }

    #[test]
    fn cap_only_rescales_delay_bounds() {
        let wide = VnrConfig { count: 200, ..VnrConfig::default() };
        let tight = VnrConfig { delay_cap: 20.0, ..wide.clone() };
        let a = generate_vnr_set(&wide, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = generate_vnr_set(&tight, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.vnodes, y.vnodes);
            assert_eq!(x.arrival_time, y.arrival_time);
            for (lx, ly) in x.vlinks.iter().zip(&y.vlinks) {
                assert_eq!(lx.endpoints, ly.endpoints);
                assert!(ly.delay_bound <= lx.delay_bound);
            }
        }
    }

    #[test]
    fn event_stream_examples() {
        let one = [simple(0, 5.0, 10.0)];
        let ev = build_event_stream(&one, &[true]);
        assert_eq!(
            ev.iter().map(|e| (e.time, e.kind)).collect::<Vec<_>>(),
            vec![(5.0, EventKind::Arrival), (15.0, EventKind::Departure)]
        );
        let ev = build_event_stream(&one, &[false]);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].kind, EventKind::Arrival);

        // VNR 1 departs at 10 while VNR 0 arrives at 10.
        let pair = [simple(0, 10.0, 5.0), simple(1, 2.0, 8.0)];
        let ev = build_event_stream(&pair, &[false, true]);
        let at_ten: Vec<_> = ev.iter().filter(|e| e.time == 10.0).map(|e| (e.kind, e.vnr_id)).collect();
        assert_eq!(at_ten, vec![(EventKind::Departure, 1), (EventKind::Arrival, 0)]);
    }

    #[test]
    fn text_round_trip() {
        let cfg = VnrConfig { count: 25, ..VnrConfig::default() };
        let vnrs = generate_vnr_set(&cfg, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(parse_vnr_text(&write_vnr_text(&vnrs)).unwrap(), vnrs);
        assert!(parse_vnr_text("vnrs 1\nvnr 0 1 1 2 0\nvnode 0 air 1\nvnode 1 air 1\n").is_err());
    }

    proptest! {
        #[test]
        fn generation_is_connected_and_deterministic(seed in any::<u64>(), p in 0.0f64..=1.0) {
            let cfg = VnrConfig { count: 20, link_probability: p, ..VnrConfig::default() };
            let a = generate_vnr_set(&cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let b = generate_vnr_set(&cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            prop_assert_eq!(&a, &b);
            for v in &a {
                prop_assert!(v.is_connected());
                prop_assert!(v.vlinks.len() >= v.vnodes.len() - 1);
            }
        }
    }
}
