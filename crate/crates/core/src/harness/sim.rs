//! Discrete-event replay of a request set against one substrate.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use crate::embedder::Embedding;
use crate::metrics::{MetricsRecorder, MetricsTimeSeries};
use crate::substrate::{LedgerError, SubstrateNetwork};
use crate::vnr::{Event, EventKind, Vnr};

/// What happened to each request of a replay, indexed like the input set.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutcome {
    pub series: MetricsTimeSeries,
    pub embeddings: Vec<Option<Embedding>>,
}

impl SimulationOutcome {
    pub fn accepted(&self) -> Vec<bool> {
        self.embeddings.iter().map(Option::is_some).collect()
    }
}

/// Replays `vnrs` in time order. Each arrival is offered to `embed`, which
/// must leave the ledger untouched when it returns `None`; accepted requests
/// are released at their departure time. Departures scheduled after the last
/// arrival are still processed, so the ledger ends fully released.
///
/// Metrics are sampled every `sample_interval` up to the last arrival.
pub fn simulate<F>(
    net: &mut SubstrateNetwork,
    vnrs: &[Vnr],
    sample_interval: f64,
    mut embed: F,
) -> Result<SimulationOutcome, LedgerError>
where
    F: FnMut(&mut SubstrateNetwork, &Vnr) -> Option<Embedding>,
{
    let horizon = vnrs.iter().map(|v| v.arrival_time).fold(0.0, f64::max);
    let index: BTreeMap<_, _> = vnrs.iter().enumerate().map(|(i, v)| (v.id, i)).collect();
    let mut queue: BinaryHeap<Reverse<Event>> = vnrs
        .iter()
        .map(|v| {
            Reverse(Event {
                time: v.arrival_time,
                kind: EventKind::Arrival,
                vnr_id: v.id,
            })
        })
        .collect();
    let mut recorder = MetricsRecorder::new(sample_interval);
    let mut embeddings: Vec<Option<Embedding>> = vec![None; vnrs.len()];

    while let Some(Reverse(event)) = queue.pop() {
        let i = index[&event.vnr_id];
        recorder.advance_to(event.time, horizon);
        match event.kind {
            EventKind::Arrival => {
                let vnr = &vnrs[i];
                recorder.record_arrival();
                if let Some(emb) = embed(net, vnr) {
                    recorder.record_acceptance(emb.revenue, emb.cost);
                    queue.push(Reverse(Event {
                        time: vnr.departure_time(),
                        kind: EventKind::Departure,
                        vnr_id: vnr.id,
                    }));
                    embeddings[i] = Some(emb);
                }
            }
            EventKind::Departure => {
                let emb = embeddings[i].as_ref().expect("departures follow acceptances");
                net.release_embedding(emb)?;
            }
        }
    }
    Ok(SimulationOutcome {
        series: recorder.finish(horizon),
        embeddings,
    })
}
