//! Revenue, cost and the long-term evaluation indicators.

use std::fmt::Write as _;

use thiserror::Error;

use crate::embedder::LinkMapping;
use crate::vnr::Vnr;
use crate::Units;

/// Total compute demand plus bandwidth demand weighted by path hop count.
pub fn embedding_cost(vnr: &Vnr, links: &LinkMapping) -> Units {
    let cpu: Units = vnr.vnodes.iter().map(|v| v.cpu_demand).sum();
    let bw: Units = vnr
        .vlinks
        .iter()
        .map(|l| l.bw_demand * links.hops(l.id) as Units)
        .sum();
    cpu + bw
}

/// Total compute demand plus total bandwidth demand.
pub fn embedding_revenue(vnr: &Vnr) -> Units {
    vnr.vnodes.iter().map(|v| v.cpu_demand).sum::<Units>()
        + vnr.vlinks.iter().map(|l| l.bw_demand).sum::<Units>()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsSample {
    pub time: f64,
    pub cumulative_revenue: Units,
    pub cumulative_cost: Units,
    pub arrived: u64,
    pub accepted: u64,
}

impl MetricsSample {
    /// Cumulative revenue per unit time; 0 before any time has elapsed.
    pub fn average_revenue(&self) -> f64 {
        if self.time > 0.0 {
            self.cumulative_revenue as f64 / self.time
        } else {
            0.0
        }
    }

    /// 1 while nothing has been embedded.
    pub fn revenue_cost_ratio(&self) -> f64 {
        if self.cumulative_cost > 0 {
            self.cumulative_revenue as f64 / self.cumulative_cost as f64
        } else {
            1.0
        }
    }

    /// 1 while nothing has arrived.
    pub fn acceptance_rate(&self) -> f64 {
        if self.arrived > 0 {
            self.accepted as f64 / self.arrived as f64
        } else {
            1.0
        }
    }
}

pub const CSV_HEADER: &str = "time,cum_revenue,cum_cost,arrived,accepted,avg_revenue,rc_ratio,acceptance";

#[derive(Debug, Error, Clone, PartialEq)]
#[error("metrics CSV line {line}: {message}")]
pub struct CsvError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsTimeSeries {
    samples: Vec<MetricsSample>,
}

impl MetricsTimeSeries {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a sample; times must strictly increase.
    pub fn push(&mut self, sample: MetricsSample) {
        if let Some(last) = self.samples.last() {
            assert!(sample.time > last.time, "sample times must strictly increase");
        }
        self.samples.push(sample);
    }

    pub fn samples(&self) -> &[MetricsSample] {
        &self.samples
    }

    pub fn last(&self) -> Option<&MetricsSample> {
        self.samples.last()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for s in &self.samples {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                s.time,
                s.cumulative_revenue,
                s.cumulative_cost,
                s.arrived,
                s.accepted,
                s.average_revenue(),
                s.revenue_cost_ratio(),
                s.acceptance_rate()
            );
        }
        out
    }

    /// Reads the raw columns back; derived columns are recomputed and
    /// checked against what the file states.
    pub fn from_csv(text: &str) -> Result<Self, CsvError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == CSV_HEADER => {}
            _ => {
                return Err(CsvError {
                    line: 1,
                    message: "unexpected header".to_string(),
                })
            }
        }
        let mut series = Self::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| CsvError { line: i + 1, message };
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 8 {
                return Err(err(format!("expected 8 columns, found {}", cols.len())));
            }
            let num = |k: usize| -> Result<f64, CsvError> {
                cols[k].parse().map_err(|_| err(format!("bad number `{}`", cols[k])))
            };
            let int = |k: usize| -> Result<u64, CsvError> {
                cols[k].parse().map_err(|_| err(format!("bad integer `{}`", cols[k])))
            };
            let sample = MetricsSample {
                time: num(0)?,
                cumulative_revenue: int(1)?,
                cumulative_cost: int(2)?,
                arrived: int(3)?,
                accepted: int(4)?,
            };
            for (k, derived) in [
                (5, sample.average_revenue()),
                (6, sample.revenue_cost_ratio()),
                (7, sample.acceptance_rate()),
            ] {
                if num(k)? != derived {
                    return Err(err(format!("column {k} disagrees with the raw columns")));
                }
            }
            if series.last().is_some_and(|l| sample.time <= l.time) {
                return Err(err("sample times must strictly increase".to_string()));
            }
            series.samples.push(sample);
        }
        Ok(series)
    }
}

/// Cumulative revenue over elapsed time at the latest sample.
pub fn long_term_average_revenue(series: &MetricsTimeSeries) -> f64 {
    series.last().map_or(0.0, MetricsSample::average_revenue)
}

pub fn revenue_cost_ratio(series: &MetricsTimeSeries) -> f64 {
    series.last().map_or(1.0, MetricsSample::revenue_cost_ratio)
}

pub fn acceptance_rate(series: &MetricsTimeSeries) -> f64 {
    series.last().map_or(1.0, MetricsSample::acceptance_rate)
}

/// Accumulates counters during a simulation and emits samples every
/// `interval` time units.
#[derive(Debug, Clone)]
pub struct MetricsRecorder {
    interval: f64,
    next_sample: f64,
    current: MetricsSample,
    series: MetricsTimeSeries,
}

impl MetricsRecorder {
    pub fn new(interval: f64) -> Self {
        assert!(interval > 0.0, "sampling interval must be positive");
        Self {
            interval,
            next_sample: interval,
            current: MetricsSample {
                time: 0.0,
                cumulative_revenue: 0,
                cumulative_cost: 0,
                arrived: 0,
                accepted: 0,
            },
            series: MetricsTimeSeries::new(),
        }
    }

    /// Emits every sample strictly before `time` (and not past `horizon`),
    /// so events at time `t` are counted in the sample taken at `t`.
    pub fn advance_to(&mut self, time: f64, horizon: f64) {
        while self.next_sample < time && self.next_sample <= horizon {
            self.emit(self.next_sample);
            self.next_sample += self.interval;
        }
    }

    pub fn record_arrival(&mut self) {
        self.current.arrived += 1;
    }

    pub fn record_acceptance(&mut self, revenue: Units, cost: Units) {
        self.current.accepted += 1;
        self.current.cumulative_revenue += revenue;
        self.current.cumulative_cost += cost;
    }

    fn emit(&mut self, time: f64) {
        self.series.push(MetricsSample { time, ..self.current });
    }

    /// Emits the remaining regular samples up to `horizon` plus a final
    /// sample at `horizon` itself when it falls between sampling points.
    pub fn finish(mut self, horizon: f64) -> MetricsTimeSeries {
        while self.next_sample <= horizon {
            self.emit(self.next_sample);
            self.next_sample += self.interval;
        }
        let needs_final = horizon > 0.0 && self.series.last().is_none_or(|s| s.time < horizon);
        if needs_final {
            self.emit(horizon);
        }
        self.series
    }

    pub fn counters(&self) -> &MetricsSample {
        &self.current
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::substrate::Domain;
    use crate::vnr::{VirtualLink, VirtualNode};

    fn two_node(cpu: (Units, Units), bw: Option<Units>) -> Vnr {
        Vnr {
            id: 0,
            vnodes: vec![
                VirtualNode { id: 0, cpu_demand: cpu.0, target_domain: Domain::Air },
                VirtualNode { id: 1, cpu_demand: cpu.1, target_domain: Domain::Air },
            ],
            vlinks: bw
                .map(|b| VirtualLink { id: 0, endpoints: (0, 1), bw_demand: b, delay_bound: 10.0 })
                .into_iter()
                .collect(),
            arrival_time: 0.0,
            lifetime: 1.0,
        }
    }

    #[test]
    fn cost_and_revenue() {
        let vnr = two_node((10, 5), Some(4));
        assert_eq!(embedding_cost(&vnr, &LinkMapping(vec![vec![0, 1, 2]])), 27);
        assert_eq!(embedding_revenue(&vnr), 19);
        assert_eq!(embedding_cost(&vnr, &LinkMapping(vec![vec![7]])), 19);
        let bare = two_node((10, 5), None);
        assert_eq!(embedding_cost(&bare, &LinkMapping::default()), 15);
        let empty = Vnr { vnodes: vec![], vlinks: vec![], ..bare };
        assert_eq!(embedding_revenue(&empty), 0);
    }

    #[test]
    fn single_event_long_term_metrics() {
        let mut rec = MetricsRecorder::new(100.0);
        rec.advance_to(100.0, 100.0);
        rec.record_arrival();
        rec.record_acceptance(19, 27);
        let series = rec.finish(100.0);
        assert_eq!(series.samples().len(), 1);
        assert!((long_term_average_revenue(&series) - 0.19).abs() < 1e-12);
        assert!((revenue_cost_ratio(&series) - 19.0 / 27.0).abs() < 1e-12);
        assert_eq!(acceptance_rate(&series), 1.0);
    }

    #[test]
    fn empty_series_conventions() {
        let series = MetricsRecorder::new(100.0).finish(0.0);
        assert!(series.is_empty());
        assert_eq!(long_term_average_revenue(&series), 0.0);
        assert_eq!(revenue_cost_ratio(&series), 1.0);
        assert_eq!(acceptance_rate(&series), 1.0);
    }

    #[test]
    fn sampling_grid_and_final_sample() {
        let mut rec = MetricsRecorder::new(100.0);
        rec.advance_to(50.0, 250.0);
        rec.record_arrival();
        rec.advance_to(250.0, 250.0);
        rec.record_arrival();
        rec.record_acceptance(5, 5);
        let series = rec.finish(250.0);
        let times: Vec<f64> = series.samples().iter().map(|s| s.time).collect();
        assert_eq!(times, vec![100.0, 200.0, 250.0]);
        assert_eq!(series.samples()[0].arrived, 1);
        assert_eq!(series.last().unwrap().accepted, 1);
        let parsed = MetricsTimeSeries::from_csv(&series.to_csv()).unwrap();
        assert_eq!(parsed, series);
    }

    #[test]
    fn csv_rejects_inconsistent_rows() {
        let bad = format!("{CSV_HEADER}\n100,19,27,1,1,0.5,0.7037037037037037,1\n");
        assert!(MetricsTimeSeries::from_csv(&bad).is_err());
    }
}
