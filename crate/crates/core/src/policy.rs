//! Linear-softmax node-selection policy and its REINFORCE update.
//!
//! The forward pass runs five stages: take the feature matrix, score each
//! row as `w . v + b`, turn the scores into a softmax distribution over all
//! nodes, zero out nodes that cannot host the current virtual node and
//! renormalize, then pick a node from what is left.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use thiserror::Error;

use crate::features::{FeatureMatrix, FEATURE_COUNT};
use crate::NodeId;

pub const DEFAULT_LEARNING_RATE: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("no candidate substrate node")]
    NoCandidates,
    #[error("feature matrix has {rows} rows but the mask covers {mask} nodes")]
    ShapeMismatch { rows: usize, mask: usize },
    #[error("non-finite gradient or parameter after update")]
    NonFinite,
    #[error("invalid policy record: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyParams {
    pub weights: [f64; FEATURE_COUNT],
    pub bias: f64,
    pub learning_rate: f64,
}

impl PolicyParams {
    pub fn zeros(learning_rate: f64) -> Self {
        Self {
            weights: [0.0; FEATURE_COUNT],
            bias: 0.0,
            learning_rate,
        }
    }

    /// Weights and bias uniform in `[-0.1, 0.1]`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, learning_rate: f64) -> Self {
        let mut draw = || rng.random_range(-0.1..=0.1);
        Self {
            weights: [draw(), draw(), draw(), draw()],
            bias: draw(),
            learning_rate,
        }
    }

    pub fn score(&self, row: &[f64; FEATURE_COUNT]) -> f64 {
        self.weights.iter().zip(row).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite()) && self.bias.is_finite()
    }
}

/// `w1 w2 w3 w4 b`; the learning rate is not part of the record.
impl fmt::Display for PolicyParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.weights;
        write!(f, "{a} {b} {c} {d} {}", self.bias)
    }
}

impl FromStr for PolicyParams {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let values = s
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| PolicyError::Parse(format!("`{t}` is not a number"))))
            .collect::<Result<Vec<_>, _>>()?;
        let [a, b, c, d, bias] = values[..] else {
            return Err(PolicyError::Parse(format!("expected 5 numbers, found {}", values.len())));
        };
        let params = Self {
            weights: [a, b, c, d],
            bias,
            learning_rate: DEFAULT_LEARNING_RATE,
        };
        if !params.is_finite() {
            return Err(PolicyError::NonFinite);
        }
        Ok(params)
    }
}

/// Selection probabilities aligned to substrate node ids.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeDistribution {
    probs: Vec<f64>,
    candidate_mask: Vec<bool>,
}

impl NodeDistribution {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn candidate_mask(&self) -> &[bool] {
        &self.candidate_mask
    }

    pub fn prob(&self, node: NodeId) -> f64 {
        self.probs[node]
    }
}

/// Per-row scores (the convolution stage).
pub fn scores(params: &PolicyParams, matrix: &FeatureMatrix) -> Vec<f64> {
    matrix.rows().iter().map(|r| params.score(r)).collect()
}

/// Numerically stable softmax over all entries (the probabilistic stage).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Full forward pass. `candidates[i]` marks node `i` as able to host the
/// current virtual node.
pub fn forward(
    params: &PolicyParams,
    matrix: &FeatureMatrix,
    candidates: &[bool],
) -> Result<NodeDistribution, PolicyError> {
    if matrix.len() != candidates.len() {
        return Err(PolicyError::ShapeMismatch {
            rows: matrix.len(),
            mask: candidates.len(),
        });
    }
    if !candidates.iter().any(|&c| c) {
        return Err(PolicyError::NoCandidates);
    }
    let logits = scores(params, matrix);
    let unfiltered = softmax(&logits);
    let mass: f64 = unfiltered
        .iter()
        .zip(candidates)
        .filter_map(|(p, &c)| c.then_some(*p))
        .sum();
    let probs = if mass > 0.0 && mass.is_finite() {
        unfiltered
            .iter()
            .zip(candidates)
            .map(|(p, &c)| if c { p / mass } else { 0.0 })
            .collect()
    } else {
        // Candidate mass underflowed; filtering then renormalizing is the
        // same as a softmax restricted to the candidates.
        let masked: Vec<f64> = logits
            .iter()
            .zip(candidates)
            .map(|(z, &c)| if c { *z } else { f64::NEG_INFINITY })
            .collect();
        softmax(&masked)
    };
    Ok(NodeDistribution {
        probs,
        candidate_mask: candidates.to_vec(),
    })
}

/// How the output stage turns a distribution into a node.
pub enum Selection<'a> {
    /// Draw from the distribution (training).
    Sample(&'a mut dyn RngCore),
    /// Highest probability, lowest id on ties (testing).
    Greedy,
}

pub fn select_node(dist: &NodeDistribution, mode: Selection<'_>) -> NodeId {
    let candidates = || {
        dist.probs
            .iter()
            .enumerate()
            .filter(|&(i, _)| dist.candidate_mask[i])
    };
    match mode {
        Selection::Greedy => {
            let mut best: Option<(NodeId, f64)> = None;
            for (i, &p) in candidates() {
                if best.is_none_or(|(_, bp)| p > bp) {
                    best = Some((i, p));
                }
            }
            best.expect("distribution has a candidate").0
        }
        Selection::Sample(rng) => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut last = None;
            for (i, &p) in candidates() {
                acc += p;
                last = Some(i);
                if u < acc {
                    return i;
                }
            }
            last.expect("distribution has a candidate")
        }
    }
}

/// One node-placement decision of an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub matrix: FeatureMatrix,
    pub candidates: Vec<bool>,
    pub chosen: NodeId,
    pub log_prob: f64,
}

/// The decisions taken while embedding one request and the reward it earned.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeTrace {
    pub decisions: Vec<Decision>,
    pub reward: f64,
}

/// Gradient of `log p(chosen)` with respect to `(w1..w4, b)`.
///
/// With the filtered distribution `q`, `d log q_c / d w = v_c - sum_i q_i v_i`
/// over candidates; the bias cancels because it shifts every score equally.
pub fn log_prob_gradient(
    params: &PolicyParams,
    matrix: &FeatureMatrix,
    candidates: &[bool],
    chosen: NodeId,
) -> Result<[f64; FEATURE_COUNT + 1], PolicyError> {
    let dist = forward(params, matrix, candidates)?;
    let mut grad = [0.0; FEATURE_COUNT + 1];
    let chosen_row = matrix.row(chosen);
    for k in 0..FEATURE_COUNT {
        let expected: f64 = matrix
            .rows()
            .iter()
            .zip(dist.probs())
            .map(|(r, q)| q * r[k])
            .sum();
        grad[k] = chosen_row[k] - expected;
    }
    grad[FEATURE_COUNT] = 1.0 - dist.probs().iter().sum::<f64>();
    Ok(grad)
}

/// Revenue-to-cost ratio of a successful embedding.
pub fn compute_reward(revenue: f64, cost: f64) -> f64 {
    if cost > 0.0 {
        revenue / cost
    } else {
        0.0
    }
}

/// Gradient ascent on `sum_traces reward * sum_decisions grad log p(chosen)`.
/// Zero-reward traces (failed embeddings) contribute nothing.
pub fn reinforce_update(
    params: &PolicyParams,
    traces: &[EpisodeTrace],
) -> Result<PolicyParams, PolicyError> {
    let mut total = [0.0; FEATURE_COUNT + 1];
    for trace in traces.iter().filter(|t| t.reward != 0.0) {
        for d in &trace.decisions {
            let g = log_prob_gradient(params, &d.matrix, &d.candidates, d.chosen)?;
            for (t, gi) in total.iter_mut().zip(g) {
                *t += trace.reward * gi;
            }
        }
    }
    if total.iter().any(|g| !g.is_finite()) {
        return Err(PolicyError::NonFinite);
    }
    let mut next = *params;
    for (w, g) in next.weights.iter_mut().zip(&total) {
        *w += params.learning_rate * g;
    }
    next.bias += params.learning_rate * total[FEATURE_COUNT];
    if !next.is_finite() {
        return Err(PolicyError::NonFinite);
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn matrix(rows: &[[f64; 4]]) -> FeatureMatrix {
        FeatureMatrix::from_rows(rows.to_vec())
    }

    /// Independent log-probability: plain exponentials, no max shift.
    fn naive_log_prob(w: &[f64; 5], m: &FeatureMatrix, mask: &[bool], chosen: usize) -> f64 {
        let z = |r: &[f64; 4]| w[0] * r[0] + w[1] * r[1] + w[2] * r[2] + w[3] * r[3] + w[4];
        let denom: f64 = m
            .rows()
            .iter()
            .zip(mask)
            .filter(|(_, &c)| c)
            .map(|(r, _)| z(r).exp())
            .sum();
        (z(m.row(chosen)).exp() / denom).ln()
    }

    fn central_difference(params: &PolicyParams, m: &FeatureMatrix, mask: &[bool], chosen: usize) -> [f64; 5] {
        let h = 1e-5;
        let base = [
            params.weights[0],
            params.weights[1],
            params.weights[2],
            params.weights[3],
            params.bias,
        ];
        let mut out = [0.0; 5];
        for k in 0..5 {
            let mut up = base;
            let mut down = base;
            up[k] += h;
            down[k] -= h;
            out[k] = (naive_log_prob(&up, m, mask, chosen) - naive_log_prob(&down, m, mask, chosen)) / (2.0 * h);
        }
        out
    }

    #[test]
    fn zero_params_uniform() {
        let m = matrix(&[[0.1, 0.2, 0.3, 0.4], [1.0, 0.0, 0.5, 0.2], [0.0; 4], [0.7; 4]]);
        let d = forward(&PolicyParams::zeros(0.1), &m, &[true; 4]).unwrap();
        assert!(d.probs().iter().all(|p| (p - 0.25).abs() < 1e-15));
    }

    #[test]
    fn identical_rows_uniform_over_candidates() {
        let m = matrix(&[[0.3, 0.1, 0.9, 0.5]; 3]);
        let params = PolicyParams {
            weights: [3.0, -2.0, 1.0, 7.0],
            bias: 0.4,
            learning_rate: 0.1,
        };
        let d = forward(&params, &m, &[true, false, true]).unwrap();
        assert_eq!(d.prob(1), 0.0);
        assert!((d.prob(0) - 0.5).abs() < 1e-15 && (d.prob(2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn hand_evaluated_softmax() {
        let m = matrix(&[[0.0; 4], [1.0, 0.0, 0.0, 0.0]]);
        let params = PolicyParams {
            weights: [1.0, 0.0, 0.0, 0.0],
            bias: 0.0,
            learning_rate: 0.1,
        };
        let d = forward(&params, &m, &[true, true]).unwrap();
        let e = std::f64::consts::E;
        assert!((d.prob(0) - 1.0 / (1.0 + e)).abs() < 1e-15);
        assert!((d.prob(1) - e / (1.0 + e)).abs() < 1e-15);
        assert!((d.prob(0) - 0.2689).abs() < 1e-4);
    }

    #[test]
    fn empty_candidates_rejected() {
        let m = matrix(&[[0.0; 4]; 2]);
        assert_eq!(
            forward(&PolicyParams::zeros(0.1), &m, &[false, false]),
            Err(PolicyError::NoCandidates)
        );
    }

    #[test]
    fn extreme_logits_stay_normalized() {
        let m = matrix(&[[1.0, 0.0, 0.0, 0.0], [0.0; 4], [0.0; 4]]);
        let params = PolicyParams {
            weights: [5000.0, 0.0, 0.0, 0.0],
            bias: 0.0,
            learning_rate: 0.1,
        };
        let d = forward(&params, &m, &[false, true, true]).unwrap();
        assert!((d.prob(1) - 0.5).abs() < 1e-12);
        assert_eq!(d.prob(0), 0.0);
    }

    #[test]
    fn greedy_and_sampling() {
        let dist = NodeDistribution {
            probs: vec![0.9, 0.1],
            candidate_mask: vec![true, true],
        };
        assert_eq!(select_node(&dist, Selection::Greedy), 0);
        let tie = NodeDistribution {
            probs: vec![0.5, 0.5],
            candidate_mask: vec![true, true],
        };
        assert_eq!(select_node(&tie, Selection::Greedy), 0);
        let single = NodeDistribution {
            probs: vec![0.0, 1.0, 0.0],
            candidate_mask: vec![false, true, false],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(select_node(&single, Selection::Greedy), 1);
        for _ in 0..20 {
            assert_eq!(select_node(&single, Selection::Sample(&mut rng)), 1);
        }
        let mut hits = 0;
        for _ in 0..10_000 {
            if select_node(&dist, Selection::Sample(&mut rng)) == 0 {
                hits += 1;
            }
        }
        assert!((8800..=9200).contains(&hits), "{hits}");
    }

    #[test]
    fn two_node_gradient_matches_finite_difference() {
        let m = matrix(&[[0.2, 0.4, 0.1, 0.9], [0.8, 0.3, 0.6, 0.0]]);
        let params = PolicyParams {
            weights: [0.05, -0.03, 0.07, 0.01],
            bias: 0.02,
            learning_rate: 0.1,
        };
        let mask = [true, true];
        let g = log_prob_gradient(&params, &m, &mask, 1).unwrap();
        let fd = central_difference(&params, &m, &mask, 1);
        let d = forward(&params, &m, &mask).unwrap();
        for k in 0..4 {
            let expected = m.row(1)[k] - (d.prob(0) * m.row(0)[k] + d.prob(1) * m.row(1)[k]);
            assert!((g[k] - expected).abs() < 1e-15);
            assert!(((g[k] - fd[k]) / fd[k]).abs() < 1e-5);
        }
        assert!(fd[4].abs() < 1e-8 && g[4].abs() < 1e-12);
    }

    #[test]
    fn zero_rewards_and_zero_rate_are_identity() {
        let m = matrix(&[[0.2, 0.4, 0.1, 0.9], [0.8, 0.3, 0.6, 0.0]]);
        let decision = Decision {
            matrix: m,
            candidates: vec![true, true],
            chosen: 0,
            log_prob: 0.5f64.ln(),
        };
        let params = PolicyParams::random(&mut ChaCha8Rng::seed_from_u64(3), 0.5);
        let failed = vec![EpisodeTrace { decisions: vec![decision.clone()], reward: 0.0 }; 4];
        assert_eq!(reinforce_update(&params, &failed).unwrap(), params);
        let frozen = PolicyParams { learning_rate: 0.0, ..params };
        let rewarded = vec![EpisodeTrace { decisions: vec![decision], reward: 0.8 }];
        assert_eq!(reinforce_update(&frozen, &rewarded).unwrap(), frozen);
        assert_ne!(reinforce_update(&params, &rewarded).unwrap(), params);
    }

    #[test]
    fn update_moves_toward_rewarded_choice() {
        let m = matrix(&[[0.0; 4], [1.0, 0.0, 0.0, 0.0]]);
        let params = PolicyParams::zeros(0.5);
        let trace = EpisodeTrace {
            decisions: vec![Decision { matrix: m.clone(), candidates: vec![true, true], chosen: 1, log_prob: 0.5f64.ln() }],
            reward: 1.0,
        };
        let next = reinforce_update(&params, &[trace]).unwrap();
        let before = forward(&params, &m, &[true, true]).unwrap().prob(1);
        let after = forward(&next, &m, &[true, true]).unwrap().prob(1);
        assert!(after > before);
    }

    #[test]
    fn non_finite_update_is_an_error() {
        let m = matrix(&[[0.0; 4], [1.0, 0.0, 0.0, 0.0]]);
        let params = PolicyParams::zeros(f64::MAX);
        let trace = EpisodeTrace {
            decisions: vec![Decision { matrix: m, candidates: vec![true, true], chosen: 1, log_prob: 0.0 }],
            reward: f64::MAX,
        };
        assert_eq!(reinforce_update(&params, &[trace]), Err(PolicyError::NonFinite));
    }

    #[test]
    fn reward_ratio() {
        assert_eq!(compute_reward(40.0, 100.0), 0.4);
        assert_eq!(compute_reward(0.0, 0.0), 0.0);
        // every path one hop: cost equals revenue
        assert_eq!(compute_reward(57.0, 57.0), 1.0);
    }

    #[test]
    fn policy_record_round_trip() {
        let p = PolicyParams::random(&mut ChaCha8Rng::seed_from_u64(8), DEFAULT_LEARNING_RATE);
        let q: PolicyParams = p.to_string().parse().unwrap();
        assert_eq!(p, q);
        assert!("1 2 3".parse::<PolicyParams>().is_err());
        assert!("1 2 3 4 x".parse::<PolicyParams>().is_err());
    }

    proptest! {
        #[test]
        fn distribution_contract(
            rows in prop::collection::vec(prop::array::uniform4(0.0f64..=1.0), 1..12),
            w in prop::array::uniform4(-20.0f64..20.0),
            b in -5.0f64..5.0,
            shift in -50.0f64..50.0,
            mask_bits in any::<u16>(),
        ) {
            let n = rows.len();
            let mut mask: Vec<bool> = (0..n).map(|i| mask_bits >> i & 1 == 1).collect();
            if !mask.iter().any(|&c| c) { mask[0] = true; }
            let m = FeatureMatrix::from_rows(rows);
            let params = PolicyParams { weights: w, bias: b, learning_rate: 0.1 };
            let d = forward(&params, &m, &mask).unwrap();
            prop_assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for (i, &candidate) in mask.iter().enumerate() {
                if !candidate { prop_assert_eq!(d.prob(i), 0.0); }
            }
            let shifted = forward(&PolicyParams { bias: b + shift, ..params }, &m, &mask).unwrap();
            for i in 0..n {
                prop_assert!((d.prob(i) - shifted.prob(i)).abs() < 1e-12);
            }
            let greedy = select_node(&d, Selection::Greedy);
            let best_score = (0..n).filter(|&i| mask[i]).map(|i| params.score(m.row(i))).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!((params.score(m.row(greedy)) - best_score).abs() < 1e-12);
        }
    }
}
