//! Statistical audits of the privacy guarantee.
//!
//! A node's broadcast query is a uniformly random permutation of the
//! function indices, whatever its demand is, so an observer learns nothing
//! about other nodes' demands from the queries. The information-theoretic
//! statement itself is not testable on samples; these audits test its
//! finite-sample consequences instead:
//!
//! - `audit_query_uniformity` histograms each non-observer node's query
//!   over all K2! permutations under a fixed demand vector and runs a
//!   chi-square test against the uniform distribution.
//! - `audit_demand_independence` samples each non-observer node's query
//!   distribution under several demand scenarios that agree on the
//!   observer's own demand, and reports the worst pairwise total-variation
//!   distance plus a plug-in mutual-information estimate between scenario
//!   and query.
//! - `audit_transcript_shape` checks exactly, not statistically, that the
//!   shuffle transcript minus the query labels (senders, integers, payload
//!   sizes, contributor positions) is identical under every demand vector.
//!
//! Every trial reseeds a fresh stream from (seed, node, demand, trial), so
//! audits are reproducible bit for bit and trials can run in parallel.

use crate::exec::map_indexed;
use crate::sim::{generate_query, map_phase, shuffle_phase, BlockStructure, SimConfig, SimError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum AuditError {
    #[error("{got} trials are too few: uniformity over {bins} permutations needs at least {required}")]
    TooFewTrials { required: u64, got: u64, bins: u64 },
    #[error("cannot enumerate the {k2}! query permutations; the audit handles at most 6 functions per block")]
    AlphabetTooLarge { k2: usize },
    #[error("degenerate demand scenarios: {0}")]
    DegenerateScenarios(String),
    #[error("invalid audit config: {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

// ---------------------------------------------------------------------------
// Permutation indexing.

pub fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

/// All permutations of 1..=k in lexicographic order.
pub fn permutations_lex(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(factorial(k) as usize);
    let mut current = Vec::with_capacity(k);
    let mut used = vec![false; k + 1];
    fn rec(k: usize, current: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for v in 1..=k {
            if !used[v] {
                used[v] = true;
                current.push(v);
                rec(k, current, used, out);
                current.pop();
                used[v] = false;
            }
        }
    }
    rec(k, &mut current, &mut used, &mut out);
    out
}

/// 0-based lexicographic rank of a permutation of 1..=k (Lehmer code).
pub fn permutation_rank(perm: &[usize]) -> usize {
    let k = perm.len();
    let mut rank = 0usize;
    for (i, &v) in perm.iter().enumerate() {
        let smaller_later = perm[i + 1..].iter().filter(|&&w| w < v).count();
        rank += smaller_later * factorial(k - 1 - i) as usize;
    }
    rank
}

// ---------------------------------------------------------------------------
// Configuration.

/// Shared setup for the query audits. The observer is the node whose view
/// the audit takes: its own demand and column choice are the conditioning
/// the privacy statement fixes, so the audits cover every other node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub k1: usize,
    pub k2: usize,
    pub trials: u64,
    /// Real node whose view is audited, in [K1].
    pub observer: usize,
    /// The observer's own column choice, in [K2].
    pub observer_choice: usize,
    /// Fixed demand vector for the uniformity audit.
    pub demands: Vec<usize>,
    /// Demand vectors compared by the independence audit; all must agree
    /// at the observer's position.
    pub scenarios: Vec<Vec<usize>>,
    pub significance: f64,
    pub tv_tolerance: f64,
    pub mi_threshold: f64,
    pub seed: u64,
    /// Injected queries, one permutation per real node: the run is
    /// deterministic, so distribution tests are skipped.
    pub replay: Option<Vec<Vec<usize>>>,
}

impl AuditConfig {
    /// Defaults: the smallest admissible trial count (100 per permutation),
    /// observer 1 with column choice 1, significance 0.01, a 0.05
    /// total-variation tolerance, and a 0.01-bit information threshold.
    pub fn new(k1: usize, k2: usize, demands: Vec<usize>) -> AuditConfig {
        AuditConfig {
            k1,
            k2,
            trials: 100 * factorial(k2),
            observer: 1,
            observer_choice: 1,
            demands,
            scenarios: Vec::new(),
            significance: 0.01,
            tv_tolerance: 0.05,
            mi_threshold: 0.01,
            seed: 0,
            replay: None,
        }
    }

    fn validate(&self) -> Result<(), AuditError> {
        if self.k2 > 6 {
            return Err(AuditError::AlphabetTooLarge { k2: self.k2 });
        }
        if self.k1 < 2 || self.k2 < 2 {
            return Err(AuditError::ConfigInvalid(
                "audits need at least two real nodes and two functions per block".into(),
            ));
        }
        if !(1..=self.k1).contains(&self.observer) {
            return Err(AuditError::ConfigInvalid(format!(
                "observer {} is outside [1, {}]",
                self.observer, self.k1
            )));
        }
        if !(1..=self.k2).contains(&self.observer_choice) {
            return Err(AuditError::ConfigInvalid(format!(
                "observer column choice {} is outside [1, {}]",
                self.observer_choice, self.k2
            )));
        }
        self.check_demand_vector(&self.demands, "demand vector")?;
        let bins = factorial(self.k2);
        let required = 100 * bins;
        if self.trials < required {
            return Err(AuditError::TooFewTrials { required, got: self.trials, bins });
        }
        for (name, v) in [
            ("significance", self.significance),
            ("tv tolerance", self.tv_tolerance),
            ("mi threshold", self.mi_threshold),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(AuditError::ConfigInvalid(format!(
                    "{name} {v} is outside (0, 1)"
                )));
            }
        }
        if let Some(replay) = &self.replay {
            if replay.len() != self.k1 {
                return Err(AuditError::ConfigInvalid(format!(
                    "expected {} replay queries, got {}",
                    self.k1,
                    replay.len()
                )));
            }
            for (i, y) in replay.iter().enumerate() {
                let mut seen = vec![false; self.k2];
                let perm = y.len() == self.k2
                    && y.iter().all(|&v| {
                        (1..=self.k2).contains(&v) && !std::mem::replace(&mut seen[v - 1], true)
                    });
                if !perm {
                    return Err(AuditError::ConfigInvalid(format!(
                        "replay query for node {} is not a permutation of 1..={}",
                        i + 1,
                        self.k2
                    )));
                }
            }
        }
        Ok(())
    }

    fn check_demand_vector(&self, d: &[usize], what: &str) -> Result<(), AuditError> {
        if d.len() != self.k1 {
            return Err(AuditError::ConfigInvalid(format!(
                "{what} has length {}, expected {}",
                d.len(),
                self.k1
            )));
        }
        if let Some(v) = d.iter().find(|v| !(1..=self.k2).contains(*v)) {
            return Err(AuditError::ConfigInvalid(format!(
                "{what} holds {v}, outside [1, {}]",
                self.k2
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Reports.

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeUniformity {
    pub node: usize,
    /// Query counts indexed by lexicographic permutation rank.
    pub histogram: Vec<u64>,
    pub chi_square: f64,
    pub p_value: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformityResult {
    pub per_node: Vec<NodeUniformity>,
    pub significance: f64,
    pub trials: u64,
    /// True when injected queries made the run deterministic and the
    /// distribution test was skipped.
    pub replay_skipped: bool,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeIndependence {
    pub node: usize,
    /// Worst pairwise total-variation distance between the node's
    /// empirical query distributions across scenarios.
    pub max_tv: f64,
    /// Plug-in estimate of the information the node's query carries about
    /// the scenario, in bits.
    pub mi_bits: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndependenceResult {
    pub scenarios: Vec<Vec<usize>>,
    pub per_node: Vec<NodeIndependence>,
    pub max_tv: f64,
    pub mi_bits: f64,
    pub tv_tolerance: f64,
    pub mi_threshold: f64,
    pub trials: u64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub uniformity: Option<UniformityResult>,
    pub independence: Option<IndependenceResult>,
    pub passed: bool,
}

// ---------------------------------------------------------------------------
// Sampling.

fn trial_rng(tag: &[u8], seed: u64, node: usize, demand: usize, trial: u64) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(tag);
    hasher.update(seed.to_le_bytes());
    hasher.update((node as u64).to_le_bytes());
    hasher.update((demand as u64).to_le_bytes());
    hasher.update(trial.to_le_bytes());
    ChaCha8Rng::from_seed(hasher.finalize().into())
}

/// Histogram of `trials` fresh query draws for one (node, demand) pair,
/// indexed by permutation rank. Trials are chunked so parallel and
/// sequential runs aggregate identically.
fn sample_histogram(tag: &'static [u8], seed: u64, node: usize, demand: usize, k2: usize, trials: u64) -> Vec<u64> {
    const CHUNK: u64 = 4096;
    let bins = factorial(k2) as usize;
    let chunks = trials.div_ceil(CHUNK) as usize;
    let partials = map_indexed(chunks, |ci| {
        let lo = ci as u64 * CHUNK;
        let hi = (lo + CHUNK).min(trials);
        let mut hist = vec![0u64; bins];
        for trial in lo..hi {
            let mut rng = trial_rng(tag, seed, node, demand, trial);
            let a = rng.gen_range(1..=k2);
            let y = generate_query(demand, a, k2, &mut rng);
            hist[permutation_rank(&y)] += 1;
        }
        hist
    });
    let mut hist = vec![0u64; bins];
    for partial in partials {
        for (acc, c) in hist.iter_mut().zip(partial) {
            *acc += c;
        }
    }
    hist
}

fn chi_square_uniform(hist: &[u64], trials: u64) -> (f64, f64) {
    let expected = trials as f64 / hist.len() as f64;
    let stat: f64 = hist
        .iter()
        .map(|&o| {
            let d = o as f64 - expected;
            d * d / expected
        })
        .sum();
    let df = (hist.len() - 1) as f64;
    let p = 1.0 - ChiSquared::new(df).expect("df >= 1").cdf(stat);
    (stat, p)
}

fn max_pairwise_tv(hists: &[Vec<u64>], trials: u64) -> f64 {
    let n = trials as f64;
    let mut worst = 0f64;
    for i in 0..hists.len() {
        for j in i + 1..hists.len() {
            let l1: f64 = hists[i]
                .iter()
                .zip(&hists[j])
                .map(|(&a, &b)| (a as f64 - b as f64).abs())
                .sum();
            worst = worst.max(0.5 * l1 / n);
        }
    }
    worst
}

/// Plug-in mutual information, in bits, between a uniformly chosen
/// scenario and a query drawn from that scenario's empirical distribution.
fn plug_in_mi(hists: &[Vec<u64>], trials: u64) -> f64 {
    let s = hists.len() as f64;
    let n = trials as f64;
    let bins = hists[0].len();
    let mut marginal = vec![0f64; bins];
    for hist in hists {
        for (m, &c) in marginal.iter_mut().zip(hist) {
            *m += c as f64 / n / s;
        }
    }
    let mut mi = 0f64;
    for hist in hists {
        for (&c, &m) in hist.iter().zip(&marginal) {
            if c > 0 {
                let cond = c as f64 / n;
                mi += cond / s * (cond / m).log2();
            }
        }
    }
    // The estimator is nonnegative; rounding may dip just below zero.
    mi.max(0.0)
}

// ---------------------------------------------------------------------------
// Audits.

/// Chi-square test of each non-observer node's query against the uniform
/// distribution over all K2! permutations, under the configured demands.
pub fn audit_query_uniformity(config: &AuditConfig) -> Result<AuditReport, AuditError> {
    config.validate()?;
    if config.replay.is_some() {
        let result = UniformityResult {
            per_node: Vec::new(),
            significance: config.significance,
            trials: config.trials,
            replay_skipped: true,
            passed: true,
        };
        return Ok(AuditReport { uniformity: Some(result), independence: None, passed: true });
    }
    let mut per_node = Vec::new();
    for node in (1..=config.k1).filter(|&j| j != config.observer) {
        let histogram = sample_histogram(
            b"pcdc.audit-uniformity.v1",
            config.seed,
            node,
            config.demands[node - 1],
            config.k2,
            config.trials,
        );
        let (chi_square, p_value) = chi_square_uniform(&histogram, config.trials);
        per_node.push(NodeUniformity {
            node,
            histogram,
            chi_square,
            p_value,
            passed: p_value > config.significance,
        });
    }
    let passed = per_node.iter().all(|n| n.passed);
    let result = UniformityResult {
        per_node,
        significance: config.significance,
        trials: config.trials,
        replay_skipped: false,
        passed,
    };
    Ok(AuditReport { uniformity: Some(result), independence: None, passed })
}

/// Compares each non-observer node's query distribution across the demand
/// scenarios. Sampling streams are keyed by the demand value, so scenarios
/// that agree on a node's demand reuse identical draws and any reported
/// distance comes from actual demand dependence plus sampling noise, never
/// from replaying the same distribution twice.
pub fn audit_demand_independence(config: &AuditConfig) -> Result<AuditReport, AuditError> {
    config.validate()?;
    if config.scenarios.len() < 2 {
        return Err(AuditError::DegenerateScenarios(
            "need at least two demand scenarios to compare".into(),
        ));
    }
    for scenario in &config.scenarios {
        self_check_scenario(config, scenario)?;
    }
    let anchor = config.scenarios[0][config.observer - 1];
    if config.scenarios.iter().any(|s| s[config.observer - 1] != anchor) {
        return Err(AuditError::DegenerateScenarios(
            "scenarios differ in the observer's own demand, which its view already fixes".into(),
        ));
    }

    let mut per_node = Vec::new();
    for node in (1..=config.k1).filter(|&j| j != config.observer) {
        let hists: Vec<Vec<u64>> = config
            .scenarios
            .iter()
            .map(|scenario| {
                sample_histogram(
                    b"pcdc.audit-independence.v1",
                    config.seed,
                    node,
                    scenario[node - 1],
                    config.k2,
                    config.trials,
                )
            })
            .collect();
        per_node.push(NodeIndependence {
            node,
            max_tv: max_pairwise_tv(&hists, config.trials),
            mi_bits: plug_in_mi(&hists, config.trials),
        });
    }
    let max_tv = per_node.iter().map(|n| n.max_tv).fold(0f64, f64::max);
    let mi_bits: f64 = per_node.iter().map(|n| n.mi_bits).sum();
    let passed = max_tv < config.tv_tolerance && mi_bits < config.mi_threshold;
    let result = IndependenceResult {
        scenarios: config.scenarios.clone(),
        per_node,
        max_tv,
        mi_bits,
        tv_tolerance: config.tv_tolerance,
        mi_threshold: config.mi_threshold,
        trials: config.trials,
        passed,
    };
    Ok(AuditReport { uniformity: None, independence: Some(result), passed })
}

fn self_check_scenario(config: &AuditConfig, scenario: &[usize]) -> Result<(), AuditError> {
    config.check_demand_vector(scenario, "demand scenario")
}

// ---------------------------------------------------------------------------
// Exact transcript-shape invariance.

/// Outcome of comparing shuffle transcripts across every demand vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeInvariance {
    pub demand_vectors: usize,
    pub passed: bool,
}

/// Checks exactly that the transcript shape (symbol senders, integers,
/// payload sizes, and contributor positions) never depends on the demands:
/// runs the shuffle under every demand vector and compares everything
/// except the query-supplied function labels.
pub fn audit_transcript_shape(
    structure: &BlockStructure,
    master_seed: u64,
) -> Result<ShapeInvariance, AuditError> {
    let (k1, k2) = (structure.k1(), structure.k2());
    let total = k2
        .checked_pow(k1 as u32)
        .filter(|&t| t <= 4096)
        .ok_or_else(|| {
            AuditError::ConfigInvalid(format!(
                "cannot enumerate {k2}^{k1} demand vectors; the exact check handles at most 4096"
            ))
        })?;

    let shape_of = |demands: Vec<usize>| -> Result<Vec<(usize, u32, usize, Vec<(usize, usize)>)>, AuditError> {
        let mut config = SimConfig::new(structure.clone(), demands);
        config.master_seed = master_seed;
        let states = map_phase(&config)?;
        let symbols = shuffle_phase(&config, &states)?;
        Ok(symbols
            .into_iter()
            .map(|sym| {
                let positions = sym
                    .contributors
                    .iter()
                    .map(|c| (c.batch, c.effective_node))
                    .collect();
                (sym.sender, sym.t, sym.payload.len(), positions)
            })
            .collect())
    };

    let mut demands = vec![1usize; k1];
    let reference = shape_of(demands.clone())?;
    let mut checked = 1;
    // Odometer over [K2]^{K1}.
    'outer: loop {
        for i in 0..k1 {
            if demands[i] < k2 {
                demands[i] += 1;
                demands[..i].iter_mut().for_each(|d| *d = 1);
                let shape = shape_of(demands.clone())?;
                checked += 1;
                if shape != reference {
                    return Ok(ShapeInvariance { demand_vectors: checked, passed: false });
                }
                continue 'outer;
            }
        }
        break;
    }
    debug_assert_eq!(checked, total);
    Ok(ShapeInvariance { demand_vectors: checked, passed: true })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::{build_regular_pda, construct_one, construct_two, row_pda};

    fn base_config() -> AuditConfig {
        let mut config = AuditConfig::new(3, 3, vec![1, 2, 3]);
        config.trials = 6000;
        config.seed = 7;
        config
    }

    #[test]
    fn permutations_enumerate_in_lexicographic_order() {
        let perms = permutations_lex(3);
        assert_eq!(
            perms,
            vec![
                vec![1, 2, 3],
                vec![1, 3, 2],
                vec![2, 1, 3],
                vec![2, 3, 1],
                vec![3, 1, 2],
                vec![3, 2, 1],
            ]
        );
    }

    #[test]
    fn permutation_rank_inverts_enumeration() {
        for k in 1..=5 {
            for (i, perm) in permutations_lex(k).into_iter().enumerate() {
                assert_eq!(permutation_rank(&perm), i, "k={k}");
            }
        }
    }

    #[test]
    fn uniformity_passes_on_a_moderate_sample() {
        let report = audit_query_uniformity(&base_config()).unwrap();
        let result = report.uniformity.unwrap();
        assert!(report.passed);
        assert!(!result.replay_skipped);
        // Observer 1 is excluded; nodes 2 and 3 are audited.
        let nodes: Vec<usize> = result.per_node.iter().map(|n| n.node).collect();
        assert_eq!(nodes, vec![2, 3]);
        for node in &result.per_node {
            assert_eq!(node.histogram.len(), 6);
            assert_eq!(node.histogram.iter().sum::<u64>(), 6000);
            assert!(node.p_value > 0.01 && node.p_value <= 1.0, "p={}", node.p_value);
            // Each permutation lands near the expected 1000 hits.
            assert!(node.histogram.iter().all(|&c| (850..1150).contains(&c)));
        }
    }

    #[test]
    fn two_function_queries_split_evenly() {
        let mut config = AuditConfig::new(2, 2, vec![1, 1]);
        config.trials = 2000;
        config.observer = 2;
        let report = audit_query_uniformity(&config).unwrap();
        let result = report.uniformity.unwrap();
        assert_eq!(result.per_node.len(), 1);
        let hist = &result.per_node[0].histogram;
        // Demand 1: column choice 1 gives (1,2), choice 2 gives (2,1).
        assert_eq!(hist.len(), 2);
        assert_eq!(hist.iter().sum::<u64>(), 2000);
        assert!(hist.iter().all(|&c| (900..1100).contains(&c)), "{hist:?}");
        assert!(report.passed);
    }

    #[test]
    fn replay_mode_skips_the_distribution_test() {
        let mut config = base_config();
        config.replay = Some(vec![vec![1, 2, 3], vec![2, 3, 1], vec![3, 1, 2]]);
        let report = audit_query_uniformity(&config).unwrap();
        let result = report.uniformity.unwrap();
        assert!(result.replay_skipped && result.passed && result.per_node.is_empty());
    }

    #[test]
    fn audits_reject_bad_configs() {
        let mut config = base_config();
        config.trials = 599;
        assert_eq!(
            audit_query_uniformity(&config).unwrap_err(),
            AuditError::TooFewTrials { required: 600, got: 599, bins: 6 }
        );

        let mut config = base_config();
        config.k2 = 7;
        config.demands = vec![1, 2, 7];
        assert_eq!(
            audit_query_uniformity(&config).unwrap_err(),
            AuditError::AlphabetTooLarge { k2: 7 }
        );

        let mut config = base_config();
        config.observer = 4;
        assert!(matches!(
            audit_query_uniformity(&config).unwrap_err(),
            AuditError::ConfigInvalid(_)
        ));

        let mut config = base_config();
        config.demands = vec![1, 2];
        assert!(matches!(
            audit_query_uniformity(&config).unwrap_err(),
            AuditError::ConfigInvalid(_)
        ));

        let mut config = base_config();
        config.replay = Some(vec![vec![1, 2, 3], vec![2, 3, 1], vec![3, 3, 2]]);
        assert!(matches!(
            audit_query_uniformity(&config).unwrap_err(),
            AuditError::ConfigInvalid(_)
        ));

        let mut config = base_config();
        config.significance = 0.0;
        assert!(matches!(
            audit_query_uniformity(&config).unwrap_err(),
            AuditError::ConfigInvalid(_)
        ));
    }

    #[test]
    fn independence_holds_between_two_scenarios() {
        let mut config = AuditConfig::new(2, 2, vec![1, 1]);
        config.trials = 10_000;
        config.scenarios = vec![vec![1, 1], vec![1, 2]];
        config.seed = 3;
        let report = audit_demand_independence(&config).unwrap();
        let result = report.independence.unwrap();
        assert!(report.passed);
        assert!(result.max_tv < 0.05, "tv={}", result.max_tv);
        assert!(result.mi_bits < 0.01, "mi={}", result.mi_bits);
        assert!(result.mi_bits >= 0.0);
        assert_eq!(result.per_node.len(), 1);
        assert_eq!(result.per_node[0].node, 2);
    }

    #[test]
    fn identical_scenarios_reuse_draws_and_report_zero_distance() {
        let mut config = base_config();
        config.scenarios = vec![vec![1, 2, 3], vec![1, 2, 3]];
        let report = audit_demand_independence(&config).unwrap();
        let result = report.independence.unwrap();
        assert_eq!(result.max_tv, 0.0);
        assert_eq!(result.mi_bits, 0.0);
        assert!(report.passed);
    }

    #[test]
    fn three_node_scenario_set_stays_independent() {
        let mut config = base_config();
        config.trials = 12_000;
        config.observer = 2;
        config.scenarios = vec![vec![1, 2, 3], vec![2, 2, 3], vec![3, 2, 1]];
        let report = audit_demand_independence(&config).unwrap();
        assert!(report.passed, "{:?}", report.independence);
    }

    #[test]
    fn independence_rejects_degenerate_scenario_sets() {
        let mut config = base_config();
        config.scenarios = vec![vec![1, 2, 3]];
        assert!(matches!(
            audit_demand_independence(&config).unwrap_err(),
            AuditError::DegenerateScenarios(_)
        ));

        // Observer 1's own demand varies: its view distinguishes the
        // scenarios trivially.
        let mut config = base_config();
        config.scenarios = vec![vec![1, 2, 3], vec![2, 2, 3]];
        assert!(matches!(
            audit_demand_independence(&config).unwrap_err(),
            AuditError::DegenerateScenarios(_)
        ));

        let mut config = base_config();
        config.scenarios = vec![vec![1, 2, 3], vec![1, 2, 4]];
        assert!(matches!(
            audit_demand_independence(&config).unwrap_err(),
            AuditError::ConfigInvalid(_)
        ));
    }

    #[test]
    fn audits_are_deterministic() {
        let report = audit_query_uniformity(&base_config()).unwrap();
        assert_eq!(report, audit_query_uniformity(&base_config()).unwrap());

        let mut config = base_config();
        config.scenarios = vec![vec![1, 2, 3], vec![1, 3, 2]];
        let first = audit_demand_independence(&config).unwrap();
        assert_eq!(first, audit_demand_independence(&config).unwrap());
    }

    #[test]
    fn transcript_shape_never_depends_on_demands() {
        let triangle = build_regular_pda(3, 1).unwrap().pda;
        let structure = BlockStructure::from_components(&triangle, &triangle).unwrap();
        let outcome = audit_transcript_shape(&structure, 11).unwrap();
        assert_eq!(outcome, ShapeInvariance { demand_vectors: 27, passed: true });

        let dense = build_regular_pda(3, 2).unwrap().pda;
        let structure = BlockStructure::from_components(&dense, &row_pda(3).unwrap()).unwrap();
        let outcome = audit_transcript_shape(&structure, 0).unwrap();
        assert_eq!(outcome, ShapeInvariance { demand_vectors: 27, passed: true });

        let (extended, meta) = construct_two(3, 4, 2, 1).unwrap();
        let structure =
            BlockStructure::recover(extended, meta.k1, meta.k2, meta.f1, meta.f2).unwrap();
        assert!(audit_transcript_shape(&structure, 5).unwrap().passed);
    }

    #[test]
    fn transcript_shape_enumeration_is_capped() {
        let (extended, meta) = construct_one(6, 6, 1).unwrap();
        let structure =
            BlockStructure::recover(extended, meta.k1, meta.k2, meta.f1, meta.f2).unwrap();
        assert!(matches!(
            audit_transcript_shape(&structure, 0),
            Err(AuditError::ConfigInvalid(_))
        ));
    }
}
