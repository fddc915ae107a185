//! Benchmark harness: instance suites, ablation grids, CSV records.

pub mod random;
pub mod suite;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::acceptance::{validate, AlphaPolicy, Criticality, Evaluator, FailureReason, PlanResult};
use crate::fuzzy::TNormKind;
use crate::grounding::{oracle_from_spec, AggregationPolicy, Grounder, OracleSpec};
use crate::io::{parse_domain, parse_problem, write_domain, write_problem, LoadError};
use crate::search::{BackwardAgg, Planner, SearchConfig, SearchError, SearchStats};

pub use random::{random_instance, RandomSpec};
pub use suite::{generate_instance, generate_suite, BenchInstance, SuiteSpec};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Load { path: PathBuf, source: LoadError },
    #[error("suite is empty")]
    EmptySuite,
    #[error("{instance}: {source}")]
    Search { instance: String, source: SearchError },
    #[error("{0}")]
    Oracle(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    TNorm,
    K,
    Chunking,
    AlphaPolicy,
    BackwardAgg,
}

impl Axis {
    pub const ALL: [Axis; 5] = [
        Axis::TNorm,
        Axis::K,
        Axis::Chunking,
        Axis::AlphaPolicy,
        Axis::BackwardAgg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Axis::TNorm => "tnorm",
            Axis::K => "k",
            Axis::Chunking => "chunking",
            Axis::AlphaPolicy => "alpha-policy",
            Axis::BackwardAgg => "backward-agg",
        }
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Axis::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown ablation axis `{s}` (tnorm, k, chunking, alpha-policy, backward-agg)"))
    }
}

pub const K_VALUES: [usize; 4] = [1, 3, 5, 7];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlphaMode {
    /// The problem's own policy.
    AsGiven,
    /// Adaptive with the problem's base threshold and typical criticality.
    Adaptive,
}

impl AlphaMode {
    pub fn name(self) -> &'static str {
        match self {
            AlphaMode::AsGiven => "fixed",
            AlphaMode::Adaptive => "adaptive",
        }
    }
}

/// One point of the ablation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunConfig {
    pub tnorm: TNormKind,
    pub k: usize,
    pub chunking: bool,
    pub alpha: AlphaMode,
    pub backward_agg: BackwardAgg,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            tnorm: TNormKind::Lukasiewicz,
            k: 5,
            chunking: true,
            alpha: AlphaMode::AsGiven,
            backward_agg: BackwardAgg::Max,
        }
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/k{}/{}/{}/{}",
            self.tnorm.name(),
            self.k,
            if self.chunking { "chunk" } else { "nochunk" },
            self.alpha.name(),
            self.backward_agg
        )
    }
}

/// Cartesian product of the values of each requested axis around `base`.
pub fn configurations(base: RunConfig, axes: &[Axis]) -> Vec<RunConfig> {
    let mut axes = axes.to_vec();
    axes.sort();
    axes.dedup();
    let mut out = vec![base];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|c| -> Vec<RunConfig> {
                match axis {
                    Axis::TNorm => TNormKind::ALL.iter().map(|&tnorm| RunConfig { tnorm, ..c }).collect(),
                    Axis::K => K_VALUES.iter().map(|&k| RunConfig { k, ..c }).collect(),
                    Axis::Chunking => [true, false]
                        .iter()
                        .map(|&chunking| RunConfig { chunking, ..c })
                        .collect(),
                    Axis::AlphaPolicy => [AlphaMode::AsGiven, AlphaMode::Adaptive]
                        .iter()
                        .map(|&alpha| RunConfig { alpha, ..c })
                        .collect(),
                    Axis::BackwardAgg => [BackwardAgg::Max, BackwardAgg::Min]
                        .iter()
                        .map(|&backward_agg| RunConfig { backward_agg, ..c })
                        .collect(),
                }
            })
            .collect();
    }
    out
}

#[derive(Debug, Clone)]
pub struct BenchSettings {
    pub configs: Vec<RunConfig>,
    /// Shared search limits and seed; t-norm, chunking and aggregation come from each config.
    pub search: SearchConfig,
    pub oracle: String,
}

impl Default for BenchSettings {
    fn default() -> Self {
        BenchSettings {
            configs: vec![RunConfig::default()],
            search: SearchConfig::default(),
            oracle: "table".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub instance: String,
    pub config: String,
    pub length: usize,
    pub length_bin: String,
    pub missing: usize,
    pub candidates: usize,
    pub tnorm: String,
    pub k: usize,
    pub chunking: bool,
    pub alpha_policy: String,
    pub backward_agg: String,
    pub accepted: bool,
    pub valid: bool,
    pub violations: usize,
    pub validator_agrees: bool,
    pub success: bool,
    pub plan_mu: f64,
    pub true_mu: f64,
    pub alpha: f64,
    pub plan_len: usize,
    pub composition_len: usize,
    pub failure_reason: String,
    pub forward_generated: usize,
    pub forward_expanded: usize,
    pub backward_generated: usize,
    pub backward_expanded: usize,
    pub wall_ms: f64,
}

/// Columns excluded from reproducibility comparisons.
pub const TIMING_COLUMNS: [&str; 1] = ["wall_ms"];

pub fn length_bin(n: usize) -> &'static str {
    match n {
        0 | 1 => "1",
        2 | 3 => "3",
        4 | 5 => "5",
        6 | 7 => "7",
        _ => ">7",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub record: BenchRecord,
    pub result: PlanResult,
    pub stats: SearchStats,
}

fn meta_usize(inst: &BenchInstance, key: &str) -> Option<usize> {
    inst.problem.meta.get(key).and_then(|v| v.parse().ok())
}

/// Plans one instance under one configuration and scores it against the noise-free oracle.
pub fn run_instance(inst: &BenchInstance, cfg: RunConfig, settings: &BenchSettings) -> Result<RunOutcome, BenchError> {
    let search_err = |source: SearchError| BenchError::Search {
        instance: inst.id.clone(),
        source,
    };
    let mut problem = inst.problem.clone();
    if cfg.alpha == AlphaMode::Adaptive {
        problem.alpha = AlphaPolicy::Adaptive {
            base: problem.alpha.base(),
            criticality: Criticality::Typical,
        };
    }
    let seed = settings.search.seed;
    // independent oracle noise per instance; identical ids give identical noise
    let oracle_seed = seed ^ suite::fxhash(&inst.id);
    let oracle = oracle_from_spec(&inst.domain.oracle, &settings.oracle, oracle_seed).map_err(BenchError::Oracle)?;
    let grounder = Grounder::new(oracle, AggregationPolicy::with_k(cfg.k), seed);
    let search = SearchConfig {
        tnorm: cfg.tnorm,
        chunking: cfg.chunking,
        backward_agg: cfg.backward_agg,
        ..settings.search.clone()
    };

    let start = Instant::now();
    let mut planner = Planner::new(&inst.domain, &problem, &grounder, search).map_err(search_err)?;
    let outcome = planner.run().map_err(search_err)?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let result = outcome.result;

    // searches that end without a candidate return an empty, rejected plan
    let found = result.accepted || !result.actions.is_empty();
    let (valid, violations, agrees, true_mu) = if found {
        // a separate validation run, as a user re-checking the emitted plan would do
        let fresh = grounder.fresh();
        let ev = Evaluator::new(&inst.domain, &problem, cfg.tnorm, &fresh).with_macros(planner.macros());
        let check =
            validate(&ev, &result.actions, &result.chunks).map_err(|e| search_err(SearchError::Validation(e)))?;
        let truth_spec = OracleSpec {
            noise_std: 0.0,
            ..inst.domain.oracle.clone()
        };
        let truth_oracle = oracle_from_spec(&truth_spec, &settings.oracle, seed).map_err(BenchError::Oracle)?;
        let truth_grounder = Grounder::new(truth_oracle, AggregationPolicy::with_k(1), seed);
        let truth_ev = Evaluator::new(&inst.domain, &problem, TNormKind::Lukasiewicz, &truth_grounder)
            .with_macros(planner.macros());
        let truth =
            validate(&truth_ev, &result.actions, &result.chunks).map_err(|e| search_err(SearchError::Validation(e)))?;
        let valid = check.violations.is_empty()
            && !matches!(
                check.failure_reason,
                Some(FailureReason::HardViolation | FailureReason::GoalUnmet)
            );
        let agrees = check.accepted == result.accepted && check.plan_mu == result.plan_mu;
        (valid, check.violations.len(), agrees, truth.plan_mu.value())
    } else {
        (false, 0, true, 0.0)
    };
    let success = result.accepted && valid && true_mu >= result.alpha_used.value();

    let length = meta_usize(inst, "length").unwrap_or(result.actions.len());
    let record = BenchRecord {
        instance: inst.id.clone(),
        config: cfg.to_string(),
        length,
        length_bin: length_bin(length).to_string(),
        missing: meta_usize(inst, "missing").unwrap_or(0),
        candidates: meta_usize(inst, "candidates").unwrap_or(0),
        tnorm: cfg.tnorm.name().to_string(),
        k: cfg.k,
        chunking: cfg.chunking,
        alpha_policy: cfg.alpha.name().to_string(),
        backward_agg: cfg.backward_agg.to_string(),
        accepted: result.accepted,
        valid,
        violations,
        validator_agrees: agrees,
        success,
        plan_mu: result.plan_mu.value(),
        true_mu,
        alpha: result.alpha_used.value(),
        plan_len: result.actions.len(),
        composition_len: result.composition_len(),
        failure_reason: result.failure_reason.map(|r| r.to_string()).unwrap_or_default(),
        forward_generated: outcome.stats.forward_generated,
        forward_expanded: outcome.stats.forward_expanded,
        backward_generated: outcome.stats.backward_generated,
        backward_expanded: outcome.stats.backward_expanded,
        wall_ms,
    };
    Ok(RunOutcome {
        record,
        result,
        stats: outcome.stats,
    })
}

/// Runs every (instance, configuration) pair in parallel; rows come back
/// instance-major in input order regardless of completion order.
pub fn run_bench(instances: &[BenchInstance], settings: &BenchSettings) -> Result<Vec<BenchRecord>, BenchError> {
    if instances.is_empty() {
        return Err(BenchError::EmptySuite);
    }
    let jobs: Vec<(&BenchInstance, RunConfig)> = instances
        .iter()
        .flat_map(|i| settings.configs.iter().map(move |c| (i, *c)))
        .collect();
    jobs.par_iter()
        .map(|(inst, cfg)| run_instance(inst, *cfg, settings).map(|o| o.record))
        .collect()
}

pub fn write_csv<W: Write>(records: &[BenchRecord], out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| BenchError::Io {
        path: PathBuf::from("<csv>"),
        source: e,
    })?;
    Ok(())
}

/// Success counts `(successes, runs)` grouped by `(config, key(record))`.
pub fn success_by<F>(records: &[BenchRecord], key: F) -> BTreeMap<(String, String), (usize, usize)>
where
    F: Fn(&BenchRecord) -> String,
{
    let mut out: BTreeMap<(String, String), (usize, usize)> = BTreeMap::new();
    for r in records {
        let e = out.entry((r.config.clone(), key(r))).or_default();
        e.0 += r.success as usize;
        e.1 += 1;
    }
    out
}

pub fn rate((s, n): (usize, usize)) -> f64 {
    if n == 0 {
        0.0
    } else {
        s as f64 / n as f64
    }
}

const BIN_ORDER: [&str; 5] = ["1", "3", "5", "7", ">7"];

/// Success rate per plan-length bin for each configuration.
pub fn summary(records: &[BenchRecord]) -> String {
    let grouped = success_by(records, |r| r.length_bin.clone());
    let mut configs: Vec<&String> = records.iter().map(|r| &r.config).collect();
    configs.dedup();
    let mut seen = Vec::new();
    configs.retain(|c| {
        let fresh = !seen.contains(c);
        seen.push(*c);
        fresh
    });
    let width = configs.iter().map(|c| c.len()).max().unwrap_or(6).max(6);
    let mut s = format!("{:<width$}", "config");
    for b in BIN_ORDER {
        s.push_str(&format!(" {b:>7}"));
    }
    s.push_str(&format!(" {:>7}\n", "all"));
    for c in configs {
        s.push_str(&format!("{c:<width$}"));
        let mut total = (0, 0);
        for b in BIN_ORDER {
            match grouped.get(&(c.clone(), b.to_string())) {
                Some(&(k, n)) => {
                    total.0 += k;
                    total.1 += n;
                    s.push_str(&format!(" {:>6.1}%", 100.0 * rate((k, n))));
                }
                None => s.push_str(&format!(" {:>7}", "-")),
            }
        }
        s.push_str(&format!(" {:>6.1}%\n", 100.0 * rate(total)));
    }
    s
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `<id>.domain.json` and `<id>.problem.json` for each instance.
pub fn write_suite(dir: &Path, instances: &[BenchInstance]) -> Result<(), BenchError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for inst in instances {
        let d = dir.join(format!("{}.domain.json", inst.id));
        fs::write(&d, write_domain(&inst.domain)).map_err(io_err(&d))?;
        let p = dir.join(format!("{}.problem.json", inst.id));
        fs::write(&p, write_problem(&inst.problem)).map_err(io_err(&p))?;
    }
    Ok(())
}

/// Loads every `<id>.domain.json` / `<id>.problem.json` pair, sorted by id.
pub fn load_suite(dir: &Path) -> Result<Vec<BenchInstance>, BenchError> {
    let mut ids = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let name = entry.map_err(io_err(dir))?.file_name();
        if let Some(id) = name.to_str().and_then(|n| n.strip_suffix(".problem.json")) {
            ids.push(id.to_string());
        }
    }
    ids.sort();
    let mut out = Vec::with_capacity(ids.len());
    for id in ids {
        let dp = dir.join(format!("{id}.domain.json"));
        let pp = dir.join(format!("{id}.problem.json"));
        let dtext = fs::read_to_string(&dp).map_err(io_err(&dp))?;
        let domain = parse_domain(&dtext).map_err(|source| BenchError::Load {
            path: dp.clone(),
            source,
        })?;
        let ptext = fs::read_to_string(&pp).map_err(io_err(&pp))?;
        let problem = parse_problem(&ptext, &domain).map_err(|source| BenchError::Load {
            path: pp.clone(),
            source,
        })?;
        out.push(BenchInstance { id, domain, problem });
    }
    if out.is_empty() {
        return Err(BenchError::EmptySuite);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_a_cartesian_product() {
        let base = RunConfig::default();
        assert_eq!(configurations(base, &[]), vec![base]);
        let grid = configurations(base, &[Axis::K, Axis::Chunking, Axis::K]);
        assert_eq!(grid.len(), 8);
        assert!(grid.iter().any(|c| c.k == 1 && !c.chunking));
        assert_eq!(configurations(base, &Axis::ALL).len(), 3 * 4 * 2 * 2 * 2);
    }

    #[test]
    fn axis_names_parse() {
        for a in Axis::ALL {
            assert_eq!(a.name().parse::<Axis>().unwrap(), a);
        }
        assert!("depth".parse::<Axis>().is_err());
    }

    #[test]
    fn bins() {
        let got: Vec<&str> = [1, 2, 3, 5, 7, 8, 9, 20].into_iter().map(length_bin).collect();
        assert_eq!(got, ["1", "3", "3", "5", "7", ">7", ">7", ">7"]);
    }

    #[test]
    fn empty_suite_is_an_error() {
        assert!(matches!(
            run_bench(&[], &BenchSettings::default()),
            Err(BenchError::EmptySuite)
        ));
    }

    #[test]
    fn single_instance_single_config_gives_one_row() {
        let inst = generate_instance(&SuiteSpec::default(), "one", 3, 1, 3, 9);
        let rows = run_bench(std::slice::from_ref(&inst), &BenchSettings::default()).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].validator_agrees);
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("instance,config,length,"));
    }

    #[test]
    fn suite_round_trips_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SuiteSpec {
            lengths: vec![3],
            missing: vec![1],
            candidates: vec![2],
            replicates: 2,
            ..SuiteSpec::default()
        };
        let suite = generate_suite(&spec);
        write_suite(dir.path(), &suite).unwrap();
        let loaded = load_suite(dir.path()).unwrap();
        assert_eq!(loaded, suite);
    }
}
