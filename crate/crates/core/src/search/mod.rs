//! Bidirectional best-first search: forward membership propagation,
//! backward requirements through residua, and meets verified by replay.

mod brute;
mod heuristic;
mod regression;

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::acceptance::{AdaptiveAlphaConfig, Evaluator, FailureReason, PlanResult, PlanStep, ValidationError};
use crate::chunking::{apply_macro, build_macros, macro_membership, MacroAction, DEFAULT_MAX_CHUNK};
use crate::fuzzy::{residuum, tnorm, Degree, TNormKind};
use crate::grounding::{Grounder, GroundingError};
use crate::pullback::pullback_compatible;
use crate::world::{applicability_failure, apply, goal_satisfied, Action, Domain, Problem, State, WorldError};

pub use brute::{brute_force_plan, brute_force_plan_capped, DEFAULT_NODE_CAP};
pub use heuristic::{distance, jaccard_distance, DistanceWeights, Heuristic};
pub use regression::{backward_requirement, BackwardAgg, Condition};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("backward requirement needs at least one candidate")]
    EmptyCandidates,
    #[error("enumeration exceeded the node cap of {0}")]
    NodeCap(usize),
    #[error("invalid search configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Grounding(#[from] GroundingError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("trace output failed: {0}")]
    Trace(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub epsilon_d: f64,
    /// Bound on primitive plan length.
    pub max_depth: usize,
    pub forward_beam: usize,
    pub backward_beam: usize,
    pub backward_agg: BackwardAgg,
    pub tnorm: TNormKind,
    pub weights: DistanceWeights,
    pub seed: u64,
    pub chunking: bool,
    pub max_chunk: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            epsilon_d: 0.15,
            max_depth: 16,
            forward_beam: 512,
            backward_beam: 512,
            backward_agg: BackwardAgg::Max,
            tnorm: TNormKind::Lukasiewicz,
            weights: DistanceWeights::default(),
            seed: 0,
            chunking: true,
            max_chunk: DEFAULT_MAX_CHUNK,
        }
    }
}

impl SearchConfig {
    pub fn check(&self) -> Result<(), SearchError> {
        if !(0.0..=1.0).contains(&self.epsilon_d) {
            return Err(SearchError::Config(format!(
                "epsilon_d {} is outside [0, 1]",
                self.epsilon_d
            )));
        }
        if self.forward_beam == 0 || self.backward_beam == 0 {
            return Err(SearchError::Config("beam widths must be at least 1".into()));
        }
        if self.chunking && self.max_chunk < 2 {
            return Err(SearchError::Config("max_chunk must be at least 2".into()));
        }
        self.weights.check().map_err(SearchError::Config)
    }
}

/// One expandable step: a primitive action or a macro.
#[derive(Debug, Clone, Copy)]
pub enum StepDef<'a> {
    Primitive(&'a Action),
    Macro(&'a MacroAction),
}

impl<'a> StepDef<'a> {
    pub fn step(&self) -> PlanStep {
        match self {
            StepDef::Primitive(a) => PlanStep::Primitive(a.id.clone()),
            StepDef::Macro(m) => PlanStep::Macro(m.id.clone()),
        }
    }

    /// Primitive actions covered.
    pub fn len(&self) -> usize {
        match self {
            StepDef::Primitive(_) => 1,
            StepDef::Macro(m) => m.members.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Crisp semantics of the step (the composite for macros).
    pub fn action(&self) -> &'a Action {
        match self {
            StepDef::Primitive(a) => a,
            StepDef::Macro(m) => &m.composite,
        }
    }
}

pub fn step_defs<'a>(domain: &'a Domain, macros: &'a [MacroAction]) -> Vec<StepDef<'a>> {
    domain
        .actions
        .iter()
        .map(StepDef::Primitive)
        .chain(macros.iter().map(StepDef::Macro))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardNode {
    pub state: State,
    pub mu: Degree,
    pub parent: Option<usize>,
    pub via: Option<PlanStep>,
    /// Primitive actions from the root.
    pub depth: usize,
    /// Composition steps from the root.
    pub steps: usize,
    pub dead: bool,
}

impl ForwardNode {
    pub fn root(state: State) -> Self {
        ForwardNode {
            state,
            mu: Degree::ONE,
            parent: None,
            via: None,
            depth: 0,
            steps: 0,
            dead: false,
        }
    }
}

/// How a backward node continues toward the goal.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardLink {
    pub successor: usize,
    pub via: PlanStep,
    pub step_mu: Degree,
    pub successor_req: Degree,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackwardNode {
    pub condition: Condition,
    pub requirement: Degree,
    /// Empty for the goal node.
    pub links: Vec<BackwardLink>,
    /// Primitive actions to the goal along the first link.
    pub depth: usize,
}

/// Successors of `node` for every crisp-applicable step.
///
/// Degrees are only grounded once the crisp gate has passed.
pub fn forward_expand(
    ev: &Evaluator<'_>,
    defs: &[StepDef<'_>],
    node: &ForwardNode,
    index: usize,
) -> Result<Vec<ForwardNode>, SearchError> {
    let mut out = Vec::new();
    for def in defs {
        let (next, step_mu) = match def {
            StepDef::Primitive(a) => {
                if applicability_failure(&node.state, a)?.is_some() {
                    continue;
                }
                let mu = ev.grounder.action_degree(ev.domain, ev.tnorm, &node.state, a)?;
                (apply(&node.state, a)?, mu)
            }
            StepDef::Macro(m) => match apply_macro(ev.domain, m, &node.state)? {
                Some(next) => (
                    next,
                    macro_membership(ev.domain, m, &node.state, ev.tnorm, ev.grounder)?,
                ),
                None => continue,
            },
        };
        let mu = tnorm(ev.tnorm, node.mu, step_mu);
        out.push(ForwardNode {
            state: next,
            mu,
            parent: Some(index),
            via: Some(def.step()),
            depth: node.depth + def.len(),
            steps: node.steps + 1,
            dead: mu.is_zero(),
        });
    }
    Ok(out)
}

/// Regressions of `node` through every relevant step, one link each.
pub fn backward_expand(
    ev: &Evaluator<'_>,
    defs: &[StepDef<'_>],
    node: &BackwardNode,
    index: usize,
    agg: BackwardAgg,
) -> Result<Vec<BackwardNode>, SearchError> {
    let budget = ev.problem.initial.time.budget;
    let available = budget.map(|b| b - ev.problem.initial.time.elapsed);
    let mut out = Vec::new();
    for def in defs {
        let action = def.action();
        if !node.condition.relevant(action) {
            continue;
        }
        let Some(condition) = node.condition.regress(action, &ev.domain.constraints, available) else {
            continue;
        };
        let pseudo = condition.pseudo_state(ev.domain, budget);
        let step_mu = match def {
            StepDef::Primitive(a) => ev.grounder.action_degree(ev.domain, ev.tnorm, &pseudo, a)?,
            StepDef::Macro(m) => macro_membership(ev.domain, m, &pseudo, ev.tnorm, ev.grounder)?,
        };
        let requirement = backward_requirement(agg, &[(step_mu, node.requirement)], ev.tnorm)?;
        out.push(BackwardNode {
            condition,
            requirement,
            links: vec![BackwardLink {
                successor: index,
                via: def.step(),
                step_mu,
                successor_req: node.requirement,
            }],
            depth: node.depth + def.len(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeetCandidate {
    pub forward: usize,
    pub backward: usize,
    pub distance: f64,
}

/// Pairs within `ε_D` (inclusive), nearest first, then higher forward `μ`.
pub fn find_meet_candidates(
    forward: &[(usize, &ForwardNode)],
    backward: &[(usize, &BackwardNode)],
    heuristic: &dyn Heuristic,
    epsilon_d: f64,
) -> Vec<MeetCandidate> {
    let mut out = Vec::new();
    for (fi, f) in forward {
        for (bi, b) in backward {
            let d = heuristic.distance(&f.state, &b.condition);
            if d <= epsilon_d {
                out.push((
                    f.mu,
                    MeetCandidate {
                        forward: *fi,
                        backward: *bi,
                        distance: d,
                    },
                ));
            }
        }
    }
    out.sort_by(|(ma, a), (mb, b)| {
        a.distance
            .total_cmp(&b.distance)
            .then(mb.value().total_cmp(&ma.value()))
    });
    out.into_iter().map(|(_, c)| c).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub forward_generated: usize,
    pub forward_expanded: usize,
    pub backward_generated: usize,
    pub backward_expanded: usize,
    pub meets_tested: usize,
    pub dominated: usize,
    pub beam_pruned: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub result: PlanResult,
    pub stats: SearchStats,
}

pub struct Planner<'a> {
    domain: &'a Domain,
    problem: &'a Problem,
    grounder: &'a Grounder,
    config: SearchConfig,
    macros: Vec<MacroAction>,
    alpha_config: AdaptiveAlphaConfig,
    trace: Option<Box<dyn Write + 'a>>,
}

impl<'a> Planner<'a> {
    pub fn new(
        domain: &'a Domain,
        problem: &'a Problem,
        grounder: &'a Grounder,
        config: SearchConfig,
    ) -> Result<Self, SearchError> {
        config.check()?;
        let macros = if config.chunking {
            let (macros, warnings) = build_macros(domain, config.max_chunk);
            for w in warnings {
                log::warn!("{w}");
            }
            macros
        } else {
            Vec::new()
        };
        Ok(Planner {
            domain,
            problem,
            grounder,
            config,
            macros,
            alpha_config: AdaptiveAlphaConfig::default(),
            trace: None,
        })
    }

    pub fn with_trace(mut self, sink: impl Write + 'a) -> Self {
        self.trace = Some(Box::new(sink));
        self
    }

    pub fn with_alpha_config(mut self, cfg: AdaptiveAlphaConfig) -> Self {
        self.alpha_config = cfg;
        self
    }

    pub fn macros(&self) -> &[MacroAction] {
        &self.macros
    }

    pub fn config(&self) -> &SearchConfig {
        &self.config
    }

    pub fn evaluator(&self) -> Evaluator<'_> {
        Evaluator::new(self.domain, self.problem, self.config.tnorm, self.grounder)
            .with_macros(&self.macros)
            .with_alpha_config(self.alpha_config)
    }

    /// Runs the search once; a trace sink is consumed by the first run.
    pub fn run(&mut self) -> Result<SearchOutcome, SearchError> {
        let mut trace = self.trace.take();
        let ev = self.evaluator();
        let defs = step_defs(self.domain, &self.macros);
        let mut search = Search::new(ev, defs, &self.config, trace.as_deref_mut());
        let result = search.run()?;
        let stats = search.stats;
        drop(search);
        if let Some(t) = trace.as_mut() {
            t.flush()?;
        }
        Ok(SearchOutcome { result, stats })
    }
}

/// Runs the bidirectional planner with default adaptive-α constants and no trace.
pub fn bidirectional_plan(
    domain: &Domain,
    problem: &Problem,
    config: &SearchConfig,
    grounder: &Grounder,
) -> Result<PlanResult, SearchError> {
    Ok(Planner::new(domain, problem, grounder, config.clone())?.run()?.result)
}

fn ordered(x: f64) -> u64 {
    // non-negative finite floats order like their bit patterns
    x.max(0.0).to_bits()
}

const PRIORITY_SAMPLE: usize = 64;

struct Search<'e, 't> {
    ev: Evaluator<'e>,
    defs: Vec<StepDef<'e>>,
    cfg: &'e SearchConfig,
    forward: Vec<ForwardNode>,
    backward: Vec<BackwardNode>,
    forward_open: BTreeMap<(u64, u64, u64), usize>,
    backward_open: BTreeMap<(u64, u64), usize>,
    seen: HashMap<String, Vec<usize>>,
    conditions: HashMap<String, usize>,
    seq: u64,
    stats: SearchStats,
    forward_beam_hit: bool,
    depth_cut: bool,
    /// Some node was dropped because no extension could reach the threshold.
    alpha_cut: bool,
    loosest: Degree,
    best_rejected: Option<PlanResult>,
    trace: Option<&'t mut (dyn Write + 'e)>,
}

impl<'e, 't> Search<'e, 't> {
    fn new(
        ev: Evaluator<'e>,
        defs: Vec<StepDef<'e>>,
        cfg: &'e SearchConfig,
        trace: Option<&'t mut (dyn Write + 'e)>,
    ) -> Self {
        let loosest = ev.problem.alpha.loosest(cfg.max_depth, &ev.alpha_config);
        Search {
            ev,
            defs,
            cfg,
            forward: Vec::new(),
            backward: Vec::new(),
            forward_open: BTreeMap::new(),
            backward_open: BTreeMap::new(),
            seen: HashMap::new(),
            conditions: HashMap::new(),
            seq: 0,
            stats: SearchStats::default(),
            forward_beam_hit: false,
            depth_cut: false,
            alpha_cut: false,
            loosest,
            best_rejected: None,
            trace,
        }
    }

    fn run(&mut self) -> Result<PlanResult, SearchError> {
        let root = Condition::from_goal(&self.ev.problem.goal);
        self.backward.push(BackwardNode {
            condition: root.clone(),
            requirement: self.loosest,
            links: Vec::new(),
            depth: 0,
        });
        self.conditions.insert(root.key(), 0);
        self.stats.backward_generated += 1;
        self.trace_backward(0)?;
        if self.cfg.max_depth > 0 {
            let seq = self.next_seq();
            self.backward_open.insert((ordered(self.loosest.value()), seq), 0);
        }

        if let Some(found) = self.push_forward(ForwardNode::root(self.ev.problem.initial.clone()))? {
            return Ok(found);
        }
        loop {
            let mut progressed = false;
            if let Some((_, idx)) = self.forward_open.pop_first() {
                progressed = true;
                self.stats.forward_expanded += 1;
                let children = forward_expand(&self.ev, &self.defs, &self.forward[idx], idx)?;
                for child in children {
                    if child.depth > self.cfg.max_depth {
                        self.depth_cut = true;
                        continue;
                    }
                    if let Some(found) = self.push_forward(child)? {
                        return Ok(found);
                    }
                }
            }
            if self.forward_open.is_empty() && !self.forward_beam_hit {
                // forward side was exhaustive: nothing more to find
                break;
            }
            if let Some((_, idx)) = self.backward_open.pop_first() {
                progressed = true;
                self.stats.backward_expanded += 1;
                let children = backward_expand(&self.ev, &self.defs, &self.backward[idx], idx, self.cfg.backward_agg)?;
                for child in children {
                    if child.depth > self.cfg.max_depth {
                        continue;
                    }
                    if let Some(found) = self.push_backward(child)? {
                        return Ok(found);
                    }
                }
            }
            if !progressed {
                break;
            }
        }
        Ok(self.failure())
    }

    fn failure(&mut self) -> PlanResult {
        if let Some(r) = self.best_rejected.take() {
            return r;
        }
        let reason = if self.alpha_cut {
            FailureReason::BelowAlpha
        } else if self.depth_cut {
            FailureReason::DepthBound
        } else {
            FailureReason::FrontierExhausted
        };
        PlanResult::failure(reason, self.ev.alpha_for(0))
    }

    fn next_seq(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }

    fn dominated(&self, node: &ForwardNode, key: &str) -> bool {
        let fixed = matches!(self.ev.problem.alpha, crate::acceptance::AlphaPolicy::Fixed { .. });
        self.seen.get(key).is_some_and(|ids| {
            ids.iter().any(|&i| {
                let n = &self.forward[i];
                n.mu >= node.mu && n.depth <= node.depth && (fixed || n.steps == node.steps)
            })
        })
    }

    fn push_forward(&mut self, node: ForwardNode) -> Result<Option<PlanResult>, SearchError> {
        let key = node.state.identity_key();
        if self.dominated(&node, &key) {
            self.stats.dominated += 1;
            return Ok(None);
        }
        let idx = self.forward.len();
        self.forward.push(node);
        self.seen.entry(key).or_default().push(idx);
        self.stats.forward_generated += 1;

        let priority = self.forward_priority(idx);
        self.trace_forward(idx, priority)?;

        if goal_satisfied(&self.forward[idx].state, &self.ev.problem.goal) {
            let steps = self.forward_path(idx);
            let r = self.ev.validate_steps(&steps)?;
            if r.accepted {
                return Ok(Some(r));
            }
            self.note_rejected(r);
        }
        let backward: Vec<usize> = (1..self.backward.len()).collect();
        if let Some(found) = self.try_meets(&[idx], &backward)? {
            return Ok(Some(found));
        }

        let node = &self.forward[idx];
        let below = node.mu < self.loosest || (node.dead && !self.loosest.is_zero());
        if below {
            self.alpha_cut = true;
            return Ok(None);
        }
        if node.depth >= self.cfg.max_depth {
            self.depth_cut = true;
            return Ok(None);
        }
        let mu_key = u64::MAX - ordered(node.mu.value());
        let seq = self.next_seq();
        self.forward_open.insert((ordered(priority), mu_key, seq), idx);
        if self.forward_open.len() > self.cfg.forward_beam {
            self.forward_open.pop_last();
            self.stats.beam_pruned += 1;
            self.forward_beam_hit = true;
        }
        Ok(None)
    }

    fn forward_priority(&self, idx: usize) -> f64 {
        let state = &self.forward[idx].state;
        self.backward
            .iter()
            .take(PRIORITY_SAMPLE)
            .map(|b| self.cfg.weights.distance(state, &b.condition))
            .fold(f64::INFINITY, f64::min)
    }

    fn push_backward(&mut self, node: BackwardNode) -> Result<Option<PlanResult>, SearchError> {
        let key = node.condition.key();
        if let Some(&existing) = self.conditions.get(&key) {
            let link = node.links.into_iter().next().expect("expanded nodes carry a link");
            if self.backward[link.successor].depth < self.backward[existing].depth {
                let target = &mut self.backward[existing];
                target.links.push(link);
                let cands: Vec<(Degree, Degree)> = target.links.iter().map(|l| (l.step_mu, l.successor_req)).collect();
                target.requirement = backward_requirement(self.cfg.backward_agg, &cands, self.ev.tnorm)?;
            }
            return Ok(None);
        }
        let idx = self.backward.len();
        self.backward.push(node);
        self.conditions.insert(key, idx);
        self.stats.backward_generated += 1;
        self.trace_backward(idx)?;

        let forward: Vec<usize> = (0..self.forward.len()).collect();
        if let Some(found) = self.try_meets(&forward, &[idx])? {
            return Ok(Some(found));
        }
        let node = &self.backward[idx];
        if node.depth < self.cfg.max_depth {
            let key = (ordered(node.requirement.value()), self.next_seq());
            self.backward_open.insert(key, idx);
            if self.backward_open.len() > self.cfg.backward_beam {
                self.backward_open.pop_last();
                self.stats.beam_pruned += 1;
            }
        }
        Ok(None)
    }

    fn try_meets(&mut self, forward: &[usize], backward: &[usize]) -> Result<Option<PlanResult>, SearchError> {
        if forward.is_empty() || backward.is_empty() {
            return Ok(None);
        }
        let f: Vec<(usize, &ForwardNode)> = forward.iter().map(|&i| (i, &self.forward[i])).collect();
        let b: Vec<(usize, &BackwardNode)> = backward.iter().map(|&i| (i, &self.backward[i])).collect();
        let candidates = find_meet_candidates(&f, &b, &self.cfg.weights, self.cfg.epsilon_d);
        for c in candidates {
            self.stats.meets_tested += 1;
            let fnode = &self.forward[c.forward];
            let bnode = &self.backward[c.backward];
            if fnode.mu < bnode.requirement {
                continue;
            }
            let (suffix, suffix_len) = self.suffix(c.backward);
            if fnode.depth + suffix_len > self.cfg.max_depth {
                continue;
            }
            let merge = pullback_compatible(&self.ev, &fnode.state, &bnode.condition, fnode.mu, &suffix)?;
            if !merge.compatible {
                continue;
            }
            let mut steps = self.forward_path(c.forward);
            steps.extend(suffix);
            let r = self.ev.validate_steps(&steps)?;
            if r.accepted {
                return Ok(Some(r));
            }
            self.note_rejected(r);
        }
        Ok(None)
    }

    fn note_rejected(&mut self, r: PlanResult) {
        let better = match &self.best_rejected {
            None => true,
            Some(best) => {
                r.plan_mu > best.plan_mu || (r.plan_mu == best.plan_mu && r.actions.len() < best.actions.len())
            }
        };
        if better {
            self.best_rejected = Some(r);
        }
    }

    fn forward_path(&self, mut idx: usize) -> Vec<PlanStep> {
        let mut out = Vec::new();
        while let Some(step) = &self.forward[idx].via {
            out.push(step.clone());
            idx = self.forward[idx].parent.expect("non-root nodes have parents");
        }
        out.reverse();
        out
    }

    /// Steps from a backward node to the goal, following the weakest-requirement link.
    fn suffix(&self, mut idx: usize) -> (Vec<PlanStep>, usize) {
        let mut out = Vec::new();
        let mut len = 0;
        loop {
            let node = &self.backward[idx];
            let Some(best) = node.links.iter().min_by(|a, b| {
                residuum(self.ev.tnorm, a.step_mu, a.successor_req)
                    .value()
                    .total_cmp(&residuum(self.ev.tnorm, b.step_mu, b.successor_req).value())
            }) else {
                break;
            };
            len += match &best.via {
                PlanStep::Primitive(_) => 1,
                PlanStep::Macro(id) => self.ev.find_macro(id).map_or(1, |m| m.members.len()),
            };
            out.push(best.via.clone());
            idx = best.successor;
        }
        (out, len)
    }

    fn trace_forward(&mut self, idx: usize, priority: f64) -> Result<(), SearchError> {
        if let Some(t) = self.trace.as_mut() {
            let n = &self.forward[idx];
            let line = json!({
                "id": idx,
                "direction": "forward",
                "mu": n.mu.value(),
                "priority": if priority.is_finite() { Some(priority) } else { None },
                "parent": n.parent,
                "via": n.via.as_ref().map(step_label),
                "depth": n.depth,
                "dead": n.dead,
            });
            writeln!(t, "{line}")?;
        }
        Ok(())
    }

    fn trace_backward(&mut self, idx: usize) -> Result<(), SearchError> {
        if let Some(t) = self.trace.as_mut() {
            let n = &self.backward[idx];
            let line = json!({
                "id": idx,
                "direction": "backward",
                "requirement": n.requirement.value(),
                "priority": n.requirement.value(),
                "parent": n.links.first().map(|l| l.successor),
                "via": n.links.first().map(|l| step_label(&l.via)),
                "depth": n.depth,
            });
            writeln!(t, "{line}")?;
        }
        Ok(())
    }
}

fn step_label(step: &PlanStep) -> String {
    match step {
        PlanStep::Primitive(id) => id.clone(),
        PlanStep::Macro(id) => format!("[{id}]"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acceptance::AlphaPolicy;
    use crate::grounding::{make_table_oracle, AggregationPolicy, OracleSpec, VaguePredicate};
    use crate::world::{facts, Goal, LogicalConstraints, ResourceDecl, TemporalBudget};
    use std::collections::HashMap;
    use std::sync::Arc;

    fn d(v: f64) -> Degree {
        Degree::new(v).unwrap()
    }

    fn graded(id: &str, requires: &[&str], adds: &[&str]) -> Action {
        let mut a = Action::new(id);
        a.required_facts = facts(requires.iter().copied());
        a.add_facts = facts(adds.iter().copied());
        a.graded_predicates = vec!["ok".into()];
        a
    }

    fn domain(actions: Vec<Action>) -> Domain {
        Domain {
            name: "t".into(),
            resources: vec![ResourceDecl {
                name: "fuel".into(),
                unit: "l".into(),
            }],
            fact_predicates: Vec::new(),
            predicates: vec![VaguePredicate::new("ok", "")],
            constraints: LogicalConstraints::default(),
            actions,
            macro_estimates: BTreeMap::new(),
            oracle: OracleSpec::default(),
        }
    }

    fn problem(domain: &Domain, goal: &[&str], alpha: f64) -> Problem {
        Problem {
            name: "p".into(),
            initial: domain.state(&BTreeMap::new(), facts(["start"]), TemporalBudget::unbounded()),
            goal: Goal {
                required_facts: facts(goal.iter().copied()),
                ..Default::default()
            },
            alpha: AlphaPolicy::fixed(alpha),
            meta: BTreeMap::new(),
        }
    }

    fn grounder(table: &[(&str, f64)]) -> Grounder {
        let t: HashMap<(String, String), Degree> = table
            .iter()
            .map(|(a, v)| (("ok".to_string(), a.to_string()), d(*v)))
            .collect();
        Grounder::new(
            Arc::new(make_table_oracle(t, 0.0, 0, d(0.5), true)),
            AggregationPolicy::default(),
            7,
        )
    }

    #[test]
    fn forward_expand_examples() {
        let mut dry = graded("dry", &["start"], &["x"]);
        dry.resource_needs.insert("fuel".into(), 1.0);
        let dom = domain(vec![
            graded("a", &["start"], &["x"]),
            graded("b", &["start"], &["y"]),
            dry,
        ]);
        let p = problem(&dom, &["x"], 0.5);
        let g = grounder(&[("a", 0.8), ("b", 0.3), ("dry", 1.0)]);
        let ev = Evaluator::new(&dom, &p, TNormKind::Lukasiewicz, &g);
        let defs = step_defs(&dom, &[]);

        let root = ForwardNode::root(p.initial.clone());
        let kids = forward_expand(&ev, &defs, &root, 0).unwrap();
        assert_eq!(kids.len(), 2, "infeasible action never produces a child");
        assert!((kids[0].mu.value() - 0.8).abs() < 1e-12);

        let mut node = root.clone();
        node.mu = d(0.6);
        let kids = forward_expand(&ev, &defs, &node, 0).unwrap();
        let b = kids
            .iter()
            .find(|k| k.via == Some(PlanStep::Primitive("b".into())))
            .unwrap();
        assert!(b.mu.is_zero() && b.dead);
    }

    #[test]
    fn backward_expand_examples() {
        let dom = domain(vec![
            graded("a", &["start"], &["goal"]),
            graded("b", &["start"], &["goal"]),
        ]);
        let p = problem(&dom, &["goal"], 0.8);
        let g = grounder(&[("a", 0.9), ("b", 0.7)]);
        let ev = Evaluator::new(&dom, &p, TNormKind::Lukasiewicz, &g);
        let defs = step_defs(&dom, &[]);
        let root = BackwardNode {
            condition: Condition::from_goal(&p.goal),
            requirement: d(0.8),
            links: Vec::new(),
            depth: 0,
        };
        let kids = backward_expand(&ev, &defs, &root, 0, BackwardAgg::Max).unwrap();
        assert_eq!(kids.len(), 2);
        assert!((kids[0].requirement.value() - 0.9).abs() < 1e-12);
        assert_eq!(kids[1].requirement, Degree::ONE);
        assert_eq!(kids[0].condition.required_facts, facts(["start"]));
    }

    #[test]
    fn meet_candidates_are_ordered_and_inclusive() {
        let s = |f: &[&str], mu: f64| ForwardNode {
            mu: d(mu),
            ..ForwardNode::root(State::new(BTreeMap::new(), facts(f.iter().copied())))
        };
        let b = BackwardNode {
            condition: Condition {
                required_facts: facts(["a", "b", "c", "e"]),
                ..Default::default()
            },
            requirement: d(0.9),
            links: Vec::new(),
            depth: 0,
        };
        let exact = s(&["a", "b", "c", "e"], 0.6);
        let near = s(&["a", "b", "c"], 0.9);
        let nearer = s(&["a", "b", "c"], 0.95);
        let far = s(&["z"], 1.0);
        let w = DistanceWeights::new(1.0, 0.0, 0.0, 0.0).unwrap();
        // {a,b,c} vs {a,b,c,e}: 1 - 3/4
        let eps = 0.25;
        let f = [(0, &near), (1, &exact), (2, &far), (3, &nearer)];
        let c = find_meet_candidates(&f, &[(0, &b)], &w, eps);
        let order: Vec<usize> = c.iter().map(|m| m.forward).collect();
        assert_eq!(order, vec![1, 3, 0]);
        assert_eq!(c[0].distance, 0.0);
        assert_eq!(c[1].distance, eps);
        // requirement check happens downstream
        assert!(exact.mu < b.requirement);
    }

    #[test]
    fn single_action_plans() {
        let dom = domain(vec![graded("go", &["start"], &["done"])]);
        let g = grounder(&[("go", 0.9)]);
        let p = problem(&dom, &["done"], 0.8);
        let r = bidirectional_plan(&dom, &p, &SearchConfig::default(), &g).unwrap();
        assert!(r.accepted);
        assert_eq!(r.actions, vec!["go".to_string()]);
        assert!((r.plan_mu.value() - 0.9).abs() < 1e-12);

        let p = problem(&dom, &["done"], 0.95);
        let r = bidirectional_plan(&dom, &p, &SearchConfig::default(), &g).unwrap();
        assert!(!r.accepted);
        assert_eq!(r.failure_reason, Some(FailureReason::BelowAlpha));
    }

    #[test]
    fn threshold_pruning_reports_below_alpha() {
        let dom = domain(vec![
            graded("a", &["start"], &["mid"]),
            graded("b", &["mid"], &["done"]),
        ]);
        let g = grounder(&[("a", 0.9), ("b", 1.0)]);
        let p = problem(&dom, &["done"], 1.0);
        let r = bidirectional_plan(&dom, &p, &SearchConfig::default(), &g).unwrap();
        assert!(!r.accepted);
        assert!(r.actions.is_empty());
        assert_eq!(r.failure_reason, Some(FailureReason::BelowAlpha));
    }

    #[test]
    fn unreachable_goal_exhausts() {
        let mut go = graded("go", &["start"], &["done"]);
        go.del_facts = facts(["start"]);
        let dom = domain(vec![go]);
        let g = grounder(&[("go", 0.9)]);
        let p = problem(&dom, &["elsewhere"], 0.5);
        let r = bidirectional_plan(&dom, &p, &SearchConfig::default(), &g).unwrap();
        assert_eq!(r.failure_reason, Some(FailureReason::FrontierExhausted));
        let b = brute_force_plan(&dom, &p, &p.alpha, TNormKind::Lukasiewicz, &g, 4).unwrap();
        assert_eq!(b.failure_reason, Some(FailureReason::FrontierExhausted));
    }

    #[test]
    fn depth_bound_is_reported() {
        let mut step = graded("tick", &[], &[]);
        step.resource_deltas.insert("fuel".into(), 1.0);
        let dom = domain(vec![step]);
        let g = grounder(&[("tick", 1.0)]);
        let p = problem(&dom, &["never"], 0.5);
        let cfg = SearchConfig {
            max_depth: 3,
            ..Default::default()
        };
        let r = bidirectional_plan(&dom, &p, &cfg, &g).unwrap();
        assert_eq!(r.failure_reason, Some(FailureReason::DepthBound));
    }

    #[test]
    fn brute_force_examples() {
        let dom = domain(vec![
            graded("a", &["start"], &["mid"]),
            graded("b", &["mid"], &["done"]),
            graded("c", &["start"], &["done"]),
        ]);
        let g = grounder(&[("a", 1.0), ("b", 1.0), ("c", 0.7)]);
        let p = problem(&dom, &[], 0.5);
        let r = brute_force_plan(&dom, &p, &p.alpha, TNormKind::Lukasiewicz, &g, 4).unwrap();
        assert!(r.accepted && r.actions.is_empty() && r.plan_mu == Degree::ONE);

        let p = problem(&dom, &["done"], 0.5);
        let r = brute_force_plan(&dom, &p, &p.alpha, TNormKind::Lukasiewicz, &g, 4).unwrap();
        assert_eq!(r.actions, vec!["a".to_string(), "b".to_string()]);
        assert_eq!(r.plan_mu, Degree::ONE);
        let ev = Evaluator::new(&dom, &p, TNormKind::Lukasiewicz, &g);
        let v = crate::acceptance::validate(&ev, &r.actions, &[]).unwrap();
        assert!(v.accepted && v.violations.is_empty());
        assert_eq!(v.plan_mu, r.plan_mu);

        let r = bidirectional_plan(&dom, &p, &SearchConfig::default(), &g).unwrap();
        assert!(r.accepted);
    }

    #[test]
    fn node_cap_is_an_error() {
        let mut step = graded("tick", &[], &[]);
        step.resource_deltas.insert("fuel".into(), 1.0);
        let dom = domain(vec![
            step.clone(),
            Action {
                id: "tock".into(),
                ..step
            },
        ]);
        let g = grounder(&[("tick", 1.0), ("tock", 1.0)]);
        let p = problem(&dom, &["never"], 0.5);
        let r = brute_force_plan_capped(&dom, &p, &p.alpha, TNormKind::Lukasiewicz, &g, 12, 100);
        assert!(matches!(r, Err(SearchError::NodeCap(100))));
    }

    #[test]
    fn stitched_plans_come_from_meets() {
        // a chain long enough that the backward side meets the forward side
        let dom = domain(vec![
            graded("s1", &["start"], &["p1"]),
            graded("s2", &["p1"], &["p2"]),
            graded("s3", &["p2"], &["p3"]),
            graded("s4", &["p3"], &["done"]),
        ]);
        let g = grounder(&[("s1", 0.98), ("s2", 0.98), ("s3", 0.98), ("s4", 0.98)]);
        let p = problem(&dom, &["done"], 0.5);
        let cfg = SearchConfig {
            epsilon_d: 1.0,
            ..Default::default()
        };
        let mut planner = Planner::new(&dom, &p, &g, cfg).unwrap();
        let out = planner.run().unwrap();
        assert!(out.result.accepted);
        assert_eq!(out.result.actions, vec!["s1", "s2", "s3", "s4"]);
        assert!(out.stats.meets_tested > 0);
    }

    #[test]
    fn trace_lines_are_json() {
        let dom = domain(vec![graded("go", &["start"], &["done"])]);
        let g = grounder(&[("go", 0.9)]);
        let p = problem(&dom, &["done"], 0.8);
        let mut buf = Vec::new();
        {
            let mut planner = Planner::new(&dom, &p, &g, SearchConfig::default())
                .unwrap()
                .with_trace(&mut buf);
            planner.run().unwrap();
        }
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert!(lines.iter().any(|l| l["direction"] == "forward"));
        assert!(lines.iter().any(|l| l["direction"] == "backward"));
    }

    #[test]
    fn repeated_runs_are_identical() {
        let dom = domain(vec![
            graded("a", &["start"], &["mid"]),
            graded("b", &["mid"], &["done"]),
            graded("c", &["start"], &["done"]),
        ]);
        let p = problem(&dom, &["done"], 0.6);
        let plan = || {
            let g = grounder(&[("a", 0.9), ("b", 0.9), ("c", 0.75)]);
            bidirectional_plan(&dom, &p, &SearchConfig::default(), &g).unwrap()
        };
        assert_eq!(plan(), plan());
    }
}
