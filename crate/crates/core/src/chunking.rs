//! Macro actions over short chains of same-tag actions.
//!
//! A macro counts as a single composition step, so under a nilpotent t-norm a
//! chunked plan degrades over fewer factors than its primitive expansion.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::fuzzy::{Degree, TNormKind};
use crate::grounding::{Grounder, GroundingError};
use crate::world::{apply, Action, Domain, FactSet, State, WorldError};

pub const DEFAULT_MAX_CHUNK: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MembershipSource {
    OracleQuery,
    EmpiricalEstimate(Degree),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacroAction {
    pub id: String,
    pub members: Vec<String>,
    pub source: MembershipSource,
    /// Net crisp semantics of the member sequence. Its graded predicates are
    /// the union of the members', grounded against the macro id.
    pub composite: Action,
}

impl MacroAction {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

pub fn macro_id(members: &[String]) -> String {
    members.join("+")
}

/// Symbolic sequential composition of `members`; `Err` names the first conflict.
pub fn compose(id: &str, members: &[&Action]) -> Result<Action, String> {
    let mut added = FactSet::new();
    let mut deleted = FactSet::new();
    let mut required = FactSet::new();
    let mut forbidden = FactSet::new();
    let mut cum: BTreeMap<String, f64> = BTreeMap::new();
    let mut needs: BTreeMap<String, f64> = BTreeMap::new();
    let mut duration = 0.0;
    let mut predicates: Vec<String> = Vec::new();

    for m in members {
        for f in &m.required_facts {
            if added.contains(f) {
                continue;
            }
            if deleted.contains(f) {
                return Err(format!("`{}` requires `{f}`, deleted earlier in the chain", m.id));
            }
            required.insert(f.clone());
        }
        for f in &m.forbidden_facts {
            if added.contains(f) {
                return Err(format!("`{}` forbids `{f}`, added earlier in the chain", m.id));
            }
            if !deleted.contains(f) {
                forbidden.insert(f.clone());
            }
        }
        for (r, need) in &m.resource_needs {
            let before = cum.get(r).copied().unwrap_or(0.0);
            let e = needs.entry(r.clone()).or_insert(0.0);
            *e = e.max(need - before);
        }
        for (r, delta) in &m.resource_deltas {
            let c = cum.entry(r.clone()).or_insert(0.0);
            *c += delta;
            let floor = -*c;
            let e = needs.entry(r.clone()).or_insert(0.0);
            *e = e.max(floor);
        }
        for f in &m.del_facts {
            added.remove(f);
            deleted.insert(f.clone());
        }
        for f in &m.add_facts {
            deleted.remove(f);
            added.insert(f.clone());
        }
        duration += m.duration;
        for p in &m.graded_predicates {
            if !predicates.contains(p) {
                predicates.push(p.clone());
            }
        }
    }
    if let Some(f) = required.intersection(&forbidden).next() {
        return Err(format!("chain both requires and forbids `{f}`"));
    }
    let mut composite = Action::new(id);
    composite.resource_needs = needs.into_iter().filter(|(_, v)| *v > 0.0).collect();
    composite.resource_deltas = cum;
    composite.required_facts = required;
    composite.forbidden_facts = forbidden;
    composite.add_facts = added;
    composite.del_facts = deleted;
    composite.duration = duration;
    composite.graded_predicates = predicates;
    composite.chunk_tag = members.first().and_then(|m| m.chunk_tag.clone());
    composite.goal_relevant = members.iter().any(|m| m.goal_relevant);
    Ok(composite)
}

fn enables(first: &Action, second: &Action) -> bool {
    !first.add_facts.is_disjoint(&second.required_facts)
}

/// Builds macros from causal chains (each member requires a fact the previous
/// one adds) of 2..=`c_max` actions sharing a chunk tag. Returns the macros and
/// warnings for skipped chains.
pub fn build_macros(domain: &Domain, c_max: usize) -> (Vec<MacroAction>, Vec<String>) {
    let mut macros = Vec::new();
    let mut warnings = Vec::new();
    if c_max < 2 {
        return (macros, warnings);
    }
    let mut tags: Vec<&str> = Vec::new();
    for a in &domain.actions {
        if let Some(t) = a.chunk_tag.as_deref() {
            if !tags.contains(&t) {
                tags.push(t);
            }
        }
    }
    for tag in tags {
        let group: Vec<&Action> = domain
            .actions
            .iter()
            .filter(|a| a.chunk_tag.as_deref() == Some(tag))
            .collect();
        for start in 0..group.len() {
            let mut chain = vec![start];
            extend(domain, &group, &mut chain, c_max, &mut macros, &mut warnings);
        }
    }
    (macros, warnings)
}

fn extend(
    domain: &Domain,
    group: &[&Action],
    chain: &mut Vec<usize>,
    c_max: usize,
    macros: &mut Vec<MacroAction>,
    warnings: &mut Vec<String>,
) {
    if chain.len() == c_max {
        return;
    }
    let last = group[*chain.last().unwrap()];
    for next in 0..group.len() {
        if !enables(last, group[next]) {
            continue;
        }
        if chain.contains(&next) {
            warnings.push(format!(
                "tag cycle through `{}` in chunk `{}`; chain skipped",
                group[next].id,
                last.chunk_tag.as_deref().unwrap_or_default()
            ));
            continue;
        }
        chain.push(next);
        let members: Vec<&Action> = chain.iter().map(|&i| group[i]).collect();
        let ids: Vec<String> = members.iter().map(|a| a.id.clone()).collect();
        let id = macro_id(&ids);
        match compose(&id, &members) {
            Ok(composite) => {
                let source = match domain.macro_estimates.get(&id) {
                    Some(d) => MembershipSource::EmpiricalEstimate(*d),
                    None => MembershipSource::OracleQuery,
                };
                macros.push(MacroAction {
                    id,
                    members: ids,
                    source,
                    composite,
                });
                extend(domain, group, chain, c_max, macros, warnings);
            }
            Err(why) => warnings.push(format!("chain `{id}` is not composable: {why}")),
        }
        chain.pop();
    }
}

/// Degree of one macro step in `state`.
pub fn macro_membership(
    domain: &Domain,
    mac: &MacroAction,
    state: &State,
    kind: TNormKind,
    grounder: &Grounder,
) -> Result<Degree, GroundingError> {
    match mac.source {
        MembershipSource::EmpiricalEstimate(d) => Ok(d),
        MembershipSource::OracleQuery => grounder.action_degree(domain, kind, state, &mac.composite),
    }
}

/// Replays the members one by one; `Ok(None)` if some member is not crisp-applicable.
pub fn apply_macro(domain: &Domain, mac: &MacroAction, state: &State) -> Result<Option<State>, WorldError> {
    let mut cur = state.clone();
    for id in &mac.members {
        let action = domain.action(id).ok_or_else(|| WorldError::NotApplicable {
            action: id.clone(),
            reason: "unknown member action".into(),
        })?;
        if !crate::world::crisp_applicable(&cur, action)? {
            return Ok(None);
        }
        cur = apply(&cur, action)?;
    }
    Ok(Some(cur))
}

/// Number of composition steps for a plan of `n` primitives using macros of the given sizes.
pub fn composition_length(n: usize, macro_sizes: &[usize]) -> usize {
    n - macro_sizes.iter().map(|s| s - 1).sum::<usize>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuzzy::plan_membership;
    use crate::grounding::{make_table_oracle, AggregationPolicy, OracleSpec, VaguePredicate};
    use crate::world::{facts, LogicalConstraints, ResourceDecl};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn d(v: f64) -> Degree {
        Degree::new(v).unwrap()
    }

    fn domain(actions: Vec<Action>) -> Domain {
        Domain {
            name: "t".into(),
            resources: vec![ResourceDecl {
                name: "flour".into(),
                unit: "cup".into(),
            }],
            fact_predicates: vec![],
            predicates: vec![VaguePredicate::new("ok", "")],
            constraints: LogicalConstraints::default(),
            actions,
            macro_estimates: BTreeMap::new(),
            oracle: OracleSpec::default(),
        }
    }

    fn step(id: &str, req: &[&str], add: &[&str], tag: Option<&str>) -> Action {
        let mut a = Action::new(id);
        a.required_facts = facts(req.iter().copied());
        a.add_facts = facts(add.iter().copied());
        a.chunk_tag = tag.map(str::to_string);
        a.graded_predicates = vec!["ok".into()];
        a
    }

    #[test]
    fn tagged_chain_becomes_macro() {
        let dom = domain(vec![
            step("a1", &[], &["mixed"], Some("mix")),
            step("a2", &["mixed"], &["dough"], Some("mix")),
        ]);
        let (macros, warnings) = build_macros(&dom, 3);
        assert!(warnings.is_empty());
        assert_eq!(macros.len(), 1);
        assert_eq!(macros[0].members, vec!["a1", "a2"]);
        assert_eq!(macros[0].id, "a1+a2");
        assert_eq!(macros[0].composite.add_facts, facts(["mixed", "dough"]));
        assert!(macros[0].composite.required_facts.is_empty());
    }

    #[test]
    fn untagged_actions_give_no_macros() {
        let dom = domain(vec![
            step("a1", &[], &["mixed"], None),
            step("a2", &["mixed"], &["dough"], None),
        ]);
        assert!(build_macros(&dom, 3).0.is_empty());
    }

    #[test]
    fn non_composable_chain_is_skipped_with_warning() {
        let mut a1 = step("a1", &[], &["mixed"], Some("mix"));
        a1.del_facts = facts(["bowl"]);
        let a2 = step("a2", &["mixed", "bowl"], &["dough"], Some("mix"));
        let (macros, warnings) = build_macros(&domain(vec![a1, a2]), 3);
        assert!(macros.is_empty());
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn chains_respect_c_max() {
        let dom = domain(vec![
            step("a", &[], &["x"], Some("t")),
            step("b", &["x"], &["y"], Some("t")),
            step("c", &["y"], &["z"], Some("t")),
            step("e", &["z"], &["w"], Some("t")),
        ]);
        let ids: Vec<String> = build_macros(&dom, 3).0.into_iter().map(|m| m.id).collect();
        assert_eq!(ids, vec!["a+b", "a+b+c", "b+c", "b+c+e", "c+e"]);
        assert_eq!(build_macros(&dom, 2).0.len(), 3);
        assert!(build_macros(&dom, 1).0.is_empty());
    }

    #[test]
    fn cycles_are_reported() {
        let dom = domain(vec![
            step("a", &["y"], &["x"], Some("t")),
            step("b", &["x"], &["y"], Some("t")),
        ]);
        let (macros, warnings) = build_macros(&dom, 3);
        assert_eq!(macros.len(), 2);
        assert!(warnings.iter().any(|w| w.contains("cycle")));
    }

    #[test]
    fn empirical_estimate_is_used() {
        let mut dom = domain(vec![
            step("a1", &[], &["mixed"], Some("mix")),
            step("a2", &["mixed"], &["dough"], Some("mix")),
        ]);
        dom.macro_estimates.insert("a1+a2".into(), d(0.85));
        let (macros, _) = build_macros(&dom, 3);
        let g = Grounder::new(
            Arc::new(make_table_oracle(Default::default(), 0.0, 0, d(0.1), false)),
            AggregationPolicy::default(),
            0,
        );
        let s = dom.state(&BTreeMap::new(), FactSet::new(), Default::default());
        let m = macro_membership(&dom, &macros[0], &s, TNormKind::Lukasiewicz, &g).unwrap();
        assert_eq!(m.value(), 0.85);
    }

    #[test]
    fn oracle_macro_degree_replaces_two_factors() {
        let dom = domain(vec![
            step("a1", &[], &["mixed"], Some("mix")),
            step("a2", &["mixed"], &["dough"], Some("mix")),
        ]);
        let (macros, _) = build_macros(&dom, 3);
        let table = [
            (("ok".to_string(), "a1".to_string()), d(0.8)),
            (("ok".to_string(), "a2".to_string()), d(0.8)),
            (("ok".to_string(), "a1+a2".to_string()), d(0.85)),
        ]
        .into_iter()
        .collect();
        let g = Grounder::new(
            Arc::new(make_table_oracle(table, 0.0, 0, d(0.5), true)),
            AggregationPolicy::default(),
            0,
        );
        let s = dom.state(&BTreeMap::new(), FactSet::new(), Default::default());
        let chunked = macro_membership(&dom, &macros[0], &s, TNormKind::Lukasiewicz, &g).unwrap();
        let a1 = g
            .action_degree(&dom, TNormKind::Lukasiewicz, &s, dom.action("a1").unwrap())
            .unwrap();
        let s1 = apply(&s, dom.action("a1").unwrap()).unwrap();
        let a2 = g
            .action_degree(&dom, TNormKind::Lukasiewicz, &s1, dom.action("a2").unwrap())
            .unwrap();
        let unchunked = plan_membership(TNormKind::Lukasiewicz, [a1, a2]);
        assert_eq!(chunked.value(), 0.85);
        assert!((unchunked.value() - 0.6).abs() < 1e-12);
        assert!(chunked > unchunked);
    }

    #[test]
    fn length_reduction() {
        assert_eq!(composition_length(9, &[3, 3, 3]), 3);
        assert_eq!(composition_length(7, &[2]), 6);
        assert_eq!(composition_length(4, &[]), 4);
    }

    // Random member chains over a small atom/resource universe.
    fn arb_action(idx: usize) -> impl Strategy<Value = Action> {
        let atoms = ["p", "q", "r", "s"];
        (
            prop::collection::vec(0usize..4, 0..2),
            prop::collection::vec(0usize..4, 0..2),
            prop::collection::vec(0usize..4, 0..2),
            prop::collection::vec(0usize..4, 0..2),
            0.0f64..2.0,
            -2.0f64..2.0,
            0.0f64..3.0,
        )
            .prop_map(move |(req, forb, add, del, need, delta, dur)| {
                let mut a = Action::new(format!("m{idx}"));
                a.required_facts = facts(req.iter().map(|i| atoms[*i]));
                a.forbidden_facts = facts(forb.iter().map(|i| atoms[*i]));
                a.add_facts = facts(add.iter().map(|i| atoms[*i]));
                a.del_facts = facts(del.iter().map(|i| atoms[*i]));
                a.del_facts.retain(|f| !a.add_facts.contains(f));
                a.resource_needs.insert("flour".into(), (need * 4.0).round() / 4.0);
                a.resource_deltas.insert("flour".into(), (delta * 4.0).round() / 4.0);
                a.duration = dur.round();
                a
            })
    }

    proptest! {
        #[test]
        fn composite_matches_sequential_application(
            a in arb_action(0),
            b in arb_action(1),
            c in arb_action(2),
            flour in 0.0f64..5.0,
            initial in prop::collection::vec(0usize..4, 0..4),
        ) {
            let atoms = ["p", "q", "r", "s"];
            let members = [&a, &b, &c];
            let Ok(composite) = compose("abc", &members) else { return Ok(()); };
            let dom = domain(vec![a.clone(), b.clone(), c.clone()]);
            let mut res = BTreeMap::new();
            res.insert("flour".to_string(), (flour * 4.0).round() / 4.0);
            let s = dom.state(&res, facts(initial.iter().map(|i| atoms[*i])), Default::default());

            let mut seq = Some(s.clone());
            for m in members {
                seq = seq.and_then(|st| apply(&st, m).ok());
            }
            let composite_ok = crate::world::crisp_applicable(&s, &composite).unwrap();
            prop_assert_eq!(seq.is_some(), composite_ok);
            if let Some(seq_state) = seq {
                let comp_state = apply(&s, &composite).unwrap();
                prop_assert_eq!(&comp_state.facts, &seq_state.facts);
                prop_assert!((comp_state.time.elapsed - seq_state.time.elapsed).abs() < 1e-9);
                for (r, q) in &seq_state.resources {
                    prop_assert!((comp_state.resource(r) - q).abs() < 1e-9);
                }
            }
        }
    }
}
