//! Importer for a restricted preference-style planning language.
//!
//! Accepted: typed STRIPS actions with negative and equality preconditions,
//! conjunctive goals, named goal preferences, and a metric that minimizes a
//! weighted sum of `(is-violated NAME)` terms. Each preference becomes a
//! vague predicate `pref:NAME` on a final `commit` action whose rule-oracle
//! degree is 1 when the preference holds and `1 − w/W` when it is violated,
//! where `w` is its metric weight and `W` the sum of all weights.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use thiserror::Error;

use crate::acceptance::AlphaPolicy;
use crate::fuzzy::Degree;
use crate::grounding::{OracleSpec, Rule, VaguePredicate};
use crate::world::{Action, Atom, Domain, FactPredicate, FactSet, Goal, LogicalConstraints, Problem, TemporalBudget};

use super::sexpr::{read_all, Sexp};

pub const COMMIT_ACTION: &str = "commit";
pub const COMMIT_FACT: &str = "committed";
const GROUNDING_CAP: usize = 100_000;

const UNSUPPORTED: &[&str] = &[
    "forall",
    "exists",
    "or",
    "imply",
    "when",
    "always",
    "sometime",
    "within",
    "at-most-once",
    "sometime-after",
    "sometime-before",
    "always-within",
    "hold-during",
    "hold-after",
    "increase",
    "decrease",
    "assign",
    "scale-up",
    "scale-down",
    "either",
    "total-time",
    "over",
];

const REQUIREMENTS: &[&str] = &[
    ":strips",
    ":typing",
    ":negative-preconditions",
    ":equality",
    ":preferences",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ImportError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: unsupported construct `{form}`")]
    Unsupported { form: String, line: usize },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
}

fn invalid<T>(s: &Sexp, message: impl Into<String>) -> Result<T, ImportError> {
    Err(ImportError::Invalid {
        line: s.line,
        message: message.into(),
    })
}

fn unsupported<T>(s: &Sexp, form: &str) -> Result<T, ImportError> {
    Err(ImportError::Unsupported {
        form: form.to_string(),
        line: s.line,
    })
}

/// An atom over variables (`?x`) and constants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiftedAtom {
    pub predicate: String,
    pub terms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LiftedAction {
    pub name: String,
    pub params: Vec<(String, String)>,
    pub pre_pos: Vec<LiftedAtom>,
    pub pre_neg: Vec<LiftedAtom>,
    pub equal: Vec<(String, String)>,
    pub not_equal: Vec<(String, String)>,
    pub add: Vec<LiftedAtom>,
    pub del: Vec<LiftedAtom>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preference {
    pub name: String,
    pub holds: Vec<String>,
    pub absent: Vec<String>,
    pub weight: f64,
}

/// The input task in its original (lifted) form, for independent checking.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTask {
    pub schemas: Vec<LiftedAction>,
    pub init: BTreeSet<String>,
    pub goal: BTreeSet<String>,
    pub goal_absent: BTreeSet<String>,
    pub preferences: Vec<Preference>,
}

/// Atom text in the native `p(a,b)` form.
pub fn atom_text(predicate: &str, args: &[String]) -> String {
    if args.is_empty() {
        predicate.to_string()
    } else {
        format!("{predicate}({})", args.join(","))
    }
}

#[derive(Default)]
struct Conj {
    pos: Vec<(LiftedAtom, usize)>,
    neg: Vec<(LiftedAtom, usize)>,
    equal: Vec<(String, String)>,
    not_equal: Vec<(String, String)>,
}

fn symbols(s: &Sexp, items: &[Sexp]) -> Result<Vec<String>, ImportError> {
    items
        .iter()
        .map(|i| match i.symbol() {
            Some(sym) => Ok(sym.to_string()),
            None => match i.head() {
                Some(h) if UNSUPPORTED.contains(&h) => unsupported(i, h),
                _ => invalid(s, "expected a symbol"),
            },
        })
        .collect()
}

fn check_form(s: &Sexp) -> Result<(&str, &[Sexp]), ImportError> {
    let items = match s.list() {
        Some(items) => items,
        None => return invalid(s, format!("expected a list, found `{}`", s.symbol().unwrap_or(""))),
    };
    let Some(head) = items.first().and_then(Sexp::symbol) else {
        return invalid(s, "expected a list starting with a symbol");
    };
    if UNSUPPORTED.contains(&head) {
        return unsupported(s, head);
    }
    if head == "at"
        && items
            .get(1)
            .and_then(Sexp::symbol)
            .is_some_and(|w| w == "end" || w == "start")
    {
        return unsupported(s, "at end/start");
    }
    Ok((head, &items[1..]))
}

fn atom_of(s: &Sexp, head: &str, rest: &[Sexp]) -> Result<LiftedAtom, ImportError> {
    Ok(LiftedAtom {
        predicate: head.to_string(),
        terms: symbols(s, rest)?,
    })
}

fn pair(s: &Sexp, rest: &[Sexp]) -> Result<(String, String), ImportError> {
    let syms = symbols(s, rest)?;
    match syms.as_slice() {
        [a, b] => Ok((a.clone(), b.clone())),
        _ => invalid(s, "`=` takes two terms"),
    }
}

fn conjunction(s: &Sexp, out: &mut Conj, allow_equality: bool) -> Result<(), ImportError> {
    if s.list().is_some_and(|l| l.is_empty()) {
        return Ok(());
    }
    let (head, rest) = check_form(s)?;
    match head {
        "and" => {
            for item in rest {
                conjunction(item, out, allow_equality)?;
            }
        }
        "not" => {
            let [inner] = rest else {
                return invalid(s, "`not` takes one argument");
            };
            let (ih, irest) = check_form(inner)?;
            match ih {
                "=" if allow_equality => out.not_equal.push(pair(inner, irest)?),
                "and" | "not" | "preference" | "=" => return unsupported(inner, &format!("not ({ih} ...)")),
                _ => out.neg.push((atom_of(inner, ih, irest)?, inner.line)),
            }
        }
        "=" if allow_equality => out.equal.push(pair(s, rest)?),
        "=" => return unsupported(s, "="),
        "preference" => return unsupported(s, "preference outside the goal"),
        _ => out.pos.push((atom_of(s, head, rest)?, s.line)),
    }
    Ok(())
}

/// `a b - t c` into (name, type) pairs; untyped names default to `object`.
fn typed_list(s: &Sexp, items: &[Sexp]) -> Result<Vec<(String, String)>, ImportError> {
    let mut out = Vec::new();
    let mut pending = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let item = &items[i];
        match item.symbol() {
            Some("-") => {
                let Some(ty) = items.get(i + 1) else {
                    return invalid(s, "`-` must be followed by a type");
                };
                let ty = match ty.symbol() {
                    Some(t) => t.to_string(),
                    None => return unsupported(ty, ty.head().unwrap_or("either")),
                };
                out.extend(pending.drain(..).map(|n| (n, ty.clone())));
                i += 2;
            }
            Some(name) => {
                pending.push(name.to_string());
                i += 1;
            }
            None => return invalid(item, "expected a name"),
        }
    }
    out.extend(pending.into_iter().map(|n| (n, "object".to_string())));
    Ok(out)
}

#[derive(Default)]
struct LiftedDomain {
    name: String,
    types: HashMap<String, String>,
    constants: Vec<(String, String)>,
    predicates: BTreeMap<String, usize>,
    actions: Vec<(LiftedAction, usize)>,
    atom_lines: Vec<(LiftedAtom, usize, Option<usize>)>,
}

fn parse_domain_def(def: &Sexp, items: &[Sexp]) -> Result<LiftedDomain, ImportError> {
    let mut d = LiftedDomain::default();
    let Some(name) = items
        .get(1)
        .and_then(Sexp::list)
        .and_then(|l| l.get(1))
        .and_then(Sexp::symbol)
    else {
        return invalid(def, "expected (domain NAME)");
    };
    d.name = name.to_string();
    for section in &items[2..] {
        let Some(head) = section.head() else {
            return invalid(section, "expected a domain section");
        };
        let rest = &section.list().unwrap()[1..];
        match head {
            ":requirements" => {
                for r in symbols(section, rest)? {
                    if !REQUIREMENTS.contains(&r.as_str()) {
                        return unsupported(section, &r);
                    }
                }
            }
            ":types" => {
                for (t, parent) in typed_list(section, rest)? {
                    d.types.insert(t, parent);
                }
            }
            ":constants" => d.constants.extend(typed_list(section, rest)?),
            ":predicates" => {
                for p in rest {
                    let Some(pl) = p.list() else {
                        return invalid(p, "expected (NAME ?param ...)");
                    };
                    let Some(pname) = pl.first().and_then(Sexp::symbol) else {
                        return invalid(p, "predicate name missing");
                    };
                    let params = typed_list(p, &pl[1..])?;
                    d.predicates.insert(pname.to_string(), params.len());
                }
            }
            ":action" => {
                let action = parse_action(section, rest, &mut d)?;
                d.actions.push((action, section.line));
            }
            other => return unsupported(section, other),
        }
    }
    Ok(d)
}

fn parse_action(s: &Sexp, rest: &[Sexp], d: &mut LiftedDomain) -> Result<LiftedAction, ImportError> {
    let Some(name) = rest.first().and_then(Sexp::symbol) else {
        return invalid(s, "action name missing");
    };
    let mut a = LiftedAction {
        name: name.to_string(),
        ..Default::default()
    };
    let mut i = 1;
    while i < rest.len() {
        let Some(key) = rest[i].symbol() else {
            return invalid(&rest[i], "expected an action keyword");
        };
        let Some(value) = rest.get(i + 1) else {
            return invalid(&rest[i], format!("`{key}` has no value"));
        };
        match key {
            ":parameters" => {
                let Some(items) = value.list() else {
                    return invalid(value, "expected a parameter list");
                };
                a.params = typed_list(value, items)?;
            }
            ":precondition" => {
                let mut c = Conj::default();
                conjunction(value, &mut c, true)?;
                for (atom, line) in &c.pos {
                    d.atom_lines.push((atom.clone(), *line, Some(d.actions.len())));
                }
                for (atom, line) in &c.neg {
                    d.atom_lines.push((atom.clone(), *line, Some(d.actions.len())));
                }
                a.pre_pos = c.pos.into_iter().map(|(x, _)| x).collect();
                a.pre_neg = c.neg.into_iter().map(|(x, _)| x).collect();
                a.equal = c.equal;
                a.not_equal = c.not_equal;
            }
            ":effect" => {
                let mut c = Conj::default();
                conjunction(value, &mut c, false)?;
                for (atom, line) in c.pos.iter().chain(c.neg.iter()) {
                    d.atom_lines.push((atom.clone(), *line, Some(d.actions.len())));
                }
                a.add = c.pos.into_iter().map(|(x, _)| x).collect();
                a.del = c.neg.into_iter().map(|(x, _)| x).collect();
            }
            other => return unsupported(&rest[i], other),
        }
        i += 2;
    }
    Ok(a)
}

#[derive(Default)]
struct LiftedProblem {
    name: String,
    domain: String,
    objects: Vec<(String, String)>,
    init: Vec<(LiftedAtom, usize)>,
    goal: Conj,
    preferences: Vec<(String, Conj, usize)>,
    weights: HashMap<String, f64>,
}

fn parse_problem_def(def: &Sexp, items: &[Sexp]) -> Result<LiftedProblem, ImportError> {
    let mut p = LiftedProblem::default();
    let Some(name) = items
        .get(1)
        .and_then(Sexp::list)
        .and_then(|l| l.get(1))
        .and_then(Sexp::symbol)
    else {
        return invalid(def, "expected (problem NAME)");
    };
    p.name = name.to_string();
    for section in &items[2..] {
        let Some(head) = section.head() else {
            return invalid(section, "expected a problem section");
        };
        let rest = &section.list().unwrap()[1..];
        match head {
            ":domain" => p.domain = symbols(section, rest)?.into_iter().next().unwrap_or_default(),
            ":requirements" => {
                for r in symbols(section, rest)? {
                    if !REQUIREMENTS.contains(&r.as_str()) {
                        return unsupported(section, &r);
                    }
                }
            }
            ":objects" => p.objects.extend(typed_list(section, rest)?),
            ":init" => {
                for item in rest {
                    let (h, args) = check_form(item)?;
                    if h == "=" {
                        return unsupported(item, "numeric fluent (= ...)");
                    }
                    if h == "not" || h == "and" {
                        return invalid(item, "initial state lists positive atoms only");
                    }
                    p.init.push((atom_of(item, h, args)?, item.line));
                }
            }
            ":goal" => {
                let [g] = rest else {
                    return invalid(section, "`:goal` takes one formula");
                };
                goal(g, &mut p)?;
            }
            ":metric" => metric(section, rest, &mut p)?,
            other => return unsupported(section, other),
        }
    }
    Ok(p)
}

fn goal(s: &Sexp, p: &mut LiftedProblem) -> Result<(), ImportError> {
    if s.list().is_some_and(|l| l.is_empty()) {
        return Ok(());
    }
    let (head, rest) = check_form(s)?;
    match head {
        "and" => {
            for item in rest {
                goal(item, p)?;
            }
            Ok(())
        }
        "preference" => {
            let (name, body) = match rest {
                [n, b] if n.symbol().is_some() => (n.symbol().unwrap().to_string(), b),
                [_] => return invalid(s, "preferences must be named"),
                _ => return invalid(s, "expected (preference NAME FORMULA)"),
            };
            if p.preferences.iter().any(|(n, _, _)| *n == name) {
                return invalid(s, format!("preference `{name}` declared twice"));
            }
            let mut c = Conj::default();
            conjunction(body, &mut c, false)?;
            p.preferences.push((name, c, s.line));
            Ok(())
        }
        _ => conjunction(s, &mut p.goal, false),
    }
}

fn metric(section: &Sexp, rest: &[Sexp], p: &mut LiftedProblem) -> Result<(), ImportError> {
    let [dir, expr] = rest else {
        return invalid(section, "expected (:metric minimize EXPR)");
    };
    match dir.symbol() {
        Some("minimize") => {}
        Some(other) => return unsupported(dir, other),
        None => return invalid(dir, "expected minimize"),
    }
    metric_terms(expr, 1.0, p)
}

fn metric_terms(s: &Sexp, scale: f64, p: &mut LiftedProblem) -> Result<(), ImportError> {
    if let Some(sym) = s.symbol() {
        return match sym.parse::<f64>() {
            Ok(_) => Ok(()),
            Err(_) => unsupported(s, sym),
        };
    }
    let (head, rest) = check_form(s)?;
    match head {
        "+" => rest.iter().try_for_each(|r| metric_terms(r, scale, p)),
        "*" => {
            let [a, b] = rest else {
                return invalid(s, "`*` takes two arguments");
            };
            let (num, expr) = match (
                a.symbol().and_then(|x| x.parse::<f64>().ok()),
                b.symbol().and_then(|x| x.parse::<f64>().ok()),
            ) {
                (Some(n), _) => (n, b),
                (None, Some(n)) => (n, a),
                _ => return invalid(s, "`*` needs a numeric weight"),
            };
            if !(num.is_finite() && num >= 0.0) {
                return invalid(s, "metric weights must be non-negative");
            }
            metric_terms(expr, scale * num, p)
        }
        "is-violated" => {
            let [n] = rest else {
                return invalid(s, "`is-violated` takes a preference name");
            };
            let Some(name) = n.symbol() else {
                return invalid(n, "expected a preference name");
            };
            *p.weights.entry(name.to_string()).or_insert(0.0) += scale;
            Ok(())
        }
        other => unsupported(s, other),
    }
}

fn is_subtype<'a>(types: &'a HashMap<String, String>, mut t: &'a str, target: &str) -> bool {
    let mut guard = 0;
    loop {
        if t == target || target == "object" {
            return true;
        }
        match types.get(t) {
            Some(parent) if guard < 64 => {
                t = parent;
                guard += 1;
            }
            _ => return false,
        }
    }
}

fn bind(atom: &LiftedAtom, binding: &HashMap<&str, &str>) -> String {
    let args: Vec<String> = atom
        .terms
        .iter()
        .map(|t| binding.get(t.as_str()).map_or_else(|| t.clone(), |o| o.to_string()))
        .collect();
    atom_text(&atom.predicate, &args)
}

fn parse_atom(text: &str, line: usize) -> Result<Atom, ImportError> {
    text.parse()
        .map_err(|e: String| ImportError::Invalid { line, message: e })
}

/// Compiles the input into a native domain and problem.
pub fn import_preference_subset(text: &str) -> Result<(Domain, Problem), ImportError> {
    import_with_task(text).map(|(d, p, _)| (d, p))
}

/// Like [`import_preference_subset`], also returning the task in its original form.
pub fn import_with_task(text: &str) -> Result<(Domain, Problem, GroundTask), ImportError> {
    let forms = read_all(text).map_err(|e| ImportError::Syntax {
        line: e.line,
        column: e.column,
        message: e.message,
    })?;
    let mut domain = None;
    let mut problem = None;
    for f in &forms {
        let Some(items) = f.list() else {
            return invalid(f, "expected (define ...)");
        };
        if items.first().and_then(Sexp::symbol) != Some("define") {
            return invalid(f, "expected (define ...)");
        }
        match items.get(1).and_then(Sexp::head) {
            Some("domain") => domain = Some(parse_domain_def(f, items)?),
            Some("problem") => problem = Some(parse_problem_def(f, items)?),
            _ => return invalid(f, "expected (define (domain ...)) or (define (problem ...))"),
        }
    }
    let (Some(d), Some(p)) = (domain, problem) else {
        return Err(ImportError::Invalid {
            line: 1,
            message: "input needs both a domain and a problem definition".into(),
        });
    };
    compile(d, p)
}

fn compile(d: LiftedDomain, p: LiftedProblem) -> Result<(Domain, Problem, GroundTask), ImportError> {
    let err = |line: usize, message: String| ImportError::Invalid { line, message };
    if !p.domain.is_empty() && p.domain != d.name {
        return Err(err(
            1,
            format!("problem is for domain `{}`, not `{}`", p.domain, d.name),
        ));
    }
    if d.predicates.contains_key(COMMIT_FACT) || d.actions.iter().any(|(a, _)| a.name == COMMIT_ACTION) {
        return Err(err(
            1,
            format!("`{COMMIT_FACT}` and `{COMMIT_ACTION}` are reserved names"),
        ));
    }

    let mut objects: BTreeMap<String, String> = BTreeMap::new();
    for (o, t) in d.constants.iter().chain(p.objects.iter()) {
        if objects.insert(o.clone(), t.clone()).is_some() {
            return Err(err(1, format!("object `{o}` declared twice")));
        }
    }
    let check_atom = |atom: &LiftedAtom, line: usize, params: Option<&[(String, String)]>| -> Result<(), ImportError> {
        match d.predicates.get(&atom.predicate) {
            None => return Err(err(line, format!("undeclared predicate `{}`", atom.predicate))),
            Some(&n) if n != atom.terms.len() => {
                return Err(err(line, format!("`{}` expects {} arguments", atom.predicate, n)))
            }
            _ => {}
        }
        for t in &atom.terms {
            let known = if t.starts_with('?') {
                params.is_some_and(|ps| ps.iter().any(|(v, _)| v == t))
            } else {
                objects.contains_key(t)
            };
            if !known {
                return Err(err(line, format!("unknown term `{t}` in `{}`", atom.predicate)));
            }
        }
        Ok(())
    };
    for (atom, line, action) in &d.atom_lines {
        let params = action.map(|i| d.actions[i].0.params.as_slice());
        check_atom(atom, *line, params)?;
    }
    for (atom, line) in &p.init {
        check_atom(atom, *line, None)?;
    }
    for (atom, line) in p.goal.pos.iter().chain(p.goal.neg.iter()) {
        check_atom(atom, *line, None)?;
    }
    for (_, c, line) in &p.preferences {
        for (atom, _) in c.pos.iter().chain(c.neg.iter()) {
            check_atom(atom, *line, None)?;
        }
    }
    for name in p.weights.keys() {
        if !p.preferences.iter().any(|(n, _, _)| n == name) {
            return Err(err(1, format!("metric mentions unknown preference `{name}`")));
        }
    }

    let init: BTreeSet<String> = p.init.iter().map(|(a, _)| bind(a, &HashMap::new())).collect();
    let fluent: HashSet<&str> = d
        .actions
        .iter()
        .flat_map(|(a, _)| a.add.iter().chain(a.del.iter()))
        .map(|x| x.predicate.as_str())
        .collect();

    let mut actions = Vec::new();
    let mut grounded = 0usize;
    for (schema, line) in &d.actions {
        let domains: Vec<Vec<&str>> = schema
            .params
            .iter()
            .map(|(_, ty)| {
                objects
                    .iter()
                    .filter(|(_, t)| is_subtype(&d.types, t, ty))
                    .map(|(o, _)| o.as_str())
                    .collect()
            })
            .collect();
        if domains.iter().any(Vec::is_empty) {
            continue;
        }
        let mut idx = vec![0usize; domains.len()];
        loop {
            grounded += 1;
            if grounded > GROUNDING_CAP {
                return Err(err(*line, format!("grounding exceeds {GROUNDING_CAP} actions")));
            }
            let binding: HashMap<&str, &str> = schema
                .params
                .iter()
                .zip(idx.iter().zip(domains.iter()))
                .map(|((v, _), (i, dom))| (v.as_str(), dom[*i]))
                .collect();
            if let Some(a) = ground_action(schema, &binding, &init, &fluent, *line)? {
                actions.push(a);
            }
            // odometer increment
            let mut k = idx.len();
            loop {
                if k == 0 {
                    break;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < domains[k].len() {
                    break;
                }
                idx[k] = 0;
                if k == 0 {
                    k = usize::MAX;
                    break;
                }
            }
            if idx.is_empty() || k == usize::MAX {
                break;
            }
        }
    }

    let committed = Atom::nullary(COMMIT_FACT);
    for a in &mut actions {
        a.forbidden_facts.insert(committed.clone());
    }
    let total: f64 = p.weights.values().sum();
    let mut predicates = Vec::new();
    let mut rules = Vec::new();
    let mut prefs = Vec::new();
    for (name, c, line) in &p.preferences {
        let id = format!("pref:{name}");
        let weight = p.weights.get(name).copied().unwrap_or(0.0);
        let violated = if total > 0.0 { 1.0 - weight / total } else { 1.0 };
        let holds: Vec<String> = c.pos.iter().map(|(a, _)| bind(a, &HashMap::new())).collect();
        let absent: Vec<String> = c.neg.iter().map(|(a, _)| bind(a, &HashMap::new())).collect();
        predicates.push(VaguePredicate::new(
            id.clone(),
            format!(
                "100 when preference `{name}` holds at the end of the plan, otherwise {:.0}",
                violated * 100.0
            ),
        ));
        let mut satisfied = Rule::always(Degree::ONE);
        satisfied.predicate = Some(id.clone());
        satisfied.facts_present = holds.iter().map(|t| parse_atom(t, *line)).collect::<Result<_, _>>()?;
        satisfied.facts_absent = absent.iter().map(|t| parse_atom(t, *line)).collect::<Result<_, _>>()?;
        let mut fallback = Rule::always(Degree::saturating(violated));
        fallback.predicate = Some(id.clone());
        rules.push(satisfied);
        rules.push(fallback);
        prefs.push(Preference {
            name: name.clone(),
            holds,
            absent,
            weight,
        });
    }

    let goal_pos: BTreeSet<String> = p.goal.pos.iter().map(|(a, _)| bind(a, &HashMap::new())).collect();
    let goal_neg: BTreeSet<String> = p.goal.neg.iter().map(|(a, _)| bind(a, &HashMap::new())).collect();
    let mut commit = Action::new(COMMIT_ACTION);
    commit.add_facts.insert(committed.clone());
    commit.forbidden_facts = goal_neg.iter().map(|t| parse_atom(t, 1)).collect::<Result<_, _>>()?;
    commit.forbidden_facts.insert(committed.clone());
    commit.graded_predicates = predicates.iter().map(|p| p.id.clone()).collect();
    commit.goal_relevant = true;
    actions.push(commit);

    let mut fact_predicates: Vec<FactPredicate> = d
        .predicates
        .iter()
        .map(|(name, arity)| FactPredicate {
            name: name.clone(),
            arity: *arity,
        })
        .collect();
    fact_predicates.push(FactPredicate {
        name: COMMIT_FACT.into(),
        arity: 0,
    });

    let domain = Domain {
        name: d.name.clone(),
        resources: Vec::new(),
        fact_predicates,
        predicates,
        constraints: LogicalConstraints::default(),
        actions,
        macro_estimates: BTreeMap::new(),
        oracle: OracleSpec {
            rules,
            ..OracleSpec::default()
        },
    };
    let mut required: FactSet = goal_pos.iter().map(|t| parse_atom(t, 1)).collect::<Result<_, _>>()?;
    required.insert(committed);
    let initial = domain.state(
        &BTreeMap::new(),
        init.iter().map(|t| parse_atom(t, 1)).collect::<Result<_, _>>()?,
        TemporalBudget::unbounded(),
    );
    let mut meta = BTreeMap::new();
    meta.insert("source".to_string(), "preference-subset".to_string());
    meta.insert("preferences".to_string(), prefs.len().to_string());
    let problem = Problem {
        name: p.name.clone(),
        initial,
        goal: Goal {
            required_facts: required,
            ..Default::default()
        },
        alpha: AlphaPolicy::fixed(0.5),
        meta,
    };
    let task = GroundTask {
        schemas: d.actions.into_iter().map(|(a, _)| a).collect(),
        init,
        goal: goal_pos,
        goal_absent: goal_neg,
        preferences: prefs,
    };
    Ok((domain, problem, task))
}

fn ground_action(
    schema: &LiftedAction,
    binding: &HashMap<&str, &str>,
    init: &BTreeSet<String>,
    fluent: &HashSet<&str>,
    line: usize,
) -> Result<Option<Action>, ImportError> {
    let term = |t: &String| binding.get(t.as_str()).map_or(t.as_str(), |o| *o).to_string();
    if schema.equal.iter().any(|(a, b)| term(a) != term(b)) || schema.not_equal.iter().any(|(a, b)| term(a) == term(b))
    {
        return Ok(None);
    }
    let mut action = Action::new(atom_text(
        &schema.name,
        &schema.params.iter().map(|(v, _)| term(v)).collect::<Vec<_>>(),
    ));
    for atom in &schema.pre_pos {
        let text = bind(atom, binding);
        if fluent.contains(atom.predicate.as_str()) {
            action.required_facts.insert(parse_atom(&text, line)?);
        } else if !init.contains(&text) {
            return Ok(None);
        }
    }
    for atom in &schema.pre_neg {
        let text = bind(atom, binding);
        if fluent.contains(atom.predicate.as_str()) {
            action.forbidden_facts.insert(parse_atom(&text, line)?);
        } else if init.contains(&text) {
            return Ok(None);
        }
    }
    if !action.required_facts.is_disjoint(&action.forbidden_facts) {
        return Ok(None);
    }
    for atom in &schema.add {
        action.add_facts.insert(parse_atom(&bind(atom, binding), line)?);
    }
    for atom in &schema.del {
        let a = parse_atom(&bind(atom, binding), line)?;
        if !action.add_facts.contains(&a) {
            action.del_facts.insert(a);
        }
    }
    Ok(Some(action))
}
