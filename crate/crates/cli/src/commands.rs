use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use fcp_core::acceptance::{validate, AlphaPolicy, Evaluator, PlanResult};
use fcp_core::bench::{self, BenchSettings, RunConfig, SuiteSpec};
use fcp_core::chunking::{build_macros, MacroAction, DEFAULT_MAX_CHUNK};
use fcp_core::grounding::{
    aggregate, oracle_from_spec, render_prompt, AggregationPolicy, Grounder, LlmConfig, LlmOracle, MembershipOracle,
    Query,
};
use fcp_core::io::{
    config_digest, import_preference_subset, parse_domain, parse_plan, parse_problem, parse_state, plan_samples,
    serialize_plan, write_domain, write_problem, ImportError, PlanFile, Provenance,
};
use fcp_core::search::{Planner, SearchConfig};
use fcp_core::{Criticality, Domain, Problem};

use crate::{
    AlphaArgs, BenchArgs, CliError, GenSuiteArgs, GroundArgs, ImportArgs, OracleKind, PlanArgs, Switch, ValidateArgs,
    EXIT_ACCEPTED, EXIT_REJECTED,
};

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_err(path: &Path) -> impl FnOnce(fcp_core::io::LoadError) -> CliError + '_ {
    move |e| CliError::Load {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn load(domain: &Path, problem: &Path) -> Result<(Domain, Problem), CliError> {
    let d = parse_domain(&read(domain)?).map_err(load_err(domain))?;
    let p = parse_problem(&read(problem)?, &d).map_err(load_err(problem))?;
    Ok((d, p))
}

fn default_oracle(domain: &Domain) -> OracleKind {
    if domain.oracle.table.is_empty() && !domain.oracle.rules.is_empty() {
        OracleKind::Rule
    } else {
        OracleKind::Table
    }
}

fn make_oracle(
    domain: &Domain,
    kind: OracleKind,
    seed: u64,
    audit: Option<&Path>,
) -> Result<Arc<dyn MembershipOracle>, CliError> {
    match kind {
        OracleKind::Llm => {
            let mut cfg = LlmConfig::from_env().map_err(CliError::Oracle)?;
            cfg.audit = audit.map(Path::to_path_buf);
            Ok(Arc::new(LlmOracle::new(cfg).map_err(CliError::Oracle)?))
        }
        other => oracle_from_spec(&domain.oracle, other.name(), seed).map_err(CliError::Oracle),
    }
}

fn apply_alpha(problem: &mut Problem, args: &AlphaArgs) -> Result<(), CliError> {
    if let Some(a) = args.alpha {
        if !(0.0..=1.0).contains(&a) {
            return Err(CliError::Usage(format!("--alpha {a} is outside [0, 1]")));
        }
        problem.alpha = AlphaPolicy::fixed(a);
    } else if args.adaptive {
        problem.alpha = AlphaPolicy::Adaptive {
            base: problem.alpha.base(),
            criticality: args.criticality.unwrap_or(Criticality::Typical),
        };
    }
    Ok(())
}

fn verdict(result: &PlanResult) -> i32 {
    if result.accepted {
        EXIT_ACCEPTED
    } else {
        EXIT_REJECTED
    }
}

pub fn cmd_plan(args: &PlanArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let (domain, mut problem) = load(&args.domain, &args.problem)?;
    apply_alpha(&mut problem, &args.alpha)?;
    if args.k == 0 {
        return Err(CliError::Usage("--k must be at least 1".into()));
    }
    let kind = args.oracle.unwrap_or_else(|| default_oracle(&domain));
    let oracle = make_oracle(&domain, kind, args.seed, args.audit.as_deref())?;
    let mut grounder = Grounder::new(oracle, AggregationPolicy::with_k(args.k), args.seed);
    if args.audit.is_some() {
        grounder = grounder.with_audit();
    }
    let config = SearchConfig {
        epsilon_d: args.epsilon_d,
        max_depth: args.max_depth,
        backward_agg: args.backward_agg,
        tnorm: args.tnorm,
        seed: args.seed,
        chunking: args.chunking == Switch::On,
        ..SearchConfig::default()
    };
    let digest = config_digest(&config, kind.name(), args.k, &problem.alpha);
    let max_chunk = config.max_chunk;

    let mut planner = Planner::new(&domain, &problem, &grounder, config)?;
    if let Some(path) = &args.trace {
        let file = File::create(path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        planner = planner.with_trace(BufWriter::new(file));
    }
    let outcome = planner.run()?;
    let samples = if args.audit.is_some() {
        plan_samples(&planner.evaluator(), &outcome.result)
    } else {
        Vec::new()
    };
    let result = outcome.result;
    let code = verdict(&result);
    let _ = writeln!(
        err,
        "{}: {} actions, mu {:.4}, alpha {:.4}{}",
        if result.accepted { "accepted" } else { "rejected" },
        result.actions.len(),
        result.plan_mu.value(),
        result.alpha_used.value(),
        result.failure_reason.map(|r| format!(" ({r})")).unwrap_or_default()
    );
    let file = PlanFile {
        result,
        provenance: Provenance {
            config_digest: digest,
            oracle: kind.name().into(),
            seed: args.seed,
            tnorm: args.tnorm,
            k: args.k,
            max_chunk,
            samples,
        },
    };
    let text = serialize_plan(&file);
    match &args.out {
        Some(path) => write_file(path, &text)?,
        None => writeln!(out, "{text}").map_err(|source| CliError::Io {
            path: PathBuf::from("<stdout>"),
            source,
        })?,
    }
    Ok(code)
}

pub fn cmd_validate(args: &ValidateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let (domain, mut problem) = load(&args.domain, &args.problem)?;
    apply_alpha(&mut problem, &args.alpha)?;
    let plan = parse_plan(&read(&args.plan)?).map_err(load_err(&args.plan))?;
    let prov = &plan.provenance;
    let tnorm = args.tnorm.unwrap_or(prov.tnorm);
    if tnorm != prov.tnorm {
        let _ = writeln!(
            err,
            "warning: validating with {tnorm} but the plan was produced with {}",
            prov.tnorm
        );
    }
    let kind = match args.oracle {
        Some(k) => k,
        None => match prov.oracle.as_str() {
            "rule" => OracleKind::Rule,
            "llm" => OracleKind::Llm,
            _ => OracleKind::Table,
        },
    };
    let seed = args.seed.unwrap_or(prov.seed);
    let k = args.k.unwrap_or(prov.k);
    let oracle = make_oracle(&domain, kind, seed, None)?;
    let grounder = Grounder::new(oracle, AggregationPolicy::with_k(k), seed);
    let macros: Vec<MacroAction> = if plan.result.chunks.is_empty() {
        Vec::new()
    } else {
        build_macros(&domain, prov.max_chunk).0
    };
    let ev = Evaluator::new(&domain, &problem, tnorm, &grounder).with_macros(&macros);
    let result = validate(&ev, &plan.result.actions, &plan.result.chunks)?;
    report(out, &result).map_err(|source| CliError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    })?;
    Ok(verdict(&result))
}

fn report(out: &mut dyn Write, result: &PlanResult) -> std::io::Result<()> {
    let mut index = 0;
    for (i, (macro_id, members)) in result.steps().into_iter().enumerate() {
        let label = macro_id.map(str::to_string).unwrap_or_else(|| members.join("+"));
        let first = index + 1;
        index += members.len();
        let span = if members.len() > 1 {
            format!("{first}-{index}")
        } else {
            first.to_string()
        };
        match result.step_degrees.get(i) {
            Some(d) => writeln!(out, "step {span}\t{label}\t{}", d.value())?,
            None => writeln!(out, "step {span}\t{label}\t-")?,
        }
    }
    writeln!(out, "mu\t{}", result.plan_mu.value())?;
    writeln!(out, "alpha\t{}", result.alpha_used.value())?;
    for v in &result.violations {
        writeln!(out, "violation\t{v}")?;
    }
    match result.failure_reason {
        Some(r) if !result.accepted => writeln!(out, "rejected\t{r}"),
        _ if result.accepted => writeln!(out, "accepted"),
        _ => writeln!(out, "rejected"),
    }
}

pub fn cmd_ground(args: &GroundArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let domain = parse_domain(&read(&args.domain)?).map_err(load_err(&args.domain))?;
    let state = match (&args.state, &args.problem) {
        (Some(path), _) => parse_state(&read(path)?, &domain).map_err(load_err(path))?,
        (None, Some(path)) => parse_problem(&read(path)?, &domain).map_err(load_err(path))?.initial,
        (None, None) => return Err(CliError::Usage("give --state or --problem".into())),
    };
    let predicate = domain
        .predicate(&args.predicate)
        .ok_or_else(|| CliError::Usage(format!("unknown vague predicate `{}`", args.predicate)))?;
    let macros;
    let action = match domain.action(&args.action) {
        Some(a) => a,
        None => {
            macros = build_macros(&domain, DEFAULT_MAX_CHUNK).0;
            &macros
                .iter()
                .find(|m| m.id == args.action)
                .ok_or_else(|| CliError::Usage(format!("unknown action `{}`", args.action)))?
                .composite
        }
    };
    if args.k == 0 {
        return Err(CliError::Usage("--k must be at least 1".into()));
    }
    let kind = args.oracle.unwrap_or_else(|| default_oracle(&domain));
    let io = |source| CliError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    };
    if kind == OracleKind::Llm {
        let prompt = render_prompt(&Query {
            predicate,
            state: &state,
            action,
        });
        writeln!(out, "prompt:\n{prompt}\n").map_err(io)?;
    }
    let oracle = make_oracle(&domain, kind, args.seed, None)?;
    let grounder = Grounder::new(oracle, AggregationPolicy::with_k(args.k), args.seed);
    let samples = grounder.samples(predicate, &state, action)?;
    let degree = aggregate(&samples)?;
    let list: Vec<String> = samples.iter().map(|d| d.value().to_string()).collect();
    writeln!(out, "samples\t{}", list.join(" ")).map_err(io)?;
    writeln!(out, "median\t{}", degree.value()).map_err(io)?;
    Ok(())
}

pub fn cmd_bench(args: &BenchArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    if args.k == 0 {
        return Err(CliError::Usage("--k must be at least 1".into()));
    }
    let instances = bench::load_suite(&args.suite)?;
    let base = RunConfig {
        k: args.k,
        ..RunConfig::default()
    };
    let settings = BenchSettings {
        configs: bench::configurations(base, &args.ablate),
        search: SearchConfig {
            seed: args.seed,
            max_depth: args.max_depth,
            ..SearchConfig::default()
        },
        ..BenchSettings::default()
    };
    let records = bench::run_bench(&instances, &settings)?;
    match &args.out {
        Some(path) => {
            let file = File::create(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            bench::write_csv(&records, BufWriter::new(file))?;
        }
        None => bench::write_csv(&records, &mut *out)?,
    }
    let _ = write!(err, "{}", bench::summary(&records));
    Ok(())
}

pub fn cmd_gen_suite(args: &GenSuiteArgs, err: &mut dyn Write) -> Result<(), CliError> {
    let d = SuiteSpec::default();
    let spec = SuiteSpec {
        lengths: args.lengths.clone().unwrap_or(d.lengths),
        missing: args.missing.clone().unwrap_or(d.missing),
        candidates: args.candidates.clone().unwrap_or(d.candidates),
        replicates: args.replicates.unwrap_or(d.replicates),
        noise_std: args.noise.unwrap_or(d.noise_std),
        outlier_rate: args.outlier_rate.unwrap_or(d.outlier_rate),
        conflict_rate: args.conflict_rate.unwrap_or(d.conflict_rate),
        phase_len: args.phase_len.unwrap_or(d.phase_len),
        alpha: args.alpha.unwrap_or(d.alpha),
        seed: args.seed,
        ..d
    };
    for (name, v) in [
        ("--noise", spec.noise_std),
        ("--outlier-rate", spec.outlier_rate),
        ("--conflict-rate", spec.conflict_rate),
        ("--alpha", spec.alpha),
    ] {
        if !(v.is_finite() && v >= 0.0) || (name != "--noise" && v > 1.0) {
            return Err(CliError::Usage(format!("{name} {v} is out of range")));
        }
    }
    if spec.candidates.contains(&0) {
        return Err(CliError::Usage("--candidates values must be at least 1".into()));
    }
    let instances = bench::generate_suite(&spec);
    if instances.is_empty() {
        return Err(CliError::Usage("the requested strata contain no instances".into()));
    }
    bench::write_suite(&args.out, &instances)?;
    let _ = writeln!(err, "wrote {} instances to {}", instances.len(), args.out.display());
    Ok(())
}

pub fn cmd_import(args: &ImportArgs, err: &mut dyn Write) -> Result<(), CliError> {
    let mut text = String::new();
    // (first line in the joined text, file)
    let mut starts = Vec::new();
    for path in &args.inputs {
        starts.push((text.lines().count() + 1, path));
        text.push_str(&read(path)?);
        if !text.ends_with('\n') {
            text.push('\n');
        }
    }
    let locate = |line: usize| -> (PathBuf, usize) {
        let (start, path) = starts.iter().rev().find(|(s, _)| *s <= line).unwrap_or(&starts[0]);
        ((*path).clone(), line + 1 - start)
    };
    let (domain, problem) = import_preference_subset(&text).map_err(|e| {
        let (line, message) = match &e {
            ImportError::Syntax { line, column, message } => (*line, format!("column {column}: {message}")),
            ImportError::Unsupported { form, line } => (*line, format!("unsupported construct `{form}`")),
            ImportError::Invalid { line, message } => (*line, message.clone()),
        };
        let (path, local) = locate(line);
        CliError::Load {
            path,
            message: format!("line {local}: {message}"),
        }
    })?;
    write_file(&args.out_domain, &write_domain(&domain))?;
    write_file(&args.out_problem, &write_problem(&problem))?;
    let _ = writeln!(
        err,
        "imported {} ground actions, {} preferences",
        domain.actions.len(),
        domain.predicates.len()
    );
    Ok(())
}
