use fcp_core::acceptance::{validate, Evaluator};
use fcp_core::bench::{
    generate_suite, load_suite, random_instance, run_bench, write_suite, BenchSettings, RandomSpec, SuiteSpec,
};
use fcp_core::grounding::{oracle_from_spec, AggregationPolicy, Grounder};
use fcp_core::io::{parse_plan, serialize_plan, PlanFile, Provenance};
use fcp_core::search::{Planner, SearchConfig};
use fcp_core::world::violates_hard;
use fcp_core::TNormKind;
use proptest::prelude::*;

fn small_suite() -> SuiteSpec {
    SuiteSpec {
        lengths: vec![1, 5, 9],
        candidates: vec![1, 5],
        replicates: 2,
        ..SuiteSpec::default()
    }
}

#[test]
fn suite_survives_the_file_round_trip() {
    let spec = small_suite();
    let suite = generate_suite(&spec);
    let dir = tempfile::tempdir().unwrap();
    write_suite(dir.path(), &suite).unwrap();
    let mut loaded = load_suite(dir.path()).unwrap();
    let mut expected = suite.clone();
    expected.sort_by(|a, b| a.id.cmp(&b.id));
    loaded.sort_by(|a, b| a.id.cmp(&b.id));
    assert_eq!(loaded, expected);
}

#[test]
fn planner_and_validator_agree_on_the_suite() {
    let suite = generate_suite(&small_suite());
    let records = run_bench(&suite, &BenchSettings::default()).unwrap();
    assert_eq!(records.len(), suite.len());
    for r in &records {
        assert!(r.validator_agrees, "{}", r.instance);
        assert_eq!(r.violations, 0, "{}", r.instance);
        if r.accepted {
            assert!(r.valid && r.plan_mu >= r.alpha, "{}", r.instance);
        }
    }
}

#[test]
fn emitted_plan_files_revalidate_identically() {
    let suite = generate_suite(&small_suite());
    let inst = suite.iter().find(|s| s.id.starts_with("recipe-l9-m2")).unwrap();
    let oracle = oracle_from_spec(&inst.domain.oracle, "table", 4).unwrap();
    let grounder = Grounder::new(oracle, AggregationPolicy::with_k(5), 4);
    let config = SearchConfig {
        seed: 4,
        ..SearchConfig::default()
    };
    let mut planner = Planner::new(&inst.domain, &inst.problem, &grounder, config).unwrap();
    let result = planner.run().unwrap().result;
    assert!(!result.actions.is_empty());
    let file = PlanFile {
        result: result.clone(),
        provenance: Provenance {
            config_digest: String::new(),
            oracle: "table".into(),
            seed: 4,
            tnorm: TNormKind::Lukasiewicz,
            k: 5,
            max_chunk: 3,
            samples: Vec::new(),
        },
    };
    let back = parse_plan(&serialize_plan(&file)).unwrap();
    // a fresh grounder with the same seed reproduces every degree
    let again = Grounder::new(
        oracle_from_spec(&inst.domain.oracle, "table", 4).unwrap(),
        AggregationPolicy::with_k(5),
        4,
    );
    let ev = Evaluator::new(&inst.domain, &inst.problem, TNormKind::Lukasiewicz, &again).with_macros(planner.macros());
    let check = validate(&ev, &back.result.actions, &back.result.chunks).unwrap();
    assert_eq!(check.step_degrees, result.step_degrees);
    assert_eq!(check.plan_mu, result.plan_mu);
    assert_eq!(check.accepted, result.accepted);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn accepted_plans_replay_above_threshold(seed in 0u64..10_000, tnorm in prop::sample::select(TNormKind::ALL.to_vec())) {
        let (domain, problem) = random_instance(&RandomSpec::default(), seed);
        let oracle = oracle_from_spec(&domain.oracle, "table", 0).unwrap();
        let grounder = Grounder::new(oracle, AggregationPolicy::with_k(1), 0);
        let config = SearchConfig { tnorm, max_depth: 6, ..SearchConfig::default() };
        let mut planner = Planner::new(&domain, &problem, &grounder, config).unwrap();
        let result = planner.run().unwrap().result;
        if result.accepted {
            let ev = Evaluator::new(&domain, &problem, tnorm, &grounder).with_macros(planner.macros());
            let check = validate(&ev, &result.actions, &result.chunks).unwrap();
            prop_assert!(check.accepted);
            prop_assert!(check.violations.is_empty());
            prop_assert!(check.plan_mu >= check.alpha_used);
            // every intermediate state is hard-feasible
            let mut state = problem.initial.clone();
            for id in &result.actions {
                state = fcp_core::world::apply(&state, domain.action(id).unwrap()).unwrap();
                prop_assert!(violates_hard(&state).is_empty());
            }
        }
    }
}
