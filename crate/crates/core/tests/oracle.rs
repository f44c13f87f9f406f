mod common;

use common::{brute_force, planning_coef, OracleSetup};
use fleetcharge::model::{apply_case, ModelConfig};
use fleetcharge::replay::replay_solution;
use fleetcharge::solver::bnb::BranchAndBound;
use fleetcharge::solver::solve_with;
use fleetcharge::synth::tiny_instance;
use fleetcharge::{build_model, solve, CaseProfile, PowerSource, SolveSettings, SolveStatus};

fn exact() -> SolveSettings {
    SolveSettings::default().with_gap(0.0).with_time_limit(60.0)
}

fn check_case(seed: u64, case: CaseProfile) {
    let inst = tiny_instance(seed);
    let config = ModelConfig::default().with_case(case);
    let model = build_model(&inst, PowerSource::Deterministic, &config).unwrap();
    let sol = solve(&model, &exact()).unwrap();

    let case_inst = apply_case(&inst, case);
    let coef = planning_coef(&case_inst);
    let oracle = brute_force(&OracleSetup {
        inst: &case_inst,
        coef: &coef,
        anxiety: case != CaseProfile::NoAnxiety,
        p_low: 1.0,
        p_charging: 1.0,
    });
    match oracle {
        None => assert_eq!(sol.status, SolveStatus::Infeasible, "seed {seed} {case}: oracle says infeasible"),
        Some(best) => {
            assert_eq!(sol.status, SolveStatus::Optimal, "seed {seed} {case}");
            assert!(
                (sol.objective - best).abs() <= 1e-6,
                "seed {seed} {case}: milp {} vs oracle {best}",
                sol.objective
            );
            let r = replay_solution(&model, &sol, None, None).unwrap();
            assert!(r.feasible, "seed {seed} {case}: {:?}", r.violations);
        }
    }
}

#[test]
fn benchmark_matches_enumeration() {
    for seed in 0..30 {
        check_case(seed, CaseProfile::Benchmark);
    }
}

#[test]
fn other_cases_match_enumeration() {
    for seed in 100..115 {
        for case in [CaseProfile::FullParking, CaseProfile::NoOvernight, CaseProfile::NoAnxiety] {
            check_case(seed, case);
        }
    }
}

#[test]
fn fallback_backend_agrees_with_highs() {
    for seed in 200..215 {
        let inst = tiny_instance(seed);
        let model = build_model(&inst, PowerSource::Deterministic, &ModelConfig::default()).unwrap();
        let a = solve(&model, &exact()).unwrap();
        let b = solve_with(&BranchAndBound::default(), &model, &exact()).unwrap();
        assert_eq!(a.status, b.status, "seed {seed}");
        if a.status.has_solution() {
            assert!((a.objective - b.objective).abs() <= 1e-6, "seed {seed}: {} vs {}", a.objective, b.objective);
        }
    }
}
