use fleetcharge::heuristic::{run_fix_and_optimize, write_logs_jsonl, HeuristicConfig, IterationLog};
use fleetcharge::planner::filter_hcv;
use fleetcharge::replay::replay_solution;
use fleetcharge::synth::{synthetic_instance, tiny_instance, FleetProfile};
use fleetcharge::uncertainty::{compute_moments, observations_from_instance, MomentKey};
use fleetcharge::{build_model, solve, FleetInstance, ModelConfig, PowerSource, SolveSettings, UncertaintyMoments};

/// Replaces every duration by its hourly mean so the planning values sit at
/// the centre of the box.
fn mean_durations(inst: &FleetInstance) -> (FleetInstance, UncertaintyMoments) {
    let moments = compute_moments(observations_from_instance(inst)).unwrap();
    let mut out = inst.clone();
    for i in 0..inst.num_trucks() {
        for k in 0..inst.horizon() {
            if let Some(zone) = inst.parking[i][k] {
                let hour = inst.grid.hour_of_day(inst.grid.slot_at(k).slot);
                out.pp[i][k] = moments.entries[&MomentKey { truck: i, hour, zone }].mu;
            }
        }
    }
    (out, moments)
}

fn small_fleet() -> (FleetInstance, UncertaintyMoments) {
    let profile = FleetProfile {
        trucks: 4,
        days: 2,
        double_shift_share: 0.5,
        double_shift_energy: 1.0,
        pp_mean: (0.2, 0.4),
        ..FleetProfile::default()
    };
    let inst = synthetic_instance(&profile, 2).unwrap();
    let moments = compute_moments(observations_from_instance(&inst)).unwrap().with_multiplier(2.0);
    let kept = filter_hcv(&inst, Some(&moments), 0, 3).kept;
    let inst = inst.select_trucks(&kept);
    let moments = compute_moments(observations_from_instance(&inst)).unwrap().with_multiplier(2.0);
    (inst, moments)
}

fn settings(gap: f64) -> SolveSettings {
    SolveSettings::default().with_gap(gap).with_time_limit(300.0)
}

#[test]
fn zero_spread_stops_after_one_iteration() {
    let exact = HeuristicConfig {
        master_gap: None,
        ..HeuristicConfig::default()
    };
    let mut checked = 0;
    for seed in 0..40 {
        let inst = tiny_instance(seed);
        if inst.chargers.len() < 2 {
            continue;
        }
        let (inst, moments) = mean_durations(&inst);
        let moments = moments.with_multiplier(0.0);
        let master = solve(&build_model(&inst, PowerSource::Deterministic, &ModelConfig::default()).unwrap(), &settings(0.0)).unwrap();
        if !master.status.has_solution() {
            continue;
        }
        let out = run_fix_and_optimize(&inst, &moments, &ModelConfig::default(), &exact, &settings(0.0)).unwrap();
        assert_eq!(out.logs.len(), 2, "seed {seed}");
        assert_eq!(out.logs[1].violations_found, 0, "seed {seed}");
        assert!(out.fixed_fast.is_empty());
        assert!(!out.degraded);
        assert!((out.solution.objective - master.objective).abs() < 1e-6, "seed {seed}: {} vs {}", out.solution.objective, master.objective);
        checked += 1;
    }
    assert!(checked >= 5, "only {checked} instances with a fast charger");
}

#[test]
fn fixings_accumulate_and_final_schedule_replays() {
    let (inst, moments) = small_fleet();
    let out = run_fix_and_optimize(&inst, &moments, &ModelConfig::default(), &HeuristicConfig::default(), &settings(0.01)).unwrap();
    assert!(!out.degraded);
    for pair in out.logs.windows(2) {
        assert!(pair[1].fixed_slots >= pair[0].fixed_slots);
        assert_eq!(pair[1].iteration, pair[0].iteration + 1);
    }
    assert!(out.logs.len() <= HeuristicConfig::default().max_iterations + 1);
    let r = replay_solution(&out.model, &out.solution, None, Some(&out.final_sample)).unwrap();
    assert!(r.feasible, "{:?}", r.violations.first());
    assert!(out.installation.cost(&inst.chargers) <= out.solution.objective + 1e-6);
}

#[test]
fn zero_fast_cap_discards_every_fast_fixing() {
    let (inst, moments) = small_fleet();
    let config = HeuristicConfig {
        fast_cap_per_zone: 0,
        ..HeuristicConfig::default()
    };
    let out = run_fix_and_optimize(&inst, &moments, &ModelConfig::default(), &config, &settings(0.01)).unwrap();
    assert!(!out.degraded);
    assert!(out.fixed_fast.is_empty());
    for &z in &out.dropped_zones {
        assert!(z < inst.zones.len());
    }
}

#[test]
fn logs_round_trip_as_json_lines() {
    let logs = vec![
        IterationLog {
            iteration: 0,
            violations_found: 0,
            fixed_slots: 0,
            solve_time: 1.5,
            objective: 39_600.25,
        },
        IterationLog {
            iteration: 1,
            violations_found: 3,
            fixed_slots: 3,
            solve_time: 0.125,
            objective: 40_100.0,
        },
    ];
    let mut buf = Vec::new();
    write_logs_jsonl(&logs, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let back: Vec<IterationLog> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(text.lines().count(), 2);
    assert_eq!(back, logs);
}

#[test]
fn rejects_bad_configs() {
    let (inst, moments) = mean_durations(&tiny_instance(1));
    for config in [
        HeuristicConfig { kappa0: 0.0, ..HeuristicConfig::default() },
        HeuristicConfig { decay_rate: 1.0, ..HeuristicConfig::default() },
        HeuristicConfig { max_iterations: 0, ..HeuristicConfig::default() },
        HeuristicConfig { master_gap: Some(-0.1), ..HeuristicConfig::default() },
    ] {
        assert!(run_fix_and_optimize(&inst, &moments, &ModelConfig::default(), &config, &settings(0.0)).is_err());
    }
}
