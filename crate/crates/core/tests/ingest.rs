use fleetcharge::bundle::{read_bundle, write_bundle};
use fleetcharge::ingest::{
    build_instance, read_gps_csv, read_temperature_csv, synthesize_fleet, synthetic_temperatures, write_gps_csv,
    write_temperature_csv, FuelEconomyModel, IngestConfig, TraceProfile,
};
use fleetcharge::uncertainty::{compute_moments, observations_from_instance, UncertaintyMoments};

fn economy() -> FuelEconomyModel {
    FuelEconomyModel::with_temperatures(synthetic_temperatures(72, 5))
}

#[test]
fn gps_to_bundle_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let fleet = synthesize_fleet(11, 6, 3, &TraceProfile::default()).unwrap();
    write_gps_csv(&fleet, &dir.path().join("gps.csv")).unwrap();
    let fleet = read_gps_csv(&dir.path().join("gps.csv")).unwrap();
    assert_eq!(fleet.len(), 6);

    let config = IngestConfig {
        special_ranks: vec![0],
        ..IngestConfig::default()
    };
    let out = build_instance(&fleet, &economy(), &config).unwrap();
    let inst = &out.instance;
    inst.validate().unwrap();
    assert_eq!(inst.num_trucks(), 6);
    assert_eq!(inst.zones.len(), config.zones);
    assert!(inst.zones[0].is_special);
    assert!(inst.zones[1..].iter().all(|z| !z.is_special));
    assert!(out.stops > 0);
    assert!(!out.ranking.short);
    assert!(inst.grid.days >= 3);

    for i in 0..inst.num_trucks() {
        assert!(inst.parking_slot_count(i) > 0, "truck {i} never parks");
        assert!(inst.total_rho(i) > 0.0, "truck {i} never drives");
        for k in 0..inst.horizon() {
            assert!(inst.rho[i][k] >= 0.0);
            match inst.parking[i][k] {
                Some(_) => assert!(inst.pp[i][k] > 0.0 && inst.pp[i][k] <= 1.0),
                None => assert_eq!(inst.pp[i][k], 0.0),
            }
        }
    }

    write_bundle(inst, &dir.path().join("bundle")).unwrap();
    let back = read_bundle(&dir.path().join("bundle")).unwrap();
    assert_eq!(&back, inst);

    let moments = compute_moments(observations_from_instance(inst)).unwrap();
    moments.write_csv(&dir.path().join("moments.csv")).unwrap();
    assert_eq!(UncertaintyMoments::read_csv(&dir.path().join("moments.csv")).unwrap(), moments);
}

#[test]
fn pipeline_is_deterministic() {
    let fleet = synthesize_fleet(3, 5, 2, &TraceProfile::default()).unwrap();
    assert_eq!(fleet, synthesize_fleet(3, 5, 2, &TraceProfile::default()).unwrap());
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| build_instance(&fleet, &economy(), &IngestConfig::default()).unwrap())
    };
    let a = run(1);
    let b = run(3);
    assert_eq!(a.instance, b.instance);
    assert_eq!(a.ranking, b.ranking);
    assert_eq!(a.stops, b.stops);
}

#[test]
fn colder_weather_costs_more_energy() {
    let fleet = synthesize_fleet(8, 3, 1, &TraceProfile::default()).unwrap();
    let warm = build_instance(&fleet, &FuelEconomyModel::with_temperatures(vec![70.0; 24]), &IngestConfig::default()).unwrap();
    let cold = build_instance(&fleet, &FuelEconomyModel::with_temperatures(vec![10.0; 24]), &IngestConfig::default()).unwrap();
    let mut warm_total = 0.0;
    let mut cold_total = 0.0;
    for i in 0..warm.instance.num_trucks() {
        assert!(cold.instance.total_rho(i) >= warm.instance.total_rho(i));
        warm_total += warm.instance.total_rho(i);
        cold_total += cold.instance.total_rho(i);
    }
    assert!(cold_total > warm_total);
}

#[test]
fn temperatures_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let temps = synthetic_temperatures(48, 2);
    let path = dir.path().join("temperature.csv");
    write_temperature_csv(&temps, &path).unwrap();
    assert_eq!(read_temperature_csv(&path).unwrap(), temps);
}

#[test]
fn empty_fleet_is_rejected() {
    assert!(build_instance(&Default::default(), &economy(), &IngestConfig::default()).is_err());
}
