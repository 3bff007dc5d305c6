use deconflict::{
    count_conflicts, generate_cp, resolve, verify, ControlBounds, InstanceFile, InstanceSpec, ModelKind,
    ResolutionStatus, ResolveConfig, StepStatus,
};

fn quiet() -> ResolveConfig {
    ResolveConfig {
        record_timing: false,
        ..ResolveConfig::default()
    }
}

#[test]
fn circle_conflicts_are_complete() {
    for n in 2..=20 {
        let inst = generate_cp(n, 200.0, 500.0, 5.0).unwrap();
        assert_eq!(count_conflicts(&inst.states, inst.d).unwrap(), n * (n - 1) / 2, "n = {n}");
    }
}

#[test]
fn identity_controls_violate_every_cp4_pair() {
    let inst = generate_cp(4, 200.0, 500.0, 5.0).unwrap();
    let check = verify(&inst, &[deconflict::ControlDecision::IDENTITY; 4]);
    assert!(!check.feasible);
    assert_eq!(check.violated_pairs(), 6);
}

#[test]
fn cp4_global_in_one_step() {
    let inst = generate_cp(4, 200.0, 500.0, 5.0).unwrap();
    let report = resolve(&inst, &quiet()).unwrap();
    assert_eq!(report.status, ResolutionStatus::Global);
    assert_eq!(report.steps.len(), 1);
    assert_eq!(report.steps[0].step, ModelKind::LbMiqp);
    let obj = report.objective.unwrap();
    assert!((obj - 0.00125).abs() / 0.00125 <= 0.05, "{obj}");
    assert!(report.gap.unwrap() <= 1e-6);
    assert!(verify(&inst, &report.decisions()).feasible);
}

#[test]
fn small_circles_are_global_and_verified() {
    let mut last = 0.0;
    for n in 2..=6 {
        let inst = generate_cp(n, 200.0, 500.0, 5.0).unwrap();
        let report = resolve(&inst, &quiet()).unwrap();
        assert_eq!(report.status, ResolutionStatus::Global, "n = {n}");
        let obj = report.objective.unwrap();
        // more aircraft on the same circle never makes resolution cheaper
        assert!(obj >= last - 1e-9, "n = {n}: {obj} < {last}");
        last = obj;
        let check = verify(&inst, &report.decisions());
        assert!(check.feasible && check.min_margin >= -1e-6);
        assert_eq!(check.bound_violations, 0);
    }
}

#[test]
fn reports_repeat_byte_for_byte() {
    let inst = generate_cp(5, 200.0, 500.0, 5.0).unwrap();
    let a = serde_json::to_string(&resolve(&inst, &quiet()).unwrap()).unwrap();
    let b = serde_json::to_string(&resolve(&inst, &quiet()).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn random_circle_reports_hold_their_contract() {
    for seed in 0..10 {
        let file = InstanceSpec::rcp(10, seed).generate().unwrap();
        let inst = file.to_problem(ControlBounds::default()).unwrap();
        let report = resolve(&inst, &quiet()).unwrap();
        assert!(report.is_feasible_status(), "seed {seed}: {:?}", report.status);
        assert!(verify(&inst, &report.decisions()).feasible);
        let lb1 = report.steps[0].lower_bound.unwrap();
        assert!(lb1 <= report.objective.unwrap() + 1e-6);
        if report.status == ResolutionStatus::Global {
            assert!(report.gap.unwrap() <= 1e-6);
        }
        for s in &report.steps {
            if s.status == StepStatus::Viol {
                assert!(s.n_v > 0);
            }
        }
    }
}

#[test]
fn instance_files_round_trip_exactly() {
    let file = InstanceSpec::rcp(12, 77).generate().unwrap();
    let text = file.to_json().unwrap();
    let back = InstanceFile::from_json(&text).unwrap();
    assert_eq!(back, file);
    assert_eq!(back.to_json().unwrap(), text);
    let again = InstanceSpec::rcp(12, 77).generate().unwrap().to_json().unwrap();
    assert_eq!(again, text);
}
