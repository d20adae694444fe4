use forta::adversary::{AttackKind, AttackSpec};
use forta::harness::log::RoundStatus;
use forta::harness::{build_task, evaluate, local_update, run_experiment, run_round, Federation, GlobalModel, TrainingConfig};
use forta::select::AggregationRule;

fn small(rule: AggregationRule) -> TrainingConfig {
    let mut c = TrainingConfig::new(12, 3, 2, 4);
    c.rule = rule;
    c.seed = 9;
    c
}

fn federation(c: &TrainingConfig) -> Federation {
    Federation::new(build_task(&c.task, c.n_users, c.seed).unwrap(), &c.attack.byzantine, c.seed)
}

#[test]
fn secure_step_matches_plaintext_mean_of_selected() {
    for rule in [AggregationRule::Krum, AggregationRule::ModifiedKrum] {
        let mut c = small(rule);
        c.injected_precision_sigma = 0.0;
        let fed = federation(&c);
        let w0 = GlobalModel { w: vec![0.01; fed.model.dim()], round: 3 };
        let (w1, rec) = run_round(&w0, &fed, &c).unwrap();
        assert_eq!(rec.status, RoundStatus::Ok);
        assert_eq!(rec.selected.len(), 4);
        assert!(rec.hints.is_empty());
        assert_eq!(w1.round, 4);

        let eta = c.learning_rate_at(3);
        let mut expected = w0.w.clone();
        for &u in &rec.selected {
            let g = local_update(&fed.model, &w0, &fed.users[u - 1], c.batch_size, c.local_steps, eta).unwrap();
            for (e, gi) in expected.iter_mut().zip(&g) {
                *e -= eta / 4.0 * gi;
            }
        }
        let err = expected.iter().zip(&w1.w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{rule}: {err}");
    }
}

#[test]
fn honest_modified_krum_sees_uniform_confidence() {
    let mut c = small(AggregationRule::ModifiedKrum);
    c.injected_precision_sigma = 0.0;
    c.rounds = 1;
    let log = run_experiment(&c).unwrap();
    let r = &log.records[0];
    let profile = r.profile.as_ref().unwrap();
    assert!(profile.counts.iter().all(|&n| n == 0), "{profile:?}");
    let lambda = r.lambda.as_ref().unwrap();
    assert!(lambda.iter().all(|l| (l - lambda[0]).abs() < 1e-15));
    assert_eq!(r.scores.as_ref().unwrap().len(), 12);
}

#[test]
fn mimic_calibration_is_caught_only_when_present() {
    // below the floor the attack vanishes into the clean background
    let mut quiet = TrainingConfig::new(30, 9, 10, 8);
    quiet.rule = AggregationRule::ModifiedKrum;
    quiet.rounds = 1;
    quiet.seed = 4;
    quiet.injected_precision_sigma = 0.0;
    let log = run_experiment(&quiet).unwrap();
    assert!(log.records[0].hints.is_empty());

    let mut loud = quiet.clone();
    loud.attack = AttackSpec { kind: AttackKind::PrecisionMimic, magnitude: 1.0, ..AttackSpec::none() };
    let log = run_experiment(&loud).unwrap();
    assert_eq!(log.records[0].hints, log.byzantine);
    assert!(log.records[0].selected.iter().all(|u| !log.byzantine.contains(u)));
}

#[test]
fn krum_drops_reversed_scaling() {
    let mut c = small(AggregationRule::Krum);
    c.rounds = 1;
    c.attack = AttackSpec { kind: AttackKind::Scale, magnitude: 10.0, reverse: true, ..AttackSpec::none() };
    let log = run_experiment(&c).unwrap();
    assert_eq!(log.byzantine.len(), 2);
    assert!(log.records[0].selected.iter().all(|u| !log.byzantine.contains(u)));
}

#[test]
fn overflowing_step_aborts_and_keeps_model() {
    let mut c = small(AggregationRule::FedAvg);
    c.rounds = 2;
    c.attack = AttackSpec { kind: AttackKind::AdditiveNoise, magnitude: f64::MAX, byzantine: vec![1, 2], ..AttackSpec::none() };
    let log = run_experiment(&c).unwrap();
    let fed = federation(&c);
    let untouched = evaluate(&fed.model, &vec![0.0; fed.model.dim()], &fed.test).unwrap();
    for r in &log.records {
        assert!(r.aborted(), "{:?}", r.status);
        assert!(r.selected.is_empty());
        assert_eq!(r.accuracy, untouched);
    }
}

#[test]
fn runs_are_reproducible_and_seed_sensitive() {
    let mut c = small(AggregationRule::ModifiedKrum);
    c.rounds = 2;
    c.attack = AttackSpec { kind: AttackKind::Combined, magnitude: 5.0, share_magnitude: 1.0, ..AttackSpec::none() };
    let a = run_experiment(&c).unwrap();
    let b = run_experiment(&c).unwrap();
    assert_eq!(a.records, b.records);
    assert_eq!(a.byzantine, b.byzantine);
    c.seed += 1;
    assert_ne!(run_experiment(&c).unwrap().records, a.records);
}

#[test]
fn invalid_protocols_are_rejected() {
    let mut c = TrainingConfig::new(20, 1, 10, 3);
    assert!(run_experiment(&c).unwrap_err().to_string().contains("2A + 2 < N"));
    c = TrainingConfig::new(12, 8, 2, 4);
    assert!(run_experiment(&c).unwrap_err().to_string().contains("2A + T + 1"));
    c = TrainingConfig::new(12, 3, 2, 11);
    assert!(run_experiment(&c).is_err());
    c = small(AggregationRule::Krum);
    c.attack = AttackSpec { kind: AttackKind::Scale, magnitude: 2.0, byzantine: vec![1, 2, 3], ..AttackSpec::none() };
    assert!(run_experiment(&c).is_err());
}
