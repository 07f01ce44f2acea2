use aerisk_core::bootstrap::{bootstrap_log_ratio, BootstrapConfig};
use aerisk_core::categories::categorize;
use aerisk_core::estimators::{aalen_johansen, estimate_all, one_minus_kaplan_meier, CeScope, EventDefinition, Estimator};
use aerisk_core::meta::{fit_random_effects, AggregateRecord, MetaOptions, Tau2Method};
use aerisk_core::trial_data::{evaluation_time, event_frequencies, AnalysisDataset, Arm, EventClass, PatientRecord, QuantileSpec};
use proptest::prelude::*;

const TOL: f64 = 1e-12;

fn class() -> impl Strategy<Value = EventClass> {
    prop_oneof![
        Just(EventClass::Ae),
        Just(EventClass::DeathBeforeAe),
        Just(EventClass::OtherCe),
        Just(EventClass::Censored),
    ]
}

fn two_arm() -> impl Strategy<Value = AnalysisDataset<f64>> {
    (
        prop::collection::vec((0.5f64..400.0, class()), 1..40),
        prop::collection::vec((0.5f64..400.0, class()), 1..40),
    )
        .prop_map(|(e, c)| {
            let recs = e
                .into_iter()
                .map(|r| (Arm::E, r))
                .chain(c.into_iter().map(|r| (Arm::C, r)))
                .enumerate()
                .map(|(i, (arm, (t, cl)))| PatientRecord::new(format!("p{i}"), arm, t.round().max(1.0), cl).unwrap())
                .collect();
            AnalysisDataset::new("T", "a", recs).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn ordering_and_ranges(d in two_arm(), frac in 0.05f64..1.2) {
        let tau = d.max_time().unwrap() * frac;
        let e = estimate_all(&d, Arm::E, tau).unwrap();
        prop_assert!(e.ip <= e.aje_gold + TOL);
        prop_assert!(e.aje_gold <= e.one_minus_km + TOL);
        prop_assert!(e.pt_id_ignore_ce >= e.pt_id_account_ce - TOL);
        prop_assert!(e.aje_gold <= e.aje_death_only + TOL);
        prop_assert!(e.aje_death_only <= e.one_minus_km + TOL);
        for est in Estimator::COMPARISONS {
            let p = e.get(est);
            prop_assert!((0.0..=1.0).contains(&p), "{} = {}", est, p);
        }
        prop_assert!(e.id_ae >= 0.0 && e.id_ce >= 0.0);
        // 1-KM category never drops below the gold-standard category
        prop_assert!(categorize(e.one_minus_km).unwrap() >= categorize(e.aje_gold).unwrap());
        prop_assert!(categorize(e.pt_id_ignore_ce).unwrap() >= categorize(e.pt_id_account_ce).unwrap());
    }

    #[test]
    fn decomposition_at_each_jump(d in two_arm()) {
        let tau = d.max_time().unwrap();
        let aj = aalen_johansen(&d, Arm::E, tau, CeScope::AllCe).unwrap();
        let km = one_minus_kaplan_meier(&d, Arm::E, tau, EventDefinition::Composite).unwrap();
        prop_assert!(aj.curve_ae.is_valid() && aj.curve_ce.is_valid() && km.survival.is_valid());
        for &t in &km.survival.times {
            let lhs = aj.curve_ae.value_at(t) + aj.curve_ce.value_at(t);
            prop_assert!((lhs - (1.0 - km.survival.value_at(t))).abs() < TOL);
        }
    }

    #[test]
    fn frequencies_sum_to_one(d in two_arm(), frac in 0.0f64..1.5) {
        let tau = d.max_time().unwrap() * frac;
        for arm in [Arm::E, Arm::C] {
            let f = event_frequencies(&d, arm, tau).unwrap();
            prop_assert!((f.total() - 1.0).abs() < TOL);
        }
    }

    #[test]
    fn evaluation_times_monotone(d in two_arm()) {
        let taus: Vec<f64> = [QuantileSpec::Q30, QuantileSpec::Q60, QuantileSpec::Q90, QuantileSpec::Q100, QuantileSpec::MaxFollowUp]
            .iter()
            .map(|&q| evaluation_time(&d, q).unwrap().tau)
            .collect();
        prop_assert!(taus.windows(2).all(|w| w[0] <= w[1]), "{:?}", taus);
        prop_assert!(taus[4] <= d.max_time().unwrap());
    }

    #[test]
    fn death_only_scope_preserves_sizes(d in two_arm()) {
        let r = d.with_scope(CeScope::DeathOnly);
        prop_assert_eq!(r.n_e(), d.n_e());
        prop_assert_eq!(r.n_c(), d.n_c());
        prop_assert!(r.records().iter().zip(d.records()).all(|(a, b)| a.time == b.time));
        prop_assert!(r.records().iter().all(|x| x.event != EventClass::OtherCe));
    }

    // held at a fixed heterogeneity: a re-estimated tau2 moves every weight at once
    #[test]
    fn inflating_se_never_increases_weight(
        studies in prop::collection::vec((-1.0f64..1.0, 0.05f64..0.5), 3..12),
        which in any::<prop::sample::Index>(),
        factor in 1.0f64..5.0,
    ) {
        let base: Vec<_> = studies.iter().map(|&(y, s)| AggregateRecord::new(y, s)).collect();
        let dl = fit_random_effects(&base, &MetaOptions::default()).unwrap().tau2;
        let i = which.index(studies.len());
        for tau2 in [0.0, 0.03, dl] {
            let opts = MetaOptions { tau2: Tau2Method::Fixed(tau2), ..MetaOptions::default() };
            let influence = |recs: &[AggregateRecord<f64>]| {
                let fit = fit_random_effects(recs, &opts).unwrap();
                let w: Vec<f64> = recs.iter().map(|r| 1.0 / (r.se_log_ratio.powi(2) + fit.tau2)).collect();
                w[i] / w.iter().sum::<f64>()
            };
            let mut inflated = base.clone();
            inflated[i].se_log_ratio *= factor;
            prop_assert!(influence(&inflated) <= influence(&base) + 1e-12);

            // and mu moves toward the remaining studies
            let pulled = fit_random_effects(&inflated, &opts).unwrap().mu;
            let orig = fit_random_effects(&base, &opts).unwrap().mu;
            prop_assert!((pulled - base[i].log_ratio).abs() >= (orig - base[i].log_ratio).abs() - 1e-12);
        }
    }
}

#[test]
fn bootstrap_is_bit_identical_on_repeat() {
    let recs = (0..150)
        .map(|i| {
            let class = match i % 5 {
                0 | 1 => EventClass::Ae,
                2 => EventClass::OtherCe,
                3 => EventClass::DeathBeforeAe,
                _ => EventClass::Censored,
            };
            PatientRecord::new(format!("p{i}"), Arm::E, 1.0 + ((i * 53) % 97) as f64, class).unwrap()
        })
        .collect();
    let d = AnalysisDataset::new("T", "a", recs).unwrap();
    let cfg = BootstrapConfig::new(299, 2024);
    for est in Estimator::COMPARISONS {
        let a = bootstrap_log_ratio(&d, Arm::E, 90.0, est, &cfg).unwrap();
        let b = bootstrap_log_ratio(&d, Arm::E, 90.0, est, &cfg.serial()).unwrap();
        assert_eq!(a.log_ratio.to_bits(), b.log_ratio.to_bits());
        assert_eq!(a.se_log_ratio.to_bits(), b.se_log_ratio.to_bits());
        assert_eq!(a, b);
    }
}
