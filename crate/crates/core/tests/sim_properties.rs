use contact_trace::model::Params;
use contact_trace::sim::{diagnosis_schedule, generate_encounters, run_scenario, Protocol, Scenario};
use proptest::prelude::*;

fn scenario() -> impl Strategy<Value = Scenario> {
    (
        any::<u64>(),
        2usize..40,
        1u64..5,
        0.0f64..12.0,
        0u32..4,
        0u64..6,
        any::<bool>(),
        prop_oneof![Just(15u32), Just(30), Just(60)],
    )
        .prop_map(|(seed, population, days, rate, infections, delay, isolation, period)| Scenario {
            seed,
            population,
            days,
            encounters_per_user_day: rate,
            daily_new_infections: infections,
            diagnosis_delay_days: delay,
            isolation,
            params: Params { period_t: period, ..Params::default() },
            ..Scenario::default()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn text_form_round_trips(s in scenario()) {
        prop_assert_eq!(Scenario::parse(&s.to_text()).unwrap(), s);
    }

    #[test]
    fn encounters_are_well_formed(s in scenario(), day in 0u64..30) {
        let ev = generate_encounters(&s, day).unwrap();
        prop_assert!(ev.windows(2).all(|w| w[0].time <= w[1].time));
        for e in &ev {
            prop_assert!(e.user_a != e.user_b);
            prop_assert!(e.user_a < s.population && e.user_b < s.population);
            prop_assert_eq!(e.time.day(), day);
        }
    }

    #[test]
    fn each_user_is_diagnosed_at_most_once(s in scenario()) {
        let d = diagnosis_schedule(&s);
        let mut users: Vec<usize> = d.iter().map(|x| x.user).collect();
        users.sort_unstable();
        users.dedup();
        prop_assert_eq!(users.len(), d.len());
        prop_assert!(d.iter().all(|x| x.time.day() < s.days && x.time.day() >= x.infected_day));
    }

    #[test]
    fn message_protocols_agree_and_are_exact(s in scenario()) {
        let first = run_scenario(&Scenario { protocol: Protocol::MsgP1, ..s.clone() }).unwrap();
        let second = run_scenario(&Scenario { protocol: Protocol::MsgP2, ..s }).unwrap();
        for r in [&first, &second] {
            prop_assert_eq!(r.detection.precision, 1.0);
            prop_assert_eq!(r.detection.recall, 1.0);
            prop_assert_eq!(r.snooper.cross_period_links, 0);
            prop_assert!(r.relay.unwrap().distinct_lengths <= 1);
            prop_assert_eq!(r.receive_errors, 0);
        }
        let keys = |r: &contact_trace::sim::SimulationReport| r.notifications_delivered.keys().copied().collect::<Vec<_>>();
        prop_assert_eq!(keys(&first), keys(&second));
        prop_assert_eq!(first.ground_truth_exposures, second.ground_truth_exposures);
    }
}
