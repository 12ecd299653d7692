use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sprinklers::sim::{Simulator, SprinklersPolicy, TraceEvent, TraceKind};
use sprinklers::striping::{weak_ols, RateMatrix};
use sprinklers::{run, DestDist, PolicyKind, RateMode, SwitchConfig, TrafficSpec};

fn quiet_config(n: usize, policy: PolicyKind) -> SwitchConfig {
    let mut cfg = SwitchConfig::new(n, policy, TrafficSpec::new(0.0, DestDist::Uniform), 10_000, 1);
    cfg.warmup_slots = Some(0);
    cfg.audit_interval_slots = Some(1);
    cfg
}

#[test]
fn lone_packet_crosses_a_quiet_switch_within_two_cycles() {
    let n = 8;
    for input in 1..=n {
        for output in 1..=n {
            let mut events = Vec::new();
            let mut sink = |e: TraceEvent| events.push(e);
            let mut sim = Simulator::new(&quiet_config(n, PolicyKind::Sprinklers)).unwrap();
            sim.set_trace(&mut sink);
            let id = sim.inject(input, output).unwrap();
            for _ in 0..2 * n {
                sim.step_quiet().unwrap();
            }
            let m = sim.metrics();
            assert_eq!((m.arrivals, m.departures), (1, 1), "{input}->{output}");
            assert!(m.mean_delay <= 2.0 * n as f64);
            drop(sim);
            let departed = events.iter().find(|e| e.kind == TraceKind::Departure).unwrap();
            assert_eq!((departed.packet_id, departed.port), (id, output));
        }
    }
}

#[test]
fn full_size_stripe_crosses_in_consecutive_slots() {
    let n = 8;
    let mut rates = RateMatrix::zeros(n);
    rates.set(1, 2, 1.0 / n as f64);
    let ols = weak_ols(n, &mut ChaCha8Rng::seed_from_u64(3));
    let policy = SprinklersPolicy::with_rates(&rates, ols).unwrap();
    assert_eq!(policy.assembler(1, 2).size(), n);

    let mut events = Vec::new();
    let mut sink = |e: TraceEvent| events.push(e);
    let cfg = quiet_config(n, PolicyKind::Sprinklers);
    let mut sim = Simulator::with_policy(&cfg, Box::new(policy));
    sim.set_trace(&mut sink);
    // Arrive mid-cycle so the stripe has to wait for intermediate port 1.
    for _ in 0..3 {
        sim.step_quiet().unwrap();
    }
    let ids: Vec<u64> = (0..n).map(|_| sim.inject(1, 2).unwrap()).collect();
    for _ in 0..4 * n {
        sim.step_quiet().unwrap();
    }
    assert_eq!(sim.metrics().departures, n as u64);
    drop(sim);

    let slots = |kind: TraceKind| -> Vec<(u64, usize, u64)> {
        events.iter().filter(|e| e.kind == kind).map(|e| (e.slot, e.port, e.packet_id)).collect()
    };
    let first = slots(TraceKind::ToIntermediate);
    assert_eq!(first.len(), n);
    for (m, &(slot, port, id)) in first.iter().enumerate() {
        assert_eq!(slot, first[0].0 + m as u64);
        assert_eq!(port, m + 1);
        assert_eq!(id, ids[m]);
    }
    let second = slots(TraceKind::ToOutput);
    assert_eq!(second.len(), n);
    assert!(second.windows(2).all(|w| w[1].0 == w[0].0 + 1));
    let departed: Vec<u64> = slots(TraceKind::Departure).iter().map(|d| d.2).collect();
    assert_eq!(departed, ids);
}

#[test]
fn idle_switch_only_advances_the_clock() {
    for policy in PolicyKind::ALL {
        let mut sim = Simulator::new(&quiet_config(8, policy)).unwrap();
        for _ in 0..500 {
            sim.step().unwrap();
        }
        assert_eq!(sim.now(), 500);
        let m = sim.metrics();
        assert_eq!((m.arrivals, m.departures, m.served_packets, m.idle_despite_backlog), (0, 0, 0, 0));
        assert_eq!(m.reorder_events, 0);
        assert!(m.per_queue_peak.values().all(|&p| p == 0));
    }
}

#[test]
fn runs_are_reproducible_per_seed() {
    for policy in PolicyKind::ALL {
        let cfg = SwitchConfig::new(16, policy, TrafficSpec::new(0.7, DestDist::Diagonal), 5_000, 42);
        let a = run(&cfg).unwrap();
        assert_eq!(a, run(&cfg).unwrap(), "{policy}");
        let other = SwitchConfig { seed: 43, ..cfg };
        assert_ne!(a.mean_delay, run(&other).unwrap().mean_delay, "{policy}");
    }
}

#[test]
fn measured_rates_resize_stripes_without_reordering() {
    let mut cfg = SwitchConfig::new(8, PolicyKind::Sprinklers, TrafficSpec::new(0.8, DestDist::Diagonal), 100_000, 5);
    cfg.rate_mode = RateMode::Measured { half_life_slots: Some(500), window_slots: None };
    let m = run(&cfg).unwrap();
    assert!(m.resize_events > 0);
    assert_eq!(m.reorder_events, 0);
    assert!(m.served_packets <= m.departures);
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = [
        SwitchConfig::new(6, PolicyKind::Sprinklers, TrafficSpec::new(0.5, DestDist::Uniform), 100, 1),
        SwitchConfig::new(8, PolicyKind::Sprinklers, TrafficSpec::new(1.5, DestDist::Uniform), 100, 1),
        SwitchConfig::new(8, PolicyKind::Sprinklers, TrafficSpec::new(0.5, DestDist::Uniform), 0, 1),
    ];
    for cfg in bad {
        assert!(matches!(run(&cfg), Err(sprinklers::Error::InvalidConfig(_))), "{cfg:?}");
    }
}

fn policy_strategy() -> impl Strategy<Value = PolicyKind> {
    prop::sample::select(PolicyKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn conservation_holds_every_slot(
        policy in policy_strategy(),
        log_n in 1u32..=4,
        load in 0.0f64..0.95,
        diagonal in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let n = 1usize << log_n;
        let dest = if diagonal { DestDist::Diagonal } else { DestDist::Uniform };
        let mut cfg = SwitchConfig::new(n, policy, TrafficSpec::new(load, dest), 3_000, seed);
        cfg.audit_interval_slots = Some(1);
        let m = run(&cfg).unwrap();
        prop_assert!(m.departures <= m.arrivals);
        if policy != PolicyKind::Baseline {
            prop_assert_eq!(m.reorder_events, 0);
        }
    }
}
