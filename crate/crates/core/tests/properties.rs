use mmtls::config::Config;
use mmtls::experiment::{aggregate_joint, db, joint_trials, JOINT_REFERENCE_MU};
use mmtls::filters::{tls_step, Algorithm, FilterState, RegressionSample};
use mmtls::joint::{build_joint_input, mmtls_step, LayerParams, LayerStack};
use mmtls::robust::MEstimateConfig;
use mmtls::sim::{gen_channels, synthesize, trial_rng};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn single_layer_without_rejection_is_joint_tls(seed in any::<u64>(), mu in 0.001f64..0.02) {
        let mut cfg = Config::default();
        cfg.scenario.impulse_prob = 0.0;
        cfg.scenario.seed = seed;
        let sc = &cfg.scenario;
        let mut rng = trial_rng(seed, 0, 0);
        let ch = gen_channels::<f64, _>(sc, &mut rng).unwrap();
        let records = synthesize(sc, &ch, 400, &mut rng).unwrap();

        let mest = MEstimateConfig { c1: 1e300, ..MEstimateConfig::default() };
        let params = LayerParams { step_size: mu, gamma: 1.0, mest };
        let mut stack = LayerStack::new(sc.si_len, sc.rt_len, 1, params).unwrap();
        let mut tls = FilterState::new(Algorithm::Tls, sc.si_len + sc.rt_len, mu, 1.0).unwrap();
        for (n, r) in records.iter().enumerate() {
            let u = build_joint_input(&r.i_vec, &r.x_vec, sc.si_len, sc.rt_len).unwrap();
            let out = mmtls_step(&stack, r.y, &u, &r.i_vec, n == 0).unwrap();
            prop_assert!(!out.rejected[0]);
            stack = out.stack;
            tls = tls_step(&tls, &RegressionSample::new(u, r.y, n as u64)).unwrap().0;
            for (a, b) in stack.layers()[0].filter.weights().iter().zip(tls.weights()) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }
    }
}

#[test]
fn residual_si_does_not_grow_across_layers_at_high_isr() {
    let mut cfg = Config::default();
    cfg.scenario.isr_db = 40.0;
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let trials = joint_trials(&cfg, JOINT_REFERENCE_MU, 2048, 100, jobs).unwrap();
    let point = aggregate_joint(&trials);
    assert_eq!(point.residual_si.len(), 3);
    for pair in point.residual_si.windows(2) {
        assert!(
            pair[1] <= pair[0],
            "residual SI rose from {:.2} dB to {:.2} dB",
            db(pair[0]),
            db(pair[1])
        );
    }
}
