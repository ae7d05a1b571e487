use lnn_core::CellKind;
use lnn_wireless::beamform::{mrt, run_glnn_experiment, sum_se, wmmse_solve, zf, BfConfig, BfReport, WmmseConfig};
use lnn_wireless::channel::{beamforming_channel_sequence, BeamformingScenario, Phase, PredictionScenario};
use lnn_wireless::predict::{
    evaluate_mse, split_windows, train_predictor, ArLs, NaiveHold, NeuralPredictor, Standardizer, TrainConfig,
};

#[test]
fn forecasters_rank_as_expected_on_a_short_scenario() {
    let sc = PredictionScenario { n_steps: 4000, seed: 5, ..Default::default() };
    let (train, test) = split_windows(&sc.generate().unwrap(), 20, 5, 0.8).unwrap();
    let naive = evaluate_mse(&NaiveHold, &test, 5, "t").unwrap();
    let ar = evaluate_mse(&ArLs::fit(train.rows(), 4).unwrap(), &test, 5, "t").unwrap();

    let st = Standardizer::fit(train.rows()).unwrap();
    let model = NeuralPredictor::new(CellKind::Cfc, 16, st, 5).unwrap();
    let cfg = TrainConfig { max_epochs: 30, batches_per_epoch: Some(10), lr: 0.01, seed: 5, ..Default::default() };
    let trained = train_predictor(model, &train, &cfg).unwrap();
    let cfc = evaluate_mse(&trained.model, &test, 5, "t").unwrap();

    for k in 0..5 {
        assert!(ar.mse[k] < naive.mse[k], "h={} ar {} naive {}", k + 1, ar.mse[k], naive.mse[k]);
    }
    assert!(cfc.mse[4] < naive.mse[4], "cfc {:?} naive {:?}", cfc.mse, naive.mse);
    assert!(naive.mse.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn wmmse_beats_references_on_generated_channels() {
    let sc = BeamformingScenario {
        n_bs_antennas: 16,
        n_users: 3,
        phases: vec![Phase { speed_mps: 10.0, steps: 20 }],
        seed: 3,
        ..Default::default()
    };
    let seq = beamforming_channel_sequence(&sc).unwrap();
    for h in seq.iter().step_by(5) {
        let w = wmmse_solve(h, sc.power_budget, sc.noise_power, None, &WmmseConfig::default()).unwrap();
        let m = sum_se(h, &mrt(h, sc.power_budget, sc.noise_power).unwrap()).unwrap();
        let z = sum_se(h, &zf(h, sc.power_budget, sc.noise_power).unwrap()).unwrap();
        assert!(w.sum_rate() >= m.max(z) - 1e-9, "wmmse {} mrt {m} zf {z}", w.sum_rate());
    }
}

#[test]
fn short_glnn_episode_is_reproducible_and_reportable() {
    let sc = BeamformingScenario {
        n_bs_antennas: 8,
        n_users: 2,
        phases: vec![Phase { speed_mps: 6.0, steps: 40 }, Phase { speed_mps: 30.0, steps: 30 }],
        seed: 2,
        ..Default::default()
    };
    let a = run_glnn_experiment(&sc, &BfConfig::default()).unwrap();
    let b = run_glnn_experiment(&sc, &BfConfig::default()).unwrap();
    assert_eq!(a.schemes, b.schemes);
    assert_eq!(a.boundaries, vec![40]);
    let r = BfReport::from_trace(&a, 20, 5).unwrap();
    assert!(r.ratio.is_finite() && r.ratio > 0.0);
    assert!(r.zf_final_mean > 0.0 && r.mrt_final_mean > 0.0);
}
