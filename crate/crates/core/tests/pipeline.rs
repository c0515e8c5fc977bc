use bear_core::io::{read_bmat, write_bmat};
use bear_core::score::score_footprints;
use bear_core::solver::{infer_stream, BmatSinks};
use bear_core::synth::gen_composite;
use bear_core::{
    cascade_train, extract_footprints, gen_video, ialm_rpca, nmf_mu, relative_error, train,
    Decomposition, IalmConfig, Matrix, TrainConfig, VideoSpec,
};

fn rank3(n: usize) -> Matrix<f32> {
    gen_composite::<f32>(n, n, 3, 0.0, 5).unwrap().y
}

#[test]
fn noiseless_low_rank_is_recovered() {
    let y = rank3(60);
    let cfg = TrainConfig {
        epochs: 200,
        batch_size: 20,
        seed: 1,
        ..Default::default()
    };
    let mut src = cfg.batch_source(&y).unwrap();
    let out = train(&mut src, 3, &cfg).unwrap();
    let err = relative_error(&y, &out.model.low_rank(&y).unwrap()).unwrap();
    assert!(err <= 1e-2, "relative error {err}");
}

#[test]
fn streamed_split_adds_up_exactly() {
    let c = gen_composite::<f32>(50, 37, 2, 0.1, 3).unwrap();
    let cfg = TrainConfig {
        epochs: 5,
        batch_size: 8,
        ..Default::default()
    };
    let mut src = cfg.batch_source(&c.y).unwrap();
    let model = train(&mut src, 2, &cfg).unwrap().model;
    let mut parts = Decomposition::with_shape(50, 37);
    let stats = infer_stream(&model, &src, &mut parts).unwrap();
    assert_eq!(stats.columns, 37);
    for (i, &y) in c.y.as_slice().iter().enumerate() {
        assert_eq!(y - parts.low_rank.as_slice()[i], parts.sparse.as_slice()[i]);
    }

    // The BMAT sinks stream the same bits to disk.
    let dir = tempfile::tempdir().unwrap();
    let (lp, sp) = (dir.path().join("l.bmat"), dir.path().join("s.bmat"));
    let mut sinks = BmatSinks::create(50, 37, Some(&lp), Some(&sp)).unwrap();
    infer_stream(&model, &src, &mut sinks).unwrap();
    sinks.finish().unwrap();
    assert_eq!(read_bmat(&lp).unwrap(), parts.low_rank);
    assert_eq!(read_bmat(&sp).unwrap(), parts.sparse);
}

#[test]
fn bmat_round_trip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bmat");
    let m = Matrix::from_col_major(2, 3, vec![0.0f32, -0.0, f32::MIN_POSITIVE, 1e-40, f32::MAX, -1.5]).unwrap();
    write_bmat(&m, &path).unwrap();
    let back = read_bmat(&path).unwrap();
    let bits = |m: &Matrix<f32>| m.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&back), bits(&m));
}

#[test]
fn ialm_recovers_planted_split() {
    let c = gen_composite::<f64>(100, 100, 2, 0.05, 0).unwrap();
    let out = ialm_rpca(&c.y, &IalmConfig::default()).unwrap();
    assert!(out.converged);
    let err = relative_error(&c.low_rank, &out.low_rank).unwrap();
    assert!(err <= 1e-3, "relative error {err}");
}

#[test]
fn nmf_mu_objective_never_increases() {
    let (video, _) = gen_video::<f64>(&VideoSpec {
        width: 24,
        height: 24,
        frames: 60,
        blobs: 3,
        ..Default::default()
    })
    .unwrap();
    let floor = 1e-20 * video.as_slice().iter().map(|v| v * v).sum::<f64>();
    for seed in 0..10 {
        let out = nmf_mu(&video, 3, 50, seed).unwrap();
        for pair in out.objective.windows(2) {
            assert!(pair[1] <= pair[0] * (1.0 + 1e-10) + floor, "seed {seed}: {pair:?}");
        }
    }
}

#[test]
fn cascade_separates_small_video() {
    let spec = VideoSpec {
        width: 24,
        height: 24,
        frames: 300,
        blobs: 3,
        event_rate: 0.02,
        ..Default::default()
    };
    let (video, truth) = gen_video::<f32>(&spec).unwrap();
    let cfg = TrainConfig {
        learning_rate: 1e-3,
        final_learning_rate: Some(1e-5),
        epochs: 800,
        batch_size: 10,
        ..Default::default()
    };
    let mut src = cfg.batch_source(&video).unwrap();
    let out = cascade_train(&mut src, 1, 3, 1.0, &cfg).unwrap();
    assert!(out.model.w2.min_value().unwrap() >= 0.0);
    let bg = relative_error(&truth.background, &bear_core::solver::forward(&out.model.w1, &video).unwrap()).unwrap();
    assert!(bg <= 0.05, "background error {bg}");
    let fp = extract_footprints(&out.model, &src, true).unwrap();
    let score = score_footprints(&fp.spatial, Some(&fp.temporal), &truth.spatial, Some(&truth.activation)).unwrap();
    assert!(score.min_confinement() >= 0.8, "{:?}", score.matches);
    assert!(score.min_correlation().unwrap() >= 0.8, "{:?}", score.matches);
}
