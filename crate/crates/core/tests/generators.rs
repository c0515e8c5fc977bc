use bear_core::io::read_bmat;
use bear_core::synth::{gen_composite, write_composite_bmat};
use bear_core::{gen_low_rank, gen_sparse, gen_video, Matrix, VideoSpec};

#[test]
fn low_rank_entry_variance() {
    // Each entry is a sum of r products of independent N(0, 1/n) draws.
    let (n, r) = (500, 10);
    let expected = r as f64 / (n * n) as f64;
    for seed in 0..3 {
        let l: Matrix<f64> = gen_low_rank(n, r, seed).unwrap();
        let vals = l.as_slice();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
        assert!((var / expected - 1.0).abs() < 0.2, "seed {seed}: {var:e} vs {expected:e}");
    }
}

#[test]
fn sparse_counts_within_binomial_bounds() {
    let n = 300;
    for (seed, rho) in [(0, 0.05), (1, 0.1), (2, 0.3)] {
        let s: Matrix<f64> = gen_sparse(n, rho, seed).unwrap();
        let total = (n * n) as f64;
        let (mean, sd) = (total * rho, (total * rho * (1.0 - rho)).sqrt());
        let nz = s.as_slice().iter().filter(|&&v| v != 0.0).count() as f64;
        assert!((nz - mean).abs() <= 3.0 * sd, "rho {rho}: {nz} nonzeros");
        // Signs are a fair coin among the nonzeros.
        let pos = s.as_slice().iter().filter(|&&v| v > 0.0).count() as f64;
        assert!((pos - nz / 2.0).abs() <= 3.0 * (nz / 4.0).sqrt());
        assert!(s.as_slice().iter().all(|&v| v == 0.0 || v.abs() == 0.1));
    }
}

#[test]
fn streamed_bmat_matches_in_memory_generator() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("y.bmat");
    write_composite_bmat(&path, 40, 25, 3, 0.1, 9).unwrap();
    let c = gen_composite::<f32>(40, 25, 3, 0.1, 9).unwrap();
    assert_eq!(read_bmat(&path).unwrap(), c.y);
}

#[test]
fn default_video_is_non_negative_and_consistent() {
    let spec = VideoSpec::default();
    let (video, truth) = gen_video::<f64>(&spec).unwrap();
    assert_eq!(video.shape(), (64 * 64, 500));
    assert!(video.min_value().unwrap() >= 0.0);
    // video = background + spatial · activation
    let rebuilt = truth
        .background
        .try_add(&truth.spatial.matmul(&truth.activation).unwrap())
        .unwrap();
    assert!(bear_core::approx_eq(&rebuilt, &video, 1e-12, 1e-12));
    // Supports are disjoint and every trace fires.
    let mut owner = vec![false; spec.pixels()];
    for k in 0..spec.blobs {
        for i in truth.support(k) {
            assert!(!owner[i], "pixel {i} in two supports");
            owner[i] = true;
        }
        assert!((0..spec.frames).any(|t| truth.activation.get(k, t) > 0.0));
    }
}
