use aclrag_bench::fit::{fit_linear, fit_linear_nonneg_intercept, fit_logarithmic, fit_through_origin};
use aclrag_bench::{default_checkpoints, generate_corpus, BenchConfig, CorpusStream, FitKind, RecordMode};
use proptest::prelude::*;

#[test]
fn corpus_vectors_are_unit_length() {
    for v in generate_corpus(500, 1024, 1) {
        let norm = v.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() <= 1e-6, "norm {norm}");
    }
}

#[test]
fn corpus_mean_concentrates() {
    // For isotropic unit vectors E|mean|^2 = 1/N, so 3/sqrt(N) is three
    // standard radii out.
    for (n, seed) in [(1000, 3), (4000, 4), (10_000, 5)] {
        let corpus = generate_corpus(n, 64, seed);
        let mut mean = vec![0f64; 64];
        for v in &corpus {
            for (m, x) in mean.iter_mut().zip(v) {
                *m += *x as f64 / n as f64;
            }
        }
        let norm = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm <= 3.0 / (n as f64).sqrt(), "N={n}: |mean| = {norm}");
    }
}

#[test]
fn corpus_is_reproducible() {
    assert_eq!(generate_corpus(200, 32, 9), generate_corpus(200, 32, 9));
    assert_ne!(generate_corpus(200, 32, 9), generate_corpus(200, 32, 10));
    let streamed: Vec<Vec<f32>> = CorpusStream::new(32, 9).take(50).collect();
    assert_eq!(streamed, generate_corpus(50, 32, 9));
}

#[test]
fn corpus_coordinates_are_symmetric() {
    // Each coordinate of a uniform direction has mean 0 and variance 1/dim.
    let dim = 16;
    let corpus = generate_corpus(20_000, dim, 11);
    for d in 0..dim {
        let var = corpus.iter().map(|v| (v[d] as f64).powi(2)).sum::<f64>() / corpus.len() as f64;
        assert!((var - 1.0 / dim as f64).abs() < 0.01, "coordinate {d}: variance {var}");
    }
}

#[test]
fn default_checkpoints_are_log_spaced() {
    assert_eq!(default_checkpoints(200_000), vec![1000, 5000, 10_000, 50_000, 100_000, 200_000]);
    assert_eq!(default_checkpoints(1_000_000), vec![1000, 5000, 10_000, 50_000, 100_000, 500_000, 1_000_000]);
    assert_eq!(default_checkpoints(800), vec![800]);
    assert_eq!(BenchConfig::default().checkpoints, default_checkpoints(200_000));
}

#[test]
fn config_validation() {
    let ok = BenchConfig::default();
    ok.validate().unwrap();
    let cases = [
        BenchConfig { checkpoints: vec![10, 5], ..ok.clone() },
        BenchConfig { checkpoints: vec![1000, 300_000], ..ok.clone() },
        BenchConfig { access_fractions: vec![0.0], ..ok.clone() },
        BenchConfig { access_fractions: vec![1.5], ..ok.clone() },
        BenchConfig { trials: 0, ..ok.clone() },
        BenchConfig { record_mode: RecordMode::VectorsPerRecord(0), ..ok.clone() },
    ];
    for c in cases {
        assert!(c.validate().is_err(), "{c:?}");
    }
}

#[test]
fn record_mode_text_round_trip() {
    for m in [RecordMode::FixedTwo, RecordMode::VectorsPerRecord(10), RecordMode::VectorsPerRecord(1000)] {
        assert_eq!(m.to_string().parse::<RecordMode>().unwrap(), m);
    }
    assert_eq!("100".parse::<RecordMode>().unwrap(), RecordMode::VectorsPerRecord(100));
    assert!("0".parse::<RecordMode>().is_err());
    assert!("fixed_three".parse::<RecordMode>().is_err());
}

/// Solves the 2x2 normal equations by Cramer's rule.
fn normal_equations(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let det = n * sxx - sx * sx;
    ((n * sxy - sx * sy) / det, (sxx * sy - sx * sxy) / det)
}

fn sse(xs: &[f64], ys: &[f64], a: f64, b: f64) -> f64 {
    xs.iter().zip(ys).map(|(x, y)| (y - a * x - b).powi(2)).sum()
}

#[test]
fn exact_data_fits_perfectly() {
    let xs = [1e3, 1e4, 1e5, 2e5];
    let lin: Vec<f64> = xs.iter().map(|x| 3.5 * x + 200.0).collect();
    let f = fit_linear(&xs, &lin).unwrap();
    assert!((f.a - 3.5).abs() < 1e-9 && (f.b - 200.0).abs() < 1e-6 && (f.r2 - 1.0).abs() < 1e-12);

    let log: Vec<f64> = xs.iter().map(|x| 0.7 * x.ln() - 2.0).collect();
    let f = fit_logarithmic(&xs, &log).unwrap();
    assert_eq!(f.kind, FitKind::Logarithmic);
    assert!((f.a - 0.7).abs() < 1e-9 && (f.b + 2.0).abs() < 1e-9 && (f.r2 - 1.0).abs() < 1e-12);

    // Log-shaped data fits a line through the origin badly.
    let origin = fit_through_origin(&xs, &log.iter().map(|y| y + 10.0).collect::<Vec<_>>()).unwrap();
    assert!(origin.r2 < 0.9);
}

#[test]
fn negative_intercept_is_clamped() {
    let xs = [1.0, 2.0, 3.0, 4.0];
    let ys = [0.0, 2.0, 4.0, 6.0];
    let free = fit_linear(&xs, &ys).unwrap();
    assert!(free.b < 0.0);
    let f = fit_linear_nonneg_intercept(&xs, &ys).unwrap();
    assert_eq!(f.b, 0.0);
    assert_eq!(f.kind, FitKind::Linear);
    // a = sum(xy) / sum(xx) = 40 / 30
    assert!((f.a - 40.0 / 30.0).abs() < 1e-12);
}

#[test]
fn degenerate_inputs_do_not_fit() {
    assert!(fit_linear(&[1.0], &[1.0]).is_none());
    assert!(fit_linear(&[2.0, 2.0], &[1.0, 3.0]).is_none());
    assert!(fit_logarithmic(&[0.0, 1.0], &[1.0, 2.0]).is_none());
    assert!(fit_through_origin(&[], &[]).is_none());
}

proptest! {
    #[test]
    fn linear_fit_matches_normal_equations(pts in prop::collection::vec((0.0f64..1e5, -1e3f64..1e3), 3..20)) {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        let spread = xs.iter().cloned().fold(f64::MIN, f64::max) - xs.iter().cloned().fold(f64::MAX, f64::min);
        prop_assume!(spread > 1.0);
        let f = fit_linear(&xs, &ys).unwrap();
        let (a, b) = normal_equations(&xs, &ys);
        prop_assert!((f.a - a).abs() <= 1e-6 * a.abs().max(1e-3));
        prop_assert!((f.b - b).abs() <= 1e-6 * b.abs().max(1.0));
        prop_assert!(f.r2 <= 1.0 + 1e-12 && f.r2 >= -1e-9);
    }

    #[test]
    fn nonneg_fit_is_optimal_on_its_domain(
        pts in prop::collection::vec((0.0f64..100.0, -50.0f64..50.0), 3..12),
        da in -1.0f64..1.0,
        b2 in 0.0f64..20.0,
    ) {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        prop_assume!(xs.iter().any(|x| (x - xs[0]).abs() > 1.0));
        let f = fit_linear_nonneg_intercept(&xs, &ys).unwrap();
        prop_assert!(f.b >= 0.0);
        let best = sse(&xs, &ys, f.a, f.b);
        prop_assert!(best <= sse(&xs, &ys, f.a + da, b2) + 1e-6 * best.max(1.0));
    }
}
