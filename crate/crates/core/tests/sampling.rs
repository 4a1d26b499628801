use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semistream::boxsimplex::MatrixRows;
use semistream::sampling::{random_sample, sample_and_verify, sample_count, SampleSpec};
use semistream::stream::emit_stream;
use semistream::{ResourceMeter, StreamSource};

fn simplex_point(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

#[test]
fn samples_are_unbiased() {
    let x = [0.1, 0.25, 0.05, 0.6];
    let trials = 10_000;
    let k = 5;
    let src: StreamSource<(usize, f64)> = StreamSource::from_records(x.iter().copied().enumerate().collect());
    let mut sum = [0.0; 4];
    let mut sq = [0.0; 4];
    for t in 0..trials {
        let out = random_sample(&src, |_| 1.0, SampleSpec { k, seed: t }, &ResourceMeter::new()).unwrap();
        for (i, v) in out {
            sum[i] += v;
            sq[i] += v * v;
        }
    }
    for i in 0..4 {
        let mean = sum[i] / trials as f64;
        let var = sq[i] / trials as f64 - mean * mean;
        let se = (var / trials as f64).sqrt();
        assert!((mean - x[i]).abs() <= 3.0 * se, "coordinate {i}: {mean} vs {}", x[i]);
    }
}

#[test]
fn one_pass_and_deterministic() {
    let src = emit_stream(vec![(0usize, 0.3), (1, 0.7)]).unwrap();
    let meter = ResourceMeter::new();
    let spec = SampleSpec { k: 20, seed: 9 };
    let a = random_sample(&src, |_| 1.0, spec, &meter).unwrap();
    assert_eq!(meter.passes(), 1);
    assert_eq!(a, random_sample(&src, |_| 1.0, spec, &meter).unwrap());
}

#[test]
fn oversized_coordinates_are_rejected() {
    let src = emit_stream(vec![(0usize, 0.9)]).unwrap();
    assert!(random_sample(&src, |_| 0.5, SampleSpec { k: 3, seed: 0 }, &ResourceMeter::new()).is_err());
}

#[test]
fn more_samples_shrink_deviation() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (m, n) = (200, 5);
    let a: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
    let c = vec![0.0; m];
    let rows = MatrixRows::from_dense(&a, &c).unwrap();
    let x = simplex_point(&mut rng, m);
    let mean_dev = |k: usize| {
        (0..200)
            .map(|seed| {
                let (_, rep) = sample_and_verify(&x, &rows, None, 0.3, SampleSpec { k, seed }, &ResourceMeter::new())
                    .unwrap();
                rep.max_relative_col_dev()
            })
            .sum::<f64>()
            / 200.0
    };
    let ratio = mean_dev(400) / mean_dev(200);
    assert!((0.6..0.85).contains(&ratio), "ratio {ratio}");
}

#[test]
fn concentration_at_the_stated_sample_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (m, n, eps) = (100, 6, 0.3);
    let a: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
    let c: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0)).collect();
    let rows = MatrixRows::from_dense(&a, &c).unwrap();
    let x = vec![1.0 / m as f64; m];
    let k = sample_count(m, n, eps);
    let failures = (0..100)
        .filter(|&seed| {
            let (_, rep) =
                sample_and_verify(&x, &rows, None, eps, SampleSpec { k, seed }, &ResourceMeter::new()).unwrap();
            !rep.conclusions().iter().all(|&b| b)
        })
        .count();
    assert!(failures <= 5, "{failures} failing trials");
}
