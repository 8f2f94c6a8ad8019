use memaudit_core::corpus::{generate_corpus, rotate, AugmentationSpec, PlantSpec, Provenance};
use memaudit_core::detection::calibrate_threshold;
use memaudit_core::similarity::{pairwise_corr, pearson};
use memaudit_core::{ImageTensor, SeedRng};

/// Bilinear resampling written against a zero-padded copy of the image.
fn rotate_oracle(img: &[f32], n: usize, degrees: f64) -> Vec<f32> {
    let m = n + 2;
    let mut padded = vec![0f64; m * m];
    for r in 0..n {
        for c in 0..n {
            padded[(r + 1) * m + c + 1] = img[r * n + c] as f64;
        }
    }
    let read = |y: i64, x: i64| -> f64 {
        if y < -1 || x < -1 || y > n as i64 || x > n as i64 {
            0.0
        } else {
            padded[(y + 1) as usize * m + (x + 1) as usize]
        }
    };
    let t = degrees.to_radians();
    let centre = (n as f64 - 1.0) / 2.0;
    let mut out = vec![0f32; n * n];
    for r in 0..n {
        for c in 0..n {
            let (dy, dx) = (r as f64 - centre, c as f64 - centre);
            let y = centre + t.cos() * dy + t.sin() * dx;
            let x = centre - t.sin() * dy + t.cos() * dx;
            let (y0, x0) = (y.floor(), x.floor());
            let (fy, fx) = (y - y0, x - x0);
            let (y0, x0) = (y0 as i64, x0 as i64);
            let v = (1.0 - fy) * (1.0 - fx) * read(y0, x0)
                + (1.0 - fy) * fx * read(y0, x0 + 1)
                + fy * (1.0 - fx) * read(y0 + 1, x0)
                + fy * fx * read(y0 + 1, x0 + 1);
            out[r * n + c] = v.clamp(0.0, 1.0) as f32;
        }
    }
    out
}

#[test]
fn five_degree_rotation_matches_resampling_oracle() {
    for seed in 0..5 {
        let mut rng = SeedRng::new(seed);
        let n = 20;
        let img = ImageTensor::new(vec![n, n], (0..n * n).map(|_| rng.uniform() as f32).collect()).unwrap();
        for deg in [5.0, -5.0, 3.7] {
            let got = rotate(&img, deg);
            let want = rotate_oracle(img.values(), n, deg);
            for (g, w) in got.values().iter().zip(&want) {
                assert!((g - w).abs() < 1e-5, "seed {seed} deg {deg}: {g} vs {w}");
            }
        }
    }
}

#[test]
fn exact_duplicates_correlate_perfectly() {
    let spec = PlantSpec { n_val: 20, ..PlantSpec::default() };
    let corpus = generate_corpus(&spec, &AugmentationSpec::default()).unwrap();
    let mut seen = 0;
    for (id, img) in corpus.synth.iter() {
        if let Some(Provenance::ExactCopy(src)) = corpus.truth.get(id) {
            let rho = pearson(img.values(), corpus.train.get(src).unwrap().values()).unwrap();
            assert!((rho - 1.0).abs() < 1e-6);
            seen += 1;
        }
    }
    assert_eq!(seen, spec.n_exact_copies);
}

/// Distinct novel draws fall below the calibrated threshold in pooled
/// feature space for at least 99% of pairs, on every seed of the battery.
#[test]
fn novel_samples_are_mutually_decorrelated() {
    for seed in 0..5 {
        let spec = PlantSpec { n_exact_copies: 0, n_augmented_copies: 0, n_val: 300, seed, ..PlantSpec::default() };
        let corpus = generate_corpus(&spec, &AugmentationSpec::default()).unwrap();
        let grid = [8, 8];
        let train = corpus.train.pooled(&grid).unwrap();
        let val = corpus.val.pooled(&grid).unwrap();
        let synth = corpus.synth.pooled(&grid).unwrap();
        let tau = calibrate_threshold(&train, &val, 95.0).unwrap().value();
        let corr = pairwise_corr(&synth, &synth, 64).unwrap();
        let n = synth.len();
        let (mut below, mut total) = (0usize, 0usize);
        for i in 0..n {
            for j in (i + 1)..n {
                total += 1;
                below += (corr.get(i, j) < tau) as usize;
            }
        }
        let frac = below as f64 / total as f64;
        assert!(frac >= 0.99, "seed {seed}: {frac}");
    }
}
