mod common;

use octd_core::clustering::{label_smooth, SmoothMode};
use octd_core::filtering::{cff_filter, masked_stats, wiener};
use octd_core::metrics::{cnr, epi, snr, ssim};
use octd_core::optics::{estimate_attenuation, reduced_scattering};
use octd_core::{local_stats, Image, LabelMap, Roi, WindowSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn image_strategy(max: usize) -> impl Strategy<Value = Image<f64>> {
    (1..=max, 1..=max).prop_flat_map(|(r, c)| {
        prop::collection::vec(0.0f64..10.0, r * c).prop_map(move |px| Image::new(r, c, px).unwrap())
    })
}

fn window_strategy() -> impl Strategy<Value = WindowSpec> {
    (0usize..4, 0usize..4).prop_map(|(a, b)| WindowSpec::new(2 * a + 1, 2 * b + 1).unwrap())
}

fn labelled(max: usize) -> impl Strategy<Value = (Image<f64>, LabelMap)> {
    image_strategy(max).prop_flat_map(|img| {
        let (r, c) = img.dims();
        prop::collection::vec(1u8..=4, r * c)
            .prop_map(move |l| (img.clone(), LabelMap::new(r, c, l, 4).unwrap()))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn local_stats_matches_double_loop(img in image_strategy(16), w in window_strategy()) {
        let st = local_stats(&img, w);
        let (m, v) = common::local_stats(&img, w);
        prop_assert!(common::max_err(&st.mean, &m) <= 1e-9);
        prop_assert!(common::max_err(&st.var, &v) <= 1e-9);
        prop_assert!(st.var.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn local_stats_offset(img in image_strategy(12), w in window_strategy(), c in 0.0f64..50.0) {
        let a = local_stats(&img, w);
        let shifted = Image::from_fn(img.rows(), img.cols(), |r, col| img.get(r, col) + c).unwrap();
        let b = local_stats(&shifted, w);
        for i in 0..img.len() {
            prop_assert!(common::close(b.var[i], a.var[i], 1e-9));
            prop_assert!(common::close(b.mean[i], a.mean[i] + c, 1e-12));
        }
    }

    #[test]
    fn masked_and_cff_match_quadruple_loop((img, lm) in labelled(16), w in window_strategy()) {
        let ms = masked_stats(&img, &lm, w).unwrap();
        let (m, v, n) = common::masked_stats(&img, &lm, w);
        prop_assert_eq!(&ms.count, &n);
        prop_assert!(common::max_err(&ms.mean, &m) <= 1e-9);
        prop_assert!(common::max_err(&ms.var, &v) <= 1e-9);
        let out = cff_filter(&img, &lm, w).unwrap();
        prop_assert!(common::max_err(&out.to_f64_vec(), &common::cff(&img, &lm, w)) <= 1e-9);
    }

    #[test]
    fn cff_stays_within_cluster_window((img, lm) in labelled(14)) {
        let w = WindowSpec::default();
        let out = cff_filter(&img, &lm, w).unwrap();
        let (rows, cols) = img.dims();
        for r in 0..rows {
            for c in 0..cols {
                let (r0, r1, c0, c1) = w.clipped(r, c, (rows, cols));
                let k = lm.label_at(r, c);
                let vals: Vec<f64> = (r0..r1)
                    .flat_map(|rr| (c0..c1).map(move |cc| (rr, cc)))
                    .filter(|&(rr, cc)| lm.label_at(rr, cc) == k)
                    .map(|(rr, cc)| img.get(rr, cc))
                    .collect();
                let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let v = out.get(r, c);
                prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
            }
        }
    }

    #[test]
    fn cff_is_mean_affine((img, lm) in labelled(12), c in 0.0f64..20.0) {
        let w = WindowSpec::default();
        let a = cff_filter(&img, &lm, w).unwrap();
        let shifted = Image::from_fn(img.rows(), img.cols(), |r, col| img.get(r, col) + c).unwrap();
        let b = cff_filter(&shifted, &lm, w).unwrap();
        for (x, y) in a.pixels().iter().zip(b.pixels()) {
            prop_assert!(common::close(*y, x + c, 1e-9));
        }
    }

    #[test]
    fn wiener_matches_brute_force(img in image_strategy(14), w in window_strategy(), nv in prop::option::of(0.0f64..4.0)) {
        let out = wiener(&img, w, nv);
        prop_assert!(common::max_err(&out.to_f64_vec(), &common::wiener(&img, w, nv)) <= 1e-9);
    }

    #[test]
    fn attenuation_scale_invariant(img in image_strategy(12), a in 0.01f64..100.0) {
        prop_assume!(img.rows() >= 2 && img.pixels().iter().any(|&p| p > 1e-6));
        let base = estimate_attenuation(&img).unwrap();
        let scaled = estimate_attenuation(&img.scaled(a).unwrap()).unwrap();
        for (x, y) in base.values.iter().zip(&scaled.values) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            prop_assert!(x.is_finite() && *x >= 0.0 && *x <= 100.0);
        }
    }

    #[test]
    fn reduced_scattering_is_linear_and_affine(mu in 0.0f64..100.0, nu in 0.0f64..100.0, g in 0.0f64..0.99, h in 0.0f64..0.99) {
        let lhs = reduced_scattering(mu + 2.0 * nu, g);
        let rhs = reduced_scattering(mu, g) + 2.0 * reduced_scattering(nu, g);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        // affine in g with slope -mu
        let slope = (reduced_scattering(mu, h) - reduced_scattering(mu, g)) / (h - g);
        prop_assume!((h - g).abs() > 1e-3);
        prop_assert!((slope + mu).abs() <= 1e-9 * mu.max(1.0));
    }

    #[test]
    fn smoothing_idempotent_on_wide_bands(band in 6usize..12, k in 2u8..5) {
        let rows = band * k as usize;
        let labels = (0..rows * 9).map(|i| (i / 9 / band) as u8 + 1).collect();
        let lm = LabelMap::new(rows, 9, labels, k).unwrap();
        let w = WindowSpec::default();
        let once = label_smooth(&lm, w, SmoothMode::Majority);
        prop_assert_eq!(&label_smooth(&once, w, SmoothMode::Majority), &once);
    }

    #[test]
    fn metrics_match_brute_force(seed in 0u64..1000, rows in 8usize..=32, cols in 8usize..=32) {
        let img = common::random_image(seed, rows, cols).scaled(255.0).unwrap();
        let other = common::random_image(seed + 7, rows, cols).scaled(255.0).unwrap();
        let bg = Roi::new(0, 0, 4, 4);
        let rois = [Roi::new(rows - 4, cols - 5, 4, 5), Roi::new(2, 3, 3, 3)];
        prop_assert!(common::close(snr(&img, &bg).unwrap(), common::snr(&img, &bg), 1e-9));
        prop_assert!(common::close(cnr(&img, &rois, &bg).unwrap(), common::cnr(&img, &rois, &bg), 1e-9));
        let e = epi(&img, &other).unwrap();
        prop_assert!((e - common::epi(&img, &other)).abs() <= 1e-9);
        prop_assert!((-1.0..=1.0).contains(&e));
        let s = ssim(&img, &other).unwrap();
        prop_assert!((s - common::ssim(&img, &other)).abs() <= 1e-9);
        prop_assert!((-1.0 - 1e-9..=1.0 + 1e-9).contains(&s));
    }

    #[test]
    fn snr_scale_and_cnr_affine_invariance(seed in 0u64..1000, a in 0.1f64..50.0, b in 0.0f64..10.0) {
        let img = common::random_image(seed, 20, 20);
        let bg = Roi::new(0, 0, 5, 5);
        let rois = [Roi::new(10, 10, 5, 5), Roi::new(3, 12, 4, 6)];
        let scaled = img.scaled(a).unwrap();
        prop_assert!((snr(&img, &bg).unwrap() - snr(&scaled, &bg).unwrap()).abs() <= 1e-9);
        let affine = Image::from_fn(20, 20, |r, c| a * img.get(r, c) + b).unwrap();
        prop_assert!(common::close(cnr(&affine, &rois, &bg).unwrap(), cnr(&img, &rois, &bg).unwrap(), 1e-9));
    }
}

#[test]
fn ssim_decreases_with_noise() {
    let base = common::random_image(77, 32, 32).scaled(200.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let unit: Vec<f64> = (0..base.len())
        .map(|_| Normal::new(0.0, 1.0).unwrap().sample(&mut rng))
        .collect();
    let mut last = ssim(&base, &base).unwrap();
    assert_eq!(last, 1.0);
    for sd in [5.0, 20.0, 60.0] {
        let noisy = Image::new(
            32,
            32,
            base.pixels()
                .iter()
                .zip(&unit)
                .map(|(p, n)| (p + sd * n).max(0.0))
                .collect(),
        )
        .unwrap();
        let s = ssim(&base, &noisy).unwrap();
        assert!(s < last, "sd {sd}: {s} !< {last}");
        last = s;
    }
}

#[test]
fn local_stats_thread_independent() {
    let img = common::random_image(3, 97, 61);
    let w = WindowSpec::new(7, 3).unwrap();
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let many = rayon::ThreadPoolBuilder::new()
        .num_threads(5)
        .build()
        .unwrap();
    assert_eq!(
        one.install(|| local_stats(&img, w)),
        many.install(|| local_stats(&img, w))
    );
    assert_eq!(local_stats(&img, w), local_stats(&img, w));
}

#[test]
fn step_edge_cff_is_identity_wiener_blurs() {
    let img = Image::<f64>::from_fn(16, 16, |_, c| if c < 8 { 1.0 } else { 9.0 }).unwrap();
    let labels = (0..256).map(|i| if i % 16 < 8 { 1 } else { 2 }).collect();
    let lm = LabelMap::new(16, 16, labels, 2).unwrap();
    let w = WindowSpec::default();
    let cff = cff_filter(&img, &lm, w).unwrap();
    assert_eq!(cff, img);
    let wie = wiener(&img, w, None);
    assert_ne!(wie, img);
    assert!(epi(&img, &cff).unwrap() > epi(&img, &wie).unwrap());
}
