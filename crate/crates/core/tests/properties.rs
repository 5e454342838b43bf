use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use scanperc_core::{
    binarize, black_clusters, downsample2x, filter_clusters, misselection_bound, run_detection,
    tri_neighbors, BinaryImage, DetectParams, IntegralImage, Mask, Micrograph, NoiseModel, Scanner,
};

/// Images whose values are multiples of 1/8, so sums, shifts by 0.5 and
/// doubling are exact.
fn dyadic_image() -> impl Strategy<Value = Micrograph> {
    (4usize..20, 4usize..20).prop_flat_map(|(w, h)| {
        prop::collection::vec(0u8..=8, w * h).prop_map(move |v| {
            Micrograph::new(w, h, v.into_iter().map(|x| x as f64 / 8.0).collect()).unwrap()
        })
    })
}

fn real_image() -> impl Strategy<Value = Micrograph> {
    (2usize..24, 2usize..24).prop_flat_map(|(w, h)| {
        prop::collection::vec(-5.0f64..5.0, w * h)
            .prop_map(move |v| Micrograph::new(w, h, v).unwrap())
    })
}

fn binary_image() -> impl Strategy<Value = BinaryImage> {
    (1usize..24, 1usize..24, 0.0f64..1.0).prop_flat_map(|(w, h, p)| {
        prop::collection::vec(prop::bool::weighted(p), w * h)
            .prop_map(move |bits| BinaryImage::new(w, h, bits).unwrap())
    })
}

proptest! {
    #[test]
    fn integral_matches_direct(img in real_image(), side_pick in 0usize..100, pos in (0usize..100, 0usize..100)) {
        let side = 1 + side_pick % img.width().min(img.height());
        let r = pos.0 % (img.height() - side + 1);
        let c = pos.1 % (img.width() - side + 1);
        let ii = IntegralImage::new(&img);
        let direct = img.direct_window_sum(r, c, side).unwrap();
        prop_assert!((ii.window_sum(r, c, side).unwrap() - direct).abs() < 1e-9);
    }

    #[test]
    fn scan_is_shift_and_scale_equivariant(img in dyadic_image(), side_pick in 0usize..100) {
        let side = 1 + side_pick % img.width().min(img.height());
        let base = Scanner::new(&img);
        let shifted = img.map(|v| v + 0.5).unwrap();
        let scaled = img.map(|v| 2.0 * v).unwrap();
        for other in [&shifted, &scaled] {
            let s = Scanner::new(other);
            let (a, b) = (base.min_window(side).unwrap(), s.min_window(side).unwrap());
            prop_assert_eq!((a.row, a.col), (b.row, b.col));
            let (a, b) = (base.max_window(side).unwrap(), s.max_window(side).unwrap());
            prop_assert_eq!((a.row, a.col), (b.row, b.col));
        }
        let lo = base.min_window(side).unwrap();
        prop_assert!((Scanner::new(&shifted).min_window(side).unwrap().mean - (lo.mean + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn extremes_bracket_every_window(img in real_image(), side_pick in 0usize..100) {
        let side = 1 + side_pick % img.width().min(img.height());
        let s = Scanner::new(&img);
        let lo = s.min_window(side).unwrap().sum;
        let hi = s.max_window(side).unwrap().sum;
        for r in 0..=img.height() - side {
            for c in 0..=img.width() - side {
                let v = img.direct_window_sum(r, c, side).unwrap();
                prop_assert!(lo <= v && v <= hi);
            }
        }
    }

    #[test]
    fn downsampling_keeps_the_mean(img in real_image()) {
        let w = img.width() & !1;
        let h = img.height() & !1;
        let small = downsample2x(&img).unwrap();
        prop_assert_eq!(small.dims(), (w / 2, h / 2));
        let mut kept = 0.0;
        for r in 0..h {
            for c in 0..w {
                kept += img.get(r, c);
            }
        }
        let mean_big = kept / (w * h) as f64;
        let mean_small = small.sum() / (small.width() * small.height()) as f64;
        prop_assert!((mean_big - mean_small).abs() < 1e-9);
    }

    #[test]
    fn adjacency_is_symmetric(w in 1usize..12, h in 1usize..12) {
        for r in 0..h {
            for c in 0..w {
                let nb = tri_neighbors(r, c, w, h).unwrap();
                prop_assert!(nb.len() <= 6);
                let interior = r > 0 && c > 0 && r + 1 < h && c + 1 < w;
                if interior {
                    prop_assert_eq!(nb.len(), 6);
                }
                for &(rr, cc) in nb.iter() {
                    prop_assert!(rr < h && cc < w);
                    prop_assert!(tri_neighbors(rr, cc, w, h).unwrap().contains(&(r, c)));
                }
            }
        }
    }

    #[test]
    fn clusters_partition_black_pixels(bin in binary_image()) {
        let (w, h) = bin.dims();
        let clusters = black_clusters(&bin);
        let mut label = vec![usize::MAX; w * h];
        for (k, cl) in clusters.iter().enumerate() {
            prop_assert_eq!(cl.pixel_count, cl.pixels.len());
            for &(r, c) in &cl.pixels {
                prop_assert!(bin.get(r, c));
                prop_assert_eq!(label[r * w + c], usize::MAX);
                label[r * w + c] = k;
            }
        }
        let total: usize = clusters.iter().map(|c| c.pixel_count).sum();
        prop_assert_eq!(total, bin.black_count());
        for r in 0..h {
            for c in 0..w {
                if !bin.get(r, c) {
                    continue;
                }
                for &(rr, cc) in tri_neighbors(r, c, w, h).unwrap().iter() {
                    if bin.get(rr, cc) {
                        prop_assert_eq!(label[r * w + c], label[rr * w + cc]);
                    }
                }
            }
        }
        prop_assert_eq!(BinaryImage::from_clusters(w, h, &clusters), bin);
    }

    #[test]
    fn filtering_is_monotone(bin in binary_image(), m in 1usize..20) {
        let all = black_clusters(&bin);
        let loose = filter_clusters(all.clone(), m).unwrap();
        let tight = filter_clusters(all, m + 1).unwrap();
        prop_assert!(tight.len() <= loose.len());
        for cl in &tight {
            prop_assert!(loose.contains(cl));
            prop_assert!(cl.pixel_count > m);
        }
    }

    #[test]
    fn binarize_is_monotone_in_theta(img in real_image(), t in -5.0f64..5.0, dt in 0.0f64..2.0) {
        let low = binarize(&img, t);
        let high = binarize(&img, t + dt);
        for (a, b) in low.bits().iter().zip(high.bits()) {
            prop_assert!(*a || !*b);
        }
    }

    #[test]
    fn bound_monotone(s1 in 1i64..400, ex in 0i64..400, sigma in 0.05f64..2.0, d in 0.05f64..1.0, m in 0.05f64..1.0) {
        let base = misselection_bound(&[s1], &[ex], d, sigma, m).unwrap().raw;
        prop_assert!(misselection_bound(&[s1], &[ex + 1], d, sigma, m).unwrap().raw >= base);
        prop_assert!(misselection_bound(&[s1], &[ex], d, sigma * 1.1, m).unwrap().raw >= base);
        prop_assert!(misselection_bound(&[s1 + 1], &[ex], d, sigma, m).unwrap().raw <= base * (1.0 + 1e-12));
        prop_assert!((0.0..=1.0).contains(&base));
    }

    #[test]
    fn noise_stays_bounded(m in 0.01f64..2.0, raw in 0.05f64..2.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for model in [NoiseModel::uniform(m).unwrap(), NoiseModel::truncated_gaussian(raw, m).unwrap()] {
            for _ in 0..64 {
                prop_assert!(model.sample(&mut rng).abs() <= m);
            }
            prop_assert!(model.variance() <= m * m + 1e-15);
            let q = model.upper_quantile(0.25).unwrap();
            prop_assert!((model.upper_tail(q) - 0.25).abs() < 1e-9);
        }
    }

    #[test]
    fn masks_downscale_into_the_grid(pixels in prop::collection::vec((0usize..64, 0usize..64), 1..60), passes in 0usize..3) {
        let mask = Mask::from_pixels(pixels);
        let dims = (64 >> passes, 64 >> passes);
        let small = mask.downscaled(passes, dims);
        prop_assert!(small.len() <= mask.len());
        for &(r, c) in mask.pixels() {
            prop_assert!(small.contains((r >> passes, c >> passes)));
        }
    }
}

fn shifted_detection_matches(img: &Micrograph, params: &DetectParams, shift: f64) {
    let base = run_detection(img, params).unwrap();
    let moved = run_detection(&img.map(|v| v + shift).unwrap(), params).unwrap();
    assert_eq!(base.binary, moved.binary);
    assert_eq!(base.clusters_kept, moved.clusters_kept);
    assert_eq!(base.decision, moved.decision);
    assert_eq!(
        base.theta,
        (base.estimates.a_hat + base.estimates.b_hat) / 2.0
    );
}

#[test]
fn detection_is_shift_equivariant() {
    use scanperc_core::{generate_scene, SceneSpec, Shape};
    let particle = Shape::Square { side: 14 }.mask().unwrap().translate(40, 30);
    let spec = SceneSpec {
        n: 96,
        a: 0.3,
        b: 0.6,
        particles: vec![particle],
        noise_square_side: 24,
        noise_square_at: None,
        phi1: 6,
    };
    let params = DetectParams {
        phi0: 24,
        phi1: 6,
        min_cluster_pixels: 30,
        downsample_passes: 0,
        normalize: false,
    };
    for seed in 0..20 {
        let scene = generate_scene(&spec, &NoiseModel::uniform(0.1).unwrap(), seed).unwrap();
        shifted_detection_matches(&scene.image, &params, 0.17);
    }
}

#[test]
fn midpoint_threshold_sits_between_the_two_phases() {
    // uniform noise of half width 0.25 with contrast 0.1
    let (a, b) = (0.45, 0.55);
    let theta = (a + b) / 2.0;
    let noise = NoiseModel::uniform(0.25).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 200_000;
    let mut black0 = 0;
    let mut black1 = 0;
    for _ in 0..n {
        black0 += (a + noise.sample(&mut rng) >= theta) as usize;
        black1 += (b + noise.sample(&mut rng) >= theta) as usize;
    }
    let (p0, p1) = (black0 as f64 / n as f64, black1 as f64 / n as f64);
    assert!(p0 < 0.5 - 0.02, "background black fraction {p0}");
    assert!(p1 > 0.5 + 0.02, "particle black fraction {p1}");
}
