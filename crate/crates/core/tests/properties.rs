use iecc_core::clustering::{fcm_memberships, kmeans_run, restart_rng, seed_kmeanspp, seed_random};
use iecc_core::codec::{decode, deserialize, encode, encode_with_outcome, encode_with_palette, serialize, HEADER_LEN};
use iecc_core::metrics::rmse;
use iecc_core::raster::to_pixel_points;
use iecc_core::stats::{wilcoxon_signed_rank, wilcoxon_signed_rank_with, Sidedness, TestMethod};
use iecc_core::{run_clustering, Algorithm, Centroids, ClusterConfig, PixelPoint, RasterImage};
use proptest::prelude::*;

fn arb_image(max_side: usize) -> impl Strategy<Value = RasterImage> {
    (1..=max_side, 1..=max_side, prop_oneof![Just(1usize), Just(3usize)], 1..=12usize)
        .prop_flat_map(|(w, h, c, colors)| {
            (
                Just((w, h, c)),
                prop::collection::vec(prop::collection::vec(any::<u8>(), c), colors),
                prop::collection::vec(any::<prop::sample::Index>(), w * h),
            )
        })
        .prop_map(|((w, h, c), palette, picks)| {
            let samples = picks.iter().flat_map(|i| i.get(&palette).clone()).collect();
            RasterImage::new(w, h, c, samples).unwrap()
        })
}

fn arb_points() -> impl Strategy<Value = Vec<PixelPoint<f64>>> {
    (1..=3usize).prop_flat_map(|dim| {
        prop::collection::vec(prop::collection::vec(0u8..=255, dim), 4..40)
            .prop_map(|pts| pts.into_iter().map(|p| PixelPoint::new(p.into_iter().map(f64::from).collect())).collect())
    })
}

fn distinct(points: &[PixelPoint<f64>]) -> usize {
    let mut keys: Vec<Vec<u64>> = points.iter().map(|p| p.coords().iter().map(|v| v.to_bits()).collect()).collect();
    keys.sort();
    keys.dedup();
    keys.len()
}

fn non_increasing(trace: &[f64]) -> bool {
    trace.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn codec_roundtrip(image in arb_image(24), k_pick in 1usize..=16, algo in 0u8..4, seed in any::<u64>()) {
        let k = k_pick.min(image.distinct_colors());
        let config = ClusterConfig::new(Algorithm::from_tag(algo).unwrap(), k).with_seed(seed);
        let (compressed, outcome) = encode_with_outcome(&image, &config).unwrap();
        let bytes = serialize(&compressed);
        let bits = compressed.indices.bits_per_index() as usize;
        prop_assert_eq!(
            bytes.len(),
            HEADER_LEN + k * image.channels() + (image.pixel_count() * bits).div_ceil(8)
        );
        let parsed = deserialize(&bytes).unwrap();
        prop_assert_eq!(&parsed, &compressed);
        prop_assert_eq!(serialize(&parsed), bytes);

        let restored = decode(&parsed).unwrap();
        prop_assert!(restored.same_shape(&image));
        let palette: Vec<&[u8]> = (0..k).map(|i| compressed.palette.entry(i)).collect();
        prop_assert!(restored.pixels().all(|px| palette.contains(&px)));
        if image.distinct_colors() == k {
            prop_assert_eq!(&restored, &image);
        }

        // Every pixel went to a nearest unrounded centroid.
        for (p, &chosen) in to_pixel_points::<f64>(&image).iter().zip(&outcome.assignments) {
            let (_, best) = outcome.centroids.nearest(p.coords());
            let d = p.squared_distance(&PixelPoint::new(outcome.centroids.centroid(chosen).to_vec()));
            prop_assert!(d <= best + 1e-9);
        }
    }

    #[test]
    fn reencoding_against_own_palette_is_idempotent(image in arb_image(16), k_pick in 1usize..=8) {
        let k = k_pick.min(image.distinct_colors());
        let (compressed, outcome) =
            encode_with_outcome(&image, &ClusterConfig::<f64>::new(Algorithm::KMeansPlusPlus, k)).unwrap();
        let again = encode_with_palette(&image, &outcome.centroids).unwrap();
        prop_assert_eq!(again.indices.indices(), compressed.indices.indices());
        prop_assert_eq!(&again.palette, &compressed.palette);
    }

    #[test]
    fn lloyd_and_fcm_traces_never_increase(points in arb_points(), k_pick in 1usize..=5, seed in any::<u64>()) {
        let k = k_pick.min(distinct(&points));
        for algo in Algorithm::ALL {
            let config = ClusterConfig::new(algo, k).with_seed(seed);
            let out = run_clustering(&points, &config).unwrap();
            prop_assert!(non_increasing(&out.objective_trace), "{algo}: {:?}", out.objective_trace);
            prop_assert_eq!(*out.objective_trace.last().unwrap(), out.objective);
            if algo.is_fuzzy() {
                prop_assert!(out.membership_row_error.unwrap() < 1e-9);
                let u = fcm_memberships(&points, &out.centroids, 2.0).unwrap();
                prop_assert!(u.max_row_error() < 1e-9);
                prop_assert_eq!(u.argmax(), out.assignments.clone());
            }
        }
    }

    #[test]
    fn seeding_is_deterministic(points in arb_points(), k_pick in 1usize..=5, seed in any::<u64>()) {
        let k = k_pick.min(distinct(&points));
        let a = seed_random(&points, k, &mut restart_rng(seed, 0)).unwrap();
        let b = seed_random(&points, k, &mut restart_rng(seed, 0)).unwrap();
        prop_assert_eq!(a, b);
        let a = seed_kmeanspp(&points, k, &mut restart_rng(seed, 0)).unwrap();
        let b = seed_kmeanspp(&points, k, &mut restart_rng(seed, 0)).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(distinct(&a.to_points()), k);
    }

    #[test]
    fn more_restarts_never_hurt(points in arb_points(), k_pick in 1usize..=5, seed in any::<u64>()) {
        let k = k_pick.min(distinct(&points));
        for algo in [Algorithm::KMeans, Algorithm::KMeansPlusPlus] {
            let one = run_clustering(&points, &ClusterConfig::new(algo, k).with_seed(seed)).unwrap();
            let five = run_clustering(&points, &ClusterConfig::new(algo, k).with_seed(seed).with_restarts(5)).unwrap();
            prop_assert!(five.objective <= one.objective);
        }
    }

    #[test]
    fn wilcoxon_bounds(pairs in prop::collection::vec((-50i32..50, -50i32..50), 1..40)) {
        let x: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
        if let Ok(t) = wilcoxon_signed_rank(&x, &y, Sidedness::TwoSided) {
            let n = t.n_effective as f64;
            prop_assert!((0.0..=1.0).contains(&t.p_value));
            prop_assert!(t.statistic <= n * (n + 1.0) / 2.0);
            prop_assert!((t.w_plus + t.w_minus - n * (n + 1.0) / 2.0).abs() < 1e-9);
        } else {
            prop_assert!(x == y);
        }
    }
}

/// Brute force over all 2ⁿ sign vectors.
fn enumerated_p(magnitudes: &[f64], statistic: f64) -> f64 {
    let n = magnitudes.len();
    let mut sorted: Vec<f64> = magnitudes.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = |v: f64| {
        let below = sorted.iter().filter(|&&s| s < v).count() as f64;
        let equal = sorted.iter().filter(|&&s| s == v).count() as f64;
        below + (equal + 1.0) / 2.0
    };
    let ranks: Vec<f64> = magnitudes.iter().map(|&m| rank(m)).collect();
    let mut hits = 0u64;
    for mask in 0u32..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if w <= statistic + 1e-9 {
            hits += 1;
        }
    }
    (2.0 * hits as f64 / (1u64 << n) as f64).min(1.0)
}

#[test]
fn normal_approximation_tracks_exact_at_n20() {
    let mut rng = restart_rng(20, 0);
    use rand::Rng;
    for _ in 0..50 {
        let x: Vec<f64> = (0..20).map(|i| i as f64 + 0.5).collect();
        let y: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, v)| v + if rng.random_bool(0.6) { 1.0 } else { -1.0 } * (i as f64 + rng.random::<f64>() * 0.1))
            .collect();
        let exact = wilcoxon_signed_rank_with(&x, &y, Sidedness::TwoSided, Some(TestMethod::Exact)).unwrap();
        let approx = wilcoxon_signed_rank_with(&x, &y, Sidedness::TwoSided, Some(TestMethod::NormalApprox)).unwrap();
        assert_eq!(exact.n_effective, 20);
        let magnitudes: Vec<f64> = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).collect();
        assert!((exact.p_value - enumerated_p(&magnitudes, exact.statistic)).abs() < 1e-12);
        assert!(
            (exact.p_value - approx.p_value).abs() < 0.01,
            "exact {} vs normal {}",
            exact.p_value,
            approx.p_value
        );
    }
}

#[test]
fn shared_two_entry_palette_is_no_better_than_own() {
    let gradient = RasterImage::new(256, 1, 1, (0..=255).collect()).unwrap();
    let shared = Centroids::new(vec![PixelPoint::new(vec![20.0]), PixelPoint::new(vec![90.0])]).unwrap();
    let with_shared = decode(&encode_with_palette(&gradient, &shared).unwrap()).unwrap();
    let config = ClusterConfig::<f64>::new(Algorithm::KMeansPlusPlus, 2).with_restarts(5);
    let own = decode(&encode(&gradient, &config).unwrap()).unwrap();
    let (a, b): (f64, f64) = (rmse(&gradient, &own).unwrap(), rmse(&gradient, &with_shared).unwrap());
    assert!(a <= b, "own {a} shared {b}");

    let zeros = RasterImage::filled(4, 4, 1, 0).unwrap();
    let bw = Centroids::new(vec![PixelPoint::new(vec![0.0]), PixelPoint::new(vec![255.0])]).unwrap();
    assert!(encode_with_palette(&zeros, &bw).unwrap().indices.iter().all(|i| i == 0));
}

#[test]
fn dedup_fast_path_matches_reference_from_shared_init() {
    let image = RasterImage::new(8, 8, 1, (0..64u8).map(|v| (v % 11) * 20).collect()).unwrap();
    let points = to_pixel_points::<f64>(&image);
    let init = seed_kmeanspp(&points, 4, &mut restart_rng(3, 0)).unwrap();
    let config = ClusterConfig::new(Algorithm::KMeans, 4);
    let reference = kmeans_run(&points, &init, &config).unwrap();
    let fast = kmeans_run(&points, &init, &config.clone().with_dedup_colors(true)).unwrap();
    for (a, b) in reference.centroids.iter().zip(fast.centroids.iter()) {
        assert!((a[0] - b[0]).abs() < 1e-4);
    }
    assert_eq!(reference.assignments, fast.assignments);
}
