mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use textsynth::raster::srgb8_to_lab;
use textsynth::saliency::*;

#[test]
fn random_map_mask_counts_match_direct_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10 {
        let values: Vec<f32> = (0..50 * 40).map(|_| rng.gen()).collect();
        let map = SaliencyMap::from_values(50, 40, values.clone()).unwrap();
        let mean = values.iter().map(|&v| v as f64).sum::<f64>() / values.len() as f64;
        assert!((map.mean() as f64 - mean).abs() < 1e-6);
        let m = low_saliency_mask(&map);
        let direct = values.iter().filter(|&&v| v <= map.mean()).count();
        assert_eq!(m.mask.count_true(), direct);
        assert_eq!(m.threshold, map.mean());
    }
}

/// Per-pixel contrast sum over every other pixel, no codebook.
fn brute_contrast(img: &textsynth::raster::RasterImage) -> Vec<f64> {
    let labs: Vec<_> = img
        .data()
        .chunks_exact(3)
        .map(|p| srgb8_to_lab([p[0], p[1], p[2]]))
        .collect();
    let n = labs.len() as f64;
    let mut by_color: std::collections::BTreeMap<[u32; 3], (f64, usize)> = Default::default();
    for p in &labs {
        by_color
            .entry([p.l.to_bits(), p.a.to_bits(), p.b.to_bits()])
            .or_default()
            .1 += 1;
    }
    labs.iter()
        .map(|p| {
            by_color
                .iter()
                .map(|(k, (_, c))| {
                    let q = [
                        f32::from_bits(k[0]),
                        f32::from_bits(k[1]),
                        f32::from_bits(k[2]),
                    ];
                    let d = ((p.l - q[0]) as f64).powi(2)
                        + ((p.a - q[1]) as f64).powi(2)
                        + ((p.b - q[2]) as f64).powi(2);
                    *c as f64 / n * d.sqrt()
                })
                .sum()
        })
        .collect()
}

#[test]
fn three_color_scenes_match_brute_force_before_smoothing() {
    let palette = [[200u8, 190, 180], [20, 60, 200], [240, 40, 30]];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let picks: Vec<usize> = (0..40 * 30)
            .map(|_| match rng.gen_range(0..10) {
                0..=5 => 0,
                6..=8 => 1,
                _ => 2,
            })
            .collect();
        let img = common::rgb_from_fn(40, 30, |x, y| palette[picks[y * 40 + x]]);
        let fast = HistogramContrast::default().raw_contrast(&img).unwrap();
        let brute = brute_contrast(&img);
        for (a, b) in fast.iter().zip(&brute) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }
}

#[test]
fn two_tone_minority_is_salient() {
    let img = common::rgb_from_fn(80, 60, |x, y| {
        if (30..50).contains(&x) && (20..40).contains(&y) {
            [250, 30, 30]
        } else {
            [90, 90, 90]
        }
    });
    let s = compute_saliency(&img).unwrap();
    assert!(s.get(40, 30) > s.get(5, 5));
    let m = low_saliency_mask(&s);
    assert!(m.mask.get(5, 5) && !m.mask.get(40, 30));
}
