mod common;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use textsynth::appearance::*;
use textsynth::geometry::Rect;

#[test]
fn hog_matches_reference_on_textured_patches() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (w, h) in [(32, 32), (50, 37), (97, 41), (20, 64)] {
        let blobs: Vec<(f32, f32, f32)> = (0..6)
            .map(|_| {
                (
                    rng.gen_range(0.0..w as f32),
                    rng.gen_range(0.0..h as f32),
                    rng.gen_range(3.0..12.0),
                )
            })
            .collect();
        let noise: Vec<i32> = (0..w * h * 3).map(|_| rng.gen_range(-20..=20)).collect();
        let img = common::rgb_from_fn(w, h, |x, y| {
            let mut v = 60.0 + 40.0 * ((x as f32) / 5.0).sin();
            for &(bx, by, r) in &blobs {
                if (x as f32 - bx).hypot(y as f32 - by) < r {
                    v += 70.0;
                }
            }
            let i = (y * w + x) * 3;
            [0, 1, 2].map(|c| (v as i32 + noise[i + c] + c as i32 * 15).clamp(0, 255) as u8)
        });
        let got = extract_hog(&img).unwrap();
        let want = common::reference_hog(&img);
        assert_eq!(got.len(), HOG_LEN);
        assert_eq!(want.len(), HOG_LEN);
        for (i, (a, b)) in got.0.iter().zip(&want).enumerate() {
            assert!((*a as f64 - b).abs() < 1e-5, "{w}x{h} dim {i}: {a} vs {b}");
        }
    }
}

#[test]
fn fixture_dataset_statistics_match_oracle() {
    let build = build_database(&common::fixtures().join("dataset50"), GtFormat::IcdarWord).unwrap();
    assert!(build.skipped.is_empty(), "{:?}", build.skipped);
    assert_eq!(build.db.len(), 50);
    let oracle = common::oracle();
    let want: BTreeMap<String, &serde_json::Value> = oracle["dataset50"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| (r["source_id"].as_str().unwrap().to_string(), r))
        .collect();
    assert_eq!(want.len(), 50);
    let mut worst = 0.0f32;
    for r in &build.db.records {
        let o = want[&r.source_id];
        let f = |k: &str| o[k].as_f64().unwrap() as f32;
        let pairs = [
            (r.mu_l, f("mu_l")),
            (r.sigma_l, f("sigma_l")),
            (r.mu_a, f("mu_a")),
            (r.sigma_a, f("sigma_a")),
            (r.mu_b, f("mu_b")),
            (r.sigma_b, f("sigma_b")),
        ];
        for (got, want) in pairs {
            worst = worst.max((got - want).abs());
        }
        assert_eq!(r.h_b.len(), HOG_LEN);
    }
    // The oracle's Lab uses the tabulated D65 white, which moves a and b by a few hundredths.
    assert!(worst <= 0.1, "worst deviation {worst}");
}

fn random_db(n: usize, rng: &mut ChaCha8Rng) -> AppearanceDatabase {
    let records = (0..n)
        .map(|i| AppearanceRecord {
            h_b: HogFeature((0..HOG_LEN).map(|_| rng.gen_range(0.0..0.2)).collect()),
            mu_l: 50.0,
            sigma_l: 1.0,
            mu_a: 0.0,
            sigma_a: 1.0,
            mu_b: 0.0,
            sigma_b: 1.0,
            source_id: format!("r{i:04}"),
        })
        .collect();
    AppearanceDatabase::new(records).unwrap()
}

#[test]
fn nearest_neighbors_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let db = random_db(200, &mut rng);
    for qi in 0..100 {
        let q = HogFeature((0..HOG_LEN).map(|_| rng.gen_range(0.0..0.2)).collect());
        let k = [1, 5, 17, 200, 500][qi % 5];
        let got: Vec<(String, f64)> = query_nearest(&db, &q, k)
            .iter()
            .map(|n| (n.record.source_id.clone(), n.distance))
            .collect();
        let want = common::brute_knn(&db, &q, k);
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            assert_eq!(g.0, w.0);
            assert!((g.1 - w.1).abs() < 1e-9);
        }
    }
}

#[test]
fn exact_ties_break_by_source_id() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut db = random_db(6, &mut rng);
    let shared = db.records[0].h_b.clone();
    for r in db.records.iter_mut() {
        r.h_b = shared.clone();
    }
    let ids: Vec<_> = query_nearest(&db, &shared, 6)
        .iter()
        .map(|n| n.record.source_id.clone())
        .collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
}

#[test]
fn font_choice_is_uniform() {
    let fonts = FontList::load_dir(&common::fonts_dir()).unwrap();
    let paths: Vec<_> = fonts.entries.iter().map(|f| f.path.clone()).collect();
    let four = FontList::from_paths(&[&paths[0], &paths[1], &paths[0], &paths[1]]).unwrap();
    assert_eq!(four.len(), 4);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut counts = [0usize; 4];
    let n = 20_000;
    for _ in 0..n {
        let f = pick_font(&four, &mut rng).unwrap();
        let i = four
            .entries
            .iter()
            .position(|e| std::ptr::eq(e, f))
            .unwrap();
        counts[i] += 1;
    }
    for c in counts {
        assert!((c as f64 / n as f64 - 0.25).abs() <= 0.02, "{counts:?}");
    }
    assert!(matches!(
        pick_font(&FontList::default(), &mut rng),
        Err(AppearanceError::EmptyFontList)
    ));
}

fn labelled(dir: &std::path::Path, boxes: &[(usize, usize, usize, usize)]) {
    std::fs::create_dir_all(dir.join("gt")).unwrap();
    let (w, h) = (160, 100);
    let img = common::rgb_from_fn(w, h, |x, y| {
        for &(bx, by, bw, bh) in boxes {
            if x >= bx
                && x < bx + bw
                && y >= by
                && y < by + bh
                && (x - bx) % 6 < 3
                && (y - by) > 2
                && (y - by) + 2 < bh
            {
                return [250, 245, 240];
            }
        }
        [40 + (x % 7) as u8, 60, 90]
    });
    textsynth::raster::save_png(&img, &dir.join("a.png")).unwrap();
    let gt: String = boxes
        .iter()
        .enumerate()
        .map(|(i, (x, y, bw, bh))| format!("{x}, {y}, {}, {}, \"w{i}\"\n", x + bw, y + bh))
        .collect();
    std::fs::write(dir.join("gt/gt_a.txt"), gt).unwrap();
}

#[test]
fn valid_boxes_each_yield_a_record() {
    let dir = tempfile::tempdir().unwrap();
    labelled(
        dir.path(),
        &[(10, 10, 40, 16), (70, 40, 50, 20), (20, 60, 30, 14)],
    );
    let b = build_database(dir.path(), GtFormat::IcdarWord).unwrap();
    assert_eq!(b.db.len(), 3);
    assert!(b.skipped.is_empty());
    for r in &b.db.records {
        assert!(r.mu_l > 80.0, "{r:?}");
    }
}

#[test]
fn flush_box_is_skipped_and_reported() {
    let dir = tempfile::tempdir().unwrap();
    labelled(dir.path(), &[(10, 10, 40, 16), (0, 0, 160, 100)]);
    let b = build_database(dir.path(), GtFormat::IcdarWord).unwrap();
    assert_eq!(b.db.len(), 1);
    assert_eq!(b.skipped.len(), 1);
    assert_eq!(b.skipped[0].source_id, "a.png#0001");
}

#[test]
fn record_from_crop_matches_moments_of_text_pixels() {
    let img = common::rgb_from_fn(80, 50, |x, y| {
        if (20..60).contains(&x) && (18..32).contains(&y) && x % 4 < 2 {
            [20, 20, 200]
        } else {
            [230, 230, 210]
        }
    });
    let r = build_record(&img, Rect::new(18, 16, 44, 18), "c#0").unwrap();
    let want = textsynth::raster::srgb8_to_lab([20, 20, 200]);
    assert!(
        (r.mu_l - want.l).abs() < 1e-3
            && (r.mu_a - want.a).abs() < 1e-3
            && (r.mu_b - want.b).abs() < 1e-3
    );
    assert!(r.sigma_l < 1e-3 && r.sigma_a < 1e-3 && r.sigma_b < 1e-3);
}

#[test]
fn stale_database_is_rejected_and_current_one_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("db.jsonl");
    common::fixture_database(&path);
    let db = AppearanceDatabase::load(&path).unwrap();
    assert_eq!(db.len(), 50);
    let again = dir.path().join("again.jsonl");
    db.save(&again).unwrap();
    assert_eq!(
        std::fs::read(&path).unwrap(),
        std::fs::read(&again).unwrap()
    );

    let text = std::fs::read_to_string(&path).unwrap();
    let stale = text.replacen(DATABASE_VERSION, "hog16/v0", 1);
    std::fs::write(&path, stale).unwrap();
    match AppearanceDatabase::load(&path) {
        Err(AppearanceError::StaleDatabase { found, .. }) => assert_eq!(found, "hog16/v0"),
        other => panic!("{other:?}"),
    }
}
