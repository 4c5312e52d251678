#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use textsynth::appearance::{build_database, AppearanceDatabase, GtFormat, HogFeature};
use textsynth::pipeline::SynthConfig;
use textsynth::raster::{save_png, Colorspace, Raster, RasterImage};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn fonts_dir() -> PathBuf {
    fixtures().join("fonts")
}

pub fn oracle() -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(fixtures().join("oracle.json")).unwrap()).unwrap()
}

pub fn rgb_from_fn(w: usize, h: usize, f: impl Fn(usize, usize) -> [u8; 3]) -> RasterImage {
    let mut d = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            d.extend(f(x, y));
        }
    }
    Raster::from_vec(w, h, 3, Colorspace::Srgb8, d).unwrap()
}

/// Straight-line HoG in double precision: gray, bilinear 32x32, centered
/// differences with clamped borders, 9 interpolated unsigned bins, 2x2 blocks,
/// L2-Hys.
pub fn reference_hog(img: &RasterImage) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let mut gray = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            let p = img.pixel(x, y);
            gray[y * w + x] = if p.len() == 1 {
                p[0] as f64 / 255.0
            } else {
                (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) / 255.0
            };
        }
    }
    let mut small = [[0.0f64; 32]; 32];
    for (oy, row) in small.iter_mut().enumerate() {
        for (ox, v) in row.iter_mut().enumerate() {
            let fx = ((ox as f64 + 0.5) * w as f64 / 32.0 - 0.5)
                .max(0.0)
                .min((w - 1) as f64);
            let fy = ((oy as f64 + 0.5) * h as f64 / 32.0 - 0.5)
                .max(0.0)
                .min((h - 1) as f64);
            let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
            let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
            let g = |x: usize, y: usize| gray[y * w + x];
            *v = (g(x0, y0) * (1.0 - tx) + g(x1, y0) * tx) * (1.0 - ty)
                + (g(x0, y1) * (1.0 - tx) + g(x1, y1) * tx) * ty;
        }
    }
    let mut cells = [[[0.0f64; 9]; 4]; 4];
    for y in 0..32usize {
        for x in 0..32usize {
            let xm = x.saturating_sub(1);
            let xp = (x + 1).min(31);
            let ym = y.saturating_sub(1);
            let yp = (y + 1).min(31);
            let gx = small[y][xp] - small[y][xm];
            let gy = small[yp][x] - small[ym][x];
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let mut deg = gy.atan2(gx) * 180.0 / std::f64::consts::PI;
            while deg < 0.0 {
                deg += 180.0;
            }
            while deg >= 180.0 {
                deg -= 180.0;
            }
            let pos = deg / 20.0;
            let lo = pos.floor() as usize % 9;
            let frac = pos - pos.floor();
            cells[y / 8][x / 8][lo] += mag * (1.0 - frac);
            cells[y / 8][x / 8][(lo + 1) % 9] += mag * frac;
        }
    }
    let mut out = Vec::new();
    for by in 0..3 {
        for bx in 0..3 {
            let mut block: Vec<f64> = Vec::new();
            block.extend(cells[by][bx]);
            block.extend(cells[by][bx + 1]);
            block.extend(cells[by + 1][bx]);
            block.extend(cells[by + 1][bx + 1]);
            let n = (block.iter().map(|v| v * v).sum::<f64>() + 1e-12).sqrt();
            for v in block.iter_mut() {
                *v = (*v / n).min(0.2);
            }
            let n = (block.iter().map(|v| v * v).sum::<f64>() + 1e-12).sqrt();
            out.extend(block.iter().map(|v| v / n));
        }
    }
    out
}

/// Full sort of every record by (distance, source_id), truncated to `k`.
pub fn brute_knn(db: &AppearanceDatabase, q: &HogFeature, k: usize) -> Vec<(String, f64)> {
    let mut all: Vec<(String, f64)> = db
        .records
        .iter()
        .map(|r| {
            let mut s = 0.0f64;
            for i in 0..r.h_b.0.len() {
                let d = r.h_b.0[i] as f64 - q.0[i] as f64;
                s += d * d;
            }
            (r.source_id.clone(), s.sqrt())
        })
        .collect();
    all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

pub const PALETTE: &str = "1\tsky\n2\twall\n3\tperson\n4\tfloor\n5\ttree\n";
pub const ALLOWED: [u8; 2] = [2, 4];

/// A background and its class-id map: a sky band, a large wall, a floor band,
/// a person and a tree standing on top, each with its own texture.
pub fn scene(w: usize, h: usize, seed: u64) -> (RasterImage, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sky_h = (h as f32 * rng.gen_range(0.15..0.3)) as usize;
    let floor_y = h - (h as f32 * rng.gen_range(0.12..0.25)) as usize;
    let pw = w / rng.gen_range(6..10);
    let px = rng.gen_range(0..w - pw);
    let tree_x = rng.gen_range(0..w - w / 8);
    let wall = [
        rng.gen_range(120..220u8),
        rng.gen_range(100..200),
        rng.gen_range(80..180),
    ];
    let floor = [
        rng.gen_range(60..120u8),
        rng.gen_range(50..100),
        rng.gen_range(40..90),
    ];
    let mut labels = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            labels[y * w + x] = if y < sky_h {
                1
            } else if x >= px && x < px + pw && y > sky_h + h / 6 {
                3
            } else if x >= tree_x && x < tree_x + w / 8 && y < sky_h + h / 4 {
                5
            } else if y >= floor_y {
                4
            } else {
                2
            };
        }
    }
    let noise: Vec<i16> = (0..w * h).map(|_| rng.gen_range(-3..=3)).collect();
    let img = rgb_from_fn(w, h, |x, y| {
        let n = noise[y * w + x];
        let base = match labels[y * w + x] {
            1 => [150, 190, (230 - (y * 40 / h.max(1))) as u8],
            2 => wall,
            3 => [200, 30, 40],
            4 => floor,
            _ => [30, 140 + ((x * 7 + y * 13) % 60) as u8, 40],
        };
        base.map(|c| (c as i16 + n).clamp(0, 255) as u8)
    });
    (img, labels)
}

pub fn save_labels(labels: &[u8], w: usize, h: usize, path: &Path) {
    let img = Raster::from_vec(w, h, 1, Colorspace::Gray, labels.to_vec()).unwrap();
    save_png(&img, path).unwrap();
}

/// The appearance database built from the bundled 50-box dataset.
pub fn fixture_database(path: &Path) {
    let build = build_database(&fixtures().join("dataset50"), GtFormat::IcdarWord).unwrap();
    build.db.save(path).unwrap();
}

pub const WORDS: &str =
    "exit open cafe STOP hotel bank road sale push Main office north station garden 42 Hall\n";

/// Writes backgrounds, maps, database, fonts and corpus for `n` scenes of
/// `w`x`h` under `root` and returns a config for them.
pub fn scene_set(root: &Path, n: usize, w: usize, h: usize, seed: u64) -> SynthConfig {
    for d in ["bg", "maps", "fonts"] {
        std::fs::create_dir_all(root.join(d)).unwrap();
    }
    for i in 0..n {
        let (img, labels) = scene(w, h, seed.wrapping_add(i as u64));
        save_png(&img, &root.join(format!("bg/scene_{i:03}.png"))).unwrap();
        save_labels(&labels, w, h, &root.join(format!("maps/scene_{i:03}.png")));
    }
    std::fs::write(root.join("maps/palette.txt"), PALETTE).unwrap();
    for f in ["DejaVuSans.ttf", "DejaVuSerif.ttf"] {
        std::fs::copy(fonts_dir().join(f), root.join("fonts").join(f)).unwrap();
    }
    fixture_database(&root.join("db.jsonl"));
    std::fs::write(root.join("words.txt"), WORDS).unwrap();
    let json = serde_json::json!({
        "backgrounds": "bg",
        "semantic_maps": "maps",
        "appearance_db": "db.jsonl",
        "fonts": "fonts",
        "corpus": [{"path": "words.txt", "language": "en"}],
        "output": "out",
        "seed": 42,
        "count": n,
    });
    std::fs::write(
        root.join("config.json"),
        serde_json::to_string_pretty(&json).unwrap(),
    )
    .unwrap();
    SynthConfig::load(&root.join("config.json")).unwrap()
}

pub fn dir_files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}
