mod common;

use textsynth::appearance::{parse_ground_truth, FontEntry, GtFormat};
use textsynth::geometry::{Point, Quad};
use textsynth::placement::PlacementCandidate;
use textsynth::raster::{srgb8_to_lab, LabPixel};
use textsynth::rendering::*;

fn sans() -> FontEntry {
    FontEntry::load(&common::fonts_dir().join("DejaVuSans.ttf")).unwrap()
}

#[test]
fn hello_ink_matches_outline_oracle() {
    let oracle = common::oracle();
    let want: Vec<usize> = oracle["hello"]["ink"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap() as usize)
        .collect();
    let l = rasterize_text("Hello", &sans(), 32).unwrap();
    assert_eq!([l.ink.x, l.ink.y, l.ink.w, l.ink.h].to_vec(), want);
}

#[test]
fn small_and_growing_strings() {
    let f = sans();
    let dot = rasterize_text(".", &f, 24).unwrap();
    assert!(dot.ink.area() > 0 && dot.ink.area() < 24 * 24);
    let a = rasterize_text("A", &f, 24).unwrap();
    let ab = rasterize_text("AB", &f, 24).unwrap();
    assert!(ab.ink.w > a.ink.w);
    assert!(matches!(
        rasterize_text("日本", &f, 24),
        Err(RenderError::MissingGlyph('日'))
    ));
    assert!(matches!(
        rasterize_text("  ", &f, 24),
        Err(RenderError::EmptyText)
    ));
    assert!(matches!(
        rasterize_text("a", &f, 4),
        Err(RenderError::HeightTooSmall(4))
    ));
}

fn segment_distance(p: Point, a: Point, b: Point) -> f32 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    };
    (p.x - a.x - t * dx).hypot(p.y - a.y - t * dy)
}

/// Distance from `p` to the filled quad; zero inside.
fn quad_distance(q: &Quad, p: Point) -> f32 {
    if q.contains(p) {
        return 0.0;
    }
    let c = q.corners();
    (0..4)
        .map(|i| segment_distance(p, c[i], c[(i + 1) % 4]))
        .fold(f32::INFINITY, f32::min)
}

fn srgb_to_linear(v: u8) -> f64 {
    let c = v as f64 / 255.0;
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

#[test]
fn rotated_text_stays_inside_its_quad() {
    let f = sans();
    let (w, h) = (220, 140);
    let bg = common::rgb_from_fn(w, h, |x, y| {
        [((x * 3 + y) % 40) as u8, 0, ((x + y * 5) % 30) as u8]
    });
    let white = LabPixel::new(100.0, 0.0, 0.0);
    for deg in [15.0f32, -15.0, 40.0, 0.0] {
        let layout = rasterize_text("Waypoint", &f, 28).unwrap();
        let placement = PlacementCandidate {
            center: Point::new(110.0, 70.0),
            width: 150.0,
            height: 36.0,
            theta: deg.to_radians(),
            region_id: 0,
            score: 0.0,
        };
        let (out, quad) = composite(&bg, &layout, white, &placement);
        assert_eq!(quad, placed_quad(&layout, &placement));
        let mut lit = 0;
        for y in 0..h {
            for x in 0..w {
                let p = Point::new(x as f32 + 0.5, y as f32 + 0.5);
                let d = quad_distance(&quad, p);
                let (o, b) = (out.pixel(x, y), bg.pixel(x, y));
                if d > 2.0 {
                    assert_eq!(o, b, "{deg}: ({x},{y}) changed at distance {d}");
                }
                let a =
                    (srgb_to_linear(o[1]) - srgb_to_linear(b[1])) / (1.0 - srgb_to_linear(b[1]));
                if a > 0.5 {
                    lit += 1;
                    assert!(d <= 1.0, "{deg}: strong ink at ({x},{y}), {d} px outside");
                }
            }
        }
        assert!(lit > 100);
    }
}

#[test]
fn opaque_text_takes_the_requested_color() {
    let f = sans();
    let bg = common::rgb_from_fn(120, 60, |_, _| [240, 240, 240]);
    let layout = rasterize_text("MIII", &f, 40).unwrap();
    let target = srgb8_to_lab([30, 90, 160]);
    let placement = PlacementCandidate {
        center: Point::new(60.0, 30.0),
        width: layout.ink.w as f32 / 0.9,
        height: layout.ink.h as f32 / 0.9,
        theta: 0.0,
        region_id: 0,
        score: 0.0,
    };
    let (out, _) = composite(&bg, &layout, target, &placement);
    let solid = out
        .data()
        .chunks_exact(3)
        .filter(|p| *p == [30, 90, 160])
        .count();
    assert!(solid > 50, "{solid}");
}

#[test]
fn annotations_round_trip_through_the_parser() {
    let f = sans();
    let mut instances = Vec::new();
    for (i, word) in ["exit", "Main", "42"].iter().enumerate() {
        let layout = rasterize_text(word, &f, 20).unwrap();
        let placement = PlacementCandidate {
            center: Point::new(60.0 + 50.0 * i as f32, 40.0 + 17.0 * i as f32),
            width: 60.0,
            height: 22.0,
            theta: (i as f32 * 11.0 - 9.0).to_radians(),
            region_id: 0,
            score: 0.0,
        };
        instances.push(TextInstance {
            text: word.to_string(),
            font: "DejaVuSans.ttf".into(),
            px_height: 20,
            color: LabPixel::new(10.0, 0.0, 0.0),
            placement,
            quad: placed_quad(&layout, &placement),
            record_source_id: "img_00.png#0000".into(),
        });
    }
    let text = emit_annotations(&instances);
    let parsed = parse_ground_truth(&text, GtFormat::Quad).unwrap();
    assert_eq!(parsed.len(), 3);
    for (p, i) in parsed.iter().zip(&instances) {
        assert_eq!(p.transcript, i.text);
        assert_eq!(p.quad, i.quad);
    }
}
