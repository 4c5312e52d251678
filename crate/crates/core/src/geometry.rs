//! Rectangles, rotated boxes and quadrilaterals in pixel coordinates.
//!
//! Coordinates follow the image convention: x grows right, y grows down,
//! pixel `(x, y)` covers `[x, x+1) x [y, y+1)` and has its center at
//! `(x + 0.5, y + 0.5)`. Angles are measured in that frame, so a positive
//! `theta` turns clockwise on screen.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f32,
    pub y: f32,
}

impl Point {
    pub fn new(x: f32, y: f32) -> Self {
        Self { x, y }
    }
}

/// Axis-aligned pixel rectangle `[x, x+w) x [y, y+h)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }

    pub fn right(&self) -> usize {
        self.x + self.w
    }

    pub fn bottom(&self) -> usize {
        self.y + self.h
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.right() && y >= self.y && y < self.bottom()
    }

    /// Grows the rectangle by `margin` on every side, clipped to `width x height`.
    pub fn expand_clipped(&self, margin: usize, width: usize, height: usize) -> Rect {
        let x0 = self.x.saturating_sub(margin);
        let y0 = self.y.saturating_sub(margin);
        let x1 = (self.right() + margin).min(width);
        let y1 = (self.bottom() + margin).min(height);
        Rect::new(x0, y0, x1.saturating_sub(x0), y1.saturating_sub(y0))
    }

    /// Rectangle of size `w x h` centered at `(cx, cy)`, clipped to the image.
    pub fn centered_clipped(cx: f32, cy: f32, w: f32, h: f32, width: usize, height: usize) -> Rect {
        let x0 = (cx - w / 2.0).floor().max(0.0) as usize;
        let y0 = (cy - h / 2.0).floor().max(0.0) as usize;
        let x1 = ((cx + w / 2.0).ceil().max(0.0) as usize).min(width);
        let y1 = ((cy + h / 2.0).ceil().max(0.0) as usize).min(height);
        Rect::new(x0, y0, x1.saturating_sub(x0), y1.saturating_sub(y0))
    }
}

/// Four corners, clockwise on screen starting from the top-left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quad(pub [Point; 4]);

impl Quad {
    pub fn from_rect(r: &Rect) -> Quad {
        let (x0, y0, x1, y1) = (r.x as f32, r.y as f32, r.right() as f32, r.bottom() as f32);
        Quad([
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ])
    }

    pub fn corners(&self) -> &[Point; 4] {
        &self.0
    }

    pub fn rounded(&self) -> Quad {
        Quad(self.0.map(|p| Point::new(p.x.round(), p.y.round())))
    }

    pub fn area(&self) -> f32 {
        polygon_area(&self.0).abs()
    }

    pub fn in_bounds(&self, width: usize, height: usize) -> bool {
        const EPS: f32 = 1e-3;
        self.0.iter().all(|p| {
            p.x >= -EPS && p.y >= -EPS && p.x <= width as f32 + EPS && p.y <= height as f32 + EPS
        })
    }

    /// Whether `p` lies inside the (convex) quad or on its boundary.
    pub fn contains(&self, p: Point) -> bool {
        convex_contains(&self.0, p)
    }

    /// Integer bounding box of the corners, clipped to the image.
    pub fn bounding_rect(&self, width: usize, height: usize) -> Rect {
        let (mut x0, mut y0, mut x1, mut y1) = (f32::MAX, f32::MAX, f32::MIN, f32::MIN);
        for p in &self.0 {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        let cx0 = x0.floor().max(0.0) as usize;
        let cy0 = y0.floor().max(0.0) as usize;
        let cx1 = (x1.ceil().max(0.0) as usize).min(width);
        let cy1 = (y1.ceil().max(0.0) as usize).min(height);
        Rect::new(cx0, cy0, cx1.saturating_sub(cx0), cy1.saturating_sub(cy0))
    }

    /// Pixels whose centers fall inside the quad, clipped to the image.
    pub fn pixels(&self, width: usize, height: usize) -> impl Iterator<Item = (usize, usize)> {
        self.row_spans(width, height)
            .into_iter()
            .flat_map(|(y, x0, x1)| (x0..x1).map(move |x| (x, y)))
    }

    /// The same pixels as [`Quad::pixels`], as half-open runs `(y, x0, x1)`.
    ///
    /// Each run is located analytically, then its ends are settled with
    /// [`Quad::contains`] so the result agrees with a per-pixel test.
    pub fn row_spans(&self, width: usize, height: usize) -> Vec<(usize, usize, usize)> {
        let r = self.bounding_rect(width, height);
        let mut out = Vec::with_capacity(r.h);
        if r.w == 0 {
            return out;
        }
        let inside = |x: usize, y: usize| self.contains(Point::new(x as f32 + 0.5, y as f32 + 0.5));
        let c = &self.0;
        for y in r.y..r.bottom() {
            let yc = y as f32 + 0.5;
            let (mut lo, mut hi) = (f32::MAX, f32::MIN);
            for i in 0..4 {
                let (p, q) = (c[i], c[(i + 1) % 4]);
                if (yc < p.y.min(q.y)) || (yc > p.y.max(q.y)) {
                    continue;
                }
                let x = if p.y == q.y {
                    lo = lo.min(p.x.min(q.x));
                    p.x.max(q.x)
                } else {
                    p.x + (yc - p.y) * (q.x - p.x) / (q.y - p.y)
                };
                lo = lo.min(x);
                hi = hi.max(x);
            }
            if lo > hi {
                lo = r.x as f32;
                hi = lo;
            }
            let clampx = |v: f32| (v.max(r.x as f32).min((r.right() - 1) as f32)) as usize;
            let mut x0 = clampx((lo - 0.5).ceil());
            let mut x1 = clampx((hi - 0.5).floor());
            if x0 > x1 {
                x1 = x0;
            }
            while x0 <= x1 && !inside(x0, y) {
                x0 += 1;
            }
            if x0 > x1 {
                continue;
            }
            while x1 > x0 && !inside(x1, y) {
                x1 -= 1;
            }
            while x0 > r.x && inside(x0 - 1, y) {
                x0 -= 1;
            }
            while x1 + 1 < r.right() && inside(x1 + 1, y) {
                x1 += 1;
            }
            out.push((y, x0, x1 + 1));
        }
        out
    }

    pub fn iou(&self, other: &Quad) -> f32 {
        convex_iou(&self.0, &other.0)
    }
}

/// A `width x height` rectangle centered at `center` and turned by `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotatedRect {
    pub center: Point,
    pub width: f32,
    pub height: f32,
    pub theta: f32,
}

impl RotatedRect {
    pub fn new(center: Point, width: f32, height: f32, theta: f32) -> Self {
        Self {
            center,
            width,
            height,
            theta,
        }
    }

    pub fn quad(&self) -> Quad {
        let (s, c) = self.theta.sin_cos();
        let (hw, hh) = (self.width / 2.0, self.height / 2.0);
        let at = |lx: f32, ly: f32| {
            Point::new(
                self.center.x + lx * c - ly * s,
                self.center.y + lx * s + ly * c,
            )
        };
        Quad([at(-hw, -hh), at(hw, -hh), at(hw, hh), at(-hw, hh)])
    }

    /// Exact point test in the rectangle's own frame.
    #[inline]
    pub fn contains(&self, p: Point) -> bool {
        let (s, c) = self.theta.sin_cos();
        let (dx, dy) = (p.x - self.center.x, p.y - self.center.y);
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        u.abs() <= self.width / 2.0 && v.abs() <= self.height / 2.0
    }
}

pub fn polygon_area(poly: &[Point]) -> f32 {
    let n = poly.len();
    let mut acc = 0.0f64;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        acc += a.x as f64 * b.y as f64 - b.x as f64 * a.y as f64;
    }
    (acc / 2.0) as f32
}

#[inline]
fn cross(o: Point, a: Point, b: Point) -> f32 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn convex_contains(poly: &[Point], p: Point) -> bool {
    let n = poly.len();
    let (mut pos, mut neg) = (false, false);
    for i in 0..n {
        let c = cross(poly[i], poly[(i + 1) % n], p);
        if c > 1e-4 {
            pos = true;
        } else if c < -1e-4 {
            neg = true;
        }
        if pos && neg {
            return false;
        }
    }
    true
}

fn oriented_ccw(poly: &[Point]) -> Vec<Point> {
    let mut v = poly.to_vec();
    if polygon_area(&v) < 0.0 {
        v.reverse();
    }
    v
}

/// Sutherland-Hodgman clip of `subject` by the convex `clip` polygon.
fn clip_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let mut out = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        if out.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % n]);
        let input = std::mem::take(&mut out);
        let m = input.len();
        for j in 0..m {
            let cur = input[j];
            let prev = input[(j + m - 1) % m];
            let cin = cross(a, b, cur) >= 0.0;
            let pin = cross(a, b, prev) >= 0.0;
            if cin {
                if !pin {
                    out.push(intersect(prev, cur, a, b));
                }
                out.push(cur);
            } else if pin {
                out.push(intersect(prev, cur, a, b));
            }
        }
    }
    out
}

fn intersect(p: Point, q: Point, a: Point, b: Point) -> Point {
    let (cp, cq) = (cross(a, b, p), cross(a, b, q));
    let t = cp / (cp - cq);
    Point::new(p.x + (q.x - p.x) * t, p.y + (q.y - p.y) * t)
}

/// Intersection-over-union of two convex polygons.
pub fn convex_iou(a: &[Point], b: &[Point]) -> f32 {
    let a = oriented_ccw(a);
    let b = oriented_ccw(b);
    let area_a = polygon_area(&a);
    let area_b = polygon_area(&b);
    let inter = clip_convex(&a, &b);
    let inter_area = if inter.len() < 3 {
        0.0
    } else {
        polygon_area(&inter).abs()
    };
    let union = area_a + area_b - inter_area;
    if union <= 0.0 {
        0.0
    } else {
        inter_area / union
    }
}
