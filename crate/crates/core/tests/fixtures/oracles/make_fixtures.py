"""Regenerates the oracle fixtures under tests/fixtures.

Independent of the Rust code: colors go through scikit-image, glyph bounds
through fontTools, drawing through Pillow.

    python3 tests/fixtures/oracles/make_fixtures.py
"""

import json
import math
import pathlib

import numpy as np
from fontTools.pens.boundsPen import BoundsPen
from fontTools.ttLib import TTFont
from PIL import Image, ImageDraw, ImageFont
from skimage.color import rgb2lab

HERE = pathlib.Path(__file__).resolve().parent
FIX = HERE.parent
FONT = FIX / "fonts" / "DejaVuSans.ttf"
WORDS = ["exit", "open", "Cafe", "STOP", "hotel", "bank", "road", "sale", "push", "Main"]


def textured_background(rng, w, h):
    base = rng.integers(40, 215, size=3)
    yy, xx = np.mgrid[0:h, 0:w]
    grad = (xx / w * rng.uniform(-30, 30) + yy / h * rng.uniform(-30, 30))[..., None]
    noise = rng.normal(0, 4, size=(h, w, 3))
    return np.clip(base + grad + noise, 0, 255).astype(np.uint8)


def make_dataset(root, images=10, boxes=5, seed=7):
    rng = np.random.default_rng(seed)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "gt").mkdir(parents=True, exist_ok=True)
    font_cache = {}
    for i in range(images):
        w, h = 320, 240
        arr = textured_background(rng, w, h)
        img = Image.fromarray(arr)
        draw = ImageDraw.Draw(img)
        lines = []
        for b in range(boxes):
            size = int(rng.integers(16, 30))
            font = font_cache.setdefault(size, ImageFont.truetype(str(FONT), size))
            word = WORDS[int(rng.integers(len(WORDS)))]
            x0 = 12 + (b % 2) * 150 + int(rng.integers(0, 20))
            y0 = 12 + b * 44 + int(rng.integers(0, 6))
            bg = arr[y0:y0 + size, x0:x0 + size].reshape(-1, 3).mean(0)
            fg = tuple(int(v) for v in (255 - bg + rng.integers(-20, 20, size=3)).clip(0, 255))
            draw.text((x0, y0), word, font=font, fill=fg)
            left, top, right, bottom = draw.textbbox((x0, y0), word, font=font)
            lines.append(f'{left - 2}, {top - 2}, {right + 2}, {bottom + 2}, "{word}"')
        stem = f"img_{i:02d}"
        img.save(root / "images" / f"{stem}.png")
        (root / "gt" / f"gt_{stem}.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def ring_width(h):
    return max(4, int(math.floor(0.5 * h + 0.5)))


def otsu(hist):
    total = hist.sum()
    if np.count_nonzero(hist) < 2:
        return None
    sum_all = float((np.arange(256) * hist).sum())
    w0 = 0
    sum0 = 0.0
    best, best_t = -1.0, 0
    for t in range(255):
        w0 += int(hist[t])
        sum0 += t * float(hist[t])
        w1 = total - w0
        if w0 == 0 or w1 == 0:
            continue
        m0 = sum0 / w0
        m1 = (sum_all - sum0) / w1
        between = w0 * w1 * (m0 - m1) ** 2
        if between > best:
            best, best_t = between, t
    return best_t


def record_stats(lab, x0, y0, x1, y1):
    H, W = lab.shape[:2]
    r = ring_width(y1 - y0)
    px0, py0 = max(0, x0 - r), max(0, y0 - r)
    px1, py1 = min(W, x1 + r), min(H, y1 + r)
    if (px0, py0, px1, py1) == (x0, y0, x1, y1):
        return None, "no ring"
    ring = np.ones((py1 - py0, px1 - px0), bool)
    ring[y0 - py0:y1 - py0, x0 - px0:x1 - px0] = False
    ring_l = lab[py0:py1, px0:px1, 0][ring].mean()
    box = lab[y0:y1, x0:x1].reshape(-1, 3)
    bins = np.clip(np.floor(box[:, 0] * 2.56), 0, 255).astype(int)
    t = otsu(np.bincount(bins, minlength=256))
    if t is None:
        return None, "flat"
    dark, light = box[bins <= t], box[bins > t]
    dd, dl = abs(dark[:, 0].mean() - ring_l), abs(light[:, 0].mean() - ring_l)
    if abs(dd - dl) < 2.0:
        text = dark if len(dark) < len(light) else light
    else:
        text = dark if dd > dl else light
    if len(text) < 10:
        return None, "few pixels"
    mu, sd = text.mean(0), text.std(0)
    return {
        "n_text": int(len(text)),
        "mu_l": float(mu[0]), "sigma_l": float(sd[0]),
        "mu_a": float(mu[1]), "sigma_a": float(sd[1]),
        "mu_b": float(mu[2]), "sigma_b": float(sd[2]),
    }, None


def dataset_oracle(root):
    out = []
    for img_path in sorted((root / "images").glob("*.png")):
        lab = rgb2lab(np.asarray(Image.open(img_path).convert("RGB")))
        H, W = lab.shape[:2]
        gt = (root / "gt" / f"gt_{img_path.stem}.txt").read_text(encoding="utf-8").splitlines()
        for k, line in enumerate(l for l in gt if l.strip()):
            x0, y0, x1, y1 = (float(v) for v in line.split(",")[:4])
            x0, y0 = max(0, math.floor(x0)), max(0, math.floor(y0))
            x1, y1 = min(W, math.ceil(x1)), min(H, math.ceil(y1))
            stats, why = record_stats(lab, x0, y0, x1, y1)
            if stats is not None:
                stats["source_id"] = f"{img_path.name}#{k:04d}"
                out.append(stats)
    return out


def hello_ink_box(px=32, pad=2):
    f = TTFont(str(FONT))
    hh = f["hhea"]
    scale = px / (hh.ascent - hh.descent)
    gs, cmap, hmtx = f.getGlyphSet(), f.getBestCmap(), f["hmtx"]
    pen = 0.0
    x0 = y0 = math.inf
    x1 = y1 = -math.inf
    for ch in "Hello":
        g = cmap[ord(ch)]
        bp = BoundsPen(gs)
        gs[g].draw(bp)
        if bp.bounds:
            a, b, c, d = bp.bounds
            x0 = min(x0, pad + pen + a * scale)
            x1 = max(x1, pad + pen + c * scale)
            y0 = min(y0, pad + (hh.ascent - d) * scale)
            y1 = max(y1, pad + (hh.ascent - b) * scale)
        pen += hmtx[g][0] * scale
    return {"px_height": px, "outline_bounds": [x0, y0, x1, y1],
            "ink": [math.floor(x0), math.floor(y0), math.ceil(x1) - math.floor(x0), math.ceil(y1) - math.floor(y0)]}


def bresenham(a, b):
    (x, y), (x1, y1) = a, b
    dx, dy = abs(x1 - x), -abs(y1 - y)
    sx, sy = (1 if x < x1 else -1), (1 if y < y1 else -1)
    err = dx + dy
    pts = []
    while True:
        pts.append((x, y))
        if (x, y) == (x1, y1):
            return pts
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy


def overlay_golden():
    w, h = 64, 48
    yy, xx = np.mgrid[0:h, 0:w]
    arr = np.stack([xx * 4, yy * 5, (xx + yy) * 2], -1).clip(0, 255).astype(np.uint8)
    quads = [
        [[4, 4], [30, 4], [30, 14], [4, 14]],
        [[36, 20], [58, 26], [55, 37], [33, 31]],
    ]
    Image.fromarray(arr).save(FIX / "overlay_input.png")
    out = arr.copy()
    for q in quads:
        for i in range(4):
            for x, y in bresenham(tuple(q[i]), tuple(q[(i + 1) % 4])):
                if 0 <= x < w and 0 <= y < h:
                    out[y, x] = (0, 255, 0)
    Image.fromarray(out).save(FIX / "overlay_golden.png")
    return quads


def main():
    ds = FIX / "dataset50"
    make_dataset(ds)
    expected = {
        "dataset50": dataset_oracle(ds),
        "hello": hello_ink_box(),
        "overlay_quads": overlay_golden(),
    }
    (FIX / "oracle.json").write_text(json.dumps(expected, indent=1) + "\n")
    print(len(expected["dataset50"]), "records;", expected["hello"])


if __name__ == "__main__":
    main()
