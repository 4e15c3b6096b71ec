"""Regenerates the bundled 512x256 test images and head traces.

Run from the repository root: python3 fixtures/make_fixtures.py
Requires numpy, scikit-image and Pillow.
"""
import math
import os

import numpy as np
from PIL import Image
from skimage import data, transform

OUT = os.path.dirname(os.path.abspath(__file__))
W, H = 512, 256


def resize(img, h, w):
    out = transform.resize(img, (h, w), anti_aliasing=True, preserve_range=True)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def center_crop_2to1(img):
    h, w = img.shape[:2]
    if w >= 2 * h:
        x0 = (w - 2 * h) // 2
        return img[:, x0:x0 + 2 * h]
    ch = w // 2
    y0 = (h - ch) // 2
    return img[y0:y0 + ch]


def panorama(rng):
    """Sky, a horizon with wrapping ridge lines and textured ground."""
    y = np.arange(H)[:, None].astype(np.float64)
    x = np.arange(W)[None, :].astype(np.float64)
    lon = 2 * np.pi * x / W
    sky = 200 - 60 * (y / H)
    ridge = 110 + 12 * np.sin(3 * lon) + 7 * np.sin(7 * lon + 1.3) + 3 * np.sin(19 * lon)
    img = np.where(y < ridge, sky, 0.0)
    ground = 90 + 25 * np.sin(0.25 * y) * np.cos(2 * lon) + 0.15 * (y - 128)
    stripes = 10 * np.sin(40 * lon + 0.05 * y)
    img = np.where(y >= ridge, ground + stripes, img)
    # a few "buildings" wrapping around the seam
    for k in range(6):
        cx = (k * 97 + 31) % W
        bw = 20 + 7 * k
        top = 70 + 9 * k
        cols = (np.arange(cx, cx + bw) % W)
        img[top:int(ridge.min()) + 20, cols] = 60 + 18 * k
        for wy in range(top + 6, int(ridge.min()) + 14, 12):
            img[wy:wy + 4, cols[2::6]] = 230
    img += rng.normal(0, 2.0, img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def walk(rng, steps, start_lon, start_lat, speed):
    lon, lat = start_lon, start_lat
    dlon = rng.normal(0, speed)
    dlat = rng.normal(0, speed / 3)
    rows = []
    for t in range(steps):
        rows.append((t * 200, lon, lat))
        dlon = 0.7 * dlon + rng.normal(0, speed)
        dlat = 0.6 * dlat + rng.normal(0, speed / 3)
        lon = (lon + dlon + math.pi) % (2 * math.pi) - math.pi
        lat = max(-1.2, min(1.2, lat + dlat))
    return rows


def main():
    rng = np.random.default_rng(20201018)
    rocket = resize(center_crop_2to1(data.rocket()), H, W)
    Image.fromarray(rocket).save(os.path.join(OUT, "rocket_512x256.png"))

    coffee = resize(center_crop_2to1(data.coffee()), H, W)
    gray = np.rint(coffee @ np.array([0.299, 0.587, 0.114])).clip(0, 255).astype(np.uint8)
    Image.fromarray(gray).save(os.path.join(OUT, "coffee_512x256.pgm"))

    Image.fromarray(panorama(rng)).save(os.path.join(OUT, "panorama_512x256.png"))

    with open(os.path.join(OUT, "trace_users4.csv"), "w") as f:
        f.write("user_id,t_ms,longitude_rad,latitude_rad\n")
        for user in range(4):
            start_lon = rng.uniform(-math.pi, math.pi)
            start_lat = rng.normal(0, 0.2)
            for t, lon, lat in walk(rng, 10, start_lon, start_lat, 0.06):
                f.write(f"u{user},{t},{lon:.6f},{lat:.6f}\n")


if __name__ == "__main__":
    main()
