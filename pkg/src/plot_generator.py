################################################################################
# FILE: plot_generator.py
# DESCRIPTION: Renders forced response curves into PNG images with Pillow.
# AUTHOR: MSCRNT LLC.
#
# THIS CODE IS PROPRIETARY PROPERTY OF MSCRNT LLC.
################################################################################

import os
import time
import logging
import logging.handlers

import numpy as np
from PIL import Image, ImageDraw, ImageFont

# Configure logging
LOG_DIR = os.getenv("FRC_LOG_DIR", "logs")
os.makedirs(LOG_DIR, exist_ok=True)
log_file = os.path.join(LOG_DIR, "frcSolver.log")

logger = logging.getLogger("plot_generator")
logger.setLevel(logging.INFO)
if not logger.handlers:
    handler = logging.handlers.TimedRotatingFileHandler(log_file, when="midnight", interval=1, backupCount=7, utc=True)
    handler.setFormatter(logging.Formatter('%(asctime)s - %(levelname)s - %(message)s'))
    logger.addHandler(handler)

# Image settings
IMG_WIDTH = 900
IMG_HEIGHT = 600
MARGIN_LEFT = 80
MARGIN_RIGHT = 30
MARGIN_TOP = 40
MARGIN_BOTTOM = 60
TICKS = 5
PLOT_DIR = os.getenv("FRC_PLOT_DIR", "tmp/plots")
MAX_PLOTS = int(os.getenv("FRC_MAX_PLOTS", 10))  # Keep only the latest plots of each type

CURVE_COLORS = [
    (31, 119, 180),
    (214, 39, 40),
    (44, 160, 44),
    (255, 127, 14),
    (148, 103, 189),
    (140, 86, 75),
    (227, 119, 194),
    (23, 190, 207),
]


def cleanup_old_images(image_type, plot_dir=None):
    """Deletes older images, keeping only the latest MAX_PLOTS."""
    plot_dir = plot_dir or PLOT_DIR
    images = sorted([f for f in os.listdir(plot_dir) if f.startswith(f"{image_type}_") and f.endswith(".png")],
                    reverse=True)

    if len(images) > MAX_PLOTS:
        for old_image in images[MAX_PLOTS:]:
            os.remove(os.path.join(plot_dir, old_image))
            logger.info(f"Deleted old {image_type} image: {old_image}")


def save_image(image, image_type, plot_dir=None):
    """Saves the image with a timestamped name and prunes old ones. Returns the path."""
    plot_dir = plot_dir or PLOT_DIR
    os.makedirs(plot_dir, exist_ok=True)
    # name order is save order: timestamp, then a counter within the same second
    prefix = f"{image_type}_{time.strftime('%Y%m%d-%H%M%S')}_"
    taken = [int(f[len(prefix):-4]) for f in os.listdir(plot_dir)
             if f.startswith(prefix) and f.endswith(".png") and f[len(prefix):-4].isdigit()]
    image_path = os.path.join(plot_dir, f"{prefix}{max(taken, default=0) + 1:04d}.png")

    image.save(image_path)
    logger.info(f"{image_type.upper()} image saved: {image_path}")

    cleanup_old_images(image_type, plot_dir)
    return image_path


def _axis_range(values):
    lo, hi = float(np.min(values)), float(np.max(values))
    if hi <= lo:
        pad = abs(lo) * 0.05 or 1.0
        return lo - pad, hi + pad
    return lo, hi + 0.05 * (hi - lo)


def _segments(omegas, amplitudes):
    """Split a curve at non-finite amplitudes."""
    segment = []
    for w, a in zip(omegas, amplitudes):
        if np.isfinite(a):
            segment.append((w, a))
        elif segment:
            yield segment
            segment = []
    if segment:
        yield segment


def render_frc(curves, title="Forced response curves"):
    """curves: [(label, omegas, amplitudes), ...] -> PIL image (None if nothing to draw)."""
    finite = [(label, np.asarray(w, float), np.asarray(a, float)) for label, w, a in curves]
    all_w = np.concatenate([w for _, w, _ in finite]) if finite else np.array([])
    all_a = np.concatenate([a[np.isfinite(a)] for _, _, a in finite]) if finite else np.array([])
    if all_a.size == 0:
        logger.warning("No converged points to plot.")
        return None

    w_lo, w_hi = float(np.min(all_w)), float(np.max(all_w))
    if w_hi <= w_lo:
        w_lo, w_hi = w_lo - 0.5, w_hi + 0.5
    a_lo, a_hi = _axis_range(np.append(all_a, 0.0))

    image = Image.new("RGB", (IMG_WIDTH, IMG_HEIGHT), (255, 255, 255))
    draw = ImageDraw.Draw(image)
    font = ImageFont.load_default()

    x0, x1 = MARGIN_LEFT, IMG_WIDTH - MARGIN_RIGHT
    y0, y1 = IMG_HEIGHT - MARGIN_BOTTOM, MARGIN_TOP

    def to_pixel(w, a):
        return (x0 + (w - w_lo) / (w_hi - w_lo) * (x1 - x0),
                y0 - (a - a_lo) / (a_hi - a_lo) * (y0 - y1))

    # Axes and ticks
    draw.rectangle([x0, y1, x1, y0], outline=(0, 0, 0), width=1)
    for i in range(TICKS + 1):
        w = w_lo + i * (w_hi - w_lo) / TICKS
        a = a_lo + i * (a_hi - a_lo) / TICKS
        px, _ = to_pixel(w, a_lo)
        _, py = to_pixel(w_lo, a)
        draw.line([(px, y0), (px, y0 + 5)], fill=(0, 0, 0))
        draw.text((px - 15, y0 + 8), f"{w:.3g}", font=font, fill=(0, 0, 0))
        draw.line([(x0 - 5, py), (x0, py)], fill=(0, 0, 0))
        draw.text((5, py - 6), f"{a:.3g}", font=font, fill=(0, 0, 0))
    draw.text(((x0 + x1) // 2 - 40, IMG_HEIGHT - 25), "excitation frequency", font=font, fill=(0, 0, 0))
    draw.text((x0, 10), title, font=font, fill=(0, 0, 0))

    # Curves, broken where a point did not converge
    for index, (label, omegas, amplitudes) in enumerate(finite):
        color = CURVE_COLORS[index % len(CURVE_COLORS)]
        for segment in _segments(omegas, amplitudes):
            pixels = [to_pixel(w, a) for w, a in segment]
            if len(pixels) == 1:
                px, py = pixels[0]
                draw.ellipse([px - 2, py - 2, px + 2, py + 2], fill=color)
            else:
                draw.line(pixels, fill=color, width=2)

        # Legend
        ly = y1 + 10 + 16 * index
        draw.line([(x1 - 190, ly + 6), (x1 - 165, ly + 6)], fill=color, width=3)
        draw.text((x1 - 160, ly), label, font=font, fill=(0, 0, 0))

    return image


def generate_frc_image(curves, title="Forced response curves", plot_dir=None):
    """Renders and saves the FRC figure; returns the saved path or None."""
    logger.info(f"Generating FRC image with {len(curves)} curves.")
    try:
        image = render_frc(curves, title)
        if image is None:
            return None
        return save_image(image, "frc", plot_dir)
    except (OSError, ValueError) as e:
        logger.error(f"Failed to generate FRC image: {e}")
        return None
