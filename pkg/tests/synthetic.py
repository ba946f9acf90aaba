"""Deterministic synthetic images for tests: noise textures, blur, text overlays."""

import numpy as np
from PIL import Image, ImageDraw, ImageFont
from scipy.ndimage import gaussian_filter

from patchblur import GrayImage


def noise(shape, seed, smooth=0.0, contrast=1.0, offset=0.0):
    rng = np.random.default_rng(seed)
    a = rng.random(shape)
    if smooth > 0:
        a = gaussian_filter(a, smooth, mode="reflect")
        a = (a - a.min()) / max(a.max() - a.min(), 1e-12)
    a = 0.5 + (a - 0.5) * contrast + offset
    return np.clip(a, 0.0, 1.0)


def blur(a, sigma):
    return np.clip(gaussian_filter(np.asarray(a, dtype=np.float64), sigma, mode="reflect"), 0.0, 1.0)


def add_text(a, text="IMG_2041 2021-06-14 12:31", xy=(4, 4), scale=2, value=1.0):
    """Stamp bitmap text onto a copy of ``a`` (a top-left watermark by default)."""
    h, w = a.shape
    font = ImageFont.load_default()
    canvas = Image.new("L", (w // scale, h // scale), 0)
    ImageDraw.Draw(canvas).text((xy[0] // scale, xy[1] // scale), text, fill=255, font=font)
    mask = np.asarray(canvas.resize((w, h), Image.NEAREST), dtype=np.float64) / 255.0
    out = a.copy()
    out[mask > 0.5] = value
    return out


def to_png(a, path):
    Image.fromarray(np.round(np.asarray(a) * 255).astype(np.uint8)).save(path)


def textured_corpus(n_sharp=100, n_text=30, size=224, seed=0,
                    smooth=(0.5, 1.0), contrast=(0.05, 1.0), sigma=(0.8, 2.0)):
    """Sharp noise textures, a blurred copy of each, and text-stamped blurred images.

    Sharp textures are fine-grained noise with widely varying contrast and
    brightness; blurred copies use a Gaussian of random width.  The text
    images are blurred scenes carrying a crisp top-left watermark, so they
    are labeled blur.  Returns ``(images, labels, kinds)`` with 1 = blur.
    """
    rng = np.random.default_rng(seed)
    images, labels, kinds = [], [], []

    def texture(noise_seed):
        return noise((size, size), noise_seed, rng.uniform(*smooth), rng.uniform(*contrast),
                     rng.uniform(-0.2, 0.2))

    for i in range(n_sharp):
        sharp = texture(seed * 10_000 + i)
        images += [sharp, blur(sharp, rng.uniform(*sigma))]
        labels += [0, 1]
        kinds += ["sharp", "blur"]
    for i in range(n_text):
        base = blur(texture(seed * 10_000 + 5_000 + i), rng.uniform(*sigma))
        images.append(add_text(base, value=float(rng.choice([0.0, 1.0]))))
        labels.append(1)
        kinds.append("text")
    return [GrayImage(a) for a in images], labels, kinds
