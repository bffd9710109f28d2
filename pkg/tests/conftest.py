import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from pbda.core import BBox, EmbeddingTable, Manifest, Sample, save_embeddings, save_manifest

sys.path.insert(0, str(Path(__file__).parent))

# Capsule-endoscopy class counts: full labelled set, then split 1 and split 0.
TABLE1 = {
    "normal": 40074,
    "unclear_view": 2906,
    "angiectasia": 866,
    "ulcer": 854,
    "foreign_body": 776,
    "lymphangiectasia": 592,
    "erosion": 523,
    "blood_fresh": 446,
    "erythema": 159,
}
SPLIT1_IMAGES = {
    "normal": 19586,
    "unclear_view": 1119,
    "ulcer": 272,
    "blood_fresh": 22,
    "lymphangiectasia": 224,
    "foreign_body": 590,
    "erosion": 345,
    "angiectasia": 771,
    "erythema": 132,
}
SPLIT1_BBOXES = {
    "normal": 0,
    "unclear_view": 0,
    "ulcer": 272,
    "blood_fresh": 22,
    "lymphangiectasia": 224,
    "foreign_body": 590,
    "erosion": 345,
    "angiectasia": 771,
    "erythema": 90,
}
SPLIT0_IMAGES = {
    "normal": 20488,
    "unclear_view": 1787,
    "ulcer": 582,
    "blood_fresh": 424,
    "lymphangiectasia": 368,
    "foreign_body": 186,
    "erosion": 178,
    "angiectasia": 95,
    "erythema": 27,
}
SPLIT0_BBOXES = {
    "normal": 0,
    "unclear_view": 0,
    "ulcer": 582,
    "blood_fresh": 424,
    "lymphangiectasia": 368,
    "foreign_body": 186,
    "erosion": 162,
    "angiectasia": 95,
    "erythema": 27,
}


def count_manifest(images, bboxes=None, split="split_1", patients=7):
    """Synthetic records matching given per-class counts (no image files)."""
    bboxes = bboxes or {}
    samples = []
    for label in sorted(images):
        for i in range(images[label]):
            samples.append(
                Sample(
                    id=f"{split}-{label}-{i:05d}",
                    path=f"{label}/{i:05d}.jpg",
                    label=label,
                    patient_id=f"{split}-p{i % patients}",
                    split=split,
                    bbox=BBox(10, 10, 20, 20) if i < bboxes.get(label, 0) else None,
                )
            )
    return samples


@pytest.fixture(scope="session")
def split1_manifest():
    return Manifest(tuple(count_manifest(SPLIT1_IMAGES, SPLIT1_BBOXES)))


@pytest.fixture(scope="session")
def table2_manifest():
    return Manifest(
        tuple(
            count_manifest(SPLIT0_IMAGES, SPLIT0_BBOXES, split="split_0")
            + count_manifest(SPLIT1_IMAGES, SPLIT1_BBOXES, split="split_1")
        )
    )


def smooth_image(rng, h, w, base=None):
    """Low-frequency RGB texture in [0.1, 0.9] (PNG-friendly)."""
    ys, xs = np.mgrid[0:h, 0:w] / max(h, w)
    base = rng.random(3) * 0.4 + 0.3 if base is None else np.asarray(base)
    img = np.empty((h, w, 3))
    for c in range(3):
        fx, fy, ph = rng.random(3) * 4
        img[..., c] = base[c] + 0.15 * np.sin(2 * np.pi * (fx * xs + fy * ys) + ph)
    img += rng.normal(0, 0.02, img.shape)
    return np.clip(img, 0.1, 0.9)


def write_png(path, arr):
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.clip(np.floor(arr * 255 + 0.5), 0, 255).astype(np.uint8)).save(path)


def build_toy_dataset(root, seed=7):
    """12-image, 2-class dataset with hand-built embeddings.

    normals n0..n7: patients pn0..pn3 (two each), embedding 1000 * e_i.
    lesions:
      l0 (patient pn0)  1000*e0 + 500*e1  -> 500 from n0, kept by dedup;
                        n0/n1 excluded (same patient), n2..n7 tie at 1500 -> n2 by id
      l1 (patient pl1)  1000*e3 + 200*e4  -> nearest n3 (200)
      l2 (patient pl2)  1000*e5 + 100*e6  -> nearest n5
      l3 (patient pl2)  l2 + 10*e7        -> within 10 of l2, dedup keeps exactly one
    """
    rng = np.random.default_rng(seed)
    root = Path(root)
    dim = 8
    rows = []
    samples = []
    for i in range(8):
        v = np.zeros(dim)
        v[i] = 1000.0
        rows.append(v)
        write_png(root / "images" / f"n{i}.png", smooth_image(rng, 40, 40, base=[0.6, 0.35, 0.3]))
        samples.append(
            Sample(f"n{i}", f"images/n{i}.png", "normal", f"pn{i // 2}", "train", None, i)
        )
    lesion_vecs = []
    for v in ([0, 500, 0, 0, 0, 0, 0, 0], [0, 0, 0, 0, 200, 0, 0, 0], [0, 0, 0, 0, 0, 0, 100, 0]):
        lesion_vecs.append(np.array(v, dtype=float))
    lesion_vecs[0][0] = 1000.0
    lesion_vecs[1][3] = 1000.0
    lesion_vecs[2][5] = 1000.0
    l3 = lesion_vecs[2].copy()
    l3[7] = 10.0
    lesion_vecs.append(l3)
    patients = ["pn0", "pl1", "pl2", "pl2"]
    for j, (v, pid) in enumerate(zip(lesion_vecs, patients)):
        rows.append(v)
        img = smooth_image(rng, 40, 40, base=[0.55, 0.3, 0.28])
        img[14:22, 14:22] = [0.8, 0.15, 0.15]  # bright lesion blob
        write_png(root / "images" / f"l{j}.png", img)
        samples.append(
            Sample(f"l{j}", f"images/l{j}.png", "lesion", pid, "train", BBox(12, 12, 12, 12), 8 + j)
        )
    save_manifest(samples, root / "manifest.jsonl")
    save_embeddings(EmbeddingTable(np.array(rows)), root / "embeddings.emb")
    return root


@pytest.fixture
def toy_dataset(tmp_path):
    return build_toy_dataset(tmp_path / "data")


def build_scaled_dataset(root, n_normal=110, n_lesion=5, size=96, box=20, seed=3):
    """Bigger synthetic dataset: all embeddings far apart so dedup keeps everything."""
    rng = np.random.default_rng(seed)
    root = Path(root)
    samples, rows = [], []
    dim = n_normal + n_lesion
    for i in range(n_normal):
        write_png(root / "images" / f"n{i:03d}.png", smooth_image(rng, size, size, base=[0.6, 0.35, 0.3]))
        samples.append(Sample(f"n{i:03d}", f"images/n{i:03d}.png", "normal", f"pn{i % 20}", "train", None, i))
        v = np.zeros(dim)
        v[i] = 1000.0
        rows.append(v)
    for j in range(n_lesion):
        img = smooth_image(rng, size, size, base=[0.55, 0.3, 0.28])
        c = size // 2
        img[c - 4 : c + 4, c - 4 : c + 4] = [0.8, 0.15, 0.15]
        write_png(root / "images" / f"l{j}.png", img)
        x = c - box // 2
        samples.append(Sample(f"l{j}", f"images/l{j}.png", "lesion", f"pl{j}", "train", BBox(x, x, box, box), n_normal + j))
        v = np.zeros(dim)
        v[n_normal + j] = 1000.0
        v[j] = 300.0
        rows.append(v)
    save_manifest(samples, root / "manifest.jsonl")
    save_embeddings(EmbeddingTable(np.array(rows)), root / "embeddings.emb")
    return root


ACCEPTANCE_LINES = []  # (criterion number, line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
