#!/usr/bin/env python3
"""Builds the committed test fixture: a small CNN trained on synthetic 32x32
shape images, its manifest and weights, calibration/evaluation/holdout sets,
a budget trace, and golden outputs from an independent float64 NumPy forward
pass (float32 rounding after every layer, like the Rust engine).

Usage: python3 tools/make_fixture.py [OUT_DIR]
"""

import json
import pathlib
import struct
import sys

import numpy as np
import torch
import torch.nn as nn

SEED = 20240917
CLASSES = 8
SIZE = 32
N_TRAIN, N_CALIB, N_EVAL, N_HOLDOUT = 6000, 120, 400, 200


# ---------------------------------------------------------------- data

def draw(cls, rng):
    img = np.zeros((SIZE, SIZE), np.float64)
    yy, xx = np.mgrid[0:SIZE, 0:SIZE]
    cy, cx = rng.uniform(10, 22, size=2)
    r = rng.uniform(5, 9)
    t = rng.uniform(1.5, 3.0)
    if cls == 0:  # horizontal bar
        img[np.abs(yy - cy) < t / 1.5] = 1
        img[np.abs(xx - cx) > r + 3] = 0
    elif cls == 1:  # vertical bar
        img[np.abs(xx - cx) < t / 1.5] = 1
        img[np.abs(yy - cy) > r + 3] = 0
    elif cls == 2:  # diagonal
        img[(np.abs((yy - cy) - (xx - cx)) < t) & (np.abs(xx - cx) < r)] = 1
    elif cls == 3:  # anti-diagonal
        img[(np.abs((yy - cy) + (xx - cx)) < t) & (np.abs(xx - cx) < r)] = 1
    elif cls == 4:  # filled square
        img[(np.abs(yy - cy) < r * 0.8) & (np.abs(xx - cx) < r * 0.8)] = 1
    elif cls == 5:  # square outline
        m = np.maximum(np.abs(yy - cy), np.abs(xx - cx))
        img[np.abs(m - r) < t / 2 + 0.3] = 1
    elif cls == 6:  # ring
        d = np.hypot(yy - cy, xx - cx)
        img[np.abs(d - r) < t / 2 + 0.3] = 1
    else:  # plus
        img[(np.abs(yy - cy) < t / 2 + 0.3) & (np.abs(xx - cx) < r)] = 1
        img[(np.abs(xx - cx) < t / 2 + 0.3) & (np.abs(yy - cy) < r)] = 1
    img *= rng.uniform(0.6, 1.0)
    img += rng.normal(0, 0.25, img.shape)
    return img.astype(np.float32)


def make_set(n, rng):
    labels = rng.integers(0, CLASSES, size=n)
    x = np.stack([draw(c, rng) for c in labels])[:, None]
    return x, labels


# ---------------------------------------------------------------- model

class Tiny(nn.Module):
    def __init__(self):
        super().__init__()
        self.conv1 = nn.Conv2d(1, 8, 3, padding=1)
        self.conv2 = nn.Conv2d(8, 16, 3, padding=1)
        self.conv3 = nn.Conv2d(16, 16, 3, padding=1)
        self.fc = nn.Linear(16, CLASSES)

    def forward(self, x):
        x = nn.functional.max_pool2d(torch.relu(self.conv1(x)), 2)
        x = nn.functional.max_pool2d(torch.relu(self.conv2(x)), 2)
        x = nn.functional.avg_pool2d(torch.relu(self.conv3(x)), 8)
        return self.fc(x.flatten(1))


def train(model, x, y):
    torch.manual_seed(SEED)
    opt = torch.optim.Adam(model.parameters(), lr=3e-3)
    xt, yt = torch.from_numpy(x), torch.from_numpy(y).long()
    for epoch in range(30):
        perm = torch.randperm(len(xt))
        for i in range(0, len(xt), 64):
            idx = perm[i:i + 64]
            opt.zero_grad()
            loss = nn.functional.cross_entropy(model(xt[idx]), yt[idx])
            loss.backward()
            opt.step()


def manifest_and_blob(model):
    layers, blob = [], []

    def weights(*tensors):
        start = sum(len(b) for b in blob)
        flat = np.concatenate([t.detach().numpy().astype(np.float32).ravel() for t in tensors])
        blob.append(flat)
        return {"offset": int(start), "length": int(flat.size)}

    def conv(id, m):
        layers.append({"id": id, "kind": "conv2d",
                       "geometry": {"out_channels": m.out_channels, "kernel": m.kernel_size[0],
                                    "stride": 1, "padding": 1},
                       "weight_ref": weights(m.weight, m.bias)})

    conv("conv1", model.conv1)
    layers.append({"id": "relu1", "kind": "aa_relu"})
    layers.append({"id": "pool1", "kind": "maxpool", "geometry": {"kernel": 2, "stride": 2}})
    conv("conv2", model.conv2)
    layers.append({"id": "relu2", "kind": "aa_relu"})
    layers.append({"id": "pool2", "kind": "maxpool", "geometry": {"kernel": 2, "stride": 2}})
    conv("conv3", model.conv3)
    layers.append({"id": "relu3", "kind": "aa_relu"})
    layers.append({"id": "gap", "kind": "avgpool", "geometry": {"kernel": 8, "stride": 8}})
    layers.append({"id": "flatten", "kind": "flatten"})
    layers.append({"id": "fc", "kind": "dense", "geometry": {"out_features": CLASSES},
                   "weight_ref": weights(model.fc.weight, model.fc.bias)})
    manifest = {"name": "tiny_shapes", "input_shape": [1, SIZE, SIZE], "class_count": CLASSES,
                "layers": layers, "weights_file": "tiny.weights.aat"}
    return manifest, np.concatenate(blob)


# ------------------------------------------------- float64 reference

def conv_ref(x, w, b):
    # x [C,H,W] float32, w [O,C,3,3], padding 1, stride 1
    c, h, wd = x.shape
    xp = np.pad(x.astype(np.float64), ((0, 0), (1, 1), (1, 1)))
    cols = np.stack([xp[:, ky:ky + h, kx:kx + wd] for ky in range(3) for kx in range(3)], axis=1)
    cols = cols.reshape(c * 9, h * wd)
    out = w.astype(np.float64).reshape(w.shape[0], -1) @ cols + b.astype(np.float64)[:, None]
    return out.reshape(w.shape[0], h, wd).astype(np.float32)


def maxpool_ref(x, k):
    c, h, w = x.shape
    return x.reshape(c, h // k, k, w // k, k).max(axis=(2, 4))


def avgpool_ref(x, k):
    c, h, w = x.shape
    s = x.astype(np.float64).reshape(c, h // k, k, w // k, k).sum(axis=(2, 4))
    return (s / (k * k)).astype(np.float32)


def forward_ref(p, x):
    """Returns logits and the inputs of the three activation layers."""
    pre = []
    h = conv_ref(x, p["conv1.weight"], p["conv1.bias"])
    pre.append(h)
    h = maxpool_ref(np.maximum(h, 0), 2)
    h = conv_ref(h, p["conv2.weight"], p["conv2.bias"])
    pre.append(h)
    h = maxpool_ref(np.maximum(h, 0), 2)
    h = conv_ref(h, p["conv3.weight"], p["conv3.bias"])
    pre.append(h)
    h = avgpool_ref(np.maximum(h, 0), 8).ravel()
    logits = (p["fc.weight"].astype(np.float64) @ h.astype(np.float64)
              + p["fc.bias"].astype(np.float64)).astype(np.float32)
    return logits, pre


def nearest_rank_quantiles(sorted_vals, points=1001):
    n = len(sorted_vals)
    out = []
    for i in range(points):
        rank = int(np.ceil((i / (points - 1)) * n))
        out.append(float(sorted_vals[min(max(rank, 1), n) - 1]))
    return out


# ---------------------------------------------------------------- io

def write_aat(path, arr):
    arr = np.ascontiguousarray(arr, dtype="<f4")
    with open(path, "wb") as f:
        f.write(b"AAT1")
        f.write(struct.pack("<I", arr.ndim))
        for d in arr.shape:
            f.write(struct.pack("<I", d))
        f.write(b"\x00")
        f.write(arr.tobytes())


def write_dataset(out, name, x, y):
    write_aat(out / f"{name}.aat", x)
    (out / f"{name}.labels").write_text("".join(f"{int(v)}\n" for v in y))


def memory_bytes(manifest, bits):
    """Cost model: FP32 parameters plus every layer output at its precision."""
    params = sum(l.get("weight_ref", {}).get("length", 0) for l in manifest["layers"])
    sizes = {"conv1": 8 * 32 * 32, "relu1": 8 * 32 * 32, "pool1": 8 * 16 * 16,
             "conv2": 16 * 16 * 16, "relu2": 16 * 16 * 16, "pool2": 16 * 8 * 8,
             "conv3": 16 * 8 * 8, "relu3": 16 * 8 * 8, "gap": 16, "flatten": 16, "fc": CLASSES}
    act = sum((n * bits.get(k, 32) + 7) // 8 for k, n in sizes.items())
    return params * 4 + act


def main():
    out = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "crates/adaptact/tests/fixtures")
    out.mkdir(parents=True, exist_ok=True)
    torch.set_num_threads(1)
    torch.manual_seed(SEED)
    rng = np.random.default_rng(SEED)

    xtr, ytr = make_set(N_TRAIN, rng)
    xc, yc = make_set(N_CALIB, rng)
    xe, ye = make_set(N_EVAL, rng)
    xh, yh = make_set(N_HOLDOUT, rng)

    model = Tiny()
    train(model, xtr, ytr)
    model.eval()

    manifest, blob = manifest_and_blob(model)
    (out / "tiny.json").write_text(json.dumps(manifest, indent=1) + "\n")
    write_aat(out / "tiny.weights.aat", blob)
    write_dataset(out, "calib", xc, yc)
    write_dataset(out, "eval", xe, ye)
    write_dataset(out, "holdout", xh, yh)

    params = {k: v.detach().numpy().astype(np.float32) for k, v in model.state_dict().items()}
    logits = []
    for x in xe:
        l, _ = forward_ref(params, x)
        logits.append(l)
    logits = np.stack(logits)
    write_aat(out / "golden_logits.aat", logits)
    with torch.no_grad():
        torch_logits = model(torch.from_numpy(xe)).numpy()
    acc = {
        "eval": float((logits.argmax(1) == ye).mean()),
        "holdout": float((np.stack([forward_ref(params, x)[0] for x in xh]).argmax(1) == yh).mean()),
        "torch_max_abs_diff": float(np.abs(torch_logits - logits).max()),
    }
    (out / "golden_accuracy.json").write_text(json.dumps(acc, indent=1) + "\n")

    pre = [[], [], []]
    for x in xc:
        _, p = forward_ref(params, x)
        for i in range(3):
            pre[i].append(p[i].ravel())
    profiles = []
    for i, name in enumerate(["relu1", "relu2", "relu3"]):
        v = np.sort(np.concatenate(pre[i]))
        profiles.append({"layer_id": name, "quantiles": nearest_rank_quantiles(v),
                         "baseline_zero_fraction": float((v <= 0).mean()),
                         "sample_count": int(v.size)})
    (out / "golden_profiles.json").write_text(json.dumps(profiles, indent=1) + "\n")

    base = memory_bytes(manifest, {})
    fractions = [1.0, 0.85, 0.72, 0.55, 0.9]
    lines = ["timestamp_ms,memory_budget_bytes\n"]
    lines += [f"{i * 1000},{int(base * f)}\n" for i, f in enumerate(fractions)]
    (out / "trace.csv").write_text("".join(lines))
    print(json.dumps({"baseline_bytes": base, **acc}))


if __name__ == "__main__":
    main()
