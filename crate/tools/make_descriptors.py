#!/usr/bin/env python3
"""Writes weight-free architecture descriptors for ResNet-18, MobileNet (v1)
and VGG-16 at 224x224, batch-norm folded into the preceding convolutions."""

import json
import pathlib
import sys


class Builder:
    def __init__(self, name, input_shape, classes):
        self.name = name
        self.input_shape = input_shape
        self.classes = classes
        self.layers = []
        self.offset = 0
        self.channels = input_shape[0]

    def _add(self, layer, params=0):
        if params:
            layer["weight_ref"] = {"offset": self.offset, "length": params}
            self.offset += params
        self.layers.append(layer)
        return layer["id"]

    def conv(self, id, out_c, k, stride=1, pad=0, in_c=None, **extra):
        in_c = self.channels if in_c is None else in_c
        geo = {"out_channels": out_c, "kernel": k, "stride": stride, "padding": pad}
        self.channels = out_c
        return self._add({"id": id, "kind": "conv2d", "geometry": geo, **extra},
                         out_c * in_c * k * k + out_c)

    def dwconv(self, id, k, stride=1, pad=0):
        geo = {"kernel": k, "stride": stride, "padding": pad}
        return self._add({"id": id, "kind": "depthwise_conv2d", "geometry": geo},
                         self.channels * k * k + self.channels)

    def relu(self, id):
        return self._add({"id": id, "kind": "aa_relu"})

    def pool(self, id, kind, k, stride=None, pad=0):
        geo = {"kernel": k, "stride": stride or k, "padding": pad}
        return self._add({"id": id, "kind": kind, "geometry": geo})

    def flatten(self, id="flatten"):
        return self._add({"id": id, "kind": "flatten"})

    def dense(self, id, n_in, n_out):
        return self._add({"id": id, "kind": "dense", "geometry": {"out_features": n_out}},
                         n_in * n_out + n_out)

    def manifest(self):
        return {"name": self.name, "input_shape": self.input_shape,
                "class_count": self.classes, "layers": self.layers}


def resnet18():
    b = Builder("resnet18", [3, 224, 224], 1000)
    b.conv("conv1", 64, 7, 2, 3)
    b.relu("relu1")
    prev = b.pool("maxpool", "maxpool", 3, 2, 1)
    in_c = 64
    for stage, (out_c, stride) in enumerate([(64, 1), (128, 2), (256, 2), (512, 2)], start=1):
        for block in range(2):
            s = stride if block == 0 else 1
            tag = f"layer{stage}.{block}"
            shortcut = prev
            if s != 1 or in_c != out_c:
                shortcut = b.conv(f"{tag}.downsample", out_c, 1, s, 0, in_c=in_c, input=prev)
                b.conv(f"{tag}.conv1", out_c, 3, s, 1, in_c=in_c, input=prev)
            else:
                b.conv(f"{tag}.conv1", out_c, 3, s, 1, in_c=in_c)
            b.relu(f"{tag}.relu1")
            b.conv(f"{tag}.conv2", out_c, 3, 1, 1, add=shortcut)
            prev = b.relu(f"{tag}.relu2")
            in_c = out_c
    b.pool("avgpool", "avgpool", 7)
    b.flatten()
    b.dense("fc", 512, 1000)
    return b.manifest()


def mobilenet_v1():
    b = Builder("mobilenet_v1", [3, 224, 224], 1000)
    b.conv("conv0", 32, 3, 2, 1)
    b.relu("relu0")
    cfg = [(64, 1), (128, 2), (128, 1), (256, 2), (256, 1), (512, 2)] + [(512, 1)] * 5 + [(1024, 2), (1024, 1)]
    for i, (out_c, s) in enumerate(cfg, start=1):
        b.dwconv(f"dw{i}", 3, s, 1)
        b.relu(f"dw{i}.relu")
        b.conv(f"pw{i}", out_c, 1)
        b.relu(f"pw{i}.relu")
    b.pool("avgpool", "avgpool", 7)
    b.flatten()
    b.dense("fc", 1024, 1000)
    return b.manifest()


def vgg16():
    b = Builder("vgg16", [3, 224, 224], 1000)
    cfg = [64, 64, "M", 128, 128, "M", 256, 256, 256, "M", 512, 512, 512, "M", 512, 512, 512, "M"]
    block, idx = 1, 1
    for v in cfg:
        if v == "M":
            b.pool(f"pool{block}", "maxpool", 2)
            block, idx = block + 1, 1
        else:
            b.conv(f"conv{block}_{idx}", v, 3, 1, 1)
            b.relu(f"relu{block}_{idx}")
            idx += 1
    b.flatten()
    b.dense("fc6", 512 * 7 * 7, 4096)
    b.relu("relu6")
    b.dense("fc7", 4096, 4096)
    b.relu("relu7")
    b.dense("fc8", 4096, 1000)
    return b.manifest()


def main():
    out = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "crates/adaptact/descriptors")
    out.mkdir(parents=True, exist_ok=True)
    for build in (resnet18, mobilenet_v1, vgg16):
        m = build()
        (out / f"{m['name']}.json").write_text(json.dumps(m, indent=1) + "\n")


if __name__ == "__main__":
    main()
