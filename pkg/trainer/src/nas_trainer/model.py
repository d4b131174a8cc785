"""Build torch modules from the network JSON shape the search engine emits.

Cell vertex numbering: 0 and 1 are the projected cell inputs, node k sits at
index k+2; a node sums its selected inputs and applies one op; the cell
output concatenates the nodes listed in "concat". Reduction cells downsample
at the input projections (stride 2), so every internal edge stays aligned;
a normal cell that follows a reduction projects its skip input with stride 2
for the same reason.

Every convolution is bias-free and followed by batch normalization, so the
learnable-parameter total matches the search side's complexity objective
exactly.
"""

from __future__ import annotations

import torch
from torch import nn


def conv_bn(c_in: int, c_out: int, kernel, padding, stride: int = 1, relu: bool = True):
    layers = [
        nn.Conv2d(c_in, c_out, kernel, stride=stride, padding=padding, bias=False),
        nn.BatchNorm2d(c_out),
    ]
    if relu:
        layers.append(nn.ReLU(inplace=True))
    return nn.Sequential(*layers)


def make_op(code: int, channels: int) -> nn.Module:
    c = channels
    if code == 0:
        return nn.Identity()
    if code == 1:
        return conv_bn(c, c, 1, 0)
    if code == 2:
        return conv_bn(c, c, 3, 1)
    if code == 3:
        return nn.Sequential(conv_bn(c, c, (1, 3), (0, 1)), conv_bn(c, c, (3, 1), (1, 0)))
    if code == 4:
        return nn.Sequential(conv_bn(c, c, (1, 7), (0, 3)), conv_bn(c, c, (7, 1), (3, 0)))
    if code == 5:
        return nn.Sequential(nn.ZeroPad2d((0, 1, 0, 1)), nn.MaxPool2d(2, stride=1))
    if code == 6:
        return nn.MaxPool2d(3, stride=1, padding=1)
    if code == 7:
        return nn.MaxPool2d(5, stride=1, padding=2)
    if code == 8:
        return nn.Sequential(
            nn.ZeroPad2d((0, 1, 0, 1)), nn.AvgPool2d(2, stride=1, count_include_pad=False)
        )
    if code == 9:
        return nn.AvgPool2d(3, stride=1, padding=1, count_include_pad=False)
    if code == 10:
        return nn.AvgPool2d(5, stride=1, padding=2, count_include_pad=False)
    raise ValueError(f"unknown op code {code}")


class Cell(nn.Module):
    def __init__(self, cell_json: dict, in_strides: tuple[int, int]):
        super().__init__()
        channels = cell_json["node_channels"]
        c0, c1 = cell_json["in_channels"]
        self.proj0 = conv_bn(c0, channels, 1, 0, stride=in_strides[0], relu=False)
        self.proj1 = conv_bn(c1, channels, 1, 0, stride=in_strides[1], relu=False)
        self.node_inputs = [tuple(node["inputs"]) for node in cell_json["nodes"]]
        self.ops = nn.ModuleList(make_op(node["op"], channels) for node in cell_json["nodes"])
        self.concat = list(cell_json["concat"])

    def forward(self, h0: torch.Tensor, h1: torch.Tensor) -> torch.Tensor:
        states = [self.proj0(h0), self.proj1(h1)]
        for inputs, op in zip(self.node_inputs, self.ops):
            total = states[inputs[0]]
            for v in inputs[1:]:
                total = total + states[v]
            states.append(op(total))
        return torch.cat([states[v] for v in self.concat], dim=1)


class CellNetwork(nn.Module):
    """Stem, stacked cells, global average pool, linear classifier."""

    def __init__(self, network_json: dict):
        super().__init__()
        stem_out = network_json["stem"]["out_channels"]
        self.stem = conv_bn(network_json["image_channels"], stem_out, 3, 1, relu=False)
        cells = []
        # Spatial scale (denominator) of the previous two outputs, relative
        # to the stem; per-input projection strides realign mismatched pairs.
        scale_pp = scale_p = 1
        for cell_json in network_json["cells"]:
            scale_out = scale_p * cell_json["stride"]
            cells.append(
                Cell(cell_json, (scale_out // scale_pp, scale_out // scale_p))
            )
            scale_pp, scale_p = scale_p, scale_out
        self.cells = nn.ModuleList(cells)
        classifier = network_json["classifier"]
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.fc = nn.Linear(classifier["in_channels"], classifier["num_classes"])

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        prev_prev = prev = self.stem(x)
        for cell in self.cells:
            prev_prev, prev = prev, cell(prev_prev, prev)
        out = self.pool(prev).flatten(1)
        return self.fc(out)


def build_model(network_json: dict) -> CellNetwork:
    required = {"image_channels", "stem", "cells", "classifier"}
    missing = required - set(network_json)
    if missing:
        raise ValueError(f"network spec missing keys: {sorted(missing)}")
    return CellNetwork(network_json)
