"""Checkpoint save/load: text manifest plus raw little-endian float64 arrays.

The manifest carries the schema version, training progress, generator
state, the last evaluation row, the full config snapshot, and the array
registry (name, shape) in declared order; the binary section concatenates
the arrays in exactly that order. Loading verifies the byte count, so a
truncated file fails loudly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .config import RunConfig, _parse_value

MAGIC = "spikectrl-checkpoint"
VERSION = 1


@dataclass
class Checkpoint:
    version: int
    iteration: int
    adam_t: dict[str, int]
    rng_state: dict
    stats: dict[str, float]
    config: RunConfig
    arrays: dict[str, np.ndarray]


def save_checkpoint(path, config: RunConfig, iteration: int,
                    arrays: list[tuple[str, np.ndarray]],
                    adam_t: dict[str, int], rng_state: dict,
                    stats: dict[str, float]) -> None:
    lines = [f"{MAGIC} {VERSION}",
             f"iteration = {iteration}",
             f"rng = {json.dumps(rng_state, sort_keys=True)}",
             f"adam_t = {json.dumps(adam_t, sort_keys=True)}",
             f"stats = {json.dumps(stats, sort_keys=True)}",
             "config {"]
    lines += [f"{k} = {v}" for k, v in config.to_items()]
    lines.append("}")
    lines.append("arrays {")
    for name, arr in arrays:
        shape = "x".join(str(d) for d in arr.shape) if arr.ndim else "scalar"
        lines.append(f"{name} {shape}")
    lines.append("}")
    lines.append("DATA")
    blob = b"".join(np.ascontiguousarray(arr, dtype="<f8").tobytes()
                    for _, arr in arrays)
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode("utf-8"))
        fh.write(blob)


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        raw = fh.read()
    sep = raw.find(b"DATA\n")
    if sep < 0:
        raise ValueError("not a checkpoint file: missing DATA section")
    header = raw[:sep].decode("utf-8").splitlines()
    blob = raw[sep + len(b"DATA\n"):]

    if not header or not header[0].startswith(MAGIC):
        raise ValueError("not a checkpoint file: bad magic")
    version = int(header[0].split()[-1])
    if version != VERSION:
        raise ValueError(f"checkpoint schema version {version} is not "
                         f"supported (expected {VERSION})")

    iteration = 0
    rng_state: dict = {}
    adam_t: dict[str, int] = {}
    stats: dict[str, float] = {}
    config_values: dict = {}
    shapes: list[tuple[str, tuple[int, ...]]] = []
    section = None
    for line in header[1:]:
        line = line.strip()
        if not line:
            continue
        if line == "config {":
            section = "config"
            continue
        if line == "arrays {":
            section = "arrays"
            continue
        if line == "}":
            section = None
            continue
        if section == "config":
            key, val = line.split("=", 1)
            key = key.strip()
            config_values[key] = _parse_value(key, val, "checkpoint config")
        elif section == "arrays":
            name, shape_txt = line.rsplit(" ", 1)
            shape = () if shape_txt == "scalar" else tuple(
                int(d) for d in shape_txt.split("x"))
            shapes.append((name, shape))
        elif line.startswith("iteration ="):
            iteration = int(line.split("=", 1)[1])
        elif line.startswith("rng ="):
            rng_state = json.loads(line.split("=", 1)[1])
        elif line.startswith("adam_t ="):
            adam_t = json.loads(line.split("=", 1)[1])
        elif line.startswith("stats ="):
            stats = json.loads(line.split("=", 1)[1])

    config = RunConfig(**config_values)
    config.validate()

    expected = sum(int(np.prod(s)) if s else 1 for _, s in shapes) * 8
    if len(blob) != expected:
        raise ValueError(
            f"checkpoint data section is truncated or padded: expected "
            f"{expected} bytes, found {len(blob)}")
    arrays: dict[str, np.ndarray] = {}
    offset = 0
    for name, shape in shapes:
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
        arrays[name] = arr.reshape(shape).copy()
        offset += count * 8
    return Checkpoint(version=version, iteration=iteration, adam_t=adam_t,
                      rng_state=rng_state, stats=stats, config=config,
                      arrays=arrays)
