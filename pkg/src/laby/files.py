"""Newline-delimited bag files.

One element per line; tuple components joined by commas.  A dataset
named `n` is either a single file `n` or a set of shards `n.partK`.
Readers with parallelism p assign shard k to instance k mod p; an
unsharded file counts as shard 0.  Writers always produce `n.partK`.
"""

import os
import re

from . import syntax as S
from .errors import ExecutionError


def render_element(v):
    if isinstance(v, tuple):
        return ",".join(render_element(x) for x in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def _parse_scalar(text, t, where):
    if t == S.INT:
        try:
            return int(text)
        except ValueError:
            raise ExecutionError(f"{where}: expected an int, got {text!r}")
    if t == S.BOOL:
        if text == "true":
            return True
        if text == "false":
            return False
        raise ExecutionError(f"{where}: expected true/false, got {text!r}")
    return text


def parse_element(line, etype, where):
    if isinstance(etype, S.TupleType):
        parts = line.split(",")
        if len(parts) != len(etype.items):
            raise ExecutionError(
                f"{where}: expected {len(etype.items)} components, "
                f"got {len(parts)} in {line!r}")
        return tuple(_parse_scalar(p, t, where)
                     for p, t in zip(parts, etype.items))
    return _parse_scalar(line, etype, where)


def shard_paths(data_dir, name):
    """All shards of a dataset, as (shard_index, path), sorted by index."""
    shards = []
    plain = os.path.join(data_dir, name)
    if os.path.isfile(plain):
        shards.append((0, plain))
    pat = re.compile(re.escape(name) + r"\.part(\d+)$")
    try:
        entries = os.listdir(data_dir)
    except FileNotFoundError:
        entries = []
    for fn in entries:
        m = pat.match(fn)
        if m:
            shards.append((int(m.group(1)), os.path.join(data_dir, fn)))
    shards.sort()
    return shards


def read_shards(data_dir, name, instance_idx, parallelism, etype):
    """Elements of the shards assigned to one reader instance."""
    shards = shard_paths(data_dir, name)
    if not shards:
        raise ExecutionError(f"input dataset not found: "
                             f"{os.path.join(data_dir, name)}")
    out = []
    for k, path in shards:
        if k % parallelism != instance_idx:
            continue
        with open(path, "r", encoding="utf-8") as f:
            for line in f:
                line = line.rstrip("\n")
                if line == "":
                    continue
                out.append(parse_element(line, etype, path))
    return out


def write_part(data_dir, name, instance_idx, elements):
    path = os.path.join(data_dir, f"{name}.part{instance_idx}")
    os.makedirs(data_dir, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for v in elements:
            f.write(render_element(v))
            f.write("\n")
    return path
