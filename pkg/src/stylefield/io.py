"""Deterministic checkpoint container.

A checkpoint is a single file: magic line, a JSON header describing
named arrays (dtype, shape, offset) plus arbitrary JSON metadata, then
the concatenated raw array bytes. Writing the same state twice yields
byte-identical files, which torch/zip containers do not guarantee.
"""
from __future__ import annotations

import json
from typing import Mapping

import numpy as np

MAGIC = b"SFCKPT1\n"
FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    pass


def save_archive(path: str, arrays: Mapping[str, np.ndarray], meta: dict) -> None:
    names = sorted(arrays)
    entries = {}
    offset = 0
    blobs = []
    for name in names:
        shape = list(np.asarray(arrays[name]).shape)
        arr = np.ascontiguousarray(arrays[name])
        blob = arr.tobytes()
        entries[name] = {"dtype": arr.dtype.str, "shape": shape,
                         "offset": offset, "nbytes": len(blob)}
        offset += len(blob)
        blobs.append(blob)
    header = json.dumps({"format_version": FORMAT_VERSION,
                         "meta": meta, "arrays": entries},
                        sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(len(header).to_bytes(8, "little"))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def load_archive(path: str):
    """Returns (arrays, meta). Raises CheckpointError on any corruption
    or version mismatch without returning partial state."""
    try:
        with open(path, "rb") as fh:
            magic = fh.read(len(MAGIC))
            if magic != MAGIC:
                raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
            n = int.from_bytes(fh.read(8), "little")
            try:
                header = json.loads(fh.read(n))
            except (json.JSONDecodeError, UnicodeDecodeError) as e:
                raise CheckpointError(f"{path}: corrupt header: {e}") from e
            version = header.get("format_version")
            if version != FORMAT_VERSION:
                raise CheckpointError(
                    f"{path}: checkpoint format version {version!r}, "
                    f"this build reads version {FORMAT_VERSION}")
            payload = fh.read()
    except OSError as e:
        raise CheckpointError(f"{path}: {e}") from e
    arrays = {}
    for name, ent in header["arrays"].items():
        start, nbytes = ent["offset"], ent["nbytes"]
        chunk = payload[start:start + nbytes]
        if len(chunk) != nbytes:
            raise CheckpointError(f"{path}: truncated payload for {name!r}")
        arrays[name] = np.frombuffer(chunk, dtype=np.dtype(ent["dtype"])) \
            .reshape(ent["shape"]).copy()
    return arrays, header["meta"]
