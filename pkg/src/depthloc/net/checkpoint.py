"""Parameter checkpoint format and training resume state.

Checkpoint layout: a little-endian u32 header length, a JSON header holding
the architecture descriptor and the tensor names/shapes, then the raw
little-endian float32 tensors in declaration order.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .model import NetArch, NetworkParams
from .training import OptState


def save_checkpoint(path, params: NetworkParams) -> None:
    header = {
        "format": "gridnet-checkpoint-v1",
        "arch": params.arch.to_dict(),
        "tensors": [
            {"name": name, "shape": list(shape)}
            for name, shape in params.arch.param_shapes()
        ],
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for name, _ in params.arch.param_shapes():
            fh.write(params.tensors[name].astype("<f4").tobytes())


def load_checkpoint(path) -> NetworkParams:
    data = Path(path).read_bytes()
    (hlen,) = struct.unpack_from("<I", data)
    header = json.loads(data[4 : 4 + hlen])
    arch = NetArch.from_dict(header["arch"])
    tensors: dict[str, np.ndarray] = {}
    offset = 4 + hlen
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape))
        arr = np.frombuffer(data, dtype="<f4", count=count, offset=offset)
        tensors[entry["name"]] = arr.reshape(shape).copy()
        offset += count * 4
    return NetworkParams(arch, tensors)


def save_resume_state(
    path, epoch: int, opt_state: OptState, history: list[dict]
) -> None:
    """Sidecar next to a checkpoint so an interrupted run can continue
    bit-identically: optimizer buffers plus the epoch counter."""
    arrays = {f"m::{k}": v for k, v in opt_state.m.items()}
    arrays.update({f"v::{k}": v for k, v in opt_state.v.items()})
    meta = json.dumps({"epoch": epoch, "step": opt_state.step, "history": history})
    np.savez(path, __meta__=np.frombuffer(meta.encode(), dtype=np.uint8), **arrays)


def load_resume_state(path) -> tuple[int, OptState, list[dict]]:
    with np.load(path) as z:
        meta = json.loads(bytes(z["__meta__"]).decode())
        st = OptState(step=meta["step"])
        for key in z.files:
            if key.startswith("m::"):
                st.m[key[3:]] = z[key].copy()
            elif key.startswith("v::"):
                st.v[key[3:]] = z[key].copy()
    return meta["epoch"], st, meta["history"]
