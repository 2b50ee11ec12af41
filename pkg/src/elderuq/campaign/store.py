"""On-disk realization files and the campaign manifest.

Realization file layout (all little-endian)::

    magic    8 bytes   b"ELDRUQ\\x00\\x01"
    version  uint32
    nx, ny   uint32, uint32
    M        uint32    stochastic dimension
    nsnap    uint32
    Lx, Ly   float64, float64
    theta    float64[M]
    times    float64[nsnap]      seconds
    payload  nsnap x (c float64[nv], p float64[nv]),  nv = (nx+1)(ny+1)
"""

import json
import os
import struct
import tempfile

import numpy as np

from ..flow.solver import FieldSnapshot

MAGIC = b"ELDRUQ\x00\x01"
VERSION = 1
_HEAD = struct.Struct("<8sIIIII dd")

PENDING, DONE, FAILED = "pending", "done", "failed"


class StoreError(RuntimeError):
    pass


def _atomic_write(path, data, mode="wb"):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_realization(snapshots, nx, ny, Lx, Ly, theta):
    theta = np.asarray(theta, dtype="<f8")
    times = np.array([s.time for s in snapshots], dtype="<f8")
    parts = [_HEAD.pack(MAGIC, VERSION, nx, ny, theta.size, len(snapshots), Lx, Ly),
             theta.tobytes(), times.tobytes()]
    nv = (nx + 1) * (ny + 1)
    for s in snapshots:
        if s.c.size != nv or s.p.size != nv:
            raise StoreError("snapshot size does not match the grid")
        parts.append(np.asarray(s.c, dtype="<f8").tobytes())
        parts.append(np.asarray(s.p, dtype="<f8").tobytes())
    return b"".join(parts)


def write_realization(path, snapshots, grid, theta):
    _atomic_write(path, encode_realization(snapshots, grid.nx, grid.ny, grid.Lx, grid.Ly, theta))


def read_header(buf):
    if len(buf) < _HEAD.size:
        raise StoreError("truncated realization file")
    magic, version, nx, ny, m, nsnap, Lx, Ly = _HEAD.unpack_from(buf, 0)
    if magic != MAGIC:
        raise StoreError("not a realization file")
    if version != VERSION:
        raise StoreError(f"unsupported realization file version {version}")
    off = _HEAD.size
    theta = np.frombuffer(buf, "<f8", m, off).astype(float)
    off += 8 * m
    times = np.frombuffer(buf, "<f8", nsnap, off).astype(float)
    off += 8 * nsnap
    return {"nx": nx, "ny": ny, "Lx": Lx, "Ly": Ly, "theta": theta, "times": times, "offset": off}


def read_realization(path):
    """Return ``(header, snapshots)``."""
    with open(path, "rb") as fh:
        buf = fh.read()
    head = read_header(buf)
    nv = (head["nx"] + 1) * (head["ny"] + 1)
    expected = head["offset"] + 16 * nv * len(head["times"])
    if len(buf) != expected:
        raise StoreError(f"{path}: expected {expected} bytes, found {len(buf)}")
    snaps = []
    off = head["offset"]
    for t in head["times"]:
        c = np.frombuffer(buf, "<f8", nv, off).astype(float)
        p = np.frombuffer(buf, "<f8", nv, off + 8 * nv).astype(float)
        off += 16 * nv
        snaps.append(FieldSnapshot(time=float(t), c=c, p=p, theta=head["theta"].copy()))
    return head, snaps


class RealizationStore:
    """Directory of realization files plus a JSON manifest.

    The manifest is rewritten atomically after every status change.
    """

    def __init__(self, root):
        self.root = os.path.abspath(root)
        self.manifest_path = os.path.join(self.root, "manifest.json")
        self.manifest = None

    @property
    def realization_dir(self):
        return os.path.join(self.root, "realizations")

    def node_path(self, index):
        return os.path.join(self.realization_dir, f"node_{index:05d}.bin")

    def exists(self):
        return os.path.exists(self.manifest_path)

    def load(self):
        with open(self.manifest_path) as fh:
            self.manifest = json.load(fh)
        return self.manifest

    def save(self):
        os.makedirs(self.root, exist_ok=True)
        text = json.dumps(self.manifest, indent=1, sort_keys=True)
        _atomic_write(self.manifest_path, text, mode="w")

    def create(self, config_hash, rule_info, thetas, weights):
        os.makedirs(self.realization_dir, exist_ok=True)
        self.manifest = {
            "format": 1,
            "config_hash": config_hash,
            "rule": rule_info,
            "nodes": [
                {"index": i, "theta": [float(v) for v in th], "weight": float(w),
                 "file": os.path.basename(self.node_path(i)), "status": PENDING, "diagnostic": ""}
                for i, (th, w) in enumerate(zip(thetas, weights))
            ],
        }
        self.save()

    @property
    def nodes(self):
        return self.manifest["nodes"]

    def status(self, index):
        return self.nodes[index]["status"]

    def mark(self, index, status, diagnostic=""):
        self.nodes[index]["status"] = status
        self.nodes[index]["diagnostic"] = diagnostic
        self.save()

    def reconcile(self):
        """Bring statuses in line with the files actually present."""
        changed = False
        for node in self.nodes:
            on_disk = os.path.exists(os.path.join(self.realization_dir, node["file"]))
            if node["status"] == DONE and not on_disk:
                node["status"], node["diagnostic"] = PENDING, "file missing"
                changed = True
            elif node["status"] == PENDING and on_disk:
                # a finished file whose manifest update was lost; trust it if readable
                try:
                    read_realization(os.path.join(self.realization_dir, node["file"]))
                    node["status"] = DONE
                    changed = True
                except StoreError:
                    pass
        if changed:
            self.save()

    def pending(self):
        return [n["index"] for n in self.nodes if n["status"] != DONE]

    def failed(self):
        return [n["index"] for n in self.nodes if n["status"] == FAILED]

    def complete(self):
        return all(n["status"] == DONE for n in self.nodes)

    def load_concentrations(self):
        """Stacked c arrays ``(n_nodes, n_snap, nv)`` and the snapshot times (s)."""
        out = []
        times = None
        for node in self.nodes:
            head, snaps = read_realization(os.path.join(self.realization_dir, node["file"]))
            if times is None:
                times = head["times"]
            elif not np.array_equal(times, head["times"]):
                raise StoreError(f"node {node['index']}: snapshot times differ")
            out.append(np.stack([s.c for s in snaps]))
        return np.stack(out), times
