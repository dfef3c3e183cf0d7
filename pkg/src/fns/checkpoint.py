"""Binary checkpoint container: magic 'FNS1', version, grid dims, variant,
lambda/kernel arrays, meta weights, and training metadata.

All floats are little-endian 64-bit; every array is length-prefixed so the
format is self-describing, and load(save(x)) round-trips bitwise.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np

from .errors import CorruptCheckpoint, VersionMismatch

MAGIC = b"FNS1"
VERSION = 1


@dataclass
class Checkpoint:
    grid_n: int
    grid_ndim: int
    mode: str                      # direct | meta | region_split
    variant: str                   # diagonal | conv | region_split
    lambdas: tuple = ()            # realized complex diagonals (0, 1 or 2)
    scales: tuple = ()             # fixed reciprocal-symbol scales (same count)
    kernel_groups: tuple = ()      # per sub-corrector: tuple of complex kernels
    mask_labels: np.ndarray | None = None
    meta_weights: np.ndarray | None = None
    meta_shape: tuple = ()         # (channels, depth, ksize) for meta mode
    epoch: int = 0
    loss: float = 0.0


def _w_bytes(fh, b: bytes) -> None:
    fh.write(struct.pack("<I", len(b)))
    fh.write(b)


def _w_complex(fh, arr: np.ndarray) -> None:
    arr = np.ascontiguousarray(arr, dtype=np.complex128)
    fh.write(struct.pack("<I", arr.ndim))
    for s in arr.shape:
        fh.write(struct.pack("<Q", s))
    fh.write(arr.astype("<c16").tobytes())


def _w_f64(fh, arr: np.ndarray) -> None:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    fh.write(struct.pack("<Q", arr.size))
    fh.write(arr.astype("<f8").tobytes())


def save_checkpoint(path, ck: Checkpoint) -> None:
    fh = io.BytesIO()
    fh.write(MAGIC)
    fh.write(struct.pack("<I", VERSION))
    fh.write(struct.pack("<II", ck.grid_n, ck.grid_ndim))
    _w_bytes(fh, ck.mode.encode())
    _w_bytes(fh, ck.variant.encode())
    fh.write(struct.pack("<I", len(ck.lambdas)))
    for lam in ck.lambdas:
        _w_complex(fh, lam)
    fh.write(struct.pack("<I", len(ck.scales)))
    for s in ck.scales:
        _w_complex(fh, s)
    fh.write(struct.pack("<I", len(ck.kernel_groups)))
    for group in ck.kernel_groups:
        fh.write(struct.pack("<I", len(group)))
        for k in group:
            _w_complex(fh, k)
    if ck.mask_labels is not None:
        fh.write(struct.pack("<B", 1))
        lab = np.ascontiguousarray(ck.mask_labels, dtype=np.uint8)
        fh.write(struct.pack("<QQ", *lab.shape))
        fh.write(lab.tobytes())
    else:
        fh.write(struct.pack("<B", 0))
    if ck.meta_weights is not None:
        fh.write(struct.pack("<B", 1))
        fh.write(struct.pack("<III", *(list(ck.meta_shape) + [0] * (3 - len(ck.meta_shape)))))
        _w_f64(fh, ck.meta_weights)
    else:
        fh.write(struct.pack("<B", 0))
    fh.write(struct.pack("<I", ck.epoch))
    fh.write(struct.pack("<d", ck.loss))
    with open(path, "wb") as out:
        out.write(fh.getvalue())


class _Reader:
    def __init__(self, raw: bytes):
        self.raw = raw
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.raw):
            raise CorruptCheckpoint(f"truncated checkpoint: wanted {n} bytes at {self.pos}")
        out = self.raw[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, spec: str):
        return struct.unpack(spec, self.take(struct.calcsize(spec)))

    def rbytes(self) -> bytes:
        (n,) = self.unpack("<I")
        return self.take(n)

    def rcomplex(self) -> np.ndarray:
        (nd,) = self.unpack("<I")
        shape = tuple(self.unpack("<Q")[0] for _ in range(nd))
        size = int(np.prod(shape)) if shape else 1
        return np.frombuffer(self.take(16 * size), dtype="<c16").reshape(shape).copy()

    def rf64(self) -> np.ndarray:
        (n,) = self.unpack("<Q")
        return np.frombuffer(self.take(8 * n), dtype="<f8").copy()


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        raw = fh.read()
    r = _Reader(raw)
    if r.take(4) != MAGIC:
        raise CorruptCheckpoint("bad magic; not an FNS checkpoint")
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise VersionMismatch(f"checkpoint version {version}, supported {VERSION}")
    n, ndim = r.unpack("<II")
    mode = r.rbytes().decode()
    variant = r.rbytes().decode()
    (nlam,) = r.unpack("<I")
    lambdas = tuple(r.rcomplex() for _ in range(nlam))
    (nsc,) = r.unpack("<I")
    scales = tuple(r.rcomplex() for _ in range(nsc))
    (ng,) = r.unpack("<I")
    groups = []
    for _ in range(ng):
        (nk,) = r.unpack("<I")
        groups.append(tuple(r.rcomplex() for _ in range(nk)))
    (has_mask,) = r.unpack("<B")
    mask = None
    if has_mask:
        s0, s1 = r.unpack("<QQ")
        mask = np.frombuffer(r.take(s0 * s1), dtype=np.uint8).reshape(s0, s1).copy()
    (has_meta,) = r.unpack("<B")
    meta_weights = None
    meta_shape = ()
    if has_meta:
        meta_shape = tuple(v for v in r.unpack("<III") if v)
        meta_weights = r.rf64()
    (epoch,) = r.unpack("<I")
    (loss_val,) = r.unpack("<d")
    return Checkpoint(n, ndim, mode, variant, lambdas, scales, tuple(groups),
                      mask, meta_weights, meta_shape, epoch, loss_val)


def checkpoint_equal(a: Checkpoint, b: Checkpoint) -> bool:
    """Bitwise equality of two checkpoints (test helper)."""
    if (a.grid_n, a.grid_ndim, a.mode, a.variant, a.epoch) != \
            (b.grid_n, b.grid_ndim, b.mode, b.variant, b.epoch):
        return False
    if not np.array_equal(np.float64(a.loss).view(np.uint64),
                          np.float64(b.loss).view(np.uint64)):
        return False
    for xs, ys in ((a.lambdas, b.lambdas), (a.scales, b.scales)):
        if len(xs) != len(ys) or any(not np.array_equal(x.view(np.uint8), y.view(np.uint8))
                                     for x, y in zip(xs, ys)):
            return False
    if len(a.kernel_groups) != len(b.kernel_groups):
        return False
    for ga, gb in zip(a.kernel_groups, b.kernel_groups):
        if len(ga) != len(gb) or any(not np.array_equal(x.view(np.uint8), y.view(np.uint8))
                                     for x, y in zip(ga, gb)):
            return False
    if (a.mask_labels is None) != (b.mask_labels is None):
        return False
    if a.mask_labels is not None and not np.array_equal(a.mask_labels, b.mask_labels):
        return False
    if (a.meta_weights is None) != (b.meta_weights is None):
        return False
    if a.meta_weights is not None:
        if a.meta_shape != b.meta_shape or not np.array_equal(
                a.meta_weights.view(np.uint64), b.meta_weights.view(np.uint64)):
            return False
    return True


def model_to_checkpoint(model, epoch: int = 0, loss: float = 0.0,
                        mask_labels=None) -> Checkpoint:
    """Snapshot a trained model as a checkpoint."""
    from .training import DirectModel, MetaModel, RegionSplitModel

    if isinstance(model, MetaModel):
        ch = model.meta_lambda.channels
        depth = model.meta_t.depth if model.meta_t else 0
        ks = model.meta_t.kernel_size if model.meta_t else 0
        return Checkpoint(0, 2, "meta", model.variant, meta_weights=model.params.data.copy(),
                          meta_shape=(ch, depth, ks), epoch=epoch, loss=loss)
    if isinstance(model, RegionSplitModel):
        subs = [model.sub[i].build() for i in range(2)]
        return Checkpoint(
            model.grid.n, model.grid.ndim, "region_split", "region_split",
            lambdas=tuple(s.lambda_tilde for s in subs),
            scales=tuple(model.sub[i].scale for i in range(2)),
            kernel_groups=tuple(s.kernels for s in subs),
            mask_labels=mask_labels, epoch=epoch, loss=loss)
    if isinstance(model, DirectModel):
        hc = model.build()
        return Checkpoint(model.grid.n, model.grid.ndim, "direct", hc.variant,
                          lambdas=(hc.lambda_tilde,), scales=(model.scale,),
                          kernel_groups=(hc.kernels,), epoch=epoch, loss=loss)
    raise TypeError(f"cannot checkpoint {type(model).__name__}")


def model_from_checkpoint(ck: Checkpoint, grid=None):
    """Rebuild a model object from a checkpoint (grids must match for direct)."""
    from .grids import Grid1D, Grid2D
    from .training import DirectModel, MetaModel, RegionSplitModel, set_complex

    if ck.mode == "meta":
        ch, depth, ks = (list(ck.meta_shape) + [0, 0, 0])[:3]
        model = MetaModel(ck.variant, channels=ch or 8, depth=depth or 1, ksize=ks or 5)
        if model.params.size != ck.meta_weights.size:
            raise CorruptCheckpoint("meta weight count does not match the architecture")
        model.params.data = ck.meta_weights.copy()
        return model
    grid = grid or (Grid1D(ck.grid_n) if ck.grid_ndim == 1 else Grid2D(ck.grid_n))
    if ck.mode == "region_split":
        depth = len(ck.kernel_groups[0])
        variant = "conv" if depth else "diagonal"
        ksize = ck.kernel_groups[0][0].shape[-1] if depth else 5
        model = RegionSplitModel(grid, variant, max(depth, 1), ksize, scales=ck.scales)
        for i in range(2):
            w = np.divide(ck.lambdas[i], ck.scales[i],
                          out=np.zeros_like(ck.lambdas[i]), where=np.abs(ck.scales[i]) > 0)
            set_complex(model.sub[i].params, "w", w)
            for d, k in enumerate(ck.kernel_groups[i]):
                set_complex(model.sub[i].params, f"k{d}", k)
            for name in model.sub[i].params.segments():
                model.params.set(f"r{i}_{name}", model.sub[i].params.get(name))
        return model
    depth = len(ck.kernel_groups[0]) if ck.kernel_groups else 0
    variant = "conv" if depth else "diagonal"
    ksize = ck.kernel_groups[0][0].shape[-1] if depth else 5
    model = DirectModel(grid, variant, max(depth, 1), ksize, scale=ck.scales[0])
    w = np.divide(ck.lambdas[0], ck.scales[0],
                  out=np.zeros_like(ck.lambdas[0]), where=np.abs(ck.scales[0]) > 0)
    set_complex(model.params, "w", w)
    for d, k in enumerate(ck.kernel_groups[0] if ck.kernel_groups else ()):
        set_complex(model.params, f"k{d}", k)
    return model
