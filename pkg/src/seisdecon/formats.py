"""Binary dataset (``LPSD``) and checkpoint (``LPCK``) files.

All multi-byte fields are little-endian.

Dataset::

    b"LPSD" | version u16 | count u32
    per record: n u32 | m u32 | snr_db f64 (NaN = noiseless) | mag f64
                x as n*m f32 | y as n*m f32      (time index fastest)

Checkpoint::

    b"LPCK" | version u16
    kappa u16 | K u16 | dims u8 | hidden u16 | groups u16 | flags u8
    freq f64 | dt f64 | half_width u16 | n u32       (forward operator)
    eta_raw f64 | nparams u32
    per param: name_len u16 | name utf-8 | ndim u8 | shape u32*ndim | f64 data
    has_optimizer u8 [ | t u32 | m blocks | v blocks ]  (f64, parameter order)
"""

import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, FormatError, UnsupportedVersionError
from .forward import build_operator, make_ricker
from .synthetic import DatasetRecord
from .unrolled import ModelConfig, UnrolledModel

DATASET_MAGIC = b"LPSD"
CHECKPOINT_MAGIC = b"LPCK"
DATASET_VERSION = 1
CHECKPOINT_VERSION = 1

_FLAG_AFFINE, _FLAG_FINAL_NORM, _FLAG_FINAL_RELU = 1, 2, 4


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def take(self, fmt, what):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.buf):
            raise FormatError(f"truncated file while reading {what}", self.pos)
        values = struct.unpack_from(fmt, self.buf, self.pos)
        self.pos += size
        return values if len(values) > 1 else values[0]

    def array(self, dtype, count, what):
        size = np.dtype(dtype).itemsize * count
        if self.pos + size > len(self.buf):
            raise FormatError(f"truncated file while reading {what}", self.pos)
        out = np.frombuffer(self.buf, dtype=dtype, count=count, offset=self.pos)
        self.pos += size
        return out

    def finish(self):
        if self.pos != len(self.buf):
            raise FormatError(f"{len(self.buf) - self.pos} trailing bytes", self.pos)


def _grid_bytes(a):
    # (n, m) -> trace-major f32 so the time index varies fastest
    return np.ascontiguousarray(np.asarray(a, dtype="<f4").T).tobytes()


def dataset_bytes(records):
    parts = [DATASET_MAGIC, struct.pack("<HI", DATASET_VERSION, len(records))]
    for r in records:
        if r.x.shape != r.y.shape or r.x.ndim != 2:
            raise ConfigError(f"record x/y shapes differ or are not 2D: {r.x.shape}, {r.y.shape}")
        n, m = r.x.shape
        snr = math.nan if r.snr_db is None else float(r.snr_db)
        parts.append(struct.pack("<IIdd", n, m, snr, float(r.mag)))
        parts.append(_grid_bytes(r.x))
        parts.append(_grid_bytes(r.y))
    return b"".join(parts)


def parse_dataset(buf):
    rd = _Reader(buf)
    magic = rd.buf[:4]
    if magic != DATASET_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {DATASET_MAGIC!r}", 0)
    rd.pos = 4
    version = rd.take("<H", "version")
    if version != DATASET_VERSION:
        raise UnsupportedVersionError(f"unsupported dataset version {version}", 4)
    count = rd.take("<I", "record count")
    records = []
    for _ in range(count):
        start = rd.pos
        n, m, snr, mag = rd.take("<IIdd", "record header")
        if n == 0 or m == 0:
            raise FormatError(f"empty record shape ({n}, {m})", start)
        x = rd.array("<f4", n * m, "reflectivity").reshape(m, n).T.astype(np.float64)
        y = rd.array("<f4", n * m, "trace").reshape(m, n).T.astype(np.float64)
        records.append(DatasetRecord(x=x, y=y, mag=mag,
                                     snr_db=None if math.isnan(snr) else snr))
    rd.finish()
    return records


def save_dataset(path, records):
    with open(path, "wb") as fh:
        fh.write(dataset_bytes(records))


def load_dataset(path):
    with open(path, "rb") as fh:
        return parse_dataset(fh.read())


def quantize(records):
    """Round record grids to what the dataset file stores (f32)."""
    return [DatasetRecord(x=r.x.astype(np.float32).astype(np.float64),
                          y=r.y.astype(np.float32).astype(np.float64),
                          mag=float(r.mag), snr_db=r.snr_db) for r in records]


@dataclass(frozen=True)
class Physics:
    """Wavelet and trace length the network was trained against."""

    freq: float = 40.0
    dt: float = 1.0 / 500.0
    half_width: int = 25
    n: int = 352

    def operator(self):
        return build_operator(make_ricker(self.freq, self.dt, self.half_width), self.n)


def checkpoint_bytes(model, physics, optimizer=None):
    cfg = model.cfg
    flags = ((_FLAG_AFFINE if cfg.gn_affine else 0)
             | (_FLAG_FINAL_NORM if cfg.final_norm else 0)
             | (_FLAG_FINAL_RELU if cfg.final_relu else 0))
    parts = [CHECKPOINT_MAGIC, struct.pack("<H", CHECKPOINT_VERSION),
             struct.pack("<HHBHHB", cfg.kappa, cfg.K, cfg.dims, cfg.hidden, cfg.groups, flags),
             struct.pack("<ddHI", physics.freq, physics.dt, physics.half_width, physics.n),
             struct.pack("<d", float(model.eta_raw.data))]
    named = [(name, p) for name, p in model.named_parameters() if name != "eta_raw"]
    parts.append(struct.pack("<I", len(named)))
    for name, p in named:
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack("<B", p.data.ndim))
        parts.append(struct.pack(f"<{p.data.ndim}I", *p.data.shape))
        parts.append(np.ascontiguousarray(p.data, dtype="<f8").tobytes())
    if optimizer is None:
        parts.append(struct.pack("<B", 0))
    else:
        parts.append(struct.pack("<BI", 1, optimizer.t))
        for block in optimizer.m + optimizer.v:
            parts.append(np.ascontiguousarray(block, dtype="<f8").tobytes())
    return b"".join(parts)


def parse_checkpoint(buf, expect=None):
    """Rebuild ``(model, physics, optimizer_state)``.

    ``expect`` maps ModelConfig field names to required values; any
    disagreement with the file raises ConfigError.
    """
    rd = _Reader(buf)
    if rd.buf[:4] != CHECKPOINT_MAGIC:
        raise FormatError(f"bad magic {bytes(rd.buf[:4])!r}, expected {CHECKPOINT_MAGIC!r}", 0)
    rd.pos = 4
    version = rd.take("<H", "version")
    if version != CHECKPOINT_VERSION:
        raise UnsupportedVersionError(f"unsupported checkpoint version {version}", 4)
    cfg_pos = rd.pos
    kappa, K, dims, hidden, groups, flags = rd.take("<HHBHHB", "model config")
    freq, dt, half_width, n = rd.take("<ddHI", "operator config")
    try:
        cfg = ModelConfig(kappa=kappa, K=K, dims=dims, hidden=hidden, groups=groups,
                          gn_affine=bool(flags & _FLAG_AFFINE),
                          final_norm=bool(flags & _FLAG_FINAL_NORM),
                          final_relu=bool(flags & _FLAG_FINAL_RELU))
    except ConfigError as exc:
        raise FormatError(f"invalid model config: {exc}", cfg_pos) from exc
    for key, want in (expect or {}).items():
        have = getattr(cfg, key)
        if want is not None and have != want:
            raise ConfigError(f"checkpoint has {key}={have}, requested {want}")
    physics = Physics(freq=freq, dt=dt, half_width=half_width, n=n)

    eta_raw = rd.take("<d", "eta_raw")
    model = UnrolledModel(cfg, seed=0, eta_raw_init=eta_raw)
    params = dict((name, p) for name, p in model.named_parameters() if name != "eta_raw")
    count = rd.take("<I", "parameter count")
    if count != len(params):
        raise FormatError(f"file holds {count} parameters, config needs {len(params)}", rd.pos)
    for _ in range(count):
        at = rd.pos
        length = rd.take("<H", "name length")
        raw = bytes(rd.array("u1", length, "parameter name"))
        name = raw.decode("utf-8", errors="replace")
        ndim = rd.take("<B", "ndim")
        shape = rd.take(f"<{ndim}I", "shape") if ndim else ()
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        if name not in params:
            raise FormatError(f"unexpected parameter {name!r}", at)
        if shape != params[name].shape:
            raise FormatError(
                f"parameter {name!r} has shape {shape}, config needs {params[name].shape}", at)
        size = int(np.prod(shape)) if shape else 1
        params[name].data = rd.array("<f8", size, name).reshape(shape).astype(np.float64)
    has_opt = rd.take("<B", "optimizer flag")
    opt_state = None
    if has_opt == 1:
        t = rd.take("<I", "optimizer step")
        ordered = model.parameters()
        m = [rd.array("<f8", p.data.size, "adam m").reshape(p.shape).copy() for p in ordered]
        v = [rd.array("<f8", p.data.size, "adam v").reshape(p.shape).copy() for p in ordered]
        opt_state = {"t": t, "m": m, "v": v}
    elif has_opt != 0:
        raise FormatError(f"bad optimizer flag {has_opt}", rd.pos - 1)
    rd.finish()
    return model, physics, opt_state


def save_model(path, model, physics, optimizer=None):
    with open(path, "wb") as fh:
        fh.write(checkpoint_bytes(model, physics, optimizer))


def load_model(path, **expect):
    with open(path, "rb") as fh:
        return parse_checkpoint(fh.read(), expect)
