"""File formats: JSON network documents, PTNW weight blobs, binary PNM images.

Network document (canonical form: sorted keys, no insignificant whitespace)::

    {"head":{"classes":10},
     "input":{"c":3,"h":32,"w":32},
     "layout":{"central":true,"k":4,"m_h":4,"m_w":4},
     "tunnels":[{"bottlenecks":[{"affine":true,"c_out":8,"residual":true,"s":1,"t":6}],
                 "stem":{"c_out":8,"k_h":3,"k_w":3,"p_h":1,"p_w":1,"s":1}}, ...]}

``stem`` is optional.  Bottleneck input widths are inferred from the chain.

Weight blob: ``b"PTNW"``, version (u16 LE), tunnel count (u16 LE), then for
each tunnel and op the arrays as little-endian float32 with no padding:
stem ``[k_h][k_w][c_in][c_out]``; per bottleneck expand ``[t c_in][c_in]``,
dw ``[t c_in][3][3]``, reduce ``[c_out][t c_in]``, and when ``affine`` the
expand scale, expand bias, dw scale, dw bias (``[t c_in]`` each).  The FC
matrix ``[c_final][classes]`` comes last.
"""

from __future__ import annotations

import json
import re
import struct

import numpy as np

from .bottleneck import BottleneckSpec, BottleneckWeights
from .network import NetworkSpec, NetworkWeights, TunnelSpec, TunnelWeights
from .segmentation import LayoutError, PatchLayout
from .tensor import ConvParams, ShapeError, TensorShape, shape_of

MAGIC = b"PTNW"
VERSION = 1
_HEADER = struct.Struct("<4sHH")
_F32 = np.dtype("<f4")


class FormatError(ValueError):
    """Malformed or semantically invalid model/image file."""


# -- network documents -------------------------------------------------------

def _require(obj, key, kind, where):
    if not isinstance(obj, dict) or key not in obj:
        raise FormatError(f"{where}: missing key {key!r}")
    val = obj[key]
    ok = isinstance(val, kind) and not (kind is int and isinstance(val, bool))
    if not ok:
        raise FormatError(f"{where}.{key}: expected {kind.__name__}, got {type(val).__name__}")
    return val


def _check_keys(obj, allowed, where):
    extra = set(obj) - set(allowed)
    if extra:
        raise FormatError(f"{where}: unknown keys {sorted(extra)}")


def spec_from_dict(doc: dict) -> NetworkSpec:
    if not isinstance(doc, dict):
        raise FormatError("document root must be an object")
    _check_keys(doc, {"input", "layout", "tunnels", "head"}, "root")
    inp = _require(doc, "input", dict, "root")
    _check_keys(inp, {"h", "w", "c"}, "input")
    shape = TensorShape(*(_require(inp, k, int, "input") for k in ("h", "w", "c")))
    lay = _require(doc, "layout", dict, "root")
    _check_keys(lay, {"k", "m_h", "m_w", "central"}, "layout")
    head = _require(doc, "head", dict, "root")
    _check_keys(head, {"classes"}, "head")
    try:
        shape.validate()
        layout = PatchLayout(
            _require(lay, "k", int, "layout"),
            _require(lay, "m_h", int, "layout"),
            _require(lay, "m_w", int, "layout"),
            _require(lay, "central", bool, "layout"),
        )
        patch = layout.patch_shape(shape)
    except (LayoutError, ShapeError) as exc:
        raise FormatError(f"layout: {exc}") from None

    tunnels = []
    for i, tdoc in enumerate(_require(doc, "tunnels", list, "root")):
        where = f"tunnels[{i}]"
        if not isinstance(tdoc, dict):
            raise FormatError(f"{where}: expected object")
        _check_keys(tdoc, {"stem", "bottlenecks"}, where)
        c = patch.c
        try:
            stem = None
            if "stem" in tdoc:
                sd = _require(tdoc, "stem", dict, where)
                _check_keys(sd, {"k_h", "k_w", "s", "p_h", "p_w", "c_out"}, f"{where}.stem")
                vals = [_require(sd, k, int, f"{where}.stem") for k in ("k_h", "k_w", "s", "p_h", "p_w")]
                stem = ConvParams(*vals, c_in=c, c_out=_require(sd, "c_out", int, f"{where}.stem"))
                c = stem.c_out
            blocks = []
            for j, bd in enumerate(_require(tdoc, "bottlenecks", list, where)):
                bwhere = f"{where}.bottlenecks[{j}]"
                if not isinstance(bd, dict):
                    raise FormatError(f"{bwhere}: expected object")
                _check_keys(bd, {"t", "s", "c_out", "residual", "affine"}, bwhere)
                b = BottleneckSpec(
                    c_in=c,
                    t=_require(bd, "t", int, bwhere),
                    c_out=_require(bd, "c_out", int, bwhere),
                    stride=_require(bd, "s", int, bwhere),
                    residual=_require(bd, "residual", bool, bwhere),
                    affine=_require(bd, "affine", bool, bwhere),
                )
                blocks.append(b)
                c = b.c_out
        except ShapeError as exc:
            raise FormatError(f"{where}: {exc}") from None
        tunnels.append(TunnelSpec(stem, tuple(blocks)))
    try:
        return NetworkSpec(shape, layout, tuple(tunnels), _require(head, "classes", int, "head"))
    except (ShapeError, LayoutError) as exc:
        raise FormatError(str(exc)) from None


def spec_to_dict(net: NetworkSpec) -> dict:
    tunnels = []
    for tun in net.tunnels:
        td = {
            "bottlenecks": [
                {"t": b.t, "s": b.stride, "c_out": b.c_out, "residual": b.residual, "affine": b.affine}
                for b in tun.blocks
            ]
        }
        if tun.stem is not None:
            s = tun.stem
            td["stem"] = {"k_h": s.k_h, "k_w": s.k_w, "s": s.s, "p_h": s.p_h, "p_w": s.p_w, "c_out": s.c_out}
        tunnels.append(td)
    lay = net.layout
    return {
        "input": dict(net.input_shape._asdict()),
        "layout": {"k": lay.k, "m_h": lay.m_h, "m_w": lay.m_w, "central": lay.central},
        "tunnels": tunnels,
        "head": {"classes": net.num_classes},
    }


def dump_spec(net: NetworkSpec) -> bytes:
    """Canonical encoding: sorted keys, compact separators, UTF-8."""
    return json.dumps(spec_to_dict(net), sort_keys=True, separators=(",", ":")).encode("utf-8")


def load_spec(data: bytes | str) -> NetworkSpec:
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"spec is not UTF-8 (byte offset {exc.start})") from None
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise FormatError(f"parse error at line {exc.lineno} column {exc.colno} (offset {exc.pos}): {exc.msg}") from None
    return spec_from_dict(doc)


# -- weights -----------------------------------------------------------------

def _weight_shapes(net: NetworkSpec) -> list[list[tuple[int, ...]]]:
    per_tunnel = []
    for tun in net.tunnels:
        shapes = []
        if tun.stem is not None:
            s = tun.stem
            shapes.append((s.k_h, s.k_w, s.c_in, s.c_out))
        for b in tun.blocks:
            n = b.hidden
            shapes += [(n, b.c_in), (n, 3, 3), (b.c_out, n)]
            if b.affine:
                shapes += [(n,)] * 4
        per_tunnel.append(shapes)
    return per_tunnel


def weights_nbytes(net: NetworkSpec) -> int:
    n = sum(int(np.prod(s)) for tun in _weight_shapes(net) for s in tun)
    return _HEADER.size + 4 * (n + net.c_final * net.num_classes)


def load_weights(data: bytes, net: NetworkSpec) -> NetworkWeights:
    if len(data) < _HEADER.size:
        raise FormatError(f"weights blob too short for header: {len(data)} bytes")
    magic, version, n_tunnels = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"unsupported weights version {version}, expected {VERSION}")
    if n_tunnels != len(net.tunnels):
        raise FormatError(f"blob has {n_tunnels} tunnels, spec has {len(net.tunnels)}")
    expected = weights_nbytes(net)
    if len(data) != expected:
        raise FormatError(f"weights length mismatch: expected {expected} bytes, got {len(data)}")

    pos = _HEADER.size

    def take(shape):
        nonlocal pos
        count = int(np.prod(shape))
        arr = np.frombuffer(data, dtype=_F32, count=count, offset=pos).astype(np.float64).reshape(shape)
        pos += 4 * count
        return arr

    tunnels = []
    for tun in net.tunnels:
        stem = None
        if tun.stem is not None:
            s = tun.stem
            stem = take((s.k_h, s.k_w, s.c_in, s.c_out))
        blocks = []
        for b in tun.blocks:
            n = b.hidden
            bw = BottleneckWeights(take((n, b.c_in)), take((n, 3, 3)), take((b.c_out, n)))
            if b.affine:
                bw.expand_scale, bw.expand_bias, bw.dw_scale, bw.dw_bias = (take((n,)) for _ in range(4))
            blocks.append(bw)
        tunnels.append(TunnelWeights(stem, blocks))
    fc = take((net.c_final, net.num_classes))
    return NetworkWeights(tunnels, fc).check(net)


def dump_weights(weights: NetworkWeights, net: NetworkSpec) -> bytes:
    weights.check(net)
    parts = [_HEADER.pack(MAGIC, VERSION, len(net.tunnels))]
    for tw, ts in zip(weights.tunnels, net.tunnels):
        if ts.stem is not None:
            parts.append(np.asarray(tw.stem, dtype=_F32).tobytes())
        for bw, bs in zip(tw.blocks, ts.blocks):
            parts += [np.asarray(a, dtype=_F32).tobytes() for a in bw.arrays(bs)]
    parts.append(np.asarray(weights.fc, dtype=_F32).tobytes())
    return b"".join(parts)


# -- PNM images --------------------------------------------------------------

_PNM_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n?)*([^\s#]+)")


def load_image_pnm(data: bytes) -> np.ndarray:
    """Binary PGM (P5) or PPM (P6) with maxval 255 -> (h, w, c) in [0, 1]."""
    pos = 0
    fields = []
    for _ in range(4):
        m = _PNM_TOKEN.match(data, pos)
        if m is None:
            raise FormatError("malformed PNM header")
        fields.append(m.group(1))
        pos = m.end()
    magic = fields[0]
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"unsupported PNM magic {magic!r}; only P5 and P6 are read")
    try:
        w, h, maxval = (int(f) for f in fields[1:])
    except ValueError:
        raise FormatError(f"malformed PNM header fields {fields[1:]}") from None
    if w < 1 or h < 1:
        raise FormatError(f"bad PNM dimensions {w}x{h}")
    if maxval != 255:
        raise FormatError(f"unsupported maxval {maxval}; only 255 is supported")
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise FormatError("missing whitespace after PNM header")
    pos += 1
    c = 1 if magic == b"P5" else 3
    need = h * w * c
    pixels = data[pos : pos + need]
    if len(pixels) < need:
        raise FormatError(f"truncated pixel data: expected {need} bytes, got {len(pixels)}")
    return np.frombuffer(pixels, dtype=np.uint8).reshape(h, w, c).astype(np.float64) / 255.0


def dump_image_pnm(image) -> bytes:
    """Inverse of :func:`load_image_pnm` (values rounded to the nearest /255 step)."""
    image = np.asarray(image, dtype=np.float64)
    h, w, c = shape_of(image)
    if c not in (1, 3):
        raise FormatError(f"PNM holds 1 or 3 channels, not {c}")
    magic = b"P5" if c == 1 else b"P6"
    pixels = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    return magic + f"\n{w} {h}\n255\n".encode("ascii") + pixels.tobytes()
