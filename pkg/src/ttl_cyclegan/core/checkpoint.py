"""Single-file checkpoint container.

Layout: 8-byte magic, 4-byte big-endian header length, UTF-8 JSON header,
then a ``torch.save`` payload. The header stores the format version, the
class count the networks were built for, and a SHA-256 digest of the payload.
"""
from __future__ import annotations

import hashlib
import io
import json
import struct
from pathlib import Path
from typing import Any, Optional

import torch

from ..errors import CorruptCheckpoint, IOFailure, VersionMismatch

MAGIC = b"TTLCKPT\x01"
FORMAT_VERSION = 1


def encode_checkpoint(payload: dict[str, Any], num_classes: int) -> bytes:
    buf = io.BytesIO()
    torch.save(payload, buf)
    body = buf.getvalue()
    header = json.dumps(
        {
            "format_version": FORMAT_VERSION,
            "num_classes": int(num_classes),
            "sha256": hashlib.sha256(body).hexdigest(),
            "payload_bytes": len(body),
        },
        sort_keys=True,
    ).encode("utf-8")
    return MAGIC + struct.pack(">I", len(header)) + header + body


def decode_checkpoint(blob: bytes, expected_num_classes: Optional[int] = None) -> tuple[dict, dict]:
    if len(blob) < len(MAGIC) + 4 or blob[: len(MAGIC)] != MAGIC:
        raise CorruptCheckpoint("bad magic bytes")
    (hlen,) = struct.unpack(">I", blob[len(MAGIC) : len(MAGIC) + 4])
    start = len(MAGIC) + 4
    try:
        header = json.loads(blob[start : start + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptCheckpoint(f"unreadable header: {exc}") from exc
    if header.get("format_version") != FORMAT_VERSION:
        raise VersionMismatch(
            f"checkpoint format {header.get('format_version')} != supported {FORMAT_VERSION}"
        )
    body = blob[start + hlen :]
    if hashlib.sha256(body).hexdigest() != header.get("sha256"):
        raise CorruptCheckpoint("payload digest mismatch")
    if expected_num_classes is not None and header.get("num_classes") != expected_num_classes:
        raise VersionMismatch(
            f"checkpoint built for {header.get('num_classes')} classes, config expects {expected_num_classes}"
        )
    try:
        payload = torch.load(io.BytesIO(body), map_location="cpu", weights_only=True)
    except Exception as exc:  # torch raises a zoo of types on bad pickles
        raise CorruptCheckpoint(f"payload does not deserialize: {exc}") from exc
    return header, payload


def save_checkpoint(bundle, state: dict[str, Any], path: str | Path):
    """Write ``bundle`` (anything with ``state_dicts()`` and ``num_classes``) and ``state``."""
    payload = {"models": bundle.state_dicts(), "state": state}
    blob = encode_checkpoint(payload, bundle.num_classes)
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp.write_bytes(blob)
        tmp.replace(path)
    except OSError as exc:
        raise IOFailure(f"cannot write checkpoint {path}: {exc}") from exc


def read_checkpoint(path: str | Path, expected_num_classes: Optional[int] = None) -> tuple[dict, dict]:
    """Return ``(model state dicts, training state)`` from ``path``."""
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise IOFailure(f"cannot read checkpoint {path}: {exc}") from exc
    _, payload = decode_checkpoint(blob, expected_num_classes)
    if not isinstance(payload, dict) or "models" not in payload:
        raise CorruptCheckpoint("payload missing model states")
    return payload["models"], payload.get("state", {})


def state_digest(state_dict: dict[str, torch.Tensor]) -> str:
    """SHA-256 over every tensor's name, dtype, shape and raw bytes."""
    h = hashlib.sha256()
    for name in sorted(state_dict):
        t = state_dict[name].detach().cpu().contiguous()
        h.update(name.encode())
        h.update(str(t.dtype).encode())
        h.update(str(tuple(t.shape)).encode())
        h.update(t.numpy().tobytes() if t.dtype != torch.bfloat16 else t.float().numpy().tobytes())
    return h.hexdigest()
