"""JSON-compatible serialization of spectral fields.

A document is ``{"header": {...}, "records": [...]}`` with one record per
canonical wavevector.  Floats are written with ``repr`` semantics (17
significant digits), so a round trip is bit-exact.
"""

from __future__ import annotations

import json

import numpy as np

from .fields import ScalarSpectralField, SpectralField

FORMAT_VERSION = 1


def field_to_dict(u) -> dict:
    records = []
    for m, c in zip(u.modes, u.coeffs):
        rec = {"m": [int(v) for v in m]}
        if u.kind == "vector":
            rec["re"] = [float(v) for v in np.real(c)]
            rec["im"] = [float(v) for v in np.imag(c)]
        else:
            rec["re"] = float(np.real(c))
            rec["im"] = float(np.imag(c))
        records.append(rec)
    header = {"kind": u.kind, "cutoff_hint": u.cutoff_hint, "format_version": FORMAT_VERSION}
    return {"header": header, "records": records}


def field_from_dict(doc: dict):
    header = doc["header"]
    if header.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported field format version {header.get('format_version')!r}")
    kind = header["kind"]
    recs = doc["records"]
    modes = np.array([r["m"] for r in recs], dtype=np.int64).reshape(-1, 3)
    if kind == "vector":
        coeffs = np.array([np.array(r["re"]) + 1j * np.array(r["im"]) for r in recs]).reshape(-1, 3)
        return SpectralField(modes, coeffs, cutoff_hint=header.get("cutoff_hint"))
    if kind == "scalar":
        coeffs = np.array([r["re"] + 1j * r["im"] for r in recs], dtype=complex)
        return ScalarSpectralField(modes, coeffs, cutoff_hint=header.get("cutoff_hint"))
    raise ValueError(f"unknown field kind {kind!r}")


def dumps(u, **kwargs) -> str:
    return json.dumps(field_to_dict(u), **kwargs)


def loads(text: str):
    return field_from_dict(json.loads(text))


def save(u, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(u, indent=1))
        fh.write("\n")


def load(path):
    with open(path) as fh:
        return loads(fh.read())
