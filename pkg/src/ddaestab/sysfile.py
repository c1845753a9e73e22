"""System definition documents.

A document is a single JSON object with a ``plant`` block and optionally a
``controller`` block.  Each block holds the state dimension ``n`` and the
delay-term lists named exactly E, hE, A, hA, B1, hB1, C1, hC1, D11, hD11;
matrices are row-major arrays of arrays of numbers, delay lists plain
arrays.  Missing lists mean "no terms"; a missing E means the identity
descriptor.  ``data/system.schema.json`` documents the container formally.

Synthesis results are written in the same container with the plant copied
in, so a written file is directly consumable by the analysis commands.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .model import ControllerIo, PlantIo, create_controller, create_plant

__all__ = [
    "SystemFileError",
    "SystemDocument",
    "load_system",
    "parse_document",
    "plant_block",
    "controller_block",
    "write_document",
]

_TERM_KEYS = ("E", "A", "B1", "C1", "D11")


class SystemFileError(Exception):
    """Malformed system file; carries line/column for syntax errors."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        loc = f" (line {line}, column {col})" if line is not None else ""
        super().__init__(message + loc)
        self.line = line
        self.col = col


@dataclass(frozen=True)
class SystemDocument:
    plant: PlantIo
    controller: ControllerIo | None
    raw: dict


def _matrices(block: dict, key: str, where: str):
    mats = block.get(key, [])
    delays = block.get("h" + key, [])
    if not isinstance(mats, list) or not isinstance(delays, list):
        raise SystemFileError(f"{where}.{key} and {where}.h{key} must be arrays")
    out = []
    for i, mat in enumerate(mats):
        try:
            arr = np.array(mat, dtype=float)
        except (TypeError, ValueError) as exc:
            raise SystemFileError(f"{where}.{key}[{i}] is not a numeric matrix: {exc}") from None
        if arr.ndim != 2:
            raise SystemFileError(f"{where}.{key}[{i}] must be an array of rows")
        out.append(arr)
    try:
        hs = [float(d) for d in delays]
    except (TypeError, ValueError):
        raise SystemFileError(f"{where}.h{key} must be an array of numbers") from None
    return out, hs


def _parse_block(block: dict, where: str, is_plant: bool):
    if not isinstance(block, dict):
        raise SystemFileError(f"{where} must be an object")
    unknown = set(block) - {"n"} - set(_TERM_KEYS) - {"h" + k for k in _TERM_KEYS}
    if unknown:
        raise SystemFileError(f"{where}: unknown keys {sorted(unknown)}")
    if "n" not in block:
        raise SystemFileError(f"{where}.n (state dimension) is required")
    n = block["n"]
    if not isinstance(n, int) or n < 0:
        raise SystemFileError(f"{where}.n must be a nonnegative integer")
    parts = {}
    for key in _TERM_KEYS:
        parts[key], parts["h" + key] = _matrices(block, key, where)
    E = parts["E"] if parts["E"] else None
    hE = parts["hE"] if parts["E"] else None
    try:
        if is_plant:
            io = create_plant(parts["A"], parts["hA"], parts["B1"], parts["hB1"],
                              parts["C1"], parts["hC1"], parts["D11"], parts["hD11"],
                              E, hE)
            got_n = io.n_z
        else:
            io = create_controller(parts["A"], parts["hA"], parts["B1"], parts["hB1"],
                                   parts["C1"], parts["hC1"], parts["D11"], parts["hD11"],
                                   E, hE, n_c=n if parts["A"] else None)
            got_n = io.n_c
    except ValueError as exc:
        raise SystemFileError(f"{where}: {exc}") from None
    if got_n != n:
        raise SystemFileError(
            f"{where}.n = {n} but the matrices imply state dimension {got_n}"
        )
    return io


def parse_document(doc: dict) -> SystemDocument:
    if not isinstance(doc, dict):
        raise SystemFileError("top level must be an object")
    if "plant" not in doc:
        raise SystemFileError("missing required 'plant' block")
    plant = _parse_block(doc["plant"], "plant", True)
    controller = None
    if doc.get("controller") is not None:
        controller = _parse_block(doc["controller"], "controller", False)
        if controller.n_u != plant.n_u or controller.n_y != plant.n_y:
            raise SystemFileError(
                f"controller ports ({controller.n_u}x{controller.n_y}) do not match "
                f"plant ports ({plant.n_u}x{plant.n_y})"
            )
    return SystemDocument(plant, controller, doc)


def load_system(path) -> SystemDocument:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise SystemFileError(f"cannot read {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SystemFileError(f"invalid JSON in {path}: {exc.msg}",
                              exc.lineno, exc.colno) from None
    return parse_document(doc)


def _block_dict(n, E, hE, A, hA, B1, hB1, C1, hC1, D11, hD11) -> dict:
    out: dict = {"n": int(n)}
    for key, mats, hs in (("E", E, hE), ("A", A, hA), ("B1", B1, hB1),
                          ("C1", C1, hC1), ("D11", D11, hD11)):
        if mats:
            out[key] = [np.asarray(mm).tolist() for mm in mats]
            out["h" + key] = [float(d) for d in hs]
    return out


def plant_block(plant: PlantIo) -> dict:
    return _block_dict(plant.n_z, plant.E, plant.hE, plant.A, plant.hA,
                       plant.B1, plant.hB1, plant.C1, plant.hC1,
                       plant.D11, plant.hD11)


def controller_block(ctrl: ControllerIo) -> dict:
    return _block_dict(ctrl.n_c, ctrl.E, ctrl.hE, ctrl.A, ctrl.hA,
                       ctrl.B1, ctrl.hB1, ctrl.C1, ctrl.hC1,
                       ctrl.D11, ctrl.hD11)


def write_document(path, plant: PlantIo, controller: ControllerIo | None = None,
                   report: dict | None = None) -> None:
    doc: dict = {"plant": plant_block(plant)}
    if controller is not None:
        doc["controller"] = controller_block(controller)
    if report is not None:
        doc["report"] = report
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
