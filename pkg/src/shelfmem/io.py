"""File formats: scenes (JSON), beliefs (npz), episode logs (JSON lines), tables (CSV)."""
from __future__ import annotations

import csv
import io
import json
import math
import zipfile
from pathlib import Path

import numpy as np

from .core import EvidentialBelief, GridSpec
from .simulator import Scene, SceneObject

SCENE_SCHEMA = "shelfmem.scene"
LOG_SCHEMA = "shelfmem.episode"
SCHEMA_VERSION = 1


class FormatError(ValueError):
    """A file exists but does not hold what its format promises."""


def _clean(x):
    """JSON-safe copy: NaN/inf become None, numpy scalars become Python numbers."""
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, allow_nan=False)


def scene_to_dict(scene: Scene, meta: dict | None = None) -> dict:
    d = {"schema": SCENE_SCHEMA, "schema_version": SCHEMA_VERSION,
         "grid": scene.spec.to_dict(), "walls": list(scene.walls),
         "objects": [o.to_dict() for o in scene.objects]}
    if meta:
        d["meta"] = meta
    return d


def scene_from_dict(d: dict) -> Scene:
    try:
        if d.get("schema") != SCENE_SCHEMA:
            raise FormatError("not a scene file")
        if d.get("schema_version") != SCHEMA_VERSION:
            raise FormatError(f"unsupported scene schema version {d.get('schema_version')}")
        spec = GridSpec.from_dict(d["grid"])
        scene = Scene(spec, tuple(SceneObject.from_dict(o) for o in d["objects"]))
        if "walls" in d and not np.allclose(d["walls"], scene.walls):
            raise FormatError("wall box does not match the grid extent")
        scene.validate()
    except FormatError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"malformed scene: {e}") from e
    return scene


def save_scene(path, scene: Scene, meta: dict | None = None) -> None:
    Path(path).write_text(json.dumps(scene_to_dict(scene, meta), indent=1, sort_keys=True) + "\n")


def load_scene(path) -> Scene:
    """Read and validate a scene file; FileNotFoundError or FormatError on failure."""
    text = Path(path).read_text()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: not valid JSON ({e})") from e
    return scene_from_dict(d)


def save_belief(path, belief: EvidentialBelief, meta: dict | None = None) -> None:
    """Write a belief as an uncompressed npz with the grid spec embedded as JSON.

    The archive is assembled by hand with fixed timestamps so that equal
    beliefs give byte-identical files.
    """
    arrays = {"lambda_occ": np.ascontiguousarray(belief.lambda_occ),
              "lambda_sem": np.ascontiguousarray(belief.lambda_sem),
              "spec": np.frombuffer(dumps(belief.spec.to_dict()).encode(), dtype=np.uint8),
              "meta": np.frombuffer(dumps(meta or {}).encode(), dtype=np.uint8)}
    with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
        for name in sorted(arrays):
            buf = io.BytesIO()
            np.lib.format.write_array(buf, arrays[name], allow_pickle=False)
            zf.writestr(zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0)),
                        buf.getvalue())


def load_belief(path) -> EvidentialBelief:
    try:
        with np.load(path, allow_pickle=False) as z:
            spec = GridSpec.from_dict(json.loads(z["spec"].tobytes().decode()))
            return EvidentialBelief(spec, z["lambda_occ"], z["lambda_sem"])
    except (KeyError, ValueError, zipfile.BadZipFile, OSError) as e:
        if isinstance(e, FileNotFoundError):
            raise
        raise FormatError(f"{path}: not a belief file ({e})") from e


def log_records(log, scene: Scene | None = None, include_timing: bool = False) -> list[dict]:
    """Header, one record per step, and a closing summary."""
    head = {"type": "header", "schema": LOG_SCHEMA, "schema_version": SCHEMA_VERSION,
            "policy": log.policy, "seed": log.seed, "config": log.config}
    if scene is not None:
        head["scene"] = scene_to_dict(scene)
    recs = [head]
    for s in log.steps:
        r = dict(s)
        if not include_timing:
            r.pop("wall_time", None)
        recs.append({"type": "step", **r})
    last = log.steps[-1] if log.steps else {}
    recs.append({"type": "summary", "n_steps": len(log.steps),
                 "n_pushes": sum(s["action"]["kind"] == "push" for s in log.steps),
                 **{k: last.get(k) for k in ("occ_iou", "sem_miou", "occ_entropy",
                                             "sem_entropy")}})
    return recs


def write_log(path, log, scene: Scene | None = None, include_timing: bool = False) -> None:
    lines = [dumps(r) for r in log_records(log, scene, include_timing)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_log(path) -> list[dict]:
    recs = []
    for k, line in enumerate(Path(path).read_text().splitlines()):
        if not line.strip():
            continue
        try:
            recs.append(json.loads(line))
        except json.JSONDecodeError as e:
            raise FormatError(f"{path}:{k + 1}: bad record") from e
    if not recs or recs[0].get("schema") != LOG_SCHEMA:
        raise FormatError(f"{path}: not an episode log")
    return recs


def write_csv(path, rows: list[dict], columns: list[str]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(r.get(k)) for k in columns})


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return "" if not math.isfinite(float(v)) else repr(float(v))
    return "" if v is None else v


def bundled_scene_paths(prefix: str = "") -> list[Path]:
    """Scene files shipped with the package (``high_*``, ``low_*``, ``hand_*``)."""
    from importlib.resources import files
    root = files("shelfmem") / "data" / "scenes"
    return sorted(Path(str(p)) for p in root.iterdir()
                  if p.name.endswith(".json") and p.name.startswith(prefix))


def bundled_scenes(prefix: str = "") -> list[Scene]:
    return [load_scene(p) for p in bundled_scene_paths(prefix)]
