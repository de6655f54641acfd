"""Run manifests and atomic file output.

Every CLI command records what it ran: the resolved configuration, digests
of its inputs and outputs, the seed, and the tool version. Re-running the
recorded command reproduces the outputs byte for byte. Output files are
written to a temporary sibling and renamed into place, so a failed run
never leaves a partial file behind.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_atomic(path: str | Path, content: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json_atomic(path: str | Path, payload) -> None:
    write_atomic(path, json.dumps(payload, indent=1, sort_keys=True) + "\n")


def build_manifest(
    command: str,
    config: Mapping,
    inputs: Mapping[str, str | Path],
    outputs: Mapping[str, str | Path],
    seed: int | None,
) -> dict:
    from . import __version__

    return {
        "command": command,
        "config": dict(config),
        "inputs": {name: sha256_file(p) for name, p in sorted(inputs.items())},
        "outputs": {name: sha256_file(p) for name, p in sorted(outputs.items())},
        "seed": seed,
        "version": __version__,
        "created": datetime.now(timezone.utc).isoformat(),
    }


def write_manifest(
    path: str | Path,
    command: str,
    config: Mapping,
    inputs: Mapping[str, str | Path],
    outputs: Mapping[str, str | Path],
    seed: int | None,
) -> dict:
    manifest = build_manifest(command, config, inputs, outputs, seed)
    write_json_atomic(path, manifest)
    return manifest
