# file_handler.py

import csv
import hashlib
import json
import logging
import os
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from models.errors import DataError

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def ensure_dir(path: str) -> str:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as error:
        raise DataError(f"Output directory '{path}' is not writable: {error}") from error
    return path


def write_csv(path: str, header: Sequence[str], rows: Sequence[Sequence[Any]], manifest_ref: str = ""):
    """
    Writes a CSV whose first line is a '# manifest=...' comment, followed by the header row.
    Floats are written with repr so a reader recovers them bit-exactly.
    """
    with open(path, "w", newline="", encoding="utf-8") as handle:
        handle.write(f"# manifest={MANIFEST_NAME} {manifest_ref}".rstrip() + "\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(value)) if isinstance(value, (float, np.floating)) else value for value in row])
    logger.info("Wrote %s (%d rows)", path, len(rows))


def read_csv(path: str) -> Tuple[List[str], List[List[str]]]:
    """
    Returns (header, rows) with comment lines skipped; values stay strings.
    """
    if not os.path.exists(path):
        raise DataError(f"Missing file '{path}'; run the producing command first.")
    with open(path, "r", newline="", encoding="utf-8") as handle:
        lines = [line for line in handle if not line.startswith("#")]
    records = list(csv.reader(lines))
    if not records:
        raise DataError(f"File '{path}' has no header row.")
    return records[0], records[1:]


def read_json(path: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except FileNotFoundError as error:
        raise DataError(f"Missing file '{path}'.") from error
    except json.JSONDecodeError as error:
        raise DataError(f"File '{path}' is not valid JSON: {error}") from error


def write_json(path: str, payload: Dict[str, Any]):
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def load_manifest(output_dir: str) -> Dict[str, Any]:
    path = os.path.join(output_dir, MANIFEST_NAME)
    return read_json(path) if os.path.exists(path) else {}


def update_manifest(output_dir: str, **sections: Any) -> Dict[str, Any]:
    """
    Merges top-level sections into manifest.json; nested dictionaries are merged one level deep.
    """
    manifest = load_manifest(output_dir)
    for name, payload in sections.items():
        if isinstance(payload, dict) and isinstance(manifest.get(name), dict):
            manifest[name].update(payload)
        else:
            manifest[name] = payload
    write_json(os.path.join(output_dir, MANIFEST_NAME), manifest)
    return manifest


def content_hash(payload: Any) -> str:
    """
    SHA-256 of an array's bytes and shape, or of a JSON-serialisable object.
    """
    if isinstance(payload, np.ndarray):
        array = np.ascontiguousarray(payload)
        return hashlib.sha256(array.tobytes() + f"{array.dtype}{array.shape}".encode()).hexdigest()
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def save_matrix(path: str, matrix: np.ndarray) -> str:
    """
    Stores a float matrix in numpy's binary format and returns its content hash.
    """
    matrix = np.ascontiguousarray(matrix, dtype=np.float64)
    with open(path, "wb") as handle:
        np.save(handle, matrix, allow_pickle=False)
    return content_hash(matrix)


def load_matrix(path: str, expected_hash: str) -> np.ndarray:
    """
    Loads a cached matrix and verifies it against the recorded hash.
    """
    try:
        with open(path, "rb") as handle:
            matrix = np.load(handle, allow_pickle=False)
    except FileNotFoundError as error:
        raise DataError(f"Missing cache file '{path}'; run embed first.") from error
    except (ValueError, EOFError, OSError) as error:
        raise DataError(f"Cache file '{path}' is unreadable: {error}") from error
    if content_hash(matrix) != expected_hash:
        raise DataError(f"Cache file '{path}' is corrupted: content hash does not match the manifest.")
    return matrix
