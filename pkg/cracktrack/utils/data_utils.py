#!/usr/bin/env python
# coding: utf-8

"""
Type casting, serialization and output-directory helpers.

String values coming from the command line are cast with `estimateType`. Tables are
written with pandas at 17 significant digits so that reading them back is bit-exact;
JSON sidecars use sorted keys. Run directories are staged under a temporary name and
renamed into place once complete.
"""

import hashlib
import json
import logging
import os
import shutil
from contextlib import contextmanager

import numpy as np
import pandas as pd

from cracktrack.errors import ConfigError

FLOAT_FORMAT = "%.17g"
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def boolify(s):
    """
    Convert a string representation of a boolean to a Python bool.

    Raises:
        ValueError: If the string cannot be converted to a boolean
    """
    if s == "True" or s == "true":
        return True
    if s == "False" or s == "false":
        return False
    raise ValueError("Not Boolean Value!")


def nullify(s):
    """
    Convert a string representation of None to Python None.

    Raises:
        ValueError: If the string cannot be converted to None
    """
    if s == "None" or s == "none" or s == "null":
        return None
    raise ValueError("Not None type!")


def listify(s):
    """
    Convert a bracketed, comma separated string such as "[0.4, 0.2]" to a list.

    Raises:
        ValueError: If the string is not bracketed
    """
    if not (s.startswith("[") and s.endswith("]")):
        raise ValueError("Not a list!")
    body = s[1:-1].strip()
    return [estimateType(entry.strip()) for entry in body.split(",")] if body else []


def estimateType(var):
    """
    Guess and convert a variable to its most appropriate Python type.

    Tries None, boolean, list, integer, float and finally keeps the string.

    Args:
        var: The variable to convert, can be a single value or a list

    Returns:
        The converted value; lists are converted element by element
    """
    if type(var) is list:
        if len(var) == 1:
            return estimateType(var[0])
        return [estimateType(varEntry) for varEntry in var]
    var = str(var)  # important if the parameters aren't strings...
    for caster in (nullify, boolify, listify, int, float):
        try:
            return caster(var)
        except ValueError:
            pass
    return var


def autocast(dFxn):
    """
    Decorator that casts every argument of a function with `estimateType`.

    Args:
        dFxn: The function to be decorated

    Returns:
        function: A wrapped function that automatically casts its arguments
    """

    def wrapped(*c, **d):
        cp = [estimateType(x) for x in c]
        dp = dict((i, estimateType(j)) for (i, j) in d.items())
        return dFxn(*cp, **dp)

    wrapped.__name__ = dFxn.__name__
    wrapped.__doc__ = dFxn.__doc__
    return wrapped


def fnv1a_64(data):
    """64-bit FNV-1a hash of a bytes object."""
    value = FNV_OFFSET
    for byte in data:
        value ^= byte
        value = (value * FNV_PRIME) & _MASK64
    return value


def array_checksum(array):
    """FNV-1a over the little-endian float64 bytes of an array, as 16 hex digits."""
    data = np.ascontiguousarray(array, dtype="<f8").tobytes()
    return f"{fnv1a_64(data):016x}"


def file_checksum(path):
    """sha256 of a file's bytes."""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def write_table(path, columns):
    """
    Write named columns to CSV with 17 significant digits.

    Args:
        path (str): Destination file
        columns (dict): Ordered mapping column name -> sequence

    Returns:
        str: The path written
    """
    pd.DataFrame(columns).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logging.info(f"Wrote table {path}")
    return path


def read_table(path):
    """Read a CSV written by `write_table` without losing precision."""
    return pd.read_csv(path, float_precision="round_trip")


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    return value


def write_json(path, payload):
    """Write a JSON document with sorted keys; numpy values are converted."""
    with open(path, "w") as f:
        json.dump(_jsonable(payload), f, sort_keys=True, indent=2)
        f.write("\n")
    logging.info(f"Wrote json {path}")
    return path


def read_json(path):
    with open(path) as f:
        return json.load(f)


@contextmanager
def staged_output(output_dir):
    """
    Stage a run directory and move it into place on success.

    The final directory is locked with a `.lock` file for the duration of the run. On
    success the staged directory replaces `output_dir`; on failure the staged directory
    is kept under its temporary name and no manifest reaches `output_dir`.

    Yields:
        str: The staging directory to write into

    Raises:
        ConfigError: If another run holds the lock
    """
    output_dir = os.path.abspath(output_dir)
    parent = os.path.dirname(output_dir)
    os.makedirs(parent, exist_ok=True)
    lock_path = output_dir + ".lock"
    try:
        lock_fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigError(f"Output directory is locked by {lock_path}", field="output_dir")
    os.write(lock_fd, str(os.getpid()).encode())
    os.close(lock_fd)

    staging = f"{output_dir}.tmp-{os.getpid()}"
    if os.path.exists(staging):
        shutil.rmtree(staging)
    os.makedirs(staging)
    try:
        yield staging
        if os.path.exists(output_dir):
            shutil.rmtree(output_dir)
        os.replace(staging, output_dir)
        logging.info(f"Run directory committed to {output_dir}")
    finally:
        os.remove(lock_path)
