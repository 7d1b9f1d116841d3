"""
Instance files and random instance generation.

Instance files are JSON documents:
    {"name": ..., "phi": [[...], ...], "psi": [[...], ...], "b": [...],
     "x_star": [...], "x_bar": [...], "delta": ..., "lambda": ..., "seed": ..., "support_size": ...}
Only phi, psi and b are required. Floats are written with 17 significant digits so a
save/load cycle reproduces every double exactly; non-finite floats are written as null.
"""
import json
import logging
import os
from dataclasses import replace
from importlib import resources
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy import linalg as sla

from .certify import ProblemInstance
from .config import DEFAULT_SEED
from .errors import InstanceFileError, InvalidInputError
from .linalg import nullspace_basis

logger = logging.getLogger(__name__)

PSI_KINDS = ("identity", "tight-frame", "random")
FIXTURES = ("paper_sec4", "segment", "identity_e0", "scalar", "approx_sparse")


def format_float(value: float) -> str:
    value = float(value)
    if not np.isfinite(value):
        return "null"
    return format(value, ".17g")


def _encode(obj: Any, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        # rows of a matrix stay on one line
        if all(not isinstance(v, (list, tuple, dict, np.ndarray)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = ",\n".join(pad + _encode(v, indent, level + 1) for v in obj)
        return "[\n" + items + "\n" + end + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = ",\n".join(
            f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()
        )
        return "{\n" + items + "\n" + end + "}"
    raise TypeError(f"Cannot serialize object of type {type(obj).__name__}")


def dumps(obj: Any, indent: int = 2) -> str:
    """JSON text with every float written to 17 significant digits"""
    return _encode(obj, indent, 0) + "\n"


def instance_to_dict(instance: ProblemInstance) -> Dict[str, Any]:
    data: Dict[str, Any] = {}
    if instance.name is not None:
        data["name"] = instance.name
    if instance.seed is not None:
        data["seed"] = int(instance.seed)
    data["phi"] = instance.phi.tolist()
    data["psi"] = instance.psi.tolist()
    data["b"] = instance.b.tolist()
    if instance.x_star is not None:
        data["x_star"] = instance.x_star.tolist()
    if instance.x_bar is not None:
        data["x_bar"] = instance.x_bar.tolist()
    if instance.delta is not None:
        data["delta"] = float(instance.delta)
    if instance.lam is not None:
        data["lambda"] = float(instance.lam)
    if instance.support_size is not None:
        data["support_size"] = int(instance.support_size)
    return data


def _matrix(data: Dict[str, Any], key: str) -> np.ndarray:
    rows = data[key]
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise InstanceFileError(f'"{key}" must be a non-empty array of rows')
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise InstanceFileError(f'"{key}" has rows of different lengths {sorted(widths)}')
    try:
        return np.array(rows, dtype=float)
    except (TypeError, ValueError) as e:
        raise InstanceFileError(f'"{key}" has non-numeric entries: {e}')


def _vector(data: Dict[str, Any], key: str) -> Optional[np.ndarray]:
    if data.get(key) is None:
        return None
    values = data[key]
    if not isinstance(values, list):
        raise InstanceFileError(f'"{key}" must be an array')
    try:
        return np.array(values, dtype=float)
    except (TypeError, ValueError) as e:
        raise InstanceFileError(f'"{key}" has non-numeric entries: {e}')


def instance_from_dict(data: Dict[str, Any]) -> ProblemInstance:
    """Build a ProblemInstance from a parsed instance document"""
    if not isinstance(data, dict):
        raise InstanceFileError("Instance document must be a JSON object")
    missing = [k for k in ("phi", "psi", "b") if k not in data]
    if missing:
        raise InstanceFileError(f"Instance is missing required key(s): {', '.join(missing)}")

    try:
        return ProblemInstance(
            phi=_matrix(data, "phi"),
            psi=_matrix(data, "psi"),
            b=_vector(data, "b"),
            x_star=_vector(data, "x_star"),
            x_bar=_vector(data, "x_bar"),
            delta=None if data.get("delta") is None else float(data["delta"]),
            lam=None if data.get("lambda") is None else float(data["lambda"]),
            seed=None if data.get("seed") is None else int(data["seed"]),
            name=data.get("name"),
            support_size=None if data.get("support_size") is None else int(data["support_size"]),
        )
    except InvalidInputError as e:
        raise InstanceFileError(f"Invalid instance: {e}") from e


def load_instance(path: str) -> ProblemInstance:
    """
    Load an instance file

    Raises:
        InstanceFileError: missing file, invalid JSON (with line and column) or invalid content
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise InstanceFileError(f"Cannot read instance file {path}: {e.strerror or e}") from e

    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise InstanceFileError(
            f"{path}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}",
            line=e.lineno, column=e.colno,
        ) from e

    instance = instance_from_dict(data)
    if instance.name is None:
        instance = replace(instance, name=os.path.splitext(os.path.basename(path))[0])
    logger.debug(f"Loaded instance {instance.name}: m={instance.m}, n={instance.n}, l={instance.l}")
    return instance


def save_instance(instance: ProblemInstance, path: str) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps(instance_to_dict(instance)))
    logger.info(f"Instance written to {path}")


def fixture_path(name: str) -> str:
    """Filesystem path of a bundled fixture (with or without the .json suffix)"""
    stem = name[:-5] if name.endswith(".json") else name
    if stem not in FIXTURES:
        raise InstanceFileError(f"Unknown fixture {name!r}; available: {', '.join(FIXTURES)}")
    return str(resources.files("l1cert").joinpath("fixtures", f"{stem}.json"))


def load_fixture(name: str) -> ProblemInstance:
    return load_instance(fixture_path(name))


class InstanceGenerator:
    """Seeded generator of random recovery instances"""

    def __init__(self, seed: int = DEFAULT_SEED):
        self.seed = int(seed)
        self.rng = np.random.default_rng(self.seed)

    def sensing_matrix(self, m: int, n: int) -> np.ndarray:
        """Gaussian matrix with unit-norm rows"""
        G = self.rng.standard_normal((m, n))
        return G / np.linalg.norm(G, axis=1, keepdims=True)

    def analysis_operator(self, n: int, l: int, kind: str = "identity") -> np.ndarray:
        if kind == "identity":
            if l != n:
                raise InvalidInputError(f"identity analysis operator needs l = n, got l={l}, n={n}")
            return np.eye(n)
        if kind == "tight-frame":
            if l < n:
                raise InvalidInputError(f"a tight frame needs l >= n, got l={l}, n={n}")
            Q, _ = sla.qr(self.rng.standard_normal((l, n)), mode="economic")
            # rows of Q^T are orthonormal, so Psi Psi^T = I
            return Q.T.copy()
        if kind == "random":
            return self.rng.standard_normal((n, l))
        raise InvalidInputError(f"Unknown analysis operator {kind!r}; expected one of {', '.join(PSI_KINDS)}")

    def cosparse_signal(self, psi: np.ndarray, sparsity: int) -> np.ndarray:
        """Signal whose analysis coefficients Psi^T x have (generically) `sparsity` nonzeros"""
        n, l = psi.shape
        if not 0 <= sparsity <= l:
            raise InvalidInputError(f"sparsity must lie in [0, {l}], got {sparsity}")
        if sparsity == 0:
            return np.zeros(n)
        cosupport = np.sort(self.rng.choice(l, size=l - sparsity, replace=False))
        if l == n and np.array_equal(psi, np.eye(n)):
            support = np.setdiff1d(np.arange(l), cosupport)
            x = np.zeros(n)
            # magnitudes in [1, inf) keep the support well above the threshold
            magnitudes = 1.0 + np.abs(self.rng.standard_normal(support.size))
            x[support] = self.rng.choice([-1.0, 1.0], size=support.size) * magnitudes
            return x

        N = nullspace_basis(psi[:, cosupport].T)
        if N.shape[1] == 0:
            logger.warning(f"Cosupport of size {l - sparsity} leaves no cosparse signal; "
                           f"using a random signal")
            return self.rng.standard_normal(n)
        return N @ self.rng.standard_normal(N.shape[1])

    def generate(self, m: int, n: int, l: int, sparsity: int, psi_kind: str = "identity",
                 delta: Optional[float] = None, name: Optional[str] = None) -> ProblemInstance:
        """Random instance with b = Phi x*"""
        if not 1 <= m <= n:
            raise InvalidInputError(f"need 1 <= m <= n, got m={m}, n={n}")
        if not 0 <= sparsity <= l:
            raise InvalidInputError(f"need 0 <= sparsity <= l, got sparsity={sparsity}, l={l}")
        phi = self.sensing_matrix(m, n)
        psi = self.analysis_operator(n, l, psi_kind)
        x_star = self.cosparse_signal(psi, sparsity)
        return ProblemInstance(
            phi=phi, psi=psi, b=phi @ x_star, x_star=x_star, delta=delta, seed=self.seed,
            name=name or f"random-{psi_kind}-m{m}-n{n}-l{l}-s{sparsity}-seed{self.seed}",
        )

    def approximately_sparse(self, m: int, n: int, l: int, sparsity: int, tail_mass: float,
                             psi_kind: str = "identity", delta: Optional[float] = None,
                             max_tries: int = 100) -> ProblemInstance:
        """
        Instance whose x* has `sparsity` dominant analysis coefficients plus a tail of
        l1 mass `tail_mass` on the remaining ones.
        """
        if tail_mass < 0:
            raise InvalidInputError(f"tail_mass must be non-negative, got {tail_mass}")
        if not 1 <= m <= n:
            raise InvalidInputError(f"need 1 <= m <= n, got m={m}, n={n}")
        phi = self.sensing_matrix(m, n)
        psi = self.analysis_operator(n, l, psi_kind)

        for _ in range(max_tries):
            head = self.cosparse_signal(psi, sparsity)
            z = psi.T @ head
            I = np.argsort(-np.abs(z), kind="stable")[:sparsity]
            J = np.setdiff1d(np.arange(l), I)
            g = self.rng.standard_normal(n)
            tail_dir = float(np.sum(np.abs(psi[:, J].T @ g)))
            if tail_dir == 0.0:
                continue
            x_star = head + (tail_mass / tail_dir) * g
            zs = np.abs(psi.T @ x_star)
            if J.size == 0 or zs[I].min() > zs[J].max():
                return ProblemInstance(
                    phi=phi, psi=psi, b=phi @ x_star, x_star=x_star, delta=delta,
                    seed=self.seed, support_size=sparsity,
                    name=f"approx-{psi_kind}-m{m}-n{n}-l{l}-s{sparsity}-seed{self.seed}",
                )
        raise InvalidInputError(
            f"Could not draw an approximately sparse signal with tail mass {tail_mass} in {max_tries} tries"
        )
