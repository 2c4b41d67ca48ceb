"""Problem configuration files (TOML) and the matrix bundle around them."""
from __future__ import annotations

import hashlib
import os
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .expressions import parse_scalar_function
from .mmio import load_matrix, save_matrix
from .model import ApproxSettings, NepProblem, NonlinearTerm, PolynomialPart, low_rank_factorize
from .sampling import Region


def parse_complex(text):
    """Parse 'a+bi' style text (also plain reals, '2i', '1e3-4.5e-2i')."""
    if isinstance(text, (int, float)):
        return complex(text)
    s = str(text).strip().replace(" ", "")
    try:
        return complex(s.replace("i", "j"))
    except ValueError as exc:
        raise ConfigError(f"cannot parse complex number {text!r}") from exc


def format_complex(z):
    z = complex(z)
    if z.imag == 0:
        return repr(z.real)
    sign = "+" if z.imag >= 0 else "-"
    return f"{z.real!r}{sign}{abs(z.imag)!r}i"


def _require(table, key, where):
    if key not in table:
        raise ConfigError(f"{where}: missing key {key!r}")
    return table[key]


def _region_from_table(table, where="[region]"):
    kind = _require(table, "kind", where)
    seed = int(table.get("seed", 0))
    n_int = int(table.get("samples_interior", 0))
    n_bnd = int(table.get("samples_boundary", 0))
    if kind == "points":
        pts = [parse_complex(p) for p in _require(table, "points", where)]
        return Region(kind="points", explicit_points=np.array(pts), seed=seed)
    bounds = _require(table, "bounds", where)
    if kind == "interval":
        bounds = (float(bounds[0]), float(bounds[1]))
    elif kind == "rectangle":
        bounds = (parse_complex(bounds[0]), parse_complex(bounds[1]))
    elif kind == "halfdisk":
        bounds = (float(bounds[0]), float(bounds[1]))
    else:
        raise ConfigError(f"{where}: unknown region kind {kind!r}")
    return Region(kind=kind, bounds=bounds, samples_interior=n_int,
                  samples_boundary=n_bnd, seed=seed)


def load_problem(path):
    """Build a :class:`NepProblem` from a TOML config and its matrix files."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        data = tomllib.loads(raw.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    base = path.parent
    n = int(_require(data, "n", str(path)))
    basis = data.get("basis", "monomial")
    region = _region_from_table(_require(data, "region", str(path)))
    interval = tuple(data.get("basis_interval", region.interval_bounds))

    poly_blocks = data.get("poly", [])
    if not poly_blocks:
        raise ConfigError(f"{path}: need at least one [[poly]] block")
    by_index = {}
    for blk in poly_blocks:
        idx = int(_require(blk, "index", "[[poly]]"))
        a = load_matrix(base / blk["A"]) if "A" in blk else np.zeros((n, n))
        b = load_matrix(base / blk["B"]) if "B" in blk else np.zeros((n, n))
        if a.shape != (n, n) or b.shape != (n, n):
            raise ConfigError(f"{path}: poly block {idx} matrices are not {n} x {n}")
        by_index[idx] = (a, b)
    k = max(by_index) + 1
    coeff_a = [by_index.get(i, (np.zeros((n, n)),) * 2)[0] for i in range(k)]
    coeff_b = [by_index.get(i, (np.zeros((n, n)),) * 2)[1] for i in range(k)]
    poly = PolynomialPart(coeff_a, coeff_b, basis=basis, interval=interval)

    terms = []
    for i, blk in enumerate(data.get("term", [])):
        c = load_matrix(base / blk["C"]) if "C" in blk else np.zeros((n, n))
        d = load_matrix(base / blk["D"]) if "D" in blk else np.zeros((n, n))
        if c.shape != (n, n) or d.shape != (n, n):
            raise ConfigError(f"{path}: term {i} matrices are not {n} x {n}")
        g_text = _require(blk, "g", f"[[term]] {i}")
        g = parse_scalar_function(g_text, params=blk.get("params", {}))
        missing = g.free_parameters()
        if missing:
            raise ConfigError(f"{path}: term {i} leaves parameters {sorted(missing)} unbound")
        term = NonlinearTerm(C=c, D=d, g=g)
        if blk.get("lowrank"):
            term = low_rank_factorize(term)
        terms.append(term)

    settings = ApproxSettings()
    if "approx" in data:
        ap = data["approx"]
        settings = ApproxSettings(
            mode=ap.get("mode", "set-valued"),
            tol=float(ap.get("tol", 1e-13)),
            max_degree=int(ap.get("max_degree", 100)),
            groups=[list(map(int, g)) for g in ap["groups"]] if "groups" in ap else None,
        )

    name = data.get("name", path.stem)
    return NepProblem(poly=poly, terms=terms, region=region, name=name,
                      approx=settings)


def _region_to_lines(region):
    lines = ["[region]", f'kind = "{region.kind}"']
    if region.kind == "points":
        pts = ", ".join(f'"{format_complex(p)}"' for p in region.explicit_points)
        lines.append(f"points = [{pts}]")
    elif region.kind == "rectangle":
        lines.append(
            f'bounds = ["{format_complex(region.bounds[0])}", '
            f'"{format_complex(region.bounds[1])}"]')
    else:
        lines.append(f"bounds = [{region.bounds[0]!r}, {region.bounds[1]!r}]")
    lines.append(f"samples_interior = {region.samples_interior}")
    lines.append(f"samples_boundary = {region.samples_boundary}")
    lines.append(f"seed = {region.seed}")
    return lines


def save_problem(problem, directory, name=None):
    """Write a problem as a config file plus Matrix Market bundle.

    Returns the config path.  The bundle round-trips through
    :func:`load_problem`: matrices are written exactly and scalar functions as
    expression text with their parameter tables.
    """
    directory = Path(directory)
    os.makedirs(directory, exist_ok=True)
    name = name or problem.name or "problem"
    lines = [f'name = "{name}"', f"n = {problem.n}", f'basis = "{problem.poly.basis}"']
    if problem.poly.basis == "chebyshev":
        a, b = problem.poly.interval
        lines.append(f"basis_interval = [{a!r}, {b!r}]")
    lines.append("")
    lines.extend(_region_to_lines(problem.region))
    for i in range(problem.poly.k):
        lines.append("")
        lines.append("[[poly]]")
        lines.append(f"index = {i}")
        for tag, mat in (("A", problem.poly.coefficients_a[i]),
                         ("B", problem.poly.coefficients_b[i])):
            if np.any(mat):
                fname = f"{name}_{tag}{i}.mtx"
                save_matrix(directory / fname, mat)
                lines.append(f'{tag} = "{fname}"')
    for i, term in enumerate(problem.terms):
        lines.append("")
        lines.append("[[term]]")
        for tag, mat in (("C", term.C), ("D", term.D)):
            if np.any(mat):
                fname = f"{name}_{tag}{i}.mtx"
                save_matrix(directory / fname, mat)
                lines.append(f'{tag} = "{fname}"')
        lines.append(f'g = "{term.g.format()}"')
        if term.has_factors:
            lines.append("lowrank = true")
        if term.g.params:
            lines.append("")
            lines.append("[term.params]")
            for key in sorted(term.g.params):
                lines.append(f"{key} = {term.g.params[key]!r}")
    ap = problem.approx
    lines.append("")
    lines.append("[approx]")
    lines.append(f'mode = "{ap.mode}"')
    lines.append(f"tol = {ap.tol!r}")
    lines.append(f"max_degree = {ap.max_degree}")
    if ap.groups:
        lines.append(f"groups = {[list(g) for g in ap.groups]}")
    config_path = directory / f"{name}.toml"
    config_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return config_path


def config_digest(path):
    """Stable hash of a config file, for run reports."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]
