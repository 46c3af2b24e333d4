"""Domain types, validation, and file ingestion for networks, covariates, and outcomes.

File formats
------------
* edge list: CSV with two columns ``src,dst``; header optional (see
  :class:`IngestOptions`). Edges are symmetrized on load.
* covariates: CSV, first column ``id``, remaining columns numeric features,
  header row required.
* outcomes: CSV with columns ``id,adopted`` and an optional ``aware`` column.
  A missing ``aware`` column defaults awareness to all-ones (mature product).
* serialized dataset: a single versioned JSON document (schema
  ``sbim.dataset/1``, keys sorted alphabetically) that round-trips exactly.
"""

import csv
import os
from dataclasses import dataclass, field, replace

import numpy as np

from ._ioutil import dump_json, fnum, load_json, read_matrix_csv, write_matrix_csv

DATASET_SCHEMA = "sbim.dataset/1"
STATE_SCHEMA = "sbim.state/1"


class IngestionError(Exception):
    """Raised when an input file cannot be parsed; carries file/line context."""

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}"
            if line is not None:
                loc += f":{line}"
            loc = f" [{loc}]"
        super().__init__(message + loc)
        self.path = path
        self.line = line


@dataclass(frozen=True)
class IngestOptions:
    """Knobs for :func:`load_dataset`.

    missing: "reject" fails on empty covariate cells, "constant" fills them
    with ``fill_value``.
    """

    edge_header: bool = False
    missing: str = "reject"
    fill_value: float = 0.0

    def __post_init__(self):
        if self.missing not in ("reject", "constant"):
            raise ValueError(f"unknown missing-data policy {self.missing!r}")


@dataclass(frozen=True)
class Standardization:
    """Per-column affine parameters so standardized covariates can be undone."""

    mean: np.ndarray
    scale: np.ndarray


def _freeze(arr):
    arr = np.asarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Dataset:
    """Immutable bundle of one village: network, covariates, and outcomes.

    adjacency is symmetric 0/1 with zero diagonal; adoption and awareness are
    0/1 vectors. Safe to share across threads once constructed.
    """

    adjacency: np.ndarray
    covariates: np.ndarray
    adoption: np.ndarray
    awareness: np.ndarray
    covariate_names: tuple = ()
    node_ids: tuple = ()
    standardization: Standardization | None = None

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=np.int64)
        cov = np.asarray(self.covariates, dtype=np.float64)
        ado = np.asarray(self.adoption, dtype=np.int64)
        awa = np.asarray(self.awareness, dtype=np.int64)
        n = adj.shape[0]
        if adj.ndim != 2 or adj.shape != (n, n):
            raise ValueError("adjacency must be square")
        if not np.array_equal(adj, adj.T):
            raise ValueError("adjacency must be symmetric")
        if np.any(np.diag(adj) != 0):
            raise ValueError("adjacency must have a zero diagonal")
        for name, vec in (("adjacency", adj), ("adoption", ado), ("awareness", awa)):
            bad = ~np.isin(vec, (0, 1))
            if bad.any():
                raise ValueError(f"{name} entries must all be 0 or 1")
        if cov.ndim != 2 or cov.shape[0] != n:
            raise ValueError("covariates must be an N x D matrix")
        if not np.all(np.isfinite(cov)):
            raise ValueError("covariates contain non-finite values")
        if ado.shape != (n,) or awa.shape != (n,):
            raise ValueError("adoption/awareness must be length-N vectors")
        names = tuple(self.covariate_names) or tuple(f"x{d}" for d in range(cov.shape[1]))
        ids = tuple(str(i) for i in self.node_ids) or tuple(str(i) for i in range(n))
        if len(names) != cov.shape[1]:
            raise ValueError("covariate_names length must match covariate columns")
        if len(ids) != n:
            raise ValueError("node_ids length must match N")
        if len(set(ids)) != n:
            raise ValueError("node_ids must be unique")
        object.__setattr__(self, "adjacency", _freeze(adj))
        object.__setattr__(self, "covariates", _freeze(cov))
        object.__setattr__(self, "adoption", _freeze(ado))
        object.__setattr__(self, "awareness", _freeze(awa))
        object.__setattr__(self, "covariate_names", names)
        object.__setattr__(self, "node_ids", ids)

    @property
    def n(self):
        return self.adjacency.shape[0]

    @property
    def n_covariates(self):
        return self.covariates.shape[1]


@dataclass(frozen=True)
class LatentState:
    """Hidden variables in natural space: memberships M, connectivity B,
    influence F, and covariate coefficients."""

    membership: np.ndarray
    connectivity: np.ndarray
    influence: np.ndarray
    coefficients: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.membership, dtype=np.float64)
        b = np.asarray(self.connectivity, dtype=np.float64)
        f = np.asarray(self.influence, dtype=np.float64)
        beta = np.asarray(self.coefficients, dtype=np.float64)
        if m.ndim != 2:
            raise ValueError("membership must be N x C")
        c = m.shape[1]
        if np.any(m < 0) or np.any(np.abs(m.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("membership rows must be on the simplex (1e-9)")
        if b.shape != (c, c) or np.any(b <= 0.0) or np.any(b >= 1.0):
            raise ValueError("connectivity must be C x C with entries strictly in (0,1)")
        if f.shape != (c, c) or not np.all(np.isfinite(f)):
            raise ValueError("influence must be a finite C x C matrix")
        if beta.ndim != 1 or not np.all(np.isfinite(beta)):
            raise ValueError("coefficients must be a finite vector")
        object.__setattr__(self, "membership", _freeze(m))
        object.__setattr__(self, "connectivity", _freeze(b))
        object.__setattr__(self, "influence", _freeze(f))
        object.__setattr__(self, "coefficients", _freeze(beta))

    @property
    def n_blocks(self):
        return self.membership.shape[1]


@dataclass(frozen=True)
class Hyperparameters:
    """Prior settings: Dirichlet concentration, Beta shape pair, and the two
    Gaussian (mean, sd) pairs for influence entries and coefficients."""

    dirichlet_c: float = 1.0
    beta_a: float = 2.0
    beta_b: float = 2.0
    influence_mean: float = 0.0
    influence_sd: float = 1.0
    coeff_mean: float = 0.0
    coeff_sd: float = 1.0

    def __post_init__(self):
        if self.dirichlet_c <= 0:
            raise ValueError("dirichlet_c must be positive")
        if self.beta_a <= 0 or self.beta_b <= 0:
            raise ValueError("beta_a and beta_b must be positive")
        if self.influence_sd <= 0 or self.coeff_sd <= 0:
            raise ValueError("standard deviations must be strictly positive")


@dataclass(frozen=True)
class BlockStats:
    """Hard-assignment block sizes and their proportions."""

    sizes: np.ndarray
    proportions: np.ndarray

    def __post_init__(self):
        sizes = np.asarray(self.sizes, dtype=np.int64)
        props = np.asarray(self.proportions, dtype=np.float64)
        if abs(props.sum() - 1.0) > 1e-9:
            raise ValueError("proportions must sum to 1 within 1e-9")
        if not np.allclose(props, sizes / sizes.sum(), atol=1e-12):
            raise ValueError("proportions must equal sizes / N")
        object.__setattr__(self, "sizes", _freeze(sizes))
        object.__setattr__(self, "proportions", _freeze(props))


def symmetrize(adjacency):
    """Undirected closure: (i,j) implies (j,i); diagonal forced to zero."""
    adj = np.asarray(adjacency, dtype=np.int64)
    out = np.maximum(adj, adj.T)
    np.fill_diagonal(out, 0)
    return out


def hard_assignments(membership):
    """Row-wise argmax block index; ties resolve to the lowest index."""
    m = np.asarray(membership, dtype=float)
    if np.any(m < 0) or np.any(np.abs(m.sum(axis=1) - 1.0) > 1e-9):
        raise ValueError("membership must be row-stochastic")
    return np.argmax(m, axis=1)


def standardize_covariates(dataset):
    """Columns to mean 0 / sample sd 1; constant columns map to all-zeros.

    The affine parameters are recorded on the returned dataset so the
    transform can be undone; applying the op twice is a no-op.
    """
    if dataset.n < 2:
        raise ValueError("standardization needs at least two rows")
    x = dataset.covariates
    mean = x.mean(axis=0)
    sd = x.std(axis=0, ddof=1)
    scale = np.where(sd > 0, sd, 1.0)
    return replace(dataset, covariates=(x - mean) / scale,
                   standardization=Standardization(mean=mean, scale=scale))


def _sorted_ids(ids):
    # Numeric ids sort numerically, anything else lexicographically.
    try:
        return sorted(ids, key=int)
    except ValueError:
        return sorted(ids)


def _read_rows(path):
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            return list(csv.reader(fh))
    except OSError as exc:
        raise IngestionError(f"cannot read file: {exc}", path=path) from exc


def load_dataset(edge_file, covariate_file, outcome_file, options=None):
    """Build a validated :class:`Dataset` from the three CSV inputs.

    Node order is fixed by sorted external id; edges are symmetrized; a
    missing awareness column defaults to everyone-aware.
    """
    options = options or IngestOptions()

    cov_rows = _read_rows(covariate_file)
    if not cov_rows:
        raise IngestionError("empty covariate file", path=covariate_file)
    header = cov_rows[0]
    if not header or header[0].strip().lower() != "id":
        raise IngestionError("covariate header must start with 'id'", path=covariate_file, line=1)
    covariate_names = tuple(h.strip() for h in header[1:])
    raw_cov = {}
    for lineno, row in enumerate(cov_rows[1:], start=2):
        if not row:
            continue
        node = row[0].strip()
        if node in raw_cov:
            raise IngestionError(f"duplicate node id {node!r}", path=covariate_file, line=lineno)
        if len(row) != len(header):
            raise IngestionError(f"expected {len(header)} columns, got {len(row)}",
                                 path=covariate_file, line=lineno)
        values = []
        for col, cell in zip(covariate_names, row[1:]):
            cell = cell.strip()
            if cell == "":
                if options.missing == "constant":
                    values.append(options.fill_value)
                    continue
                raise IngestionError(f"missing value in column {col!r}",
                                     path=covariate_file, line=lineno)
            try:
                values.append(float(cell))
            except ValueError:
                raise IngestionError(f"non-numeric value {cell!r} in column {col!r}",
                                     path=covariate_file, line=lineno) from None
        raw_cov[node] = values

    if not raw_cov:
        raise IngestionError("covariate file has no data rows", path=covariate_file)
    node_ids = tuple(_sorted_ids(raw_cov))
    index = {node: i for i, node in enumerate(node_ids)}
    n = len(node_ids)

    out_rows = _read_rows(outcome_file)
    if not out_rows:
        raise IngestionError("empty outcome file", path=outcome_file)
    out_header = [h.strip().lower() for h in out_rows[0]]
    if out_header[:2] != ["id", "adopted"]:
        raise IngestionError("outcome header must be id,adopted[,aware]", path=outcome_file, line=1)
    has_aware = len(out_header) > 2 and out_header[2] == "aware"
    adoption = np.full(n, -1, dtype=np.int64)
    awareness = np.ones(n, dtype=np.int64)

    def _binary(cell, what, lineno):
        cell = cell.strip()
        if cell not in ("0", "1"):
            raise IngestionError(f"non-binary {what} value {cell!r}", path=outcome_file, line=lineno)
        return int(cell)

    for lineno, row in enumerate(out_rows[1:], start=2):
        if not row:
            continue
        node = row[0].strip()
        if node not in index:
            raise IngestionError(f"outcome references unknown id {node!r}",
                                 path=outcome_file, line=lineno)
        i = index[node]
        if adoption[i] >= 0:
            raise IngestionError(f"duplicate outcome for id {node!r}", path=outcome_file, line=lineno)
        adoption[i] = _binary(row[1], "adoption", lineno)
        if has_aware:
            if len(row) < 3:
                raise IngestionError("missing aware value", path=outcome_file, line=lineno)
            awareness[i] = _binary(row[2], "awareness", lineno)
    missing = [node_ids[i] for i in np.nonzero(adoption < 0)[0]]
    if missing:
        raise IngestionError(f"no outcome row for ids {missing[:5]}", path=outcome_file)

    adjacency = np.zeros((n, n), dtype=np.int64)
    edge_rows = _read_rows(edge_file)
    start = 1 if options.edge_header else 0
    for lineno, row in enumerate(edge_rows[start:], start=start + 1):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) < 2:
            raise IngestionError("edge rows need two columns src,dst", path=edge_file, line=lineno)
        src, dst = row[0].strip(), row[1].strip()
        for node in (src, dst):
            if node not in index:
                raise IngestionError(f"edge references unknown id {node!r}", path=edge_file, line=lineno)
        if src == dst:
            raise IngestionError(f"self-edge on id {src!r}", path=edge_file, line=lineno)
        adjacency[index[src], index[dst]] = 1
    adjacency = symmetrize(adjacency)

    return Dataset(adjacency=adjacency, covariates=np.array([raw_cov[i] for i in node_ids]),
                   adoption=adoption, awareness=awareness,
                   covariate_names=covariate_names, node_ids=node_ids)


def save_dataset(dataset, path):
    """Serialize to the single-file JSON schema (exact round trip)."""
    iu = np.triu_indices(dataset.n, k=1)
    edges = [[int(i), int(j)] for i, j in zip(*iu) if dataset.adjacency[i, j]]
    doc = {
        "schema": DATASET_SCHEMA,
        "node_ids": list(dataset.node_ids),
        "covariate_names": list(dataset.covariate_names),
        "covariates": [[float(v) for v in row] for row in dataset.covariates],
        "adoption": [int(v) for v in dataset.adoption],
        "awareness": [int(v) for v in dataset.awareness],
        "edges": edges,
        "standardization": None if dataset.standardization is None else {
            "mean": [float(v) for v in dataset.standardization.mean],
            "scale": [float(v) for v in dataset.standardization.scale],
        },
    }
    dump_json(doc, path)


def load_saved_dataset(path):
    doc = load_json(path)
    if doc.get("schema") != DATASET_SCHEMA:
        raise IngestionError(f"unexpected dataset schema {doc.get('schema')!r}", path=path)
    n = len(doc["node_ids"])
    adjacency = np.zeros((n, n), dtype=np.int64)
    for i, j in doc["edges"]:
        adjacency[i, j] = 1
        adjacency[j, i] = 1
    std = doc.get("standardization")
    d = len(doc["covariate_names"])
    return Dataset(
        adjacency=adjacency,
        covariates=np.asarray(doc["covariates"], dtype=float).reshape(n, d),
        adoption=np.asarray(doc["adoption"], dtype=np.int64),
        awareness=np.asarray(doc["awareness"], dtype=np.int64),
        covariate_names=tuple(doc["covariate_names"]),
        node_ids=tuple(doc["node_ids"]),
        standardization=None if std is None else Standardization(
            mean=np.asarray(std["mean"], dtype=float),
            scale=np.asarray(std["scale"], dtype=float)),
    )


STATE_FILES = {
    "membership": "membership.csv",
    "connectivity": "connectivity.csv",
    "influence": "influence.csv",
    "coefficients": "coefficients.csv",
}


def save_state(state, dirpath):
    """One CSV per component plus a manifest (stable names, see STATE_FILES)."""
    os.makedirs(dirpath, exist_ok=True)
    write_matrix_csv(os.path.join(dirpath, STATE_FILES["membership"]), state.membership)
    write_matrix_csv(os.path.join(dirpath, STATE_FILES["connectivity"]), state.connectivity)
    write_matrix_csv(os.path.join(dirpath, STATE_FILES["influence"]), state.influence)
    write_matrix_csv(os.path.join(dirpath, STATE_FILES["coefficients"]),
                     state.coefficients.reshape(1, -1) if state.coefficients.size else np.zeros((0, 0)))
    dump_json({"schema": STATE_SCHEMA, "n": int(state.membership.shape[0]),
               "n_blocks": int(state.n_blocks), "d": int(state.coefficients.size),
               "files": STATE_FILES}, os.path.join(dirpath, "state.json"))


def load_state(dirpath):
    meta = load_json(os.path.join(dirpath, "state.json"))
    if meta.get("schema") != STATE_SCHEMA:
        raise IngestionError(f"unexpected state schema {meta.get('schema')!r}", path=dirpath)
    coeff_path = os.path.join(dirpath, meta["files"]["coefficients"])
    coeffs = read_matrix_csv(coeff_path)
    return LatentState(
        membership=read_matrix_csv(os.path.join(dirpath, meta["files"]["membership"])),
        connectivity=read_matrix_csv(os.path.join(dirpath, meta["files"]["connectivity"])),
        influence=read_matrix_csv(os.path.join(dirpath, meta["files"]["influence"])),
        coefficients=coeffs.ravel() if coeffs.size else np.zeros(0),
    )


def write_edges_csv(dataset, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("src,dst\n")
        iu = np.triu_indices(dataset.n, k=1)
        for i, j in zip(*iu):
            if dataset.adjacency[i, j]:
                fh.write(f"{dataset.node_ids[i]},{dataset.node_ids[j]}\n")


def write_covariates_csv(dataset, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("id," + ",".join(dataset.covariate_names) + "\n")
        for i in range(dataset.n):
            cells = ",".join(fnum(v) for v in dataset.covariates[i])
            fh.write(f"{dataset.node_ids[i]}," + cells + "\n")


def write_outcomes_csv(dataset, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("id,adopted,aware\n")
        for i in range(dataset.n):
            fh.write(f"{dataset.node_ids[i]},{int(dataset.adoption[i])},{int(dataset.awareness[i])}\n")
