"""Per-user reports, the server-side report collection, and support sets.

A report's support set S(y) is the set of items it counts toward during
aggregation: the reported value for GRR, the set bits for OUE, the hash
preimage of the reported value for OLH, and the +1 positions of the
public vector for HST.

ReportSet stores reports columnwise (numpy arrays) and deliberately
carries no genuine/fake provenance; that lives with the attack outcome
and is only visible to evaluation code.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .hashing import hst_sign_row, support_matrix, support_row
from .params import Protocol, ProtocolParams, derive_params

__all__ = ["Report", "ReportSet", "support_set", "concat_report_sets",
           "write_reports", "read_reports"]


@dataclass(frozen=True)
class Report:
    """One user's perturbed record. Fields depend on the protocol family.

    GRR: value (item id in [1, d]).
    OUE: bits (bool vector of length d; position i-1 is item i).
    OLH: hash_id (64-bit seed) and hashed_value in [1, g].
    HST: signed_value (+/- hst_coeff) and either vector_seed or an explicit
         +/-1 vector of length d (attacker-crafted vectors).
    """

    protocol: Protocol
    value: int | None = None
    bits: np.ndarray | None = None
    hash_id: int | None = None
    hashed_value: int | None = None
    signed_value: float | None = None
    vector_seed: int | None = None
    vector: np.ndarray | None = None


def support_set(report: Report, params: ProtocolParams) -> set[int]:
    """Items (1-based ids) supported by a single report."""
    if report.protocol.family != params.protocol.family:
        raise ValueError(
            f"report variant {report.protocol} does not match params {params.protocol}"
        )
    fam = report.protocol.family
    if fam == "GRR":
        return {int(report.value)}
    if fam == "OUE":
        bits = np.asarray(report.bits, dtype=bool)
        if bits.shape[0] != params.d:
            raise ValueError(f"OUE bit vector has length {bits.shape[0]}, expected {params.d}")
        return set((np.flatnonzero(bits) + 1).tolist())
    if fam == "OLH":
        row = support_row(report.hash_id, report.hashed_value - 1, params.d, params.g)
        return set((np.flatnonzero(row) + 1).tolist())
    # HST: items where the public vector is +1
    if report.vector is not None:
        vec = np.asarray(report.vector)
        if vec.shape[0] != params.d:
            raise ValueError(f"HST vector has length {vec.shape[0]}, expected {params.d}")
        return set((np.flatnonzero(vec > 0) + 1).tolist())
    vec = hst_sign_row(report.vector_seed, params.d)
    return set((np.flatnonzero(vec > 0) + 1).tolist())


@dataclass
class ReportSet:
    """Columnar collection of n reports for one protocol.

    Exactly one of the per-family field groups is populated:
      GRR  -> values (int32, 1-based)
      OUE  -> bits (n x d bool)
      OLH  -> hash_ids (uint64), hashed_values (int16, 1-based)
      HST  -> signed_values (float64), vector_seeds (uint64) plus optional
              explicit vectors for a subset of users (explicit_rows holds
              user positions, explicit_vectors the matching +/-1 rows).
    """

    params: ProtocolParams
    values: np.ndarray | None = None
    bits: np.ndarray | None = None
    hash_ids: np.ndarray | None = None
    hashed_values: np.ndarray | None = None
    signed_values: np.ndarray | None = None
    vector_seeds: np.ndarray | None = None
    explicit_rows: np.ndarray | None = None
    explicit_vectors: np.ndarray | None = None
    master_seed: int = 0

    @property
    def n(self) -> int:
        fam = self.params.protocol.family
        if fam == "GRR":
            return len(self.values)
        if fam == "OUE":
            return self.bits.shape[0]
        if fam == "OLH":
            return len(self.hash_ids)
        return len(self.signed_values)

    def report(self, i: int) -> Report:
        """Materialize user i's report as a Report value."""
        proto = self.params.protocol
        fam = proto.family
        if fam == "GRR":
            return Report(proto, value=int(self.values[i]))
        if fam == "OUE":
            return Report(proto, bits=self.bits[i].copy())
        if fam == "OLH":
            return Report(
                proto, hash_id=int(self.hash_ids[i]), hashed_value=int(self.hashed_values[i])
            )
        vec = None
        if self.explicit_rows is not None:
            pos = np.searchsorted(self.explicit_rows, i)
            if pos < len(self.explicit_rows) and self.explicit_rows[pos] == i:
                vec = self.explicit_vectors[pos].copy()
        return Report(
            proto,
            signed_value=float(self.signed_values[i]),
            vector_seed=int(self.vector_seeds[i]) if vec is None else None,
            vector=vec,
        )

    def hst_signs(self, chunk: int = 4096) -> np.ndarray:
        """n x d matrix of public +/-1 vectors (HST only)."""
        from .hashing import hst_sign_matrix

        signs = hst_sign_matrix(self.vector_seeds, self.params.d, chunk)
        if self.explicit_rows is not None and len(self.explicit_rows):
            signs[self.explicit_rows] = self.explicit_vectors
        return signs

    def support_bool_matrix(self, chunk: int = 4096) -> np.ndarray:
        """n x d boolean support matrix (unsupported for GRR)."""
        fam = self.params.protocol.family
        if fam == "GRR":
            raise ValueError("support matrix is not defined for GRR (singleton supports)")
        if fam == "OUE":
            return self.bits
        if fam == "OLH":
            return support_matrix(
                self.hash_ids,
                np.asarray(self.hashed_values, dtype=np.int64) - 1,
                self.params.d,
                self.params.g,
                chunk,
            )
        return self.hst_signs(chunk) > 0

    def subset(self, keep: np.ndarray) -> "ReportSet":
        """New ReportSet restricted to the users selected by ``keep``."""
        keep = np.asarray(keep)
        if keep.dtype == bool:
            keep = np.flatnonzero(keep)
        fam = self.params.protocol.family
        kw = dict(params=self.params, master_seed=self.master_seed)
        if fam == "GRR":
            kw["values"] = self.values[keep]
        elif fam == "OUE":
            kw["bits"] = self.bits[keep]
        elif fam == "OLH":
            kw["hash_ids"] = self.hash_ids[keep]
            kw["hashed_values"] = self.hashed_values[keep]
        else:
            kw["signed_values"] = self.signed_values[keep]
            kw["vector_seeds"] = self.vector_seeds[keep]
            if self.explicit_rows is not None and len(self.explicit_rows):
                pos = {int(u): j for j, u in enumerate(self.explicit_rows)}
                rows, vecs = [], []
                for new_i, old_i in enumerate(keep.tolist()):
                    if old_i in pos:
                        rows.append(new_i)
                        vecs.append(self.explicit_vectors[pos[old_i]])
                if rows:
                    kw["explicit_rows"] = np.asarray(rows, dtype=np.int64)
                    kw["explicit_vectors"] = np.asarray(vecs, dtype=np.int8)
        return ReportSet(**kw)


def concat_report_sets(parts: list[ReportSet]) -> ReportSet:
    """Concatenate report collections for the same protocol, in user order."""
    parts = [p for p in parts if p.n > 0]
    if not parts:
        raise ValueError("nothing to concatenate")
    if len(parts) == 1:
        return parts[0]
    first = parts[0]
    fam = first.params.protocol.family
    for p in parts[1:]:
        if p.params.protocol != first.params.protocol or p.params.d != first.params.d:
            raise ValueError("report sets must share protocol and domain")
    out = ReportSet(params=first.params, master_seed=first.master_seed)
    if fam == "GRR":
        out.values = np.concatenate([p.values for p in parts])
    elif fam == "OUE":
        out.bits = np.concatenate([p.bits for p in parts], axis=0)
    elif fam == "OLH":
        out.hash_ids = np.concatenate([p.hash_ids for p in parts])
        out.hashed_values = np.concatenate([p.hashed_values for p in parts])
    else:
        out.signed_values = np.concatenate([p.signed_values for p in parts])
        out.vector_seeds = np.concatenate([p.vector_seeds for p in parts])
        rows, vecs = [], []
        offset = 0
        for p in parts:
            if p.explicit_rows is not None and len(p.explicit_rows):
                rows.append(p.explicit_rows + offset)
                vecs.append(p.explicit_vectors)
            offset += p.n
        if rows:
            out.explicit_rows = np.concatenate(rows)
            out.explicit_vectors = np.concatenate(vecs, axis=0)
    return out


def _runs_encode(positions: np.ndarray) -> str:
    """Encode sorted 1-based positions as 'start:len' runs."""
    if len(positions) == 0:
        return ""
    pos = np.asarray(positions, dtype=np.int64)
    breaks = np.flatnonzero(np.diff(pos) != 1)
    starts = np.concatenate(([0], breaks + 1))
    ends = np.concatenate((breaks, [len(pos) - 1]))
    return " ".join(f"{pos[s]}:{pos[e] - pos[s] + 1}" for s, e in zip(starts, ends))


def _runs_decode(text: str) -> np.ndarray:
    out: list[int] = []
    for tok in text.split():
        start_s, len_s = tok.split(":")
        start, length = int(start_s), int(len_s)
        out.extend(range(start, start + length))
    return np.asarray(out, dtype=np.int64)


def write_reports(reports: ReportSet, path: str) -> None:
    """Write the newline-delimited report file.

    Header carries protocol, epsilon, d, n and master_seed; each row is
    ``user_id,protocol,payload...`` with bit vectors as run lists.
    """
    p = reports.params
    fam = p.protocol.family
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(
            f"#ldp v=1 protocol={p.protocol.value} epsilon={p.epsilon!r} "
            f"d={p.d} n={reports.n} master_seed={reports.master_seed}\n"
        )
        proto = p.protocol.value
        if fam == "GRR":
            for i, v in enumerate(reports.values):
                fh.write(f"{i},{proto},{int(v)}\n")
        elif fam == "OUE":
            for i in range(reports.n):
                runs = _runs_encode(np.flatnonzero(reports.bits[i]) + 1)
                fh.write(f"{i},{proto},{runs}\n")
        elif fam == "OLH":
            for i in range(reports.n):
                fh.write(
                    f"{i},{proto},{int(reports.hash_ids[i])},{int(reports.hashed_values[i])}\n"
                )
        else:
            explicit = {}
            if reports.explicit_rows is not None:
                explicit = {
                    int(u): reports.explicit_vectors[j]
                    for j, u in enumerate(reports.explicit_rows)
                }
            for i in range(reports.n):
                sign = "+" if reports.signed_values[i] > 0 else "-"
                if i in explicit:
                    runs = _runs_encode(np.flatnonzero(explicit[i] > 0) + 1)
                    fh.write(f"{i},{proto},{sign},*,{runs}\n")
                else:
                    fh.write(f"{i},{proto},{sign},{int(reports.vector_seeds[i])}\n")


def read_reports(path: str) -> ReportSet:
    """Load a report file written by write_reports."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("#ldp"):
            raise ValueError(f"{path}: missing #ldp header")
        meta = dict(tok.split("=", 1) for tok in header.split()[1:])
        proto = Protocol.parse(meta["protocol"])
        params = derive_params(proto, float(meta["epsilon"]), int(meta["d"]), int(meta["n"]))
        master_seed = int(meta.get("master_seed", 0))
        n, d = params.n, params.d
        fam = proto.family
        rs = ReportSet(params=params, master_seed=master_seed)
        if fam == "GRR":
            rs.values = np.empty(n, dtype=np.int32)
        elif fam == "OUE":
            rs.bits = np.zeros((n, d), dtype=bool)
        elif fam == "OLH":
            rs.hash_ids = np.empty(n, dtype=np.uint64)
            rs.hashed_values = np.empty(n, dtype=np.int16)
        else:
            rs.signed_values = np.empty(n, dtype=np.float64)
            rs.vector_seeds = np.zeros(n, dtype=np.uint64)
        explicit_rows: list[int] = []
        explicit_vecs: list[np.ndarray] = []
        coeff = params.hst_coeff
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(",", 2)
            i = int(parts[0])
            payload = parts[2] if len(parts) > 2 else ""
            if fam == "GRR":
                rs.values[i] = int(payload)
            elif fam == "OUE":
                if payload:
                    rs.bits[i, _runs_decode(payload) - 1] = True
            elif fam == "OLH":
                hid, hv = payload.split(",")
                rs.hash_ids[i] = np.uint64(int(hid))
                rs.hashed_values[i] = int(hv)
            else:
                fields = payload.split(",")
                sign = 1.0 if fields[0] == "+" else -1.0
                rs.signed_values[i] = sign * coeff
                if fields[1] == "*":
                    vec = np.full(d, -1, dtype=np.int8)
                    runs = fields[2] if len(fields) > 2 else ""
                    if runs:
                        vec[_runs_decode(runs) - 1] = 1
                    explicit_rows.append(i)
                    explicit_vecs.append(vec)
                else:
                    rs.vector_seeds[i] = np.uint64(int(fields[1]))
        if explicit_rows:
            order = np.argsort(explicit_rows)
            rs.explicit_rows = np.asarray(explicit_rows, dtype=np.int64)[order]
            rs.explicit_vectors = np.asarray(explicit_vecs, dtype=np.int8)[order]
        return rs
