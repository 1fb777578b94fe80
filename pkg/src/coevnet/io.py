"""File formats and dataset construction.

Edge sequences are line-oriented text, one ``time<TAB>src<TAB>dst`` per
line, with optional ``#`` header lines carrying the snapshot count and the
node index so that isolated nodes and empty snapshots survive a round trip.
Model parameters, variational state, ground truth, and fit reports are JSON
with explicit dimension fields and sorted keys; floats use the shortest
round-trip decimal form, so save -> load -> save is byte-identical. Metric
tables are CSV with a header row.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .core import DynamicNetwork, ModelParams
from .elbo import VariationalState
from .em import FitReport
from .metrics import ScoreSeries


@dataclass
class EdgeEvent:
    time: int
    src: str
    dst: str

    def validate(self):
        if self.time < 0:
            raise ValueError("time must be nonnegative")
        if self.src == self.dst:
            raise ValueError("self-loops are not allowed")


@dataclass
class SponsorshipRecord:
    time: int
    bill: str
    sponsor: str
    cosponsors: list

    def validate(self):
        if self.sponsor in self.cosponsors:
            raise ValueError(f"sponsor {self.sponsor!r} listed as own cosponsor")


def _default_labels(n):
    width = max(3, len(str(max(n - 1, 0))))
    return [f"n{i:0{width}d}" for i in range(n)]


def save_edge_sequence(path, network):
    """Writes snapshots as an edge list with a header that pins the snapshot
    count and node order. Output bytes are deterministic."""
    network.validate()
    Y = network.snapshots
    S, N = Y.shape[0], Y.shape[1]
    labels = (
        list(network.node_labels)
        if network.node_labels is not None
        else _default_labels(N)
    )
    lines = [f"# snapshots={S} nodes={N}"]
    lines += [f"# node {i} {labels[i]}" for i in range(N)]
    for t in range(S):
        src, dst = np.nonzero(Y[t])
        lines += [f"{t}\t{labels[p]}\t{labels[q]}" for p, q in zip(src, dst)]
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def load_edge_sequence(path):
    """Parses an edge list into a network.

    Node indices follow the header declaration when present, otherwise first
    appearance. Malformed lines, self-loops, negative times, and timestamps
    at or past a declared snapshot count all raise with the line number.
    Duplicate edges collapse to one.
    """
    declared_snapshots = None
    declared_nodes = {}
    index = {}
    order = []

    def intern(label):
        if label not in index:
            index[label] = len(order)
            order.append(label)
        return index[label]

    events = []
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("snapshots="):
                    head = body.split()
                    declared_snapshots = int(head[0].split("=", 1)[1])
                elif body.startswith("node "):
                    _, idx, label = body.split(maxsplit=2)
                    declared_nodes[int(idx)] = label
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                fields = line.split()
            if len(fields) != 3:
                raise ValueError(f"line {lineno}: expected time, src, dst")
            try:
                t = int(fields[0])
            except ValueError:
                raise ValueError(f"line {lineno}: bad timestamp {fields[0]!r}") from None
            if t < 0:
                raise ValueError(f"line {lineno}: negative timestamp")
            if declared_snapshots is not None and t >= declared_snapshots:
                raise ValueError(
                    f"line {lineno}: timestamp {t} outside declared {declared_snapshots} snapshots"
                )
            if fields[1] == fields[2]:
                raise ValueError(f"line {lineno}: self-loop on {fields[1]!r}")
            events.append((t, fields[1], fields[2]))

    for idx in sorted(declared_nodes):
        if idx != len(order):
            raise ValueError(f"node header indices must be 0..N-1, got {idx}")
        intern(declared_nodes[idx])
    for _, src, dst in events:
        intern(src)
        intern(dst)

    if declared_snapshots is None:
        if not events:
            raise ValueError("no snapshots: file has no edges and no header")
        S = max(t for t, _, _ in events) + 1
    else:
        S = declared_snapshots
    N = len(order)
    Y = np.zeros((S, N, N), dtype=np.uint8)
    for t, src, dst in events:
        Y[t, index[src], index[dst]] = 1
    net = DynamicNetwork(snapshots=Y, node_labels=order)
    net.validate()
    return net


def _params_to_dict(params):
    return {
        "B": params.B.tolist(),
        "beta": params.beta.tolist(),
        "w": params.w.tolist(),
        "sigma_mu": params.sigma_mu.tolist(),
        "alpha0": params.alpha0.tolist(),
        "A": params.A.tolist(),
        "rho": params.rho,
    }


def _params_from_dict(d):
    return ModelParams(
        B=np.array(d["B"], dtype=float),
        beta=np.array(d["beta"], dtype=float),
        w=np.array(d["w"], dtype=float),
        sigma_mu=np.array(d["sigma_mu"], dtype=float),
        alpha0=np.array(d["alpha0"], dtype=float),
        A=np.array(d["A"], dtype=float),
        rho=float(d["rho"]),
    )


def _dump_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(obj, f, sort_keys=True, separators=(",", ":"))
        f.write("\n")


def save_ground_truth(path, truth):
    """Serializes a generated world: parameters, membership logits and
    probabilities, and role indices per directed pair (-1 on the diagonal)."""
    mu = truth.memberships.mu
    S, N, K = mu.shape
    z_send = truth.indicators.z_send.argmax(axis=3).astype(int)
    z_recv = truth.indicators.z_recv.argmax(axis=3).astype(int)
    eye = np.eye(N, dtype=bool)
    z_send[:, eye] = -1
    z_recv[:, eye] = -1
    obj = {
        "kind": "ground_truth",
        "n_steps": S,
        "n_nodes": N,
        "n_roles": K,
        "seed": truth.config.seed,
        "peakedness": truth.config.peakedness,
        "role_anchored_init": truth.config.role_anchored_init,
        "params": _params_to_dict(truth.config.params),
        "mu": mu.tolist(),
        "pi": truth.memberships.pi.tolist(),
        "z_send": z_send.tolist(),
        "z_recv": z_recv.tolist(),
    }
    _dump_json(path, obj)


def load_ground_truth(path):
    """Reads a ground-truth file back as plain arrays plus parameters."""
    with open(path, encoding="utf-8") as f:
        obj = json.load(f)
    if obj.get("kind") != "ground_truth":
        raise ValueError("not a ground-truth file")
    return {
        "mu": np.array(obj["mu"], dtype=float),
        "pi": np.array(obj["pi"], dtype=float),
        "z_send": np.array(obj["z_send"], dtype=int),
        "z_recv": np.array(obj["z_recv"], dtype=int),
        "params": _params_from_dict(obj["params"]),
        "seed": obj["seed"],
        "peakedness": obj["peakedness"],
        "n_steps": obj["n_steps"],
        "n_nodes": obj["n_nodes"],
        "n_roles": obj["n_roles"],
    }


def _state_to_dict(vs):
    return {
        "gamma": vs.gamma.tolist(),
        "sigma": vs.sigma.tolist(),
        "zeta": vs.zeta.tolist(),
        "phi_send": vs.phi_send.tolist(),
        "phi_recv": vs.phi_recv.tolist(),
    }


def _state_from_dict(d):
    return VariationalState(
        gamma=np.array(d["gamma"], dtype=float),
        sigma=np.array(d["sigma"], dtype=float),
        phi_send=np.array(d["phi_send"], dtype=float),
        phi_recv=np.array(d["phi_recv"], dtype=float),
        zeta=np.array(d["zeta"], dtype=float),
    )


def _jsonable_flags(flags):
    def conv(v):
        if isinstance(v, np.generic):
            return v.item()
        if isinstance(v, np.ndarray):
            return v.tolist()
        if isinstance(v, (list, tuple)):
            return [conv(x) for x in v]
        if isinstance(v, dict):
            return {str(k): conv(x) for k, x in v.items()}
        return v

    return {str(k): conv(v) for k, v in flags.items()}


def save_fit_report(path, report):
    S, N, K = report.trajectories.shape
    if isinstance(report.params, list):
        params = {"per_step": [_params_to_dict(p) for p in report.params]}
    else:
        params = _params_to_dict(report.params)
    obj = {
        "kind": "fit_report",
        "n_steps": S,
        "n_nodes": N,
        "n_roles": K,
        "node_labels": report.node_labels,
        "params": params,
        "variational": _state_to_dict(report.vs) if report.vs is not None else None,
        "trajectories": report.trajectories.tolist(),
        "elbo_trace": [float(v) for v in report.elbo_trace],
        "converged": bool(report.converged),
        "n_iters": int(report.n_iters),
        "chain": int(report.chain),
        "flags": _jsonable_flags(report.flags),
    }
    _dump_json(path, obj)


def load_fit_report(path):
    with open(path, encoding="utf-8") as f:
        obj = json.load(f)
    if obj.get("kind") != "fit_report":
        raise ValueError("not a fit-report file")
    if "per_step" in obj["params"]:
        params = [_params_from_dict(d) for d in obj["params"]["per_step"]]
    else:
        params = _params_from_dict(obj["params"])
    vs = _state_from_dict(obj["variational"]) if obj["variational"] else None
    return FitReport(
        params=params,
        vs=vs,
        trajectories=np.array(obj["trajectories"], dtype=float),
        elbo_trace=[float(v) for v in obj["elbo_trace"]],
        converged=obj["converged"],
        n_iters=obj["n_iters"],
        chain=obj["chain"],
        flags=obj["flags"],
        node_labels=obj["node_labels"],
    )


def save_metrics_csv(path, header, rows):
    """Writes one metric table; cells go through repr for floats so readers
    get the exact value back."""

    def cell(v):
        if isinstance(v, float):
            return repr(v)
        return str(v)

    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([cell(v) for v in row])


def load_scores_csv(path, node_labels, n_steps):
    """Reads ``node,time,score`` rows into a per-node, per-time matrix and
    min-max rescales the finite scores to [0, 1]. Unknown nodes, bad times,
    and duplicate entries raise with the line number; nodes or steps with no
    row stay missing (NaN)."""
    index = {lab: i for i, lab in enumerate(node_labels)}
    vals = np.full((n_steps, len(node_labels)), np.nan)
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 3:
                raise ValueError(f"line {lineno}: expected node,time,score")
            if lineno == 1 and parts == ["node", "time", "score"]:
                continue
            node, t_raw, s_raw = parts
            if node not in index:
                raise ValueError(f"line {lineno}: unknown node {node!r}")
            try:
                t = int(t_raw)
                s = float(s_raw)
            except ValueError:
                raise ValueError(f"line {lineno}: bad time or score") from None
            if not 0 <= t < n_steps:
                raise ValueError(f"line {lineno}: time {t} outside 0..{n_steps - 1}")
            if np.isfinite(vals[t, index[node]]):
                raise ValueError(f"line {lineno}: duplicate entry for {node!r} at {t}")
            vals[t, index[node]] = s
    finite = vals[np.isfinite(vals)]
    if finite.size == 0:
        raise ValueError("scores file has no entries")
    lo, hi = finite.min(), finite.max()
    if hi <= lo:
        raise ValueError("scores are constant and cannot be rescaled")
    series = ScoreSeries(values=(vals - lo) / (hi - lo), node_labels=list(node_labels))
    series.validate()
    return series


def load_sponsorship_records(path):
    """Reads tab-separated ``time  bill  sponsor  cosponsors`` rows, the last
    field comma-joined and possibly empty."""
    records = []
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) not in (3, 4):
                raise ValueError(
                    f"line {lineno}: expected time, bill, sponsor, cosponsors"
                )
            try:
                t = int(fields[0])
            except ValueError:
                raise ValueError(f"line {lineno}: bad time {fields[0]!r}") from None
            cos = []
            if len(fields) == 4 and fields[3].strip():
                cos = [c.strip() for c in fields[3].split(",") if c.strip()]
            rec = SponsorshipRecord(
                time=t, bill=fields[1].strip(), sponsor=fields[2].strip(), cosponsors=cos
            )
            try:
                rec.validate()
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
            records.append(rec)
    return records


def build_cosponsorship_network(records, threshold=3):
    """Cosponsorship graph per time slice: directed edge p -> q when p
    cosponsored at least ``threshold`` bills sponsored by q in that slice.

    Input times may be arbitrary integers (session numbers); sorted unique
    times map to snapshots 0..S-1. Only nodes appearing in every slice are
    kept, in sorted label order.
    """
    if threshold < 1:
        raise ValueError("threshold must be at least 1")
    if not records:
        raise ValueError("no sponsorship records")
    times = sorted({r.time for r in records})
    slice_of = {t: s for s, t in enumerate(times)}
    S = len(times)

    present = [set() for _ in range(S)]
    for r in records:
        s = slice_of[r.time]
        present[s].add(r.sponsor)
        present[s].update(r.cosponsors)
    keep = set.intersection(*present) if present else set()
    labels = sorted(keep)
    index = {lab: i for i, lab in enumerate(labels)}
    N = len(labels)

    counts = np.zeros((S, N, N), dtype=int)
    for r in records:
        s = slice_of[r.time]
        q = index.get(r.sponsor)
        if q is None:
            continue
        for c in r.cosponsors:
            p = index.get(c)
            if p is not None and p != q:
                counts[s, p, q] += 1
    Y = (counts >= threshold).astype(np.uint8)
    net = DynamicNetwork(snapshots=Y, node_labels=labels)
    net.validate()
    return net
