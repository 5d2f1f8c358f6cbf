"""Detector model container, JSON persistence and parameter accounting."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import gbdt
from .blocks import AttentionConfig
from .channelsel import ChannelBank, ChannelKey, ChannelRecord
from .ensemble import EnsembleConfig
from .errors import FormatError, IntegrityError, InvariantViolation, UnsupportedVersion
from .saab import UNIT_SIDES, FilterShape, SaabUnit

MAGIC = "A-PIXELHOP"
VERSION = 1
ORTHO_TOL = 1e-6


@dataclass
class DetectorModel:
    attention: AttentionConfig
    boost: gbdt.BoostConfig
    ensemble: EnsembleConfig
    n_sel_per_unit: int
    seed: int
    target_side: int | None
    units: dict[int, SaabUnit]
    bank: ChannelBank
    meta: gbdt.GbdtModel | None = None
    provenance: dict = field(default_factory=dict)

    @property
    def feature_length(self) -> int:
        return len(self.bank) * 2 * self.ensemble.tail


# ---------------------------------------------------------------- serialisation

def _config_dict(m: DetectorModel) -> dict:
    return {
        "attention": asdict(m.attention),
        "boost": asdict(m.boost),
        "ensemble": {"p": m.ensemble.p, "tail": m.ensemble.tail, "meta": asdict(m.ensemble.meta)},
        "n_sel_per_unit": m.n_sel_per_unit,
        "seed": m.seed,
        "target_side": m.target_side,
    }


def to_document(model: DetectorModel, kernels: str = "selected") -> dict:
    """JSON-ready document. ``kernels='selected'`` keeps only the bank's kernels."""
    if kernels not in ("selected", "full"):
        raise ValueError("kernels must be 'selected' or 'full'")
    units = []
    for s in sorted(model.units):
        u = model.units[s]
        if kernels == "selected":
            u = u.subset(model.bank.channels_of(s))
        units.append({
            "s": u.shape.s,
            "c": u.shape.c,
            "channels": u.channels.tolist(),
            "kernels": u.kernels.tolist(),
            "eigenvalues": np.asarray(u.eigenvalues, dtype=np.float64).tolist(),
        })
    bank = {
        "n_sel_per_unit": model.bank.n_sel_per_unit,
        "channels": [{
            "unit": r.key.unit,
            "channel": r.key.k,
            "train_auc": r.train_auc,
            "val_auc": r.val_auc,
            "model": r.model.to_dict(),
        } for r in model.bank.selected],
        "ranking": [[s, k, tr, va, bool(sel)] for s, k, tr, va, sel in model.bank.ranking],
    }
    body = {
        "magic": MAGIC,
        "version": VERSION,
        "config": _config_dict(model),
        "units": units,
        "bank": bank,
        "meta": model.meta.to_dict() if model.meta is not None else None,
        "provenance": model.provenance,
    }
    body["digest"] = _digest(body)
    return body


def _digest(body: dict) -> str:
    canon = {k: v for k, v in body.items() if k != "digest"}
    return hashlib.sha256(json.dumps(canon, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def save(model: DetectorModel, path, kernels: str = "selected") -> None:
    text = json.dumps(to_document(model, kernels), separators=(",", ":"))
    with open(path, "w") as fh:
        fh.write(text)
        fh.write("\n")


def load(path) -> DetectorModel:
    """Read and validate a model file.

    Raises:
        FormatError: unreadable, truncated or structurally wrong JSON.
        UnsupportedVersion: unknown format version.
        InvariantViolation: kernels or classifiers break model invariants.
        IntegrityError: the stored digest does not match the content.
    """
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: not a valid model file ({exc})") from exc
    return from_document(doc)


def from_document(doc) -> DetectorModel:
    if not isinstance(doc, dict) or doc.get("magic") != MAGIC:
        raise FormatError("missing or wrong magic")
    if doc.get("version") != VERSION:
        raise UnsupportedVersion(f"model format version {doc.get('version')!r} is not supported")
    try:
        model = _parse(doc)
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise FormatError(f"malformed model file: {exc!r}") from exc
    validate(model)
    if doc.get("digest") != _digest(doc):
        raise IntegrityError("model digest does not match content")
    return model


def _parse(doc: dict) -> DetectorModel:
    cfg = doc["config"]
    ens = cfg["ensemble"]
    units = {}
    for u in doc["units"]:
        s = int(u["s"])
        if s not in UNIT_SIDES or int(u["c"]) != 3:
            raise FormatError(f"unsupported filter shape s={s}, c={u['c']}")
        shape = FilterShape(s, 3)
        kern = np.asarray(u["kernels"], dtype=np.float64)
        chans = np.asarray(u["channels"], dtype=np.int64)
        eig = np.asarray(u["eigenvalues"], dtype=np.float64)
        if kern.ndim != 2 or kern.shape != (len(chans), shape.d) or eig.shape != (shape.d - 1,):
            raise FormatError(f"unit s={s}: kernel/eigenvalue arrays have the wrong shape")
        if np.any(chans < 0) or np.any(chans >= shape.d) or len(set(chans.tolist())) != len(chans):
            raise FormatError(f"unit s={s}: bad channel indices")
        if s in units:
            raise FormatError(f"duplicate unit s={s}")
        units[s] = SaabUnit(shape, kern, eig, chans)
    selected = []
    for r in doc["bank"]["channels"]:
        s, k = int(r["unit"]), int(r["channel"])
        if s not in UNIT_SIDES or s not in units:
            raise FormatError(f"bank references unknown unit s={s}")
        if k not in units[s].channels:
            raise FormatError(f"bank references channel {k} missing from unit s={s}")
        selected.append(ChannelRecord(ChannelKey(s, k), gbdt.GbdtModel.from_dict(r["model"]),
                                      float(r["train_auc"]), float(r["val_auc"])))
    ranking = [(int(s), int(k), float(tr), float(va), bool(sel)) for s, k, tr, va, sel in doc["bank"]["ranking"]]
    bank = ChannelBank(selected, int(doc["bank"]["n_sel_per_unit"]), ranking)
    return DetectorModel(
        attention=AttentionConfig(**cfg["attention"]),
        boost=gbdt.BoostConfig(**cfg["boost"]),
        ensemble=EnsembleConfig(p=ens["p"], tail=int(ens["tail"]), meta=gbdt.BoostConfig(**ens["meta"])),
        n_sel_per_unit=int(cfg["n_sel_per_unit"]),
        seed=int(cfg["seed"]),
        target_side=None if cfg["target_side"] is None else int(cfg["target_side"]),
        units=units,
        bank=bank,
        meta=None if doc["meta"] is None else gbdt.GbdtModel.from_dict(doc["meta"]),
        provenance=dict(doc.get("provenance") or {}),
    )


def _check_tree(tree: gbdt.Tree, n_features: int, where: str):
    n = tree.n_nodes
    arrays = (tree.feature, tree.threshold, tree.left, tree.right, tree.value)
    if n == 0 or any(len(a) != n for a in arrays):
        raise InvariantViolation(f"{where}: inconsistent node arrays")
    internal = tree.feature >= 0
    if np.any(tree.feature >= n_features) or np.any(tree.feature < -1):
        raise InvariantViolation(f"{where}: feature index out of range")
    if np.any(internal & ((tree.left <= np.arange(n)) | (tree.right <= np.arange(n)) | (tree.left >= n) | (tree.right >= n))):
        raise InvariantViolation(f"{where}: child links are not preorder")
    if np.any(~internal & ((tree.left != -1) | (tree.right != -1))):
        raise InvariantViolation(f"{where}: leaf with children")
    if not (np.all(np.isfinite(tree.threshold)) and np.all(np.isfinite(tree.value))):
        raise InvariantViolation(f"{where}: non-finite node values")


def validate(model: DetectorModel) -> None:
    """Check structural invariants of a model; raises InvariantViolation."""
    for s, u in model.units.items():
        d = u.shape.d
        gram = u.kernels @ u.kernels.T
        if np.max(np.abs(gram - np.eye(len(u.channels))), initial=0.0) > ORTHO_TOL:
            raise InvariantViolation(f"unit s={s}: kernels are not orthonormal")
        for row, k in zip(u.kernels, u.channels):
            if k == 0:
                if np.max(np.abs(row - 1.0 / np.sqrt(d))) > ORTHO_TOL:
                    raise InvariantViolation(f"unit s={s}: DC kernel is not constant")
            elif abs(row.sum()) > ORTHO_TOL * np.sqrt(d):
                raise InvariantViolation(f"unit s={s}: AC kernel {k} not orthogonal to DC")
        eig = u.eigenvalues
        if np.any(eig < -ORTHO_TOL) or np.any(np.diff(eig) > ORTHO_TOL):
            raise InvariantViolation(f"unit s={s}: eigenvalues not nonnegative and descending")
    per_unit = {}
    for rec in model.bank.selected:
        per_unit[rec.key.unit] = per_unit.get(rec.key.unit, 0) + 1
        g = FilterShape(rec.key.unit).grid
        if rec.model.n_features != g * g:
            raise InvariantViolation(f"channel {rec.key}: classifier expects {rec.model.n_features} features, not {g * g}")
        if not (0.0 <= rec.train_auc <= 1.0 and 0.0 <= rec.val_auc <= 1.0):
            raise InvariantViolation(f"channel {rec.key}: AUC outside [0, 1]")
        for i, t in enumerate(rec.model.trees):
            _check_tree(t, rec.model.n_features, f"channel {rec.key} tree {i}")
    if model.bank.selected and any(n != model.bank.n_sel_per_unit for n in per_unit.values()):
        raise InvariantViolation("bank does not hold n_sel_per_unit channels for every unit")
    if model.meta is not None:
        if model.meta.n_features != model.feature_length:
            raise InvariantViolation(
                f"meta classifier expects {model.meta.n_features} features, bank implies {model.feature_length}")
        for i, t in enumerate(model.meta.trees):
            _check_tree(t, model.meta.n_features, f"meta tree {i}")


# ---------------------------------------------------------------- parameter accounting

@dataclass
class ParamReport:
    kernel_weights: dict[int, tuple[int, int]]  # s -> (selected channel count, weights)
    kernel_weights_stored: int
    classifier_actual: list[int]
    classifier_bound: int  # per channel, complete trees
    meta_actual: int
    meta_bound: int

    @property
    def kernel_total(self) -> int:
        return sum(w for _, w in self.kernel_weights.values())

    @property
    def total_bound(self) -> int:
        return self.kernel_total + len(self.classifier_actual) * self.classifier_bound + self.meta_bound

    @property
    def total_actual(self) -> int:
        return self.kernel_total + sum(self.classifier_actual) + self.meta_actual


def param_report(model: DetectorModel, kernels: str = "selected") -> ParamReport:
    """Parameter counts; kernel weights count only the bank's channels."""
    kw = {}
    stored = 0
    for s in sorted(model.units):
        u = model.units[s]
        n_sel = len(model.bank.channels_of(s))
        kw[s] = (n_sel, n_sel * u.shape.d)
        stored += (n_sel if kernels == "selected" else len(u.channels)) * u.shape.d
    meta_cfg = model.ensemble.meta
    return ParamReport(
        kernel_weights=kw,
        kernel_weights_stored=stored,
        classifier_actual=[gbdt.count_params(r.model) for r in model.bank.selected],
        classifier_bound=gbdt.complete_tree_params(model.boost.n_trees, model.boost.max_depth),
        meta_actual=gbdt.count_params(model.meta) if model.meta is not None else 0,
        meta_bound=gbdt.complete_tree_params(meta_cfg.n_trees, meta_cfg.max_depth),
    )


def format_param_report(rep: ParamReport) -> str:
    rows = [("component", "params (complete trees)", "params (trained)")]
    for s, (n, w) in rep.kernel_weights.items():
        rows.append((f"{n} ({s}x{s}x3)", str(w), str(w)))
    n_ch = len(rep.classifier_actual)
    rows.append((f"{n_ch} channel classifiers", f"{n_ch}x{rep.classifier_bound} = {n_ch * rep.classifier_bound}",
                 str(sum(rep.classifier_actual))))
    rows.append(("1 meta classifier", str(rep.meta_bound), str(rep.meta_actual)))
    rows.append(("Total", str(rep.total_bound), str(rep.total_actual)))
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    lines = []
    for j, r in enumerate(rows):
        lines.append("  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths))))
        if j == 0 or j == len(rows) - 2:
            lines.append("  ".join("-" * w for w in widths))
    lines.append(f"kernel weights stored in file: {rep.kernel_weights_stored}")
    return "\n".join(lines)
