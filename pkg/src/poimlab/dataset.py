"""Transaction feature vectors: ingestion, temporal splitting, encoding, synthesis."""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import EmptyInput, EmptyTrain, MissingColumn, ParseError
from .fixedpoint import Scale, to_fixed_raw

FEATURE_NAMES: Tuple[str, ...] = (
    "gas",
    "block_timestamp",
    "func_selector_encoded",
    "chain_id_encoded",
    "sender_encoded",
    "origin_encoded",
    "to_encoded",
)
NUMERIC_FEATURES: Tuple[str, ...] = ("gas", "block_timestamp")
REQUIRED_COLUMNS = FEATURE_NAMES + ("label",)
OPTIONAL_COLUMNS = ("attack_group_id", "root_cause")


class RootCause(enum.Enum):
    ACCESS_CONTROL = "AccessControl"
    BUSINESS_LOGIC = "BusinessLogic"
    ORACLE_MANIPULATION = "OracleManipulation"
    UNCHECKED_EXTERNAL_CALL = "UncheckedExternalCall"
    STORAGE_COLLISION = "StorageCollision"


@dataclass(frozen=True)
class TxFeatureVector:
    gas: int
    block_timestamp: int
    func_selector_encoded: int
    chain_id_encoded: int
    sender_encoded: int
    origin_encoded: int
    to_encoded: int
    label: int
    attack_group_id: Optional[str] = None
    root_cause: Optional[RootCause] = None

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")
        if self.attack_group_id is not None and self.label != 1:
            raise ValueError("attack_group_id is only valid on attack (label 1) records")

    def features(self) -> Tuple[int, ...]:
        return tuple(getattr(self, name) for name in FEATURE_NAMES)

    def sort_key(self):
        return (
            self.block_timestamp,
            self.features(),
            self.label,
            self.attack_group_id or "",
            self.root_cause.value if self.root_cause else "",
        )


Sample = Tuple[Tuple[int, ...], int]


@dataclass
class SplitDataset:
    """Records split by time, before any encoding."""

    train: List[TxFeatureVector]
    test: List[TxFeatureVector]


@dataclass
class EncodedDataset:
    train: List[Sample]
    test: List[Sample]
    means: Dict[str, float]
    stds: Dict[str, float]
    scale: Scale
    numeric: Tuple[str, ...] = NUMERIC_FEATURES
    train_records: List[TxFeatureVector] = field(default_factory=list, repr=False)
    test_records: List[TxFeatureVector] = field(default_factory=list, repr=False)

    def encode(self, record: TxFeatureVector) -> Tuple[int, ...]:
        """Encode one record with the stored train statistics."""
        return tuple(to_fixed_raw(v, self.scale) for v in self.standardized(record))

    def standardized(self, record: TxFeatureVector) -> List[float]:
        out = []
        for name in FEATURE_NAMES:
            value = getattr(record, name)
            if name in self.numeric:
                std = self.stds[name]
                out.append(0.0 if std == 0 else (value - self.means[name]) / std)
            else:
                out.append(float(value))
        return out


# -- ingestion ----------------------------------------------------------------

def _parse_int(text: str, column: str, line: int) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise ParseError(line, f"column {column!r}: {text!r} is not an integer") from None


def ingest(path: Union[str, Path]) -> List[TxFeatureVector]:
    """Read the comma-separated record format.

    The header must name the seven features and ``label``;
    ``attack_group_id`` and ``root_cause`` are optional and may be blank.
    Line numbers in errors count the header as line 1.
    """
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise MissingColumn(f"missing column(s): {', '.join(missing)}")
        for row in reader:
            line = reader.line_num
            values = {name: _parse_int(row[name] or "", name, line) for name in REQUIRED_COLUMNS}
            group = (row.get("attack_group_id") or "").strip() or None
            cause_text = (row.get("root_cause") or "").strip()
            try:
                cause = RootCause(cause_text) if cause_text else None
            except ValueError:
                raise ParseError(line, f"unknown root cause {cause_text!r}") from None
            try:
                records.append(TxFeatureVector(**values, attack_group_id=group, root_cause=cause))
            except ValueError as exc:
                raise ParseError(line, str(exc)) from None
    return records


def write_records(path: Union[str, Path], records: Iterable[TxFeatureVector]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REQUIRED_COLUMNS + OPTIONAL_COLUMNS)
        for r in records:
            writer.writerow(
                list(r.features())
                + [r.label, r.attack_group_id or "", r.root_cause.value if r.root_cause else ""]
            )


def write_encoded(path: Union[str, Path], ds: EncodedDataset) -> None:
    """Export encoded samples (fixed-point raws) in the ingestion column layout."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("split",) + FEATURE_NAMES + ("label", "scale_exponent"))
        for split, rows in (("train", ds.train), ("test", ds.test)):
            for x, y in rows:
                writer.writerow((split, *x, y, ds.scale.exponent))


# -- splitting and encoding ---------------------------------------------------

def temporal_split(records: Sequence[TxFeatureVector], test_fraction: float) -> SplitDataset:
    """Chronological split; attack groups never straddle the cut.

    A group crossing the cut is pulled wholly to the earlier (train) side,
    which moves the cut past its last member so no train record postdates
    a test record.
    """
    if not records:
        raise EmptyInput("no records to split")
    if not 0.0 <= test_fraction <= 1.0:
        raise ValueError("test_fraction must lie in [0, 1]")
    ordered = sorted(records, key=TxFeatureVector.sort_key)
    n = len(ordered)
    cut = n - int(round(n * test_fraction))

    last_index: Dict[str, int] = {}
    first_index: Dict[str, int] = {}
    for i, r in enumerate(ordered):
        if r.attack_group_id is not None:
            first_index.setdefault(r.attack_group_id, i)
            last_index[r.attack_group_id] = i
    moved = True
    while moved:
        moved = False
        for gid, first in first_index.items():
            if first < cut <= last_index[gid]:
                cut = last_index[gid] + 1
                moved = True
    return SplitDataset(train=ordered[:cut], test=ordered[cut:])


def standardize_encode(ds: SplitDataset, scale: Scale,
                       numeric: Sequence[str] = NUMERIC_FEATURES) -> EncodedDataset:
    """Z-score the numeric features with train statistics, then quantize.

    Categorical features keep their integer codes.  A feature with zero
    train variance encodes to 0.
    """
    if not ds.train:
        raise EmptyTrain("cannot standardize without training records")
    numeric = tuple(numeric)
    unknown = set(numeric) - set(FEATURE_NAMES)
    if unknown:
        raise ValueError(f"unknown feature(s): {sorted(unknown)}")
    means, stds = {}, {}
    for name in numeric:
        col = np.array([getattr(r, name) for r in ds.train], dtype=float)
        means[name] = float(col.mean())
        stds[name] = float(col.std())
    enc = EncodedDataset(
        train=[], test=[], means=means, stds=stds, scale=scale, numeric=numeric,
        train_records=list(ds.train), test_records=list(ds.test),
    )
    enc.train = [(enc.encode(r), r.label) for r in ds.train]
    enc.test = [(enc.encode(r), r.label) for r in ds.test]
    return enc


# -- synthetic generator ------------------------------------------------------

# per-feature spread and centre of the benign cluster, in raw feature units
_SYNTH_STD = np.array([20_000.0, 2_000_000.0, 6.0, 1.5, 40.0, 40.0, 25.0])
_SYNTH_MEAN = np.array([150_000.0, 1_650_000_000.0, 30.0, 4.0, 500.0, 500.0, 300.0])
_TIMESTAMP = 1


def synth_generate(n_normal: int, n_attack: int, separation: float,
                   rng_seed: int, group_fraction: float = 0.3) -> List[TxFeatureVector]:
    """Two 7-D Gaussian clusters of transactions.

    The attack centre is offset from the benign one, in standardized units,
    by ``separation`` along the six non-timestamp features combined.  Both
    classes share the timestamp distribution, so attacks interleave with
    normal traffic in time.  Some consecutive attacks share a group id.
    """
    if n_normal <= 0 or n_attack <= 0:
        raise ValueError("both class counts must be positive")
    if separation < 0:
        raise ValueError("separation must be non-negative")
    rng = np.random.default_rng(rng_seed)
    direction = np.ones(7)
    direction[_TIMESTAMP] = 0.0
    direction /= np.linalg.norm(direction)
    offset = separation * direction * _SYNTH_STD

    def cluster(n, centre):
        z = rng.standard_normal((n, 7))
        return centre + z * _SYNTH_STD

    normal = cluster(n_normal, _SYNTH_MEAN)
    attack = cluster(n_attack, _SYNTH_MEAN + offset)
    causes = list(RootCause)

    records = []
    for row in normal:
        records.append(_record(row, 0, None, None))
    order = np.argsort(attack[:, _TIMESTAMP], kind="stable")
    attack = attack[order]
    i, gid = 0, 0
    while i < n_attack:
        size = 1
        if rng.random() < group_fraction and i + 1 < n_attack:
            size = int(rng.integers(2, 4))
        group = f"g{gid}" if size > 1 else None
        cause = causes[int(rng.integers(len(causes)))]
        for row in attack[i:i + size]:
            records.append(_record(row, 1, group, cause))
        i += size
        gid += 1
    return records


def _record(row: np.ndarray, label: int, group, cause) -> TxFeatureVector:
    values = [int(round(v)) for v in row]
    return TxFeatureVector(*values, label=label, attack_group_id=group, root_cause=cause)


def synthetic_pipeline(n_normal: int, n_attack: int, separation: float, rng_seed: int,
                       scale: Scale, test_fraction: float = 0.3) -> EncodedDataset:
    """Generate, split by time and encode; all seven synthetic features are z-scored."""
    records = synth_generate(n_normal, n_attack, separation, rng_seed)
    return standardize_encode(temporal_split(records, test_fraction), scale, numeric=FEATURE_NAMES)
