"""Partial radial distribution function features and formation-energy targets."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .structure import CrystalStructure

DEFAULT_PAIRS = (("Li", "Li"), ("Li", "Ge"), ("Ge", "Ge"))


@dataclass(frozen=True)
class RdfConfig:
    """Grid and smearing settings for partial RDF features.

    Attributes
    ----------
    cutoff : float
        Neighbors farther than this (Angstrom) are ignored; exactly at the
        cutoff still counts.
    sigma : float
        Gaussian smearing width in Angstrom.
    power : float
        Exponent ``p`` of the ``1 / r**p`` prefactor, evaluated at the grid
        radius.
    grid_points, grid_max : int, float
        Grid radii are ``grid_max * (m + 1) / grid_points`` for
        ``m = 0 .. grid_points - 1``.
    pairs : tuple of (str, str)
        Ordered (center, neighbor) species pairs, one feature block each.
    """

    cutoff: float = 8.0
    sigma: float = 0.2
    power: float = 2.0
    grid_points: int = 64
    grid_max: float = 10.0
    pairs: tuple = DEFAULT_PAIRS

    def __post_init__(self):
        pairs = tuple((str(a), str(b)) for a, b in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not self.grid_max > 0:
            raise ValueError("grid_max must be positive")
        if self.grid_points < 2:
            raise ValueError("grid_points must be at least 2")
        if not 0 < self.cutoff <= self.grid_max:
            raise ValueError("cutoff must lie in (0, grid_max]")
        if self.power < 0:
            raise ValueError("power must be nonnegative")
        if not pairs:
            raise ValueError("at least one species pair is required")

    @property
    def grid(self) -> np.ndarray:
        m = np.arange(1, self.grid_points + 1, dtype=float)
        return self.grid_max * m / self.grid_points

    @property
    def elements(self) -> tuple:
        seen = []
        for pair in self.pairs:
            for s in pair:
                if s not in seen:
                    seen.append(s)
        return tuple(seen)

    def column_names(self) -> list[str]:
        width = len(str(self.grid_points - 1))
        return [f"{a}-{b}_{m:0{width}d}" for a, b in self.pairs for m in range(self.grid_points)]

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class FeatureDataset:
    features: np.ndarray
    columns: list
    targets: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float).reshape(-1, len(self.columns))
        if self.targets is not None:
            self.targets = np.asarray(self.targets, dtype=float).ravel()
            if self.targets.shape[0] != self.features.shape[0]:
                raise ValueError("targets and features disagree on the number of rows")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]


def formation_energy(total_energy_per_atom: float, fraction_a: float, fraction_b: float,
                     pure_energy_a: float, pure_energy_b: float) -> float:
    """Binary formation energy ``E_tot - x_a E_a - x_b E_b`` (per atom)."""
    if fraction_a < 0 or fraction_b < 0 or abs(fraction_a + fraction_b - 1.0) > 1e-12:
        raise ValueError(f"molar fractions must be nonnegative and sum to 1, got {fraction_a}, {fraction_b}")
    return total_energy_per_atom - fraction_a * pure_energy_a - fraction_b * pure_energy_b


def structure_formation_energy(structure: CrystalStructure, references: dict) -> float:
    """Formation energy of a binary structure against per-element reference energies."""
    if structure.energy_per_atom is None:
        raise ValueError("structure has no energy")
    extra = set(structure.species) - set(references)
    if extra:
        raise ValueError(f"no reference energy for {sorted(extra)}")
    if len(references) != 2:
        raise ValueError("formation energies need exactly two reference elements")
    (a, ea), (b, eb) = sorted(references.items())
    return formation_energy(structure.energy_per_atom, structure.molar_fraction(a),
                            structure.molar_fraction(b), ea, eb)


def reference_energies(structures: Sequence[CrystalStructure], elements: Sequence[str]) -> dict:
    """Lowest energy per atom among the single-element structures of each element."""
    refs = {}
    for el in elements:
        energies = [s.energy_per_atom for s in structures
                    if s.energy_per_atom is not None and set(s.species) == {el}]
        if not energies:
            raise ValueError(f"no pure {el} structure with an energy to use as reference")
        refs[el] = min(energies)
    return refs


def _image_range(lattice: np.ndarray, cutoff: float) -> np.ndarray:
    """Lattice translations that can hold an image within ``cutoff`` of any site."""
    volume = abs(float(np.linalg.det(lattice)))
    reps = []
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        height = volume / float(np.linalg.norm(np.cross(lattice[j], lattice[k])))
        # fractional differences lie in (-1, 1), hence the extra cell
        reps.append(int(math.ceil(cutoff / height)) + 1)
    axes = [np.arange(-n, n + 1, dtype=float) for n in reps]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    return grid.reshape(-1, 3)


def enumerate_neighbors(structure: CrystalStructure, center: str, neighbor: str, cutoff: float) -> np.ndarray:
    """Distances from every ``center`` site to every ``neighbor`` image with ``0 < d <= cutoff``."""
    if not cutoff > 0:
        raise ValueError("cutoff must be positive")
    species = np.array(structure.species)
    centers = structure.frac_coords[species == center]
    others = structure.frac_coords[species == neighbor]
    if len(centers) == 0 or len(others) == 0:
        return np.empty(0)
    shifts = _image_range(structure.lattice, cutoff)
    lat = structure.lattice
    out = []
    for fc in centers:
        full = (others - fc)[None, :, :] + shifts[:, None, :]
        x = full[..., 0] * lat[0, 0] + full[..., 1] * lat[1, 0] + full[..., 2] * lat[2, 0]
        y = full[..., 0] * lat[0, 1] + full[..., 1] * lat[1, 1] + full[..., 2] * lat[2, 1]
        z = full[..., 0] * lat[0, 2] + full[..., 1] * lat[1, 2] + full[..., 2] * lat[2, 2]
        d = np.sqrt(x * x + y * y + z * z).ravel()
        out.append(d[(d > 0) & (d <= cutoff)])
    return np.concatenate(out)


def rdf_values(distances, n_centers: int, radii, sigma: float, power: float, cutoff: float) -> np.ndarray:
    """Evaluate the smeared partial RDF at arbitrary ``radii``."""
    r = np.asarray(radii, dtype=float)
    d = np.asarray(distances, dtype=float)
    d = d[d <= cutoff]
    if n_centers == 0 or d.size == 0:
        return np.zeros_like(r)
    gauss = np.exp(-((r[:, None] - d[None, :]) ** 2) / (2.0 * sigma ** 2))
    return gauss.sum(axis=1) / r ** power / n_centers


def partial_rdf(structure: CrystalStructure, pair: tuple, config: RdfConfig) -> np.ndarray:
    """Partial RDF of ``pair`` on the config grid; zeros when the center species is absent."""
    center, neighbor = pair
    n_centers = structure.species.count(center)
    if n_centers == 0:
        return np.zeros(config.grid_points)
    d = enumerate_neighbors(structure, center, neighbor, config.cutoff)
    return rdf_values(d, n_centers, config.grid, config.sigma, config.power, config.cutoff)


def feature_row(structure: CrystalStructure, config: RdfConfig) -> np.ndarray:
    return np.concatenate([partial_rdf(structure, pair, config) for pair in config.pairs])


def featurize(structures: Sequence[CrystalStructure], config: RdfConfig | None = None, *,
              with_targets: bool = True, references: dict | None = None, executor=None) -> FeatureDataset:
    """Feature matrix (one row per structure) plus formation-energy targets.

    Targets are formation energies in eV/atom. ``references`` maps each
    element to its pure-phase energy per atom; when omitted they are taken
    from the lowest-energy single-element structures in ``structures``.
    """
    config = config or RdfConfig()
    structures = list(structures)
    columns = config.column_names()
    targets = None
    metadata = {"rdf_config": config.digest(), "species": list(config.elements), "target_units": "eV/atom"}
    if with_targets and structures:
        missing = [i for i, s in enumerate(structures) if s.energy_per_atom is None]
        if missing:
            raise ValueError(f"structure {missing[0]} has no energy but targets were requested")
        if references is None:
            references = reference_energies(structures, config.elements)
        targets = np.array([structure_formation_energy(s, references) for s in structures])
        metadata["references"] = dict(references)
    if executor is None:
        rows = [feature_row(s, config) for s in structures]
    else:
        rows = list(executor.map(feature_row, structures, [config] * len(structures)))
    features = np.array(rows) if rows else np.empty((0, len(columns)))
    return FeatureDataset(features, columns, targets, metadata)


def write_feature_csv(path, dataset: FeatureDataset) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = list(dataset.columns) + (["target"] if dataset.targets is not None else [])
        writer.writerow(header)
        for i in range(dataset.n_rows):
            row = [repr(float(v)) for v in dataset.features[i]]
            if dataset.targets is not None:
                row.append(repr(float(dataset.targets[i])))
            writer.writerow(row)


def read_feature_csv(path) -> FeatureDataset:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty dataset file") from None
        rows = [[float(v) for v in row] for row in reader if row]
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    if header and header[-1] == "target":
        return FeatureDataset(data[:, :-1], header[:-1], data[:, -1], {"source": str(path)})
    return FeatureDataset(data, header, None, {"source": str(path)})
