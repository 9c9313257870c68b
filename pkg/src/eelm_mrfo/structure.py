"""Periodic crystal structures and extended-XYZ reading/writing.

Each frame of an extended-XYZ file looks like::

    2
    lattice="4.0 0 0 0 4.0 0 0 0 4.0" energy=-3.1
    Li 0.0 0.0 0.0
    Ge 2.0 0.0 0.0

The comment line carries ``key=value`` pairs (values may be quoted). The
lattice vectors ``a``, ``b``, ``c`` are given row after row, site
coordinates are Cartesian in Angstrom, and ``energy`` is the total energy
per atom in eV. Keys are matched case-insensitively.
"""

from __future__ import annotations

import shlex
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class StructureParseError(ValueError):
    def __init__(self, line: int, message: str, source: str | None = None):
        self.line = line
        self.source = source
        where = f"{source}:{line}" if source else f"line {line}"
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class CrystalStructure:
    """A unit cell with typed sites.

    Attributes
    ----------
    lattice : ndarray, shape (3, 3)
        Rows are the lattice vectors in Angstrom.
    species : tuple of str
    frac_coords : ndarray, shape (n_sites, 3)
        Fractional coordinates, wrapped into [0, 1).
    energy_per_atom : float or None
        Total energy per atom in eV.
    """

    lattice: np.ndarray
    species: tuple
    frac_coords: np.ndarray
    energy_per_atom: float | None = None

    def __post_init__(self):
        lattice = np.array(self.lattice, dtype=float).reshape(3, 3)
        volume = float(np.linalg.det(lattice))
        if not np.isfinite(volume) or abs(volume) < 1e-8:
            raise ValueError(f"degenerate lattice (volume {volume:g})")
        frac = np.array(self.frac_coords, dtype=float).reshape(-1, 3)
        species = tuple(str(s) for s in self.species)
        if len(species) != frac.shape[0]:
            raise ValueError(f"{len(species)} species labels for {frac.shape[0]} sites")
        frac = frac - np.floor(frac)
        frac[frac >= 1.0] = 0.0  # floor rounding can leave exactly 1.0
        lattice.setflags(write=False)
        frac.setflags(write=False)
        object.__setattr__(self, "lattice", lattice)
        object.__setattr__(self, "frac_coords", frac)
        object.__setattr__(self, "species", species)

    @classmethod
    def from_cartesian(cls, lattice, species, cart_coords, energy_per_atom=None) -> "CrystalStructure":
        lattice = np.asarray(lattice, dtype=float).reshape(3, 3)
        cart = np.asarray(cart_coords, dtype=float).reshape(-1, 3)
        try:
            frac = np.linalg.solve(lattice.T, cart.T).T
        except np.linalg.LinAlgError:
            raise ValueError("degenerate lattice (singular matrix)") from None
        return cls(lattice, species, frac, energy_per_atom)

    @property
    def n_sites(self) -> int:
        return len(self.species)

    @property
    def volume(self) -> float:
        return abs(float(np.linalg.det(self.lattice)))

    @property
    def cart_coords(self) -> np.ndarray:
        return self.frac_coords @ self.lattice

    def composition(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for s in self.species:
            counts[s] = counts.get(s, 0) + 1
        return counts

    def molar_fraction(self, element: str) -> float:
        return self.composition().get(element, 0) / self.n_sites

    def translated(self, shift) -> "CrystalStructure":
        """Rigidly shift every site by ``shift`` (fractional)."""
        return CrystalStructure(self.lattice, self.species, self.frac_coords + np.asarray(shift, dtype=float),
                                self.energy_per_atom)

    def permuted(self, order: Sequence[int]) -> "CrystalStructure":
        order = list(order)
        return CrystalStructure(self.lattice, [self.species[i] for i in order], self.frac_coords[order],
                                self.energy_per_atom)

    def supercell(self, reps: Sequence[int]) -> "CrystalStructure":
        reps = tuple(int(r) for r in reps)
        shifts = np.array([(i, j, k) for i in range(reps[0]) for j in range(reps[1]) for k in range(reps[2])],
                          dtype=float)
        frac = (self.frac_coords[None, :, :] + shifts[:, None, :]) / np.array(reps, dtype=float)
        species = list(self.species) * len(shifts)
        lattice = self.lattice * np.array(reps, dtype=float)[:, None]
        return CrystalStructure(lattice, species, frac.reshape(-1, 3), self.energy_per_atom)


def _parse_comment(line: str, line_no: int, source: str | None) -> dict[str, str]:
    try:
        tokens = shlex.split(line, comments=False, posix=True)
    except ValueError as exc:
        raise StructureParseError(line_no, f"bad header: {exc}", source) from None
    info = {}
    for tok in tokens:
        if "=" not in tok:
            continue
        key, value = tok.split("=", 1)
        info[key.strip().lower()] = value.strip()
    return info


def parse_xyz(text: str, source: str | None = None) -> list[CrystalStructure]:
    """Parse every frame in an extended-XYZ string."""
    lines = text.splitlines()
    structures = []
    i = 0
    while i < len(lines):
        if not lines[i].strip():
            i += 1
            continue
        count_line = i + 1
        try:
            n_atoms = int(lines[i].split()[0])
        except ValueError:
            raise StructureParseError(count_line, f"expected an atom count, got {lines[i].strip()!r}", source) from None
        if n_atoms < 1:
            raise StructureParseError(count_line, "atom count must be positive", source)
        if i + 1 >= len(lines):
            raise StructureParseError(count_line + 1, "missing header line", source)
        header_no = i + 2
        info = _parse_comment(lines[i + 1], header_no, source)
        if "lattice" not in info:
            raise StructureParseError(header_no, "header has no lattice=\"...\" entry", source)
        try:
            lattice = np.array([float(v) for v in info["lattice"].split()])
        except ValueError:
            raise StructureParseError(header_no, f"malformed lattice {info['lattice']!r}", source) from None
        if lattice.size != 9:
            raise StructureParseError(header_no, f"lattice needs 9 numbers, got {lattice.size}", source)
        energy = None
        if "energy" in info:
            try:
                energy = float(info["energy"])
            except ValueError:
                raise StructureParseError(header_no, f"malformed energy {info['energy']!r}", source) from None

        species, coords = [], []
        for k in range(n_atoms):
            line_no = i + 3 + k
            if i + 2 + k >= len(lines):
                raise StructureParseError(line_no, f"expected {n_atoms} sites, file ended after {k}", source)
            parts = lines[i + 2 + k].split()
            if len(parts) < 4:
                raise StructureParseError(line_no, "site line needs a species and three coordinates", source)
            try:
                coords.append([float(v) for v in parts[1:4]])
            except ValueError:
                raise StructureParseError(line_no, f"malformed coordinates {parts[1:4]}", source) from None
            species.append(parts[0])
        try:
            structures.append(CrystalStructure.from_cartesian(lattice.reshape(3, 3), species, coords, energy))
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise StructureParseError(header_no, str(exc), source) from None
        i += 2 + n_atoms
    return structures


def read_xyz(path) -> list[CrystalStructure]:
    path = Path(path)
    return parse_xyz(path.read_text(), source=str(path))


def format_xyz(structures: Iterable[CrystalStructure]) -> str:
    out = []
    for s in structures:
        lattice = " ".join(repr(float(v)) for v in s.lattice.ravel())
        header = f'lattice="{lattice}"'
        if s.energy_per_atom is not None:
            header += f" energy={float(s.energy_per_atom)!r}"
        out.append(str(s.n_sites))
        out.append(header)
        for label, xyz in zip(s.species, s.cart_coords):
            out.append(f"{label} {float(xyz[0])!r} {float(xyz[1])!r} {float(xyz[2])!r}")
    return "\n".join(out) + "\n"


def write_xyz(path, structures: Iterable[CrystalStructure]) -> None:
    Path(path).write_text(format_xyz(structures))
