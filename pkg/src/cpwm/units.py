"""Hartree atomic units (hbar = 1) and the few conversions the configs need."""

HBAR = 1.0
DEFAULT_MASS = 2000.0

#: 1 cm^-1 in hartree (CODATA: 1 / 219474.6313632)
CM1_TO_HARTREE = 4.5563352529e-6


def to_hartree(value: float, unit: str = "hartree") -> float:
    unit = unit.strip().lower()
    if unit in ("hartree", "au", "a.u.", "eh"):
        return float(value)
    if unit in ("cm-1", "cm^-1", "wavenumber"):
        return float(value) * CM1_TO_HARTREE
    raise ValueError(f"unknown energy unit {unit!r}")


def velocity(energy: float, potential: float = 0.0, mass: float = DEFAULT_MASS) -> float:
    """Classical speed sqrt(2 (E - V) / m)."""
    return (2.0 * (energy - potential) / mass) ** 0.5
