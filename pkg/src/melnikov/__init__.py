"""Exact generating functions for perturbed planar Hamiltonian systems."""

from .algebra import (
    WeightedPoly,
    OneForm,
    HamiltonianSpec,
    EIGHT_LOOP,
    DOUBLE_HETEROCLINIC,
    GLOBAL_CENTER,
    D4_TRIANGLE,
    SPECS,
    normal_form,
    d,
    wedge_with_dh,
    sigma,
)

__all__ = [
    "WeightedPoly", "OneForm", "HamiltonianSpec",
    "EIGHT_LOOP", "DOUBLE_HETEROCLINIC", "GLOBAL_CENTER", "D4_TRIANGLE",
    "SPECS", "normal_form", "d", "wedge_with_dh", "sigma",
]
