from .darcy import FineField, pixel_permeability, solve_fine_darcy
from .dataset import (
    DataSample,
    ingest_dataset,
    list_micro_indices,
    read_field,
    read_microstructure,
    write_field,
    write_microstructure,
)
from .stokes import solve_fine_stokes

__all__ = [
    "FineField",
    "solve_fine_darcy",
    "solve_fine_stokes",
    "pixel_permeability",
    "DataSample",
    "ingest_dataset",
    "list_micro_indices",
    "read_microstructure",
    "write_microstructure",
    "read_field",
    "write_field",
]
