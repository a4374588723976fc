"""Modified Craig-Sneyd ADI scheme with Rannacher start-up for a 2D
convection-diffusion problem with Dirac initial data, plus the Fourier-based
predictors of its low-wavenumber, high-wavenumber and CS error components."""
from .discretization import Grid2D, GridField, StencilOperators, build_grid, dirac_initial, model_operators
from .erroranalysis import ErrorEstimate, c_cs, c_cs_mirror, c_high, c_low, total_error_estimate
from .fourier import FourierPoint, FourierSymbols, Region, amplification_R, classify_region, numerical_fourier_UN, symbols
from .model import BSParams, ModelParams, exact_fourier, exact_solution, phi_rho, phi_rho_partial
from .quadrature import QuadratureSpec
from .timestepper import MCSStepper, SchemeParams, integrate, mcs_step, rannacher_startup, theta_admissible

__version__ = "0.1.0"

__all__ = [
    "Grid2D", "GridField", "StencilOperators", "build_grid", "dirac_initial", "model_operators",
    "ErrorEstimate", "c_cs", "c_cs_mirror", "c_high", "c_low", "total_error_estimate",
    "FourierPoint", "FourierSymbols", "Region", "amplification_R", "classify_region",
    "numerical_fourier_UN", "symbols", "BSParams", "ModelParams", "exact_fourier",
    "exact_solution", "phi_rho", "phi_rho_partial", "QuadratureSpec", "MCSStepper",
    "SchemeParams", "integrate", "mcs_step", "rannacher_startup", "theta_admissible",
]
