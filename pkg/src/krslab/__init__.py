"""Radial Kahler-Ricci soliton profiles: exact series, immersibility
certificates, completeness and the stability scan of the origin family."""

from .series import TruncatedSeries, series_add, series_derivative, series_eval, series_exp_linear, series_mul
from .soliton import (Classification, PsiProfile, SolitonParams, classify, make_profile, origin_condition,
                      polynomial_profile, psi_closed_form, psi_origin_series, series_profile)
from .immersion import (ImmersibilityCertificate, NecessaryConditionsReport, certify, f_recursion,
                        necessary_conditions, q_recursion)
from .geometry import CompletenessReport, completeness, domain_sup, solve_profile, soliton_residual
from .scan import ScanRow, family_psi, scan_export, stability_scan

__version__ = "0.1.0"

__all__ = [
    "TruncatedSeries", "series_add", "series_derivative", "series_eval", "series_exp_linear", "series_mul",
    "Classification", "PsiProfile", "SolitonParams", "classify", "make_profile", "origin_condition",
    "polynomial_profile", "psi_closed_form", "psi_origin_series", "series_profile",
    "ImmersibilityCertificate", "NecessaryConditionsReport", "certify", "f_recursion",
    "necessary_conditions", "q_recursion",
    "CompletenessReport", "completeness", "domain_sup", "solve_profile", "soliton_residual",
    "ScanRow", "family_psi", "scan_export", "stability_scan",
]
