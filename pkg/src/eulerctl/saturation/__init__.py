"""Certified saturation of a generator space under the Euler nonlinearity."""

from .certificates import (
    CertifiedDirection,
    DictionaryEntry,
    SaturationCertificate,
    b_image_dictionary,
    certificate_sum,
    certify_direction,
    combine_certificates,
    compact_certificate,
    negate_pair_certificate,
    verify_certificate,
    verify_certificate_on_grid,
)
from .fibers import FiberSubspace, coeffs_to_fiber, fiber_frames, fiber_to_coeffs, pair_images
from .saturate import SaturationReport, SaturationStep, fiber_report, generator_space, saturation_sequence, saturation_step

__all__ = [
    "CertifiedDirection",
    "DictionaryEntry",
    "SaturationCertificate",
    "b_image_dictionary",
    "certificate_sum",
    "certify_direction",
    "combine_certificates",
    "compact_certificate",
    "negate_pair_certificate",
    "verify_certificate",
    "verify_certificate_on_grid",
    "FiberSubspace",
    "coeffs_to_fiber",
    "fiber_frames",
    "fiber_to_coeffs",
    "pair_images",
    "SaturationReport",
    "SaturationStep",
    "fiber_report",
    "generator_space",
    "saturation_sequence",
    "saturation_step",
]
