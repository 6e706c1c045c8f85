#!/usr/bin/env python3
"""Regenerate the plain-text spectral assets shipped in crates/core/assets.

Sources:
  * PROSPECT-5 specific absorption coefficients, refractive index and the
    dry/wet soil basis spectra from the `prosail` Python package (2.0.5).
  * Sentinel-2A MSI spectral response functions from the `Py6S` package
    (1.9.2), which carries the ESA-published curves at 2.5 nm sampling.
    They are linearly resampled to 1 nm here.

Usage:
    pip install prosail==2.0.5 py6s==1.9.2
    python3 tools/make_assets.py crates/core/assets
"""
import hashlib
import os
import sys

import numpy as np


def write_prospect(out, spectra):
    p5 = spectra.prospect5
    wl = np.arange(400, 2501)
    with open(os.path.join(out, "prospect5_coefficients.txt"), "w") as fh:
        fh.write("# PROSPECT-5 leaf constants, 1 nm sampling\n")
        fh.write("# source: prosail 2.0.5 prospect5_spectra.txt\n")
        fh.write("# columns: wavelength_nm refractive_index k_cab k_car k_brown k_cw k_cm\n")
        for i, w in enumerate(wl):
            fh.write("%d %.9e %.9e %.9e %.9e %.9e %.9e\n" % (
                w, p5.nr[i], p5.kab[i], p5.kcar[i], p5.kbrown[i], p5.kw[i], p5.km[i]))


def write_soil(out, spectra):
    wl = np.arange(400, 2501)
    with open(os.path.join(out, "soil_basis.txt"), "w") as fh:
        fh.write("# two-member soil basis, 1 nm sampling\n")
        fh.write("# source: prosail 2.0.5 soil_reflectance.txt (rsoil1 = dry, rsoil2 = wet)\n")
        fh.write("# columns: wavelength_nm dry wet\n")
        for i, w in enumerate(wl):
            fh.write("%d %.9e %.9e\n" % (w, spectra.soil.rsoil1[i], spectra.soil.rsoil2[i]))


def write_srf(out):
    from Py6S.Params.wavelength import PredefinedWavelengths as P

    bands = ["02", "03", "04", "05", "06", "07", "08", "8A", "11", "12"]
    wl = np.arange(400, 2501, dtype=float)
    cols = []
    for b in bands:
        _, start, end, weights = getattr(P, "S2A_MSI_" + b)
        src = np.linspace(start * 1000.0, end * 1000.0, len(weights))
        w = np.interp(wl, src, weights, left=0.0, right=0.0)
        cols.append(w)
    with open(os.path.join(out, "s2a_msi_srf.csv"), "w") as fh:
        fh.write("# Sentinel-2A MSI spectral response, resampled to 1 nm\n")
        fh.write("# source: Py6S 1.9.2 PredefinedWavelengths.S2A_MSI_* (ESA S2A SRF)\n")
        fh.write("wavelength_nm," + ",".join("B" + b for b in bands) + "\n")
        for i, w in enumerate(wl):
            fh.write("%d," % w + ",".join("%.8f" % c[i] for c in cols) + "\n")


def write_manifest(out):
    names = ["prospect5_coefficients.txt", "s2a_msi_srf.csv", "soil_basis.txt"]
    with open(os.path.join(out, "SHA256SUMS"), "w") as fh:
        for n in names:
            with open(os.path.join(out, n), "rb") as f:
                digest = hashlib.sha256(f.read()).hexdigest()
            fh.write("%s  %s\n" % (n, digest))


def main():
    from prosail import spectral_lib

    out = sys.argv[1]
    os.makedirs(out, exist_ok=True)
    write_prospect(out, spectral_lib)
    write_soil(out, spectral_lib)
    write_srf(out)
    write_manifest(out)


if __name__ == "__main__":
    main()
