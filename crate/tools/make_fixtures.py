#!/usr/bin/env python3
"""Reference forward-model fixtures computed with the `prosail` Python package.

The leaf constants, soil basis and spectral response functions are read from
the repository's own asset files, so the fixtures exercise only the model
equations. Soil reflectance is mixed and clipped here and passed to 4SAIL as a
ready spectrum.

Usage:
    pip install prosail==2.0.5
    python3 tools/make_fixtures.py crates/core/assets crates/core/tests/fixtures
"""
import os
import sys

import numpy as np
from prosail.FourSAIL import foursail
from prosail.prospect_d import run_prospect

NAMES = ["N", "Cab", "Car", "Cbrown", "Cw", "Cm", "LAI", "ALA", "hotspot",
         "soil_wet", "soil_bright", "sun_zenith", "view_zenith", "rel_azimuth"]
LOWER = np.array([1.2, 20, 5, 0, 0.0075, 0.003, 0, 30, 0, 0, 0.3, 15, 0, 0])
UPPER = np.array([1.8, 90, 23, 2, 0.075, 0.011, 10, 80, 0.5, 1, 3.5, 60, 10, 180])


def load_assets(asset_dir):
    coef = np.loadtxt(os.path.join(asset_dir, "prospect5_coefficients.txt"))
    soil = np.loadtxt(os.path.join(asset_dir, "soil_basis.txt"))
    srf = np.loadtxt(os.path.join(asset_dir, "s2a_msi_srf.csv"), delimiter=",", skiprows=3)
    assert coef.shape == (2101, 7) and soil.shape == (2101, 3) and srf.shape == (2101, 11)
    return coef, soil, srf[:, 1:]


def leaf(p, coef):
    _, r, t = run_prospect(p[0], p[1], p[2], p[3], p[4], p[5], ant=0.0,
                           prospect_version="5", nr=coef[:, 1], kab=coef[:, 2],
                           kcar=coef[:, 3], kbrown=coef[:, 4], kw=coef[:, 5],
                           km=coef[:, 6], alpha=40.0)
    return r, t


def canopy(p, coef, soil):
    r, t = leaf(p, coef)
    wet_w, bright = p[9], p[10]
    rsoil0 = np.clip(bright * (wet_w * soil[:, 2] + (1.0 - wet_w) * soil[:, 1]), 0.0, 1.0)
    out = foursail(r, t, p[7], 0.0, 2, p[6], p[8], p[11], p[12], p[13], rsoil0)
    return np.asarray(out[17], dtype=float) * np.ones(2101)


def bands(spectrum, srf):
    return (srf * spectrum[:, None]).sum(axis=0) / srf.sum(axis=0)


def write_rows(path, header, rows):
    with open(path, "w") as fh:
        for h in header:
            fh.write("# " + h + "\n")
        for row in rows:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def main():
    asset_dir, out = sys.argv[1], sys.argv[2]
    os.makedirs(out, exist_ok=True)
    coef, soil, srf = load_assets(asset_dir)
    wl = np.arange(400, 2501)
    mid = 0.5 * (LOWER + UPPER)

    r, t = leaf(mid, coef)
    write_rows(os.path.join(out, "leaf_midpoint.txt"),
               ["prosail 2.0.5 run_prospect, version 5, midpoint leaf",
                "params: " + " ".join(f"{n}={v!r}" for n, v in zip(NAMES[:6], mid[:6])),
                "columns: wavelength_nm reflectance transmittance"],
               zip(wl, r, t))

    rho = canopy(mid, coef, soil)
    write_rows(os.path.join(out, "canopy_midpoint.txt"),
               ["prosail 2.0.5 foursail rsot, Campbell LIDF (18 classes), midpoint parameters",
                "params: " + " ".join(f"{n}={v!r}" for n, v in zip(NAMES, mid)),
                "columns: wavelength_nm reflectance"],
               zip(wl, rho))

    rng = np.random.default_rng(20240611)
    draws = LOWER + (UPPER - LOWER) * rng.random((100, 14))
    rows = [np.concatenate([p, bands(canopy(p, coef, soil), srf)]) for p in draws]
    write_rows(os.path.join(out, "bands_reference.txt"),
               ["prosail 2.0.5 PROSPECT-5 + 4SAIL, 100 uniform draws over the parameter ranges",
                "columns: " + " ".join(NAMES) + " B02 B03 B04 B05 B06 B07 B08 B8A B11 B12"],
               rows)

    pair = []
    for psi in (0.0, 180.0):
        p = mid.copy()
        p[12], p[13] = 10.0, psi
        pair.append(np.concatenate([p, bands(canopy(p, coef, soil), srf)]))
    write_rows(os.path.join(out, "bands_azimuth_pair.txt"),
               ["midpoint parameters at view zenith 10 deg, relative azimuth 0 and 180 deg",
                "columns: " + " ".join(NAMES) + " B02 B03 B04 B05 B06 B07 B08 B8A B11 B12"],
               pair)


if __name__ == "__main__":
    main()
