#!/usr/bin/env python3
"""Fit the bundled example weights to the Gent-Thomas reference.

Samples the six loading paths, fits energy (relative to the reference state)
and Kirchhoff stress with L-BFGS-B, and writes models/<architecture>.json with
a reference_fit block whose tolerance is the achieved error plus margin.

    PYTHONPATH=build/python python3 tools/fit_weights.py --out models
"""

import argparse
import json
import math
import pathlib
import sys

import numpy as np
from scipy.optimize import minimize

import ncmfe

PATHS = ["UT", "UC", "BT", "BC", "SS", "PS"]
KINEMATIC = {"variant": "isochoric", "invariants": ["I1", "I2", "J"]}


def training_set(gamma_max, samples):
    fs = [np.eye(3)]
    for p in PATHS:
        for g in np.linspace(0.0, gamma_max, samples)[1:]:
            fs.append(ncmfe.loading_path(p, g))
    return np.array(fs)


class Slots:
    """Numeric leaves of a weight document, addressed by key paths, with bounds."""

    def __init__(self):
        self.paths, self.bounds, self.x0 = [], [], []

    def add(self, path, value, lower=None, upper=None):
        self.paths.append(path)
        self.bounds.append((lower, upper))
        self.x0.append(value)

    def fill(self, doc, x):
        for path, v in zip(self.paths, x):
            node = doc
            for key in path[:-1]:
                node = node[key]
            node[path[-1]] = float(v)
        return doc


def micnn_template(rng, hidden=(8, 8), monotone=False):
    # Without monotone mode the skip weights on J may go negative, which the
    # volumetric term needs below J = 1; I1bar and I2bar stay non-decreasing.
    doc = {"architecture": "micnn", "monotone": monotone, "kinematic": KINEMATIC, "layers": []}
    slots = Slots()
    widths = [3] + list(hidden) + [1]
    for k in range(1, len(widths)):
        rows, prev = widths[k], widths[k - 1]
        # The first layer's skip block duplicates A; it only carries the
        # signed J weights outside monotone mode.
        layer = {"A": [[0.0] * prev for _ in range(rows)], "B": [[0.0] * 3 for _ in range(rows)]}
        if k < len(widths) - 1:
            layer["c"] = [0.0] * rows
        doc["layers"].append(layer)
        li = k - 1
        for r in range(rows):
            for c in range(prev):
                slots.add(("layers", li, "A", r, c), rng.uniform(0, 1.0 / prev), 0.0)
            for c in range(3):
                if c == 2 and not monotone:
                    slots.add(("layers", li, "B", r, c), rng.uniform(-0.5, 0.5))
                elif k > 1:
                    slots.add(("layers", li, "B", r, c), rng.uniform(0, 0.1), 0.0)
            if k < len(widths) - 1:
                slots.add(("layers", li, "c", r), rng.uniform(-2.0, 0.5))
    return doc, slots


def cann_template(rng):
    doc = {"architecture": "cann", "kinematic": KINEMATIC, "branches": []}
    slots = Slots()
    offsets = [3.0, 3.0, 1.0]
    shapes = [("identity", 1, "linear"), ("identity", 2, "linear"), ("identity", 2, "exp"),
              ("macaulay", 2, "linear")]
    for m, w0 in enumerate(offsets):
        for f0, f1, f2 in shapes:
            b = len(doc["branches"])
            doc["branches"].append({"input": m, "f0": f0, "f1": f1, "f2": f2,
                                    "w0": w0, "w1": 1.0, "w2": 0.0})
            if f2 == "exp":
                slots.add(("branches", b, "w1"), rng.uniform(0.05, 0.3), 0.0, 2.0)
            slots.add(("branches", b, "w2"), rng.uniform(0.0, 0.3), 0.0)
    return doc, slots


def ickan_template(rng, hidden=4, n_basis=8, order=3, lo=-1.0, hi=12.0):
    # Controls are stored as (c0, first slope, slope increments) so that the
    # convexity/monotonicity constraint becomes simple bounds.
    doc = {"architecture": "ickan", "kinematic": KINEMATIC,
           "spline": {"order": order, "n_basis": n_basis, "range": [lo, hi],
                      "extrapolation": "linear"},
           "layers": []}
    slots = Slots()
    for k, (inp, out) in enumerate([(3, hidden), (hidden, 1)]):
        layer = {"out": out, "edges": []}
        for e in range(out * inp):
            layer["edges"].append({"w": 0.0, "c": [0.0] * n_basis})
            slots.add(("layers", k, "edges", e, "w"), rng.uniform(0.0, 1.0 / inp), 0.0)
            slots.add(("layers", k, "edges", e, "raw0"), rng.uniform(-0.5, 0.5))
            for i in range(1, n_basis):
                slots.add(("layers", k, "edges", e, f"raw{i}"), rng.uniform(0.0, 0.3), 0.0)
        doc["layers"].append(layer)
    return doc, slots


def finish_ickan(doc):
    for layer in doc["layers"]:
        for edge in layer["edges"]:
            n = len(edge["c"])
            raw = [edge.pop(f"raw{i}") for i in range(n)]
            slope, c = raw[1], [raw[0]]
            for i in range(1, n):
                c.append(c[-1] + slope)
                if i + 1 < n:
                    slope += raw[i + 1]
            edge["c"] = c
    return doc


def build(arch, template, slots, x):
    doc = slots.fill(json.loads(json.dumps(template)), x)
    if arch == "ickan":
        doc = finish_ickan(doc)
    return doc


def evaluate(doc, fs):
    model = ncmfe.model_from_json(json.dumps(doc))
    psi, tau, _ = ncmfe.eval_batch(model, fs)
    return psi - psi[0], tau


def reference_error(doc, gamma_max, steps):
    model = ncmfe.model_from_json(json.dumps(doc))
    psi0 = ncmfe.eval_point(model, np.eye(3))[0]
    err = 0.0
    for p in PATHS:
        for k in range(steps + 1):
            f = ncmfe.loading_path(p, gamma_max * k / steps)
            ref = ncmfe.eval_point(ncmfe.gent_thomas_model(), f)[0]
            err = max(err, abs(ncmfe.eval_point(model, f)[0] - psi0 - ref))
    return err


def fit(arch, seed, iterations, gamma_train):
    rng = np.random.default_rng(seed)
    template, slots = {"micnn": micnn_template, "cann": cann_template,
                       "ickan": ickan_template}[arch](rng)
    fs = training_set(gamma_train, 21)
    psi_ref, tau_ref, _ = ncmfe.eval_batch(ncmfe.gent_thomas_model(), fs)

    def loss(x):
        try:
            psi, tau = evaluate(build(arch, template, slots, x), fs)
        except ncmfe.DomainError:
            return 1e6
        return float(np.mean((psi - psi_ref) ** 2) + 0.25 * np.mean((tau - tau_ref) ** 2))

    res = minimize(loss, np.array(slots.x0), method="L-BFGS-B", bounds=slots.bounds,
                   options={"maxiter": iterations, "maxfun": iterations * 400, "ftol": 1e-14})
    return build(arch, template, slots, res.x), res.fun


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="models")
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--iterations", type=int, default=1000)
    ap.add_argument("--architectures", default="micnn,cann,ickan")
    ap.add_argument("--gamma-train", type=float, default=0.8)
    ap.add_argument("--gamma-check", type=float, default=0.5)
    args = ap.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    for arch in args.architectures.split(","):
        doc, final = fit(arch, args.seed, args.iterations, args.gamma_train)
        err = reference_error(doc, args.gamma_check, 10)
        # Two significant digits, rounded up, plus a quarter for margin.
        tol = 1.25 * err
        tol = math.ceil(tol / 10 ** math.floor(math.log10(tol)) * 10) / 10 * 10 ** math.floor(math.log10(tol))
        doc = {"format": "ncmfe-weights/1", "name": f"{arch}_gent_thomas_fit",
               "derivative_mode": "cgo", **doc,
               "reference_fit": {"reference": "gent_thomas", "gamma_max": args.gamma_check,
                                 "steps": 10, "tolerance": tol}}
        path = out / f"{arch}.json"
        # Round trip through the loader so the file is exactly what it accepts.
        text = ncmfe.model_from_json(json.dumps(doc)).to_json()
        path.write_text(text + "\n")
        print(f"{arch}: loss {final:.3e}, max energy error {err:.3e}, tolerance {tol:.2e} -> {path}",
              file=sys.stderr)

    gt = ncmfe.gent_thomas_model()
    (out / "gent_thomas.json").write_text(gt.to_json() + "\n")


if __name__ == "__main__":
    main()
