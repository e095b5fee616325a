# -*- coding: utf-8 -*-
"""
Messages module - CLI help texts and report lines
bloch-homog v1.0
"""

import numpy as np

# === CLI COMMANDS ===
COMMANDS = {
    "validate": "check the experiment config, symbol ellipticity and coefficient positivity",
    "cell": "solve the cell problem; report g0 with its Voigt and Reuss bounds",
    "germ": "germ S(theta) and correction G(theta) over a direction sample",
    "rates": "eps-ladder of sup_k |J(k) R0^(s/2)| with a log-log slope per tau",
    "interp": "observed vs predicted eps-exponents for the [interp] s_list",
    "threshold": "threshold slopes of |F(t) - P| and the spectral residuals",
    "evolve": "Cauchy problem for A_eps and the homogenized operator",
}

ARGS = {
    "config": "experiment configuration (TOML)",
    "out": "output directory (defaults to run.out_dir or HOMOG_OUTPUT_DIR)",
    "threads": "worker processes for the k-sweep",
}

# === REPORT LINES ===
MSG = {
    "starting": "🚀 Starting %s v%s: %s",
    "config_errors": "❌ Process settings invalid:",
    "config_ok": "✅ Config %s valid: d=%s p=%s n=%s m=%s",
    "alpha": "Ellipticity: alpha0=%.6g alpha1=%.6g",
    "positivity": "g(x) eigenvalues in [%.6g, %.6g] (grid %s)",
    "window": "Threshold window: delta=%.6g t0=%.6g r0=%.6g",
    "g0": "g0 =\n%s",
    "voigt": "Voigt mean =\n%s",
    "reuss": "Reuss mean =\n%s",
    "special": "Special cases: voigt=%s reuss=%s g~ constant=%s real-scalar=%s",
    "regime": "Correction G: max |G|/|S| = %.3e (%s)",
    "slope": "tau=%g s=%g: slope %s",
    "invariant_failed": "❌ Invariant failed: %s",
    "done": "✅ Done: %s",
    "failed": "❌ Finished with %s failed check(s)",
    "homog_error": "❌ %s: %s",
}


def format_matrix(mat: np.ndarray, digits: int = 10) -> str:
    """Matrix as aligned rows; drops imaginary parts below 1e-15"""
    arr = np.atleast_2d(mat)
    rows = []
    for row in arr:
        cells = []
        for v in row:
            if abs(v.imag) < 1e-15:
                cells.append(f"{v.real:+.{digits}f}")
            else:
                cells.append(f"{v.real:+.{digits}f}{v.imag:+.{digits}f}i")
        rows.append("  [" + "  ".join(cells) + "]")
    return "\n".join(rows)


def format_slope(fit) -> str:
    if fit is None:
        return "n/a"
    if fit.exact:
        return "exact (all values below floor)"
    return f"{fit.slope:.3f} (rms {fit.residual:.2e}, {fit.rungs} rungs)"
