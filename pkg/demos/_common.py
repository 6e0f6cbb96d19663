"""Shared helpers for the demo scripts."""
import argparse
from pathlib import Path

from lsmicro.artifacts import emit_fields, emit_history, emit_summary


def parse(description, default_n=100):
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--n", type=int, default=default_n, help="elements per side (default %(default)s)")
    p.add_argument("--out", type=Path, default=None, help="write history, fields and summary here")
    return p.parse_args()


def progress(every=10):
    def callback(rec, state):
        if rec.iteration % every == 0:
            cons = " ".join(f"{c:+.2e}" for c in rec.constraints)
            print(f"  it {rec.iteration:4d}  J {rec.objective:+.5f}  C [{cons}]  gamma {rec.gamma:.3f}")
    return callback


def save(result, out):
    if out is None:
        return
    out.mkdir(parents=True, exist_ok=True)
    emit_history(result.history, out / "history.csv")
    emit_fields(result.state, out)
    emit_summary(result.summary(), out / "summary.json")
    print(f"outputs written to {out}")


def ascii_picture(phi, width=50):
    """Coarse text rendering: '#' solid, '.' void (first level set only)."""
    n = phi.shape[-1]
    step = max(1, n // width)
    rows = []
    for j in range(n - 1, -1, -2 * step):
        rows.append("".join("#" if phi[i, j] < 0 else "." for i in range(0, n, step)))
    return "\n".join(rows)


def colour_picture(phi1, phi2, width=50):
    """'#' stiff phase, '+' soft phase, '.' void."""
    n = phi1.shape[-1]
    step = max(1, n // width)
    glyph = {(True, False): ".", (False, True): "#", (True, True): "+", (False, False): "."}
    rows = []
    for j in range(n - 1, -1, -2 * step):
        rows.append("".join(glyph[(bool(phi1[i, j] < 0), bool(phi2[i, j] < 0))] for i in range(0, n, step)))
    return "\n".join(rows)
