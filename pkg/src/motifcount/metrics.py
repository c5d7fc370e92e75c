"""Accuracy metrics comparing estimated graphlet counts to ground truth."""

from __future__ import annotations

import math


def frequencies(counts: dict[int, float]) -> dict[int, float]:
    tot = math.fsum(counts.values())
    return {c: v / tot for c, v in counts.items()} if tot > 0 else {}


def l1_distance(est: dict[int, float], truth: dict[int, float]) -> float:
    """Sum of |f_est - f_true| over the union of both supports."""
    fe, ft = frequencies(est), frequencies(truth)
    return math.fsum(abs(fe.get(c, 0.0) - ft.get(c, 0.0)) for c in set(fe) | set(ft))


def count_errors(est: dict[int, float], truth: dict[int, float]) -> dict[int, float]:
    """(est - true) / true per true graphlet; -1 when the graphlet was missed."""
    out = {}
    for c, true in truth.items():
        if true <= 0:
            continue
        e = est.get(c, 0.0)
        out[c] = -1.0 if e <= 0 else (e - true) / true
    return out


def fraction_within(errors: dict[int, float], tol: float = 0.5) -> float:
    if not errors:
        return 0.0
    return sum(abs(e) <= tol for e in errors.values()) / len(errors)


def rarest_found(truth: dict[int, float], samples: dict[int, int], min_samples: int = 10) -> float | None:
    """True frequency of the rarest graphlet seen in at least ``min_samples`` samples."""
    ft = frequencies(truth)
    seen = [ft[c] for c, n in samples.items() if n >= min_samples and c in ft]
    return min(seen) if seen else None


def summarize(est: dict[int, float], truth: dict[int, float], samples: dict[int, int] | None = None,
              tol: float = 0.5) -> dict:
    errs = count_errors(est, truth)
    return {
        "l1": l1_distance(est, truth),
        "errors": errs,
        "within": fraction_within(errs, tol),
        "rarest_found": rarest_found(truth, samples or {}),
    }
