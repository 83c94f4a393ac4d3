import logging
import math
from typing import Any, Optional, overload

import numpy as np
from pydantic import ValidationError

from ces_orlicz.certifier.models import Certificate, Property, Verdict
from ces_orlicz.orlicz.models import OrliczFunction, PhiPiece, PieceError, check_pieces

logger = logging.getLogger(__name__)

_PIECE_KEYS = {"start", "slope", "coeff", "exp", "value"}
_REQUIRED_KEYS = {"start", "slope", "coeff", "exp"}


class PhiSpecException(Exception):
    def __init__(self, **kwargs: Any) -> None:
        super().__init__(kwargs.get("message"))
        self.code: str = kwargs.get("code", "SYNTAX")
        self.piece: int = kwargs.get("piece", 0)


def _parse_real(token: str, lineno: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise PhiSpecException(
            message=f"line {lineno}: {token!r} is not a real number", code="SYNTAX"
        )
    if not math.isfinite(value):
        raise PhiSpecException(
            message=f"line {lineno}: {token!r} is not finite", code="SYNTAX"
        )
    return value


def parse_phi(spec_text: str) -> OrliczFunction:
    """
    Parse the piece-per-line text format

        piece start=<real> slope=<real> coeff=<real> exp=<real> [value=<real>]

    with '#' comments, into a validated OrliczFunction.
    """

    rows: list[dict[str, float]] = []
    for lineno, raw in enumerate(spec_text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue

        keyword, *pairs = line.split()
        if keyword != "piece":
            raise PhiSpecException(
                message=f"line {lineno}: expected 'piece', got {keyword!r}",
                code="SYNTAX",
            )

        fields: dict[str, float] = {}
        for pair in pairs:
            key, sep, token = pair.partition("=")
            if not sep or key not in _PIECE_KEYS:
                raise PhiSpecException(
                    message=f"line {lineno}: unknown field {pair!r}", code="SYNTAX"
                )
            if key in fields:
                raise PhiSpecException(
                    message=f"line {lineno}: duplicate field {key!r}", code="SYNTAX"
                )
            fields[key] = _parse_real(token, lineno)

        if missing := _REQUIRED_KEYS - fields.keys():
            raise PhiSpecException(
                message=f"line {lineno}: missing {', '.join(sorted(missing))}",
                code="SYNTAX",
            )
        rows.append(fields)

    pieces: list[PhiPiece] = []
    for i, fields in enumerate(rows, start=1):
        try:
            pieces.append(PhiPiece.parse_obj(fields))
        except ValidationError as err:
            reason = "; ".join(
                f"{'.'.join(map(str, e['loc']))} {e['msg']}" for e in err.errors()
            )
            raise PhiSpecException(
                message=f"piece {i}: {reason}", code="SYNTAX", piece=i
            )

    try:
        return OrliczFunction(pieces=check_pieces(pieces))
    except PieceError as err:
        raise PhiSpecException(message=str(err), code=err.code, piece=err.piece)


def format_phi(phi: OrliczFunction) -> str:
    return "".join(
        f"piece start={p.start!r} slope={p.slope_offset!r}"
        f" coeff={p.coeff!r} exp={p.exponent!r}\n"
        for p in phi.pieces
    )


@overload
def eval_phi(phi: OrliczFunction, u: float) -> float:
    ...


@overload
def eval_phi(phi: OrliczFunction, u: np.ndarray) -> np.ndarray:
    ...


def eval_phi(phi: OrliczFunction, u: float | np.ndarray) -> float | np.ndarray:
    starts, values, slopes, coeffs, exponents = phi.table
    arr = np.abs(np.asarray(u, dtype=float))
    idx = np.searchsorted(starts, arr, side="right") - 1
    t = arr - starts[idx]

    with np.errstate(over="ignore", invalid="ignore"):
        power = np.where(coeffs[idx] > 0, coeffs[idx] * t ** exponents[idx], 0.0)
        out = values[idx] + slopes[idx] * t + power

    if np.ndim(u) == 0:
        return float(out)
    return out


@overload
def right_derivative(phi: OrliczFunction, u: float) -> float:
    ...


@overload
def right_derivative(phi: OrliczFunction, u: np.ndarray) -> np.ndarray:
    ...


def right_derivative(phi: OrliczFunction, u: float | np.ndarray) -> float | np.ndarray:
    starts, _, slopes, coeffs, exponents = phi.table
    arr = np.abs(np.asarray(u, dtype=float))
    idx = np.searchsorted(starts, arr, side="right") - 1
    t = arr - starts[idx]

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        curved = (coeffs[idx] > 0) & (t > 0)
        bend = coeffs[idx] * exponents[idx] * t ** (exponents[idx] - 1)
        out = slopes[idx] + np.where(curved, bend, 0.0)

    if np.ndim(u) == 0:
        return float(out)
    return out


def a_phi(phi: OrliczFunction) -> float:
    return phi.a_phi_cache


def sai_list(phi: OrliczFunction) -> list[tuple[float, float]]:
    """Maximal affine intervals, sorted, with adjacent collinear pieces merged."""
    return list(phi.sai_cache)


def is_strictly_convex_on(phi: OrliczFunction, interval: tuple[float, float]) -> bool:
    left, right = interval
    if not 0 <= left < right:
        raise ValueError(f"interval [{left}, {right}] must satisfy 0 <= l < r")

    return not any(max(a, left) < min(b, right) for a, b in phi.sai_cache)


def delta2_constant_range(phi: OrliczFunction) -> float:
    """Range [0, a] on which phi(2u) = K phi(u) is read off the first piece."""
    boundary = phi.first_boundary
    return boundary / 2 if math.isfinite(boundary) else 1.0


def delta2_at_zero(phi: OrliczFunction) -> Certificate:
    zero_end = a_phi(phi)
    if zero_end > 0:
        u = 0.75 * zero_end
        return Certificate(
            property=Property.delta2_at_zero,
            verdict=Verdict.fails,
            constants={
                "u": u,
                "phi_u": eval_phi(phi, u),
                "phi_2u": eval_phi(phi, 2 * u),
            },
            note="phi vanishes at u but not at 2u, the ratio is unbounded",
        )

    first = phi.first
    K = 2.0**first.exponent if first.coeff > 0 else 2.0
    return Certificate(
        property=Property.delta2_at_zero,
        verdict=Verdict.holds,
        constants={"K": K, "a": delta2_constant_range(phi)},
    )


def power_bound_range(phi: OrliczFunction) -> float:
    boundary = phi.first_boundary
    return boundary if math.isfinite(boundary) else 1.0


def lower_index_exceeds_one(phi: OrliczFunction) -> Certificate:
    first = phi.first
    if first.is_zero:
        return Certificate(
            property=Property.lower_index,
            verdict=Verdict.not_applicable,
            note="phi vanishes near zero",
        )

    if first.slope_offset > 0:
        return Certificate(
            property=Property.lower_index,
            verdict=Verdict.fails,
            constants={"index": 1.0},
            note="linear term at the origin, index is exactly 1",
        )

    p = first.exponent
    return Certificate(
        property=Property.lower_index,
        verdict=Verdict.holds,
        constants={
            "index": p,
            "epsilon": p - 1,
            "A": first.coeff,
            "u0": power_bound_range(phi),
        },
    )


def first_piece_end(phi: OrliczFunction) -> float:
    """
    Largest argument for which the series tail bound is valid: the end of
    the zero prefix when phi vanishes near 0, otherwise the first boundary.
    """
    zero_end = a_phi(phi)
    return zero_end if zero_end > 0 else phi.first_boundary


def describe(phi: OrliczFunction) -> dict[str, Optional[str]]:
    index = lower_index_exceeds_one(phi)
    delta2 = delta2_at_zero(phi)
    return {
        "a_phi": f"{a_phi(phi):.9g}",
        "sai": " ".join(f"[{a:.9g}, {b:.9g}]" for a, b in sai_list(phi)) or "none",
        "delta2_at_zero": delta2.verdict.value,
        "delta2_constants": _constants(delta2.constants),
        "lower_index": index.verdict.value,
        "lower_index_constants": _constants(index.constants),
    }


def _constants(constants: dict[str, float]) -> Optional[str]:
    if not constants:
        return None
    return " ".join(f"{k}={v:.9g}" for k, v in constants.items())
