import math
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field, PrivateAttr, root_validator, validator

# relative slack for comparing a computed left slope with the next piece's
# stored right slope
SLOPE_RTOL = 1e-12


class PhiPiece(BaseModel):
    """
    One piece of an Orlicz function on [start, next start):
    value + slope_offset * (u - start) + coeff * (u - start) ** exponent
    """

    start: float = Field(ge=0)
    slope_offset: float = Field(ge=0, alias="slope")
    coeff: float = Field(ge=0)
    exponent: float = Field(1.0, alias="exp")
    value: Optional[float] = None

    class Config:
        allow_population_by_field_name = True
        allow_mutation = False

    @validator("start", "slope_offset", "coeff", "exponent", "value")
    def finite(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and not math.isfinite(value):
            raise ValueError("must be finite")
        return value

    @property
    def is_affine(self) -> bool:
        return self.coeff == 0

    @property
    def is_zero(self) -> bool:
        return self.coeff == 0 and self.slope_offset == 0

    def local_value(self, u: float) -> float:
        t = u - self.start
        power = self.coeff * t**self.exponent if self.coeff > 0 else 0.0
        return (self.value or 0.0) + self.slope_offset * t + power

    def local_slope(self, u: float) -> float:
        t = u - self.start
        if self.coeff == 0 or t == 0:
            return self.slope_offset
        return self.slope_offset + self.coeff * self.exponent * t ** (self.exponent - 1)


class PieceError(ValueError):
    def __init__(self, code: str, piece: int, message: str) -> None:
        super().__init__(message)
        self.code = code
        self.piece = piece


def check_pieces(pieces: list[PhiPiece]) -> list[PhiPiece]:
    """Validate the piece invariants and fill every value by continuity."""
    if not pieces:
        raise PieceError("EMPTY", 0, "empty piece list")

    if pieces[0].start != 0:
        raise PieceError("ORDER", 1, "piece 1: first start must be 0")

    filled: list[PhiPiece] = []
    for i, piece in enumerate(pieces, start=1):
        if piece.exponent < 1:
            raise PieceError("EXPONENT", i, f"piece {i}: exponent {piece.exponent} < 1")
        if piece.coeff > 0 and piece.exponent == 1:
            raise PieceError(
                "REDUNDANT_POWER",
                i,
                f"piece {i}: power term with exponent 1, fold coeff into slope",
            )

        if not filled:
            expected = 0.0
        else:
            prev = filled[-1]
            if piece.start <= prev.start:
                raise PieceError(
                    "ORDER", i, f"piece {i}: starts must be strictly increasing"
                )

            left_slope = prev.local_slope(piece.start)
            if left_slope > piece.slope_offset * (1 + SLOPE_RTOL):
                raise PieceError(
                    "CONVEXITY",
                    i,
                    f"convexity violated at piece {i}: incoming slope {left_slope!r}"
                    f" exceeds slope {piece.slope_offset!r}",
                )
            expected = prev.local_value(piece.start)

        if piece.value is not None and not math.isclose(
            piece.value, expected, rel_tol=1e-12, abs_tol=1e-15
        ):
            raise PieceError(
                "CONTINUITY",
                i,
                f"discontinuity at piece {i}: value {piece.value!r},"
                f" expected {expected!r}",
            )
        filled.append(piece.copy(update={"value": expected}))

    if filled[-1].is_zero:
        raise PieceError(
            "GROWTH", len(filled), f"piece {len(filled)}: last piece must be increasing"
        )

    return filled


class OrliczFunction(BaseModel):
    pieces: tuple[PhiPiece, ...]
    a_phi_cache: float = 0.0
    sai_cache: tuple[tuple[float, float], ...] = ()

    _starts: np.ndarray = PrivateAttr()
    _values: np.ndarray = PrivateAttr()
    _slopes: np.ndarray = PrivateAttr()
    _coeffs: np.ndarray = PrivateAttr()
    _exponents: np.ndarray = PrivateAttr()

    class Config:
        allow_mutation = False

    def __init__(self, **data) -> None:
        super().__init__(**data)
        self._starts = np.array([p.start for p in self.pieces], dtype=float)
        self._values = np.array([p.value or 0.0 for p in self.pieces], dtype=float)
        self._slopes = np.array([p.slope_offset for p in self.pieces], dtype=float)
        self._coeffs = np.array([p.coeff for p in self.pieces], dtype=float)
        self._exponents = np.array([p.exponent for p in self.pieces], dtype=float)

    @validator("pieces", pre=True)
    def validate_pieces(cls, value: list) -> list[PhiPiece]:
        pieces = [
            p if isinstance(p, PhiPiece) else PhiPiece.parse_obj(p) for p in value
        ]
        return check_pieces(pieces)

    @root_validator(skip_on_failure=True)
    def derive_caches(cls, values: dict) -> dict:
        pieces: tuple[PhiPiece, ...] = values["pieces"]
        ends = [p.start for p in pieces[1:]] + [math.inf]

        a_phi = 0.0
        for piece, end in zip(pieces, ends):
            if not piece.is_zero:
                break
            a_phi = end

        sais: list[tuple[float, float]] = []
        prev_slope: Optional[float] = None
        for piece, end in zip(pieces, ends):
            if not piece.is_affine:
                prev_slope = None
                continue
            if prev_slope is not None and piece.slope_offset == prev_slope:
                sais[-1] = (sais[-1][0], end)
            else:
                sais.append((piece.start, end))
            prev_slope = piece.slope_offset

        values["a_phi_cache"] = a_phi
        values["sai_cache"] = tuple(sais)
        return values

    @property
    def first(self) -> PhiPiece:
        return self.pieces[0]

    @property
    def table(
        self,
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """starts, values, slopes, coeffs, exponents as arrays."""
        return self._starts, self._values, self._slopes, self._coeffs, self._exponents

    @property
    def first_boundary(self) -> float:
        """Right end of the first piece (inf for a single piece)."""
        return self.pieces[1].start if len(self.pieces) > 1 else math.inf
