from typing import Any

from pydantic import ValidationError

from ces_orlicz.modular.models import GeometricTail, Sequence


class SequenceException(Exception):
    def __init__(self, **kwargs: Any) -> None:
        super().__init__(kwargs.get("message"))
        self.code: str = kwargs.get("code", "SYNTAX")


def parse_sequence(text: str) -> Sequence:
    """
    Parse `head <real> ...` with an optional `tail c=<real> gamma=<real>` line.
    """

    head: list[float] = []
    tail: dict[str, float] = {}
    seen_head = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue

        keyword, *tokens = line.split()
        try:
            if keyword == "head" and not seen_head:
                head = [float(token) for token in tokens]
                seen_head = True
            elif keyword == "tail" and not tail:
                for token in tokens:
                    key, sep, value = token.partition("=")
                    if not sep or key not in ("c", "gamma"):
                        raise ValueError(f"unknown tail field {token!r}")
                    tail[key] = float(value)
                if tail.keys() != {"c", "gamma"}:
                    raise ValueError("tail needs c= and gamma=")
            else:
                raise ValueError(f"unexpected {keyword!r}")
        except ValueError as err:
            raise SequenceException(message=f"line {lineno}: {err}", code="SYNTAX")

    if not seen_head:
        raise SequenceException(message="missing 'head' line", code="SYNTAX")

    try:
        return Sequence(
            head=tuple(head), tail=GeometricTail.parse_obj(tail) if tail else None
        )
    except ValidationError as err:
        raise SequenceException(
            message="; ".join(e["msg"] for e in err.errors()), code="SYNTAX"
        )


def format_sequence(x: Sequence) -> str:
    lines = ["head " + " ".join(f"{v:.17g}" for v in x.head)]
    if x.tail is not None:
        lines.append(f"tail c={x.tail.c:.17g} gamma={x.tail.gamma:.17g}")
    return "\n".join(line.rstrip() for line in lines) + "\n"


def coordinate(x: Sequence, i: int) -> float:
    """x(i), 1-based."""
    if i < 1:
        raise IndexError("coordinates are 1-based")
    m = len(x.head)
    if i <= m:
        return x.head[i - 1]
    if x.tail is None:
        return 0.0
    return x.tail.c * x.tail.gamma ** (i - m)


def materialize(x: Sequence, k: int) -> list[float]:
    return [coordinate(x, i) for i in range(1, k + 1)]


def _rebased(x: Sequence, m: int) -> float:
    """Tail coefficient when the head is extended to length m."""
    if x.tail is None:
        return 0.0
    return x.tail.c * x.tail.gamma ** (m - len(x.head))


def scale(x: Sequence, c: float) -> Sequence:
    if c == 0:
        return Sequence()
    tail = None if x.tail is None else GeometricTail(c=c * x.tail.c, gamma=x.tail.gamma)
    return Sequence(head=tuple(c * v for v in x.head), tail=tail)


def add(x: Sequence, y: Sequence) -> Sequence:
    if x.tail is not None and y.tail is not None and x.tail.gamma != y.tail.gamma:
        raise SequenceException(
            message="sum of geometric tails with different ratios is not representable",
            code="SEQUENCE_ALGEBRA",
        )

    m = max(len(x.head), len(y.head))
    head = tuple(a + b for a, b in zip(materialize(x, m), materialize(y, m)))
    gamma = (x.tail or y.tail).gamma if (x.tail or y.tail) else None
    if gamma is None:
        return Sequence(head=head)
    return Sequence(
        head=head, tail=GeometricTail(c=_rebased(x, m) + _rebased(y, m), gamma=gamma)
    )


def midpoint(x: Sequence, y: Sequence) -> Sequence:
    return scale(add(x, y), 0.5)


def truncate(x: Sequence, k: int) -> Sequence:
    """(x(1), ..., x(k), 0, 0, ...)"""
    if x.tail is None and k >= len(x.head):
        return x
    return Sequence(head=tuple(materialize(x, k)))


def drop_head(x: Sequence, n: int) -> Sequence:
    """(0, ..., 0, x(n+1), x(n+2), ...)"""
    m = len(x.head)
    if n < m:
        return Sequence(head=(0.0,) * n + x.head[n:], tail=x.tail)
    if x.tail is None:
        return Sequence()
    return Sequence(
        head=(0.0,) * n, tail=GeometricTail(c=_rebased(x, n), gamma=x.tail.gamma)
    )


def is_nonnegative(x: Sequence) -> bool:
    return all(v >= 0 for v in x.head) and (x.tail is None or x.tail.c > 0)


def is_zero(x: Sequence) -> bool:
    return x.tail is None and all(v == 0 for v in x.head)


def dominates(y: Sequence, x: Sequence) -> bool:
    """|x(i)| <= |y(i)| for every i."""
    m = max(len(x.head), len(y.head))
    if any(abs(a) > abs(b) for a, b in zip(materialize(x, m), materialize(y, m))):
        return False
    if x.tail is None:
        return True
    if y.tail is None:
        return False

    cx, cy = abs(_rebased(x, m)), abs(_rebased(y, m))
    return x.tail.gamma <= y.tail.gamma and cx * x.tail.gamma <= cy * y.tail.gamma


def differs_in_modulus(x: Sequence, y: Sequence) -> bool:
    """Some coordinate with |x(i)| != |y(i)|."""
    m = max(len(x.head), len(y.head)) + 1
    if any(abs(a) != abs(b) for a, b in zip(materialize(x, m), materialize(y, m))):
        return True
    # equal moduli at m + 1 and equal ratios leave identical tails
    gx = x.tail.gamma if x.tail else None
    gy = y.tail.gamma if y.tail else None
    return gx != gy
