"""Text format for per-variable marginals, shared by the engine and the oracle.

::

    # seed 7
    # iterations 12
    # converged true
    var 0 : 0.8000000000 0.2000000000
    var 1 : 0.5000000000 0.5000000000 FLAGGED
"""
from __future__ import annotations

DIGITS = 10


def format_marginals(marginals, flags=None, header=None) -> str:
    lines = []
    for key, value in (header or {}).items():
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"# {key} {value}")
    for i, p in enumerate(marginals):
        if p is None:
            lines.append(f"var {i} : UNDEFINED")
            continue
        body = " ".join(f"{float(x):.{DIGITS}f}" for x in p)
        flag = " FLAGGED" if flags is not None and flags[i] else ""
        lines.append(f"var {i} : {body}{flag}")
    return "\n".join(lines) + "\n"


def parse_marginals(text: str):
    """Return (header dict, list of probability lists, list of flags)."""
    header, marginals, flags = {}, [], []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition(" ")
            header[key] = value
        elif line.startswith("var "):
            _, rest = line.split(":", 1)
            toks = rest.split()
            flagged = bool(toks) and toks[-1] == "FLAGGED"
            if flagged:
                toks = toks[:-1]
            marginals.append(None if toks == ["UNDEFINED"] else [float(t) for t in toks])
            flags.append(flagged)
    return header, marginals, flags
