#!/usr/bin/env python3
"""External solver for rlplift: `scipy_solver.py MODEL.mps SOLUTION`."""
import sys

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix


def read_mps(path):
    section = None
    rows, kinds, obj = {}, [], None
    cols, c, entries, rhs, bounds = {}, [], [], {}, {}
    for line in open(path):
        if not line.strip() or line.startswith("*"):
            continue
        if not line[0].isspace():
            section = line.split()[0]
            continue
        f = line.split()
        if section == "ROWS":
            if f[0] == "N":
                obj = f[1]
            else:
                rows[f[1]] = len(kinds)
                kinds.append(f[0])
        elif section == "COLUMNS":
            j = cols.setdefault(f[0], len(cols))
            if j == len(c):
                c.append(0.0)
            for r, v in zip(f[1::2], f[2::2]):
                if r == obj:
                    c[j] = float(v)
                else:
                    entries.append((rows[r], j, float(v)))
        elif section == "RHS":
            for r, v in zip(f[1::2], f[2::2]):
                if r in rows:
                    rhs[rows[r]] = float(v)
        elif section == "BOUNDS":
            kind, name = f[0], f[2]
            lo, hi = bounds.get(name, (0.0, None))
            v = float(f[3]) if len(f) > 3 else None
            if kind == "FR":
                lo, hi = None, None
            elif kind == "MI":
                lo = None
            elif kind == "PL":
                hi = None
            elif kind == "UP":
                hi = v
            elif kind == "LO":
                lo = v
            elif kind == "FX":
                lo = hi = v
            bounds[name] = (lo, hi)
    names = sorted(cols, key=cols.get)
    m, n = len(kinds), len(names)
    r, j, v = zip(*entries) if entries else ((), (), ())
    a = coo_matrix((v, (r, j)), shape=(m, n)).tocsr()
    b = np.array([rhs.get(i, 0.0) for i in range(m)])
    ub_rows, ub_sign, eq_rows = [], [], []
    for i, k in enumerate(kinds):
        if k == "E":
            eq_rows.append(i)
        else:
            ub_rows.append(i)
            ub_sign.append(1.0 if k == "L" else -1.0)
    s = np.array(ub_sign)
    args = {}
    if ub_rows:
        args["A_ub"] = a[ub_rows].multiply(s[:, None]).tocsr()
        args["b_ub"] = b[ub_rows] * s
    if eq_rows:
        args["A_eq"] = a[eq_rows]
        args["b_eq"] = b[eq_rows]
    bnds = [bounds.get(nm, (0.0, None)) for nm in names]
    return names, np.array(c), args, bnds


def main():
    model, out = sys.argv[1], sys.argv[2]
    names, c, args, bnds = read_mps(model)
    res = linprog(c, bounds=bnds, method="highs", **args)
    with open(out, "w") as f:
        if res.status == 2:
            f.write("infeasible\n")
        elif res.status == 3:
            f.write("unbounded\n")
        elif res.status == 0:
            for nm, v in zip(names, res.x):
                f.write(f"{nm} {float(v)!r}\n")
        else:
            sys.exit(res.message)


if __name__ == "__main__":
    main()
