"""Write the IEEE 118-bus case (PYPOWER copy of the MATPOWER data) as a
MATPOWER .m case file.

usage: python3 tools/case118_to_matpower.py /path/to/pypower > data/case118.m
"""
import sys

sys.path.insert(0, sys.argv[1])
from pypower.case118 import case118  # noqa: E402


def fmt(v):
    if float(v).is_integer():
        return str(int(v))
    return repr(float(v))


def block(name, rows):
    out = [f"mpc.{name} = ["]
    for r in rows:
        out.append("\t" + "\t".join(fmt(v) for v in r) + ";")
    out.append("];")
    return "\n".join(out)


ppc = case118()
print("function mpc = case118")
print("%CASE118    Power flow data for IEEE 118 bus test case.")
print("%   Converted from IEEE CDF (ieee118cdf.txt) by cdf2matp.")
print("%   Copyright (c) 1996-2015 PSERC. BSD-style license.")
print()
print("%% MATPOWER Case Format : Version 2")
print("mpc.version = '2';")
print()
print("%%-----  Power Flow Data  -----%%")
print("%% system MVA base")
print(f"mpc.baseMVA = {fmt(ppc['baseMVA'])};")
print()
print("%% bus data")
print("%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin")
print(block("bus", ppc["bus"]))
print()
print("%% generator data")
print("%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin\tPc1\tPc2\tQc1min\tQc1max\tQc2min\tQc2max\tramp_agc\tramp_10\tramp_30\tramp_q\tapf")
print(block("gen", ppc["gen"]))
print()
print("%% branch data")
print("%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax")
print(block("branch", ppc["branch"]))
print()
print("%%-----  OPF Data  -----%%")
print("%% generator cost data")
print("%\t1\tstartup\tshutdown\tn\tx1\ty1\t...\txn\tyn")
print("%\t2\tstartup\tshutdown\tn\tc(n-1)\t...\tc0")
print(block("gencost", ppc["gencost"]))
