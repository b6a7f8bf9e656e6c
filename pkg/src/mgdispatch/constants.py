"""Numerical tolerances and solver defaults, in one place.

All tolerances are absolute unless noted. Powers are kW, energies kWh,
money $, matching the unit conventions of the scenario data.
"""

# LP/MILP engine
FEASIBILITY_TOL = 1e-7     # max primal constraint/bound violation accepted as feasible
INTEGRALITY_TOL = 1e-6     # max |x - round(x)| accepted as integral
MIP_GAP = 1e-6             # relative branch-and-bound gap at termination
DUALITY_TOL = 1e-6         # |primal - dual| <= DUALITY_TOL * (1 + |primal|)
PIVOT_TOL = 1e-9           # smallest pivot magnitude accepted in the simplex
DEGENERATE_STREAK = 50     # degenerate pivots before falling back to Bland's rule
REFACTOR_INTERVAL = 64     # simplex pivots between basis refactorizations

# Column-generation loop
OMEGA_TOL = 1e-4           # kW-equivalent subproblem slack below which CG stops
CG_MAX_ITERATIONS = 50

# Problems at or below this many (rows + columns) default to the built-in
# simplex/branch-and-bound engine; larger ones to the scipy (HiGHS) backend.
AUTO_BACKEND_THRESHOLD = 1000

# Vertex-enumeration oracle guard: 2**dim inner LP solves
ENUM_MAX_DIMENSION = 22

# Schedule extraction gates
BALANCE_TOL = 1e-6         # kW residual allowed on power-balance rows
ENERGY_TOL = 1e-6          # kWh residual allowed on terminal-energy rows
COST_BREAKDOWN_TOL = 1e-6  # $ mismatch allowed between cost lines and total
