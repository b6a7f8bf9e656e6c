"""Multi-timescale robust unit commitment and dispatch for a solar-storage
microgrid: scenario model, MILP formulation, exact desk-scale solver,
column-generation robust loop, and a rolling real-time dispatch simulator.
"""

__version__ = "0.1.0"
