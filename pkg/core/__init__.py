# Quasi-exactly-solvable Schrödinger solver engine
