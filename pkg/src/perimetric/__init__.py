"""Variational rovibrational energies of H2+, D2+ and HD+ in perimetric coordinates."""
