"""Symmetry and conservation-law workbench for phi_tt + G(phi_s) phi_ss - H(phi) = 0."""
