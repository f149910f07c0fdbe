"""Regenerate the FCIDUMP fixtures under crates/core/tests/fixtures.

Requires pyscf. Writes one FCIDUMP per system plus reference.json holding
pyscf's RHF and FCI energies for cross-checking.
"""
import json
import os

from pyscf import fci, gto, scf
from pyscf.tools import fcidump

OUT = os.path.join(os.path.dirname(__file__), "..", "crates", "core", "tests", "fixtures")

SYSTEMS = {
    "h2": "H 0 0 0; H 0 0 0.74",
    "h4_chain": "H 0 0 0; H 0 0 1.0; H 0 0 2.0; H 0 0 3.0",
    "h2o": "O 0 0 0.1173; H 0 0.7572 -0.4692; H 0 -0.7572 -0.4692",
}


def main():
    refs = {}
    for name, atoms in SYSTEMS.items():
        mol = gto.M(atom=atoms, basis="sto-3g", symmetry=False, verbose=0)
        mf = scf.RHF(mol)
        mf.conv_tol = 1e-12
        e_hf = mf.kernel()
        e_fci, _ = fci.FCI(mf).kernel()
        fcidump.from_scf(mf, os.path.join(OUT, f"{name}.fcidump"), tol=1e-15)
        refs[name] = {
            "n_orbitals": int(mf.mo_coeff.shape[1]),
            "n_electrons": int(mol.nelectron),
            "e_hf": float(e_hf),
            "e_fci": float(e_fci),
        }
    with open(os.path.join(OUT, "reference.json"), "w") as f:
        json.dump(refs, f, indent=2, sort_keys=True)
        f.write("\n")


if __name__ == "__main__":
    main()
