"""Writes the expected outcome matrix for data/grids/defenses.toml.

Independent of the simulator: each cell follows from the attack's stated
precondition alone. The lure PLMN of the base scenario is not among the
subscribers' provisioned networks, so the downgrade key gate never blocks.
"""
import csv
import itertools
import sys

AXES = [
    ("suci_scheme", ["null", "probabilistic-pk"]),
    ("ca_mode", [False, True]),
    ("unauthenticated_emergency_allowed", [False, True]),
    ("capability_echo", [False, True]),
]
ATTACKS = ["supi_catch_passive", "preauth_dos_reject", "silent_downgrade", "emergency_supi_catch", "bidding_down"]
LURE_KEY_PROVISIONED = False


def render(v):
    return str(v).lower() if isinstance(v, bool) else v


def expected(k):
    ok = {
        "supi_catch_passive": k["suci_scheme"] == "null",
        "preauth_dos_reject": not k["ca_mode"],
        "silent_downgrade": not k["ca_mode"] and not LURE_KEY_PROVISIONED,
        "emergency_supi_catch": k["unauthenticated_emergency_allowed"],
        "bidding_down": not k["capability_echo"],
    }
    return ["SUCCESS" if ok[a] else "FAIL" for a in ATTACKS]


def main(out):
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["config"] + ATTACKS)
    names = [n for n, _ in AXES]
    for combo in itertools.product(*(vals for _, vals in AXES)):
        k = dict(zip(names, combo))
        label = ";".join(f"{n}={render(v)}" for n, v in k.items())
        w.writerow([label] + expected(k))


if __name__ == "__main__":
    main(sys.stdout)
