"""Acceptance criteria at pinned tolerances.

Each criterion prints one PASS/FAIL line (also when pytest captures output)
and asserts the computed outcome.  Two criteria fail as computed; they are
marked strict xfail so an unexpected pass is reported. Run the module
directly for just the summary lines: ``python tests/test_acceptance.py``.
"""

import math
import sys

import numpy as np
import pytest

from folverify import flows, verifier
from folverify.config import load_config
from folverify.report import report_json

# criteria that fail as computed with the default construction
EXPECTED_FAIL = {
    5: "leaf Pfaffian of gamma changes sign in the shell 0.030 < |z| < 0.032",
    8: "Y_tilde enters H_1 in the same shell",
}


def _status(rep, cid):
    return rep.get(cid).status


def crit_1(rep):
    return _status(rep, "exterior.liouville") == "pass", f"max |d(i_Y w) - w| = {rep.get('exterior.liouville').margin:.1e}"


def crit_2(rep):
    ids = ("normalize.eps_box", "normalize.outside", "normalize.homotopy")
    ok = all(_status(rep, c) == "pass" for c in ids)
    return ok, f"bit-exact on and off the boxes, min Pf along homotopy {rep.get(ids[2]).margin:.3g}"


def crit_3(rep):
    c = rep.get("kernel.closed_form")
    return c.status == "pass", f"rel {c.margin:.1e}, residual {c.detail['max_residual']:.1e} on {c.detail['instances']}"


def crit_4(rep):
    c = rep.get("kernel.loci")
    ok = c.status == "pass" and c.margin <= 1e-12 and c.detail["generic_min"] >= 1e-6
    return ok, f"loci {c.margin:.1e}, generic min {c.detail['generic_min']:.2e}"


def crit_5(rep):
    g, ctl = rep.get("membership.gamma"), rep.get("kernel.origin_control")
    ok = g.status == "pass" and g.margin > 1e-6 and ctl.status == "pass" and ctl.margin <= 1e-9
    return ok, f"min |Pf| {g.margin:.1e} (sign changes {g.detail['sign_changes']}), control {ctl.margin:.1e}"


def crit_6(rep):
    c, g = rep.get("build.plateau_dalpha"), rep.get("build.gamma_outside")
    ok = c.status == g.status == "pass" and c.margin == 0.0 and g.margin == 0.0
    return ok, f"ω''_1 = dα on {c.detail['points']} plateau points, γ = ω''_1 for |z| >= delta_bar: {g.status}"


def crit_7(rep):
    r, cl, rc = rep.get("flows.rotation"), rep.get("flows.closed_orbits"), rep.get("flows.rational_control")
    ok = (r.margin <= 1e-3 and cl.status == "pass" and cl.detail["suspected_closed"] == 0
          and rc.status == "pass" and rc.detail["suspected_closed"] > 0)
    return ok, f"|rot - c| {r.margin:.1e}, irrational min return {cl.margin:.2e}, rational closes {rc.margin:.1e}"


def crit_8(rep):
    ri, yt = rep.get("transversality.rho_identity"), rep.get("transversality.y_tilde")
    rng = np.random.default_rng(0)
    Z = rng.normal(size=(10000, 4))
    Z *= (rng.uniform(0.05, 1.0, 10000) / np.linalg.norm(Z, axis=1))[:, None]
    abs_err = float(np.max(np.abs(flows.d_rho_of_Y(Z) + 0.5 / np.linalg.norm(Z, axis=1))))
    ok = ri.status == "pass" and abs_err <= 1e-12 and yt.status == "pass"
    return ok, f"identity {abs_err:.1e}, Y_tilde not in H_1: {yt.status} (sign changes {yt.detail.get('sign_changes')})"


def crit_9(rep, rep2):
    same = report_json(rep) == report_json(rep2)
    f = rep.get("flows.integrator_order").margin
    return same and f >= 16.0, f"reports identical: {same}, order factor {f:.1f}"


CRITERIA = {k: globals()[f"crit_{k}"] for k in range(1, 10)}


@pytest.fixture(scope="module")
def reports():
    cfg = load_config()
    return verifier.run_verify(cfg), verifier.run_verify(cfg)


def _line(k, ok, msg):
    return f"criterion {k}: {'PASS' if ok else 'FAIL'}  {msg}"


@pytest.mark.parametrize("k", [pytest.param(k, marks=pytest.mark.xfail(strict=True, reason=EXPECTED_FAIL[k]))
                               if k in EXPECTED_FAIL else k for k in CRITERIA])
def test_criterion(k, reports, capsys):
    rep, rep2 = reports
    ok, msg = CRITERIA[k](rep, rep2) if k == 9 else CRITERIA[k](rep)
    with capsys.disabled():
        print("\n" + _line(k, ok, msg))
    assert ok, msg


def test_expected_failures_pass_on_inner_ball(reports):
    rep, _ = reports
    assert rep.get("membership.gamma_inner").status == "pass"
    assert rep.get("transversality.y_tilde_inner").status == "pass"
    assert math.isclose(rep.get("membership.gamma").detail["witness_radius"], 0.031, abs_tol=2e-3)


if __name__ == "__main__":
    cfg = load_config()
    r1, r2 = verifier.run_verify(cfg), verifier.run_verify(cfg)
    res = [(k, *(f(r1, r2) if k == 9 else f(r1))) for k, f in CRITERIA.items()]
    for k, ok, msg in res:
        print(_line(k, ok, msg))
    sys.exit(0 if all(ok for _, ok, _ in res) else 1)
