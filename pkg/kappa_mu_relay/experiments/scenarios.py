"""Named sweep scenarios reproducing the figures of the numerical study.

Every scenario starts from the SystemParams baseline (xi1 = xi2 = 2.7,
d1 = d2 = 4 m, eta = 1, c_th = 0.2 bits/s/Hz, sigma_d2 = 0.01 W). The same
documents ship as JSON under scenarios/ at the repository root.

None of them pins a fixed truncation: twenty terms from q = 0 drop the
Poisson(kappa mu) tail, which is visible once kappa mu exceeds about 4.
Pass --fixed_terms 20 to reproduce the truncated curves.
"""

from typing import Any

import immutabledict
import numpy as np

from .sweep import SweepSpec

_ALPHA_GRID = [round(float(a), 2) for a in np.linspace(0.01, 0.99, 99)]
_HALF_STEPS = [0.5 * i for i in range(1, 11)]


def _nakagami(m: float) -> dict[str, float]:
    return {"kappa": 0.0, "mu": m, "omega": 1.0}


SCENARIOS: immutabledict.immutabledict[str, immutabledict.immutabledict[str, Any]] = (
    immutabledict.immutabledict(
        {
            # Outage surface over identical kappa and mu on all links. The 0.01
            # noise figure is read as a standard deviation here; as a variance
            # it puts upsilon / a near 89 and the whole surface at 1.
            "fig1_fading": immutabledict.immutabledict(
                {
                    "name": "fig1_fading",
                    "base": {"alpha": 0.06, "ps": 0.5, "sigma_d2": 1e-4},
                    "axes": [
                        {"label": "kappa", "values": _HALF_STEPS},
                        {"label": "mu", "values": _HALF_STEPS},
                    ],
                    "methods": ["unified"],
                    "mc_trials": 100000,
                }
            ),
            # Nakagami-m outage against alpha; m = 1 is the Rayleigh curve.
            "fig2a_nakagami_alpha": immutabledict.immutabledict(
                {
                    "name": "fig2a_nakagami_alpha",
                    "base": {"ps": 1.0},
                    "axes": [
                        {"label": "m", "targets": ["mu"], "values": [1.0, 2.0, 3.0]},
                        {"label": "alpha", "values": _ALPHA_GRID},
                    ],
                    "methods": ["nakagami", "rayleigh"],
                }
            ),
            # Rice outage against alpha for several K-factors.
            "fig2b_rice_alpha": immutabledict.immutabledict(
                {
                    "name": "fig2b_rice_alpha",
                    "base": {"ps": 1.0},
                    "axes": [
                        {"label": "K", "targets": ["kappa"], "values": [0.0, 1.0, 3.0, 5.0]},
                        {"label": "alpha", "values": _ALPHA_GRID},
                    ],
                    "methods": ["rice"],
                }
            ),
            # Source power against the loop-back Nakagami parameter.
            "fig3_loopback": immutabledict.immutabledict(
                {
                    "name": "fig3_loopback",
                    "base": {
                        "c_th": 0.3,
                        "alpha": 0.6,
                        "d1": 4.0,
                        "d2": 2.0,
                        "link1": _nakagami(5.0),
                        "link2": _nakagami(5.0),
                    },
                    "axes": [
                        {"label": "Ps", "targets": ["ps"], "values": [0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0]},
                        {"label": "m3", "targets": ["link3.mu"], "values": [1.0, 2.0, 3.0, 5.0]},
                    ],
                    "methods": ["nakagami"],
                    "mc_trials": 200000,
                }
            ),
            # End-to-end distance with d1 = 2 d2.
            "fig3_distance": immutabledict.immutabledict(
                {
                    "name": "fig3_distance",
                    "base": {
                        "c_th": 0.3,
                        "alpha": 0.6,
                        "ps": 1.0,
                        "link1": _nakagami(5.0),
                        "link2": _nakagami(5.0),
                    },
                    "axes": [
                        {
                            "label": "d2",
                            "targets": ["d1", "d2"],
                            "factors": [2.0, 1.0],
                            "values": [1.0, 1.5, 2.0, 2.5, 3.0],
                        },
                        {"label": "m3", "targets": ["link3.mu"], "values": [1.0, 2.0, 3.0]},
                    ],
                    "methods": ["nakagami"],
                }
            ),
            # Optimal alpha against the hop Nakagami parameter for several eta.
            "fig4_optimal_alpha": immutabledict.immutabledict(
                {
                    "name": "fig4_optimal_alpha",
                    "base": {"ps": 1.0, "link3": _nakagami(3.0)},
                    "axes": [
                        {"label": "eta", "values": [0.5, 0.7, 1.0]},
                        {
                            "label": "m",
                            "targets": ["link1.mu", "link2.mu"],
                            "values": [1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
                        },
                    ],
                    "methods": ["nakagami"],
                    "optimize_alpha": True,
                }
            ),
        }
    )
)


def scenario_names() -> list[str]:
    return sorted(SCENARIOS)


def scenario_spec(name: str) -> SweepSpec:
    """Builds the SweepSpec of a named scenario.

    Raises:
      KeyError: naming the scenario and the known ones.
    """
    try:
        document = SCENARIOS[name]
    except KeyError as exc:
        raise KeyError(f"unknown scenario {name!r}; known: {', '.join(scenario_names())}") from exc
    return SweepSpec.model_validate(dict(document))
