"""Monte-Carlo laboratory for particle systems with critical singular interactions."""

import json as _json

from ._core import (
    BoundFlavor,
    CritmcError,
    EtaProfile,
    KernelSpec,
    MollifiedKernel,
    bessel_dimension,
    bessel_hit_probability,
    estimate_form_bound,
    estimate_multiparticle_hardy,
    eval_drift,
    heat_kernel_envelope,
    invariant_density,
    lifted_div_bound,
    lifted_form_bound,
    lifted_mf_bound,
    lifted_power_bound,
    lyapunov_residual,
    mollify,
    paper_hardy_constant,
    psi_integrability,
    run_pair_ensemble,
)
from ._core import run_experiment as _run_experiment_json


def run_experiment(config, workers=0):
    """Run a declarative experiment config (dict); returns the results dict."""
    out = _run_experiment_json(_json.dumps(config), workers)
    out["results"] = _json.loads(out.pop("results_json"))
    return out


__all__ = [
    "BoundFlavor",
    "CritmcError",
    "EtaProfile",
    "KernelSpec",
    "MollifiedKernel",
    "bessel_dimension",
    "bessel_hit_probability",
    "estimate_form_bound",
    "estimate_multiparticle_hardy",
    "eval_drift",
    "heat_kernel_envelope",
    "invariant_density",
    "lifted_div_bound",
    "lifted_form_bound",
    "lifted_mf_bound",
    "lifted_power_bound",
    "lyapunov_residual",
    "mollify",
    "paper_hardy_constant",
    "psi_integrability",
    "run_experiment",
    "run_pair_ensemble",
]
