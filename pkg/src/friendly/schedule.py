"""The developmental plan that fades the simplifier out over training."""

from dataclasses import asdict, dataclass

SKIP_AUX_UPDATE = "skip_aux_update"
UPDATE_AUX = "update_aux"
DROPPED = "dropped"


@dataclass(frozen=True)
class SchedulePlan:
    gamma_max: int
    gamma_max_simp: int
    eta_max: float

    def __post_init__(self):
        if int(self.gamma_max) != self.gamma_max or int(self.gamma_max_simp) != self.gamma_max_simp:
            raise ValueError("gamma_max and gamma_max_simp must be integers")
        if not 1 < self.gamma_max_simp < self.gamma_max:
            raise ValueError(
                f"need 1 < gamma_max_simp < gamma_max, got {self.gamma_max_simp} and {self.gamma_max}")
        if not self.eta_max > 0:
            raise ValueError(f"eta_max must be positive, got {self.eta_max}")

    def to_dict(self):
        return asdict(self)

    def eta(self, gamma):
        return eta_at(self, gamma)

    def phase(self, gamma):
        return phase_of(self, gamma)


def _check_gamma(plan, gamma):
    if not 1 <= gamma <= plan.gamma_max:
        raise ValueError(f"gamma must lie in [1, {plan.gamma_max}], got {gamma}")


def eta_at(plan, gamma):
    """Penalty weight on the squared perturbation at iteration ``gamma``.

    Rises from 0 at gamma = 1 along an inverted parabola and stays at
    ``eta_max`` from ``gamma_max_simp`` onwards.
    """
    _check_gamma(plan, gamma)
    r = max(1.0 - (gamma - 1) / (plan.gamma_max_simp - 1), 0.0)
    return plan.eta_max * (1.0 - r * r)


def phase_of(plan, gamma):
    _check_gamma(plan, gamma)
    if gamma == 1:
        return SKIP_AUX_UPDATE
    if gamma <= plan.gamma_max_simp:
        return UPDATE_AUX
    return DROPPED
