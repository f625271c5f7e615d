from typing import List
from recordclass import RecordClass


class DiscreteSchedule(RecordClass):
    """
    The discrete noise levels sigma_1 < ... < sigma_T of a T-step generator:

        sigma_t = (sigma_min^(1/p) + t/T (sigma_max^(1/p) - sigma_min^(1/p)))^p

    Large `p` concentrates levels near sigma_min.
    """
    steps: int = 8
    p: float = 7.0
    sigma_min: float = 0.002
    sigma_max: float = 80.0

    def sigma_at(self, t: int) -> float:
        """The formula at any t in [0, T]; t = 0 yields sigma_min."""
        if (t == self.steps):
            return float(self.sigma_max)
        if (t == 0):
            return float(self.sigma_min)
        lo = self.sigma_min ** (1.0 / self.p)
        hi = self.sigma_max ** (1.0 / self.p)
        return float((lo + (t / self.steps) * (hi - lo)) ** self.p)

    def levels(self) -> List[float]:
        """sigma_1, ..., sigma_T in increasing order."""
        return [self.sigma_at(t) for t in range(1, self.steps + 1)]

    def descending(self) -> List[float]:
        return self.levels()[::-1]


def discrete_sigma(t: int, schedule: DiscreteSchedule) -> float:
    """
    Raises:
      ValueError: unless 1 <= t <= T.
    """
    if (not 1 <= t <= schedule.steps):
        raise ValueError(f'schedule index {t} outside 1..{schedule.steps}')
    return schedule.sigma_at(t)
