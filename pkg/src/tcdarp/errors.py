"""Exception hierarchy shared by all solver modules."""


class TcdarpError(Exception):
    """Base class for every error raised by this package."""


class ParseError(TcdarpError):
    """A file could not be decoded into the expected structure."""


class ValidationError(TcdarpError):
    """An instance or plan violates a structural invariant.

    ``path`` names the offending field, e.g. ``users[3].pickup_window_am``.
    """

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


class VerificationError(TcdarpError):
    """A route or plan failed independent feasibility verification."""


class Infeasible(TcdarpError):
    """Base class for infeasibility outcomes of the routing kernel."""

    reason = "Infeasible"


class WindowViolation(Infeasible):
    reason = "WindowViolation"

    def __init__(self, stop: int):
        super().__init__(f"time window violated at stop {stop}")
        self.stop = stop


class RideTimeViolation(Infeasible):
    reason = "RideTimeViolation"

    def __init__(self, stop: int):
        super().__init__(f"maximum ride time violated at stop {stop}")
        self.stop = stop


class CapacityInfeasible(Infeasible):
    reason = "CapacityInfeasible"

    def __init__(self, leg: int, load: tuple):
        super().__init__(f"no configuration covers load {load} on leg {leg}")
        self.leg = leg
        self.load = load


class NoFeasibleInsertion(Infeasible):
    reason = "NoFeasibleInsertion"


class MissingService(TcdarpError):
    def __init__(self, user: str, period):
        super().__init__(f"request of user {user} in {period} is not served")
        self.user = user
        self.period = period


class UncoveredRequest(TcdarpError):
    def __init__(self, user: str, period):
        super().__init__(f"no pool route serves user {user} in {period}")
        self.user = user
        self.period = period


class MasterInfeasible(TcdarpError):
    """No route selection satisfies the class cap.

    ``group`` is the (user, half) whose cap exhausted the search first, or
    None when the partition itself is impossible.
    """

    def __init__(self, group, proved: bool = True):
        super().__init__(f"class cap cannot be met (first blocking group: {group})")
        self.group = group
        self.proved = proved


class SizeLimit(TcdarpError):
    """An oracle was asked to enumerate an input above its size limit."""
