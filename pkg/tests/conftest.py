import math


def polar_angle_deviation(beta1: float, beta1_p: float, gamma: float) -> float:
    """Distance of (beta1, beta1') from the stationary polar angles, modulo
    the simultaneous pi shift of both angles and 2*pi wraps."""
    target1 = math.atan(math.cos(gamma))
    target2 = math.pi - target1
    two_pi = 2.0 * math.pi
    best = math.inf
    for k in (0, 1):
        d1 = (beta1 + k * math.pi - target1 + math.pi) % two_pi - math.pi
        d2 = (beta1_p + k * math.pi - target2 + math.pi) % two_pi - math.pi
        best = min(best, max(abs(d1), abs(d2)))
    return best
