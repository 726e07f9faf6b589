"""Estimate the linear threshold on (0, 1) and μ* on the unit ball in R^3."""
import math
import time

from singconv.cli import NoThresholdError, estimate_linear_threshold, estimate_mu_star
from singconv.model import Geometry, power_spec


def report(label, run, unit=1.0):
    start = time.perf_counter()
    try:
        est = run()
        text = f"[{est.lo / unit:.6g}, {est.hi / unit:.6g}] after {est.iterations} solves"
    except NoThresholdError as exc:
        text = f"no threshold ({exc})"
    print(f"{label:<28} {text}  {time.perf_counter() - start:.1f} s")


def main():
    lam1 = math.pi**2
    linear = power_spec(0.5, 0.5, q=1, mu=1.0, a=0.5)
    report("λ threshold / π², interval", lambda: estimate_linear_threshold(linear, 0.9 * lam1, 1.1 * lam1), lam1)
    ball = Geometry.ball(1.0, 3)
    for a in (0.5, 1.5):
        spec = power_spec(0.5, 0.5, q=0.5, a=a, geometry=ball)
        report(f"μ*, ball, a = {a}", lambda spec=spec: estimate_mu_star(spec, 1.0, 20.0))


if __name__ == "__main__":
    main()
