"""Saturated observations and the noise laws behind them."""
import numpy as np

from tswlad import Gaussian, GaussianMixture, SaturationSpec, classify_regime, noise_quantile, saturate

spacer = "_" * 60

spec = SaturationSpec(0.0, 0.0, 25.0, 25.0)
print("\nA saturation map clips the linear response to [L, U] outside [l, u].")
print("spec =", spec)
for x in (-5.0, 0.0, 10.0, 25.0, 30.0):
    print(f"  x = {x:6.1f}  ->  S(x) = {saturate(x, spec):5.1f}   regime {classify_regime(x, spec).value}")

print("\nAt a boundary the saturated regimes win: S(0) = L, so x = 0 is 'lower'.")
print(spacer)

g = Gaussian(1.0)
m = GaussianMixture(0.2)
print("\nNoise models expose F and f.  The mixture hides a wide component with variance 10.")
for x in (0.0, 1.0, 3.0):
    print(f"  x = {x}: Gaussian F = {g.cdf(x):.7f}, f = {g.pdf(x):.7f};  mixture F = {m.cdf(x):.7f}, f = {m.pdf(x):.7f}")

print("\nQuantiles come from bisection on F:")
for p in (0.5, 0.9, 0.975):
    print(f"  p = {p}: Gaussian {noise_quantile(g, p):.7f}   mixture {noise_quantile(m, p):.7f}")

rng = np.random.default_rng(0)
x = m.sample(rng, 100_000)
print("\nSample variance of 1e5 mixture draws:", round(float(x.var()), 3), " (theory", m.variance, ")")
print("Fraction beyond |3|:", float(np.mean(np.abs(x) > 3)), " vs Gaussian", float(2 * g.cdf(-3.0)))
