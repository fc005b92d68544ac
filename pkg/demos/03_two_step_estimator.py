"""Running the two-step l1 estimator on a simulated saturated system."""
import numpy as np

from tswlad import TSWLAD, ARProcess, Box, Gaussian, GaussianMixture, SaturationSpec, SystemSpec, simulate_trajectory

theta = np.array([5.0, 0.7, 2.0, -0.1, -0.6, -8.0])
A = np.diag([0.99, 0.5, 0.9, 0.01, 0.3, 0.7])
regressors = ARProcess(A, [1, 5, 5, 5, 5, 5], [0, 0.25, 0.25, 0.25, 0.25, 0.25])
spec = SaturationSpec(0.0, 0.0, 25.0, 25.0)
system = SystemSpec(theta, regressors, GaussianMixture(0.1), spec)

data = simulate_trajectory(system, 5000, 1)
ys = np.array([d.y for d in data])
print(f"\n{len(data)} observations; {np.mean(ys == 0):.0%} at the lower clip, "
      f"{np.mean(ys == 25):.0%} at the upper clip, {np.mean((ys > 0) & (ys < 25)):.0%} exact")

est = TSWLAD(Gaussian(1.0), Box(np.zeros(6), 10.0))
print("\n     k   |theta - theta_k|   |theta - theta_bar_k|")
for k, datum in enumerate(data, 1):
    est.update(datum)
    if k in (10, 100, 1000, 5000):
        print(f"{k:6d}   {np.linalg.norm(theta - est.theta):17.4f}   {np.linalg.norm(theta - est.theta_bar):20.4f}")

print("\nStep 1 uses the density infimum over a wide range, so its gain is tiny here:")
print("  last Step 1 slope:", est.state.step1.slope, "  last Step 2 slope:", round(est.state.step2.slope, 4))
print("Step 2 swaps in a divided difference anchored at the Step 1 estimate, which keeps its gain useful.")
print("\nfinal estimate:", np.round(est.theta, 3))
print("truth:         ", theta)
