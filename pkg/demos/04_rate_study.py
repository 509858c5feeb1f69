"""Monte-Carlo decay of the empirical Sinkhorn divergence error.

Draws growing samples from fixed 2-D mixtures, compares their divergence to
a large-sample reference and fits the log-log slope, which should sit near
-1/2.  Scaled down from the full protocol so it finishes in ~2 minutes.
"""

from pathlib import Path

from sinkreg.harness import RateConfig, rate_study, save_rate_report

config = RateConfig(epsilon=0.5, sizes=(32, 64, 128, 256), replicates=12,
                    n_ref=8192, seed=0)
report = rate_study(config)

print(f"{'n':>6} {'mean |S_n - S_ref|':>20} {'sem':>12}")
for n, err, sem in zip(report.sizes, report.mean_errors, report.sems):
    print(f"{n:>6d} {err:>20.6e} {sem:>12.2e}")
print(f"\nfitted slope: {report.slope:.3f} +- {report.half_width:.3f} "
      f"(S_ref = {report.s_ref:.6f})")

out = Path(__file__).resolve().parent / "output" / "rate"
csv_path = save_rate_report(report, out)
print(f"report CSV at {csv_path}")
print(f"render with: node frontend/dist/cli.js rate --report {csv_path} "
      f"--out {out}/rate.png")
