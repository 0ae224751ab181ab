"""Payoff clouds for fixed memory-1 strategies and their linear fits.

Tit-for-tat and always-defect pin the opponent's payoff to a line; the
discounted tit-for-tat line tilts away from the diagonal and straightens
onto it as the discount approaches one.
"""
import numpy as np

from opshape.analysis import payoff_region, tft_line, zd_fit
from opshape.games import make_game, named_policy

rng = np.random.default_rng(0)
for discount in (0.96, 0.999, 1 - 1e-9):
    game = make_game("ipd", discount=discount)
    for name in ("tft", "alld"):
        fit = zd_fit(payoff_region(game, named_policy(name), 2048, rng))
        print(f"discount {discount:<12.10g} {name:5s} slope {fit.slope:9.6f} intercept {fit.intercept:9.6f} "
              f"R2 {fit.r2:.6f} favors {fit.favored}")
    print(f"{'':23s}closed-form tft line: slope {tft_line(discount)[0]:.6f} intercept {tft_line(discount)[1]:.6f}")

cloud = payoff_region(make_game("ipd"), np.random.default_rng(1).standard_normal(5), 4096, rng)
print(f"\nrandom subject: subject payoff spans [{cloud.v_subject.min():.2f}, {cloud.v_subject.max():.2f}], "
      f"R2 of best line {zd_fit(cloud).r2:.3f}")
