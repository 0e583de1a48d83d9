#!/usr/bin/env python3
"""Smoke test for the optionforge_py extension module.

Build the module and place it next to this script (or on PYTHONPATH):

    cargo build -p optionforge-py --features extension-module
    cp target/debug/liboptionforge_py.so python/optionforge_py.so
    python3 python/smoke_test.py
"""

import math
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

import optionforge_py as of


def check(condition, message):
    if not condition:
        raise AssertionError(message)
    print(f"ok: {message}")


def main():
    # Closed-form reward analysis: discriminated vs never-seen observations.
    gap, novel = of.reward_gap_analysis(8)
    check(abs(gap - math.log(8)) < 1e-12, f"reward gap ln 8 = {gap:.6f}")
    check(novel == 0.0, "never-seen observations earn zero")

    # Environments expose their shape.
    env = of.Env.point_mass(3)
    check(env.n_states == 9, f"point_mass(3) has {env.n_states} states")
    check(env.grid_shape == (3, 3), f"grid shape {env.grid_shape}")
    chain = of.Env.chain(5, slip=0.1)
    check(chain.n_states == 5, "chain(5) has 5 states")
    try:
        of.Env.four_rooms(4)  # must be odd
        raise AssertionError("four_rooms(4) should be rejected")
    except ValueError:
        print("ok: invalid environment size raises ValueError")

    # A short training run: records accumulate, rewards stay in bounds.
    cfg = of.TrainConfig("diayn", env, n_options=4)
    cfg.episodes = 600
    cfg.horizon = 10
    cfg.seed = 1
    result = of.train(cfg)
    records = result.records()
    check(len(records) == 60, f"{len(records)} metric records")
    last = result.last
    check(last.episode == 600, f"final record at episode {last.episode}")
    check(
        0.0 <= last.mean_r_intrinsic <= math.log(4) + 1e-9,
        f"mean intrinsic reward {last.mean_r_intrinsic:.4f} within [0, ln 4]",
    )

    # The exact oracle sees the information the options encode.
    ck = result.checkpoint
    mi = ck.exact_mi()
    cap = ck.channel_capacity()
    check(0.0 <= mi <= math.log(4) + 1e-12, f"exact MI {mi:.4f} in bounds")
    check(cap.capacity >= mi - 1e-6, f"capacity {cap.capacity:.4f} >= MI {mi:.4f}")
    check(cap.converged, f"capacity converged in {cap.iterations} iterations")
    check(abs(sum(cap.prior) - 1.0) < 1e-9, "capacity prior is normalized")

    # Checkpoints round-trip through disk.
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "smoke-checkpoint.kv"
        ck.save(path)
        back = of.Checkpoint.load(path)
        check(back.render() == ck.render(), "checkpoint text round-trips")
        check(back.algorithm == "diayn", f"algorithm {back.algorithm}")
        check(back.exact_mi() == mi, "reloaded checkpoint gives identical MI")

    # Evaluation rolls out each option and reports discrimination stats.
    ev = ck.evaluate(episodes=20, greedy=True)
    check(len(ev.per_option) == 4, f"{len(ev.per_option)} options evaluated")
    check(0.0 <= ev.empirical_mi <= math.log(4) + 1e-9, "empirical MI in bounds")
    check(0.0 < ev.coverage <= 1.0, f"coverage {ev.coverage:.2f}")

    # Plug-in estimator on a hand-built perfectly informative sample.
    mi_hand = of.empirical_mi([(0, 0), (0, 0), (1, 1), (1, 1)], 2, 2)
    check(abs(mi_hand - math.log(2)) < 1e-12, f"plug-in MI of clean pairs {mi_hand:.6f}")

    # Determinism: same seed, same metrics.
    twin = of.train(cfg)
    check(
        twin.last.disc_loss == last.disc_loss
        and twin.checkpoint.render() == ck.render(),
        "training is reproducible for a fixed seed",
    )

    print("\nall smoke checks passed")


if __name__ == "__main__":
    main()
