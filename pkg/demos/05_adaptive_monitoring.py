"""Monitor a stream of snapshots and correct the state estimate online.

The monitor differences each incoming snapshot against the last accepted
one, identifies any load-row bias, and re-estimates the state with the bias
removed.  Because the accepted snapshot is always clean, a persistent attack
keeps showing up in every difference and keeps being removed.
"""

import numpy as np

from gridshield import (
    AdaptiveMonitor,
    CandidateFamily,
    NoiseModel,
    PenaltyConfig,
    build_topology,
    calibrate_gamma_gic,
    gic_select,
    ieee30,
    sample_attack,
    simulate_load_change,
)
from gridshield.grid_model import initial_state


def main():
    rng = np.random.default_rng(13)
    network = ieee30()
    topology = build_topology(network)
    noise = NoiseModel(0.01)

    gamma = calibrate_gamma_gic(topology, noise, 0.05, 400, rng)
    family = CandidateFamily.enumerate_from(topology.restricted_states, k_max=6)
    penalty = PenaltyConfig(zeta=2.0, gamma_gic=gamma)

    def identifier(dz_load):
        return gic_select(topology, dz_load, family, penalty, noise.sigma_e2)

    theta = initial_state(network)
    z0 = topology.h @ theta + noise.sample_snapshot(rng, topology.n_measurements)
    monitor = AdaptiveMonitor(topology, noise, identifier, z0)

    attack = sample_attack(topology, k_a=2, attack_norm=1.2, rng=rng)
    attacked_buses = [topology.col_map[j] for j in attack.support]
    print(f"attack from step 4 on buses {attacked_buses}, "
          f"values {np.round(attack.values, 3)}")
    print(f"\n{'step':>4}  {'attack':>6}  {'flagged':>7}  "
          f"{'buses':>10}  {'state error':>11}")

    for step in range(1, 9):
        theta = simulate_load_change(network, theta, 0.05, rng)
        z = topology.h @ theta + noise.sample_snapshot(
            rng, topology.n_measurements
        )
        under_attack = step >= 4
        if under_attack:
            z = z + topology.h @ attack.c
        result = monitor.step(z)
        err = np.linalg.norm(result.estimate.theta - theta)
        buses = [topology.col_map[j] for j in result.support]
        print(f"{step:>4}  {str(under_attack):>6}  {str(result.detected):>7}  "
              f"{str(buses):>10}  {err:>11.4f}")

    print("\nthe corrected estimate tracks the true state even though the "
          "attack persists;")
    print("every accepted snapshot is cleaned, so each new difference "
          "exposes the bias again.")


if __name__ == "__main__":
    main()
