"""Ready-made scenario presets.

``congested_day`` reproduces the studied situation: an afternoon surge
between 15:00 and 18:00 pressing two calibrated gates, worth rescheduling.
``calm_day`` is the control: the same port with demand the gates absorb
comfortably, where the planner should leave everything alone.
"""

from __future__ import annotations

from portslot.domain import (CostConstants, DemandConfig, GaConfig, Scenario,
                             TerminalConfig, TrafficConfig)


def congested_day(seed: int = 7) -> Scenario:
    return Scenario(
        name="congested-afternoon",
        seed=seed,
        history_days=40,
        forecast_source="actual",
        terminals=[
            TerminalConfig(name="T1", service_rate=2.5, base_cranes=4, s_max=8,
                           crane_benefit_eur=80.0, demand_share=0.7),
            # T2 is bigger but has slower lanes: its afternoon peak cannot
            # be staffed away, only rescheduled away
            TerminalConfig(name="T2", service_rate=1.9, base_cranes=4, s_max=8,
                           crane_benefit_eur=80.0, demand_share=0.85),
        ],
        costs=CostConstants(alpha=1.0),
        demand=DemandConfig(
            vessel_calls_per_day=6.4,
            road_share=0.011,
            peak_hours=(15, 16, 17),
            peak_boost=1.5,
        ),
        traffic=TrafficConfig(background_peak_veh_h=2700.0),
        ga=GaConfig(population=40, generations=50, seed=11),
    )


def calm_day(seed: int = 7) -> Scenario:
    return Scenario(
        name="calm-control",
        seed=seed,
        history_days=40,
        forecast_source="actual",
        working_hours=(7, 19),
        terminals=[
            # fast single-lane gates; no crane slack to trade either way
            TerminalConfig(name="T1", service_rate=10.0, base_cranes=1, s_max=2,
                           crane_benefit_eur=80.0, demand_share=0.70),
            TerminalConfig(name="T2", service_rate=10.0, base_cranes=1, s_max=2,
                           crane_benefit_eur=80.0, demand_share=0.65),
        ],
        costs=CostConstants(alpha=1.0),
        demand=DemandConfig(
            vessel_calls_per_day=10.5,
            road_share=0.004,
        ),
        traffic=TrafficConfig(background_peak_veh_h=2200.0),
        ga=GaConfig(population=40, generations=50, seed=11),
    )


PRESETS = {"congested": congested_day, "calm": calm_day}


def preset(name: str, seed: int = 7) -> Scenario:
    try:
        return PRESETS[name](seed)
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
