"""Shared builders for the test suite."""
from __future__ import annotations

from chargescope.domain import BatterySample, Charger, Health, Screen


def make_sample(
    timestamp: float = 0.0,
    user_id: str = "u1",
    model: str = "model-a",
    soc: int = 50,
    voltage: int = 4000,
    temperature: float = 29.0,
    health: Health = Health.GOOD,
    charger: Charger = Charger.AC,
    charging: bool = True,
    screen: Screen = Screen.OFF,
) -> BatterySample:
    return BatterySample(
        timestamp=timestamp,
        user_id=user_id,
        model=model,
        soc=soc,
        voltage=voltage,
        temperature=temperature,
        health=health,
        charger=charger,
        charging=charging,
        screen=screen,
    )


def ramp_samples(
    soc_values,
    dt: float = 36.0,
    voltage_of=None,
    temperature_of=None,
    start: float = 0.0,
    **kwargs,
) -> list[BatterySample]:
    """One sample per SOC value, spaced ``dt`` seconds apart."""
    samples = []
    t = start
    for soc in soc_values:
        samples.append(
            make_sample(
                timestamp=t,
                soc=soc,
                voltage=voltage_of(soc) if voltage_of else 4000,
                temperature=temperature_of(soc) if temperature_of else 29.0,
                **kwargs,
            )
        )
        t += dt
    return samples
