"""Reliability, risk and reactive resiliency of repairable systems.

Submodules
----------
lifetime
    Time-to-failure distributions and bathtub hazard profiles.
risk
    Scenario risk, system risk and the reliability proxy.
pointproc
    HPP / RP / NHPP / GRP failure processes and their Monte Carlo engine.
resiliency
    Reactive resiliency, resiliency degrees and performance trajectories.
estimation
    Maximum-likelihood fits and AIC model selection for event logs.
cli
    The ``repairable`` command.
"""

__version__ = "0.1.0"
