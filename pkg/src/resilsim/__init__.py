"""resilsim: failure-probability modeling and on-demand resilience
simulation for fat-tree HPC systems.

Submodules:
  reliability  serial/parallel composition trees and analytic evaluation
  topology     fat-tree construction, sweeps, branching comparison
  simulation   snapshot Monte Carlo and temporal failure injection
  controller   failure prediction and protection-policy comparison
  config       rates / run-configuration file ingestion
  reports      machine-readable report emission
  kernels      compiled/pure hot-kernel backends
"""

__version__ = "0.1.0"
