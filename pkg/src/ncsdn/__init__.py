"""Network coding on a simulated SDN: codec, closed-form model, simulator,
controller and a reconciliation harness."""

__version__ = "0.1.0"
