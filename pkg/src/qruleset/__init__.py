"""RuleSet toolchain for application-layer requests on a three-node quantum network."""

__version__ = "0.1.0"
