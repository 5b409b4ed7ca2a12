"""Fall detection and activity-zone localization from wearable IMU and beacon streams."""

__version__ = "0.1.0"
