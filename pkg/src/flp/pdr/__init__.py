"""Pedestrian dead reckoning front-end: steps, orientation, DPC, floor changes."""

from .altitude import (AltitudeFilter, FloorChangeDetector, altitude_to_pressure, detect_floor_change,
                       pressure_to_altitude, update_altitude)
from .dpc import DpcDetector, detect_dpc, dpc_angle
from .orientation import OrientationTracker, estimate_gyro_bias, update_orientation
from .pipeline import PdrFrontEnd, process_stream
from .steps import (StepDetector, StepModelParams, detect_steps, frequency_for_speed, step_length,
                    step_length_raw)
from .types import (DpcFlag, FloorEvent, ImuSample, ImuStream, NotStatic, OrientationState, StepEvent,
                    StreamTooShort, UnknownFloor)

__all__ = [
    "AltitudeFilter", "DpcDetector", "DpcFlag", "FloorChangeDetector", "FloorEvent", "ImuSample",
    "ImuStream", "NotStatic", "OrientationState", "OrientationTracker", "PdrFrontEnd", "StepDetector",
    "StepEvent", "StepModelParams", "StreamTooShort", "UnknownFloor", "altitude_to_pressure",
    "detect_dpc", "detect_floor_change", "detect_steps", "dpc_angle", "estimate_gyro_bias",
    "frequency_for_speed", "pressure_to_altitude", "process_stream", "step_length", "step_length_raw",
    "update_altitude", "update_orientation",
]
