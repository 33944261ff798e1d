"""Event-triggered funnel force control and posture adjustment for a
six-wheel-legged robot, with an impedance baseline and slope-terrain
scenarios."""

__version__ = "0.1.0"

from .body import (BodyInertia, LegForceVector, Posture, RobotGeometry,
                   allocate_leg_forces, desired_wrench, jacobian,
                   rigid_body_step)
from .funnel import (FunnelParams, FunnelViolation, OmegaBound, TriggerParams,
                     TriggerState, control_law, funnel_value, gain_current,
                     gain_reset, min_inter_event_time, omega_bound, saturate,
                     trigger_evaluate, u_bar, validate_parameters)
from .impedance import (ImpedanceParams, ImpedanceState, impedance_step,
                        preset_foot_trajectory)
from .leg import (LegPlantParams, LegPlantState, iss_envelope, leg_force,
                  plant_derivative, step, tracking_error)
from .scenario import ConfigError, ScenarioConfig, load_config
from .sim import (Metrics, PostureSensor, SimTrajectory, extract_metrics,
                  force_tracking_test, run_scenario, sensor_sample,
                  validate_scenario)
from .terrain import TerrainProfile, make_terrain
