"""canvas_nav: sketch-and-language guided navigation toolkit.

A 2D occupancy-grid simulator with sketch+language task instances, a
waypoint token codebook for imitation learning, PD-controlled execution,
a rule-based baseline planner, a teleoperation/annotation service, and an
SR/CR/TDD/IVR evaluation suite.
"""

from .control import PDGains, control_step, track_waypoints
from .dataset import Datapoint, TeleopRecord, TeleopSession, annotate_fd, load_datapoint, make_misleading, record_teleop, save_datapoint
from .episode import EpisodeState, EpisodeStatus, advance_episode, check_success, start_episode
from .geometry import Point2, Polyline, Pose2, from_ego_frame, normalize_angle, polyline_length, resample_by_arclength, to_ego_frame
from .metrics import EpisodeOutcome, EvalReport, aggregate_report, check_violations, discrete_frechet, trajectory_deviation_distance
from .policies import BaselinePolicy, OraclePolicy, PolicyRequest, PolicyResponse, RemotePolicy, astar_path
from .render import CanvasImage, FrontViewImage, encode_png, render_canvas, render_front_view
from .runner import RunConfig, run_eval
from .sim import RobotState, SimConfig, step_kinematics
from .tokenizer import ActionTokens, WaypointCodebook, decode, encode, extract_supervision, fit_codebook
from .wire import ReferencePolicyServer, WireClient
from .world import CellClass, ConstraintRegion, OccupancyGrid, inflate, is_blocked, load_map, point_in_region, raycast, save_map

__version__ = "0.1.0"
