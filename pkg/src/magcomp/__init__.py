"""Tolles-Lawson aeromagnetic compensation and anomaly-map numerics."""
from magcomp.errors import DataError, MagcompError, NumericalError, SingularFitError
from magcomp.evaluation import EvalReport, evaluate_flight, rmse, rmse_detrended
from magcomp.flight_data import (ChannelReport, FlightFrame, check_channels, load_flight,
                                 save_flight, select_line)
from magcomp.geodesy import WGS84, Ellipsoid, delta_east, delta_lat, delta_lon, delta_north
from magcomp.map_tools import (AnomalyMap, MapInterpolant, build_interpolant, create_K,
                               interp_at, load_map, map_grad, save_map, upward_fft)
from magcomp.signal import BandpassSpec, bandpass, central_fdm, detrend
from magcomp.simulator import (BoxPattern, NoiseSpec, SensorSpec, SimConfig, SimTruth,
                               simulate_flight, simulate_survey_line)
from magcomp.tolles_lawson import (TERM_LABELS, TLCoefficients, build_design_matrix,
                                   compensate, direction_cosines, fit_coefficients,
                                   load_coefficients, predict_aircraft_field,
                                   save_coefficients)

__version__ = "0.1.0"
