"""Out-of-band radiation of multi-antenna transmitters with nonlinear PAs.

Analytical correlation pipeline (pulse shaping -> MR precoding -> Gaussian
moment propagation through the amplifier -> matrix spectra -> leakage
metrics) with a waveform Monte-Carlo oracle validating every step, plus a
CLI to reproduce the reference experiments.
"""

from .amplifier import (CalibrationError, OperatingPoint, PAModel, amplify,
                        calibrate_1db, compression_point, gaussian_moment,
                        propagate_corr, propagate_corr_polyphase)
from .channels import (ChannelModel, DiscreteChannel, discretize, freq_response,
                       gen_los, gen_rayleigh, gen_victim, steering_vector)
from .metrics import (AclrReport, BandPowers, CcdfTable, PatternResult, aclr,
                      band_powers, c1_sweep, eigen_ccdf, mimo_aclr, p_ob_max,
                      radiation_pattern, siso_baseline_aclr)
from .montecarlo import (McConfig, draw_symbols, empirical_corr, moment_oracle,
                         simulate_waveform, trace_psd_streaming, welch_cross_psd)
from .scenario import ConfigError, Scenario, load_scenario
from .signals import (LagCorrelation, Pulse, SampledSignal,
                      discrete_to_continuous_corr, make_rrc_pulse, modulate,
                      pulse_autocorr, pulse_polyphase_kernels)
from .spectra import (SpectralMatrix, corr_to_psd, eigen_spectrum, eigenvalues,
                      received_psd, s_max, s_tx, worst_case_ratio)
from .precoding import Precoder, apply_precoder, mr_precoder, tx_corr_symbol_rate

__version__ = "0.1.0"
