"""Link-level simulator for coordinated multi-cell beamforming with
compressed CSI feedback over OFDM."""

from .scenario import (
    ChannelRealization,
    PresetParams,
    ScenarioConfig,
    draw_taps,
    generate_channels,
    preset_scenario,
    taps_to_subcarriers,
)
from .feedback import (
    AngleSet,
    CodecParams,
    CsiReport,
    SnrReport,
    bit_count,
    compress_v,
    decompress_v,
    encode_channel,
    pack_report,
    quantize_snr,
    reconstruct_channels,
    reconstruct_snr,
    reported_subcarrier_indices,
    svd_big_channel,
    unpack_report,
)
from .beamforming import (
    MaxSinrResult,
    PrecoderSet,
    assign_precoders_to_subcarriers,
    comp_init,
    eigen_precoder,
    ia_closed_form,
    max_sinr,
    power_normalize,
    regularized_noise,
)
from .phy import (
    StreamLayout,
    distortion_noise,
    effective_channels,
    evaluate_streams,
    mmse_combiner,
    pilot_estimate,
    post_sinr,
)
from .link_adapt import (
    McsEntry,
    McsTable,
    SchemeResult,
    default_mcs_table,
    scheme_throughput,
    select_mcs,
)
from .harness import ExperimentSpec, ResultRow, run_drop, sweep

__version__ = "0.1.0"
