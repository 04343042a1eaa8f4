"""Grid-based global localization from aerial imagery.

A point mass (histogram) filter over a dense (x, y, heading) voxel grid
recovers a vehicle's planar pose on a large georeferenced map without any
initial pose knowledge, by fusing odometry (heading-dependent separable
convolutions), compass heading (von Mises bin masses), and ground-patch
descriptor matching against a precomputed per-voxel descriptor map.
Includes a deterministic synthetic-world simulator and a batch CLI for
convergence experiments.
"""

__version__ = "0.1.0"

from .grid import (  # noqa: F401
    BeliefGrid,
    GridSpec,
    PoseEstimate,
    ZeroMassError,
    apply_weights,
    converged,
    estimate_pose,
    init_uniform,
    load_belief,
    make_grid_spec,
    save_belief,
)
from .prediction import (  # noqa: F401
    OdometryMeasurement,
    OdometryNoiseModel,
    ShiftKernel,
    build_kernel,
    global_shift,
    noise_at_distance,
    predict,
    predict_dense_oracle,
)
from .measurement import (  # noqa: F401
    CalibrationModel,
    HeadingMeasurement,
    WeightGrid,
    bayesian_weights,
    calibrate,
    heading_weights,
    linear_weights,
    von_mises_cdf,
)
from .descriptor import (  # noqa: F401
    Descriptor,
    Patch,
    block_mean_descriptor,
    descriptor_distance,
)
from .map_store import (  # noqa: F401
    DescriptorMap,
    RasterMap,
    crop_rotated_patch,
    load_map,
    map_file_size,
    precompute,
    save_map,
)
from .orthoprojection import (  # noqa: F401
    CameraModel,
    GroundSquare,
    InfeasibleSquareError,
    fit_horizontal_plane,
    nadir_square,
    orthoproject,
)
from .simulator import (  # noqa: F401
    MissionConfig,
    MissionLog,
    WorldPair,
    generate_world,
    run_mission,
    sample_heading,
    sample_odometry,
)
