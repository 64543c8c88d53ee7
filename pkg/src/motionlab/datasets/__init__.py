from .export import (
    euler_zxy_degrees,
    export_bvh,
    export_clip_bvh,
    export_csv,
    export_motion_json,
)
from .motiondata import (
    DatasetError,
    EmptyDataset,
    MotionClip,
    MotionDataset,
    SchemaViolation,
    TrainingTensors,
    UnknownAction,
    downsample,
    load,
    save,
    to_training_tensors,
)
from .synthetic import (
    SyntheticSpec,
    foot_slide,
    squat_clip,
    synthesize,
    walk_clip,
    wave_clip,
)
