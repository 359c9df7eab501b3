"""Realistic degradation pipeline and perceptual evaluation toolkit for SR datasets."""

from .imgcore import (
    DecodeError,
    Image,
    bicubic_resize,
    decode_jpeg,
    encode_jpeg,
    load_image,
    same_pixels,
    save_png,
    to_gray,
)
from .kernels import (
    Kernel,
    KernelPool,
    KernelParseError,
    delta_kernel,
    downsample,
    gaussian_aniso_kernel,
    load_kernel,
    load_kernel_pool,
    save_kernel,
    save_kernel_pool,
    synth_kernel_pool,
)
from .noise import (
    NoisePatch,
    NoisePool,
    NoisePoolFormatError,
    NoiseScanParams,
    inject_noise,
    is_smooth,
    load_noise_pool,
    patch_stats,
    save_noise_pool,
    scan_noise_patches,
)
from .degrade import (
    DegradationConfig,
    DegradationRecord,
    degrade_image,
    derive_seed,
    generate_pairs,
    generate_synthetic,
    replay_record,
    synthetic_corrupt,
)
from .metrics import (
    ConvBankExtractor,
    FeatureExtractor,
    IdentityExtractor,
    MetricReport,
    default_feature_extractor,
    evaluate_directories,
    load_feature_extractor,
    lpips,
    ms_ssim,
    nlpd,
    perceptual_index,
    psnr,
    ssim,
    write_report_csv,
)
from .losses import LossWeights, adv_gen_loss, generator_loss, pixel_loss
from .mor import (
    MorResult,
    RankRecord,
    RankValidationError,
    StudyManifest,
    aggregate_mor,
    build_study,
    load_manifest,
    read_rank_csv,
    save_manifest,
    write_rank_csv,
)

__version__ = "0.1.0"
