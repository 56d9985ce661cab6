#pragma once

#include <filesystem>

#include "mrinv/volume.hpp"

namespace mrinv {

/// Reads a single-file NIfTI-1 image (.nii, optionally gzip-compressed).
///
/// Compression is detected from the 0x1F 0x8B prefix, not the extension. Supported
/// on-disk types are uint8, int16, uint16, int32, float32 and float64, in either byte
/// order. Intensities are raw * scl_slope + scl_inter when scl_slope is non-zero. The
/// affine comes from the sform when sform_code > 0, else from the qform when
/// qform_code > 0, else from the voxel spacing. A 4D file whose 4th dimension is 1 is
/// read as 3D. Throws NiftiError on any other shape, a truncated file or a NaN voxel.
Volume3D read_volume(const std::filesystem::path& path);

/// Writes float32 NIfTI-1 with slope 1, intercept 0 and the affine stored in the sform.
/// The output is gzip-compressed when the path ends in ".gz".
void write_volume(const Volume3D& v, const std::filesystem::path& path);

/// Reads a label image. Float-typed files must hold integral values within 1e-6.
/// Positive labels missing from class_map are rejected unless allow_unknown is set.
LabelVolume read_labels(const std::filesystem::path& path, const ClassMap& class_map,
                        bool allow_unknown = false);

/// Writes labels with the narrowest integer type that holds them (uint8, int16 or int32).
void write_labels(const LabelVolume& labels, const std::filesystem::path& path);

}  // namespace mrinv
