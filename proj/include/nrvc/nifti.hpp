#pragma once

#include <string>

#include "nrvc/volume.hpp"

namespace nrvc {

/// Minimal NIfTI-1 reader: single-file .nii or .nii.gz, 3D or 4D,
/// datatype int16 or float32, little-endian. Header bytes are kept in
/// Volume4D::raw_header for write-back; no orientation reinterpretation.
Volume4D read_nifti(const std::string& path);

/// Writes float32 NIfTI-1 (.gz when the path ends in .gz). Reuses the
/// volume's raw header when present, patching dims/datatype/pixdim.
void write_nifti(const Volume4D& v, const std::string& path);

/// Reads a 3D label image (values 0..3) as a tissue mask.
TissueMask read_mask(const std::string& path);

/// Size in bytes of the volume stored as uncompressed NIfTI (header + data
/// at the original on-disk sample width). Used for compression ratios.
std::size_t nifti_uncompressed_size(const Volume4D& v);

}  // namespace nrvc
