#ifndef DVSCI_IO_IMAGE_IO_HPP
#define DVSCI_IO_IMAGE_IO_HPP

#include <filesystem>

#include "dvsci/tensor.hpp"

namespace dvsci::io {

// Reads PGM (P2/P5) or PPM (P3/P6) into a 1- or 3-plane tensor scaled to
// [0,1].
Tensor read_pnm(const std::filesystem::path& path);

bool is_pnm_file(const std::filesystem::path& path);

// Rec.601 luma conversion; single-plane input passes through.
Tensor to_gray(const Tensor& img);

// 8-bit PNG, grayscale (1 plane) or RGB (3 planes); input clamped to [0,1]
// and quantized.
void write_png(const std::filesystem::path& path, const Tensor& img);

}  // namespace dvsci::io

#endif
