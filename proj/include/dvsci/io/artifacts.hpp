#ifndef DVSCI_IO_ARTIFACTS_HPP
#define DVSCI_IO_ARTIFACTS_HPP

#include <filesystem>

#include "dvsci/io/container.hpp"
#include "dvsci/sci_core.hpp"

namespace dvsci::io {

// Domain objects persisted in the shared container format. Every artifact
// directory records the seed and config hash it was produced under.

void save_masks(const std::filesystem::path& dir, const core::MaskSet& masks,
                const std::string& config_hash = "");
core::MaskSet load_masks(const std::filesystem::path& dir);

void save_measurement(const std::filesystem::path& dir,
                      const core::Measurement& m,
                      const std::string& config_hash = "",
                      std::uint64_t seed = 0);
core::Measurement load_measurement(const std::filesystem::path& dir);

void save_cube(const std::filesystem::path& dir, const core::VideoCube& cube,
               const std::string& config_hash = "");
core::VideoCube load_cube(const std::filesystem::path& dir);

}  // namespace dvsci::io

#endif
