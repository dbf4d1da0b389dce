#include "dvsci/io/artifacts.hpp"

namespace dvsci::io {

void save_masks(const std::filesystem::path& dir, const core::MaskSet& masks,
                const std::string& config_hash) {
  Container c;
  c.set_attr("kind", std::string("masks"));
  c.set_attr("shift_row", masks.shift[0]);
  c.set_attr("shift_col", masks.shift[1]);
  c.set_attr("density", masks.density);
  c.set_attr("seed", static_cast<int>(masks.seed));
  if (!config_hash.empty()) c.set_attr("config_hash", config_hash);
  c.put("c1", masks.c1);
  c.put("c2", masks.c2);
  c.save(dir);
}

core::MaskSet load_masks(const std::filesystem::path& dir) {
  Container c = Container::load(dir);
  core::MaskSet m;
  m.c1 = c.get_u8("c1");
  m.c2 = c.get_u8("c2");
  m.shift = {c.attr_int("shift_row"), c.attr_int("shift_col")};
  m.density = c.attr_double("density");
  m.seed = static_cast<std::uint64_t>(c.attr_int("seed"));
  m.validate();
  return m;
}

void save_measurement(const std::filesystem::path& dir,
                      const core::Measurement& m,
                      const std::string& config_hash, std::uint64_t seed) {
  Container c;
  c.set_attr("kind", std::string("measurement"));
  c.set_attr("frames_per_view", m.meta.frames_per_view);
  c.set_attr("mask_ref", m.meta.mask_ref);
  c.set_attr("noise_sigma", static_cast<double>(m.meta.noise_sigma));
  c.set_attr("normalized", m.meta.normalized ? 1 : 0);
  c.set_attr("scale", static_cast<double>(m.meta.scale));
  c.set_attr("seed", static_cast<int>(seed));
  if (!config_hash.empty()) c.set_attr("config_hash", config_hash);
  c.put("y", m.y);
  c.save(dir);
}

core::Measurement load_measurement(const std::filesystem::path& dir) {
  Container c = Container::load(dir);
  core::Measurement m;
  m.y = c.get_f32("y");
  m.meta.frames_per_view = c.attr_int("frames_per_view");
  m.meta.mask_ref = c.attr_or("mask_ref", "");
  m.meta.noise_sigma = static_cast<float>(c.attr_double("noise_sigma"));
  m.meta.normalized = c.attr_int("normalized") != 0;
  m.meta.scale = static_cast<float>(c.attr_double("scale"));
  return m;
}

void save_cube(const std::filesystem::path& dir, const core::VideoCube& cube,
               const std::string& config_hash) {
  Container c;
  c.set_attr("kind", std::string("video_cube"));
  c.set_attr("view", static_cast<int>(cube.view));
  if (!config_hash.empty()) c.set_attr("config_hash", config_hash);
  c.put("data", cube.data);
  c.save(dir);
}

core::VideoCube load_cube(const std::filesystem::path& dir) {
  Container c = Container::load(dir);
  core::VideoCube cube;
  cube.data = c.get_f32("data");
  cube.view = static_cast<core::ViewId>(c.attr_int("view"));
  return cube;
}

}  // namespace dvsci::io
