#ifndef DVSCI_IO_CONTAINER_HPP
#define DVSCI_IO_CONTAINER_HPP

#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "dvsci/tensor.hpp"

namespace dvsci::io {

// On-disk array container: a directory holding a plain-text manifest plus one
// raw binary blob per named tensor. Blobs are little-endian, row-major within
// each plane, planes in "frame,row,col" order. float32 for image-like data,
// uint8 for binary masks. Round-trips are bit-exact.
class Container {
 public:
  using Value = std::variant<Tensor, TensorU8>;

  void put(const std::string& name, Tensor t);
  void put(const std::string& name, TensorU8 t);
  bool has_tensor(const std::string& name) const;
  const Tensor& get_f32(const std::string& name) const;
  const TensorU8& get_u8(const std::string& name) const;
  const std::vector<std::string>& tensor_names() const { return order_; }

  void set_attr(const std::string& key, const std::string& value);
  void set_attr(const std::string& key, double value);
  void set_attr(const std::string& key, int value);
  bool has_attr(const std::string& key) const;
  const std::string& attr(const std::string& key) const;
  std::string attr_or(const std::string& key, const std::string& fallback) const;
  double attr_double(const std::string& key) const;
  int attr_int(const std::string& key) const;
  const std::vector<std::pair<std::string, std::string>>& attrs() const {
    return attrs_;
  }

  void save(const std::filesystem::path& dir) const;
  static Container load(const std::filesystem::path& dir);

 private:
  std::vector<std::string> order_;
  std::map<std::string, Value> tensors_;
  std::vector<std::pair<std::string, std::string>> attrs_;
};

}  // namespace dvsci::io

#endif
