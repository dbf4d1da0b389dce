#include "dvsci/io/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace dvsci::io {

namespace {

constexpr const char* kMagic = "dvsci-container 1";

static_assert(std::endian::native == std::endian::little,
              "container blobs are little-endian; big-endian hosts are unsupported");

std::string blob_name(const std::string& tensor, const char* ext) {
  std::string out;
  out.reserve(tensor.size());
  for (char ch : tensor) out.push_back(ch == '/' || ch == ' ' ? '_' : ch);
  return out + ext;
}

void write_blob(const std::filesystem::path& path, const void* data,
                std::size_t bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  if (!f) throw std::runtime_error("short write to " + path.string());
}

void read_blob(const std::filesystem::path& path, void* data,
               std::size_t bytes) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  f.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
  if (static_cast<std::size_t>(f.gcount()) != bytes)
    throw std::runtime_error("short read from " + path.string());
}

}  // namespace

void Container::put(const std::string& name, Tensor t) {
  if (!tensors_.count(name)) order_.push_back(name);
  tensors_.insert_or_assign(name, Value(std::move(t)));
}

void Container::put(const std::string& name, TensorU8 t) {
  if (!tensors_.count(name)) order_.push_back(name);
  tensors_.insert_or_assign(name, Value(std::move(t)));
}

bool Container::has_tensor(const std::string& name) const {
  return tensors_.count(name) != 0;
}

const Tensor& Container::get_f32(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end())
    throw std::invalid_argument("container: no tensor named '" + name + "'");
  const Tensor* t = std::get_if<Tensor>(&it->second);
  if (!t)
    throw std::invalid_argument("container: tensor '" + name +
                                "' is not float32");
  return *t;
}

const TensorU8& Container::get_u8(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end())
    throw std::invalid_argument("container: no tensor named '" + name + "'");
  const TensorU8* t = std::get_if<TensorU8>(&it->second);
  if (!t)
    throw std::invalid_argument("container: tensor '" + name +
                                "' is not uint8");
  return *t;
}

void Container::set_attr(const std::string& key, const std::string& value) {
  for (auto& kv : attrs_) {
    if (kv.first == key) {
      kv.second = value;
      return;
    }
  }
  attrs_.emplace_back(key, value);
}

void Container::set_attr(const std::string& key, double value) {
  std::ostringstream ss;
  ss.precision(17);
  ss << value;
  set_attr(key, ss.str());
}

void Container::set_attr(const std::string& key, int value) {
  set_attr(key, std::to_string(value));
}

bool Container::has_attr(const std::string& key) const {
  for (const auto& kv : attrs_)
    if (kv.first == key) return true;
  return false;
}

const std::string& Container::attr(const std::string& key) const {
  for (const auto& kv : attrs_)
    if (kv.first == key) return kv.second;
  throw std::invalid_argument("container: no attribute '" + key + "'");
}

std::string Container::attr_or(const std::string& key,
                               const std::string& fallback) const {
  return has_attr(key) ? attr(key) : fallback;
}

double Container::attr_double(const std::string& key) const {
  return std::stod(attr(key));
}

int Container::attr_int(const std::string& key) const {
  return std::stoi(attr(key));
}

void Container::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::ostringstream manifest;
  manifest << kMagic << "\n";
  for (const auto& kv : attrs_) manifest << "attr " << kv.first << " " << kv.second << "\n";
  for (const auto& name : order_) {
    const Value& val = tensors_.at(name);
    if (const Tensor* t = std::get_if<Tensor>(&val)) {
      const std::string file = blob_name(name, ".f32");
      manifest << "tensor " << name << " dtype=float32 shape=" << t->shape_str()
               << " order=frame,row,col endian=little file=" << file << "\n";
      write_blob(dir / file, t->v.data(), t->v.size() * sizeof(float));
    } else {
      const TensorU8& t8 = std::get<TensorU8>(val);
      const std::string file = blob_name(name, ".u8");
      manifest << "tensor " << name << " dtype=uint8 shape=" << t8.shape_str()
               << " order=frame,row,col endian=little file=" << file << "\n";
      write_blob(dir / file, t8.v.data(), t8.v.size());
    }
  }
  std::ofstream f(dir / "manifest.txt", std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write manifest in " + dir.string());
  f << manifest.str();
}

Container Container::load(const std::filesystem::path& dir) {
  std::ifstream f(dir / "manifest.txt");
  if (!f)
    throw std::invalid_argument("no container manifest in " + dir.string());
  std::string line;
  if (!std::getline(f, line) || line != kMagic)
    throw std::invalid_argument("unrecognized container format in " +
                                dir.string());
  Container c;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string kind;
    ss >> kind;
    if (kind == "attr") {
      std::string key;
      ss >> key;
      std::string value;
      std::getline(ss, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      c.set_attr(key, value);
    } else if (kind == "tensor") {
      std::string name, field;
      ss >> name;
      std::string dtype, shape, order, endian, file;
      while (ss >> field) {
        auto eq = field.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = field.substr(0, eq);
        const std::string val = field.substr(eq + 1);
        if (key == "dtype") dtype = val;
        else if (key == "shape") shape = val;
        else if (key == "order") order = val;
        else if (key == "endian") endian = val;
        else if (key == "file") file = val;
      }
      if (order != "frame,row,col")
        throw std::invalid_argument("container: unsupported dim order " + order);
      if (endian != "little")
        throw std::invalid_argument("container: unsupported endianness " + endian);
      int chans = 0, rows = 0, cols = 0;
      if (std::sscanf(shape.c_str(), "%dx%dx%d", &chans, &rows, &cols) != 3)
        throw std::invalid_argument("container: bad shape " + shape);
      if (dtype == "float32") {
        Tensor t(chans, rows, cols);
        read_blob(dir / file, t.v.data(), t.v.size() * sizeof(float));
        c.put(name, std::move(t));
      } else if (dtype == "uint8") {
        TensorU8 t(chans, rows, cols);
        read_blob(dir / file, t.v.data(), t.v.size());
        c.put(name, std::move(t));
      } else {
        throw std::invalid_argument("container: unsupported dtype " + dtype);
      }
    } else {
      throw std::invalid_argument("container: bad manifest line: " + line);
    }
  }
  return c;
}

}  // namespace dvsci::io
