#include "dvsci/io/image_io.hpp"

#include <array>
#include <cstdint>
#include <fstream>
#include <vector>

namespace dvsci::io {

namespace {

int next_pnm_int(std::istream& in) {
  // Skips whitespace and '#' comments.
  while (true) {
    const int ch = in.peek();
    if (ch == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(ch)) {
      in.get();
    } else {
      break;
    }
  }
  int value = 0;
  in >> value;
  if (!in) throw std::runtime_error("pnm: malformed header");
  return value;
}

std::uint32_t crc32_update(std::uint32_t crc, const std::uint8_t* data,
                           std::size_t n) {
  static std::array<std::uint32_t, 256> table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k)
        c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  crc ^= 0xffffffffu;
  for (std::size_t i = 0; i < n; ++i)
    crc = table[(crc ^ data[i]) & 0xffu] ^ (crc >> 8);
  return crc ^ 0xffffffffu;
}

void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void write_chunk(std::ofstream& f, const char type[4],
                 const std::vector<std::uint8_t>& data) {
  std::vector<std::uint8_t> hdr;
  put_u32_be(hdr, static_cast<std::uint32_t>(data.size()));
  f.write(reinterpret_cast<const char*>(hdr.data()), 4);
  std::vector<std::uint8_t> body(type, type + 4);
  body.insert(body.end(), data.begin(), data.end());
  f.write(reinterpret_cast<const char*>(body.data()),
          static_cast<std::streamsize>(body.size()));
  std::vector<std::uint8_t> crc;
  put_u32_be(crc, crc32_update(0, body.data(), body.size()));
  f.write(reinterpret_cast<const char*>(crc.data()), 4);
}

// zlib stream with stored (uncompressed) deflate blocks.
std::vector<std::uint8_t> zlib_stored(const std::vector<std::uint8_t>& raw) {
  std::vector<std::uint8_t> out;
  out.push_back(0x78);
  out.push_back(0x01);
  std::size_t off = 0;
  do {
    const std::size_t n = std::min<std::size_t>(65535, raw.size() - off);
    const bool final = off + n == raw.size();
    out.push_back(final ? 1 : 0);
    out.push_back(static_cast<std::uint8_t>(n & 0xff));
    out.push_back(static_cast<std::uint8_t>(n >> 8));
    out.push_back(static_cast<std::uint8_t>(~n & 0xff));
    out.push_back(static_cast<std::uint8_t>((~n >> 8) & 0xff));
    out.insert(out.end(), raw.begin() + off, raw.begin() + off + n);
    off += n;
  } while (off < raw.size());
  std::uint32_t a = 1, b = 0;
  for (std::uint8_t byte : raw) {
    a = (a + byte) % 65521;
    b = (b + a) % 65521;
  }
  put_u32_be(out, (b << 16) | a);
  return out;
}

}  // namespace

bool is_pnm_file(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  return ext == ".pgm" || ext == ".ppm" || ext == ".pnm";
}

Tensor read_pnm(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open image " + path.string());
  char p = 0, kind = 0;
  f >> p >> kind;
  if (p != 'P' || (kind != '2' && kind != '3' && kind != '5' && kind != '6'))
    throw std::runtime_error("unsupported image format in " + path.string());
  const int cols = next_pnm_int(f);
  const int rows = next_pnm_int(f);
  const int maxval = next_pnm_int(f);
  if (cols < 1 || rows < 1 || maxval < 1 || maxval > 255)
    throw std::runtime_error("unsupported pnm geometry in " + path.string());
  const int chans = (kind == '3' || kind == '6') ? 3 : 1;
  Tensor img(chans, rows, cols);
  const bool binary = kind == '5' || kind == '6';
  if (binary) {
    f.get();  // single whitespace after maxval
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(rows) * cols * chans);
    f.read(reinterpret_cast<char*>(buf.data()),
           static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(f.gcount()) != buf.size())
      throw std::runtime_error("truncated image " + path.string());
    std::size_t i = 0;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        for (int ch = 0; ch < chans; ++ch)
          img.at(ch, r, c) = static_cast<float>(buf[i++]) / maxval;
  } else {
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        for (int ch = 0; ch < chans; ++ch)
          img.at(ch, r, c) = static_cast<float>(next_pnm_int(f)) / maxval;
  }
  return img;
}

Tensor to_gray(const Tensor& img) {
  if (img.chans == 1) return img;
  if (img.chans != 3)
    throw std::invalid_argument("to_gray: expected 1 or 3 planes");
  Tensor out(1, img.rows, img.cols);
  const std::size_t plane = img.plane_size();
  for (std::size_t p = 0; p < plane; ++p)
    out.v[p] = static_cast<float>(0.299 * img.v[p] + 0.587 * img.v[plane + p] +
                                  0.114 * img.v[2 * plane + p]);
  return out;
}

void write_png(const std::filesystem::path& path, const Tensor& img) {
  if (img.chans != 1 && img.chans != 3)
    throw std::invalid_argument("write_png: expected 1 or 3 planes");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  f.write(reinterpret_cast<const char*>(sig), 8);

  std::vector<std::uint8_t> ihdr;
  put_u32_be(ihdr, static_cast<std::uint32_t>(img.cols));
  put_u32_be(ihdr, static_cast<std::uint32_t>(img.rows));
  ihdr.push_back(8);                              // bit depth
  ihdr.push_back(img.chans == 1 ? 0 : 2);         // gray / rgb
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  write_chunk(f, "IHDR", ihdr);

  std::vector<std::uint8_t> raw;
  raw.reserve(static_cast<std::size_t>(img.rows) * (1 + img.cols * img.chans));
  for (int r = 0; r < img.rows; ++r) {
    raw.push_back(0);  // filter: none
    for (int c = 0; c < img.cols; ++c)
      for (int ch = 0; ch < img.chans; ++ch) {
        const float x = std::min(1.0f, std::max(0.0f, img.at(ch, r, c)));
        raw.push_back(static_cast<std::uint8_t>(std::lround(x * 255.0f)));
      }
  }
  write_chunk(f, "IDAT", zlib_stored(raw));
  write_chunk(f, "IEND", {});
}

}  // namespace dvsci::io
