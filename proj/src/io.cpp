#include "drp/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace drp::io {
namespace {

constexpr int kMaxVal = 65535;

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::kIo, "cannot open for writing: " + path.string());
  return os;
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

}  // namespace

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  std::ofstream os = open_out(path);
  os << "P5\n" << image.cols() << ' ' << image.rows() << '\n' << kMaxVal << '\n';
  std::string buf;
  buf.reserve(image.data().size() * 2);
  for (double v : image.data()) {
    const double clamped = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
    const auto level = static_cast<std::uint16_t>(std::lround(clamped * kMaxVal));
    buf.push_back(static_cast<char>(level >> 8));
    buf.push_back(static_cast<char>(level & 0xff));
  }
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!os) throw Error(ErrorKind::kIo, "write failed: " + path.string());
}

void write_mask_pgm(const std::filesystem::path& path, const Mask& mask) {
  GrayImage img(mask.rows(), mask.cols(), 0.0);
  auto dst = img.data();
  auto src = mask.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[i] != 0 ? 1.0 : 0.0;
  write_pgm(path, img);
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::kIo, "cannot open: " + path.string());
  // Header tokens may be separated by '#' comments running to end of line.
  auto token = [&is]() {
    std::string tok;
    while (is >> std::ws && is.peek() == '#') is.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
    is >> tok;
    return tok;
  };
  auto number = [&token]() {
    const std::string tok = token();
    int value = 0;
    const auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    return ec == std::errc() && end == tok.data() + tok.size() ? value : -1;
  };
  const std::string magic = token();
  const int width = number();
  const int height = number();
  const int maxval = number();
  if (magic != "P5" || width <= 0 || height <= 0 || maxval <= 0 || maxval > kMaxVal) {
    throw Error(ErrorKind::kIo, "not a supported PGM: " + path.string());
  }
  is.get();  // single whitespace after the header
  const int bytes = maxval > 255 ? 2 : 1;
  std::string buf(static_cast<std::size_t>(width) * height * bytes, '\0');
  is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (is.gcount() != static_cast<std::streamsize>(buf.size())) {
    throw Error(ErrorKind::kIo, "truncated PGM: " + path.string());
  }
  GrayImage img(height, width, 0.0);
  auto dst = img.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    unsigned level = static_cast<unsigned char>(buf[i * bytes]);
    if (bytes == 2) level = (level << 8) | static_cast<unsigned char>(buf[i * 2 + 1]);
    dst[i] = static_cast<double>(level) / maxval;
  }
  return img;
}

void write_patch(const std::filesystem::path& path, const scene::PatchState& patch,
                 const std::string& config_hash) {
  write_pgm(path, patch.values);
  const scene::PatchPlacement& pl = patch.placement;
  nlohmann::json meta = {
      {"start_x", pl.start_x},   {"center_y", pl.center_y},
      {"width", pl.width},       {"length", pl.length},
      {"margin", pl.margin},     {"meters_per_pixel", patch.meters_per_pixel},
      {"v_min", patch.v_min},    {"v_max", patch.v_max},
      {"base_value", patch.base_value}, {"config_hash", config_hash},
  };
  write_text(sidecar_path(path), meta.dump(2) + "\n");
}

scene::PatchState read_patch(const std::filesystem::path& path,
                             const scene::PatchState& fallback) {
  scene::PatchState patch = fallback;
  patch.values = read_pgm(path);
  const auto meta_path = sidecar_path(path);
  if (std::filesystem::exists(meta_path)) {
    try {
      const auto meta = nlohmann::json::parse(read_text(meta_path));
      patch.placement.start_x = meta.at("start_x").get<double>();
      patch.placement.center_y = meta.at("center_y").get<double>();
      patch.placement.width = meta.at("width").get<double>();
      patch.placement.length = meta.at("length").get<double>();
      patch.placement.margin = meta.at("margin").get<double>();
      patch.meters_per_pixel = meta.at("meters_per_pixel").get<double>();
      patch.v_min = meta.at("v_min").get<double>();
      patch.v_max = meta.at("v_max").get<double>();
      patch.base_value = meta.at("base_value").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kIo, "bad patch sidecar " + meta_path.string() + ": " + e.what());
    }
  }
  // Quantization may land a hair outside the bounds.
  for (double& v : patch.values.data()) v = std::clamp(v, patch.v_min, patch.v_max);
  const int rows = static_cast<int>(std::lround(patch.placement.length / patch.meters_per_pixel));
  const int cols = static_cast<int>(std::lround(patch.placement.width / patch.meters_per_pixel));
  if (patch.values.rows() != rows || patch.values.cols() != cols) {
    throw Error(ErrorKind::kIo, "patch image size does not match its placement: " + path.string());
  }
  return patch;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os = open_out(path);
  os << text;
  if (!os) throw Error(ErrorKind::kIo, "write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::kIo, "cannot open: " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace drp::io
