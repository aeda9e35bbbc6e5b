#include "cbma/volume_io.hpp"

#include "cbma/binary_io.hpp"
#include "cbma/config.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

namespace cbma {

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

Json lattice_json(const Dims& dims, const Vec3& vs, const Vec3& origin) {
  return Json{{"dims", {dims[0], dims[1], dims[2]}},
              {"voxel_size", {vs[0], vs[1], vs[2]}},
              {"origin", {origin[0], origin[1], origin[2]}}};
}

void read_lattice(const Json& j, Dims& dims, Vec3& vs, Vec3& origin) {
  try {
    for (int a = 0; a < 3; ++a) {
      dims[a] = j.at("dims").at(a).get<int>();
      vs[a] = j.at("voxel_size").at(a).get<double>();
      origin[a] = j.at("origin").at(a).get<double>();
    }
  } catch (const Json::exception& e) {
    throw Error("corrupt_file", std::string("bad volume sidecar: ") + e.what());
  }
}

Json read_sidecar(const std::string& base) {
  const auto bytes = read_file(base + ".json");
  Json j;
  try {
    j = Json::parse(bytes.begin(), bytes.end());
  } catch (const Json::exception& e) {
    throw Error("corrupt_file", base + ".json: " + e.what());
  }
  if (j.value("format_version", 0) > kFormatVersion) throw Error("unsupported_format", base + ".json: format_version too new");
  return j;
}

std::size_t total_voxels(const Dims& dims) {
  for (int d : dims) {
    if (d < 1) throw Error("invalid_grid", "dims must be positive");
  }
  return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
}

}  // namespace

std::string volume_base(const std::string& path) {
  if (ends_with(path, ".json") || ends_with(path, ".raw")) return path.substr(0, path.rfind('.'));
  return path;
}

void save_mask(const std::string& path, const VolumeGrid& grid) {
  const std::string base = volume_base(path);
  const auto& mask = grid.mask();
  atomic_write(base + ".raw", std::vector<char>(mask.begin(), mask.end()));
  Json j = lattice_json(grid.dims(), grid.voxel_size(), grid.origin());
  j["format_version"] = kFormatVersion;
  j["dtype"] = "uint8";
  j["value_name"] = "mask";
  atomic_write(base + ".json", j.dump(2) + "\n");
}

VolumeGrid load_mask(const std::string& path) {
  const std::string base = volume_base(path);
  const Json j = read_sidecar(base);
  Dims dims;
  Vec3 vs, origin;
  read_lattice(j, dims, vs, origin);
  if (j.value("dtype", "uint8") != "uint8") throw Error("corrupt_file", "mask dtype must be uint8");
  const auto bytes = read_file(base + ".raw");
  if (bytes.size() != total_voxels(dims)) throw Error("corrupt_file", base + ".raw size does not match dims");
  std::vector<std::uint8_t> mask(bytes.begin(), bytes.end());
  return build_grid(dims, vs, origin, std::move(mask));
}

void save_volumes(const std::string& path, const VolumeGrid& grid, const MatrixXd& masked_values,
                  const VolumeWriteOptions& options) {
  if (masked_values.rows() != grid.masked_count()) throw Error("dimension_mismatch", "values must cover the masked voxels");
  if (options.dtype != "float32" && options.dtype != "float64") throw Error("invalid_dtype", "dtype must be float32 or float64");
  if (!options.volume_names.empty() && static_cast<Index>(options.volume_names.size()) != masked_values.cols()) {
    throw Error("dimension_mismatch", "one name per volume required");
  }
  const std::string base = volume_base(path);
  const Index total = grid.total_voxels();
  const auto& lin = grid.masked_linear();
  BinaryWriter w;
  for (Index m = 0; m < masked_values.cols(); ++m) {
    VectorXd full = VectorXd::Zero(total);
    for (Index v = 0; v < masked_values.rows(); ++v) full(lin[static_cast<std::size_t>(v)]) = masked_values(v, m);
    for (Index l = 0; l < total; ++l) {
      if (options.dtype == "float32") {
        w.f32(static_cast<float>(full(l)));
      } else {
        w.f64(full(l));
      }
    }
  }
  atomic_write(base + ".raw", w.bytes());

  Json j = lattice_json(grid.dims(), grid.voxel_size(), grid.origin());
  j["format_version"] = kFormatVersion;
  j["dtype"] = options.dtype;
  j["value_name"] = options.value_name;
  j["n_volumes"] = masked_values.cols();
  j["volume_names"] = options.volume_names;
  if (options.png) {
    const PngSlices& png = *options.png;
    Json files = Json::array();
    for (Index m = 0; m < masked_values.cols(); ++m) {
      const std::string name =
          options.volume_names.empty() ? std::to_string(m) : options.volume_names[static_cast<std::size_t>(m)];
      for (int k : png.slices) {
        const std::string file = base + "_" + name + "_z" + std::to_string(k) + ".png";
        write_png_slice(file, grid, masked_values.col(m), k, png.vmin, png.vmax);
        files.push_back(std::filesystem::path(file).filename().string());
      }
    }
    j["png"] = {{"slices", png.slices}, {"min", png.vmin}, {"max", png.vmax}, {"files", files}};
  }
  atomic_write(base + ".json", j.dump(2) + "\n");
}

LoadedVolumes load_volumes(const std::string& path) {
  const std::string base = volume_base(path);
  const Json j = read_sidecar(base);
  LoadedVolumes out;
  read_lattice(j, out.dims, out.voxel_size, out.origin);
  out.value_name = j.value("value_name", "");
  out.dtype = j.value("dtype", "float32");
  out.volume_names = j.value("volume_names", std::vector<std::string>());
  const Index m = j.value("n_volumes", 1);
  const auto total = static_cast<Index>(total_voxels(out.dims));
  const std::size_t width = out.dtype == "float32" ? 4 : out.dtype == "float64" ? 8 : 0;
  if (width == 0) throw Error("corrupt_file", "unsupported dtype " + out.dtype);
  auto bytes = read_file(base + ".raw");
  if (bytes.size() != static_cast<std::size_t>(total * m) * width) {
    throw Error("corrupt_file", base + ".raw size does not match the sidecar");
  }
  BinaryReader r(std::move(bytes));
  out.values.resize(total, m);
  for (Index c = 0; c < m; ++c) {
    for (Index l = 0; l < total; ++l) out.values(l, c) = width == 4 ? static_cast<double>(r.f32()) : r.f64();
  }
  return out;
}

MatrixXd masked_values(const VolumeGrid& grid, const LoadedVolumes& volumes) {
  if (volumes.dims != grid.dims() || volumes.voxel_size != grid.voxel_size() || volumes.origin != grid.origin()) {
    throw Error("grid_mismatch", "volume lattice does not match the grid");
  }
  MatrixXd out(grid.masked_count(), volumes.values.cols());
  const auto& lin = grid.masked_linear();
  for (Index v = 0; v < out.rows(); ++v) out.row(v) = volumes.values.row(lin[static_cast<std::size_t>(v)]);
  return out;
}

void write_png_slice(const std::string& path, const VolumeGrid& grid, const VectorXd& masked, int k, double vmin,
                     double vmax) {
  const auto& dims = grid.dims();
  if (k < 0 || k >= dims[2]) throw Error("invalid_slice", "slice index out of range");
  if (!(vmax > vmin)) throw Error("invalid_range", "png range needs vmax > vmin");
  if (masked.size() != grid.masked_count()) throw Error("dimension_mismatch", "values must cover the masked voxels");
  const int width = dims[0];
  const int height = dims[1];
  std::vector<png_byte> pixels(static_cast<std::size_t>(width) * height, 0);
  for (int j = 0; j < height; ++j) {
    for (int i = 0; i < width; ++i) {
      const Index v = grid.masked_position(grid.linear_index(i, j, k));
      if (v < 0) continue;
      const double t = std::clamp((masked(v) - vmin) / (vmax - vmin), 0.0, 1.0);
      pixels[static_cast<std::size_t>(height - 1 - j) * width + i] = static_cast<png_byte>(std::lround(255.0 * t));
    }
  }
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = PNG_FORMAT_GRAY;
  const std::string tmp = path + ".tmp";
  if (!png_image_write_to_file(&image, tmp.c_str(), 0, pixels.data(), width, nullptr)) {
    throw Error("io_error", "cannot write png " + path + ": " + image.message);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("io_error", "cannot rename " + tmp + ": " + ec.message());
}

}  // namespace cbma
