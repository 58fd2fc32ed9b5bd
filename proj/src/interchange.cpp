#include "thzrsma/interchange.hpp"

#include <bit>
#include <fstream>

#include "thzrsma/error.hpp"

namespace thzrsma {

static_assert(std::endian::native == std::endian::little,
              "interchange I/O assumes a little-endian host");

namespace fs = std::filesystem;

const char* dtype_name(DType dtype) {
  return dtype == DType::kComplex64 ? "complex64" : "float32";
}

std::size_t TensorInfo::element_count() const {
  std::size_t n = 1;
  for (std::size_t s : shape) n *= s;
  return n;
}

namespace {

std::size_t floats_per_element(DType dtype) { return dtype == DType::kComplex64 ? 2 : 1; }

void write_floats(const fs::path& path, const std::vector<float>& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!out) throw IoError("write failed: " + path.string());
}

void check_shape(const std::vector<std::size_t>& shape, const std::vector<std::string>& axes,
                 std::size_t count, const std::string& name) {
  if (shape.size() != axes.size()) throw DimensionError(name + ": shape/axes rank mismatch");
  std::size_t n = 1;
  for (std::size_t s : shape) n *= s;
  if (n != count) throw DimensionError(name + ": data size does not match shape");
}

}  // namespace

InterchangeWriter::InterchangeWriter(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create " + dir_.string() + ": " + ec.message());
}

void InterchangeWriter::set_meta(const std::string& key, nlohmann::json value) {
  meta_[key] = std::move(value);
}

void InterchangeWriter::register_tensor(TensorInfo info) {
  const std::string name = info.name;
  tensors_[name] = std::move(info);
}

void InterchangeWriter::add_complex(const std::string& name, std::vector<std::size_t> shape,
                                    std::vector<std::string> axes,
                                    std::span<const cdouble> data) {
  check_shape(shape, axes, data.size(), name);
  std::vector<float> raw;
  raw.reserve(2 * data.size());
  for (const cdouble& v : data) {
    raw.push_back(static_cast<float>(v.real()));
    raw.push_back(static_cast<float>(v.imag()));
  }
  TensorInfo info{name, name + ".bin", DType::kComplex64, std::move(shape), std::move(axes)};
  write_floats(dir_ / info.file, raw);
  register_tensor(std::move(info));
}

void InterchangeWriter::add_real(const std::string& name, std::vector<std::size_t> shape,
                                 std::vector<std::string> axes, std::span<const double> data) {
  check_shape(shape, axes, data.size(), name);
  std::vector<float> raw(data.begin(), data.end());
  TensorInfo info{name, name + ".bin", DType::kFloat32, std::move(shape), std::move(axes)};
  write_floats(dir_ / info.file, raw);
  register_tensor(std::move(info));
}

void InterchangeWriter::finish() {
  nlohmann::json manifest;
  manifest["format"] = "thzrsma-interchange";
  manifest["version"] = kInterchangeVersion;
  manifest["byte_order"] = "little";
  manifest["layout"] = "row-major; complex64 interleaves real, imag float32";
  manifest["meta"] = meta_;
  nlohmann::json tensors = nlohmann::json::object();
  for (const auto& [name, info] : tensors_) {
    tensors[name] = {{"file", info.file},
                     {"dtype", dtype_name(info.dtype)},
                     {"shape", info.shape},
                     {"axes", info.axes}};
  }
  manifest["tensors"] = tensors;
  std::ofstream out(dir_ / kManifestName, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest in " + dir_.string());
  out << manifest.dump(2) << '\n';
  if (!out) throw IoError("manifest write failed in " + dir_.string());
}

InterchangeReader::InterchangeReader(fs::path dir) : dir_(std::move(dir)) {
  const fs::path path = dir_ / kManifestName;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
    if (manifest.at("format").get<std::string>() != "thzrsma-interchange") {
      throw FormatError("not an interchange manifest: " + path.string());
    }
    if (manifest.at("version").get<int>() != kInterchangeVersion) {
      throw FormatError("unsupported interchange version in " + path.string());
    }
    meta_ = manifest.value("meta", nlohmann::json::object());
    for (const auto& [name, t] : manifest.at("tensors").items()) {
      TensorInfo info;
      info.name = name;
      info.file = t.at("file").get<std::string>();
      const auto dtype = t.at("dtype").get<std::string>();
      if (dtype == "complex64") info.dtype = DType::kComplex64;
      else if (dtype == "float32") info.dtype = DType::kFloat32;
      else throw FormatError("tensor " + name + ": unknown dtype " + dtype);
      info.shape = t.at("shape").get<std::vector<std::size_t>>();
      info.axes = t.at("axes").get<std::vector<std::string>>();
      if (info.axes.size() != info.shape.size()) {
        throw FormatError("tensor " + name + ": shape/axes rank mismatch");
      }
      if (info.file.find("..") != std::string::npos || fs::path(info.file).is_absolute()) {
        throw FormatError("tensor " + name + ": file must be relative to the manifest");
      }
      tensors_[name] = std::move(info);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed manifest " + path.string() + ": " + e.what());
  }
}

bool InterchangeReader::has(const std::string& name) const { return tensors_.count(name) > 0; }

const TensorInfo& InterchangeReader::info(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw FormatError("missing tensor '" + name + "' in " + dir_.string());
  return it->second;
}

std::vector<std::string> InterchangeReader::names() const {
  std::vector<std::string> out;
  for (const auto& [name, info] : tensors_) out.push_back(name);
  return out;
}

std::vector<float> InterchangeReader::read_raw(const TensorInfo& info) const {
  const fs::path path = dir_ / info.file;
  const std::size_t expected = info.element_count() * floats_per_element(info.dtype);
  std::error_code ec;
  const auto size = fs::file_size(path, ec);
  if (ec) throw IoError("cannot stat " + path.string() + ": " + ec.message());
  if (size != expected * sizeof(float)) {
    throw FormatError("tensor " + info.name + ": file holds " + std::to_string(size) +
                      " bytes, manifest shape needs " + std::to_string(expected * sizeof(float)));
  }
  std::vector<float> raw(expected);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(size));
  if (!in) throw IoError("read failed: " + path.string());
  return raw;
}

std::vector<cdouble> InterchangeReader::complex(const std::string& name) const {
  const TensorInfo& t = info(name);
  if (t.dtype != DType::kComplex64) throw FormatError("tensor " + name + " is not complex64");
  const auto raw = read_raw(t);
  std::vector<cdouble> out(t.element_count());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {raw[2 * i], raw[2 * i + 1]};
  return out;
}

std::vector<double> InterchangeReader::real(const std::string& name) const {
  const TensorInfo& t = info(name);
  if (t.dtype != DType::kFloat32) throw FormatError("tensor " + name + " is not float32");
  const auto raw = read_raw(t);
  return {raw.begin(), raw.end()};
}

}  // namespace thzrsma
