#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "thzrsma/types.hpp"

namespace thzrsma {

/// On-disk tensor exchange: a directory holding `manifest.json` plus one raw
/// little-endian float32 file per tensor. Complex tensors interleave real and
/// imaginary parts; all tensors are row-major in the axis order listed in the
/// manifest.
inline constexpr const char* kManifestName = "manifest.json";
inline constexpr int kInterchangeVersion = 1;

enum class DType { kFloat32, kComplex64 };

const char* dtype_name(DType dtype);

struct TensorInfo {
  std::string name;
  std::string file;
  DType dtype = DType::kFloat32;
  std::vector<std::size_t> shape;
  std::vector<std::string> axes;

  std::size_t element_count() const;
};

class InterchangeWriter {
 public:
  explicit InterchangeWriter(std::filesystem::path dir);

  void set_meta(const std::string& key, nlohmann::json value);
  void add_complex(const std::string& name, std::vector<std::size_t> shape,
                   std::vector<std::string> axes, std::span<const cdouble> data);
  void add_real(const std::string& name, std::vector<std::size_t> shape,
                std::vector<std::string> axes, std::span<const double> data);
  /// Writes the manifest. Tensors are already on disk when add_* returns.
  void finish();

  const std::filesystem::path& dir() const { return dir_; }

 private:
  void register_tensor(TensorInfo info);

  std::filesystem::path dir_;
  nlohmann::json meta_ = nlohmann::json::object();
  std::map<std::string, TensorInfo> tensors_;
};

class InterchangeReader {
 public:
  /// Parses and validates the manifest; throws IoError/FormatError.
  explicit InterchangeReader(std::filesystem::path dir);

  bool has(const std::string& name) const;
  const TensorInfo& info(const std::string& name) const;
  std::vector<cdouble> complex(const std::string& name) const;
  std::vector<double> real(const std::string& name) const;
  const nlohmann::json& meta() const { return meta_; }
  const std::filesystem::path& dir() const { return dir_; }
  std::vector<std::string> names() const;

 private:
  std::vector<float> read_raw(const TensorInfo& info) const;

  std::filesystem::path dir_;
  nlohmann::json meta_;
  std::map<std::string, TensorInfo> tensors_;
};

}  // namespace thzrsma
