#include <algorithm>
#include <cstdio>
#include <fstream>

#include "harness_internal.hpp"
#include "thzrsma/error.hpp"
#include "thzrsma/interchange.hpp"

#ifndef THZRSMA_VERSION
#define THZRSMA_VERSION "0.0.0"
#endif

namespace thzrsma {

std::string version_string() { return THZRSMA_VERSION; }

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

void check_scheme_index(const ResultTable& table, std::size_t index) {
  if (index >= table.schemes.size()) throw DimensionError("scheme index out of range");
}

}  // namespace

std::string results_csv(const ResultTable& table) {
  std::string out = "sweep_value,csi_nmse_mean,csi_nmse_std,sigma_h_sq";
  for (const auto& s : table.schemes) out += "," + s + "_rw_mean," + s + "_rw_std";
  out += '\n';
  for (const auto& row : table.rows) {
    out += fmt(row.x) + ',' + fmt(row.csi_nmse_mean) + ',' + fmt(row.csi_nmse_std) + ',' +
           fmt(row.sigma_h_sq);
    for (const auto& s : row.schemes) out += ',' + fmt(s.rw_mean) + ',' + fmt(s.rw_std);
    out += '\n';
  }
  return out;
}

std::string plot_data(const ResultTable& table, std::size_t scheme_index) {
  check_scheme_index(table, scheme_index);
  std::string out = "# " + table.sweep_variable + " " + table.schemes[scheme_index] +
                    "_rw_mean " + table.schemes[scheme_index] + "_rw_std\n";
  for (const auto& row : table.rows) {
    const auto& s = row.schemes[scheme_index];
    out += fmt(row.x) + ' ' + fmt(s.rw_mean) + ' ' + fmt(s.rw_std) + '\n';
  }
  return out;
}

std::string cdf_csv(const ResultTable& table, std::size_t scheme_index) {
  check_scheme_index(table, scheme_index);
  std::string out = "quantile";
  for (const auto& row : table.rows) out += "," + table.sweep_variable + "=" + fmt(row.x);
  out += '\n';
  for (int q = 0; q < kQuantileCount; ++q) {
    out += fmt(static_cast<double>(q) / (kQuantileCount - 1));
    for (const auto& row : table.rows) {
      out += ',' + fmt(row.schemes[scheme_index].user_rate_quantiles[static_cast<std::size_t>(q)]);
    }
    out += '\n';
  }
  return out;
}

std::vector<std::filesystem::path> emit_outputs(const ResultTable& table,
                                                const std::filesystem::path& dir,
                                                unsigned formats) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& name, const std::string& text) {
    write_text(dir / name, text);
    written.push_back(dir / name);
  };
  if (formats & kFormatCsv) emit("results.csv", results_csv(table));
  for (std::size_t s = 0; s < table.schemes.size(); ++s) {
    if (formats & kFormatPlot) emit("plot_" + table.schemes[s] + ".dat", plot_data(table, s));
    if (formats & kFormatCdf) emit("cdf_" + table.schemes[s] + ".csv", cdf_csv(table, s));
  }
  if (formats & kFormatMeta) {
    nlohmann::json meta = table.metadata;
    meta["columns"] = {"sweep_value", "csi_nmse_mean", "csi_nmse_std", "sigma_h_sq"};
    for (const auto& s : table.schemes) {
      meta["columns"].push_back(s + "_rw_mean");
      meta["columns"].push_back(s + "_rw_std");
    }
    nlohmann::json nonmonotone = nlohmann::json::object();
    for (std::size_t s = 0; s < table.schemes.size(); ++s) {
      nlohmann::json counts = nlohmann::json::array();
      for (const auto& row : table.rows) counts.push_back(row.schemes[s].nonmonotone_trials);
      nonmonotone[table.schemes[s]] = counts;
    }
    meta["nonmonotone_trials"] = nonmonotone;
    emit("meta.json", meta.dump(2) + "\n");
  }
  return written;
}

namespace detail {

void write_pilots(InterchangeWriter& writer, const PilotBundle& pilots) {
  const auto q = static_cast<std::size_t>(pilots.num_symbols());
  if (q == 0 || pilots.rf_phases.size() != q || pilots.x_bb.size() != q) {
    throw DimensionError("write_pilots: inconsistent pilot bundle");
  }
  const auto m = static_cast<std::size_t>(pilots.ris_phases.cols());
  const auto mb = static_cast<std::size_t>(pilots.rf_phases.front().rows());
  const auto k = static_cast<std::size_t>(pilots.rf_phases.front().cols());
  const auto nc = static_cast<std::size_t>(pilots.x_bb.front().rows());
  std::vector<double> ris, rf;
  std::vector<cdouble> x;
  for (std::size_t s = 0; s < q; ++s) {
    for (std::size_t j = 0; j < m; ++j) ris.push_back(pilots.ris_phases(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j)));
    const RMatrix& r = pilots.rf_phases[s];
    const CMatrix& b = pilots.x_bb[s];
    if (static_cast<std::size_t>(r.rows()) != mb || static_cast<std::size_t>(r.cols()) != k ||
        static_cast<std::size_t>(b.rows()) != nc || static_cast<std::size_t>(b.cols()) != k) {
      throw DimensionError("write_pilots: ragged pilot bundle");
    }
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
      for (Eigen::Index c = 0; c < r.cols(); ++c) rf.push_back(r(i, c));
    }
    for (Eigen::Index n = 0; n < b.rows(); ++n) {
      for (Eigen::Index c = 0; c < b.cols(); ++c) x.push_back(b(n, c));
    }
  }
  writer.add_real(kPilotRisPhases, {q, m}, {"symbol", "ris_element"}, ris);
  writer.add_real(kPilotRfPhases, {q, mb, k}, {"symbol", "bs_element", "stream"}, rf);
  writer.add_complex(kPilotBaseband, {q, nc, k}, {"symbol", "subcarrier", "stream"}, x);
}

PilotBundle read_pilots(const InterchangeReader& reader) {
  const TensorInfo& ris = reader.info(kPilotRisPhases);
  const TensorInfo& rf = reader.info(kPilotRfPhases);
  const TensorInfo& xb = reader.info(kPilotBaseband);
  if (ris.shape.size() != 2 || rf.shape.size() != 3 || xb.shape.size() != 3) {
    throw FormatError("pilot tensors have the wrong rank");
  }
  const std::size_t q = ris.shape[0];
  if (rf.shape[0] != q || xb.shape[0] != q || rf.shape[2] != xb.shape[2]) {
    throw FormatError("pilot tensors disagree on symbol or stream count");
  }
  const auto ris_data = reader.real(kPilotRisPhases);
  const auto rf_data = reader.real(kPilotRfPhases);
  const auto x_data = reader.complex(kPilotBaseband);
  const auto m = static_cast<Eigen::Index>(ris.shape[1]);
  const auto mb = static_cast<Eigen::Index>(rf.shape[1]);
  const auto k = static_cast<Eigen::Index>(rf.shape[2]);
  const auto nc = static_cast<Eigen::Index>(xb.shape[1]);
  PilotBundle p;
  p.ris_phases.resize(static_cast<Eigen::Index>(q), m);
  std::size_t i_ris = 0, i_rf = 0, i_x = 0;
  for (std::size_t s = 0; s < q; ++s) {
    for (Eigen::Index j = 0; j < m; ++j) p.ris_phases(static_cast<Eigen::Index>(s), j) = ris_data[i_ris++];
    RMatrix r(mb, k);
    for (Eigen::Index i = 0; i < mb; ++i) {
      for (Eigen::Index c = 0; c < k; ++c) r(i, c) = rf_data[i_rf++];
    }
    CMatrix x(nc, k);
    for (Eigen::Index n = 0; n < nc; ++n) {
      for (Eigen::Index c = 0; c < k; ++c) x(n, c) = x_data[i_x++];
    }
    p.rf_phases.push_back(std::move(r));
    p.x_bb.push_back(std::move(x));
  }
  return p;
}

std::vector<std::vector<AwmmseParams>> read_params(const InterchangeReader& reader, int num_ues,
                                                   int num_subcarriers) {
  const TensorInfo& a = reader.info(kAwmmseParams);
  const TensorInfo& g = reader.info(kGramWeights);
  const auto K = static_cast<std::size_t>(num_ues);
  const auto nc = static_cast<std::size_t>(num_subcarriers);
  if (a.shape.size() != 3 || a.shape[1] != nc || a.shape[2] != 3 * K + 1) {
    throw FormatError("awmmse_params must have shape [sample, " + std::to_string(nc) + ", " +
                      std::to_string(3 * K + 1) + "]");
  }
  if (g.shape.size() != 3 || g.shape[0] != a.shape[0] || g.shape[1] != nc || g.shape[2] != 2 * K) {
    throw FormatError("gram_weights must have shape [sample, " + std::to_string(nc) + ", " +
                      std::to_string(2 * K) + "]");
  }
  const auto a_data = reader.complex(kAwmmseParams);
  const auto g_data = reader.real(kGramWeights);
  std::vector<std::vector<AwmmseParams>> out(a.shape[0]);
  std::size_t ia = 0, ig = 0;
  auto real_nonneg = [](cdouble v, const char* what) {
    if (!std::isfinite(v.real()) || v.real() < 0.0) {
      throw FormatError(std::string("awmmse_params: ") + what + " must be finite and >= 0");
    }
    return v.real();
  };
  for (auto& sample : out) {
    sample.resize(nc);
    for (auto& p : sample) {
      p.a_common.resize(num_ues);
      p.a_private.resize(num_ues);
      p.b_private.resize(num_ues);
      p.gram_common.resize(num_ues);
      p.gram_private.resize(num_ues);
      for (int k = 0; k < num_ues; ++k) p.a_common(k) = a_data[ia++];
      for (int k = 0; k < num_ues; ++k) p.a_private(k) = a_data[ia++];
      p.b_common = real_nonneg(a_data[ia++], "b_c");
      for (int k = 0; k < num_ues; ++k) p.b_private(k) = real_nonneg(a_data[ia++], "b");
      for (int k = 0; k < num_ues; ++k) p.gram_common(k) = g_data[ig++];
      for (int k = 0; k < num_ues; ++k) p.gram_private(k) = g_data[ig++];
      if (!p.a_common.allFinite() || !p.a_private.allFinite()) {
        throw FormatError("awmmse_params: non-finite a");
      }
      if (!p.gram_common.allFinite() || !p.gram_private.allFinite() ||
          (p.gram_common.array() < 0.0).any() || (p.gram_private.array() < 0.0).any()) {
        throw FormatError("gram_weights must be finite and >= 0");
      }
    }
  }
  return out;
}

void write_params(InterchangeWriter& writer, const std::vector<std::vector<AwmmseParams>>& params) {
  if (params.empty() || params.front().empty()) throw DimensionError("write_params: nothing to write");
  const std::size_t nc = params.front().size();
  const auto K = static_cast<std::size_t>(params.front().front().num_ues());
  std::vector<cdouble> a;
  std::vector<double> g;
  for (const auto& sample : params) {
    if (sample.size() != nc) throw DimensionError("write_params: ragged subcarrier count");
    for (const auto& p : sample) {
      if (static_cast<std::size_t>(p.num_ues()) != K) throw DimensionError("write_params: ragged K");
      for (Eigen::Index k = 0; k < p.a_common.size(); ++k) a.push_back(p.a_common(k));
      for (Eigen::Index k = 0; k < p.a_private.size(); ++k) a.push_back(p.a_private(k));
      a.emplace_back(p.b_common, 0.0);
      for (Eigen::Index k = 0; k < p.b_private.size(); ++k) a.emplace_back(p.b_private(k), 0.0);
      for (Eigen::Index k = 0; k < p.gram_common.size(); ++k) g.push_back(p.gram_common(k));
      for (Eigen::Index k = 0; k < p.gram_private.size(); ++k) g.push_back(p.gram_private(k));
    }
  }
  writer.add_complex(kAwmmseParams, {params.size(), nc, 3 * K + 1},
                     {"sample", "subcarrier", "parameter"}, a);
  writer.add_real(kGramWeights, {params.size(), nc, 2 * K}, {"sample", "subcarrier", "weight"}, g);
}

std::vector<std::vector<RisUeChannel>> read_channels(const InterchangeReader& reader,
                                                     const std::string& name, int num_ues,
                                                     int num_subcarriers, int num_elements) {
  const TensorInfo& info = reader.info(name);
  if (info.shape.size() != 4 || info.shape[1] != static_cast<std::size_t>(num_ues) ||
      info.shape[2] != static_cast<std::size_t>(num_subcarriers) ||
      info.shape[3] != static_cast<std::size_t>(num_elements)) {
    throw FormatError(name + " must have shape [sample, " + std::to_string(num_ues) + ", " +
                      std::to_string(num_subcarriers) + ", " + std::to_string(num_elements) + "]");
  }
  const auto data = reader.complex(name);
  std::vector<std::vector<RisUeChannel>> out(info.shape[0]);
  std::size_t i = 0;
  for (auto& sample : out) {
    sample.resize(static_cast<std::size_t>(num_ues));
    for (auto& ch : sample) {
      ch.h.resize(num_subcarriers, num_elements);
      for (int n = 0; n < num_subcarriers; ++n) {
        for (int j = 0; j < num_elements; ++j) ch.h(n, j) = data[i++];
      }
      if (!ch.h.allFinite()) throw FormatError(name + ": non-finite entry");
    }
  }
  return out;
}

void write_channels(InterchangeWriter& writer, const std::string& name,
                    const std::vector<std::vector<RisUeChannel>>& channels) {
  if (channels.empty() || channels.front().empty()) throw DimensionError(name + ": nothing to write");
  const std::size_t k = channels.front().size();
  const auto nc = static_cast<std::size_t>(channels.front().front().num_subcarriers());
  const auto m = static_cast<std::size_t>(channels.front().front().num_elements());
  std::vector<cdouble> data;
  data.reserve(channels.size() * k * nc * m);
  for (const auto& sample : channels) {
    if (sample.size() != k) throw DimensionError(name + ": ragged UE count");
    for (const auto& ch : sample) {
      if (static_cast<std::size_t>(ch.h.rows()) != nc || static_cast<std::size_t>(ch.h.cols()) != m) {
        throw DimensionError(name + ": ragged channel shape");
      }
      for (Eigen::Index n = 0; n < ch.h.rows(); ++n) {
        for (Eigen::Index j = 0; j < ch.h.cols(); ++j) data.push_back(ch.h(n, j));
      }
    }
  }
  writer.add_complex(name, {channels.size(), k, nc, m}, {"sample", "ue", "subcarrier", "element"},
                     data);
}

}  // namespace detail

namespace {

using detail::kTagPilotDesign;
using detail::kTagPilotNoise;

constexpr const char* kSplitNames[] = {"train", "val", "test"};

void write_matrix_stack(InterchangeWriter& writer, const std::string& name,
                        const std::vector<CMatrix>& stack, std::vector<std::string> axes) {
  std::vector<cdouble> data;
  for (const CMatrix& m : stack) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    }
  }
  writer.add_complex(name,
                     {stack.size(), static_cast<std::size_t>(stack.front().rows()),
                      static_cast<std::size_t>(stack.front().cols())},
                     std::move(axes), data);
}

void write_matrix(InterchangeWriter& writer, const std::string& name, const CMatrix& m,
                  std::vector<std::string> axes) {
  std::vector<cdouble> data;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  writer.add_complex(name, {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())},
                     std::move(axes), data);
}

}  // namespace

void export_dataset(const ScenarioSpec& spec, const SplitSizes& splits,
                    const std::filesystem::path& dir) {
  spec.validate();
  const SystemConfig& cfg = spec.config;
  const std::size_t sizes[] = {splits.train, splits.validation, splits.test};
  for (std::size_t s : sizes) {
    if (s == 0) throw ConfigError("every dataset split needs at least one sample");
  }
  const ArrayPair geo = build_geometry(cfg);
  const BsRisChannel h_br = gen_bs_ris_channel(cfg, geo.bs, geo.ris);
  const CMatrix f_rf = mf_analog_precoder(subarray_phases(h_br, cfg), cfg);

  InterchangeWriter writer(dir);
  write_matrix_stack(writer, "H_BR", h_br.per_subcarrier, {"subcarrier", "bs_element", "ris_element"});
  write_matrix(writer, "F_RF", f_rf, {"bs_element", "stream"});

  const bool with_pilots = spec.csi.model == CsiModel::kLs;
  std::vector<CMatrix> measurement;
  if (with_pilots) {
    const int q = spec.csi.pilots > 0 ? spec.csi.pilots : cfg.num_elements();
    const PilotBundle pilots = default_pilots(cfg, f_rf, q, spec.csi.pilot_design,
                                              derive_seed(spec.seed, kTagPilotDesign));
    measurement = build_measurement(pilots, h_br, cfg);
    detail::write_pilots(writer, pilots);
  }

  std::uint64_t offset = 0;
  for (int s = 0; s < 3; ++s) {
    const auto count = static_cast<int>(sizes[s]);
    std::vector<std::vector<RisUeChannel>> channels(static_cast<std::size_t>(count));
    std::vector<UePlacement> placements(static_cast<std::size_t>(count));
    std::vector<std::vector<RisUeChannel>> received(with_pilots ? static_cast<std::size_t>(count) : 0);
    detail::parallel_for(count, spec.threads, [&](int i) {
      const std::uint64_t seed = spec.seed ^ (offset + static_cast<std::uint64_t>(i));
      auto sim = detail::simulate_channels(cfg, geo.ris, spec.channel_mode, seed);
      if (with_pilots) {
        auto& rx = received[static_cast<std::size_t>(i)];
        for (std::size_t k = 0; k < sim.channels.size(); ++k) {
          RisUeChannel y;
          y.h = simulate_pilot_rx(measurement, sim.channels[k], cfg.noise_power_w(),
                                  derive_seed(derive_seed(seed, kTagPilotNoise), k))
                    .y;
          rx.push_back(std::move(y));
        }
      }
      channels[static_cast<std::size_t>(i)] = std::move(sim.channels);
      placements[static_cast<std::size_t>(i)] = std::move(sim.placement);
    });
    const std::string split = kSplitNames[s];
    detail::write_channels(writer, "H_RU_" + split, channels);
    std::vector<double> pos;
    for (const auto& p : placements) {
      for (const Vec3& v : p.positions) pos.insert(pos.end(), {v.x, v.y, v.z});
    }
    writer.add_real("ue_positions_" + split,
                    {static_cast<std::size_t>(count), static_cast<std::size_t>(cfg.num_ues), 3},
                    {"sample", "ue", "coordinate"}, pos);
    if (with_pilots) {
      // Same [sample, ue, subcarrier, *] layout; the last axis is the pilot symbol.
      std::vector<cdouble> data;
      for (const auto& sample : received) {
        for (const auto& y : sample) {
          for (Eigen::Index n = 0; n < y.h.rows(); ++n) {
            for (Eigen::Index q = 0; q < y.h.cols(); ++q) data.push_back(y.h(n, q));
          }
        }
      }
      const auto q = static_cast<std::size_t>(measurement.front().rows());
      writer.add_complex("Y_p_" + split,
                         {static_cast<std::size_t>(count), static_cast<std::size_t>(cfg.num_ues),
                          static_cast<std::size_t>(cfg.num_subcarriers), q},
                         {"sample", "ue", "subcarrier", "symbol"}, data);
    }
    offset += sizes[s];
  }

  const nlohmann::json scenario = spec.to_json();
  writer.set_meta("generator", "thzrsma " + version_string());
  writer.set_meta("config", cfg);
  writer.set_meta("config_hash", detail::hex64(detail::fnv1a(scenario.dump())));
  writer.set_meta("seed", spec.seed);
  writer.set_meta("channel_mode", scenario["channel_mode"]);
  writer.set_meta("splits", {{"train", splits.train},
                             {"val", splits.validation},
                             {"test", splits.test},
                             {"total", splits.train + splits.validation + splits.test}});
  writer.set_meta("noise_power_w", cfg.noise_power_w());
  writer.set_meta("tx_power_w", cfg.tx_power_w());
  writer.set_meta("conventions",
                  {{"equivalent_channel", "h_equ = F_RF^H H_BR[n] diag(exp(-j phi)) h_RU[n]"},
                   {"received_pilots", "y[n] = X[n] h_RU[n] + z"},
                   {"awmmse_params", "[a_c (K), a (K), b_c, b (K)]; b stored in the real part"},
                   {"gram_weights", "[c_c (K), c (K)]"}});
  writer.finish();
}

namespace {

class ExternalSource final : public detail::ChannelSource {
 public:
  std::vector<std::vector<RisUeChannel>> truth;
  std::optional<std::vector<std::vector<RisUeChannel>>> csi;
  std::optional<std::vector<RisPhase>> phases;
  std::optional<std::vector<std::vector<AwmmseParams>>> params;
  std::optional<PilotBundle> learned_pilots;

  int trials() const override { return static_cast<int>(truth.size()); }

  detail::TrialInput trial(const detail::PointSetup&, int index, std::uint64_t) const override {
    const auto i = static_cast<std::size_t>(index) % truth.size();
    detail::TrialInput in;
    in.truth = truth[i];
    if (csi) in.csi = (*csi)[i];
    if (phases) in.phase = (*phases)[i];
    if (params) in.params = (*params)[i];
    return in;
  }

  std::optional<PilotBundle> pilots(const SystemConfig&) const override { return learned_pilots; }
};

SystemConfig dataset_config(const InterchangeReader& dataset, const ScenarioSpec& spec) {
  if (!dataset.meta().contains("config")) throw FormatError("dataset manifest has no config");
  SystemConfig cfg;
  merge_json(cfg, dataset.meta().at("config"));
  // Link budget comes from the scenario; geometry and OFDM grid from the dataset.
  cfg.tx_power_dbm = spec.config.tx_power_dbm;
  cfg.noise_power_dbm = spec.config.noise_power_dbm;
  cfg.validate();
  return cfg;
}

std::size_t sample_count(const InterchangeReader& reader, const std::string& name) {
  const TensorInfo& info = reader.info(name);
  if (info.shape.empty()) throw FormatError(name + " has no sample axis");
  return info.shape[0];
}

}  // namespace

ResultTable eval_external(const ScenarioSpec& spec, const std::filesystem::path& dataset_dir,
                          const std::filesystem::path& artifacts_dir) {
  spec.validate();
  const InterchangeReader dataset(dataset_dir);
  const SystemConfig cfg = dataset_config(dataset, spec);
  const int K = cfg.num_ues;
  const int nc = cfg.num_subcarriers;
  const int m = cfg.num_elements();

  // The stored H_BR must be the one the config regenerates.
  const ArrayPair geo = build_geometry(cfg);
  const BsRisChannel h_br = gen_bs_ris_channel(cfg, geo.bs, geo.ris);
  const auto stored = dataset.complex("H_BR");
  if (stored.size() != static_cast<std::size_t>(nc) * m * m) {
    throw FormatError("dataset H_BR shape differs from its config");
  }
  double max_abs = 0.0, max_diff = 0.0;
  std::size_t i = 0;
  for (int n = 0; n < nc; ++n) {
    for (int r = 0; r < m; ++r) {
      for (int c = 0; c < m; ++c, ++i) {
        max_abs = std::max(max_abs, std::abs(h_br[n](r, c)));
        max_diff = std::max(max_diff, std::abs(h_br[n](r, c) - stored[i]));
      }
    }
  }
  if (max_diff > 1e-5 * max_abs) throw FormatError("dataset H_BR does not match its config");

  ExternalSource source;
  source.truth = detail::read_channels(dataset, "H_RU_test", K, nc, m);
  if (source.truth.empty()) throw FormatError("dataset test split is empty");
  const std::size_t n_test = source.truth.size();

  const bool needs_artifacts = spec.csi.model == CsiModel::kExternal ||
                               spec.ris_design == RisDesign::kExternal ||
                               std::find(spec.schemes.begin(), spec.schemes.end(),
                                         DigitalScheme::kExternal) != spec.schemes.end() ||
                               spec.csi.model == CsiModel::kLs;
  std::optional<InterchangeReader> artifacts;
  if (needs_artifacts) {
    if (artifacts_dir.empty()) throw ConfigError("this scenario needs an artifacts directory");
    artifacts.emplace(artifacts_dir);
  }
  auto check_count = [&](std::size_t count, const char* what) {
    if (count != n_test) {
      throw FormatError(std::string(what) + " holds " + std::to_string(count) +
                        " samples, the test split " + std::to_string(n_test));
    }
  };
  if (spec.csi.model == CsiModel::kExternal) {
    source.csi = detail::read_channels(*artifacts, detail::kCsiEstimate, K, nc, m);
    check_count(source.csi->size(), detail::kCsiEstimate);
  }
  if (spec.ris_design == RisDesign::kExternal) {
    check_count(sample_count(*artifacts, kRisPhasesTensor), kRisPhasesTensor);
    std::vector<RisPhase> phases;
    for (std::size_t s = 0; s < n_test; ++s) {
      phases.push_back(load_external_phases(*artifacts, static_cast<int>(s), m));
    }
    source.phases = std::move(phases);
  }
  if (std::find(spec.schemes.begin(), spec.schemes.end(), DigitalScheme::kExternal) !=
      spec.schemes.end()) {
    source.params = detail::read_params(*artifacts, K, nc);
    check_count(source.params->size(), detail::kAwmmseParams);
  }
  if (spec.csi.model == CsiModel::kLs && artifacts->has(detail::kPilotRisPhases)) {
    source.learned_pilots = detail::read_pilots(*artifacts);
  }

  ResultTable table = detail::run_pipeline(spec, source, cfg, {});
  table.metadata["dataset"] = dataset_dir.string();
  table.metadata["artifacts"] = artifacts_dir.string();
  return table;
}

std::string validate_artifacts(const ScenarioSpec& spec, const std::filesystem::path& dir) {
  spec.config.validate();
  const InterchangeReader reader(dir);
  const SystemConfig& cfg = spec.config;
  const int K = cfg.num_ues;
  const int nc = cfg.num_subcarriers;
  const int m = cfg.num_elements();
  std::string summary;
  int checked = 0;
  if (reader.has(kRisPhasesTensor)) {
    const std::size_t n = sample_count(reader, kRisPhasesTensor);
    for (std::size_t s = 0; s < n; ++s) load_external_phases(reader, static_cast<int>(s), m);
    summary += std::string(kRisPhasesTensor) + ": " + std::to_string(n) + " samples ok\n";
    ++checked;
  }
  if (reader.has(detail::kAwmmseParams) || reader.has(detail::kGramWeights)) {
    const auto params = detail::read_params(reader, K, nc);
    summary += std::string(detail::kAwmmseParams) + ": " + std::to_string(params.size()) +
               " samples ok\n";
    ++checked;
  }
  if (reader.has(detail::kCsiEstimate)) {
    const auto h = detail::read_channels(reader, detail::kCsiEstimate, K, nc, m);
    summary += std::string(detail::kCsiEstimate) + ": " + std::to_string(h.size()) + " samples ok\n";
    ++checked;
  }
  if (reader.has(detail::kPilotRisPhases) || reader.has(detail::kPilotRfPhases) ||
      reader.has(detail::kPilotBaseband)) {
    const PilotBundle pilots = detail::read_pilots(reader);
    validate_pilots(pilots, cfg);
    summary += "pilots: " + std::to_string(pilots.num_symbols()) + " symbols ok\n";
    ++checked;
  }
  if (checked == 0) throw FormatError("no recognised artifact tensors in " + dir.string());
  return summary;
}

}  // namespace thzrsma
